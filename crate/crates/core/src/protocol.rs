//! Protocol-driven pipeline: parse a pre-registered config, run the
//! conceptual → design → balance → lock → analysis stages in order, and emit
//! a report bundle of JSON documents plus tidy CSVs.
//!
//! The config file itself is the protocol artifact: the design lock hashes
//! its raw bytes together with the canonical design, so any post-hoc edit of
//! either is detected before outcomes are unsealed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::balance::{balance_report, love_rows, BalanceReport};
use crate::dataset::{
    load_csv, summarize, BlindedDataset, Covariate, CovariateSummary, DesignLock, SchemaMap, Sex,
    Term,
};
use crate::design::{
    caliper_match, coarsened_stratify, design_none, discard_nonoverlap, fit_propensity, freeze,
    optimal_match, trim_by_ranges, unseal_outcomes, AcceptanceCriterion, AnalysisDataset, Binning,
    DesignResult, ExperimentKind, TrimRule,
};
use crate::error::{Error, Result};
use crate::inference::{
    ace_posterior, fiducial_interval, fisher_test, interaction_screen, neyman_crude, ols_adjusted,
    posterior_t, GridSpec, RandomizationScheme, Statistic,
};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub path: PathBuf,
    #[serde(default)]
    pub schema: Option<SchemaMap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignMethod {
    None,
    Trim,
    Stratify,
    PsCaliper,
    OptimalPair,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrimRuleConfig {
    /// "female", "male", or omitted for both
    #[serde(default)]
    pub sex: Option<String>,
    pub age_range: (f64, f64),
    pub height_range: (f64, f64),
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct StratifyConfig {
    #[serde(default)]
    pub age_cutpoints: Vec<f64>,
    #[serde(default)]
    pub height_cutpoints: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropensityConfig {
    /// nested candidate term lists, most parsimonious first
    pub candidates: Vec<Vec<String>>,
    /// re-estimate the score on the overlap set before matching
    #[serde(default = "default_true")]
    pub refit_after_overlap: bool,
}

fn default_true() -> bool {
    true
}

impl Default for PropensityConfig {
    fn default() -> Self {
        PropensityConfig {
            candidates: vec![vec!["age".into(), "height".into(), "sex".into()]],
            refit_after_overlap: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaliperConfig {
    #[serde(default = "default_sd_multiple")]
    pub sd_multiple: f64,
}

fn default_sd_multiple() -> f64 {
    1.0
}

impl Default for CaliperConfig {
    fn default() -> Self {
        CaliperConfig { sd_multiple: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimalConfig {
    #[serde(default = "default_covariates")]
    pub covariates: Vec<String>,
}

fn default_covariates() -> Vec<String> {
    vec!["age".into(), "height".into(), "sex".into()]
}

impl Default for OptimalConfig {
    fn default() -> Self {
        OptimalConfig {
            covariates: default_covariates(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub method: DesignMethod,
    #[serde(default)]
    pub trim_rules: Vec<TrimRuleConfig>,
    #[serde(default)]
    pub stratify: StratifyConfig,
    #[serde(default)]
    pub propensity: PropensityConfig,
    #[serde(default)]
    pub caliper: CaliperConfig,
    #[serde(default)]
    pub optimal: OptimalConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceConfig {
    #[serde(default = "default_smd_caliper")]
    pub age_smd: f64,
    #[serde(default = "default_smd_caliper")]
    pub height_smd: f64,
    #[serde(default = "default_prop_caliper")]
    pub sex_proportion: f64,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig {
            age_smd: default_smd_caliper(),
            height_smd: default_smd_caliper(),
            sex_proportion: default_prop_caliper(),
        }
    }
}

fn default_smd_caliper() -> f64 {
    0.2
}

fn default_prop_caliper() -> f64 {
    0.1
}

impl AcceptanceConfig {
    fn criterion(&self) -> AcceptanceCriterion {
        let mut smd = BTreeMap::new();
        smd.insert(Covariate::Age, self.age_smd);
        smd.insert(Covariate::Height, self.height_smd);
        let mut prop = BTreeMap::new();
        prop.insert(Covariate::Sex, self.sex_proportion);
        AcceptanceCriterion {
            smd_calipers: smd,
            proportion_calipers: prop,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default)]
    pub acceptance: AcceptanceConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisEntry {
    pub method: String,
    #[serde(default)]
    pub statistic: Option<String>,
    #[serde(default)]
    pub scheme: Option<String>,
    #[serde(default)]
    pub tau0: Option<f64>,
    #[serde(default)]
    pub grid_lo: Option<f64>,
    #[serde(default)]
    pub grid_hi: Option<f64>,
    #[serde(default)]
    pub grid_step: Option<f64>,
    /// write raw statistic/posterior draws alongside the result
    #[serde(default)]
    pub dump_draws: bool,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub draws: Option<usize>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// plausibility screen level
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub input: InputSection,
    pub design: DesignSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub analysis: Vec<AnalysisEntry>,
    #[serde(default)]
    pub run: RunSection,
}

fn parse_term(s: &str) -> Result<Term> {
    Ok(match s {
        "age" => Term::Age,
        "age_sq" => Term::AgeSq,
        "height" => Term::Height,
        "height_sq" => Term::HeightSq,
        "sex" => Term::Sex,
        "sex_age" => Term::SexAge,
        "sex_height" => Term::SexHeight,
        other => return Err(Error::Config(format!("unknown term `{other}`"))),
    })
}

fn parse_covariate(s: &str) -> Result<Covariate> {
    Ok(match s {
        "age" => Covariate::Age,
        "height" => Covariate::Height,
        "sex" => Covariate::Sex,
        other => return Err(Error::Config(format!("unknown covariate `{other}`"))),
    })
}

fn parse_statistic(s: &str) -> Result<Statistic> {
    Ok(match s {
        "welch_t" => Statistic::WelchT,
        "regression_t" => Statistic::RegressionT,
        "paired_t" => Statistic::PairedT,
        "bayes_t" => Statistic::BayesT,
        other => return Err(Error::Config(format!("unknown statistic `{other}`"))),
    })
}

fn parse_scheme(s: &str) -> Result<ExperimentKind> {
    Ok(match s {
        "completely-randomized" => ExperimentKind::CompletelyRandomized,
        "rerandomized" => ExperimentKind::Rerandomized,
        "paired" => ExperimentKind::Paired,
        other => return Err(Error::Config(format!("unknown scheme `{other}`"))),
    })
}

impl ProtocolConfig {
    pub fn parse(text: &str) -> Result<ProtocolConfig> {
        let cfg: ProtocolConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural validation, before any data is read.
    pub fn validate(&self) -> Result<()> {
        let mc = self.analysis.iter().any(|a| {
            matches!(a.method.as_str(), "fisher" | "fiducial" | "bayes" | "mixed")
        });
        if mc && (self.run.seed.is_none() || self.run.draws.is_none()) {
            return Err(Error::Config(
                "run.seed and run.draws are required when Monte-Carlo analyses are listed".into(),
            ));
        }
        let pairing = matches!(
            self.design.method,
            DesignMethod::PsCaliper | DesignMethod::OptimalPair
        );
        for a in &self.analysis {
            match a.method.as_str() {
                "crude" | "adjusted" | "interactions" => {}
                "bayes" => {}
                "fisher" | "fiducial" | "mixed" => {
                    let scheme = a.scheme.as_deref().ok_or_else(|| {
                        Error::Config(format!("analysis `{}` needs a scheme", a.method))
                    })?;
                    let kind = parse_scheme(scheme)?;
                    let stat = match a.method.as_str() {
                        "mixed" => Statistic::BayesT,
                        _ => parse_statistic(a.statistic.as_deref().ok_or_else(|| {
                            Error::Config(format!("analysis `{}` needs a statistic", a.method))
                        })?)?,
                    };
                    if kind == ExperimentKind::Paired && !pairing {
                        return Err(Error::Config(
                            "paired scheme requires a pairing design (ps-caliper or optimal-pair)"
                                .into(),
                        ));
                    }
                    if stat == Statistic::PairedT && kind != ExperimentKind::Paired {
                        return Err(Error::Config(
                            "paired_t statistic requires the paired scheme".into(),
                        ));
                    }
                    if stat == Statistic::PairedT && !pairing {
                        return Err(Error::Config(
                            "paired_t statistic requires a pairing design".into(),
                        ));
                    }
                }
                other => return Err(Error::Config(format!("unknown analysis `{other}`"))),
            }
        }
        if self.design.method == DesignMethod::Trim && self.design.trim_rules.is_empty() {
            return Err(Error::Config("trim design needs trim_rules".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> SchemaMap {
        self.input.schema.clone().unwrap_or_default()
    }

    fn trim_rules(&self) -> Result<Vec<TrimRule>> {
        self.design
            .trim_rules
            .iter()
            .map(|r| {
                let sex = match r.sex.as_deref() {
                    None => None,
                    Some("female") | Some("F") | Some("f") => Some(Sex::Female),
                    Some("male") | Some("M") | Some("m") => Some(Sex::Male),
                    Some(other) => {
                        return Err(Error::Config(format!("unknown sex `{other}` in trim rule")))
                    }
                };
                Ok(TrimRule {
                    sex,
                    age_range: r.age_range,
                    height_range: r.height_range,
                })
            })
            .collect()
    }

    fn candidates(&self) -> Result<Vec<Vec<Term>>> {
        self.design
            .propensity
            .candidates
            .iter()
            .map(|c| c.iter().map(|s| parse_term(s)).collect())
            .collect()
    }

    pub fn alpha(&self) -> f64 {
        self.run.alpha.unwrap_or(0.05)
    }
}

/// Run the configured design method on the blinded dataset.
pub fn build_design(cfg: &ProtocolConfig, ds: &BlindedDataset) -> Result<DesignResult> {
    let design = match cfg.design.method {
        DesignMethod::None => design_none(ds),
        DesignMethod::Trim => trim_by_ranges(ds, &cfg.trim_rules()?)?,
        DesignMethod::Stratify => {
            let s = &cfg.design.stratify;
            let bins = if s.age_cutpoints.is_empty() && s.height_cutpoints.is_empty() {
                Binning::sturges(ds)
            } else {
                Binning {
                    age_cutpoints: s.age_cutpoints.clone(),
                    height_cutpoints: s.height_cutpoints.clone(),
                }
            };
            coarsened_stratify(ds, &bins)?
        }
        DesignMethod::PsCaliper | DesignMethod::OptimalPair => {
            let pm = fit_propensity(ds, &cfg.candidates()?)?;
            let overlap = discard_nonoverlap(ds, &pm)?;
            if cfg.design.method == DesignMethod::OptimalPair {
                let covs: Vec<Covariate> = cfg
                    .design
                    .optimal
                    .covariates
                    .iter()
                    .map(|s| parse_covariate(s))
                    .collect::<Result<_>>()?;
                optimal_match(ds, &overlap, &covs)?
            } else {
                let pm_match = if cfg.design.propensity.refit_after_overlap {
                    let restricted = ds.restrict(&overlap.retained)?;
                    fit_propensity(&restricted, std::slice::from_ref(&pm.terms))?
                } else {
                    pm
                };
                let mut design =
                    caliper_match(ds, &overlap, &pm_match, cfg.design.caliper.sd_multiple)?;
                // rerandomized analyses need the criterion frozen with the design
                design.experiment.acceptance = Some(cfg.experiment.acceptance.criterion());
                design
            }
        }
    };
    design.validate()?;
    Ok(design)
}

/// One analysis output, tagged with its config entry.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisOutput {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    pub result: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Row {
    pub n: usize,
    pub treated_fraction: f64,
    pub male_fraction: f64,
    pub summary: CovariateSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_raw: String,
    pub lock_hash: String,
    pub seed: Option<u64>,
    pub draws: Option<usize>,
    pub version: String,
}

/// Everything one protocol run produces.
#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub table1: Table1Row,
    pub design: DesignResult,
    pub lock: DesignLock,
    pub balance: BalanceReport,
    pub analyses: Vec<AnalysisOutput>,
    pub provenance: Provenance,
}

/// Run every configured analysis against an unsealed dataset.
pub fn run_analyses(
    cfg: &ProtocolConfig,
    ad: &AnalysisDataset,
    threads: usize,
) -> Result<Vec<AnalysisOutput>> {
    let seed = cfg.run.seed.unwrap_or(0);
    let draws = cfg.run.draws.unwrap_or(0);
    let mut out = Vec::new();
    for entry in &cfg.analysis {
        let value = match entry.method.as_str() {
            "crude" => serde_json::to_value(neyman_crude(ad)?)?,
            "adjusted" => serde_json::to_value(ols_adjusted(ad, &Covariate::ALL)?)?,
            "interactions" => serde_json::to_value(interaction_screen(ad)?)?,
            "bayes" => {
                let p = ace_posterior(ad, draws, seed, threads)?;
                let t = posterior_t(&p)?;
                let mut v = serde_json::json!({
                    "mean": p.mean,
                    "sd": p.sd,
                    "interval": [p.q025, p.q975],
                    "posterior_t": t,
                    "draws": p.draws.len(),
                    "seed": p.seed,
                });
                if entry.dump_draws {
                    v["raw_draws"] = serde_json::to_value(&p.draws)?;
                }
                v
            }
            "fisher" | "mixed" => {
                let kind = parse_scheme(entry.scheme.as_deref().unwrap())?;
                let scheme = RandomizationScheme::for_design(ad, kind)?;
                let stat = if entry.method == "mixed" {
                    Statistic::BayesT
                } else {
                    parse_statistic(entry.statistic.as_deref().unwrap())?
                };
                let mut r = fisher_test(
                    ad,
                    &scheme,
                    stat,
                    entry.tau0.unwrap_or(0.0),
                    draws,
                    seed,
                    threads,
                )?;
                if !entry.dump_draws {
                    r.null_draws.clear();
                }
                serde_json::to_value(r)?
            }
            "fiducial" => {
                let kind = parse_scheme(entry.scheme.as_deref().unwrap())?;
                let scheme = RandomizationScheme::for_design(ad, kind)?;
                let stat = parse_statistic(entry.statistic.as_deref().unwrap())?;
                let mut grid = GridSpec::default();
                if let Some(lo) = entry.grid_lo {
                    grid.lo = lo;
                }
                if let Some(hi) = entry.grid_hi {
                    grid.hi = hi;
                }
                if let Some(step) = entry.grid_step {
                    grid.step = step;
                }
                let r = fiducial_interval(ad, &scheme, stat, 0.95, grid, draws, seed, threads)?;
                serde_json::to_value(r)?
            }
            other => return Err(Error::Config(format!("unknown analysis `{other}`"))),
        };
        out.push(AnalysisOutput {
            method: entry.method.clone(),
            scheme: entry.scheme.clone(),
            result: value,
        });
    }
    Ok(out)
}

fn table1_row(ds: &BlindedDataset, design: &DesignResult) -> Result<Table1Row> {
    let restricted = ds.restrict(&design.retained)?;
    let s = summarize(&restricted);
    Ok(Table1Row {
        n: s.n,
        treated_fraction: s.treated_fraction,
        male_fraction: s.male_fraction,
        summary: s,
    })
}

/// Execute all stages of the protocol and assemble the bundle.
/// `raw_config` must be the exact bytes of the protocol file; they are part
/// of the lock.
pub fn run_protocol(cfg: &ProtocolConfig, raw_config: &str) -> Result<ReportBundle> {
    let threads = cfg.run.threads.unwrap_or(1);
    let ds = load_csv(&cfg.input.path, &cfg.schema())?;
    let design = build_design(cfg, &ds)?;
    let balance = balance_report(&design, &ds, cfg.alpha())?;
    let lock = freeze(&design, raw_config)?;
    let ad = unseal_outcomes(&ds, &lock, &design, raw_config)?;
    let analyses = run_analyses(cfg, &ad, threads)?;
    Ok(ReportBundle {
        table1: table1_row(&ds, &design)?,
        balance,
        analyses,
        provenance: Provenance {
            config_raw: raw_config.to_string(),
            lock_hash: lock.hash.clone(),
            seed: cfg.run.seed,
            draws: cfg.run.draws,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        design,
        lock,
    })
}

impl ReportBundle {
    /// Write the bundle: JSON master documents plus tidy CSVs.
    /// `inference.json` contains no timestamps, so same-seed reruns are
    /// byte-identical.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let write = |name: &str, bytes: &[u8]| -> Result<()> {
            std::fs::write(dir.join(name), bytes)?;
            Ok(())
        };
        write(
            "design.json",
            &serde_json::to_vec_pretty(&self.design)?,
        )?;
        write("lock.json", &serde_json::to_vec_pretty(&self.lock)?)?;
        write(
            "balance.json",
            &serde_json::to_vec_pretty(&self.balance)?,
        )?;
        write(
            "inference.json",
            &serde_json::to_vec_pretty(&self.analyses)?,
        )?;
        write(
            "provenance.json",
            &serde_json::to_vec_pretty(&self.provenance)?,
        )?;
        write("table1.csv", table1_csv(&self.table1).as_bytes())?;
        write("table2.csv", table2_csv(&self.balance).as_bytes())?;
        write("table3.csv", table3_csv(&self.analyses).as_bytes())?;
        write("balance_love.csv", love_csv(&self.balance).as_bytes())?;
        write("balance_ks.csv", ks_csv(&self.balance).as_bytes())?;
        if let Some(pd) = &self.balance.pair_distances {
            let mut s = String::from("pair_index,distance\n");
            for (i, d) in pd.distances.iter().enumerate() {
                s.push_str(&format!("{i},{d}\n"));
            }
            write("pair_distances.csv", s.as_bytes())?;
        }
        // raw-draw dumps for external histograms, when an analysis kept them
        for (i, a) in self.analyses.iter().enumerate() {
            for key in ["null_draws", "raw_draws"] {
                if let Some(arr) = a.result.get(key).and_then(|v| v.as_array()) {
                    if arr.is_empty() {
                        continue;
                    }
                    let mut s = String::from("draw,value\n");
                    for (k, v) in arr.iter().enumerate() {
                        s.push_str(&format!("{k},{}\n", v.as_f64().unwrap_or(f64::NAN)));
                    }
                    write(&format!("draws_{i}_{}.csv", a.method), s.as_bytes())?;
                }
            }
        }
        Ok(())
    }
}

fn table1_csv(row: &Table1Row) -> String {
    let mut s = String::from("variable,n,min,q25,mean,median,q75,max\n");
    let v = &row.summary.age;
    s.push_str(&format!(
        "age,{},{},{},{:.4},{},{},{}\n",
        row.n, v.min, v.q25, v.mean, v.median, v.q75, v.max
    ));
    let v = &row.summary.height;
    s.push_str(&format!(
        "height,{},{},{},{:.4},{},{},{}\n",
        row.n, v.min, v.q25, v.mean, v.median, v.q75, v.max
    ));
    s.push_str(&format!(
        "treated,{},0,0,{:.4},0,0,1\n",
        row.n, row.treated_fraction
    ));
    s.push_str(&format!(
        "male,{},0,0,{:.4},0,0,1\n",
        row.n, row.male_fraction
    ));
    s
}

fn table2_csv(b: &BalanceReport) -> String {
    let mut s =
        String::from("group,n,age_mean,age_sd,height_mean,height_sd,male_fraction\n");
    for (name, g) in [("treated", &b.table.treated), ("control", &b.table.control)] {
        s.push_str(&format!(
            "{name},{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
            g.n, g.age_mean, g.age_sd, g.height_mean, g.height_sd, g.male_fraction
        ));
    }
    s
}

fn table3_csv(analyses: &[AnalysisOutput]) -> String {
    let mut s = String::from("method,scheme,n,estimate,lower,upper,p_value\n");
    for a in analyses {
        let r = &a.result;
        let num = |k: &str| -> String {
            r.get(k)
                .and_then(|v| v.as_f64())
                .map(|v| format!("{v:.6}"))
                .unwrap_or_default()
        };
        let interval = r
            .get("interval")
            .and_then(|v| v.as_array())
            .map(|arr| {
                (
                    arr[0].as_f64().unwrap_or(f64::NAN),
                    arr[1].as_f64().unwrap_or(f64::NAN),
                )
            })
            .or_else(|| {
                match (r.get("lower").and_then(|v| v.as_f64()), r.get("upper").and_then(|v| v.as_f64())) {
                    (Some(a), Some(b)) => Some((a, b)),
                    _ => None,
                }
            });
        let (lo, hi) = interval
            .map(|(a, b)| (format!("{a:.6}"), format!("{b:.6}")))
            .unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{lo},{hi},{}\n",
            a.method,
            a.scheme.clone().unwrap_or_default(),
            r.get("n").and_then(|v| v.as_u64()).map(|v| v.to_string()).unwrap_or_default(),
            if !num("estimate").is_empty() { num("estimate") } else { num("mean") },
            num("p_value"),
        ));
    }
    s
}

fn love_csv(b: &BalanceReport) -> String {
    let mut s = String::from("term,phase,value\n");
    for row in love_rows(b) {
        s.push_str(&format!("{},{},{}\n", row.term.name(), row.phase, row.value));
    }
    s
}

fn ks_csv(b: &BalanceReport) -> String {
    let mut s = String::from("covariate,phase,statistic,p_value\n");
    for row in &b.ks {
        s.push_str(&format!(
            "{},{},{},{}\n",
            row.covariate.name(),
            row.phase,
            row.statistic,
            row.p_value
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[input]
path = "data/fev.csv"

[design]
method = "none"

[[analysis]]
method = "crude"
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = ProtocolConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.design.method, DesignMethod::None);
        assert_eq!(cfg.analysis.len(), 1);
    }

    #[test]
    fn mc_analysis_without_seed_is_rejected() {
        let text = r#"
[input]
path = "data/fev.csv"
[design]
method = "ps-caliper"
[[analysis]]
method = "fisher"
statistic = "welch_t"
scheme = "completely-randomized"
"#;
        assert!(matches!(
            ProtocolConfig::parse(text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn paired_statistic_with_non_pairing_design_is_rejected() {
        let text = r#"
[input]
path = "data/fev.csv"
[design]
method = "stratify"
[[analysis]]
method = "fisher"
statistic = "paired_t"
scheme = "paired"
[run]
seed = 1
draws = 10
"#;
        assert!(matches!(
            ProtocolConfig::parse(text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn unknown_fields_are_usage_errors() {
        let text = r#"
[input]
path = "x.csv"
typo_field = 3
[design]
method = "none"
"#;
        assert!(ProtocolConfig::parse(text).is_err());
    }
}
