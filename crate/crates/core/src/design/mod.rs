//! Design-stage strategies: reconstruct a hypothetical randomized experiment
//! from the blinded dataset. Every operation here sees only covariates and
//! treatment indicators; outcomes stay sealed until `freeze` + `unseal`.

pub(crate) mod matching;
mod propensity;

pub use matching::{caliper_match, optimal_match};
pub use propensity::{discard_nonoverlap, fit_propensity, PropensityModel};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::canon::{canonical_json_bytes, sha256_hex};
use crate::dataset::{BlindedDataset, Covariate, DesignLock, Sex};
use crate::error::{Error, Result};
use crate::numerics::{mean, sample_sd};

/// The hypothetical experiments a design can instantiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// (A) Bernoulli-like assignment over everyone.
    BernoulliLike,
    /// (B) complete randomization within trimmed covariate ranges.
    TrimmedComplete,
    /// (C) stratified randomization over coarsened covariate cells.
    Stratified,
    /// (D.1) completely randomized with equal group sizes.
    CompletelyRandomized,
    /// (D.2) equal groups, assignments restricted by a balance criterion.
    Rerandomized,
    /// (E) paired randomization, a coin flip per matched pair.
    Paired,
}

/// Balance calipers that a rerandomized assignment must satisfy:
/// standardized mean differences for continuous covariates, absolute
/// proportion differences for binary ones.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AcceptanceCriterion {
    pub smd_calipers: BTreeMap<Covariate, f64>,
    pub proportion_calipers: BTreeMap<Covariate, f64>,
}

impl Default for AcceptanceCriterion {
    fn default() -> Self {
        let mut smd = BTreeMap::new();
        smd.insert(Covariate::Age, 0.2);
        smd.insert(Covariate::Height, 0.2);
        let mut prop = BTreeMap::new();
        prop.insert(Covariate::Sex, 0.1);
        AcceptanceCriterion {
            smd_calipers: smd,
            proportion_calipers: prop,
        }
    }
}

impl AcceptanceCriterion {
    pub fn validate(&self) -> Result<()> {
        if self
            .smd_calipers
            .values()
            .chain(self.proportion_calipers.values())
            .any(|&c| !(c > 0.0))
        {
            return Err(Error::Config("acceptance calipers must be > 0".into()));
        }
        Ok(())
    }

    /// Does the assignment satisfy every caliper? `columns` maps covariates
    /// to their per-unit values, aligned with `treated`.
    pub fn satisfied(&self, columns: &BTreeMap<Covariate, Vec<f64>>, treated: &[bool]) -> bool {
        for (&cov, &caliper) in &self.smd_calipers {
            let v = &columns[&cov];
            let t: Vec<f64> = v.iter().zip(treated).filter(|(_, &w)| w).map(|(x, _)| *x).collect();
            let c: Vec<f64> = v.iter().zip(treated).filter(|(_, &w)| !w).map(|(x, _)| *x).collect();
            let diff = mean(&t) - mean(&c);
            let pooled = ((sample_sd(&t).powi(2) + sample_sd(&c).powi(2)) / 2.0).sqrt();
            if pooled <= 0.0 {
                // both arms constant: balanced only when the constants agree
                if diff != 0.0 {
                    return false;
                }
                continue;
            }
            if (diff / pooled).abs() > caliper {
                return false;
            }
        }
        for (&cov, &caliper) in &self.proportion_calipers {
            let v = &columns[&cov];
            let t: Vec<f64> = v.iter().zip(treated).filter(|(_, &w)| w).map(|(x, _)| *x).collect();
            let c: Vec<f64> = v.iter().zip(treated).filter(|(_, &w)| !w).map(|(x, _)| *x).collect();
            if (mean(&t) - mean(&c)).abs() > caliper {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HypotheticalExperiment {
    pub kind: ExperimentKind,
    pub n_treated: usize,
    pub n_control: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<AcceptanceCriterion>,
}

impl HypotheticalExperiment {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ExperimentKind::CompletelyRandomized
            | ExperimentKind::Rerandomized
            | ExperimentKind::Paired
                if self.n_treated != self.n_control => {
                    return Err(Error::Consistency(format!(
                        "{:?} requires equal group sizes, got {} vs {}",
                        self.kind, self.n_treated, self.n_control
                    )));
                }
            _ => {}
        }
        if let Some(a) = &self.acceptance {
            a.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    None,
    Trim,
    Stratify,
    /// Intermediate overlap-discarding step of the propensity pipelines.
    Overlap,
    PsCaliper,
    OptimalPair,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Pair {
    pub treated: u32,
    pub control: u32,
    /// Squared Mahalanobis distance in the design's recorded metric.
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct Strata {
    /// unit id → stratum label
    pub assignment: BTreeMap<u32, String>,
    /// stratum label → share of retained treated units
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Discard {
    pub id: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct Provenance {
    pub parameters: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub discarded: Vec<Discard>,
    /// Units over which the pair-distance covariance was estimated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric_pool: Option<Vec<u32>>,
}

/// Output of a design method: retained units plus optional pair/stratum
/// structure and the hypothetical experiment it instantiates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DesignResult {
    pub method: MethodTag,
    pub retained: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strata: Option<Strata>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<Pair>>,
    pub experiment: HypotheticalExperiment,
    pub provenance: Provenance,
}

impl DesignResult {
    pub fn validate(&self) -> Result<()> {
        let set: BTreeSet<u32> = self.retained.iter().copied().collect();
        if set.len() != self.retained.len() {
            return Err(Error::Consistency("duplicate retained id".into()));
        }
        if let Some(pairs) = &self.pairs {
            for p in pairs {
                if !set.contains(&p.treated) || !set.contains(&p.control) {
                    return Err(Error::Consistency(format!(
                        "pair ({}, {}) references a non-retained unit",
                        p.treated, p.control
                    )));
                }
                if p.distance < 0.0 {
                    return Err(Error::Consistency("negative pair distance".into()));
                }
            }
        }
        self.experiment.validate()
    }

    pub fn canonical_bytes(&self) -> Result<Vec<u8>> {
        canonical_json_bytes(self)
    }
}

pub(crate) fn group_sizes(ds: &BlindedDataset, retained: &[u32]) -> (usize, usize) {
    let set: BTreeSet<u32> = retained.iter().copied().collect();
    let t = ds
        .units()
        .iter()
        .filter(|u| set.contains(&u.id) && u.treated)
        .count();
    (t, set.len() - t)
}

/// Design method (a): no design at all; retain everything.
pub fn design_none(ds: &BlindedDataset) -> DesignResult {
    let retained = ds.ids();
    let (nt, nc) = group_sizes(ds, &retained);
    DesignResult {
        method: MethodTag::None,
        retained,
        strata: None,
        pairs: None,
        experiment: HypotheticalExperiment {
            kind: ExperimentKind::BernoulliLike,
            n_treated: nt,
            n_control: nc,
            acceptance: None,
        },
        provenance: Provenance::default(),
    }
}

/// One trimming rule: a predicate on sex plus closed ranges on age and height.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrimRule {
    /// None matches either sex.
    pub sex: Option<Sex>,
    pub age_range: (f64, f64),
    pub height_range: (f64, f64),
}

impl TrimRule {
    fn applies_to(&self, sex: Sex) -> bool {
        self.sex.is_none_or(|s| s == sex)
    }
}

/// Design method (b): trim units outside per-stratum covariate ranges.
/// Ranges are closed; a unit whose sex matches no rule is a configuration
/// error, as is a unit matching more than one rule.
pub fn trim_by_ranges(ds: &BlindedDataset, rules: &[TrimRule]) -> Result<DesignResult> {
    if rules.is_empty() {
        return Err(Error::Config("trim needs at least one rule".into()));
    }
    for r in rules {
        if r.age_range.0 > r.age_range.1 || r.height_range.0 > r.height_range.1 {
            return Err(Error::Config("trim range is not well-ordered".into()));
        }
    }
    let mut retained = Vec::new();
    let mut discarded = Vec::new();
    for u in ds.units() {
        let matching: Vec<&TrimRule> = rules.iter().filter(|r| r.applies_to(u.sex)).collect();
        match matching.len() {
            0 => {
                return Err(Error::Config(format!(
                    "unit {} matches no trimming rule",
                    u.id
                )))
            }
            1 => {}
            _ => {
                return Err(Error::Config(format!(
                    "unit {} matches more than one trimming rule",
                    u.id
                )))
            }
        }
        let rule = matching[0];
        let mut reason = None;
        if u.age < rule.age_range.0 || u.age > rule.age_range.1 {
            reason = Some(format!(
                "age {} outside [{}, {}]",
                u.age, rule.age_range.0, rule.age_range.1
            ));
        } else if u.height < rule.height_range.0 || u.height > rule.height_range.1 {
            reason = Some(format!(
                "height {} outside [{}, {}]",
                u.height, rule.height_range.0, rule.height_range.1
            ));
        }
        match reason {
            None => retained.push(u.id),
            Some(msg) => discarded.push(Discard { id: u.id, reason: msg }),
        }
    }
    if retained.is_empty() {
        return Err(Error::EmptyDesign("trimming removed every unit".into()));
    }
    let (nt, nc) = group_sizes(ds, &retained);
    let mut parameters = BTreeMap::new();
    for (i, r) in rules.iter().enumerate() {
        parameters.insert(
            format!("rule_{i}"),
            format!(
                "sex={:?} age=[{},{}] height=[{},{}]",
                r.sex, r.age_range.0, r.age_range.1, r.height_range.0, r.height_range.1
            ),
        );
    }
    Ok(DesignResult {
        method: MethodTag::Trim,
        retained,
        strata: None,
        pairs: None,
        experiment: HypotheticalExperiment {
            kind: ExperimentKind::TrimmedComplete,
            n_treated: nt,
            n_control: nc,
            acceptance: None,
        },
        provenance: Provenance {
            parameters,
            discarded,
            ..Default::default()
        },
    })
}

/// Cutpoints for coarsened stratification. Sex is always matched exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Binning {
    /// Internal cutpoints (strictly increasing) for age.
    pub age_cutpoints: Vec<f64>,
    /// Internal cutpoints (strictly increasing) for height.
    pub height_cutpoints: Vec<f64>,
}

impl Binning {
    /// Sturges-style default: k = floor(log2 n) + 1 equal-width bins over the
    /// observed range of each continuous covariate.
    pub fn sturges(ds: &BlindedDataset) -> Binning {
        let k = (ds.len() as f64).log2().floor() as usize + 1;
        let cuts = |get: &dyn Fn(&crate::dataset::UnitRecord) -> f64| -> Vec<f64> {
            let vals: Vec<f64> = ds.units().iter().map(get).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (1..k)
                .map(|i| lo + (hi - lo) * i as f64 / k as f64)
                .collect()
        };
        Binning {
            age_cutpoints: cuts(&|u| u.age),
            height_cutpoints: cuts(&|u| u.height),
        }
    }

    fn validate(&self) -> Result<()> {
        for cuts in [&self.age_cutpoints, &self.height_cutpoints] {
            if cuts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("cutpoints must be strictly increasing".into()));
            }
        }
        Ok(())
    }
}

fn bin_index(cuts: &[f64], v: f64) -> usize {
    // right-closed bins: index = count of cutpoints strictly below v
    cuts.iter().filter(|&&c| c < v).count()
}

/// Design method (c): group units by joint coarsened-covariate signature and
/// keep only strata containing both a treated and a control unit. Stratum
/// weights are each stratum's share of retained treated units.
pub fn coarsened_stratify(ds: &BlindedDataset, bins: &Binning) -> Result<DesignResult> {
    bins.validate()?;
    let mut strata_units: BTreeMap<(usize, usize, u8), Vec<u32>> = BTreeMap::new();
    for u in ds.units() {
        let key = (
            bin_index(&bins.age_cutpoints, u.age),
            bin_index(&bins.height_cutpoints, u.height),
            (u.sex == Sex::Male) as u8,
        );
        strata_units.entry(key).or_default().push(u.id);
    }
    let mut retained = Vec::new();
    let mut discarded = Vec::new();
    let mut assignment = BTreeMap::new();
    let mut treated_per_stratum: BTreeMap<String, usize> = BTreeMap::new();
    let mut total_treated = 0usize;
    for (key, ids) in &strata_units {
        let label = format!("a{}-h{}-s{}", key.0, key.1, key.2);
        let n_treated = ids
            .iter()
            .filter(|id| ds.unit(**id).unwrap().treated)
            .count();
        let both = n_treated > 0 && n_treated < ids.len();
        if both {
            for id in ids {
                retained.push(*id);
                assignment.insert(*id, label.clone());
            }
            treated_per_stratum.insert(label.clone(), n_treated);
            total_treated += n_treated;
        } else {
            let why = if n_treated == 0 {
                "stratum has no treated unit"
            } else {
                "stratum has no control unit"
            };
            for id in ids {
                discarded.push(Discard {
                    id: *id,
                    reason: format!("{why} ({label})"),
                });
            }
        }
    }
    if retained.is_empty() {
        return Err(Error::EmptyDesign(
            "no stratum contains both a treated and a control unit".into(),
        ));
    }
    retained.sort_unstable();
    discarded.sort_by_key(|d| d.id);
    let weights: BTreeMap<String, f64> = treated_per_stratum
        .into_iter()
        .map(|(label, t)| (label, t as f64 / total_treated as f64))
        .collect();
    let (nt, nc) = group_sizes(ds, &retained);
    let mut parameters = BTreeMap::new();
    parameters.insert(
        "age_cutpoints".into(),
        format!("{:?}", bins.age_cutpoints),
    );
    parameters.insert(
        "height_cutpoints".into(),
        format!("{:?}", bins.height_cutpoints),
    );
    Ok(DesignResult {
        method: MethodTag::Stratify,
        retained,
        strata: Some(Strata {
            assignment,
            weights,
        }),
        pairs: None,
        experiment: HypotheticalExperiment {
            kind: ExperimentKind::Stratified,
            n_treated: nt,
            n_control: nc,
            acceptance: None,
        },
        provenance: Provenance {
            parameters,
            discarded,
            ..Default::default()
        },
    })
}

/// Freeze a validated design together with the analysis protocol text.
pub fn freeze(design: &DesignResult, protocol: &str) -> Result<DesignLock> {
    design.validate()?;
    let design_hash = sha256_hex(&[&design.canonical_bytes()?]);
    let protocol_hash = sha256_hex(&[protocol.as_bytes()]);
    let hash = sha256_hex(&[design_hash.as_bytes(), protocol_hash.as_bytes()]);
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_else(|_| "0".into());
    Ok(DesignLock {
        design_id: format!("{:?}-{}-{}", design.method, design.retained.len(), &design_hash[..8]),
        design_hash,
        protocol_hash,
        hash,
        timestamp,
    })
}

/// The units of a locked design with outcomes unsealed.
#[derive(Debug, Clone)]
pub struct AnalysisUnit {
    pub id: u32,
    pub age: f64,
    pub height: f64,
    pub sex: Sex,
    pub treated: bool,
    pub outcome: f64,
}

/// Outcome-visible view of the retained units, carrying the verified lock
/// and the value-frozen design that produced it.
#[derive(Debug, Clone)]
pub struct AnalysisDataset {
    pub units: Vec<AnalysisUnit>,
    pub design: DesignResult,
    pub lock: DesignLock,
}

impl AnalysisDataset {
    pub fn outcomes(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.outcome).collect()
    }

    pub fn treatments(&self) -> Vec<bool> {
        self.units.iter().map(|u| u.treated).collect()
    }

    pub fn covariate(&self, c: Covariate) -> Vec<f64> {
        self.units
            .iter()
            .map(|u| match c {
                Covariate::Age => u.age,
                Covariate::Height => u.height,
                Covariate::Sex => u.sex.as_f64(),
            })
            .collect()
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.units.iter().position(|u| u.id == id)
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }
}

/// Verify the lock against the design and protocol, then reveal outcomes for
/// the retained units only.
pub fn unseal_outcomes(
    ds: &BlindedDataset,
    lock: &DesignLock,
    design: &DesignResult,
    protocol: &str,
) -> Result<AnalysisDataset> {
    design.validate()?;
    let design_hash = sha256_hex(&[&design.canonical_bytes()?]);
    if design_hash != lock.design_hash {
        return Err(Error::Tamper(
            "design does not match the lock it claims".into(),
        ));
    }
    let protocol_hash = sha256_hex(&[protocol.as_bytes()]);
    if protocol_hash != lock.protocol_hash {
        return Err(Error::Tamper(
            "analysis protocol does not match the lock".into(),
        ));
    }
    let combined = sha256_hex(&[lock.design_hash.as_bytes(), lock.protocol_hash.as_bytes()]);
    if combined != lock.hash {
        return Err(Error::Tamper("lock hash is internally inconsistent".into()));
    }
    let retained: BTreeSet<u32> = design.retained.iter().copied().collect();
    let known: BTreeSet<u32> = ds.ids().into_iter().collect();
    if !retained.is_subset(&known) {
        return Err(Error::Consistency(
            "design retains an id outside the dataset".into(),
        ));
    }
    let units = ds
        .units()
        .iter()
        .filter(|u| retained.contains(&u.id))
        .map(|u| AnalysisUnit {
            id: u.id,
            age: u.age,
            height: u.height,
            sex: u.sex,
            treated: u.treated,
            outcome: ds.sealed_outcome(u.id).unwrap(),
        })
        .collect();
    Ok(AnalysisDataset {
        units,
        design: design.clone(),
        lock: lock.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_csv_str, SchemaMap};

    fn toy() -> BlindedDataset {
        load_csv_str(
            "age,fev,ht,sex,smoke\n\
             9,1.7,57,0,0\n\
             10,2.0,60,0,1\n\
             11,2.2,62,1,0\n\
             12,2.4,64,1,1\n\
             13,2.6,66,0,0\n\
             14,2.8,68,1,0\n",
            &SchemaMap::default(),
        )
        .unwrap()
    }

    #[test]
    fn design_none_retains_everything() {
        let ds = toy();
        let d = design_none(&ds);
        assert_eq!(d.retained, ds.ids());
        assert_eq!(d.experiment.kind, ExperimentKind::BernoulliLike);
        assert!(d.provenance.discarded.is_empty());
    }

    #[test]
    fn trim_keeps_boundary_units() {
        let ds = toy();
        // closed interval: unit with age exactly 10 stays
        let rules = vec![TrimRule {
            sex: None,
            age_range: (10.0, 13.0),
            height_range: (0.0, 99.0),
        }];
        let d = trim_by_ranges(&ds, &rules).unwrap();
        assert!(d.retained.contains(&2)); // age 10 boundary
        assert!(d.retained.contains(&5)); // age 13 boundary
        assert!(!d.retained.contains(&1)); // age 9
        assert_eq!(d.experiment.kind, ExperimentKind::TrimmedComplete);
        // discard reason names the violated bound
        assert!(d.provenance.discarded.iter().any(|x| x.id == 1 && x.reason.contains("age")));
    }

    #[test]
    fn vacuous_trim_retains_all() {
        let ds = toy();
        let rules = vec![TrimRule {
            sex: None,
            age_range: (0.0, 120.0),
            height_range: (0.0, 99.0),
        }];
        let d = trim_by_ranges(&ds, &rules).unwrap();
        assert_eq!(d.retained.len(), ds.len());
    }

    #[test]
    fn overlapping_rules_are_a_config_error() {
        let ds = toy();
        let mk = |sex| TrimRule {
            sex,
            age_range: (0.0, 120.0),
            height_range: (0.0, 99.0),
        };
        assert!(matches!(
            trim_by_ranges(&ds, &[mk(None), mk(Some(Sex::Male))]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn single_global_bin_keeps_everything_in_one_stratum_per_sex() {
        let ds = toy();
        let bins = Binning {
            age_cutpoints: vec![],
            height_cutpoints: vec![],
        };
        let d = coarsened_stratify(&ds, &bins).unwrap();
        // both sexes have a treated and a control unit in the toy data
        assert_eq!(d.retained.len(), 6);
        let strata = d.strata.unwrap();
        let labels: BTreeSet<&String> = strata.assignment.values().collect();
        assert_eq!(labels.len(), 2); // sex is always exact
        let wsum: f64 = strata.weights.values().sum();
        assert!((wsum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn treated_only_stratum_is_discarded() {
        let ds = load_csv_str(
            "age,fev,ht,sex,smoke\n\
             9,1.7,57,0,1\n\
             9,1.8,57,0,0\n\
             18,3.0,70,0,1\n",
            &SchemaMap::default(),
        )
        .unwrap();
        let bins = Binning {
            age_cutpoints: vec![12.0],
            height_cutpoints: vec![],
        };
        let d = coarsened_stratify(&ds, &bins).unwrap();
        assert_eq!(d.retained, vec![1, 2]);
        assert_eq!(d.provenance.discarded.len(), 1);
        assert_eq!(d.provenance.discarded[0].id, 3);
    }

    #[test]
    fn lock_round_trip_and_tamper_detection() {
        let ds = toy();
        let d = design_none(&ds);
        let lock = freeze(&d, "protocol-v1").unwrap();
        // valid unseal reveals all outcomes
        let ad = unseal_outcomes(&ds, &lock, &d, "protocol-v1").unwrap();
        assert_eq!(ad.units.len(), ds.len());
        assert!((ad.units[0].outcome - 1.7).abs() < 1e-12);

        // flip one retained id after locking: rejection
        let mut tampered = d.clone();
        tampered.retained.remove(0);
        assert!(matches!(
            unseal_outcomes(&ds, &lock, &tampered, "protocol-v1"),
            Err(Error::Tamper(_))
        ));
        // protocol swap: rejection
        assert!(matches!(
            unseal_outcomes(&ds, &lock, &d, "protocol-v2"),
            Err(Error::Tamper(_))
        ));
    }

    #[test]
    fn distinct_designs_have_distinct_hashes() {
        let ds = toy();
        let d1 = design_none(&ds);
        let mut d2 = d1.clone();
        d2.retained.pop();
        d2.experiment.n_control -= 1;
        let l1 = freeze(&d1, "p").unwrap();
        let l2 = freeze(&d2, "p").unwrap();
        assert_ne!(l1.design_hash, l2.design_hash);
    }

    #[test]
    fn reserialized_design_hashes_identically() {
        let ds = toy();
        let d = design_none(&ds);
        let bytes = d.canonical_bytes().unwrap();
        let d2: DesignResult = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(bytes, d2.canonical_bytes().unwrap());
    }

    #[test]
    fn unseal_rejects_foreign_ids() {
        let ds = toy();
        let mut d = design_none(&ds);
        d.retained.push(99);
        d.experiment.n_control += 1;
        let lock = freeze(&d, "p").unwrap();
        assert!(matches!(
            unseal_outcomes(&ds, &lock, &d, "p"),
            Err(Error::Consistency(_))
        ));
    }
}
