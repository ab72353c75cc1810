//! Fisherian randomization tests ("stochastic proof by contradiction") and
//! fiducial intervals by test inversion over a grid of constant additive
//! effects, with common random numbers across the grid.

use std::collections::BTreeMap;

use serde::Serialize;

use super::bayes::bayes_t_from_parts;
use super::{
    parallel_map_indexed, redraw_assignment, PotentialOutcomeTable, RandomizationScheme,
    SchemeKind,
};
use crate::dataset::Covariate;
use crate::design::AnalysisDataset;
use crate::error::{Error, Result};
use crate::numerics::matrix::Cholesky;
use crate::numerics::random::{self, Purpose};
use crate::numerics::{welch_t, DesignMatrix};

/// Test statistics computable on (adjusted outcomes, assignment).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Welch two-sample t (different group variances).
    WelchT,
    /// t of the treatment coefficient in outcome ~ treatment + age + height + sex.
    RegressionT,
    /// paired t over within-pair differences.
    PairedT,
    /// |posterior mean| / posterior sd of the ACE, analytic fast mode.
    BayesT,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::WelchT => "welch_t",
            Statistic::RegressionT => "regression_t",
            Statistic::PairedT => "paired_t",
            Statistic::BayesT => "bayes_t",
        }
    }
}

/// Preassembled per-dataset context so the hot loop is allocation-light.
struct StatContext {
    age: Vec<f64>,
    height: Vec<f64>,
    sex: Vec<f64>,
    pairs: Option<Vec<(usize, usize)>>,
}

impl StatContext {
    fn new(ad: &AnalysisDataset, scheme: &RandomizationScheme) -> Self {
        let pairs = match &scheme.kind {
            SchemeKind::Paired { pairs } => Some(pairs.clone()),
            _ => None,
        };
        StatContext {
            age: ad.covariate(Covariate::Age),
            height: ad.covariate(Covariate::Height),
            sex: ad.covariate(Covariate::Sex),
            pairs,
        }
    }

    /// Evaluate the statistic on shift-adjusted outcomes `y0` under `w`.
    fn evaluate(&self, stat: Statistic, y0: &[f64], w: &[bool]) -> Result<f64> {
        match stat {
            Statistic::WelchT => {
                let t: Vec<f64> = y0.iter().zip(w).filter(|(_, &x)| x).map(|(v, _)| *v).collect();
                let c: Vec<f64> = y0.iter().zip(w).filter(|(_, &x)| !x).map(|(v, _)| *v).collect();
                Ok(welch_t(&t, &c)?.t)
            }
            Statistic::RegressionT => {
                let wcol: Vec<f64> = w.iter().map(|&x| x as u8 as f64).collect();
                let x = DesignMatrix::with_intercept(&[
                    ("treatment", wcol.as_slice()),
                    ("age", &self.age),
                    ("height", &self.height),
                    ("sex", &self.sex),
                ]);
                let m = x.matrix();
                let gram = m.gram();
                let chol = Cholesky::decompose(&gram)
                    .map_err(|_| Error::SingularMatrix("regression design singular".into()))?;
                let beta = chol.solve(&m.t_matvec(y0));
                let fitted = m.matvec(&beta);
                let rss: f64 = y0
                    .iter()
                    .zip(&fitted)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let df = (y0.len() - x.p()) as f64;
                let s2 = rss / df;
                let inv = chol.inverse();
                let se = (inv[(1, 1)] * s2).sqrt();
                Ok(beta[1] / se)
            }
            Statistic::PairedT => {
                let pairs = self
                    .pairs
                    .as_ref()
                    .ok_or_else(|| Error::Config("paired_t requires a paired scheme".into()))?;
                let mut diffs = Vec::with_capacity(pairs.len());
                for &(a, b) in pairs {
                    // the pair member assigned treated contributes positively
                    let d = if w[a] { y0[a] - y0[b] } else { y0[b] - y0[a] };
                    diffs.push(d);
                }
                let m = crate::numerics::mean(&diffs);
                let sd = crate::numerics::sample_sd(&diffs);
                if sd == 0.0 {
                    // all differences identical: zero-centered gives t = 0,
                    // a nonzero constant is infinitely incompatible
                    return Ok(if m == 0.0 { 0.0 } else { f64::INFINITY.copysign(m) });
                }
                Ok(m / (sd / (diffs.len() as f64).sqrt()))
            }
            Statistic::BayesT => {
                bayes_t_from_parts(y0, w, &self.age, &self.height, &self.sex)
            }
        }
    }
}

fn check_compatibility(stat: Statistic, scheme: &RandomizationScheme) -> Result<()> {
    if stat == Statistic::PairedT && !matches!(scheme.kind, SchemeKind::Paired { .. }) {
        return Err(Error::Config(
            "paired_t statistic requires the paired experiment".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct FisherResult {
    pub statistic: Statistic,
    pub tau0: f64,
    pub observed: f64,
    pub p_value: f64,
    pub draws: usize,
    pub seed: u64,
    /// mean rejection-sampling attempts per accepted draw (rerandomized only)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    /// null statistic draws, in draw-index order
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub null_draws: Vec<f64>,
}

/// Test the sharp null of a constant additive effect τ₀.
///
/// All potential outcomes are filled under the null; the statistic is
/// evaluated on the shift-adjusted outcomes (the filled table's control
/// potential outcomes), which coincide with the observed data when τ₀ = 0.
/// Two-sided p by absolute value with the add-one correction:
/// p = (1 + #{|T_k| ≥ |T_obs|}) / (1 + draws).
pub fn fisher_test(
    ad: &AnalysisDataset,
    scheme: &RandomizationScheme,
    stat: Statistic,
    tau0: f64,
    draws: usize,
    seed: u64,
    threads: usize,
) -> Result<FisherResult> {
    if draws == 0 {
        return Err(Error::Config("fisher test needs draws >= 1".into()));
    }
    check_compatibility(stat, scheme)?;
    let ctx = StatContext::new(ad, scheme);
    let table = PotentialOutcomeTable::under_sharp_null(ad, tau0);
    let y0 = &table.y_control;
    let observed = ctx.evaluate(stat, y0, &table.observed_w)?;

    let columns = scheme_columns(ad);
    let results: Vec<Result<(f64, usize)>> = parallel_map_indexed(draws, threads, |k| {
        let mut rng = random::stream(seed, Purpose::FisherDraw, k as u64);
        let (w, attempts) = redraw_assignment(scheme, &columns, &mut rng)?;
        Ok((ctx.evaluate(stat, y0, &w)?, attempts))
    });
    let mut null_draws = Vec::with_capacity(draws);
    let mut attempts_total = 0usize;
    for r in results {
        let (t, a) = r?;
        null_draws.push(t);
        attempts_total += a;
    }
    let exceed = null_draws
        .iter()
        .filter(|t| t.abs() >= observed.abs() - 1e-12)
        .count();
    let p_value = (1 + exceed) as f64 / (1 + draws) as f64;
    let acceptance_rate = match scheme.kind {
        SchemeKind::Rerandomized { .. } => Some(draws as f64 / attempts_total as f64),
        _ => None,
    };
    Ok(FisherResult {
        statistic: stat,
        tau0,
        observed,
        p_value,
        draws,
        seed,
        acceptance_rate,
        null_draws,
    })
}

pub(crate) fn scheme_columns(ad: &AnalysisDataset) -> BTreeMap<Covariate, Vec<f64>> {
    Covariate::ALL
        .iter()
        .map(|&c| (c, ad.covariate(c)))
        .collect()
}

/// Search grid for the fiducial inversion.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lo: -1.0,
            hi: 0.5,
            step: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FiducialResult {
    pub statistic: Statistic,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    /// the acceptance region had interior gaps; the hull is reported
    pub disjoint_region_warning: bool,
    pub draws: usize,
    pub seed: u64,
}

const BISECTION_STEPS: usize = 20;

/// Fiducial interval: the closure of {τ : p(τ) ≥ 1 − level}, located by a
/// coarse grid scan and bisection on each boundary. One set of assignment
/// draws is shared across every τ (common random numbers), so p(τ) is
/// piecewise constant and the inversion is exact for the drawn set.
pub fn fiducial_interval(
    ad: &AnalysisDataset,
    scheme: &RandomizationScheme,
    stat: Statistic,
    level: f64,
    grid: GridSpec,
    draws: usize,
    seed: u64,
    threads: usize,
) -> Result<FiducialResult> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Config("level must be in (0, 1)".into()));
    }
    if !(grid.step > 0.0 && grid.lo < grid.hi) {
        return Err(Error::Config("bad fiducial grid".into()));
    }
    check_compatibility(stat, scheme)?;
    let alpha = 1.0 - level;
    let ctx = StatContext::new(ad, scheme);
    let columns = scheme_columns(ad);

    // common random numbers: one assignment set for every τ
    let assignments: Vec<Vec<bool>> = parallel_map_indexed(draws, threads, |k| {
        let mut rng = random::stream(seed, Purpose::FisherDraw, k as u64);
        redraw_assignment(scheme, &columns, &mut rng).map(|(w, _)| w)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let p_at = |tau: f64| -> Result<f64> {
        let table = PotentialOutcomeTable::under_sharp_null(ad, tau);
        let y0 = &table.y_control;
        let observed = ctx.evaluate(stat, y0, &table.observed_w)?;
        let hits: Vec<usize> = parallel_map_indexed(assignments.len(), threads, |k| {
            let t = ctx
                .evaluate(stat, y0, &assignments[k])
                .expect("statistic on redrawn assignment");
            (t.abs() >= observed.abs() - 1e-12) as usize
        });
        let exceed: usize = hits.iter().sum();
        Ok((1 + exceed) as f64 / (1 + draws) as f64)
    };

    let mut taus = Vec::new();
    let mut t = grid.lo;
    while t <= grid.hi + 1e-12 {
        taus.push(t);
        t += grid.step;
    }
    let ps: Vec<f64> = taus.iter().map(|&t| p_at(t)).collect::<Result<_>>()?;
    let accepted: Vec<usize> = (0..taus.len()).filter(|&i| ps[i] >= alpha).collect();
    if accepted.is_empty() {
        return Err(Error::Domain(
            "no grid point accepted; widen the fiducial grid".into(),
        ));
    }
    let first = accepted[0];
    let last = *accepted.last().unwrap();
    let disjoint = accepted.windows(2).any(|w| w[1] - w[0] > 1);

    // refine each boundary by bisection between reject and accept points
    let mut lower = taus[first];
    if first > 0 {
        let (mut rej, mut acc) = (taus[first - 1], taus[first]);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (rej + acc);
            if p_at(mid)? >= alpha {
                acc = mid;
            } else {
                rej = mid;
            }
        }
        lower = acc;
    }
    let mut upper = taus[last];
    if last + 1 < taus.len() {
        let (mut acc, mut rej) = (taus[last], taus[last + 1]);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (acc + rej);
            if p_at(mid)? >= alpha {
                acc = mid;
            } else {
                rej = mid;
            }
        }
        upper = acc;
    }
    Ok(FiducialResult {
        statistic: stat,
        level,
        lower,
        upper,
        disjoint_region_warning: disjoint,
        draws,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_csv_str, SchemaMap};
    use crate::design::{design_none, freeze, unseal_outcomes, ExperimentKind};

    fn analysis(text: &str) -> AnalysisDataset {
        let ds = load_csv_str(text, &SchemaMap::default()).unwrap();
        let d = design_none(&ds);
        let lock = freeze(&d, "p").unwrap();
        unseal_outcomes(&ds, &lock, &d, "p").unwrap()
    }

    fn six_unit() -> AnalysisDataset {
        analysis(
            "age,fev,ht,sex,smoke\n\
             10,2.1,60,0,1\n11,2.9,61,0,1\n12,2.4,62,0,1\n\
             10,2.0,60,1,0\n11,2.2,61,1,0\n12,1.8,62,1,0\n",
        )
    }

    #[test]
    fn all_outcomes_equal_gives_p_one() {
        let ad = analysis(
            "age,fev,ht,sex,smoke\n10,2,60,0,1\n11,2,61,0,1\n12,2,62,0,0\n13,2,63,0,0\n",
        );
        let scheme = RandomizationScheme::for_design(&ad, ExperimentKind::CompletelyRandomized)
            .unwrap();
        let r = fisher_test(&ad, &scheme, Statistic::WelchT, 0.0, 200, 3, 1).unwrap();
        assert_eq!(r.observed, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    /// Exhaustive oracle over all C(6,3) = 20 equal-split assignments.
    fn exact_p(ad: &AnalysisDataset, stat: Statistic) -> f64 {
        let ctx = StatContext::new(
            ad,
            &RandomizationScheme {
                kind: SchemeKind::CompletelyRandomized { n_treated: 3 },
                n_units: 6,
            },
        );
        let y = ad.outcomes();
        let w = ad.treatments();
        let observed = ctx.evaluate(stat, &y, &w).unwrap();
        let mut exceed = 0usize;
        let mut total = 0usize;
        for mask in 0u32..64 {
            if mask.count_ones() != 3 {
                continue;
            }
            let assign: Vec<bool> = (0..6).map(|i| mask >> i & 1 == 1).collect();
            let t = ctx.evaluate(stat, &y, &assign).unwrap();
            if t.abs() >= observed.abs() - 1e-12 {
                exceed += 1;
            }
            total += 1;
        }
        exceed as f64 / total as f64
    }

    #[test]
    fn monte_carlo_p_matches_exhaustive_enumeration_within_mc_error() {
        let ad = six_unit();
        let scheme = RandomizationScheme::for_design(&ad, ExperimentKind::CompletelyRandomized)
            .unwrap();
        let p_exact = exact_p(&ad, Statistic::WelchT);
        let draws = 20_000;
        let r = fisher_test(&ad, &scheme, Statistic::WelchT, 0.0, draws, 11, 2).unwrap();
        let mc_se = (p_exact * (1.0 - p_exact) / draws as f64).sqrt();
        assert!(
            (r.p_value - p_exact).abs() < 3.0 * mc_se + 2.0 / draws as f64,
            "mc {} vs exact {p_exact}",
            r.p_value
        );
    }

    #[test]
    fn same_seed_same_result_across_thread_counts() {
        let ad = six_unit();
        let scheme = RandomizationScheme::for_design(&ad, ExperimentKind::CompletelyRandomized)
            .unwrap();
        let r1 = fisher_test(&ad, &scheme, Statistic::WelchT, 0.0, 500, 42, 1).unwrap();
        let r4 = fisher_test(&ad, &scheme, Statistic::WelchT, 0.0, 500, 42, 4).unwrap();
        let r16 = fisher_test(&ad, &scheme, Statistic::WelchT, 0.0, 500, 42, 16).unwrap();
        assert_eq!(r1.null_draws, r4.null_draws);
        assert_eq!(r4.null_draws, r16.null_draws);
        assert_eq!(r1.p_value, r16.p_value);
    }

    #[test]
    fn paired_statistic_requires_paired_scheme() {
        let ad = six_unit();
        let scheme = RandomizationScheme::for_design(&ad, ExperimentKind::CompletelyRandomized)
            .unwrap();
        assert!(matches!(
            fisher_test(&ad, &scheme, Statistic::PairedT, 0.0, 10, 1, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn noiseless_shift_collapses_fiducial_interval_around_tau() {
        // pairs with an almost pure additive effect: treated = control + τ* ± ε
        // (a zero-ε acceptance set would be the single point τ*, invisible to
        // any grid)
        let tau_star = 0.5;
        let mut text = String::from("age,fev,ht,sex,smoke\n");
        let heights = [55, 59, 57, 64, 54, 62, 66, 58];
        let sexes = [0, 1, 0, 0, 1, 1, 0, 1];
        for i in 0..8 {
            let age = 8 + i;
            let base = 2.0 + 0.1 * i as f64;
            let eps = if i % 2 == 0 { 0.02 } else { -0.02 };
            text.push_str(&format!(
                "{age},{},{},{},1\n",
                base + tau_star + eps,
                heights[i],
                sexes[i]
            ));
            text.push_str(&format!("{age},{base},{},{},0\n", heights[i], sexes[i]));
        }
        let ds = load_csv_str(&text, &SchemaMap::default()).unwrap();
        let overlap = design_none(&ds);
        let design =
            crate::design::optimal_match(&ds, &overlap, &crate::dataset::Covariate::ALL).unwrap();
        let lock = freeze(&design, "p").unwrap();
        let ad = unseal_outcomes(&ds, &lock, &design, "p").unwrap();
        let scheme = RandomizationScheme::for_design(&ad, ExperimentKind::Paired).unwrap();
        let r = fiducial_interval(
            &ad,
            &scheme,
            Statistic::PairedT,
            0.95,
            GridSpec::default(),
            400,
            7,
            1,
        )
        .unwrap();
        // the paired t explodes away from τ*: the interval pinches onto it
        assert!(r.lower <= tau_star && tau_star <= r.upper);
        assert!(r.upper - r.lower < 0.08, "[{}, {}]", r.lower, r.upper);
    }
}
