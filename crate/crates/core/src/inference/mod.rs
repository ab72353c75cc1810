//! Analysis-stage estimators on an unsealed `AnalysisDataset`:
//! super-population estimates (Welch t and covariate-adjusted regression),
//! finite-population Fisherian tests with fiducial interval inversion, and a
//! Bayesian posterior of the average causal effect by imputation of the
//! missing potential outcomes.

mod bayes;
mod fisher;

pub use bayes::{
    ace_posterior, ace_posterior_with_covariates, bayes_posterior_moments, bayes_t_statistic,
    posterior_t, AcePosterior,
};
pub use fisher::{fiducial_interval, fisher_test, FiducialResult, FisherResult, GridSpec, Statistic};

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::Covariate;
use crate::design::{AcceptanceCriterion, AnalysisDataset, ExperimentKind};
use crate::error::{Error, Result};
use crate::numerics::special::{t_quantile, t_two_sided_p};
use crate::numerics::{random, weighted_ols, welch_t, DesignMatrix};

/// Point estimate of the ACE with a labeled 95% interval.
#[derive(Debug, Clone, Serialize)]
pub struct InferenceResult {
    pub method: String,
    pub n: usize,
    pub estimate: f64,
    pub interval: (f64, f64),
    pub interval_kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// true when a variance needed for the interval degenerated to zero
    pub degenerate_se: bool,
}

/// Per-unit analysis weights for stratified designs: treated units weigh 1,
/// controls weigh (m_C/m_T)·(m_Ts/m_Cs) within their stratum, the classical
/// coarsened-matching weighting toward the treated distribution.
/// Non-stratified designs get unit weights.
pub fn analysis_weights(ad: &AnalysisDataset) -> Result<Option<Vec<f64>>> {
    let strata = match &ad.design.strata {
        Some(s) => s,
        None => return Ok(None),
    };
    let m_t = ad.units.iter().filter(|u| u.treated).count() as f64;
    let m_c = ad.units.len() as f64 - m_t;
    let mut per_stratum: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for u in &ad.units {
        let label = strata
            .assignment
            .get(&u.id)
            .ok_or_else(|| Error::Consistency(format!("unit {} has no stratum", u.id)))?;
        let e = per_stratum.entry(label).or_insert((0.0, 0.0));
        if u.treated {
            e.0 += 1.0;
        } else {
            e.1 += 1.0;
        }
    }
    let mut weights = Vec::with_capacity(ad.units.len());
    for u in &ad.units {
        if u.treated {
            weights.push(1.0);
        } else {
            let (ts, cs) = per_stratum[strata.assignment[&u.id].as_str()];
            weights.push((m_c / m_t) * (ts / cs));
        }
    }
    Ok(Some(weights))
}

fn treatment_column(ad: &AnalysisDataset) -> Vec<f64> {
    ad.treatments().iter().map(|&w| w as u8 as f64).collect()
}

/// Crude comparison of mean outcomes.
///
/// Unstratified designs: Welch two-sample t with a Satterthwaite interval.
/// Stratified designs: the stratum-weighted comparison, computed as a
/// weighted regression of the outcome on the treatment indicator.
pub fn neyman_crude(ad: &AnalysisDataset) -> Result<InferenceResult> {
    let y = ad.outcomes();
    let w = ad.treatments();
    if let Some(weights) = analysis_weights(ad)? {
        let x = DesignMatrix::with_intercept(&[("treatment", &treatment_column(ad))]);
        let fit = weighted_ols(&x, &y, Some(&weights))?;
        let est = fit.coefficients[1];
        let se = fit.coefficient_se(1);
        let q = t_quantile(0.975, fit.df as f64);
        return Ok(InferenceResult {
            method: "crude".into(),
            n: ad.n(),
            estimate: est,
            interval: (est - q * se, est + q * se),
            interval_kind: "confidence".into(),
            p_value: Some(t_two_sided_p(est / se, fit.df as f64)),
            draws: None,
            seed: None,
            degenerate_se: se == 0.0,
        });
    }
    let treated: Vec<f64> = y.iter().zip(&w).filter(|(_, &t)| t).map(|(v, _)| *v).collect();
    let control: Vec<f64> = y.iter().zip(&w).filter(|(_, &t)| !t).map(|(v, _)| *v).collect();
    let wt = welch_t(&treated, &control)?;
    if wt.se == 0.0 {
        return Ok(InferenceResult {
            method: "crude".into(),
            n: ad.n(),
            estimate: wt.estimate,
            interval: (wt.estimate, wt.estimate),
            interval_kind: "confidence".into(),
            p_value: None,
            draws: None,
            seed: None,
            degenerate_se: true,
        });
    }
    let q = t_quantile(0.975, wt.df);
    Ok(InferenceResult {
        method: "crude".into(),
        n: ad.n(),
        estimate: wt.estimate,
        interval: (wt.estimate - q * wt.se, wt.estimate + q * wt.se),
        interval_kind: "confidence".into(),
        p_value: Some(t_two_sided_p(wt.t, wt.df)),
        draws: None,
        seed: None,
        degenerate_se: false,
    })
}

/// Linear adjustment: coefficient of treatment in outcome ~ treatment +
/// covariates, with a t interval on n − p degrees of freedom. Stratified
/// designs use the same weights as `neyman_crude`.
pub fn ols_adjusted(ad: &AnalysisDataset, covariates: &[Covariate]) -> Result<InferenceResult> {
    let y = ad.outcomes();
    let wcol = treatment_column(ad);
    let cols: Vec<Vec<f64>> = covariates.iter().map(|&c| ad.covariate(c)).collect();
    let mut named: Vec<(&str, &[f64])> = vec![("treatment", &wcol)];
    for (c, col) in covariates.iter().zip(&cols) {
        named.push((c.name(), col));
    }
    let x = DesignMatrix::with_intercept(&named);
    let weights = analysis_weights(ad)?;
    let fit = weighted_ols(&x, &y, weights.as_deref())?;
    let est = fit.coefficients[1];
    let se = fit.coefficient_se(1);
    let q = t_quantile(0.975, fit.df as f64);
    Ok(InferenceResult {
        method: "adjusted".into(),
        n: ad.n(),
        estimate: est,
        interval: (est - q * se, est + q * se),
        interval_kind: "confidence".into(),
        p_value: Some(t_two_sided_p(est / se, fit.df as f64)),
        draws: None,
        seed: None,
        degenerate_se: se == 0.0,
    })
}

/// Interaction screen: fit outcome ~ treatment + age + height + sex plus all
/// three treatment interactions jointly, and report each interaction
/// coefficient's two-sided p-value.
pub fn interaction_screen(ad: &AnalysisDataset) -> Result<BTreeMap<String, f64>> {
    let y = ad.outcomes();
    let wcol = treatment_column(ad);
    let age = ad.covariate(Covariate::Age);
    let height = ad.covariate(Covariate::Height);
    let sex = ad.covariate(Covariate::Sex);
    let inter: Vec<(String, Vec<f64>)> = [
        ("treatment_age", &age),
        ("treatment_height", &height),
        ("treatment_sex", &sex),
    ]
    .iter()
    .map(|(name, col)| {
        (
            name.to_string(),
            col.iter().zip(&wcol).map(|(a, b)| a * b).collect(),
        )
    })
    .collect();
    let mut named: Vec<(&str, &[f64])> = vec![
        ("treatment", &wcol),
        ("age", &age),
        ("height", &height),
        ("sex", &sex),
    ];
    for (name, col) in &inter {
        named.push((name.as_str(), col));
    }
    let x = DesignMatrix::with_intercept(&named);
    let fit = weighted_ols(&x, &y, analysis_weights(ad)?.as_deref())?;
    let mut out = BTreeMap::new();
    for (k, label) in fit.labels.iter().enumerate() {
        if label.starts_with("treatment_") {
            let t = fit.coefficients[k] / fit.coefficient_se(k);
            out.insert(label.clone(), t_two_sided_p(t, fit.df as f64));
        }
    }
    Ok(out)
}

/// All potential outcomes filled deterministically under the sharp null of a
/// constant additive effect τ₀.
#[derive(Debug, Clone)]
pub struct PotentialOutcomeTable {
    pub y_treated: Vec<f64>,
    pub y_control: Vec<f64>,
    pub observed_w: Vec<bool>,
    pub tau: f64,
}

impl PotentialOutcomeTable {
    pub fn under_sharp_null(ad: &AnalysisDataset, tau: f64) -> Self {
        let y = ad.outcomes();
        let w = ad.treatments();
        let y_control: Vec<f64> = y
            .iter()
            .zip(&w)
            .map(|(&v, &t)| if t { v - tau } else { v })
            .collect();
        let y_treated: Vec<f64> = y_control.iter().map(|v| v + tau).collect();
        PotentialOutcomeTable {
            y_treated,
            y_control,
            observed_w: w,
            tau,
        }
    }

    /// Outcomes that would be observed under an assignment.
    pub fn observed_under(&self, assignment: &[bool]) -> Vec<f64> {
        assignment
            .iter()
            .zip(self.y_treated.iter().zip(&self.y_control))
            .map(|(&w, (&y1, &y0))| if w { y1 } else { y0 })
            .collect()
    }
}

/// Everything needed to redraw treatment assignments for a hypothetical
/// experiment over the analysis units (indices follow `ad.units`).
#[derive(Debug, Clone)]
pub enum SchemeKind {
    /// uniform over assignments preserving the treated count
    CompletelyRandomized { n_treated: usize },
    /// completely randomized, accepted only when the balance criterion holds
    Rerandomized {
        n_treated: usize,
        criterion: AcceptanceCriterion,
        covariates: Vec<Covariate>,
    },
    /// one coin per pair of unit indices (treated_index, control_index)
    Paired { pairs: Vec<(usize, usize)> },
}

#[derive(Debug, Clone)]
pub struct RandomizationScheme {
    pub kind: SchemeKind,
    pub n_units: usize,
}

/// Cap on rejection-sampling attempts per accepted rerandomization draw.
const RERANDOMIZE_PROBE: usize = 100_000;

impl RandomizationScheme {
    /// Build the scheme matching an experiment kind from the locked design.
    pub fn for_design(ad: &AnalysisDataset, kind: ExperimentKind) -> Result<Self> {
        let n_units = ad.n();
        let n_treated = ad.treatments().iter().filter(|&&w| w).count();
        match kind {
            ExperimentKind::CompletelyRandomized => Ok(RandomizationScheme {
                kind: SchemeKind::CompletelyRandomized { n_treated },
                n_units,
            }),
            ExperimentKind::Rerandomized => {
                let criterion = ad
                    .design
                    .experiment
                    .acceptance
                    .clone()
                    .unwrap_or_default();
                criterion.validate()?;
                Ok(RandomizationScheme {
                    kind: SchemeKind::Rerandomized {
                        n_treated,
                        criterion,
                        covariates: Covariate::ALL.to_vec(),
                    },
                    n_units,
                })
            }
            ExperimentKind::Paired => {
                let pairs = ad
                    .design
                    .pairs
                    .as_ref()
                    .ok_or_else(|| Error::Config("paired scheme needs a pairing design".into()))?
                    .iter()
                    .map(|p| {
                        let t = ad.index_of(p.treated).ok_or_else(|| {
                            Error::Consistency(format!("pair member {} missing", p.treated))
                        })?;
                        let c = ad.index_of(p.control).ok_or_else(|| {
                            Error::Consistency(format!("pair member {} missing", p.control))
                        })?;
                        Ok((t, c))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(RandomizationScheme {
                    kind: SchemeKind::Paired { pairs },
                    n_units,
                })
            }
            other => Err(Error::Config(format!(
                "experiment kind {other:?} has no randomization scheme"
            ))),
        }
    }

    fn complete_draw(&self, rng: &mut ChaCha8Rng, n_treated: usize) -> Vec<bool> {
        let pick = random::sample_without_replacement(rng, self.n_units, n_treated);
        let mut w = vec![false; self.n_units];
        for i in pick {
            w[i] = true;
        }
        w
    }
}

/// Redraw one assignment. Rerandomized schemes rejection-sample complete
/// randomizations until the criterion holds and also return the number of
/// attempts; the other schemes always use one attempt.
pub fn redraw_assignment(
    scheme: &RandomizationScheme,
    columns: &BTreeMap<Covariate, Vec<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<bool>, usize)> {
    match &scheme.kind {
        SchemeKind::CompletelyRandomized { n_treated } => {
            Ok((scheme.complete_draw(rng, *n_treated), 1))
        }
        SchemeKind::Rerandomized {
            n_treated,
            criterion,
            ..
        } => {
            for attempt in 1..=RERANDOMIZE_PROBE {
                let w = scheme.complete_draw(rng, *n_treated);
                if criterion.satisfied(columns, &w) {
                    return Ok((w, attempt));
                }
            }
            Err(Error::CriterionTooTight(1.0 / RERANDOMIZE_PROBE as f64))
        }
        SchemeKind::Paired { pairs } => {
            use rand::Rng;
            let mut w = vec![false; scheme.n_units];
            for &(t, c) in pairs {
                if rng.gen::<u64>() & 1 == 1 {
                    w[t] = true;
                } else {
                    w[c] = true;
                }
            }
            Ok((w, 1))
        }
    }
}

/// Map (index range, worker count) over a function deterministically: results
/// are ordered by index regardless of scheduling.
pub(crate) fn parallel_map_indexed<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.max(1);
    if threads == 1 || n < 2 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(threads);
    let mut out: Vec<Option<T>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut rest: &mut [Option<T>] = &mut out;
        let mut start = 0usize;
        let mut handles = Vec::new();
        while start < n {
            let take = chunk.min(n - start);
            let (head, tail) = rest.split_at_mut(take);
            rest = tail;
            let base = start;
            let f = &f;
            handles.push(scope.spawn(move || {
                for (off, slot) in head.iter_mut().enumerate() {
                    *slot = Some(f(base + off));
                }
            }));
            start += take;
        }
        for h in handles {
            h.join().expect("worker panicked");
        }
    });
    out.into_iter().map(|v| v.unwrap()).collect()
}
