//! Propensity-score estimation (with likelihood-ratio model selection) and
//! the overlap-discarding rule.

use std::collections::BTreeMap;

use super::{
    Discard, DesignResult, ExperimentKind, HypotheticalExperiment, MethodTag, Provenance,
};
use crate::dataset::{BlindedDataset, Term};
use crate::error::{Error, Result};
use crate::numerics::{
    logistic_newton, lrt_compare, sample_sd, DesignMatrix, FitResult, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};

/// Fitted treatment model with per-unit scores.
#[derive(Debug, Clone)]
pub struct PropensityModel {
    pub fit: FitResult,
    pub terms: Vec<Term>,
    /// unit id → estimated score, in (0, 1)
    pub scores: BTreeMap<u32, f64>,
    /// sample standard deviation of the scores over the fitted units
    pub score_sd: f64,
}

impl PropensityModel {
    pub fn score(&self, id: u32) -> Option<f64> {
        self.scores.get(&id).copied()
    }
}

fn term_columns(ds: &BlindedDataset, terms: &[Term]) -> Vec<Vec<f64>> {
    terms
        .iter()
        .map(|&t| ds.units().iter().map(|u| u.term(t)).collect())
        .collect()
}

fn fit_one(ds: &BlindedDataset, terms: &[Term]) -> Result<FitResult> {
    let cols = term_columns(ds, terms);
    let named: Vec<(&str, &[f64])> = terms
        .iter()
        .zip(&cols)
        .map(|(t, c)| (t.name(), c.as_slice()))
        .collect();
    let x = DesignMatrix::with_intercept(&named);
    let w: Vec<f64> = ds.units().iter().map(|u| u.treated as u8 as f64).collect();
    logistic_newton(&x, &w, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

fn scores_from_fit(ds: &BlindedDataset, terms: &[Term], fit: &FitResult) -> BTreeMap<u32, f64> {
    ds.units()
        .iter()
        .map(|u| {
            let mut eta = fit.coefficients[0];
            for (k, &t) in terms.iter().enumerate() {
                eta += fit.coefficients[k + 1] * u.term(t);
            }
            (u.id, 1.0 / (1.0 + (-eta).exp()))
        })
        .collect()
}

/// Fit each candidate treatment model and keep the most parsimonious one that
/// is not rejected at α = 0.05 against the next richer candidate. Candidates
/// must be nested in sequence. A single candidate is used as-is.
pub fn fit_propensity(ds: &BlindedDataset, candidates: &[Vec<Term>]) -> Result<PropensityModel> {
    if candidates.is_empty() {
        return Err(Error::Config("need at least one candidate model".into()));
    }
    for w in candidates.windows(2) {
        if !w[0].iter().all(|t| w[1].contains(t)) || w[1].len() <= w[0].len() {
            return Err(Error::Config(
                "candidate models must be strictly nested in sequence".into(),
            ));
        }
    }
    let fits: Vec<FitResult> = candidates
        .iter()
        .map(|terms| fit_one(ds, terms))
        .collect::<Result<_>>()?;

    let mut chosen = 0usize;
    while chosen + 1 < fits.len() {
        let df_diff = candidates[chosen + 1].len() - candidates[chosen].len();
        let lrt = lrt_compare(&fits[chosen + 1], &fits[chosen], df_diff)?;
        if lrt.p_value < 0.05 {
            chosen += 1; // parsimonious model rejected, move up
        } else {
            break;
        }
    }

    let terms = candidates[chosen].clone();
    let fit = fits.into_iter().nth(chosen).unwrap();
    let scores = scores_from_fit(ds, &terms, &fit);
    let vals: Vec<f64> = scores.values().copied().collect();
    Ok(PropensityModel {
        fit,
        terms,
        score_sd: sample_sd(&vals),
        scores,
    })
}

/// Single-pass overlap rule: discard treated units whose score falls outside
/// the control group's score range, and symmetrically for controls against
/// the treated range.
pub fn discard_nonoverlap(ds: &BlindedDataset, pm: &PropensityModel) -> Result<DesignResult> {
    let mut t_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut c_range = (f64::INFINITY, f64::NEG_INFINITY);
    for u in ds.units() {
        let s = pm
            .score(u.id)
            .ok_or_else(|| Error::Consistency(format!("no score for unit {}", u.id)))?;
        let r = if u.treated { &mut t_range } else { &mut c_range };
        r.0 = r.0.min(s);
        r.1 = r.1.max(s);
    }
    let mut retained = Vec::new();
    let mut discarded = Vec::new();
    for u in ds.units() {
        let s = pm.score(u.id).unwrap();
        let opposite = if u.treated { c_range } else { t_range };
        if s < opposite.0 || s > opposite.1 {
            let side = if s > opposite.1 { "above" } else { "below" };
            let bound = if s > opposite.1 { opposite.1 } else { opposite.0 };
            let group = if u.treated { "control" } else { "treated" };
            discarded.push(Discard {
                id: u.id,
                reason: format!("score {s:.6} {side} {group} range bound {bound:.6}"),
            });
        } else {
            retained.push(u.id);
        }
    }
    let (nt, nc) = super::group_sizes(ds, &retained);
    if nt == 0 || nc == 0 {
        return Err(Error::EmptyDesign(
            "overlap discarding removed an entire group".into(),
        ));
    }
    let mut parameters = BTreeMap::new();
    parameters.insert("terms".into(), format!("{:?}", pm.terms));
    parameters.insert("score_sd".into(), format!("{:.9}", pm.score_sd));
    Ok(DesignResult {
        method: MethodTag::Overlap,
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_csv_str, SchemaMap};

    #[test]
    fn single_candidate_used_without_testing() {
        let ds = load_csv_str(
            "age,fev,ht,sex,smoke\n\
             9,1.7,57,0,0\n10,2.0,60,0,1\n11,2.2,62,1,0\n12,2.4,64,1,1\n\
             13,2.6,66,0,0\n14,2.8,68,1,1\n9,1.9,58,1,0\n15,3.0,69,0,1\n",
            &SchemaMap::default(),
        )
        .unwrap();
        let pm = fit_propensity(&ds, &[vec![Term::Age]]).unwrap();
        assert_eq!(pm.terms, vec![Term::Age]);
        assert_eq!(pm.scores.len(), 8);
        assert!(pm.scores.values().all(|&s| s > 0.0 && s < 1.0));
    }

    #[test]
    fn non_nested_candidates_rejected() {
        let ds = load_csv_str(
            "age,fev,ht,sex,smoke\n9,1.7,57,0,0\n10,2.0,60,0,1\n11,2.2,62,1,0\n12,2.4,64,1,1\n",
            &SchemaMap::default(),
        )
        .unwrap();
        let res = fit_propensity(&ds, &[vec![Term::Age], vec![Term::Height, Term::Sex]]);
        assert!(matches!(res, Err(Error::Config(_))));
    }

    #[test]
    fn lrt_selects_richer_model_when_truth_is_quadratic() {
        // planted quadratic treatment effect at n = 2000; the LRT must detect it
        let n = 2000usize;
        let mut rows = String::from("age,fev,ht,sex,smoke\n");
        let mut seed = 0xdeadbeefu64;
        let mut unif = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..n {
            let age = 3.0 + (unif() * 16.0).round();
            let ht = 46.0 + (unif() * 28.0).round();
            let centered = (age - 11.0) / 4.0;
            // logit depends on age² only
            let eta = -0.8 + 1.4 * centered * centered;
            let p = 1.0 / (1.0 + (-eta).exp());
            let smoke = (unif() < p) as u8;
            let sex = (unif() < 0.5) as u8;
            rows.push_str(&format!("{age},2.5,{ht},{sex},{smoke}\n"));
        }
        let ds = load_csv_str(&rows, &SchemaMap::default()).unwrap();
        let parsimonious = vec![Term::Age, Term::Height, Term::Sex];
        let rich = vec![Term::Age, Term::Height, Term::Sex, Term::AgeSq];
        let pm = fit_propensity(&ds, &[parsimonious, rich.clone()]).unwrap();
        assert_eq!(pm.terms, rich);
    }

    #[test]
    fn lrt_keeps_parsimonious_model_when_truth_is_linear() {
        let n = 2000usize;
        let mut rows = String::from("age,fev,ht,sex,smoke\n");
        let mut seed = 0xabcdef12u64;
        let mut unif = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..n {
            let age = 3.0 + (unif() * 16.0).round();
            let ht = 46.0 + (unif() * 28.0).round();
            let eta = -2.0 + 0.12 * (age - 10.0);
            let p = 1.0 / (1.0 + (-eta).exp());
            let smoke = (unif() < p) as u8;
            let sex = (unif() < 0.5) as u8;
            rows.push_str(&format!("{age},2.5,{ht},{sex},{smoke}\n"));
        }
        let ds = load_csv_str(&rows, &SchemaMap::default()).unwrap();
        let parsimonious = vec![Term::Age, Term::Height, Term::Sex];
        let rich = vec![Term::Age, Term::Height, Term::Sex, Term::AgeSq];
        let pm = fit_propensity(&ds, &[parsimonious.clone(), rich]).unwrap();
        assert_eq!(pm.terms, parsimonious);
    }

    #[test]
    fn identical_score_distributions_discard_nothing() {
        // mirrored pairs: every treated score equals a control score
        let ds = load_csv_str(
            "age,fev,ht,sex,smoke\n\
             9,1.7,57,0,0\n9,1.8,57,0,1\n12,2.2,62,1,0\n12,2.4,62,1,1\n\
             15,2.6,66,0,0\n15,2.8,66,0,1\n",
            &SchemaMap::default(),
        )
        .unwrap();
        let pm = fit_propensity(&ds, &[vec![Term::Age]]).unwrap();
        let d = discard_nonoverlap(&ds, &pm).unwrap();
        assert_eq!(d.retained.len(), 6);
        assert!(d.provenance.discarded.is_empty());
    }

    #[test]
    fn control_beyond_treated_range_is_discarded() {
        // hand-checkable 6-unit case: one control clearly above all treated scores
        let ds = load_csv_str(
            "age,fev,ht,sex,smoke\n\
             8,1.7,57,0,0\n9,1.8,58,0,1\n10,2.0,60,0,0\n\
             11,2.2,62,0,1\n10,2.1,61,0,0\n19,3.0,74,0,0\n",
            &SchemaMap::default(),
        )
        .unwrap();
        let pm = fit_propensity(&ds, &[vec![Term::Age]]).unwrap();
        // age drives the score upward; unit 6 (age 19, control) exceeds the
        // treated maximum (age 11) and must be the single discard
        let d = discard_nonoverlap(&ds, &pm).unwrap();
        assert_eq!(d.provenance.discarded.len(), 2);
        // unit 1 (age 8) sits below the treated minimum, unit 6 above the max
        let ids: Vec<u32> = d.provenance.discarded.iter().map(|x| x.id).collect();
        assert!(ids.contains(&6));
        assert!(ids.contains(&1));
        assert!(!d.retained.contains(&6));
    }
}
