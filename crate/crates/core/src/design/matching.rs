//! One-to-one matching without replacement: greedy nearest-score matching
//! within a caliper, and globally optimal Mahalanobis pairing.

use std::collections::{BTreeMap, BTreeSet};

use super::propensity::PropensityModel;
use super::{
    group_sizes, Discard, DesignResult, ExperimentKind, HypotheticalExperiment, MethodTag, Pair,
    Provenance,
};
use crate::dataset::{BlindedDataset, Covariate};
use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::numerics::{assignment_min_cost, mahalanobis_sq_with_inverse, CovarianceMatrix};

/// Pooled sample covariance of the given covariates over the listed units.
fn pooled_covariance(
    ds: &BlindedDataset,
    ids: &[u32],
    covariates: &[Covariate],
) -> Result<CovarianceMatrix> {
    let columns: Vec<Vec<f64>> = covariates
        .iter()
        .map(|&c| {
            ids.iter()
                .map(|id| ds.unit(*id).expect("retained id present").covariate(c))
                .collect()
        })
        .collect();
    let refs: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    let labels: Vec<&str> = covariates.iter().map(|c| c.name()).collect();
    CovarianceMatrix::estimate(&labels, &refs)
}

fn covariate_point(ds: &BlindedDataset, id: u32, covariates: &[Covariate]) -> Vec<f64> {
    let u = ds.unit(id).expect("id present");
    covariates.iter().map(|&c| u.covariate(c)).collect()
}

/// Greedy caliper matching on the propensity score.
///
/// Treated units are processed in descending score order (ties to the smaller
/// id); each is matched to the nearest-score unused control within
/// `caliper = multiple × score sd`. Unmatched treated units are discarded with
/// a reason. Pair distances record the squared Mahalanobis distance over
/// (age, height, sex) with covariance pooled over the overlap set, the same
/// metric the optimal matcher minimizes.
pub fn caliper_match(
    ds: &BlindedDataset,
    overlap: &DesignResult,
    pm: &PropensityModel,
    caliper_sd_multiple: f64,
) -> Result<DesignResult> {
    if !(caliper_sd_multiple > 0.0) {
        return Err(Error::Config("caliper multiple must be > 0".into()));
    }
    let pool: BTreeSet<u32> = overlap.retained.iter().copied().collect();
    let score_of = |id: u32| -> Result<f64> {
        pm.score(id)
            .ok_or_else(|| Error::Consistency(format!("no score for unit {id}")))
    };
    let mut treated: Vec<u32> = Vec::new();
    let mut controls: Vec<u32> = Vec::new();
    for u in ds.units().iter().filter(|u| pool.contains(&u.id)) {
        if u.treated {
            treated.push(u.id);
        } else {
            controls.push(u.id);
        }
    }
    if treated.is_empty() || controls.is_empty() {
        return Err(Error::EmptyDesign("overlap set lacks one of the groups".into()));
    }

    let caliper = caliper_sd_multiple * pm.score_sd;
    let mut order: Vec<(f64, u32)> = treated
        .iter()
        .map(|&id| Ok((score_of(id)?, id)))
        .collect::<Result<_>>()?;
    // descending score, ties broken by smaller unit id
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let covariates = Covariate::ALL;
    let metric = pooled_covariance(ds, &overlap.retained, &covariates)?;
    let metric_inv = metric.inverse()?;

    let mut used: BTreeSet<u32> = BTreeSet::new();
    let mut pairs: Vec<Pair> = Vec::new();
    let mut discarded: Vec<Discard> = Vec::new();
    for (ts, tid) in order {
        let mut best: Option<(f64, u32)> = None;
        for &cid in &controls {
            if used.contains(&cid) {
                continue;
            }
            let d = (score_of(cid)? - ts).abs();
            if d > caliper {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bid)) => d < bd || (d == bd && cid < bid),
            };
            if better {
                best = Some((d, cid));
            }
        }
        match best {
            Some((_, cid)) => {
                used.insert(cid);
                let dist = mahalanobis_sq_with_inverse(
                    &covariate_point(ds, tid, &covariates),
                    &covariate_point(ds, cid, &covariates),
                    &metric_inv,
                );
                pairs.push(Pair {
                    treated: tid,
                    control: cid,
                    distance: dist,
                });
            }
            None => discarded.push(Discard {
                id: tid,
                reason: format!("no unused control within caliper {caliper:.6}"),
            }),
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDesign("caliper matching produced no pairs".into()));
    }

    let mut retained: Vec<u32> = pairs
        .iter()
        .flat_map(|p| [p.treated, p.control])
        .collect();
    retained.sort_unstable();
    let (nt, nc) = group_sizes(ds, &retained);
    let mut parameters = BTreeMap::new();
    parameters.insert("caliper_sd_multiple".into(), format!("{caliper_sd_multiple}"));
    parameters.insert("caliper".into(), format!("{caliper:.9}"));
    parameters.insert("score_sd".into(), format!("{:.9}", pm.score_sd));
    parameters.insert("order".into(), "descending-score".into());
    Ok(DesignResult {
        method: MethodTag::PsCaliper,
        retained,
        strata: None,
        pairs: Some(pairs),
        experiment: HypotheticalExperiment {
            kind: ExperimentKind::CompletelyRandomized,
            n_treated: nt,
            n_control: nc,
            acceptance: None,
        },
        provenance: Provenance {
            parameters,
            discarded,
            metric_pool: Some(overlap.retained.clone()),
            ..Default::default()
        },
    })
}

/// Globally optimal pairing: minimize the total squared Mahalanobis distance
/// between treated and control units over the chosen covariates, covariance
/// estimated from all retained overlap units.
pub fn optimal_match(
    ds: &BlindedDataset,
    overlap: &DesignResult,
    covariates: &[Covariate],
) -> Result<DesignResult> {
    if covariates.is_empty() {
        return Err(Error::Config("optimal matching needs covariates".into()));
    }
    let pool: BTreeSet<u32> = overlap.retained.iter().copied().collect();
    let mut treated: Vec<u32> = Vec::new();
    let mut controls: Vec<u32> = Vec::new();
    for u in ds.units().iter().filter(|u| pool.contains(&u.id)) {
        if u.treated {
            treated.push(u.id);
        } else {
            controls.push(u.id);
        }
    }
    if treated.is_empty() || controls.is_empty() {
        return Err(Error::EmptyDesign("overlap set lacks one of the groups".into()));
    }

    let metric = pooled_covariance(ds, &overlap.retained, covariates)?;
    let metric_inv = metric.inverse()?;

    let t_points: Vec<Vec<f64>> = treated
        .iter()
        .map(|&id| covariate_point(ds, id, covariates))
        .collect();
    let c_points: Vec<Vec<f64>> = controls
        .iter()
        .map(|&id| covariate_point(ds, id, covariates))
        .collect();
    let cost: Vec<Vec<f64>> = t_points
        .iter()
        .map(|t| {
            c_points
                .iter()
                .map(|c| mahalanobis_sq_with_inverse(t, c, &metric_inv))
                .collect()
        })
        .collect();
    let solution = assignment_min_cost(&cost)?;

    let pairs: Vec<Pair> = solution
        .assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| Pair {
            treated: treated[i],
            control: controls[j],
            distance: cost[i][j],
        })
        .collect();
    let mut retained: Vec<u32> = pairs
        .iter()
        .flat_map(|p| [p.treated, p.control])
        .collect();
    retained.sort_unstable();
    let (nt, nc) = group_sizes(ds, &retained);
    let mut parameters = BTreeMap::new();
    parameters.insert(
        "covariates".into(),
        covariates.iter().map(|c| c.name()).collect::<Vec<_>>().join(","),
    );
    parameters.insert("total_distance".into(), format!("{:.9}", solution.total_cost));
    Ok(DesignResult {
        method: MethodTag::OptimalPair,
        retained,
        strata: None,
        pairs: Some(pairs),
        experiment: HypotheticalExperiment {
            kind: ExperimentKind::Paired,
            n_treated: nt,
            n_control: nc,
            acceptance: None,
        },
        provenance: Provenance {
            parameters,
            discarded: Vec::new(),
            metric_pool: Some(overlap.retained.clone()),
            ..Default::default()
        },
    })
}

/// Covariance matrix over a design's metric pool (falling back to its
/// retained units), as used for recorded pair distances.
pub(crate) fn design_metric(
    ds: &BlindedDataset,
    design: &DesignResult,
    covariates: &[Covariate],
) -> Result<(CovarianceMatrix, Matrix)> {
    let pool = design
        .provenance
        .metric_pool
        .as_deref()
        .unwrap_or(&design.retained);
    let cov = pooled_covariance(ds, pool, covariates)?;
    let inv = cov.inverse()?;
    Ok((cov, inv))
}
