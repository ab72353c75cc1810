//! Balance diagnostics: is a design consistent with a "good" randomization?
//! Standardized mean differences over covariate terms, two-sample
//! Kolmogorov-Smirnov tests, Table-2-style group summaries, pair-distance
//! histograms, and an overall plausibility verdict.
//!
//! Everything here reads covariates and treatment only; outcomes stay sealed.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::dataset::{BlindedDataset, Covariate, Sex, Term, UnitRecord};
use crate::design::matching::design_metric;
use crate::design::DesignResult;
use crate::error::{Error, Result};
use crate::numerics::random::{self, Purpose};
use crate::numerics::special::{kolmogorov_sf, ln_choose, normal_cdf, t_two_sided_p};
use crate::numerics::{mahalanobis_sq_with_inverse, mean, sample_sd, welch_t};

/// Standardized mean difference: (mean_t − mean_c) / pooled sd with
/// pooled sd = sqrt((s_t² + s_c²)/2).
pub fn smd_of(treated: &[f64], control: &[f64]) -> Result<f64> {
    let pooled = ((sample_sd(treated).powi(2) + sample_sd(control).powi(2)) / 2.0).sqrt();
    if !(pooled > 0.0) {
        return Err(Error::UndefinedSmd("zero pooled sd".into()));
    }
    Ok((mean(treated) - mean(control)) / pooled)
}

fn retained_units<'d>(design: &DesignResult, ds: &'d BlindedDataset) -> Vec<&'d UnitRecord> {
    let keep: BTreeSet<u32> = design.retained.iter().copied().collect();
    ds.units().iter().filter(|u| keep.contains(&u.id)).collect()
}

fn split_term(units: &[&UnitRecord], term: Term) -> (Vec<f64>, Vec<f64>) {
    let mut t = Vec::new();
    let mut c = Vec::new();
    for u in units {
        if u.treated {
            t.push(u.term(term));
        } else {
            c.push(u.term(term));
        }
    }
    (t, c)
}

/// Per-term SMD among a design's retained units.
pub fn smd(design: &DesignResult, ds: &BlindedDataset, terms: &[Term]) -> Result<BTreeMap<Term, f64>> {
    let units = retained_units(design, ds);
    let mut out = BTreeMap::new();
    for &term in terms {
        let (t, c) = split_term(&units, term);
        if t.is_empty() || c.is_empty() {
            return Err(Error::EmptyDesign("a group is empty among retained units".into()));
        }
        out.insert(
            term,
            smd_of(&t, &c).map_err(|_| Error::UndefinedSmd(term.name().into()))?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KsMethod {
    ExactEnumeration,
    Permutation,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: KsMethod,
}

fn ks_statistic(x: &[f64], y: &[f64]) -> f64 {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / nx - j as f64 / ny).abs());
    }
    d
}

/// D over a presorted pooled sample split by a boolean mask (true → x).
/// Tie groups advance both counters before the gap is evaluated.
fn ks_statistic_masked(sorted_pooled: &[f64], in_x: &[bool], nx: usize) -> f64 {
    let n = sorted_pooled.len();
    let ny = n - nx;
    let (mut cx, mut cy) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < n {
        let v = sorted_pooled[i];
        while i < n && sorted_pooled[i] == v {
            if in_x[i] {
                cx += 1;
            } else {
                cy += 1;
            }
            i += 1;
        }
        d = d.max((cx as f64 / nx as f64 - cy as f64 / ny as f64).abs());
    }
    d
}

fn has_ties(x: &[f64], y: &[f64]) -> bool {
    let mut all: Vec<f64> = x.iter().chain(y).copied().collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.windows(2).any(|w| w[0] == w[1])
}

/// Permutation draws for the non-asymptotic KS p-value; fixed internal seed
/// so the statistic is a deterministic function of its inputs.
const KS_PERMUTATION_DRAWS: u64 = 10_000;
const KS_PERMUTATION_SEED: u64 = 0x4b53_7465_7374; // "KStest"
/// Enumerate exhaustively when the number of splits is at most this.
const KS_ENUMERATION_LIMIT: f64 = 200_000.0;

/// Two-sample Kolmogorov-Smirnov test.
///
/// D is the sup-distance between the two empirical CDFs. The p-value is
/// finite-sample (exact enumeration over group splits when feasible, else a
/// fixed-seed Monte-Carlo permutation with the add-one correction) whenever
/// ties are present or min(n) ≤ 30; otherwise the asymptotic Kolmogorov law
/// with effective-n scaling.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<KsResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput("KS needs both samples nonempty".into()));
    }
    let d = ks_statistic(x, y);
    let (nx, ny) = (x.len(), y.len());
    let small = nx.min(ny) <= 30;
    let ties = has_ties(x, y);
    if !small && !ties {
        let ne = (nx as f64 * ny as f64) / (nx + ny) as f64;
        let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
        return Ok(KsResult {
            statistic: d,
            p_value: kolmogorov_sf(lambda),
            method: KsMethod::Asymptotic,
        });
    }

    let mut pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = pooled.len();
    let mut in_x = vec![false; n];

    if ln_choose(n, nx) <= KS_ENUMERATION_LIMIT.ln() {
        // exhaustive over all C(n, nx) group splits of the pooled sample
        let mut extreme = 0u64;
        let mut total = 0u64;
        let mut idx: Vec<usize> = (0..nx).collect();
        loop {
            total += 1;
            in_x.iter_mut().for_each(|b| *b = false);
            for &i in &idx {
                in_x[i] = true;
            }
            if ks_statistic_masked(&pooled, &in_x, nx) >= d - 1e-12 {
                extreme += 1;
            }
            // advance to the next combination, or finish
            let mut k = nx;
            let mut advanced = false;
            while k > 0 {
                k -= 1;
                if idx[k] != k + n - nx {
                    idx[k] += 1;
                    for j in (k + 1)..nx {
                        idx[j] = idx[j - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                return Ok(KsResult {
                    statistic: d,
                    p_value: extreme as f64 / total as f64,
                    method: KsMethod::ExactEnumeration,
                });
            }
        }
    }

    // Monte-Carlo permutation with a fixed internal seed
    let mut extreme = 0u64;
    for k in 0..KS_PERMUTATION_DRAWS {
        let mut rng = random::stream(KS_PERMUTATION_SEED, Purpose::KsPermutation, k);
        let pick = random::sample_without_replacement(&mut rng, n, nx);
        in_x.iter_mut().for_each(|b| *b = false);
        for i in pick {
            in_x[i] = true;
        }
        if ks_statistic_masked(&pooled, &in_x, nx) >= d - 1e-12 {
            extreme += 1;
        }
    }
    Ok(KsResult {
        statistic: d,
        p_value: (extreme + 1) as f64 / (KS_PERMUTATION_DRAWS + 1) as f64,
        method: KsMethod::Permutation,
    })
}

/// Mean (sd) of age and height plus male proportion per exposure group,
/// the Table-2 layout.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GroupStats {
    pub n: usize,
    pub age_mean: f64,
    pub age_sd: f64,
    pub height_mean: f64,
    pub height_sd: f64,
    pub male_fraction: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BalanceTable {
    pub n: usize,
    pub treated: GroupStats,
    pub control: GroupStats,
}

fn group_stats(units: &[&UnitRecord]) -> GroupStats {
    let ages: Vec<f64> = units.iter().map(|u| u.age).collect();
    let heights: Vec<f64> = units.iter().map(|u| u.height).collect();
    let male = units.iter().filter(|u| u.sex == Sex::Male).count();
    GroupStats {
        n: units.len(),
        age_mean: mean(&ages),
        age_sd: if ages.len() > 1 { sample_sd(&ages) } else { 0.0 },
        height_mean: mean(&heights),
        height_sd: if heights.len() > 1 { sample_sd(&heights) } else { 0.0 },
        male_fraction: male as f64 / units.len() as f64,
    }
}

pub fn balance_table(design: &DesignResult, ds: &BlindedDataset) -> BalanceTable {
    let units = retained_units(design, ds);
    let treated: Vec<&UnitRecord> = units.iter().copied().filter(|u| u.treated).collect();
    let control: Vec<&UnitRecord> = units.iter().copied().filter(|u| !u.treated).collect();
    BalanceTable {
        n: units.len(),
        treated: group_stats(&treated),
        control: group_stats(&control),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDistanceReport {
    pub distances: Vec<f64>,
    /// histogram over unit-width bins [k, k+1)
    pub histogram: Vec<(f64, usize)>,
    pub max: f64,
    pub total: f64,
}

/// Squared Mahalanobis distances of a design's pairs, recomputed in the
/// design's recorded metric (covariance over its metric pool).
pub fn pair_distances(
    design: &DesignResult,
    ds: &BlindedDataset,
    covariates: &[Covariate],
) -> Result<PairDistanceReport> {
    let pairs = design
        .pairs
        .as_ref()
        .ok_or_else(|| Error::NotApplicable("design has no pairs".into()))?;
    let (_, inv) = design_metric(ds, design, covariates)?;
    let point = |id: u32| -> Vec<f64> {
        let u = ds.unit(id).expect("retained id");
        covariates.iter().map(|&c| u.covariate(c)).collect()
    };
    let distances: Vec<f64> = pairs
        .iter()
        .map(|p| mahalanobis_sq_with_inverse(&point(p.treated), &point(p.control), &inv))
        .collect();
    let max = distances.iter().cloned().fold(0.0, f64::max);
    let total = distances.iter().sum();
    let n_bins = (max.ceil() as usize).max(1);
    let mut histogram: Vec<(f64, usize)> = (0..n_bins).map(|k| (k as f64, 0usize)).collect();
    for &d in &distances {
        let k = (d.floor() as usize).min(n_bins - 1);
        histogram[k].1 += 1;
    }
    Ok(PairDistanceReport {
        distances,
        histogram,
        max,
        total,
    })
}

/// Two-proportion z test (pooled variance), two-sided.
fn two_proportion_p(t: &[f64], c: &[f64]) -> f64 {
    let (nt, nc) = (t.len() as f64, c.len() as f64);
    let (pt, pc) = (mean(t), mean(c));
    let pool = (pt * nt + pc * nc) / (nt + nc);
    let se = (pool * (1.0 - pool) * (1.0 / nt + 1.0 / nc)).sqrt();
    if se == 0.0 {
        return 1.0;
    }
    let z = (pt - pc) / se;
    2.0 * normal_cdf(-z.abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct PlausibilityVerdict {
    pub p_values: BTreeMap<Covariate, f64>,
    pub plausible: bool,
    pub alpha: f64,
}

/// Screen each covariate as if checking a randomization: Welch t for the
/// continuous ones, a two-proportion test for sex. Paired designs use the
/// same unpaired screens. Plausible iff no p-value falls below α.
pub fn assess_plausibility(
    design: &DesignResult,
    ds: &BlindedDataset,
    alpha: f64,
) -> Result<PlausibilityVerdict> {
    let units = retained_units(design, ds);
    let mut p_values = BTreeMap::new();
    for cov in Covariate::ALL {
        let t: Vec<f64> = units.iter().filter(|u| u.treated).map(|u| u.covariate(cov)).collect();
        let c: Vec<f64> = units.iter().filter(|u| !u.treated).map(|u| u.covariate(cov)).collect();
        if t.is_empty() || c.is_empty() {
            return Err(Error::EmptyDesign("a group is empty among retained units".into()));
        }
        let p = if cov.is_binary() {
            two_proportion_p(&t, &c)
        } else if t.iter().chain(&c).all(|&v| v == t[0]) {
            1.0
        } else {
            let w = welch_t(&t, &c)?;
            if w.se == 0.0 {
                1.0
            } else {
                t_two_sided_p(w.t, w.df)
            }
        };
        p_values.insert(cov, p);
    }
    let plausible = p_values.values().all(|&p| p >= alpha);
    Ok(PlausibilityVerdict {
        p_values,
        plausible,
        alpha,
    })
}

/// One Love-plot row: |SMD| for a term before (no design) and after a design.
#[derive(Debug, Clone, Serialize)]
pub struct LoveRow {
    pub term: Term,
    pub phase: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KsRow {
    pub covariate: Covariate,
    pub phase: String,
    pub statistic: f64,
    pub p_value: f64,
}

/// Full balance report for one design: SMDs before/after, KS tests
/// before/after for the continuous covariates, the Table-2 row, the pair
/// histogram when pairs exist, and the plausibility verdict.
#[derive(Debug, Clone, Serialize)]
pub struct BalanceReport {
    pub smd_before: BTreeMap<Term, f64>,
    pub smd_after: BTreeMap<Term, f64>,
    pub ks: Vec<KsRow>,
    pub table: BalanceTable,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_distances: Option<PairDistanceReport>,
    pub verdict: PlausibilityVerdict,
}

pub fn balance_report(
    design: &DesignResult,
    ds: &BlindedDataset,
    alpha: f64,
) -> Result<BalanceReport> {
    let baseline = crate::design::design_none(ds);
    let smd_before = smd(&baseline, ds, &Term::ALL)?;
    let smd_after = smd(design, ds, &Term::ALL)?;
    let mut ks = Vec::new();
    for (label, d) in [("before", &baseline), ("after", design)] {
        let units = retained_units(d, ds);
        for cov in [Covariate::Age, Covariate::Height] {
            let t: Vec<f64> = units.iter().filter(|u| u.treated).map(|u| u.covariate(cov)).collect();
            let c: Vec<f64> = units.iter().filter(|u| !u.treated).map(|u| u.covariate(cov)).collect();
            let r = ks_two_sample(&t, &c)?;
            ks.push(KsRow {
                covariate: cov,
                phase: label.into(),
                statistic: r.statistic,
                p_value: r.p_value,
            });
        }
    }
    let pair_report = if design.pairs.is_some() {
        Some(pair_distances(design, ds, &Covariate::ALL)?)
    } else {
        None
    };
    Ok(BalanceReport {
        smd_before,
        smd_after,
        ks,
        table: balance_table(design, ds),
        pair_distances: pair_report,
        verdict: assess_plausibility(design, ds, alpha)?,
    })
}

/// Love-plot rows (term, phase, |SMD|) in tidy form for external plotting.
pub fn love_rows(report: &BalanceReport) -> Vec<LoveRow> {
    let mut rows = Vec::new();
    for (term, v) in &report.smd_before {
        rows.push(LoveRow {
            term: *term,
            phase: "before".into(),
            value: *v,
        });
    }
    for (term, v) in &report.smd_after {
        rows.push(LoveRow {
            term: *term,
            phase: "after".into(),
            value: *v,
        });
    }
    rows
}
