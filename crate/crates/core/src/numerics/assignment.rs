//! Exact min-cost bipartite assignment on a rectangular cost matrix via
//! shortest augmenting paths with dual potentials (Hungarian family).
//!
//! Row count must not exceed column count; every row ends up assigned to a
//! distinct column and the total selected cost is the global minimum.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AssignmentResult {
    /// For each row, the column it is matched to.
    pub assignment: Vec<usize>,
    pub total_cost: f64,
}

/// Minimize Σ cost[i][assignment[i]] over injective row→column maps.
pub fn assignment_min_cost(cost: &[Vec<f64>]) -> Result<AssignmentResult> {
    let n = cost.len();
    if n == 0 {
        return Ok(AssignmentResult {
            assignment: Vec::new(),
            total_cost: 0.0,
        });
    }
    let m = cost[0].len();
    if cost.iter().any(|r| r.len() != m) {
        return Err(Error::Domain("ragged cost matrix".into()));
    }
    if n > m {
        return Err(Error::Infeasible(format!(
            "{n} rows cannot be injectively assigned to {m} columns"
        )));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Domain("non-finite cost entry".into()));
    }

    // 1-indexed internally; index 0 is the virtual column that roots each
    // augmenting search. p[j] = row currently matched to column j (0 = none).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    let total_cost = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum();
    Ok(AssignmentResult {
        assignment,
        total_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: enumerate all injective maps.
    pub fn brute_force(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
        let n_cols = cost[0].len();
        let mut best = (Vec::new(), f64::INFINITY);
        let mut current = Vec::with_capacity(cost.len());
        let mut used = vec![false; n_cols];
        fn rec(
            cost: &[Vec<f64>],
            row: usize,
            current: &mut Vec<usize>,
            used: &mut Vec<bool>,
            acc: f64,
            best: &mut (Vec<usize>, f64),
        ) {
            if row == cost.len() {
                if acc < best.1 {
                    *best = (current.clone(), acc);
                }
                return;
            }
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    current.push(j);
                    rec(cost, row + 1, current, used, acc + cost[row][j], best);
                    current.pop();
                    used[j] = false;
                }
            }
        }
        rec(cost, 0, &mut current, &mut used, 0.0, &mut best);
        best
    }

    #[test]
    fn obvious_diagonal_optimum() {
        let cost = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        let r = assignment_min_cost(&cost).unwrap();
        assert_eq!(r.assignment, vec![0, 1]);
        assert!((r.total_cost - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_row_takes_argmin() {
        let cost = vec![vec![5.0, 3.0, 9.0, 4.0]];
        let r = assignment_min_cost(&cost).unwrap();
        assert_eq!(r.assignment, vec![1]);
        assert!((r.total_cost - 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_when_more_rows_than_columns() {
        let cost = vec![vec![1.0], vec![1.0]];
        assert!(matches!(
            assignment_min_cost(&cost),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn random_rectangular_instances_match_brute_force() {
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 40) as f64
        };
        for trial in 0..200usize {
            let n_rows = 1 + (trial % 5);
            let n_cols = n_rows + (trial % 3);
            let cost: Vec<Vec<f64>> = (0..n_rows)
                .map(|_| (0..n_cols).map(|_| (next() % 100.0).floor()).collect())
                .collect();
            let got = assignment_min_cost(&cost).unwrap();
            let (_, want) = brute_force(&cost);
            assert!(
                (got.total_cost - want).abs() < 1e-9,
                "trial {trial}: got {} want {want}",
                got.total_cost
            );
            let mut seen = std::collections::HashSet::new();
            for &j in &got.assignment {
                assert!(seen.insert(j));
            }
        }
    }

    #[test]
    fn never_worse_than_greedy() {
        let mut seed = 123456789u64;
        let mut next = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 33) as f64) / (1u64 << 31) as f64
        };
        for _ in 0..50 {
            let cost: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..9).map(|_| next() * 10.0).collect())
                .collect();
            let opt = assignment_min_cost(&cost).unwrap().total_cost;
            let mut used = [false; 9];
            let mut greedy = 0.0;
            for r in &cost {
                let (j, c) = r
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !used[*j])
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap();
                used[j] = true;
                greedy += c;
            }
            assert!(opt <= greedy + 1e-9);
        }
    }
}
