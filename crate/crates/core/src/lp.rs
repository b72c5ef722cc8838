//! Linear programs with box bounds and a single linear cut:
//!
//! ```text
//! min cᵀd  s.t.  aᵀd >= b,  lo <= d <= hi
//! ```
//!
//! Active-set solution: every variable starts at its cost-minimizing bound;
//! if the cut is violated, variables are released in increasing order of
//! marginal cost per unit of cut progress (`c_j / a_j`) until it holds. At
//! most one variable ends strictly between its bounds.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub step: Vec<f64>,
    pub objective: f64,
    /// Multiplier of the cut: the marginal rate of the last variable released.
    pub multiplier: f64,
    /// `aᵀd - b` at the solution.
    pub cut_slack: f64,
}

fn cost_optimal_start(c: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    c.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&cj, (&l, &h))| {
            if cj > 0.0 {
                l
            } else if cj < 0.0 {
                h
            } else {
                0.0f64.clamp(l, h)
            }
        })
        .collect()
}

/// Solve the LP; `Err(LpInfeasible)` when no `d` in the box reaches the cut.
pub fn solve_single_cut(c: &[f64], a: &[f64], b: f64, lo: &[f64], hi: &[f64]) -> Result<LpSolution> {
    solve_penalized(c, a, b, lo, hi, f64::INFINITY).and_then(|s| {
        if s.cut_slack < -1e-12 * (1.0 + b.abs()) {
            Err(Error::LpInfeasible { retries: 0 })
        } else {
            Ok(s)
        }
    })
}

/// `min cᵀd + penalty · max(0, b - aᵀd)` over the box. With an infinite
/// penalty this maximizes cut progress when the cut is out of reach.
pub fn solve_penalized(
    c: &[f64],
    a: &[f64],
    b: f64,
    lo: &[f64],
    hi: &[f64],
    penalty: f64,
) -> Result<LpSolution> {
    let n = c.len();
    if a.len() != n || lo.len() != n || hi.len() != n {
        return Err(Error::InvalidInput("LP dimension mismatch".into()));
    }
    if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
        return Err(Error::InvalidInput("LP bounds inverted".into()));
    }
    let mut d = cost_optimal_start(c, lo, hi);
    let mut deficit = b - a.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>();
    let mut multiplier = 0.0;

    if deficit > 0.0 {
        // (rate, index, capacity in cut units)
        let mut moves: Vec<(f64, usize, f64)> = (0..n)
            .filter(|&j| a[j] != 0.0)
            .filter_map(|j| {
                let room = if a[j] > 0.0 { hi[j] - d[j] } else { d[j] - lo[j] };
                (room > 0.0).then(|| (c[j] / a[j], j, room * a[j].abs()))
            })
            .collect();
        moves.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
        for (rate, j, capacity) in moves {
            if deficit <= 0.0 || rate >= penalty {
                break;
            }
            let used = capacity.min(deficit);
            let delta = used / a[j].abs();
            if a[j] > 0.0 {
                d[j] = (d[j] + delta).min(hi[j]);
            } else {
                d[j] = (d[j] - delta).max(lo[j]);
            }
            deficit -= used;
            multiplier = rate;
        }
    }
    let objective = c.iter().zip(&d).map(|(x, y)| x * y).sum();
    let cut_slack = a.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>() - b;
    Ok(LpSolution {
        step: d,
        objective,
        multiplier,
        cut_slack,
    })
}
