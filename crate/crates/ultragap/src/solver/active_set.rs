//! Convex QP over one sign orthant of the simplex set.
//!
//! For a fixed sign pattern S the feasible weights are a product of two
//! simplices: positive entries on S summing to 1, negative entries off S
//! summing to -1. Substituting x = sign .* omega >= 0 gives
//!
//! ```text
//! minimize 1/2 x' Q x   with Q_ij = -s_i s_j D_ij,
//! subject to the two team sums = 1 and x >= 0,
//! ```
//!
//! solved by active-set iteration on the two-equality KKT system: start at
//! the uniform interior point, solve the equality-constrained subproblem on
//! the free variables by a dense LU factorization, clamp the bound that
//! blocks first, release the most negative multiplier, and stop when all
//! multipliers are >= -1e-10.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

const MULTIPLIER_TOL: f64 = 1e-10;
const BOUND_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ActiveSetError {
    #[error("KKT system is singular on the working set")]
    SingularKkt,
    #[error("active-set iteration cap {0} exceeded")]
    IterationCap(usize),
}

pub struct OrthantSolution {
    /// Signed weights (omega), feasible for the orthant.
    pub omega: Vec<f64>,
    /// 1/2 x'Qx = -1/2 omega' D omega.
    pub value: f64,
}

/// Minimize -1/2 omega' D omega over the orthant given by `mask`
/// (bit i set = point i on the positive team).
pub fn solve_orthant(dp: &[f64], n: usize, mask: u32) -> Result<OrthantSolution, ActiveSetError> {
    let sign: Vec<f64> = (0..n)
        .map(|i| if mask & (1 << i) != 0 { 1.0 } else { -1.0 })
        .collect();
    let team: Vec<usize> = (0..n).map(|i| usize::from(mask & (1 << i) == 0)).collect();
    let q: Vec<f64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            -sign[i] * sign[j] * dp[idx]
        })
        .collect();
    let team_size = [
        team.iter().filter(|&&t| t == 0).count(),
        team.iter().filter(|&&t| t == 1).count(),
    ];

    let mut x: Vec<f64> = (0..n).map(|i| 1.0 / team_size[team[i]] as f64).collect();
    let mut clamped = vec![false; n];
    let max_iter = 10 * n.max(2);
    // Gradients scale with the matrix entries, so the multiplier test must
    // be relative or large p cycles on rounding noise.
    let mu_tol = MULTIPLIER_TOL * q.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    for _ in 0..max_iter {
        let free: Vec<usize> = (0..n).filter(|&i| !clamped[i]).collect();
        let f = free.len();
        // Equality-constrained subproblem on the free variables.
        let mut kkt = DMatrix::<f64>::zeros(f + 2, f + 2);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kkt[(a, b)] = q[i * n + j];
            }
            kkt[(a, f + team[i])] = 1.0;
            kkt[(f + team[i], a)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(f + 2);
        rhs[f] = 1.0;
        rhs[f + 1] = 1.0;
        let sol = match kkt.clone().lu().solve(&rhs) {
            Some(s) => s,
            None => {
                // Rank-deficient reduced Hessian: a tiny ridge selects one
                // point of the optimal face without moving the value.
                let scale = q.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
                for a in 0..f {
                    kkt[(a, a)] += 1e-10 * scale;
                }
                kkt.lu().solve(&rhs).ok_or(ActiveSetError::SingularKkt)?
            }
        };

        let target: Vec<f64> = (0..f).map(|a| sol[a]).collect();
        let feasible = target.iter().all(|&v| v >= -BOUND_TOL);
        if feasible {
            for (a, &i) in free.iter().enumerate() {
                x[i] = target[a].max(0.0);
            }
            // Multipliers of the clamped bounds: mu_i = g_i + nu_team(i).
            let nu = [sol[f], sol[f + 1]];
            let grad: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| q[i * n + j] * x[j]).sum())
                .collect();
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..n {
                if clamped[i] {
                    let mu = grad[i] + nu[team[i]];
                    if mu < -mu_tol && worst.is_none_or(|(_, w)| mu < w) {
                        worst = Some((i, mu));
                    }
                }
            }
            match worst {
                None => {
                    let value = 0.5
                        * (0..n)
                            .map(|i| (0..n).map(|j| x[i] * q[i * n + j] * x[j]).sum::<f64>())
                            .sum::<f64>();
                    let omega = (0..n).map(|i| sign[i] * x[i]).collect();
                    return Ok(OrthantSolution { omega, value });
                }
                Some((release, _)) => {
                    clamped[release] = false;
                }
            }
        } else {
            // Partial step to the first blocking bound.
            let mut step = 1.0;
            let mut blocking = None;
            for (a, &i) in free.iter().enumerate() {
                let d = target[a] - x[i];
                if d < 0.0 {
                    let ratio = x[i] / (-d);
                    if ratio < step {
                        step = ratio;
                        blocking = Some(i);
                    }
                }
            }
            for (a, &i) in free.iter().enumerate() {
                x[i] += step * (target[a] - x[i]);
            }
            if let Some(b) = blocking {
                x[b] = 0.0;
                clamped[b] = true;
            }
        }
    }
    Err(ActiveSetError::IterationCap(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn discrete_dp(n: usize) -> Vec<f64> {
        (0..n * n)
            .map(|idx| if idx / n == idx % n { 0.0 } else { 1.0 })
            .collect()
    }

    #[test]
    fn two_point_orthant() {
        let dp = discrete_dp(2);
        let sol = solve_orthant(&dp, 2, 0b01).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
        assert!((sol.omega[0] - 1.0).abs() < 1e-12);
        assert!((sol.omega[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_four_point_balanced_split() {
        let dp = discrete_dp(4);
        // Balanced 2-2 split attains theta(4) = 1/2.
        let sol = solve_orthant(&dp, 4, 0b0011).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-10);
        // Lopsided 1-3 split is worse: (1 + 1/3)/2 = 2/3.
        let sol = solve_orthant(&dp, 4, 0b0001).unwrap();
        assert!((sol.value - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn clamps_a_useless_vertex() {
        // Cubed 3-point path. Orthant {0} vs {1,2}: gamma = 8 - 8a + a^2 in
        // the weight a on point 1, minimized at the bound a = 1.
        let d = [0.0, 1.0, 8.0, 1.0, 0.0, 1.0, 8.0, 1.0, 0.0];
        let sol = solve_orthant(&d, 3, 0b001).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-10, "{}", sol.value);
        assert!(sol.omega[2].abs() < 1e-12);
    }
}
