//! Normalized two-team weight vectors and their p-gap functionals.
//!
//! A simplex is a vector omega with sum 0 and absolute sum 2; positive
//! entries form the M-team, negative entries the N-team, each summing to 1.
//! The p-gap gamma_p is evaluated two independent ways (team decomposition
//! and quadratic form), decomposed into per-height level coefficients c_k
//! via the tree recursion, and classified as flat or not.

use crate::dendrogram::DendroTree;
use crate::metric::FiniteMetric;
use crate::rational::Rational;
use num::traits::Zero;
use thiserror::Error;

/// Balance residual below which a subtree counts as simplicially balanced.
pub const FLAT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("weights do not satisfy the simplex constraints: sum residual {sum_residual}, absolute-sum residual {abs_residual}")]
    Constraint {
        sum_residual: f64,
        abs_residual: f64,
    },
    #[error("simplex has {simplex} weights but the space has {space} points")]
    LengthMismatch { simplex: usize, space: usize },
}

/// A validated normalized simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    omega: Vec<f64>,
}

impl Simplex {
    /// Validate sum 0 and absolute sum 2, each within 1e-12.
    pub fn from_weights(omega: Vec<f64>) -> Result<Self, SimplexError> {
        let sum: f64 = omega.iter().sum();
        let abs: f64 = omega.iter().map(|w| w.abs()).sum();
        let sum_residual = sum.abs();
        let abs_residual = (abs - 2.0).abs();
        if sum_residual > 1e-12 || abs_residual > 1e-12 {
            return Err(SimplexError::Constraint {
                sum_residual,
                abs_residual,
            });
        }
        Ok(Simplex { omega })
    }

    /// Rescale each team to sum exactly 1, then validate. Absorbs the
    /// rounding left over from numerical optimization.
    pub fn from_weights_renormalizing(mut omega: Vec<f64>) -> Result<Self, SimplexError> {
        let pos: f64 = omega.iter().filter(|&&w| w > 0.0).sum();
        let neg: f64 = -omega.iter().filter(|&&w| w < 0.0).sum::<f64>();
        if pos > 0.0 && neg > 0.0 {
            for w in &mut omega {
                if *w > 0.0 {
                    *w /= pos;
                } else if *w < 0.0 {
                    *w /= neg;
                }
            }
        }
        Self::from_weights(omega)
    }

    pub fn weights(&self) -> &[f64] {
        &self.omega
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// M-team: (point index, weight) for positive entries, in index order.
    pub fn m_team(&self) -> Vec<(usize, f64)> {
        self.omega
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, &w)| (i, w))
            .collect()
    }

    /// N-team: (point index, weight) for negative entries, in index order.
    pub fn n_team(&self) -> Vec<(usize, f64)> {
        self.omega
            .iter()
            .enumerate()
            .filter(|(_, &w)| w < 0.0)
            .map(|(i, &w)| (i, -w))
            .collect()
    }
}

fn pow_entry(d: f64, p: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        d.powf(p)
    }
}

/// gamma_p from the team decomposition: cross-team mass minus the two
/// within-team masses.
pub fn gamma_def(m: &FiniteMetric, p: f64, w: &Simplex) -> f64 {
    let ms = w.m_team();
    let ns = w.n_team();
    let mut cross = 0.0;
    for &(j, mj) in &ms {
        for &(i, ni) in &ns {
            cross += mj * ni * pow_entry(m.dist(j, i), p);
        }
    }
    let mut within = 0.0;
    for a in 0..ms.len() {
        for b in (a + 1)..ms.len() {
            within += ms[a].1 * ms[b].1 * pow_entry(m.dist(ms[a].0, ms[b].0), p);
        }
    }
    for a in 0..ns.len() {
        for b in (a + 1)..ns.len() {
            within += ns[a].1 * ns[b].1 * pow_entry(m.dist(ns[a].0, ns[b].0), p);
        }
    }
    cross - within
}

/// gamma_p as the quadratic form -omega . D_p omega / 2.
pub fn gamma_quadratic(m: &FiniteMetric, p: f64, w: &Simplex) -> f64 {
    let n = m.n();
    let omega = w.weights();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += omega[i] * omega[j] * pow_entry(m.dist(i, j), p);
        }
    }
    -0.5 * quad
}

/// Exact quadratic-form evaluation for rational matrices and weights,
/// at integer exponents.
pub fn gamma_exact(exact: &[Rational], n: usize, p: i32, omega: &[Rational]) -> Rational {
    let mut quad = Rational::zero();
    for i in 0..n {
        for j in 0..n {
            let d = &exact[i * n + j];
            if d.is_zero() {
                continue;
            }
            quad += &omega[i] * &omega[j] * crate::rational::pow_i32(d, p);
        }
    }
    -quad / Rational::from_integer(2.into())
}

/// Per-node block sums M(v), N(v).
#[derive(Debug, Clone)]
pub struct BlockSums {
    pub m: Vec<f64>,
    pub n: Vec<f64>,
}

impl BlockSums {
    pub fn imbalance(&self, node: usize) -> f64 {
        self.m[node] - self.n[node]
    }
}

/// Bottom-up block sums over the tree.
pub fn block_sums(t: &DendroTree, w: &Simplex) -> Result<BlockSums, SimplexError> {
    if w.len() != t.n() {
        return Err(SimplexError::LengthMismatch {
            simplex: w.len(),
            space: t.n(),
        });
    }
    let nodes = t.nodes();
    let mut m = vec![0.0; nodes.len()];
    let mut n = vec![0.0; nodes.len()];
    // Nodes are ordered by level, so children precede parents.
    for (id, node) in nodes.iter().enumerate() {
        if node.level == 0 {
            let point = node.members[0];
            let weight = w.weights()[point];
            if weight > 0.0 {
                m[id] = weight;
            } else {
                n[id] = -weight;
            }
        } else {
            for &c in &node.children {
                m[id] += m[c];
                n[id] += n[c];
            }
        }
    }
    Ok(BlockSums { m, n })
}

/// The coefficients c_1..c_l of gamma(p) = sum_k c_k alpha_k^p.
#[derive(Debug, Clone)]
pub struct LevelCoefficients {
    pub c: Vec<f64>,
}

impl LevelCoefficients {
    /// Reconstruct gamma(p) given the non-zero heights alpha_1..alpha_l.
    pub fn reconstruct(&self, heights: &[f64], p: f64) -> f64 {
        self.c
            .iter()
            .zip(heights)
            .map(|(c, a)| c * pow_entry(*a, p))
            .sum()
    }

    /// Suffix sums c_k + ... + c_l for k = 1..=l.
    pub fn tail_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.c.len()];
        let mut acc = 0.0;
        for k in (0..self.c.len()).rev() {
            acc += self.c[k];
            out[k] = acc;
        }
        out
    }

    pub fn total(&self) -> f64 {
        self.c.iter().sum()
    }
}

/// Level coefficients via the tree recursion:
/// 2 c_k(v) = sum over children (M-N)^2 minus (M(v)-N(v))^2.
pub fn level_coefficients(t: &DendroTree, w: &Simplex) -> Result<LevelCoefficients, SimplexError> {
    let sums = block_sums(t, w)?;
    let mut c = vec![0.0; t.num_levels()];
    for (id, node) in t.nodes().iter().enumerate() {
        if node.level == 0 {
            continue;
        }
        let child_sq: f64 = node
            .children
            .iter()
            .map(|&u| sums.imbalance(u).powi(2))
            .sum();
        c[node.level - 1] += 0.5 * (child_sq - sums.imbalance(id).powi(2));
    }
    Ok(LevelCoefficients { c })
}

/// Why a simplex fails to be flat.
#[derive(Debug, Clone, PartialEq)]
pub enum FlatViolation {
    /// A coterie subtree with M != N; carries the node id and the imbalance.
    UnbalancedCoterie { node: usize, imbalance: f64 },
    /// A weighted leaf adjacent to a node of level >= 2.
    WeightOutsideCoteries { point: usize, weight: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatCertificate {
    pub flat: bool,
    pub violation: Option<FlatViolation>,
}

/// Flatness: every coterie balanced and every weighted leaf inside a coterie.
pub fn is_flat(t: &DendroTree, w: &Simplex) -> Result<FlatCertificate, SimplexError> {
    let sums = block_sums(t, w)?;
    for &c in &t.coteries() {
        let imbalance = sums.imbalance(c);
        if imbalance.abs() > FLAT_TOL {
            return Ok(FlatCertificate {
                flat: false,
                violation: Some(FlatViolation::UnbalancedCoterie { node: c, imbalance }),
            });
        }
    }
    // A leaf is inside a coterie iff its parent has level 1.
    for point in 0..t.n() {
        let weight = w.weights()[point];
        if weight == 0.0 {
            continue;
        }
        let leaf = t.leaf_of(point);
        let parent = t
            .node(leaf)
            .parent
            .expect("leaves are never the root in an n>=2 tree");
        if t.node(parent).level >= 2 {
            return Ok(FlatCertificate {
                flat: false,
                violation: Some(FlatViolation::WeightOutsideCoteries { point, weight }),
            });
        }
    }
    Ok(FlatCertificate {
        flat: true,
        violation: None,
    })
}

/// Residual of the two-sided product identity behind the c_k recursion:
/// sum_{i != j} a_i b_j - sum_{i<j} (a_i a_j + b_i b_j)
///   = sum_i (a_i - b_i)/2 * sum_{j != i} (b_j - a_j).
pub fn product_identity_check(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let k = a.len();
    assert!(k > 1);
    let mut lhs = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                lhs += a[i] * b[j];
            }
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            lhs -= a[i] * a[j] + b[i] * b[j];
        }
    }
    let sum_diff: f64 = (0..k).map(|j| b[j] - a[j]).sum();
    let mut rhs = 0.0;
    for i in 0..k {
        rhs += 0.5 * (a[i] - b[i]) * (sum_diff - (b[i] - a[i]));
    }
    (lhs - rhs).abs()
}
