//! Gap computation and certification.
//!
//! The gap at exponent p is the minimum of the quadratic form
//! -1/2 omega' D_p omega over all normalized simplices. The sign pattern of
//! omega splits the feasible set into orthants; on each orthant the problem
//! is a convex QP, solved exactly by the active-set routine. Enumerating the
//! orthants (up to complement symmetry) yields the global minimum together
//! with a witness. A seeded randomized oracle provides an independent upper
//! bound, and the asymptotic constant and constancy classification come from
//! exact closed forms over the coterie structure.

mod active_set;
mod oracle;

use crate::dendrogram::{CoterieProfile, DendroTree, Dendrogram};
use crate::metric::{FiniteMetric, MetricError};
use crate::rational::Rational;
use crate::simplex::{gamma_quadratic, Simplex};
use num::traits::Zero;
use rayon::prelude::*;
use thiserror::Error;

pub use oracle::OracleResult;

/// Largest exponent fed to the float path; beyond this the closed form is
/// the only supported route.
pub const P_MAX: f64 = 30.0;
/// Bound on normalized entries so that entry^P_MAX stays inside f64 range.
pub const ENTRY_BOUND: f64 = 1e4;
/// Default cap on the orthant enumeration (2^(n-1) - 1 subsets).
pub const DEFAULT_MAX_POINTS: usize = 16;
/// A normalized minimum below this is treated as a negative-type failure.
const NEGATIVE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("space lacks {p}-negative type: witness simplex has gap {gamma}")]
    NegativeType {
        witness: Simplex,
        gamma: f64,
        p: f64,
    },
    #[error("{n} points exceeds the enumeration cap {cap}; use the randomized oracle instead")]
    Capacity { n: usize, cap: usize },
    #[error("exponent {p} outside [0, {max}]; use the exact asymptote for the limit")]
    POutOfRange { p: f64, max: f64 },
    #[error("normalized entry {max_entry} exceeds {bound}; entry^p would leave f64 range")]
    EntryOutOfRange { max_entry: f64, bound: f64 },
    #[error("need at least two points")]
    TooSmall,
    #[error("operation requires an ultrametric")]
    NotUltrametric,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// The gap of the discrete metric on n points:
/// half the sum of the reciprocals of floor(n/2) and ceil(n/2).
pub fn theta(n: usize) -> Result<Rational, SolverError> {
    if n < 2 {
        return Err(SolverError::Domain(format!("theta needs n >= 2, got {n}")));
    }
    let lo = Rational::from_integer(((n / 2) as i64).into());
    let hi = Rational::from_integer((n.div_ceil(2) as i64).into());
    Ok((lo.recip() + hi.recip()) / Rational::from_integer(2.into()))
}

/// Exact asymptotic constant: the harmonic-style combination of theta over
/// the coterie sizes.
pub fn gamma_infinity(t: &DendroTree) -> Result<Rational, SolverError> {
    let profile = t.coterie_profile();
    if profile.sizes.is_empty() {
        return Err(SolverError::TooSmall);
    }
    let mut sum = Rational::zero();
    for &size in &profile.sizes {
        sum += theta(size)?.recip();
    }
    Ok(sum.recip())
}

/// Exact minimizer of gamma_1 over the flat simplices: weight w_k on
/// coterie k proportional to 1/theta(|B_k|), split into near-halves with
/// uniform team weights. Returns (value, omega).
pub fn flat_optimum(t: &DendroTree) -> Result<(Rational, Vec<Rational>), SolverError> {
    let coteries = t.coteries();
    if coteries.is_empty() {
        return Err(SolverError::TooSmall);
    }
    let thetas: Vec<Rational> = coteries
        .iter()
        .map(|&c| theta(t.node(c).members.len()))
        .collect::<Result<_, _>>()?;
    let total: Rational = thetas.iter().map(|th| th.recip()).sum();
    let mut omega = vec![Rational::zero(); t.n()];
    let mut value = Rational::zero();
    for (&c, th) in coteries.iter().zip(&thetas) {
        let members = &t.node(c).members;
        let w = th.recip() / &total;
        value += &w * &w * th;
        let s = members.len() / 2;
        let t_size = members.len() - s;
        for (pos, &point) in members.iter().enumerate() {
            omega[point] = if pos < s {
                &w / Rational::from_integer((s as i64).into())
            } else {
                -(&w / Rational::from_integer((t_size as i64).into()))
            };
        }
    }
    Ok((value, omega))
}

/// The gap value with witness and solve diagnostics.
#[derive(Debug, Clone)]
pub struct GapResult {
    pub p: f64,
    /// Gap of the input space (already rescaled by alpha^p).
    pub value: f64,
    pub witness: Simplex,
    pub partitions_explored: u64,
    /// alpha_1^p, the factor relating the normalized space to the input.
    pub scale_applied: f64,
}

pub fn gap(m: &FiniteMetric, p: f64) -> Result<GapResult, SolverError> {
    gap_with_cap(m, p, DEFAULT_MAX_POINTS)
}

pub fn gap_with_cap(m: &FiniteMetric, p: f64, cap: usize) -> Result<GapResult, SolverError> {
    let n = m.n();
    if n < 2 {
        return Err(SolverError::TooSmall);
    }
    if !(0.0..=P_MAX).contains(&p) {
        return Err(SolverError::POutOfRange { p, max: P_MAX });
    }
    if n > cap {
        return Err(SolverError::Capacity { n, cap });
    }
    let (norm, alpha) = m.normalize()?;
    let max_entry = norm.matrix().iter().fold(0.0f64, |a, &b| a.max(b));
    if max_entry > ENTRY_BOUND {
        return Err(SolverError::EntryOutOfRange {
            max_entry,
            bound: ENTRY_BOUND,
        });
    }
    let dp = powered(norm.matrix(), p);
    let scale = alpha.powf(p);

    let full = (1u32 << n) - 1;
    let masks: Vec<u32> = (0..1u32 << (n - 1))
        .map(|sub| (sub << 1) | 1)
        .filter(|&mask| mask != full)
        .collect();
    let partitions_explored = masks.len() as u64;

    let solved: Result<Vec<(f64, u32, Vec<f64>)>, SolverError> = masks
        .par_iter()
        .map(|&mask| {
            active_set::solve_orthant(&dp, n, mask)
                .map(|s| (s.value, mask, s.omega))
                .map_err(|e| SolverError::Numerical(format!("orthant {mask:#b}: {e}")))
        })
        .collect();
    let solved = solved?;
    let best = solved
        .into_iter()
        .min_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then_with(|| subset_order(a.1, b.1, n))
        })
        .expect("at least one orthant for n >= 2");

    let (value_norm, _, omega) = best;
    let witness = Simplex::from_weights_renormalizing(omega)
        .map_err(|e| SolverError::Numerical(e.to_string()))?;
    if value_norm < -NEGATIVE_TOL {
        return Err(SolverError::NegativeType {
            witness,
            gamma: value_norm * scale,
            p,
        });
    }
    Ok(GapResult {
        p,
        value: value_norm * scale,
        witness,
        partitions_explored,
        scale_applied: scale,
    })
}

/// Order subsets by their sorted index lists.
fn subset_order(a: u32, b: u32, n: usize) -> std::cmp::Ordering {
    let list = |mask: u32| (0..n).filter(move |i| mask & (1 << i) != 0);
    list(a).cmp(list(b))
}

fn powered(matrix: &[f64], p: f64) -> Vec<f64> {
    matrix
        .iter()
        .map(|&d| if d == 0.0 { 0.0 } else { d.powf(p) })
        .collect()
}

/// Randomized upper bound on the gap; independent of the active-set path.
pub fn gap_oracle(
    m: &FiniteMetric,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<OracleResult, SolverError> {
    if m.n() < 2 {
        return Err(SolverError::TooSmall);
    }
    if trials == 0 {
        return Err(SolverError::Domain("oracle needs trials >= 1".into()));
    }
    if !(0.0..=P_MAX).contains(&p) {
        return Err(SolverError::POutOfRange { p, max: P_MAX });
    }
    let dp = powered(m.matrix(), p);
    Ok(oracle::best_upper_bound(&dp, m.n(), trials, seed))
}

#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub p: f64,
    /// Gap of the input space.
    pub gamma: f64,
    /// Gap divided by alpha_1^p.
    pub normalized: f64,
    /// gamma_infinity minus the normalized gap.
    pub residual_to_infinity: f64,
}

#[derive(Debug, Clone)]
pub struct GapCurve {
    pub points: Vec<CurvePoint>,
    pub gamma_infinity: Rational,
    pub alpha: f64,
}

/// Gap at every grid point plus convergence bookkeeping toward the
/// asymptotic constant. The grid must be strictly increasing.
// The negated comparison is deliberate: NaN grid entries must fail.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn gap_curve(m: &FiniteMetric, grid: &[f64]) -> Result<GapCurve, SolverError> {
    if grid.is_empty() {
        return Err(SolverError::Domain("empty p grid".into()));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(SolverError::Domain(
                "p grid must be strictly increasing".into(),
            ));
        }
    }
    let mut results = Vec::with_capacity(grid.len());
    for &p in grid {
        results.push(gap(m, p)?);
    }
    if !m.is_ultrametric() {
        return Err(SolverError::NotUltrametric);
    }
    let tree = Dendrogram::from_metric(m)?.tree();
    let ginf = gamma_infinity(&tree)?;
    let ginf_f = crate::rational::to_f64(&ginf);
    let alpha = m.min_nonzero_distance()?;
    let points = results
        .into_iter()
        .map(|r| {
            let normalized = r.value / r.scale_applied;
            CurvePoint {
                p: r.p,
                gamma: r.value,
                normalized,
                residual_to_infinity: ginf_f - normalized,
            }
        })
        .collect();
    Ok(GapCurve {
        points,
        gamma_infinity: ginf,
        alpha,
    })
}

/// Whether the normalized gap is constant in p, and why.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstancyClass {
    /// A single non-zero distance: a rescaled discrete metric.
    ScaledDiscrete,
    /// Coteries cover the space and every coterie has even size.
    ConstantEvenCoteries,
    NonConstant,
}

impl std::fmt::Display for ConstancyClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstancyClass::ScaledDiscrete => write!(f, "ScaledDiscrete"),
            ConstancyClass::ConstantEvenCoteries => write!(f, "ConstantEvenCoteries"),
            ConstancyClass::NonConstant => write!(f, "NonConstant"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstancyReport {
    pub class: ConstancyClass,
    /// Exact gap at p = 0: theta(n).
    pub gamma_zero: Rational,
    pub gamma_infinity: Rational,
    pub profile: CoterieProfile,
}

impl ConstancyReport {
    pub fn is_constant(&self) -> bool {
        self.class != ConstancyClass::NonConstant
    }
}

pub fn classify(m: &FiniteMetric) -> Result<ConstancyReport, SolverError> {
    if !m.is_ultrametric() {
        return Err(SolverError::NotUltrametric);
    }
    let dendrogram = Dendrogram::from_metric(m)?;
    let tree = dendrogram.tree();
    let profile = tree.coterie_profile();
    let class = if dendrogram.num_levels() == 1 {
        ConstancyClass::ScaledDiscrete
    } else if profile.covered == m.n() && profile.sizes.iter().all(|s| s % 2 == 0) {
        ConstancyClass::ConstantEvenCoteries
    } else {
        ConstancyClass::NonConstant
    };
    Ok(ConstancyReport {
        class,
        gamma_zero: theta(m.n())?,
        gamma_infinity: gamma_infinity(&tree)?,
        profile,
    })
}

#[derive(Debug, Clone)]
pub struct EnhancedVerdict {
    pub holds: bool,
    /// Gap of the space at p, when computable.
    pub gap_value: Option<f64>,
    /// G * alpha^p, the constant being certified.
    pub threshold: f64,
    /// A violating mean-zero vector when the inequality fails.
    pub witness: Option<Simplex>,
    pub samples_checked: u64,
    pub sample_violations: u64,
}

/// Certify G * alpha^p against the enhanced inequality. The decision is
/// exact through the solver (the inequality holds for every mean-zero zeta
/// iff the constant is at most the gap); seeded samples provide confirming
/// evidence.
pub fn verify_enhanced(
    m: &FiniteMetric,
    g: f64,
    p: f64,
    zeta_samples: u64,
    seed: u64,
) -> Result<EnhancedVerdict, SolverError> {
    if g <= 0.0 {
        return Err(SolverError::Domain("G must be positive".into()));
    }
    let alpha = m.min_nonzero_distance()?;
    let threshold = g * alpha.powf(p);
    let (holds, gap_value, witness) = match gap(m, p) {
        Ok(result) => {
            let holds = threshold <= result.value + 1e-9;
            let witness = if holds {
                None
            } else {
                Some(result.witness.clone())
            };
            (holds, Some(result.value), witness)
        }
        Err(SolverError::NegativeType { witness, .. }) => (false, None, Some(witness)),
        Err(e) => return Err(e),
    };

    let mut sample_violations = 0;
    if zeta_samples > 0 {
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..zeta_samples {
            let zeta = crate::testutil::random_simplex(m.n(), &mut rng);
            // For |zeta| summing to 2 the inequality reads
            // 2*threshold - 2*gamma_p(zeta) <= 0.
            let lhs = 2.0 * threshold - 2.0 * gamma_quadratic(m, p, &zeta);
            if lhs > 1e-9 {
                sample_violations += 1;
            }
        }
    }
    Ok(EnhancedVerdict {
        holds,
        gap_value,
        threshold,
        witness,
        samples_checked: zeta_samples,
        sample_violations,
    })
}
