//! Fixtures and random generators shared by the test suites and the
//! randomized oracle checks. Deterministic given the seed.

use crate::dendrogram::{Dendrogram, Partition};
use crate::metric::FiniteMetric;
use crate::rational::Rational;
use crate::simplex::Simplex;
use num::traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("z{i}")).collect()
}

/// The 6-point two-height fixture: coteries {z2,z3} and {z4,z5,z6} at
/// height 1, everything merged at `alpha2`.
pub fn six_point_rows(alpha2: f64) -> Vec<Vec<f64>> {
    let n = 6;
    let within: &[(usize, usize)] = &[(1, 2), (3, 4), (3, 5), (4, 5)];
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                rows[i][j] = alpha2;
            }
        }
    }
    for &(i, j) in within {
        rows[i][j] = 1.0;
        rows[j][i] = 1.0;
    }
    rows
}

pub fn six_point_metric(alpha2: f64) -> FiniteMetric {
    FiniteMetric::validate(labels(6), six_point_rows(alpha2)).unwrap()
}

/// Exact-rational variant of the 6-point fixture.
pub fn six_point_metric_exact(alpha2: i64) -> FiniteMetric {
    let rows: Vec<Vec<Rational>> = six_point_rows(alpha2 as f64)
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|d| Rational::from_integer((d as i64).into()))
                .collect()
        })
        .collect();
    FiniteMetric::validate_exact(labels(6), rows).unwrap()
}

/// The closed form the 6-point fixture satisfies:
/// (9 a^2p - 7 a^p + 1) / (21 a^2p - 12 a^p) with a = alpha2.
pub fn six_point_gap_closed_form(alpha2: f64, p: f64) -> f64 {
    let a = alpha2.powf(p);
    (9.0 * a * a - 7.0 * a + 1.0) / (21.0 * a * a - 12.0 * a)
}

/// The 7-point, four-height fixture: {z5,z6} at height 1; {z1,z2,z3} and
/// {z5,z6,z7} at height 2; z4 joins at height 3; everything at height 4.
pub fn seven_point_metric() -> FiniteMetric {
    let heights = [1.0, 2.0, 3.0, 4.0];
    let partitions: Vec<Partition> = vec![
        vec![vec![0], vec![1], vec![2], vec![3], vec![4, 5], vec![6]],
        vec![vec![0, 1, 2], vec![3], vec![4, 5, 6]],
        vec![vec![0, 1, 2], vec![3, 4, 5, 6]],
        vec![vec![0, 1, 2, 3, 4, 5, 6]],
    ];
    let mut all_heights = vec![0.0];
    all_heights.extend(heights);
    let mut all_parts: Vec<Partition> = vec![(0..7).map(|i| vec![i]).collect()];
    all_parts.extend(partitions);
    Dendrogram::new(labels(7), all_heights, None, all_parts)
        .unwrap()
        .to_metric()
}

/// The discrete metric scaled by `scale`.
pub fn discrete_metric(n: usize, scale: f64) -> FiniteMetric {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { scale }).collect())
        .collect();
    FiniteMetric::validate(labels(n), rows).unwrap()
}

/// A fixture with coteries of the given sizes (all points covered) at
/// height 1, merged at height 2. Single size -> discrete metric.
pub fn coterie_fixture(sizes: &[usize]) -> FiniteMetric {
    assert!(sizes.iter().all(|&s| s >= 2));
    let n: usize = sizes.iter().sum();
    if sizes.len() == 1 {
        return discrete_metric(n, 1.0);
    }
    let mut rows = vec![vec![Rational::from_integer(2.into()); n]; n];
    let mut start = 0;
    for &s in sizes {
        for i in start..start + s {
            for j in start..start + s {
                rows[i][j] = Rational::from_integer(if i == j { 0 } else { 1 }.into());
            }
        }
        start += s;
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = Rational::zero();
    }
    FiniteMetric::validate_exact(labels(n), rows).unwrap()
}

/// A random ultrametric with exact rational heights, built by coarsening a
/// random partition chain.
pub fn random_ultrametric<R: Rng>(n: usize, rng: &mut R) -> FiniteMetric {
    assert!(n >= 2);
    let mut blocks: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut partitions: Vec<Partition> = vec![blocks.clone()];
    let mut exact_heights = vec![Rational::zero()];
    let mut height = Rational::zero();
    while blocks.len() > 1 {
        let num: i64 = rng.gen_range(1..=5);
        let den: i64 = rng.gen_range(1..=5);
        height += Rational::new(num.into(), den.into());
        let groups = rng.gen_range(1..blocks.len());
        blocks.shuffle(rng);
        // Random contiguous split into `groups` non-empty parts.
        let mut cuts: Vec<usize> = (1..blocks.len()).collect();
        cuts.shuffle(rng);
        let mut cuts: Vec<usize> = cuts.into_iter().take(groups - 1).collect();
        cuts.push(0);
        cuts.push(blocks.len());
        cuts.sort_unstable();
        let mut merged: Vec<Vec<usize>> = Vec::new();
        for w in cuts.windows(2) {
            let mut block = Vec::new();
            for b in &blocks[w[0]..w[1]] {
                block.extend_from_slice(b);
            }
            block.sort_unstable();
            merged.push(block);
        }
        blocks = merged;
        partitions.push(blocks.clone());
        exact_heights.push(height.clone());
    }
    let heights: Vec<f64> = exact_heights.iter().map(crate::rational::to_f64).collect();
    Dendrogram::new(labels(n), heights, Some(exact_heights), partitions)
        .unwrap()
        .to_metric()
}

/// A random simplex: random sign pattern with both teams non-empty, weights
/// sampled uniformly on each team simplex via normalized exponentials.
pub fn random_simplex<R: Rng>(n: usize, rng: &mut R) -> Simplex {
    assert!(n >= 2);
    loop {
        let signs: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let pos = signs.iter().filter(|&&s| s).count();
        if pos == 0 || pos == n {
            continue;
        }
        return random_simplex_with_signs(&signs, rng);
    }
}

/// Uniform team weights for a fixed sign pattern (`true` = M-team).
pub fn random_simplex_with_signs<R: Rng>(signs: &[bool], rng: &mut R) -> Simplex {
    let n = signs.len();
    let mut omega = vec![0.0; n];
    for team in [true, false] {
        let idx: Vec<usize> = (0..n).filter(|&i| signs[i] == team).collect();
        let mut w: Vec<f64> = idx.iter().map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = w.iter().sum();
        for x in &mut w {
            *x /= total;
        }
        for (&i, &x) in idx.iter().zip(&w) {
            omega[i] = if team { x } else { -x };
        }
    }
    // Re-center so the validator's 1e-12 gate always passes.
    let pos: f64 = omega.iter().filter(|&&x| x > 0.0).sum();
    let neg: f64 = -omega.iter().filter(|&&x| x < 0.0).sum::<f64>();
    for x in &mut omega {
        if *x > 0.0 {
            *x /= pos;
        } else {
            *x /= neg;
        }
    }
    Simplex::from_weights(omega).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_ultrametric_is_ultrametric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(2..=10);
            let m = random_ultrametric(n, &mut rng);
            assert!(m.is_ultrametric());
            assert!(m.exact_matrix().is_some());
        }
    }

    #[test]
    fn random_simplex_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = rng.gen_range(2..=12);
            let s = random_simplex(n, &mut rng);
            assert!(!s.m_team().is_empty());
            assert!(!s.n_team().is_empty());
        }
    }
}
