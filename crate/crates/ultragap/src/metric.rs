//! Finite metric spaces: validation of the (ultra)metric axioms, entrywise
//! powering with the `0^0 = 0` convention, and normalization to minimum
//! non-zero distance 1.
//!
//! Distances are stored as `f64`. When the input arrives as exact rationals
//! (decimal or fraction literals), the exact matrix is carried alongside and
//! every comparison is performed exactly; otherwise a relative tolerance of
//! `1e-9` is used, which absorbs the rounding introduced by powering.

use crate::rational::{parse_rational, to_f64, ParseRationalError, Rational};
use num::traits::Zero;
use std::fmt;
use thiserror::Error;

/// Relative tolerance for triangle comparisons in float mode.
pub const FLOAT_CMP_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Ultrametric,
    GeneralMetric,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::Ultrametric => write!(f, "ultrametric"),
            MetricKind::GeneralMetric => write!(f, "general-metric"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithmeticMode {
    Float,
    Rational,
}

/// A structural defect that prevents the matrix from being a distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum StructuralIssue {
    NotSquare {
        rows: usize,
        cols: usize,
    },
    LabelCount {
        labels: usize,
        rows: usize,
    },
    NonFinite {
        i: usize,
        j: usize,
    },
    Asymmetric {
        i: usize,
        j: usize,
        upper: f64,
        lower: f64,
    },
    NegativeEntry {
        i: usize,
        j: usize,
        value: f64,
    },
    NonzeroDiagonal {
        i: usize,
        value: f64,
    },
    ZeroOffDiagonal {
        i: usize,
        j: usize,
    },
}

impl fmt::Display for StructuralIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructuralIssue::NotSquare { rows, cols } => {
                write!(
                    f,
                    "matrix is not square: {rows} rows, {cols} columns in first bad row"
                )
            }
            StructuralIssue::LabelCount { labels, rows } => {
                write!(f, "{labels} labels but {rows} matrix rows")
            }
            StructuralIssue::NonFinite { i, j } => write!(f, "non-finite entry at ({i},{j})"),
            StructuralIssue::Asymmetric { i, j, upper, lower } => {
                write!(
                    f,
                    "asymmetric: d[{i}][{j}] = {upper} but d[{j}][{i}] = {lower}"
                )
            }
            StructuralIssue::NegativeEntry { i, j, value } => {
                write!(f, "negative entry {value} at ({i},{j})")
            }
            StructuralIssue::NonzeroDiagonal { i, value } => {
                write!(f, "nonzero diagonal entry {value} at ({i},{i})")
            }
            StructuralIssue::ZeroOffDiagonal { i, j } => {
                write!(f, "zero distance between distinct points {i} and {j}")
            }
        }
    }
}

/// A triple breaking the ordinary triangle inequality:
/// `d(i,j) > d(i,k) + d(k,j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleViolation {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// A triple breaking the strong triangle inequality:
/// `d(i,j) > max(d(i,k), d(j,k))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UltrametricViolation {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("structural error: {}", format_issues(.0))]
    Structural(Vec<StructuralIssue>),
    #[error("not a metric: {0:?}")]
    NotMetric(Vec<TriangleViolation>),
    #[error("space has a single point, no non-zero distance")]
    NoNonzeroDistance,
    #[error("negative exponent {0}")]
    NegativeExponent(f64),
    #[error("operation requires an ultrametric, got a general metric")]
    NotUltrametric,
}

fn format_issues(issues: &[StructuralIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A validated finite metric space with labeled points.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct FiniteMetric {
    labels: Vec<String>,
    n: usize,
    dist: Vec<f64>,
    exact: Option<Vec<Rational>>,
    kind: MetricKind,
    ultrametric_violations: Vec<UltrametricViolation>,
}

impl FiniteMetric {
    /// Validate a float matrix. Returns the typed metric or a report listing
    /// every offending index.
    pub fn validate(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        Self::build(labels, rows, None)
    }

    /// Validate an exact rational matrix; all comparisons are exact.
    pub fn validate_exact(
        labels: Vec<String>,
        rows: Vec<Vec<Rational>>,
    ) -> Result<Self, MetricError> {
        let float_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(to_f64).collect())
            .collect();
        let flat: Vec<Rational> = rows.into_iter().flatten().collect();
        Self::build(labels, float_rows, Some(flat))
    }

    fn build(
        labels: Vec<String>,
        rows: Vec<Vec<f64>>,
        exact: Option<Vec<Rational>>,
    ) -> Result<Self, MetricError> {
        let n = rows.len();
        let mut issues = Vec::new();
        if labels.len() != n {
            issues.push(StructuralIssue::LabelCount {
                labels: labels.len(),
                rows: n,
            });
        }
        for row in &rows {
            if row.len() != n {
                issues.push(StructuralIssue::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
                return Err(MetricError::Structural(issues));
            }
        }
        if !issues.is_empty() {
            return Err(MetricError::Structural(issues));
        }
        let dist: Vec<f64> = rows.into_iter().flatten().collect();
        for i in 0..n {
            for j in 0..n {
                if !dist[i * n + j].is_finite() {
                    issues.push(StructuralIssue::NonFinite { i, j });
                }
            }
        }
        if !issues.is_empty() {
            return Err(MetricError::Structural(issues));
        }
        for i in 0..n {
            let dii = dist[i * n + i];
            if dii != 0.0 {
                issues.push(StructuralIssue::NonzeroDiagonal { i, value: dii });
            }
            for j in (i + 1)..n {
                let dij = dist[i * n + j];
                let dji = dist[j * n + i];
                if dij != dji {
                    issues.push(StructuralIssue::Asymmetric {
                        i,
                        j,
                        upper: dij,
                        lower: dji,
                    });
                } else if dij < 0.0 {
                    issues.push(StructuralIssue::NegativeEntry { i, j, value: dij });
                } else if dij == 0.0 {
                    issues.push(StructuralIssue::ZeroOffDiagonal { i, j });
                }
            }
        }
        if !issues.is_empty() {
            return Err(MetricError::Structural(issues));
        }

        let mut metric = FiniteMetric {
            labels,
            n,
            dist,
            exact,
            kind: MetricKind::Ultrametric,
            ultrametric_violations: Vec::new(),
        };
        metric.classify_kind()?;
        Ok(metric)
    }

    /// Decide ultrametric / general-metric, or fail with every triangle
    /// violation.
    fn classify_kind(&mut self) -> Result<(), MetricError> {
        let n = self.n;
        let mut triangle = Vec::new();
        let mut strong = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    let dij = self.dist(i, j);
                    let dik = self.dist(i, k);
                    let djk = self.dist(j, k);
                    if self.gt(i, j, i, k, j, k, true) {
                        strong.push(UltrametricViolation {
                            i,
                            j,
                            k,
                            lhs: dij,
                            rhs: dik.max(djk),
                        });
                        if self.gt(i, j, i, k, j, k, false) {
                            triangle.push(TriangleViolation {
                                i,
                                j,
                                k,
                                lhs: dij,
                                rhs: dik + djk,
                            });
                        }
                    }
                }
            }
        }
        if !triangle.is_empty() {
            return Err(MetricError::NotMetric(triangle));
        }
        if strong.is_empty() {
            self.kind = MetricKind::Ultrametric;
        } else {
            self.kind = MetricKind::GeneralMetric;
        }
        self.ultrametric_violations = strong;
        Ok(())
    }

    /// Is d(a,b) > (strong ? max : sum) of d(c,d), d(e,f)? Exact in rational
    /// mode, tolerance-based in float mode.
    #[allow(clippy::too_many_arguments)]
    fn gt(
        &self,
        ai: usize,
        aj: usize,
        bi: usize,
        bj: usize,
        ci: usize,
        cj: usize,
        strong: bool,
    ) -> bool {
        if let Some(exact) = &self.exact {
            let lhs = &exact[ai * self.n + aj];
            let b = &exact[bi * self.n + bj];
            let c = &exact[ci * self.n + cj];
            let rhs = if strong {
                b.clone().max(c.clone())
            } else {
                b + c
            };
            lhs > &rhs
        } else {
            let lhs = self.dist(ai, aj);
            let b = self.dist(bi, bj);
            let c = self.dist(ci, cj);
            let rhs = if strong { b.max(c) } else { b + c };
            lhs > rhs + FLOAT_CMP_RTOL * lhs.max(rhs)
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn is_ultrametric(&self) -> bool {
        self.kind == MetricKind::Ultrametric
    }

    /// Triples breaking the strong triangle inequality; empty iff ultrametric.
    pub fn ultrametric_violations(&self) -> &[UltrametricViolation] {
        &self.ultrametric_violations
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    /// Row-major n*n distance matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.dist
    }

    /// Exact entries, present when the space was built from rational input
    /// and no irrational operation has been applied.
    pub fn exact_matrix(&self) -> Option<&[Rational]> {
        self.exact.as_deref()
    }

    pub fn exact_dist(&self, i: usize, j: usize) -> Option<&Rational> {
        self.exact.as_ref().map(|m| &m[i * self.n + j])
    }

    /// Minimum over i != j of d(i,j).
    pub fn min_nonzero_distance(&self) -> Result<f64, MetricError> {
        if self.n < 2 {
            return Err(MetricError::NoNonzeroDistance);
        }
        let mut min = f64::INFINITY;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                min = min.min(self.dist(i, j));
            }
        }
        Ok(min)
    }

    fn min_nonzero_exact(&self) -> Option<Rational> {
        let exact = self.exact.as_ref()?;
        let mut min: Option<&Rational> = None;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let d = &exact[i * self.n + j];
                min = Some(match min {
                    Some(m) if m <= d => m,
                    _ => d,
                });
            }
        }
        min.cloned()
    }

    /// Entrywise p-th power with 0^0 = 0. Exactness is kept for integer p.
    pub fn power(&self, p: f64) -> Result<FiniteMetric, MetricError> {
        if p < 0.0 || !p.is_finite() {
            return Err(MetricError::NegativeExponent(p));
        }
        let dist: Vec<f64> = self.dist.iter().map(|&d| pow_entry(d, p)).collect();
        let exact = self.exact.as_ref().and_then(|m| {
            if p.fract() == 0.0 && p <= i32::MAX as f64 {
                let e = p as i32;
                Some(
                    m.iter()
                        .map(|r| {
                            if r.is_zero() {
                                Rational::zero()
                            } else {
                                crate::rational::pow_i32(r, e)
                            }
                        })
                        .collect(),
                )
            } else {
                None
            }
        });
        let mut out = FiniteMetric {
            labels: self.labels.clone(),
            n: self.n,
            dist,
            exact,
            kind: self.kind,
            ultrametric_violations: Vec::new(),
        };
        if self.kind == MetricKind::Ultrametric {
            // max is power-monotone, so the strong triangle inequality is
            // preserved without re-checking.
            out.kind = MetricKind::Ultrametric;
        } else {
            out.classify_kind()?;
        }
        Ok(out)
    }

    /// Divide by the minimum non-zero distance. Returns the rescaled space and
    /// the scale factor; a gap at exponent p rescales by `scale^p`.
    pub fn normalize(&self) -> Result<(FiniteMetric, f64), MetricError> {
        let alpha = self.min_nonzero_distance()?;
        let exact_alpha = self.min_nonzero_exact();
        let dist: Vec<f64> = match &exact_alpha {
            // Divide exactly and re-round so the float and exact matrices agree.
            Some(a) => self
                .exact
                .as_ref()
                .unwrap()
                .iter()
                .map(|r| to_f64(&(r / a)))
                .collect(),
            None => self.dist.iter().map(|&d| d / alpha).collect(),
        };
        let exact = self.exact.as_ref().map(|m| {
            m.iter()
                .map(|r| r / exact_alpha.as_ref().unwrap())
                .collect()
        });
        let out = FiniteMetric {
            labels: self.labels.clone(),
            n: self.n,
            dist,
            exact,
            kind: self.kind,
            ultrametric_violations: self.ultrametric_violations.clone(),
        };
        Ok((out, alpha))
    }

    /// The sorted distinct non-zero distances.
    pub fn distinct_nonzero_distances(&self) -> Vec<f64> {
        let mut ds: Vec<f64> = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                ds.push(self.dist(i, j));
            }
        }
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ds.dedup();
        ds
    }
}

fn pow_entry(d: f64, p: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        d.powf(p)
    }
}

/// Error produced while reading a CSV distance matrix.
#[derive(Debug, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct CsvError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Parse the CSV wire format: first row labels, then one matrix row per line.
/// Entries may be decimals or fractions; in `Rational` mode the exact matrix
/// is retained.
pub fn metric_from_csv(text: &str, mode: ArithmeticMode) -> Result<FiniteMetric, CsvOrMetricError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(CsvOrMetricError::Csv(CsvError {
        line: 1,
        column: 1,
        message: "empty input".into(),
    }))?;
    let labels: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let n = labels.len();
    let mut rows: Vec<Vec<Rational>> = Vec::with_capacity(n);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n {
            return Err(CsvOrMetricError::Csv(CsvError {
                line: lineno,
                column: cells.len(),
                message: format!("expected {n} entries, found {}", cells.len()),
            }));
        }
        let mut row = Vec::with_capacity(n);
        for (col, cell) in cells.iter().enumerate() {
            match parse_rational(cell) {
                Ok(r) => row.push(r),
                Err(e) => {
                    return Err(CsvOrMetricError::Csv(CsvError {
                        line: lineno,
                        column: col + 1,
                        message: e.to_string(),
                    }))
                }
            }
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(CsvOrMetricError::Csv(CsvError {
            line: rows.len() + 1,
            column: 1,
            message: format!("expected {n} matrix rows, found {}", rows.len()),
        }));
    }
    let metric = match mode {
        ArithmeticMode::Rational => FiniteMetric::validate_exact(labels, rows)?,
        ArithmeticMode::Float => {
            let float_rows = rows
                .iter()
                .map(|r| r.iter().map(to_f64).collect())
                .collect();
            FiniteMetric::validate(labels, float_rows)?
        }
    };
    Ok(metric)
}

#[derive(Debug, Error)]
pub enum CsvOrMetricError {
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl From<ParseRationalError> for CsvError {
    fn from(e: ParseRationalError) -> Self {
        CsvError {
            line: 0,
            column: 0,
            message: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    pub fn six_point_fixture_rows(alpha2: f64) -> Vec<Vec<f64>> {
        // 6 points, coteries {z2,z3} and {z4,z5,z6} at height 1, merged with
        // the singleton {z1} at height alpha2.
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

    pub fn labels(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("z{i}")).collect()
    }

    #[test]
    fn two_point_space_is_ultrametric() {
        let m = FiniteMetric::validate(labels(2), vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(m.kind(), MetricKind::Ultrametric);
        assert_eq!(m.min_nonzero_distance().unwrap(), 1.0);
    }

    #[test]
    fn path_metric_is_general_with_violation_at_endpoints() {
        let rows = vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ];
        let m = FiniteMetric::validate(labels(3), rows).unwrap();
        assert_eq!(m.kind(), MetricKind::GeneralMetric);
        let v = m.ultrametric_violations();
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].i, v[0].j, v[0].k), (0, 2, 1));
        assert_eq!(v[0].lhs, 2.0);
        assert_eq!(v[0].rhs, 1.0);
    }

    #[test]
    fn six_point_fixture_is_ultrametric() {
        let m = FiniteMetric::validate(labels(6), six_point_fixture_rows(2.0)).unwrap();
        assert_eq!(m.kind(), MetricKind::Ultrametric);
        assert_eq!(m.min_nonzero_distance().unwrap(), 1.0);
    }

    #[test]
    fn structural_errors_name_indices() {
        let err =
            FiniteMetric::validate(labels(2), vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap_err();
        match err {
            MetricError::Structural(issues) => {
                assert!(matches!(
                    issues[0],
                    StructuralIssue::Asymmetric { i: 0, j: 1, .. }
                ))
            }
            other => panic!("unexpected {other:?}"),
        }

        let err =
            FiniteMetric::validate(labels(2), vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap_err();
        match err {
            MetricError::Structural(issues) => {
                assert!(matches!(
                    issues[0],
                    StructuralIssue::ZeroOffDiagonal { i: 0, j: 1 }
                ))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn not_a_metric_reports_triples() {
        let rows = vec![
            vec![0.0, 1.0, 9.0],
            vec![1.0, 0.0, 1.0],
            vec![9.0, 1.0, 0.0],
        ];
        let err = FiniteMetric::validate(labels(3), rows).unwrap_err();
        match err {
            MetricError::NotMetric(v) => {
                assert_eq!(v.len(), 1);
                assert_eq!((v[0].i, v[0].j, v[0].k), (0, 2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn power_identity_and_zero_convention() {
        let m = FiniteMetric::validate(labels(6), six_point_fixture_rows(2.0)).unwrap();
        let p1 = m.power(1.0).unwrap();
        assert_eq!(p1.matrix(), m.matrix());

        let p0 = m.power(0.0).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 0.0 } else { 1.0 };
                assert_eq!(p0.dist(i, j), expect);
            }
        }

        let m = FiniteMetric::validate(labels(2), vec![vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let p3 = m.power(3.0).unwrap();
        assert_eq!(p3.dist(0, 1), 8.0);
    }

    #[test]
    fn power_composes_multiplicatively() {
        let m = FiniteMetric::validate(labels(6), six_point_fixture_rows(3.0)).unwrap();
        let a = m.power(2.0).unwrap().power(1.5).unwrap();
        let b = m.power(3.0).unwrap();
        for (x, y) in a.matrix().iter().zip(b.matrix()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn powered_ultrametric_stays_ultrametric_exactly() {
        let m = FiniteMetric::validate(labels(6), six_point_fixture_rows(2.0)).unwrap();
        for p in [0.3, 0.5, 2.0, 7.5] {
            let mp = m.power(p).unwrap();
            assert_eq!(mp.kind(), MetricKind::Ultrametric);
            // Re-validate from scratch: must pass without tolerance.
            let rows: Vec<Vec<f64>> = (0..6)
                .map(|i| (0..6).map(|j| mp.dist(i, j)).collect())
                .collect();
            let re = FiniteMetric::validate(labels(6), rows).unwrap();
            assert!(re.ultrametric_violations().is_empty());
        }
    }

    #[test]
    fn normalize_divides_by_min_distance() {
        let m = FiniteMetric::validate(labels(2), vec![vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap();
        let (norm, scale) = m.normalize().unwrap();
        assert_eq!(scale, 3.0);
        assert_eq!(norm.dist(0, 1), 1.0);

        let m = FiniteMetric::validate(labels(6), six_point_fixture_rows(2.0)).unwrap();
        let (norm, scale) = m.normalize().unwrap();
        assert_eq!(scale, 1.0);
        assert_eq!(norm.matrix(), m.matrix());
    }

    #[test]
    fn normalize_rescale_round_trip() {
        let scaled: Vec<Vec<f64>> = six_point_fixture_rows(2.0)
            .into_iter()
            .map(|r| r.into_iter().map(|d| 5.0 * d).collect())
            .collect();
        let m = FiniteMetric::validate(labels(6), scaled.clone()).unwrap();
        let (norm, scale) = m.normalize().unwrap();
        assert_eq!(scale, 5.0);
        for i in 0..6 {
            for j in 0..6 {
                let back = norm.dist(i, j) * scale;
                assert!((back - scaled[i][j]).abs() <= 1e-12 * scaled[i][j].max(1.0));
            }
        }
    }

    #[test]
    fn csv_round_trip_with_rational_entries() {
        let text = "a,b\n0,3/2\n1.5,0\n";
        let m = metric_from_csv(text, ArithmeticMode::Rational).unwrap();
        assert_eq!(m.labels(), &["a".to_string(), "b".to_string()]);
        assert_eq!(m.exact_dist(0, 1).unwrap(), &parse_rational("3/2").unwrap());
        assert_eq!(m.dist(1, 0), 1.5);
    }

    #[test]
    fn ragged_csv_reports_line_and_column() {
        let text = "a,b\n0,1\n1\n";
        match metric_from_csv(text, ArithmeticMode::Float) {
            Err(CsvOrMetricError::Csv(e)) => assert_eq!(e.line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
