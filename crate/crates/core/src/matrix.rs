//! Consensus gains adapted to a graph and their spectral data.

use std::fmt::Write as _;

pub use nalgebra::DMatrix;
use nalgebra::Complex;

use crate::error::{invalid, Result};
use crate::graph::Digraph;

/// Tolerance for checking user-supplied matrices.
pub const INPUT_TOL: f64 = 1e-9;

/// Spectral norms of `P = I + K`, `K` and `K - I`.
///
/// `p_disagreement` is the norm of `P` restricted to the subspace orthogonal to
/// the all-ones vector. It equals the essential spectral radius when `P` is
/// normal, and can exceed it otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorNorms {
    pub p: f64,
    pub k: f64,
    pub k_minus_i: f64,
    pub p_disagreement: f64,
}

/// The gain `K` adapted to a graph together with `P = I + K` and its
/// essential spectral radius.
#[derive(Debug, Clone)]
pub struct ConsensusMatrix {
    k: DMatrix<f64>,
    p: DMatrix<f64>,
    rho: f64,
    norms: OperatorNorms,
}

impl ConsensusMatrix {
    /// Maximum degree rule: every neighbor weight is `1 / (d_max + 1)` and the
    /// diagonal takes the remainder, `P_ii = 1 - d_i / (d_max + 1)`.
    pub fn max_degree(g: &Digraph) -> Result<Self> {
        if !g.is_symmetric() {
            return Err(invalid("maximum degree rule requires a symmetric graph"));
        }
        if !g.is_strongly_connected() {
            return Err(invalid("graph is not strongly connected"));
        }
        let n = g.n();
        let degrees: Vec<usize> = (0..n).map(|i| g.in_degree(i)).collect();
        let d_max = degrees.iter().copied().max().unwrap_or(0);
        let w = 1.0 / (d_max as f64 + 1.0);
        let mut p = DMatrix::zeros(n, n);
        for (j, i) in g.edges() {
            p[(i, j)] = w;
        }
        for (i, &d) in degrees.iter().enumerate() {
            p[(i, i)] = 1.0 - d as f64 * w;
        }
        Ok(Self::from_perron(p))
    }

    /// User-supplied Perron matrix `P`. Checks that `P` is adapted to `g`
    /// (`P_ij = 0` unless `i == j` or `j -> i` is an edge) and doubly stochastic.
    pub fn custom(g: &Digraph, p: DMatrix<f64>) -> Result<Self> {
        let n = g.n();
        if p.nrows() != n || p.ncols() != n {
            return Err(invalid(format!(
                "matrix is {}x{}, graph has {n} agents",
                p.nrows(),
                p.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && p[(i, j)] != 0.0 && !g.has_edge(j, i) {
                    return Err(invalid(format!(
                        "entry ({i}, {j}) is nonzero but {j} cannot transmit to {i}"
                    )));
                }
            }
        }
        check_doubly_stochastic(&p, INPUT_TOL)?;
        Ok(Self::from_perron(p))
    }

    fn from_perron(p: DMatrix<f64>) -> Self {
        let n = p.nrows();
        let k = &p - DMatrix::identity(n, n);
        let rho = essential_radius_unchecked(&p);
        let norms = operator_norms(&p, &k);
        Self { k, p, rho, norms }
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    /// The gain `K`.
    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// The Perron matrix `P = I + K`.
    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Essential spectral radius of `P`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn norms(&self) -> OperatorNorms {
        self.norms
    }

    /// Eigenvalues of `P`, sorted by decreasing modulus.
    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        eigenvalues(&self.p)
    }

    /// Row-major CSV of `P`, one row per line, shortest round-trip decimal form.
    pub fn p_to_csv(&self) -> String {
        matrix_to_csv(&self.p)
    }

    pub fn k_to_csv(&self) -> String {
        matrix_to_csv(&self.k)
    }
}

fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Checks rows and columns sum to one and entries lie in `[0, 1]`, within `tol`.
/// Square matrix from a list of equal-length rows.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(format!("expected a non-empty square matrix, got {n} rows")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn check_doubly_stochastic(p: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !p.is_square() {
        return Err(invalid("matrix is not square"));
    }
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < -tol || **x > 1.0 + tol) {
        return Err(invalid(format!("entry {x} outside [0, 1]")));
    }
    for (i, row) in p.row_iter().enumerate() {
        let s = row.sum();
        if (s - 1.0).abs() > tol {
            return Err(invalid(format!("row {i} sums to {s}")));
        }
    }
    for (j, col) in p.column_iter().enumerate() {
        let s = col.sum();
        if (s - 1.0).abs() > tol {
            return Err(invalid(format!("column {j} sums to {s}")));
        }
    }
    Ok(())
}

/// Largest eigenvalue modulus of a doubly stochastic `p` after removing the one
/// eigenvalue closest to 1.
pub fn essential_spectral_radius(p: &DMatrix<f64>) -> Result<f64> {
    check_doubly_stochastic(p, INPUT_TOL)?;
    Ok(essential_radius_unchecked(p))
}

fn essential_radius_unchecked(p: &DMatrix<f64>) -> f64 {
    let eig = eigenvalues(p);
    let Some(structural) = eig
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).norm().total_cmp(&(b.1 - 1.0).norm()))
        .map(|(idx, _)| idx)
    else {
        return 0.0;
    };
    eig.iter()
        .enumerate()
        .filter(|&(idx, _)| idx != structural)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max)
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && (0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

fn eigenvalues(p: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut eig: Vec<Complex<f64>> = if is_symmetric(p) {
        p.clone()
            .symmetric_eigenvalues()
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .collect()
    } else {
        p.complex_eigenvalues().iter().copied().collect()
    };
    eig.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
    eig
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

fn operator_norms(p: &DMatrix<f64>, k: &DMatrix<f64>) -> OperatorNorms {
    let n = p.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    // P maps the complement of span{1} into itself, so its restriction there
    // has the norm of P - J/n.
    let averaging = DMatrix::from_element(n, n, 1.0 / n as f64);
    OperatorNorms {
        p: spectral_norm(p),
        k: spectral_norm(k),
        k_minus_i: spectral_norm(&(k - &eye)),
        p_disagreement: spectral_norm(&(p - averaging)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring_perron_eigs(n: usize) -> Vec<f64> {
        // circulant with weights 1/3 on the diagonal and both neighbors
        (0..n)
            .map(|k| 1.0 - (2.0 / 3.0) * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()))
            .collect()
    }

    fn circulant_rho(n: usize) -> f64 {
        ring_perron_eigs(n)[1..].iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn ring4_weights_and_spectrum() {
        let m = ConsensusMatrix::max_degree(&Digraph::ring(4).unwrap()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j || (i + 4 - j) % 4 == 1 || (j + 4 - i) % 4 == 1 {
                    1.0 / 3.0
                } else {
                    0.0
                };
                assert!((m.p()[(i, j)] - expected).abs() < 1e-15);
            }
        }
        let mut got: Vec<f64> = m.eigenvalues().iter().map(|z| z.re).collect();
        let mut want = ring_perron_eigs(4);
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{got:?} vs {want:?}");
        }
        assert!((m.rho() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ring20_rho() {
        let m = ConsensusMatrix::max_degree(&Digraph::ring(20).unwrap()).unwrap();
        assert!((m.rho() - 0.9673).abs() < 5e-4);
        assert!((m.rho() - circulant_rho(20)).abs() < 1e-9);
    }

    #[test]
    fn rings_match_circulant_formula() {
        for n in 3..40 {
            let m = ConsensusMatrix::max_degree(&Digraph::ring(n).unwrap()).unwrap();
            assert!((m.rho() - circulant_rho(n)).abs() < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn complete_pair_is_rank_one() {
        let m = ConsensusMatrix::max_degree(&Digraph::complete(2).unwrap()).unwrap();
        for x in m.p().iter() {
            assert_eq!(*x, 0.5);
        }
        assert!(m.rho().abs() < 1e-12);
        assert!((m.norms().p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn esr_degenerate_cases() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert!((essential_spectral_radius(&eye).unwrap() - 1.0).abs() < 1e-15);
        for n in 1..8 {
            let avg = DMatrix::from_element(n, n, 1.0 / n as f64);
            assert!(essential_spectral_radius(&avg).unwrap() < 1e-12);
        }
    }

    #[test]
    fn esr_rejects_non_stochastic() {
        let m = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.1, 0.8]);
        assert!(essential_spectral_radius(&m).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[1.5, -0.5, -0.5, 1.5]);
        assert!(essential_spectral_radius(&neg).is_err());
    }

    #[test]
    fn zero_gain_norms() {
        let g = Digraph::ring(5).unwrap();
        let m = ConsensusMatrix::custom(&g, DMatrix::identity(5, 5)).unwrap();
        let nrm = m.norms();
        assert!((nrm.p - 1.0).abs() < 1e-12);
        assert!(nrm.k.abs() < 1e-12);
        assert!((nrm.k_minus_i - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ring4_norm_bounds() {
        let m = ConsensusMatrix::max_degree(&Digraph::ring(4).unwrap()).unwrap();
        let nrm = m.norms();
        assert!(nrm.k <= 2.0 + 1e-12);
        assert!(nrm.k_minus_i <= 3.0 + 1e-12);
        // symmetric P: restricted norm equals rho
        assert!((nrm.p_disagreement - m.rho()).abs() < 1e-9);
    }

    #[test]
    fn max_degree_rejects_bad_graphs() {
        let cycle = Digraph::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(ConsensusMatrix::max_degree(&cycle).is_err());
        let split = Digraph::new(4, [(0, 1), (1, 0), (2, 3), (3, 2)]).unwrap();
        assert!(ConsensusMatrix::max_degree(&split).is_err());
    }

    #[test]
    fn custom_checks_adaptedness() {
        let g = Digraph::ring(4).unwrap();
        let mut p = DMatrix::from_element(4, 4, 0.25);
        assert!(ConsensusMatrix::custom(&g, p.clone()).is_err());
        p.fill(0.0);
        for i in 0..4 {
            p[(i, i)] = 0.5;
            p[(i, (i + 1) % 4)] = 0.5;
        }
        // half-step along the directed cycle; circulant with eigenvalues 0.5 + 0.5 w^k
        let m = ConsensusMatrix::custom(&g, p).unwrap();
        assert!((m.rho() - (0.5f64).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn csv_has_full_precision() {
        let m = ConsensusMatrix::max_degree(&Digraph::ring(4).unwrap()).unwrap();
        let csv = m.p_to_csv();
        let first: f64 = csv.lines().next().unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, m.p()[(0, 0)]);
        assert_eq!(csv.lines().count(), 4);
    }
}
