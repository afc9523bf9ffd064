//! Finite-dimensional realization of structured operators: truncation
//! matrices, convergence tables, positivity and contraction-factor probes.
//!
//! Block truncations use the stacked layout (H₁ coordinates `1..n` first,
//! then H₂ coordinates `1..n`) so report indices are reproducible.

use num_complex::Complex64;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::operators::{BlockOperator, Coupling, SpaceDim, StructuredOperator};

/// Pseudo-inverse eigenvalue cutoff in [`contraction_factor`].
pub const PINV_CUTOFF: f64 = 1e-8;

/// Leading principal `n×n` submatrix in the canonical basis.
pub fn truncate(op: &StructuredOperator, n: usize) -> Result<DenseMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("truncation size must be >= 1".into()));
    }
    op.lead_block_at(n.max(op.lead_dim()))
        .map(|m| m.principal(n))
}

pub fn truncate_coupling(x: &Coupling, n: usize) -> DenseMatrix {
    match x {
        Coupling::Zero => DenseMatrix::zeros(n, n),
        Coupling::Finite(m) => m.embed(n, n),
        Coupling::Diagonal(seq) => {
            DenseMatrix::diagonal(&(1..=n as u64).map(|k| seq.entry(k)).collect::<Vec<_>>())
        }
    }
}

/// Stacked `2n×2n` truncation of `[[A₁, X],[X*, A₂]]`.
pub fn truncate_block_parts(
    a1: &StructuredOperator,
    a2: &StructuredOperator,
    x: &Coupling,
    n: usize,
) -> Result<DenseMatrix> {
    let t1 = truncate(a1, n)?;
    let t2 = truncate(a2, n)?;
    let xm = truncate_coupling(x, n);
    let xadj = xm.adjoint();
    Ok(DenseMatrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => t1.get(i, j),
        (true, false) => xm.get(i, j - n),
        (false, true) => xadj.get(i - n, j),
        (false, false) => t2.get(i - n, j - n),
    }))
}

pub fn truncate_block(t: &BlockOperator, n: usize) -> Result<DenseMatrix> {
    truncate_block_parts(t.a1(), t.a2(), t.x(), n)
}

/// Contraction-factor probe: `‖pinv(√A₁ₙ) · Xₙ · pinv(√A₂ₙ)‖` at truncation
/// size `n`. Values ≤ 1 + 1e-6 corroborate positivity, values > 1 + 1e-3
/// flag likely non-positivity; evidence either way, not proof.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionProbe {
    pub factor: f64,
    /// Some square-root eigenvalue fell below the pseudo-inverse cutoff;
    /// the factor only sees the complement of that subspace.
    pub cutoff_hit: bool,
    pub n: usize,
}

pub fn contraction_factor(t: &BlockOperator, n: usize) -> Result<ContractionProbe> {
    let a1 = truncate(t.a1(), n)?;
    let a2 = truncate(t.a2(), n)?;
    let e1 = a1.hermitian_eigen()?;
    let e2 = a2.hermitian_eigen()?;
    if e1.min() < -PINV_CUTOFF || e2.min() < -PINV_CUTOFF {
        return Err(Error::NotPositive(format!(
            "diagonal truncations are not positive at n={n} (min eigenvalues {} / {})",
            e1.min(),
            e2.min()
        )));
    }
    let s1 = e1.recompose(|l| l.max(0.0).sqrt());
    let s2 = e2.recompose(|l| l.max(0.0).sqrt());
    let (p1, hit1) = s1.psd_pinv(PINV_CUTOFF)?;
    let (p2, hit2) = s2.psd_pinv(PINV_CUTOFF)?;
    let xm = truncate_coupling(t.x(), n);
    let factor = p1.matmul(&xm)?.matmul(&p2)?.numeric_norm()?;
    Ok(ContractionProbe { factor, cutoff_hit: hit1 || hit2, n })
}

/// One row of a truncation convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub norm: f64,
    pub min_modulus: f64,
    pub min_eigenvalue: f64,
    /// `|‖T‖ − ‖Tₙ‖|` when the structured norm is exactly known.
    pub gap: Option<f64>,
}

impl ConvergenceRow {
    pub fn csv_line(&self) -> String {
        let gap = self.gap.map(|g| format!("{g}")).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            self.n, self.norm, self.min_modulus, self.min_eigenvalue, gap
        )
    }
}

pub const CSV_HEADER: &str = "n,norm,min_modulus,min_eigenvalue,gap";

/// Target of a convergence experiment.
pub enum ConvergenceTarget<'a> {
    Op(&'a StructuredOperator),
    Block(&'a BlockOperator),
}

impl ConvergenceTarget<'_> {
    fn truncate(&self, n: usize) -> Result<DenseMatrix> {
        match self {
            ConvergenceTarget::Op(op) => truncate(op, n),
            ConvergenceTarget::Block(t) => truncate_block(t, n),
        }
    }

    /// Exact operator norm when the structure supports it.
    fn exact_norm(&self) -> Option<f64> {
        match self {
            ConvergenceTarget::Op(op) => {
                if op.space().is_finite() {
                    None
                } else {
                    Some(op.operator_norm().value)
                }
            }
            ConvergenceTarget::Block(t) => block_exact_norm(t),
        }
    }
}

/// Exact block norm for the decidable shapes: zero coupling (max of the
/// component norms) and a symmetric diagonal pair with a diagonal coupling
/// (per-coordinate 2×2 rotation gives entries `a_n ± x_n`).
pub fn block_exact_norm(t: &BlockOperator) -> Option<f64> {
    if t.a1().space().is_finite() || t.a2().space().is_finite() {
        return None;
    }
    match t.x() {
        Coupling::Zero => {
            Some(t.a1().operator_norm().value.max(t.a2().operator_norm().value))
        }
        Coupling::Diagonal(x) if t.a1() == t.a2() && t.a1().is_diagonal() => {
            let a = t.a1().diag();
            let plus = a.add(x).ok()?;
            let minus = a.add(&x.neg()).ok()?;
            Some(plus.abs_supremum().value.max(minus.abs_supremum().value))
        }
        _ => None,
    }
}

/// Truncation ladder: norms are nondecreasing in `n` (compressions of a
/// fixed self-adjoint operator interlace), asserted here.
pub fn convergence_table(target: &ConvergenceTarget, ns: &[usize]) -> Result<Vec<ConvergenceRow>> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("truncation sizes must be strictly ascending".into()));
    }
    let exact = target.exact_norm();
    let mut rows = Vec::with_capacity(ns.len());
    let mut prev_norm = f64::NEG_INFINITY;
    for &n in ns {
        let m = target.truncate(n)?;
        let eig = m.hermitian_eigen()?;
        let norm = eig.values.iter().fold(0.0f64, |acc, l| acc.max(l.abs()));
        let min_modulus = eig.values.iter().fold(f64::INFINITY, |acc, l| acc.min(l.abs()));
        if norm + 1e-12 < prev_norm {
            return Err(Error::InvalidArgument(format!(
                "truncation norms failed to interlace at n={n}: {norm} < {prev_norm}"
            )));
        }
        prev_norm = norm;
        rows.push(ConvergenceRow {
            n,
            norm,
            min_modulus,
            min_eigenvalue: eig.min(),
            gap: exact.map(|e| (e - norm).abs()),
        });
    }
    Ok(rows)
}

/// Norm of the restriction of the `n×n` truncation to the coordinate
/// subspace `S` (columns `S` of the truncation), with the maximizing unit
/// vector in `S`-coordinates. A spot check against classification claims,
/// not a decision procedure.
pub fn attainment_probe(
    op: &StructuredOperator,
    subspace: &[u64],
    n: usize,
) -> Result<(f64, Vec<Complex64>)> {
    if subspace.is_empty() {
        return Err(Error::InvalidArgument("attainment probe needs a nonempty index set".into()));
    }
    if subspace.iter().any(|&s| s == 0 || s > n as u64) {
        return Err(Error::InvalidArgument(format!(
            "subspace indices must lie in 1..={n}"
        )));
    }
    let t = truncate(op, n)?;
    let cols: Vec<usize> = subspace.iter().map(|&s| (s - 1) as usize).collect();
    let restricted = t.select_columns(&cols);
    let gram = restricted.adjoint().matmul(&restricted)?;
    let eig = gram.hermitian_eigen()?;
    let top = eig.values.len() - 1;
    let maximizer: Vec<Complex64> =
        (0..eig.values.len()).map(|i| eig.vectors.get(i, top)).collect();
    Ok((eig.values[top].max(0.0).sqrt(), maximizer))
}
