//! Structured self-adjoint operators on ℓ², compact couplings, 2×2 block
//! assembly, and the exact operator algebra the classifier runs on.
//!
//! A [`StructuredOperator`] is block-diagonal with respect to
//! `span{e₁…e_N} ⊕ span{e_{N+1}, …}`: the leading block is the diagonal head
//! restricted to `1…N` plus a Hermitian correction, the rest is purely
//! diagonal with exact strand tails. Leading-block eigenvalues are numeric
//! (tolerance 1e-10); everything past the leading block is exact.

use num_complex::Complex64;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::spectra::{Count, Extremum, Side, SpectralSequence};

/// Decision band around zero for numeric leading-block eigenvalues.
pub const EIG_DECISION_TOL: f64 = 1e-10;

/// Truncation size used for the constructor-time positivity probe of
/// general blocks.
pub const DEFAULT_POSITIVITY_PROBE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceDim {
    Finite(u64),
    Infinite,
}

impl SpaceDim {
    pub fn is_finite(&self) -> bool {
        matches!(self, SpaceDim::Finite(_))
    }
}

/// A value together with whether a finite index/eigenvector attains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attainable {
    pub value: f64,
    pub attained: bool,
}

/// Exact positivity decision for a structured operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Positivity {
    Positive,
    NotPositive(String),
    /// A leading-block eigenvalue sits within [`EIG_DECISION_TOL`] of zero.
    Borderline(f64),
}

/// Self-adjoint operator: exact diagonal sequence plus a Hermitian
/// finite-rank correction on the leading coordinates.
#[derive(Debug, Clone)]
pub struct StructuredOperator {
    space: SpaceDim,
    diag: SpectralSequence,
    corr: DenseMatrix,
    lead_eigs: Vec<f64>,
    positivity: Positivity,
}

impl PartialEq for StructuredOperator {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space && self.diag == other.diag && self.corr == other.corr
    }
}

impl StructuredOperator {
    pub fn new(space: SpaceDim, diag: SpectralSequence, corr: DenseMatrix) -> Result<Self> {
        if !corr.is_square() {
            return Err(Error::InvalidArgument("corr must be square".into()));
        }
        if corr.rows() > 0 && !corr.is_hermitian() {
            return Err(Error::InvalidArgument(format!(
                "corr is not Hermitian (defect {:.3e})",
                corr.hermitian_defect()
            )));
        }
        match space {
            SpaceDim::Infinite => {
                if diag.is_head_only() {
                    return Err(Error::InvalidArgument(
                        "an operator on an infinite space needs tail strands".into(),
                    ));
                }
            }
            SpaceDim::Finite(d) => {
                if d == 0 {
                    return Err(Error::InvalidArgument("finite dimension must be positive".into()));
                }
                if !diag.is_head_only() || diag.head().len() as u64 != d {
                    return Err(Error::InvalidArgument(
                        "finite spaces forbid tails and require |head| == dim".into(),
                    ));
                }
            }
        }
        if corr.rows() > diag.head().len() {
            return Err(Error::InvalidArgument(format!(
                "corr size {} exceeds head length {}; pad the head first",
                corr.rows(),
                diag.head().len()
            )));
        }
        // Canonicalize: an exactly diagonal correction folds into the head,
        // so purely diagonal operators always have an empty leading block.
        let (diag, corr) = if corr.rows() > 0 && corr.is_diagonal() {
            let mut head = diag.head().to_vec();
            for (i, v) in corr.real_diagonal().into_iter().enumerate() {
                head[i] += v;
            }
            let folded = if diag.is_head_only() {
                SpectralSequence::finite(head)
            } else {
                SpectralSequence::new(head, diag.strands().to_vec())?
            };
            (folded, DenseMatrix::zeros(0, 0))
        } else {
            (diag, corr.hermitian_part())
        };

        let lead_eigs = if corr.rows() == 0 {
            Vec::new()
        } else {
            let mut lead = corr.clone();
            for i in 0..corr.rows() {
                let v = lead.get(i, i) + Complex64::new(diag.head()[i], 0.0);
                lead.set(i, i, v);
            }
            lead.hermitian_eigen()?.values
        };
        let positivity = Self::decide_positivity(&diag, &lead_eigs, corr.rows());
        Ok(Self { space, diag, corr, lead_eigs, positivity })
    }

    /// Purely diagonal operator on an infinite space.
    pub fn from_diag(diag: SpectralSequence) -> Result<Self> {
        Self::new(SpaceDim::Infinite, diag, DenseMatrix::zeros(0, 0))
    }

    /// Identity on an infinite space.
    pub fn identity() -> Self {
        Self::from_diag(SpectralSequence::constant(1.0)).expect("identity is representable")
    }

    pub fn zero_op() -> Self {
        Self::from_diag(SpectralSequence::zero()).expect("zero is representable")
    }

    pub fn constant(alpha: f64) -> Self {
        Self::from_diag(SpectralSequence::constant(alpha)).expect("constants are representable")
    }

    pub fn identity_finite(d: u64) -> Result<Self> {
        Self::new(
            SpaceDim::Finite(d),
            SpectralSequence::finite(vec![1.0; d as usize]),
            DenseMatrix::zeros(0, 0),
        )
    }

    pub fn space(&self) -> SpaceDim {
        self.space
    }

    pub fn diag(&self) -> &SpectralSequence {
        &self.diag
    }

    pub fn corr(&self) -> &DenseMatrix {
        &self.corr
    }

    pub fn lead_dim(&self) -> usize {
        self.corr.rows()
    }

    /// Ascending numeric eigenvalues of the leading block. Empty when the
    /// operator is purely diagonal.
    pub fn lead_eigs(&self) -> &[f64] {
        &self.lead_eigs
    }

    /// Leading `n×n` block: `diag(head[..n]) + corr`, valid for any
    /// `n >= lead_dim` (the operator is block-diagonal at every such split).
    pub fn lead_block_at(&self, n: usize) -> Result<DenseMatrix> {
        if let SpaceDim::Finite(d) = self.space {
            if n as u64 > d {
                return Err(Error::InvalidArgument(format!(
                    "truncation {n} exceeds finite dimension {d}"
                )));
            }
        }
        if n < self.lead_dim() {
            return Err(Error::InvalidArgument(
                "block split below the leading correction".into(),
            ));
        }
        let mut m = self.corr.embed(n, n);
        for i in 0..n {
            let v = m.get(i, i) + Complex64::new(self.diag_entry(i as u64 + 1), 0.0);
            m.set(i, i, v);
        }
        Ok(m)
    }

    /// Diagonal-part entry at position `n` (excludes the correction).
    pub fn diag_entry(&self, n: u64) -> f64 {
        self.diag.entry(n)
    }

    pub fn is_diagonal(&self) -> bool {
        self.lead_dim() == 0
    }

    /// Syntactic identity detection: empty leading block and constant-one
    /// diagonal.
    pub fn is_identity(&self) -> bool {
        self.lead_dim() == 0 && self.diag.is_constant(1.0)
    }

    pub fn is_zero(&self) -> bool {
        self.lead_dim() == 0 && self.diag.is_constant(0.0)
    }

    /// `T + offset·I`.
    pub fn shifted(&self, offset: f64) -> Self {
        let mut out = self.clone();
        out.diag = self.diag.shift(offset);
        out.lead_eigs = self.lead_eigs.iter().map(|l| l + offset).collect();
        out.positivity = Self::decide_positivity(&out.diag, &out.lead_eigs, out.corr.rows());
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch("add of operators on different spaces".into()));
        }
        let diag = self.diag.add(&other.diag).map_err(|e| match e {
            Error::ShapeMismatch(m) => Error::ShapeMismatch(format!("operator add: {m}")),
            e => e,
        })?;
        let n = self.lead_dim().max(other.lead_dim());
        let corr = self.corr.embed(n, n).add(&other.corr.embed(n, n))?;
        Self::new(self.space, diag, corr)
    }

    pub fn scale(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.space,
            self.diag.scale(factor),
            self.corr.scale(Complex64::new(factor, 0.0)),
        )
    }

    /// Exact product. Both operators are block-diagonal at the common split;
    /// the result stays in the self-adjoint family only when the leading
    /// blocks commute, otherwise the product is rejected.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch("multiply of operators on different spaces".into()));
        }
        let diag = self.diag.mul(&other.diag).map_err(|e| match e {
            Error::ShapeMismatch(m) => Error::ShapeMismatch(format!("operator multiply: {m}")),
            e => e,
        })?;
        let n = self.lead_dim().max(other.lead_dim());
        if n == 0 {
            return Self::new(self.space, diag, DenseMatrix::zeros(0, 0));
        }
        let lead = self.lead_block_at(n)?.matmul(&other.lead_block_at(n)?)?;
        if lead.hermitian_defect() > 1e-12 * lead.max_abs().max(1.0) {
            return Err(Error::UnrepresentableProduct(
                "leading blocks do not commute; product leaves the self-adjoint family".into(),
            ));
        }
        let mut corr = lead.hermitian_part();
        for i in 0..n {
            let v = corr.get(i, i) - Complex64::new(diag.head()[i], 0.0);
            corr.set(i, i, v);
        }
        Self::new(self.space, diag, corr)
    }

    /// Exact essential spectrum: the strand limits. The finite-rank leading
    /// block is invisible here (compact perturbations do not move it).
    pub fn essential_spectrum(&self) -> Result<Vec<f64>> {
        if self.space.is_finite() {
            return Err(Error::FiniteSpace("essential spectrum"));
        }
        Ok(self.diag.accumulation_points())
    }

    /// Essential spectrum of `|T|`.
    pub fn abs_essential_spectrum(&self) -> Result<Vec<f64>> {
        let mut pts: Vec<f64> = self.essential_spectrum()?.iter().map(|l| l.abs()).collect();
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        Ok(pts)
    }

    fn decide_positivity(diag: &SpectralSequence, lead_eigs: &[f64], n: usize) -> Positivity {
        // Tail (everything past the leading block) is exact.
        let tail = tail_infimum(diag, n);
        if tail.value < 0.0 {
            return Positivity::NotPositive(format!(
                "diagonal entry {} < 0 past the leading block",
                tail.value
            ));
        }
        // Leading block is numeric with the decision band.
        if let Some(&min) = lead_eigs.first() {
            if min < -EIG_DECISION_TOL {
                return Positivity::NotPositive(format!("leading-block eigenvalue {min} < 0"));
            }
            if min <= EIG_DECISION_TOL {
                return Positivity::Borderline(min);
            }
        }
        Positivity::Positive
    }

    pub fn positivity(&self) -> &Positivity {
        &self.positivity
    }

    /// Upgrade a Borderline positivity decision to Positive when the caller
    /// can certify it structurally (grams `C*C`, squares of self-adjoint
    /// operators, sums of certified positives). Exact disproofs are kept.
    pub fn certify_positive(mut self) -> Self {
        if matches!(self.positivity, Positivity::Borderline(_)) {
            self.positivity = Positivity::Positive;
        }
        self
    }

    pub fn is_positive(&self) -> Result<bool> {
        match &self.positivity {
            Positivity::Positive => Ok(true),
            Positivity::NotPositive(_) => Ok(false),
            Positivity::Borderline(e) => Err(Error::Borderline(format!(
                "leading-block eigenvalue {e} within {EIG_DECISION_TOL} of zero"
            ))),
        }
    }

    /// `‖T‖ = sup |σ(T)|`, attained iff achieved by an eigenvalue or an
    /// actual diagonal entry rather than only a strand limit.
    pub fn operator_norm(&self) -> Attainable {
        let mut cands: Vec<Attainable> = self
            .lead_eigs
            .iter()
            .map(|l| Attainable { value: l.abs(), attained: true })
            .collect();
        cands.push(tail_abs_extremum(&self.diag, self.lead_dim(), false));
        pick_attainable(cands, false)
    }

    /// `m(T) = inf |σ(T)|`.
    pub fn min_modulus(&self) -> Attainable {
        let mut cands: Vec<Attainable> = self
            .lead_eigs
            .iter()
            .map(|l| Attainable { value: l.abs(), attained: true })
            .collect();
        cands.push(tail_abs_extremum(&self.diag, self.lead_dim(), true));
        pick_attainable(cands, true)
    }

    /// Exact closed-range test: nonzero spectrum stays away from zero iff
    /// no strand with nonzero entries decays to zero.
    pub fn has_closed_range(&self) -> bool {
        if self.space.is_finite() {
            return true;
        }
        self.diag
            .strands()
            .iter()
            .all(|s| s.limit() != 0.0 || s.is_constant())
    }

    /// Exact count of spectrum points (with multiplicity) on one side of `t`.
    /// Leading-block eigenvalues within [`EIG_DECISION_TOL`] of `t` count as
    /// equal, never as strictly below/above.
    pub fn count_spectrum_vs(&self, t: f64, side: Side) -> Count {
        let n = self.lead_dim();
        let mut total = 0u64;
        for &l in &self.lead_eigs {
            let cmp = if (l - t).abs() <= EIG_DECISION_TOL {
                Side::Equal
            } else if l < t {
                Side::Below
            } else {
                Side::Above
            };
            if cmp == side {
                total += 1;
            }
        }
        for &h in &self.diag.head()[n..] {
            let hit = match side {
                Side::Below => h < t,
                Side::Above => h > t,
                Side::Equal => h == t,
            };
            if hit {
                total += 1;
            }
        }
        let mut count = Count::Finite(total);
        for s in self.diag.strands() {
            count = match (count, s.count_vs(t, side)) {
                (Count::Finite(a), Count::Finite(b)) => Count::Finite(a + b),
                _ => Count::Infinite,
            };
        }
        count
    }
}

impl std::fmt::Display for StructuredOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.space {
            SpaceDim::Infinite => write!(f, "op[{}", self.diag)?,
            SpaceDim::Finite(d) => write!(f, "op(dim {d})[{}", self.diag)?,
        }
        if self.lead_dim() > 0 {
            write!(f, " + corr {}x{}", self.lead_dim(), self.lead_dim())?;
        }
        write!(f, "]")
    }
}

/// Extremum of the diagonal past the leading block.
fn tail_extremum(diag: &SpectralSequence, lead: usize, minimize: bool) -> Attainable {
    let mut cands: Vec<Attainable> = diag.head()[lead..]
        .iter()
        .map(|&h| Attainable { value: h, attained: true })
        .collect();
    for s in diag.strands() {
        let e = if minimize { s.infimum() } else { s.supremum() };
        cands.push(Attainable { value: e.value, attained: e.attained() });
    }
    pick_attainable(cands, minimize)
}

fn tail_abs_extremum(diag: &SpectralSequence, lead: usize, minimize: bool) -> Attainable {
    let mut cands: Vec<Attainable> = diag.head()[lead..]
        .iter()
        .map(|&h| Attainable { value: h.abs(), attained: true })
        .collect();
    for s in diag.strands() {
        let e = if minimize { s.abs_infimum() } else { s.abs_supremum() };
        cands.push(Attainable { value: e.value, attained: e.attained() });
    }
    pick_attainable(cands, minimize)
}

fn tail_infimum(diag: &SpectralSequence, lead: usize) -> Attainable {
    tail_extremum(diag, lead, true)
}

fn pick_attainable(cands: Vec<Attainable>, minimize: bool) -> Attainable {
    let mut best: Option<Attainable> = None;
    for c in cands {
        best = Some(match best {
            None => c,
            Some(b) => {
                let better =
                    if minimize { c.value < b.value } else { c.value > b.value };
                if better {
                    c
                } else if c.value == b.value && c.attained && !b.attained {
                    c
                } else {
                    b
                }
            }
        });
    }
    best.unwrap_or(Attainable { value: 0.0, attained: true })
}

/// Off-diagonal block `X : H₂ → H₁`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    Zero,
    /// Finite matrix acting from the leading coordinates of H₂ into the
    /// leading coordinates of H₁.
    Finite(DenseMatrix),
    /// `e_n ↦ x_n e_n` with exact entries.
    Diagonal(SpectralSequence),
}

impl Coupling {
    /// Normalizing constructor for the finite variant.
    pub fn finite(m: DenseMatrix) -> Self {
        if m.is_zero() {
            Coupling::Zero
        } else {
            Coupling::Finite(m)
        }
    }

    pub fn diagonal(seq: SpectralSequence) -> Result<Self> {
        if seq.is_head_only() {
            return Err(Error::InvalidArgument(
                "a diagonal coupling needs tail strands; use Finite for head-only data".into(),
            ));
        }
        if seq.is_constant(0.0) {
            return Ok(Coupling::Zero);
        }
        Ok(Coupling::Diagonal(seq))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coupling::Zero)
    }

    /// Compact iff every diagonal strand decays to zero; finite matrices are
    /// always compact.
    pub fn is_compact(&self) -> bool {
        match self {
            Coupling::Zero | Coupling::Finite(_) => true,
            Coupling::Diagonal(seq) => seq.accumulation_points().iter().all(|l| *l == 0.0),
        }
    }

    pub fn is_finite_rank(&self) -> bool {
        match self {
            Coupling::Zero | Coupling::Finite(_) => true,
            Coupling::Diagonal(seq) => seq.nonzero_count().is_finite(),
        }
    }

    /// Exact closed-range test: the nonzero singular values must stay away
    /// from zero.
    pub fn has_closed_range(&self) -> bool {
        match self {
            Coupling::Zero | Coupling::Finite(_) => true,
            Coupling::Diagonal(seq) => seq
                .strands()
                .iter()
                .all(|s| s.limit() != 0.0 || s.is_constant()),
        }
    }

    /// `‖X‖` with attainment (exact for diagonal couplings, numeric for
    /// finite matrices).
    pub fn norm(&self) -> Result<Attainable> {
        match self {
            Coupling::Zero => Ok(Attainable { value: 0.0, attained: true }),
            Coupling::Finite(m) => {
                Ok(Attainable { value: m.numeric_norm()?, attained: true })
            }
            Coupling::Diagonal(seq) => {
                let e = seq.abs_supremum();
                Ok(Attainable { value: e.value, attained: e.attained() })
            }
        }
    }

    pub fn adjoint(&self) -> Coupling {
        match self {
            Coupling::Zero => Coupling::Zero,
            Coupling::Finite(m) => Coupling::Finite(m.adjoint()),
            Coupling::Diagonal(seq) => Coupling::Diagonal(seq.clone()),
        }
    }

    pub fn scale(&self, factor: f64) -> Coupling {
        match self {
            Coupling::Zero => Coupling::Zero,
            Coupling::Finite(m) => Coupling::finite(m.scale(Complex64::new(factor, 0.0))),
            Coupling::Diagonal(seq) => Coupling::Diagonal(seq.scale(factor)),
        }
    }
}

impl std::fmt::Display for Coupling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coupling::Zero => write!(f, "0"),
            Coupling::Finite(m) => write!(f, "finite {}x{}", m.rows(), m.cols()),
            Coupling::Diagonal(seq) => write!(f, "diag[{seq}]"),
        }
    }
}

/// Positivity certificate for a 2×2 block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockPositivity {
    /// Exact certificate with the rule that produced it.
    ProvedPositive(&'static str),
    ProvedNotPositive(String),
    /// No exact route applies; carries the minimum eigenvalue of the
    /// `2n×2n` truncation. Interlacing makes a negative value a disproof,
    /// so reaching this state means the probe was nonnegative: evidence,
    /// not proof.
    NumericOnly { min_eig: f64, n: usize },
}

impl BlockPositivity {
    pub fn is_disproved(&self) -> bool {
        matches!(self, BlockPositivity::ProvedNotPositive(_))
    }
}

/// `[[A₁, X],[X*, A₂]]` on `H₁ ⊕ H₂`; the (2,1) entry is structurally `X*`.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    a1: StructuredOperator,
    a2: StructuredOperator,
    x: Coupling,
    positivity: BlockPositivity,
}

impl BlockOperator {
    pub fn new(a1: StructuredOperator, a2: StructuredOperator, x: Coupling) -> Result<Self> {
        Self::with_probe(a1, a2, x, DEFAULT_POSITIVITY_PROBE)
    }

    pub fn with_probe(
        a1: StructuredOperator,
        a2: StructuredOperator,
        x: Coupling,
        n_probe: usize,
    ) -> Result<Self> {
        Self::validate(&a1, &a2, &x)?;
        let positivity = decide_block_positivity(&a1, &a2, &x, n_probe)?;
        Ok(Self { a1, a2, x, positivity })
    }

    /// Constructor for blocks that are positive by construction (grams,
    /// identity-plus-gram squares); skips the probe.
    pub fn positive_certified(
        a1: StructuredOperator,
        a2: StructuredOperator,
        x: Coupling,
        rule: &'static str,
    ) -> Result<Self> {
        Self::validate(&a1, &a2, &x)?;
        Ok(Self { a1, a2, x, positivity: BlockPositivity::ProvedPositive(rule) })
    }

    fn validate(a1: &StructuredOperator, a2: &StructuredOperator, x: &Coupling) -> Result<()> {
        if let Coupling::Diagonal(_) = x {
            if a1.space().is_finite() || a2.space().is_finite() {
                return Err(Error::InvalidArgument(
                    "diagonal couplings require infinite component spaces".into(),
                ));
            }
        }
        if let Coupling::Finite(m) = x {
            if let SpaceDim::Finite(d) = a1.space() {
                if m.rows() as u64 > d {
                    return Err(Error::InvalidArgument("coupling rows exceed dim(H1)".into()));
                }
            }
            if let SpaceDim::Finite(d) = a2.space() {
                if m.cols() as u64 > d {
                    return Err(Error::InvalidArgument("coupling cols exceed dim(H2)".into()));
                }
            }
        }
        Ok(())
    }

    pub fn a1(&self) -> &StructuredOperator {
        &self.a1
    }

    pub fn a2(&self) -> &StructuredOperator {
        &self.a2
    }

    pub fn x(&self) -> &Coupling {
        &self.x
    }

    pub fn positivity(&self) -> &BlockPositivity {
        &self.positivity
    }

    /// Re-run the positivity decision at a different probe size (pure).
    pub fn is_positive_block(&self, n_probe: usize) -> Result<BlockPositivity> {
        decide_block_positivity(&self.a1, &self.a2, &self.x, n_probe)
    }

    /// `σ_ess(T) = σ_ess(A₁) ∪ σ_ess(A₂)` — valid only for compact
    /// couplings, where the off-diagonal is a compact perturbation.
    pub fn essential_spectrum(&self) -> Result<Vec<f64>> {
        if !self.x.is_compact() {
            return Err(Error::Indeterminate(
                "non-compact coupling: the compact-perturbation reduction does not apply".into(),
            ));
        }
        let mut pts = Vec::new();
        if !self.a1.space().is_finite() {
            pts.extend(self.a1.essential_spectrum()?);
        }
        if !self.a2.space().is_finite() {
            pts.extend(self.a2.essential_spectrum()?);
        }
        if pts.is_empty() {
            return Err(Error::FiniteSpace("essential spectrum of a finite block"));
        }
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        Ok(pts)
    }
}

fn decide_block_positivity(
    a1: &StructuredOperator,
    a2: &StructuredOperator,
    x: &Coupling,
    n_probe: usize,
) -> Result<BlockPositivity> {
    // Component positivity is necessary.
    let mut borderline = false;
    for (side, a) in [("A1", a1), ("A2", a2)] {
        match a.positivity() {
            Positivity::Positive => {}
            Positivity::NotPositive(why) => {
                return Ok(BlockPositivity::ProvedNotPositive(format!("{side} not positive: {why}")));
            }
            Positivity::Borderline(_) => borderline = true,
        }
    }
    if !borderline {
        // Recognized exact case 1: simultaneously diagonal data decides
        // positivity entrywise, |x_n|² ≤ a_n·b_n.
        if a1.is_diagonal() && a2.is_diagonal() {
            match x {
                Coupling::Zero => return Ok(BlockPositivity::ProvedPositive("diagonal components")),
                Coupling::Diagonal(seq) => {
                    if let (Ok(x2), Ok(ab)) = (seq.mul(seq), a1.diag().mul(a2.diag())) {
                        if let Ok(d) = x2.add(&ab.neg()) {
                            let sup = d.supremum();
                            if sup.value <= 0.0 {
                                return Ok(BlockPositivity::ProvedPositive(
                                    "entrywise factorization |x_n|^2 <= a_n b_n",
                                ));
                            }
                            let witness = d
                                .first_relative(0.0, Side::Above)
                                .map(|n| format!(" at coordinate {n}"))
                                .unwrap_or_default();
                            return Ok(BlockPositivity::ProvedNotPositive(format!(
                                "entrywise test fails: |x_n|^2 - a_n b_n reaches {}{witness}",
                                sup.value
                            )));
                        }
                    }
                    // incompatible shapes: fall through to the probe
                }
                Coupling::Finite(_) => {}
            }
        }
        // Recognized exact case 2: identity diagonal with a contraction.
        if a1.is_identity() && a2.is_identity() {
            let norm = x.norm()?;
            match x {
                Coupling::Diagonal(_) | Coupling::Zero => {
                    if norm.value <= 1.0 {
                        return Ok(BlockPositivity::ProvedPositive("identity pair with a contraction"));
                    }
                    return Ok(BlockPositivity::ProvedNotPositive(format!(
                        "coupling norm {} > 1 against identity diagonal",
                        norm.value
                    )));
                }
                Coupling::Finite(_) => {
                    if norm.value <= 1.0 + EIG_DECISION_TOL {
                        return Ok(BlockPositivity::ProvedPositive("identity pair with a contraction"));
                    }
                    return Ok(BlockPositivity::ProvedNotPositive(format!(
                        "coupling norm {} > 1 against identity diagonal",
                        norm.value
                    )));
                }
            }
        }
    }
    // Numeric probe: a negative truncation eigenvalue is a genuine
    // disproof (the truncation is a compression).
    let t = crate::truncation::truncate_block_parts(a1, a2, x, n_probe)?;
    let eig = t.hermitian_eigen()?;
    let min = eig.min();
    let scale = t.max_abs().max(1.0);
    if min < -EIG_DECISION_TOL * scale {
        return Ok(BlockPositivity::ProvedNotPositive(format!(
            "truncation at n={n_probe} has eigenvalue {min}"
        )));
    }
    Ok(BlockPositivity::NumericOnly { min_eig: min, n: n_probe })
}

/// Idempotent in canonical form `[[I, X],[0, 0]]` on `R(T) ⊕ N(T*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdempotentOperator {
    x: Coupling,
    range_dim: SpaceDim,
    cokernel_dim: SpaceDim,
}

impl IdempotentOperator {
    pub fn new(x: Coupling, range_dim: SpaceDim, cokernel_dim: SpaceDim) -> Result<Self> {
        if range_dim.is_finite() && cokernel_dim.is_finite() {
            return Err(Error::InvalidArgument(
                "range and cokernel cannot both be finite on an infinite space".into(),
            ));
        }
        if matches!(x, Coupling::Diagonal(_))
            && (range_dim.is_finite() || cokernel_dim.is_finite())
        {
            return Err(Error::InvalidArgument(
                "diagonal couplings require infinite range and cokernel".into(),
            ));
        }
        if let Coupling::Finite(m) = &x {
            if let SpaceDim::Finite(d) = range_dim {
                if m.rows() as u64 > d {
                    return Err(Error::InvalidArgument("coupling rows exceed range dim".into()));
                }
            }
            if let SpaceDim::Finite(d) = cokernel_dim {
                if m.cols() as u64 > d {
                    return Err(Error::InvalidArgument("coupling cols exceed cokernel dim".into()));
                }
            }
        }
        Ok(Self { x, range_dim, cokernel_dim })
    }

    pub fn x(&self) -> &Coupling {
        &self.x
    }

    pub fn range_dim(&self) -> SpaceDim {
        self.range_dim
    }

    pub fn cokernel_dim(&self) -> SpaceDim {
        self.cokernel_dim
    }
}

/// General 2×2 block `[[A₁₁, A₁₂],[A₂₁, A₂₂]]` with self-adjoint diagonal
/// entries and independent couplings (no adjoint symmetry imposed).
#[derive(Debug, Clone)]
pub struct GeneralBlock {
    pub a11: StructuredOperator,
    pub a12: Coupling,
    pub a21: Coupling,
    pub a22: StructuredOperator,
}

/// `S·C` for `C : H₂ → H₁` and `S` acting on `H₁`.
pub fn mul_op_coupling(op: &StructuredOperator, c: &Coupling) -> Result<Coupling> {
    match c {
        Coupling::Zero => Ok(Coupling::Zero),
        Coupling::Diagonal(x) => {
            if !op.is_diagonal() {
                return Err(Error::UnrepresentableProduct(
                    "non-diagonal operator times diagonal coupling".into(),
                ));
            }
            Ok(Coupling::diagonal(op.diag().mul(x)?)?)
        }
        Coupling::Finite(m) => {
            let r = m.rows().max(op.lead_dim());
            let lead = op.lead_block_at(r)?;
            Ok(Coupling::finite(lead.matmul(&m.embed(r, m.cols()))?))
        }
    }
}

/// `C·S` for `C : H₂ → H₁` and `S` acting on `H₂`.
pub fn mul_coupling_op(c: &Coupling, op: &StructuredOperator) -> Result<Coupling> {
    match c {
        Coupling::Zero => Ok(Coupling::Zero),
        Coupling::Diagonal(x) => {
            if !op.is_diagonal() {
                return Err(Error::UnrepresentableProduct(
                    "diagonal coupling times non-diagonal operator".into(),
                ));
            }
            Ok(Coupling::diagonal(x.mul(op.diag())?)?)
        }
        Coupling::Finite(m) => {
            let r = m.cols().max(op.lead_dim());
            let lead = op.lead_block_at(r)?;
            Ok(Coupling::finite(m.embed(m.rows(), r).matmul(&lead)?))
        }
    }
}

pub fn add_couplings(a: &Coupling, b: &Coupling) -> Result<Coupling> {
    match (a, b) {
        (Coupling::Zero, c) | (c, Coupling::Zero) => Ok(c.clone()),
        (Coupling::Finite(m1), Coupling::Finite(m2)) => {
            let r = m1.rows().max(m2.rows());
            let c = m1.cols().max(m2.cols());
            Ok(Coupling::finite(m1.embed(r, c).add(&m2.embed(r, c))?))
        }
        (Coupling::Diagonal(x1), Coupling::Diagonal(x2)) => Ok(Coupling::diagonal(x1.add(x2)?)?),
        _ => Err(Error::UnrepresentableProduct(
            "sum of a diagonal and a finite coupling leaves the coupling family".into(),
        )),
    }
}

/// `C*C` on the domain space of `C`.
pub fn cstar_c(c: &Coupling, domain: SpaceDim) -> Result<StructuredOperator> {
    match c {
        Coupling::Zero => zero_on(domain),
        Coupling::Diagonal(x) => StructuredOperator::from_diag(x.mul(x)?),
        Coupling::Finite(m) => {
            let gram = m.adjoint().matmul(m)?;
            embedded_on(domain, &gram)
        }
    }
}

/// `CC*` on the codomain space of `C`.
pub fn c_cstar(c: &Coupling, codomain: SpaceDim) -> Result<StructuredOperator> {
    match c {
        Coupling::Zero => zero_on(codomain),
        Coupling::Diagonal(x) => StructuredOperator::from_diag(x.mul(x)?),
        Coupling::Finite(m) => {
            let gram = m.matmul(&m.adjoint())?;
            embedded_on(codomain, &gram)
        }
    }
}

fn zero_on(space: SpaceDim) -> Result<StructuredOperator> {
    match space {
        SpaceDim::Infinite => Ok(StructuredOperator::zero_op()),
        SpaceDim::Finite(d) => StructuredOperator::new(
            space,
            SpectralSequence::finite(vec![0.0; d as usize]),
            DenseMatrix::zeros(0, 0),
        ),
    }
}

fn embedded_on(space: SpaceDim, block: &DenseMatrix) -> Result<StructuredOperator> {
    match space {
        SpaceDim::Infinite => {
            let n = block.rows();
            let seq = SpectralSequence::new(
                vec![0.0; n],
                vec![crate::spectra::TailStrand::constant(0.0)],
            )?;
            StructuredOperator::new(space, seq, block.clone())
        }
        SpaceDim::Finite(d) => {
            if block.rows() as u64 > d {
                return Err(Error::InvalidArgument("gram block exceeds finite dimension".into()));
            }
            StructuredOperator::new(
                space,
                SpectralSequence::finite(vec![0.0; d as usize]),
                block.embed(d as usize, d as usize),
            )
        }
    }
}

/// `T*T` of a general 2×2 block, exact within the representable family.
pub fn gram_block(g: &GeneralBlock) -> Result<BlockOperator> {
    let h1 = g.a11.space();
    let h2 = g.a22.space();
    // (1,1): A₁₁*A₁₁ + A₂₁*A₂₁ — positive by construction
    let b11 = g.a11.multiply(&g.a11)?.add(&cstar_c(&g.a21, h1)?)?.certify_positive();
    // (2,2): A₁₂*A₁₂ + A₂₂*A₂₂
    let b22 = cstar_c(&g.a12, h2)?.add(&g.a22.multiply(&g.a22)?)?.certify_positive();
    // (1,2): A₁₁*A₁₂ + A₂₁*A₂₂
    let b12 = add_couplings(
        &mul_op_coupling(&g.a11, &g.a12)?,
        &mul_coupling_op(&g.a21.adjoint(), &g.a22)?,
    )?;
    BlockOperator::positive_certified(b11, b22, b12, "gram T*T")
}

/// `T*T = T²` of a positive block.
pub fn gram_of_block(t: &BlockOperator) -> Result<BlockOperator> {
    let g = GeneralBlock {
        a11: t.a1().clone(),
        a12: t.x().clone(),
        a21: t.x().adjoint(),
        a22: t.a2().clone(),
    };
    gram_block(&g)
}

/// `(T + T* − I)² = [[I + XX*, 0],[0, I + X*X]]` for an idempotent in
/// canonical form.
pub fn buckholtz_square(t: &IdempotentOperator) -> Result<BlockOperator> {
    let a1 = c_cstar(t.x(), t.range_dim())?.shifted(1.0);
    let a2 = cstar_c(t.x(), t.cokernel_dim())?.shifted(1.0);
    BlockOperator::positive_certified(a1, a2, Coupling::Zero, "identity plus gram")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{TailStrand, TailTerm};

    fn one_over_n() -> SpectralSequence {
        SpectralSequence::from_strand(
            TailStrand::new(0.0, vec![TailTerm::pos(1.0, 1.0).unwrap()]).unwrap(),
        )
    }

    fn one_plus_one_over_n() -> SpectralSequence {
        SpectralSequence::from_strand(
            TailStrand::new(1.0, vec![TailTerm::pos(1.0, 1.0).unwrap()]).unwrap(),
        )
    }

    #[test]
    fn multiply_diagonal_squares() {
        let a = StructuredOperator::from_diag(one_plus_one_over_n()).unwrap();
        let sq = a.multiply(&a).unwrap();
        for n in 1..=100u64 {
            let direct = a.diag_entry(n) * a.diag_entry(n);
            assert!((sq.diag_entry(n) - direct).abs() < 1e-12);
        }
        // 1 + 2/n + 1/n^2
        let st = &sq.diag().strands()[0];
        assert_eq!(st.terms().len(), 2);
    }

    #[test]
    fn add_zero_is_identity_map() {
        let a = StructuredOperator::from_diag(one_plus_one_over_n()).unwrap();
        let z = StructuredOperator::from_diag(SpectralSequence::zero()).unwrap();
        let sum = a.add(&z).unwrap();
        assert_eq!(sum, a);
    }

    #[test]
    fn scale_identity_spectrum() {
        let id = StructuredOperator::identity();
        let s = id.scale(2.5).unwrap();
        assert_eq!(s.essential_spectrum().unwrap(), vec![2.5]);
        assert_eq!(s.operator_norm().value, 2.5);
    }

    #[test]
    fn essential_spectrum_ignores_corr() {
        let seq = SpectralSequence::new(
            vec![0.0, 0.0],
            vec![TailStrand::new(1.0, vec![TailTerm::pos(1.0, 1.0).unwrap()]).unwrap()],
        )
        .unwrap();
        let corr = DenseMatrix::from_real_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let op = StructuredOperator::new(SpaceDim::Infinite, seq, corr).unwrap();
        assert_eq!(op.essential_spectrum().unwrap(), vec![1.0]);
        // two strands, limits 1 and 2
        let seq2 = SpectralSequence::new(
            vec![],
            vec![TailStrand::constant(1.0), TailStrand::constant(2.0)],
        )
        .unwrap();
        let op2 = StructuredOperator::from_diag(seq2).unwrap();
        assert_eq!(op2.essential_spectrum().unwrap(), vec![1.0, 2.0]);
        assert_eq!(StructuredOperator::identity().essential_spectrum().unwrap(), vec![1.0]);
    }

    #[test]
    fn essential_spectrum_finite_space_errors() {
        let op = StructuredOperator::identity_finite(3).unwrap();
        assert!(op.essential_spectrum().is_err());
    }

    #[test]
    fn positivity_examples() {
        let pos = StructuredOperator::from_diag(one_over_n()).unwrap();
        assert!(pos.is_positive().unwrap());

        let seq = SpectralSequence::new(vec![-0.1], vec![TailStrand::constant(1.0)]).unwrap();
        let has_neg = StructuredOperator::new(SpaceDim::Infinite, seq, DenseMatrix::zeros(0, 0))
            .unwrap();
        assert!(!has_neg.is_positive().unwrap());

        let seq = SpectralSequence::new(vec![0.0, 0.0], vec![TailStrand::constant(1.0)]).unwrap();
        let corr = DenseMatrix::from_real_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let flip = StructuredOperator::new(SpaceDim::Infinite, seq, corr).unwrap();
        assert!(!flip.is_positive().unwrap());
    }

    #[test]
    fn diagonal_corr_folds_into_head() {
        let seq = SpectralSequence::new(vec![1.0, 2.0], vec![TailStrand::constant(1.0)]).unwrap();
        let corr = DenseMatrix::diagonal(&[0.5, -0.5]);
        let op = StructuredOperator::new(SpaceDim::Infinite, seq, corr).unwrap();
        assert_eq!(op.lead_dim(), 0);
        assert_eq!(op.diag().head(), &[1.5, 1.5]);
    }

    #[test]
    fn norm_and_min_modulus() {
        let d = StructuredOperator::from_diag(one_over_n()).unwrap();
        let norm = d.operator_norm();
        assert_eq!(norm.value, 1.0);
        assert!(norm.attained);
        let m = d.min_modulus();
        assert_eq!(m.value, 0.0);
        assert!(!m.attained);

        let id = StructuredOperator::identity();
        assert_eq!(id.operator_norm().value, 1.0);
        assert!(id.operator_norm().attained);
        assert_eq!(id.min_modulus().value, 1.0);

        let shifted = StructuredOperator::from_diag(one_plus_one_over_n()).unwrap();
        let n2 = shifted.operator_norm();
        assert_eq!(n2.value, 2.0);
        assert!(n2.attained);
        let m2 = shifted.min_modulus();
        assert_eq!(m2.value, 1.0);
        assert!(!m2.attained);
    }

    #[test]
    fn closed_range_examples() {
        let not_closed = StructuredOperator::from_diag(one_over_n()).unwrap();
        assert!(!not_closed.has_closed_range());
        let closed = StructuredOperator::from_diag(one_plus_one_over_n()).unwrap();
        assert!(closed.has_closed_range());
        // direct sum: closed ⊕ not-closed is not closed
        let sum_seq = SpectralSequence::new(
            vec![],
            vec![
                one_plus_one_over_n().strands()[0].clone(),
                one_over_n().strands()[0].clone(),
            ],
        )
        .unwrap();
        let sum = StructuredOperator::from_diag(sum_seq).unwrap();
        assert!(!sum.has_closed_range());
    }

    #[test]
    fn block_positivity_contraction() {
        let c = Coupling::diagonal(one_over_n()).unwrap();
        let t = BlockOperator::new(StructuredOperator::identity(), StructuredOperator::identity(), c)
            .unwrap();
        assert!(matches!(t.positivity(), BlockPositivity::ProvedPositive(_)));
    }

    #[test]
    fn block_positivity_remark_pattern() {
        // [[K+I, -K],[-K, K+I]] with K = diag(1/n)
        let a = StructuredOperator::from_diag(one_plus_one_over_n()).unwrap();
        let x = Coupling::diagonal(one_over_n().neg()).unwrap();
        let t = BlockOperator::new(a.clone(), a, x).unwrap();
        assert!(matches!(t.positivity(), BlockPositivity::ProvedPositive(_)));
    }

    #[test]
    fn block_positivity_disproof() {
        // [[diag(1/n), I],[I, diag(1/n)]] is not positive
        let a = StructuredOperator::from_diag(one_over_n()).unwrap();
        let x = Coupling::diagonal(SpectralSequence::constant(1.0)).unwrap();
        let t = BlockOperator::new(a.clone(), a, x).unwrap();
        assert!(t.positivity().is_disproved());
    }

    #[test]
    fn block_essential_spectrum() {
        let a1 = StructuredOperator::from_diag(one_plus_one_over_n()).unwrap();
        let a2 = StructuredOperator::identity();
        let x = Coupling::finite(DenseMatrix::from_real_rows(vec![vec![0.3]]).unwrap());
        let t = BlockOperator::new(a1, a2, x).unwrap();
        assert_eq!(t.essential_spectrum().unwrap(), vec![1.0]);

        let two = StructuredOperator::from_diag(
            SpectralSequence::from_strand(
                TailStrand::new(2.0, vec![TailTerm::neg(1.0, 1.0).unwrap()]).unwrap(),
            ),
        )
        .unwrap();
        let t2 = BlockOperator::new(
            StructuredOperator::identity(),
            two,
            Coupling::diagonal(one_over_n()).unwrap(),
        )
        .unwrap();
        assert_eq!(t2.essential_spectrum().unwrap(), vec![1.0, 2.0]);

        let non_compact = Coupling::diagonal(SpectralSequence::constant(0.5)).unwrap();
        let t3 = BlockOperator::new(
            StructuredOperator::identity(),
            StructuredOperator::identity(),
            non_compact,
        )
        .unwrap();
        assert!(t3.essential_spectrum().is_err());
    }

    #[test]
    fn gram_of_off_diagonal_block() {
        // T = [[0, A],[B, 0]] -> T*T = [[B*B, 0],[0, A*A]]
        let a = Coupling::diagonal(one_over_n()).unwrap();
        let b = Coupling::diagonal(one_plus_one_over_n()).unwrap();
        let g = GeneralBlock {
            a11: StructuredOperator::zero_op(),
            a12: a,
            a21: b,
            a22: StructuredOperator::zero_op(),
        };
        let gram = gram_block(&g).unwrap();
        assert!(gram.x().is_zero());
        // (1,1) entry is B*B = diag((1+1/n)^2)
        for n in 1..=50u64 {
            let e = gram.a1().diag_entry(n);
            let b = 1.0 + 1.0 / n as f64;
            assert!((e - b * b).abs() < 1e-12);
            let a = gram.a2().diag_entry(n);
            let x = 1.0 / n as f64;
            assert!((a - x * x).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_of_idempotent_form() {
        // [[I, X],[0, 0]] -> T*T = [[I, X],[X*, X*X]]
        let x = Coupling::diagonal(one_over_n()).unwrap();
        let g = GeneralBlock {
            a11: StructuredOperator::identity(),
            a12: x.clone(),
            a21: Coupling::Zero,
            a22: StructuredOperator::zero_op(),
        };
        let gram = gram_block(&g).unwrap();
        assert!(gram.a1().is_identity());
        assert_eq!(gram.x(), &x);
        for n in 1..=20u64 {
            let v = 1.0 / n as f64;
            assert!((gram.a2().diag_entry(n) - v * v).abs() < 1e-15);
        }
    }

    #[test]
    fn gram_identity_block() {
        let g = GeneralBlock {
            a11: StructuredOperator::identity(),
            a12: Coupling::Zero,
            a21: Coupling::Zero,
            a22: StructuredOperator::identity(),
        };
        let gram = gram_block(&g).unwrap();
        assert!(gram.a1().is_identity());
        assert!(gram.a2().is_identity());
        assert!(gram.x().is_zero());
    }

    #[test]
    fn buckholtz_square_zero_coupling() {
        let t = IdempotentOperator::new(Coupling::Zero, SpaceDim::Infinite, SpaceDim::Infinite)
            .unwrap();
        let sq = buckholtz_square(&t).unwrap();
        assert!(sq.a1().is_identity());
        assert!(sq.a2().is_identity());
    }

    #[test]
    fn buckholtz_square_diagonal_coupling() {
        // x = 1/n on odd slots: entries 1 + x_k^2 on both sides
        let odd = SpectralSequence::new(
            vec![],
            vec![
                TailStrand::new(0.0, vec![TailTerm::pos(1.0, 1.0).unwrap()]).unwrap(),
                TailStrand::constant(0.0),
            ],
        )
        .unwrap();
        let t = IdempotentOperator::new(
            Coupling::diagonal(odd.clone()).unwrap(),
            SpaceDim::Infinite,
            SpaceDim::Infinite,
        )
        .unwrap();
        let sq = buckholtz_square(&t).unwrap();
        for n in 1..=40u64 {
            let x = odd.entry(n);
            assert!((sq.a1().diag_entry(n) - (1.0 + x * x)).abs() < 1e-15);
            assert!((sq.a2().diag_entry(n) - (1.0 + x * x)).abs() < 1e-15);
        }
    }

    #[test]
    fn buckholtz_square_rank_one() {
        // rank-1 X with norm s: leading eigenvalue 1 + s^2 on both sides
        let m = DenseMatrix::from_real_rows(vec![vec![0.6], vec![0.8]]).unwrap();
        let t = IdempotentOperator::new(
            Coupling::finite(m),
            SpaceDim::Infinite,
            SpaceDim::Infinite,
        )
        .unwrap();
        let sq = buckholtz_square(&t).unwrap();
        let top1 = sq.a1().lead_eigs().last().copied().unwrap();
        assert!((top1 - 2.0).abs() < 1e-10);
        let norm2 = sq.a2().operator_norm();
        assert!((norm2.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn multiply_rejects_noncommuting_leads() {
        let seq = SpectralSequence::new(vec![1.0, 2.0], vec![TailStrand::constant(1.0)]).unwrap();
        let corr = DenseMatrix::from_real_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let a = StructuredOperator::new(SpaceDim::Infinite, seq.clone(), corr).unwrap();
        let b = StructuredOperator::new(SpaceDim::Infinite, seq, DenseMatrix::zeros(0, 0)).unwrap();
        // diag(1,2) does not commute with the flip correction
        assert!(a.multiply(&b).is_err());
        // but squares stay representable
        assert!(a.multiply(&a).is_ok());
    }

    #[test]
    fn count_spectrum_with_lead_block() {
        let seq = SpectralSequence::new(
            vec![0.0, 0.0, 0.2],
            vec![TailStrand::new(1.0, vec![TailTerm::pos(1.0, 1.0).unwrap()]).unwrap()],
        )
        .unwrap();
        let corr = DenseMatrix::from_real_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let op = StructuredOperator::new(SpaceDim::Infinite, seq, corr).unwrap();
        // lead eigenvalues ±1, head entry 0.2, strand entries > 1
        assert_eq!(op.count_spectrum_vs(0.0, Side::Below), Count::Finite(1));
        assert_eq!(op.count_spectrum_vs(1.0, Side::Above), Count::Infinite);
        assert_eq!(op.count_spectrum_vs(0.2, Side::Equal), Count::Finite(1));
    }
}
