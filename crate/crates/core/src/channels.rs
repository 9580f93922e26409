//! States and channels.
//!
//! Choi convention used throughout the crate:
//!
//! ```text
//!   J = Σ_ij |i><j| ⊗ Φ(|i><j|),     J[(i·d + k), (j·d + l)] = Φ(|i><j|)_kl
//! ```
//!
//! so that `Φ(ρ) = Σ_ij ρ_ij Block_ij(J)` and `tr(Φ(ρ) M) = <J, ρᵀ ⊗ M>`.

use std::fmt;

use num_complex::Complex64;

use crate::matcore::{eig_hermitian, min_eigenvalue, schur_product, ComplexMatrix};
use crate::sdpcore::Constraint;
use crate::{Error, Result};

/// Tolerance for the validation of states and channels.
pub const VALIDATION_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Branches with probability at or below this are dropped by
/// [`selective_apply`].
pub const BRANCH_CUTOFF: f64 = 1e-12;

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Hermitian, PSD, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates and normalises a density matrix.
    ///
    /// Input within [`VALIDATION_TOL`] of Hermitian is symmetrised.
    /// Eigenvalues in `[-1e-9, 0)` are clipped to zero and the trace is
    /// renormalised; anything further from the state space is rejected.
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        let deviation = mat.hermitian_deviation();
        if deviation > VALIDATION_TOL {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (max deviation {deviation:.3e})"
            )));
        }
        let mut mat = mat.hermitian_part();
        let tr = mat.trace().re;
        if (tr - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidDensity(format!("trace is {tr}, expected 1")));
        }
        let eig = eig_hermitian(&mat)?;
        let lam_min = eig.eigenvalues[0];
        if lam_min < -VALIDATION_TOL {
            return Err(Error::InvalidDensity(format!(
                "not positive semidefinite (min eigenvalue {lam_min:.3e})"
            )));
        }
        if lam_min < 0.0 {
            let clipped = eig.reconstruct_with(|x| x.max(0.0));
            let t = clipped.trace().re;
            mat = clipped.scale_real(1.0 / t).hermitian_part();
        }
        Ok(Self { mat })
    }

    /// Wraps a matrix known to be a state (channel outputs), only
    /// symmetrising it.
    pub(crate) fn from_trusted(mat: ComplexMatrix) -> Self {
        Self {
            mat: mat.hermitian_part(),
        }
    }

    /// Diagonal (incoherent) state from a probability vector.
    pub fn incoherent(p: &[f64]) -> Result<Self> {
        let diag: Vec<Complex64> = p.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::new(ComplexMatrix::diagonal(&diag))
    }

    /// `|ψ><ψ|` for a normalised amplitude vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidDensity(format!("state vector has norm² {norm}")));
        }
        Self::new(ComplexMatrix::outer(psi))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn diag(&self) -> Vec<f64> {
        self.mat.diag_real()
    }

    pub fn is_incoherent(&self, tol: f64) -> bool {
        self.mat.is_diagonal(tol)
    }

    /// Entrywise complex conjugate `ρ*`, again a state.
    pub fn conj(&self) -> Self {
        Self {
            mat: crate::matcore::conj_entrywise(&self.mat),
        }
    }

    /// `Σ p_j ρ_j`.
    pub fn mixture(weights: &[f64], states: &[DensityMatrix]) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::InvalidInput("mixture needs one weight per state".into()));
        }
        let d = states[0].dim();
        let mut acc = ComplexMatrix::zeros(d);
        for (w, s) in weights.iter().zip(states) {
            check_dims(d, s.dim())?;
            acc = &acc + &s.mat.scale_real(*w);
        }
        Self::new(acc)
    }
}

/// Correlation matrix `τ` (Hermitian, PSD, unit diagonal) acting as
/// `ρ ↦ τ ∘ ρ`. These are exactly the genuinely incoherent operations.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurChannel {
    tau: ComplexMatrix,
}

impl SchurChannel {
    pub fn new(tau: ComplexMatrix) -> Result<Self> {
        let deviation = tau.hermitian_deviation();
        if deviation > VALIDATION_TOL {
            return Err(Error::InvalidChannel(format!(
                "correlation matrix not Hermitian (max deviation {deviation:.3e})"
            )));
        }
        let tau = tau.hermitian_part();
        if let Some(i) = (0..tau.dim()).find(|&i| (tau[(i, i)] - ONE).norm() > VALIDATION_TOL) {
            return Err(Error::InvalidChannel(format!(
                "correlation matrix diagonal entry {i} is {}",
                tau[(i, i)]
            )));
        }
        let lam = min_eigenvalue(&tau)?;
        if lam < -VALIDATION_TOL {
            return Err(Error::InvalidChannel(format!(
                "correlation matrix not PSD (min eigenvalue {lam:.3e})"
            )));
        }
        Ok(Self { tau })
    }

    /// Rescales a PSD matrix with positive diagonal to unit diagonal,
    /// `D^{-1/2} X D^{-1/2}`. Congruence keeps it PSD, which makes this the
    /// repair step for approximate solver output.
    pub fn normalized(x: &ComplexMatrix) -> Result<Self> {
        let d = x.dim();
        let s: Vec<f64> = (0..d)
            .map(|i| {
                let v = x[(i, i)].re;
                if v > 0.0 {
                    Ok(1.0 / v.sqrt())
                } else {
                    Err(Error::InvalidChannel(format!("non-positive diagonal entry {i}")))
                }
            })
            .collect::<Result<_>>()?;
        let tau = ComplexMatrix::from_fn(d, |i, j| if i == j { ONE } else { x[(i, j)] * s[i] * s[j] });
        Self::new(tau.hermitian_part())
    }

    /// Identity channel, `τ = J`.
    pub fn identity(d: usize) -> Self {
        Self {
            tau: ComplexMatrix::ones(d),
        }
    }

    /// Full dephasing, `τ = I`.
    pub fn dephasing(d: usize) -> Self {
        Self {
            tau: ComplexMatrix::identity(d),
        }
    }

    pub fn tau(&self) -> &ComplexMatrix {
        &self.tau
    }

    pub fn dim(&self) -> usize {
        self.tau.dim()
    }
}

/// Kraus operators `{K_j}` with `Σ K_j† K_j = I`.
#[derive(Debug, Clone)]
pub struct KrausSet {
    operators: Vec<ComplexMatrix>,
}

impl KrausSet {
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        let Some(first) = operators.first() else {
            return Err(Error::InvalidChannel("empty Kraus set".into()));
        };
        let d = first.dim();
        let mut acc = ComplexMatrix::zeros(d);
        for k in &operators {
            check_dims(d, k.dim())?;
            acc = &acc + &(&k.dagger() * k);
        }
        let err = acc.max_abs_diff(&ComplexMatrix::identity(d));
        if err > VALIDATION_TOL {
            return Err(Error::InvalidChannel(format!(
                "Kraus operators not trace preserving (deviation {err:.3e})"
            )));
        }
        Ok(Self { operators })
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn is_diagonal(&self) -> bool {
        self.operators.iter().all(|k| k.is_diagonal(0.0))
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        check_dims(self.dim(), rho.dim())?;
        let mut acc = ComplexMatrix::zeros(rho.dim());
        for k in &self.operators {
            acc = &acc + &rho.matrix().conjugate_by(k);
        }
        Ok(DensityMatrix::from_trusted(acc))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelClass {
    Gio,
    Dio,
    Mio,
    Cptp,
}

impl ChannelClass {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelClass::Gio => "GIO",
            ChannelClass::Dio => "DIO",
            ChannelClass::Mio => "MIO",
            ChannelClass::Cptp => "CPTP",
        }
    }
}

impl fmt::Display for ChannelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ChannelClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gio" => Ok(ChannelClass::Gio),
            "dio" => Ok(ChannelClass::Dio),
            "mio" => Ok(ChannelClass::Mio),
            "cptp" => Ok(ChannelClass::Cptp),
            other => Err(Error::InvalidInput(format!("unknown channel class `{other}`"))),
        }
    }
}

/// Choi matrix of a channel together with the class it claims membership of.
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    dim: usize,
    mat: ComplexMatrix,
    class: ChannelClass,
}

impl ChoiMatrix {
    pub fn new(dim: usize, mat: ComplexMatrix, class: ChannelClass) -> Result<Self> {
        Self::with_tolerance(dim, mat, class, VALIDATION_TOL)
    }

    /// As [`ChoiMatrix::new`] with a caller-chosen tolerance, for matrices
    /// recovered from an approximate solver.
    pub fn with_tolerance(dim: usize, mat: ComplexMatrix, class: ChannelClass, tol: f64) -> Result<Self> {
        check_dims(dim * dim, mat.dim())?;
        let deviation = mat.hermitian_deviation();
        if deviation > tol {
            return Err(Error::InvalidChannel(format!(
                "Choi matrix not Hermitian (max deviation {deviation:.3e})"
            )));
        }
        let mat = mat.hermitian_part();
        let lam = min_eigenvalue(&mat)?;
        if lam < -tol {
            return Err(Error::InvalidChannel(format!(
                "Choi matrix not PSD (min eigenvalue {lam:.3e})"
            )));
        }
        let violation = constraint_violation(&mat, &class_constraints(class, dim));
        if violation > tol {
            return Err(Error::InvalidChannel(format!(
                "Choi matrix violates {class} constraints by {violation:.3e}"
            )));
        }
        Ok(Self { dim, mat, class })
    }

    pub fn from_schur(ch: &SchurChannel) -> Self {
        let d = ch.dim();
        let mut mat = ComplexMatrix::zeros(d * d);
        for i in 0..d {
            for j in 0..d {
                mat[(i * d + i, j * d + j)] = ch.tau()[(i, j)];
            }
        }
        Self {
            dim: d,
            mat,
            class: ChannelClass::Gio,
        }
    }

    /// `(Block_ij)_kl = Σ_m (K_m)_ki conj((K_m)_lj)`, tagged CPTP.
    pub fn from_kraus(ks: &KrausSet) -> Self {
        let d = ks.dim();
        let mut mat = ComplexMatrix::zeros(d * d);
        for k in ks.operators() {
            for i in 0..d {
                for j in 0..d {
                    for r in 0..d {
                        for s in 0..d {
                            mat[(i * d + r, j * d + s)] += k[(r, i)] * k[(s, j)].conj();
                        }
                    }
                }
            }
        }
        Self {
            dim: d,
            mat,
            class: ChannelClass::Cptp,
        }
    }

    /// Choi matrix of the full dephasing channel Δ.
    pub fn dephasing(d: usize) -> Self {
        Self::from_schur(&SchurChannel::dephasing(d))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn class(&self) -> ChannelClass {
        self.class
    }

    /// Retags the matrix after checking the new class's constraints.
    pub fn reclassify(&self, class: ChannelClass, tol: f64) -> Result<Self> {
        Self::with_tolerance(self.dim, self.mat.clone(), class, tol)
    }

    /// `Φ(|i><j|)`.
    pub fn block(&self, i: usize, j: usize) -> ComplexMatrix {
        let d = self.dim;
        ComplexMatrix::from_fn(d, |k, l| self.mat[(i * d + k, j * d + l)])
    }

    /// Largest violation of the given class's linear constraints.
    pub fn violation(&self, class: ChannelClass) -> f64 {
        constraint_violation(&self.mat, &class_constraints(class, self.dim))
    }
}

fn constraint_violation(mat: &ComplexMatrix, constraints: &[Constraint]) -> f64 {
    constraints.iter().map(|c| c.residual(mat).abs()).fold(0.0, f64::max)
}

/// `τ ∘ ρ`.
pub fn apply_schur(ch: &SchurChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_dims(ch.dim(), rho.dim())?;
    let mut out = schur_product(ch.tau(), rho.matrix())?;
    // unit diagonal: keep ρ_ii bit-exact
    for i in 0..rho.dim() {
        out[(i, i)] = rho.matrix()[(i, i)];
    }
    Ok(DensityMatrix::from_trusted(out))
}

/// Diagonal Kraus operators `K_k = diag(√λ_k v_k)` from `τ = Σ λ_k v_k v_k†`.
pub fn kraus_from_schur(ch: &SchurChannel) -> Result<KrausSet> {
    let eig = eig_hermitian(ch.tau())?;
    let d = ch.dim();
    let scale = eig.eigenvalues.last().copied().unwrap_or(1.0).max(1.0);
    let operators: Vec<ComplexMatrix> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &lam)| lam > 1e-14 * scale)
        .map(|(k, &lam)| {
            let v = eig.eigenvector(k);
            let w: Vec<Complex64> = v.iter().map(|z| z * lam.sqrt()).collect();
            debug_assert_eq!(w.len(), d);
            ComplexMatrix::diagonal(&w)
        })
        .collect();
    KrausSet::new(operators)
}

/// `τ_ij = Σ_k (K_k)_ii conj((K_k)_jj)` for a diagonal Kraus set.
pub fn schur_from_kraus(ks: &KrausSet) -> Result<SchurChannel> {
    if let Some(pos) = ks.operators().iter().position(|k| !k.is_diagonal(0.0)) {
        return Err(Error::InvalidChannel(format!("Kraus operator {pos} is not diagonal")));
    }
    let d = ks.dim();
    let tau = ComplexMatrix::from_fn(d, |i, j| {
        ks.operators().iter().map(|k| k[(i, i)] * k[(j, j)].conj()).sum()
    });
    SchurChannel::new(tau)
}

/// Sequential composition: first `b`, then `a`.
pub fn compose_schur(a: &SchurChannel, b: &SchurChannel) -> Result<SchurChannel> {
    check_dims(a.dim(), b.dim())?;
    let tau = schur_product(a.tau(), b.tau())?;
    let d = tau.dim();
    let tau = ComplexMatrix::from_fn(d, |i, j| if i == j { ONE } else { tau[(i, j)] });
    SchurChannel::new(tau)
}

/// Measurement branches `(p_j, K_j ρ K_j† / p_j)`; branches with
/// `p_j ≤ 1e-12` are dropped.
pub fn selective_apply(ks: &KrausSet, rho: &DensityMatrix) -> Result<Vec<(f64, DensityMatrix)>> {
    check_dims(ks.dim(), rho.dim())?;
    let mut out = Vec::with_capacity(ks.operators().len());
    for k in ks.operators() {
        let branch = rho.matrix().conjugate_by(k);
        let p = branch.trace().re;
        if p > BRANCH_CUTOFF {
            out.push((p, DensityMatrix::from_trusted(branch.scale_real(1.0 / p))));
        }
    }
    Ok(out)
}

/// Full dephasing `Δ(ρ) = Σ |i><i| ρ |i><i|`.
pub fn dephase(rho: &DensityMatrix) -> DensityMatrix {
    let d = rho.dim();
    let m = rho.matrix();
    DensityMatrix::from_trusted(ComplexMatrix::from_fn(d, |i, j| if i == j { m[(i, i)] } else { ZERO }))
}

/// `Φ(ρ) = Σ_ij ρ_ij Block_ij(J)` for an arbitrary square matrix input.
pub fn apply_choi_matrix(choi: &ChoiMatrix, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = choi.dim();
    check_dims(d, x.dim())?;
    let j = choi.matrix();
    Ok(ComplexMatrix::from_fn(d, |k, l| {
        let mut acc = ZERO;
        for a in 0..d {
            for b in 0..d {
                let xab = x[(a, b)];
                if xab != ZERO {
                    acc += xab * j[(a * d + k, b * d + l)];
                }
            }
        }
        acc
    }))
}

pub fn apply_choi(choi: &ChoiMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_trusted(apply_choi_matrix(choi, rho.matrix())?))
}

/// Linear equality constraints on the `d²×d²` Choi matrix for a class.
///
/// Every class includes trace preservation `tr Block_ij = δ_ij`.
/// * GIO: `Block_ii = |i><i|` (fixes every incoherent basis state).
/// * MIO: `Block_ii` diagonal (incoherent states map to incoherent states).
/// * DIO: MIO plus `Δ(Block_ij) = 0` for `i ≠ j` (dephasing covariance).
///
/// GIO rows overlap with trace preservation; the solver drops the
/// redundancy.
pub fn class_constraints(class: ChannelClass, d: usize) -> Vec<Constraint> {
    let n = d * d;
    let idx = |i: usize, k: usize| i * d + k;
    let mut out = Vec::new();

    // trace preservation
    for i in 0..d {
        for j in i..d {
            let mut g = ComplexMatrix::zeros(n);
            for k in 0..d {
                // tr(J G) picks Σ_k J[(i,k),(j,k)] when G[(j,k),(i,k)] = 1
                g[(idx(j, k), idx(i, k))] = ONE;
            }
            let target = if i == j { ONE } else { ZERO };
            let [re, im] = Constraint::functional(&g, target);
            out.push(re);
            if i != j {
                out.push(im);
            }
        }
    }

    match class {
        ChannelClass::Cptp => {}
        ChannelClass::Gio => {
            for i in 0..d {
                for k in 0..d {
                    for l in k..d {
                        let target = if k == i && l == i { ONE } else { ZERO };
                        out.extend(Constraint::entry(n, idx(i, k), idx(i, l), target));
                    }
                }
            }
        }
        ChannelClass::Mio | ChannelClass::Dio => {
            for i in 0..d {
                for k in 0..d {
                    for l in (k + 1)..d {
                        out.extend(Constraint::entry(n, idx(i, k), idx(i, l), ZERO));
                    }
                }
            }
            if class == ChannelClass::Dio {
                for i in 0..d {
                    for j in (i + 1)..d {
                        for k in 0..d {
                            out.extend(Constraint::entry(n, idx(i, k), idx(j, k), ZERO));
                        }
                    }
                }
            }
        }
    }
    out
}

/// `|ψ+><ψ+|` with every entry `1/d`.
pub fn maximally_coherent(d: usize) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("dimension must be at least 2, got {d}")));
    }
    Ok(DensityMatrix::from_trusted(ComplexMatrix::ones(d).scale_real(1.0 / d as f64)))
}

/// `p |ψ+><ψ+| + (1 - p) I / d`.
pub fn rho_p(d: usize, p: f64) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("dimension must be at least 2, got {d}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("mixing parameter p = {p} outside [0, 1]")));
    }
    let df = d as f64;
    let off = p / df;
    let diag = p / df + (1.0 - p) / df;
    Ok(DensityMatrix::from_trusted(ComplexMatrix::from_fn(d, |i, j| {
        Complex64::new(if i == j { diag } else { off }, 0.0)
    })))
}

/// A point of Ω: `Σ_k p_k U_k |ψ+><ψ+| U_k†` with `U_k = diag(e^{iθ^k})`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaElement {
    weights: Vec<f64>,
    phases: Vec<Vec<f64>>,
}

impl OmegaElement {
    pub fn new(weights: Vec<f64>, phases: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != phases.len() {
            return Err(Error::InvalidInput(
                "Ω element needs one phase vector per weight".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("Ω weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("Ω weights sum to {total}, expected 1")));
        }
        let len = phases[0].len();
        if phases.iter().any(|p| p.len() != len || p.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidInput("Ω phase vectors must share a length".into()));
        }
        Ok(Self { weights, phases })
    }

    /// Single rotated copy of `|ψ+><ψ+|`.
    pub fn single(phases: Vec<f64>) -> Self {
        Self {
            weights: vec![1.0],
            phases: vec![phases],
        }
    }

    pub fn psi_plus(d: usize) -> Self {
        Self::single(vec![0.0; d])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn phases(&self) -> &[Vec<f64>] {
        &self.phases
    }
}

/// The three-level Ω element mixing `diag(1,u,1)` and `diag(1,1,u)`
/// rotations of `|ψ+><ψ+|` with weights 1/3 and 2/3, `u = (3+4i)/5`.
/// As a state it is not GIO-equivalent to its complex conjugate.
pub fn conjugation_example() -> OmegaElement {
    let theta = Complex64::new(0.6, 0.8).arg();
    OmegaElement {
        weights: vec![1.0 / 3.0, 2.0 / 3.0],
        phases: vec![vec![0.0, theta, 0.0], vec![0.0, 0.0, theta]],
    }
}

/// Materialises an Ω element as a `d×d` matrix.
pub fn omega_materialize(w: &OmegaElement, d: usize) -> Result<ComplexMatrix> {
    if let Some(bad) = w.phases.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    let df = d as f64;
    let mut m = ComplexMatrix::zeros(d);
    for (p, theta) in w.weights.iter().zip(&w.phases) {
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    m[(i, i)] += Complex64::new(p / df, 0.0);
                } else {
                    m[(i, j)] += Complex64::from_polar(p / df, theta[i] - theta[j]);
                }
            }
        }
    }
    Ok(m)
}

/// Checks that `m` looks like a member of Ω: Hermitian, PSD, diagonal `1/d`.
pub fn validate_observable(m: &ComplexMatrix) -> Result<()> {
    let d = m.dim();
    let deviation = m.hermitian_deviation();
    if deviation > VALIDATION_TOL {
        return Err(Error::InvalidObservable(format!(
            "not Hermitian (max deviation {deviation:.3e})"
        )));
    }
    let target = 1.0 / d as f64;
    if let Some(i) = (0..d).find(|&i| (m[(i, i)] - Complex64::new(target, 0.0)).norm() > VALIDATION_TOL) {
        return Err(Error::InvalidObservable(format!(
            "diagonal entry {i} is {}, expected 1/{d}",
            m[(i, i)]
        )));
    }
    let lam = min_eigenvalue(&m.hermitian_part())?;
    if lam < -VALIDATION_TOL {
        return Err(Error::InvalidObservable(format!(
            "not positive semidefinite (min eigenvalue {lam:.3e})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_omega, random_schur_channel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn schur_identity_and_dephasing() {
        let rho = random_density(3, &mut rng(1));
        assert_eq!(apply_schur(&SchurChannel::identity(3), &rho).unwrap(), rho);
        assert_eq!(apply_schur(&SchurChannel::dephasing(3), &rho).unwrap(), dephase(&rho));
    }

    #[test]
    fn schur_fixes_incoherent_states_exactly() {
        let mut r = rng(2);
        for _ in 0..20 {
            let ch = random_schur_channel(4, &mut r);
            let rho = dephase(&random_density(4, &mut r));
            assert_eq!(apply_schur(&ch, &rho).unwrap(), rho);
            let rho = random_density(4, &mut r);
            let out = apply_schur(&ch, &rho).unwrap();
            assert_eq!(out.diag(), rho.diag());
        }
    }

    #[test]
    fn kraus_for_dephasing_and_identity() {
        let ks = kraus_from_schur(&SchurChannel::dephasing(3)).unwrap();
        assert_eq!(ks.operators().len(), 3);
        assert!(ks.is_diagonal());
        let rho = random_density(3, &mut rng(3));
        assert!(ks.apply(&rho).unwrap().matrix().max_abs_diff(dephase(&rho).matrix()) < 1e-14);

        let ks = kraus_from_schur(&SchurChannel::identity(3)).unwrap();
        assert_eq!(ks.operators().len(), 1);
        let k = &ks.operators()[0];
        // unique up to a global phase
        let phase = k[(0, 0)] / k[(0, 0)].norm();
        assert!(k.scale(phase.conj()).max_abs_diff(&ComplexMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn kraus_action_matches_schur_action() {
        let mut r = rng(4);
        let ch = random_schur_channel(3, &mut r);
        let ks = kraus_from_schur(&ch).unwrap();
        for _ in 0..20 {
            let rho = random_density(3, &mut r);
            let a = apply_schur(&ch, &rho).unwrap();
            let b = ks.apply(&rho).unwrap();
            assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-10);
        }
        let back = schur_from_kraus(&ks).unwrap();
        assert!(back.tau().max_abs_diff(ch.tau()) < 1e-10);
    }

    #[test]
    fn schur_from_kraus_examples() {
        let ks = KrausSet::new(vec![ComplexMatrix::identity(3)]).unwrap();
        assert_eq!(schur_from_kraus(&ks).unwrap().tau(), &ComplexMatrix::ones(3));

        let projectors: Vec<_> = (0..3)
            .map(|i| ComplexMatrix::from_fn(3, |r, s| if r == i && s == i { ONE } else { ZERO }))
            .collect();
        let ks = KrausSet::new(projectors).unwrap();
        assert_eq!(schur_from_kraus(&ks).unwrap().tau(), &ComplexMatrix::identity(3));

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let not_diag = KrausSet::new(vec![ComplexMatrix::from_real_rows(&[&[h, h], &[h, -h]]).unwrap()]).unwrap();
        assert!(matches!(schur_from_kraus(&not_diag), Err(Error::InvalidChannel(_))));
    }

    #[test]
    fn composition() {
        let mut r = rng(5);
        let a = random_schur_channel(3, &mut r);
        let b = random_schur_channel(3, &mut r);
        assert_eq!(compose_schur(&a, &SchurChannel::identity(3)).unwrap(), a);
        assert_eq!(compose_schur(&a, &SchurChannel::dephasing(3)).unwrap(), SchurChannel::dephasing(3));
        let ab = compose_schur(&a, &b).unwrap();
        for _ in 0..20 {
            let rho = random_density(3, &mut r);
            let seq = apply_schur(&a, &apply_schur(&b, &rho).unwrap()).unwrap();
            let once = apply_schur(&ab, &rho).unwrap();
            assert!(seq.matrix().max_abs_diff(once.matrix()) < 1e-12);
        }
        assert!(compose_schur(&a, &SchurChannel::identity(2)).is_err());
    }

    #[test]
    fn selective_branches() {
        let rho = random_density(3, &mut rng(6));
        let ks = KrausSet::new(vec![ComplexMatrix::identity(3)]).unwrap();
        let br = selective_apply(&ks, &rho).unwrap();
        assert_eq!(br.len(), 1);
        assert!((br[0].0 - 1.0).abs() < 1e-15);
        assert!(br[0].1.matrix().max_abs_diff(rho.matrix()) < 1e-15);

        let ks = kraus_from_schur(&SchurChannel::dephasing(3)).unwrap();
        let br = selective_apply(&ks, &rho).unwrap();
        let total: f64 = br.iter().map(|b| b.0).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (p, s) in &br {
            assert!(s.is_incoherent(1e-12));
            let i = (0..3).find(|&i| s.diag()[i] > 0.5).unwrap();
            assert!((p - rho.diag()[i]).abs() < 1e-12);
        }

        // a zero-probability branch is dropped
        let pure = DensityMatrix::incoherent(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(selective_apply(&ks, &pure).unwrap().len(), 1);
    }

    #[test]
    fn dephase_examples() {
        let diag = DensityMatrix::incoherent(&[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(dephase(&diag), diag);
        let psi = maximally_coherent(3).unwrap();
        let mixed = ComplexMatrix::identity(3).scale_real(1.0 / 3.0);
        assert!(dephase(&psi).matrix().max_abs_diff(&mixed) < 1e-16);
        let rho = random_density(3, &mut rng(7));
        assert_eq!(dephase(&dephase(&rho)), dephase(&rho));
    }

    #[test]
    fn choi_actions() {
        let mut r = rng(8);
        let rho = random_density(3, &mut r);
        let id = ChoiMatrix::from_schur(&SchurChannel::identity(3));
        assert!(apply_choi(&id, &rho).unwrap().matrix().max_abs_diff(rho.matrix()) < 1e-15);
        let deph = ChoiMatrix::dephasing(3);
        assert!(apply_choi(&deph, &rho).unwrap().matrix().max_abs_diff(dephase(&rho).matrix()) < 1e-15);

        let ch = random_schur_channel(3, &mut r);
        let choi = ChoiMatrix::from_schur(&ch);
        let via_kraus = ChoiMatrix::from_kraus(&kraus_from_schur(&ch).unwrap());
        assert!(choi.matrix().max_abs_diff(via_kraus.matrix()) < 1e-10);
        let a = apply_choi(&choi, &rho).unwrap();
        let b = apply_schur(&ch, &rho).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-10);
    }

    #[test]
    fn schur_choi_satisfies_every_class() {
        let mut r = rng(9);
        for d in 2..=4 {
            for _ in 0..5 {
                let choi = ChoiMatrix::from_schur(&random_schur_channel(d, &mut r));
                for class in [ChannelClass::Gio, ChannelClass::Dio, ChannelClass::Mio, ChannelClass::Cptp] {
                    assert!(choi.violation(class) < 1e-12, "{class} d={d}");
                    assert!(choi.reclassify(class, VALIDATION_TOL).is_ok());
                }
            }
        }
    }

    #[test]
    fn class_constraints_separate_classes() {
        // a unitary that is not incoherent: CPTP only
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let hadamard = ComplexMatrix::from_real_rows(&[&[h, h], &[h, -h]]).unwrap();
        let choi = ChoiMatrix::from_kraus(&KrausSet::new(vec![hadamard]).unwrap());
        assert!(choi.violation(ChannelClass::Cptp) < 1e-12);
        assert!(choi.violation(ChannelClass::Mio) > 0.1);
        assert!(choi.violation(ChannelClass::Gio) > 0.1);

        // a permutation is DIO and MIO but not GIO
        let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let choi = ChoiMatrix::from_kraus(&KrausSet::new(vec![x]).unwrap());
        assert!(choi.violation(ChannelClass::Dio) < 1e-12);
        assert!(choi.violation(ChannelClass::Mio) < 1e-12);
        assert!(choi.violation(ChannelClass::Gio) > 0.5);

        // replacement by |+><+| is neither MIO nor DIO
        let plus = ComplexMatrix::ones(2).scale_real(0.5);
        let mut j = ComplexMatrix::zeros(4);
        for i in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    j[(i * 2 + k, i * 2 + l)] = plus[(k, l)];
                }
            }
        }
        let choi = ChoiMatrix::new(2, j, ChannelClass::Cptp).unwrap();
        assert!(choi.violation(ChannelClass::Mio) > 0.1);
    }

    #[test]
    fn maximally_coherent_entries() {
        for d in [2, 3] {
            let psi = maximally_coherent(d).unwrap();
            let expect = 1.0 / d as f64;
            assert!(psi.matrix().entries().iter().all(|z| (z - c(expect, 0.0)).norm() < 1e-16));
            let eig = eig_hermitian(psi.matrix()).unwrap();
            let rank = eig.eigenvalues.iter().filter(|&&l| l > 1e-12).count();
            assert_eq!(rank, 1);
            assert!((psi.matrix().trace().re - 1.0).abs() < 1e-15);
        }
        assert!(maximally_coherent(1).is_err());
    }

    #[test]
    fn omega_examples() {
        let m = omega_materialize(&OmegaElement::psi_plus(3), 3).unwrap();
        assert!(m.max_abs_diff(maximally_coherent(3).unwrap().matrix()) < 1e-16);

        let u = c(0.6, 0.8);
        let w = OmegaElement::new(
            vec![1.0 / 3.0, 2.0 / 3.0],
            vec![vec![0.0, u.arg(), 0.0], vec![0.0, 0.0, u.arg()]],
        )
        .unwrap();
        let m = omega_materialize(&w, 3).unwrap();
        assert!((m[(0, 1)] - c(13.0 / 45.0, -4.0 / 45.0)).norm() < 1e-15);
        assert!((m[(0, 2)] - c(11.0 / 45.0, -8.0 / 45.0)).norm() < 1e-15);
        assert!((m[(1, 2)] - c(1.0 / 5.0, -4.0 / 45.0)).norm() < 1e-15);
        for i in 0..3 {
            assert!((m[(i, i)] - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        }
        // convex-combination oracle built from explicit unitaries
        let psi = maximally_coherent(3).unwrap();
        let u1 = ComplexMatrix::diagonal(&[c(1.0, 0.0), u, c(1.0, 0.0)]);
        let u2 = ComplexMatrix::diagonal(&[c(1.0, 0.0), c(1.0, 0.0), u]);
        let oracle = &psi.matrix().conjugate_by(&u1).scale_real(1.0 / 3.0)
            + &psi.matrix().conjugate_by(&u2).scale_real(2.0 / 3.0);
        assert!(m.max_abs_diff(&oracle) < 1e-15);
    }

    #[test]
    fn omega_rejects_bad_input() {
        assert!(OmegaElement::new(vec![0.5, 0.4], vec![vec![0.0; 2]; 2]).is_err());
        assert!(OmegaElement::new(vec![1.0], vec![]).is_err());
        let w = OmegaElement::psi_plus(3);
        assert!(omega_materialize(&w, 4).is_err());
    }

    #[test]
    fn omega_is_valid_observable() {
        let mut r = rng(10);
        for d in 2..=5 {
            for k in 1..=4 {
                let m = omega_materialize(&random_omega(d, k, &mut r), d).unwrap();
                validate_observable(&m).unwrap();
                let bound = 1.0 / d as f64 + 1e-15;
                assert!(m.entries().iter().all(|z| z.norm() <= bound));
            }
        }
        assert!(validate_observable(&ComplexMatrix::identity(3)).is_err());
    }

    #[test]
    fn rho_p_family() {
        let d = 3;
        let zero = rho_p(d, 0.0).unwrap();
        assert!(zero.matrix().max_abs_diff(&ComplexMatrix::identity(3).scale_real(1.0 / 3.0)) < 1e-16);
        let one = rho_p(d, 1.0).unwrap();
        assert!(one.matrix().max_abs_diff(maximally_coherent(3).unwrap().matrix()) < 1e-16);
        let half = rho_p(d, 0.5).unwrap();
        assert!((half.matrix()[(0, 1)].re - 1.0 / 6.0).abs() < 1e-16);
        assert!((half.matrix()[(2, 2)].re - 1.0 / 3.0).abs() < 1e-16);
        assert!(rho_p(3, 1.5).is_err());
        assert!(rho_p(3, -0.1).is_err());
    }

    #[test]
    fn density_validation() {
        let bad = ComplexMatrix::from_real_rows(&[&[0.5, 0.6], &[0.6, 0.5]]).unwrap();
        assert!(matches!(DensityMatrix::new(bad), Err(Error::InvalidDensity(_))));
        let bad = ComplexMatrix::from_real_rows(&[&[0.5, 0.0], &[0.0, 0.6]]).unwrap();
        assert!(DensityMatrix::new(bad).is_err());
        // tiny negative eigenvalue is clipped and trace renormalised
        let nearly = ComplexMatrix::from_real_rows(&[&[0.5, 0.5 + 2e-10], &[0.5 + 2e-10, 0.5]]).unwrap();
        let rho = DensityMatrix::new(nearly).unwrap();
        assert!(min_eigenvalue(rho.matrix()).unwrap() >= -1e-15);
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-15);
    }
}
