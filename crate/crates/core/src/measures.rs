//! Coherence quantifiers.
//!
//! `C_M^O(ρ) = max_{Φ ∈ O} tr(Φ(ρ) M) - 1/d` for `M ∈ Ω`. For GIOs the
//! maximisation runs over correlation matrices `τ` (a `d×d` SDP); for DIO and
//! MIO it runs over class-constrained Choi matrices (`d²×d²`). The GIO Choi
//! route doubles as an independent check of the correlation route.

use num_complex::Complex64;

use crate::channels::{
    apply_choi, apply_schur, class_constraints, validate_observable, ChannelClass, ChoiMatrix, DensityMatrix,
    SchurChannel,
};
use crate::matcore::{eig_hermitian, ComplexMatrix};
use crate::sdpcore::{self, Constraint, SdpProblem, SdpStatus, Sense, SolverSettings};
use crate::{Error, Result};

/// Channel (or incoherent state) achieving a measure's optimum.
#[derive(Debug, Clone)]
pub enum Witness {
    Schur(SchurChannel),
    Choi(ChoiMatrix),
    /// Closest incoherent state `δ` for the robustness of coherence.
    Incoherent(DensityMatrix),
}

#[derive(Debug, Clone)]
pub struct MeasureReport {
    pub value: f64,
    pub witness: Option<Witness>,
    pub status: SdpStatus,
    pub primal_residual: f64,
    pub dual_gap: f64,
    pub iterations: usize,
}

impl MeasureReport {
    fn exact(value: f64, witness: Option<Witness>) -> Self {
        Self {
            value,
            witness,
            status: SdpStatus::Optimal,
            primal_residual: 0.0,
            dual_gap: 0.0,
            iterations: 0,
        }
    }
}

fn require_optimal(status: SdpStatus, what: &str) -> Result<()> {
    match status {
        SdpStatus::Optimal => Ok(()),
        other => Err(Error::Solver(format!("{what}: solver finished with status {other:?}"))),
    }
}

/// ℓ₁-norm of coherence, `Σ_{i≠j} |ρ_ij|`.
pub fn c_l1(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    let d = m.dim();
    (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)].norm())
        .sum()
}

/// Robustness of coherence.
///
/// With `Δ' = (1 + s) δ` the defining program becomes
/// `min tr(Δ') - 1  s.t.  Δ' - ρ ⪰ 0, Δ' diagonal`, and with `Z = Δ' - ρ`
/// this is `min tr Z` over PSD `Z` whose off-diagonal part is pinned to
/// `-ρ`. The diagonal of `Z` is the only freedom.
pub fn c_roc(rho: &DensityMatrix, settings: &SolverSettings) -> Result<MeasureReport> {
    let d = rho.dim();
    let m = rho.matrix();
    if rho.is_incoherent(0.0) {
        return Ok(MeasureReport::exact(0.0, Some(Witness::Incoherent(rho.clone()))));
    }
    let mut constraints = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            constraints.extend(Constraint::entry(d, i, j, -m[(i, j)]));
        }
    }
    let problem = SdpProblem::new(ComplexMatrix::identity(d), constraints, Sense::Minimize);
    let sol = sdpcore::solve(&problem, settings)?;
    require_optimal(sol.status, "robustness of coherence")?;

    let s = sol.value.max(0.0);
    let delta: Vec<f64> = (0..d)
        .map(|i| (sol.x[(i, i)].re + m[(i, i)].re).max(0.0))
        .collect();
    let total: f64 = delta.iter().sum();
    let delta: Vec<f64> = delta.iter().map(|x| x / total).collect();
    Ok(MeasureReport {
        value: s,
        witness: DensityMatrix::incoherent(&delta).ok().map(Witness::Incoherent),
        status: sol.status,
        primal_residual: sol.primal_residual,
        dual_gap: sol.dual_gap,
        iterations: sol.iterations,
    })
}

/// `tr(Φ(ρ) M) - 1/d` for a Schur channel.
pub fn gio_objective(ch: &SchurChannel, rho: &DensityMatrix, m: &ComplexMatrix) -> Result<f64> {
    let out = apply_schur(ch, rho)?;
    Ok(trace_product(out.matrix(), m) - 1.0 / rho.dim() as f64)
}

fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    // Re tr(A B) for Hermitian arguments
    a.dagger().inner_re(b)
}

fn check_observable(rho: &DensityMatrix, m: &ComplexMatrix) -> Result<()> {
    if m.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: m.dim(),
        });
    }
    validate_observable(m)
}

/// `C_M` over genuinely incoherent operations.
///
/// Solves `max Re Σ_{i≠j} τ_ij ρ_ij M_ji` over correlation matrices `τ`. For
/// `d = 2` the feasible set is the disc `|τ_01| ≤ 1` and the optimum
/// `2|ρ_01||M_01|` is taken in closed form.
pub fn cm_gio(rho: &DensityMatrix, m: &ComplexMatrix, settings: &SolverSettings) -> Result<MeasureReport> {
    check_observable(rho, m)?;
    let d = rho.dim();
    let r = rho.matrix();
    // Re<C, τ> = Re Σ conj(C_ij) τ_ij, so C_ij = conj(ρ_ij M_ji)
    let c = ComplexMatrix::from_fn(d, |i, j| {
        if i == j {
            Complex64::new(0.0, 0.0)
        } else {
            (r[(i, j)] * m[(j, i)]).conj()
        }
    });

    if c.frobenius_norm() == 0.0 {
        let ch = SchurChannel::identity(d);
        let value = gio_objective(&ch, rho, m)?;
        return Ok(MeasureReport::exact(value, Some(Witness::Schur(ch))));
    }

    if d == 2 {
        let w = r[(0, 1)] * m[(1, 0)];
        let tau01 = w.conj() / w.norm();
        let tau = ComplexMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 1) => tau01,
            (1, 0) => tau01.conj(),
            _ => Complex64::new(1.0, 0.0),
        });
        let ch = SchurChannel::new(tau)?;
        let value = gio_objective(&ch, rho, m)?;
        return Ok(MeasureReport::exact(value, Some(Witness::Schur(ch))));
    }

    let constraints = (0..d).map(|i| Constraint::entry_re(d, i, i, 1.0)).collect();
    let sol = sdpcore::solve(&SdpProblem::new(c, constraints, Sense::Maximize), settings)?;
    require_optimal(sol.status, "C_M over GIO")?;
    let ch = SchurChannel::normalized(&sol.x)?;
    let value = gio_objective(&ch, rho, m)?;
    Ok(MeasureReport {
        value,
        witness: Some(Witness::Schur(ch)),
        status: sol.status,
        primal_residual: sol.primal_residual,
        dual_gap: sol.dual_gap,
        iterations: sol.iterations,
    })
}

/// Rescales a Choi matrix so its partial trace over the output is exactly
/// the identity: `J ↦ (A ⊗ I) J (A ⊗ I)†` with `A = P^{-1/2}`,
/// `P_ij = tr Block_ij`. Congruence keeps it PSD.
pub(crate) fn enforce_trace_preservation(j: &ComplexMatrix, d: usize) -> Result<ComplexMatrix> {
    let p = ComplexMatrix::from_fn(d, |a, b| (0..d).map(|k| j[(a * d + k, b * d + k)]).sum());
    let eig = eig_hermitian(&p.hermitian_part())?;
    if eig.eigenvalues[0] <= 0.0 {
        return Err(Error::Solver("Choi partial trace is not positive definite".into()));
    }
    let a = eig.reconstruct_with(|x| 1.0 / x.sqrt());
    let lift = a.kron(&ComplexMatrix::identity(d));
    Ok(j.conjugate_by(&lift).hermitian_part())
}

/// Tolerance for class membership of solver-produced Choi matrices.
pub(crate) fn witness_tol(settings: &SolverSettings) -> f64 {
    (1e3 * settings.tol).max(1e-9)
}

/// `C_M` over a class of free operations via the Choi SDP
/// `max <J, ρᵀ ⊗ M> - 1/d` under the class constraints.
pub fn cm_class(
    rho: &DensityMatrix,
    m: &ComplexMatrix,
    class: ChannelClass,
    settings: &SolverSettings,
) -> Result<MeasureReport> {
    if class == ChannelClass::Cptp {
        return Err(Error::InvalidInput("C_M is defined for GIO, DIO and MIO only".into()));
    }
    check_observable(rho, m)?;
    let d = rho.dim();
    let objective = rho.matrix().transpose().kron(m);
    let problem = SdpProblem::new(objective, class_constraints(class, d), Sense::Maximize);
    let sol = sdpcore::solve(&problem, settings)?;
    require_optimal(sol.status, "C_M Choi program")?;

    let j = enforce_trace_preservation(&sol.x, d)?;
    let choi = ChoiMatrix::with_tolerance(d, j, class, witness_tol(settings))?;
    let out = apply_choi(&choi, rho)?;
    let value = trace_product(out.matrix(), m) - 1.0 / d as f64;
    Ok(MeasureReport {
        value,
        witness: Some(Witness::Choi(choi)),
        status: sol.status,
        primal_residual: sol.primal_residual,
        dual_gap: sol.dual_gap,
        iterations: sol.iterations,
    })
}

/// Numbers entering the ℓ₁ and robustness bounds on `C_M^GIO`.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub c_l1: f64,
    pub c_m: f64,
    pub c_roc: f64,
    pub min_offdiag: f64,
    pub max_offdiag: f64,
    /// `C_l1/(d-1) · min|M_ij|`
    pub l1_lower: f64,
    /// `C_l1 · max|M_ij|`
    pub l1_upper: f64,
    /// `C_ROC / d`
    pub roc_upper: f64,
    pub l1_lower_ok: bool,
    pub l1_upper_ok: bool,
    pub nonnegative_ok: bool,
    pub roc_upper_ok: bool,
    /// Only evaluated when `M = |ψ+><ψ+|`: `C_M = C_ROC/d`.
    pub psi_plus_equality: Option<bool>,
}

impl BoundsReport {
    pub fn all_pass(&self) -> bool {
        self.l1_lower_ok
            && self.l1_upper_ok
            && self.nonnegative_ok
            && self.roc_upper_ok
            && self.psi_plus_equality.unwrap_or(true)
    }
}

pub const BOUND_SLACK: f64 = 1e-7;
/// Agreement required between the two SDPs in the `ψ+` equality.
pub const EQUALITY_TOL: f64 = 1e-5;

pub fn verify_bounds(rho: &DensityMatrix, m: &ComplexMatrix, settings: &SolverSettings) -> Result<BoundsReport> {
    check_observable(rho, m)?;
    let d = rho.dim();
    let offdiag: Vec<f64> = (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)].norm())
        .collect();
    let min_offdiag = offdiag.iter().copied().fold(f64::INFINITY, f64::min);
    let max_offdiag = offdiag.iter().copied().fold(0.0, f64::max);

    let l1 = c_l1(rho);
    let c_m = cm_gio(rho, m, settings)?.value;
    let roc = c_roc(rho, settings)?.value;
    let l1_lower = l1 / (d as f64 - 1.0) * min_offdiag;
    let l1_upper = l1 * max_offdiag;
    let roc_upper = roc / d as f64;

    let psi_plus = ComplexMatrix::ones(d).scale_real(1.0 / d as f64);
    let psi_plus_equality = (m.max_abs_diff(&psi_plus) <= 1e-12).then(|| (c_m - roc_upper).abs() <= EQUALITY_TOL);

    Ok(BoundsReport {
        c_l1: l1,
        c_m,
        c_roc: roc,
        min_offdiag,
        max_offdiag,
        l1_lower,
        l1_upper,
        roc_upper,
        l1_lower_ok: l1_lower <= c_m + BOUND_SLACK,
        l1_upper_ok: c_m <= l1_upper + BOUND_SLACK,
        nonnegative_ok: c_m >= -BOUND_SLACK,
        roc_upper_ok: c_m <= roc_upper + BOUND_SLACK,
        psi_plus_equality,
    })
}
