//! Convertibility decisions and explicit channel constructions.
//!
//! A GIO acts as `ρ ↦ τ ∘ ρ`, so `ρ → σ` under GIO pins every entry of `τ`
//! where `ρ_ij ≠ 0` to `σ_ij / ρ_ij`, and leaves the rest free. Conversion
//! is possible iff the diagonals agree, no pinned entry leaves the unit disc,
//! no zero entry has to become nonzero, and the partial correlation matrix
//! has a PSD completion. The completion is the witness channel.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channels::{
    apply_choi, apply_schur, class_constraints, omega_materialize, ChannelClass, ChoiMatrix, DensityMatrix,
    OmegaElement, SchurChannel,
};
use crate::matcore::{min_eigenvalue, ComplexMatrix};
use crate::measures::{cm_gio, enforce_trace_preservation, witness_tol, Witness};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::sdpcore::{self, Constraint, Feasibility, SolverSettings};
use crate::{Error, Result};

/// Off-diagonal entries of `ρ` at or below this modulus leave `τ_ij` free.
pub const ZERO_ENTRY: f64 = 1e-10;
/// Entries within a decade of [`ZERO_ENTRY`] are tried both ways.
const AMBIGUOUS_BAND: (f64, f64) = (1e-11, 1e-9);
/// Slack on `|τ_ij| ≤ 1` for pinned entries.
pub const FORCED_SLACK: f64 = 1e-8;
/// Diagonal agreement required between `ρ` and `σ`.
pub const DIAGONAL_TOL: f64 = 1e-8;
/// A witness must reproduce its target to this accuracy.
pub const WITNESS_TOL: f64 = 1e-7;
/// Minimum gap for the witness search to report a violating observable.
pub const GAP_THRESHOLD: f64 = 1e-6;
/// Diagonal entries at or below this are treated as zero by
/// [`construct_mcs_gio`].
pub const ZERO_DIAGONAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Convertible,
    NotConvertible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    /// `ρ_ii ≠ σ_ii` at this index.
    DiagonalMismatch(usize),
    /// `|σ_ij / ρ_ij| > 1`.
    ForcedEntryTooLarge(usize, usize),
    /// `ρ_ij = 0` but `σ_ij ≠ 0`.
    ZeroToNonzero(usize, usize),
    /// The pinned entries admit no PSD completion (or, for Choi programs,
    /// the class constraints admit no channel).
    CompletionInfeasible,
    None,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub decision: Decision,
    pub witness: Option<Witness>,
    pub reason: Reason,
    /// Signed distance-like quantity: positive inside the feasible set. For
    /// completions this is the smallest eigenvalue of the witness `τ`.
    pub margin: f64,
}

impl Verdict {
    pub fn is_convertible(&self) -> bool {
        self.decision == Decision::Convertible
    }

    fn rejected(reason: Reason, margin: f64) -> Self {
        Self {
            decision: Decision::NotConvertible,
            witness: None,
            reason,
            margin,
        }
    }
}

fn check_pair(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<usize> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    Ok(rho.dim())
}

fn diagonal_mismatch(rho: &DensityMatrix, sigma: &DensityMatrix) -> Option<(usize, f64)> {
    rho.diag()
        .iter()
        .zip(sigma.diag())
        .map(|(a, b)| (a - b).abs())
        .enumerate()
        .filter(|(_, diff)| *diff > DIAGONAL_TOL)
        .reduce(|best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Decides `ρ → σ` under genuinely incoherent operations; a positive verdict
/// carries the Schur channel.
pub fn decide_gio(rho: &DensityMatrix, sigma: &DensityMatrix, settings: &SolverSettings) -> Result<Verdict> {
    check_pair(rho, sigma)?;
    if let Some((i, diff)) = diagonal_mismatch(rho, sigma) {
        return Ok(Verdict::rejected(Reason::DiagonalMismatch(i), -diff));
    }
    let verdict = gio_completion(rho, sigma, settings)?;
    if let Some(Witness::Schur(ch)) = &verdict.witness {
        let out = apply_schur(ch, rho)?;
        let err = out.matrix().max_abs_diff(sigma.matrix());
        if err > WITNESS_TOL {
            return Err(Error::Solver(format!("GIO witness misses the target by {err:.3e}")));
        }
    }
    Ok(verdict)
}

#[derive(Debug, Clone, Copy)]
enum Entry {
    Pinned(Complex64),
    Free,
}

/// Shared by [`decide_gio`] and the GIO branch of [`decide_offdiag`]; only
/// off-diagonal entries are compared.
fn gio_completion(rho: &DensityMatrix, sigma: &DensityMatrix, settings: &SolverSettings) -> Result<Verdict> {
    let d = rho.dim();
    let r = rho.matrix();
    let s = sigma.matrix();

    if offdiag_error(r, s) == 0.0 {
        return Ok(Verdict {
            decision: Decision::Convertible,
            witness: Some(Witness::Schur(SchurChannel::identity(d))),
            reason: Reason::None,
            margin: 0.0,
        });
    }

    let mut ambiguous = false;
    let classify = |flip: bool, ambiguous: &mut bool| -> std::result::Result<Vec<(usize, usize, Entry)>, Verdict> {
        let mut entries = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                let (rij, sij) = (r[(i, j)], s[(i, j)]);
                let small = rij.norm() <= ZERO_ENTRY;
                let in_band = rij.norm() > AMBIGUOUS_BAND.0 && rij.norm() <= AMBIGUOUS_BAND.1;
                *ambiguous |= in_band;
                let treat_free = if in_band && flip { !small } else { small };
                if treat_free {
                    if sij.norm() > ZERO_ENTRY {
                        return Err(Verdict::rejected(Reason::ZeroToNonzero(i, j), -sij.norm()));
                    }
                    entries.push((i, j, Entry::Free));
                } else {
                    let tau = sij / rij;
                    if tau.norm() > 1.0 + FORCED_SLACK {
                        return Err(Verdict::rejected(Reason::ForcedEntryTooLarge(i, j), 1.0 - tau.norm()));
                    }
                    entries.push((i, j, Entry::Pinned(tau)));
                }
            }
        }
        Ok(entries)
    };

    let first = match classify(false, &mut ambiguous) {
        Ok(entries) => complete(d, &entries, settings)?,
        Err(v) => v,
    };
    if first.is_convertible() || !ambiguous {
        return Ok(first);
    }
    match classify(true, &mut ambiguous) {
        Ok(entries) => {
            let second = complete(d, &entries, settings)?;
            Ok(if second.is_convertible() { second } else { first })
        }
        Err(_) => Ok(first),
    }
}

fn complete(d: usize, entries: &[(usize, usize, Entry)], settings: &SolverSettings) -> Result<Verdict> {
    let one = Complex64::new(1.0, 0.0);
    let mut fixed: Vec<(usize, usize, Complex64)> = (0..d).map(|i| (i, i, one)).collect();
    fixed.extend(entries.iter().filter_map(|&(i, j, e)| match e {
        Entry::Pinned(v) => Some((i, j, v)),
        Entry::Free => None,
    }));
    let res = sdpcore::feasibility(&fixed, d, settings)?;
    match res.verdict {
        Feasibility::Feasible(x) => {
            // lift a margin in [-tol, 0) back onto the cone, keeping unit diagonal
            let x = if res.margin < 0.0 {
                let shift = -res.margin;
                let lifted = &x + &ComplexMatrix::identity(d).scale_real(shift);
                lifted.scale_real(1.0 / (1.0 + shift))
            } else {
                x
            };
            let ch = SchurChannel::normalized(&x)?;
            Ok(Verdict {
                decision: Decision::Convertible,
                witness: Some(Witness::Schur(ch)),
                reason: Reason::None,
                margin: res.margin,
            })
        }
        Feasibility::Infeasible => Ok(Verdict::rejected(Reason::CompletionInfeasible, res.margin)),
    }
}

/// The GIO sending `|ψ><ψ|`, `ψ_i = √ρ_ii`, to `ρ`: `τ_ij = ρ_ij/√(ρ_ii ρ_jj)`,
/// with rows and columns of vanishing diagonal entries replaced by those of
/// the identity.
pub fn construct_mcs_gio(rho: &DensityMatrix) -> Result<SchurChannel> {
    let d = rho.dim();
    let r = rho.matrix();
    let diag = rho.diag();
    let tau = ComplexMatrix::from_fn(d, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else if diag[i] <= ZERO_DIAGONAL || diag[j] <= ZERO_DIAGONAL {
            Complex64::new(0.0, 0.0)
        } else {
            r[(i, j)] / (diag[i] * diag[j]).sqrt()
        }
    });
    SchurChannel::new(tau)
}

/// `|ψ> = Σ √ρ_ii |i>`, the pure state [`construct_mcs_gio`] starts from.
pub fn sqrt_diagonal_state(rho: &DensityMatrix) -> Vec<Complex64> {
    rho.diag()
        .iter()
        .map(|&p| Complex64::new(p.max(0.0).sqrt(), 0.0))
        .collect()
}

fn check_probability(x: &[f64], name: &str) -> Result<()> {
    if let Some(v) = x.iter().find(|v| !v.is_finite() || **v < -1e-12) {
        return Err(Error::InvalidInput(format!("{name} has invalid entry {v}")));
    }
    let total: f64 = x.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("{name} sums to {total}, expected 1")));
    }
    Ok(())
}

/// `x ≺ y`: the descending partial sums of `x` never exceed those of `y`
/// (within `1e-9`).
pub fn is_majorized_by(x: &[f64], y: &[f64]) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    check_probability(x, "x")?;
    check_probability(y, "y")?;
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let (xs, ys) = (sorted(x), sorted(y));
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (a, b) in xs.iter().zip(&ys) {
        sx += a;
        sy += b;
        if sx > sy + 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Pure-to-mixed conversion under strictly incoherent operations.
///
/// Returns the sufficient majorization condition `(|ψ_i|²) ≺ (σ_ii)` and the
/// GIO half of the conversion, which maps `|η> = Σ √σ_ii |i>` onto `σ`. The
/// strictly incoherent pure-to-pure step `ψ → η` is not synthesised.
pub fn decide_pure_to_mixed_sio(psi: &[Complex64], sigma: &DensityMatrix) -> Result<(bool, SchurChannel)> {
    if psi.len() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            found: psi.len(),
        });
    }
    let probs: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let norm: f64 = probs.iter().sum();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("state vector has norm² {norm}")));
    }
    let predicate = is_majorized_by(&probs, &sigma.diag())?;
    Ok((predicate, construct_mcs_gio(sigma)?))
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub restarts: usize,
    /// Function evaluations per restart, per free parameter.
    pub evals_per_param: usize,
    pub seed: u64,
}

impl SearchOptions {
    pub fn new(restarts: usize, seed: u64) -> Self {
        Self {
            restarts,
            evals_per_param: 60,
            seed,
        }
    }
}

/// An observable in Ω on which `C_M(σ)` exceeds `C_M(ρ)`.
#[derive(Debug, Clone)]
pub struct MeasureWitness {
    pub omega: OmegaElement,
    pub gap: f64,
    pub restart: usize,
}

/// Mixture weights (softmax of logits) and phases (first phase pinned to 0)
/// from a flat parameter vector.
fn omega_from_params(params: &[f64], d: usize, components: usize) -> OmegaElement {
    let logits = &params[..components];
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut weights: Vec<f64> = exps.iter().map(|e| e / total).collect();
    // absorb rounding so the weights sum to one within 1e-12
    let drift = 1.0 - weights.iter().sum::<f64>();
    weights[0] += drift;
    let phases = (0..components)
        .map(|k| {
            let mut theta = vec![0.0; d];
            theta[1..].copy_from_slice(&params[components + k * (d - 1)..components + (k + 1) * (d - 1)]);
            theta
        })
        .collect();
    OmegaElement::new(weights, phases).expect("softmax weights are a probability vector")
}

/// Best-effort search for `M ∈ Ω` with `C_M(σ) - C_M(ρ) > 1e-6`.
///
/// Finding one certifies that `ρ → σ` is impossible under GIO; finding none
/// certifies nothing. Runs `budget` multi-start Nelder-Mead restarts over
/// Ω elements with `d` components.
pub fn search_witness_measure(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    budget: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<Option<MeasureWitness>> {
    search_witness_measure_with(rho, sigma, &SearchOptions::new(budget, seed), settings)
}

pub fn search_witness_measure_with(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    opts: &SearchOptions,
    settings: &SolverSettings,
) -> Result<Option<MeasureWitness>> {
    let d = check_pair(rho, sigma)?;
    if let Some((i, _)) = diagonal_mismatch(rho, sigma) {
        return Err(Error::InvalidInput(format!(
            "witness search needs equal diagonals (index {i} differs)"
        )));
    }
    let components = d;
    let n_params = components + components * (d - 1);

    let gap_at = |params: &[f64]| -> Result<f64> {
        let omega = omega_from_params(params, d, components);
        let m = omega_materialize(&omega, d)?;
        Ok(cm_gio(sigma, &m, settings)?.value - cm_gio(rho, &m, settings)?.value)
    };

    let runs: Vec<Result<(usize, Vec<f64>, f64)>> = (0..opts.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(restart as u64);
            let mut x0 = Vec::with_capacity(n_params);
            x0.extend((0..components).map(|_| rng.random::<f64>() * 2.0 - 1.0));
            x0.extend((components..n_params).map(|_| rng.random::<f64>() * TAU));

            let mut failure = None;
            let nm = NelderMeadOptions {
                max_evals: opts.evals_per_param * n_params,
                f_tol: 1e-12,
                initial_step: 0.5,
            };
            let best = nelder_mead(
                |p| match gap_at(p) {
                    Ok(g) => -g,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::INFINITY
                    }
                },
                &x0,
                &nm,
                |_| false,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            Ok((restart, best.x, -best.value))
        })
        .collect();

    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for run in runs {
        let run = run?;
        // ties go to the lowest restart index, which comes first
        if best.as_ref().map_or(true, |b| run.2 > b.2) {
            best = Some(run);
        }
    }
    Ok(best.and_then(|(restart, x, gap)| {
        (gap > GAP_THRESHOLD).then(|| MeasureWitness {
            omega: omega_from_params(&x, d, components),
            gap,
            restart,
        })
    }))
}

fn offdiag_error(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let d = a.dim();
    let mut err: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                err = err.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
    }
    err
}

/// Decides whether some channel of the class maps `ρ` to a state with the
/// same off-diagonal part as `σ`.
pub fn decide_offdiag(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    class: ChannelClass,
    settings: &SolverSettings,
) -> Result<Verdict> {
    let d = check_pair(rho, sigma)?;
    let verdict = match class {
        ChannelClass::Gio => gio_completion(rho, sigma, settings)?,
        ChannelClass::Dio | ChannelClass::Mio => choi_offdiag(rho, sigma, class, settings)?,
        ChannelClass::Cptp => {
            return Err(Error::InvalidInput(
                "off-diagonal conversion is decided for GIO, DIO and MIO only".into(),
            ))
        }
    };
    if let Some(w) = &verdict.witness {
        let out = match w {
            Witness::Schur(ch) => apply_schur(ch, rho)?,
            Witness::Choi(choi) => apply_choi(choi, rho)?,
            Witness::Incoherent(_) => unreachable!("conversion witnesses are channels"),
        };
        let err = offdiag_error(out.matrix(), sigma.matrix());
        if err > WITNESS_TOL {
            return Err(Error::Solver(format!(
                "{class} witness misses the target off-diagonal part by {err:.3e}"
            )));
        }
    }
    debug_assert_eq!(d, sigma.dim());
    Ok(verdict)
}

fn choi_offdiag(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    class: ChannelClass,
    settings: &SolverSettings,
) -> Result<Verdict> {
    let d = rho.dim();
    if offdiag_error(rho.matrix(), sigma.matrix()) == 0.0 {
        let identity = ChoiMatrix::from_schur(&SchurChannel::identity(d)).reclassify(class, crate::channels::VALIDATION_TOL)?;
        return Ok(Verdict {
            decision: Decision::Convertible,
            witness: Some(Witness::Choi(identity)),
            reason: Reason::None,
            margin: 0.0,
        });
    }
    let n = d * d;
    let mut constraints = class_constraints(class, d);
    let rho_t = rho.matrix().transpose();
    for k in 0..d {
        for l in (k + 1)..d {
            // Φ(ρ)_kl = tr(J (ρᵀ ⊗ |l><k|))
            let mut e = ComplexMatrix::zeros(d);
            e[(l, k)] = Complex64::new(1.0, 0.0);
            let g = rho_t.kron(&e);
            constraints.extend(Constraint::functional(&g, sigma.matrix()[(k, l)]));
        }
    }
    let sol = sdpcore::max_margin(n, &constraints, settings)?;
    if sol.margin < -choi_margin_tol(settings) {
        return Ok(Verdict::rejected(Reason::CompletionInfeasible, sol.margin));
    }
    let j = enforce_trace_preservation(&sol.x, d)?;
    let choi = ChoiMatrix::with_tolerance(d, j, class, witness_tol(settings))?;
    Ok(Verdict {
        decision: Decision::Convertible,
        witness: Some(Witness::Choi(choi)),
        reason: Reason::None,
        margin: sol.margin,
    })
}

/// Acceptance threshold on the Choi feasibility margin.
fn choi_margin_tol(settings: &SolverSettings) -> f64 {
    settings.tol
}

/// `C_M(M)` and `C_M(M*)` for the state `ρ = M` built from an Ω element.
pub fn conjugate_gap(w: &OmegaElement, d: usize, settings: &SolverSettings) -> Result<(f64, f64)> {
    let m = omega_materialize(w, d)?;
    let state = DensityMatrix::new(m.clone())?;
    let c_m = cm_gio(&state, &m, settings)?.value;
    let c_m_conj = cm_gio(&state.conj(), &m, settings)?.value;
    Ok((c_m, c_m_conj))
}

/// Smallest eigenvalue of a Schur witness, for reporting.
pub fn witness_margin(ch: &SchurChannel) -> Result<f64> {
    min_eigenvalue(ch.tau())
}
