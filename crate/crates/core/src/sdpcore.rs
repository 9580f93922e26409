//! Small dense semidefinite programs over Hermitian matrices.
//!
//! Problems are posed in standard form
//!
//! ```text
//!   max/min  Re<C, X>   s.t.  Re<A_k, X> = b_k,   X ⪰ 0
//! ```
//!
//! with `X` a complex Hermitian `n×n` matrix and `<A, X> = tr(A† X)`.
//!
//! The solver works on the real symmetric embedding
//! `X ↦ [[Re X, -Im X], [Im X, Re X]]` of size `2n`. For Hermitian `A`, `X`,
//! `<emb(A), emb(X)> = 2 Re<A, X>`, so every right-hand side `b_k` is doubled
//! on the way in and the objective is halved on the way out. The embedded
//! feasible set is larger than the image of the embedding, but the
//! block-averaging map onto embedded matrices preserves PSD-ness, feasibility
//! and objective, so optimal values agree and an embedded optimum is
//! recovered by averaging.
//!
//! The iteration is over-relaxed ADMM on the split `X ∈ affine set`,
//! `Z ⪰ 0`, `X = Z`. Constraint rows are orthonormalised once up front
//! (modified Gram-Schmidt), so the affine projection is a single
//! least-squares correction and redundant rows are dropped. Cone projection
//! clips the spectrum from a Jacobi eigendecomposition.
//!
//! Degenerate programs (non-unique optima, as in the Choi programs over
//! channel classes) make plain ADMM crawl, so the fixed-point map on
//! `W = Z + U` is extrapolated by safeguarded type-II Anderson acceleration:
//! an extrapolated point is kept only if its residual does not exceed the
//! residual of the plain step before it.

use num_complex::Complex64;

use crate::matcore::{eig_symmetric, from_real_embedding, min_eigenvalue, real_embedding, ComplexMatrix};
use crate::{Error, Result};

const RELAXATION: f64 = 1.6;
const CHECK_EVERY: usize = 10;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const ANDERSON_MEMORY: usize = 10;

/// `Re<a, X> = b`, with `a` Hermitian.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub a: ComplexMatrix,
    pub b: f64,
}

impl Constraint {
    pub fn new(a: ComplexMatrix, b: f64) -> Self {
        Self { a, b }
    }

    /// Pins `Re X[p][q]` to `value`.
    pub fn entry_re(n: usize, p: usize, q: usize, value: f64) -> Self {
        let mut a = ComplexMatrix::zeros(n);
        if p == q {
            a[(p, p)] = Complex64::new(1.0, 0.0);
        } else {
            a[(p, q)] = Complex64::new(0.5, 0.0);
            a[(q, p)] = Complex64::new(0.5, 0.0);
        }
        Self { a, b: value }
    }

    /// Pins `Im X[p][q]` to `value` (`p != q`).
    pub fn entry_im(n: usize, p: usize, q: usize, value: f64) -> Self {
        assert_ne!(p, q, "diagonal entries of a Hermitian matrix are real");
        let mut a = ComplexMatrix::zeros(n);
        a[(p, q)] = Complex64::new(0.0, 0.5);
        a[(q, p)] = Complex64::new(0.0, -0.5);
        Self { a, b: value }
    }

    /// Both parts of a complex entry; just the real part on the diagonal.
    pub fn entry(n: usize, p: usize, q: usize, value: Complex64) -> Vec<Self> {
        if p == q {
            vec![Self::entry_re(n, p, p, value.re)]
        } else {
            vec![Self::entry_re(n, p, q, value.re), Self::entry_im(n, p, q, value.im)]
        }
    }

    /// `Re tr(G X) = re` and `Im tr(G X) = im` for an arbitrary complex `G`,
    /// valid for Hermitian `X`.
    pub fn functional(g: &ComplexMatrix, value: Complex64) -> [Self; 2] {
        let gd = g.dagger();
        let re_part = (g + &gd).scale_real(0.5);
        let im_part = (g - &gd).scale(Complex64::new(0.0, -0.5));
        [Self::new(re_part, value.re), Self::new(im_part, value.im)]
    }

    pub fn residual(&self, x: &ComplexMatrix) -> f64 {
        self.a.inner_re(x) - self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub dim: usize,
    pub objective: ComplexMatrix,
    pub constraints: Vec<Constraint>,
    pub sense: Sense,
}

impl SdpProblem {
    pub fn new(objective: ComplexMatrix, constraints: Vec<Constraint>, sense: Sense) -> Self {
        Self {
            dim: objective.dim(),
            objective,
            constraints,
            sense,
        }
    }

    fn validate(&self) -> Result<()> {
        let check = |m: &ComplexMatrix| -> Result<()> {
            if m.dim() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: m.dim(),
                });
            }
            let deviation = m.hermitian_deviation();
            if deviation > 1e-9 {
                return Err(Error::NotHermitian { deviation });
            }
            Ok(())
        };
        check(&self.objective)?;
        for c in &self.constraints {
            check(&c.a)?;
            if !c.b.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(())
    }

    /// Largest constraint violation of `x`.
    pub fn max_residual(&self, x: &ComplexMatrix) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.residual(x).abs())
            .fold(0.0, f64::max)
    }
}

/// Solver knobs.
///
/// `seed` feeds the randomised layers built on top of the solver (witness
/// search restarts); the ADMM iteration itself is deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50_000,
            seed: 0,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidInput(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: ComplexMatrix,
    pub value: f64,
    /// Dual objective estimate in the problem's own sense.
    pub dual_bound: f64,
    pub status: SdpStatus,
    pub primal_residual: f64,
    pub dual_gap: f64,
    pub iterations: usize,
}

/// Constraint rows orthonormalised in the embedded space.
struct AffineMap {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl AffineMap {
    /// `None` when the rows are inconsistent (empty affine set).
    fn build(constraints: &[Constraint]) -> Option<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(constraints.len());
        let mut rhs = Vec::with_capacity(constraints.len());
        for c in constraints {
            let mut v = real_embedding(&c.a);
            let mut b = 2.0 * c.b;
            let norm0 = dot(&v, &v).sqrt();
            if norm0 == 0.0 {
                if b.abs() > 1e-9 {
                    return None;
                }
                continue;
            }
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for (q, &bq) in rows.iter().zip(&rhs) {
                    let proj = dot(q, &v);
                    axpy(-proj, q, &mut v);
                    b -= proj * bq;
                }
            }
            let norm = dot(&v, &v).sqrt();
            if norm <= 1e-10 * norm0 {
                if b.abs() > 1e-8 * (1.0 + c.b.abs()) * norm0 {
                    return None;
                }
                continue;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
            rhs.push(b / norm);
        }
        Some(Self { rows, rhs })
    }

    fn project(&self, v: &mut [f64]) {
        for (q, &b) in self.rows.iter().zip(&self.rhs) {
            let r = dot(q, v) - b;
            axpy(-r, q, v);
        }
    }

    /// Coefficients of the least-squares fit of `v` in the row space.
    fn coefficients(&self, v: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|q| dot(q, v)).collect()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Projection onto the PSD cone of real symmetric `n×n` matrices.
///
/// Successive ADMM iterates are close, so the eigenproblem is solved in the
/// previous eigenbasis `B` (`Bᵀ W B` is nearly diagonal and Jacobi needs
/// one or two sweeps); the basis is updated in place.
struct ConeProjector {
    n: usize,
    basis: Vec<f64>,
    rotated: Vec<f64>,
    scratch: Vec<f64>,
}

impl ConeProjector {
    fn new(n: usize) -> Self {
        let mut basis = vec![0.0; n * n];
        for i in 0..n {
            basis[i * n + i] = 1.0;
        }
        Self {
            n,
            basis,
            rotated: vec![0.0; n * n],
            scratch: vec![0.0; n * n],
        }
    }

    fn project(&mut self, w: &mut [f64]) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (w[i * n + j] + w[j * n + i]);
                w[i * n + j] = avg;
                w[j * n + i] = avg;
            }
        }
        // rotated = Bᵀ W B
        matmul(w, &self.basis, &mut self.scratch, n, false);
        matmul(&self.basis, &self.scratch, &mut self.rotated, n, true);
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.rotated[i * n + j] + self.rotated[j * n + i]);
                self.rotated[i * n + j] = avg;
                self.rotated[j * n + i] = avg;
            }
        }
        let (vals, q) = eig_symmetric(&self.rotated, n)?;
        // new basis = B Q
        matmul(&self.basis, &q, &mut self.scratch, n, false);
        self.basis.copy_from_slice(&self.scratch);

        w.iter_mut().for_each(|x| *x = 0.0);
        for (k, &lam) in vals.iter().enumerate() {
            if lam <= 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = lam * self.basis[i * n + k];
                if vi == 0.0 {
                    continue;
                }
                for j in 0..n {
                    w[i * n + j] += vi * self.basis[j * n + k];
                }
            }
        }
        Ok(())
    }
}

/// Type-II Anderson acceleration of a fixed-point map `w ↦ g(w)` from the
/// last few residual differences.
struct Anderson {
    memory: usize,
    dw: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(_size: usize, memory: usize) -> Self {
        Self {
            memory,
            dw: Vec::with_capacity(memory),
            df: Vec::with_capacity(memory),
            prev: None,
        }
    }

    fn reset(&mut self) {
        self.dw.clear();
        self.df.clear();
        self.prev = None;
    }

    /// Next iterate from the current point `w`, its residual `f = g - w`
    /// and the plain step `g`; `None` when there is no usable history.
    fn extrapolate(&mut self, w: &[f64], f: &[f64], g: &[f64]) -> Option<Vec<f64>> {
        if let Some((pw, pf)) = self.prev.take() {
            if self.dw.len() == self.memory {
                self.dw.remove(0);
                self.df.remove(0);
            }
            self.dw.push(w.iter().zip(&pw).map(|(a, b)| a - b).collect());
            self.df.push(f.iter().zip(&pf).map(|(a, b)| a - b).collect());
        }
        self.prev = Some((w.to_vec(), f.to_vec()));
        let m = self.df.len();
        if m == 0 {
            return None;
        }

        // normal equations (ΔFᵀΔF + λI) γ = ΔFᵀ f, augmented as [A | b]
        let mut a = vec![0.0; m * (m + 1)];
        let mut trace = 0.0;
        for i in 0..m {
            for j in 0..=i {
                let v = dot(&self.df[i], &self.df[j]);
                a[i * (m + 1) + j] = v;
                a[j * (m + 1) + i] = v;
            }
            trace += a[i * (m + 1) + i];
            a[i * (m + 1) + m] = dot(&self.df[i], f);
        }
        if !(trace > 0.0) {
            return None;
        }
        for i in 0..m {
            a[i * (m + 1) + i] += 1e-10 * trace;
        }
        let gamma = solve_dense(&mut a, m)?;

        let mut out = g.to_vec();
        for (k, gk) in gamma.iter().enumerate() {
            for i in 0..out.len() {
                out[i] -= gk * (self.dw[k][i] + self.df[k][i]);
            }
        }
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

/// Gaussian elimination with partial pivoting on an augmented `m×(m+1)`
/// row-major system.
fn solve_dense(a: &mut [f64], m: usize) -> Option<Vec<f64>> {
    let w = m + 1;
    for col in 0..m {
        let pivot = (col..m).max_by(|&p, &q| a[p * w + col].abs().total_cmp(&a[q * w + col].abs()))?;
        if a[pivot * w + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..w {
                a.swap(pivot * w + j, col * w + j);
            }
        }
        for row in (col + 1)..m {
            let factor = a[row * w + col] / a[col * w + col];
            for j in col..w {
                a[row * w + j] -= factor * a[col * w + j];
            }
        }
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = a[i * w + m];
        for j in (i + 1)..m {
            s -= a[i * w + j] * x[j];
        }
        x[i] = s / a[i * w + i];
    }
    Some(x)
}

/// `out = op(a) · b` for row-major `n×n`, `op` transposing when asked.
fn matmul(a: &[f64], b: &[f64], out: &mut [f64], n: usize, transpose_a: bool) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..n {
        for k in 0..n {
            let aik = if transpose_a { a[k * n + i] } else { a[i * n + k] };
            if aik == 0.0 {
                continue;
            }
            let row = &b[k * n..(k + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for (d, r) in dst.iter_mut().zip(row) {
                *d += aik * r;
            }
        }
    }
}

/// Solves a standard-form SDP by ADMM.
///
/// Returns `Err` only for malformed problems or eigensolver failure; an
/// empty or non-convergent problem is reported through [`SdpStatus`].
pub fn solve(problem: &SdpProblem, settings: &SolverSettings) -> Result<SdpSolution> {
    problem.validate()?;
    settings.validate()?;

    let n = problem.dim;
    let big_n = 2 * n;
    let size = big_n * big_n;

    let Some(affine) = AffineMap::build(&problem.constraints) else {
        return Ok(SdpSolution {
            x: ComplexMatrix::zeros(n),
            value: f64::NAN,
            dual_bound: f64::NAN,
            status: SdpStatus::Infeasible,
            primal_residual: f64::INFINITY,
            dual_gap: f64::INFINITY,
            iterations: 0,
        });
    };

    // Internally always minimise <c, X> with ||c|| = 1.
    let mut c = real_embedding(&problem.objective);
    let c_norm = norm(&c);
    let c_scale = if c_norm > 0.0 { c_norm } else { 1.0 };
    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    c.iter_mut().for_each(|x| *x *= sign / c_scale);

    let tol = settings.tol;
    // State of the fixed-point iteration: w = Z + U, from which Z = Π_K(w)
    // and U = w - Z.
    let mut w = vec![0.0; size];
    let mut x = vec![0.0; size];
    let mut z = vec![0.0; size];
    let mut u = vec![0.0; size];
    let mut z_prev = vec![0.0; size];
    let mut f = vec![0.0; size];
    let mut w_plain = vec![0.0; size];
    let mut fallback = vec![0.0; size];
    let mut f_check = vec![0.0; size];
    let mut rho = 1.0;
    let mut cone = ConeProjector::new(big_n);
    let mut accel = Anderson::new(size, ANDERSON_MEMORY);
    let mut accelerated = false;
    let mut last_fnorm = f64::INFINITY;

    let mut status = SdpStatus::MaxIterations;
    let mut iterations = 0;
    let mut dual_obj = f64::NAN;
    let mut stalled_checks = 0;

    for k in 1..=settings.max_iter {
        iterations = k;
        z_prev.copy_from_slice(&z);
        z.copy_from_slice(&w);
        cone.project(&mut z)?;
        for i in 0..size {
            u[i] = w[i] - z[i];
            x[i] = z[i] - u[i] - c[i] / rho;
        }
        affine.project(&mut x);
        for i in 0..size {
            w_plain[i] = RELAXATION * x[i] + (1.0 - RELAXATION) * z[i] + u[i];
            f[i] = w_plain[i] - w[i];
        }
        let fnorm = norm(&f);
        if accelerated && !(fnorm <= last_fnorm) {
            // the extrapolated point did worse than the plain step it replaced
            w.copy_from_slice(&fallback);
            accel.reset();
            accelerated = false;
            continue;
        }
        last_fnorm = fnorm;

        if k % CHECK_EVERY == 0 || k == settings.max_iter {
            let x_norm = norm(&x).max(norm(&z));
            let r_prim = x.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let r_dual = rho * z.iter().zip(&z_prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();

            // Dual slack S = -rho U is PSD and complementary to Z by
            // construction; y is the least-squares multiplier for c - S.
            let mut resid: Vec<f64> = c.iter().zip(&u).map(|(ci, ui)| ci + rho * ui).collect();
            let y = affine.coefficients(&resid);
            for (q, &yk) in affine.rows.iter().zip(&y) {
                axpy(-yk, q, &mut resid);
            }
            let dual_infeas = norm(&resid);
            let p_obj = dot(&c, &z);
            dual_obj = dot(&affine.rhs, &y);
            let gap_rel = (p_obj - dual_obj).abs() / (1.0 + p_obj.abs() + dual_obj.abs());

            let prim_rel = r_prim / (1.0 + x_norm);
            let dual_rel = dual_infeas.max(r_dual);
            if prim_rel <= tol && dual_rel <= tol && gap_rel <= tol {
                status = SdpStatus::Optimal;
                break;
            }

            // For an empty intersection the fixed-point residual tends to a
            // nonzero constant (the gap vector between the two sets).
            let drift = f.iter().zip(&f_check).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            f_check.copy_from_slice(&f);
            if drift <= 1e-3 * fnorm && prim_rel > tol.sqrt() {
                stalled_checks += 1;
                if stalled_checks >= 100 {
                    status = SdpStatus::Infeasible;
                    break;
                }
            } else {
                stalled_checks = 0;
            }

            // residual balancing; U scales inversely with rho
            if k % (5 * CHECK_EVERY) == 0 {
                let ratio = prim_rel / dual_rel.max(f64::MIN_POSITIVE);
                let factor = if ratio > 10.0 && rho < RHO_MAX {
                    2.0
                } else if ratio < 0.1 && rho > RHO_MIN {
                    0.5
                } else {
                    1.0
                };
                if factor != 1.0 {
                    rho *= factor;
                    for i in 0..size {
                        w[i] = z[i] + u[i] / factor;
                    }
                    accel.reset();
                    accelerated = false;
                    last_fnorm = f64::INFINITY;
                    continue;
                }
            }
        }

        fallback.copy_from_slice(&w_plain);
        match accel.extrapolate(&w, &f, &w_plain) {
            Some(next) => {
                w = next;
                accelerated = true;
            }
            None => {
                w.copy_from_slice(&w_plain);
                accelerated = false;
            }
        }
    }
    let x_out = from_real_embedding(&z, n);
    let value = problem.objective.inner_re(&x_out);
    let primal_residual = problem.max_residual(&x_out);
    // unscale: embedded objective is twice the Hermitian one
    let dual_bound = sign * dual_obj * c_scale / 2.0;
    let dual_gap = (value - dual_bound).abs();
    Ok(SdpSolution {
        x: x_out,
        value,
        dual_bound,
        status,
        primal_residual,
        dual_gap,
        iterations,
    })
}

/// Result of a margin maximisation `max t  s.t.  X - tI ⪰ 0`, `X` affine.
#[derive(Debug, Clone)]
pub struct MarginSolution {
    /// Optimal `t` as reported by the solver (`-inf` for an empty affine set).
    pub margin: f64,
    /// `Y + max(t, 0) I` where `Y ⪰ 0` is the solver's cone iterate; exactly
    /// PSD, satisfies the constraints up to the solver residual.
    pub x: ComplexMatrix,
    pub status: SdpStatus,
    pub iterations: usize,
}

/// Maximises the smallest eigenvalue over the affine set
/// `{X : Re<A_k, X> = b_k}`.
///
/// The scalar `t` rides along as an extra diagonal entry `s = t + T` of a
/// bordered variable `[[Y, 0], [0, s]]` with `X = Y + (s - T) I`. The shift
/// `T` comes from the least-norm affine point, which keeps `s ≥ 1` at the
/// optimum so the extra PSD condition never binds. The constraints must bound
/// `tr X` (true for unit-diagonal and trace-preserving families).
pub fn max_margin(dim: usize, constraints: &[Constraint], settings: &SolverSettings) -> Result<MarginSolution> {
    settings.validate()?;
    for c in constraints {
        if c.a.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: c.a.dim(),
            });
        }
    }
    let Some(affine) = AffineMap::build(constraints) else {
        return Ok(MarginSolution {
            margin: f64::NEG_INFINITY,
            x: ComplexMatrix::zeros(dim),
            status: SdpStatus::Infeasible,
            iterations: 0,
        });
    };

    let mut x0 = vec![0.0; 4 * dim * dim];
    affine.project(&mut x0);
    let least_norm = from_real_embedding(&x0, dim).hermitian_part();
    let t0 = min_eigenvalue(&least_norm)?;
    let shift = (-t0).max(0.0) + 1.0;

    let n = dim + 1;
    let lift = |a: &ComplexMatrix| {
        ComplexMatrix::from_fn(n, |i, j| {
            if i < dim && j < dim {
                a[(i, j)]
            } else if i == dim && j == dim {
                a.trace()
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    };
    let mut lifted: Vec<Constraint> = constraints
        .iter()
        .map(|c| Constraint::new(lift(&c.a), c.b + shift * c.a.trace().re))
        .collect();
    for k in 0..dim {
        lifted.push(Constraint::entry_re(n, k, dim, 0.0));
        lifted.push(Constraint::entry_im(n, k, dim, 0.0));
    }
    let mut objective = ComplexMatrix::zeros(n);
    objective[(dim, dim)] = Complex64::new(1.0, 0.0);

    let sol = solve(&SdpProblem::new(objective, lifted, Sense::Maximize), settings)?;
    let margin = sol.x[(dim, dim)].re - shift;
    let lift_t = margin.max(0.0);
    let x = ComplexMatrix::from_fn(dim, |i, j| {
        let mut v = sol.x[(i, j)];
        if i == j {
            v += lift_t;
        }
        v
    });
    Ok(MarginSolution {
        margin,
        x,
        status: sol.status,
        iterations: sol.iterations,
    })
}

#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible(ComplexMatrix),
    Infeasible,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityResult {
    pub verdict: Feasibility,
    /// Smallest eigenvalue of the returned completion, which has every fixed
    /// entry set exactly. This certifies a lower bound on the best margin.
    pub margin: f64,
    /// Margin reported by the SDP before the fixed entries were reinstated.
    pub solver_margin: f64,
    pub status: SdpStatus,
}

/// PSD completion of a partially specified Hermitian matrix.
///
/// `fixed` lists `(i, j, value)`; every diagonal position must be present.
/// Pairs `(i, j)` and `(j, i)` may both appear but must then be conjugate.
/// Solves `max t  s.t.  X - tI ⪰ 0` with the pattern pinned; the verdict is
/// `Feasible` iff the certified margin is at least `-tol`.
pub fn feasibility(
    fixed: &[(usize, usize, Complex64)],
    dim: usize,
    settings: &SolverSettings,
) -> Result<FeasibilityResult> {
    settings.validate()?;
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    let mut pattern: Vec<Option<Complex64>> = vec![None; dim * dim];
    for &(i, j, v) in fixed {
        if i >= dim || j >= dim {
            return Err(Error::InvalidInput(format!("fixed entry ({i}, {j}) out of range for dim {dim}")));
        }
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::NonFinite);
        }
        if i == j && v.im.abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("diagonal entry ({i}, {i}) is not real")));
        }
        for (p, q, val) in [(i, j, v), (j, i, v.conj())] {
            match pattern[p * dim + q] {
                Some(prev) if (prev - val).norm() > 1e-12 => {
                    return Err(Error::InvalidInput(format!(
                        "inconsistent fixed pattern at ({p}, {q}): {prev} vs {val}"
                    )));
                }
                _ => pattern[p * dim + q] = Some(val),
            }
        }
    }
    if let Some(i) = (0..dim).find(|&i| pattern[i * dim + i].is_none()) {
        return Err(Error::InvalidInput(format!("diagonal entry ({i}, {i}) must be fixed")));
    }

    let free = (0..dim).any(|i| ((i + 1)..dim).any(|j| pattern[i * dim + j].is_none()));
    let pinned = |x: &ComplexMatrix| {
        ComplexMatrix::from_fn(dim, |i, j| pattern[i * dim + j].unwrap_or(x[(i, j)]))
    };

    let (completion, solver_margin, status) = if free {
        let mut constraints = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                if let Some(v) = pattern[i * dim + j] {
                    constraints.extend(Constraint::entry(dim, i, j, v));
                }
            }
        }
        let sol = max_margin(dim, &constraints, settings)?;
        (pinned(&sol.x), sol.margin, sol.status)
    } else {
        let x = pinned(&ComplexMatrix::zeros(dim));
        let t = min_eigenvalue(&x)?;
        (x, t, SdpStatus::Optimal)
    };

    let margin = min_eigenvalue(&completion)?;
    let verdict = if margin >= -settings.tol {
        Feasibility::Feasible(completion)
    } else {
        Feasibility::Infeasible
    };
    Ok(FeasibilityResult {
        verdict,
        margin,
        solver_margin,
        status,
    })
}
