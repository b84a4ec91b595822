//! Operator handles and the numerical linear algebra behind the solvers:
//! dense assembly, Hermitian Lanczos with full reorthogonalization, shifted
//! tridiagonal solves for resolvents, and power-iteration spectral norms.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

type ApplyFn = dyn Fn(&CVector) -> CVector + Send + Sync;

/// A linear map on state vectors offering apply and adjoint-apply, plus
/// optional dense/sparse assembly. Handles are immutable and cheap to clone;
/// applies are pure and safe to evaluate concurrently.
#[derive(Clone)]
pub struct OperatorHandle {
    dim: usize,
    apply: Arc<ApplyFn>,
    adjoint: Arc<ApplyFn>,
}

impl OperatorHandle {
    pub fn new(
        dim: usize,
        apply: impl Fn(&CVector) -> CVector + Send + Sync + 'static,
        adjoint: impl Fn(&CVector) -> CVector + Send + Sync + 'static,
    ) -> Self {
        OperatorHandle { dim, apply: Arc::new(apply), adjoint: Arc::new(adjoint) }
    }

    /// A self-adjoint map: adjoint-apply is the same closure.
    pub fn hermitian(
        dim: usize,
        apply: impl Fn(&CVector) -> CVector + Send + Sync + 'static,
    ) -> Self {
        let f: Arc<ApplyFn> = Arc::new(apply);
        OperatorHandle { dim, apply: f.clone(), adjoint: f }
    }

    pub fn zero(dim: usize) -> Self {
        OperatorHandle::hermitian(dim, move |_v| CVector::zeros(dim))
    }

    pub fn from_real_diagonal(diag: Vec<f64>) -> Self {
        let dim = diag.len();
        let d = Arc::new(diag);
        OperatorHandle::hermitian(dim, move |v| {
            CVector::from_iterator(dim, v.iter().zip(d.iter()).map(|(a, b)| a * *b))
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        debug_assert_eq!(v.len(), self.dim);
        (self.apply)(v)
    }

    pub fn apply_adjoint(&self, v: &CVector) -> CVector {
        debug_assert_eq!(v.len(), self.dim);
        (self.adjoint)(v)
    }

    pub fn adjoint(&self) -> OperatorHandle {
        OperatorHandle { dim: self.dim, apply: self.adjoint.clone(), adjoint: self.apply.clone() }
    }

    pub fn scaled(&self, c: Complex64) -> OperatorHandle {
        let a = self.apply.clone();
        let b = self.adjoint.clone();
        OperatorHandle {
            dim: self.dim,
            apply: Arc::new(move |v| a(v) * c),
            adjoint: Arc::new(move |v| b(v) * c.conj()),
        }
    }

    /// Sum of handles; all terms must share the dimension.
    pub fn sum(terms: Vec<OperatorHandle>) -> OperatorHandle {
        assert!(!terms.is_empty());
        let dim = terms[0].dim;
        assert!(terms.iter().all(|t| t.dim == dim));
        let fwd: Vec<Arc<ApplyFn>> = terms.iter().map(|t| t.apply.clone()).collect();
        let adj: Vec<Arc<ApplyFn>> = terms.iter().map(|t| t.adjoint.clone()).collect();
        OperatorHandle {
            dim,
            apply: Arc::new(move |v| {
                let mut acc = CVector::zeros(dim);
                for f in &fwd {
                    acc += f(v);
                }
                acc
            }),
            adjoint: Arc::new(move |v| {
                let mut acc = CVector::zeros(dim);
                for f in &adj {
                    acc += f(v);
                }
                acc
            }),
        }
    }

    /// `self` applied after `inner`.
    pub fn compose(&self, inner: &OperatorHandle) -> OperatorHandle {
        assert_eq!(self.dim, inner.dim);
        let a_out = self.apply.clone();
        let a_in = inner.apply.clone();
        let b_out = self.adjoint.clone();
        let b_in = inner.adjoint.clone();
        OperatorHandle {
            dim: self.dim,
            apply: Arc::new(move |v| a_out(&a_in(v))),
            adjoint: Arc::new(move |v| b_in(&b_out(v))),
        }
    }

    /// Shifted operator `self - z`.
    pub fn shifted(&self, z: Complex64) -> OperatorHandle {
        let a = self.apply.clone();
        let b = self.adjoint.clone();
        OperatorHandle {
            dim: self.dim,
            apply: Arc::new(move |v| a(v) - v * z),
            adjoint: Arc::new(move |v| b(v) - v * z.conj()),
        }
    }

    /// Dense assembly by applying to the standard basis.
    pub fn assemble_dense(&self) -> CMatrix {
        let n = self.dim;
        let mut m = CMatrix::zeros(n, n);
        let mut e = CVector::zeros(n);
        for j in 0..n {
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.apply(&e);
            m.column_mut(j).copy_from(&col);
            e[j] = Complex64::new(0.0, 0.0);
        }
        m
    }

    /// Sparse assembly as coordinate triplets, dropping entries at or below
    /// `drop_tol` in magnitude.
    pub fn sparse_triplets(&self, drop_tol: f64) -> Vec<(usize, usize, Complex64)> {
        let n = self.dim;
        let mut out = Vec::new();
        let mut e = CVector::zeros(n);
        for j in 0..n {
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.apply(&e);
            for i in 0..n {
                if col[i].norm() > drop_tol {
                    out.push((i, j, col[i]));
                }
            }
            e[j] = Complex64::new(0.0, 0.0);
        }
        out
    }

    /// Max-norm of `A - A^*` on the assembled matrix.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = self.assemble_dense();
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

/// Dense Hermitian eigendecomposition used as the oracle path for ground
/// states, resolvents, and time propagation at desk scale.
pub struct DenseEig {
    /// Eigenvalues in ascending order.
    pub values: DVector<f64>,
    /// Matching eigenvector columns.
    pub vectors: CMatrix,
}

impl DenseEig {
    pub fn new(matrix: CMatrix) -> Self {
        let n = matrix.nrows();
        let eig = matrix.clone().symmetric_eigen();
        let mut vectors = eig.eigenvectors;
        // The QR iteration can leave eigenpairs inside near-degenerate
        // clusters rotated against each other with residuals far above
        // rounding. One pass of threshold Jacobi on T = U^* A U (already
        // near-diagonal) restores backward stability.
        let mut t = vectors.adjoint() * &matrix * &vectors;
        let scale = (0..n).map(|i| t[(i, i)].re.abs()).fold(0.0f64, f64::max).max(1e-300);
        for _sweep in 0..8 {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let b = t[(p, q)];
                    if b.norm() <= 1e-15 * scale {
                        continue;
                    }
                    rotated = true;
                    // Phase-align the pair so the coupling is real, then a
                    // real Jacobi rotation annihilates it.
                    let beta = b / Complex64::new(b.norm(), 0.0);
                    let beta_conj = beta.conj();
                    for r in 0..n {
                        t[(r, q)] *= beta_conj;
                    }
                    for r in 0..n {
                        t[(q, r)] *= beta;
                    }
                    for r in 0..n {
                        let v = vectors[(r, q)] * beta_conj;
                        vectors[(r, q)] = v;
                    }
                    let app = t[(p, p)].re;
                    let aqq = t[(q, q)].re;
                    let apq = t[(p, q)].re;
                    let tau = (aqq - app) / (2.0 * apq);
                    let tan = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + tan * tan).sqrt();
                    let s = tan * c;
                    for r in 0..n {
                        let trp = t[(r, p)];
                        let trq = t[(r, q)];
                        t[(r, p)] = trp * c - trq * s;
                        t[(r, q)] = trp * s + trq * c;
                    }
                    for r in 0..n {
                        let tpr = t[(p, r)];
                        let tqr = t[(q, r)];
                        t[(p, r)] = tpr * c - tqr * s;
                        t[(q, r)] = tpr * s + tqr * c;
                    }
                    t[(p, q)] = Complex64::default();
                    t[(q, p)] = Complex64::default();
                    for r in 0..n {
                        let vrp = vectors[(r, p)];
                        let vrq = vectors[(r, q)];
                        vectors[(r, p)] = vrp * c - vrq * s;
                        vectors[(r, q)] = vrp * s + vrq * c;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let refined: Vec<f64> = (0..n).map(|i| t[(i, i)].re).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| refined[a].partial_cmp(&refined[b]).unwrap());
        let values = DVector::from_iterator(n, order.iter().map(|&i| refined[i]));
        let mut sorted = CMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            sorted.column_mut(dst).copy_from(&vectors.column(src));
        }
        DenseEig { values, vectors: sorted }
    }

    pub fn from_operator(op: &OperatorHandle) -> Self {
        DenseEig::new(op.assemble_dense())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn lowest(&self) -> (f64, CVector) {
        (self.values[0], self.vectors.column(0).into_owned())
    }

    /// Coefficients of `v` in the eigenbasis.
    pub fn to_eigenbasis(&self, v: &CVector) -> CVector {
        self.vectors.adjoint() * v
    }

    pub fn from_eigenbasis(&self, c: &CVector) -> CVector {
        &self.vectors * c
    }

    /// `f(A) v` through the spectral theorem.
    pub fn apply_function(&self, f: impl Fn(f64) -> Complex64, v: &CVector) -> CVector {
        let mut c = self.to_eigenbasis(v);
        for j in 0..c.len() {
            c[j] *= f(self.values[j]);
        }
        self.from_eigenbasis(&c)
    }

    /// `(A - z)^{-1} v`.
    pub fn resolvent(&self, z: Complex64, v: &CVector) -> CVector {
        self.apply_function(|lam| (Complex64::new(lam, 0.0) - z).inv(), v)
    }

    /// `e^{-i t A} v`.
    pub fn propagate(&self, t: f64, v: &CVector) -> CVector {
        self.apply_function(|lam| Complex64::from_polar(1.0, -lam * t), v)
    }
}

/// Direct dense solve of `(M - z) x = rhs` by LU with partial pivoting.
/// More accurate than going through an eigendecomposition, so this is the
/// resolvent path of the dense oracle.
pub fn dense_shifted_solve(matrix: &CMatrix, z: Complex64, rhs: &CVector) -> Result<CVector> {
    let n = matrix.nrows();
    let mut shifted = matrix.clone();
    for i in 0..n {
        shifted[(i, i)] -= z;
    }
    shifted
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::solver(format!("dense shifted solve singular at z = {z}")))
}

/// Outcome of the Lanczos extremal eigensolve.
pub struct LowestEigResult {
    pub value: f64,
    pub vector: CVector,
    pub residual: f64,
    pub iterations: usize,
    /// Second Ritz value, for gap estimates.
    pub second_value: Option<f64>,
    pub residual_history: Vec<f64>,
}

/// Eigenvalues (ascending) and eigenvectors of a real symmetric tridiagonal
/// matrix given by its diagonal and subdiagonal.
fn tridiag_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<f64>::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).copy_from(&eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Hermitian Lanczos recurrence with full reorthogonalization.
///
/// Shared by the extremal eigensolver, the shifted-system resolvent solver,
/// and the Krylov propagator; the orthonormal basis is retained so all of
/// them can reconstruct vectors in the original space.
struct LanczosProcess {
    basis: Vec<CVector>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Krylov space became invariant (breakdown with tiny beta).
    exhausted: bool,
}

impl LanczosProcess {
    fn new(start: &CVector) -> Result<Self> {
        let n = start.norm();
        if n == 0.0 {
            return Err(Error::solver("lanczos started from the zero vector"));
        }
        Ok(LanczosProcess {
            basis: vec![start / Complex64::new(n, 0.0)],
            alpha: Vec::new(),
            beta: Vec::new(),
            exhausted: false,
        })
    }

    fn steps(&self) -> usize {
        self.alpha.len()
    }

    /// Extend the factorization by up to `count` steps.
    fn extend(&mut self, op: &OperatorHandle, count: usize) {
        if self.exhausted {
            return;
        }
        let dim = op.dim();
        for _ in 0..count {
            let j = self.alpha.len();
            if j >= dim {
                self.exhausted = true;
                return;
            }
            let vj = &self.basis[j];
            let mut w = op.apply(vj);
            let a = vj.dotc(&w).re;
            self.alpha.push(a);
            w -= vj * Complex64::new(a, 0.0);
            if j > 0 {
                w -= &self.basis[j - 1] * Complex64::new(self.beta[j - 1], 0.0);
            }
            // Two passes of full reorthogonalization keep the basis clean
            // enough for tight solve tolerances.
            for _ in 0..2 {
                for v in &self.basis {
                    let c = v.dotc(&w);
                    if c.norm() > 0.0 {
                        w -= v * c;
                    }
                }
            }
            let b = w.norm();
            if b < 1e-14 * self.alpha[0].abs().max(1.0) {
                self.exhausted = true;
                return;
            }
            self.beta.push(b);
            self.basis.push(w / Complex64::new(b, 0.0));
        }
    }

    /// Assemble `sum_j y_j v_j`.
    fn lift(&self, y: &[Complex64]) -> CVector {
        let dim = self.basis[0].len();
        let mut x = CVector::zeros(dim);
        for (j, c) in y.iter().enumerate() {
            x += &self.basis[j] * *c;
        }
        x
    }
}

/// Lowest eigenpair of a Hermitian operator by Lanczos iteration.
pub fn lanczos_lowest(
    op: &OperatorHandle,
    start: &CVector,
    tol: f64,
    max_iter: usize,
) -> Result<LowestEigResult> {
    let mut proc = LanczosProcess::new(start)?;
    let mut history = Vec::new();
    let check_every = 10;
    loop {
        let target = (proc.steps() + check_every).min(max_iter).min(op.dim());
        let chunk = target - proc.steps();
        proc.extend(op, chunk);
        let m = proc.steps();
        if m == 0 {
            return Err(Error::solver("lanczos made no progress"));
        }
        let (vals, vecs) = tridiag_eigen(&proc.alpha, &proc.beta);
        let s = vecs.column(0);
        let beta_last = if proc.exhausted || m > proc.beta.len() {
            if proc.exhausted {
                0.0
            } else {
                proc.beta[m - 1]
            }
        } else {
            proc.beta[m - 1]
        };
        let est = beta_last * s[m - 1].abs();
        history.push(est);
        let converged = est <= tol * vals[0].abs().max(1.0);
        if converged || proc.exhausted || m >= max_iter.min(op.dim()) {
            let y: Vec<Complex64> =
                (0..m).map(|j| Complex64::new(s[j], 0.0)).collect();
            let mut x = proc.lift(&y);
            let n = x.norm();
            x /= Complex64::new(n, 0.0);
            let hx = op.apply(&x);
            let value = x.dotc(&hx).re;
            let residual = (&hx - &x * Complex64::new(value, 0.0)).norm();
            let second_value = if vals.len() > 1 { Some(vals[1]) } else { None };
            if !converged && !proc.exhausted && residual > tol * value.abs().max(1.0) {
                return Err(Error::solver(format!(
                    "lanczos did not converge in {m} iterations; residual history {:?}",
                    history
                )));
            }
            return Ok(LowestEigResult {
                value,
                vector: x,
                residual,
                iterations: m,
                second_value,
                residual_history: history,
            });
        }
    }
}

/// Solve the complex-shifted tridiagonal system `(T - z) y = b0 e1`.
/// Returns the solution and its last component (which drives the Lanczos
/// residual estimate). No pivoting: for Hermitian `T` the leading minors of
/// `T - z` cannot vanish when `Im z != 0` or when `z` lies outside the
/// spectrum interval.
fn tridiag_shifted_solve(
    alpha: &[f64],
    beta: &[f64],
    z: Complex64,
    b0: f64,
) -> Result<Vec<Complex64>> {
    let m = alpha.len();
    let mut diag = vec![Complex64::default(); m];
    let mut rhs = vec![Complex64::default(); m];
    diag[0] = Complex64::new(alpha[0], 0.0) - z;
    rhs[0] = Complex64::new(b0, 0.0);
    for i in 1..m {
        if diag[i - 1].norm() < 1e-300 {
            return Err(Error::solver("shifted tridiagonal pivot breakdown"));
        }
        let l = Complex64::new(beta[i - 1], 0.0) / diag[i - 1];
        diag[i] = Complex64::new(alpha[i], 0.0) - z - l * beta[i - 1];
        rhs[i] = -l * rhs[i - 1];
    }
    if diag[m - 1].norm() < 1e-300 {
        return Err(Error::solver("shifted tridiagonal pivot breakdown"));
    }
    let mut y = vec![Complex64::default(); m];
    y[m - 1] = rhs[m - 1] / diag[m - 1];
    for i in (0..m - 1).rev() {
        y[i] = (rhs[i] - beta[i] * y[i + 1]) / diag[i];
    }
    Ok(y)
}

/// One solution of a shifted linear system.
pub struct ShiftedSolution {
    pub shift: Complex64,
    pub solution: CVector,
    /// True residual `|(A - z) x - b|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Solve `(A - z_s) x_s = rhs` for a family of shifts with one shared Krylov
/// space (Hermitian `A`). All shifts ride the same basis, so an eta sweep
/// costs a single Lanczos run.
pub fn shifted_solve_many(
    op: &OperatorHandle,
    rhs: &CVector,
    shifts: &[Complex64],
    tol_rel: f64,
    max_iter: usize,
) -> Result<Vec<ShiftedSolution>> {
    let rhs_norm = rhs.norm();
    if rhs_norm == 0.0 {
        return Ok(shifts
            .iter()
            .map(|&z| ShiftedSolution {
                shift: z,
                solution: CVector::zeros(op.dim()),
                residual: 0.0,
                iterations: 0,
            })
            .collect());
    }
    let mut proc = LanczosProcess::new(rhs)?;
    let chunk = 20;
    loop {
        proc.extend(op, chunk);
        let m = proc.steps();
        let beta_last = if proc.exhausted { 0.0 } else { proc.beta[m - 1] };
        let mut all_ok = true;
        let mut ys = Vec::with_capacity(shifts.len());
        for &z in shifts {
            let y = tridiag_shifted_solve(&proc.alpha, &proc.beta[..m - 1], z, rhs_norm)?;
            let est = beta_last * y[m - 1].norm();
            if est > tol_rel * rhs_norm {
                all_ok = false;
            }
            ys.push(y);
        }
        let done = all_ok || proc.exhausted || m >= max_iter.min(op.dim());
        if done {
            let mut out = Vec::with_capacity(shifts.len());
            for (&z, y) in shifts.iter().zip(ys) {
                let x = proc.lift(&y);
                let residual = (op.apply(&x) - &x * z - rhs).norm();
                out.push(ShiftedSolution { shift: z, solution: x, residual, iterations: m });
            }
            let worst = out.iter().map(|s| s.residual).fold(0.0f64, f64::max);
            if worst > tol_rel * rhs_norm * 10.0 && !proc.exhausted && m < max_iter {
                continue;
            }
            if worst > tol_rel * rhs_norm * 10.0 {
                return Err(Error::solver(format!(
                    "shifted krylov stalled at residual {worst:.3e} after {m} iterations \
                     (target {:.3e})",
                    tol_rel * rhs_norm
                )));
            }
            return Ok(out);
        }
    }
}

/// Unitary time evolution `e^{-i t A} v` for Hermitian `A` by adaptive
/// Lanczos stepping. Each step projects onto a Krylov space, exponentiates
/// the small tridiagonal there, and halves the step until an internal
/// order-comparison error estimate meets the per-step tolerance share.
pub fn krylov_propagate(
    op: &OperatorHandle,
    v: &CVector,
    t: f64,
    tol: f64,
    max_m: usize,
) -> Result<CVector> {
    if t == 0.0 || v.norm() == 0.0 {
        return Ok(v.clone());
    }
    let total = t.abs();
    let sign = t.signum();
    let mut psi = v.clone();
    let mut done = 0.0f64;
    let mut guard = 0usize;
    while done < total {
        guard += 1;
        if guard > 100_000 {
            return Err(Error::solver("krylov propagation stalled (step underflow)"));
        }
        let norm = psi.norm();
        let mut proc = LanczosProcess::new(&psi)?;
        proc.extend(op, max_m);
        let m = proc.steps();
        let (theta, s) = tridiag_eigen(&proc.alpha, &proc.beta[..m.saturating_sub(1)]);
        // Weights of e1 in the Ritz basis.
        let w_full: Vec<f64> = (0..m).map(|j| s[(0, j)]).collect();
        // Reference of lower order for the error estimate.
        let m_low = if m > 8 { m - 6 } else { m.max(1) };
        let (theta_low, s_low) = tridiag_eigen(&proc.alpha[..m_low], &proc.beta[..m_low - 1]);
        let w_low: Vec<f64> = (0..m_low).map(|j| s_low[(0, j)]).collect();

        let coeffs = |dt: f64| -> Vec<Complex64> {
            // y = S e^{-i theta dt} S^T e1 in the Lanczos basis.
            let mut y = vec![Complex64::default(); m];
            for j in 0..m {
                let phase = Complex64::from_polar(1.0, -theta[j] * sign * dt);
                for i in 0..m {
                    y[i] += s[(i, j)] * w_full[j] * phase;
                }
            }
            y
        };
        let coeffs_low = |dt: f64| -> Vec<Complex64> {
            let mut y = vec![Complex64::default(); m_low];
            for j in 0..m_low {
                let phase = Complex64::from_polar(1.0, -theta_low[j] * sign * dt);
                for i in 0..m_low {
                    y[i] += s_low[(i, j)] * w_low[j] * phase;
                }
            }
            y
        };

        let mut dt = total - done;
        let mut halvings = 0usize;
        let step = loop {
            if proc.exhausted && m == proc.basis.len() {
                // Invariant subspace: the projection is exact at any step.
                break dt;
            }
            let y = coeffs(dt);
            let y_low = coeffs_low(dt);
            let mut err = 0.0f64;
            for i in 0..m {
                let low = if i < m_low { y_low[i] } else { Complex64::default() };
                err += (y[i] - low).norm_sqr();
            }
            let err = err.sqrt() * norm;
            // The order-comparison estimate bottoms out at the rounding
            // floor of the small eigensolves; don't chase below it.
            let floor = 1e-14 * (m as f64) * norm;
            let budget = (tol * (dt / total).max(1e-3) * norm.max(1.0)).max(floor);
            if err <= budget || dt < 1e-12 * total || halvings > 60 {
                break dt;
            }
            dt *= 0.5;
            halvings += 1;
        };
        let y = coeffs(step);
        let mut next = CVector::zeros(psi.len());
        for (j, c) in y.iter().enumerate() {
            next += &proc.basis[j] * (*c * Complex64::new(norm, 0.0));
        }
        psi = next;
        done += step;
    }
    Ok(psi)
}

/// Spectral norm `|A|` by power iteration on `A^* A`, with relative
/// tolerance on successive estimates.
pub fn spectral_norm(op: &OperatorHandle, tol_rel: f64, max_iter: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = random_vector(op.dim(), &mut rng);
    let mut est = 0.0f64;
    for _ in 0..max_iter {
        let n = v.norm();
        if n == 0.0 {
            return 0.0;
        }
        v /= Complex64::new(n, 0.0);
        let av = op.apply(&v);
        let new_est = av.norm();
        let w = op.apply_adjoint(&av);
        let done = (new_est - est).abs() <= tol_rel * new_est.max(1e-300);
        est = new_est;
        v = w;
        if done {
            break;
        }
    }
    est
}

/// Rough bound on the spectral radius of a Hermitian operator, used to size
/// quadrature panels. A short power iteration padded by a safety factor.
pub fn spectral_radius_estimate(op: &OperatorHandle, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = random_vector(op.dim(), &mut rng);
    let mut est = 0.0f64;
    for _ in 0..30 {
        let n = v.norm();
        if n == 0.0 {
            return 0.0;
        }
        v /= Complex64::new(n, 0.0);
        let w = op.apply(&v);
        est = w.norm();
        v = w;
    }
    est * 1.2
}

/// Uniformly random complex vector with entries in the unit square.
pub fn random_vector(dim: usize, rng: &mut impl Rng) -> CVector {
    CVector::from_iterator(
        dim,
        (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
    )
}

/// Rotate a vector so its largest-magnitude pivot component is real and
/// positive; deterministic representative of the global-phase orbit.
pub fn fix_global_phase(v: &mut CVector) {
    let mut max = 0.0f64;
    for c in v.iter() {
        max = max.max(c.norm());
    }
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|c| c.norm() >= 0.5 * max).unwrap();
    let phase = v[pivot] / Complex64::new(v[pivot].norm(), 0.0);
    let rot = phase.conj();
    for c in v.iter_mut() {
        *c *= rot;
    }
}
