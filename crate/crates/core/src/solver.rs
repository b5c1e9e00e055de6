//! Solution-matrix integration.
//!
//! The rows of `V(t)` are the coefficient vectors of the `2N` linear
//! invariants `b^μ = V^μ_ν z^ν + u^μ`. Invariance under
//! `ż = 2εA z + εB` requires
//!
//! ```text
//! V̇ = -2 V ε A,      u̇^i = -V^i_ν (ε B)^ν,
//! ```
//!
//! started from reference oscillators of frequencies `ω_i`:
//! `φ(t0) = diag(1/√(2ω_i))`, `π(t0) = diag(-i√(ω_i/2))`, `u(t0) = 0`, with
//!
//! ```text
//! V = i [[-π†, φ†], [πᵀ, -φᵀ]],      V⁻¹ = [[φ, φ*], [π, π*]].
//! ```
//!
//! `φ_ij` and `π_ij` are the coefficients of `b_j` in `q_i` and `p_i`.
//! Rows `N..2N` are integrated independently of rows `0..N` so that the
//! conjugate-row structure can be monitored rather than imposed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::hamiltonian::HamiltonianSchedule;
use crate::symplectic::{max_abs, SymplecticForm};
use crate::C64;

const I: C64 = C64::new(0.0, 1.0);

/// Step-size alarm threshold on the canonical residual.
pub const CANONICAL_ABORT: f64 = 1e-6;

/// Reference frequencies `ω_i > 0` fixing `V(t0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFrequencies(Vec<f64>);

impl ReferenceFrequencies {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::ZeroModes);
        }
        for w in &omegas {
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "omegas".into(),
                    reason: format!("reference frequencies must be positive, got {w}"),
                });
            }
        }
        Ok(Self(omegas))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// `φ(t0)`.
    pub fn initial_phi(&self) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.len(),
            self.0.iter().map(|w| C64::from(1.0 / (2.0 * w).sqrt())),
        ))
    }

    /// `π(t0)`.
    pub fn initial_pi(&self) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.len(),
            self.0.iter().map(|w| C64::new(0.0, -(w / 2.0).sqrt())),
        ))
    }

    /// `V(t0)`.
    pub fn initial_solution_matrix(&self) -> DMatrix<C64> {
        assemble_v(&self.initial_phi(), &self.initial_pi())
    }
}

/// `V = i [[-π†, φ†], [πᵀ, -φᵀ]]`.
pub fn assemble_v(phi: &DMatrix<C64>, pi: &DMatrix<C64>) -> DMatrix<C64> {
    let n = phi.nrows();
    let mut v = DMatrix::zeros(2 * n, 2 * n);
    v.view_mut((0, 0), (n, n)).copy_from(&(pi.adjoint() * (-I)));
    v.view_mut((0, n), (n, n)).copy_from(&(phi.adjoint() * I));
    v.view_mut((n, 0), (n, n)).copy_from(&(pi.transpose() * I));
    v.view_mut((n, n), (n, n)).copy_from(&(phi.transpose() * (-I)));
    v
}

/// `(2π / max ω_i) / 1000`.
pub fn default_dt(omegas: &ReferenceFrequencies) -> f64 {
    2.0 * std::f64::consts::PI / omegas.max() / 1000.0
}

/// `‖i V ε Vᵀ − ε‖_max`, zero exactly when `[b^μ, b^ν] = ε^{μν}`.
pub fn canonical_residual(v: &DMatrix<C64>, form: &SymplecticForm) -> f64 {
    let eps = form.upper_as::<C64>();
    max_abs(&((v * &eps * v.transpose()) * I - eps))
}

/// `max |V^{N+i}_ν − conj(V^i_ν)|`: creation rows must be the conjugates of
/// the annihilation rows.
pub fn conjugacy_residual(v: &DMatrix<C64>) -> f64 {
    let n = v.nrows() / 2;
    let mut r: f64 = 0.0;
    for i in 0..n {
        for nu in 0..2 * n {
            r = r.max((v[(n + i, nu)] - v[(i, nu)].conj()).norm());
        }
    }
    r
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Abort when the canonical residual exceeds this after any step.
    pub abort_residual: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { abort_residual: CANONICAL_ABORT }
    }
}

/// `V`, `u` on a time grid.
#[derive(Debug, Clone)]
pub struct SolutionRecord {
    grid: TimeGrid,
    form: SymplecticForm,
    omegas: ReferenceFrequencies,
    v: Vec<DMatrix<C64>>,
    u: Vec<DVector<C64>>,
    max_canonical: f64,
}

impl SolutionRecord {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn form(&self) -> &SymplecticForm {
        &self.form
    }

    pub fn omegas(&self) -> &ReferenceFrequencies {
        &self.omegas
    }

    pub fn n_modes(&self) -> usize {
        self.form.n_modes()
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.grid.time(k)
    }

    pub fn v(&self, k: usize) -> &DMatrix<C64> {
        &self.v[k]
    }

    /// Annihilation-row drift `u^i`, `i < N`.
    pub fn u(&self, k: usize) -> &DVector<C64> {
        &self.u[k]
    }

    /// `φ = i (V_{0..N, N..2N})†`.
    pub fn phi(&self, k: usize) -> DMatrix<C64> {
        let n = self.n_modes();
        self.v[k].view((0, n), (n, n)).adjoint() * I
    }

    /// `π = -i (V_{0..N, 0..N})†`.
    pub fn pi(&self, k: usize) -> DMatrix<C64> {
        let n = self.n_modes();
        self.v[k].view((0, 0), (n, n)).adjoint() * (-I)
    }

    /// `[[φ], [π]]`, the `2N × N` block giving `z = W b + W* b† − …`.
    pub fn w(&self, k: usize) -> DMatrix<C64> {
        let n = self.n_modes();
        let mut w = DMatrix::zeros(2 * n, n);
        w.view_mut((0, 0), (n, n)).copy_from(&self.phi(k));
        w.view_mut((n, 0), (n, n)).copy_from(&self.pi(k));
        w
    }

    pub fn canonical_residual(&self, k: usize) -> f64 {
        canonical_residual(&self.v[k], &self.form)
    }

    pub fn conjugacy_residual(&self, k: usize) -> f64 {
        conjugacy_residual(&self.v[k])
    }

    /// Largest canonical residual seen during integration.
    pub fn max_canonical_residual(&self) -> f64 {
        self.max_canonical
    }

    pub fn max_conjugacy_residual(&self) -> f64 {
        (0..self.len()).map(|k| self.conjugacy_residual(k)).fold(0.0, f64::max)
    }
}

/// Classical phase-space trajectory on a grid.
#[derive(Debug, Clone)]
pub struct ClassicalTrajectory {
    pub grid: TimeGrid,
    pub z: Vec<DVector<f64>>,
}

fn eps_times<T: nalgebra::Scalar + std::ops::Neg<Output = T> + Copy>(a: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows() / 2;
    DMatrix::from_fn(2 * n, a.ncols(), |r, c| if r < n { a[(n + r, c)] } else { -a[(r - n, c)] })
}

/// `2 ε A(t)`, the generator of `ż = M z + ε B`.
pub fn evolution_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    eps_times(a) * 2.0
}

fn eps_vec(b: &DVector<f64>) -> DVector<f64> {
    let n = b.len() / 2;
    DVector::from_fn(2 * n, |r, _| if r < n { b[n + r] } else { -b[r - n] })
}

struct Augmented {
    v: DMatrix<C64>,
    u: DVector<C64>,
}

fn solution_rhs(ham: &HamiltonianSchedule, t: f64, y: &Augmented) -> Augmented {
    let c = ham.at(t);
    let n = ham.n_modes();
    let eps_a = eps_times(&c.a).map(C64::from);
    let eps_b = eps_vec(&c.b).map(C64::from);
    let dv = (&y.v * eps_a) * C64::from(-2.0);
    let du = -(y.v.rows(0, n) * eps_b);
    Augmented { v: dv, u: du }
}

fn rk4<S, F>(t: f64, h: f64, y: &S, f: F, axpy: impl Fn(&S, f64, &S) -> S) -> S
where
    F: Fn(f64, &S) -> S,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2));
    let k4 = f(t + h, &axpy(y, h, &k3));
    let y = axpy(y, h / 6.0, &k1);
    let y = axpy(&y, h / 3.0, &k2);
    let y = axpy(&y, h / 3.0, &k3);
    axpy(&y, h / 6.0, &k4)
}

fn check_domain(ham: &HamiltonianSchedule, grid: &TimeGrid) -> Result<()> {
    let (d0, d1) = ham.domain();
    let slack = 1e-12 * (1.0 + d0.abs().max(d1.abs()));
    if grid.t0() < d0 - slack || grid.t1() > d1 + slack {
        return Err(Error::DomainMismatch { t0: grid.t0(), t1: grid.t1(), d0, d1 });
    }
    Ok(())
}

/// Integrates `V` and `u` jointly with fixed-step classical RK4.
pub fn integrate_solution(
    ham: &HamiltonianSchedule,
    omegas: &ReferenceFrequencies,
    grid: &TimeGrid,
) -> Result<SolutionRecord> {
    integrate_solution_with(ham, omegas, grid, SolverOptions::default())
}

pub fn integrate_solution_with(
    ham: &HamiltonianSchedule,
    omegas: &ReferenceFrequencies,
    grid: &TimeGrid,
    opts: SolverOptions,
) -> Result<SolutionRecord> {
    let n = ham.n_modes();
    if omegas.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: omegas.len() });
    }
    check_domain(ham, grid)?;
    let form = SymplecticForm::new(n)?;
    let h = grid.dt();

    let mut y = Augmented { v: omegas.initial_solution_matrix(), u: DVector::zeros(n) };
    let mut vs = Vec::with_capacity(grid.len());
    let mut us = Vec::with_capacity(grid.len());
    let mut max_canonical = canonical_residual(&y.v, &form);
    vs.push(y.v.clone());
    us.push(y.u.clone());

    let axpy = |y: &Augmented, s: f64, k: &Augmented| Augmented {
        v: &y.v + &k.v * C64::from(s),
        u: &y.u + &k.u * C64::from(s),
    };
    for k in 0..grid.steps() {
        let t = grid.time(k);
        y = rk4(t, h, &y, |t, y| solution_rhs(ham, t, y), axpy);
        let t_next = grid.time(k + 1);
        if !y.v.iter().chain(y.u.iter()).all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite { what: "solution matrix", t: t_next });
        }
        let residual = canonical_residual(&y.v, &form);
        max_canonical = max_canonical.max(residual);
        if residual > opts.abort_residual {
            return Err(Error::CanonicalDrift { t: t_next, residual, limit: opts.abort_residual, dt: h });
        }
        vs.push(y.v.clone());
        us.push(y.u.clone());
    }
    Ok(SolutionRecord { grid: *grid, form, omegas: omegas.clone(), v: vs, u: us, max_canonical })
}

/// Integrates `ż = 2εA z + εB` with the same stepper as [`integrate_solution`].
pub fn integrate_classical(
    ham: &HamiltonianSchedule,
    z0: &DVector<f64>,
    grid: &TimeGrid,
) -> Result<ClassicalTrajectory> {
    let dim = 2 * ham.n_modes();
    if z0.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: z0.len() });
    }
    check_domain(ham, grid)?;
    let h = grid.dt();
    let rhs = |t: f64, z: &DVector<f64>| {
        let c = ham.at(t);
        evolution_matrix(&c.a) * z + eps_vec(&c.b)
    };
    let axpy = |y: &DVector<f64>, s: f64, k: &DVector<f64>| y + k * s;
    let mut z = z0.clone();
    let mut out = Vec::with_capacity(grid.len());
    out.push(z.clone());
    for k in 0..grid.steps() {
        z = rk4(grid.time(k), h, &z, rhs, axpy);
        if !z.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { what: "classical trajectory", t: grid.time(k + 1) });
        }
        out.push(z.clone());
    }
    Ok(ClassicalTrajectory { grid: *grid, z: out })
}
