//! Linear (primary) invariants `b^μ = V^μ_ν z^ν + u^μ` and the quadratic
//! invariant `I = Σ ω_i (b_i† b_i + 1/2)`.
//!
//! Invariance `∂b/∂t − i[b, H] = 0` is checked on the coefficient
//! representation by central differences, never on operator matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::hamiltonian::HamiltonianSchedule;
use crate::solver::{canonical_residual, conjugacy_residual, evolution_matrix, SolutionRecord};
use crate::symplectic::{max_abs, SymplecticForm};
use crate::C64;

const I: C64 = C64::new(0.0, 1.0);

/// Condition residuals above this are hard errors.
pub const CONDITION_HARD_LIMIT: f64 = 1e-6;
/// Condition residuals above this are logged.
pub const CONDITION_WARN_LIMIT: f64 = 1e-8;
/// Largest imaginary part tolerated in the quadratic-invariant coefficients.
pub const IMAGINARY_LIMIT: f64 = 1e-8;

/// The `2N` linear invariants on a time grid.
#[derive(Debug, Clone)]
pub struct PrimaryInvariantSet {
    grid: TimeGrid,
    form: SymplecticForm,
    omegas: Vec<f64>,
    v: Vec<DMatrix<C64>>,
    u_full: Vec<DVector<C64>>,
    conjugacy: Vec<f64>,
    canonical: Vec<f64>,
}

impl PrimaryInvariantSet {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn form(&self) -> &SymplecticForm {
        &self.form
    }

    pub fn omegas(&self) -> &[f64] {
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

    pub fn v(&self, k: usize) -> &DMatrix<C64> {
        &self.v[k]
    }

    /// `(u^1..u^N, conj(u^1)..conj(u^N))`.
    pub fn u_full(&self, k: usize) -> &DVector<C64> {
        &self.u_full[k]
    }

    /// Condition (i) residual: creation rows equal conjugated annihilation rows.
    pub fn conjugacy_residual(&self, k: usize) -> f64 {
        self.conjugacy[k]
    }

    /// Condition (ii) residual `‖i V ε Vᵀ − ε‖`, i.e. `[b^μ, b^ν] = ε^{μν}`.
    pub fn canonical_residual(&self, k: usize) -> f64 {
        self.canonical[k]
    }

    pub fn max_conjugacy_residual(&self) -> f64 {
        self.conjugacy.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_canonical_residual(&self) -> f64 {
        self.canonical.iter().copied().fold(0.0, f64::max)
    }

    /// Commutator matrix `[b^μ, b^ν] = i V ε Vᵀ` at grid index `k`.
    pub fn commutators(&self, k: usize) -> DMatrix<C64> {
        let eps = self.form.upper_as::<C64>();
        (&self.v[k] * eps * self.v[k].transpose()) * I
    }

    /// Value of `b^μ` at phase-space point `z` (c-number evaluation).
    pub fn evaluate(&self, k: usize, z: &DVector<f64>) -> DVector<C64> {
        &self.v[k] * z.map(C64::from) + &self.u_full[k]
    }
}

/// Packages `(V, u)` with the conjugate drift block and checks conditions
/// (i) and (ii) at every grid point.
pub fn build_primary(rec: &SolutionRecord) -> Result<PrimaryInvariantSet> {
    let n = rec.n_modes();
    let mut v = Vec::with_capacity(rec.len());
    let mut u_full = Vec::with_capacity(rec.len());
    let mut conjugacy = Vec::with_capacity(rec.len());
    let mut canonical = Vec::with_capacity(rec.len());
    let mut warned = false;
    for k in 0..rec.len() {
        let vk = rec.v(k).clone();
        let u = rec.u(k);
        let uf = DVector::from_fn(2 * n, |r, _| if r < n { u[r] } else { u[r - n].conj() });
        let cond_i = conjugacy_residual(&vk);
        let cond_ii = canonical_residual(&vk, rec.form());
        let t = rec.time(k);
        if cond_i > CONDITION_HARD_LIMIT {
            return Err(Error::ConditionViolated { which: "i", t, residual: cond_i });
        }
        if cond_ii > CONDITION_HARD_LIMIT {
            return Err(Error::ConditionViolated { which: "ii", t, residual: cond_ii });
        }
        if !warned && cond_i.max(cond_ii) > CONDITION_WARN_LIMIT {
            log::warn!("invariant conditions drift to {:.3e} at t = {t}", cond_i.max(cond_ii));
            warned = true;
        }
        v.push(vk);
        u_full.push(uf);
        conjugacy.push(cond_i);
        canonical.push(cond_ii);
    }
    Ok(PrimaryInvariantSet {
        grid: *rec.grid(),
        form: rec.form().clone(),
        omegas: rec.omegas().as_slice().to_vec(),
        v,
        u_full,
        conjugacy,
        canonical,
    })
}

/// `V⁻¹ = i ε Vᵀ εᵀ`, valid for canonical `V`; blocks `[[φ, φ*], [π, π*]]`.
pub fn fast_inverse(v: &DMatrix<C64>, form: &SymplecticForm) -> Result<DMatrix<C64>> {
    if v.nrows() != form.dim() || v.ncols() != form.dim() {
        return Err(Error::DimensionMismatch { expected: form.dim(), got: v.nrows().max(v.ncols()) });
    }
    let residual = canonical_residual(v, form);
    if residual > CONDITION_HARD_LIMIT {
        return Err(Error::ConditionViolated { which: "ii", t: f64::NAN, residual });
    }
    let eps = form.upper_as::<C64>();
    Ok((&eps * v.transpose() * eps.transpose()) * I)
}

/// `I = zᵀ G z + gᵀ z + c` on a time grid, with `G` real symmetric.
#[derive(Debug, Clone)]
pub struct QuadraticInvariant {
    grid: TimeGrid,
    omegas: Vec<f64>,
    quadratic: Vec<DMatrix<f64>>,
    linear: Vec<DVector<f64>>,
    constant: Vec<f64>,
    max_imaginary: f64,
}

impl QuadraticInvariant {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.quadratic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quadratic.is_empty()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// `G` at grid index `k`.
    pub fn quadratic(&self, k: usize) -> &DMatrix<f64> {
        &self.quadratic[k]
    }

    /// `g` at grid index `k`.
    pub fn linear(&self, k: usize) -> &DVector<f64> {
        &self.linear[k]
    }

    /// `c` at grid index `k`.
    pub fn constant(&self, k: usize) -> f64 {
        self.constant[k]
    }

    /// Largest imaginary part discarded during assembly.
    pub fn max_imaginary(&self) -> f64 {
        self.max_imaginary
    }

    /// Eigenvalue `Σ ω_i (n_i + 1/2)` of the number state `|n⟩`.
    pub fn eigenvalue(&self, n: &[u32]) -> f64 {
        self.omegas.iter().zip(n).map(|(w, n)| w * (*n as f64 + 0.5)).sum()
    }

    /// c-number value `zᵀ G z + gᵀ z + c`.
    pub fn evaluate(&self, k: usize, z: &DVector<f64>) -> f64 {
        (z.transpose() * &self.quadratic[k] * z)[(0, 0)] + self.linear[k].dot(z) + self.constant[k]
    }

    /// Expectation in a state with symmetrized covariance `cov` and mean `mean`.
    pub fn expectation(&self, k: usize, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
        let g = &self.quadratic[k];
        (g.component_mul(cov)).sum() + self.evaluate(k, mean)
    }
}

/// Expands `Σ ω_i (b_i† b_i + 1/2)` into `(G, g, c)`, taking `b_i†` from the
/// creation rows of `V` and using `z^μ z^ν = sym + (i/2) ε^{μν}`.
pub fn lr_invariant(inv: &PrimaryInvariantSet) -> Result<QuadraticInvariant> {
    let n = inv.n_modes();
    let dim = 2 * n;
    let eps = inv.form.upper();
    let mut quadratic = Vec::with_capacity(inv.len());
    let mut linear = Vec::with_capacity(inv.len());
    let mut constant = Vec::with_capacity(inv.len());
    let mut max_imaginary: f64 = 0.0;
    for k in 0..inv.len() {
        let v = &inv.v[k];
        let u = &inv.u_full[k];
        let mut h = DMatrix::<C64>::zeros(dim, dim);
        let mut lin = DVector::<C64>::zeros(dim);
        let mut c = C64::from(0.0);
        for (i, w) in inv.omegas.iter().enumerate() {
            let ann = v.row(i);
            let cre = v.row(n + i);
            h += cre.transpose() * ann * C64::from(*w);
            lin += (ann.transpose() * u[n + i] + cre.transpose() * u[i]) * C64::from(*w);
            c += (u[n + i] * u[i] + 0.5) * *w;
        }
        let g = (&h + h.transpose()) * C64::from(0.5);
        for mu in 0..dim {
            for nu in 0..dim {
                c += h[(mu, nu)] * (I * 0.5 * eps[(mu, nu)]);
            }
        }
        let imag = g
            .iter()
            .chain(lin.iter())
            .map(|z| z.im.abs())
            .fold(c.im.abs(), f64::max);
        if imag > IMAGINARY_LIMIT {
            return Err(Error::ImaginaryResidual { t: inv.grid.time(k), residual: imag, limit: IMAGINARY_LIMIT });
        }
        max_imaginary = max_imaginary.max(imag);
        quadratic.push(g.map(|z| z.re));
        linear.push(lin.map(|z| z.re));
        constant.push(c.re);
    }
    Ok(QuadraticInvariant {
        grid: inv.grid,
        omegas: inv.omegas.clone(),
        quadratic,
        linear,
        constant,
        max_imaginary,
    })
}

/// Central-difference residual split by coefficient group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualParts {
    /// Homogeneous part (`V` or `G`).
    pub homogeneous: f64,
    /// Drift part (`u`, or `g` and `c`).
    pub drift: f64,
}

impl ResidualParts {
    pub fn total(&self) -> f64 {
        self.homogeneous + self.drift
    }
}

/// Fourth-order central difference at grid index `k` with stride `s`:
/// `f'(t_k) ≈ w1 (f[k+s] − f[k−s]) − w2 (f[k+2s] − f[k−2s])`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    pub k: usize,
    pub s: usize,
    pub w1: f64,
    pub w2: f64,
}

/// Stencil at grid time `t` with spacing `dt`, which must be a multiple of
/// the grid step; all four neighbours must lie on the grid.
pub(crate) fn stencil(grid: &TimeGrid, t: f64, dt: f64) -> Result<Stencil> {
    let outside = || Error::OutsideGrid { t, dt };
    let k = grid.index_of(t).ok_or_else(outside)?;
    let stride = (dt / grid.dt()).round();
    if !(stride >= 1.0) || ((stride * grid.dt() - dt).abs() > 1e-6 * dt) {
        return Err(outside());
    }
    let s = stride as usize;
    if k < 2 * s || k + 2 * s > grid.steps() {
        return Err(outside());
    }
    let h = s as f64 * grid.dt();
    Ok(Stencil { k, s, w1: 8.0 / (12.0 * h), w2: 1.0 / (12.0 * h) })
}

fn eps_b(b: &DVector<f64>) -> DVector<C64> {
    let n = b.len() / 2;
    DVector::from_fn(2 * n, |r, _| C64::from(if r < n { b[n + r] } else { -b[r - n] }))
}

/// Residual of `V̇ + 2VεA = 0` and `u̇ + VεB = 0` at grid time `t`, using
/// neighbours at `t ± dt` and `t ± 2dt`.
pub fn invariant_residual_parts(
    inv: &PrimaryInvariantSet,
    ham: &HamiltonianSchedule,
    t: f64,
    dt: f64,
) -> Result<ResidualParts> {
    let Stencil { k, s, w1, w2 } = stencil(&inv.grid, t, dt)?;
    let (w1, w2) = (C64::from(w1), C64::from(w2));
    let tk = inv.grid.time(k);
    let c = ham.at(tk);
    let m = evolution_matrix(&c.a).map(C64::from);
    let v = &inv.v[k];
    let dv = (&inv.v[k + s] - &inv.v[k - s]) * w1 - (&inv.v[k + 2 * s] - &inv.v[k - 2 * s]) * w2;
    // -2VεA = -V·M
    let homogeneous = max_abs(&(dv + v * m));
    let du = (&inv.u_full[k + s] - &inv.u_full[k - s]) * w1 - (&inv.u_full[k + 2 * s] - &inv.u_full[k - 2 * s]) * w2;
    let drift = (du + v * eps_b(&c.b)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(ResidualParts { homogeneous, drift })
}

/// Sum of the two parts of [`invariant_residual_parts`].
pub fn invariant_residual(inv: &PrimaryInvariantSet, ham: &HamiltonianSchedule, t: f64, dt: f64) -> Result<f64> {
    invariant_residual_parts(inv, ham, t, dt).map(|p| p.total())
}

/// Residual of `Ġ + MᵀG + GM = 0`, `ġ + Mᵀg + 2GεB = 0`, `ċ + g·εB = 0`
/// (`M = 2εA`) at grid time `t`.
pub fn quadratic_residual(
    qi: &QuadraticInvariant,
    ham: &HamiltonianSchedule,
    t: f64,
    dt: f64,
) -> Result<ResidualParts> {
    let Stencil { k, s, w1, w2 } = stencil(&qi.grid, t, dt)?;
    let c = ham.at(qi.grid.time(k));
    let m = evolution_matrix(&c.a);
    let f = eps_b(&c.b).map(|z| z.re);
    let g = &qi.quadratic[k];
    let q = &qi.quadratic;
    let dg = (&q[k + s] - &q[k - s]) * w1 - (&q[k + 2 * s] - &q[k - 2 * s]) * w2;
    let homogeneous = max_abs(&(dg + m.transpose() * g + g * &m));
    let l = &qi.linear;
    let dl = (&l[k + s] - &l[k - s]) * w1 - (&l[k + 2 * s] - &l[k - 2 * s]) * w2;
    let lin = (dl + m.transpose() * &qi.linear[k] + g * &f * 2.0).amax();
    let c0 = &qi.constant;
    let dc = (c0[k + s] - c0[k - s]) * w1 - (c0[k + 2 * s] - c0[k - 2 * s]) * w2;
    let cst = (dc + qi.linear[k].dot(&f)).abs();
    Ok(ResidualParts { homogeneous, drift: lin.max(cst) })
}
