//! Heisenberg-picture evolution `z(t) = Z(t) z(t0) + d(t)` with
//! `Z = V⁻¹(t) V(t0)` and `d = −V⁻¹(t) [u(t) − u(t0)]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::hamiltonian::HamiltonianSchedule;
use crate::invariant::{fast_inverse, stencil, PrimaryInvariantSet, ResidualParts, Stencil};
use crate::solver::{evolution_matrix, SolutionRecord};
use crate::symplectic::{max_abs, SymplecticForm};
use crate::C64;

/// Imaginary parts of `Z`, `d` above this abort the build.
pub const IMAGINARY_ABORT: f64 = 1e-7;
/// Imaginary parts above this are logged before being stripped.
pub const IMAGINARY_WARN: f64 = 1e-9;

/// Real affine phase-space map per grid point.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: TimeGrid,
    form: SymplecticForm,
    z: Vec<DMatrix<f64>>,
    d: Vec<DVector<f64>>,
    max_imaginary: f64,
}

impl Propagator {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn form(&self) -> &SymplecticForm {
        &self.form
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// `Z(t_k)`.
    pub fn matrix(&self, k: usize) -> &DMatrix<f64> {
        &self.z[k]
    }

    /// `d(t_k)`.
    pub fn drift(&self, k: usize) -> &DVector<f64> {
        &self.d[k]
    }

    /// `Z(t_k) z0 + d(t_k)`.
    pub fn apply(&self, k: usize, z0: &DVector<f64>) -> DVector<f64> {
        &self.z[k] * z0 + &self.d[k]
    }

    /// Largest imaginary part stripped from `Z` or `d`.
    pub fn max_imaginary(&self) -> f64 {
        self.max_imaginary
    }

    /// `‖Z ε Zᵀ − ε‖_max` at grid index `k`.
    pub fn symplectic_residual(&self, k: usize) -> f64 {
        crate::symplectic::symplectic_residual(&self.z[k], &self.form).unwrap_or(f64::INFINITY)
    }

    pub fn max_symplectic_residual(&self) -> f64 {
        (0..self.len()).map(|k| self.symplectic_residual(k)).fold(0.0, f64::max)
    }
}

fn u_full(rec: &SolutionRecord, k: usize) -> DVector<C64> {
    let n = rec.n_modes();
    let u = rec.u(k);
    DVector::from_fn(2 * n, |r, _| if r < n { u[r] } else { u[r - n].conj() })
}

/// Assembles `(Z, d)` at every grid point of `rec`.
pub fn build_propagator(rec: &SolutionRecord) -> Result<Propagator> {
    let v0 = rec.v(0);
    let u0 = u_full(rec, 0);
    let mut zs = Vec::with_capacity(rec.len());
    let mut ds = Vec::with_capacity(rec.len());
    let mut max_imaginary: f64 = 0.0;
    let mut warned = false;
    for k in 0..rec.len() {
        let inv = fast_inverse(rec.v(k), rec.form())?;
        let z = &inv * v0;
        let d = -(&inv * (u_full(rec, k) - &u0));
        let imag = z.iter().chain(d.iter()).map(|x| x.im.abs()).fold(0.0, f64::max);
        let t = rec.time(k);
        if imag > IMAGINARY_ABORT {
            return Err(Error::ImaginaryResidual { t, residual: imag, limit: IMAGINARY_ABORT });
        }
        if imag > IMAGINARY_WARN && !warned {
            log::warn!("propagator imaginary part {imag:.3e} at t = {t}");
            warned = true;
        }
        max_imaginary = max_imaginary.max(imag);
        zs.push(z.map(|x| x.re));
        ds.push(d.map(|x| x.re));
    }
    Ok(Propagator { grid: *rec.grid(), form: rec.form().clone(), z: zs, d: ds, max_imaginary })
}

/// Central-difference residual of `Ż = M Z`, `ḋ = M d + εB` (`M = 2εA`) at
/// grid time `t` with neighbours at `t ± dt` and `t ± 2dt`.
pub fn heisenberg_residual_parts(
    prop: &Propagator,
    ham: &HamiltonianSchedule,
    t: f64,
    dt: f64,
) -> Result<ResidualParts> {
    let Stencil { k, s, w1, w2 } = stencil(&prop.grid, t, dt)?;
    let c = ham.at(prop.grid.time(k));
    let m = evolution_matrix(&c.a);
    let f = prop.form.apply_upper(&c.b);
    let z = &prop.z;
    let dz = (&z[k + s] - &z[k - s]) * w1 - (&z[k + 2 * s] - &z[k - 2 * s]) * w2;
    let homogeneous = max_abs(&(dz - &m * &prop.z[k]));
    let d = &prop.d;
    let dd = (&d[k + s] - &d[k - s]) * w1 - (&d[k + 2 * s] - &d[k - 2 * s]) * w2;
    let drift = (dd - &m * &prop.d[k] - f).amax();
    Ok(ResidualParts { homogeneous, drift })
}

pub fn heisenberg_residual(prop: &Propagator, ham: &HamiltonianSchedule, t: f64, dt: f64) -> Result<f64> {
    heisenberg_residual_parts(prop, ham, t, dt).map(|p| p.total())
}

/// Expansion of `q_i(t)`, `p_i(t)` in terms of `z(t0)`, before adding the
/// hermitian conjugate:
///
/// ```text
/// z^μ(t) = Σ_ν half_z[μ][ν] z^ν(t0) + half_scalar[μ] + h.c.
/// ```
///
/// with `half_z = W(t) V_ann(t0)` and `half_scalar = −W(t)[u(t) − u(t0)]`,
/// `W = [[φ], [π]]`. For `q_i` this reads
/// `−iφ_ij(t)π*_kj(t0) q_k + iφ_ij(t)φ*_kj(t0) p_k − φ_ij(t)[u_j(t) − u_j(t0)]`.
#[derive(Debug, Clone)]
pub struct QpCoefficients {
    pub half_z: DMatrix<C64>,
    pub half_scalar: DVector<C64>,
}

impl QpCoefficients {
    /// Real map obtained by adding the hermitian-conjugate half.
    pub fn fold(&self) -> (DMatrix<f64>, DVector<f64>) {
        (self.half_z.map(|x| 2.0 * x.re), self.half_scalar.map(|x| 2.0 * x.re))
    }
}

/// Coefficients of `q(t)`, `p(t)` in terms of `q(t0)`, `p(t0)` at grid time `t`.
pub fn reconstruct_qp(inv: &PrimaryInvariantSet, t: f64) -> Result<QpCoefficients> {
    let k = inv.grid().index_of(t).ok_or(Error::OutsideGrid { t, dt: 0.0 })?;
    let n = inv.n_modes();
    let w = fast_inverse(inv.v(k), inv.form())?.columns(0, n).into_owned();
    let half_z = &w * inv.v(0).rows(0, n);
    let du = inv.u_full(k).rows(0, n) - inv.u_full(0).rows(0, n);
    let half_scalar = -(&w * du);
    Ok(QpCoefficients { half_z, half_scalar })
}
