//! First and second moments of number and coherent states of the invariant.
//!
//! With `z = W b + W* b† − 2Re(W u)` and `W = [[φ], [π]]`:
//!
//! ```text
//! number  |n⟩:  (Δq_i)² = Σ_j (2n_j + 1)|φ_ij|²,   ⟨z⟩ = −2 Re(W u)
//! coherent|α⟩:  (Δq_i)² = Σ_j |φ_ij|²,             ⟨z⟩ =  2 Re(W (α − u))
//! ```
//!
//! and analogously for `p` with `π`. The full symmetrized covariance
//! `Re(W D W†)`, `D = diag(2n_j + 1)` (or the identity for coherent states),
//! extends the diagonal formulas to cross terms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::solver::SolutionRecord;
use crate::C64;

/// Occupations of an invariant eigenstate, or amplitudes of a coherent state.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Number(Vec<u32>),
    Coherent(Vec<C64>),
}

impl StateSpec {
    pub fn number(n: &[i64]) -> Result<Self> {
        n.iter()
            .map(|&x| u32::try_from(x).map_err(|_| Error::NegativeOccupation(x)))
            .collect::<Result<Vec<_>>>()
            .map(StateSpec::Number)
    }

    pub fn coherent(alpha: Vec<C64>) -> Result<Self> {
        if alpha.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidParameter { name: "alpha".into(), reason: "amplitudes must be finite".into() });
        }
        Ok(StateSpec::Coherent(alpha))
    }

    pub fn n_modes(&self) -> usize {
        match self {
            StateSpec::Number(n) => n.len(),
            StateSpec::Coherent(a) => a.len(),
        }
    }
}

/// Moments at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSample {
    pub t: f64,
    pub mean_q: DVector<f64>,
    pub mean_p: DVector<f64>,
    pub var_q: DVector<f64>,
    pub var_p: DVector<f64>,
    /// Symmetrized covariance `⟨{Δz^μ, Δz^ν}⟩/2`.
    pub cov: DMatrix<f64>,
    /// `Δq_i Δp_i`.
    pub uncertainty_products: DVector<f64>,
}

impl MomentSample {
    /// `(⟨q⟩, ⟨p⟩)` as one phase-space vector.
    pub fn mean(&self) -> DVector<f64> {
        let n = self.mean_q.len();
        DVector::from_fn(2 * n, |r, _| if r < n { self.mean_q[r] } else { self.mean_p[r - n] })
    }

    /// Smallest eigenvalue of `cov`.
    pub fn min_cov_eigenvalue(&self) -> f64 {
        self.cov.clone().symmetric_eigen().eigenvalues.min()
    }

    /// `det(cov + iε/2)`, nonnegative for physical states.
    pub fn robertson_schrodinger(&self) -> f64 {
        let n = self.mean_q.len();
        let mut m = self.cov.map(C64::from);
        for i in 0..n {
            m[(i, n + i)] += C64::new(0.0, 0.5);
            m[(n + i, i)] -= C64::new(0.0, 0.5);
        }
        m.determinant().re
    }
}

/// Moment time series over a solution grid.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub n_modes: usize,
    pub samples: Vec<MomentSample>,
}

impl MomentReport {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// Every `stride`-th sample, matching [`TimeGrid::subsample`](crate::TimeGrid::subsample).
    pub fn subsample(&self, stride: usize) -> Self {
        let samples = self.samples.iter().step_by(stride.max(1)).cloned().collect();
        Self { n_modes: self.n_modes, samples }
    }

    /// Largest absolute difference in means and variances against `other`,
    /// sample by sample.
    pub fn max_deviation(&self, other: &MomentReport) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| {
                [
                    (&a.mean_q - &b.mean_q).amax(),
                    (&a.mean_p - &b.mean_p).amax(),
                    (&a.var_q - &b.var_q).amax(),
                    (&a.var_p - &b.var_p).amax(),
                ]
                .into_iter()
                .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

fn sample(rec: &SolutionRecord, k: usize, weights: &[f64], shift: &DVector<C64>) -> MomentSample {
    let n = rec.n_modes();
    let w = rec.w(k);
    let mean = (&w * shift).map(|z| 2.0 * z.re);
    let var = DVector::from_fn(2 * n, |mu, _| {
        (0..n).map(|j| weights[j] * w[(mu, j)].norm_sqr()).sum::<f64>()
    });
    let d = DMatrix::from_diagonal(&DVector::from_iterator(n, weights.iter().map(|x| C64::from(*x))));
    let mut cov = (&w * d * w.adjoint()).map(|z| z.re);
    for mu in 0..2 * n {
        cov[(mu, mu)] = var[mu];
        for nu in 0..mu {
            let s = 0.5 * (cov[(mu, nu)] + cov[(nu, mu)]);
            cov[(mu, nu)] = s;
            cov[(nu, mu)] = s;
        }
    }
    let var_q = var.rows(0, n).into_owned();
    let var_p = var.rows(n, n).into_owned();
    let uncertainty_products = var_q.zip_map(&var_p, |a, b| (a * b).sqrt());
    MomentSample {
        t: rec.time(k),
        mean_q: mean.rows(0, n).into_owned(),
        mean_p: mean.rows(n, n).into_owned(),
        var_q,
        var_p,
        cov,
        uncertainty_products,
    }
}

fn check_modes(rec: &SolutionRecord, got: usize) -> Result<()> {
    if rec.n_modes() != got {
        return Err(Error::DimensionMismatch { expected: rec.n_modes(), got });
    }
    Ok(())
}

/// Moments of the invariant eigenstate `|n⟩`.
pub fn number_state_moments(rec: &SolutionRecord, n: &[u32]) -> Result<MomentReport> {
    check_modes(rec, n.len())?;
    let weights: Vec<f64> = n.iter().map(|&x| 2.0 * x as f64 + 1.0).collect();
    let samples = (0..rec.len())
        .map(|k| sample(rec, k, &weights, &(-rec.u(k))))
        .collect();
    Ok(MomentReport { n_modes: rec.n_modes(), samples })
}

/// Moments of the coherent state `b_i|α⟩ = α_i|α⟩`.
pub fn coherent_state_moments(rec: &SolutionRecord, alpha: &[C64]) -> Result<MomentReport> {
    check_modes(rec, alpha.len())?;
    let weights = vec![1.0; alpha.len()];
    let alpha = DVector::from_column_slice(alpha);
    let samples = (0..rec.len())
        .map(|k| sample(rec, k, &weights, &(&alpha - rec.u(k))))
        .collect();
    Ok(MomentReport { n_modes: rec.n_modes(), samples })
}

pub fn state_moments(rec: &SolutionRecord, state: &StateSpec) -> Result<MomentReport> {
    match state {
        StateSpec::Number(n) => number_state_moments(rec, n),
        StateSpec::Coherent(a) => coherent_state_moments(rec, a),
    }
}

/// `√(var_q_i var_p_i)` per sample.
pub fn uncertainty_products(report: &MomentReport) -> Vec<DVector<f64>> {
    report
        .samples
        .iter()
        .map(|s| s.var_q.zip_map(&s.var_p, |a, b| (a * b).sqrt()))
        .collect()
}

/// Phase-space point of the coherent amplitudes at `t0`:
/// `q_i = (α_i + α_i*)/√(2ω_i)`, `p_i = −i√(ω_i/2)(α_i − α_i*)`.
pub fn coherent_to_phase_space(alpha: &[C64], omegas: &[f64]) -> Result<DVector<f64>> {
    if alpha.len() != omegas.len() {
        return Err(Error::DimensionMismatch { expected: omegas.len(), got: alpha.len() });
    }
    let n = alpha.len();
    Ok(DVector::from_fn(2 * n, |r, _| {
        if r < n {
            2.0 * alpha[r].re / (2.0 * omegas[r]).sqrt()
        } else {
            (2.0 * omegas[r - n]).sqrt() * alpha[r - n].im
        }
    }))
}
