//! Brute-force Schrödinger-picture reference solver in a truncated Fock space.
//!
//! Positions and momenta are built from truncated ladder operators of the
//! reference oscillators, `H(t)` is assembled from the same coefficients as
//! the invariant method, and the state is advanced with the exponential
//! midpoint rule `ψ ← exp(−i H(t + h/2) h) ψ`. The exponential is applied to
//! the state by a substepped Taylor series on the sparse `H`.
//!
//! Nothing here shares code with the solution-matrix path beyond the
//! Hamiltonian schedule and the result types.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::hamiltonian::{Coefficients, HamiltonianSchedule};
use crate::moments::{MomentReport, MomentSample, StateSpec};
use crate::C64;

/// Largest total Hilbert-space dimension `K^N`.
pub const MAX_DIMENSION: usize = 4096;
/// Minimum cutoff headroom above the highest occupied level.
pub const CUTOFF_MARGIN: usize = 10;
/// Extra levels used for the truncation-sensitivity rerun.
pub const CUTOFF_PROBE: usize = 10;
/// Default cutoff-sensitivity limit: a tenth of the 1e-4 agreement target.
pub const DEFAULT_CERTIFY_TOL: f64 = 1e-5;
/// Largest discarded coherent-state weight.
pub const COHERENT_TAIL_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockConfig {
    /// Levels per mode.
    pub cutoff: usize,
    /// Upper bound on the midpoint-exponential step.
    pub dt_oracle: f64,
    /// Largest moment change between cutoff `K` and `K + 10` that is still certified.
    pub certify_tol: f64,
}

impl FockConfig {
    pub fn new(cutoff: usize, dt_oracle: f64) -> Self {
        Self { cutoff, dt_oracle, certify_tol: DEFAULT_CERTIFY_TOL }
    }
}

/// Oracle moments plus diagnostics.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub report: MomentReport,
    /// Max moment change when the cutoff is raised by [`CUTOFF_PROBE`].
    pub truncation_estimate: f64,
    /// Max `|‖ψ‖ − 1|` over the run.
    pub norm_drift: f64,
}

/// Compressed sparse rows.
#[derive(Debug, Clone)]
pub(crate) struct Sparse {
    n: usize,
    indptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<C64>,
}

impl Sparse {
    fn from_triplets(n: usize, mut t: Vec<(usize, usize, C64)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; n + 1];
        let mut idx = Vec::with_capacity(t.len());
        let mut val: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *val.last_mut().unwrap() += v;
                continue;
            }
            idx.push(c);
            val.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        Self { n, indptr, idx, val }
    }

    fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, C64::from(1.0))).collect())
    }

    fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n).flat_map(move |r| (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.idx[k], self.val[k])))
    }

    fn scale(&self, s: C64) -> Self {
        Self { val: self.val.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    fn add(&self, other: &Sparse) -> Self {
        Self::from_triplets(self.n, self.triplets().chain(other.triplets()).collect())
    }

    fn kron(&self, other: &Sparse) -> Self {
        let n = self.n * other.n;
        let t = self
            .triplets()
            .flat_map(|(r1, c1, v1)| other.triplets().map(move |(r2, c2, v2)| (r1 * other.n + r2, c1 * other.n + c2, v1 * v2)))
            .collect();
        Self::from_triplets(n, t)
    }

    fn mul(&self, other: &Sparse) -> Self {
        let mut t = Vec::new();
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let (m, a) = (self.idx[k], self.val[k]);
                for j in other.indptr[m]..other.indptr[m + 1] {
                    t.push((r, other.idx[j], a * other.val[j]));
                }
            }
        }
        Self::from_triplets(self.n, t)
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = C64::from(0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.val[k] * x[self.idx[k]];
            }
            *out = acc;
        }
    }

    fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|r| self.val[self.indptr[r]..self.indptr[r + 1]].iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    #[cfg(test)]
    fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }
}

/// Truncated annihilation operator on `k` levels.
fn annihilation(k: usize) -> Sparse {
    Sparse::from_triplets(k, (1..k).map(|m| (m - 1, m, C64::from((m as f64).sqrt()))).collect())
}

fn creation(k: usize) -> Sparse {
    Sparse::from_triplets(k, (1..k).map(|m| (m, m - 1, C64::from((m as f64).sqrt()))).collect())
}

/// Phase-space operators `z^μ` and the operator basis of `H`.
struct FockSpace {
    n_modes: usize,
    cutoff: usize,
    dim: usize,
    z: Vec<Sparse>,
    /// `(μ, ν, op)` with `op = z^μ z^ν + z^ν z^μ` for `μ < ν`, `(z^μ)²` for `μ = ν`.
    quadratic: Vec<(usize, usize, Sparse)>,
    pattern: Sparse,
    /// Positions of each term's entries inside `pattern`: quadratic, linear, identity.
    slots: Vec<Vec<(usize, C64)>>,
}

impl FockSpace {
    fn new(omegas: &[f64], cutoff: usize) -> Self {
        let n_modes = omegas.len();
        let dim = cutoff.pow(n_modes as u32);
        let eye = Sparse::identity(cutoff);
        let embed = |op: &Sparse, mode: usize| -> Sparse {
            let mut m = if mode == 0 { op.clone() } else { eye.clone() };
            for j in 1..n_modes {
                m = m.kron(if j == mode { op } else { &eye });
            }
            m
        };
        let (a, ad) = (annihilation(cutoff), creation(cutoff));
        let mut qs = Vec::new();
        let mut ps = Vec::new();
        for (i, w) in omegas.iter().enumerate() {
            let ai = embed(&a, i);
            let adi = embed(&ad, i);
            qs.push(ai.add(&adi).scale(C64::from(1.0 / (2.0 * w).sqrt())));
            ps.push(ai.add(&adi.scale(C64::from(-1.0))).scale(C64::new(0.0, -(w / 2.0).sqrt())));
        }
        let z: Vec<Sparse> = qs.into_iter().chain(ps).collect();
        let mut quadratic = Vec::new();
        for mu in 0..z.len() {
            for nu in mu..z.len() {
                let op = if mu == nu { z[mu].mul(&z[mu]) } else { z[mu].mul(&z[nu]).add(&z[nu].mul(&z[mu])) };
                quadratic.push((mu, nu, op));
            }
        }
        let identity = Sparse::identity(dim);
        let terms: Vec<&Sparse> = quadratic.iter().map(|(_, _, op)| op).chain(z.iter()).chain([&identity]).collect();
        let all = terms.iter().flat_map(|t| t.triplets().map(|(r, c, _)| (r, c, C64::from(0.0)))).collect();
        let pattern = Sparse::from_triplets(dim, all);
        let slots = terms
            .iter()
            .map(|t| {
                t.triplets()
                    .map(|(r, c, v)| {
                        let row = &pattern.idx[pattern.indptr[r]..pattern.indptr[r + 1]];
                        (pattern.indptr[r] + row.binary_search(&c).unwrap(), v)
                    })
                    .collect()
            })
            .collect();
        Self { n_modes, cutoff, dim, z, quadratic, pattern, slots }
    }

    fn hamiltonian(&self, c: &Coefficients) -> Sparse {
        let mut weights: Vec<f64> = self.quadratic.iter().map(|(mu, nu, _)| c.a[(*mu, *nu)]).collect();
        weights.extend(c.b.iter().copied());
        weights.push(c.c);
        let mut h = self.pattern.clone();
        h.val.iter_mut().for_each(|v| *v = C64::from(0.0));
        for (w, slot) in weights.iter().zip(&self.slots) {
            if *w == 0.0 {
                continue;
            }
            for (pos, v) in slot {
                h.val[*pos] += v * *w;
            }
        }
        h
    }

    fn initial_state(&self, state: &StateSpec) -> Result<Vec<C64>> {
        let k = self.cutoff;
        let per_mode: Vec<Vec<C64>> = match state {
            StateSpec::Number(n) => n
                .iter()
                .map(|&m| {
                    let mut v = vec![C64::from(0.0); k];
                    v[m as usize] = C64::from(1.0);
                    v
                })
                .collect(),
            StateSpec::Coherent(alpha) => alpha
                .iter()
                .map(|a| {
                    let mut v = Vec::with_capacity(k);
                    let mut c = C64::from((-a.norm_sqr() / 2.0).exp());
                    for m in 0..k {
                        v.push(c);
                        c = c * a / ((m + 1) as f64).sqrt();
                    }
                    let kept: f64 = v.iter().map(|x| x.norm_sqr()).sum();
                    let tail = 1.0 - kept;
                    if tail > COHERENT_TAIL_LIMIT {
                        return Err(Error::CoherentTail { tail, cutoff: k });
                    }
                    Ok(v)
                })
                .collect::<Result<_>>()?,
        };
        let mut psi = vec![C64::from(1.0)];
        for mode in per_mode {
            psi = psi.iter().flat_map(|x| mode.iter().map(move |y| x * y)).collect();
        }
        debug_assert_eq!(psi.len(), self.dim);
        Ok(psi)
    }

    fn moments(&self, t: f64, psi: &[C64]) -> MomentSample {
        let dim2 = self.z.len();
        let n = self.n_modes;
        let applied: Vec<Vec<C64>> = self
            .z
            .iter()
            .map(|op| {
                let mut y = vec![C64::from(0.0); self.dim];
                op.apply(psi, &mut y);
                y
            })
            .collect();
        let inner = |x: &[C64], y: &[C64]| x.iter().zip(y).map(|(a, b)| a.conj() * b).sum::<C64>();
        let mean = DVector::from_fn(dim2, |mu, _| inner(psi, &applied[mu]).re);
        let mut cov = DMatrix::from_fn(dim2, dim2, |mu, nu| inner(&applied[mu], &applied[nu]).re - mean[mu] * mean[nu]);
        cov = (&cov + cov.transpose()) * 0.5;
        let var_q = DVector::from_fn(n, |i, _| cov[(i, i)]);
        let var_p = DVector::from_fn(n, |i, _| cov[(n + i, n + i)]);
        MomentSample {
            t,
            mean_q: mean.rows(0, n).into_owned(),
            mean_p: mean.rows(n, n).into_owned(),
            uncertainty_products: var_q.zip_map(&var_p, |a, b| (a * b).sqrt()),
            var_q,
            var_p,
            cov,
        }
    }
}

/// `ψ ← exp(−i H h) ψ` by Taylor series, substepped so that `‖H‖ h / m ≤ 1`.
fn propagate(h: &Sparse, step: f64, psi: &mut [C64], scratch: &mut [C64]) {
    let norm = h.norm_inf() * step;
    let m = norm.ceil().max(1.0) as usize;
    let tau = step / m as f64;
    let factor = C64::new(0.0, -tau);
    let mut term = vec![C64::from(0.0); psi.len()];
    for _ in 0..m {
        term.copy_from_slice(psi);
        let scale = psi.iter().map(|x| x.norm()).fold(0.0, f64::max);
        for k in 1..80 {
            h.apply(&term, scratch);
            let c = factor / k as f64;
            let mut biggest: f64 = 0.0;
            for (t, s) in term.iter_mut().zip(scratch.iter()) {
                *t = s * c;
                biggest = biggest.max(t.norm());
            }
            for (p, t) in psi.iter_mut().zip(&term) {
                *p += t;
            }
            if biggest <= 1e-17 * scale {
                break;
            }
        }
    }
}

fn run_once(
    ham: &HamiltonianSchedule,
    state: &StateSpec,
    omegas: &[f64],
    cutoff: usize,
    dt_oracle: f64,
    grid: &TimeGrid,
) -> Result<(MomentReport, f64)> {
    let space = FockSpace::new(omegas, cutoff);
    let mut psi = space.initial_state(state)?;
    let mut scratch = vec![C64::from(0.0); space.dim];
    let interval = grid.dt();
    let sub = ((interval / dt_oracle) - 1e-9).ceil().max(1.0) as usize;
    let h = interval / sub as f64;

    let mut cached: Option<(Coefficients, Sparse)> = None;
    let mut samples = Vec::with_capacity(grid.len());
    let mut drift: f64 = 0.0;
    samples.push(space.moments(grid.time(0), &psi));
    for k in 0..grid.steps() {
        let t0 = grid.time(k);
        for j in 0..sub {
            let c = ham.at(t0 + (j as f64 + 0.5) * h);
            let op = match &cached {
                Some((cc, op)) if *cc == c => op,
                _ => {
                    let op = space.hamiltonian(&c);
                    cached = Some((c, op));
                    &cached.as_ref().unwrap().1
                }
            };
            propagate(op, h, &mut psi, &mut scratch);
        }
        let norm = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        drift = drift.max((norm - 1.0).abs());
        samples.push(space.moments(grid.time(k + 1), &psi));
    }
    Ok((MomentReport { n_modes: omegas.len(), samples }, drift))
}

/// Moments of `state` under `ham` by direct Schrödinger evolution, reported
/// on `grid`. The run is repeated with `cutoff + 10` levels; a moment change
/// above `cfg.certify_tol` is an error.
pub fn oracle_moments(
    ham: &HamiltonianSchedule,
    state: &StateSpec,
    omegas: &[f64],
    cfg: &FockConfig,
    grid: &TimeGrid,
) -> Result<OracleRun> {
    let n = ham.n_modes();
    if !(1..=2).contains(&n) {
        return Err(Error::OracleUnsupported(format!("only 1 or 2 modes are supported, got {n}")));
    }
    if omegas.len() != n || state.n_modes() != n {
        return Err(Error::DimensionMismatch { expected: n, got: omegas.len().min(state.n_modes()) });
    }
    let dim = cfg.cutoff.checked_pow(n as u32).unwrap_or(usize::MAX);
    if dim > MAX_DIMENSION {
        return Err(Error::OracleUnsupported(format!("dimension {dim} exceeds {MAX_DIMENSION}")));
    }
    if let StateSpec::Number(occ) = state {
        let top = occ.iter().copied().max().unwrap_or(0) as usize;
        if cfg.cutoff < top + CUTOFF_MARGIN {
            return Err(Error::OracleUnsupported(format!(
                "cutoff {} must exceed the highest occupation {top} by at least {CUTOFF_MARGIN}",
                cfg.cutoff
            )));
        }
    }
    if !(cfg.dt_oracle > 0.0) || !cfg.dt_oracle.is_finite() {
        return Err(Error::InvalidStep(cfg.dt_oracle));
    }
    let (d0, d1) = ham.domain();
    if grid.t0() < d0 || grid.t1() > d1 {
        return Err(Error::DomainMismatch { t0: grid.t0(), t1: grid.t1(), d0, d1 });
    }

    let (report, drift) = run_once(ham, state, omegas, cfg.cutoff, cfg.dt_oracle, grid)?;
    let (probe, probe_drift) = run_once(ham, state, omegas, cfg.cutoff + CUTOFF_PROBE, cfg.dt_oracle, grid)?;
    let truncation_estimate = report.max_deviation(&probe);
    if truncation_estimate > cfg.certify_tol {
        return Err(Error::OracleNotCertified { deviation: truncation_estimate, tol: cfg.certify_tol });
    }
    Ok(OracleRun { report, truncation_estimate, norm_drift: drift.max(probe_drift) })
}
