//! Coefficient schedules for `H(t) = A_{μν}(t) z^μ z^ν + B_μ(t) z^μ + C(t)`.
//!
//! `A` is real symmetric `2N × 2N`, `B` a real `2N`-vector and `C` a real
//! scalar. `C` only contributes a global phase; it is carried for reporting
//! and for the Fock oracle but never enters the invariant dynamics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

/// Asymmetry above this is rejected instead of symmetrized.
pub const SYMMETRY_HARD_LIMIT: f64 = 1e-6;

/// Coefficients of `H` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
}

impl Coefficients {
    pub fn zeros(n_modes: usize) -> Self {
        Self {
            a: DMatrix::zeros(2 * n_modes, 2 * n_modes),
            b: DVector::zeros(2 * n_modes),
            c: 0.0,
        }
    }

    pub fn symmetry_residual(&self) -> f64 {
        asymmetry(&self.a)
    }

    fn is_finite(&self) -> bool {
        self.a.iter().all(|x| x.is_finite()) && self.b.iter().all(|x| x.is_finite()) && self.c.is_finite()
    }

    fn check(&self, n_modes: usize, t: f64) -> Result<()> {
        let dim = 2 * n_modes;
        if self.a.nrows() != dim || self.a.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: self.a.nrows().max(self.a.ncols()) });
        }
        if self.b.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: self.b.len() });
        }
        if !self.is_finite() {
            return Err(Error::NonFinite { what: "Hamiltonian coefficient", t });
        }
        Ok(())
    }
}

fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut r: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            r = r.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    r
}

/// Replaces `a` by `(a + aᵀ)/2`, warning on any correction and failing above
/// [`SYMMETRY_HARD_LIMIT`].
fn symmetrize(a: &mut DMatrix<f64>, t: f64) -> Result<()> {
    let residual = asymmetry(a);
    if residual == 0.0 {
        return Ok(());
    }
    if residual > SYMMETRY_HARD_LIMIT {
        return Err(Error::AsymmetricA { t, residual });
    }
    log::warn!("symmetrizing A at t = {t} (asymmetry {residual:.3e})");
    let s = (&*a + a.transpose()) * 0.5;
    *a = s;
    Ok(())
}

/// Tabulated coefficients, linearly interpolated between samples and held
/// constant outside the sampled range.
#[derive(Debug, Clone)]
pub struct SampledTable {
    times: Vec<f64>,
    samples: Vec<Coefficients>,
}

impl SampledTable {
    pub fn new(n_modes: usize, times: Vec<f64>, mut samples: Vec<Coefficients>) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::ZeroModes);
        }
        if times.is_empty() || times.len() != samples.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: samples.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "times".into(),
                reason: "sample times must be finite and strictly increasing".into(),
            });
        }
        for (t, s) in times.iter().zip(samples.iter_mut()) {
            s.check(n_modes, *t)?;
            symmetrize(&mut s.a, *t)?;
        }
        Ok(Self { times, samples })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn at(&self, t: f64) -> Coefficients {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.samples[0].clone();
        }
        if k == self.times.len() {
            return self.samples[k - 1].clone();
        }
        let (ta, tb) = (self.times[k - 1], self.times[k]);
        let w = (t - ta) / (tb - ta);
        let (lo, hi) = (&self.samples[k - 1], &self.samples[k]);
        Coefficients {
            a: &lo.a * (1.0 - w) + &hi.a * w,
            b: &lo.b * (1.0 - w) + &hi.b * w,
            c: lo.c * (1.0 - w) + hi.c * w,
        }
    }
}

type CoefficientFn = dyn Fn(f64) -> Coefficients + Send + Sync;

#[derive(Clone)]
enum Source {
    Analytic(Arc<CoefficientFn>),
    Sampled(Arc<SampledTable>),
}

/// Time-dependent Hamiltonian on a closed interval `[t0, t1]`.
///
/// Evaluation is pure: equal `t` gives bitwise-equal coefficients.
#[derive(Clone)]
pub struct HamiltonianSchedule {
    n_modes: usize,
    t0: f64,
    t1: f64,
    source: Source,
    reference_omegas: Option<Vec<f64>>,
    label: String,
}

impl fmt::Debug for HamiltonianSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSchedule")
            .field("label", &self.label)
            .field("n_modes", &self.n_modes)
            .field("domain", &(self.t0, self.t1))
            .field("sampled", &self.is_sampled())
            .finish()
    }
}

fn check_interval(t0: f64, t1: f64) -> Result<()> {
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidInterval { t0, t1 });
    }
    Ok(())
}

impl HamiltonianSchedule {
    /// Wraps a coefficient closure. The closure must return a symmetric `A`;
    /// it is checked at `t0`.
    pub fn analytic<F>(n_modes: usize, t0: f64, t1: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Coefficients + Send + Sync + 'static,
    {
        if n_modes == 0 {
            return Err(Error::ZeroModes);
        }
        check_interval(t0, t1)?;
        let c0 = f(t0);
        c0.check(n_modes, t0)?;
        let residual = c0.symmetry_residual();
        if residual > 1e-12 {
            return Err(Error::AsymmetricA { t: t0, residual });
        }
        Ok(Self {
            n_modes,
            t0,
            t1,
            source: Source::Analytic(Arc::new(f)),
            reference_omegas: None,
            label: "analytic".into(),
        })
    }

    /// Time-independent coefficients. `A` is symmetrized if needed.
    pub fn constant(n_modes: usize, t0: f64, t1: f64, mut coeffs: Coefficients) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::ZeroModes);
        }
        coeffs.check(n_modes, t0)?;
        symmetrize(&mut coeffs.a, t0)?;
        Self::analytic(n_modes, t0, t1, move |_| coeffs.clone()).map(|s| s.with_label("constant"))
    }

    pub fn sampled(n_modes: usize, t0: f64, t1: f64, table: SampledTable) -> Result<Self> {
        check_interval(t0, t1)?;
        if table.samples[0].a.nrows() != 2 * n_modes {
            return Err(Error::DimensionMismatch { expected: 2 * n_modes, got: table.samples[0].a.nrows() });
        }
        Ok(Self {
            n_modes,
            t0,
            t1,
            source: Source::Sampled(Arc::new(table)),
            reference_omegas: None,
            label: "sampled".into(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Records the natural reference frequencies of the model (used as the
    /// default `ω_i` by the solver).
    pub fn with_reference_omegas(mut self, omegas: Vec<f64>) -> Self {
        self.reference_omegas = Some(omegas);
        self
    }

    /// Same coefficients on a different interval.
    pub fn with_domain(mut self, t0: f64, t1: f64) -> Result<Self> {
        check_interval(t0, t1)?;
        self.t0 = t0;
        self.t1 = t1;
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.source, Source::Sampled(_))
    }

    /// Sample times of a tabulated schedule, where the interpolant has kinks.
    pub fn sample_times(&self) -> Option<&[f64]> {
        match &self.source {
            Source::Sampled(table) => Some(table.times()),
            Source::Analytic(_) => None,
        }
    }

    pub fn at(&self, t: f64) -> Coefficients {
        match &self.source {
            Source::Analytic(f) => f(t),
            Source::Sampled(table) => table.at(t),
        }
    }

    pub fn a(&self, t: f64) -> DMatrix<f64> {
        self.at(t).a
    }

    pub fn b(&self, t: f64) -> DVector<f64> {
        self.at(t).b
    }

    pub fn c(&self, t: f64) -> f64 {
        self.at(t).c
    }

    /// Largest `|A_{μν} - A_{νμ}|` over `samples` evenly spaced points.
    pub fn max_symmetry_residual(&self, samples: usize) -> f64 {
        let samples = samples.max(2);
        (0..samples)
            .map(|k| {
                let t = self.t0 + (self.t1 - self.t0) * k as f64 / (samples - 1) as f64;
                self.at(t).symmetry_residual()
            })
            .fold(0.0, f64::max)
    }

    /// Reference frequencies: the preset's own, otherwise `ω_i = 2√(A_{q_i q_i} A_{p_i p_i})`
    /// at `t0` when the position block of `A(t0)` is diagonal.
    pub fn default_omegas(&self) -> Option<Vec<f64>> {
        if let Some(w) = &self.reference_omegas {
            return Some(w.clone());
        }
        let a = self.a(self.t0);
        let n = self.n_modes;
        for i in 0..n {
            for j in 0..n {
                if i != j && a[(i, j)] != 0.0 {
                    return None;
                }
            }
        }
        (0..n)
            .map(|i| {
                let prod = a[(i, i)] * a[(n + i, n + i)];
                (prod > 0.0 && a[(i, i)] > 0.0).then(|| 2.0 * prod.sqrt())
            })
            .collect()
    }
}

/// Named analytic scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `Σ (p_i² + ω² q_i²)/2`; params `omega`, `n_modes`.
    ConstantSho,
    /// `(p² + ω² q²)/2 − f q`; params `omega`, `force`.
    DrivenSho,
    /// Single mode whose frequency ramps from `omega0` to `omega1` over `tau`
    /// with the profile `s − sin(2πs)/2π`, `s = (t − t0)/tau` (continuous
    /// second derivative at both ends).
    ParametricRamp,
    /// Single mode prepared at `omega0`; frequency is `omega1` from `t_jump`
    /// (default `t0`) on.
    SuddenJump,
    /// Two modes plus `g q_1 q_2`; params `omega1`, `omega2`, `g`.
    CoupledPairQq,
    /// Two modes plus `g p_1 p_2`.
    CoupledPairPp,
    /// Two modes plus `g q_1 p_2`.
    CoupledQp,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::ConstantSho,
        Preset::DrivenSho,
        Preset::ParametricRamp,
        Preset::SuddenJump,
        Preset::CoupledPairQq,
        Preset::CoupledPairPp,
        Preset::CoupledQp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::ConstantSho => "constant_sho",
            Preset::DrivenSho => "driven_sho",
            Preset::ParametricRamp => "parametric_ramp",
            Preset::SuddenJump => "sudden_jump",
            Preset::CoupledPairQq => "coupled_pair_qq",
            Preset::CoupledPairPp => "coupled_pair_pp",
            Preset::CoupledQp => "coupled_qp",
        }
    }

    fn defaults(&self) -> &'static [(&'static str, f64)] {
        match self {
            Preset::ConstantSho => &[("omega", 1.0), ("n_modes", 1.0)],
            Preset::DrivenSho => &[("omega", 1.0), ("force", 1.0)],
            Preset::ParametricRamp => &[("omega0", 1.0), ("omega1", 1.5), ("tau", 5.0)],
            Preset::SuddenJump => &[("omega0", 1.0), ("omega1", 1.5), ("t_jump", f64::NAN)],
            Preset::CoupledPairQq | Preset::CoupledPairPp | Preset::CoupledQp => {
                &[("omega1", 1.0), ("omega2", 1.5), ("g", 0.3)]
            }
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

pub type PresetParams = BTreeMap<String, f64>;

struct Params {
    values: BTreeMap<&'static str, f64>,
}

impl Params {
    fn resolve(preset: Preset, given: &PresetParams) -> Result<Self> {
        let defaults = preset.defaults();
        for key in given.keys() {
            if !defaults.iter().any(|(k, _)| k == key) {
                return Err(Error::UnknownParameter { preset: preset.name().into(), param: key.clone() });
            }
        }
        let values = defaults
            .iter()
            .map(|(k, d)| (*k, given.get(*k).copied().unwrap_or(*d)))
            .collect();
        Ok(Self { values })
    }

    fn get(&self, key: &str) -> f64 {
        self.values[key]
    }

    fn frequency(&self, key: &str) -> Result<f64> {
        let w = self.get(key);
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidParameter { name: key.into(), reason: format!("frequency must be positive, got {w}") });
        }
        Ok(w)
    }

    fn finite(&self, key: &str) -> Result<f64> {
        let x = self.get(key);
        if !x.is_finite() {
            return Err(Error::InvalidParameter { name: key.into(), reason: "must be finite".into() });
        }
        Ok(x)
    }
}

fn sho_diag(omegas: &[f64]) -> DMatrix<f64> {
    let n = omegas.len();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for (i, w) in omegas.iter().enumerate() {
        a[(i, i)] = w * w / 2.0;
        a[(n + i, n + i)] = 0.5;
    }
    a
}

/// Builds a named analytic schedule on `[t0, t1]`.
pub fn preset(name: &str, params: &PresetParams, t0: f64, t1: f64) -> Result<HamiltonianSchedule> {
    let which: Preset = name.parse()?;
    check_interval(t0, t1)?;
    let p = Params::resolve(which, params)?;
    let schedule = match which {
        Preset::ConstantSho => {
            let w = p.frequency("omega")?;
            let n = p.get("n_modes");
            if !(n >= 1.0) || n.fract() != 0.0 || n > 64.0 {
                return Err(Error::InvalidParameter { name: "n_modes".into(), reason: format!("expected a positive integer, got {n}") });
            }
            let n = n as usize;
            let coeffs = Coefficients { a: sho_diag(&vec![w; n]), b: DVector::zeros(2 * n), c: 0.0 };
            HamiltonianSchedule::analytic(n, t0, t1, move |_| coeffs.clone())?
                .with_reference_omegas(vec![w; n])
        }
        Preset::DrivenSho => {
            let w = p.frequency("omega")?;
            let f = p.finite("force")?;
            let coeffs = Coefficients { a: sho_diag(&[w]), b: DVector::from_vec(vec![-f, 0.0]), c: 0.0 };
            HamiltonianSchedule::analytic(1, t0, t1, move |_| coeffs.clone())?.with_reference_omegas(vec![w])
        }
        Preset::ParametricRamp => {
            let w0 = p.frequency("omega0")?;
            let w1 = p.frequency("omega1")?;
            let tau = p.get("tau");
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::InvalidParameter { name: "tau".into(), reason: format!("ramp duration must be positive, got {tau}") });
            }
            HamiltonianSchedule::analytic(1, t0, t1, move |t| {
                let s = ((t - t0) / tau).clamp(0.0, 1.0);
                let tau_pi = 2.0 * std::f64::consts::PI;
                let shape = s - (tau_pi * s).sin() / tau_pi;
                let w = w0 + (w1 - w0) * shape;
                Coefficients { a: sho_diag(&[w]), b: DVector::zeros(2), c: 0.0 }
            })?
            .with_reference_omegas(vec![w0])
        }
        Preset::SuddenJump => {
            let w0 = p.frequency("omega0")?;
            let w1 = p.frequency("omega1")?;
            let tj = p.get("t_jump");
            let tj = if tj.is_nan() { t0 } else { tj };
            if !tj.is_finite() {
                return Err(Error::InvalidParameter { name: "t_jump".into(), reason: "must be finite".into() });
            }
            let before = sho_diag(&[w0]);
            let after = sho_diag(&[w1]);
            HamiltonianSchedule::analytic(1, t0, t1, move |t| Coefficients {
                a: if t < tj { before.clone() } else { after.clone() },
                b: DVector::zeros(2),
                c: 0.0,
            })?
            .with_reference_omegas(vec![w0])
        }
        Preset::CoupledPairQq | Preset::CoupledPairPp | Preset::CoupledQp => {
            let w1 = p.frequency("omega1")?;
            let w2 = p.frequency("omega2")?;
            let g = p.finite("g")?;
            let mut a = sho_diag(&[w1, w2]);
            let (i, j) = match which {
                Preset::CoupledPairQq => (0, 1),
                Preset::CoupledPairPp => (2, 3),
                _ => (0, 3),
            };
            a[(i, j)] = g / 2.0;
            a[(j, i)] = g / 2.0;
            let coeffs = Coefficients { a, b: DVector::zeros(4), c: 0.0 };
            HamiltonianSchedule::analytic(2, t0, t1, move |_| coeffs.clone())?.with_reference_omegas(vec![w1, w2])
        }
    };
    Ok(schedule.with_label(which.name()))
}

/// `H = 𝒜_{μν} a^μ a^ν + ℬ_μ a^μ + C` with `a = (a_1..a_N, a_1†..a_N†)` and
/// `z = Λ a`, where `q = (a + a†)/√(2λ)` and `p = -i √(λ/2) (a − a†)`.
#[derive(Debug, Clone)]
pub struct LadderRepresentation {
    n_modes: usize,
    lambda: f64,
    cal_a: DMatrix<C64>,
    cal_b: DVector<C64>,
    c: f64,
}

impl LadderRepresentation {
    /// `lambda` defaults to 1.
    pub fn new(
        n_modes: usize,
        lambda: Option<f64>,
        cal_a: DMatrix<C64>,
        cal_b: DVector<C64>,
        c: f64,
    ) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::ZeroModes);
        }
        let lambda = lambda.unwrap_or(1.0);
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter { name: "lambda".into(), reason: format!("must be positive, got {lambda}") });
        }
        let dim = 2 * n_modes;
        if cal_a.nrows() != dim || cal_a.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: cal_a.nrows().max(cal_a.ncols()) });
        }
        if cal_b.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: cal_b.len() });
        }
        Ok(Self { n_modes, lambda, cal_a, cal_b, c })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cal_a(&self) -> &DMatrix<C64> {
        &self.cal_a
    }

    pub fn cal_b(&self) -> &DVector<C64> {
        &self.cal_b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `Λ^μ_ν`, so that `z^μ = Λ^μ_ν a^ν`.
    pub fn lambda_matrix(&self) -> DMatrix<C64> {
        lambda_matrix(self.n_modes, self.lambda)
    }
}

fn lambda_matrix(n: usize, lambda: f64) -> DMatrix<C64> {
    let s = C64::from((1.0 / (2.0 * lambda)).sqrt());
    let r = C64::new(0.0, -(lambda / 2.0).sqrt());
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, i)] = s;
        m[(i, n + i)] = s;
        m[(n + i, i)] = r;
        m[(n + i, n + i)] = -r;
    }
    m
}

/// Phase-space coefficients `(A, B, C)` of a ladder-form Hamiltonian,
/// `A = Λ^{-T} 𝒜 Λ^{-1}`, `B = Λ^{-T} ℬ`.
///
/// `Λ^{-1}` has blocks `α = √(λ/2)` and `±iβ`, `β = 1/√(2λ)`; the quadratic
/// products `α² = λ/2`, `β² = 1/(2λ)` and `αβ = 1/2` are used in closed form.
pub fn ladder_to_coefficients(rep: &LadderRepresentation) -> Result<Coefficients> {
    let n = rep.n_modes;
    let lam = rep.lambda;
    let alpha2 = lam / 2.0;
    let beta2 = 1.0 / (2.0 * lam);
    let i_ab = C64::new(0.0, 0.5);
    let ca = &rep.cal_a;
    let mut a = DMatrix::<C64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let pp = ca[(i, j)];
            let pq = ca[(i, n + j)];
            let rr = ca[(n + i, j)];
            let ss = ca[(n + i, n + j)];
            a[(i, j)] = (pp + pq + rr + ss) * alpha2;
            a[(i, n + j)] = (pp - pq + rr - ss) * i_ab;
            a[(n + i, j)] = (pp + pq - rr - ss) * i_ab;
            a[(n + i, n + j)] = (pp - pq - rr + ss) * (-beta2);
        }
    }
    let alpha = (lam / 2.0).sqrt();
    let i_beta = C64::new(0.0, 1.0 / (2.0 * lam).sqrt());
    let cb = &rep.cal_b;
    let mut b = DVector::<C64>::zeros(2 * n);
    for i in 0..n {
        b[i] = (cb[i] + cb[n + i]) * alpha;
        b[n + i] = (cb[i] - cb[n + i]) * i_beta;
    }

    let scale = 1.0_f64.max(ca.iter().chain(cb.iter()).map(|z| z.norm()).fold(0.0, f64::max));
    let imag = a.iter().chain(b.iter()).map(|z| z.im.abs()).fold(0.0, f64::max);
    let a_re = a.map(|z| z.re + 0.0);
    let asym = asymmetry(&a_re);
    if imag > 1e-10 * scale || asym > 1e-10 * scale {
        return Err(Error::UnphysicalLadder { imag, asym });
    }
    let mut a_re = a_re;
    if asym > 0.0 {
        a_re = (&a_re + a_re.transpose()) * 0.5;
    }
    Ok(Coefficients { a: a_re, b: b.map(|z| z.re + 0.0), c: rep.c })
}

/// Constant-in-time schedule for a ladder-form Hamiltonian.
pub fn from_ladder(rep: &LadderRepresentation, t0: f64, t1: f64) -> Result<HamiltonianSchedule> {
    let coeffs = ladder_to_coefficients(rep)?;
    Ok(HamiltonianSchedule::constant(rep.n_modes, t0, t1, coeffs)?.with_label("ladder"))
}

/// Forward map `𝒜 = Λᵀ A Λ`, `ℬ = Λᵀ B`.
pub fn to_ladder(coeffs: &Coefficients, lambda: f64) -> Result<LadderRepresentation> {
    let dim = coeffs.a.nrows();
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::DimensionMismatch { expected: 2, got: dim });
    }
    let n = dim / 2;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter { name: "lambda".into(), reason: format!("must be positive, got {lambda}") });
    }
    let l = lambda_matrix(n, lambda);
    let a = coeffs.a.map(C64::from);
    let b = coeffs.b.map(C64::from);
    let cal_a = l.transpose() * a * &l;
    let cal_b = l.transpose() * b;
    LadderRepresentation::new(n, Some(lambda), cal_a, cal_b, coeffs.c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(kv: &[(&str, f64)]) -> PresetParams {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn constant_sho_form() {
        let h = preset("constant_sho", &params(&[("omega", 1.0)]), 0.0, 10.0).unwrap();
        for t in [0.0, 3.3, 10.0] {
            let c = h.at(t);
            assert_eq!(c.a, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
            assert_eq!(c.b, DVector::zeros(2));
            assert_eq!(c.c, 0.0);
        }
        let h = preset("constant_sho", &params(&[("omega", 3.0), ("n_modes", 2.0)]), 0.0, 1.0).unwrap();
        assert_eq!(h.n_modes(), 2);
        let a = h.a(0.0);
        assert_eq!(a[(1, 1)], 4.5);
        assert_eq!(a[(3, 3)], 0.5);
    }

    #[test]
    fn driven_sho_force_sign() {
        let h = preset("driven_sho", &params(&[("omega", 1.0), ("force", 1.0)]), 0.0, 1.0).unwrap();
        assert_eq!(h.a(0.5), DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
        assert_eq!(h.b(0.5), DVector::from_vec(vec![-1.0, 0.0]));
    }

    #[test]
    fn coupled_pair_qq_is_symmetric() {
        let h = preset("coupled_pair_qq", &params(&[("omega1", 1.0), ("omega2", 2.0), ("g", 0.4)]), 0.0, 1.0).unwrap();
        let a = h.a(0.0);
        assert_eq!(a[(0, 1)], 0.2);
        assert_eq!(a[(1, 0)], 0.2);
        assert_eq!(h.at(0.0).symmetry_residual(), 0.0);
    }

    #[test]
    fn every_preset_stays_symmetric_and_pure() {
        for p in Preset::ALL {
            let h = preset(p.name(), &PresetParams::new(), 0.0, 12.0).unwrap();
            assert!(h.max_symmetry_residual(1000) <= 1e-12, "{p}");
            for k in 0..50 {
                let t = 0.24 * k as f64;
                let (x, y) = (h.at(t), h.at(t));
                assert!(x.a.iter().zip(y.a.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
                assert!(x.b.iter().zip(y.b.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
            }
        }
    }

    #[test]
    fn preset_errors() {
        assert!(matches!(preset("nope", &PresetParams::new(), 0.0, 1.0), Err(Error::UnknownPreset(_))));
        assert!(matches!(
            preset("constant_sho", &params(&[("omega", 0.0)]), 0.0, 1.0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            preset("sudden_jump", &params(&[("omega1", -2.0)]), 0.0, 1.0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            preset("constant_sho", &PresetParams::new(), 1.0, 1.0),
            Err(Error::InvalidInterval { .. })
        ));
        assert!(matches!(
            preset("driven_sho", &params(&[("omegaa", 1.0)]), 0.0, 1.0),
            Err(Error::UnknownParameter { .. })
        ));
    }

    #[test]
    fn ramp_and_jump_profiles() {
        let h = preset("parametric_ramp", &params(&[("omega0", 1.0), ("omega1", 3.0), ("tau", 2.0)]), 0.0, 5.0).unwrap();
        assert_eq!(h.a(0.0)[(0, 0)], 0.5);
        assert!((h.a(1.0)[(0, 0)] - 2.0).abs() < 1e-15);
        assert_eq!(h.a(4.0)[(0, 0)], 4.5);
        assert_eq!(h.default_omegas(), Some(vec![1.0]));

        let h = preset("sudden_jump", &params(&[("omega1", 2.0)]), 0.0, 5.0).unwrap();
        assert_eq!(h.a(0.0)[(0, 0)], 2.0);
        assert_eq!(h.default_omegas(), Some(vec![1.0]));
        let h = preset("sudden_jump", &params(&[("t_jump", 1.0), ("omega1", 2.0)]), 0.0, 5.0).unwrap();
        assert_eq!(h.a(0.5)[(0, 0)], 0.5);
        assert_eq!(h.a(1.0)[(0, 0)], 2.0);
    }

    #[test]
    fn default_omegas_from_diagonal_a() {
        let mut a = DMatrix::zeros(4, 4);
        a[(0, 0)] = 2.0; // ω₁ = 2
        a[(1, 1)] = 0.125; // ω₂ = 0.5
        a[(2, 2)] = 0.5;
        a[(3, 3)] = 0.5;
        let h = HamiltonianSchedule::constant(2, 0.0, 1.0, Coefficients { a: a.clone(), b: DVector::zeros(4), c: 0.0 }).unwrap();
        assert_eq!(h.default_omegas(), Some(vec![2.0, 0.5]));
        a[(0, 1)] = 0.1;
        a[(1, 0)] = 0.1;
        let h = HamiltonianSchedule::constant(2, 0.0, 1.0, Coefficients { a, b: DVector::zeros(4), c: 0.0 }).unwrap();
        assert_eq!(h.default_omegas(), None);
    }

    #[test]
    fn sampled_interpolation_and_symmetrization() {
        let mk = |x: f64, skew: f64| Coefficients {
            a: DMatrix::from_row_slice(2, 2, &[x, skew, 0.0, 0.5]),
            b: DVector::from_vec(vec![x, 0.0]),
            c: x,
        };
        let table = SampledTable::new(1, vec![0.0, 1.0], vec![mk(1.0, 1e-8), mk(3.0, 0.0)]).unwrap();
        let h = HamiltonianSchedule::sampled(1, 0.0, 1.0, table).unwrap();
        assert!(h.is_sampled());
        let c = h.at(0.25);
        assert!((c.a[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((c.c - 1.5).abs() < 1e-15);
        assert_eq!(h.at(0.0).symmetry_residual(), 0.0);
        assert_eq!(h.at(2.0).a[(0, 0)], 3.0);

        let err = SampledTable::new(1, vec![0.0], vec![mk(1.0, 1e-3)]);
        assert!(matches!(err, Err(Error::AsymmetricA { .. })));
        let err = SampledTable::new(1, vec![1.0, 0.0], vec![mk(1.0, 0.0), mk(1.0, 0.0)]);
        assert!(err.is_err());
    }

    #[test]
    fn ladder_number_operator() {
        // H = ω(a†a + 1/2) written symmetrically: 𝒜_{a,a†} = 𝒜_{a†,a} = ω/2.
        for w in [1.0, 2.5] {
            let mut cal_a = DMatrix::zeros(2, 2);
            cal_a[(0, 1)] = C64::from(w / 2.0);
            cal_a[(1, 0)] = C64::from(w / 2.0);
            let rep = LadderRepresentation::new(1, Some(w), cal_a, DVector::zeros(2), 0.0).unwrap();
            let c = ladder_to_coefficients(&rep).unwrap();
            let expected = DMatrix::from_row_slice(2, 2, &[w * w / 2.0, 0.0, 0.0, 0.5]);
            assert!((c.a - expected).amax() < 1e-14);
            assert_eq!(c.b, DVector::zeros(2));
        }
    }

    #[test]
    fn ladder_number_operator_exact_at_unit_lambda() {
        let mut cal_a = DMatrix::zeros(2, 2);
        cal_a[(0, 1)] = C64::from(0.5);
        cal_a[(1, 0)] = C64::from(0.5);
        let rep = LadderRepresentation::new(1, None, cal_a, DVector::zeros(2), 0.0).unwrap();
        let h = from_ladder(&rep, 0.0, 1.0).unwrap();
        let sho = preset("constant_sho", &PresetParams::new(), 0.0, 1.0).unwrap();
        assert_eq!(h.at(0.3), sho.at(0.3));
    }

    #[test]
    fn ladder_linear_term() {
        let beta = 0.7;
        let rep = LadderRepresentation::new(
            1,
            Some(1.0),
            DMatrix::zeros(2, 2),
            DVector::from_vec(vec![C64::from(beta), C64::from(beta)]),
            0.0,
        )
        .unwrap();
        let c = ladder_to_coefficients(&rep).unwrap();
        assert!((c.b[0] - beta * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.b[1], 0.0);
    }

    #[test]
    fn ladder_rejects_unphysical() {
        // ω a†a alone is not symmetric in the a-ordering and maps to a complex A.
        let mut cal_a = DMatrix::zeros(2, 2);
        cal_a[(1, 0)] = C64::from(1.0);
        let rep = LadderRepresentation::new(1, None, cal_a, DVector::zeros(2), 0.0).unwrap();
        assert!(matches!(ladder_to_coefficients(&rep), Err(Error::UnphysicalLadder { .. })));
        // ℬ = (β, β) with complex β is not hermitian.
        let rep = LadderRepresentation::new(
            1,
            None,
            DMatrix::zeros(2, 2),
            DVector::from_vec(vec![C64::new(0.0, 1.0), C64::new(0.0, 1.0)]),
            0.0,
        )
        .unwrap();
        assert!(ladder_to_coefficients(&rep).is_err());
        assert!(LadderRepresentation::new(1, Some(-1.0), DMatrix::zeros(2, 2), DVector::zeros(2), 0.0).is_err());
    }

    #[test]
    fn lambda_matrix_closed_form() {
        let rep = LadderRepresentation::new(2, Some(2.0), DMatrix::zeros(4, 4), DVector::zeros(4), 0.0).unwrap();
        let l = rep.lambda_matrix();
        let s = (1.0f64 / 4.0).sqrt();
        let r = 1.0;
        assert_eq!(l[(0, 0)], C64::from(s));
        assert_eq!(l[(1, 3)], C64::from(s));
        assert_eq!(l[(2, 0)], C64::new(0.0, -r));
        assert_eq!(l[(3, 3)], C64::new(0.0, r));
        assert_eq!(l[(0, 1)], C64::from(0.0));
    }

    fn random_coeffs(n: usize, seed: &[f64]) -> Coefficients {
        let dim = 2 * n;
        let mut a = DMatrix::zeros(dim, dim);
        let mut k = 0;
        for i in 0..dim {
            for j in i..dim {
                a[(i, j)] = seed[k % seed.len()];
                a[(j, i)] = a[(i, j)];
                k += 1;
            }
        }
        let b = DVector::from_fn(dim, |i, _| seed[(k + i) % seed.len()]);
        Coefficients { a, b, c: 0.25 }
    }

    proptest! {
        #[test]
        fn ladder_round_trip(
            seed in proptest::collection::vec(-2.0f64..2.0, 14),
            lambda in 0.1f64..5.0,
            n in 1usize..3,
        ) {
            let coeffs = random_coeffs(n, &seed);
            let rep = to_ladder(&coeffs, lambda).unwrap();
            let back = ladder_to_coefficients(&rep).unwrap();
            prop_assert!((&back.a - &coeffs.a).amax() <= 1e-10);
            prop_assert!((&back.b - &coeffs.b).amax() <= 1e-10);
            let again = to_ladder(&back, lambda).unwrap();
            let da = (again.cal_a() - rep.cal_a()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            let db = (again.cal_b() - rep.cal_b()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(da <= 1e-12 && db <= 1e-12, "da={da:e} db={db:e}");
        }
    }
}
