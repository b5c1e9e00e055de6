//! solve → invariants → propagator → moments, plus the residual bookkeeping
//! shared by `run`, `validate` and `oracle-compare`.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nalgebra::DVector;
use paraosc_core::{
    build_primary, build_propagator, heisenberg_residual_parts, integrate_classical, integrate_solution_with,
    invariant_residual_parts, lr_invariant, oracle_moments, quadratic_residual, state_moments, FockConfig,
    MomentReport, Propagator, QuadraticInvariant, SolutionRecord, SolverOptions, StateSpec, C64,
};
use serde::Serialize;

use crate::config::{ConfigError, OutputKind, Overrides, Scenario, ScenarioFile};
use crate::output::{line_chart, sha256_hex, Series, Table};

/// One or more checks exceeded their tolerance.
#[derive(Debug)]
pub struct ValidationFailed(pub String);

impl fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationFailed {}

/// Pass thresholds for the per-grid-point checks.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub canonical: f64,
    pub conjugacy: f64,
    pub finite_difference: f64,
    pub symplectic: f64,
    pub defining_identity: f64,
    pub invariant_drift: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    canonical: 1e-8,
    conjugacy: 1e-9,
    finite_difference: 1e-6,
    symplectic: 1e-8,
    defining_identity: 1e-8,
    invariant_drift: 1e-8,
};

/// Per-grid-point diagnostics. Finite-difference entries are NaN within two
/// steps of either end and, for tabulated Hamiltonians, wherever the stencil
/// straddles a sample time.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub canonical: Vec<f64>,
    pub conjugacy: Vec<f64>,
    pub v_equation: Vec<f64>,
    pub u_equation: Vec<f64>,
    pub lr_quadratic: Vec<f64>,
    pub lr_linear: Vec<f64>,
    pub heisenberg_z: Vec<f64>,
    pub heisenberg_d: Vec<f64>,
    pub symplectic: Vec<f64>,
    pub defining_identity: Vec<f64>,
    /// `⟨I⟩` in the scenario state.
    pub invariant_expectation: Vec<f64>,
}

fn nanmax(v: &[f64]) -> f64 {
    v.iter().filter(|x| !x.is_nan()).fold(0.0, |a, b| a.max(*b))
}

/// Grid maxima of [`Diagnostics`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Residuals {
    pub canonical: f64,
    pub conjugacy: f64,
    pub v_equation: f64,
    pub u_equation: f64,
    pub lr_invariant: f64,
    pub heisenberg: f64,
    pub symplectic: f64,
    pub defining_identity: f64,
    pub invariant_drift: f64,
    pub propagator_imaginary: f64,
    pub invariant_imaginary: f64,
}

/// Everything computed for one scenario.
pub struct Analysis {
    pub rec: SolutionRecord,
    pub lr: QuadraticInvariant,
    pub prop: Propagator,
    pub moments: MomentReport,
    pub diag: Diagnostics,
}

impl Analysis {
    pub fn residuals(&self) -> Residuals {
        let d = &self.diag;
        let i0 = d.invariant_expectation[0];
        let drift = d.invariant_expectation.iter().map(|x| (x - i0).abs()).fold(0.0, f64::max);
        Residuals {
            canonical: nanmax(&d.canonical),
            conjugacy: nanmax(&d.conjugacy),
            v_equation: nanmax(&d.v_equation),
            u_equation: nanmax(&d.u_equation),
            lr_invariant: nanmax(&d.lr_quadratic).max(nanmax(&d.lr_linear)),
            heisenberg: nanmax(&d.heisenberg_z).max(nanmax(&d.heisenberg_d)),
            symplectic: nanmax(&d.symplectic),
            defining_identity: nanmax(&d.defining_identity),
            invariant_drift: drift / i0.abs().max(1.0),
            propagator_imaginary: self.prop.max_imaginary(),
            invariant_imaginary: self.lr.max_imaginary(),
        }
    }
}

pub fn solve(sc: &Scenario, opts: SolverOptions) -> Result<SolutionRecord> {
    integrate_solution_with(&sc.ham, &sc.omegas, &sc.grid, opts)
        .with_context(|| format!("solving scenario {}", sc.name))
}

/// Invariants, propagator, moments and per-point diagnostics of a solved record.
pub fn analyze(sc: &Scenario, rec: SolutionRecord) -> Result<Analysis> {
    let inv = build_primary(&rec)?;
    let lr = lr_invariant(&inv)?;
    let prop = build_propagator(&rec)?;
    let moments = state_moments(&rec, &sc.state)?;
    let grid = *rec.grid();
    let (dt, len) = (grid.dt(), rec.len());
    // the fourth-order stencil needs two neighbours on each side; across a
    // table sample the interpolant is not smooth enough for it either
    let knots = sc.ham.sample_times().unwrap_or(&[]);
    let straddles = |k: usize| {
        let (lo, hi) = (grid.time(k.saturating_sub(2)), grid.time((k + 2).min(len - 1)));
        knots.iter().any(|&x| x > lo && x < hi)
    };
    let nan = |k: usize| k < 2 || k + 2 >= len || straddles(k);
    let mut d = Diagnostics {
        canonical: Vec::with_capacity(len),
        conjugacy: Vec::with_capacity(len),
        v_equation: Vec::with_capacity(len),
        u_equation: Vec::with_capacity(len),
        lr_quadratic: Vec::with_capacity(len),
        lr_linear: Vec::with_capacity(len),
        heisenberg_z: Vec::with_capacity(len),
        heisenberg_d: Vec::with_capacity(len),
        symplectic: Vec::with_capacity(len),
        defining_identity: Vec::with_capacity(len),
        invariant_expectation: Vec::with_capacity(len),
    };
    let v0 = rec.v(0);
    for k in 0..len {
        let t = grid.time(k);
        d.canonical.push(rec.canonical_residual(k));
        d.conjugacy.push(rec.conjugacy_residual(k));
        if nan(k) {
            for col in [
                &mut d.v_equation,
                &mut d.u_equation,
                &mut d.lr_quadratic,
                &mut d.lr_linear,
                &mut d.heisenberg_z,
                &mut d.heisenberg_d,
            ] {
                col.push(f64::NAN);
            }
        } else {
            let p = invariant_residual_parts(&inv, &sc.ham, t, dt)?;
            d.v_equation.push(p.homogeneous);
            d.u_equation.push(p.drift);
            let q = quadratic_residual(&lr, &sc.ham, t, dt)?;
            d.lr_quadratic.push(q.homogeneous);
            d.lr_linear.push(q.drift);
            let h = heisenberg_residual_parts(&prop, &sc.ham, t, dt)?;
            d.heisenberg_z.push(h.homogeneous);
            d.heisenberg_d.push(h.drift);
        }
        d.symplectic.push(prop.symplectic_residual(k));
        let vz = rec.v(k) * prop.matrix(k).map(C64::from) - v0;
        d.defining_identity.push(vz.iter().map(|z| z.norm()).fold(0.0, f64::max));
        let s = &moments.samples[k];
        d.invariant_expectation.push(lr.expectation(k, &s.mean(), &s.cov));
    }
    Ok(Analysis { rec, lr, prop, moments, diag: d })
}

fn moments_table(n: usize, report: &MomentReport) -> Table {
    let mut header = vec!["t".to_string()];
    for prefix in ["mean_q", "mean_p", "var_q", "var_p", "dqdp"] {
        header.extend((0..n).map(|i| format!("{prefix}{i}")));
    }
    for mu in 0..2 * n {
        for nu in mu + 1..2 * n {
            header.push(format!("cov_{mu}_{nu}"));
        }
    }
    let mut table = Table::new(header);
    for s in &report.samples {
        let mut row = vec![s.t];
        for v in [&s.mean_q, &s.mean_p, &s.var_q, &s.var_p, &s.uncertainty_products] {
            row.extend(v.iter());
        }
        for mu in 0..2 * n {
            for nu in mu + 1..2 * n {
                row.push(s.cov[(mu, nu)]);
            }
        }
        table.push(row);
    }
    table
}

fn propagator_table(a: &Analysis) -> Table {
    let dim = 2 * a.rec.n_modes();
    let mut header = vec!["t".to_string()];
    for r in 0..dim {
        for c in 0..dim {
            header.push(format!("Z_{r}_{c}"));
        }
    }
    header.extend((0..dim).map(|r| format!("d_{r}")));
    let mut table = Table::new(header);
    for k in 0..a.rec.len() {
        let z = a.prop.matrix(k);
        let mut row = vec![a.rec.time(k)];
        for r in 0..dim {
            for c in 0..dim {
                row.push(z[(r, c)]);
            }
        }
        row.extend(a.prop.drift(k).iter());
        table.push(row);
    }
    table
}

fn residual_table(a: &Analysis) -> Table {
    let d = &a.diag;
    let mut table = Table::new([
        "t",
        "canonical",
        "conjugacy",
        "v_equation",
        "u_equation",
        "lr_quadratic",
        "lr_linear",
        "heisenberg_z",
        "heisenberg_d",
        "symplectic",
        "defining_identity",
        "invariant_expectation",
    ]);
    for k in 0..a.rec.len() {
        table.push(vec![
            a.rec.time(k),
            d.canonical[k],
            d.conjugacy[k],
            d.v_equation[k],
            d.u_equation[k],
            d.lr_quadratic[k],
            d.lr_linear[k],
            d.heisenberg_z[k],
            d.heisenberg_d[k],
            d.symplectic[k],
            d.defining_identity[k],
            d.invariant_expectation[k],
        ]);
    }
    table
}

fn classical_table(sc: &Scenario, a: &Analysis) -> Result<Table> {
    let n = a.rec.n_modes();
    let z0 = a.moments.samples[0].mean();
    let traj = integrate_classical(&sc.ham, &z0, &sc.grid)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("q{i}")));
    header.extend((0..n).map(|i| format!("p{i}")));
    header.push("mean_deviation".into());
    let mut table = Table::new(header);
    for (k, z) in traj.z.iter().enumerate() {
        let mut row = vec![sc.grid.time(k)];
        row.extend(z.iter());
        row.push((a.moments.samples[k].mean() - z).amax());
        table.push(row);
    }
    Ok(table)
}

fn plots(n: usize, report: &MomentReport) -> Vec<(&'static str, String)> {
    type Pick = fn(&paraosc_core::MomentSample) -> &DVector<f64>;
    let specs: [(&str, &str, &str, Pick); 5] = [
        ("var_q.svg", "position variance", "Δq²", |s| &s.var_q),
        ("var_p.svg", "momentum variance", "Δp²", |s| &s.var_p),
        ("mean_q.svg", "position mean", "⟨q⟩", |s| &s.mean_q),
        ("mean_p.svg", "momentum mean", "⟨p⟩", |s| &s.mean_p),
        ("uncertainty.svg", "uncertainty product", "Δq Δp", |s| &s.uncertainty_products),
    ];
    specs
        .iter()
        .map(|(file, title, y, pick)| {
            let series: Vec<Series> = (0..n)
                .map(|i| Series {
                    label: format!("mode {i}"),
                    points: report.samples.iter().map(|s| (s.t, pick(s)[i])).collect(),
                })
                .collect();
            (*file, line_chart(title, "t", y, &series))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Serialize)]
struct Resolved<'a> {
    name: &'a str,
    n_modes: usize,
    omegas: &'a [f64],
    t0: f64,
    t1: f64,
    dt: f64,
    steps: usize,
    state: String,
    sampled_hamiltonian: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    scenario: &'a ScenarioFile,
    overrides: Overrides,
    resolved: Resolved<'a>,
    tolerances: Tolerances,
    residuals: Residuals,
    invariant_eigenvalue: Option<f64>,
    files: &'a [FileEntry],
    content_hash: String,
}

fn describe_state(state: &StateSpec) -> String {
    match state {
        StateSpec::Number(n) => format!("number {n:?}"),
        StateSpec::Coherent(a) => {
            let parts: Vec<String> = a.iter().map(|z| format!("{}{:+}i", z.re, z.im)).collect();
            format!("coherent [{}]", parts.join(", "))
        }
    }
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<FileEntry>,
    pub content_hash: String,
    pub residuals: Residuals,
}

/// Runs the full pipeline and writes the requested CSVs, the five moment
/// plots and `manifest.json` into `out_dir`.
pub fn run(sc: &Scenario, out_dir: &Path) -> Result<RunSummary> {
    let rec = solve(sc, SolverOptions::default())?;
    let analysis = analyze(sc, rec)?;
    let n = analysis.rec.n_modes();

    let mut artifacts: Vec<(String, String)> = Vec::new();
    for kind in &sc.outputs {
        let table = match kind {
            OutputKind::Moments => moments_table(n, &analysis.moments),
            OutputKind::Propagator => propagator_table(&analysis),
            OutputKind::InvariantResiduals => residual_table(&analysis),
            OutputKind::Classical => classical_table(sc, &analysis)?,
        };
        debug_assert_eq!(table.len(), sc.grid.len());
        artifacts.push((kind.file_name().to_string(), table.to_csv()));
    }
    for (name, svg) in plots(n, &analysis.moments) {
        artifacts.push((name.to_string(), svg));
    }
    artifacts.sort_by(|a, b| a.0.cmp(&b.0));

    std::fs::create_dir_all(out_dir)
        .map_err(|e| ConfigError(format!("cannot create output directory {}: {e}", out_dir.display())))?;
    let mut files = Vec::with_capacity(artifacts.len());
    let mut combined = String::new();
    for (name, body) in &artifacts {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))?;
        let sha = sha256_hex(body.as_bytes());
        combined.push_str(&format!("{name} {sha}\n"));
        files.push(FileEntry { name: name.clone(), bytes: body.len(), sha256: sha });
    }
    let content_hash = sha256_hex(combined.as_bytes());
    let residuals = analysis.residuals();
    let manifest = Manifest {
        tool: "paraosc",
        version: env!("CARGO_PKG_VERSION"),
        scenario: &sc.file,
        overrides: sc.overrides,
        resolved: Resolved {
            name: &sc.name,
            n_modes: n,
            omegas: sc.omegas.as_slice(),
            t0: sc.grid.t0(),
            t1: sc.grid.t1(),
            dt: sc.grid.dt(),
            steps: sc.grid.steps(),
            state: describe_state(&sc.state),
            sampled_hamiltonian: sc.ham.is_sampled(),
        },
        tolerances: TOLERANCES,
        residuals,
        invariant_eigenvalue: match &sc.state {
            StateSpec::Number(occ) => Some(analysis.lr.eigenvalue(occ)),
            StateSpec::Coherent(_) => None,
        },
        files: &files,
        content_hash: content_hash.clone(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, json).map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))?;
    Ok(RunSummary { out_dir: out_dir.to_path_buf(), files, content_hash, residuals })
}

/// One line of the `validate` report.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub max: f64,
    pub tolerance: f64,
    pub note: Option<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.max <= self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{:<34} max {:>10.3e}   tol {:>7.1e}   {verdict}", self.name, self.max, self.tolerance)?;
        if let Some(note) = &self.note {
            write!(f, "  ({note})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// Checks that could not be evaluated.
    pub skipped: Option<String>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.skipped.is_none() && self.checks.iter().all(Check::passed)
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
            Err(ValidationFailed(format!("validation failed: {}", failed.join(", "))).into())
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        if let Some(s) = &self.skipped {
            writeln!(f, "remaining checks not evaluated: {s}")?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

/// Residual maxima against the tolerances. The solver's drift abort is
/// disabled so an oversized step shows up as a failed check rather than an
/// abort.
pub fn validate(sc: &Scenario) -> Result<ValidationReport> {
    let rec = solve(sc, SolverOptions { abort_residual: f64::INFINITY })?;
    let dt = sc.grid.dt();
    let canonical = rec.max_canonical_residual();
    let mut checks = vec![
        Check {
            name: "canonical condition iVεVᵀ = ε",
            max: canonical,
            tolerance: TOLERANCES.canonical,
            note: (canonical > TOLERANCES.canonical).then(|| format!("reduce the time step; dt = {dt:e}")),
        },
        Check {
            name: "conjugate-block structure",
            max: rec.max_conjugacy_residual(),
            tolerance: TOLERANCES.conjugacy,
            note: None,
        },
    ];
    let mut notes = Vec::new();
    let skipped = match analyze(sc, rec) {
        Ok(a) => {
            if sc.ham.is_sampled() {
                let excluded = a.diag.v_equation.iter().filter(|x| x.is_nan()).count().saturating_sub(4);
                notes.push(format!(
                    "sampled-table Hamiltonian: linear interpolation has kinks at the samples, so the \
                     stepper is reduced-order there; {excluded} grid points whose finite-difference stencil \
                     straddles a sample are excluded from the FD checks"
                ));
            }
            let r = a.residuals();
            let fd = TOLERANCES.finite_difference;
            checks.extend([
                Check { name: "v-equation residual (FD)", max: r.v_equation, tolerance: fd, note: None },
                Check { name: "u-equation residual (FD)", max: r.u_equation, tolerance: fd, note: None },
                Check { name: "LR invariant residual (FD)", max: r.lr_invariant, tolerance: fd, note: None },
                Check { name: "Heisenberg residual (FD)", max: r.heisenberg, tolerance: fd, note: None },
                Check { name: "symplecticity ZεZᵀ = ε", max: r.symplectic, tolerance: TOLERANCES.symplectic, note: None },
                Check {
                    name: "defining identity V Z = V(0)",
                    max: r.defining_identity,
                    tolerance: TOLERANCES.defining_identity,
                    note: None,
                },
                Check {
                    name: "⟨I⟩ drift (relative)",
                    max: r.invariant_drift,
                    tolerance: TOLERANCES.invariant_drift,
                    note: None,
                },
            ]);
            None
        }
        Err(e) => Some(format!("{e:#}")),
    };
    Ok(ValidationReport { checks, skipped, notes })
}

/// Outcome of [`oracle_compare`].
#[derive(Debug, Clone)]
pub struct OracleSummary {
    pub max_deviation: f64,
    pub tolerance: f64,
    pub points: usize,
    pub cutoff: usize,
    pub truncation_estimate: f64,
    pub norm_drift: f64,
    pub csv: PathBuf,
}

impl OracleSummary {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

impl fmt::Display for OracleSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "oracle-compare: max deviation {:.3e} over {} points (tolerance {:.1e}; cutoff {}, truncation estimate {:.1e}, norm drift {:.1e}) {}",
            self.max_deviation,
            self.points,
            self.tolerance,
            self.cutoff,
            self.truncation_estimate,
            self.norm_drift,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Largest divisor of `steps` whose interval does not exceed `target`.
fn report_stride(steps: usize, dt: f64, target: f64) -> usize {
    let limit = ((target / dt).floor() as usize).clamp(1, steps);
    (1..=limit).rev().find(|&d| steps.is_multiple_of(d)).unwrap_or(1)
}

/// Invariant-method moments against the Fock-space oracle; writes
/// `oracle_compare.csv` with both sets side by side.
pub fn oracle_compare(sc: &Scenario, out_dir: &Path) -> Result<OracleSummary> {
    let spec = sc.oracle().ok_or_else(|| ConfigError("oracle-compare needs an [oracle] block".into()))?;
    let stride = match spec.report_every {
        Some(s) if s == 0 || !sc.grid.steps().is_multiple_of(s) => {
            return Err(ConfigError(format!(
                "oracle.report_every = {s} must divide the step count {}",
                sc.grid.steps()
            ))
            .into());
        }
        Some(s) => s,
        None => report_stride(sc.grid.steps(), sc.grid.dt(), 0.1),
    };
    let coarse = sc.grid.subsample(stride).expect("stride divides steps");
    let rec = solve(sc, SolverOptions::default())?;
    let ours = state_moments(&rec, &sc.state)?.subsample(stride);
    let cfg = FockConfig::new(spec.cutoff, spec.dt_oracle);
    let run = oracle_moments(&sc.ham, &sc.state, sc.omegas.as_slice(), &cfg, &coarse)?;
    let n = rec.n_modes();

    let mut header = vec!["t".to_string()];
    for q in ["mean_q", "mean_p", "var_q", "var_p"] {
        for i in 0..n {
            header.push(format!("{q}{i}_invariant"));
            header.push(format!("{q}{i}_oracle"));
        }
    }
    header.push("max_abs_diff".into());
    let mut table = Table::new(header);
    for (a, b) in ours.samples.iter().zip(&run.report.samples) {
        let mut row = vec![a.t];
        let mut diff: f64 = 0.0;
        for (x, y) in [(&a.mean_q, &b.mean_q), (&a.mean_p, &b.mean_p), (&a.var_q, &b.var_q), (&a.var_p, &b.var_p)] {
            for i in 0..n {
                row.push(x[i]);
                row.push(y[i]);
                diff = diff.max((x[i] - y[i]).abs());
            }
        }
        row.push(diff);
        table.push(row);
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| ConfigError(format!("cannot create output directory {}: {e}", out_dir.display())))?;
    let csv = out_dir.join("oracle_compare.csv");
    std::fs::write(&csv, table.to_csv()).map_err(|e| ConfigError(format!("cannot write {}: {e}", csv.display())))?;
    Ok(OracleSummary {
        max_deviation: ours.max_deviation(&run.report),
        tolerance: spec.tolerance,
        points: ours.len(),
        cutoff: spec.cutoff,
        truncation_estimate: run.truncation_estimate,
        norm_drift: run.norm_drift,
        csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_divides_steps() {
        assert_eq!(report_stride(12600, 1e-3, 0.1), 100);
        assert_eq!(report_stride(3142, 1e-3, 0.1), 2);
        assert_eq!(report_stride(7, 1e-3, 0.1), 7);
        assert_eq!(report_stride(13, 1e-3, 0.005), 1);
    }
}
