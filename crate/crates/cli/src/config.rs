//! Scenario files.
//!
//! The file layer (`ScenarioFile`, TOML via serde) is kept apart from the
//! resolved [`Scenario`], so a different syntax only needs a new parser.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use paraosc_core::{
    default_dt, from_ladder, preset, Coefficients, HamiltonianSchedule, LadderRepresentation, ReferenceFrequencies,
    SampledTable, StateSpec, TimeGrid, C64,
};
use serde::{Deserialize, Serialize};

/// Scenario that could not be read or does not satisfy the schema.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub n_modes: Option<usize>,
    /// Reference frequencies `ω_i`; defaults to the Hamiltonian's own.
    pub omegas: Option<Vec<f64>>,
    pub hamiltonian: HamiltonianSpec,
    pub state: StateFile,
    pub time: TimeSpec,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
    pub oracle: Option<OracleSpec>,
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Moments]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    pub table: Option<TableSpec>,
    pub ladder: Option<LadderSpec>,
}

/// `A`, `B`, `C` sampled at `times`; linear interpolation in between.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub times: Vec<f64>,
    /// One `2N×2N` matrix (list of rows) per time.
    pub a: Vec<Vec<Vec<f64>>>,
    pub b: Option<Vec<Vec<f64>>>,
    pub c: Option<Vec<f64>>,
}

/// Time-independent `H = 𝒜 a a + ℬ a + C` in ladder operators of frequency `lambda`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    pub lambda: Option<f64>,
    pub a_re: Vec<Vec<f64>>,
    pub a_im: Option<Vec<Vec<f64>>>,
    pub b_re: Option<Vec<f64>>,
    pub b_im: Option<Vec<f64>>,
    #[serde(default)]
    pub c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateFile {
    Number { n: Vec<i64> },
    /// Amplitudes as `[re, im]` pairs.
    Coherent { alpha: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    pub dt: Step,
}

/// A step size, or `"auto"` for 1/1000 of the shortest reference period.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Step {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Moments,
    Propagator,
    InvariantResiduals,
    Classical,
}

impl OutputKind {
    pub fn file_name(self) -> &'static str {
        match self {
            OutputKind::Moments => "moments.csv",
            OutputKind::Propagator => "propagator.csv",
            OutputKind::InvariantResiduals => "invariant_residuals.csv",
            OutputKind::Classical => "classical.csv",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default = "default_dt_oracle")]
    pub dt_oracle: f64,
    /// Compare every this many solver steps; must divide the step count.
    pub report_every: Option<usize>,
    #[serde(default = "default_oracle_tol")]
    pub tolerance: f64,
}

fn default_cutoff() -> usize {
    40
}

fn default_dt_oracle() -> f64 {
    5e-3
}

fn default_oracle_tol() -> f64 {
    1e-4
}

/// Command-line replacements for `time.dt` and `time.t1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
}

/// Fully resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub file: ScenarioFile,
    pub overrides: Overrides,
    pub ham: HamiltonianSchedule,
    pub omegas: ReferenceFrequencies,
    pub state: StateSpec,
    pub grid: TimeGrid,
    pub outputs: Vec<OutputKind>,
}

impl Scenario {
    pub fn load(path: &Path, overrides: Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read scenario {}: {e}", path.display())))?;
        let default_name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::parse(&text, &default_name, overrides)
            .map_err(|e| config_err(format!("{}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str, default_name: &str, overrides: Overrides) -> Result<Self, ConfigError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end().to_string()))?;
        Self::resolve(file, default_name, overrides)
    }

    pub fn resolve(file: ScenarioFile, default_name: &str, overrides: Overrides) -> Result<Self, ConfigError> {
        let t0 = file.time.t0;
        let t1 = overrides.t_end.unwrap_or(file.time.t1);
        if !(t1 > t0) {
            return Err(config_err(format!("time.t1 must exceed time.t0 (t0 = {t0}, t1 = {t1})")));
        }
        let ham = build_hamiltonian(&file.hamiltonian, t0, t1)?;
        let n = ham.n_modes();
        if let Some(declared) = file.n_modes {
            if declared != n {
                return Err(config_err(format!("n_modes = {declared} but the hamiltonian has {n} modes")));
            }
        }
        let omegas = match &file.omegas {
            Some(w) if w.len() != n => {
                return Err(config_err(format!("omegas has {} entries, expected {n}", w.len())));
            }
            Some(w) => w.clone(),
            None => ham.default_omegas().ok_or_else(|| {
                config_err("omegas: no default reference frequencies for this hamiltonian; set `omegas`")
            })?,
        };
        let omegas = ReferenceFrequencies::new(omegas).map_err(|e| config_err(format!("omegas: {e}")))?;
        let state = match &file.state {
            StateFile::Number { n } => StateSpec::number(n),
            StateFile::Coherent { alpha } => StateSpec::coherent(alpha.iter().map(|[re, im]| C64::new(*re, *im)).collect()),
        }
        .map_err(|e| config_err(format!("state: {e}")))?;
        if state.n_modes() != n {
            return Err(config_err(format!("state has {} modes, expected {n}", state.n_modes())));
        }
        let dt = match (overrides.dt, &file.time.dt) {
            (Some(dt), _) => dt,
            (None, Step::Value(dt)) => *dt,
            (None, Step::Keyword(k)) if k == "auto" => default_dt(&omegas),
            (None, Step::Keyword(k)) => {
                return Err(config_err(format!("time.dt: expected a number or \"auto\", got {k:?}")));
            }
        };
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(config_err(format!("time.dt must be positive, got {dt}")));
        }
        let grid = TimeGrid::new(t0, t1, dt).map_err(|e| config_err(format!("time: {e}")))?;
        if let Some(o) = &file.oracle {
            if o.cutoff == 0 || !(o.dt_oracle > 0.0) || !(o.tolerance > 0.0) {
                return Err(config_err("oracle: cutoff, dt_oracle and tolerance must be positive"));
            }
        }
        let mut outputs = file.outputs.clone();
        outputs.sort();
        outputs.dedup();
        let name = file.name.clone().unwrap_or_else(|| default_name.to_string());
        Ok(Self { name, file, overrides, ham, omegas, state, grid, outputs })
    }

    pub fn oracle(&self) -> Option<&OracleSpec> {
        self.file.oracle.as_ref()
    }
}

fn build_hamiltonian(spec: &HamiltonianSpec, t0: f64, t1: f64) -> Result<HamiltonianSchedule, ConfigError> {
    let given = [spec.preset.is_some(), spec.table.is_some(), spec.ladder.is_some()];
    if given.iter().filter(|g| **g).count() != 1 {
        return Err(config_err("hamiltonian: give exactly one of `preset`, `table` or `ladder`"));
    }
    if spec.preset.is_none() && !spec.params.is_empty() {
        return Err(config_err("hamiltonian.params only applies to presets"));
    }
    if let Some(name) = &spec.preset {
        return preset(name, &spec.params, t0, t1).map_err(|e| config_err(format!("hamiltonian.preset: {e}")));
    }
    if let Some(table) = &spec.table {
        return build_table(table, t0, t1).map_err(|e| config_err(format!("hamiltonian.table: {}", e.0)));
    }
    let ladder = spec.ladder.as_ref().unwrap();
    build_ladder(ladder, t0, t1).map_err(|e| config_err(format!("hamiltonian.ladder: {}", e.0)))
}

fn square(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, ConfigError> {
    let dim = rows.len();
    if dim == 0 || !dim.is_multiple_of(2) || rows.iter().any(|r| r.len() != dim) {
        return Err(config_err(format!("{what} must be a square 2N×2N matrix")));
    }
    Ok(DMatrix::from_fn(dim, dim, |r, c| rows[r][c]))
}

fn build_table(spec: &TableSpec, t0: f64, t1: f64) -> Result<HamiltonianSchedule, ConfigError> {
    let len = spec.times.len();
    if spec.a.len() != len {
        return Err(config_err(format!("a has {} samples for {len} times", spec.a.len())));
    }
    let mut samples = Vec::with_capacity(len);
    for (k, rows) in spec.a.iter().enumerate() {
        let a = square(rows, &format!("a[{k}]"))?;
        let dim = a.nrows();
        let b = match &spec.b {
            Some(b) => {
                let row = b.get(k).ok_or_else(|| config_err(format!("b has no sample {k}")))?;
                if row.len() != dim {
                    return Err(config_err(format!("b[{k}] has length {}, expected {dim}", row.len())));
                }
                DVector::from_column_slice(row)
            }
            None => DVector::zeros(dim),
        };
        let c = match &spec.c {
            Some(c) => *c.get(k).ok_or_else(|| config_err(format!("c has no sample {k}")))?,
            None => 0.0,
        };
        samples.push(Coefficients { a, b, c });
    }
    let n = samples.first().map(|s| s.a.nrows() / 2).ok_or_else(|| config_err("times is empty"))?;
    if samples.iter().any(|s| s.a.nrows() != 2 * n) {
        return Err(config_err("all samples of a must have the same size"));
    }
    let table = SampledTable::new(n, spec.times.clone(), samples).map_err(|e| config_err(e.to_string()))?;
    HamiltonianSchedule::sampled(n, t0, t1, table).map_err(|e| config_err(e.to_string()))
}

fn build_ladder(spec: &LadderSpec, t0: f64, t1: f64) -> Result<HamiltonianSchedule, ConfigError> {
    let re = square(&spec.a_re, "a_re")?;
    let dim = re.nrows();
    let im = match &spec.a_im {
        Some(rows) => square(rows, "a_im")?,
        None => DMatrix::zeros(dim, dim),
    };
    if im.nrows() != dim {
        return Err(config_err("a_im must match a_re"));
    }
    let vec_or_zero = |v: &Option<Vec<f64>>, what: &str| -> Result<DVector<f64>, ConfigError> {
        match v {
            Some(v) if v.len() != dim => Err(config_err(format!("{what} has length {}, expected {dim}", v.len()))),
            Some(v) => Ok(DVector::from_column_slice(v)),
            None => Ok(DVector::zeros(dim)),
        }
    };
    let (b_re, b_im) = (vec_or_zero(&spec.b_re, "b_re")?, vec_or_zero(&spec.b_im, "b_im")?);
    let cal_a = re.zip_map(&im, C64::new);
    let cal_b = b_re.zip_map(&b_im, C64::new);
    let rep = LadderRepresentation::new(dim / 2, spec.lambda, cal_a, cal_b, spec.c).map_err(|e| config_err(e.to_string()))?;
    from_ladder(&rep, t0, t1).map_err(|e| config_err(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        [hamiltonian]
        preset = "driven_sho"
        params = { force = 0.5 }

        [state]
        kind = "coherent"
        alpha = [[0.5, 0.0]]

        [time]
        t1 = 2.0
        dt = 1e-3
    "#;

    #[test]
    fn parses_preset_scenario() {
        let s = Scenario::parse(BASIC, "basic", Overrides::default()).unwrap();
        assert_eq!(s.name, "basic");
        assert_eq!(s.grid.steps(), 2000);
        assert_eq!(s.outputs, vec![OutputKind::Moments]);
        assert_eq!(s.omegas.as_slice(), &[1.0]);
        assert_eq!(s.ham.b(0.3)[0], -0.5);
    }

    #[test]
    fn overrides_replace_step_and_end() {
        let s = Scenario::parse(BASIC, "basic", Overrides { dt: Some(0.01), t_end: Some(3.0) }).unwrap();
        assert_eq!(s.grid.steps(), 300);
        assert_eq!(s.ham.domain(), (0.0, 3.0));
    }

    #[test]
    fn missing_dt_names_the_field() {
        let text = BASIC.replace("dt = 1e-3", "");
        let err = Scenario::parse(&text, "x", Overrides::default()).unwrap_err();
        assert!(err.0.contains("dt"), "{err}");
        assert!(err.0.contains("line"), "{err}");
    }

    #[test]
    fn auto_step_uses_reference_period() {
        let text = BASIC.replace("dt = 1e-3", "dt = \"auto\"");
        let s = Scenario::parse(&text, "x", Overrides::default()).unwrap();
        // the step is shortened slightly so the grid lands on t1
        let auto = 2.0 * std::f64::consts::PI / 1000.0;
        assert_eq!(s.grid.steps(), (2.0 / auto).ceil() as usize);
        assert!(s.grid.dt() <= auto);
        let text = BASIC.replace("dt = 1e-3", "dt = \"fast\"");
        assert!(Scenario::parse(&text, "x", Overrides::default()).is_err());
    }

    #[test]
    fn rejects_schema_violations() {
        for (from, to) in [
            ("driven_sho", "no_such_preset"),
            ("force = 0.5", "strength = 0.5"),
            ("t1 = 2.0", "t1 = -1.0"),
            ("dt = 1e-3", "dt = 0.0"),
            ("alpha = [[0.5, 0.0]]", "alpha = [[0.5, 0.0], [0.1, 0.0]]"),
            ("[time]", "colour = 3\n[time]"),
        ] {
            let text = BASIC.replace(from, to);
            assert!(Scenario::parse(&text, "x", Overrides::default()).is_err(), "{to}");
        }
    }

    #[test]
    fn table_and_ladder_hamiltonians() {
        let table = r#"
            omegas = [1.0]
            [hamiltonian.table]
            times = [0.0, 1.0]
            a = [[[0.5, 0.0], [0.0, 0.5]], [[1.0, 0.0], [0.0, 0.5]]]
            [state]
            kind = "number"
            n = [0]
            [time]
            t1 = 1.0
            dt = 0.01
        "#;
        let s = Scenario::parse(table, "t", Overrides::default()).unwrap();
        assert!(s.ham.is_sampled());
        assert!((s.ham.a(0.5)[(0, 0)] - 0.75).abs() < 1e-15);

        let ladder = r#"
            [hamiltonian.ladder]
            a_re = [[0.0, 0.5], [0.5, 0.0]]
            [state]
            kind = "number"
            n = [1]
            [time]
            t1 = 1.0
            dt = 0.01
        "#;
        let s = Scenario::parse(ladder, "l", Overrides::default()).unwrap();
        assert_eq!(s.omegas.as_slice(), &[1.0]);
        assert_eq!(s.ham.a(0.0)[(0, 0)], 0.5);

        let both = ladder.replace("[hamiltonian.ladder]", "[hamiltonian]\npreset = \"constant_sho\"\n[hamiltonian.ladder]");
        assert!(Scenario::parse(&both, "b", Overrides::default()).is_err());
    }
}
