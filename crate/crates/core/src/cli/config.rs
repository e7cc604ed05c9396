use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Atom, DampingFunction, DampingModel, MeasureSpec, RelaxationKernel};
use crate::solver::{
    BreachPolicy, Forcing, InitialData, Manufactured, MemoryMethod, Profile, SpatialGrid, Table1d, Table2d,
    TimeProfile,
};

/// One run, as read from a TOML file. Paths are relative to the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub damping: DampingConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub forcing: ForcingConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub kernel_check: KernelCheckConfig,
    #[serde(default)]
    pub inversion: InversionConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    /// weights `1/(2k+1)^2` at rates `(2k+1)^2`
    DoiEdwards {
        #[serde(default)]
        truncation: Option<f64>,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    /// `weight * e^{-rate t}`
    Exponential {
        #[serde(default = "one")]
        rate: f64,
        #[serde(default = "one")]
        weight: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    Atoms {
        atoms: Vec<Atom>,
        #[serde(default)]
        truncation: Option<f64>,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_gamma() -> f64 {
    0.25
}

impl KernelConfig {
    pub fn build(&self) -> Result<RelaxationKernel> {
        match self {
            KernelConfig::DoiEdwards { truncation, .. } => RelaxationKernel::doi_edwards(*truncation),
            KernelConfig::Exponential { rate, weight, .. } => RelaxationKernel::exponential(*rate, *weight),
            KernelConfig::Atoms { atoms, truncation, .. } => {
                RelaxationKernel::new(MeasureSpec::from_atoms(atoms.clone())?, *truncation)
            }
        }
    }

    /// Exponent of the `rho^gamma` moment check.
    pub fn gamma(&self) -> f64 {
        match self {
            KernelConfig::DoiEdwards { gamma, .. }
            | KernelConfig::Exponential { gamma, .. }
            | KernelConfig::Atoms { gamma, .. } => *gamma,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DampingConfig {
    #[default]
    DoiEdwards,
    /// `g(y) = slope * y`
    Linear { slope: f64 },
    /// `g(y) = sum c_i y^i`
    Polynomial { coefficients: Vec<f64> },
    /// least-squares odd fit of an `y,g` CSV table
    Table {
        path: PathBuf,
        #[serde(default = "default_degree")]
        degree: usize,
    },
}

fn default_degree() -> usize {
    7
}

impl DampingConfig {
    pub fn build(&self, base: &Path) -> Result<DampingFunction> {
        match self {
            DampingConfig::DoiEdwards => DampingFunction::doi_edwards(),
            DampingConfig::Linear { slope } => DampingFunction::linear(*slope),
            DampingConfig::Polynomial { coefficients } => {
                DampingFunction::new(DampingModel::Polynomial(coefficients.clone()))
            }
            DampingConfig::Table { path, degree } => {
                let table = Table1d::from_csv(open(base, path)?)?;
                let (ys, gs) = table.columns();
                DampingFunction::new(DampingModel::fit_table(ys, gs, *degree)?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub length: f64,
    /// interior nodes
    pub interior: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            length: 1.0,
            interior: 48,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    /// fixed step; when absent, `cfl_safety * dx / sqrt(|g'(0)| a(0))`
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_safety")]
    pub cfl_safety: f64,
    #[serde(default = "default_tol")]
    pub corrector_tol: f64,
    #[serde(default = "default_corrections")]
    pub max_corrections: usize,
    #[serde(default)]
    pub breach: BreachPolicy,
    #[serde(default)]
    pub memory: MemoryMethod,
}

fn default_safety() -> f64 {
    0.5
}

fn default_tol() -> f64 {
    1e-12
}

fn default_corrections() -> usize {
    30
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: None,
            cfl_safety: default_safety(),
            corrector_tol: default_tol(),
            max_corrections: default_corrections(),
            breach: BreachPolicy::default(),
            memory: MemoryMethod::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    #[default]
    Zero,
    SingleMode { amplitude: f64, mode: u32 },
    GaussianBump { amplitude: f64, center: f64, width: f64 },
    /// `x,value` CSV
    Table { path: PathBuf },
}

impl InitialConfig {
    pub fn build(&self, base: &Path) -> Result<InitialData> {
        let data = match self {
            InitialConfig::Zero => InitialData::zero(),
            InitialConfig::SingleMode { amplitude, mode } => InitialData::single_mode(*amplitude, *mode),
            InitialConfig::GaussianBump {
                amplitude,
                center,
                width,
            } => InitialData::Profile(Profile::GaussianBump {
                amplitude: *amplitude,
                center: *center,
                width: *width,
            }),
            InitialConfig::Table { path } => InitialData::Table(Table1d::from_csv(open(base, path)?)?),
        };
        if let InitialData::Profile(p) = &data {
            p.validate()?;
        }
        Ok(data)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingConfig {
    #[default]
    Zero,
    /// `space(x) * time(t)`
    Separable { space: Profile, time: TimeProfile },
    /// forcing whose exact solution is `amplitude sin(mode pi x / L) sin(omega t)`
    Manufactured { amplitude: f64, mode: u32, omega: f64 },
    /// `x,t,value` CSV on a tensor grid
    Table { path: PathBuf },
}

impl ForcingConfig {
    pub fn build(
        &self,
        base: &Path,
        kernel: &RelaxationKernel,
        damping: &DampingFunction,
        length: f64,
    ) -> Result<Forcing> {
        Ok(match self {
            ForcingConfig::Zero => Forcing::Zero,
            ForcingConfig::Separable { space, time } => {
                space.validate()?;
                time.validate()?;
                Forcing::Separable {
                    space: space.clone(),
                    time: time.clone(),
                }
            }
            ForcingConfig::Manufactured { amplitude, mode, omega } => {
                Forcing::Manufactured(Manufactured::new(kernel, damping, *amplitude, *mode, *omega, length)?)
            }
            ForcingConfig::Table { path } => Forcing::Table(Table2d::from_csv(open(base, path)?)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// positions recorded at every step
    #[serde(default)]
    pub probes: Vec<f64>,
    /// full profiles written at the steps nearest these times
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// energy and remainder-bound rows every this many steps (and at the end)
    #[serde(default = "default_every")]
    pub every: usize,
    #[serde(default = "yes")]
    pub lemma_checks: bool,
}

fn default_every() -> usize {
    10
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            probes: Vec::new(),
            snapshot_times: Vec::new(),
            every: default_every(),
            lemma_checks: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Sobolev constant; defaults to `sqrt(max(2, 2/L) + 1)`
    #[serde(default)]
    pub c_omega: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckConfig {
    #[serde(default = "default_omega_min")]
    pub omega_min: f64,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    #[serde(default = "default_points")]
    pub omega_points: usize,
    /// horizon of the sampled `a`, `psi` and monotonicity tables
    #[serde(default = "default_horizon")]
    pub t_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// step and horizon of the `B1`, `B2` build (truncated kernels only)
    #[serde(default = "default_check_dt")]
    pub inversion_dt: f64,
    #[serde(default = "one")]
    pub inversion_t_end: f64,
}

fn default_omega_min() -> f64 {
    1e-3
}

fn default_omega_max() -> f64 {
    1e4
}

fn default_points() -> usize {
    10_001
}

fn default_horizon() -> f64 {
    5.0
}

fn default_samples() -> usize {
    200
}

fn default_check_dt() -> f64 {
    1e-3
}

impl Default for KernelCheckConfig {
    fn default() -> Self {
        Self {
            omega_min: default_omega_min(),
            omega_max: default_omega_max(),
            omega_points: default_points(),
            t_max: default_horizon(),
            samples: default_samples(),
            inversion_dt: default_check_dt(),
            inversion_t_end: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    /// coarsest step; the suite halves it `levels - 1` times
    #[serde(default = "default_dt_coarse")]
    pub dt_coarse: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "one")]
    pub t_end: f64,
    /// number of random test signals besides the fixed one
    #[serde(default = "default_signals")]
    pub random_signals: usize,
    #[serde(default = "default_min_order")]
    pub min_order: f64,
}

fn default_dt_coarse() -> f64 {
    4e-3
}

fn default_levels() -> usize {
    3
}

fn default_signals() -> usize {
    2
}

fn default_min_order() -> f64 {
    1.7
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            dt_coarse: default_dt_coarse(),
            levels: default_levels(),
            t_end: 1.0,
            random_signals: default_signals(),
            min_order: default_min_order(),
        }
    }
}

fn open(base: &Path, path: &Path) -> Result<BufReader<fs::File>> {
    let full = base.join(path);
    let file = fs::File::open(&full).map_err(|e| Error::Config(format!("{}: {e}", full.display())))?;
    Ok(BufReader::new(file))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Positivity of every physical parameter and probes inside the domain.
    pub fn validate(&self) -> Result<()> {
        match &self.kernel {
            KernelConfig::DoiEdwards { truncation, gamma } | KernelConfig::Atoms { truncation, gamma, .. } => {
                if let Some(n) = truncation {
                    positive("kernel.truncation", *n)?;
                }
                positive("kernel.gamma", *gamma)?;
            }
            KernelConfig::Exponential { rate, weight, gamma } => {
                positive("kernel.rate", *rate)?;
                positive("kernel.weight", *weight)?;
                positive("kernel.gamma", *gamma)?;
            }
        }
        if let KernelConfig::Atoms { atoms, .. } = &self.kernel {
            for a in atoms {
                positive("kernel.atoms.rate", a.rate)?;
                positive("kernel.atoms.weight", a.weight)?;
            }
        }
        positive("grid.length", self.grid.length)?;
        positive("time.t_end", self.time.t_end)?;
        positive("time.cfl_safety", self.time.cfl_safety)?;
        positive("time.corrector_tol", self.time.corrector_tol)?;
        if let Some(dt) = self.time.dt {
            positive("time.dt", dt)?;
        }
        if self.time.max_corrections == 0 {
            return Err(Error::Config("time.max_corrections must be at least 1".into()));
        }
        if self.output.every == 0 {
            return Err(Error::Config("output.every must be at least 1".into()));
        }
        for &p in &self.output.probes {
            if !(p > 0.0 && p < self.grid.length) {
                return Err(Error::Config(format!(
                    "probe at x = {p} lies outside (0, {})",
                    self.grid.length
                )));
            }
        }
        for &t in &self.output.snapshot_times {
            if !(t >= 0.0 && t <= self.time.t_end) {
                return Err(Error::Config(format!("snapshot time {t} lies outside [0, {}]", self.time.t_end)));
            }
        }
        if let Some(c) = self.diagnostics.c_omega {
            positive("diagnostics.c_omega", c)?;
        }
        let kc = &self.kernel_check;
        positive("kernel_check.omega_min", kc.omega_min)?;
        positive("kernel_check.omega_max", kc.omega_max)?;
        positive("kernel_check.t_max", kc.t_max)?;
        positive("kernel_check.inversion_dt", kc.inversion_dt)?;
        positive("kernel_check.inversion_t_end", kc.inversion_t_end)?;
        if kc.omega_min >= kc.omega_max || kc.omega_points < 3 || kc.samples < 2 {
            return Err(Error::Config("kernel_check needs omega_min < omega_max, >= 3 frequencies, >= 2 samples".into()));
        }
        let inv = &self.inversion;
        positive("inversion.dt_coarse", inv.dt_coarse)?;
        positive("inversion.t_end", inv.t_end)?;
        positive("inversion.min_order", inv.min_order)?;
        Ok(())
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.grid.length, self.grid.interior)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7

[kernel]
family = "doi-edwards"
truncation = 100.0

[damping]
kind = "doi-edwards"

[grid]
length = 1.0
interior = 32

[time]
t_end = 5.0

[initial]
kind = "single-mode"
amplitude = 1e-3
mode = 1

[output]
probes = [0.25, 0.5]
snapshot_times = [0.0, 5.0]
every = 20
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.grid.interior, 32);
        assert_eq!(cfg.kernel.gamma(), 0.25);
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = SAMPLE.replace("interior = 32", "interior = 32\nspacing = 0.1");
        let err = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("spacing"), "{err}");
    }

    #[test]
    fn negative_atom_weights_are_rejected() {
        let text = "[kernel]\nfamily = \"atoms\"\natoms = [{ rate = 1.0, weight = -0.5 }]\n";
        assert!(matches!(RunConfig::from_toml(text), Err(Error::Config(_))));
    }

    #[test]
    fn probes_must_lie_inside() {
        let bad = SAMPLE.replace("probes = [0.25, 0.5]", "probes = [1.5]");
        assert!(RunConfig::from_toml(&bad).is_err());
    }
}
