use std::f64::consts::PI;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Atom, DampingFunction, RelaxationKernel};

/// Uniform grid on `(0, L)` with `N` interior nodes and Dirichlet ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpatialGrid {
    length: f64,
    interior: usize,
    dx: f64,
}

/// Smallest accepted number of interior nodes.
pub const MIN_INTERIOR_NODES: usize = 8;

impl SpatialGrid {
    pub fn new(length: f64, interior: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Domain(format!("interval length must be > 0, got {length}")));
        }
        if interior < MIN_INTERIOR_NODES {
            return Err(Error::Domain(format!(
                "need at least {MIN_INTERIOR_NODES} interior nodes, got {interior}"
            )));
        }
        Ok(Self {
            length,
            interior,
            dx: length / (interior + 1) as f64,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn interior(&self) -> usize {
        self.interior
    }

    /// Node count including both boundary nodes.
    pub fn nodes(&self) -> usize {
        self.interior + 2
    }

    /// Cells between consecutive nodes; strain and stress live at their midpoints.
    pub fn cells(&self) -> usize {
        self.interior + 1
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.interior + 1 {
            self.length
        } else {
            i as f64 * self.dx
        }
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.x(i)).collect()
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        (0..self.cells()).map(|i| (i as f64 + 0.5) * self.dx).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x > 0.0 && x < self.length
    }

    /// Linear interpolation of nodal values at `x` in `[0, L]`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let s = (x / self.dx).clamp(0.0, self.interior as f64 + 1.0);
        let i = (s.floor() as usize).min(self.interior);
        let r = s - i as f64;
        (1.0 - r) * values[i] + r * values[i + 1]
    }

    /// Linear interpolation of cell-centred values at `x`, constant beyond the
    /// outermost centres.
    pub fn interpolate_cells(&self, values: &[f64], x: f64) -> f64 {
        let s = (x / self.dx - 0.5).clamp(0.0, self.interior as f64);
        let i = (s.floor() as usize).min(self.interior.saturating_sub(1));
        let r = s - i as f64;
        (1.0 - r) * values[i] + r * values[i + 1]
    }
}

/// Tabulated `value(x)` with linear interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct Table1d {
    xs: Vec<f64>,
    values: Vec<f64>,
}

/// Tabulated `value(x, t)` on a tensor grid with bilinear interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct Table2d {
    xs: Vec<f64>,
    ts: Vec<f64>,
    /// `[t][x]`
    values: Vec<Vec<f64>>,
}

fn parse_rows<R: BufRead>(reader: R, columns: usize, what: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == columns => rows.push(v),
            Ok(v) => {
                return Err(Error::Config(format!(
                    "{what} line {}: expected {columns} columns, found {}",
                    n + 1,
                    v.len()
                )))
            }
            // a non-numeric first line is a header
            Err(_) if rows.is_empty() && n == 0 => continue,
            Err(e) => return Err(Error::Config(format!("{what} line {}: {e}", n + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("{what}: no data rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what}: non-finite entry")));
    }
    Ok(rows)
}

fn bracket(grid: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = grid.len();
    if n == 1 {
        return (x == grid[0]).then_some((0, 0.0));
    }
    if x < grid[0] || x > grid[n - 1] {
        return None;
    }
    let i = grid.partition_point(|g| *g <= x).clamp(1, n - 1) - 1;
    Some((i, (x - grid[i]) / (grid[i + 1] - grid[i])))
}

impl Table1d {
    pub fn new(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != values.len() {
            return Err(Error::Config("table needs at least two (x, value) rows".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("table x column must be strictly increasing".into()));
        }
        Ok(Self { xs, values })
    }

    /// Rows `x,value`; an optional header line is skipped.
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let rows = parse_rows(reader, 2, "x,value table")?;
        Self::new(rows.iter().map(|r| r[0]).collect(), rows.iter().map(|r| r[1]).collect())
    }

    pub fn columns(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.values)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (i, r) = bracket(&self.xs, x)
            .ok_or_else(|| Error::Config(format!("x = {x} outside the table range")))?;
        Ok(if r == 0.0 {
            self.values[i]
        } else {
            (1.0 - r) * self.values[i] + r * self.values[i + 1]
        })
    }
}

impl Table2d {
    /// Rows `x,t,value` covering a full tensor grid in any order.
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let rows = parse_rows(reader, 3, "forcing table")?;
        let mut xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let mut ts: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        if xs.len() < 2 || ts.len() < 2 {
            return Err(Error::Config("forcing table needs at least two x and two t values".into()));
        }
        if rows.len() != xs.len() * ts.len() {
            return Err(Error::Config(format!(
                "forcing table has {} rows, a {} x {} tensor grid needs {}",
                rows.len(),
                xs.len(),
                ts.len(),
                xs.len() * ts.len()
            )));
        }
        let mut values = vec![vec![f64::NAN; xs.len()]; ts.len()];
        for r in &rows {
            let i = xs.binary_search_by(|v| v.total_cmp(&r[0])).unwrap_or(0);
            let j = ts.binary_search_by(|v| v.total_cmp(&r[1])).unwrap_or(0);
            if !values[j][i].is_nan() {
                return Err(Error::Config(format!("duplicate forcing row at x = {}, t = {}", r[0], r[1])));
            }
            values[j][i] = r[2];
        }
        Ok(Self { xs, ts, values })
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        let (i, rx) = bracket(&self.xs, x)
            .ok_or_else(|| Error::Config(format!("x = {x} outside the forcing table")))?;
        let (j, rt) = bracket(&self.ts, t)
            .ok_or_else(|| Error::Config(format!("t = {t} outside the forcing table")))?;
        let at = |jj: usize| {
            let row = &self.values[jj];
            if rx == 0.0 {
                row[i]
            } else {
                (1.0 - rx) * row[i] + rx * row[i + 1]
            }
        };
        Ok(if rt == 0.0 {
            at(j)
        } else {
            (1.0 - rt) * at(j) + rt * at(j + 1)
        })
    }

    pub fn t_max(&self) -> f64 {
        *self.ts.last().unwrap_or(&0.0)
    }
}

/// Spatial profiles shared by initial data and separable forcing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    /// `A exp(-(x - c)^2 / (2 w^2))` minus the line through its end values
    GaussianBump { amplitude: f64, center: f64, width: f64 },
    /// `A sin(k pi x / L)`
    SingleMode { amplitude: f64, mode: u32 },
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Profile::Zero => Ok(()),
            Profile::GaussianBump { amplitude, center, width } => {
                if !(amplitude.is_finite() && center.is_finite() && width.is_finite() && width > 0.0) {
                    return Err(Error::Config(format!(
                        "gaussian-bump needs finite amplitude/center and width > 0, got ({amplitude}, {center}, {width})"
                    )));
                }
                Ok(())
            }
            Profile::SingleMode { amplitude, mode } => {
                if !amplitude.is_finite() || mode == 0 {
                    return Err(Error::Config(format!(
                        "single-mode needs finite amplitude and mode >= 1, got ({amplitude}, {mode})"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::GaussianBump { amplitude, center, width } => {
                let bump = |y: f64| (-(y - center).powi(2) / (2.0 * width * width)).exp();
                let (b0, b1) = (bump(0.0), bump(length));
                amplitude * (bump(x) - b0 - (b1 - b0) * x / length)
            }
            Profile::SingleMode { amplitude, mode } => {
                amplitude * (mode as f64 * PI * x / length).sin()
            }
        }
    }
}

/// Initial velocity `v_0`.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    Profile(Profile),
    Table(Table1d),
}

impl InitialData {
    pub fn zero() -> Self {
        InitialData::Profile(Profile::Zero)
    }

    pub fn single_mode(amplitude: f64, mode: u32) -> Self {
        InitialData::Profile(Profile::SingleMode { amplitude, mode })
    }

    /// Samples on every node, boundary nodes included.
    pub fn sample(&self, grid: &SpatialGrid) -> Result<Vec<f64>> {
        match self {
            InitialData::Profile(p) => {
                p.validate()?;
                Ok(grid.positions().iter().map(|&x| p.eval(x, grid.length())).collect())
            }
            InitialData::Table(t) => grid.positions().iter().map(|&x| t.eval(x)).collect(),
        }
    }
}

/// Time factor of a separable forcing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TimeProfile {
    Constant,
    /// `sin(omega t)`
    Sine { omega: f64 },
    /// `e^{-rate t}`
    Decay { rate: f64 },
    /// `t e^{-rate t}`
    Pulse { rate: f64 },
}

impl TimeProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TimeProfile::Constant => true,
            TimeProfile::Sine { omega } => omega.is_finite(),
            TimeProfile::Decay { rate } | TimeProfile::Pulse { rate } => rate.is_finite() && rate >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid time profile {self:?}")))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Sine { omega } => (omega * t).sin(),
            TimeProfile::Decay { rate } => (-rate * t).exp(),
            TimeProfile::Pulse { rate } => t * (-rate * t).exp(),
        }
    }
}

/// Body force `f(x, t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Forcing {
    Zero,
    Separable { space: Profile, time: TimeProfile },
    /// Forcing whose exact solution under a linear damping function is
    /// `v = A sin(k pi x / L) sin(omega t)`.
    Manufactured(Manufactured),
    Table(Table2d),
}

/// Parameters of the manufactured linear solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Manufactured {
    pub amplitude: f64,
    pub mode: u32,
    pub omega: f64,
    pub length: f64,
    /// `|g'(0)|` the forcing was built for
    pub slope: f64,
    atoms: Vec<Atom>,
}

impl Manufactured {
    pub fn new(
        kernel: &RelaxationKernel,
        damping: &DampingFunction,
        amplitude: f64,
        mode: u32,
        omega: f64,
        length: f64,
    ) -> Result<Self> {
        if kernel.has_tail() {
            return Err(Error::Usage("manufactured forcing needs a truncated kernel".into()));
        }
        if !damping.is_linear() {
            return Err(Error::Usage("manufactured forcing needs a linear damping function".into()));
        }
        if mode == 0 || !(amplitude.is_finite() && omega.is_finite() && length > 0.0) {
            return Err(Error::Config("manufactured forcing: invalid parameters".into()));
        }
        Ok(Self {
            amplitude,
            mode,
            omega,
            length,
            slope: -damping.slope_at_zero(),
            atoms: kernel.atoms().to_vec(),
        })
    }

    fn wavenumber(&self) -> f64 {
        self.mode as f64 * PI / self.length
    }

    /// Exact velocity.
    pub fn solution(&self, x: f64, t: f64) -> f64 {
        self.amplitude * (self.wavenumber() * x).sin() * (self.omega * t).sin()
    }

    pub fn forcing(&self, x: f64, t: f64) -> f64 {
        let k = self.wavenumber();
        let om = self.omega;
        let (s, c) = (om * t).sin_cos();
        let memory: f64 = self
            .atoms
            .iter()
            .map(|a| {
                let r = a.rate;
                a.weight * (r * s - om * c + om * (-r * t).exp()) / (r * r + om * om)
            })
            .sum();
        self.amplitude * (k * x).sin() * (om * c + self.slope * k * k * memory)
    }
}

impl Forcing {
    /// `f(x, t)` on an interval of length `length`.
    pub fn eval(&self, x: f64, t: f64, length: f64) -> Result<f64> {
        Ok(match self {
            Forcing::Zero => 0.0,
            Forcing::Separable { space, time } => space.eval(x, length) * time.eval(t),
            Forcing::Manufactured(m) => m.forcing(x, t),
            Forcing::Table(tab) => tab.eval(x, t)?,
        })
    }

    /// `f(x_i, t)` on every node.
    pub fn sample(&self, grid: &SpatialGrid, t: f64, out: &mut [f64]) -> Result<()> {
        for (i, v) in out.iter_mut().enumerate() {
            *v = self.eval(grid.x(i), t, grid.length())?;
        }
        Ok(())
    }

    pub fn validate(&self, grid: &SpatialGrid, damping: &DampingFunction) -> Result<()> {
        match self {
            Forcing::Separable { space, time } => {
                space.validate()?;
                time.validate()
            }
            Forcing::Manufactured(m) => {
                if !damping.is_linear() || (m.slope + damping.slope_at_zero()).abs() > 1e-12 * m.slope {
                    return Err(Error::Usage(
                        "manufactured forcing was built for a different damping slope".into(),
                    ));
                }
                if (m.length - grid.length()).abs() > 1e-12 * grid.length() {
                    return Err(Error::Usage(
                        "manufactured forcing was built for a different interval".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero | Forcing::Separable { space: Profile::Zero, .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing_and_positions() {
        let g = SpatialGrid::new(2.0, 9).unwrap();
        assert_eq!(g.dx(), 0.2);
        assert_eq!(g.nodes(), 11);
        assert_eq!(g.x(10), 2.0);
        assert!(SpatialGrid::new(1.0, 7).is_err());
        assert!(SpatialGrid::new(-1.0, 10).is_err());
    }

    #[test]
    fn interpolation_is_exact_for_linear_data() {
        let g = SpatialGrid::new(1.0, 9).unwrap();
        let v: Vec<f64> = g.positions().iter().map(|x| 3.0 * x - 1.0).collect();
        for x in [0.0, 0.05, 0.37, 1.0] {
            assert!((g.interpolate(&v, x) - (3.0 * x - 1.0)).abs() < 1e-14);
        }
        let c: Vec<f64> = g.cell_centers().iter().map(|x| 2.0 * x).collect();
        assert!((g.interpolate_cells(&c, 0.42) - 0.84).abs() < 1e-14);
    }

    #[test]
    fn bump_vanishes_at_both_ends() {
        let p = Profile::GaussianBump { amplitude: 2.0, center: 0.3, width: 0.2 };
        assert_eq!(p.eval(0.0, 1.0), 0.0);
        assert!(p.eval(1.0, 1.0).abs() < 1e-15);
        assert!(p.eval(0.3, 1.0) > 1.0);
    }

    #[test]
    fn tables_parse_and_interpolate() {
        let t1 = Table1d::from_csv("x,value\n0,0\n0.5,1\n1,0\n".as_bytes()).unwrap();
        assert_eq!(t1.eval(0.25).unwrap(), 0.5);
        assert!(t1.eval(1.5).is_err());
        let csv = "x,t,value\n0,0,0\n1,0,1\n0,1,2\n1,1,3\n";
        let t2 = Table2d::from_csv(csv.as_bytes()).unwrap();
        assert!((t2.eval(0.5, 0.5).unwrap() - 1.5).abs() < 1e-15);
        assert!(Table2d::from_csv("0,0,0\n1,0,1\n0,1,2\n".as_bytes()).is_err());
        assert!(Table1d::from_csv("0,1\n0,2\n".as_bytes()).is_err());
    }

    #[test]
    fn manufactured_forcing_matches_direct_convolution() {
        // f = v_t - c (a * v_xx) with a = e^{-2t}, c = 1.5
        let k = RelaxationKernel::exponential(2.0, 1.0).unwrap();
        let g = DampingFunction::linear(-1.5).unwrap();
        let m = Manufactured::new(&k, &g, 0.7, 2, 3.0, 1.0).unwrap();
        let (x, t) = (0.3, 0.8);
        let kk = 2.0 * PI;
        let n = 20_000;
        let h = t / n as f64;
        let conv: f64 = (0..=n)
            .map(|j| {
                let s = j as f64 * h;
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                w * h * (-2.0 * (t - s)).exp() * (3.0 * s).sin()
            })
            .sum();
        let vxx_conv = -kk * kk * 0.7 * (kk * x).sin() * conv;
        let vt = 0.7 * (kk * x).sin() * 3.0 * (3.0 * t).cos();
        let oracle = vt - 1.5 * vxx_conv;
        assert!((m.forcing(x, t) - oracle).abs() < 1e-7, "{} vs {oracle}", m.forcing(x, t));
    }
}
