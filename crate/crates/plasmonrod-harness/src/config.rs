//! Scenario files: TOML parsing, presets and rule expansion.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Solve,
    Mesh,
    Spectrum,
    Scan,
    Scaling,
    Figure1,
    Figure2,
    AsymptoticCompare,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    Coarse,
    #[default]
    Desk,
    Fine,
}

impl Resolution {
    /// `(n_axial, n_circum)` for rods.
    pub fn rod(self) -> (usize, usize) {
        match self {
            Resolution::Coarse => (16, 8),
            Resolution::Desk => (24, 16),
            Resolution::Fine => (32, 24),
        }
    }

    /// Subdivision parameter of the sphere mesh (`8 m^2` panels).
    pub fn sphere(self) -> usize {
        match self {
            Resolution::Coarse => 8,
            Resolution::Desk => 16,
            Resolution::Fine => 20,
        }
    }

    pub fn energy_refine(self) -> usize {
        match self {
            Resolution::Coarse => 4,
            _ => 8,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "coarse" => Some(Resolution::Coarse),
            "desk" => Some(Resolution::Desk),
            "fine" => Some(Resolution::Fine),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryKind {
    #[default]
    Straight,
    EllipticArc,
    Custom,
    Sphere,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    pub length: f64,
    pub a: f64,
    pub b: f64,
    pub trim: f64,
    pub points: Vec<[f64; 3]>,
    pub radius: f64,
    pub m: Option<usize>,
    pub delta: f64,
    pub n_axial: Option<usize>,
    pub n_circum: Option<usize>,
    pub cap_refine: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            kind: GeometryKind::Straight,
            length: 4.0,
            a: 0.5,
            b: 2.0,
            trim: 0.3,
            points: Vec::new(),
            radius: 1.0,
            m: None,
            delta: 0.25,
            n_axial: None,
            n_circum: None,
            cap_refine: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsRule {
    /// `eps_c = -1 + i omega^4`.
    Omega4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ModeChoice {
    Index(usize),
    Named(DominantTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DominantTag {
    Dominant,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub eps_c: [f64; 2],
    pub eps_c_rule: Option<EpsRule>,
    /// Tune `eps_c` to this mode with loss `rho`.
    pub resonant_mode: Option<ModeChoice>,
    pub rho: f64,
    /// Secant-correct the resonant `theta` for the finite frequency.
    pub tune: bool,
    pub eps_m: f64,
    pub mu_c: [f64; 2],
    pub mu_m: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig {
            eps_c: [-3.0, 0.5],
            eps_c_rule: None,
            resonant_mode: None,
            rho: -0.01,
            tune: true,
            eps_m: 1.0,
            mu_c: [1.0, 0.0],
            mu_m: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaRule {
    /// `omega = delta^{1/3}`.
    DeltaCubeRoot,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveConfig {
    pub directions: Vec<[f64; 3]>,
    pub amplitude: f64,
    pub omega: f64,
    pub omega_rule: Option<OmegaRule>,
}

impl Default for WaveConfig {
    fn default() -> Self {
        WaveConfig {
            directions: vec![[1.0, 0.0, 0.0]],
            amplitude: plasmonrod::solver::DEFAULT_AMPLITUDE,
            omega: 0.5,
            omega_rule: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub slice: bool,
    pub rows: usize,
    pub cols: usize,
    pub box_scale: f64,
    pub x1: f64,
    pub energies: bool,
    pub vtk: bool,
    pub normalize: bool,
    pub modes: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            slice: true,
            rows: 201,
            cols: 201,
            box_scale: 1.5,
            x1: 0.0,
            energies: true,
            vtk: false,
            normalize: true,
            modes: plasmonrod::spectral::DEFAULT_MODES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Omega,
    Rho,
    Delta,
    EpsCReal,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub omegas: Vec<f64>,
    /// `|rho| = omega^s`.
    pub s: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            omegas: vec![0.04, 0.02, 0.01],
            s: 2.0,
        }
    }
}

/// A scenario as written in the file; rules are still unexpanded.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub mode: Mode,
    pub resolution: Option<Resolution>,
    pub geometry: GeometryConfig,
    pub material: MaterialConfig,
    pub wave: WaveConfig,
    pub output: OutputConfig,
    pub sweep: Option<SweepConfig>,
    pub scaling: Option<ScalingConfig>,
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

impl ScenarioFile {
    pub fn parse(src: &str, origin: &str) -> Result<Self, HarnessError> {
        toml::from_str(src).map_err(|e| {
            let msg = e.message().to_string();
            match e.span() {
                Some(span) => {
                    let (l, c) = line_col(src, span.start);
                    HarnessError::Config(format!("{origin}:{l}:{c}: {msg}"))
                }
                None => HarnessError::Config(format!("{origin}: {msg}")),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&src, &path.display().to_string())
    }

    /// Straight rod of length 4, radius 1/4, `omega = delta^{1/3}`, `eps_c = -1 + i omega^4`,
    /// amplitude 1e3, incident along x1 and x3.
    pub fn figure1() -> Self {
        ScenarioFile {
            mode: Mode::Figure1,
            geometry: GeometryConfig::default(),
            material: MaterialConfig {
                eps_c_rule: Some(EpsRule::Omega4),
                ..MaterialConfig::default()
            },
            wave: WaveConfig {
                directions: vec![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
                amplitude: 1e3,
                omega_rule: Some(OmegaRule::DeltaCubeRoot),
                ..WaveConfig::default()
            },
            ..ScenarioFile::default()
        }
    }

    /// As [`ScenarioFile::figure1`] on the curved centerline.
    pub fn figure2() -> Self {
        let mut s = Self::figure1();
        s.mode = Mode::Figure2;
        s.geometry.kind = GeometryKind::EllipticArc;
        s
    }
}

/// Parameters after rule expansion.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub omega: f64,
    pub eps_c: [f64; 2],
    pub mu_c: [f64; 2],
    pub eps_m: f64,
    pub mu_m: f64,
    pub delta: f64,
    pub n_axial: usize,
    pub n_circum: usize,
    pub sphere_m: usize,
}

impl Resolved {
    pub fn eps_c(&self) -> C64 {
        C64::new(self.eps_c[0], self.eps_c[1])
    }

    pub fn mu_c(&self) -> C64 {
        C64::new(self.mu_c[0], self.mu_c[1])
    }
}

impl ScenarioFile {
    /// Expands the frequency and permittivity rules and fills resolution defaults.
    pub fn resolve(&self, fallback: Resolution) -> Result<Resolved, HarnessError> {
        let res = self.resolution.unwrap_or(fallback);
        let g = &self.geometry;
        let omega = match self.wave.omega_rule {
            Some(OmegaRule::DeltaCubeRoot) => g.delta.cbrt(),
            None => self.wave.omega,
        };
        let eps_c = match self.material.eps_c_rule {
            Some(EpsRule::Omega4) => [-1.0, omega.powi(4)],
            None => self.material.eps_c,
        };
        let (na, nc) = res.rod();
        let r = Resolved {
            omega,
            eps_c,
            mu_c: self.material.mu_c,
            eps_m: self.material.eps_m,
            mu_m: self.material.mu_m,
            delta: g.delta,
            n_axial: g.n_axial.unwrap_or(na),
            n_circum: g.n_circum.unwrap_or(nc),
            sphere_m: g.m.unwrap_or(res.sphere()),
        };
        self.validate(&r)?;
        Ok(r)
    }

    fn validate(&self, r: &Resolved) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(r.omega.is_finite() && r.omega > 0.0) {
            return bad(format!("wave.omega must be positive, got {}", r.omega));
        }
        if !(r.eps_m > 0.0 && r.mu_m > 0.0) {
            return bad("material.eps_m and material.mu_m must be positive".into());
        }
        if self.wave.directions.is_empty() {
            return bad("wave.directions must not be empty".into());
        }
        for d in &self.wave.directions {
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if (n - 1.0).abs() > 1e-12 {
                return bad(format!("wave.directions entry {d:?} is not a unit vector"));
            }
        }
        if self.output.rows < 2 || self.output.cols < 2 {
            return bad("output.rows and output.cols must be at least 2".into());
        }
        if self.output.box_scale <= 1.0 {
            return bad("output.box_scale must exceed 1".into());
        }
        if self.geometry.kind == GeometryKind::Custom && self.geometry.points.len() < 2 {
            return bad("geometry.points needs at least two points for a custom curve".into());
        }
        if self.mode == Mode::Scan {
            match &self.sweep {
                None => return bad("mode = \"scan\" needs a [sweep] table".into()),
                Some(s) if s.values.is_empty() => return bad("sweep.values must not be empty".into()),
                Some(s) => {
                    let positive = matches!(s.axis, SweepAxis::Omega | SweepAxis::Delta);
                    if positive && s.values.iter().any(|v| !(*v > 0.0)) {
                        return bad(format!("sweep.values on axis {:?} must be positive", s.axis));
                    }
                    if s.axis == SweepAxis::Rho && s.values.iter().any(|v| *v == 0.0) {
                        return bad("sweep.values on axis rho must be nonzero".into());
                    }
                }
            }
        }
        if self.mode == Mode::Scaling {
            let s = self.scaling.clone().unwrap_or_default();
            if s.omegas.is_empty() || s.omegas.iter().any(|w| !(*w > 0.0)) {
                return bad("scaling.omegas must be positive and non-empty".into());
            }
        }
        Ok(())
    }
}
