//! Mode dispatch, artifact writing and metadata.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use plasmonrod::asymptotics::{blowup_scaling_prediction, psi_quasistatic, us_asymptotic, QuasiStaticModel};
use plasmonrod::geometry::{build_centerline, build_rod_mesh, sphere_mesh, CurveKind, RodSpec, SurfaceMesh, Vec3};
use plasmonrod::kernels::Wavenumbers;
use plasmonrod::operators::StaticOperators;
use plasmonrod::solver::{
    energies, field_at, resonance_strength, slice_points, tune_resonance, Energies, EnergyGrid, FieldGrid,
    IncidentWave, Transmission,
};
use plasmonrod::spectral::{self, np_spectrum, resonant_permittivity_for_mode, tau, tau_values, NPSpectrum, ETA0};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{DominantTag, GeometryKind, Mode, ModeChoice, Resolution, Resolved, ScenarioFile, SweepAxis};
use crate::HarnessError;

type HResult<T> = Result<T, HarnessError>;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub resolution: Resolution,
}

/// Files written by a run, relative to the output directory.
#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub artifacts: Vec<String>,
    pub metadata: Value,
}

/// Geometry, operators and a lazily computed full spectrum for one resolved scenario.
pub struct Session {
    pub file: ScenarioFile,
    pub resolved: Resolved,
    pub resolution: Resolution,
    pub spec: Option<RodSpec>,
    pub mesh: SurfaceMesh,
    pub ops: StaticOperators,
    spectrum: OnceLock<NPSpectrum>,
}

fn curve_kind(file: &ScenarioFile) -> HResult<CurveKind> {
    let g = &file.geometry;
    Ok(match g.kind {
        GeometryKind::Straight => CurveKind::Straight { length: g.length },
        GeometryKind::EllipticArc => CurveKind::EllipticArc { a: g.a, b: g.b, trim: g.trim },
        GeometryKind::Custom => CurveKind::Custom {
            points: g.points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
        },
        GeometryKind::Sphere => return Err(HarnessError::Config("a sphere has no centerline".into())),
    })
}

fn c(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

impl Session {
    pub fn new(file: &ScenarioFile, fallback: Resolution) -> HResult<Self> {
        let resolution = file.resolution.unwrap_or(fallback);
        let resolved = file.resolve(resolution)?;
        let (spec, mesh) = if file.geometry.kind == GeometryKind::Sphere {
            if !(file.geometry.radius > 0.0) || resolved.sphere_m == 0 {
                return Err(HarnessError::Config("geometry.radius and geometry.m must be positive".into()));
            }
            (None, sphere_mesh(Vec3::zeros(), file.geometry.radius, resolved.sphere_m))
        } else {
            let curve = build_centerline(&curve_kind(file)?)?;
            let mut spec = RodSpec::new(curve, resolved.delta, resolved.n_axial, resolved.n_circum);
            spec.cap_refine = file.geometry.cap_refine;
            let mesh = build_rod_mesh(&spec)?;
            (Some(spec), mesh)
        };
        let ops = StaticOperators::new(&mesh)?;
        Ok(Session {
            file: file.clone(),
            resolved,
            resolution,
            spec,
            mesh,
            ops,
            spectrum: OnceLock::new(),
        })
    }

    fn rod(&self) -> HResult<&RodSpec> {
        self.spec
            .as_ref()
            .ok_or_else(|| HarnessError::Config(format!("mode {:?} needs a rod geometry", self.file.mode)))
    }

    /// Every mode of the static operator, largest `|lambda|` first.
    pub fn full_spectrum(&self) -> HResult<&NPSpectrum> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let s = np_spectrum(&self.ops, self.mesh.len())?;
        Ok(self.spectrum.get_or_init(|| s))
    }

    pub fn material(&self, omega: f64, eps_c: C64) -> HResult<Wavenumbers> {
        let r = &self.resolved;
        Ok(Wavenumbers::new(omega, eps_c, r.mu_c(), r.eps_m, r.mu_m)?)
    }

    pub fn wave(&self, material: &Wavenumbers, d: [f64; 3]) -> HResult<IncidentWave> {
        let amp = C64::new(self.file.wave.amplitude, 0.0);
        Ok(IncidentWave::new(Vec3::new(d[0], d[1], d[2]), amp, material.k_m)?)
    }

    /// Mode with the largest `|c_j|^2 / a_j` for incidence `d`.
    pub fn dominant_mode(&self, d: [f64; 3]) -> HResult<usize> {
        let sp = self.full_spectrum()?.clone();
        let r = &self.resolved;
        let dir = Vec3::new(d[0], d[1], d[2]);
        let model = QuasiStaticModel::full_rod(&self.mesh, &self.ops, sp, r.eps_c(), r.eps_m, r.mu_m, dir, C64::new(1.0, 0.0))?;
        model
            .dominant_mode()
            .ok_or_else(|| HarnessError::Numerical(plasmonrod::Error::EmptyRegion("nontrivial modes".into())))
    }

    /// Permittivity for a solve: the configured value, or a resonant one with loss `rho`.
    pub fn permittivity(&self, omega: f64, rho: f64, d: [f64; 3]) -> HResult<(C64, Option<usize>)> {
        let m = &self.file.material;
        let Some(choice) = m.resonant_mode else {
            return Ok((self.resolved.eps_c(), None));
        };
        let j = match choice {
            ModeChoice::Index(j) => j,
            ModeChoice::Named(DominantTag::Dominant) => self.dominant_mode(d)?,
        };
        let sp = self.full_spectrum()?;
        let eps = if m.tune {
            tune_resonance(&self.mesh, &self.ops, sp, j, omega, rho, self.resolved.eps_m)?
        } else {
            resonant_permittivity_for_mode(j, sp, self.resolved.eps_m, rho)?
        };
        Ok((eps, Some(j)))
    }

    /// Slice box: the rod's `(x2, x3)` bounding rectangle scaled about its centre.
    pub fn slice_box(&self) -> HResult<((f64, f64), (f64, f64))> {
        let spec = self.rod()?;
        let (lo, hi) = spec.curve.bounds();
        let s = self.file.output.box_scale;
        let half = |a: f64, b: f64| 0.5 * (b - a + 2.0 * spec.delta) * s;
        let mid = |a: f64, b: f64| 0.5 * (a + b);
        let (hy, hz) = (half(lo.y, hi.y), half(lo.z, hi.z));
        let (my, mz) = (mid(lo.y, hi.y), mid(lo.z, hi.z));
        Ok(((my - hy, mz - hz), (my + hy, mz + hz)))
    }

    pub fn energy_grid(&self) -> HResult<EnergyGrid> {
        let mut g = EnergyGrid::default_for(self.rod()?, &self.mesh);
        g.refine = self.resolution.energy_refine();
        Ok(g)
    }

    /// Block solve followed by the requested post-processing.
    pub fn solve(&self, omega: f64, eps_c: C64, d: [f64; 3], slice: bool, with_energies: bool) -> HResult<SolveOutcome> {
        let spec = self.rod()?;
        let material = self.material(omega, eps_c)?;
        let wave = self.wave(&material, d)?;
        let dens = Transmission::new(&self.mesh, &self.ops, material).solve(&wave)?;
        let grid = self.energy_grid()?;
        let grid_out = if slice {
            let o = &self.file.output;
            let (lo, hi) = self.slice_box()?;
            let pts = slice_points(o.x1, lo, hi, o.rows, o.cols);
            let mut g = resonance_strength(&self.mesh, spec, &dens, &material, &wave, pts, grid.collar, false);
            g.shape = Some((o.rows, o.cols));
            Some(g)
        } else {
            None
        };
        let max_theta = grid_out.as_ref().map(|g| {
            (0..g.points.len()).filter(|&i| g.is_valid(i)).map(|i| g.theta[i]).fold(0.0, f64::max)
        });
        let en = if with_energies {
            Some(energies(&self.mesh, spec, &dens, &material, &wave, &grid)?)
        } else {
            None
        };
        Ok(SolveOutcome {
            direction: d,
            eps_c,
            residual: dens.residual,
            condition: dens.condition,
            energies: en,
            max_theta,
            grid: grid_out,
            psi: dens.psi.clone(),
            material,
            wave,
            dens,
        })
    }
}

pub struct SolveOutcome {
    pub direction: [f64; 3],
    pub eps_c: C64,
    pub residual: f64,
    pub condition: f64,
    pub energies: Option<Energies>,
    pub max_theta: Option<f64>,
    pub grid: Option<FieldGrid>,
    pub psi: Vec<C64>,
    pub material: Wavenumbers,
    pub wave: IncidentWave,
    pub dens: plasmonrod::solver::DensityPair,
}

struct Out<'a> {
    dir: &'a Path,
    artifacts: Vec<String>,
}

impl Out<'_> {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> HResult<()> {
        let path = self.dir.join(name);
        let file = fs::File::create(&path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        f(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }
}

fn direction_label(i: usize) -> String {
    format!("d{i}")
}

fn energies_json(e: &Energies) -> Value {
    json!({ "E_o": e.e_o, "E_i": e.e_i, "electric": e.electric, "collar": e.collar, "h": e.h })
}

/// Strip separators so an error fits in one CSV field.
fn csv_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Runs `file` and writes artifacts plus `metadata.json` into `opts.out`.
pub fn run(file: &ScenarioFile, opts: &RunOptions) -> HResult<RunReport> {
    fs::create_dir_all(&opts.out).map_err(|e| HarnessError::Config(format!("{}: {e}", opts.out.display())))?;
    let session = Session::new(file, opts.resolution)?;
    let mut out = Out { dir: &opts.out, artifacts: Vec::new() };
    let details = match file.mode {
        Mode::Mesh => mesh_mode(&session, &mut out)?,
        Mode::Spectrum => spectrum_mode(&session, &mut out)?,
        Mode::Solve => solve_mode(&session, &mut out, "solve")?,
        Mode::Figure1 => solve_mode(&session, &mut out, "figure1")?,
        Mode::Figure2 => solve_mode(&session, &mut out, "figure2")?,
        Mode::Scan => scan_mode(&session, &mut out)?,
        Mode::Scaling => scaling_mode(&session, &mut out)?,
        Mode::AsymptoticCompare => compare_mode(&session, &mut out)?,
    };
    let mut artifacts = out.artifacts.clone();
    artifacts.push("metadata.json".into());
    let metadata = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "mode": file.mode,
        "resolution": session.resolution,
        "scenario": file,
        "resolved": session.resolved,
        "panels": session.mesh.len(),
        "threads": rayon::current_num_threads(),
        "artifacts": artifacts,
        "results": details,
    });
    let text = serde_json::to_string_pretty(&metadata).expect("metadata is plain data");
    out.write("metadata.json", |w| writeln!(w, "{text}"))?;
    Ok(RunReport { artifacts, metadata })
}

fn mesh_mode(s: &Session, out: &mut Out) -> HResult<Value> {
    out.write("mesh.txt", |w| s.mesh.write_triangle_list(w))?;
    Ok(json!({
        "volume": s.mesh.volume(),
        "watertight": s.mesh.is_watertight(),
        "max_diameter": s.mesh.max_diameter(),
    }))
}

fn spectrum_mode(s: &Session, out: &mut Out) -> HResult<Value> {
    let full = s.full_spectrum()?;
    let keep = s.file.output.modes.min(full.len());
    let sp = NPSpectrum {
        lambdas: full.lambdas[..keep].to_vec(),
        eigfuncs: full.eigfuncs.subcols(0, keep).to_owned(),
        norms: full.norms[..keep].to_vec(),
        areas: full.areas.clone(),
    };
    let params = tau_values(&sp.lambdas, s.resolved.eps_c(), s.resolved.eps_m, ETA0)?;
    out.write("spectrum.csv", |w| spectral::write_csv(&sp, &params, w))?;
    out.write("spectrum.txt", |w| spectral::write_report(&sp, &params, w))?;
    let clusters = sp.clusters(0.05);
    out.write("clusters.csv", |w| {
        writeln!(w, "cluster,lambda_mean,multiplicity")?;
        for (i, cl) in clusters.iter().enumerate() {
            let mean = cl.iter().map(|&j| sp.lambdas[j]).sum::<f64>() / cl.len() as f64;
            writeln!(w, "{i},{mean:e},{}", cl.len())?;
        }
        Ok(())
    })?;
    let max_moment = (1..sp.len()).map(|j| sp.moment(j).abs()).fold(0.0, f64::max);
    Ok(json!({
        "modes": sp.len(),
        "lambda0": sp.lambdas.first(),
        "max_moment": max_moment,
        "index_set": params.index_set,
        "eta0": ETA0,
    }))
}

fn solve_mode(s: &Session, out: &mut Out, prefix: &str) -> HResult<Value> {
    let f = &s.file;
    let omega = s.resolved.omega;
    let grid = s.energy_grid()?;
    let mut runs = Vec::new();
    for (i, &d) in f.wave.directions.iter().enumerate() {
        let (eps_c, mode) = s.permittivity(omega, f.material.rho, d)?;
        let mut r = s.solve(omega, eps_c, d, f.output.slice, f.output.energies)?;
        let label = direction_label(i);
        if let Some(g) = r.grid.as_mut() {
            if f.output.normalize {
                g.normalize_theta();
            }
            out.write(&format!("{prefix}_{label}_slice.csv"), |w| g.write_csv(w))?;
            if f.output.vtk {
                let (lo, hi) = s.slice_box()?;
                let o = &f.output;
                let sp = [0.0, (hi.0 - lo.0) / (o.cols - 1) as f64, (hi.1 - lo.1) / (o.rows - 1) as f64];
                let origin = Vec3::new(o.x1, lo.0, lo.1);
                out.write(&format!("{prefix}_{label}_slice.vtk"), |w| g.write_vtk(origin, sp, [1, o.cols, o.rows], w))?;
            }
        }
        if let Some(e) = &r.energies {
            out.write(&format!("{prefix}_{label}_energies.csv"), |w| e.write_csv(w))?;
        }
        let argmax = r.grid.as_ref().and_then(|g| g.argmax_re_us()).map(|k| {
            let p = r.grid.as_ref().unwrap().points[k];
            [p.x, p.y, p.z]
        });
        runs.push(json!({
            "direction": d,
            "eps_c": c(eps_c),
            "resonant_mode": mode,
            "residual": r.residual,
            "condition": r.condition,
            "energies": r.energies.as_ref().map(energies_json),
            "max_theta": r.max_theta,
            "argmax_re_us": argmax,
        }));
    }
    Ok(json!({
        "omega": omega,
        "energy_grid": {
            "h_coarse": grid.h_coarse,
            "refine": grid.refine,
            "collar": grid.collar,
            "box_min": [grid.box_min.x, grid.box_min.y, grid.box_min.z],
            "box_max": [grid.box_max.x, grid.box_max.y, grid.box_max.z],
        },
        "slice_box": s.slice_box().ok(),
        "runs": runs,
    }))
}

struct SweepRow {
    value: f64,
    direction: usize,
    eps_c: C64,
    result: HResult<(Energies, f64, f64, f64)>,
}

fn min_tau(sp: &NPSpectrum, eps_c: C64, eps_m: f64) -> f64 {
    (1..sp.len()).map(|j| tau(sp.lambdas[j], eps_c, eps_m).norm()).fold(f64::INFINITY, f64::min)
}

fn sweep_point(base: &Session, axis: SweepAxis, value: f64, d: [f64; 3]) -> (C64, HResult<(Energies, f64, f64, f64)>) {
    let owned;
    let s = if axis == SweepAxis::Delta {
        let mut f = base.file.clone();
        f.geometry.delta = value;
        match Session::new(&f, base.resolution) {
            Ok(x) => {
                owned = x;
                &owned
            }
            Err(e) => return (C64::new(f64::NAN, f64::NAN), Err(e)),
        }
    } else {
        base
    };
    let mut omega = s.resolved.omega;
    let mut rho = s.file.material.rho;
    match axis {
        SweepAxis::Omega => omega = value,
        SweepAxis::Rho => rho = value,
        _ => {}
    }
    let eps = match axis {
        SweepAxis::EpsCReal => Ok((C64::new(value, s.resolved.eps_c[1]), None)),
        _ => s.permittivity(omega, rho, d),
    };
    let eps_c = match &eps {
        Ok((e, _)) => *e,
        Err(_) => C64::new(f64::NAN, f64::NAN),
    };
    let result = eps.and_then(|(eps_c, _)| {
        let r = s.solve(omega, eps_c, d, true, true)?;
        let sp = s.full_spectrum()?;
        Ok((
            r.energies.expect("energies requested"),
            r.max_theta.unwrap_or(f64::NAN),
            min_tau(sp, eps_c, s.resolved.eps_m),
            r.condition,
        ))
    });
    (eps_c, result)
}

fn scan_mode(s: &Session, out: &mut Out) -> HResult<Value> {
    let sweep = s.file.sweep.clone().expect("validated");
    if sweep.axis != SweepAxis::Delta {
        s.full_spectrum()?;
    }
    let jobs: Vec<(f64, usize)> = sweep
        .values
        .iter()
        .flat_map(|&v| (0..s.file.wave.directions.len()).map(move |i| (v, i)))
        .collect();
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(value, i)| {
            let (eps_c, result) = sweep_point(s, sweep.axis, value, s.file.wave.directions[i]);
            SweepRow { value, direction: i, eps_c, result }
        })
        .collect();
    out.write("sweep.csv", |w| {
        writeln!(w, "value,direction,re_eps_c,im_eps_c,E_o,E_i,electric,max_theta,min_tau,condition,error")?;
        for r in &rows {
            match &r.result {
                Ok((e, th, mt, cond)) => writeln!(
                    w,
                    "{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},",
                    r.value, r.direction, r.eps_c.re, r.eps_c.im, e.e_o, e.e_i, e.electric, th, mt, cond
                )?,
                Err(err) => writeln!(
                    w,
                    "{:e},{},{:e},{:e},NaN,NaN,NaN,NaN,NaN,NaN,{}",
                    r.value,
                    r.direction,
                    r.eps_c.re,
                    r.eps_c.im,
                    csv_field(&err.to_string())
                )?,
            }
        }
        Ok(())
    })?;
    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    Ok(json!({ "axis": sweep.axis, "rows": rows.len(), "failed_rows": failed }))
}

fn scaling_mode(s: &Session, out: &mut Out) -> HResult<Value> {
    let cfg = s.file.scaling.clone().unwrap_or_default();
    let d = s.file.wave.directions[0];
    let delta = s.resolved.delta;
    let rows: Vec<HResult<(f64, f64, f64, f64)>> = cfg
        .omegas
        .par_iter()
        .map(|&omega| {
            let rho = -omega.powf(cfg.s);
            let j = match s.file.material.resonant_mode {
                Some(ModeChoice::Index(j)) => j,
                _ => s.dominant_mode(d)?,
            };
            let eps_c = tune_resonance(&s.mesh, &s.ops, s.full_spectrum()?, j, omega, rho, s.resolved.eps_m)?;
            let r = s.solve(omega, eps_c, d, false, true)?;
            let pred = blowup_scaling_prediction(omega, rho, delta)?;
            Ok((omega, rho, r.energies.expect("energies requested").e_o, pred.dominant))
        })
        .collect();
    let rows = rows.into_iter().collect::<HResult<Vec<_>>>()?;
    out.write("scaling.csv", |w| {
        writeln!(w, "omega,rho,delta,E_full,E_pred")?;
        for (omega, rho, e, p) in &rows {
            writeln!(w, "{omega:e},{rho:e},{delta:e},{e:e},{p:e}")?;
        }
        Ok(())
    })?;
    let slope = loglog_slope(&rows.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>());
    Ok(json!({ "s": cfg.s, "loglog_slope": slope }))
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Quasi-uniform points on a sphere of radius `r`.
pub fn fibonacci_sphere(n: usize, r: f64) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            Vec3::new(rho * t.cos(), rho * t.sin(), z) * r
        })
        .collect()
}

fn compare_mode(s: &Session, out: &mut Out) -> HResult<Value> {
    let spec = s.rod()?;
    let omega = s.resolved.omega;
    let sp = s.full_spectrum()?.clone();
    let radius = 10.0 * (spec.curve.arclength + 2.0 * spec.delta);
    let pts = fibonacci_sphere(64, radius);
    let h = 1e-3 * radius;
    let mut summary = Vec::new();
    let mut rows = Vec::new();
    for (i, &d) in s.file.wave.directions.iter().enumerate() {
        let (eps_c, _) = s.permittivity(omega, s.file.material.rho, d)?;
        let full = s.solve(omega, eps_c, d, false, false)?;
        let amp = C64::new(s.file.wave.amplitude, 0.0);
        let r = &s.resolved;
        let model = QuasiStaticModel::full_rod(&s.mesh, &s.ops, sp.clone(), eps_c, r.eps_m, r.mu_m, full.wave.direction, amp)?;
        let modes = model.all_modes();
        let psi_qs = psi_quasistatic(&model, omega, &modes)?;
        let areas = s.mesh.areas();
        let l2 = |v: &[C64]| v.iter().zip(&areas).map(|(z, a)| z.norm_sqr() * a).sum::<f64>().sqrt();
        let diff: Vec<C64> = full.psi.iter().zip(&psi_qs).map(|(a, b)| a - b).collect();
        let dens_err = l2(&diff) / l2(&full.psi);
        let mut probe = Vec::with_capacity(pts.len() * 7);
        for p in &pts {
            probe.push(*p);
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = h;
                probe.push(p + e);
                probe.push(p - e);
            }
        }
        let asym = us_asymptotic(&model, omega, spec.delta, &modes, &probe)?;
        let (mut num, mut den) = (0.0, 0.0);
        for (k, p) in pts.iter().enumerate() {
            let (u, us, _, gs) = field_at(&s.mesh, &full.dens, &full.material, &full.wave, p, false);
            let theta = (gs.iter().map(|z| z.re * z.re).sum::<f64>()).sqrt();
            rows.push((*p, u, us, theta, "full", i));
            let a = asym[7 * k];
            let g: Vec<f64> = (0..3).map(|c| (asym[7 * k + 1 + 2 * c].re - asym[7 * k + 2 + 2 * c].re) / (2.0 * h)).collect();
            let ta = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            rows.push((*p, full.wave.value(p) + a, a, ta, "asymptotic", i));
            num += (us - a).norm_sqr();
            den += us.norm_sqr();
        }
        summary.push((i, (num / den).sqrt(), dens_err));
    }
    out.write("compare.csv", |w| {
        writeln!(w, "x,y,z,re_u,im_u,re_us,im_us,theta,mask,source,direction")?;
        for (p, u, us, th, src, i) in &rows {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},outside,{src},{i}",
                p.x, p.y, p.z, u.re, u.im, us.re, us.im, th
            )?;
        }
        Ok(())
    })?;
    out.write("compare_summary.csv", |w| {
        writeln!(w, "direction,omega,far_field_error,density_error")?;
        for (i, e, de) in &summary {
            writeln!(w, "{i},{omega:e},{e:e},{de:e}")?;
        }
        Ok(())
    })?;
    Ok(json!({ "far_radius": radius, "points": pts.len(), "errors": summary.iter().map(|r| [r.1, r.2]).collect::<Vec<_>>() }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [0.04, 0.02, 0.01].iter().map(|&w: &f64| (w, 3.0 * w.powf(-1.5))).collect();
        assert!((loglog_slope(&pts).unwrap() + 1.5).abs() < 1e-12);
    }

    #[test]
    fn fibonacci_points_on_sphere() {
        let p = fibonacci_sphere(50, 3.0);
        assert!(p.iter().all(|x| (x.norm() - 3.0).abs() < 1e-12));
        let mean = p.iter().fold(Vec3::zeros(), |a, b| a + b) / 50.0;
        assert!(mean.norm() < 0.1);
    }

    #[test]
    fn sphere_rejected_for_solve() {
        let f = ScenarioFile::parse("[geometry]\nkind = \"sphere\"\nm = 3\n", "x").unwrap();
        let s = Session::new(&f, Resolution::Coarse).unwrap();
        assert!(matches!(s.solve(0.5, C64::new(2.0, 0.0), [1.0, 0.0, 0.0], false, false), Err(HarnessError::Config(_))));
    }
}
