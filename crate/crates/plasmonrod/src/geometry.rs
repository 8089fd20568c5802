//! Centerline curves, rotation-minimizing frames and rod surface meshes.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Default number of arclength samples stored on a centerline.
pub const DEFAULT_SAMPLES: usize = 1025;

/// Largest admissible radius as a fraction of the minimal radius of curvature.
pub const CURVATURE_GUARD: f64 = 0.6;

/// Centerline kinds understood by [`build_centerline`].
#[derive(Clone, Debug, PartialEq)]
pub enum CurveKind {
    /// Segment of the given length along the x3 axis, centred at the origin.
    Straight { length: f64 },
    /// `(0, a(cos t - 1), b sin t)` for `t` in `[-pi/2 + trim, pi/2 - trim]`.
    EllipticArc { a: f64, b: f64, trim: f64 },
    /// Polyline through user points, reparameterized by chord length.
    Custom { points: Vec<Vec3> },
}

impl CurveKind {
    /// The curved centerline used by the figure-2 scenario.
    pub fn elliptic_arc() -> Self {
        CurveKind::EllipticArc {
            a: 0.5,
            b: 2.0,
            trim: 0.3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveSample {
    /// Arclength parameter.
    pub t: f64,
    pub point: Vec3,
    pub tangent: Vec3,
}

#[derive(Clone, Debug)]
pub struct CenterlineCurve {
    pub samples: Vec<CurveSample>,
    pub p0: Vec3,
    pub q0: Vec3,
    pub arclength: f64,
    lo: Vec3,
    hi: Vec3,
}

/// Closest point on a centerline.
#[derive(Clone, Copy, Debug)]
pub struct Projection {
    pub s: f64,
    pub point: Vec3,
    pub distance: f64,
}

// 5-point Gauss-Legendre on [-1, 1].
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn gauss5(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL5.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

struct Arc {
    a: f64,
    b: f64,
}

impl Arc {
    fn point(&self, t: f64) -> Vec3 {
        Vec3::new(0.0, self.a * (t.cos() - 1.0), self.b * t.sin())
    }
    fn velocity(&self, t: f64) -> Vec3 {
        Vec3::new(0.0, -self.a * t.sin(), self.b * t.cos())
    }
    fn speed(&self, t: f64) -> f64 {
        self.velocity(t).norm()
    }
}

/// Builds an arclength-sampled centerline with [`DEFAULT_SAMPLES`] samples.
pub fn build_centerline(kind: &CurveKind) -> Result<CenterlineCurve> {
    build_centerline_with(kind, DEFAULT_SAMPLES)
}

pub fn build_centerline_with(kind: &CurveKind, n_samples: usize) -> Result<CenterlineCurve> {
    if n_samples < 2 {
        return Err(Error::InvalidCurve("need at least two samples".into()));
    }
    let samples = match kind {
        CurveKind::Straight { length } => {
            if !(length.is_finite() && *length > 0.0) {
                return Err(Error::InvalidCurve(format!("length must be positive, got {length}")));
            }
            let tangent = Vec3::new(0.0, 0.0, 1.0);
            (0..n_samples)
                .map(|i| {
                    let s = length * i as f64 / (n_samples - 1) as f64;
                    CurveSample {
                        t: s,
                        point: Vec3::new(0.0, 0.0, s - 0.5 * length),
                        tangent,
                    }
                })
                .collect()
        }
        CurveKind::EllipticArc { a, b, trim } => {
            if !(*a > 0.0 && *b > 0.0 && *trim >= 0.0 && *trim < PI / 2.0) {
                return Err(Error::InvalidCurve(format!(
                    "elliptic arc needs a, b > 0 and 0 <= trim < pi/2 (a={a}, b={b}, trim={trim})"
                )));
            }
            arc_samples(&Arc { a: *a, b: *b }, -PI / 2.0 + trim, PI / 2.0 - trim, n_samples)
        }
        CurveKind::Custom { points } => custom_samples(points)?,
    };
    CenterlineCurve::from_samples(samples)
}

fn arc_samples(arc: &Arc, t0: f64, t1: f64, n: usize) -> Vec<CurveSample> {
    let fine = 8 * n;
    let dt = (t1 - t0) / fine as f64;
    let mut cum = vec![0.0; fine + 1];
    for k in 0..fine {
        let a = t0 + k as f64 * dt;
        cum[k + 1] = cum[k] + gauss5(|t| arc.speed(t), a, a + dt);
    }
    let total = cum[fine];
    (0..n)
        .map(|i| {
            let s = total * i as f64 / (n - 1) as f64;
            let t = if i == 0 {
                t0
            } else if i == n - 1 {
                t1
            } else {
                let k = cum.partition_point(|&c| c <= s).clamp(1, fine) - 1;
                let ta = t0 + k as f64 * dt;
                let mut t = ta + dt * (s - cum[k]) / (cum[k + 1] - cum[k]);
                for _ in 0..4 {
                    let sk = cum[k] + gauss5(|u| arc.speed(u), ta, t);
                    t -= (sk - s) / arc.speed(t);
                }
                t
            };
            CurveSample {
                t: s,
                point: arc.point(t),
                tangent: arc.velocity(t).normalize(),
            }
        })
        .collect()
}

fn custom_samples(points: &[Vec3]) -> Result<Vec<CurveSample>> {
    if points.len() < 2 {
        return Err(Error::InvalidCurve("custom curve needs at least two points".into()));
    }
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::InvalidCurve("non-finite coordinate".into()));
    }
    let mut s = vec![0.0];
    for w in points.windows(2) {
        let d = (w[1] - w[0]).norm();
        if d <= 1e-12 {
            return Err(Error::InvalidCurve("consecutive points coincide".into()));
        }
        s.push(s.last().unwrap() + d);
    }
    let n = points.len();
    Ok((0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            CurveSample {
                t: s[i],
                point: points[i],
                tangent: (points[b] - points[a]).normalize(),
            }
        })
        .collect())
}

fn segment_distance(p1: Vec3, q1: Vec3, p2: Vec3, q2: Vec3) -> f64 {
    // Closest points between two segments, clamped parametrization.
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-14 * a * e {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

fn point_segment(x: &Vec3, a: &Vec3, b: &Vec3) -> (f64, f64) {
    let d = b - a;
    let len2 = d.dot(&d);
    let u = if len2 > 0.0 {
        ((x - a).dot(&d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (u, (a + d * u - x).norm())
}

impl CenterlineCurve {
    /// Validates samples and derives endpoints and arclength.
    pub fn from_samples(samples: Vec<CurveSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidCurve("need at least two samples".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::InvalidCurve("samples not strictly ordered".into()));
            }
            if (w[1].point - w[0].point).norm() <= 1e-14 {
                return Err(Error::InvalidCurve("consecutive samples coincide".into()));
            }
        }
        for s in &samples {
            if (s.tangent.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidCurve("tangent not unit length".into()));
            }
        }
        let p0 = samples[0].point;
        let q0 = samples[samples.len() - 1].point;
        if (q0 - p0).norm() <= 1e-12 {
            return Err(Error::InvalidCurve("closed curve (P0 = Q0)".into()));
        }
        let mut lo = p0;
        let mut hi = p0;
        for s in &samples {
            lo = lo.inf(&s.point);
            hi = hi.sup(&s.point);
        }
        let curve = CenterlineCurve {
            arclength: samples[samples.len() - 1].t - samples[0].t,
            p0,
            q0,
            samples,
            lo,
            hi,
        };
        if curve.self_intersects() {
            return Err(Error::InvalidCurve("curve self-intersects".into()));
        }
        Ok(curve)
    }

    fn self_intersects(&self) -> bool {
        let pts = self.coarse_points(512);
        let n = pts.len();
        let scale = self.arclength;
        for i in 0..n.saturating_sub(1) {
            for j in (i + 2)..n - 1 {
                if segment_distance(pts[i], pts[i + 1], pts[j], pts[j + 1]) < 1e-9 * scale {
                    return true;
                }
            }
        }
        false
    }

    fn coarse_points(&self, max: usize) -> Vec<Vec3> {
        let n = self.samples.len();
        let stride = n.div_ceil(max).max(1);
        let mut pts: Vec<Vec3> = self.samples.iter().step_by(stride).map(|s| s.point).collect();
        if (n - 1) % stride != 0 {
            pts.push(self.q0);
        }
        pts
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, self.arclength) + self.samples[0].t;
        let n = self.samples.len();
        let k = self.samples.partition_point(|c| c.t <= s).clamp(1, n - 1) - 1;
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        (k, ((s - a.t) / (b.t - a.t)).clamp(0.0, 1.0))
    }

    /// Cubic Hermite interpolation of the centerline at arclength `s`.
    pub fn point_at(&self, s: f64) -> Vec3 {
        let (k, u) = self.locate(s);
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        let h = b.t - a.t;
        let u2 = u * u;
        let u3 = u2 * u;
        a.point * (2.0 * u3 - 3.0 * u2 + 1.0)
            + a.tangent * (h * (u3 - 2.0 * u2 + u))
            + b.point * (-2.0 * u3 + 3.0 * u2)
            + b.tangent * (h * (u3 - u2))
    }

    pub fn tangent_at(&self, s: f64) -> Vec3 {
        let (k, u) = self.locate(s);
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        let h = b.t - a.t;
        let u2 = u * u;
        let d = (a.point - b.point) * ((6.0 * u2 - 6.0 * u) / h)
            + a.tangent * (3.0 * u2 - 4.0 * u + 1.0)
            + b.tangent * (3.0 * u2 - 2.0 * u);
        d.normalize()
    }

    /// Point, first and second derivative of the Hermite interpolant at arclength `s`.
    fn hermite(&self, s: f64) -> (Vec3, Vec3, Vec3) {
        let (k, u) = self.locate(s);
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        let h = b.t - a.t;
        let (u2, u3) = (u * u, u * u * u);
        let p = a.point * (2.0 * u3 - 3.0 * u2 + 1.0)
            + a.tangent * (h * (u3 - 2.0 * u2 + u))
            + b.point * (-2.0 * u3 + 3.0 * u2)
            + b.tangent * (h * (u3 - u2));
        let d1 = (a.point - b.point) * ((6.0 * u2 - 6.0 * u) / h)
            + a.tangent * (3.0 * u2 - 4.0 * u + 1.0)
            + b.tangent * (3.0 * u2 - 2.0 * u);
        let d2 = (a.point - b.point) * ((12.0 * u - 6.0) / (h * h))
            + a.tangent * ((6.0 * u - 4.0) / h)
            + b.tangent * ((6.0 * u - 2.0) / h);
        (p, d1, d2)
    }

    /// Closest point on the interpolated centerline: polyline search, then Newton steps on
    /// `(c(s) - x) . c'(s) = 0`.
    pub fn project(&self, x: &Vec3) -> Projection {
        let mut best = (f64::INFINITY, 0usize, 0.0);
        for (k, w) in self.samples.windows(2).enumerate() {
            let (u, d) = point_segment(x, &w[0].point, &w[1].point);
            if d < best.0 {
                best = (d, k, u);
            }
        }
        let (_, k, u) = best;
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        let mut s = a.t + u * (b.t - a.t) - self.samples[0].t;
        for _ in 0..8 {
            let (p, d1, d2) = self.hermite(s);
            let f = (p - x).dot(&d1);
            let df = d1.dot(&d1) + (p - x).dot(&d2);
            if df <= 0.0 {
                break;
            }
            let next = (s - f / df).clamp(0.0, self.arclength);
            let step = (next - s).abs();
            s = next;
            if step < 1e-15 * (1.0 + self.arclength) {
                break;
            }
        }
        let point = self.point_at(s);
        Projection {
            s,
            point,
            distance: (x - point).norm(),
        }
    }

    /// Distance to the curve, with an early exit once it is known to exceed `cutoff`.
    pub fn distance(&self, x: &Vec3, cutoff: f64) -> f64 {
        let outside = (self.lo - x).sup(&(x - self.hi)).sup(&Vec3::zeros());
        if outside.norm() > cutoff {
            return outside.norm();
        }
        self.project(x).distance
    }

    /// Minimal radius of curvature estimated from consecutive tangents.
    pub fn min_curvature_radius(&self) -> f64 {
        let mut kmax: f64 = 0.0;
        for w in self.samples.windows(2) {
            let angle = w[0].tangent.dot(&w[1].tangent).clamp(-1.0, 1.0).acos();
            kmax = kmax.max(angle / (w[1].t - w[0].t));
        }
        if kmax <= 1e-12 {
            f64::INFINITY
        } else {
            1.0 / kmax
        }
    }

    /// Axis-aligned bounding box of the samples.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        (self.lo, self.hi)
    }
}

/// Orthonormal frames `(n1, n2)` spanning the normal plane at each sample.
#[derive(Clone, Debug)]
pub struct FrameField {
    pub n1: Vec<Vec3>,
    pub n2: Vec<Vec3>,
}

fn initial_normal(t: &Vec3) -> Vec3 {
    let mut best = 0;
    for i in 1..3 {
        if t[i].abs() < t[best].abs() {
            best = i;
        }
    }
    let mut e = Vec3::zeros();
    e[best] = 1.0;
    (e - t * t.dot(&e)).normalize()
}

/// Double-reflection frame propagation along the samples.
pub fn rotation_minimizing_frames(curve: &CenterlineCurve) -> FrameField {
    let s = &curve.samples;
    let mut n1 = Vec::with_capacity(s.len());
    n1.push(initial_normal(&s[0].tangent));
    for i in 0..s.len() - 1 {
        let r = n1[i];
        let v1 = s[i + 1].point - s[i].point;
        let c1 = v1.dot(&v1);
        let rl = r - v1 * (2.0 / c1 * v1.dot(&r));
        let tl = s[i].tangent - v1 * (2.0 / c1 * v1.dot(&s[i].tangent));
        let v2 = s[i + 1].tangent - tl;
        let c2 = v2.dot(&v2);
        let mut next = if c2 > 1e-300 {
            rl - v2 * (2.0 / c2 * v2.dot(&rl))
        } else {
            rl
        };
        let t = s[i + 1].tangent;
        next = (next - t * t.dot(&next)).normalize();
        n1.push(next);
    }
    let n2 = s.iter().zip(&n1).map(|(c, a)| c.tangent.cross(a)).collect();
    FrameField { n1, n2 }
}

impl FrameField {
    /// Frame at arclength `s`, interpolated between samples and re-orthonormalized.
    pub fn frame_at(&self, curve: &CenterlineCurve, s: f64) -> (Vec3, Vec3, Vec3) {
        let (k, u) = curve.locate(s);
        let t = curve.tangent_at(s);
        let raw = self.n1[k] * (1.0 - u) + self.n1[k + 1] * u;
        let n1 = (raw - t * t.dot(&raw)).normalize();
        (t, n1, t.cross(&n1))
    }
}

/// Rod geometry and mesh resolution.
#[derive(Clone, Debug)]
pub struct RodSpec {
    pub curve: CenterlineCurve,
    pub delta: f64,
    pub n_axial: usize,
    pub n_circum: usize,
    pub cap_refine: usize,
}

impl RodSpec {
    pub fn new(curve: CenterlineCurve, delta: f64, n_axial: usize, n_circum: usize) -> Self {
        RodSpec {
            curve,
            delta,
            n_axial,
            n_circum,
            cap_refine: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::InvalidSpec(format!("delta must be positive, got {}", self.delta)));
        }
        if self.n_axial == 0 || self.cap_refine == 0 {
            return Err(Error::InvalidSpec("n_axial and cap_refine must be positive".into()));
        }
        if self.n_circum < 8 || self.n_circum % 4 != 0 {
            return Err(Error::InvalidSpec(format!(
                "n_circum must be a multiple of 4 and at least 8, got {}",
                self.n_circum
            )));
        }
        let rmin = self.curve.min_curvature_radius();
        if self.delta > CURVATURE_GUARD * rmin {
            return Err(Error::InvalidSpec(format!(
                "delta {} exceeds {CURVATURE_GUARD} x minimal curvature radius {rmin:.4}",
                self.delta
            )));
        }
        let stride = self.curve.samples.len().div_ceil(256).max(1);
        let pts: Vec<&CurveSample> = self.curve.samples.iter().step_by(stride).collect();
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                if b.t - a.t > PI * self.delta && (b.point - a.point).norm() <= 2.0 * self.delta {
                    return Err(Error::InvalidSpec(format!(
                        "tube of radius {} is not embedded near arclength {:.3}",
                        self.delta, a.t
                    )));
                }
            }
        }
        Ok(())
    }

    fn axial_stations(&self) -> Vec<f64> {
        let l = self.curve.arclength;
        let h = l / self.n_axial as f64;
        let mut s = Vec::new();
        for i in 0..self.n_axial {
            let start = i as f64 * h;
            let pieces = if i == 0 || i + 1 == self.n_axial {
                self.cap_refine
            } else {
                1
            };
            for p in 0..pieces {
                s.push(start + h * p as f64 / pieces as f64);
            }
        }
        s.push(l);
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    CapA,
    Facade,
    CapB,
}

impl Region {
    pub fn tag(self) -> &'static str {
        match self {
            Region::CapA => "cap_a",
            Region::Facade => "facade",
            Region::CapB => "cap_b",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Panel {
    pub vertices: [Vec3; 3],
    pub centroid: Vec3,
    pub normal: Vec3,
    pub area: f64,
    pub region: Region,
    /// Nearest centerline point.
    pub foot: Vec3,
    /// Arclength of the foot.
    pub foot_s: f64,
    /// Longest edge.
    pub diameter: f64,
}

impl Panel {
    fn new(vertices: [Vec3; 3], region: Region, foot: Vec3, foot_s: f64) -> Self {
        let centroid = (vertices[0] + vertices[1] + vertices[2]) / 3.0;
        let cr = (vertices[1] - vertices[0]).cross(&(vertices[2] - vertices[0]));
        let area = 0.5 * cr.norm();
        let diameter = (vertices[1] - vertices[0])
            .norm()
            .max((vertices[2] - vertices[1]).norm())
            .max((vertices[0] - vertices[2]).norm());
        Panel {
            vertices,
            centroid,
            normal: cr.normalize(),
            area,
            region,
            foot,
            foot_s,
            diameter,
        }
    }
}

/// Flat-triangle surface mesh with region tags.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub panels: Vec<Panel>,
    pub total_area: f64,
    /// Set when some panel is larger than the rod radius.
    pub coarse: bool,
}

impl SurfaceMesh {
    fn assemble(vertices: Vec<Vec3>, tagged: Vec<([usize; 3], Region, Vec3, f64)>, radius: f64) -> Self {
        let mut triangles = Vec::with_capacity(tagged.len());
        let mut panels = Vec::with_capacity(tagged.len());
        for (tri, region, foot, foot_s) in tagged {
            triangles.push(tri);
            panels.push(Panel::new(
                [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]],
                region,
                foot,
                foot_s,
            ));
        }
        let total_area = panels.iter().map(|p| p.area).sum();
        let coarse = panels.iter().any(|p| p.diameter > radius);
        SurfaceMesh {
            vertices,
            triangles,
            panels,
            total_area,
            coarse,
        }
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn areas(&self) -> Vec<f64> {
        self.panels.iter().map(|p| p.area).collect()
    }

    pub fn max_diameter(&self) -> f64 {
        self.panels.iter().map(|p| p.diameter).fold(0.0, f64::max)
    }

    pub fn indices(&self, region: Region) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.panels[i].region == region).collect()
    }

    /// Enclosed volume by the divergence theorem.
    pub fn volume(&self) -> f64 {
        self.panels
            .iter()
            .map(|p| p.centroid.dot(&p.normal) * p.area)
            .sum::<f64>()
            / 3.0
    }

    /// True when every edge is shared by exactly two triangles with opposite orientation.
    pub fn is_watertight(&self) -> bool {
        use std::collections::HashMap;
        let mut edges: HashMap<(usize, usize), i32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a, b)).or_default() += 1;
            }
        }
        edges
            .iter()
            .all(|(&(a, b), &c)| c == 1 && edges.get(&(b, a)) == Some(&1))
    }

    /// Generalized winding number; close to 1 inside and 0 outside.
    pub fn winding_number(&self, x: &Vec3) -> f64 {
        let mut omega = 0.0;
        for p in &self.panels {
            let a = p.vertices[0] - x;
            let b = p.vertices[1] - x;
            let c = p.vertices[2] - x;
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            omega += 2.0 * num.atan2(den);
        }
        omega / (4.0 * PI)
    }

    /// One panel per line: nine vertex coordinates followed by the region tag.
    pub fn write_triangle_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for p in &self.panels {
            for v in &p.vertices {
                write!(w, "{:e} {:e} {:e} ", v.x, v.y, v.z)?;
            }
            writeln!(w, "{}", p.region.tag())?;
        }
        Ok(())
    }
}

struct Hemisphere {
    center: Vec3,
    n1: Vec3,
    n2: Vec3,
    axis: Vec3,
    radius: f64,
}

/// Octant-subdivided hemisphere welded to an existing equator ring of `4m` vertices.
fn add_hemisphere(
    h: &Hemisphere,
    m: usize,
    equator: &[usize],
    vertices: &mut Vec<Vec3>,
) -> Vec<[usize; 3]> {
    assert_eq!(equator.len(), 4 * m);
    let mut rows: Vec<Vec<usize>> = vec![equator.to_vec()];
    for r in 1..=m {
        let count = if r == m { 1 } else { 4 * (m - r) };
        let elev = 0.5 * PI * r as f64 / m as f64;
        let row = (0..count)
            .map(|k| {
                let az = 2.0 * PI * k as f64 / count as f64;
                let dir = h.n1 * (elev.cos() * az.cos())
                    + h.n2 * (elev.cos() * az.sin())
                    + h.axis * elev.sin();
                vertices.push(h.center + dir * h.radius);
                vertices.len() - 1
            })
            .collect();
        rows.push(row);
    }
    let mut tris = Vec::with_capacity(4 * m * m);
    for r in 0..m {
        let w = m - r;
        let lo = &rows[r];
        let hi = &rows[r + 1];
        let at = |row: &Vec<usize>, k: usize| row[k % row.len()];
        for q in 0..4 {
            let l = |i: usize| at(lo, q * w + i);
            let u = |i: usize| at(hi, q * (w - 1) + i);
            for i in 0..w - 1 {
                tris.push([l(i), l(i + 1), u(i)]);
                tris.push([l(i + 1), u(i + 1), u(i)]);
            }
            tris.push([l(w - 1), l(w), u(w - 1)]);
        }
    }
    for t in &mut tris {
        let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
        let n = (b - a).cross(&(c - a));
        if n.dot(&((a + b + c) / 3.0 - h.center)) < 0.0 {
            t.swap(1, 2);
        }
    }
    tris
}

/// Tube of radius `delta` swept along the centerline, closed by hemispherical caps.
pub fn build_rod_mesh(spec: &RodSpec) -> Result<SurfaceMesh> {
    spec.validate()?;
    let curve = &spec.curve;
    let frames = rotation_minimizing_frames(curve);
    let nc = spec.n_circum;
    let stations = spec.axial_stations();
    let mut vertices = Vec::new();
    let mut rings = Vec::with_capacity(stations.len());
    for &s in &stations {
        let c = curve.point_at(s);
        let (_, n1, n2) = frames.frame_at(curve, s);
        let ring: Vec<usize> = (0..nc)
            .map(|j| {
                let phi = 2.0 * PI * j as f64 / nc as f64;
                vertices.push(c + (n1 * phi.cos() + n2 * phi.sin()) * spec.delta);
                vertices.len() - 1
            })
            .collect();
        rings.push(ring);
    }
    let mut tagged = Vec::new();
    for i in 0..stations.len() - 1 {
        for j in 0..nc {
            let a = rings[i][j];
            let b = rings[i][(j + 1) % nc];
            let c = rings[i + 1][(j + 1) % nc];
            let d = rings[i + 1][j];
            for mut t in [[a, b, c], [a, c, d]] {
                let (pa, pb, pc) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
                let centroid = (pa + pb + pc) / 3.0;
                let proj = curve.project(&centroid);
                if (pb - pa).cross(&(pc - pa)).dot(&(centroid - proj.point)) < 0.0 {
                    t.swap(1, 2);
                }
                tagged.push((t, Region::Facade, proj.point, proj.s));
            }
        }
    }
    let m = nc / 4;
    let (ta, na1, na2) = frames.frame_at(curve, 0.0);
    let cap_a = add_hemisphere(
        &Hemisphere {
            center: curve.p0,
            n1: na1,
            n2: na2,
            axis: -ta,
            radius: spec.delta,
        },
        m,
        &rings[0],
        &mut vertices,
    );
    let (tb, nb1, nb2) = frames.frame_at(curve, curve.arclength);
    let cap_b = add_hemisphere(
        &Hemisphere {
            center: curve.q0,
            n1: nb1,
            n2: nb2,
            axis: tb,
            radius: spec.delta,
        },
        m,
        &rings[rings.len() - 1],
        &mut vertices,
    );
    let mut all: Vec<_> = cap_a
        .into_iter()
        .map(|t| (t, Region::CapA, curve.p0, 0.0))
        .collect();
    all.extend(tagged);
    all.extend(
        cap_b
            .into_iter()
            .map(|t| (t, Region::CapB, curve.q0, curve.arclength)),
    );
    Ok(SurfaceMesh::assemble(vertices, all, spec.delta))
}

/// Sphere made of two octant hemispheres; upper half tagged `CapA`, lower `CapB`.
pub fn sphere_mesh(center: Vec3, radius: f64, m: usize) -> SurfaceMesh {
    let mut vertices = Vec::new();
    let equator: Vec<usize> = (0..4 * m)
        .map(|k| {
            let az = 2.0 * PI * k as f64 / (4 * m) as f64;
            vertices.push(center + Vec3::new(az.cos(), az.sin(), 0.0) * radius);
            vertices.len() - 1
        })
        .collect();
    let (ex, ey, ez) = (Vec3::x(), Vec3::y(), Vec3::z());
    let upper = add_hemisphere(
        &Hemisphere {
            center,
            n1: ex,
            n2: ey,
            axis: ez,
            radius,
        },
        m,
        &equator,
        &mut vertices,
    );
    let lower = add_hemisphere(
        &Hemisphere {
            center,
            n1: ex,
            n2: ey,
            axis: -ez,
            radius,
        },
        m,
        &equator,
        &mut vertices,
    );
    let mut all: Vec<_> = upper
        .into_iter()
        .map(|t| (t, Region::CapA, center, 0.0))
        .collect();
    all.extend(lower.into_iter().map(|t| (t, Region::CapB, center, 0.0)));
    SurfaceMesh::assemble(vertices, all, radius)
}

enum Part {
    CapA,
    CapB,
    Facade(Vec3),
}

fn part_of(x: &Vec3, curve: &CenterlineCurve, scale: f64) -> (Part, f64) {
    let proj = curve.project(x);
    let t0 = curve.samples[0].tangent;
    let t1 = curve.samples[curve.samples.len() - 1].tangent;
    let tol = 1e-12 * scale.max(1.0);
    if proj.s <= tol && (x - curve.p0).dot(&t0) < 0.0 {
        (Part::CapA, (x - curve.p0).norm())
    } else if proj.s >= curve.arclength - tol && (x - curve.q0).dot(&t1) > 0.0 {
        (Part::CapB, (x - curve.q0).norm())
    } else {
        (Part::Facade(proj.point), proj.distance)
    }
}

/// Maps a point of the thin rod to the unit-radius reference rod.
pub fn blowup_map(x: &Vec3, spec: &RodSpec) -> Result<Vec3> {
    let curve = &spec.curve;
    let (part, dist) = part_of(x, curve, spec.delta);
    if dist > spec.delta * (1.0 + 1e-9) {
        return Err(Error::OutsideRod {
            distance: dist,
            radius: spec.delta,
        });
    }
    Ok(match part {
        Part::CapA => curve.p0 + (x - curve.p0) / spec.delta,
        Part::CapB => curve.q0 + (x - curve.q0) / spec.delta,
        Part::Facade(z) => z + (x - z) / spec.delta,
    })
}

/// Inverse of [`blowup_map`]; requires the unit tube about the centerline to be embedded.
pub fn blowup_inverse(y: &Vec3, spec: &RodSpec) -> Result<Vec3> {
    let curve = &spec.curve;
    let (part, dist) = part_of(y, curve, 1.0);
    if dist > 1.0 + 1e-9 {
        return Err(Error::OutsideRod {
            distance: dist,
            radius: 1.0,
        });
    }
    Ok(match part {
        Part::CapA => curve.p0 + (y - curve.p0) * spec.delta,
        Part::CapB => curve.q0 + (y - curve.q0) * spec.delta,
        Part::Facade(z) => z + (y - z) * spec.delta,
    })
}

/// Maps every mesh vertex through the blowup; tags and feet are kept.
pub fn blowup_mesh(mesh: &SurfaceMesh, spec: &RodSpec) -> SurfaceMesh {
    let curve = &spec.curve;
    let mut on_cap = vec![None; mesh.vertices.len()];
    for (t, p) in mesh.triangles.iter().zip(&mesh.panels) {
        let center = match p.region {
            Region::CapA => curve.p0,
            Region::CapB => curve.q0,
            Region::Facade => continue,
        };
        for &v in t {
            on_cap[v] = Some(center);
        }
    }
    let vertices = mesh
        .vertices
        .iter()
        .zip(&on_cap)
        .map(|(x, c)| match c {
            Some(c) => c + (x - c) / spec.delta,
            None => {
                let z = curve.project(x).point;
                z + (x - z) / spec.delta
            }
        })
        .collect();
    let tagged = mesh
        .triangles
        .iter()
        .zip(&mesh.panels)
        .map(|(&t, p)| (t, p.region, p.foot, p.foot_s))
        .collect();
    SurfaceMesh::assemble(vertices, tagged, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointClass {
    Inside,
    Outside,
    /// Within the collar around the surface; carries the distance to the centerline.
    NearBoundary(f64),
}

/// Classifies `x` against the tube-plus-hemisphere model of the rod.
pub fn classify_point(x: &Vec3, spec: &RodSpec, collar: f64) -> PointClass {
    let d = spec.curve.distance(x, spec.delta + collar + 1.0);
    if (d - spec.delta).abs() < collar {
        PointClass::NearBoundary(d)
    } else if d < spec.delta {
        PointClass::Inside
    } else {
        PointClass::Outside
    }
}
