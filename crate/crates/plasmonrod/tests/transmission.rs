use num_complex::Complex64 as C64;
use plasmonrod::asymptotics::QuasiStaticModel;
use plasmonrod::geometry::{build_centerline, build_rod_mesh, sphere_mesh, CurveKind, PointClass, RodSpec, Vec3};
use plasmonrod::kernels::Wavenumbers;
use plasmonrod::operators::StaticOperators;
use plasmonrod::solver::{field_at, resonance_strength, tune_resonance, IncidentWave, Transmission};
use plasmonrod::spectral::np_spectrum;

#[test]
fn flux_continuity_at_desk_resolution() {
    let mesh = sphere_mesh(Vec3::zeros(), 1.0, 18);
    let ops = StaticOperators::new(&mesh).unwrap();
    let mat = Wavenumbers::simple(0.5, C64::new(4.0, 0.5)).unwrap();
    let wave = IncidentWave::new(Vec3::z(), C64::new(1.0, 0.0), mat.k_m).unwrap();
    let d = Transmission::new(&mesh, &ops, mat).solve_reduced(&wave).unwrap();
    let e = 0.01 * mesh.max_diameter();
    let (mut jump, mut flux, mut n) = (0.0, 0.0, 0.0);
    for p in mesh.panels.iter().step_by(23) {
        let (uo, _, go, _) = field_at(&mesh, &d, &mat, &wave, &(p.centroid + p.normal * e), false);
        let (ui, _, gi, _) = field_at(&mesh, &d, &mat, &wave, &(p.centroid - p.normal * e), true);
        let dn = |g: [C64; 3]| g[0] * p.normal.x + g[1] * p.normal.y + g[2] * p.normal.z;
        jump += (uo - ui).norm() / uo.norm();
        let fo = dn(go) / mat.eps_m;
        flux += (fo - dn(gi) / mat.eps_c).norm() / fo.norm();
        n += 1.0;
    }
    let (jump, flux) = (jump / n, flux / n);
    println!("panels {} jump {jump:.3e} flux {flux:.3e}", mesh.len());
    assert!(jump < 0.01);
    assert!(flux < 0.05);
}

#[test]
fn resonance_strength_concentrates_at_caps() {
    let c = build_centerline(&CurveKind::Straight { length: 4.0 }).unwrap();
    let spec = RodSpec::new(c, 0.25, 16, 8);
    let mesh = build_rod_mesh(&spec).unwrap();
    let ops = StaticOperators::new(&mesh).unwrap();
    let sp = np_spectrum(&ops, mesh.len()).unwrap();
    let d = Vec3::z();
    let model = QuasiStaticModel::full_rod(&mesh, &ops, sp.clone(), C64::new(-1.0, 0.1), 1.0, 1.0, d, C64::new(1.0, 0.0))
        .unwrap();
    let j = model.dominant_mode().unwrap();
    let omega = 0.2;
    let eps_c = tune_resonance(&mesh, &ops, &sp, j, omega, -0.01, 1.0).unwrap();
    let mat = Wavenumbers::simple(omega, eps_c).unwrap();
    let wave = IncidentWave::new(d, C64::new(1e3, 0.0), mat.k_m).unwrap();
    let dens = Transmission::new(&mesh, &ops, mat).solve(&wave).unwrap();
    let mut pts = Vec::new();
    for i in 0..24 {
        let a = std::f64::consts::PI * 2.0 * i as f64 / 24.0;
        let r = 0.25 + 0.2;
        // Rings around each cap and around the middle of the facade.
        pts.push(Vec3::new(r * a.cos(), r * a.sin(), 2.0 + 0.2));
        pts.push(Vec3::new(r * a.cos(), r * a.sin(), -2.0 - 0.2));
        pts.push(Vec3::new(r * a.cos(), r * a.sin(), 0.0));
    }
    let g = resonance_strength(&mesh, &spec, &dens, &mat, &wave, pts, 0.05, true);
    let (mut cap, mut mid) = (0.0, 0.0);
    for (i, t) in g.theta.iter().enumerate() {
        assert_eq!(g.mask[i], PointClass::Outside);
        if i % 3 == 2 {
            mid += t;
        } else {
            cap += t / 2.0;
        }
    }
    assert!(cap > mid, "caps {cap} mid {mid}");
}
