use super::*;
use crate::geometry::stencil::d2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn zero_rhs(n: usize, res: usize) -> SolverConfig {
    SolverConfig::new(n, res, RhsModel::Constant { value: 0.0 })
}

/// The fourth-order second difference maps `cos x` to `−s(h) cos x`.
fn d2_symbol(h: f64) -> f64 {
    (30.0 - 32.0 * h.cos() + 2.0 * (2.0 * h).cos()) / (12.0 * h * h)
}

fn smooth_field(grid: TorusGrid, rng: &mut ChaCha8Rng, amp: f64) -> ScalarField {
    let d = grid.dims();
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..3)
        .map(|_| ((0..d).map(|_| rng.gen_range(-1i32..=1) as f64).collect(), rng.gen_range(-amp..amp), rng.gen_range(0.0..6.28)))
        .collect();
    ScalarField::from_fn(grid, |x| modes.iter().map(|(k, a, ph)| a * (k.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + ph).sin()).sum())
}

#[test]
fn residual_vanishes_at_trivial_solution() {
    for n in [2, 3] {
        let cfg = zero_rhs(n, 4);
        let r = residual(&ScalarField::zeros(cfg.grid().unwrap()), &cfg).unwrap();
        assert!(r.sup_abs() < 1e-15, "n = {n}");
    }
}

#[test]
fn manufactured_residual_is_the_stencil_error() {
    let delta = 1.0;
    let (phi, cfg) = manufactured_case(2, 32, delta).unwrap();
    let r = residual(&phi, &cfg).unwrap();
    let s = d2_symbol(phi.grid.spacing());
    let mut worst = 0.0f64;
    for idx in 0..phi.grid.len() {
        let c = phi.grid.coords(idx)[0].cos();
        let want = (1.0 - 0.5 * delta * s * c).ln() - (1.0 - 0.5 * delta * c).ln();
        worst = worst.max((r.samples[idx] - want).abs());
    }
    assert!(worst < 1e-12, "{worst}");
    assert!(r.sup_abs() < 2e-5);
}

#[test]
fn residual_reports_cone_violation() {
    let cfg = zero_rhs(2, 8);
    let g = cfg.grid().unwrap();
    let phi = ScalarField::from_fn(g, |x| 3.0 * x[0].cos());
    assert!(matches!(residual(&phi, &cfg), Err(Error::FieldConeViolation { .. })));
}

#[test]
fn linearization_at_identity_is_half_laplacian() {
    let cfg = zero_rhs(2, 8);
    let g = cfg.grid().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = smooth_field(g, &mut rng, 1.0);
    let l = linearized_apply(&ScalarField::zeros(g), &u, &cfg).unwrap();
    let lap: Vec<f64> = (0..g.len()).map(|i| (0..4).map(|a| d2(&g, &u.samples, a)[i]).sum::<f64>()).collect();
    for i in 0..g.len() {
        assert!((l.samples[i] - 0.5 * lap[i]).abs() < 1e-12);
    }
    let c = ScalarField::from_fn(g, |_| 2.5);
    let phi = smooth_field(g, &mut rng, 0.05);
    assert!(linearized_apply(&phi, &c, &cfg).unwrap().sup_abs() < 1e-12);
}

#[test]
fn constant_frame_coefficients_drop_zero_terms() {
    let (phi, cfg) = manufactured_case(2, 8, 0.5).unwrap();
    let p = Problem::new(&cfg, 1.0).unwrap();
    let ev = p.evaluate(&phi).unwrap();
    let lin = Linearization::new(&ev, &p.frame, 0.0);
    assert_eq!(lin.active_terms(), (4, 0, false));
}

fn frechet_errors(cfg: &SolverConfig, phi: &ScalarField, u: &ScalarField) -> Vec<f64> {
    let lin = linearized_apply(phi, u, cfg).unwrap();
    [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&h| {
            let shifted = |s: f64| {
                let mut f = phi.clone();
                f.samples.iter_mut().zip(&u.samples).for_each(|(v, du)| *v += s * du);
                residual(&f, cfg).unwrap()
            };
            let (up, dn) = (shifted(h), shifted(-h));
            (0..phi.grid.len()).fold(0.0f64, |m, i| m.max(((up.samples[i] - dn.samples[i]) / (2.0 * h) - lin.samples[i]).abs()))
        })
        .collect()
}

#[test]
fn linearization_is_second_order_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = TorusGrid::new(2, 8).unwrap();
    let f = smooth_field(g, &mut rng, 0.1);
    let dir = tempfile::tempdir().unwrap();
    let fpath = dir.path().join("f.bin");
    crate::geometry::write_binary(&f, &fpath).unwrap();
    let configs = [
        zero_rhs(2, 8),
        manufactured_case(2, 8, 0.7).unwrap().1,
        SolverConfig::new(2, 8, RhsModel::FuYau { alpha: 0.02, f: FieldSource::File { path: fpath }, mu: FieldSource::Constant(0.05) }),
    ];
    for cfg in &configs {
        for _ in 0..3 {
            let phi = smooth_field(g, &mut rng, 0.08);
            let u = smooth_field(g, &mut rng, 1.0);
            let e = frechet_errors(cfg, &phi, &u);
            let order = (e[0] / e[2]).log2() / 2.0;
            assert!(order > 1.9 || e[2] < 1e-11, "{:?} {:?}", cfg.rhs, e);
        }
    }
}

#[test]
fn trivial_solve_stops_at_first_check() {
    let cfg = zero_rhs(2, 8);
    let rep = newton_solve(&cfg, &ScalarField::zeros(cfg.grid().unwrap())).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.iters, 1);
    assert_eq!(rep.phi.sup_abs(), 0.0);
    assert_eq!(rep.history.len(), 1);
    assert!((rep.min_sigma2 - 1.0).abs() < 1e-15);
}

#[test]
fn manufactured_solve_n2() {
    let (star, mut cfg) = manufactured_case(2, 16, 0.5).unwrap();
    cfg.gauge = Gauge::SupZero;
    let rep = newton_solve(&cfg, &ScalarField::zeros(star.grid)).unwrap();
    assert!(rep.converged, "{:?}", rep.history);
    assert!(rep.residual_linf <= cfg.newton_tol);
    assert!(rep.min_sigma2 > cfg.cone_margin);
    assert_eq!(rep.phi.sup(), 0.0);
    // the discrete solution is δ cos x₀ / s(h)
    let s = d2_symbol(star.grid.spacing());
    let exact = ScalarField::from_fn(star.grid, |x| 0.5 * x[0].cos() / s);
    assert!(gauge_aligned_error(&rep.phi, &exact).unwrap() < 1e-9);
    // 0.5·(1/s − 1) = 1.30e-4 at this resolution
    assert!(gauge_aligned_error(&rep.phi, &star).unwrap() < 1.4e-4);
    assert!((rep.c2_sup - 0.5 / s * s).abs() < 1e-3);
    let csv = history_csv(&rep.history);
    assert!(csv.starts_with("iter,residual_linf,step,min_sigma2\n"));
    assert_eq!(csv.lines().count(), rep.history.len() + 1);
}

#[test]
fn nonconvergence_is_reported() {
    let (star, mut cfg) = manufactured_case(2, 8, 0.5).unwrap();
    cfg.max_iters = 1;
    let rep = newton_solve(&cfg, &ScalarField::zeros(star.grid)).unwrap();
    assert!(!rep.converged);
    assert_eq!(rep.stop_reason, StopReason::MaxIters);
    assert_eq!(rep.iters, 1);
}

#[test]
fn fu_yau_solve_converges_without_gauge() {
    let g = TorusGrid::new(2, 8).unwrap();
    let f = ScalarField::from_fn(g, |x| 0.05 * x[2].cos());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.bin");
    crate::geometry::write_binary(&f, &path).unwrap();
    let cfg = SolverConfig::new(2, 8, RhsModel::FuYau { alpha: 0.01, f: FieldSource::File { path }, mu: FieldSource::Constant(0.0) });
    let rep = newton_solve(&cfg, &ScalarField::zeros(g)).unwrap();
    assert!(rep.converged, "{:?}", rep.history);
    assert!(!rep.gauge_applied);
    assert!(residual(&rep.phi, &cfg).unwrap().sup_abs() <= cfg.newton_tol);
}

#[test]
fn continuation_keeps_c2_bounded() {
    let (_, cfg) = manufactured_case(2, 8, 1.0).unwrap();
    let out = continuation_solve(&cfg, &[0.25, 0.5, 0.75, 1.0]).unwrap();
    assert_eq!(out.len(), 4, "{:?}", out.iter().map(|(_, r)| (r.stop_reason, r.history.clone())).collect::<Vec<_>>());
    let c2: Vec<f64> = out.iter().map(|(_, r)| r.c2_sup).collect();
    assert!(out.iter().all(|(_, r)| r.converged));
    assert!(c2.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(c2[3] < 2.0);
    // at t = 1 the manufactured right-hand side needs no shift
    assert!(out[3].1.rhs_shift.abs() < 1e-9);
    assert!(out[0].1.rhs_shift.abs() > 1e-3);
}

#[test]
fn config_validation_and_json() {
    let json = r#"{"n":2,"res":16,"rhs":{"kind":"manufactured","delta":0.5},"chi":{"kind":"identity"},
        "newton_tol":1e-9,"max_iters":20,"damping":{"backtrack":0.5,"armijo":1e-4,"min_step":1e-8},
        "cone_margin":1e-3,"gauge":"sup_zero"}"#;
    let cfg: SolverConfig = serde_json::from_str(json).unwrap();
    assert_eq!(cfg.gauge, Gauge::SupZero);
    assert_eq!(cfg.linear, LinearSettings::default());
    let back: SolverConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
    let fy: SolverConfig =
        serde_json::from_str(r#"{"n":3,"res":8,"rhs":{"kind":"fu_yau","alpha":0.1,"f":0.2,"mu":{"path":"mu.bin"}}}"#).unwrap();
    assert!(fy.rhs.depends_on_phi());

    let mut bad = cfg.clone();
    bad.chi = ChiSpec::Scaled { value: 0.0 };
    assert!(bad.validate().is_err());
    let mut bad = cfg.clone();
    bad.damping.backtrack = 1.0;
    assert!(bad.validate().is_err());
    assert!(manufactured_case(2, 16, 2.0).is_err());
    assert!(manufactured_case(2, 7, 0.5).is_err());
}
