//! End-to-end acceptance suite. Each test prints one PASS/FAIL line per
//! criterion (run with `--nocapture` to see them on success).

use nonconf_ifs::cli::{run_command, Command, RunOptions};
use nonconf_ifs::config::RunConfig;
use nonconf_ifs::distortion::{empirical_distortion, theoretical_constants, verify_containment};
use nonconf_ifs::fractal::{box_dimension, julia_preimage_cloud, limit_set_cloud, rasterize};
use nonconf_ifs::maps::{builtin, global_bounds, GeneratorFamily, Rect};
use nonconf_ifs::symdyn::Word;
use nonconf_ifs::thermo::{diameter_sum, dimension_bounds, pressure, BirkhoffCache, DimensionBounds, PotentialKind};
use num_complex::Complex64;
use std::sync::OnceLock;
use std::time::Instant;

const LOG2_OVER_LOG3: f64 = 0.6309297535714574;
const BISECTION_TOL: f64 = 1e-10;

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn report(criterion: &str, pass: bool, detail: &str) -> bool {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

#[test]
fn criterion_01_moran_oracle() {
    let start = Instant::now();
    let sys = builtin::cantor_third();
    let bounds = dimension_bounds(&sys, BISECTION_TOL, &[8]).unwrap();
    let elapsed = start.elapsed();
    let ok = (bounds.t_lo - LOG2_OVER_LOG3).abs() < 1e-4
        && (bounds.t_up - LOG2_OVER_LOG3).abs() < 1e-4
        && elapsed.as_secs_f64() < 1.0;
    assert!(
        report(
            "1 (Moran oracle)",
            ok,
            &format!(
                "t_lo = {:.10}, t_up = {:.10}, target {LOG2_OVER_LOG3:.10}, {:?}",
                bounds.t_lo, bounds.t_up, elapsed
            ),
        ),
        "cantor bracket off or too slow"
    );
}

#[test]
fn criterion_02_anisotropic_bracket() {
    let sys = builtin::anisotropic_half_third();
    let bounds = dimension_bounds(&sys, BISECTION_TOL, &[8]).unwrap();
    let roots_ok = (bounds.t_up - 1.0).abs() < 1e-3 && (bounds.t_lo - LOG2_OVER_LOG3).abs() < 1e-3;

    let cloud = limit_set_cloud(&sys, 12).unwrap();
    let fit = box_dimension(&cloud, 1, 10).unwrap();
    let box_ok = fit.slope >= bounds.t_lo - 0.07 && fit.slope <= bounds.t_up + 0.07;
    let ok = roots_ok && box_ok;
    assert!(
        report(
            "2 (anisotropic bracket)",
            ok,
            &format!(
                "t_lo = {:.6}, t_up = {:.6}, box slope = {:.4} (r2 = {:.4})",
                bounds.t_lo, bounds.t_up, fit.slope, fit.r2
            ),
        ),
        "anisotropic bracket or box-count oracle failed"
    );
}

#[test]
fn criterion_03_circle_oracle() {
    let sys = builtin::quad_conjugate(c64(0.0, 0.0), c64(0.0, 0.0)).unwrap();
    let bounds = dimension_bounds(&sys, BISECTION_TOL, &[10]).unwrap();
    let ok = (bounds.t_lo - 1.0).abs() < 1e-3 && (bounds.t_up - 1.0).abs() < 1e-3;
    assert!(
        report(
            "3 (circle oracle)",
            ok,
            &format!("t_lo = {:.10}, t_up = {:.10}", bounds.t_lo, bounds.t_up),
        ),
        "conformal circle bracket must collapse to 1"
    );
}

/// b-grid used by criteria 4 and 5, ordered by b; computed once at p = 12.
fn b_grid() -> &'static Vec<(f64, DimensionBounds)> {
    static GRID: OnceLock<Vec<(f64, DimensionBounds)>> = OnceLock::new();
    GRID.get_or_init(|| {
        [-0.02, -0.01, 0.0, 0.01, 0.02]
            .iter()
            .map(|&b| {
                let sys = builtin::quad_conjugate(c64(b, 0.0), c64(0.1, 0.0)).unwrap();
                (b, dimension_bounds(&sys, BISECTION_TOL, &[12]).unwrap())
            })
            .collect()
    })
}

#[test]
fn criterion_04_dimension_above_one_probe() {
    let grid = b_grid();
    let mut all_above = true;
    let mut detail = String::new();
    for (b, bounds) in grid {
        let above = bounds.t_lo > 1.0005;
        all_above &= above;
        detail.push_str(&format!("b={b:+.3}: t_lo={:.6} t_up={:.6}; ", bounds.t_lo, bounds.t_up));
    }
    let at_zero = &grid.iter().find(|(b, _)| *b == 0.0).unwrap().1;
    let width_ok = at_zero.t_up - at_zero.t_lo <= 2e-3;
    let asym_excess = 0.01 / (4.0 * 2f64.ln());
    let excess = at_zero.t_lo - 1.0;
    let asym_ok = (excess / asym_excess - 1.0).abs() <= 0.10;
    detail.push_str(&format!(
        "b=0 width={:.2e}, excess={:.6} vs asymptotic {:.6} (rel dev {:.3})",
        at_zero.t_up - at_zero.t_lo,
        excess,
        asym_excess,
        excess / asym_excess - 1.0
    ));
    let ok = all_above && width_ok && asym_ok;
    assert!(
        report("4 (dimension > 1 probe)", ok, &detail),
        "t_lo > 1.0005 on the whole grid: {all_above}; width at b=0: {width_ok}; \
         asymptotic agreement: {asym_ok} — {detail}"
    );
}

#[test]
fn criterion_05_continuity_across_b() {
    let grid = b_grid();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for pair in grid.windows(2) {
        let d_lo = (pair[1].1.t_lo - pair[0].1.t_lo).abs();
        let d_up = (pair[1].1.t_up - pair[0].1.t_up).abs();
        worst = worst.max(d_lo).max(d_up);
        ok &= d_lo <= 0.05 && d_up <= 0.05;
    }
    assert!(
        report(
            "5 (continuity in b)",
            ok,
            &format!("largest successive root difference {worst:.5}"),
        ),
        "roots moved by more than 0.05 between neighbouring b values"
    );
}

#[test]
fn criterion_06_regularity_of_perturbed_quadratic() {
    let sys = builtin::quad_conjugate(c64(0.1, 0.0), c64(0.1, 0.0)).unwrap();
    let gb = global_bounds(&sys, 64).unwrap();
    let ok = gb.regular && gb.margin > 0.0 && gb.beta < sys.alpha;
    assert!(
        report(
            "6 (regularity)",
            ok,
            &format!(
                "K_max = {:.6}, 1/l_max^alpha = {:.6}, margin = {:.6}, beta = {:.4}",
                gb.k_max,
                1.0 / gb.l_max.powf(sys.alpha),
                gb.margin,
                gb.beta
            ),
        ),
        "perturbed quadratic must be regular with margin"
    );
}

#[test]
fn criterion_07_distortion_suite() {
    let systems = [
        ("cantor", builtin::cantor_third()),
        ("anisotropic", builtin::anisotropic_half_third()),
        (
            "quad_conjugate",
            builtin::quad_conjugate(c64(0.1, 0.0), c64(0.1, 0.0)).unwrap(),
        ),
        (
            "power_modulus",
            builtin::power_modulus(2, 2.2, c64(0.1, 0.0)).unwrap(),
        ),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (name, sys) in &systems {
        let rep = verify_containment(sys, 100, 7, 0.5).unwrap();
        ok &= rep.pass;
        // the constant recursion C_{M-1} + B_M <= C_M is re-verified inside
        // theoretical_constants; recompute here to surface it explicitly
        let gb = global_bounds(sys, 64).unwrap();
        let tc = theoretical_constants(sys, &gb, 0.5, 10).unwrap();
        let monotone = tc.c_table.windows(2).all(|w| w[0] <= w[1]);
        ok &= monotone;
        if matches!(sys.family, GeneratorFamily::Affine(_)) {
            let exact = rep
                .trials
                .iter()
                .all(|o| (o.trial.ratio_min - 1.0).abs() < 1e-10 && (o.trial.ratio_max - 1.0).abs() < 1e-10);
            ok &= exact;
        }
        detail.push_str(&format!("{name}: C_emp = {:.5}; ", rep.empirical_c));
    }
    assert!(
        report("7 (distortion suite)", ok, &detail),
        "a distortion trial escaped its C_m bound: {detail}"
    );
}

#[test]
fn criterion_08_angle_trend() {
    let sys = builtin::quad_conjugate(c64(0.0, 0.0), c64(0.0, 0.0)).unwrap();
    let words = [
        Word::new(vec![0]),
        Word::new(vec![1]),
        Word::new(vec![0, 1]),
        Word::new(vec![1, 0, 0]),
    ];
    let bases: Vec<Complex64> = (0..8)
        .map(|k| Complex64::from_polar(1.04, std::f64::consts::TAU * k as f64 / 8.0))
        .collect();
    let max_dev = |r: f64| -> f64 {
        let mut worst: f64 = 0.0;
        for w in &words {
            for &z in &bases {
                let t = empirical_distortion(&sys, w, z, r, 256).unwrap();
                worst = worst.max(t.max_angle_dev);
            }
        }
        worst
    };
    let big = max_dev(1e-2);
    let small = max_dev(1e-3);
    let ok = big >= 4.0 * small && big > 0.0;
    assert!(
        report(
            "8 (angle trend)",
            ok,
            &format!("max dev {big:.3e} at r = 1e-2 vs {small:.3e} at r = 1e-3"),
        ),
        "angle deviation must shrink at least 4x for a 10x radius cut"
    );
}

#[test]
fn criterion_09_pressure_sanity() {
    // golden-mean: P_20(0) against the spectral radius
    let golden = builtin::golden_mean_half();
    let est = pressure(&golden, PotentialKind::Upper, 0.0, 20).unwrap();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let spectral_ok = (est.value - phi.ln()).abs() < 1e-6;

    // monotone decreasing, convex in t on the sampled grid
    let quad = builtin::quad_conjugate(c64(0.1, 0.0), c64(0.1, 0.0)).unwrap();
    let cache = BirkhoffCache::build(&quad, 6).unwrap();
    let mut shape_ok = true;
    for kind in [PotentialKind::Upper, PotentialKind::Lower] {
        let values: Vec<f64> = (0..=8).map(|i| cache.pressure(kind, 0.25 * i as f64)).collect();
        shape_ok &= values.windows(2).all(|w| w[1] < w[0]);
        shape_ok &= values.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -1e-9);
    }

    // diameter sums: bounded at t_up, decaying at t_up + 0.2
    let circle = builtin::quad_conjugate(c64(0.0, 0.0), c64(0.0, 0.0)).unwrap();
    let sums: Vec<f64> = [6u32, 8, 10, 12]
        .iter()
        .map(|&p| diameter_sum(&circle, 1.0, p).unwrap())
        .collect();
    let lo = sums.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = sums.iter().cloned().fold(0.0, f64::max);
    let bounded_ok = hi / lo <= 3.0;
    let decayed: Vec<f64> = [6u32, 8, 10, 12]
        .iter()
        .map(|&p| diameter_sum(&circle, 1.2, p).unwrap())
        .collect();
    let decay_ok = decayed.windows(2).all(|w| w[1] < w[0]);

    let ok = spectral_ok && shape_ok && bounded_ok && decay_ok;
    assert!(
        report(
            "9 (pressure sanity)",
            ok,
            &format!(
                "P_20(0) = {:.9} vs log phi = {:.9}; diam sums at t_up: {:?}; at t_up+0.2: {:?}",
                est.value,
                phi.ln(),
                sums,
                decayed
            ),
        ),
        "pressure sanity failed: spectral {spectral_ok}, shape {shape_ok}, \
         bounded {bounded_ok}, decay {decay_ok}"
    );
}

#[test]
fn criterion_10_sweep_determinism() {
    let config_text = r#"{
        "schema": 1,
        "family": {"kind": "quad_conjugate", "b": [0.0, 0.0], "c": [0.1, 0.0]},
        "p_schedule": [4],
        "sweep": {"axes": [{"param": "b_re", "values": [0.0, 0.01, 0.02]}]}
    }"#;
    let config = RunConfig::from_json(config_text).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let opts = |dir: &std::path::Path, resume: bool| RunOptions {
        out_dir: Some(dir.to_path_buf()),
        seed: None,
        jobs: Some(2),
        resume,
    };

    assert_eq!(run_command(Command::Sweep, config.clone(), &opts(dir_a.path(), false)), 0);
    assert_eq!(run_command(Command::Sweep, config.clone(), &opts(dir_b.path(), false)), 0);
    let bytes_a = std::fs::read(dir_a.path().join("sweep.csv")).unwrap();
    let bytes_b = std::fs::read(dir_b.path().join("sweep.csv")).unwrap();
    let identical = bytes_a == bytes_b;

    // truncate to header + first row, then resume
    let text = String::from_utf8(bytes_a.clone()).unwrap();
    let prefix: String = text.split_inclusive('\n').take(2).collect();
    std::fs::write(dir_b.path().join("sweep.csv"), prefix).unwrap();
    assert_eq!(run_command(Command::Sweep, config, &opts(dir_b.path(), true)), 0);
    let resumed = std::fs::read(dir_b.path().join("sweep.csv")).unwrap();
    let resumed_identical = resumed == bytes_a;

    let ok = identical && resumed_identical;
    assert!(
        report(
            "10 (sweep determinism)",
            ok,
            &format!("fresh runs identical: {identical}; resumed identical: {resumed_identical}"),
        ),
        "sweep outputs must be byte-identical"
    );
}

#[test]
fn criterion_11_figure_regeneration() {
    let family = GeneratorFamily::QuadConjugate {
        b: c64(0.2, 0.0),
        c: c64(0.0, 0.0),
    };
    let cloud = julia_preimage_cloud(&family, 4.0, 14, 1 << 22).unwrap();
    let image = rasterize(&cloud, 512, 512, Rect::new(-2.0, 2.0, -2.0, 2.0));
    let holes = image.hole_count();
    let ok = holes == 1;
    assert!(
        report(
            "11 (figure regeneration)",
            ok,
            &format!(
                "{} points, {} white pixels, {holes} enclosed region(s)",
                cloud.points.len(),
                image.white_pixel_count()
            ),
        ),
        "the depth-14 preimage cloud must trace a single closed curve"
    );
}
