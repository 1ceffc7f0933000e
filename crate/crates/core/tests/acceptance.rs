//! Acceptance criteria 1-8; one PASS/FAIL line each.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use microlab_core::constructions::{constant_profile, example_sequence, recovery_sequence};
use microlab_core::covering::{verify_cover, whitney_cover, CoverOptions, RectUnion, VerifyOptions};
use microlab_core::energy::{energy_analytic, energy_grid, evaluate_grid, EnergyParams};
use microlab_core::fields::{AnalyticProfile, BoundaryCondition, Column, GridField, Rect};
use microlab_core::minimizer::{minimize, smoothed_energy, Init, MinimizeOptions};
use microlab_core::poly::{Poly1, Poly2};
use microlab_core::sbv_limit::{limit_energy, single_jump_example};
use microlab_core::scaling_lab::{fit_exponent, log_space, sandwich_check, sweep, Regime, SweepOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn uniform_regime() -> Outcome {
    let mut worst: f64 = 0.0;
    for &theta in &[0.1, 0.25, 0.5] {
        for &p in &[1.5, 2.0, 3.0] {
            let tp = f64::powf(theta, p);
            let params = EnergyParams::unrescaled(p, theta, 1e-3).unwrap();
            let e = energy_analytic(&constant_profile(), &params).unwrap().total;
            let g = GridField::from_fn(17, 17, BoundaryCondition::DirichletLeftZero, |_, _| 0.0).unwrap();
            let eg = energy_grid(&g, &params).unwrap().total;
            worst = worst.max(((e - tp) / tp).abs()).max(((eg - tp) / tp).abs());
        }
    }
    check(worst <= 1e-12, format!("max relative error {worst:.2e}"))
}

fn sweeps() -> Vec<(f64, Vec<microlab_core::scaling_lab::SweepRecord<f64>>)> {
    let theta = 0.25;
    [2.0, 3.0]
        .iter()
        .map(|&p| {
            let tp = f64::powf(theta, p);
            let eps = log_space(tp * 1e-5, tp * 1e-1, 9);
            (p, sweep(p, theta, &eps, &SweepOptions::analytic()).unwrap())
        })
        .collect()
}

fn scaling_exponent() -> Outcome {
    let mut ok = true;
    let mut parts = vec![];
    for (p, records) in sweeps() {
        let fit = fit_exponent(&records, Regime::Branching).unwrap();
        let target = p / (p + 1.0);
        ok &= (fit.slope - target).abs() <= 0.05;
        parts.push(format!("p={p}: slope {:.4} (target {target:.4}, {} pts)", fit.slope, fit.points));
    }
    check(ok, parts.join("; "))
}

fn sandwich() -> Outcome {
    let mut ok = true;
    let mut parts = vec![];
    for (p, records) in sweeps() {
        let r = sandwich_check(&records);
        ok &= r.band <= 100.0 && r.passes;
        parts.push(format!("p={p}: ratio in [{:.3}, {:.3}], band {:.3}", r.min_ratio, r.max_ratio, r.band));
    }
    check(ok, parts.join("; "))
}

fn gamma_upper_bound() -> Outcome {
    let u = single_jump_example(0.5, 1.0, 2.0, 1.0).unwrap();
    let limit = limit_energy(&u).unwrap().total;
    let dev = |theta: f64| {
        let params = EnergyParams::rescaled(2.0, theta, 1.0).unwrap();
        let e = energy_analytic(&recovery_sequence(&u, theta).unwrap(), &params).unwrap().total;
        (e, (e - 3.5).abs())
    };
    let (e3, d3) = dev(1e-3);
    let (e1, d1) = dev(1e-1);
    check(
        (limit - 3.5).abs() < 1e-12 && d3 <= 0.05 * 3.5 && d3 < d1,
        format!("E(u) = {limit}; E(u_theta) = {e1:.6} at 1e-1, {e3:.6} at 1e-3"),
    )
}

fn example_sequence_bounds() -> Outcome {
    let (p, alpha) = (2.0, 0.9);
    let mut energies = vec![];
    let mut norms = vec![];
    let mut below = 0;
    for k in 1..=12 {
        let theta = 0.5f64.powi(k);
        let u = example_sequence(theta, alpha, p).unwrap();
        let params = EnergyParams::rescaled(p, theta, 1.0).unwrap();
        energies.push(energy_analytic(&u, &params).unwrap().total);
        let n = u.integrate_gradient(|g| g[1].abs(), "d2 L1").unwrap();
        let bound = 0.25 * theta.powf(alpha - 1.0);
        if n < bound {
            below += 1;
        }
        norms.push((n, bound));
    }
    let max = energies.iter().cloned().fold(f64::MIN, f64::max);
    let min = energies.iter().cloned().fold(f64::MAX, f64::min);
    let growth = norms[11].1 / norms[0].1;
    let monotone = norms.windows(2).all(|w| w[1].0 > w[0].0);
    check(
        max / min <= 50.0 && below == 0 && monotone && growth >= 2.0,
        format!(
            "energy max/min {:.3}; norm {:.4} -> {:.4}; bound grows x{growth:.3}",
            max / min,
            norms[0].0,
            norms[11].0
        ),
    )
}

fn random_field(seed: u64, bc: BoundaryCondition) -> GridField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = GridField::from_fn(16, 16, bc, |_, y| y).unwrap();
    let first = if bc == BoundaryCondition::None { 0 } else { 1 };
    for j in 0..16 {
        for i in first..16 {
            let v = f.get(i, j) + rng.random_range(-0.3..0.3);
            f.set(i, j, v);
        }
    }
    f
}

fn minimizer_sanity() -> Outcome {
    let mut worst: f64 = 0.0;
    let cases = [
        (EnergyParams::rescaled(2.0, 0.25, 0.5).unwrap(), BoundaryCondition::DirichletLeftIdentity, 1e-2),
        (EnergyParams::unrescaled(3.0, 0.1, 1e-3).unwrap(), BoundaryCondition::None, 1e-1),
        (EnergyParams::unrescaled(2.0, 0.25, 1e-2).unwrap(), BoundaryCondition::None, 1e-2),
    ];
    for (seed, (params, bc, delta)) in cases.into_iter().enumerate() {
        let f = random_field(seed as u64, bc);
        let (_, g) = smoothed_energy(&f, &params, delta).unwrap();
        let scale = g.values().iter().fold(0f64, |m, v| m.max(v.abs()));
        let h = 1e-6;
        for k in 0..f.values().len() {
            let (i, j) = (k % 16, k / 16);
            let mut a = f.clone();
            let mut b = f.clone();
            a.set(i, j, f.get(i, j) + h);
            b.set(i, j, f.get(i, j) - h);
            let fd = (smoothed_energy(&a, &params, delta).unwrap().0 - smoothed_energy(&b, &params, delta).unwrap().0) / (2.0 * h);
            worst = worst.max((fd - g.values()[k]).abs() / scale);
        }
    }
    let mut descent_ok = true;
    let mut finals = vec![];
    for &(p, theta) in &[(2.0, 0.25), (3.0, 0.1)] {
        let tp = f64::powf(theta, p);
        let params = EnergyParams::unrescaled(p, theta, tp).unwrap();
        let opts = MinimizeOptions {
            nx: 32,
            ny: 32,
            max_iters: 200,
            ..Default::default()
        };
        let r = minimize(&params, &opts, &Init::Constant).unwrap();
        descent_ok &= r.energy.total <= tp + 1e-6;
        finals.push(format!("{:.6e}/{tp:.6e}", r.energy.total));
    }
    check(
        worst <= 1e-5 && descent_ok,
        format!("FD gradient error {worst:.2e}; final/theta^p {}", finals.join(", ")),
    )
}

fn covering() -> Outcome {
    let domains = [
        ("square", RectUnion::unit_square()),
        ("L", RectUnion::l_shape()),
        ("slab", RectUnion::slab(1e-2).unwrap()),
    ];
    let mut ok = true;
    let mut parts = vec![];
    for (name, omega) in domains {
        let mut ns = vec![];
        for &delta in &[1.0, 1e-2] {
            let cover = whitney_cover(&omega, delta, CoverOptions::default()).unwrap();
            let rep = verify_cover(&cover, VerifyOptions::default());
            ok &= rep.passes && rep.samples == 10_000;
            ns.push(rep.constants.n);
        }
        ok &= ns[0] == ns[1];
        parts.push(format!("{name}: N={:?}", ns));
    }
    check(ok, parts.join("; "))
}

/// Piecewise-affine profiles with axis-aligned kinks.
fn affine_profiles() -> Vec<(&'static str, AnalyticProfile<f64>)> {
    let unit = Rect::unit();
    let bc = BoundaryCondition::None;
    let one_kink = Column::slab(
        0.0,
        1.0,
        0.0,
        1.0,
        vec![Poly1::constant(1.0 / 3.0)],
        vec![Poly2::affine(0.0, 0.2, -0.25), Poly2::affine(-1.0 / 3.0, 0.2, 0.75)],
    );
    let two_kinks = Column::slab(
        0.0,
        1.0,
        0.0,
        1.0,
        vec![Poly1::constant(0.3), Poly1::constant(0.71)],
        vec![
            Poly2::affine(0.0, -0.4, 0.9),
            Poly2::affine(0.33, -0.4, -0.2),
            Poly2::affine(0.33 - 0.71 * 0.7, -0.4, 0.5),
        ],
    );
    // v = 0.6 |x1 - 0.37| + 0.1 x2
    let left = Column::slab(0.0, 0.37, 0.0, 1.0, vec![], vec![Poly2::affine(0.222, -0.6, 0.1)]);
    let right = Column::slab(0.37, 1.0, 0.0, 1.0, vec![], vec![Poly2::affine(-0.222, 0.6, 0.1)]);
    // v = 0.5 |x1 - 0.45| + 0.8 |x2 - 0.62|
    let cross = |x0: f64, x1: f64, s: f64| {
        Column::slab(
            x0,
            x1,
            0.0,
            1.0,
            vec![Poly1::constant(0.62)],
            vec![
                Poly2::affine(-0.45 * s + 0.8 * 0.62, s, -0.8),
                Poly2::affine(-0.45 * s - 0.8 * 0.62, s, 0.8),
            ],
        )
    };
    // Triangle wave in x2 with three periods plus a tilt in x1.
    let a = 0.9;
    let zigzag = Column {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        period: 1.0 / 3.0,
        copies: 3,
        value_step: 0.0,
        curves: vec![Poly1::constant(0.0), Poly1::constant(1.0 / 6.0), Poly1::constant(1.0 / 3.0)],
        maps: vec![Poly2::affine(0.0, 0.1, a), Poly2::affine(a / 3.0, 0.1, -a)],
    };
    vec![
        ("one kink", AnalyticProfile::new(unit, vec![one_kink], bc).unwrap()),
        ("two kinks", AnalyticProfile::new(unit, vec![two_kinks], bc).unwrap()),
        ("vertical kink", AnalyticProfile::new(unit, vec![left, right], bc).unwrap()),
        (
            "cross",
            AnalyticProfile::new(unit, vec![cross(0.0, 0.45, -0.5), cross(0.45, 1.0, 0.5)], bc).unwrap(),
        ),
        ("zigzag", AnalyticProfile::new(unit, vec![zigzag], bc).unwrap()),
    ]
}

fn evaluator_cross_check() -> Outcome {
    let params = EnergyParams::unrescaled(2.0, 0.25, 0.05).unwrap();
    let mut ok = true;
    let mut parts = vec![];
    for (name, prof) in affine_profiles() {
        prof.validate().unwrap();
        let exact = energy_analytic(&prof, &params).unwrap().total;
        let pts: Vec<(f64, f64)> = [64usize, 128, 256, 512]
            .iter()
            .map(|&n| {
                let g = prof.sample(n + 1, n + 1, BoundaryCondition::None).unwrap();
                let e = evaluate_grid(&g, &params).unwrap().total;
                ((1.0 / n as f64).ln(), (e - exact).abs().max(1e-300).ln())
            })
            .collect();
        let order = microlab_core::scaling_lab::fit_line(&pts).unwrap().slope;
        ok &= order >= 0.9;
        parts.push(format!("{name} {order:.2}"));
    }
    check(ok, format!("orders: {}", parts.join(", ")))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("uniform regime energy equals theta^p", uniform_regime),
        ("scaling exponent p/(p+1)", scaling_exponent),
        ("sandwich ratio band", sandwich),
        ("Gamma-limit upper bound", gamma_upper_bound),
        ("bounded energy with unbounded d2 norm", example_sequence_bounds),
        ("minimizer gradient and descent", minimizer_sanity),
        ("Whitney covering", covering),
        ("grid vs analytic convergence", evaluator_cross_check),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("[PASS] criterion {}: {name} ({d}) [{secs:.1}s]", k + 1),
            Err(d) => {
                failed += 1;
                println!("[FAIL] criterion {}: {name} ({d}) [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
