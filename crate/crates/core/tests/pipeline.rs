use microlab_core::constructions::{branching_profile, constant_profile};
use microlab_core::energy::{energy_analytic, evaluate_grid, EnergyParams, Form};
use microlab_core::fields::io::{field_from_str, field_to_string};
use microlab_core::fields::BoundaryCondition;
use microlab_core::scaling_lab::{log_space, read_csv, records_to_csv, sweep, SweepOptions};
use proptest::prelude::*;

#[test]
fn unrescaled_energy_is_theta_p_times_rescaled() {
    let params = EnergyParams::unrescaled(2.0, 0.2, 1e-5).unwrap();
    let (v, _) = branching_profile(&params).unwrap();
    let u = v.rescale_v_to_u(params.theta).unwrap();
    assert!(u.satisfies(BoundaryCondition::DirichletLeftIdentity));
    let i = energy_analytic(&v, &params).unwrap().total;
    let e = energy_analytic(&u, &params.with_form(Form::Rescaled)).unwrap().total;
    approx::assert_relative_eq!(i, params.theta_p() * e, max_relative = 1e-8);
}

#[test]
fn sampled_branching_field_round_trips_and_converges() {
    let params = EnergyParams::unrescaled(2.0, 0.25, 0.25f64.powi(2) * 1e-2).unwrap();
    let (v, _) = branching_profile(&params).unwrap();
    let exact = energy_analytic(&v, &params).unwrap().total;
    let mut errs = vec![];
    for n in [65, 257] {
        let g = v.sample(n, n, BoundaryCondition::DirichletLeftZero).unwrap();
        let back = field_from_str::<f64>(&field_to_string(&g)).unwrap();
        assert_eq!(back, g);
        errs.push((evaluate_grid(&g, &params).unwrap().total - exact).abs());
    }
    assert!(errs[1] < errs[0], "{errs:?}");
}

#[test]
fn sweep_csv_round_trip_preserves_best_flags() {
    let tp = 0.0625;
    let recs = sweep(2.0, 0.25, &log_space(tp * 1e-4, tp * 10.0, 6), &SweepOptions::analytic()).unwrap();
    let back = read_csv::<f64, _>(records_to_csv(&recs).as_bytes()).unwrap();
    assert_eq!(back.len(), recs.len());
    for (a, b) in recs.iter().zip(&back) {
        assert_eq!(a.best, b.best);
        assert_eq!(a.total(), b.total());
    }
    // Above theta^p only the constant state is offered.
    assert!(recs.iter().filter(|r| r.epsilon > tp).all(|r| r.construction.label() == "constant"));
}

proptest! {
    #[test]
    fn constant_profile_energy_is_theta_p(p in 1.1f64..4.0, theta in 0.01f64..0.5, eps in 1e-8f64..1.0) {
        let params = EnergyParams::unrescaled(p, theta, eps).unwrap();
        let e = energy_analytic(&constant_profile(), &params).unwrap();
        prop_assert!((e.total - theta.powf(p)).abs() <= 1e-12 * theta.powf(p));
        prop_assert_eq!(e.interfacial, 0.0);
    }
}
