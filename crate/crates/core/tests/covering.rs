use microlab_core::covering::{verify_cover, whitney_cover, CoverOptions, RectUnion, VerifyOptions, COMPARABILITY};

fn domains() -> Vec<(&'static str, RectUnion)> {
    vec![
        ("square", RectUnion::unit_square()),
        ("l-shape", RectUnion::l_shape()),
        ("slab", RectUnion::slab(0.01).unwrap()),
    ]
}

#[test]
fn covers_pass_on_all_domains_and_scales() {
    for (name, omega) in domains() {
        let mut counts = vec![];
        for &delta in &[1.0, 1e-2] {
            let cover = whitney_cover(&omega, delta, CoverOptions::default()).unwrap();
            let rep = verify_cover(&cover, VerifyOptions::default());
            println!("{name} delta={delta}: {} squares, {:?}", rep.squares, rep.constants);
            assert!(rep.passes, "{name} {delta}: {rep:?}");
            assert_eq!(rep.samples, 10_000);
            assert!(rep.constants.c <= COMPARABILITY);
            counts.push(rep.constants.n);
        }
        assert_eq!(counts[0], counts[1], "{name}: family count depends on delta");
    }
}

#[test]
fn constants_stable_across_delta() {
    let omega = RectUnion::unit_square();
    let reps: Vec<_> = [1.0, 1e-1, 1e-2]
        .iter()
        .map(|&d| verify_cover(&whitney_cover(&omega, d, CoverOptions::default()).unwrap(), VerifyOptions::default()))
        .collect();
    for key in 0..3 {
        let vals: Vec<f64> = reps
            .iter()
            .map(|r| [r.constants.c, r.constants.a, r.constants.b][key])
            .collect();
        let (lo, hi) = vals.iter().fold((f64::MAX, 0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(hi <= 2.0 * lo, "constant {key}: {vals:?}");
    }
}

#[test]
fn json_round_trip_of_domain() {
    let omega = RectUnion::l_shape();
    let s = serde_json::to_string(&omega).unwrap();
    let back: RectUnion = serde_json::from_str(&s).unwrap();
    assert_eq!(back.distance(0.25, 0.25), 0.25);
    assert!(serde_json::from_str::<RectUnion>(r#"{"rects":[]}"#).is_err());
}
