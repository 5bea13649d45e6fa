use exhaust_web::{limits_json, rate_surface_json, simulate_json};

#[test]
fn limits_for_poisson() {
    let v = limits_json("poisson:1.4998").unwrap();
    assert!((v["theta"].as_f64().unwrap() - 0.8740).abs() < 5e-4);
    assert!(limits_json("poisson:-1").is_err());
}

#[test]
fn surface_shape_and_zero_at_origin() {
    let v = rate_surface_json("const:2", 11, 3.0).unwrap();
    let f = v["f"].as_array().unwrap();
    assert_eq!(f.len(), 11);
    assert!(f.iter().all(|row| row.as_array().unwrap().len() == 11));
    assert_eq!(f[0][0].as_f64(), Some(0.0));
    // r = 0 with t > 0 is impossible.
    assert!(f[0][5].is_null());
    assert!(rate_surface_json("ptail:1:0.5", 11, 3.0).is_err());
}

#[test]
fn simulation_points_are_fractions() {
    let v = simulate_json("const:2", 500, 50, 7).unwrap();
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.len(), 50);
    for p in pts {
        let (x, y) = (p[0].as_f64().unwrap(), p[1].as_f64().unwrap());
        assert!(x > 0.0 && x <= 1.0);
        assert!(y >= x - 1.0 / 500.0);
    }
    assert_eq!(v, simulate_json("const:2", 500, 50, 7).unwrap());
    assert!(simulate_json("const:2", 100_000, 1000, 1).is_err());
}
