use serde_json::Value;

use evogame_web::{fast_reaction, newton_vs_game, reconstruct};

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.expect("binding succeeds")).unwrap()
}

#[test]
fn fast_reaction_returns_one_row_per_step() {
    let d = parse(fast_reaction(6, 1.0, 40, 3));
    let t = d["t"].as_array().unwrap();
    assert_eq!(t.len(), 40);
    for (x, r) in d["x"].as_array().unwrap().iter().zip(d["right"].as_array().unwrap()) {
        assert_eq!(x.as_array().unwrap().len(), 6);
        assert!(r.as_array().unwrap().iter().all(|p| (0.0..=1.0).contains(&p.as_f64().unwrap())));
    }
    assert_eq!(fast_reaction(6, 1.0, 40, 3), fast_reaction(6, 1.0, 40, 3));
}

#[test]
fn newton_gap_shrinks_with_eps() {
    let gap = |eps| {
        let d = parse(newton_vs_game(4, eps, 5));
        d["gap"].as_array().unwrap().iter().map(|g| g.as_f64().unwrap()).fold(0.0, f64::max)
    };
    let (coarse, fine) = (gap(0.5), gap(0.05));
    assert!(fine < coarse, "{fine} vs {coarse}");
    assert!(fine < 1e-3);
}

#[test]
fn reconstructed_profile_has_the_requested_mean() {
    let d = parse(reconstruct(0.3, 0.5, 5));
    let u: Vec<f64> = d["u"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let s: Vec<f64> = d["sigma"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let mass: f64 = s.iter().sum::<f64>() / s.len() as f64;
    let mean: f64 = u.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / s.len() as f64;
    assert!((mass - 1.0).abs() < 1e-10);
    assert!((mean - 0.3).abs() < 1e-8);
}

#[test]
fn bad_inputs_come_back_as_messages() {
    assert!(reconstruct(1.5, 0.5, 5).unwrap_err().contains("convex hull"));
    assert!(fast_reaction(0, 1.0, 10, 1).is_err());
    assert!(newton_vs_game(4, -1.0, 1).is_err());
}
