mod common;

use common::{crps_monte_carlo, crps_oracle, twcrps_oracle};
use emos::distributions::{LogNormal, MixtureTnLn, Predictive, PredictiveDistribution, TruncNormal};

fn tn(mu: f64, s: f64) -> PredictiveDistribution {
    TruncNormal::new(mu, s).unwrap().into()
}

#[test]
fn tn_spot_value_matches_quadrature() {
    let d = tn(2.0, 1.0);
    let oracle = crps_oracle(&d, 2.5);
    println!("oracle TN(2,1) at 2.5 = {oracle:.15}");
    assert!((d.crps(2.5).unwrap() - oracle).abs() < 1e-8);
}

#[test]
fn ln_spot_value_two_oracles() {
    let d: PredictiveDistribution = LogNormal::new(0.5816, 0.4724).unwrap().into();
    let oracle = crps_oracle(&d, 2.0);
    println!("oracle LN at 2.0 = {oracle:.15}");
    assert!((d.crps(2.0).unwrap() - oracle).abs() < 1e-8);
    let (mc, se) = crps_monte_carlo(&d, 2.0, 2_000_000, 11);
    assert!((mc - oracle).abs() < 3.0 * se, "mc={mc} se={se}");
}

#[test]
fn mixture_grid_agrees_with_quadrature() {
    let mut worst: f64 = 0.0;
    let start = std::time::Instant::now();
    let mut n = 0;
    for &w in &[0.2, 0.5, 0.8] {
        for &(mt, st) in &[(0.5, 1.0), (3.0, 0.5), (6.0, 2.0), (-1.0, 1.0)] {
            for &(ml, sl) in &[(0.2, 0.3), (1.5, 0.6), (2.0, 1.2)] {
                let m = MixtureTnLn::new(w, TruncNormal::new(mt, st).unwrap(), LogNormal::new(ml, sl).unwrap()).unwrap();
                let d: PredictiveDistribution = m.into();
                for &x in &[0.0, 0.7, 2.5, 6.0, 15.0] {
                    let a = d.crps(x).unwrap();
                    let b = crps_oracle(&d, x);
                    worst = worst.max((a - b).abs());
                    n += 1;
                }
            }
        }
    }
    println!("{n} mixture cases, worst |diff| = {worst:e}, {:?}", start.elapsed());
    assert!(worst < 1e-8);
}

#[test]
fn twcrps_restricted_oracle() {
    let d = tn(2.0, 1.0);
    let a = d.twcrps(2.5, 2.5).unwrap();
    let b = twcrps_oracle(&d, 2.5, 2.5);
    assert!((a - b).abs() < 1e-8, "{a} {b}");
}

#[test]
fn tn_closed_form_holds_deep_in_the_left_tail() {
    let mut worst: f64 = 0.0;
    for &(mu, s) in &[(-2.0, 1.0), (-4.0, 1.0), (-8.0, 1.5), (-25.0, 1.0), (-60.0, 2.0), (-0.5, 0.01)] {
        let d = tn(mu, s);
        let mean = d.mean();
        for &k in &[0.0, 0.3, 1.0, 3.0, 10.0] {
            let x = k * mean;
            let a = d.crps(x).unwrap();
            let b = crps_oracle(&d, x);
            let rel = (a - b).abs() / b.max(1e-300);
            worst = worst.max(rel);
            assert!(rel < 1e-7, "TN({mu},{s}) at {x}: {a} vs {b}");
        }
    }
    println!("worst relative diff {worst:e}");
}

#[test]
fn mixture_with_a_sliver_of_tn_mass() {
    for &w in &[0.01, 0.5, 0.99] {
        let m = MixtureTnLn::new(w, TruncNormal::new(-12.0, 1.0).unwrap(), LogNormal::new(1.0, 0.5).unwrap()).unwrap();
        let d: PredictiveDistribution = m.into();
        for &x in &[0.0, 0.05, 1.0, 3.0, 9.0] {
            let a = d.crps(x).unwrap();
            let b = crps_oracle(&d, x);
            assert!((a - b).abs() < 1e-8, "w={w} x={x}: {a} vs {b}");
        }
    }
}
