//! End-to-end run on the planted N=8 instance.

mod common;

use common::q;
use indist::analysis::{run_pipeline, sandwich_report, PipelineConfig};
use indist::distinguisher::{exact_advantage_with, mc_advantage, AdvantageMethod, LRDistinguisher};
use indist::generators::{generate, GeneratorSpec};
use indist::{Rational, Scalar};

/// `Pr[accept | X1^k] - Pr[accept | X0^k]` by listing every sample tuple.
fn brute_force(rule: &LRDistinguisher, x0: &[f64], x1: &[f64], k: usize) -> f64 {
    let n = x0.len();
    let mut total = 0.0;
    for t in 0..n.pow(k as u32) {
        let samples: Vec<usize> = (0..k).map(|j| (t / n.pow(j as u32)) % n).collect();
        let p0: f64 = samples.iter().map(|&x| x0[x]).product();
        let p1: f64 = samples.iter().map(|&x| x1[x]).product();
        if p0 == 0.0 && p1 == 0.0 {
            continue;
        }
        if rule.decide_elements(&samples).unwrap() {
            total += p1 - p0;
        }
    }
    total
}

#[test]
fn planted_achieved_advantage_grows_with_k() {
    let inst = generate::<Rational>(&GeneratorSpec::PlantedHalves { n: 8, bias: 0.5 }).unwrap();
    let cfg = PipelineConfig::new(q(1, 10), q(1, 100));
    let ks = [1usize, 2, 4, 8];
    let report = sandwich_report(&inst.x0, &inst.x1, &inst.family, &ks, &cfg).unwrap();
    let pipe = run_pipeline(&inst.x0, &inst.x1, &inst.family, &cfg).unwrap();
    let x0: Vec<f64> = inst.x0.mass().iter().map(Rational::as_f64).collect();
    let x1: Vec<f64> = inst.x1.mass().iter().map(Rational::as_f64).collect();

    let mut previous = 0.0;
    for rec in &report.records {
        rec.check().unwrap();
        let achieved = rec.achieved.value;
        assert!(achieved + 1e-12 >= previous, "k={}: {achieved} < {previous}", rec.k);
        previous = achieved;
        if rec.k <= 4 {
            let rule = LRDistinguisher::new(pipe.partition.labeling().to_vec(), pipe.rounded.clone(), rec.k).unwrap();
            let oracle = brute_force(&rule, &x0, &x1, rec.k);
            assert!((achieved - oracle).abs() <= 1e-12, "k={}: {achieved} vs {oracle}", rec.k);
        }
    }
    assert!(report.records[3].achieved.value > report.records[0].achieved.value);
}

#[test]
fn planted_monte_carlo_brackets_the_count_dp() {
    let inst = generate::<Rational>(&GeneratorSpec::PlantedHalves { n: 8, bias: 0.5 }).unwrap();
    let pipe = run_pipeline(&inst.x0, &inst.x1, &inst.family, &PipelineConfig::new(q(1, 10), q(1, 100))).unwrap();
    let k = 16;
    let exact = exact_advantage_with(&pipe.rounded, &pipe.pi0, &pipe.pi1, k, 1 << 24, AdvantageMethod::ExactCountDp)
        .unwrap()
        .value
        .as_f64();
    let est = mc_advantage(&pipe.rounded, &inst.x0, &inst.x1, pipe.partition.labeling(), k, 20_000, 7).unwrap();
    assert!((est.value - exact).abs() <= est.ci_halfwidth, "{} ± {} vs {exact}", est.value, est.ci_halfwidth);
}
