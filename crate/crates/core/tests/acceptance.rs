//! Acceptance criteria 1-10. Runs without the test harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use indist::analysis::convex::{HellingerObjective, Objective, RootSumObjective, SolverConfig};
use indist::analysis::{
    enlarged_geier_family, geier_report, k_star_sweep, measured_family_advantage, pseudo_hellinger, pseudo_renyi,
    run_pipeline, sandwich_report, FamilyRegime, PipelineConfig,
};
use indist::constructions::{
    alphas, build_hat, build_tilde, verify_hat_indistinguishability, verify_indistinguishability,
    verify_structural_hat, verify_structural_tilde, HatVariable, TildePair,
};
use indist::distinguisher::{exact_advantage, exact_advantage_with, heterogeneous_advantage, round_alphas, AdvantageMethod};
use indist::distributions::{
    hellinger_sq, hellinger_to_uniform, mixture, product_hellinger_sq, product_tv_exact, tv_distance, ProbDist,
};
use indist::function_families::{all_boolean_family, best_advantage, Family, ProductMode, TestFunction};
use indist::generators::{generate, GeneratorSpec};
use indist::multicalibration::{audit, build_partition_traced, target_g, MCParams, Partition};
use indist::{Error, Rational, Scalar};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{on_grid_pair, q, rand_dist, rand_family, rd, sparse_dist, small_suite, suite};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, || format!("runtime {t:?} exceeds {limit:?}"))
}

fn f64s(p: &ProbDist<Rational>) -> Vec<f64> {
    p.mass().iter().map(Scalar::as_f64).collect()
}

fn direct_h2(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum::<f64>()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut products = 0;
    for i in 0..1000 {
        let n = rng.random_range(1..=8);
        let p = rand_dist(&mut rng, n);
        let qd = rand_dist(&mut rng, n);
        let (pf, qf) = (f64s(&p), f64s(&qd));
        let h2 = direct_h2(&pf, &qf);
        let lib = hellinger_sq(&p, &qd).map_err(|e| e.to_string())?.value;
        ensure((lib - h2).abs() <= 1e-12, || format!("pair {i}: hellinger_sq {lib} vs {h2}"))?;
        let tv = tv_distance(&p, &qd).map_err(|e| e.to_string())?.as_f64();
        ensure(h2 <= tv + 1e-12 && tv <= 2f64.sqrt() * h2.sqrt() + 1e-12, || {
            format!("pair {i}: chain d_H^2={h2} <= tv={tv} <= sqrt2 d_H fails")
        })?;
        let pe = p.to_f64();
        let qe = qd.to_f64();
        for m in 1..=8u32 {
            if (n as u64).pow(m) > 4096 {
                break;
            }
            let explicit = direct_h2(pe.power(m as usize).unwrap().mass(), qe.power(m as usize).unwrap().mass());
            let formula = product_hellinger_sq(lib, m).map_err(|e| e.to_string())?;
            ensure((explicit - formula).abs() <= 1e-10, || {
                format!("pair {i}, m={m}: product formula {formula} vs explicit {explicit}")
            })?;
            products += 1;
        }
        let u = vec![1.0 / n as f64; n];
        let direct_u = direct_h2(&pf, &u);
        let via_renyi = hellinger_to_uniform(&p).value;
        ensure((direct_u - via_renyi).abs() <= 1e-10, || {
            format!("pair {i}: Hellinger to uniform {via_renyi} vs {direct_u}")
        })?;
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("1000 pairs, {products} product checks, {:?}", start.elapsed()))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut max_ratio: f64 = 0.0;
    let mut max_rounds = 0;
    let mut total_rounds = 0;
    for i in 0..100 {
        let n = rng.random_range(2..=32);
        let size = rng.random_range(1..=64);
        let (x0, x1) = if i % 2 == 0 {
            (rand_dist(&mut rng, n), rand_dist(&mut rng, n))
        } else {
            (sparse_dist(&mut rng, n), sparse_dist(&mut rng, n))
        };
        let mut family = rand_family(&mut rng, n, size);
        if i % 2 == 1 {
            // Swap one random test for the likelihood-ratio test so updates
            // are needed.
            let ml: Vec<usize> = (0..n).filter(|&x| x1.get(x) > x0.get(x)).collect();
            let mut functions = family.functions().to_vec();
            functions[0] = TestFunction::indicator(n, &ml).unwrap();
            family = Family::from_functions(functions).unwrap();
        }
        let eps = [q(1, 10), q(3, 20), q(1, 5), q(1, 4)][i % 4].clone();
        let d = mixture(&x0, &x1).unwrap();
        let g = target_g(&x0, &x1).unwrap();
        let params = MCParams::new(eps).unwrap();
        let (part, trace) = build_partition_traced(&d, &g, &family, &params).map_err(|e| format!("instance {i}: {e}"))?;
        let report = audit(&part, &d, &g, &family, &params).map_err(|e| e.to_string())?;
        ensure(report.pass, || format!("instance {i}: audit found {} violations", report.violations.len()))?;
        ensure(trace.rounds as f64 <= params.round_bound(), || {
            format!("instance {i}: {} rounds above bound {}", trace.rounds, params.round_bound())
        })?;
        max_ratio = max_ratio.max(trace.rounds as f64 / params.round_bound());
        max_rounds = max_rounds.max(trace.rounds);
        total_rounds += trace.rounds;
        let mut m0 = vec![q(0, 1); part.m()];
        let mut m1 = vec![q(0, 1); part.m()];
        for x in 0..n {
            m0[part.label(x)] += x0.get(x);
            m1[part.label(x)] += x1.get(x);
        }
        for p in 0..part.m() {
            let total = &m0[p] + &m1[p];
            if total > q(0, 1) {
                let alpha1 = &m1[p] / total;
                ensure(part.v()[p] == alpha1, || format!("instance {i}, part {p}: v_P != alpha_1"))?;
            }
        }
    }
    ensure(total_rounds > 0, || "no instance needed an update round".to_string())?;
    within(start, Duration::from_secs(60))?;
    Ok(format!("100 instances audited, {total_rounds} rounds in total, max rounds {max_rounds}, max rounds/bound {max_ratio:.2e}, {:?}", start.elapsed()))
}

fn structural_pair(x0: &ProbDist<Rational>, x1: &ProbDist<Rational>, family: &Family<Rational>, eps: Rational) -> (TildePair<Rational>, HatVariable<Rational>) {
    let d = mixture(x0, x1).unwrap();
    let g = target_g(x0, x1).unwrap();
    let part = build_partition_traced(&d, &g, family, &MCParams::new(eps.clone()).unwrap()).unwrap().0;
    let tilde = build_tilde(x0, x1, &part, eps.clone()).unwrap();
    let hat = build_hat(x0, x1, &part, &eps * &eps).unwrap();
    (tilde, hat)
}

/// Moves mass `amount` from `from` to `to` in a copy of `p`.
fn shifted(p: &ProbDist<Rational>, from: usize, to: usize) -> Option<ProbDist<Rational>> {
    let amount = p.get(from) / q(2, 1);
    if amount == q(0, 1) {
        return None;
    }
    let mut mass = p.mass().to_vec();
    mass[from] -= &amount;
    mass[to] += &amount;
    Some(ProbDist::new(mass).unwrap())
}

fn criterion_3() -> Outcome {
    let mut runs = 0;
    let mut negatives = 0;
    for (name, inst) in suite() {
        let (tilde, hat) = structural_pair(&inst.x0, &inst.x1, &inst.family, q(1, 10));
        verify_structural_tilde(&tilde, &inst.x0, &inst.x1).map_err(|e| format!("{name}: {e}"))?;
        verify_structural_hat(&hat, &inst.x0, &inst.x1).map_err(|e| format!("{name}: {e}"))?;
        runs += 1;
        let parts = tilde.partition.parts();
        for members in &parts {
            for &a in members {
                for &b in members {
                    if a == b {
                        continue;
                    }
                    // Within a part: the pushforward survives, the conditional does not.
                    if let Some(bad) = shifted(&tilde.tilde0, a, b) {
                        let corrupt = TildePair { tilde0: bad, ..tilde.clone() };
                        ensure(
                            matches!(verify_structural_tilde(&corrupt, &inst.x0, &inst.x1), Err(Error::StructuralViolation { .. })),
                            || format!("{name}: in-part corruption of tilde0 undetected"),
                        )?;
                        negatives += 1;
                    }
                    if let Some(bad) = shifted(&hat.hat0, a, b) {
                        let corrupt = HatVariable { hat0: bad, ..hat.clone() };
                        ensure(
                            matches!(verify_structural_hat(&corrupt, &inst.x0, &inst.x1), Err(Error::StructuralViolation { .. })),
                            || format!("{name}: in-part corruption of hat0 undetected"),
                        )?;
                        negatives += 1;
                    }
                }
            }
        }
        for (pa, a_members) in parts.iter().enumerate() {
            for b_members in parts.iter().skip(pa + 1) {
                let (a, b) = (a_members[0], b_members[0]);
                if let Some(bad) = shifted(&tilde.tilde1, a, b) {
                    let corrupt = TildePair { tilde1: bad, ..tilde.clone() };
                    ensure(
                        matches!(verify_structural_tilde(&corrupt, &inst.x0, &inst.x1), Err(Error::StructuralViolation { .. })),
                        || format!("{name}: cross-part corruption of tilde1 undetected"),
                    )?;
                    negatives += 1;
                }
                if let Some(bad) = shifted(&hat.hat0, a, b) {
                    let corrupt = HatVariable { hat0: bad, ..hat.clone() };
                    ensure(
                        matches!(verify_structural_hat(&corrupt, &inst.x0, &inst.x1), Err(Error::StructuralViolation { .. })),
                        || format!("{name}: cross-part corruption of hat0 undetected"),
                    )?;
                    negatives += 1;
                }
            }
        }
    }
    Ok(format!("{runs} pipeline runs exact, {negatives} corruptions detected"))
}

fn criterion_4() -> Outcome {
    let eps = q(1, 10);
    let eps_f = 0.1;
    let mut worst: f64 = 0.0;
    for (name, inst) in suite() {
        let d = mixture(&inst.x0, &inst.x1).unwrap();
        let g = target_g(&inst.x0, &inst.x1).unwrap();
        let params = MCParams::new(eps.clone()).unwrap();
        ensure(params.gamma == &eps * &eps, || "gamma is not eps^2".into())?;
        let part = build_partition_traced(&d, &g, &inst.family, &params).map_err(|e| e.to_string())?.0;
        let tilde = build_tilde(&inst.x0, &inst.x1, &part, eps.clone()).unwrap();
        let adv0 = best_advantage(&inst.family, &inst.x0, &tilde.tilde0).unwrap().1.as_f64();
        let adv1 = best_advantage(&inst.family, &inst.x1, &tilde.tilde1).unwrap().1.as_f64();
        ensure(adv0 <= 8.0 * eps_f && adv1 <= 8.0 * eps_f, || format!("{name}: tilde advantages {adv0}, {adv1}"))?;
        verify_indistinguishability(&tilde, &inst.x0, &inst.x1, &inst.family, 8.0).map_err(|e| e.to_string())?;
        worst = worst.max(adv0).max(adv1);
        // Hat variable: partition at accuracy ε′ = ε², heavy threshold ε′².
        let eps_prime = &eps * &eps;
        let hat_params = MCParams::new(eps_prime.clone()).unwrap();
        let hat_part = build_partition_traced(&d, &g, &inst.family, &hat_params).map_err(|e| e.to_string())?.0;
        let hat = build_hat(&inst.x0, &inst.x1, &hat_part, eps_prime).unwrap();
        let adv = best_advantage(&inst.family, &inst.x0, &hat.hat0).unwrap().1.as_f64();
        ensure(adv <= 8.0 * eps_f, || format!("{name}: hat advantage {adv}"))?;
        verify_hat_indistinguishability(&hat, &inst.x0, &inst.family, eps_f, 8.0).map_err(|e| e.to_string())?;
        worst = worst.max(adv);
    }
    Ok(format!("largest advantage {worst:.4} against bound {}", 8.0 * eps_f))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut exact_cases = 0;
    for m in 1..=4usize {
        for _ in 0..5 {
            let den = 10 * m as i64;
            let (x0, x1) = on_grid_pair(&mut rng, m, den);
            let d = mixture(&x0, &x1).unwrap();
            let g = target_g(&x0, &x1).unwrap();
            let part = Partition::singletons(&d, &g).unwrap();
            let table = alphas(&x0, &x1, &part).unwrap();
            let rounded = round_alphas(&table, q(1, 10)).unwrap();
            ensure(rounded.denominator == den as u64 && rounded.shift == [0.0, 0.0], || "rounding is not a no-op".into())?;
            for k in 1..=6usize {
                let dp = exact_advantage_with(&rounded, &x0, &x1, k, 1 << 20, AdvantageMethod::ExactCountDp).unwrap();
                let en = exact_advantage_with(&rounded, &x0, &x1, k, 1 << 20, AdvantageMethod::ExactEnumeration).unwrap();
                let tv = product_tv_exact(&vec![x0.clone(); k], &vec![x1.clone(); k], 1 << 20).unwrap();
                ensure(dp.value == en.value && en.value == tv, || {
                    format!("m={m}, k={k}: dp {} enum {} tv {tv}", dp.value, en.value)
                })?;
                exact_cases += 1;
            }
        }
    }
    let mut floor_cases = 0;
    let mut check_floor = |x0: &ProbDist<Rational>, x1: &ProbDist<Rational>, part: &Partition<Rational>, delta: Rational, label: &str| -> Result<(), String> {
        let table = alphas(x0, x1, part).unwrap();
        let rounded = round_alphas(&table, delta.clone()).map_err(|e| format!("{label}: {e}"))?;
        let pi0 = indist::distributions::pushforward(x0, part.labeling(), part.m()).unwrap();
        let pi1 = indist::distributions::pushforward(x1, part.labeling(), part.m()).unwrap();
        for k in 1..=6usize {
            let achieved = exact_advantage(&rounded, &pi0, &pi1, k, 1 << 22).map_err(|e| e.to_string())?.value.as_f64();
            let tv = product_tv_exact(&vec![pi0.clone(); k], &vec![pi1.clone(); k], 1 << 22).unwrap().as_f64();
            let floor = tv - 4.0 * delta.as_f64() * k as f64;
            ensure(achieved >= floor - 1e-9, || format!("{label}, k={k}: achieved {achieved} < floor {floor}"))?;
            ensure(achieved <= tv + 1e-12, || format!("{label}, k={k}: achieved {achieved} > tv {tv}"))?;
            floor_cases += 1;
        }
        Ok(())
    };
    for (name, inst) in suite() {
        for delta in [q(1, 20), q(1, 5)] {
            let cfg = PipelineConfig::new(q(1, 10), delta.clone());
            let pipe = run_pipeline(&inst.x0, &inst.x1, &inst.family, &cfg).map_err(|e| format!("{name}: {e}"))?;
            check_floor(&inst.x0, &inst.x1, &pipe.partition, delta, &name)?;
        }
    }
    for i in 0..30 {
        let n = rng.random_range(2..=5);
        let x0 = rand_dist(&mut rng, n);
        let x1 = rand_dist(&mut rng, n);
        let d = mixture(&x0, &x1).unwrap();
        let g = target_g(&x0, &x1).unwrap();
        let part = Partition::singletons(&d, &g).unwrap();
        for delta in [q(1, 7), q(1, 20)] {
            check_floor(&x0, &x1, &part, delta, &format!("random {i}"))?;
        }
    }
    Ok(format!("{exact_cases} three-way exact matches, {floor_cases} floor checks"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut instances: Vec<(String, ProbDist<Rational>, ProbDist<Rational>)> = Vec::new();
    for e in [0.1, 0.2, 0.3] {
        let inst = generate::<Rational>(&GeneratorSpec::BiasedCoin { e }).unwrap();
        instances.push((format!("coin {e}"), inst.x0, inst.x1));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for i in 0..6 {
        let n = 2 + i % 3;
        instances.push((format!("random {i}"), rand_dist(&mut rng, n), rand_dist(&mut rng, n)));
    }
    for (name, inst) in small_suite() {
        instances.push((name, inst.x0, inst.x1));
    }
    let mut records = 0;
    for (name, x0, x1) in &instances {
        let family = all_boolean_family::<Rational>(x0.domain()).unwrap();
        for (eps, delta) in [(q(1, 10), q(1, 100)), (q(1, 5), q(1, 20))] {
            let mut cfg = PipelineConfig::new(eps.clone(), delta.clone());
            cfg.regime = FamilyRegime::AllBoolean;
            let report = sandwich_report(x0, x1, &family, &[1, 2, 3], &cfg).map_err(|e| format!("{name}: {e}"))?;
            let pipe = run_pipeline(x0, x1, &family, &cfg).unwrap();
            for r in &report.records {
                let k = r.k;
                let tv_domain = tv_distance(&pipe.tilde.tilde0.power(k).unwrap(), &pipe.tilde.tilde1.power(k).unwrap())
                    .unwrap()
                    .as_f64();
                ensure((tv_domain - r.tv_tilde_k).abs() <= 1e-12, || {
                    format!("{name}, k={k}: partition-space tv {} vs domain-space {tv_domain}", r.tv_tilde_k)
                })?;
                let measured = tv_distance(&x0.power(k).unwrap(), &x1.power(k).unwrap()).unwrap().as_f64();
                let reported = r.measured_family_adv.ok_or("no family advantage")?;
                ensure((measured - reported).abs() <= 1e-12, || format!("{name}, k={k}: family adv {reported} vs {measured}"))?;
                let lo = tv_domain - 4.0 * delta.as_f64() * k as f64 - 1e-9;
                let hi = tv_domain + 2.0 * k as f64 * eps.as_f64() + 1e-9;
                ensure(lo <= measured && measured <= hi, || format!("{name}, k={k}: {measured} outside [{lo}, {hi}]"))?;
                let achieved = r.achieved.value;
                ensure(lo <= achieved && achieved <= measured + 1e-12, || {
                    format!("{name}, k={k}: achieved {achieved} outside [{lo}, {measured}]")
                })?;
                records += 1;
            }
        }
    }
    within(start, Duration::from_secs(120))?;
    Ok(format!("{records} records in the sandwich, {:?}", start.elapsed()))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    for e in [0.05, 0.1, 0.2] {
        let inst = generate::<Rational>(&GeneratorSpec::BiasedCoin { e }).unwrap();
        let eps = Rational::from_f64_decimal(e) / q(20, 1);
        let cfg = PipelineConfig::new(eps, q(1, 1000));
        let pipe = run_pipeline(&inst.x0, &inst.x1, &inst.family, &cfg).map_err(|e| e.to_string())?;
        let h2 = direct_h2(&f64s(&pipe.tilde.tilde0), &f64s(&pipe.tilde.tilde1));
        ensure(h2 > 0.0, || format!("e={e}: tilde pair collapsed"))?;
        let res = k_star_sweep(&inst.x0, &inst.x1, &inst.family, 0.5, 100_000, &cfg).map_err(|e| e.to_string())?;
        let k = res.k_star.ok_or_else(|| format!("e={e}: target unreached"))? as f64;
        let (lo, hi) = (0.1 / h2, 10.0 / h2);
        ensure(lo <= k && k <= hi, || format!("e={e}: k*={k} outside [{lo:.1}, {hi:.1}]"))?;
        details.push(format!("e={e}: k*={k} in [{lo:.0}, {hi:.0}]"));
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("{}; {:?}", details.join(", "), start.elapsed()))
}

/// Minimum of `value(p, q)` over grid points of two simplices of dimension
/// `n ≤ 3` that satisfy `feasible`, refined around the incumbent.
fn grid_min2(
    n: usize,
    steps: &[(f64, f64)],
    feasible: &dyn Fn(&[f64], &[f64]) -> bool,
    value: &dyn Fn(&[f64], &[f64]) -> f64,
) -> f64 {
    let points = |center: Option<&[f64]>, h: f64, radius: f64| -> Vec<Vec<f64>> {
        let range = |c: f64| -> Vec<f64> {
            let (lo, hi) = match center {
                Some(_) => ((c - radius).max(0.0), (c + radius).min(1.0)),
                None => (0.0, 1.0),
            };
            let a = (lo / h).round() as i64;
            let b = (hi / h).round() as i64;
            (a..=b).map(|i| i as f64 * h).collect()
        };
        let c = center.unwrap_or(&[0.0, 0.0, 0.0]);
        let mut out = Vec::new();
        match n {
            2 => {
                for a in range(c[0]) {
                    out.push(vec![a, 1.0 - a]);
                }
            }
            3 => {
                for a in range(c[0]) {
                    for b in range(c[1]) {
                        if a + b <= 1.0 + 1e-12 {
                            out.push(vec![a, b, (1.0 - a - b).max(0.0)]);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        out
    };
    let mut best = (f64::INFINITY, Vec::new(), Vec::new());
    for (i, &(h, radius)) in steps.iter().enumerate() {
        let (ps, qs) = if i == 0 {
            (points(None, h, radius), points(None, h, radius))
        } else {
            (points(Some(&best.1), h, radius), points(Some(&best.2), h, radius))
        };
        let qs: Vec<&Vec<f64>> = qs.iter().filter(|q| feasible(&[], q)).collect();
        for p in ps.iter().filter(|p| feasible(p, &[])) {
            for q in &qs {
                let v = value(p, q);
                if v < best.0 {
                    best = (v, p.clone(), (*q).clone());
                }
            }
        }
    }
    best.0
}

fn family_ok(rows: &[Vec<f64>], target: &[f64], p: &[f64], eps: f64) -> bool {
    p.is_empty()
        || rows.iter().all(|f| f.iter().zip(target.iter().zip(p)).map(|(v, (t, x))| v * (t - x)).sum::<f64>().abs() <= eps + 1e-12)
}

fn rows(f: &Family<Rational>) -> Vec<Vec<f64>> {
    f.functions().iter().map(|f| f.values().iter().map(Scalar::as_f64).collect()).collect()
}

fn criterion_8() -> Outcome {
    let cfg = SolverConfig::default();
    let mut notes = Vec::new();
    let bc = |p: &[f64], q: &[f64]| -> f64 { 1.0 - p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum::<f64>() };
    type Case = (ProbDist<Rational>, ProbDist<Rational>, Family<Rational>, f64);
    let ind = |n: usize, s: &[usize]| TestFunction::<Rational>::indicator(n, s).unwrap();
    let cases: Vec<Case> = vec![
        (
            ProbDist::bernoulli(q(1, 2)).unwrap(),
            ProbDist::bernoulli(q(7, 10)).unwrap(),
            Family::from_functions(vec![ind(2, &[1])]).unwrap(),
            0.05,
        ),
        (rd(&[(1, 5), (4, 5)]), rd(&[(3, 5), (2, 5)]), all_boolean_family(&indist::distributions::Domain::new(2).unwrap()).unwrap(), 0.1),
        (
            rd(&[(1, 2), (3, 10), (1, 5)]),
            rd(&[(1, 5), (3, 10), (1, 2)]),
            Family::from_functions(vec![ind(3, &[0]), ind(3, &[0, 1])]).unwrap(),
            0.05,
        ),
        (
            rd(&[(7, 10), (1, 5), (1, 10)]),
            rd(&[(1, 10), (3, 10), (3, 5)]),
            Family::from_functions(vec![
                TestFunction::new("soft", vec![q(1, 1), q(1, 2), q(0, 1)]).unwrap(),
                ind(3, &[1]),
            ])
            .unwrap(),
            0.1,
        ),
    ];
    for (i, (x0, x1, fam, eps)) in cases.iter().enumerate() {
        let n = x0.len();
        let res = pseudo_hellinger(x0, x1, fam, *eps, &cfg).map_err(|e| format!("case {i}: {e}"))?;
        let r = rows(fam);
        let (a0, a1) = (f64s(x0), f64s(x1));
        let feasible = |p: &[f64], q: &[f64]| family_ok(&r, &a0, p, *eps) && family_ok(&r, &a1, q, *eps);
        let steps: Vec<(f64, f64)> = if n == 2 { vec![(1e-4, 1.0)] } else { vec![(1e-2, 1.0), (1e-3, 2e-2), (1e-4, 2e-3)] };
        let grid = grid_min2(n, &steps, &feasible, &bc).max(0.0).sqrt();
        ensure((res.delta_star - grid).abs() <= 1e-3, || format!("case {i}: solver {} vs grid {grid}", res.delta_star))?;
        notes.push(format!("H{i} {:.4}/{grid:.4}", res.delta_star));
    }
    // Rényi: N = 2 and N = 3 against full simplex grids at 1e-4.
    let renyi_cases: Vec<(ProbDist<Rational>, Family<Rational>, f64)> = vec![
        (rd(&[(9, 10), (1, 10)]), Family::from_functions(vec![ind(2, &[0])]).unwrap(), 0.1),
        (rd(&[(7, 10), (1, 5), (1, 10)]), Family::from_functions(vec![ind(3, &[0]), ind(3, &[1])]).unwrap(), 0.05),
        (
            rd(&[(3, 5), (3, 10), (1, 10)]),
            Family::from_functions(vec![TestFunction::new("soft", vec![q(1, 1), q(1, 4), q(0, 1)]).unwrap()]).unwrap(),
            0.05,
        ),
    ];
    for (i, (x0, fam, eps)) in renyi_cases.iter().enumerate() {
        let n = x0.len();
        let res = pseudo_renyi(x0, fam, *eps, &cfg).map_err(|e| format!("renyi case {i}: {e}"))?;
        let r = rows(fam);
        let a0 = f64s(x0);
        let h = 1e-4;
        let steps = (1.0 / h) as i64;
        let mut best: f64 = 0.0;
        for a in 0..=steps {
            let pa = a as f64 * h;
            let inner = if n == 2 { 0..=0 } else { 0..=(steps - a) };
            for b in inner {
                let p: Vec<f64> = if n == 2 { vec![pa, 1.0 - pa] } else { let pb = b as f64 * h; vec![pa, pb, (1.0 - pa - pb).max(0.0)] };
                if family_ok(&r, &a0, &p, *eps) {
                    best = best.max(p.iter().map(|x| x.sqrt()).sum());
                }
            }
        }
        let grid = 2.0 * best.log2();
        ensure((res.r_star - grid).abs() <= 1e-3, || format!("renyi case {i}: solver {} vs grid {grid}", res.r_star))?;
        notes.push(format!("R{i} {:.4}/{grid:.4}", res.r_star));
    }
    // Gradients against central differences.
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(2..=5);
        let raw: Vec<f64> = (0..2 * n).map(|_| rng.random_range(0.05..1.0)).collect();
        let x = DVector::from_vec(raw);
        let objectives: [(&dyn Objective, usize); 2] =
            [(&HellingerObjective { n, tau: 1e-12 }, 2 * n), (&RootSumObjective { n: 2 * n, tau: 1e-12 }, 2 * n)];
        for (obj, dim) in objectives {
            let g = obj.gradient(&x);
            for j in 0..dim {
                let h = 1e-6 * x[j];
                let mut e = DVector::zeros(dim);
                e[j] = h;
                let fd = (obj.value(&(&x + &e)) - obj.value(&(&x - &e))) / (2.0 * h);
                let rel = (fd - g[j]).abs() / g[j].abs().max(1e-12);
                worst = worst.max(rel);
            }
        }
    }
    ensure(worst <= 1e-6, || format!("finite-difference relative error {worst:e}"))?;
    // Degenerate cases.
    let x0 = rd(&[(1, 2), (3, 10), (1, 5)]);
    let x1 = rd(&[(1, 5), (3, 10), (1, 2)]);
    let all = all_boolean_family::<Rational>(x0.domain()).unwrap();
    let adv = best_advantage(&all, &x0, &x1).unwrap().1.as_f64();
    let big = pseudo_hellinger(&x0, &x1, &all, adv, &cfg).map_err(|e| e.to_string())?;
    ensure(big.delta_star == 0.0, || format!("large epsilon gave {}", big.delta_star))?;
    let pinned = pseudo_hellinger(&x0, &x1, &all, 0.0, &cfg).map_err(|e| e.to_string())?;
    let exact = direct_h2(&f64s(&x0), &f64s(&x1)).sqrt();
    ensure((pinned.delta_star - exact).abs() <= 1e-9, || format!("eps=0 gave {} vs {exact}", pinned.delta_star))?;
    let u = ProbDist::<Rational>::uniform(3).unwrap();
    let gap = best_advantage(&all, &x0, &u).unwrap().1.as_f64();
    let r = pseudo_renyi(&x0, &all, gap, &cfg).map_err(|e| e.to_string())?;
    ensure((r.r_star - 3f64.log2()).abs() <= 1e-12, || format!("large epsilon Rényi {}", r.r_star))?;
    let r = pseudo_renyi(&x0, &all, 0.0, &cfg).map_err(|e| e.to_string())?;
    let h = 2.0 * f64s(&x0).iter().map(|p| p.sqrt()).sum::<f64>().log2();
    ensure((r.r_star - h).abs() <= 1e-9, || format!("eps=0 Rényi {} vs {h}", r.r_star))?;
    Ok(format!("{}; fd worst {worst:.1e}", notes.join(" ")))
}

fn criterion_9() -> Outcome {
    let mut checked = 0;
    let mut tightest = f64::INFINITY;
    for (name, inst) in small_suite() {
        for eps in [q(1, 50), q(1, 10)] {
            let mut cfg = PipelineConfig::new(eps.clone(), q(1, 20));
            cfg.regime = FamilyRegime::Products(ProductMode::AllProducts);
            let ks = [1usize, 2, 3];
            let report = geier_report(&inst.x0, &inst.x1, &inst.family, &ks, &cfg).map_err(|e| format!("{name}: {e}"))?;
            let pipe = run_pipeline(&inst.x0, &inst.x1, &inst.family, &cfg).unwrap();
            let enlarged = enlarged_geier_family(&inst.family, &inst.x0, &inst.x1, &pipe.partition).unwrap();
            let d = best_advantage(&enlarged, &inst.x0, &inst.x1).unwrap().1.as_f64();
            for (rec, &k) in report.records.iter().zip(&ks) {
                let measured = measured_family_advantage(&inst.x0, &inst.x1, &inst.family, k, cfg.regime, cfg.budget)
                    .unwrap()
                    .unwrap()
                    .0
                    .as_f64();
                let bound = 1.0 - (1.0 - d).powi(k as i32) + 8.0 * k as f64 * eps.as_f64();
                ensure(measured <= bound + 1e-9, || format!("{name}, k={k}: {measured} > {bound}"))?;
                ensure((rec.measured - measured).abs() <= 1e-12, || format!("{name}: report disagrees"))?;
                tightest = tightest.min(bound - measured);
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} checks, smallest margin {tightest:.4}"))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut identical = 0;
    for (name, inst) in small_suite() {
        let cfg = PipelineConfig::new(q(1, 10), q(1, 20));
        let pipe = run_pipeline(&inst.x0, &inst.x1, &inst.family, &cfg).map_err(|e| e.to_string())?;
        for k in 1..=4usize {
            let a = exact_advantage(&pipe.rounded, &pipe.pi0, &pipe.pi1, k, 1 << 20).unwrap().value;
            let b = heterogeneous_advantage(
                &vec![pipe.rounded.clone(); k],
                &vec![pipe.pi0.clone(); k],
                &vec![pipe.pi1.clone(); k],
                1 << 20,
            )
            .unwrap()
            .value;
            ensure(a == b, || format!("{name}, k={k}: {a} vs {b}"))?;
            identical += 1;
        }
    }
    let mut hetero = 0;
    for i in 0..40 {
        let mut tables = Vec::new();
        let mut p0 = Vec::new();
        let mut p1 = Vec::new();
        for _ in 0..2 {
            let x0 = rand_dist(&mut rng, 2);
            let x1 = rand_dist(&mut rng, 2);
            let d = mixture(&x0, &x1).unwrap();
            let g = target_g(&x0, &x1).unwrap();
            let part = Partition::singletons(&d, &g).unwrap();
            let delta = [q(1, 10), q(1, 3)][i % 2].clone();
            match round_alphas(&alphas(&x0, &x1, &part).unwrap(), delta) {
                Ok(t) => tables.push(t),
                Err(_) => continue,
            }
            p0.push(x0);
            p1.push(x1);
        }
        if tables.len() != 2 {
            continue;
        }
        let got = heterogeneous_advantage(&tables, &p0, &p1, 100).map_err(|e| e.to_string())?.value;
        let mut signed = q(0, 1);
        for a in 0..2 {
            for b in 0..2 {
                let (za, zb) = (tables[0].n0[a] + tables[0].n1[a], tables[1].n0[b] + tables[1].n1[b]);
                let probs_zero = p0[0].get(a) + p1[0].get(a) == q(0, 1) || p0[1].get(b) + p1[1].get(b) == q(0, 1);
                if probs_zero {
                    continue;
                }
                ensure(za > 0 && zb > 0, || "positive-mass label with empty row".into())?;
                if tables[0].n1[a] * tables[1].n1[b] >= tables[0].n0[a] * tables[1].n0[b] {
                    signed += p1[0].get(a) * p1[1].get(b) - p0[0].get(a) * p0[1].get(b);
                }
            }
        }
        let expected = if signed < q(0, 1) { -signed } else { signed };
        ensure(got == expected, || format!("instance {i}: {got} vs brute force {expected}"))?;
        hetero += 1;
    }
    ensure(hetero >= 20, || format!("only {hetero} heterogeneous instances"))?;
    Ok(format!("{identical} identical-factor matches, {hetero} heterogeneous brute-force matches"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("metric identities", criterion_1),
        ("multicalibration soundness", criterion_2),
        ("structural equalities", criterion_3),
        ("indistinguishability budget", criterion_4),
        ("distinguisher exactness", criterion_5),
        ("sandwich", criterion_6),
        ("sample-complexity scaling", criterion_7),
        ("convex programs", criterion_8),
        ("product bound consistency", criterion_9),
        ("heterogeneous products", criterion_10),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{:.2?}]", i + 1, start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{:.2?}]", i + 1, start.elapsed());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
