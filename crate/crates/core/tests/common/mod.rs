#![allow(dead_code)]

use indist::distributions::ProbDist;
use indist::function_families::{Family, TestFunction};
use indist::generators::{generate, GeneratorSpec, Instance};
use indist::Rational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn rd(v: &[(i64, i64)]) -> ProbDist<Rational> {
    ProbDist::new(v.iter().map(|&(n, d)| q(n, d)).collect()).unwrap()
}

/// Random rational distribution with small integer weights.
pub fn rand_dist(rng: &mut ChaCha8Rng, n: usize) -> ProbDist<Rational> {
    loop {
        let w: Vec<i64> = (0..n).map(|_| rng.random_range(0..=12)).collect();
        let total: i64 = w.iter().sum();
        if total > 0 {
            return ProbDist::new(w.into_iter().map(|x| q(x, total)).collect()).unwrap();
        }
    }
}

/// Like [`rand_dist`], but each weight is zero with probability one half,
/// which pushes posteriors towards 0 and 1.
pub fn sparse_dist(rng: &mut ChaCha8Rng, n: usize) -> ProbDist<Rational> {
    loop {
        let w: Vec<i64> = (0..n).map(|_| if rng.random_bool(0.5) { 0 } else { rng.random_range(1..=12) }).collect();
        let total: i64 = w.iter().sum();
        if total > 0 {
            return ProbDist::new(w.into_iter().map(|x| q(x, total)).collect()).unwrap();
        }
    }
}

/// Random family of indicators and quarter-grid functions.
pub fn rand_family(rng: &mut ChaCha8Rng, n: usize, size: usize) -> Family<Rational> {
    let functions = (0..size)
        .map(|i| {
            let values = if rng.random_bool(0.5) {
                (0..n).map(|_| q(rng.random_range(0..=1), 1)).collect()
            } else {
                (0..n).map(|_| q(rng.random_range(0..=4), 4)).collect()
            };
            TestFunction::new(format!("r{i}"), values).unwrap()
        })
        .collect();
    Family::from_functions(functions).unwrap()
}

/// The regression suite shared by the structural, budget and product-bound
/// checks.
pub fn suite() -> Vec<(String, Instance<Rational>)> {
    let specs = [
        GeneratorSpec::BiasedCoin { e: 0.1 },
        GeneratorSpec::BiasedCoin { e: 0.25 },
        GeneratorSpec::PlantedHalves { n: 4, bias: 0.3 },
        GeneratorSpec::PlantedHalves { n: 8, bias: 0.5 },
        GeneratorSpec::RandomPair { n: 3, concentration: 1.0, seed: 1 },
        GeneratorSpec::RandomPair { n: 4, concentration: 1.0, seed: 2 },
        GeneratorSpec::RandomPair { n: 5, concentration: 2.0, seed: 3 },
        GeneratorSpec::RandomPair { n: 6, concentration: 0.5, seed: 4 },
        GeneratorSpec::Uniform { n: 3 },
    ];
    let mut out: Vec<(String, Instance<Rational>)> =
        specs.iter().map(|s| (format!("{s:?}"), generate::<Rational>(s).unwrap())).collect();
    let x0 = rd(&[(1, 2), (1, 2), (0, 1), (0, 1)]);
    let x1 = rd(&[(0, 1), (1, 4), (1, 4), (1, 2)]);
    let family = indist::function_families::all_boolean_family(x0.domain()).unwrap();
    out.push(("partial_overlap".into(), Instance { x0, x1, family }));
    out
}

/// Small suite members (`N ≤ 4`).
pub fn small_suite() -> Vec<(String, Instance<Rational>)> {
    suite().into_iter().filter(|(_, i)| i.x0.len() <= 4).collect()
}

/// A pair on `m` points whose posteriors `α1` all lie on the grid `1/den`,
/// so rounding at `den` is the identity.
pub fn on_grid_pair(rng: &mut ChaCha8Rng, m: usize, den: i64) -> (ProbDist<Rational>, ProbDist<Rational>) {
    loop {
        let alpha: Vec<Rational> = if m == 1 {
            vec![q(1, 2)]
        } else {
            (0..m).map(|_| q(rng.random_range(0..=den), den)).collect()
        };
        let s: Vec<Rational> = alpha.iter().map(|a| a - q(1, 2)).collect();
        let u: Vec<Rational> = (0..m).map(|_| q(rng.random_range(1..=5), 1)).collect();
        let zero = q(0, 1);
        let pos: Rational = s.iter().zip(&u).filter(|(s, _)| **s > zero).map(|(s, u)| s * u).sum();
        let neg: Rational = s.iter().zip(&u).filter(|(s, _)| **s < zero).map(|(s, u)| -(s * u)).sum();
        let all_zero = pos == zero && neg == zero;
        if !all_zero && (pos == zero || neg == zero) {
            continue;
        }
        let w: Vec<Rational> = s
            .iter()
            .zip(&u)
            .map(|(s, u)| {
                if all_zero {
                    u.clone()
                } else if *s > zero {
                    u * &neg
                } else if *s < zero {
                    u * &pos
                } else {
                    u * (&pos + &neg)
                }
            })
            .collect();
        let total: Rational = w.iter().sum();
        let w: Vec<Rational> = w.into_iter().map(|x| x / &total).collect();
        let x1 = w.iter().zip(&alpha).map(|(w, a)| q(2, 1) * w * a).collect();
        let x0 = w.iter().zip(&alpha).map(|(w, a)| q(2, 1) * w * (q(1, 1) - a)).collect();
        return (ProbDist::new(x0).unwrap(), ProbDist::new(x1).unwrap());
    }
}
