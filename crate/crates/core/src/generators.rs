//! Seeded instance generators for regression suites and the command line.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::distributions::ProbDist;
use crate::error::{Error, Result};
use crate::function_families::{all_boolean_family, ComplexityTag, Family, TestFunction};
use crate::scalar::Scalar;

/// Domains up to this size get every Boolean test; larger ones get singleton
/// and half indicators.
pub const FULL_FAMILY_DOMAIN: usize = 8;

/// Denominator used when random masses are made exact.
pub const RANDOM_DENOMINATOR: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// `Ber(½)` against `Ber(½ + e)`.
    BiasedCoin { e: f64 },
    /// `X1 = (1+s)/N`, `X0 = (1-s)/N` with `s = +bias` on the first half of
    /// the domain and `-bias` on the second.
    PlantedHalves { n: usize, bias: f64 },
    /// Two independent symmetric Dirichlet draws, rounded onto a grid of
    /// `1/10⁶`.
    RandomPair { n: usize, concentration: f64, seed: u64 },
    /// Both sides uniform.
    Uniform { n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance<S> {
    pub x0: ProbDist<S>,
    pub x1: ProbDist<S>,
    pub family: Family<S>,
}

pub fn generate<S: Scalar>(spec: &GeneratorSpec) -> Result<Instance<S>> {
    match *spec {
        GeneratorSpec::BiasedCoin { e } => {
            if !(0.0..=0.5).contains(&e) {
                return Err(Error::InvalidParameter(format!("coin bias {e} outside [0, 1/2]")));
            }
            let e = S::from_f64_decimal(e);
            let x0 = ProbDist::bernoulli(S::half())?;
            let x1 = ProbDist::bernoulli(S::half() + e)?;
            let family = all_boolean_family(x0.domain())?;
            Ok(Instance { x0, x1, family })
        }
        GeneratorSpec::PlantedHalves { n, bias } => {
            if n < 2 || n % 2 != 0 {
                return Err(Error::InvalidParameter(format!("planted halves needs an even N >= 2, got {n}")));
            }
            if !(0.0..=1.0).contains(&bias) {
                return Err(Error::InvalidParameter(format!("bias {bias} outside [0,1]")));
            }
            let s = S::from_f64_decimal(bias);
            let nn = S::from_count(n);
            let side = |sign: bool| {
                (0..n)
                    .map(|x| {
                        let plus = (x < n / 2) == sign;
                        let v = if plus { S::one() + s.clone() } else { S::one() - s.clone() };
                        v / nn.clone()
                    })
                    .collect::<Vec<_>>()
            };
            let x1 = ProbDist::new(side(true))?;
            let x0 = ProbDist::new(side(false))?;
            Ok(Instance { family: default_family(n)?, x0, x1 })
        }
        GeneratorSpec::RandomPair { n, concentration, seed } => {
            if n == 0 || !(concentration > 0.0 && concentration.is_finite()) {
                return Err(Error::InvalidParameter(format!("random pair needs N > 0 and concentration > 0, got {n}, {concentration}")));
            }
            let gamma = Gamma::new(concentration, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || -> Result<ProbDist<S>> {
                let raw: Vec<f64> = (0..n).map(|_| gamma.sample(&mut rng)).collect();
                let total: f64 = raw.iter().sum();
                let mut counts: Vec<u64> =
                    raw.iter().map(|r| (r / total * RANDOM_DENOMINATOR as f64).floor() as u64).collect();
                let assigned: u64 = counts.iter().sum();
                let top = (0..n).max_by(|&a, &b| raw[a].total_cmp(&raw[b])).expect("n > 0");
                counts[top] += RANDOM_DENOMINATOR - assigned;
                let den = S::from_u64(RANDOM_DENOMINATOR).expect("fits");
                ProbDist::new(counts.into_iter().map(|c| S::from_u64(c).expect("fits") / den.clone()).collect())
            };
            let x0 = draw()?;
            let x1 = draw()?;
            Ok(Instance { x0, x1, family: default_family(n)? })
        }
        GeneratorSpec::Uniform { n } => {
            let x0 = ProbDist::uniform(n)?;
            Ok(Instance { x1: x0.clone(), x0, family: default_family(n)? })
        }
    }
}

/// All Boolean tests on small domains; otherwise singleton indicators and the
/// two half indicators, closed under negation.
pub fn default_family<S: Scalar>(n: usize) -> Result<Family<S>> {
    let domain = crate::distributions::Domain::new(n)?;
    if n <= FULL_FAMILY_DOMAIN {
        return all_boolean_family(&domain);
    }
    let mut functions = (0..n).map(|x| TestFunction::indicator(n, &[x])).collect::<Result<Vec<_>>>()?;
    let half: Vec<usize> = (0..n / 2).collect();
    functions.push(TestFunction::indicator(n, &half)?.renamed("first_half"));
    let tag = ComplexityTag { q: 1, t: n as u64, note: "singleton and half indicators".into() };
    Ok(Family::from_functions(functions)?.close_under_negation()?.with_complexity(tag))
}
