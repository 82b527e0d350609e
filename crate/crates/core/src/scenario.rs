//! Monte Carlo demand scenarios drawn from per-zone mixture forecasts.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::mdn::GmmParams;

/// Equally weighted demand scenarios; `scenarios[ω][z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Vec<f64>>,
    pub seed: u64,
}

impl ScenarioSet {
    /// Wraps explicit demand vectors (for example a single point forecast).
    pub fn from_vectors(scenarios: Vec<Vec<f64>>) -> Result<Self> {
        let set = ScenarioSet { scenarios, seed: 0 };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn zones(&self) -> usize {
        self.scenarios.first().map_or(0, Vec::len)
    }

    pub fn probability(&self) -> f64 {
        1.0 / self.scenarios.len() as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.zones()];
        for s in &self.scenarios {
            for (a, v) in m.iter_mut().zip(s) {
                *a += v;
            }
        }
        let p = self.probability();
        m.iter_mut().for_each(|v| *v *= p);
        m
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::invalid("scenario set is empty"));
        }
        let z = self.zones();
        for s in &self.scenarios {
            if s.len() != z {
                return Err(Error::Shape {
                    context: "scenario zones",
                    expected: z,
                    actual: s.len(),
                });
            }
            if s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid("scenario demands must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// One draw from `p`: a component index by weight, then a normal variate.
pub fn sample_mixture<R: rand::Rng>(p: &GmmParams, rng: &mut R) -> f64 {
    let idx = if p.k() == 1 {
        0
    } else {
        WeightedIndex::new(p.weights()).map_or(0, |w| w.sample(rng))
    };
    let z: f64 = StandardNormal.sample(rng);
    p.means()[idx] + p.stds()[idx] * z
}

/// Draws `n` scenarios, one independent value per zone, negatives clipped
/// at zero. Scenario `ω` uses its own ChaCha stream so the result does not
/// depend on the execution mode.
pub fn sample_scenarios(forecasts: &[GmmParams], n: usize, seed: u64, exec: ExecMode) -> Result<ScenarioSet> {
    if n == 0 {
        return Err(Error::invalid("scenario count must be >= 1"));
    }
    if forecasts.is_empty() {
        return Err(Error::invalid("no zone forecasts to sample from"));
    }
    let scenarios = exec.map_range(n, |w| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(w as u64);
        forecasts.iter().map(|p| sample_mixture(p, &mut rng).max(0.0)).collect()
    });
    Ok(ScenarioSet { scenarios, seed })
}
