use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// Seedable generator used by the stochastic solvers. ChaCha8 produces the
/// same stream on every platform.
pub type SolverRng = ChaCha8Rng;

const SUM_TOLERANCE: f64 = 1e-12;

/// Fixed distribution over coordinates with every probability at least
/// `p_min > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
    p_min: f64,
}

impl SamplingDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(invalid("probabilities", "must be non-empty"));
        }
        if let Some((i, p)) = probabilities
            .iter()
            .enumerate()
            .find(|(_, &p)| !(p > 0.0 && p.is_finite()))
        {
            return Err(invalid(
                "probabilities",
                format!("p[{i}] = {p} is not positive"),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(invalid("probabilities", format!("sum to {total}, not 1")));
        }
        let cumulative = probabilities
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let p_min = probabilities.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            probabilities,
            cumulative,
            p_min,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    /// `p_i = w_i / sum(w)`.
    pub fn proportional(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(invalid("weights", "must have a positive finite sum"));
        }
        let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        // put the rounding residue on the largest entry
        let residue = 1.0 - probs.iter().sum::<f64>();
        if let Some(max) = probs.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            *max += residue;
        }
        Self::new(probs)
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    /// Inverse-CDF lookup of a uniform draw `u` in `[0, 1)`.
    pub fn index_for_draw(&self, u: f64) -> usize {
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1)
    }

    /// Draws one coordinate index, advancing `rng`.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.index_for_draw(u)
    }
}
