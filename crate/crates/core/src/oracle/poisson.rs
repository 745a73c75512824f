use crate::error::{Error, Result};

/// Poisson law of the passive fill count over one bin, parameterized by its mean `lambda+ dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonSpec {
    mean: f64,
}

impl PoissonSpec {
    pub fn new(mean: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::invalid(
                "mean",
                format!("Poisson mean must be finite, got {mean}"),
            ));
        }
        if mean < 0.0 {
            return Err(Error::NegativeRate { rate: mean });
        }
        Ok(Self { mean })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Truncation point `K = ceil(m + 10 sqrt(m) + 20)`.
    pub fn truncation(&self) -> u64 {
        (self.mean + 10.0 * self.mean.sqrt() + 20.0).ceil() as u64
    }

    /// `e^{-m} m^k / k!`, evaluated in log space.
    pub fn pmf(&self, k: u64) -> f64 {
        if self.mean == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        (-self.mean + k as f64 * self.mean.ln() - ln_factorial(k)).exp()
    }

    /// Probabilities for `0..=K`.
    pub fn table(&self) -> Vec<f64> {
        (0..=self.truncation()).map(|k| self.pmf(k)).collect()
    }

    /// Mass omitted by truncating at `K`, as the complement of the cumulative sum.
    pub fn tail_mass(&self) -> f64 {
        (1.0 - self.table().iter().sum::<f64>()).max(0.0)
    }
}

fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}
