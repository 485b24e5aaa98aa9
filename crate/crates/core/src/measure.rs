//! Nonnegative measures on finite metric spaces.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::metric::{check_radius, FiniteMetricSpace};

/// Nonnegative weights indexed like the points of `space`. Weights need not sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    space: Arc<FiniteMetricSpace>,
    weights: Vec<f64>,
    total_mass: f64,
}

impl DiscreteMeasure {
    pub fn new(space: Arc<FiniteMetricSpace>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::Structural(format!(
                "{} weights for a space of {} points",
                weights.len(),
                space.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "weight of `{}` must be finite and nonnegative, got {}",
                space.label(i),
                weights[i]
            )));
        }
        let total_mass = weights.iter().sum();
        Ok(Self {
            space,
            weights,
            total_mass,
        })
    }

    /// Builds a measure from `(label, weight)` pairs; unlisted labels get weight 0.
    pub fn from_labels<'a>(
        space: Arc<FiniteMetricSpace>,
        pairs: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self> {
        let mut weights = vec![0.0; space.len()];
        for (label, w) in pairs {
            weights[space.index_of(label)?] = w;
        }
        Self::new(space, weights)
    }

    /// Weight 1/n on each of the n points.
    pub fn uniform(space: Arc<FiniteMetricSpace>) -> Result<Self> {
        if space.is_empty() {
            return Err(Error::InvalidArgument(
                "uniform measure on an empty space".into(),
            ));
        }
        let w = 1.0 / space.len() as f64;
        let n = space.len();
        Self::new(space, vec![w; n])
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, label: &str) -> Result<f64> {
        Ok(self.weights[self.space.index_of(label)?])
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub(crate) fn mass_of_indices(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.weights[i]).sum()
    }

    /// Total weight of the given labels.
    pub fn measure_of<'a>(&self, set: impl IntoIterator<Item = &'a str>) -> Result<f64> {
        let mut mass = 0.0;
        for label in set {
            mass += self.weights[self.space.index_of(label)?];
        }
        Ok(mass)
    }

    /// `min_y measure(ball(y, r))`: the uniform positivity modulus at radius `r`.
    pub fn uniform_positivity_modulus(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        if self.space.is_empty() {
            return Err(Error::InvalidArgument(
                "modulus of a measure on an empty space".into(),
            ));
        }
        Ok((0..self.space.len())
            .map(|y| self.mass_of_indices(&self.space.ball_indices(y, r)))
            .fold(f64::INFINITY, f64::min))
    }

    /// Probability measure with the same proportions.
    pub fn normalize(&self) -> Result<Self> {
        if self.total_mass <= 0.0 {
            return Err(Error::DegenerateMeasure(
                "cannot normalize a measure of total mass 0".into(),
            ));
        }
        let weights = self.weights.iter().map(|w| w / self.total_mass).collect();
        Self::new(self.space.clone(), weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn x3() -> Arc<FiniteMetricSpace> {
        Arc::new(FiniteMetricSpace::grid(3).unwrap())
    }

    #[test]
    fn measure_of_sets() {
        let mu = DiscreteMeasure::uniform(x3()).unwrap();
        assert_relative_eq!(
            mu.measure_of(["0", "0.5"]).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-15
        );
        assert_eq!(mu.measure_of([]).unwrap(), 0.0);
        assert_relative_eq!(mu.measure_of(["0", "0.5", "1"]).unwrap(), mu.total_mass());
        assert!(matches!(mu.measure_of(["2"]), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn modulus_examples() {
        let mu = DiscreteMeasure::uniform(x3()).unwrap();
        assert_relative_eq!(
            mu.uniform_positivity_modulus(0.5).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            mu.uniform_positivity_modulus(0.25).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            mu.uniform_positivity_modulus(1.0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let empty = Arc::new(FiniteMetricSpace::new(vec![], vec![]).unwrap());
        let nothing = DiscreteMeasure::new(empty, vec![]).unwrap();
        assert!(nothing.uniform_positivity_modulus(0.1).is_err());
    }

    #[test]
    fn zero_weights_can_zero_the_modulus() {
        let mu = DiscreteMeasure::new(x3(), vec![0.0, 0.0, 5.0]).unwrap();
        assert_eq!(mu.uniform_positivity_modulus(0.25).unwrap(), 0.0);
    }

    #[test]
    fn normalize_examples() {
        let mu = DiscreteMeasure::new(x3(), vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(mu.normalize().unwrap().weights(), &[0.25, 0.25, 0.5]);
        let p = mu.normalize().unwrap();
        assert_eq!(p.normalize().unwrap(), p);
        let point = DiscreteMeasure::new(x3(), vec![0.0, 0.0, 5.0]).unwrap();
        assert_eq!(point.normalize().unwrap().weights(), &[0.0, 0.0, 1.0]);
        let zero = DiscreteMeasure::new(x3(), vec![0.0; 3]).unwrap();
        assert!(matches!(zero.normalize(), Err(Error::DegenerateMeasure(_))));
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(DiscreteMeasure::new(x3(), vec![1.0, -0.1, 0.0]).is_err());
    }
}
