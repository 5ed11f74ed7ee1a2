use rand::Rng;
use rand_distr::{Distribution, Normal};

/// One draw from `Normal(mean, std)`, clamped below at zero. `std == 0`
/// consumes no randomness.
pub fn sample_delay<R: Rng + ?Sized>(rng: &mut R, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return mean.max(0.0);
    }
    let normal = Normal::new(mean, std).expect("delay std is validated non-negative and finite");
    normal.sample(rng).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    #[test]
    fn degenerate_distribution() {
        let mut rng = rng_from(1);
        for _ in 0..10 {
            assert_eq!(sample_delay(&mut rng, 0.3, 0.0), 0.3);
            assert_eq!(sample_delay(&mut rng, -0.3, 0.0), 0.0);
        }
    }

    #[test]
    fn half_normal_mean() {
        let mut rng = rng_from(2024);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_delay(&mut rng, 0.0, 0.25)).sum::<f64>() / n as f64;
        let expected = 0.25 / (2.0 * std::f64::consts::PI).sqrt();
        // standard error of the clamped draw is about 1.5e-4
        assert!((mean - expected).abs() < 1e-3, "{mean} vs {expected}");
        assert!((expected - 0.0997).abs() < 1e-4);
    }

    #[test]
    fn seeded_sequence() {
        let mut a = rng_from(5);
        let mut b = rng_from(5);
        for _ in 0..100 {
            assert_eq!(
                sample_delay(&mut a, 0.1, 0.5).to_bits(),
                sample_delay(&mut b, 0.1, 0.5).to_bits()
            );
        }
    }
}
