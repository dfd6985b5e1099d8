use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided Student-t quantile for a 95% interval with `n - 1` degrees of freedom.
pub fn t95(n: usize) -> f64 {
    assert!(n >= 2, "need at least two samples");
    StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid degrees of freedom")
        .inverse_cdf(0.975)
}

/// Sample mean and 95% confidence half-width.
pub fn mean_ci95(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, t95(n) * (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_quantiles() {
        assert!((t95(2) - 12.7062).abs() < 1e-3);
        assert!((t95(20) - 2.0930).abs() < 1e-3);
        assert!((t95(1000) - 1.9623).abs() < 1e-3);
    }

    #[test]
    fn constant_samples_have_zero_width() {
        assert_eq!(mean_ci95(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, h) = mean_ci95(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((h - 12.7062).abs() < 1e-3);
    }
}
