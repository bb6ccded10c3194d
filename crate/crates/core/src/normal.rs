//! Standard normal density, distribution and quantile functions.

use statrs::function::erf;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse of [`cdf`] on (0, 1); returns -inf / +inf at the endpoints.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((quantile(0.5)).abs() < 1e-15);
        assert!((pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-16);
        assert!((cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-10);
    }

    #[test]
    fn quantile_reference_values() {
        let table = [
            (1e-6, -4.753_424_308_822_899),
            (0.01, -2.326_347_874_040_840_8),
            (0.1, -1.281_551_565_544_600_4),
            (0.3, -0.524_400_512_708_040_9),
            (0.7, 0.524_400_512_708_040_7),
            (0.999, 3.090_232_306_167_813),
        ];
        for (p, z) in table {
            assert!((quantile(p) - z).abs() < 1e-12 * z.abs().max(1.0), "p={p}");
        }
        assert_eq!(quantile(0.0), f64::NEG_INFINITY);
        assert_eq!(quantile(1.0), f64::INFINITY);
    }

    #[test]
    fn cdf_round_trip() {
        for &p in &[1e-6, 0.01, 0.1, 0.3, 0.7, 0.9, 0.999] {
            assert!((cdf(quantile(p)) - p).abs() < 1e-10);
        }
    }
}
