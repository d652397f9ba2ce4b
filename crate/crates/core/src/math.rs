//! Small dense-vector helpers and the scalar special functions the sampler
//! needs. Everything here is allocation-free.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_68;

/// Standard normal CDF via the complementary error function.
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn standard_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal quantile for `u` in (0, 1).
///
/// A crude rational starting guess (Abramowitz & Stegun 26.2.22, absolute
/// error below 3e-3) is polished by three Newton iterations against the
/// erfc-based CDF, which is enough to reach full double precision. Fixed
/// operation count, no rejection: the caller's stream position stays a pure
/// function of how many variates were drawn.
pub fn standard_normal_quantile(u: f64) -> f64 {
    assert!(u > 0.0 && u < 1.0, "quantile argument must lie in (0,1)");
    if u == 0.5 {
        return 0.0;
    }
    // 1 - u is exact for u >= 0.5, so the reflection loses nothing.
    if u > 0.5 {
        return -lower_half_quantile(1.0 - u);
    }
    lower_half_quantile(u)
}

fn lower_half_quantile(u: f64) -> f64 {
    debug_assert!(u > 0.0 && u <= 0.5);
    let t = (-2.0 * u.ln()).sqrt();
    let mut z = -(t - (2.30753 + 0.27061 * t) / (1.0 + t * (0.99229 + t * 0.04481)));
    for _ in 0..3 {
        let err = standard_normal_cdf(z) - u;
        z -= err / standard_normal_pdf(z);
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_known_values() {
        assert_eq!(standard_normal_quantile(0.5), 0.0);
        // Phi^{-1}(0.975), the two-sided 95% point.
        assert!((standard_normal_quantile(0.975) - 1.959963984540054).abs() < 1e-12);
        // Phi(1) = 0.8413447460685429.
        assert!((standard_normal_quantile(0.841_344_746_068_542_9) - 1.0).abs() < 1e-12);
        assert!((standard_normal_quantile(1.0 - 0.841_344_746_068_542_9) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_round_trips_against_cdf() {
        // Log-spaced deep into the left tail plus a linear sweep of the bulk.
        let mut us: Vec<f64> = (1..60).map(|k| 2f64.powi(-k)).collect();
        us.extend((1..100).map(|k| k as f64 / 100.0));
        for &u in &us {
            let z = standard_normal_quantile(u);
            let back = standard_normal_cdf(z);
            assert!(
                (back - u).abs() <= 1e-13 * u.max(1e-6),
                "round trip failed at u={u}: got {back}"
            );
        }
    }

    #[test]
    fn quantile_is_monotone_and_antisymmetric() {
        let mut prev = f64::NEG_INFINITY;
        for k in 1..999 {
            let u = k as f64 / 1000.0;
            let z = standard_normal_quantile(u);
            assert!(z > prev);
            prev = z;
            let z_ref = standard_normal_quantile(1.0 - u);
            assert!((z + z_ref).abs() < 1e-12);
        }
    }

    #[test]
    fn vector_helpers() {
        let a = [3.0, 4.0];
        assert_eq!(norm(&a), 5.0);
        assert_eq!(dot(&a, &[1.0, 2.0]), 11.0);
        let mut y = [1.0, 1.0];
        axpy(2.0, &a, &mut y);
        assert_eq!(y, [7.0, 9.0]);
    }
}
