use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::error::{Error, Result};

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Inverse of the standard normal CDF: Acklam's rational approximation followed by
/// one Halley step against the `erfc`-based CDF.
pub fn norminv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("norminv needs p in (0, 1), got {p}")));
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383_577_518_672_69e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        let q = (-2.0 * q.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail(p)
    } else if p > 1.0 - P_LOW {
        -tail(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = norm_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// Separation index `√2 · norminv(auc)`.
pub fn d_prime(auc: f64) -> Result<f64> {
    if !(auc > 0.0 && auc < 1.0) {
        return Err(Error::domain(format!("d' needs AUC in (0, 1), got {auc}")));
    }
    Ok(SQRT_2 * norminv(auc)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centre_and_one_sigma() {
        assert_eq!(norminv(0.5).unwrap(), 0.0);
        assert_eq!(d_prime(0.5).unwrap(), 0.0);
        assert!((norminv(0.841344746068543).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn domain() {
        for p in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(norminv(p).is_err());
            assert!(d_prime(p).is_err());
        }
    }

    #[test]
    fn tails_are_accurate() {
        for x in [-8.0, -6.0, -3.0, -1.5, 2.2, 5.0] {
            let p = norm_cdf(x);
            assert!((norminv(p).unwrap() - x).abs() < 1e-9, "x = {x}");
        }
    }
}
