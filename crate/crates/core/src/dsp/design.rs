//! Chebyshev Type I band-pass design as a cascade of second-order sections.
//!
//! Analog lowpass prototype → lowpass-to-bandpass transform at prewarped band
//! edges → bilinear transform. Each conjugate pole pair becomes one section with
//! zeros at z = 1 and z = -1; the overall gain is split evenly across sections.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn eval(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b0 + z_inv * self.b1 + z2 * self.b2) / (1.0 + z_inv * self.a1 + z2 * self.a2)
    }

    /// Roots of `z² + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDesign {
    pub order: usize,
    pub ripple_db: f64,
    pub low_hz: f64,
    pub high_hz: f64,
    pub fs_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter {
    pub sections: Vec<Biquad>,
    pub design: FilterDesign,
}

impl IirFilter {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.design.fs_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.eval(z_inv))
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// Expanded numerator and denominator polynomials in `z^-1` (denominator monic).
    pub fn transfer_function(&self) -> (Vec<f64>, Vec<f64>) {
        let mut b = vec![1.0];
        let mut a = vec![1.0];
        for s in &self.sections {
            b = poly_mul(&b, &[s.b0, s.b1, s.b2]);
            a = poly_mul(&a, &[1.0, s.a1, s.a2]);
        }
        (b, a)
    }
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &x) in p.iter().enumerate() {
        for (j, &y) in q.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Analog Chebyshev I lowpass prototype (1 rad/s ripple edge): poles and gain.
fn cheby1_prototype(order: usize, ripple_db: f64) -> (Vec<Complex64>, f64) {
    let eps = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / order as f64;
    let poles: Vec<Complex64> = (0..order)
        .map(|k| {
            let m = -(order as f64) + 1.0 + 2.0 * k as f64;
            let theta = PI * m / (2.0 * order as f64);
            -Complex64::new(mu, theta).sinh()
        })
        .collect();
    let mut gain = poles
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, p| acc * -p)
        .re;
    if order.is_multiple_of(2) {
        gain /= (1.0 + eps * eps).sqrt();
    }
    (poles, gain)
}

pub fn design_cheby1_bandpass(
    order: usize,
    ripple_db: f64,
    low_hz: f64,
    high_hz: f64,
    fs_hz: f64,
) -> Result<IirFilter> {
    if order == 0 {
        return Err(Error::domain("filter order must be positive"));
    }
    if !(ripple_db.is_finite() && ripple_db > 0.0) {
        return Err(Error::domain(format!(
            "ripple {ripple_db} dB must be positive"
        )));
    }
    if !(fs_hz.is_finite() && fs_hz > 0.0) {
        return Err(Error::domain(format!(
            "sampling rate {fs_hz} must be positive"
        )));
    }
    if !(0.0 < low_hz && low_hz < high_hz && high_hz < fs_hz / 2.0) {
        return Err(Error::domain(format!(
            "band edges must satisfy 0 < {low_hz} < {high_hz} < {}",
            fs_hz / 2.0
        )));
    }

    let (proto, proto_gain) = cheby1_prototype(order, ripple_db);

    let fs2 = 2.0 * fs_hz;
    let warp = |f: f64| fs2 * (PI * f / fs_hz).tan();
    let (wl, wh) = (warp(low_hz), warp(high_hz));
    let bw = wh - wl;
    let w0 = (wl * wh).sqrt();

    // s -> (s² + w0²) / (bw·s): each prototype pole splits into two
    let mut analog = Vec::with_capacity(2 * order);
    for &p in &proto {
        let half = p * (bw / 2.0);
        let root = (half * half - w0 * w0).sqrt();
        analog.push(half + root);
        analog.push(half - root);
    }
    // `order` zeros at s = 0 map to z = 1; the remaining `order` at infinity map to z = -1
    let analog_gain = proto_gain * bw.powi(order as i32);
    let digital: Vec<Complex64> = analog.iter().map(|&p| (fs2 + p) / (fs2 - p)).collect();
    let denom = analog
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, &p| acc * (fs2 - p));
    let digital_gain = analog_gain * (fs2.powi(order as i32) / denom).re;

    let pairs = pair_poles(&digital)?;
    let n_sections = pairs.len();
    let section_gain = digital_gain.abs().powf(1.0 / n_sections as f64);
    let sign = digital_gain.signum();
    let sections = pairs
        .iter()
        .enumerate()
        .map(|(i, (p, q))| {
            let g = if i == 0 {
                sign * section_gain
            } else {
                section_gain
            };
            Biquad {
                b0: g,
                b1: 0.0,
                b2: -g,
                a1: -(p + q).re,
                a2: (p * q).re,
            }
        })
        .collect();
    let filter = IirFilter {
        sections,
        design: FilterDesign {
            order,
            ripple_db,
            low_hz,
            high_hz,
            fs_hz,
        },
    };
    if !filter.is_stable() {
        return Err(Error::Design(
            "designed filter has poles on or outside the unit circle".into(),
        ));
    }
    Ok(filter)
}

/// Groups poles into conjugate pairs, then leftover real poles two at a time.
fn pair_poles(poles: &[Complex64]) -> Result<Vec<(Complex64, Complex64)>> {
    const TOL: f64 = 1e-10;
    let mut upper: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > TOL).collect();
    let lower: Vec<Complex64> = poles.iter().copied().filter(|p| p.im < -TOL).collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= TOL)
        .map(|p| p.re)
        .collect();
    if upper.len() != lower.len() || !real.len().is_multiple_of(2) {
        return Err(Error::Design(format!(
            "cannot pair poles: {} upper, {} lower, {} real",
            upper.len(),
            lower.len(),
            real.len()
        )));
    }
    for p in &upper {
        let matched = lower
            .iter()
            .any(|q| (q.conj() - p).norm() <= 1e-8 * p.norm().max(1.0));
        if !matched {
            return Err(Error::Design(format!("pole {p} has no conjugate partner")));
        }
    }
    upper.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(f64::total_cmp);
    let mut pairs: Vec<(Complex64, Complex64)> = upper.iter().map(|&p| (p, p.conj())).collect();
    for r in real.chunks(2) {
        pairs.push((Complex64::new(r[0], 0.0), Complex64::new(r[1], 0.0)));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_filter() -> IirFilter {
        design_cheby1_bandpass(4, 0.5, 0.1, 10.0, 240.0).unwrap()
    }

    #[test]
    fn fourth_order_bandpass_has_four_sections() {
        let f = default_filter();
        assert_eq!(f.sections.len(), 4);
        assert_eq!(f.poles().len(), 8);
    }

    #[test]
    fn mid_band_within_ripple() {
        let f = default_filter();
        let floor = 10f64.powf(-0.5 / 20.0);
        let m = f.magnitude((0.1f64 * 10.0).sqrt());
        assert!(m >= floor && m <= 1.0, "{m}");
    }

    #[test]
    fn stopband_edges() {
        let f = default_filter();
        assert!(f.magnitude(0.0) < 1e-3);
        assert!(f.magnitude(120.0) < 1e-3);
    }

    #[test]
    fn stable_over_ripple_grid() {
        for i in 0..=29 {
            let rp = 0.1 + 0.1 * i as f64;
            let f = design_cheby1_bandpass(4, rp, 0.1, 10.0, 240.0).unwrap();
            for p in f.poles() {
                assert!(p.norm() < 1.0, "ripple {rp}: |p| = {}", p.norm());
            }
        }
    }

    #[test]
    fn in_band_probes_respect_ripple() {
        for rp in [0.1, 0.5, 1.0, 3.0] {
            let f = design_cheby1_bandpass(4, rp, 0.1, 10.0, 240.0).unwrap();
            let floor = 10f64.powf(-rp / 20.0);
            for i in 0..64 {
                let freq = 0.1 * 100f64.powf(i as f64 / 63.0);
                let m = f.magnitude(freq);
                assert!(
                    m >= floor - 1e-9 && m <= 1.0 + 1e-9,
                    "rp {rp}, f {freq}: {m}"
                );
            }
        }
    }

    #[test]
    fn odd_orders_pair_real_poles() {
        for order in 1..=7 {
            let f = design_cheby1_bandpass(order, 1.0, 1.0, 30.0, 240.0).unwrap();
            assert_eq!(f.sections.len(), order);
            assert!(f.is_stable());
            let m = f.magnitude((30.0f64).sqrt());
            assert!(m > 10f64.powf(-1.0 / 20.0) - 1e-9 && m <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn invalid_edges() {
        assert!(matches!(
            design_cheby1_bandpass(4, 0.5, 10.0, 0.1, 240.0),
            Err(Error::Domain(_))
        ));
        assert!(design_cheby1_bandpass(4, 0.5, 0.0, 10.0, 240.0).is_err());
        assert!(design_cheby1_bandpass(4, 0.5, 0.1, 120.0, 240.0).is_err());
        assert!(design_cheby1_bandpass(4, 0.0, 0.1, 10.0, 240.0).is_err());
        assert!(design_cheby1_bandpass(0, 0.5, 0.1, 10.0, 240.0).is_err());
    }
}
