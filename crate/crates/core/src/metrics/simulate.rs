//! Character accuracy when row and column scores are Gaussian with a given d′.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::normal::{norm_cdf, norm_pdf};

/// Rows (or columns) competing for each axis.
pub const N_CANDIDATES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub d_prime: f64,
    pub repetitions: usize,
    pub accuracy: f64,
}

/// Monte-Carlo estimate for `1..=max_reps` repetitions. Each repetition draws one
/// score per code: the target row and column from `N(d′, 1)`, the other ten from
/// `N(0, 1)`. A character is correct at `j` when both accumulated argmaxes hit the
/// targets. Character `i` uses its own ChaCha stream, so results do not depend on
/// thread scheduling.
pub fn simulate_char_accuracy(
    d_prime: f64,
    max_reps: usize,
    n_characters: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(d_prime >= 0.0 && d_prime.is_finite()) {
        return Err(Error::domain(format!(
            "d' must be finite and non-negative, got {d_prime}"
        )));
    }
    if n_characters == 0 || max_reps == 0 {
        return Err(Error::domain(
            "need at least one character and one repetition",
        ));
    }
    let counts = (0..n_characters)
        .into_par_iter()
        .fold(
            || vec![0u64; max_reps],
            |mut acc, i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let mut sums = [[0.0f64; N_CANDIDATES]; 2];
                for hit in acc.iter_mut() {
                    let mut correct = true;
                    for axis in &mut sums {
                        for (c, s) in axis.iter_mut().enumerate() {
                            let z: f64 = rng.sample(StandardNormal);
                            // candidate 0 is the target
                            *s += if c == 0 { z + d_prime } else { z };
                        }
                        correct &= axis[1..].iter().all(|&s| s < axis[0]);
                    }
                    *hit += correct as u64;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; max_reps],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(counts
        .iter()
        .map(|&c| c as f64 / n_characters as f64)
        .collect())
}

/// Exact counterpart of [`simulate_char_accuracy`]: with `μ = d′·√reps`,
/// `P_axis = ∫ φ(x − μ) Φ(x)⁵ dx` and the character accuracy is `P_axis²`.
pub fn analytic_char_accuracy(d_prime: f64, reps: usize) -> Result<f64> {
    if !d_prime.is_finite() {
        return Err(Error::domain(format!("d' must be finite, got {d_prime}")));
    }
    if reps == 0 {
        return Err(Error::domain("need at least one repetition"));
    }
    let mu = d_prime * (reps as f64).sqrt();
    let f = |t: f64| norm_pdf(t) * norm_cdf(t + mu).powi(N_CANDIDATES as i32 - 1);
    // φ(t) < 1e-31 beyond |t| = 12
    let p_axis = integrate(&f, -12.0, 12.0, 1e-12)?;
    Ok(p_axis.clamp(0.0, 1.0).powi(2))
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Gauss-Kronrod 7/15 on `[a, b]`: `(kronrod, |kronrod - gauss|)`.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 2000;
    let mut pieces = vec![(a, b, gk15(f, a, b))];
    loop {
        let err: f64 = pieces.iter().map(|p| p.2 .1).sum();
        if err <= tol {
            return Ok(pieces.iter().map(|p| p.2 .0).sum());
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::Numeric(format!(
                "quadrature did not converge: error estimate {err:e} after {MAX_INTERVALS} intervals"
            )));
        }
        let worst = (0..pieces.len())
            .max_by(|&i, &j| pieces[i].2 .1.total_cmp(&pieces[j].2 .1))
            .expect("non-empty");
        let (lo, hi, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        pieces.push((lo, mid, gk15(f, lo, mid)));
        pieces.push((mid, hi, gk15(f, mid, hi)));
    }
}
