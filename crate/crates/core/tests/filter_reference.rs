//! The band-pass design against SciPy's `cheby1` + `sosfilt`, and the cascade
//! against a direct-form difference equation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wespsq::dsp::{design_cheby1_bandpass, filter_signal, IirFilter};

fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn reference_filter() -> IirFilter {
    design_cheby1_bandpass(4, 0.5, 0.1, 10.0, 240.0).unwrap()
}

fn direct_form(b: &[f64], a: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for n in 0..x.len() {
        let mut acc = 0.0;
        for k in 0..b.len().min(n + 1) {
            acc += b[k] * x[n - k];
        }
        for k in 1..a.len().min(n + 1) {
            acc -= a[k] * y[n - k];
        }
        y[n] = acc;
    }
    y
}

#[test]
fn magnitude_matches_scipy() {
    let probes = rows(include_str!(
        "data/cheby1_o4_rp05_01_10_fs240_magnitude.txt"
    ));
    assert_eq!(probes.len(), 64);
    let f = reference_filter();
    for p in probes {
        let got = f.magnitude(p[0]);
        assert!(
            (got - p[1]).abs() <= 1e-6 * p[1],
            "{} Hz: {got} vs {}",
            p[0],
            p[1]
        );
    }
}

#[test]
fn transfer_function_matches_scipy() {
    let ba = rows(include_str!("data/cheby1_o4_rp05_01_10_fs240_ba.txt"));
    let (b, a) = reference_filter().transfer_function();
    assert_eq!((b.len(), a.len()), (9, 9));
    for (got, want) in b.iter().zip(&ba[0]) {
        assert!((got - want).abs() <= 1e-12, "numerator {got} vs {want}");
    }
    for (got, want) in a.iter().zip(&ba[1]) {
        assert!(
            (got - want).abs() <= 1e-9 * want.abs().max(1.0),
            "denominator {got} vs {want}"
        );
    }
}

#[test]
fn impulse_response_matches_scipy() {
    let reference: Vec<f64> = rows(include_str!("data/cheby1_o4_rp05_01_10_fs240_impulse.txt"))
        .into_iter()
        .map(|r| r[0])
        .collect();
    let mut impulse = vec![0.0f64; reference.len()];
    impulse[0] = 1.0;
    let got = filter_signal(&reference_filter(), &impulse).unwrap();
    for (i, (g, r)) in got.iter().zip(&reference).enumerate() {
        assert!((g - r).abs() < 1e-9, "sample {i}: {g} vs {r}");
    }
}

#[test]
fn cascade_equals_direct_form() {
    let ba = rows(include_str!("data/cheby1_o4_rp05_01_10_fs240_ba.txt"));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..200).map(|_| rng.random_range(-50.0..50.0)).collect();
    let want = direct_form(&ba[0], &ba[1], &x);
    let got = filter_signal(&reference_filter(), &x).unwrap();
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // The expanded eighth-order recursion (poles at |z| ≈ 0.9996) accumulates
    // rounding: SciPy's lfilter and sosfilt disagree by 5e-7 of full scale after
    // 200 samples and 6e-4 after 2000, so the oracle is only trusted briefly.
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 2e-6 * scale, "{g} vs {w}");
    }
}

#[test]
fn single_precision_tracks_double() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<f64> = (0..5000).map(|_| rng.random_range(-50.0..50.0)).collect();
    let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    let f = reference_filter();
    let y64 = filter_signal(&f, &x).unwrap();
    let y32 = filter_signal(&f, &x32).unwrap();
    let scale = y64.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = y64
        .iter()
        .zip(&y32)
        .map(|(a, &b)| (a - b as f64).abs())
        .fold(0.0, f64::max);
    assert!(
        worst < 1e-2 * scale,
        "f32 cascade drifted by {worst} (scale {scale})"
    );
}
