//! Reference data and oracles that share no code with the implementation they
//! check.

pub mod reference {
    //! Filter responses computed with SciPy for
    //! `cheby1(4, 0.5, [0.1, 10], 'bandpass', fs=240)`.

    const MAGNITUDE: &str =
        include_str!("../../core/tests/data/cheby1_o4_rp05_01_10_fs240_magnitude.txt");
    const IMPULSE: &str =
        include_str!("../../core/tests/data/cheby1_o4_rp05_01_10_fs240_impulse.txt");
    const BA: &str = include_str!("../../core/tests/data/cheby1_o4_rp05_01_10_fs240_ba.txt");

    fn rows(text: &str) -> impl Iterator<Item = Vec<f64>> + '_ {
        text.lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|v| v.parse().expect("number"))
                    .collect()
            })
    }

    /// `(frequency in Hz, |H|)` at 64 log-spaced probes from 0.05 to 110 Hz.
    pub fn magnitude() -> Vec<(f64, f64)> {
        rows(MAGNITUDE).map(|r| (r[0], r[1])).collect()
    }

    /// First 1000 samples of the unit impulse response.
    pub fn impulse() -> Vec<f64> {
        rows(IMPULSE).map(|r| r[0]).collect()
    }

    /// Numerator and denominator of the expanded transfer function.
    pub fn transfer_function() -> (Vec<f64>, Vec<f64>) {
        let mut r = rows(BA);
        (r.next().expect("numerator"), r.next().expect("denominator"))
    }
}

pub mod tables {
    /// `(TP, TN, FN, FP)` per base classifier, subject A.
    pub const SUBJECT_A: [(u64, u64, u64, u64); 5] = [
        (1053, 9081, 1947, 5919),
        (374, 12906, 2626, 2094),
        (840, 10489, 2160, 4511),
        (2327, 3118, 673, 11882),
        (259, 13624, 2741, 1376),
    ];

    /// `(TP, TN, FN, FP)` per base classifier, subject B.
    pub const SUBJECT_B: [(u64, u64, u64, u64); 5] = [
        (141, 14391, 2859, 609),
        (495, 12489, 2505, 2511),
        (319, 13256, 2681, 1744),
        (251, 13425, 2749, 1575),
        (341, 13124, 1876, 2659),
    ];

    /// Ensemble weights for subject A.
    pub const WEIGHTS_A: [f64; 5] = [0.18742, 0.24560, 0.20952, 0.10070, 0.25675];
}

/// Mann-Whitney statistic by direct pair counting, ties worth one half.
pub fn pairwise_auc(labels: &[bool], scores: &[f64]) -> f64 {
    let pos: Vec<f64> = labels
        .iter()
        .zip(scores)
        .filter(|p| *p.0)
        .map(|p| *p.1)
        .collect();
    let neg: Vec<f64> = labels
        .iter()
        .zip(scores)
        .filter(|p| !*p.0)
        .map(|p| *p.1)
        .collect();
    let mut twice = 0u64;
    for &p in &pos {
        for &n in &neg {
            twice += if p > n {
                2
            } else if p == n {
                1
            } else {
                0
            };
        }
    }
    twice as f64 / (2.0 * pos.len() as f64 * neg.len() as f64)
}

/// Direct-form I difference equation with `a[0] = 1`.
pub fn direct_form_filter(b: &[f64], a: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for n in 0..x.len() {
        let mut acc = 0.0;
        for (k, bk) in b.iter().enumerate().take(n + 1) {
            acc += bk * x[n - k];
        }
        for (k, ak) in a.iter().enumerate().skip(1).take(n) {
            acc -= ak * y[n - k];
        }
        y[n] = acc / a[0];
    }
    y
}

/// `|B(e^{jω}) / A(e^{jω})|` evaluated term by term.
pub fn transfer_magnitude(b: &[f64], a: &[f64], freq_hz: f64, fs_hz: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq_hz / fs_hz;
    let eval = |c: &[f64]| {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, ck) in c.iter().enumerate() {
            re += ck * (k as f64 * w).cos();
            im -= ck * (k as f64 * w).sin();
        }
        (re * re + im * im).sqrt()
    };
    eval(b) / eval(a)
}

/// Inner product of a time-major template with the raw window after every
/// marker: the optimal linear detector for a known signal in white noise.
pub fn matched_filter_scores(session: &wespsq::dataformat::Session, template: &[f64]) -> Vec<f64> {
    let n_ch = session.n_channels;
    let n_times = template.len() / n_ch;
    session
        .markers
        .iter()
        .map(|m| {
            let start = m.sample_index as usize * n_ch;
            session.data[start..start + n_times * n_ch]
                .iter()
                .zip(template)
                .map(|(&x, &t)| x as f64 * t)
                .sum()
        })
        .collect()
}

/// Whether a proportion observed over `n` trials lies within `k` binomial
/// standard errors of the probability `p`.
pub fn within_binomial(observed: f64, p: f64, n: usize, k: f64) -> bool {
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    (observed - p).abs() <= k * sd
}
