//! Character decoding from accumulated flash scores.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataformat::{decode_character, SpellerMatrix, N_CODES, N_REPETITIONS};
use crate::dsp::{Epoch, EpochSet};
use crate::ensemble::EpochScorer;
use crate::error::{Error, Result};

/// Scores of one character: `raw[r][i]` is the score of code `i + 1` in repetition
/// `r`; `f` holds the mean over the first `repetitions` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBoard {
    pub f: [f64; N_CODES],
    pub repetitions: usize,
    pub raw: Vec<[f64; N_CODES]>,
}

impl ScoreBoard {
    /// Board over the first `j` rows of `raw`.
    pub fn from_raw(raw: Vec<[f64; N_CODES]>, j: usize) -> Result<Self> {
        if j == 0 || j > raw.len() {
            return Err(Error::domain(format!(
                "repetitions {j} outside 1..={}",
                raw.len()
            )));
        }
        let mut f = [0.0; N_CODES];
        for row in &raw[..j] {
            for (acc, s) in f.iter_mut().zip(row) {
                *acc += s;
            }
        }
        for v in &mut f {
            *v /= j as f64;
        }
        Ok(Self {
            f,
            repetitions: j,
            raw,
        })
    }

    /// Running means for `1..=raw.len()` repetitions.
    pub fn running_means(&self) -> Vec<[f64; N_CODES]> {
        let mut sums = [0.0; N_CODES];
        self.raw
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let mut mean = [0.0; N_CODES];
                for i in 0..N_CODES {
                    sums[i] += row[i];
                    mean[i] = sums[i] / (r + 1) as f64;
                }
                mean
            })
            .collect()
    }
}

/// Arranges one character's epochs into a repetition × code table, checking that
/// each of the first `j` repetitions holds every code exactly once.
fn table<'a>(epochs: &'a [&'a Epoch], j: usize) -> Result<Vec<[Option<&'a Epoch>; N_CODES]>> {
    let character = epochs.first().map_or(0, |e| e.character);
    let mut grid = vec![[None; N_CODES]; j];
    for e in epochs {
        if e.repetition >= j {
            continue;
        }
        if !(1..=N_CODES as u8).contains(&e.code) {
            return Err(Error::IncompleteCharacter {
                character,
                detail: format!("stimulus code {} outside 1..=12", e.code),
            });
        }
        let slot = &mut grid[e.repetition][e.code as usize - 1];
        if slot.is_some() {
            return Err(Error::IncompleteCharacter {
                character,
                detail: format!(
                    "code {} flashed twice in repetition {}",
                    e.code,
                    e.repetition + 1
                ),
            });
        }
        *slot = Some(*e);
    }
    for (r, row) in grid.iter().enumerate() {
        if let Some(i) = row.iter().position(|s| s.is_none()) {
            return Err(Error::IncompleteCharacter {
                character,
                detail: format!("code {} missing from repetition {}", i + 1, r + 1),
            });
        }
    }
    Ok(grid)
}

/// Scores the first `j` repetitions of one character.
pub fn accumulate_scores(
    scorer: &dyn EpochScorer,
    epochs: &[&Epoch],
    j: usize,
) -> Result<ScoreBoard> {
    if j == 0 {
        return Err(Error::domain("at least one repetition is needed"));
    }
    let grid = table(epochs, j)?;
    let flat: Vec<&Epoch> = grid.iter().flatten().map(|e| e.expect("checked")).collect();
    let scores = scorer.score_epochs(&flat)?;
    let raw = scores
        .chunks_exact(N_CODES)
        .map(|c| c.try_into().expect("twelve codes"))
        .collect();
    ScoreBoard::from_raw(raw, j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub row_code: u8,
    pub col_code: u8,
    pub symbol: char,
}

/// Index of the first maximum.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Column from codes 1–6, row from codes 7–12; ties go to the lower code.
pub fn predict_from_scores(f: &[f64; N_CODES], matrix: &SpellerMatrix) -> Result<Prediction> {
    let col_code = argmax(&f[..6]) as u8 + 1;
    let row_code = argmax(&f[6..]) as u8 + 7;
    Ok(Prediction {
        row_code,
        col_code,
        symbol: decode_character(row_code, col_code, matrix)?,
    })
}

pub fn predict_character(board: &ScoreBoard, matrix: &SpellerMatrix) -> Result<Prediction> {
    predict_from_scores(&board.f, matrix)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterLog {
    pub index: usize,
    pub target: Option<char>,
    /// Prediction after `1, 2, …` repetitions.
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpellingCurve {
    /// `accuracy[j - 1]` uses the first `j` repetitions.
    pub accuracy: Vec<f64>,
    pub characters: Vec<CharacterLog>,
}

impl SpellingCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("repetitions,accuracy\n");
        for (j, a) in self.accuracy.iter().enumerate() {
            let _ = writeln!(out, "{},{a}", j + 1);
        }
        out
    }

    /// One row per character and repetition count.
    pub fn predictions_csv(&self) -> String {
        let mut out =
            String::from("character,target,repetitions,row_code,col_code,predicted,correct\n");
        for c in &self.characters {
            let target = c.target.map(String::from).unwrap_or_default();
            for (j, p) in c.predictions.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{target},{},{},{},{},{}",
                    c.index,
                    j + 1,
                    p.row_code,
                    p.col_code,
                    p.symbol,
                    c.target == Some(p.symbol)
                );
            }
        }
        out
    }
}

/// Decodes every character of `set` with `j = 1..=max_reps` repetitions.
/// Unlabeled sets are decoded but yield no accuracy; use
/// [`accuracy_vs_repetitions`] when labels are required.
pub fn spell(
    scorer: &dyn EpochScorer,
    set: &EpochSet,
    max_reps: usize,
) -> Result<Vec<CharacterLog>> {
    if max_reps == 0 {
        return Err(Error::domain("at least one repetition is needed"));
    }
    (0..set.characters.len())
        .into_par_iter()
        .map(|ci| {
            let epochs: Vec<&Epoch> = set.character_epochs(ci).iter().collect();
            let board = accumulate_scores(scorer, &epochs, max_reps)?;
            let predictions = board
                .running_means()
                .iter()
                .map(|f| predict_from_scores(f, &set.matrix))
                .collect::<Result<Vec<_>>>()?;
            Ok(CharacterLog {
                index: ci,
                target: set.labeled.then_some(set.characters[ci].symbol),
                predictions,
            })
        })
        .collect()
}

pub fn accuracy_vs_repetitions(
    scorer: &dyn EpochScorer,
    set: &EpochSet,
    max_reps: usize,
) -> Result<SpellingCurve> {
    if !set.labeled {
        return Err(Error::MissingLabels);
    }
    if set.characters.is_empty() {
        return Err(Error::domain("no characters to spell"));
    }
    let characters = spell(scorer, set, max_reps)?;
    let n = characters.len() as f64;
    let accuracy = (0..max_reps)
        .map(|j| {
            characters
                .iter()
                .filter(|c| c.target == Some(c.predictions[j].symbol))
                .count() as f64
                / n
        })
        .collect();
    Ok(SpellingCurve {
        accuracy,
        characters,
    })
}

/// Full paradigm depth.
pub const DEFAULT_MAX_REPETITIONS: usize = N_REPETITIONS;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataformat::tests::tiny_session;
    use crate::dsp::{design_cheby1_bandpass, extract_epochs};
    use crate::ensemble::{ConstantScorer, OracleScorer};

    fn matrix() -> SpellerMatrix {
        SpellerMatrix::default()
    }

    fn epoch(code: u8, repetition: usize) -> Epoch {
        Epoch {
            samples: vec![],
            code,
            is_target: false,
            character: 0,
            repetition,
            sample_index: 0,
        }
    }

    /// Scores each epoch by `code + 100·repetition`.
    struct Probe;
    impl EpochScorer for Probe {
        fn score_epochs(&self, epochs: &[&Epoch]) -> Result<Vec<f64>> {
            Ok(epochs
                .iter()
                .map(|e| e.code as f64 + 100.0 * e.repetition as f64)
                .collect())
        }
    }

    fn full_character(reps: usize) -> Vec<Epoch> {
        (0..reps)
            .flat_map(|r| (1..=12u8).rev().map(move |c| epoch(c, r)))
            .collect()
    }

    #[test]
    fn one_hot_decoding() {
        let f = [0., 0., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0.];
        let p = predict_from_scores(&f, &matrix()).unwrap();
        assert_eq!((p.col_code, p.row_code, p.symbol), (3, 8, 'I'));
    }

    #[test]
    fn ties_pick_lowest_code() {
        let mut f = [0.0; 12];
        f[1] = 1.0;
        f[4] = 1.0;
        assert_eq!(predict_from_scores(&f, &matrix()).unwrap().col_code, 2);
        assert_eq!(
            predict_from_scores(&[0.5; 12], &matrix()).unwrap().symbol,
            'A'
        );
    }

    #[test]
    fn shift_and_monotone_transform_invariance() {
        let f = [0.1, 0.7, 0.3, 0.2, 0.0, 0.6, 0.9, 0.2, 0.95, 0.1, 0.4, 0.3];
        let base = predict_from_scores(&f, &matrix()).unwrap();
        let shifted = f.map(|v| v + 3.0);
        let warped = f.map(|v: f64| (5.0 * v).exp());
        assert_eq!(predict_from_scores(&shifted, &matrix()).unwrap(), base);
        assert_eq!(predict_from_scores(&warped, &matrix()).unwrap(), base);
    }

    #[test]
    fn board_means() {
        let epochs = full_character(3);
        let refs: Vec<&Epoch> = epochs.iter().collect();
        let one = accumulate_scores(&Probe, &refs, 1).unwrap();
        assert_eq!(one.f[4], 5.0);
        let two = accumulate_scores(&Probe, &refs, 2).unwrap();
        assert_eq!(two.f[4], (5.0 + 105.0) / 2.0);
        let c = accumulate_scores(&ConstantScorer(0.3), &refs, 3).unwrap();
        assert!(c.f.iter().all(|&v| (v - 0.3).abs() < 1e-15));
        let three = accumulate_scores(&Probe, &refs, 3).unwrap();
        let running = three.running_means();
        assert_eq!(running[0], one.f);
        assert_eq!(running[1], two.f);
        assert_eq!(running[2], three.f);
    }

    #[test]
    fn incomplete_repetition_rejected() {
        let mut epochs = full_character(2);
        epochs.retain(|e| !(e.repetition == 1 && e.code == 7));
        let refs: Vec<&Epoch> = epochs.iter().collect();
        assert!(accumulate_scores(&Probe, &refs, 1).is_ok());
        assert!(matches!(
            accumulate_scores(&Probe, &refs, 2),
            Err(Error::IncompleteCharacter { .. })
        ));
        epochs.push(epoch(3, 0));
        let refs: Vec<&Epoch> = epochs.iter().collect();
        assert!(matches!(
            accumulate_scores(&Probe, &refs, 1),
            Err(Error::IncompleteCharacter { .. })
        ));
    }

    fn small_set() -> EpochSet {
        let session = tiny_session("CAT_9", 2);
        let filter = design_cheby1_bandpass(4, 0.5, 0.1, 10.0, 240.0).unwrap();
        extract_epochs(&session, &filter).unwrap()
    }

    #[test]
    fn oracle_spells_perfectly() {
        let set = small_set();
        let curve = accuracy_vs_repetitions(&OracleScorer, &set, 15).unwrap();
        assert_eq!(curve.accuracy, vec![1.0; 15]);
        let csv = curve.to_csv();
        assert!(csv.starts_with("repetitions,accuracy\n1,1\n"));
        assert_eq!(csv.lines().count(), 16);
        assert_eq!(curve.predictions_csv().lines().count(), 1 + 5 * 15);
    }

    #[test]
    fn unlabeled_needs_labels() {
        let mut set = small_set();
        set.labeled = false;
        assert!(matches!(
            accuracy_vs_repetitions(&OracleScorer, &set, 15),
            Err(Error::MissingLabels)
        ));
        let logs = spell(&ConstantScorer(0.5), &set, 15).unwrap();
        assert!(logs
            .iter()
            .all(|c| c.target.is_none() && c.predictions[14].symbol == 'A'));
    }
}
