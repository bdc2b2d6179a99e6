//! Session model, the 6×6 speller matrix, and the EEGB container.
//!
//! An EEGB file is laid out as
//!
//! ```text
//! "EEGB" | version u8 (0x01) | header_len u32 LE | JSON header | f32 LE raster
//! ```
//!
//! The raster is sample-major (`n_samples × n_channels`) and carries exactly
//! `n_samples * n_channels * 4` bytes.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples in one post-stimulus window (667 ms at 240 Hz).
pub const EPOCH_LEN: usize = 160;
/// Row and column codes per paradigm repetition.
pub const N_CODES: usize = 12;
/// Repetitions of the 12 flashes per spelled character.
pub const N_REPETITIONS: usize = 15;
/// Markers per spelled character.
pub const MARKERS_PER_CHARACTER: usize = N_CODES * N_REPETITIONS;
pub const DEFAULT_FS_HZ: f64 = 240.0;
pub const DEFAULT_N_CHANNELS: usize = 64;

pub const EEGB_MAGIC: &[u8; 4] = b"EEGB";
pub const EEGB_VERSION: u8 = 1;

/// Column codes are 1..=6, row codes 7..=12.
pub fn is_column_code(code: u8) -> bool {
    (1..=6).contains(&code)
}

pub fn is_row_code(code: u8) -> bool {
    (7..=12).contains(&code)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct SpellerMatrix {
    cells: [[char; 6]; 6],
}

impl Default for SpellerMatrix {
    fn default() -> Self {
        Self::from_rows(&["ABCDEF", "GHIJKL", "MNOPQR", "STUVWX", "YZ1234", "56789_"])
            .expect("default layout is valid")
    }
}

impl SpellerMatrix {
    /// Builds a matrix from six rows of six symbols: 26 letters, 9 digits and one
    /// other symbol, all distinct.
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        if rows.len() != 6 {
            return Err(Error::Validation(format!(
                "speller matrix needs 6 rows, got {}",
                rows.len()
            )));
        }
        let mut cells = [[' '; 6]; 6];
        for (r, row) in rows.iter().enumerate() {
            let chars: Vec<char> = row.as_ref().chars().collect();
            if chars.len() != 6 {
                return Err(Error::Validation(format!(
                    "speller matrix row {r} has {} symbols, expected 6",
                    chars.len()
                )));
            }
            cells[r].copy_from_slice(&chars);
        }
        let all: Vec<char> = cells.iter().flatten().copied().collect();
        let distinct: BTreeSet<char> = all.iter().copied().collect();
        if distinct.len() != 36 {
            return Err(Error::Validation(
                "speller matrix symbols are not distinct".into(),
            ));
        }
        let letters = all.iter().filter(|c| c.is_ascii_alphabetic()).count();
        let digits = all.iter().filter(|c| c.is_ascii_digit()).count();
        if letters != 26 || digits != 9 {
            return Err(Error::Validation(format!(
                "speller matrix must hold 26 letters, 9 digits and 1 symbol (got {letters} letters, {digits} digits)"
            )));
        }
        Ok(Self { cells })
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<char> {
        self.cells.get(row).and_then(|r| r.get(col)).copied()
    }

    pub fn rows(&self) -> Vec<String> {
        self.cells.iter().map(|r| r.iter().collect()).collect()
    }

    /// `(row_code, col_code)` of a symbol.
    pub fn codes_of(&self, symbol: char) -> Option<(u8, u8)> {
        for (r, row) in self.cells.iter().enumerate() {
            if let Some(c) = row.iter().position(|&s| s == symbol) {
                return Some((r as u8 + 7, c as u8 + 1));
            }
        }
        None
    }

    pub fn symbols(&self) -> impl Iterator<Item = char> + '_ {
        self.cells.iter().flatten().copied()
    }
}

impl TryFrom<Vec<String>> for SpellerMatrix {
    type Error = Error;
    fn try_from(rows: Vec<String>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SpellerMatrix> for Vec<String> {
    fn from(m: SpellerMatrix) -> Self {
        m.rows()
    }
}

/// Symbol at the intersection of a flashed row (7..=12) and column (1..=6).
pub fn decode_character(row_code: u8, col_code: u8, matrix: &SpellerMatrix) -> Result<char> {
    if !is_row_code(row_code) {
        return Err(Error::domain(format!("row code {row_code} outside 7..=12")));
    }
    if !is_column_code(col_code) {
        return Err(Error::domain(format!(
            "column code {col_code} outside 1..=6"
        )));
    }
    Ok(matrix.cells[(row_code - 7) as usize][(col_code - 1) as usize])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusMarker {
    pub sample_index: u64,
    pub code: u8,
    pub is_target: bool,
}

/// One spelled character: its target symbol and the contiguous run of markers it owns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharacterSpan {
    pub symbol: char,
    pub first_marker: usize,
    pub n_markers: usize,
}

impl CharacterSpan {
    pub fn markers(&self) -> std::ops::Range<usize> {
        self.first_marker..self.first_marker + self.n_markers
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub subject_id: String,
    pub fs_hz: f64,
    pub n_channels: usize,
    pub channel_names: Vec<String>,
    /// Sample-major raster, `n_samples × n_channels`, microvolts.
    pub data: Vec<f32>,
    pub markers: Vec<StimulusMarker>,
    pub characters: Vec<CharacterSpan>,
    pub matrix: SpellerMatrix,
    /// False for recordings distributed without target flags.
    pub labeled: bool,
    /// Free-form provenance echoed into the header (e.g. a generator config).
    pub provenance: Option<serde_json::Value>,
}

impl Session {
    pub fn n_samples(&self) -> usize {
        self.data.len().checked_div(self.n_channels).unwrap_or(0)
    }

    pub fn sample(&self, t: usize) -> &[f32] {
        &self.data[t * self.n_channels..(t + 1) * self.n_channels]
    }

    pub fn default_channel_names(n: usize) -> Vec<String> {
        (0..n).map(|c| format!("ch{c:02}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    InvalidSamplingRate(f64),
    NoChannels,
    RasterShape {
        len: usize,
        n_channels: usize,
    },
    ChannelNames {
        names: usize,
        n_channels: usize,
    },
    UnsortedMarkers {
        index: usize,
    },
    CodeOutOfRange {
        index: usize,
        code: u8,
    },
    WindowOverrun {
        index: usize,
        sample_index: u64,
        n_samples: usize,
    },
    SpanLayout {
        character: usize,
        detail: String,
    },
    MarkerCount {
        character: usize,
        count: usize,
    },
    RepetitionCount {
        character: usize,
        code: u8,
        count: usize,
    },
    TargetCount {
        character: usize,
        count: usize,
    },
    TargetMismatch {
        character: usize,
        detail: String,
    },
    UnknownSymbol {
        character: usize,
        symbol: char,
    },
    TargetInUnlabeled {
        index: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            InvalidSamplingRate(fs) => write!(f, "invalid sampling rate {fs}"),
            NoChannels => write!(f, "session has no channels"),
            RasterShape { len, n_channels } => {
                write!(f, "raster of {len} values is not a multiple of {n_channels} channels")
            }
            ChannelNames { names, n_channels } => {
                write!(f, "{names} channel names for {n_channels} channels")
            }
            UnsortedMarkers { index } => {
                write!(f, "unsorted markers: marker {index} does not follow its predecessor")
            }
            CodeOutOfRange { index, code } => {
                write!(f, "marker {index} has code {code} outside 1..=12")
            }
            WindowOverrun { index, sample_index, n_samples } => write!(
                f,
                "marker {index} at sample {sample_index} has no full {EPOCH_LEN}-sample window in {n_samples} samples"
            ),
            SpanLayout { character, detail } => write!(f, "character {character}: {detail}"),
            MarkerCount { character, count } => write!(
                f,
                "character {character} has {count} markers, expected {MARKERS_PER_CHARACTER}"
            ),
            RepetitionCount { character, code, count } => write!(
                f,
                "character {character}: code {code} appears {count} times, expected {N_REPETITIONS}"
            ),
            TargetCount { character, count } => {
                write!(f, "character {character}: target count ≠ 2 ({count} target codes)")
            }
            TargetMismatch { character, detail } => write!(f, "character {character}: {detail}"),
            UnknownSymbol { character, symbol } => {
                write!(f, "character {character}: symbol {symbol:?} not in speller matrix")
            }
            TargetInUnlabeled { index } => {
                write!(f, "marker {index} flagged as target in an unlabeled session")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Turns the first violation into an error.
    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::Validation(v.to_string())),
        }
    }
}

pub fn validate_session(session: &Session) -> ValidationReport {
    let mut v = Vec::new();
    if !(session.fs_hz.is_finite() && session.fs_hz > 0.0) {
        v.push(Violation::InvalidSamplingRate(session.fs_hz));
    }
    if session.n_channels == 0 {
        v.push(Violation::NoChannels);
        return ValidationReport { violations: v };
    }
    if !session.data.len().is_multiple_of(session.n_channels) {
        v.push(Violation::RasterShape {
            len: session.data.len(),
            n_channels: session.n_channels,
        });
    }
    if session.channel_names.len() != session.n_channels {
        v.push(Violation::ChannelNames {
            names: session.channel_names.len(),
            n_channels: session.n_channels,
        });
    }
    let n_samples = session.n_samples();
    for (i, m) in session.markers.iter().enumerate() {
        if i > 0 && m.sample_index <= session.markers[i - 1].sample_index {
            v.push(Violation::UnsortedMarkers { index: i });
        }
        if !(1..=12).contains(&m.code) {
            v.push(Violation::CodeOutOfRange {
                index: i,
                code: m.code,
            });
        }
        if m.sample_index + EPOCH_LEN as u64 > n_samples as u64 {
            v.push(Violation::WindowOverrun {
                index: i,
                sample_index: m.sample_index,
                n_samples,
            });
        }
        if !session.labeled && m.is_target {
            v.push(Violation::TargetInUnlabeled { index: i });
        }
    }

    let mut expected_first = 0usize;
    for (ci, span) in session.characters.iter().enumerate() {
        if span.first_marker != expected_first {
            v.push(Violation::SpanLayout {
                character: ci,
                detail: format!(
                    "starts at marker {}, expected {expected_first}",
                    span.first_marker
                ),
            });
        }
        expected_first = span.first_marker + span.n_markers;
        if span.n_markers != MARKERS_PER_CHARACTER {
            v.push(Violation::MarkerCount {
                character: ci,
                count: span.n_markers,
            });
        }
        let Some(markers) = session.markers.get(span.markers()) else {
            v.push(Violation::SpanLayout {
                character: ci,
                detail: format!(
                    "marker range {:?} exceeds {} markers",
                    span.markers(),
                    session.markers.len()
                ),
            });
            continue;
        };
        let mut counts = [0usize; N_CODES + 1];
        let mut target_codes = BTreeSet::new();
        for m in markers.iter().filter(|m| (1..=12).contains(&m.code)) {
            counts[m.code as usize] += 1;
            if m.is_target {
                target_codes.insert(m.code);
            }
        }
        for code in 1..=N_CODES as u8 {
            if counts[code as usize] != N_REPETITIONS {
                v.push(Violation::RepetitionCount {
                    character: ci,
                    code,
                    count: counts[code as usize],
                });
            }
        }
        if !session.labeled {
            continue;
        }
        let codes = session.matrix.codes_of(span.symbol);
        if codes.is_none() {
            v.push(Violation::UnknownSymbol {
                character: ci,
                symbol: span.symbol,
            });
        }
        if target_codes.len() != 2 {
            v.push(Violation::TargetCount {
                character: ci,
                count: target_codes.len(),
            });
            continue;
        }
        // every flash of a target code must be flagged, and nothing else
        let inconsistent = markers
            .iter()
            .any(|m| m.is_target != target_codes.contains(&m.code));
        if inconsistent {
            v.push(Violation::TargetMismatch {
                character: ci,
                detail: "target flags differ between flashes of the same code".into(),
            });
        }
        if let Some((row, col)) = codes {
            if !(target_codes.contains(&row) && target_codes.contains(&col)) {
                v.push(Violation::TargetMismatch {
                    character: ci,
                    detail: format!(
                        "target codes {target_codes:?} do not match symbol {:?} (row {row}, column {col})",
                        span.symbol
                    ),
                });
            }
        }
    }
    if expected_first != session.markers.len() && !session.characters.is_empty() {
        v.push(Violation::SpanLayout {
            character: session.characters.len() - 1,
            detail: format!(
                "character spans cover {expected_first} of {} markers",
                session.markers.len()
            ),
        });
    }
    ValidationReport { violations: v }
}

#[derive(Debug, Serialize, Deserialize)]
struct CharacterRecord {
    symbol: String,
    first_marker: usize,
    n_markers: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct EegbHeader {
    subject_id: String,
    fs_hz: f64,
    n_channels: usize,
    n_samples: usize,
    channel_names: Vec<String>,
    matrix: SpellerMatrix,
    markers: Vec<StimulusMarker>,
    characters: Vec<CharacterRecord>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    unlabeled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

/// Serializes a validated session; returns the number of bytes written.
pub fn write_session<W: Write>(session: &Session, mut sink: W) -> Result<u64> {
    validate_session(session).into_result()?;
    let header = EegbHeader {
        subject_id: session.subject_id.clone(),
        fs_hz: session.fs_hz,
        n_channels: session.n_channels,
        n_samples: session.n_samples(),
        channel_names: session.channel_names.clone(),
        matrix: session.matrix.clone(),
        markers: session.markers.clone(),
        characters: session
            .characters
            .iter()
            .map(|c| CharacterRecord {
                symbol: c.symbol.to_string(),
                first_marker: c.first_marker,
                n_markers: c.n_markers,
            })
            .collect(),
        unlabeled: !session.labeled,
        provenance: session.provenance.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(Error::header)?;
    let written = write_container(&mut sink, EEGB_MAGIC, EEGB_VERSION, &json, &session.data)?;
    sink.flush()?;
    Ok(written)
}

pub fn read_session<R: Read>(source: R) -> Result<Session> {
    let (json, raster_bytes) = read_container(source, EEGB_MAGIC, EEGB_VERSION)?;
    let header: EegbHeader = serde_json::from_slice(&json).map_err(Error::header)?;
    let expected = (header.n_samples as u64) * (header.n_channels as u64) * 4;
    let data = decode_raster(&raster_bytes, expected)?;
    let characters = header
        .characters
        .iter()
        .map(|c| {
            let mut chars = c.symbol.chars();
            match (chars.next(), chars.next()) {
                (Some(symbol), None) => Ok(CharacterSpan {
                    symbol,
                    first_marker: c.first_marker,
                    n_markers: c.n_markers,
                }),
                _ => Err(Error::Header(format!(
                    "character symbol {:?} is not a single character",
                    c.symbol
                ))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let session = Session {
        subject_id: header.subject_id,
        fs_hz: header.fs_hz,
        n_channels: header.n_channels,
        channel_names: header.channel_names,
        data,
        markers: header.markers,
        characters,
        matrix: header.matrix,
        labeled: !header.unlabeled,
        provenance: header.provenance,
    };
    validate_session(&session).into_result()?;
    Ok(session)
}

pub(crate) fn write_container<W: Write>(
    sink: &mut W,
    magic: &[u8; 4],
    version: u8,
    header: &[u8],
    raster: &[f32],
) -> Result<u64> {
    let header_len =
        u32::try_from(header.len()).map_err(|_| Error::Header("header exceeds 4 GiB".into()))?;
    sink.write_all(magic)?;
    sink.write_all(&[version])?;
    sink.write_all(&header_len.to_le_bytes())?;
    sink.write_all(header)?;
    let mut buf = Vec::with_capacity(raster.len().min(1 << 20) * 4);
    for chunk in raster.chunks(1 << 18) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&buf)?;
    }
    Ok(9 + header.len() as u64 + raster.len() as u64 * 4)
}

/// Reads magic, version and header; returns the header bytes and the remaining payload.
pub(crate) fn read_container<R: Read>(
    mut source: R,
    magic: &[u8; 4],
    version: u8,
) -> Result<(Vec<u8>, Vec<u8>)> {
    let mut prefix = [0u8; 9];
    let got = read_fully(&mut source, &mut prefix)?;
    if got < 4 || &prefix[..4] != magic {
        return Err(Error::Magic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&prefix[..got.min(4)]).into_owned(),
        });
    }
    if got < 9 {
        return Err(Error::Truncated {
            expected: 9,
            actual: got as u64,
        });
    }
    if prefix[4] != version {
        return Err(Error::UnsupportedVersion {
            found: prefix[4],
            supported: version,
        });
    }
    let header_len = u32::from_le_bytes(prefix[5..9].try_into().unwrap()) as usize;
    let mut header = vec![0u8; header_len];
    let got = read_fully(&mut source, &mut header)?;
    if got < header_len {
        return Err(Error::Truncated {
            expected: (9 + header_len) as u64,
            actual: (9 + got) as u64,
        });
    }
    let mut payload = Vec::new();
    source.read_to_end(&mut payload)?;
    Ok((header, payload))
}

pub(crate) fn decode_raster(bytes: &[u8], expected: u64) -> Result<Vec<f32>> {
    if (bytes.len() as u64) < expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len() as u64,
        });
    }
    if bytes.len() as u64 > expected {
        return Err(Error::Header(format!(
            "payload holds {} bytes but the header declares {expected}",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect())
}

fn read_fully<R: Read>(source: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// One character per symbol, flashes 42 samples apart, codes in a fixed rotation.
    pub(crate) fn tiny_session(symbols: &str, n_channels: usize) -> Session {
        let matrix = SpellerMatrix::default();
        let mut markers = Vec::new();
        let mut characters = Vec::new();
        let mut t = 10u64;
        for symbol in symbols.chars() {
            let (row, col) = matrix.codes_of(symbol).unwrap();
            let first = markers.len();
            for rep in 0..N_REPETITIONS {
                for k in 0..N_CODES {
                    let code = ((k + rep) % N_CODES) as u8 + 1;
                    markers.push(StimulusMarker {
                        sample_index: t,
                        code,
                        is_target: code == row || code == col,
                    });
                    t += 42;
                }
            }
            characters.push(CharacterSpan {
                symbol,
                first_marker: first,
                n_markers: MARKERS_PER_CHARACTER,
            });
        }
        let n_samples = t as usize + EPOCH_LEN;
        let data = (0..n_samples * n_channels)
            .map(|i| ((i * 7919) % 1000) as f32 * 0.01 - 5.0)
            .collect();
        Session {
            subject_id: "T".into(),
            fs_hz: DEFAULT_FS_HZ,
            n_channels,
            channel_names: Session::default_channel_names(n_channels),
            data,
            markers,
            characters,
            matrix,
            labeled: true,
            provenance: None,
        }
    }

    #[test]
    fn decode_default_layout() {
        let m = SpellerMatrix::default();
        assert_eq!(decode_character(7, 1, &m).unwrap(), 'A');
        assert_eq!(decode_character(12, 6, &m).unwrap(), '_');
        assert_eq!(decode_character(9, 4, &m).unwrap(), 'P');
        assert!(matches!(decode_character(6, 1, &m), Err(Error::Domain(_))));
        assert!(matches!(decode_character(7, 7, &m), Err(Error::Domain(_))));
    }

    #[test]
    fn decode_is_a_bijection() {
        let m = SpellerMatrix::default();
        let mut seen = BTreeSet::new();
        for row in 7..=12 {
            for col in 1..=6 {
                let s = decode_character(row, col, &m).unwrap();
                assert_eq!(m.codes_of(s), Some((row, col)));
                seen.insert(s);
            }
        }
        assert_eq!(seen.len(), 36);
    }

    #[test]
    fn matrix_rejects_bad_layouts() {
        assert!(SpellerMatrix::from_rows(&["ABCDEF"; 6]).is_err());
        assert!(
            SpellerMatrix::from_rows(&["ABCDEF", "GHIJKL", "MNOPQR", "STUVWX", "YZ1234"]).is_err()
        );
        assert!(SpellerMatrix::from_rows(&[
            "ABCDEF", "GHIJKL", "MNOPQR", "STUVWX", "YZ1234", "56789-"
        ])
        .is_ok());
        // two extra symbols, eight digits
        assert!(SpellerMatrix::from_rows(&[
            "ABCDEF", "GHIJKL", "MNOPQR", "STUVWX", "YZ1234", "5678-_"
        ])
        .is_err());
    }

    #[test]
    fn well_formed_session_validates() {
        let s = tiny_session("AB", 3);
        assert!(validate_session(&s).is_valid());
        assert_eq!(s.markers.len(), 2 * MARKERS_PER_CHARACTER);
        assert_eq!(s.markers.iter().filter(|m| m.is_target).count(), 2 * 2 * 15);
    }

    #[test]
    fn three_target_codes_reported() {
        let mut s = tiny_session("A", 2);
        for m in s.markers.iter_mut().filter(|m| m.code == 4) {
            m.is_target = true;
        }
        let report = validate_session(&s);
        assert!(report
            .violations
            .iter()
            .any(|v| v.to_string().contains("target count ≠ 2")));
    }

    #[test]
    fn unsorted_markers_reported() {
        let mut s = tiny_session("A", 2);
        s.markers.swap(3, 4);
        let report = validate_session(&s);
        assert!(report
            .violations
            .iter()
            .any(|v| v.to_string().contains("unsorted markers")));
    }

    #[test]
    fn window_overrun_rejected() {
        let mut s = tiny_session("A", 2);
        let n = s.n_samples();
        s.data.truncate((n - 100) * 2);
        assert!(validate_session(&s)
            .violations
            .iter()
            .any(|v| matches!(v, Violation::WindowOverrun { .. })));
    }

    #[test]
    fn round_trip_is_exact() {
        let mut s = tiny_session("Z", 64);
        s.data[5] = f32::from_bits(0x3f80_0001);
        s.data[6] = -0.0;
        let mut buf = Vec::new();
        let n = write_session(&s, &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        let back = read_session(buf.as_slice()).unwrap();
        assert_eq!(back.fs_hz, 240.0);
        assert_eq!(back.markers, s.markers);
        assert_eq!(back.characters, s.characters);
        let bits = |d: &[f32]| d.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.data), bits(&s.data));
        assert_eq!(back, s);
    }

    #[test]
    fn container_layout() {
        let s = tiny_session("A", 2);
        let mut buf = Vec::new();
        write_session(&s, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"EEGB");
        assert_eq!(buf[4], 1);
        let hl = u32::from_le_bytes(buf[5..9].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&buf[9..9 + hl]).unwrap();
        assert_eq!(header["n_channels"], 2);
        assert_eq!(header["matrix"][4], "YZ1234");
        assert_eq!(header["markers"][0]["code"], s.markers[0].code);
        assert_eq!(buf.len() - 9 - hl, s.data.len() * 4);
        assert_eq!(&buf[9 + hl..9 + hl + 4], &s.data[0].to_le_bytes());
    }

    #[test]
    fn read_errors_are_distinct() {
        let s = tiny_session("A", 2);
        let mut buf = Vec::new();
        write_session(&s, &mut buf).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_session(bad.as_slice()),
            Err(Error::Magic { .. })
        ));

        let cut = &buf[..buf.len() - 10];
        match read_session(cut) {
            Err(Error::Truncated { expected, actual }) => {
                assert_eq!(expected, s.data.len() as u64 * 4);
                assert_eq!(actual, expected - 10);
            }
            other => panic!("expected truncation, got {other:?}"),
        }

        let mut legacy = buf.clone();
        legacy[4] = 0;
        assert!(matches!(
            read_session(legacy.as_slice()),
            Err(Error::UnsupportedVersion { found: 0, .. })
        ));
    }

    #[test]
    fn code_13_rejected_on_read() {
        let s = tiny_session("A", 2);
        let mut buf = Vec::new();
        write_session(&s, &mut buf).unwrap();
        let hl = u32::from_le_bytes(buf[5..9].try_into().unwrap()) as usize;
        let mut header: serde_json::Value = serde_json::from_slice(&buf[9..9 + hl]).unwrap();
        header["markers"][0]["code"] = 13.into();
        let json = serde_json::to_vec(&header).unwrap();
        let mut out = Vec::new();
        out.extend_from_slice(b"EEGB\x01");
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&buf[9 + hl..]);
        match read_session(out.as_slice()) {
            Err(Error::Validation(msg)) => assert!(msg.contains("code 13"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_session_not_written() {
        let mut s = tiny_session("A", 2);
        s.markers[0].code = 0;
        assert!(matches!(
            write_session(&s, Vec::new()),
            Err(Error::Validation(_))
        ));
    }
}
