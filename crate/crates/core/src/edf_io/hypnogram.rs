use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EdfError;

/// Scoring epoch length in seconds.
pub const EPOCH_SECONDS: f64 = 30.0;

/// Five-class R&K scheme with S3 and S4 merged into slow-wave sleep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SleepStage {
    Wake,
    S1,
    S2,
    SWS,
    REM,
}

impl SleepStage {
    pub const ALL: [SleepStage; 5] = [Self::Wake, Self::S1, Self::S2, Self::SWS, Self::REM];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Short label as written in hypnogram files.
    pub fn label(self) -> &'static str {
        match self {
            Self::Wake => "W",
            Self::S1 => "S1",
            Self::S2 => "S2",
            Self::SWS => "SWS",
            Self::REM => "REM",
        }
    }
}

impl fmt::Display for SleepStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SleepStage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "W" | "WAKE" => Ok(Self::Wake),
            "S1" => Ok(Self::S1),
            "S2" => Ok(Self::S2),
            "S3" | "S4" | "SWS" => Ok(Self::SWS),
            "REM" => Ok(Self::REM),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypnogram {
    pub epoch_duration_s: f64,
    pub stages: Vec<SleepStage>,
}

impl Hypnogram {
    pub fn new(stages: Vec<SleepStage>) -> Self {
        Self { epoch_duration_s: EPOCH_SECONDS, stages }
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.stages.len() as f64 * self.epoch_duration_s
    }

    /// Keep only as many epochs as fit in `recording_s`.
    pub fn truncate_to(&mut self, recording_s: f64) {
        let fit = (recording_s / self.epoch_duration_s + 1e-9).floor() as usize;
        self.stages.truncate(fit);
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.stages.len() * 4);
        for st in &self.stages {
            s.push_str(st.label());
            s.push('\n');
        }
        s
    }
}

/// Parse one label per line; blank lines and `#` comments are ignored.
pub fn load_hypnogram(text: &str) -> Result<Hypnogram, EdfError> {
    let mut stages = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let stage = t
            .parse()
            .map_err(|_| EdfError::UnknownLabel { line: i + 1, label: t.to_string() })?;
        stages.push(stage);
    }
    Ok(Hypnogram::new(stages))
}

#[cfg(test)]
mod tests {
    use super::*;
    use SleepStage::*;

    #[test]
    fn direct_mapping() {
        assert_eq!(load_hypnogram("W\nS1\nREM").unwrap().stages, vec![Wake, S1, REM]);
    }

    #[test]
    fn s3_s4_merge_into_sws() {
        assert_eq!(load_hypnogram("S3\nS4").unwrap().stages, vec![SWS, SWS]);
        assert_eq!(load_hypnogram("s3\nsws\n").unwrap().stages, vec![SWS, SWS]);
    }

    #[test]
    fn unknown_label_reports_line() {
        assert_eq!(
            load_hypnogram("S9").unwrap_err(),
            EdfError::UnknownLabel { line: 1, label: "S9".into() }
        );
        assert_eq!(
            load_hypnogram("# scored\nW\n\nX").unwrap_err(),
            EdfError::UnknownLabel { line: 4, label: "X".into() }
        );
    }

    #[test]
    fn text_round_trip() {
        let h = Hypnogram::new(vec![Wake, S2, SWS, REM, S1]);
        assert_eq!(load_hypnogram(&h.to_text()).unwrap(), h);
    }

    #[test]
    fn truncation_respects_duration() {
        let mut h = Hypnogram::new(vec![Wake; 5]);
        h.truncate_to(95.0);
        assert_eq!(h.len(), 3);
    }
}
