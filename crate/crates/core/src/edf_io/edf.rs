use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};

use super::EdfError;

/// Label used by EDF+ for its annotation signal.
pub const ANNOTATION_LABEL: &str = "EDF Annotations";

const FIXED_HEADER: usize = 256;
const PER_SIGNAL_HEADER: usize = 256;

/// Per-signal header entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub label: String,
    pub transducer: String,
    pub physical_dim: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
}

impl SignalSpec {
    /// EEG channel with the full 16-bit digital range.
    pub fn eeg(label: &str, physical_min: f64, physical_max: f64, samples_per_record: usize) -> Self {
        Self {
            label: label.to_string(),
            transducer: "AgAgCl electrode".to_string(),
            physical_dim: "uV".to_string(),
            physical_min,
            physical_max,
            digital_min: -32768,
            digital_max: 32767,
            prefiltering: String::new(),
            samples_per_record,
        }
    }

    /// Physical units per digital step.
    pub fn gain(&self) -> f64 {
        (self.physical_max - self.physical_min) / f64::from(self.digital_max - self.digital_min)
    }

    pub fn to_physical(&self, digital: i32) -> f64 {
        self.physical_min + f64::from(digital - self.digital_min) * self.gain()
    }

    /// Nearest digital code for a physical value; `None` when it falls outside the digital range.
    pub fn to_digital(&self, physical: f64) -> Option<i32> {
        let code = (f64::from(self.digital_min) + (physical - self.physical_min) / self.gain()).round();
        if code.is_finite() && code >= f64::from(self.digital_min) && code <= f64::from(self.digital_max) {
            Some(code as i32)
        } else {
            None
        }
    }

    fn validate(&self, record_duration_s: f64) -> Result<(), String> {
        if !(self.physical_max > self.physical_min) {
            return Err(format!("signal {:?}: physical_max must exceed physical_min", self.label));
        }
        if self.digital_max <= self.digital_min {
            return Err(format!("signal {:?}: digital_max must exceed digital_min", self.label));
        }
        if self.digital_min < i32::from(i16::MIN) || self.digital_max > i32::from(i16::MAX) {
            return Err(format!("signal {:?}: digital range exceeds 16 bits", self.label));
        }
        let rate = self.samples_per_record as f64 / record_duration_s;
        if !(rate.is_finite() && rate > 0.0) {
            return Err(format!("signal {:?}: sampling rate must be positive", self.label));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdfHeader {
    pub version_tag: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start_datetime: NaiveDateTime,
    pub header_bytes: usize,
    /// `-1` marks an unknown count in files; parsed recordings always carry the resolved count.
    pub num_data_records: i64,
    pub record_duration_s: f64,
    pub reserved: String,
    pub signals: Vec<SignalSpec>,
}

impl EdfHeader {
    pub fn new(
        patient_id: &str,
        recording_id: &str,
        start_datetime: NaiveDateTime,
        num_data_records: i64,
        record_duration_s: f64,
        signals: Vec<SignalSpec>,
    ) -> Self {
        Self {
            version_tag: "0".to_string(),
            patient_id: patient_id.to_string(),
            recording_id: recording_id.to_string(),
            start_datetime,
            header_bytes: FIXED_HEADER + PER_SIGNAL_HEADER * signals.len(),
            num_data_records,
            record_duration_s,
            reserved: String::new(),
            signals,
        }
    }

    fn record_samples(&self) -> usize {
        self.signals.iter().map(|s| s.samples_per_record).sum()
    }
}

/// A decoded recording: header plus one physical-unit sample vector per signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub header: EdfHeader,
    pub channels: Vec<Vec<f64>>,
}

impl Recording {
    pub fn new(header: EdfHeader, channels: Vec<Vec<f64>>) -> Result<Self, EdfError> {
        let rec = Self { header, channels };
        rec.validate()?;
        Ok(rec)
    }

    pub fn sample_rate(&self, channel: usize) -> f64 {
        self.header.signals[channel].samples_per_record as f64 / self.header.record_duration_s
    }

    pub fn duration_s(&self) -> f64 {
        self.header.num_data_records.max(0) as f64 * self.header.record_duration_s
    }

    pub fn validate(&self) -> Result<(), EdfError> {
        let h = &self.header;
        let bad = |m: String| Err(EdfError::InvalidRecording(m));
        if h.signals.is_empty() {
            return bad("at least one signal is required".into());
        }
        if h.header_bytes != FIXED_HEADER + PER_SIGNAL_HEADER * h.signals.len() {
            return bad(format!("header_bytes {} inconsistent with {} signals", h.header_bytes, h.signals.len()));
        }
        if !(h.record_duration_s > 0.0 && h.record_duration_s.is_finite()) {
            return bad("record duration must be positive".into());
        }
        if h.num_data_records < 0 {
            return bad("record count must be resolved".into());
        }
        if self.channels.len() != h.signals.len() {
            return bad(format!("{} channels for {} signals", self.channels.len(), h.signals.len()));
        }
        for (i, (sig, data)) in h.signals.iter().zip(&self.channels).enumerate() {
            sig.validate(h.record_duration_s).or_else(bad)?;
            let expected = h.num_data_records as usize * sig.samples_per_record;
            if data.len() != expected {
                return bad(format!("channel {i}: {} samples, expected {expected}", data.len()));
            }
            if let Some(j) = data
                .iter()
                .position(|&x| !(x >= sig.physical_min && x <= sig.physical_max))
            {
                return Err(EdfError::RangeOverflow { signal: i, sample: j, value: data[j] });
            }
        }
        Ok(())
    }
}

struct Fields<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Fields<'a> {
    fn text(&mut self, width: usize) -> String {
        let s = String::from_utf8_lossy(&self.bytes[self.pos..self.pos + width])
            .trim_end()
            .trim_start()
            .to_string();
        self.pos += width;
        s
    }

    fn number<T: std::str::FromStr>(&mut self, width: usize, name: &str) -> Result<T, EdfError> {
        let raw = self.text(width);
        raw.parse::<T>()
            .map_err(|_| EdfError::MalformedHeader(format!("{name}: {raw:?} is not a number")))
    }
}

fn parse_datetime(date: &str, time: &str) -> Result<NaiveDateTime, EdfError> {
    let split = |s: &str| -> Option<(u32, u32, u32)> {
        let mut it = s.split(|c| c == '.' || c == ':').map(|p| p.trim().parse::<u32>().ok());
        let a = it.next()??;
        let b = it.next()??;
        let c = it.next()??;
        Some((a, b, c))
    };
    let err = || EdfError::MalformedHeader(format!("bad start date/time {date:?} {time:?}"));
    let (d, m, yy) = split(date).ok_or_else(err)?;
    let (hh, mm, ss) = split(time).ok_or_else(err)?;
    // EDF clipping date: two-digit years 85-99 are 1900s
    let year = if yy >= 85 { 1900 + yy } else { 2000 + yy };
    NaiveDate::from_ymd_opt(year as i32, m, d)
        .and_then(|dt| dt.and_hms_opt(hh, mm, ss))
        .ok_or_else(err)
}

/// Decode an EDF byte image into physical units.
pub fn parse_edf(bytes: &[u8]) -> Result<Recording, EdfError> {
    if bytes.len() < FIXED_HEADER {
        return Err(EdfError::TruncatedData { expected: FIXED_HEADER, found: bytes.len() });
    }
    let mut f = Fields { bytes, pos: 0 };
    let version_tag = f.text(8);
    let patient_id = f.text(80);
    let recording_id = f.text(80);
    let date = f.text(8);
    let time = f.text(8);
    let start_datetime = parse_datetime(&date, &time)?;
    let header_bytes: usize = f.number(8, "header bytes")?;
    let reserved = f.text(44);
    let num_records: i64 = f.number(8, "number of data records")?;
    let record_duration_s: f64 = f.number(8, "record duration")?;
    let ns: usize = f.number(4, "number of signals")?;

    if ns == 0 {
        return Err(EdfError::MalformedHeader("no signals".into()));
    }
    if header_bytes != FIXED_HEADER + PER_SIGNAL_HEADER * ns {
        return Err(EdfError::MalformedHeader(format!(
            "header bytes {header_bytes} does not match {ns} signals"
        )));
    }
    if !(record_duration_s > 0.0) {
        return Err(EdfError::MalformedHeader(format!("record duration {record_duration_s}")));
    }
    if bytes.len() < header_bytes {
        return Err(EdfError::TruncatedData { expected: header_bytes, found: bytes.len() });
    }

    let mut cols: Vec<Vec<String>> = Vec::with_capacity(10);
    for width in [16usize, 80, 8, 8, 8, 8, 8, 80, 8, 32] {
        cols.push((0..ns).map(|_| f.text(width)).collect());
    }
    let num = |col: usize, i: usize, name: &str| -> Result<f64, EdfError> {
        cols[col][i]
            .parse::<f64>()
            .map_err(|_| EdfError::MalformedHeader(format!("signal {i} {name}: {:?}", cols[col][i])))
    };
    let mut all_signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let spr = num(8, i, "samples per record")?;
        if spr < 0.0 || spr.fract() != 0.0 {
            return Err(EdfError::MalformedHeader(format!("signal {i} samples per record {spr}")));
        }
        let dmin = num(5, i, "digital min")?;
        let dmax = num(6, i, "digital max")?;
        if dmin.fract() != 0.0 || dmax.fract() != 0.0 {
            return Err(EdfError::MalformedHeader(format!("signal {i}: non-integer digital range")));
        }
        all_signals.push(SignalSpec {
            label: cols[0][i].clone(),
            transducer: cols[1][i].clone(),
            physical_dim: cols[2][i].clone(),
            physical_min: num(3, i, "physical min")?,
            physical_max: num(4, i, "physical max")?,
            digital_min: dmin as i32,
            digital_max: dmax as i32,
            prefiltering: cols[7][i].clone(),
            samples_per_record: spr as usize,
        });
    }

    let record_samples: usize = all_signals.iter().map(|s| s.samples_per_record).sum();
    let record_bytes = record_samples * 2;
    let available = bytes.len() - header_bytes;
    let num_records = if num_records == -1 {
        if record_bytes == 0 {
            0
        } else {
            (available / record_bytes) as i64
        }
    } else if num_records < 0 {
        return Err(EdfError::MalformedHeader(format!("record count {num_records}")));
    } else {
        num_records
    };
    let needed = header_bytes + num_records as usize * record_bytes;
    if bytes.len() < needed {
        return Err(EdfError::TruncatedData { expected: needed, found: bytes.len() });
    }

    let keep: Vec<bool> = all_signals.iter().map(|s| s.label != ANNOTATION_LABEL).collect();
    for (i, s) in all_signals.iter().enumerate() {
        if keep[i] {
            s.validate(record_duration_s).map_err(EdfError::MalformedHeader)?;
        }
    }
    let mut channels: Vec<Vec<f64>> = all_signals
        .iter()
        .map(|s| Vec::with_capacity(s.samples_per_record * num_records as usize))
        .collect();
    let mut pos = header_bytes;
    for _ in 0..num_records {
        for (i, s) in all_signals.iter().enumerate() {
            let n = s.samples_per_record;
            if keep[i] {
                let out = &mut channels[i];
                for chunk in bytes[pos..pos + 2 * n].chunks_exact(2) {
                    let d = i32::from(i16::from_le_bytes([chunk[0], chunk[1]]));
                    out.push(s.to_physical(d.clamp(s.digital_min, s.digital_max)));
                }
            }
            pos += 2 * n;
        }
    }

    let mut signals = Vec::new();
    let mut kept_channels = Vec::new();
    for ((s, data), k) in all_signals.into_iter().zip(channels).zip(keep) {
        if k {
            signals.push(s);
            kept_channels.push(data);
        }
    }
    if signals.is_empty() {
        return Err(EdfError::MalformedHeader("file holds only annotation signals".into()));
    }
    let header = EdfHeader {
        version_tag,
        patient_id,
        recording_id,
        start_datetime,
        header_bytes: FIXED_HEADER + PER_SIGNAL_HEADER * signals.len(),
        num_data_records: num_records,
        record_duration_s,
        reserved,
        signals,
    };
    Ok(Recording { header, channels: kept_channels })
}

fn put_text(out: &mut Vec<u8>, s: &str, width: usize, field: &'static str) -> Result<(), EdfError> {
    let ascii: String = s.chars().map(|c| if c.is_ascii() && !c.is_ascii_control() { c } else { '_' }).collect();
    if ascii.len() > width {
        return Err(EdfError::FieldOverflow { field, width, value: s.to_string() });
    }
    out.extend_from_slice(ascii.as_bytes());
    out.extend(std::iter::repeat_n(b' ', width - ascii.len()));
    Ok(())
}

/// Shortest decimal text of `x` that fits `width` characters.
fn format_number(x: f64, width: usize, field: &'static str) -> Result<String, EdfError> {
    let overflow = || EdfError::FieldOverflow { field, width, value: x.to_string() };
    if !x.is_finite() {
        return Err(overflow());
    }
    let plain = format!("{x}");
    if plain.len() <= width {
        return Ok(plain);
    }
    for decimals in (0..width).rev() {
        let mut s = format!("{x:.decimals$}");
        if s.contains('.') {
            s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        }
        if s.len() <= width {
            return Ok(s);
        }
    }
    Err(overflow())
}

fn put_number(out: &mut Vec<u8>, x: f64, width: usize, field: &'static str) -> Result<(), EdfError> {
    let s = format_number(x, width, field)?;
    put_text(out, &s, width, field)
}

/// Encode a recording as EDF bytes.
pub fn write_edf(rec: &Recording) -> Result<Vec<u8>, EdfError> {
    rec.validate()?;
    let h = &rec.header;
    let ns = h.signals.len();
    let mut out = Vec::with_capacity(h.header_bytes + 2 * h.record_samples() * h.num_data_records as usize);

    put_text(&mut out, &h.version_tag, 8, "version")?;
    put_text(&mut out, &h.patient_id, 80, "patient id")?;
    put_text(&mut out, &h.recording_id, 80, "recording id")?;
    let dt = &h.start_datetime;
    put_text(
        &mut out,
        &format!("{:02}.{:02}.{:02}", dt.day(), dt.month(), dt.year().rem_euclid(100)),
        8,
        "start date",
    )?;
    put_text(&mut out, &format!("{:02}.{:02}.{:02}", dt.hour(), dt.minute(), dt.second()), 8, "start time")?;
    put_text(&mut out, &h.header_bytes.to_string(), 8, "header bytes")?;
    put_text(&mut out, &h.reserved, 44, "reserved")?;
    put_text(&mut out, &h.num_data_records.to_string(), 8, "number of records")?;
    put_number(&mut out, h.record_duration_s, 8, "record duration")?;
    put_text(&mut out, &ns.to_string(), 4, "number of signals")?;

    let sig = &h.signals;
    for s in sig {
        put_text(&mut out, &s.label, 16, "label")?;
    }
    for s in sig {
        put_text(&mut out, &s.transducer, 80, "transducer")?;
    }
    for s in sig {
        put_text(&mut out, &s.physical_dim, 8, "physical dimension")?;
    }
    for s in sig {
        put_number(&mut out, s.physical_min, 8, "physical min")?;
    }
    for s in sig {
        put_number(&mut out, s.physical_max, 8, "physical max")?;
    }
    for s in sig {
        put_text(&mut out, &s.digital_min.to_string(), 8, "digital min")?;
    }
    for s in sig {
        put_text(&mut out, &s.digital_max.to_string(), 8, "digital max")?;
    }
    for s in sig {
        put_text(&mut out, &s.prefiltering, 80, "prefiltering")?;
    }
    for s in sig {
        put_text(&mut out, &s.samples_per_record.to_string(), 8, "samples per record")?;
    }
    for _ in sig {
        put_text(&mut out, "", 32, "signal reserved")?;
    }
    debug_assert_eq!(out.len(), h.header_bytes);

    for r in 0..h.num_data_records as usize {
        for (i, s) in sig.iter().enumerate() {
            let n = s.samples_per_record;
            for (j, &x) in rec.channels[i][r * n..(r + 1) * n].iter().enumerate() {
                let d = s
                    .to_digital(x)
                    .ok_or(EdfError::RangeOverflow { signal: i, sample: r * n + j, value: x })?;
                out.extend_from_slice(&(d as i16).to_le_bytes());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2021, 3, 14).unwrap().and_hms_opt(22, 5, 0).unwrap()
    }

    fn one_signal(spec: SignalSpec, data: Vec<f64>, records: i64) -> Recording {
        let header = EdfHeader::new("X", "test", start(), records, 1.0, vec![spec]);
        Recording::new(header, vec![data]).unwrap()
    }

    fn raw_file(spec: &SignalSpec, digital: &[i16]) -> Vec<u8> {
        let rec = one_signal(spec.clone(), vec![spec.physical_min; digital.len()], 1);
        let mut bytes = write_edf(&rec).unwrap();
        let h = bytes.len() - 2 * digital.len();
        bytes.truncate(h);
        for d in digital {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        bytes
    }

    #[test]
    fn digital_min_maps_to_physical_min() {
        let spec = SignalSpec::eeg("EEG", -200.0, 200.0, 1);
        let rec = parse_edf(&raw_file(&spec, &[-32768])).unwrap();
        assert_eq!(rec.channels[0][0], -200.0);
    }

    #[test]
    fn digital_zero_maps_near_zero() {
        // -1000 + 32768 * 2000 / 65535
        let expected: f64 = -1000.0 + 32768.0 * 2000.0 / 65535.0;
        assert!((expected - 0.015259).abs() < 1e-5);
        let spec = SignalSpec::eeg("EEG", -1000.0, 1000.0, 1);
        let rec = parse_edf(&raw_file(&spec, &[0])).unwrap();
        assert!((rec.channels[0][0] - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_recording_is_header_only() {
        for ns in 1..4 {
            let signals = (0..ns).map(|i| SignalSpec::eeg(&format!("C{i}"), -1.0, 1.0, 4)).collect();
            let header = EdfHeader::new("", "", start(), 0, 1.0, signals);
            let rec = Recording::new(header, vec![vec![]; ns]).unwrap();
            assert_eq!(write_edf(&rec).unwrap().len(), 256 + 256 * ns);
        }
    }

    #[test]
    fn zero_channel_uses_zero_code() {
        let spec = SignalSpec::eeg("EEG", -1000.0, 1000.0, 8);
        let bytes = write_edf(&one_signal(spec, vec![0.0; 8], 1)).unwrap();
        // zero sits at -32768 + 1000 * 65535 / 2000 = -0.5, which rounds away from zero
        let code = (-32768.0f64 + 1000.0 * 65535.0 / 2000.0).round() as i16;
        for chunk in bytes[512..].chunks_exact(2) {
            assert_eq!(i16::from_le_bytes([chunk[0], chunk[1]]), code);
        }
    }

    #[test]
    fn header_fields_round_trip() {
        let spec = SignalSpec::eeg("EEG Fpz-Cz", -187.5, 312.25, 3);
        let rec = one_signal(spec, vec![0.0, 1.0, -2.0, 3.0, 4.0, 5.0], 2);
        let back = parse_edf(&write_edf(&rec).unwrap()).unwrap();
        assert_eq!(back.header, rec.header);
        assert_eq!(&write_edf(&back).unwrap()[..256], &write_edf(&rec).unwrap()[..256]);
    }

    #[test]
    fn unknown_record_count_is_inferred() {
        let spec = SignalSpec::eeg("EEG", -10.0, 10.0, 2);
        let rec = one_signal(spec, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3);
        let mut bytes = write_edf(&rec).unwrap();
        bytes[236..244].copy_from_slice(b"-1      ");
        let back = parse_edf(&bytes).unwrap();
        assert_eq!(back.header.num_data_records, 3);
        assert_eq!(back.channels[0].len(), 6);
    }

    #[test]
    fn truncated_and_malformed() {
        assert!(matches!(parse_edf(&[b' '; 100]), Err(EdfError::TruncatedData { .. })));
        let spec = SignalSpec::eeg("EEG", -10.0, 10.0, 2);
        let bytes = write_edf(&one_signal(spec, vec![0.0; 4], 2)).unwrap();
        assert!(matches!(parse_edf(&bytes[..bytes.len() - 1]), Err(EdfError::TruncatedData { .. })));
        let mut bad = bytes.clone();
        bad[244..252].copy_from_slice(b"abc     ");
        assert!(matches!(parse_edf(&bad), Err(EdfError::MalformedHeader(_))));
        let mut bad = bytes;
        bad[184..192].copy_from_slice(b"1024    ");
        assert!(matches!(parse_edf(&bad), Err(EdfError::MalformedHeader(_))));
    }

    #[test]
    fn annotation_signal_is_skipped() {
        let mut ann = SignalSpec::eeg(ANNOTATION_LABEL, -1.0, 1.0, 2);
        ann.physical_dim.clear();
        let eeg = SignalSpec::eeg("EEG", -10.0, 10.0, 3);
        let header = EdfHeader::new("", "", start(), 1, 1.0, vec![eeg, ann]);
        let rec = Recording::new(header, vec![vec![1.0, 2.0, 3.0], vec![0.0, 0.0]]).unwrap();
        let back = parse_edf(&write_edf(&rec).unwrap()).unwrap();
        assert_eq!(back.header.signals.len(), 1);
        assert_eq!(back.header.header_bytes, 512);
        assert_eq!(back.channels[0].len(), 3);
    }

    #[test]
    fn out_of_range_value_rejected() {
        let spec = SignalSpec::eeg("EEG", -10.0, 10.0, 1);
        let header = EdfHeader::new("", "", start(), 1, 1.0, vec![spec]);
        let rec = Recording { header, channels: vec![vec![11.0]] };
        assert!(matches!(write_edf(&rec), Err(EdfError::RangeOverflow { .. })));
    }

    #[test]
    fn numbers_fit_their_fields() {
        assert_eq!(format_number(-1000.0, 8, "x").unwrap(), "-1000");
        assert_eq!(format_number(0.5, 8, "x").unwrap(), "0.5");
        assert_eq!(format_number(std::f64::consts::PI, 8, "x").unwrap(), "3.141593");
        assert!(format_number(1.0e12, 8, "x").is_err());
    }
}
