use std::io::{Read, Write};

use super::PipelineError;
use crate::edf_io::SleepStage;

pub const DATASET_MAGIC: &[u8; 8] = b"ESSCDS01";

/// Images (all `height x width`, stored at f32 precision) with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<Vec<f64>>,
    pub height: usize,
    pub width: usize,
    pub labels: Option<Vec<SleepStage>>,
    pub provenance: String,
    pub seed: u64,
}

impl Dataset {
    /// Pixels are rounded to f32 so a cache round trip is lossless.
    pub fn new(
        images: Vec<Vec<f64>>,
        height: usize,
        width: usize,
        labels: Option<Vec<SleepStage>>,
        provenance: impl Into<String>,
        seed: u64,
    ) -> Result<Self, PipelineError> {
        if height == 0 || width == 0 {
            return Err(PipelineError::InvalidConfig(format!("image size {height}x{width}")));
        }
        for img in &images {
            if img.len() != height * width {
                return Err(PipelineError::DimensionMismatch(format!(
                    "image with {} pixels in a {height}x{width} dataset",
                    img.len()
                )));
            }
            if img.iter().any(|v| !v.is_finite()) {
                return Err(PipelineError::InvalidConfig("non-finite pixel".into()));
            }
        }
        if let Some(l) = &labels {
            if l.len() != images.len() {
                return Err(PipelineError::DimensionMismatch(format!(
                    "{} labels for {} images",
                    l.len(),
                    images.len()
                )));
            }
        }
        let images = images
            .into_iter()
            .map(|img| img.into_iter().map(|v| v as f32 as f64).collect())
            .collect();
        Ok(Self { images, height, width, labels, provenance: provenance.into(), seed })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn labels(&self) -> Result<&[SleepStage], PipelineError> {
        self.labels.as_deref().ok_or(PipelineError::MissingLabels)
    }

    pub fn class_counts(&self) -> [usize; SleepStage::COUNT] {
        let mut c = [0; SleepStage::COUNT];
        for l in self.labels.iter().flatten() {
            c[l.index()] += 1;
        }
        c
    }

    /// Copy holding only the given items, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            height: self.height,
            width: self.width,
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            provenance: self.provenance.clone(),
            seed: self.seed,
        }
    }

    /// Cache layout (little-endian): magic, u32 count, u32 height, u32 width,
    /// u8 labeled flag, u64 seed, u32 provenance length and UTF-8 bytes,
    /// `count * height * width` f32 pixels, then `count` u8 stage indices if labeled.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.provenance.len() + self.len() * (self.height * self.width * 4 + 1));
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.push(u8::from(self.is_labeled()));
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.provenance.len() as u32).to_le_bytes());
        out.extend_from_slice(self.provenance.as_bytes());
        for img in &self.images {
            for &v in img {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        for l in self.labels.iter().flatten() {
            out.push(l.index() as u8);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PipelineError> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(PipelineError::BadCache("not a dataset cache (bad magic)".into()));
        }
        let count = read_u32(&mut r)? as usize;
        let height = read_u32(&mut r)? as usize;
        let width = read_u32(&mut r)? as usize;
        let mut flag = [0u8; 1];
        read_exact(&mut r, &mut flag)?;
        let labeled = match flag[0] {
            0 => false,
            1 => true,
            f => return Err(PipelineError::BadCache(format!("labeled flag {f}"))),
        };
        let mut seed = [0u8; 8];
        read_exact(&mut r, &mut seed)?;
        let seed = u64::from_le_bytes(seed);
        let plen = read_u32(&mut r)? as usize;
        if plen > r.len() {
            return Err(PipelineError::BadCache("truncated provenance".into()));
        }
        let provenance = String::from_utf8(r[..plen].to_vec())
            .map_err(|_| PipelineError::BadCache("provenance is not UTF-8".into()))?;
        r = &r[plen..];
        let pixels = height
            .checked_mul(width)
            .filter(|&p| p > 0)
            .ok_or_else(|| PipelineError::BadCache(format!("image size {height}x{width}")))?;
        let expected = count
            .checked_mul(pixels * 4)
            .and_then(|b| b.checked_add(if labeled { count } else { 0 }))
            .ok_or_else(|| PipelineError::BadCache("size overflow".into()))?;
        if r.len() != expected {
            return Err(PipelineError::BadCache(format!(
                "payload holds {} bytes, header implies {expected}",
                r.len()
            )));
        }
        let images: Vec<Vec<f64>> = r[..count * pixels * 4]
            .chunks_exact(pixels * 4)
            .map(|img| {
                img.chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                    .collect()
            })
            .collect();
        let labels = if labeled {
            let mut out = Vec::with_capacity(count);
            for &b in &r[count * pixels * 4..] {
                out.push(
                    SleepStage::from_index(b as usize)
                        .ok_or_else(|| PipelineError::BadCache(format!("stage index {b}")))?,
                );
            }
            Some(out)
        } else {
            None
        };
        Self::new(images, height, width, labels, provenance, seed)
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<(), PipelineError> {
    r.read_exact(buf).map_err(|_| PipelineError::BadCache("truncated header".into()))
}

fn read_u32(r: &mut &[u8]) -> Result<u32, PipelineError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(labeled: bool) -> Dataset {
        let images = (0..3).map(|k| (0..6).map(|i| (i * k) as f64 * 0.1).collect()).collect();
        let labels = labeled.then(|| vec![SleepStage::Wake, SleepStage::REM, SleepStage::SWS]);
        Dataset::new(images, 2, 3, labels, "unit", 11).unwrap()
    }

    #[test]
    fn round_trip() {
        for labeled in [true, false] {
            let d = sample(labeled);
            let back = Dataset::from_bytes(&d.to_bytes()).unwrap();
            assert_eq!(back, d);
            assert_eq!(back.to_bytes(), d.to_bytes());
        }
    }

    #[test]
    fn rejects_bad_input() {
        let bytes = sample(true).to_bytes();
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(matches!(Dataset::from_bytes(&wrong), Err(PipelineError::BadCache(_))));
        assert!(Dataset::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad_label = bytes.clone();
        *bad_label.last_mut().unwrap() = 9;
        assert!(Dataset::from_bytes(&bad_label).is_err());
        assert!(Dataset::new(vec![vec![0.0; 5]], 2, 3, None, "", 0).is_err());
    }

    #[test]
    fn subset_and_counts() {
        let d = sample(true);
        let s = d.subset(&[2, 0]);
        assert_eq!(s.labels.unwrap(), vec![SleepStage::SWS, SleepStage::Wake]);
        assert_eq!(d.class_counts(), [1, 0, 0, 1, 1]);
    }
}
