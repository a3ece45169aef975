//! Versioned, checksummed persistence for networks, autoencoders and Adam state.
//!
//! Both file kinds share one container (all integers little-endian):
//!
//! ```text
//! magic[8] | u32 version | u64 payload length | payload | u32 CRC-32 of payload
//! ```
//!
//! A network payload is a length-prefixed JSON architecture descriptor, the
//! parameter blobs in [`Network::params`] order, a flag byte and, when set, the
//! Adam step count, hyperparameters and both moment blob lists. Blobs are a
//! u64 element count followed by raw f64 values, so round trips are bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::hht::Autoencoder;
use crate::nn::{Activation, DenseLayer, Network, NetworkConfig, NnError};
use crate::optim::AdamState;

pub const MODEL_MAGIC: &[u8; 8] = b"ESSCMD01";
pub const AUTOENCODER_MAGIC: &[u8; 8] = b"ESSCAE01";
pub const FORMAT_VERSION: u32 = 1;

pub const HEADER_LEN: usize = 8 + 4 + 8;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not a {expected} file (bad magic)")]
    BadMagic { expected: &'static str },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("format version {0} is not supported (this build reads version {FORMAT_VERSION})")]
    VersionUnsupported(u32),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("file is truncated or malformed: {0}")]
    Malformed(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<NnError> for StoreError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::ShapeMismatch(m) => StoreError::ShapeMismatch(m),
            other => StoreError::Malformed(other.to_string()),
        }
    }
}

// ---- container ----

fn seal(magic: &[u8; 8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    out
}

fn unseal<'a>(magic: &[u8; 8], kind: &'static str, bytes: &'a [u8]) -> Result<&'a [u8], StoreError> {
    if bytes.len() < 8 || &bytes[..8] != magic {
        return Err(StoreError::BadMagic { expected: kind });
    }
    if bytes.len() < HEADER_LEN + 4 {
        return Err(StoreError::Malformed("header cut short".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(StoreError::VersionUnsupported(version));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    if len != (bytes.len() - HEADER_LEN - 4) as u64 {
        return Err(StoreError::Malformed(format!(
            "header announces {len} payload bytes, file holds {}",
            bytes.len() - HEADER_LEN - 4
        )));
    }
    let payload = &bytes[HEADER_LEN..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(StoreError::ChecksumMismatch { stored, computed });
    }
    Ok(payload)
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.0.extend_from_slice(b);
    }
    fn blob(&mut self, xs: &[f64]) {
        self.u64(xs.len() as u64);
        xs.iter().for_each(|&x| self.f64(x));
    }
    fn blobs<'a>(&mut self, list: impl ExactSizeIterator<Item = &'a [f64]>) {
        self.u64(list.len() as u64);
        list.for_each(|b| self.blob(b));
    }
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], StoreError> {
        if n > self.0.len() {
            return Err(StoreError::Malformed(format!("{what} runs past the end of the payload")));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }
    fn u8(&mut self, what: &str) -> Result<u8, StoreError> {
        Ok(self.take(1, what)?[0])
    }
    fn u64(&mut self, what: &str) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self, what: &str) -> Result<f64, StoreError> {
        Ok(f64::from_bits(self.u64(what)?))
    }
    fn len(&mut self, what: &str, width: usize) -> Result<usize, StoreError> {
        let n = self.u64(what)?;
        // reject counts that cannot fit in what remains before allocating
        if n.saturating_mul(width as u64) > self.0.len() as u64 {
            return Err(StoreError::Malformed(format!("{what} length {n} exceeds the payload")));
        }
        Ok(n as usize)
    }
    fn bytes(&mut self, what: &str) -> Result<&'a [u8], StoreError> {
        let n = self.len(what, 1)?;
        self.take(n, what)
    }
    fn blob(&mut self, what: &str) -> Result<Vec<f64>, StoreError> {
        let n = self.len(what, 8)?;
        let raw = self.take(n * 8, what)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
    fn blobs(&mut self, what: &str) -> Result<Vec<Vec<f64>>, StoreError> {
        let n = self.len(what, 8)?;
        (0..n).map(|_| self.blob(what)).collect()
    }
    fn finish(self) -> Result<(), StoreError> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(StoreError::Malformed(format!("{} trailing payload bytes", self.0.len())))
        }
    }
}

fn check_sizes(what: &str, got: &[Vec<f64>], want: &[usize]) -> Result<(), StoreError> {
    if got.len() != want.len() {
        return Err(StoreError::ShapeMismatch(format!(
            "{what}: descriptor implies {} tensors, file holds {}",
            want.len(),
            got.len()
        )));
    }
    for (i, (g, &w)) in got.iter().zip(want).enumerate() {
        if g.len() != w {
            return Err(StoreError::ShapeMismatch(format!(
                "{what} tensor {i}: descriptor implies {w} values, file holds {}",
                g.len()
            )));
        }
    }
    Ok(())
}

// ---- networks ----

pub fn save(net: &Network, state: Option<&AdamState>) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    let descriptor = serde_json::to_vec(&net.config).expect("config serializes");
    w.bytes(&descriptor);
    let params = net.params();
    w.blobs(params.iter().map(|t| t.data.as_slice()));
    match state {
        None => w.u8(0),
        Some(s) => {
            w.u8(1);
            w.u64(s.t);
            for x in [s.lr, s.beta1, s.beta2, s.eps] {
                w.f64(x);
            }
            w.blobs(s.m.iter().map(Vec::as_slice));
            w.blobs(s.v.iter().map(Vec::as_slice));
        }
    }
    seal(MODEL_MAGIC, &w.0)
}

pub fn load(bytes: &[u8]) -> Result<(Network, Option<AdamState>), StoreError> {
    let mut r = Reader(unseal(MODEL_MAGIC, "model", bytes)?);
    let config: NetworkConfig = serde_json::from_slice(r.bytes("architecture descriptor")?)
        .map_err(|e| StoreError::Malformed(format!("architecture descriptor: {e}")))?;
    // the seed is irrelevant: every parameter is overwritten below
    let mut net = Network::new(config, 0)?;
    let sizes: Vec<usize> = net.params().iter().map(|t| t.len()).collect();
    let blobs = r.blobs("parameters")?;
    check_sizes("parameters", &blobs, &sizes)?;
    net.set_parameters(&blobs)?;
    let state = match r.u8("optimizer flag")? {
        0 => None,
        1 => {
            let t = r.u64("adam step")?;
            let lr = r.f64("adam lr")?;
            let beta1 = r.f64("adam beta1")?;
            let beta2 = r.f64("adam beta2")?;
            let eps = r.f64("adam eps")?;
            let m = r.blobs("adam first moments")?;
            let v = r.blobs("adam second moments")?;
            check_sizes("adam first moments", &m, &sizes)?;
            check_sizes("adam second moments", &v, &sizes)?;
            let mut s = AdamState::with_hyper(&sizes, lr, beta1, beta2, eps)
                .map_err(|e| StoreError::Malformed(e.to_string()))?;
            s.t = t;
            s.m = m;
            s.v = v;
            Some(s)
        }
        f => return Err(StoreError::Malformed(format!("optimizer flag {f}"))),
    };
    r.finish()?;
    Ok((net, state))
}

// ---- autoencoders ----

#[derive(serde::Serialize, serde::Deserialize)]
struct AeDescriptor {
    time_bins: usize,
    freq_bins: usize,
    latent_dim: usize,
    encoder_activation: Activation,
    decoder_activation: Activation,
}

pub fn save_autoencoder(ae: &Autoencoder) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    let d = AeDescriptor {
        time_bins: ae.time_bins,
        freq_bins: ae.freq_bins,
        latent_dim: ae.latent_dim(),
        encoder_activation: ae.encoder.activation,
        decoder_activation: ae.decoder.activation,
    };
    w.bytes(&serde_json::to_vec(&d).expect("descriptor serializes"));
    let parts = [&ae.encoder.weight, &ae.encoder.bias, &ae.decoder.weight, &ae.decoder.bias];
    w.blobs(parts.iter().map(|t| t.data.as_slice()));
    w.blob(&ae.loss_history);
    seal(AUTOENCODER_MAGIC, &w.0)
}

pub fn load_autoencoder(bytes: &[u8]) -> Result<Autoencoder, StoreError> {
    let mut r = Reader(unseal(AUTOENCODER_MAGIC, "autoencoder", bytes)?);
    let d: AeDescriptor = serde_json::from_slice(r.bytes("autoencoder descriptor")?)
        .map_err(|e| StoreError::Malformed(format!("autoencoder descriptor: {e}")))?;
    let input = d.time_bins * d.freq_bins;
    let mut blobs = r.blobs("autoencoder parameters")?;
    check_sizes(
        "autoencoder parameters",
        &blobs,
        &[d.latent_dim * input, d.latent_dim, input * d.latent_dim, input],
    )?;
    let loss_history = r.blob("loss history")?;
    r.finish()?;
    let db = blobs.pop().expect("four blobs");
    let dw = blobs.pop().expect("four blobs");
    let eb = blobs.pop().expect("four blobs");
    let ew = blobs.pop().expect("four blobs");
    Ok(Autoencoder {
        time_bins: d.time_bins,
        freq_bins: d.freq_bins,
        encoder: DenseLayer::from_parts(ew, eb, d.encoder_activation)?,
        decoder: DenseLayer::from_parts(dw, db, d.decoder_activation)?,
        loss_history,
    })
}

// ---- files ----

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

/// Writes `bytes` to `path`, refusing to replace an existing file unless
/// `overwrite` is set.
pub fn write_file(path: &Path, bytes: &[u8], overwrite: bool) -> Result<(), StoreError> {
    let mut opts = fs::OpenOptions::new();
    opts.write(true);
    if overwrite {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    let mut f = opts.open(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

pub fn save_to_path(path: &Path, net: &Network, state: Option<&AdamState>, overwrite: bool) -> Result<(), StoreError> {
    write_file(path, &save(net, state), overwrite)
}

pub fn load_from_path(path: &Path) -> Result<(Network, Option<AdamState>), StoreError> {
    load(&fs::read(path).map_err(io_err(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkConfig;

    fn net(seed: u64) -> Network {
        Network::new(NetworkConfig::proposed(8, 8), seed).unwrap()
    }

    fn probe() -> Vec<f64> {
        (0..64).map(|i| ((i * 7) % 11) as f64 / 11.0 - 0.5).collect()
    }

    #[test]
    fn deterministic_bytes() {
        assert_eq!(save(&net(9), None), save(&net(9), None));
    }

    #[test]
    fn round_trip_predictions() {
        let n = net(9);
        let (back, state) = load(&save(&n, None)).unwrap();
        assert!(state.is_none());
        let a = n.predict(&probe()).unwrap();
        let b = back.predict(&probe()).unwrap();
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn adam_state_survives() {
        let n = net(3);
        let mut s = AdamState::for_tensors(&n.params(), 1e-3).unwrap();
        s.t = 17;
        s.m[0][0] = -0.25;
        s.v[2][1] = 1e-300;
        let (_, back) = load(&save(&n, Some(&s))).unwrap();
        assert_eq!(back.unwrap(), s);
    }

    #[test]
    fn corruption_detected() {
        let mut b = save(&net(1), None);
        b[HEADER_LEN + 40] ^= 0x01;
        assert!(matches!(load(&b), Err(StoreError::ChecksumMismatch { .. })));
    }

    #[test]
    fn wrong_magic_and_version() {
        let mut b = save(&net(1), None);
        b[0] = b'X';
        assert!(matches!(load(&b), Err(StoreError::BadMagic { .. })));
        let mut b = save(&net(1), None);
        b[8] = 2;
        assert!(matches!(load(&b), Err(StoreError::VersionUnsupported(2))));
        assert!(matches!(load(b"ESSC"), Err(StoreError::BadMagic { .. })));
    }

    #[test]
    fn descriptor_blob_disagreement() {
        // a model re-sealed with one parameter dropped still checksums but
        // no longer matches its own descriptor
        let n = net(2);
        let mut w = Writer(Vec::new());
        w.bytes(&serde_json::to_vec(&n.config).unwrap());
        let params = n.params();
        w.blobs(params[..params.len() - 1].iter().map(|t| t.data.as_slice()));
        w.u8(0);
        let b = seal(MODEL_MAGIC, &w.0);
        assert!(matches!(load(&b), Err(StoreError::ShapeMismatch(_))));
    }

    #[test]
    fn autoencoder_round_trip() {
        use crate::hht::{encode, train_autoencoder, AutoencoderConfig, TimeFrequencyImage};
        let imgs: Vec<TimeFrequencyImage> = (0..4)
            .map(|k| TimeFrequencyImage {
                time_bins: 8,
                freq_bins: 4,
                max_freq_hz: 32.0,
                data: (0..32).map(|i| ((i + k) % 5) as f64 / 5.0).collect(),
            })
            .collect();
        let ae = train_autoencoder(&imgs, &AutoencoderConfig { epochs: 2, ..Default::default() }).unwrap();
        let bytes = save_autoencoder(&ae);
        let back = load_autoencoder(&bytes).unwrap();
        assert_eq!(back, ae);
        assert_eq!(encode(&back, &imgs[1]).unwrap(), encode(&ae, &imgs[1]).unwrap());
        assert!(matches!(load(&bytes), Err(StoreError::BadMagic { .. })));
    }

    #[test]
    fn refuses_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        save_to_path(&p, &net(1), None, false).unwrap();
        assert!(matches!(save_to_path(&p, &net(1), None, false), Err(StoreError::Io { .. })));
        save_to_path(&p, &net(2), None, true).unwrap();
        let (back, _) = load_from_path(&p).unwrap();
        assert_eq!(back.params()[0].data, net(2).params()[0].data);
    }
}
