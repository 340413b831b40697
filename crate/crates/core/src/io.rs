//! WAV audio, coefficient files and 16-bit PGM images.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::design::{build_design, FilterBankDesign, Spacing};
use crate::error::{Error, Result};
use crate::lds::{DelaySequence, DelayTag};
use crate::wavelets::Wavelet;
use crate::xform::CoefMatrix;

pub const COEF_MAGIC: &[u8; 4] = b"GWFB";
pub const COEF_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub source: Option<PathBuf>,
}

/// Reads PCM16 or float32 WAV; stereo is averaged to mono and PCM16 is
/// scaled by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    let ch = spec.channels as usize;
    if ch == 0 || ch > 2 {
        return Err(Error::format(path, format!("{ch} channels; only mono and stereo are supported")));
    }
    let raw: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(Error::format(
                path,
                format!("unsupported codec {fmt:?} {bits}-bit; expected PCM16 or float32"),
            ))
        }
    }
    .map_err(|e| wav_error(path, e))?;
    let samples: Vec<f64> = raw.chunks_exact(ch).map(|c| c.iter().sum::<f64>() / ch as f64).collect();
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(AudioBuffer {
        samples,
        sample_rate: spec.sample_rate as f64,
        source: Some(path.to_path_buf()),
    })
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    if let Some(reason) = std::fs::read(path).ok().and_then(|b| riff_problem(&b)) {
        return Error::format(path, reason);
    }
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::FormatError(msg) => Error::format(path, format!("malformed WAV header: {msg}")),
        hound::Error::Unsupported => Error::format(path, "unsupported WAV codec"),
        other => Error::format(path, other.to_string()),
    }
}

/// Walks the RIFF chunk list and names the first missing or cut-off chunk.
fn riff_problem(bytes: &[u8]) -> Option<String> {
    if bytes.len() < 12 || &bytes[..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Some("missing RIFF/WAVE header".into());
    }
    let (mut pos, mut fmt, mut data) = (12, false, false);
    while pos < bytes.len() {
        if bytes.len() - pos < 8 {
            return Some("truncated chunk header".into());
        }
        let id = String::from_utf8_lossy(&bytes[pos..pos + 4]).into_owned();
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        if bytes.len() - pos - 8 < size {
            return Some(format!("truncated '{}' chunk", id.trim_end()));
        }
        fmt |= id == "fmt ";
        data |= id == "data";
        pos += 8 + size + size % 2;
    }
    if !fmt {
        Some("missing 'fmt' chunk".into())
    } else if !data {
        Some("missing 'data' chunk".into())
    } else {
        None
    }
}

/// Writes mono float32. Buffers peaking above 1 are scaled down to peak 1;
/// the applied gain is returned.
pub fn write_wav(path: impl AsRef<Path>, buffer: &AudioBuffer) -> Result<f64> {
    let path = path.as_ref();
    if let Some(i) = buffer.samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let peak = buffer.samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let gain = if peak > 1.0 { 1.0 / peak } else { 1.0 };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate.round() as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &x in &buffer.samples {
        w.write_sample((x * gain) as f32).map_err(|e| wav_error(path, e))?;
    }
    w.finalize().map_err(|e| wav_error(path, e))?;
    Ok(gain)
}

/// Everything in a coefficient file besides the coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefHeader {
    pub len: usize,
    pub d: usize,
    pub m: usize,
    pub m_c: usize,
    pub frames: usize,
    pub delays: DelayTag,
    pub wavelet: Wavelet,
    pub real_mode: bool,
    /// Samples before zero padding to a multiple of `d`.
    pub signal_len: usize,
    pub sample_rate: f64,
}

impl CoefHeader {
    pub fn for_design(design: &FilterBankDesign, signal_len: usize) -> Result<Self> {
        let p = &design.params;
        if p.spacing != Spacing::Linear {
            return Err(Error::param("coefficient files hold linearly spaced designs only"));
        }
        Ok(CoefHeader {
            len: p.len,
            d: p.d,
            m: p.m,
            m_c: p.m_c,
            frames: p.frames(),
            delays: p.delays.kind().tag(),
            wavelet: design.wavelet,
            real_mode: design.bank().real_mode(),
            signal_len,
            sample_rate: p.sample_rate,
        })
    }

    /// Rebuilds the analysis design the coefficients came from.
    pub fn design(&self) -> Result<FilterBankDesign> {
        let delays = DelaySequence::generate(&self.delays.kind(), self.m + 1)?;
        let des = build_design(&self.wavelet, self.m, self.m_c, self.d, self.len, &delays)?;
        Ok(des.with_sample_rate(self.sample_rate))
    }
}

pub fn save_coefs(path: impl AsRef<Path>, header: &CoefHeader, coefs: &CoefMatrix) -> Result<()> {
    let path = path.as_ref();
    if coefs.channels() != header.m + 1 || coefs.frames() != header.frames {
        return Err(Error::param("coefficient shape does not match the header"));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_coefs(&mut w, header, coefs)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_coefs(w: &mut impl Write, header: &CoefHeader, coefs: &CoefMatrix) -> std::io::Result<()> {
    w.write_all(COEF_MAGIC)?;
    w.write_all(&COEF_VERSION.to_le_bytes())?;
    for v in [header.len, header.d, header.m, header.m_c, header.frames] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&[header.delays.code(), header.wavelet.family_code()])?;
    w.write_all(&header.wavelet.hyperparameter().to_le_bytes())?;
    w.write_all(&[header.real_mode as u8])?;
    w.write_all(&(header.signal_len as u64).to_le_bytes())?;
    w.write_all(&header.sample_rate.to_le_bytes())?;
    for c in coefs.data() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

/// Loads a coefficient file. The returned matrix is bound to the design
/// rebuilt from the header, so it can be synthesized directly.
pub fn load_coefs(path: impl AsRef<Path>) -> Result<(CoefHeader, FilterBankDesign, CoefMatrix)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        inner: BufReader::new(file),
        path,
    };
    if &r.array::<4>("magic")? != COEF_MAGIC {
        return Err(Error::format(path, "not a coefficient file (bad magic)"));
    }
    let version = u16::from_le_bytes(r.array("version")?);
    if version != COEF_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let len = r.usize("L")?;
    let d = r.usize("d")?;
    let m = r.usize("M")?;
    let m_c = r.usize("M_C")?;
    let frames = r.usize("N")?;
    let [delay_code, family] = r.array("codes")?;
    let hyper = f64::from_le_bytes(r.array("hyperparameter")?);
    let [real_mode] = r.array("real_mode")?;
    let signal_len = r.usize("signal length")?;
    let sample_rate = f64::from_le_bytes(r.array("sample rate")?);

    let delays = DelayTag::from_code(delay_code)
        .ok_or_else(|| Error::format(path, format!("unknown delay kind {delay_code}")))?;
    let wavelet = Wavelet::from_code(family, hyper)
        .map_err(|e| Error::format(path, format!("bad wavelet: {e}")))?;
    if d == 0 || len != d * frames || signal_len > len {
        return Err(Error::format(path, "inconsistent header sizes"));
    }
    let count = (m + 1)
        .checked_mul(frames)
        .filter(|&c| c <= 1 << 32)
        .ok_or_else(|| Error::format(path, "header sizes overflow"))?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        let re = f64::from_le_bytes(r.array("coefficients")?);
        let im = f64::from_le_bytes(r.array("coefficients")?);
        data.push(Complex64::new(re, im));
    }
    let mut extra = [0u8; 1];
    if r.inner.read(&mut extra).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(path, "trailing bytes after coefficients"));
    }
    let header = CoefHeader {
        len,
        d,
        m,
        m_c,
        frames,
        delays,
        wavelet,
        real_mode: real_mode != 0,
        signal_len,
        sample_rate,
    };
    let design = header.design()?;
    let bank = design.bank();
    let coefs = CoefMatrix::from_parts(data, m + 1, frames, d, bank.id(), bank.real_mode())?;
    Ok((header, design, coefs))
}

struct Reader<'a, R> {
    inner: R,
    path: &'a Path,
}

impl<R: Read> Reader<'_, R> {
    fn array<const K: usize>(&mut self, what: &str) -> Result<[u8; K]> {
        let mut buf = [0u8; K];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::format(self.path, format!("truncated file while reading {what}"))
            } else {
                Error::io(self.path, e)
            }
        })?;
        Ok(buf)
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let v = u64::from_le_bytes(self.array(what)?);
        usize::try_from(v).map_err(|_| Error::format(self.path, format!("{what} too large")))
    }
}

/// Binary 16-bit grayscale PGM; `values` are row-major, scaled so the
/// maximum maps to 65535 and negatives clip to 0.
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    if values.len() != width * height || width == 0 || height == 0 {
        return Err(Error::param("image size does not match the data"));
    }
    let peak = values.iter().copied().fold(0.0, f64::max);
    let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &v in values {
        let q = (v * scale).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
