use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bank::{check_grid, ChannelResponse, FilterBank, Fnv};
use crate::error::{Error, Result};
use crate::lds::{DelayKind, DelaySequence};
use crate::wavelets::Wavelet;

/// Responses below this fraction of their peak are not stored.
pub const SUPPORT_TOL: f64 = 1e-13;

/// Largest admissible smallest-scale response at the spectrum wrap point, relative to its peak.
pub const ALIAS_TOL: f64 = 1e-4;

pub const DEFAULT_SAMPLE_RATE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Geometric { f_min: f64, f_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// Signal length `L`.
    pub len: usize,
    /// Highest channel index; the bank has `m + 1` channels.
    pub m: usize,
    /// Number of compensation (lowpass) channels.
    pub m_c: usize,
    /// Decimation factor.
    pub d: usize,
    pub delays: DelaySequence,
    pub spacing: Spacing,
    pub sample_rate: f64,
}

impl GridParams {
    pub fn frames(&self) -> usize {
        self.len / self.d
    }

    /// `2 (M + 1) / d`.
    pub fn oversampling(&self) -> f64 {
        2.0 * (self.m + 1) as f64 / self.d as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBankDesign {
    pub params: GridParams,
    pub wavelet: Wavelet,
    /// Channel center frequencies in Hz at `params.sample_rate`.
    pub center_freqs: Vec<f64>,
    /// Dilation of each wavelet channel (compensation channels excluded).
    pub scales: Vec<f64>,
    pub bank: FilterBank,
}

impl FilterBankDesign {
    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    /// Relabels frequencies for another sample rate; responses are unchanged.
    pub fn with_sample_rate(mut self, sample_rate: f64) -> Self {
        let ratio = sample_rate / self.params.sample_rate;
        for f in &mut self.center_freqs {
            *f *= ratio;
        }
        self.params.sample_rate = sample_rate;
        self
    }

    /// Center frequencies in cycles per sample.
    pub fn normalized_center_freqs(&self) -> Vec<f64> {
        self.center_freqs
            .iter()
            .map(|f| f / self.params.sample_rate)
            .collect()
    }

    pub fn frequency_response_diag(&self) -> Vec<f64> {
        self.bank.diagonal()
    }
}

impl AsRef<FilterBank> for FilterBankDesign {
    fn as_ref(&self) -> &FilterBank {
        &self.bank
    }
}

impl AsRef<FilterBank> for FilterBank {
    fn as_ref(&self) -> &FilterBank {
        self
    }
}

/// One channel: `amp · ψ̂(scale · (ν + shift))` on the window `[center - 1/2, center + 1/2)`,
/// delayed by `delay` samples.
struct ChannelSpec {
    center: f64,
    scale: f64,
    shift: f64,
    delay: f64,
    /// Drop the part of the response below DC.
    nonnegative: bool,
}

fn sample_channel(w: &Wavelet, ch: &ChannelSpec, len: usize) -> ChannelResponse {
    let lf = len as f64;
    let amp = ch.scale.sqrt();
    let (xa, xb) = w.support(SUPPORT_TOL);
    let mut win_lo = ((ch.center - 0.5) * lf).ceil() as i64;
    if ch.nonnegative {
        win_lo = win_lo.max(0);
    }
    let win_hi = ((ch.center + 0.5) * lf).ceil() as i64 - 1;
    let lo = (((xa / ch.scale - ch.shift) * lf).ceil() as i64).max(win_lo);
    let hi = (((xb / ch.scale - ch.shift) * lf).floor() as i64).min(win_hi);
    if hi < lo {
        return ChannelResponse::zero();
    }
    let values = (lo..=hi)
        .map(|k| {
            let nu = k as f64 / lf;
            let mag = amp * w.response(ch.scale * (nu + ch.shift));
            Complex64::from_polar(mag, -2.0 * PI * nu * ch.delay)
        })
        .collect();
    let mut out = ChannelResponse {
        start: lo.rem_euclid(len as i64) as usize,
        values,
    };
    // A channel centered at DC or Nyquist meets its own mirror on that bin;
    // weighting the bin by 1/sqrt(2) counts it once in the real extension.
    let self_mirror_bin = if ch.center == 0.0 {
        Some(0)
    } else if ch.center == 0.5 && len % 2 == 0 {
        Some(len / 2)
    } else {
        None
    };
    if let Some(v) = self_mirror_bin.and_then(|b| out.get_mut(len, b)) {
        *v *= FRAC_1_SQRT_2;
    }
    out
}

fn check_aliasing(w: &Wavelet, top: &ChannelSpec) -> Result<()> {
    let ratio = w.response(top.scale * (top.center + 0.5 + top.shift));
    if ratio > ALIAS_TOL {
        return Err(Error::Aliasing { ratio });
    }
    Ok(())
}

fn hash_common(h: &mut Fnv, w: &Wavelet, len: usize, d: usize, delays: &DelaySequence) {
    h.write_u64(len as u64);
    h.write_u64(d as u64);
    h.write_u64(w.family_code() as u64);
    h.write_f64(w.hyperparameter());
    h.write_u64(delays.kind().tag().code() as u64);
    match delays.kind() {
        DelayKind::Kronecker { alpha } => h.write_f64(*alpha),
        DelayKind::Digital01(c) => c.columns().iter().for_each(|&col| h.write_u64(col)),
        DelayKind::Zero => {}
    }
}

/// Linear-grid bank: `M + 1` channels centered at `j / (2M)` cycles per sample,
/// the lowest `M_C` of them compensation channels built by shifting the
/// channel `M_C` wavelet down in frequency and cutting it at DC.
///
/// Each channel is sampled on the bins of `[center - 1/2, center + 1/2)`, so
/// channels near Nyquist continue past it. The design is a real-mode bank.
pub fn build_design(
    wavelet: &Wavelet,
    m: usize,
    m_c: usize,
    d: usize,
    len: usize,
    delays: &DelaySequence,
) -> Result<FilterBankDesign> {
    wavelet.validate()?;
    check_grid(len, d)?;
    if m == 0 {
        return Err(Error::param("M must be at least 1"));
    }
    if m_c == 0 || m_c > m {
        return Err(Error::param(format!("M_C must lie in 1..=M, got M_C={m_c}, M={m}")));
    }
    if delays.len() != m + 1 {
        return Err(Error::LengthMismatch {
            expected: m + 1,
            actual: delays.len(),
        });
    }
    let pk = wavelet.peak_frequency();
    let spacing = 1.0 / (2 * m) as f64;
    let base_scale = pk / (m_c as f64 * spacing);
    let specs: Vec<ChannelSpec> = (0..=m)
        .map(|j| {
            let center = j as f64 * spacing;
            let delay = d as f64 * delays.elements()[j];
            if j < m_c {
                ChannelSpec {
                    center,
                    scale: base_scale,
                    shift: (m_c - j) as f64 * spacing,
                    delay,
                    nonnegative: true,
                }
            } else {
                ChannelSpec {
                    center,
                    scale: pk / center,
                    shift: 0.0,
                    delay,
                    nonnegative: false,
                }
            }
        })
        .collect();
    check_aliasing(wavelet, &specs[m])?;

    let channels: Vec<ChannelResponse> = specs
        .par_iter()
        .map(|s| sample_channel(wavelet, s, len))
        .collect();

    let mut h = Fnv::new();
    h.write_str("linear");
    hash_common(&mut h, wavelet, len, d, delays);
    h.write_u64(m as u64);
    h.write_u64(m_c as u64);
    let bank = FilterBank::from_parts(len, d, channels, true, h.finish(), None);

    Ok(FilterBankDesign {
        params: GridParams {
            len,
            m,
            m_c,
            d,
            delays: delays.clone(),
            spacing: Spacing::Linear,
            sample_rate: DEFAULT_SAMPLE_RATE,
        },
        wavelet: *wavelet,
        center_freqs: specs.iter().map(|s| s.center * DEFAULT_SAMPLE_RATE).collect(),
        scales: specs[m_c..].iter().map(|s| s.scale).collect(),
        bank,
    })
}

/// Geometrically spaced bank without compensation channels or delays.
/// `f_min` and `f_max` are in Hz at `sample_rate`.
pub fn geometric_design(
    wavelet: &Wavelet,
    channels: usize,
    f_min: f64,
    f_max: f64,
    d: usize,
    len: usize,
    sample_rate: f64,
) -> Result<FilterBankDesign> {
    wavelet.validate()?;
    check_grid(len, d)?;
    if channels == 0 {
        return Err(Error::param("need at least one channel"));
    }
    if !(f_min > 0.0 && f_min <= f_max && f_max <= 0.5 * sample_rate) {
        return Err(Error::param(format!(
            "need 0 < f_min <= f_max <= Nyquist, got {f_min}..{f_max} at {sample_rate} Hz"
        )));
    }
    let delays = DelaySequence::generate(&DelayKind::Zero, channels)?;
    let pk = wavelet.peak_frequency();
    let ratio = f_max / f_min;
    let specs: Vec<ChannelSpec> = (0..channels)
        .map(|j| {
            let t = if channels == 1 {
                0.0
            } else {
                j as f64 / (channels - 1) as f64
            };
            let center = f_min * ratio.powf(t) / sample_rate;
            ChannelSpec {
                center,
                scale: pk / center,
                shift: 0.0,
                delay: 0.0,
                nonnegative: false,
            }
        })
        .collect();
    check_aliasing(wavelet, &specs[channels - 1])?;
    let responses: Vec<ChannelResponse> = specs
        .par_iter()
        .map(|s| sample_channel(wavelet, s, len))
        .collect();

    let mut h = Fnv::new();
    h.write_str("geometric");
    hash_common(&mut h, wavelet, len, d, &delays);
    h.write_u64(channels as u64);
    h.write_f64(f_min / sample_rate);
    h.write_f64(f_max / sample_rate);
    let bank = FilterBank::from_parts(len, d, responses, true, h.finish(), None);

    Ok(FilterBankDesign {
        params: GridParams {
            len,
            m: channels - 1,
            m_c: 0,
            d,
            delays,
            spacing: Spacing::Geometric { f_min, f_max },
            sample_rate,
        },
        wavelet: *wavelet,
        center_freqs: specs.iter().map(|s| s.center * sample_rate).collect(),
        scales: specs.iter().map(|s| s.scale).collect(),
        bank,
    })
}

/// Largest `d` with `2 (M + 1) / d >= target_oversampling` (at least 1).
pub fn choose_decimation(m: usize, target_oversampling: f64) -> usize {
    let d = (2.0 * (m + 1) as f64 / target_oversampling * (1.0 + 1e-12)).floor();
    if d.is_finite() && d >= 1.0 {
        d as usize
    } else {
        1
    }
}

/// Smallest multiple of `d` that is at least `min_len`.
pub fn padded_len(min_len: usize, d: usize) -> usize {
    min_len.max(1).div_ceil(d) * d
}
