//! Applications built on the transform: onset detection, phase retrieval,
//! time-frequency coverage maps and a cost model for direct implementations.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::bank::FilterBank;
use crate::design::{geometric_design, padded_len, FilterBankDesign};
use crate::error::{Error, Result};
use crate::wavelets::Wavelet;
use crate::xform::{CoefMatrix, Transform};

/// Reported in place of `-inf` dB.
pub const DB_FLOOR: f64 = -300.0;

/// Matching window for onset evaluation, seconds.
pub const ONSET_TOLERANCE: f64 = 0.05;

/// Largest `atoms * L` the coverage map will synthesize.
pub const COVERAGE_MAX_WORK: usize = 1 << 31;

const COVERAGE_CHUNK: usize = 32;

fn to_db(ratio: f64) -> f64 {
    if ratio > 0.0 {
        (10.0 * ratio.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

// ---------------------------------------------------------------- onsets

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnsetParams {
    pub lambda: f64,
    pub median_window: usize,
    pub min_gap: usize,
    /// Absolute threshold floor relative to the flux maximum. Keeps rounding
    /// noise in silent passages from registering as peaks.
    pub floor_rel: f64,
}

impl Default for OnsetParams {
    fn default() -> Self {
        OnsetParams {
            lambda: 1.34,
            median_window: 11,
            min_gap: 3,
            floor_rel: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnsetResult {
    pub flux: Vec<f64>,
    pub threshold: Vec<f64>,
    pub onset_frames: Vec<usize>,
    /// Onset times in seconds.
    pub onsets: Vec<f64>,
    pub frame_period: f64,
}

/// Rectified frame-to-frame magnitude increase summed over the wavelet
/// channels `j >= m_c`.
pub fn spectral_flux(coefs: &CoefMatrix, m_c: usize) -> Result<Vec<f64>> {
    if m_c >= coefs.channels() {
        return Err(Error::param(format!(
            "m_c = {m_c} leaves no channels out of {}",
            coefs.channels()
        )));
    }
    let n = coefs.frames();
    if n < 2 {
        return Err(Error::param("spectral flux needs at least two frames"));
    }
    let mut flux = vec![0.0; n];
    for j in m_c..coefs.channels() {
        let row = coefs.row(j);
        for l in 1..n {
            let diff = row[l].norm() - row[l - 1].norm();
            if diff > 0.0 {
                flux[l] += diff;
            }
        }
    }
    Ok(flux)
}

fn local_median(x: &[f64], l: usize, half: usize, buf: &mut Vec<f64>) -> f64 {
    let lo = l.saturating_sub(half);
    let hi = (l + half + 1).min(x.len());
    buf.clear();
    buf.extend_from_slice(&x[lo..hi]);
    let mid = buf.len() / 2;
    let (_, &mut upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    if buf.len() % 2 == 1 {
        upper
    } else {
        let lower = buf[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

pub fn pick_onsets(flux: &[f64], params: &OnsetParams, frame_period: f64) -> Result<OnsetResult> {
    if params.median_window % 2 == 0 {
        return Err(Error::param("median window must be odd"));
    }
    if !(params.lambda > 0.0) {
        return Err(Error::param("lambda must be positive"));
    }
    let half = params.median_window / 2;
    let peak = flux.iter().copied().fold(0.0, f64::max);
    let floor = params.floor_rel * peak;
    let mut buf = Vec::with_capacity(params.median_window);
    let threshold: Vec<f64> = (0..flux.len())
        .map(|l| (params.lambda * local_median(flux, l, half, &mut buf)).max(floor))
        .collect();

    let mut candidates: Vec<usize> = (0..flux.len())
        .filter(|&l| {
            let left = l == 0 || flux[l] > flux[l - 1];
            let right = l + 1 == flux.len() || flux[l] > flux[l + 1];
            left && right && flux[l] > threshold[l]
        })
        .collect();
    // Larger flux first; equal flux keeps the earlier frame.
    candidates.sort_by(|&a, &b| flux[b].total_cmp(&flux[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for l in candidates {
        if kept.iter().all(|&k| k.abs_diff(l) >= params.min_gap) {
            kept.push(l);
        }
    }
    kept.sort_unstable();
    Ok(OnsetResult {
        onsets: kept.iter().map(|&l| l as f64 * frame_period).collect(),
        onset_frames: kept,
        flux: flux.to_vec(),
        threshold,
        frame_period,
    })
}

/// Analysis, flux over the wavelet channels and peak picking in one call.
/// The signal is zero-padded to the design length.
pub fn detect_onsets(
    design: &FilterBankDesign,
    signal: &[f64],
    sample_rate: f64,
    params: &OnsetParams,
) -> Result<OnsetResult> {
    let bank = design.bank();
    if signal.len() > bank.len() {
        return Err(Error::LengthMismatch {
            expected: bank.len(),
            actual: signal.len(),
        });
    }
    let mut padded = signal.to_vec();
    padded.resize(bank.len(), 0.0);
    let coefs = Transform::new(bank).analyze(&padded)?;
    let flux = spectral_flux(&coefs, design.params.m_c)?;
    pick_onsets(&flux, params, bank.decimation() as f64 / sample_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnsetScores {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub matched: usize,
}

/// Greedy one-to-one matching in time order within 50 ms.
pub fn eval_onsets(estimated: &[f64], reference: &[f64]) -> OnsetScores {
    let (mut i, mut j, mut matched) = (0, 0, 0);
    while i < estimated.len() && j < reference.len() {
        let (e, r) = (estimated[i], reference[j]);
        if (e - r).abs() <= ONSET_TOLERANCE {
            matched += 1;
            i += 1;
            j += 1;
        } else if r < e {
            j += 1;
        } else {
            i += 1;
        }
    }
    let ratio = |n: usize| if n == 0 { 0.0 } else { matched as f64 / n as f64 };
    let (p, r) = (ratio(estimated.len()), ratio(reference.len()));
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    OnsetScores {
        precision: p,
        recall: r,
        f_measure: f,
        matched,
    }
}

// ---------------------------------------------------------------- FGLA

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FglaParams {
    pub total_iters: usize,
    pub warmup_iters: usize,
    pub n_random_inits: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for FglaParams {
    fn default() -> Self {
        FglaParams {
            total_iters: 150,
            warmup_iters: 20,
            n_random_inits: 5,
            gamma: 0.99,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FglaState {
    pub coefs: CoefMatrix,
    pub prev_projection: CoefMatrix,
    pub gamma: f64,
    /// Lowest in-representation spectral error seen so far, dB.
    pub best_err: f64,
}

#[derive(Debug, Clone)]
pub struct FglaResult {
    pub signal: Vec<f64>,
    /// 0 is the zero-phase start, `i > 0` the i-th random start.
    pub selected_init: usize,
    /// In-representation spectral error per iteration of the selected run, dB.
    pub trace: Vec<f64>,
    pub state: FglaState,
}

pub fn magnitudes(coefs: &CoefMatrix) -> Vec<f64> {
    coefs.data().iter().map(|c| c.norm()).collect()
}

/// Replaces moduli by `target`, keeping phases (phase 1 where the modulus is 0).
fn project_magnitude(c: &mut [Complex64], target: &[f64]) {
    for (v, &t) in c.iter_mut().zip(target) {
        let r = v.norm();
        *v = if r > 0.0 { *v * (t / r) } else { Complex64::new(t, 0.0) };
    }
}

fn spectral_error_db(c: &[Complex64], target: &[f64], target_energy: f64) -> f64 {
    let num: f64 = c
        .iter()
        .zip(target)
        .map(|(v, &t)| (v.norm() - t).powi(2))
        .sum();
    to_db(num / target_energy)
}

struct Gla<'a> {
    fwd: Transform<'a>,
    inv: Transform<'a>,
    target: &'a [f64],
    energy: f64,
    gamma: f64,
}

impl Gla<'_> {
    /// One accelerated step; returns the error of the range projection.
    fn step(&self, st: &mut FglaState) -> Result<f64> {
        let f = self.inv.synthesize_real(&st.coefs)?;
        let mut t = self.fwd.analyze(&f)?;
        let err = spectral_error_db(t.data(), self.target, self.energy);
        project_magnitude(t.data_mut(), self.target);
        let next: Vec<Complex64> = t
            .data()
            .iter()
            .zip(st.prev_projection.data())
            .map(|(&a, &b)| a + self.gamma * (a - b))
            .collect();
        st.coefs = t.with_data(next)?;
        st.prev_projection = t;
        st.best_err = st.best_err.min(err);
        Ok(err)
    }

    fn run(&self, st: &mut FglaState, iters: usize, trace: &mut Vec<f64>) -> Result<()> {
        for _ in 0..iters {
            trace.push(self.step(st)?);
        }
        Ok(())
    }
}

/// Fast Griffin-Lim: magnitude and range projections with momentum `gamma`.
///
/// Every start runs `warmup_iters` iterations; the one with the lowest
/// spectral error in the analysis representation continues up to
/// `total_iters`. Returns the signal synthesized from the last
/// magnitude-projected coefficients.
pub fn fgla(
    bank: impl AsRef<FilterBank>,
    dual: &FilterBank,
    target: &[f64],
    params: &FglaParams,
) -> Result<FglaResult> {
    let bank = bank.as_ref();
    if dual.dual_of() != Some(bank.id()) {
        return Err(Error::DesignMismatch);
    }
    let size = bank.num_channels() * bank.frames();
    if target.len() != size {
        return Err(Error::LengthMismatch {
            expected: size,
            actual: target.len(),
        });
    }
    if target.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::param("target magnitudes must be finite and nonnegative"));
    }
    if !(0.0..1.0).contains(&params.gamma) {
        return Err(Error::param("momentum must lie in [0, 1)"));
    }
    if params.warmup_iters > params.total_iters {
        return Err(Error::param("warmup exceeds total iterations"));
    }
    let zero = CoefMatrix::zeros(bank);
    let energy: f64 = target.iter().map(|t| t * t).sum();
    if energy == 0.0 {
        return Ok(FglaResult {
            signal: vec![0.0; bank.len()],
            selected_init: 0,
            trace: Vec::new(),
            state: FglaState {
                coefs: zero.clone(),
                prev_projection: zero,
                gamma: params.gamma,
                best_err: DB_FLOOR,
            },
        });
    }
    let gla = Gla {
        fwd: Transform::new(bank),
        inv: Transform::new(dual),
        target,
        energy,
        gamma: params.gamma,
    };

    let starts: Vec<CoefMatrix> = (0..=params.n_random_inits)
        .map(|i| {
            let data = if i == 0 {
                target.iter().map(|&t| Complex64::new(t, 0.0)).collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(i as u64));
                target
                    .iter()
                    .map(|&t| Complex64::from_polar(t, rng.random_range(0.0..2.0 * PI)))
                    .collect()
            };
            zero.with_data(data)
        })
        .collect::<Result<_>>()?;

    let warmed: Vec<(FglaState, Vec<f64>)> = starts
        .into_par_iter()
        .map(|c0| {
            let mut st = FglaState {
                prev_projection: c0.clone(),
                coefs: c0,
                gamma: params.gamma,
                best_err: f64::INFINITY,
            };
            let mut trace = Vec::with_capacity(params.total_iters);
            gla.run(&mut st, params.warmup_iters, &mut trace)?;
            Ok((st, trace))
        })
        .collect::<Result<_>>()?;

    let score = |t: &Vec<f64>| t.last().copied().unwrap_or(f64::INFINITY);
    let (selected_init, (mut st, mut trace)) = warmed
        .into_iter()
        .enumerate()
        .min_by(|a, b| score(&a.1 .1).total_cmp(&score(&b.1 .1)))
        .expect("at least the zero-phase start exists");
    gla.run(&mut st, params.total_iters - params.warmup_iters, &mut trace)?;
    let signal = gla.inv.synthesize_real(&st.prev_projection)?;
    Ok(FglaResult {
        signal,
        selected_init,
        trace,
        state: st,
    })
}

// ---------------------------------------------------------------- err_MS

pub const REFERENCE_ALPHA: f64 = 1000.0;
pub const REFERENCE_CHANNELS: usize = 181;
pub const REFERENCE_DECIMATION: usize = 7;

/// Geometric Cauchy bank from `fs/100` to Nyquist used to score reconstructions.
pub fn reference_design(min_len: usize, sample_rate: f64) -> Result<FilterBankDesign> {
    let w = Wavelet::cauchy(REFERENCE_ALPHA)?;
    geometric_design(
        &w,
        REFERENCE_CHANNELS,
        sample_rate / 100.0,
        sample_rate / 2.0,
        REFERENCE_DECIMATION,
        padded_len(min_len, REFERENCE_DECIMATION),
        sample_rate,
    )
}

/// `10 log10(‖|W f_r| − |W f|‖² / ‖W f‖²)`; both signals are zero-padded to
/// the reference length.
pub fn err_ms(reference: impl AsRef<FilterBank>, f: &[f64], f_r: &[f64]) -> Result<f64> {
    if f.len() != f_r.len() {
        return Err(Error::LengthMismatch {
            expected: f.len(),
            actual: f_r.len(),
        });
    }
    let bank = reference.as_ref();
    if f.len() > bank.len() {
        return Err(Error::LengthMismatch {
            expected: bank.len(),
            actual: f.len(),
        });
    }
    let t = Transform::new(bank);
    let pad = |x: &[f64]| {
        let mut v = x.to_vec();
        v.resize(bank.len(), 0.0);
        v
    };
    let a = t.analyze(&pad(f))?;
    let b = t.analyze(&pad(f_r))?;
    let den = a.energy();
    if den == 0.0 {
        return Err(Error::param("reference signal has zero energy"));
    }
    let num: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x.norm() - y.norm()).powi(2))
        .sum();
    Ok(to_db(num / den))
}

// ---------------------------------------------------------------- coverage

/// Summed spectrograms on a circular STFT grid, `times x bins`, time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMap {
    pub times: usize,
    pub bins: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub data: Vec<f64>,
}

impl CoverageMap {
    pub fn get(&self, t: usize, b: usize) -> f64 {
        self.data[t * self.bins + b]
    }

    /// Frequency of bin `b` in cycles per sample.
    pub fn bin_freq(&self, b: usize) -> f64 {
        b as f64 / self.fft_len as f64
    }

    /// Energy over bins in `[nu_lo, nu_hi]` per time step.
    pub fn strip_profile(&self, nu_lo: f64, nu_hi: f64) -> Vec<f64> {
        let bins: Vec<usize> = (0..self.bins)
            .filter(|&b| (nu_lo..=nu_hi).contains(&self.bin_freq(b)))
            .collect();
        (0..self.times)
            .map(|t| bins.iter().map(|&b| self.get(t, b)).sum())
            .collect()
    }

    /// Minimum over mean of [`CoverageMap::strip_profile`]; small values mean
    /// the strip has temporal gaps.
    pub fn strip_ratio(&self, nu_lo: f64, nu_hi: f64) -> f64 {
        let p = self.strip_profile(nu_lo, nu_hi);
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        let min = p.iter().copied().fold(f64::INFINITY, f64::min);
        if mean > 0.0 {
            min / mean
        } else {
            0.0
        }
    }
}

/// Sum of Gaussian-window spectrograms of the atoms `(l, j)` with `l` in
/// `frames` and `j` in `channels`. `gauss_dur` is the window's standard
/// deviation in samples; the STFT hop is half of it.
pub fn accumulated_spectrogram(
    bank: impl AsRef<FilterBank>,
    frames: Range<usize>,
    channels: Range<usize>,
    gauss_dur: f64,
) -> Result<CoverageMap> {
    let bank = bank.as_ref();
    if frames.end > bank.frames() || channels.end > bank.num_channels() {
        return Err(Error::param("atom range exceeds the design"));
    }
    if !(gauss_dur > 0.0) {
        return Err(Error::param("window duration must be positive"));
    }
    let len = bank.len();
    let atoms = frames.len() * channels.len();
    if atoms.saturating_mul(len) > COVERAGE_MAX_WORK {
        return Err(Error::TooLarge(format!("{atoms} atoms of length {len}")));
    }
    let half_win = (4.0 * gauss_dur).ceil() as usize;
    let fft_len = (2 * half_win + 1).next_power_of_two();
    if fft_len > len {
        return Err(Error::param("window is longer than the signal"));
    }
    let hop = ((gauss_dur / 2.0).round() as usize).max(1);
    let times = len.div_ceil(hop);
    let bins = fft_len / 2 + 1;
    let window: Vec<f64> = (0..=2 * half_win)
        .map(|i| {
            let t = i as f64 - half_win as f64;
            (-0.5 * (t / gauss_dur).powi(2)).exp()
        })
        .collect();

    let mut planner = FftPlanner::new();
    let inv_l = planner.plan_fft_inverse(len);
    let fwd_w = planner.plan_fft_forward(fft_len);
    let d = bank.decimation();
    let pairs: Vec<(usize, usize)> = channels
        .clone()
        .flat_map(|j| frames.clone().map(move |l| (l, j)))
        .collect();

    // Fixed chunks summed in order keep the result independent of scheduling.
    let partials: Vec<Vec<f64>> = pairs
        .par_chunks(COVERAGE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; times * bins];
            let mut atom = vec![Complex64::new(0.0, 0.0); len];
            let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
            for &(l, j) in chunk {
                atom.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                let shift = (d * l) as f64 / len as f64;
                bank.channel(j).for_each(len, |k, g| {
                    atom[k] = g * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * shift);
                });
                inv_l.process(&mut atom);
                for t in 0..times {
                    let center = t * hop;
                    for (i, &w) in window.iter().enumerate() {
                        let n = (center + len + i - half_win) % len;
                        buf[i] = atom[n] * (w / len as f64);
                    }
                    buf[window.len()..].iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                    fwd_w.process(&mut buf);
                    let row = &mut acc[t * bins..(t + 1) * bins];
                    for (r, v) in row.iter_mut().zip(&buf) {
                        *r += v.norm_sqr();
                    }
                }
            }
            acc
        })
        .collect();
    let mut data = vec![0.0; times * bins];
    for p in partials {
        data.iter_mut().zip(p).for_each(|(x, y)| *x += y);
    }
    Ok(CoverageMap {
        times,
        bins,
        hop,
        fft_len,
        data,
    })
}

// ---------------------------------------------------------------- cost

/// Approximate multiply-adds per frame of a direct time-domain implementation:
/// `M_C L_W (1 + ln(M / (M_C - 1)))`.
pub fn cost_estimate(m: usize, m_c: usize, l_w: usize) -> Result<f64> {
    check_cost_args(m, m_c)?;
    let (m, m_c) = (m as f64, m_c as f64);
    Ok(m_c * l_w as f64 * (1.0 + (m / (m_c - 1.0)).ln()))
}

/// Exact count: `M_C` compensation filters of length `L_W` plus wavelet
/// channel `j` with length `ceil(L_W M_C / j)`.
pub fn direct_cost(m: usize, m_c: usize, l_w: usize) -> Result<u64> {
    check_cost_args(m, m_c)?;
    let comps = (m_c * l_w) as u64;
    let wavelets: u64 = (m_c..=m).map(|j| (l_w * m_c).div_ceil(j) as u64).sum();
    Ok(comps + wavelets)
}

fn check_cost_args(m: usize, m_c: usize) -> Result<()> {
    if m_c < 2 {
        return Err(Error::param("cost model needs at least two compensation channels"));
    }
    if m <= m_c {
        return Err(Error::param("M must exceed M_C"));
    }
    Ok(())
}
