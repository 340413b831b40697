use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use gridwave::design::padded_len;
use gridwave::{
    accumulated_spectrogram, analyze, build_design, choose_decimation, detect_onsets, dual_with_bounds,
    err_ms, eval_onsets, fgla, frame_bounds, full_search, load_coefs, magnitudes, read_wav,
    reference_design, save_coefs, synthesize_real, write_pgm, write_wav, AudioBuffer, CoefHeader,
    DelaySequence, Error, FglaParams, FilterBankDesign, OnsetParams, Result, SearchConfig,
};

use super::{Command, DesignArgs};

/// Coverage images span this many dB below their peak.
const IMAGE_RANGE_DB: f64 = 60.0;

fn emit(value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    print_out(&(text + "\n"))
}

/// Writes to stdout; a closed pipe is not an error.
fn print_out(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

impl DesignArgs {
    fn decimation(&self) -> Result<usize> {
        match self.decimation {
            Some(0) => Err(Error::InvalidParameter("decimation must be positive".into())),
            Some(d) => Ok(d),
            None if self.rate > 0.0 && self.rate.is_finite() => Ok(choose_decimation(self.channels, self.rate)),
            None => Err(Error::InvalidParameter("oversampling rate must be positive".into())),
        }
    }

    /// Design whose length is the smallest multiple of `d` holding `min_len` samples.
    fn build(&self, min_len: usize, sample_rate: f64) -> Result<FilterBankDesign> {
        let d = self.decimation()?;
        let delays = DelaySequence::generate(&self.delays.kind(), self.channels + 1)?;
        let len = padded_len(min_len.max(1), d);
        Ok(build_design(&self.wavelet, self.channels, self.m_c, d, len, &delays)?.with_sample_rate(sample_rate))
    }

    fn build_frames(&self, frames: usize, sample_rate: f64) -> Result<FilterBankDesign> {
        if frames == 0 {
            return Err(Error::InvalidParameter("frames must be positive".into()));
        }
        self.build(self.decimation()? * frames, sample_rate)
    }
}

fn summary(des: &FilterBankDesign) -> serde_json::Value {
    let p = &des.params;
    json!({
        "wavelet": des.wavelet.to_string(),
        "delays": p.delays.kind().tag().to_string(),
        "m": p.m,
        "m_c": p.m_c,
        "d": p.d,
        "len": p.len,
        "frames": p.frames(),
        "oversampling": p.oversampling(),
        "sample_rate": p.sample_rate,
        "design_id": format!("{:016x}", des.bank().id()),
    })
}

fn padded(signal: &[f64], len: usize) -> Vec<f64> {
    let mut v = signal.to_vec();
    v.resize(len, 0.0);
    v
}

pub fn run(command: Command) -> Result<u8> {
    match command {
        Command::Design {
            design,
            frames,
            sample_rate,
        } => {
            let des = design.build_frames(frames, sample_rate)?;
            emit(&json!({
                "design": summary(&des),
                "center_freqs": des.center_freqs,
                "scales": des.scales,
                "delays": des.params.delays.elements(),
            }))?;
            Ok(0)
        }
        Command::Bounds { design, frames } => {
            let des = design.build_frames(frames, 2.0)?;
            let fd = frame_bounds(&des);
            emit(&json!({
                "design": summary(&des),
                "bounds": fd,
                "invertible": fd.invertible(),
            }))?;
            Ok(if fd.invertible() { 0 } else { 2 })
        }
        Command::Analyze { design, input, out } => {
            let audio = read_wav(&input)?;
            let des = design.build(audio.samples.len(), audio.sample_rate)?;
            let coefs = analyze(&des, &padded(&audio.samples, des.params.len))?;
            let header = CoefHeader::for_design(&des, audio.samples.len())?;
            save_coefs(&out, &header, &coefs)?;
            emit(&json!({
                "design": summary(&des),
                "signal_len": audio.samples.len(),
                "coefficients": coefs.data().len(),
                "out": out,
            }))?;
            Ok(0)
        }
        Command::Synthesize { input, out } => {
            let (header, des, coefs) = load_coefs(&input)?;
            let (dual, fd) = dual_with_bounds(&des)?;
            let mut signal = synthesize_real(&dual, &coefs)?;
            signal.truncate(header.signal_len);
            let gain = write_wav(
                &out,
                &AudioBuffer {
                    samples: signal,
                    sample_rate: header.sample_rate,
                    source: None,
                },
            )?;
            emit(&json!({
                "design": summary(&des),
                "frame_bound_ratio": fd.ratio,
                "output_gain": gain,
                "out": out,
            }))?;
            Ok(0)
        }
        Command::Roundtrip {
            design,
            input,
            noise_len,
            seed,
        } => {
            let (signal, fs) = match &input {
                Some(path) => {
                    let a = read_wav(path)?;
                    (a.samples, a.sample_rate)
                }
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    ((0..noise_len).map(|_| rng.random_range(-1.0..1.0)).collect(), 44100.0)
                }
            };
            let des = design.build(signal.len(), fs)?;
            let (dual, fd) = dual_with_bounds(&des)?;
            let f = padded(&signal, des.params.len);
            let rec = synthesize_real(&dual, &analyze(&des, &f)?)?;
            let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            let err = f.iter().zip(&rec).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            emit(&json!({
                "design": summary(&des),
                "relative_error": if norm > 0.0 { err / norm } else { 0.0 },
                "frame_bound_ratio": fd.ratio,
                "bounds": fd,
            }))?;
            Ok(0)
        }
        Command::Search {
            wavelet,
            delays,
            rates,
            candidates,
            eval_frames,
            plateau_tol,
            m_probe,
            max_decimation,
            table,
        } => {
            if eval_frames == 0 {
                return Err(Error::InvalidParameter("eval-frames must be positive".into()));
            }
            let mut cfg = SearchConfig {
                delays,
                eval_frames,
                plateau_tol,
                m_probe,
                max_decimation,
                ..SearchConfig::default()
            };
            if let Some(c) = candidates {
                cfg.candidates = c;
            }
            let records = full_search(&wavelet, &rates, &cfg)?;
            if table {
                print_out(&gridwave::search::format_table(&records))?;
            } else {
                emit(&records)?;
            }
            Ok(0)
        }
        Command::Onsets {
            design,
            input,
            lambda,
            median_window,
            min_gap,
            reference,
        } => {
            let audio = read_wav(&input)?;
            let des = design.build(audio.samples.len(), audio.sample_rate)?;
            let params = OnsetParams {
                lambda,
                median_window,
                min_gap,
                ..OnsetParams::default()
            };
            let res = detect_onsets(&des, &audio.samples, audio.sample_rate, &params)?;
            let scores = reference.map(|r| eval_onsets(&res.onsets, &r));
            emit(&json!({
                "design": summary(&des),
                "params": params,
                "frame_period": res.frame_period,
                "onsets": res.onsets,
                "scores": scores,
            }))?;
            Ok(0)
        }
        Command::Fgla {
            design,
            input,
            out,
            iters,
            warmup,
            inits,
            gamma,
            seed,
        } => {
            let audio = read_wav(&input)?;
            let des = design.build(audio.samples.len(), audio.sample_rate)?;
            let (dual, fd) = dual_with_bounds(&des)?;
            let target = magnitudes(&analyze(&des, &padded(&audio.samples, des.params.len))?);
            let params = FglaParams {
                total_iters: iters,
                warmup_iters: warmup,
                n_random_inits: inits,
                gamma,
                seed,
            };
            let res = fgla(&des, &dual, &target, &params)?;
            let mut signal = res.signal;
            signal.truncate(audio.samples.len());
            let reference = reference_design(audio.samples.len(), audio.sample_rate)?;
            let spectral = if audio.samples.iter().any(|&x| x != 0.0) {
                Some(err_ms(&reference, &audio.samples, &signal)?)
            } else {
                None
            };
            write_wav(
                &out,
                &AudioBuffer {
                    samples: signal,
                    sample_rate: audio.sample_rate,
                    source: None,
                },
            )?;
            emit(&json!({
                "design": summary(&des),
                "frame_bound_ratio": fd.ratio,
                "params": params,
                "selected_init": res.selected_init,
                "err_ms_db": spectral,
                "trace_db": res.trace,
                "out": out,
            }))?;
            Ok(0)
        }
        Command::Coverage {
            design,
            frames,
            first_channel,
            end_channel,
            gauss_dur,
            out,
        } => {
            let des = design.build_frames(frames, 2.0)?;
            let end = end_channel.unwrap_or(des.params.m + 1);
            if first_channel >= end {
                return Err(Error::InvalidParameter("empty channel range".into()));
            }
            let map = accumulated_spectrogram(&des, 0..des.params.frames(), first_channel..end, gauss_dur)?;
            let peak = map.data.iter().copied().fold(0.0, f64::max);
            // Frequency grows upwards, time to the right.
            let mut image = Vec::with_capacity(map.data.len());
            for b in (0..map.bins).rev() {
                for t in 0..map.times {
                    let v = map.get(t, b);
                    let db = if v > 0.0 && peak > 0.0 { 10.0 * (v / peak).log10() } else { -IMAGE_RANGE_DB };
                    image.push((db / IMAGE_RANGE_DB + 1.0).max(0.0));
                }
            }
            write_pgm(&out, map.times, map.bins, &image)?;
            let centers = des.normalized_center_freqs();
            let (lo, hi) = (centers[first_channel], centers[end - 1].min(0.5));
            emit(&json!({
                "design": summary(&des),
                "width": map.times,
                "height": map.bins,
                "hop": map.hop,
                "band": [lo, hi],
                "band_min_over_mean": map.strip_ratio(lo, hi),
                "out": out,
            }))?;
            Ok(0)
        }
    }
}
