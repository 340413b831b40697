use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::design::{build_design, choose_decimation};
use crate::error::{Error, Result};
use crate::frame::frame_bounds;
use crate::lds::{DelaySequence, DelayTag};
use crate::wavelets::Wavelet;

/// Channel counts tried by the coarse scan.
pub const DEFAULT_CANDIDATES: [usize; 10] = [128, 256, 384, 512, 640, 768, 1024, 1280, 1536, 2048];

/// Lowest channel at no more than 1/100 of the sampling rate.
pub const MIN_M_PER_MC: usize = 50;

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub delays: DelayTag,
    pub candidates: Vec<usize>,
    /// Frames `N = L / d` used for every evaluation.
    pub eval_frames: usize,
    pub plateau_tol: f64,
    pub m_probe: usize,
    /// Candidates needing a larger decimation factor are skipped.
    pub max_decimation: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            delays: DelayTag::Kronecker,
            candidates: DEFAULT_CANDIDATES.to_vec(),
            eval_frames: 16,
            plateau_tol: 1e-3,
            m_probe: 512,
            max_decimation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchRecord {
    pub wavelet: Wavelet,
    pub delays: DelayTag,
    pub target_oversampling: f64,
    pub m_c: usize,
    pub m: usize,
    pub d: usize,
    pub ratio: f64,
    pub eval_len: usize,
}

impl SearchRecord {
    /// `R_FB (M_C, M)`.
    pub fn cell(&self) -> String {
        format!("{:.2} ({},{})", self.ratio, self.m_c, self.m)
    }
}

/// Frame-bound ratio of one configuration; infinite when not invertible.
pub fn evaluate(wavelet: &Wavelet, m: usize, m_c: usize, d: usize, cfg: &SearchConfig) -> Result<f64> {
    let delays = DelaySequence::generate(&cfg.delays.kind(), m + 1)?;
    let des = build_design(wavelet, m, m_c, d, d * cfg.eval_frames, &delays)?;
    let fd = frame_bounds(&des);
    Ok(if fd.invertible() { fd.ratio } else { f64::INFINITY })
}

fn decimation_for(m: usize, oversampling: f64, cfg: &SearchConfig) -> Option<usize> {
    let d = choose_decimation(m, oversampling);
    match cfg.max_decimation {
        Some(cap) if d > cap => None,
        _ => Some(d),
    }
}

fn relative_gain(prev: f64, next: f64) -> f64 {
    if prev.is_infinite() {
        return if next.is_infinite() { 0.0 } else { 1.0 };
    }
    (prev - next) / prev
}

/// Smallest `M_C` after which adding compensation channels stops helping.
pub fn optimize_mc(wavelet: &Wavelet, oversampling: f64, cfg: &SearchConfig) -> Result<usize> {
    let m = cfg.m_probe;
    let d = decimation_for(m, oversampling, cfg)
        .ok_or_else(|| Error::param(format!("probe M={m} needs a decimation above the cap")))?;
    let limit = m / MIN_M_PER_MC;
    let mut ratios = vec![evaluate(wavelet, m, 1, d, cfg)?];
    let mut small = 0;
    for m_c in 2.. {
        if m_c > limit {
            return Err(Error::param(format!(
                "no plateau up to M_C = {limit}; raise the probe size above {m}"
            )));
        }
        let r = evaluate(wavelet, m, m_c, d, cfg)?;
        let gain = relative_gain(*ratios.last().unwrap(), r);
        ratios.push(r);
        if gain < cfg.plateau_tol {
            small += 1;
            if small == 2 {
                return Ok(m_c - 2);
            }
        } else {
            small = 0;
        }
    }
    unreachable!()
}

/// Best candidate `M` (ties go to the smaller `M`).
pub fn optimize_m(wavelet: &Wavelet, oversampling: f64, m_c: usize, cfg: &SearchConfig) -> Result<SearchRecord> {
    let mut best: Option<SearchRecord> = None;
    let mut candidates = cfg.candidates.clone();
    candidates.sort_unstable();
    candidates.dedup();
    for &m in &candidates {
        if m < MIN_M_PER_MC * m_c {
            continue;
        }
        let Some(d) = decimation_for(m, oversampling, cfg) else {
            continue;
        };
        let ratio = evaluate(wavelet, m, m_c, d, cfg)?;
        if best.as_ref().is_none_or(|b| ratio < b.ratio) {
            best = Some(SearchRecord {
                wavelet: *wavelet,
                delays: cfg.delays,
                target_oversampling: oversampling,
                m_c,
                m,
                d,
                ratio,
                eval_len: d * cfg.eval_frames,
            });
        }
    }
    best.ok_or_else(|| Error::param("no feasible candidate M"))
}

/// Bracket bisection around the coarse winner and its candidate-list neighbors.
pub fn refine_m(record: &SearchRecord, cfg: &SearchConfig) -> Result<SearchRecord> {
    let w = record.wavelet;
    let r = record.target_oversampling;
    let floor = MIN_M_PER_MC * record.m_c;
    let mut candidates = cfg.candidates.clone();
    candidates.sort_unstable();
    let below = candidates.iter().rev().find(|&&m| m < record.m).copied();
    let above = candidates.iter().find(|&&m| m > record.m).copied();
    let mut lo = below.unwrap_or(record.m).max(floor);
    let mut hi = above.unwrap_or(record.m);

    let mut seen: BTreeMap<usize, Option<(usize, f64)>> = BTreeMap::new();
    seen.insert(record.m, Some((record.d, record.ratio)));
    let mut eval = |m: usize| -> Result<Option<(usize, f64)>> {
        if let Some(v) = seen.get(&m) {
            return Ok(*v);
        }
        let v = match decimation_for(m, r, cfg) {
            Some(d) => Some((d, evaluate(&w, m, record.m_c, d, cfg)?)),
            None => None,
        };
        seen.insert(m, v);
        Ok(v)
    };
    let key = |v: Option<(usize, f64)>| v.map_or(f64::INFINITY, |x| x.1);

    let mut best = record.m;
    let mut best_val = record.ratio;
    while hi - lo > 2 {
        let mut probes = vec![lo];
        if best - lo > 1 {
            probes.push((lo + best) / 2);
        }
        probes.push(best);
        if hi - best > 1 {
            probes.push((best + hi) / 2);
        }
        probes.push(hi);
        let mut winner = best;
        let mut winner_val = best_val;
        for &m in &probes {
            let v = key(eval(m)?);
            if v < winner_val || (v == winner_val && m < winner) {
                winner = m;
                winner_val = v;
            }
        }
        let pos = probes.iter().position(|&m| m == winner).unwrap();
        let new_lo = probes[pos.saturating_sub(1)];
        let new_hi = probes[(pos + 1).min(probes.len() - 1)];
        if (new_lo, winner, new_hi) == (lo, best, hi) {
            break;
        }
        lo = new_lo;
        hi = new_hi;
        best = winner;
        best_val = winner_val;
    }
    let (d, ratio) = eval(best)?.expect("best candidate is feasible");
    Ok(SearchRecord {
        m: best,
        d,
        ratio,
        eval_len: d * cfg.eval_frames,
        ..record.clone()
    })
}

pub fn full_search(wavelet: &Wavelet, oversampling: &[f64], cfg: &SearchConfig) -> Result<Vec<SearchRecord>> {
    oversampling
        .iter()
        .map(|&r| {
            let m_c = optimize_mc(wavelet, r, cfg)?;
            let coarse = optimize_m(wavelet, r, m_c, cfg)?;
            refine_m(&coarse, cfg)
        })
        .collect()
}

/// One line per record: oversampling, then the `R_FB (M_C, M)` cell.
pub fn format_table(records: &[SearchRecord]) -> String {
    let mut out = String::new();
    if let Some(first) = records.first() {
        let _ = writeln!(out, "# {} delays, {}", first.delays, first.wavelet);
    }
    let _ = writeln!(out, "oversampling\tR_FB (M_C, M)");
    for r in records {
        let _ = writeln!(out, "{}\t{}", r.target_oversampling, r.cell());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SearchConfig {
        SearchConfig {
            eval_frames: 4,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let w = Wavelet::cauchy(300.0).unwrap();
        let cfg = quick();
        let a = evaluate(&w, 128, 2, 64, &cfg).unwrap();
        let b = evaluate(&w, 128, 2, 64, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_delays_are_flagged_as_singular() {
        let w = Wavelet::cauchy(300.0).unwrap();
        let cfg = SearchConfig {
            delays: DelayTag::Zero,
            ..quick()
        };
        assert!(evaluate(&w, 253, 5, 254, &cfg).unwrap().is_infinite());
    }

    #[test]
    fn candidates_below_the_floor_are_skipped() {
        let w = Wavelet::cauchy(300.0).unwrap();
        let cfg = SearchConfig {
            candidates: vec![128, 256],
            ..quick()
        };
        // 128 < 50 * 3, so only 256 is admissible.
        let rec = optimize_m(&w, 8.0, 3, &cfg).unwrap();
        assert_eq!(rec.m, 256);
        assert!(rec.m >= MIN_M_PER_MC * rec.m_c);

        let none = SearchConfig {
            candidates: vec![128],
            ..quick()
        };
        assert!(optimize_m(&w, 8.0, 3, &none).is_err());
    }

    #[test]
    fn refinement_never_worsens() {
        let w = Wavelet::cauchy(300.0).unwrap();
        let cfg = SearchConfig {
            candidates: vec![128, 160, 192],
            ..quick()
        };
        let coarse = optimize_m(&w, 8.0, 2, &cfg).unwrap();
        let fine = refine_m(&coarse, &cfg).unwrap();
        assert!(fine.ratio <= coarse.ratio);
        assert!(fine.m >= 100);
        let again = evaluate(&w, fine.m, fine.m_c, fine.d, &cfg).unwrap();
        assert_eq!(again, fine.ratio);
    }

    #[test]
    fn narrow_bracket_returns_winner() {
        let w = Wavelet::cauchy(300.0).unwrap();
        let cfg = SearchConfig {
            candidates: vec![150, 151, 152],
            ..quick()
        };
        let coarse = optimize_m(&w, 8.0, 2, &cfg).unwrap();
        let fine = refine_m(&coarse, &cfg).unwrap();
        assert_eq!(fine, coarse);
    }

    #[test]
    fn empty_rate_list() {
        let w = Wavelet::cauchy(300.0).unwrap();
        assert!(full_search(&w, &[], &quick()).unwrap().is_empty());
    }

    #[test]
    fn table_cells() {
        let rec = SearchRecord {
            wavelet: Wavelet::Cauchy { alpha: 300.0 },
            delays: DelayTag::Kronecker,
            target_oversampling: 2.0,
            m_c: 5,
            m: 253,
            d: 254,
            ratio: 2.9960,
            eval_len: 254 * 16,
        };
        assert_eq!(rec.cell(), "3.00 (5,253)");
        assert!(format_table(&[rec]).contains("2\t3.00 (5,253)"));
    }
}
