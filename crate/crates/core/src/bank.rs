use num_complex::Complex64;

use crate::error::{Error, Result};

/// DFT-domain response of one channel, stored on a circular bin interval.
///
/// Bins outside `start .. start + values.len()` (taken mod `L`) are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelResponse {
    pub start: usize,
    pub values: Vec<Complex64>,
}

impl ChannelResponse {
    pub fn zero() -> Self {
        ChannelResponse {
            start: 0,
            values: Vec::new(),
        }
    }

    pub fn dense(values: Vec<Complex64>) -> Self {
        ChannelResponse { start: 0, values }
    }

    /// Calls `f(bin, value)` for every stored bin, wrapping at `len`.
    #[inline]
    pub fn for_each(&self, len: usize, mut f: impl FnMut(usize, Complex64)) {
        let first = (len - self.start).min(self.values.len());
        for (i, &v) in self.values[..first].iter().enumerate() {
            f(self.start + i, v);
        }
        for (i, &v) in self.values[first..].iter().enumerate() {
            f(i, v);
        }
    }

    pub fn get_mut(&mut self, len: usize, bin: usize) -> Option<&mut Complex64> {
        let i = (bin + len - self.start) % len;
        self.values.get_mut(i)
    }

    pub fn to_dense(&self, len: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        self.for_each(len, |k, v| out[k] = v);
        out
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Shrinks a dense response to the shortest circular interval holding
    /// every value above `rel_tol` times the peak magnitude.
    pub fn compact(dense: &[Complex64], rel_tol: f64) -> Self {
        let len = dense.len();
        let peak = dense.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return ChannelResponse::zero();
        }
        let keep: Vec<bool> = dense.iter().map(|v| v.norm() > rel_tol * peak).collect();
        // The longest circular run of dropped bins becomes the gap.
        let first_kept = keep.iter().position(|&k| k).unwrap();
        let mut best_gap = (0usize, 0usize); // (start, length)
        let mut run_start = None;
        for step in 1..=len {
            let k = (first_kept + step) % len;
            if !keep[k] {
                run_start.get_or_insert(k);
            } else if let Some(s) = run_start.take() {
                let run = (k + len - s) % len;
                if run > best_gap.1 {
                    best_gap = (s, run);
                }
            }
        }
        let start = (best_gap.0 + best_gap.1) % len;
        let count = len - best_gap.1;
        let values = (0..count).map(|i| dense[(start + i) % len]).collect();
        ChannelResponse { start, values }
    }
}

/// Uniformly decimated filter bank of length `len` with decimation `decimation`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    len: usize,
    decimation: usize,
    channels: Vec<ChannelResponse>,
    real_mode: bool,
    id: u64,
    dual_of: Option<u64>,
}

impl FilterBank {
    pub(crate) fn from_parts(
        len: usize,
        decimation: usize,
        channels: Vec<ChannelResponse>,
        real_mode: bool,
        id: u64,
        dual_of: Option<u64>,
    ) -> Self {
        FilterBank {
            len,
            decimation,
            channels,
            real_mode,
            id,
            dual_of,
        }
    }

    /// Bank from explicit DFT-domain responses, one dense vector per channel.
    pub fn from_responses(
        decimation: usize,
        responses: Vec<Vec<Complex64>>,
        real_mode: bool,
    ) -> Result<Self> {
        let len = responses.first().map_or(0, Vec::len);
        check_grid(len, decimation)?;
        if let Some(bad) = responses.iter().find(|r| r.len() != len) {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: bad.len(),
            });
        }
        let mut h = Fnv::new();
        h.write_str("responses");
        h.write_u64(decimation as u64);
        h.write_u64(real_mode as u64);
        for r in &responses {
            for v in r {
                h.write_f64(v.re);
                h.write_f64(v.im);
            }
        }
        let channels = responses.into_iter().map(ChannelResponse::dense).collect();
        Ok(FilterBank::from_parts(len, decimation, channels, real_mode, h.finish(), None))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn decimation(&self) -> usize {
        self.decimation
    }

    /// Number of time frames `N = L / d`.
    pub fn frames(&self) -> usize {
        self.len / self.decimation
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[ChannelResponse] {
        &self.channels
    }

    pub fn channel(&self, j: usize) -> &ChannelResponse {
        &self.channels[j]
    }

    pub fn real_mode(&self) -> bool {
        self.real_mode
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Identifier of the analysis bank this one inverts, if it is a dual.
    pub fn dual_of(&self) -> Option<u64> {
        self.dual_of
    }

    pub fn is_dual(&self) -> bool {
        self.dual_of.is_some()
    }

    /// Achieved redundancy: channels per decimation step (doubled for real mode).
    pub fn oversampling(&self) -> f64 {
        let factor = if self.real_mode { 2.0 } else { 1.0 };
        factor * self.channels.len() as f64 / self.decimation as f64
    }

    pub fn response_dense(&self, j: usize) -> Vec<Complex64> {
        self.channels[j].to_dense(self.len)
    }

    /// `Ψ[k] = Σ_j |G_j[k]|²` over the stored channels.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut psi = vec![0.0; self.len];
        for ch in &self.channels {
            ch.for_each(self.len, |k, v| psi[k] += v.norm_sqr());
        }
        psi
    }

    /// Same bank with every response multiplied by `c`.
    pub fn scaled(&self, c: f64) -> FilterBank {
        let channels = self
            .channels
            .iter()
            .map(|ch| ChannelResponse {
                start: ch.start,
                values: ch.values.iter().map(|v| v * c).collect(),
            })
            .collect();
        let mut h = Fnv::new();
        h.write_u64(self.id);
        h.write_str("scaled");
        h.write_f64(c);
        FilterBank {
            channels,
            id: h.finish(),
            ..self.clone()
        }
    }

    /// Two-sided bank: the channels followed by their mirrors
    /// `conj(G[(L - k) mod L])`. The result is a complex-mode bank.
    pub fn real_extend(&self) -> FilterBank {
        let len = self.len;
        let mut channels = self.channels.clone();
        channels.extend(self.channels.iter().map(|ch| mirror(ch, len)));
        let mut h = Fnv::new();
        h.write_u64(self.id);
        h.write_str("real_extend");
        FilterBank::from_parts(len, self.decimation, channels, false, h.finish(), self.dual_of)
    }
}

pub(crate) fn mirror(ch: &ChannelResponse, len: usize) -> ChannelResponse {
    let n = ch.values.len();
    if n == 0 {
        return ChannelResponse::zero();
    }
    let start = (2 * len - ch.start - n + 1) % len;
    let values = ch.values.iter().rev().map(|v| v.conj()).collect();
    ChannelResponse { start, values }
}

pub(crate) fn check_grid(len: usize, decimation: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::param("signal length must be positive"));
    }
    if decimation == 0 {
        return Err(Error::param("decimation must be positive"));
    }
    if len % decimation != 0 {
        return Err(Error::param(format!(
            "decimation {decimation} does not divide signal length {len}"
        )));
    }
    Ok(())
}

/// 64-bit FNV-1a, used for stable design identifiers.
pub(crate) struct Fnv(u64);

impl Fnv {
    pub fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }

    pub fn write_str(&mut self, s: &str) {
        self.write(s.as_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn wrapped_iteration() {
        let ch = ChannelResponse {
            start: 6,
            values: vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)],
        };
        let d = ch.to_dense(8);
        let re: Vec<f64> = d.iter().map(|v| v.re).collect();
        assert_eq!(re, vec![3.0, 4.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn compact_finds_wrapped_interval() {
        let mut dense = vec![c(0.0, 0.0); 10];
        dense[9] = c(1.0, 0.0);
        dense[0] = c(0.5, 0.5);
        dense[1] = c(0.2, 0.0);
        let ch = ChannelResponse::compact(&dense, 1e-12);
        assert_eq!(ch.start, 9);
        assert_eq!(ch.values.len(), 3);
        assert_eq!(ch.to_dense(10), dense);
    }

    #[test]
    fn compact_keeps_interior_zeros() {
        let mut dense = vec![c(0.0, 0.0); 12];
        dense[2] = c(1.0, 0.0);
        dense[5] = c(1.0, 0.0);
        let ch = ChannelResponse::compact(&dense, 1e-12);
        assert_eq!((ch.start, ch.values.len()), (2, 4));
        assert_eq!(ch.to_dense(12), dense);
    }

    #[test]
    fn mirror_matches_definition() {
        let len = 9;
        let dense: Vec<Complex64> = (0..len).map(|k| c(k as f64, (k * k) as f64)).collect();
        for start in 0..len {
            for n in 1..len {
                let ch = ChannelResponse {
                    start,
                    values: (0..n).map(|i| dense[(start + i) % len]).collect(),
                };
                let full = ch.to_dense(len);
                let m = mirror(&ch, len).to_dense(len);
                for k in 0..len {
                    assert_eq!(m[k], full[(len - k) % len].conj());
                }
            }
        }
    }

    #[test]
    fn grid_checks() {
        assert!(FilterBank::from_responses(3, vec![vec![c(1.0, 0.0); 8]], false).is_err());
        assert!(FilterBank::from_responses(0, vec![vec![c(1.0, 0.0); 8]], false).is_err());
        assert!(matches!(
            FilterBank::from_responses(2, vec![vec![c(1.0, 0.0); 8], vec![c(1.0, 0.0); 6]], false),
            Err(Error::LengthMismatch { .. })
        ));
        let b = FilterBank::from_responses(2, vec![vec![c(1.0, 0.0); 8]], false).unwrap();
        assert_eq!(b.frames(), 4);
    }

    #[test]
    fn identifiers_depend_on_content() {
        let a = FilterBank::from_responses(2, vec![vec![c(1.0, 0.0); 8]], false).unwrap();
        let b = FilterBank::from_responses(2, vec![vec![c(1.0, 1e-9); 8]], false).unwrap();
        assert_ne!(a.id(), b.id());
        let a2 = FilterBank::from_responses(2, vec![vec![c(1.0, 0.0); 8]], false).unwrap();
        assert_eq!(a.id(), a2.id());
    }
}
