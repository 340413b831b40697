use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bank::{ChannelResponse, FilterBank, Fnv};
use crate::error::{Error, Result};

/// `A / B` below this is treated as a singular frame operator.
pub const SINGULAR_RATIO: f64 = 1e-12;

/// Dual responses below this fraction of their peak are dropped.
const DUAL_TOL: f64 = 1e-15;

/// Largest length accepted by [`brute_force_bounds`].
pub const BRUTE_FORCE_MAX_LEN: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameDiagnostics {
    /// Optimal lower frame bound `A`.
    pub lower: f64,
    /// Optimal upper frame bound `B`.
    pub upper: f64,
    /// `B / A`.
    pub ratio: f64,
    pub argmin_bin: usize,
    pub argmax_bin: usize,
}

impl FrameDiagnostics {
    pub fn invertible(&self) -> bool {
        self.lower > SINGULAR_RATIO * self.upper
    }

    fn check_invertible(&self) -> Result<()> {
        if self.invertible() {
            Ok(())
        } else {
            Err(Error::NotInvertible {
                lower: self.lower,
                upper: self.upper,
                bin: self.argmin_bin,
            })
        }
    }
}

/// The `N` Hermitian `d × d` blocks of the frame operator in the DFT domain,
/// each stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBlocks {
    pub d: usize,
    pub blocks: Vec<Vec<Complex64>>,
}

impl FrameBlocks {
    pub fn get(&self, k: usize, m: usize, mp: usize) -> Complex64 {
        self.blocks[k][m * self.d + mp]
    }
}

/// Channel values regrouped by bin class `k mod N`.
struct Classes {
    d: usize,
    /// Per class: (channel, alias index m, value), grouped by channel.
    entries: Vec<Vec<(u32, u32, Complex64)>>,
}

impl Classes {
    fn new(bank: &FilterBank) -> Self {
        let n = bank.frames();
        let mut entries = vec![Vec::new(); n];
        for (j, ch) in bank.channels().iter().enumerate() {
            ch.for_each(bank.len(), |k, g| {
                if g != Complex64::new(0.0, 0.0) {
                    entries[k % n].push((j as u32, (k / n) as u32, g));
                }
            });
        }
        Classes {
            d: bank.decimation(),
            entries,
        }
    }

    /// `Φ(k)[m][m'] = (1/d) Σ_j G_j[k + mN] conj(G_j[k + m'N])`, column-major.
    /// With `lower_only` the strict upper triangle is left at zero.
    fn fill(&self, k: usize, phi: &mut [Complex64], lower_only: bool) {
        let d = self.d;
        phi.fill(Complex64::new(0.0, 0.0));
        let kappa = 1.0 / d as f64;
        let list = &self.entries[k];
        let mut a = 0;
        while a < list.len() {
            let ch = list[a].0;
            let mut b = a;
            while b < list.len() && list[b].0 == ch {
                b += 1;
            }
            let group = &list[a..b];
            for q in group {
                let cq = q.2.conj() * kappa;
                let col = &mut phi[q.1 as usize * d..(q.1 as usize + 1) * d];
                for p in group {
                    if !lower_only || p.1 >= q.1 {
                        col[p.1 as usize] += p.2 * cq;
                    }
                }
            }
            a = b;
        }
    }
}

fn as_mat(buf: &[Complex64], d: usize) -> MatRef<'_, Complex64> {
    MatRef::from_column_major_slice(buf, d, d)
}

/// Bank whose complex-signal frame operator governs `bank`: the bank itself,
/// or its two-sided extension in real mode.
fn operator_bank(bank: &FilterBank) -> FilterBank {
    if bank.real_mode() {
        bank.real_extend()
    } else {
        bank.clone()
    }
}

pub fn frame_blocks(bank: impl AsRef<FilterBank>) -> FrameBlocks {
    let bank = bank.as_ref();
    let classes = Classes::new(bank);
    let d = bank.decimation();
    let mut phi = vec![Complex64::new(0.0, 0.0); d * d];
    let blocks = (0..bank.frames())
        .map(|k| {
            classes.fill(k, &mut phi, false);
            let mut out = Vec::with_capacity(d * d);
            for i in 0..d {
                for j in 0..d {
                    out.push(phi[j * d + i]);
                }
            }
            out
        })
        .collect();
    FrameBlocks { d, blocks }
}

fn block_extremes(classes: &Classes, ks: &[usize]) -> FrameDiagnostics {
    let d = classes.d;
    let (lo, hi) = ks
        .par_iter()
        .map_init(
            || vec![Complex64::new(0.0, 0.0); d * d],
            |phi, &k| {
                classes.fill(k, phi, true);
                let ev = as_mat(phi, d)
                    .self_adjoint_eigenvalues(Side::Lower)
                    .expect("Hermitian eigensolver failed to converge");
                ((ev[0], k), (ev[d - 1], k))
            },
        )
        .reduce(
            || ((f64::INFINITY, usize::MAX), (f64::NEG_INFINITY, usize::MAX)),
            |a, b| {
                let lo = if b.0 .0 < a.0 .0 || (b.0 .0 == a.0 .0 && b.0 .1 < a.0 .1) { b.0 } else { a.0 };
                let hi = if b.1 .0 > a.1 .0 || (b.1 .0 == a.1 .0 && b.1 .1 < a.1 .1) { b.1 } else { a.1 };
                (lo, hi)
            },
        );
    let lower = lo.0.max(0.0);
    FrameDiagnostics {
        lower,
        upper: hi.0,
        ratio: hi.0 / lower,
        argmin_bin: lo.1,
        argmax_bin: hi.1,
    }
}

/// Optimal frame bounds via per-block Hermitian eigenvalues. Real-mode banks
/// are measured on their two-sided extension.
pub fn frame_bounds(bank: impl AsRef<FilterBank>) -> FrameDiagnostics {
    let bank = bank.as_ref();
    let op = operator_bank(bank);
    let classes = Classes::new(&op);
    let n = op.frames();
    // The extension is conjugation symmetric: Φ(N - k) has the spectrum of Φ(k).
    let ks: Vec<usize> = if bank.real_mode() {
        (0..=n / 2).collect()
    } else {
        (0..n).collect()
    };
    block_extremes(&classes, &ks)
}

/// Canonical dual bank, `G̃ = Φ(k)⁻¹ G` on every bin class.
pub fn dual_design(bank: impl AsRef<FilterBank>) -> Result<FilterBank> {
    dual_with_bounds(bank).map(|(dual, _)| dual)
}

pub fn dual_with_bounds(bank: impl AsRef<FilterBank>) -> Result<(FilterBank, FrameDiagnostics)> {
    let bank = bank.as_ref();
    let diag = frame_bounds(bank);
    diag.check_invertible()?;

    let op = operator_bank(bank);
    let classes = Classes::new(&op);
    let len = bank.len();
    let n = bank.frames();
    let d = bank.decimation();
    let wanted = bank.num_channels() as u32;
    let mut dense = vec![vec![Complex64::new(0.0, 0.0); len]; bank.num_channels()];

    const BATCH: usize = 64;
    let ks: Vec<usize> = (0..n).collect();
    for batch in ks.chunks(BATCH) {
        let solved: Vec<Result<(usize, Vec<u32>, Mat<Complex64>)>> = batch
            .par_iter()
            .map_init(
                || vec![Complex64::new(0.0, 0.0); d * d],
                |phi, &k| {
                    classes.fill(k, phi, true);
                    let mut chans: Vec<u32> = classes.entries[k]
                        .iter()
                        .map(|e| e.0)
                        .filter(|&j| j < wanted)
                        .collect();
                    chans.dedup();
                    let mut rhs = Mat::<Complex64>::zeros(d, chans.len());
                    let mut col = 0;
                    let mut last = None;
                    for e in classes.entries[k].iter().filter(|e| e.0 < wanted) {
                        if last.is_some() && last != Some(e.0) {
                            col += 1;
                        }
                        last = Some(e.0);
                        rhs[(e.1 as usize, col)] = e.2;
                    }
                    let llt = as_mat(phi, d).llt(Side::Lower).map_err(|_| Error::NotInvertible {
                        lower: diag.lower,
                        upper: diag.upper,
                        bin: k,
                    })?;
                    llt.solve_in_place(rhs.as_mut());
                    Ok((k, chans, rhs))
                },
            )
            .collect();
        for item in solved {
            let (k, chans, sol) = item?;
            for (c, &j) in chans.iter().enumerate() {
                let row = &mut dense[j as usize];
                for m in 0..d {
                    row[k + m * n] = sol[(m, c)];
                }
            }
        }
    }

    let channels: Vec<ChannelResponse> = dense
        .into_par_iter()
        .map(|r| ChannelResponse::compact(&r, DUAL_TOL))
        .collect();
    let mut h = Fnv::new();
    h.write_u64(bank.id());
    h.write_str("dual");
    let dual = FilterBank::from_parts(len, d, channels, bank.real_mode(), h.finish(), Some(bank.id()));
    Ok((dual, diag))
}

/// Extreme eigenvalues of the explicitly assembled `L × L` frame operator.
pub fn brute_force_bounds(bank: impl AsRef<FilterBank>) -> Result<(f64, f64)> {
    let bank = bank.as_ref();
    let len = bank.len();
    if len > BRUTE_FORCE_MAX_LEN {
        return Err(Error::TooLarge(format!(
            "signal length {len} exceeds {BRUTE_FORCE_MAX_LEN}"
        )));
    }
    let op = operator_bank(bank);
    let d = op.decimation();
    let lf = len as f64;
    let mut s = Mat::<Complex64>::zeros(len, len);
    let twiddle: Vec<Complex64> = (0..len)
        .map(|t| Complex64::from_polar(1.0, 2.0 * PI * t as f64 / lf))
        .collect();
    for j in 0..op.num_channels() {
        let gh = op.response_dense(j);
        // Time-domain atom by a direct inverse DFT.
        let g: Vec<Complex64> = (0..len)
            .map(|t| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, &v) in gh.iter().enumerate() {
                    acc += v * twiddle[(k * t) % len];
                }
                acc / lf
            })
            .collect();
        for l in 0..op.frames() {
            let shift = d * l;
            for a in 0..len {
                let ga = g[(a + len - shift) % len];
                if ga == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for b in 0..len {
                    s[(a, b)] += ga * g[(b + len - shift) % len].conj();
                }
            }
        }
    }
    let ev = s
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::TooLarge("eigensolver did not converge".into()))?;
    Ok((ev[0].max(0.0), ev[len - 1]))
}
