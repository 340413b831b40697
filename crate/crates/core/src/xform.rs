use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::bank::FilterBank;
use crate::error::{Error, Result};

/// Channel-major coefficient matrix: `channels` rows of `frames` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefMatrix {
    data: Vec<Complex64>,
    channels: usize,
    frames: usize,
    decimation: usize,
    design_id: u64,
    real_mode: bool,
}

impl CoefMatrix {
    pub fn from_parts(
        data: Vec<Complex64>,
        channels: usize,
        frames: usize,
        decimation: usize,
        design_id: u64,
        real_mode: bool,
    ) -> Result<Self> {
        if data.len() != channels * frames {
            return Err(Error::LengthMismatch {
                expected: channels * frames,
                actual: data.len(),
            });
        }
        Ok(CoefMatrix {
            data,
            channels,
            frames,
            decimation,
            design_id,
            real_mode,
        })
    }

    /// All-zero coefficients shaped for `bank`.
    pub fn zeros(bank: &FilterBank) -> Self {
        CoefMatrix {
            data: vec![Complex64::new(0.0, 0.0); bank.num_channels() * bank.frames()],
            channels: bank.num_channels(),
            frames: bank.frames(),
            decimation: bank.decimation(),
            design_id: bank.id(),
            real_mode: bank.real_mode(),
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn decimation(&self) -> usize {
        self.decimation
    }

    pub fn design_id(&self) -> u64 {
        self.design_id
    }

    pub fn real_mode(&self) -> bool {
        self.real_mode
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn row(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.frames..(j + 1) * self.frames]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.data[j * self.frames..(j + 1) * self.frames]
    }

    pub fn get(&self, j: usize, l: usize) -> Complex64 {
        self.data[j * self.frames + l]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Same shape and provenance with new values.
    pub fn with_data(&self, data: Vec<Complex64>) -> Result<Self> {
        CoefMatrix::from_parts(
            data,
            self.channels,
            self.frames,
            self.decimation,
            self.design_id,
            self.real_mode,
        )
    }
}

/// FFT plans for one bank; reusable across many analyses and syntheses.
pub struct Transform<'a> {
    bank: &'a FilterBank,
    fwd_l: Arc<dyn Fft<f64>>,
    inv_l: Arc<dyn Fft<f64>>,
    fwd_n: Arc<dyn Fft<f64>>,
    inv_n: Arc<dyn Fft<f64>>,
}

impl<'a> Transform<'a> {
    pub fn new(bank: &'a FilterBank) -> Self {
        let mut planner = FftPlanner::new();
        Transform {
            bank,
            fwd_l: planner.plan_fft_forward(bank.len()),
            inv_l: planner.plan_fft_inverse(bank.len()),
            fwd_n: planner.plan_fft_forward(bank.frames()),
            inv_n: planner.plan_fft_inverse(bank.frames()),
        }
    }

    pub fn bank(&self) -> &FilterBank {
        self.bank
    }

    pub fn analyze(&self, signal: &[f64]) -> Result<CoefMatrix> {
        self.check_len(signal.len())?;
        if let Some(i) = signal.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let mut spec: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fwd_l.process(&mut spec);
        Ok(self.analyze_spectrum(&spec))
    }

    pub fn analyze_complex(&self, signal: &[Complex64]) -> Result<CoefMatrix> {
        self.check_len(signal.len())?;
        if let Some(i) = signal
            .iter()
            .position(|x| !(x.re.is_finite() && x.im.is_finite()))
        {
            return Err(Error::NonFinite(i));
        }
        let mut spec = signal.to_vec();
        self.fwd_l.process(&mut spec);
        Ok(self.analyze_spectrum(&spec))
    }

    /// `c_j[l] = (1/L) Σ_k F[k] conj(G_j[k]) e^{2πi k d l / L}`, with the sum
    /// folded onto `N` bins before a length-`N` inverse DFT.
    fn analyze_spectrum(&self, spec: &[Complex64]) -> CoefMatrix {
        let bank = self.bank;
        let n = bank.frames();
        let len = bank.len();
        let scale = 1.0 / len as f64;
        let mut out = CoefMatrix::zeros(bank);
        out.data
            .par_chunks_mut(n)
            .zip(bank.channels().par_iter())
            .for_each_init(
                || vec![Complex64::new(0.0, 0.0); self.inv_n.get_inplace_scratch_len()],
                |scratch, (row, ch)| {
                    ch.for_each(len, |k, g| row[k % n] += spec[k] * g.conj());
                    self.inv_n.process_with_scratch(row, scratch);
                    for c in row.iter_mut() {
                        *c *= scale;
                    }
                },
            );
        out
    }

    /// `f = Σ_j Σ_l c_j[l] g_j[· − d l]`; real-mode banks return `2 Re(·)`
    /// with a zero imaginary part.
    pub fn synthesize(&self, coefs: &CoefMatrix) -> Result<Vec<Complex64>> {
        let bank = self.bank;
        if coefs.channels != bank.num_channels() {
            return Err(Error::LengthMismatch {
                expected: bank.num_channels(),
                actual: coefs.channels,
            });
        }
        if coefs.frames != bank.frames() {
            return Err(Error::LengthMismatch {
                expected: bank.frames(),
                actual: coefs.frames,
            });
        }
        if coefs.decimation != bank.decimation()
            || (coefs.design_id != bank.id() && Some(coefs.design_id) != bank.dual_of())
        {
            return Err(Error::DesignMismatch);
        }
        let n = bank.frames();
        let len = bank.len();
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        let mut row = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fwd_n.get_inplace_scratch_len()];
        for (j, ch) in bank.channels().iter().enumerate() {
            row.copy_from_slice(coefs.row(j));
            self.fwd_n.process_with_scratch(&mut row, &mut scratch);
            ch.for_each(len, |k, g| acc[k] += g * row[k % n]);
        }
        self.inv_l.process(&mut acc);
        let scale = 1.0 / len as f64;
        if bank.real_mode() {
            for v in acc.iter_mut() {
                *v = Complex64::new(2.0 * v.re * scale, 0.0);
            }
        } else {
            for v in acc.iter_mut() {
                *v *= scale;
            }
        }
        Ok(acc)
    }

    /// Real part of [`Transform::synthesize`].
    pub fn synthesize_real(&self, coefs: &CoefMatrix) -> Result<Vec<f64>> {
        Ok(self.synthesize(coefs)?.into_iter().map(|v| v.re).collect())
    }

    fn check_len(&self, actual: usize) -> Result<()> {
        if actual != self.bank.len() {
            return Err(Error::LengthMismatch {
                expected: self.bank.len(),
                actual,
            });
        }
        Ok(())
    }
}

pub fn analyze(bank: impl AsRef<FilterBank>, signal: &[f64]) -> Result<CoefMatrix> {
    Transform::new(bank.as_ref()).analyze(signal)
}

pub fn analyze_complex(bank: impl AsRef<FilterBank>, signal: &[Complex64]) -> Result<CoefMatrix> {
    Transform::new(bank.as_ref()).analyze_complex(signal)
}

pub fn synthesize(bank: impl AsRef<FilterBank>, coefs: &CoefMatrix) -> Result<Vec<Complex64>> {
    Transform::new(bank.as_ref()).synthesize(coefs)
}

pub fn synthesize_real(bank: impl AsRef<FilterBank>, coefs: &CoefMatrix) -> Result<Vec<f64>> {
    Transform::new(bank.as_ref()).synthesize_real(coefs)
}
