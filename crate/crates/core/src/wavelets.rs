use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-power level on the magnitude response.
const HALF_POWER: f64 = 0.501_187_233_627_272_2; // 10^(-3/10)

/// Analytic mother wavelet, sup-normalized so the peak response is 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Wavelet {
    Cauchy { alpha: f64 },
    #[serde(rename = "bspline")]
    BSpline4 { xi_fm: f64 },
}

impl Wavelet {
    pub fn cauchy(alpha: f64) -> Result<Self> {
        let w = Wavelet::Cauchy { alpha };
        w.validate()?;
        Ok(w)
    }

    pub fn bspline(xi_fm: f64) -> Result<Self> {
        let w = Wavelet::BSpline4 { xi_fm };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Wavelet::Cauchy { alpha } if !(alpha > 1.0 && alpha.is_finite()) => Err(Error::param(
                format!("Cauchy alpha must be a finite value > 1, got {alpha}"),
            )),
            Wavelet::BSpline4 { xi_fm } if !(xi_fm > 0.0 && xi_fm.is_finite()) => Err(
                Error::param(format!("B-spline xi_fm must be a finite value > 0, got {xi_fm}")),
            ),
            _ => Ok(()),
        }
    }

    /// Family code used in coefficient file headers.
    pub fn family_code(&self) -> u8 {
        match self {
            Wavelet::Cauchy { .. } => 0,
            Wavelet::BSpline4 { .. } => 1,
        }
    }

    pub fn hyperparameter(&self) -> f64 {
        match *self {
            Wavelet::Cauchy { alpha } => alpha,
            Wavelet::BSpline4 { xi_fm } => xi_fm,
        }
    }

    pub fn from_code(code: u8, hyper: f64) -> Result<Self> {
        match code {
            0 => Wavelet::cauchy(hyper),
            1 => Wavelet::bspline(hyper),
            _ => Err(Error::param(format!("unknown wavelet family code {code}"))),
        }
    }

    pub fn peak_frequency(&self) -> f64 {
        match *self {
            Wavelet::Cauchy { alpha } => (alpha - 1.0) / (4.0 * PI),
            Wavelet::BSpline4 { xi_fm } => xi_fm,
        }
    }

    /// Frequency response at `xi` (cycles per unit time); zero for `xi <= 0`.
    pub fn response(&self, xi: f64) -> f64 {
        if !(xi > 0.0) {
            return 0.0;
        }
        match *self {
            Wavelet::Cauchy { alpha } => {
                // (x^beta e^{-beta x}) / e^{-beta}, x = xi / xi_pk, beta = (alpha-1)/2
                let beta = 0.5 * (alpha - 1.0);
                let x = xi / self.peak_frequency();
                (beta * (x.ln() - x + 1.0)).exp()
            }
            Wavelet::BSpline4 { xi_fm } => {
                let u = PI * (xi - xi_fm);
                let s = if u.abs() < 1e-4 {
                    let u2 = u * u;
                    1.0 - u2 / 6.0 + u2 * u2 / 120.0
                } else {
                    u.sin() / u
                };
                let s2 = s * s;
                s2 * s2
            }
        }
    }

    /// Center frequency over the bandwidth between the half-power points.
    pub fn q_factor(&self) -> Result<f64> {
        self.validate()?;
        let pk = self.peak_frequency();
        let below = |xi: f64| self.response(xi) < HALF_POWER;

        // Walk outward from the peak with growing steps until the level is crossed.
        let mut step = 1e-3 * pk;
        let mut inner = pk;
        let mut hi = pk + step;
        while !below(hi) {
            inner = hi;
            step *= 2.0;
            hi = pk + step;
            if !hi.is_finite() || step > 1e6 * pk {
                return Err(Error::Bracket);
            }
        }
        let xi_hi = bisect(&below, inner, hi);

        let mut step = 1e-3 * pk;
        let mut inner = pk;
        let mut lo = pk - step;
        while !below(lo) {
            inner = lo;
            step *= 2.0;
            lo = pk - step;
            if lo <= 0.0 {
                lo = 0.0;
                if !below(lo) {
                    return Err(Error::Bracket);
                }
                break;
            }
        }
        let xi_lo = bisect(&below, inner, lo);
        Ok(pk / (xi_hi - xi_lo))
    }

    /// Interval of `xi` outside of which the response stays below `tol`.
    pub fn support(&self, tol: f64) -> (f64, f64) {
        match *self {
            Wavelet::Cauchy { alpha } => {
                let beta = 0.5 * (alpha - 1.0);
                let target = tol.ln() / beta;
                // g(x) = ln x - x + 1 has its maximum 0 at x = 1.
                let g = |x: f64| x.ln() - x + 1.0;
                let pk = self.peak_frequency();
                let lo = bisect(&|x| g(x) < target, 1.0, 0.0);
                let mut far = 2.0;
                while g(far) >= target {
                    far *= 2.0;
                }
                let hi = bisect(&|x| g(x) < target, 1.0, far);
                (lo * pk, hi * pk)
            }
            Wavelet::BSpline4 { xi_fm } => {
                let r = tol.powf(-0.25) / PI;
                ((xi_fm - r).max(0.0), xi_fm + r)
            }
        }
    }
}

/// Boundary between `inside` (predicate false) and `outside` (predicate true).
fn bisect(outside_pred: &impl Fn(f64) -> bool, mut inside: f64, mut outside: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if (outside - inside).abs() <= 1e-13 * mid.abs() || mid == inside || mid == outside {
            break;
        }
        if outside_pred(mid) {
            outside = mid;
        } else {
            inside = mid;
        }
    }
    0.5 * (inside + outside)
}

impl fmt::Display for Wavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Wavelet::Cauchy { alpha } => write!(f, "cauchy:{alpha}"),
            Wavelet::BSpline4 { xi_fm } => write!(f, "bspline:{xi_fm}"),
        }
    }
}

impl FromStr for Wavelet {
    type Err = Error;

    /// `cauchy:ALPHA` or `bspline:XIFM`.
    fn from_str(s: &str) -> Result<Self> {
        let (family, value) = s
            .split_once(':')
            .ok_or_else(|| Error::param(format!("expected FAMILY:VALUE, got '{s}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::param(format!("bad wavelet parameter '{value}'")))?;
        match family.trim().to_ascii_lowercase().as_str() {
            "cauchy" => Wavelet::cauchy(value),
            "bspline" => Wavelet::bspline(value),
            other => Err(Error::param(format!(
                "unknown wavelet family '{other}' (expected cauchy or bspline)"
            ))),
        }
    }
}
