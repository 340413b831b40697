//! One-dimensional low-discrepancy sequences used as per-channel delays.
//!
//! Two families are provided: Kronecker sequences `({αl})` and digital
//! (0,1)-sequences in base 2 built from a generator matrix over Z2. A third
//! kind, [`DelayKind::Zero`], yields the undelayed rectangular grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bits of precision carried by the digital method (one `f64` mantissa).
pub const DIGITAL_BITS: usize = 53;

// Tail of (3 - sqrt 5)/2 below the nearest f64, so golden Kronecker points
// stay accurate for large indices.
const GOLDEN_ALPHA_LO: f64 = -1.189_999_194_432_768_2e-18;

/// `1 - 1/φ = (3 - √5)/2`, the Kronecker parameter equivalent to the golden ratio.
pub fn golden_alpha() -> f64 {
    // 2/(3 + √5) avoids the cancellation in 3 - √5.
    2.0 / (3.0 + 5f64.sqrt())
}

/// Generator matrix over Z2, stored column by column.
///
/// Column `k` is a bit mask whose bit `DIGITAL_BITS - 1 - r` holds entry
/// `c_{r+1,k+1}`, so XOR-ing columns directly produces the binary expansion
/// of the output point.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    columns: Vec<u64>,
}

impl GeneratorMatrix {
    /// Lower bidiagonal matrix: row 1 holds a single one in column 1, every
    /// later row `r` has ones in columns `r-1` and `r`.
    pub fn bidiagonal() -> Self {
        let columns = (0..DIGITAL_BITS)
            .map(|k| {
                let mut col = row_bit(k);
                if k + 1 < DIGITAL_BITS {
                    col |= row_bit(k + 1);
                }
                col
            })
            .collect();
        Self { columns }
    }

    /// Identity matrix; the resulting sequence is van der Corput's.
    pub fn identity() -> Self {
        Self {
            columns: (0..DIGITAL_BITS).map(row_bit).collect(),
        }
    }

    /// Build from explicit column masks (bit `52 - r` is row `r`).
    pub fn from_columns(columns: Vec<u64>) -> Result<Self> {
        if columns.is_empty() || columns.len() > DIGITAL_BITS {
            return Err(Error::param(format!(
                "generator matrix needs 1..={DIGITAL_BITS} columns, got {}",
                columns.len()
            )));
        }
        let mask = (1u64 << DIGITAL_BITS) - 1;
        if columns.iter().any(|c| c & !mask != 0) {
            return Err(Error::param("generator column has bits beyond row 53"));
        }
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[u64] {
        &self.columns
    }

    /// Entry `c_{r+1,k+1}` (zero-based row and column).
    pub fn entry(&self, row: usize, col: usize) -> bool {
        row < DIGITAL_BITS && self.columns.get(col).is_some_and(|c| c & row_bit(row) != 0)
    }

    /// Whether the upper-left `m × m` submatrix is non-singular over Z2.
    pub fn leading_nonsingular(&self, m: usize) -> bool {
        if m == 0 {
            return true;
        }
        if m > self.columns.len() {
            return false;
        }
        // Keep the top m rows of the first m columns and eliminate.
        let keep = ((1u64 << m) - 1) << (DIGITAL_BITS - m);
        let mut basis: Vec<u64> = Vec::with_capacity(m);
        for &col in &self.columns[..m] {
            let mut v = col & keep;
            for &b in &basis {
                let lead = 63 - b.leading_zeros();
                if v >> lead & 1 == 1 {
                    v ^= b;
                }
            }
            if v == 0 {
                return false;
            }
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
        true
    }
}

impl fmt::Debug for GeneratorMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::bidiagonal() {
            f.write_str("GeneratorMatrix::bidiagonal")
        } else if *self == Self::identity() {
            f.write_str("GeneratorMatrix::identity")
        } else {
            f.debug_struct("GeneratorMatrix")
                .field("columns", &self.columns)
                .finish()
        }
    }
}

fn row_bit(row: usize) -> u64 {
    1u64 << (DIGITAL_BITS - 1 - row)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DelayKind {
    Kronecker { alpha: f64 },
    Digital01(GeneratorMatrix),
    Zero,
}

impl DelayKind {
    pub fn tag(&self) -> DelayTag {
        match self {
            DelayKind::Kronecker { .. } => DelayTag::Kronecker,
            DelayKind::Digital01(_) => DelayTag::Digital,
            DelayKind::Zero => DelayTag::Zero,
        }
    }
}

/// Sequence selector as exposed on the command line and in file headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayTag {
    Kronecker,
    Digital,
    Zero,
}

impl DelayTag {
    /// Golden Kronecker, the bidiagonal digital sequence, or all zeros.
    pub fn kind(self) -> DelayKind {
        match self {
            DelayTag::Kronecker => DelayKind::Kronecker {
                alpha: golden_alpha(),
            },
            DelayTag::Digital => DelayKind::Digital01(GeneratorMatrix::bidiagonal()),
            DelayTag::Zero => DelayKind::Zero,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            DelayTag::Zero => 0,
            DelayTag::Kronecker => 1,
            DelayTag::Digital => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DelayTag::Zero),
            1 => Some(DelayTag::Kronecker),
            2 => Some(DelayTag::Digital),
            _ => None,
        }
    }
}

impl fmt::Display for DelayTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DelayTag::Kronecker => "kronecker",
            DelayTag::Digital => "digital",
            DelayTag::Zero => "zero",
        })
    }
}

impl FromStr for DelayTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kronecker" => Ok(DelayTag::Kronecker),
            "digital" => Ok(DelayTag::Digital),
            "zero" => Ok(DelayTag::Zero),
            other => Err(Error::param(format!(
                "unknown delay sequence '{other}' (expected kronecker, digital or zero)"
            ))),
        }
    }
}

/// Delays `δ_j ∈ [0, 1)` together with the rule that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySequence {
    kind: DelayKind,
    elements: Vec<f64>,
}

impl DelaySequence {
    pub fn generate(kind: &DelayKind, n: usize) -> Result<Self> {
        match kind {
            DelayKind::Kronecker { alpha } => kronecker_seq(*alpha, n),
            DelayKind::Digital01(c) => digital_seq(c, n),
            DelayKind::Zero => zero_seq(n),
        }
    }

    pub fn kind(&self) -> &DelayKind {
        &self.kind
    }

    pub fn elements(&self) -> &[f64] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// `elements[l] = {α l}` for `l = 0..n`.
pub fn kronecker_seq(alpha: f64, n: usize) -> Result<DelaySequence> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("Kronecker alpha must lie in (0,1), got {alpha}")));
    }
    if n == 0 {
        return Err(Error::param("sequence length must be positive"));
    }
    let tail = if alpha.to_bits() == golden_alpha().to_bits() {
        GOLDEN_ALPHA_LO
    } else {
        0.0
    };
    let elements = (0..n)
        .map(|l| {
            let l = l as f64;
            // l * alpha = p + e exactly; the fractional part of p is exact.
            let p = l * alpha;
            let e = l.mul_add(alpha, -p);
            let mut x = (p - p.floor()) + (e + l * tail);
            if x >= 1.0 {
                x -= 1.0;
            } else if x < 0.0 {
                x += 1.0;
            }
            if x >= 1.0 {
                x = 0.0;
            }
            x
        })
        .collect();
    Ok(DelaySequence {
        kind: DelayKind::Kronecker { alpha },
        elements,
    })
}

/// Digital (0,1)-sequence in base 2 for generator matrix `matrix`.
pub fn digital_seq(matrix: &GeneratorMatrix, n: usize) -> Result<DelaySequence> {
    if n == 0 {
        return Err(Error::param("sequence length must be positive"));
    }
    let bits = usize::BITS as usize - (n - 1).leading_zeros() as usize;
    if bits > matrix.columns().len() {
        return Err(Error::param(format!(
            "{n} points need {bits} generator columns, matrix has {}",
            matrix.columns().len()
        )));
    }
    if !matrix.leading_nonsingular(bits) {
        return Err(Error::SingularGenerator(bits));
    }
    let scale = (DIGITAL_BITS as f64).exp2().recip();
    let elements = (0..n as u64)
        .map(|l| {
            let mut acc = 0u64;
            let mut rest = l;
            let mut k = 0;
            while rest != 0 {
                if rest & 1 == 1 {
                    acc ^= matrix.columns()[k];
                }
                rest >>= 1;
                k += 1;
            }
            acc as f64 * scale
        })
        .collect();
    Ok(DelaySequence {
        kind: DelayKind::Digital01(matrix.clone()),
        elements,
    })
}

pub fn zero_seq(n: usize) -> Result<DelaySequence> {
    if n == 0 {
        return Err(Error::param("sequence length must be positive"));
    }
    Ok(DelaySequence {
        kind: DelayKind::Zero,
        elements: vec![0.0; n],
    })
}

/// True iff every block of `2^m` consecutive points puts exactly one point in
/// each elementary interval `[k/2^m, (k+1)/2^m)`.
pub fn check_elementary_intervals(seq: &DelaySequence, m: u32) -> Result<bool> {
    let block = 1usize
        .checked_shl(m)
        .filter(|&b| b <= seq.len())
        .ok_or_else(|| Error::param(format!("2^{m} exceeds the sequence length {}", seq.len())))?;
    if seq.len() % block != 0 {
        return Err(Error::param(format!(
            "sequence length {} is not a multiple of 2^{m}",
            seq.len()
        )));
    }
    let scale = block as f64;
    let mut seen = vec![false; block];
    for chunk in seq.elements().chunks(block) {
        seen.iter_mut().for_each(|s| *s = false);
        for &x in chunk {
            let cell = ((x * scale).floor() as usize).min(block - 1);
            if std::mem::replace(&mut seen[cell], true) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    // sqrt(5) * 10^18 by integer Newton iteration; alpha * 10^18 = (3e18 - that) / 2.
    fn golden_alpha_scaled() -> u128 {
        let target: u128 = 5 * 10u128.pow(36);
        let mut x: u128 = 3 * 10u128.pow(18);
        loop {
            let y = (x + target / x) / 2;
            if y >= x {
                break;
            }
            x = y;
        }
        (3 * 10u128.pow(18) - x) / 2
    }

    fn frac_oracle(l: u128) -> f64 {
        let scale = 10u128.pow(18);
        ((golden_alpha_scaled() * l) % scale) as f64 / scale as f64
    }

    #[test]
    fn golden_alpha_value() {
        assert!((golden_alpha() - frac_oracle(1)).abs() < 1e-16);
        assert!((golden_alpha() - 0.381_966_011_250_105_1).abs() < 1e-16);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((golden_alpha() + 1.0 / phi - 1.0).abs() < 1e-15);
    }

    #[test]
    fn golden_alpha_partial_quotients_are_small() {
        // Continued fraction of the 18-digit rational oracle; exact while the
        // convergent denominators stay below ~1e9.
        let (mut num, mut den) = (golden_alpha_scaled(), 10u128.pow(18));
        let mut quotients = Vec::new();
        for _ in 0..31 {
            if num == 0 {
                break;
            }
            quotients.push(den / num);
            let r = den % num;
            den = num;
            num = r;
        }
        assert_eq!(quotients[0], 2);
        assert!(quotients[..30].iter().all(|&q| q <= 2), "{quotients:?}");
    }

    #[test]
    fn kronecker_first_points() {
        let s = kronecker_seq(golden_alpha(), 4).unwrap();
        let expect = [0.0, 0.381_966_011_250_105_15, 0.763_932_022_500_210_3, 0.145_898_033_750_315_46];
        for (x, e) in s.elements().iter().zip(expect) {
            assert!((x - e).abs() < 1e-15, "{x} vs {e}");
        }
        assert_eq!(kronecker_seq(0.5, 3).unwrap().elements(), &[0.0, 0.5, 0.0]);
        assert_eq!(kronecker_seq(golden_alpha(), 1).unwrap().elements(), &[0.0]);
    }

    #[test]
    fn kronecker_matches_high_precision_far_out() {
        let s = kronecker_seq(golden_alpha(), 100_000).unwrap();
        for l in [0usize, 1, 2, 3, 17, 999, 12_345, 65_536, 99_999] {
            let d = (s.elements()[l] - frac_oracle(l as u128)).abs();
            assert!(d < 1e-12, "l={l}: off by {d}");
        }
    }

    #[test]
    fn kronecker_points_are_distinct() {
        let s = kronecker_seq(golden_alpha(), 100_000).unwrap();
        let mut v = s.elements().to_vec();
        v.sort_by(f64::total_cmp);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert!(v.iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn kronecker_rejects_bad_input() {
        assert!(kronecker_seq(0.0, 4).is_err());
        assert!(kronecker_seq(1.0, 4).is_err());
        assert!(kronecker_seq(-0.3, 4).is_err());
        assert!(kronecker_seq(0.3, 0).is_err());
    }

    #[test]
    fn bidiagonal_matrix_entries() {
        let c = GeneratorMatrix::bidiagonal();
        assert!(c.entry(0, 0) && !c.entry(0, 1));
        assert!(c.entry(1, 0) && c.entry(1, 1) && !c.entry(1, 2));
        assert!(c.entry(2, 1) && c.entry(2, 2) && !c.entry(2, 0));
        for m in 1..=DIGITAL_BITS {
            assert!(c.leading_nonsingular(m));
        }
    }

    #[test]
    fn digital_first_points() {
        let c = GeneratorMatrix::bidiagonal();
        assert_eq!(digital_seq(&c, 4).unwrap().elements(), &[0.0, 0.75, 0.375, 0.625]);
        assert_eq!(digital_seq(&c, 1).unwrap().elements(), &[0.0]);
        let vdc = digital_seq(&GeneratorMatrix::identity(), 4).unwrap();
        assert_eq!(vdc.elements(), &[0.0, 0.5, 0.25, 0.75]);
    }

    #[test]
    fn van_der_corput_is_bit_reversal() {
        let n = 1 << 10;
        let s = digital_seq(&GeneratorMatrix::identity(), n).unwrap();
        for (l, &x) in s.elements().iter().enumerate() {
            let rev = (l as u32).reverse_bits() >> 22;
            assert_eq!(x, rev as f64 / n as f64);
        }
    }

    #[test]
    fn singular_generator_is_rejected() {
        let mut cols = GeneratorMatrix::identity().columns().to_vec();
        cols[1] = cols[0];
        let c = GeneratorMatrix::from_columns(cols).unwrap();
        assert!(c.leading_nonsingular(1));
        assert!(!c.leading_nonsingular(2));
        assert!(matches!(digital_seq(&c, 4), Err(Error::SingularGenerator(2))));
        assert!(digital_seq(&c, 2).is_ok());
    }

    #[test]
    fn elementary_intervals() {
        let c = GeneratorMatrix::bidiagonal();
        for m in 0..=8u32 {
            let s = digital_seq(&c, (1usize << m) * 4).unwrap();
            for mm in 0..=m {
                assert!(check_elementary_intervals(&s, mm).unwrap(), "m={m} mm={mm}");
            }
        }
        let k = kronecker_seq(golden_alpha(), 4).unwrap();
        assert!(!check_elementary_intervals(&k, 2).unwrap());
        assert!(check_elementary_intervals(&k, 0).unwrap());
        assert!(check_elementary_intervals(&k, 3).is_err());
        let six = kronecker_seq(golden_alpha(), 6).unwrap();
        assert!(check_elementary_intervals(&six, 2).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        for tag in [DelayTag::Kronecker, DelayTag::Digital, DelayTag::Zero] {
            let a = DelaySequence::generate(&tag.kind(), 777).unwrap();
            let b = DelaySequence::generate(&tag.kind(), 777).unwrap();
            let bits = |s: &DelaySequence| s.elements().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
            assert_eq!(a.elements()[0], 0.0);
        }
    }

    #[test]
    fn tags_round_trip() {
        for tag in [DelayTag::Kronecker, DelayTag::Digital, DelayTag::Zero] {
            assert_eq!(tag.to_string().parse::<DelayTag>().unwrap(), tag);
            assert_eq!(DelayTag::from_code(tag.code()), Some(tag));
        }
        assert!("sobol".parse::<DelayTag>().is_err());
    }
}
