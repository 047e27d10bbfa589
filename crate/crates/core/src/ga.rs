//! Clifford algebra kernel for small signatures.
//!
//! Multivectors are dense coefficient vectors indexed by blade bitmask: bit
//! `i` set means basis vector `i` is a factor of the blade, and blades are
//! always stored in ascending basis order. The product sign is obtained by
//! counting the transpositions needed to sort the concatenated factors,
//! times the metric square of every factor the two blades share.
//!
//! Basis ordering for a signature `(p, q, r)` is: the `r` null vectors
//! first, then the `p` vectors squaring to `+1`, then the `q` vectors
//! squaring to `-1`. For the two presets this gives
//!
//! * PGA `Cl(3,0,1)`: `e0, e1, e2, e3` with `e0² = 0`,
//! * CGA `Cl(4,1,0)`: `e1, e2, e3, e4, e5` with `e5² = -1`.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

/// Tolerance used by every "is normalized" / "has this shape" check.
pub const NORMALIZED_TOL: f64 = 1e-9;

const MAX_DIM: u8 = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaError {
    #[error("signature mismatch: {left} vs {right}")]
    SignatureMismatch { left: Signature, right: Signature },
    #[error("grade {grade} out of range 0..={max}")]
    GradeOutOfRange { grade: usize, max: usize },
    #[error("division by zero scalar")]
    DivisionByZero,
    #[error("coefficient vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("versor is not normalized (|m m~ - 1| = {deviation:e})")]
    NotNormalized { deviation: f64 },
    #[error("operation needs the PGA or CGA preset, got {0}")]
    UnsupportedAlgebra(Signature),
    #[error("signature {0} has more than {MAX_DIM} basis vectors")]
    TooLarge(Signature),
}

/// Metric signature `Cl(p, q, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature {
    pub p: u8,
    pub q: u8,
    pub r: u8,
}

impl Signature {
    pub const PGA: Signature = Signature { p: 3, q: 0, r: 1 };
    pub const CGA: Signature = Signature { p: 4, q: 1, r: 0 };

    pub fn new(p: u8, q: u8, r: u8) -> Result<Self, GaError> {
        let sig = Signature { p, q, r };
        if sig.dim() > MAX_DIM as usize {
            return Err(GaError::TooLarge(sig));
        }
        Ok(sig)
    }

    pub fn dim(&self) -> usize {
        (self.p + self.q + self.r) as usize
    }

    pub fn blade_count(&self) -> usize {
        1 << self.dim()
    }

    /// Square of basis vector `i` under the ordering documented at module level.
    pub fn square(&self, i: usize) -> f64 {
        let (r, p) = (self.r as usize, self.p as usize);
        if i < r {
            0.0
        } else if i < r + p {
            1.0
        } else {
            -1.0
        }
    }

    /// Human-readable name of basis vector `i`. Algebras with a null vector
    /// count from `e0`, the others from `e1`.
    pub fn basis_name(&self, i: usize) -> String {
        let offset = if self.r > 0 { 0 } else { 1 };
        format!("e{}", i + offset)
    }

    pub fn blade_name(&self, mask: usize) -> String {
        if mask == 0 {
            return "1".to_string();
        }
        let offset = if self.r > 0 { 0 } else { 1 };
        let digits: String = (0..self.dim())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| char::from_digit((i + offset) as u32, 10).unwrap_or('?'))
            .collect();
        format!("e{digits}")
    }

    /// Bitmask of the blade `e_{i} e_{j} ...` given basis indices in any order,
    /// together with the sign picked up by sorting them.
    pub fn blade_mask(&self, indices: &[usize]) -> (usize, f64) {
        let mut out = Multivector::scalar(*self, 1.0);
        for &i in indices {
            out = out.gp_unchecked(&Multivector::basis_vector(*self, i));
        }
        let (mask, coeff) = out
            .coeffs
            .iter()
            .enumerate()
            .find(|(_, c)| **c != 0.0)
            .map(|(m, c)| (m, *c))
            .unwrap_or((0, 0.0));
        (mask, coeff.signum())
    }

    fn is_pga(&self) -> bool {
        *self == Signature::PGA
    }

    fn is_cga(&self) -> bool {
        *self == Signature::CGA
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cl({},{},{})", self.p, self.q, self.r)
    }
}

/// Sign of `blade(a) * blade(b)` before the metric is applied.
fn reorder_sign(a: usize, b: usize) -> f64 {
    let mut a = a >> 1;
    let mut swaps = 0u32;
    while a != 0 {
        swaps += (a & b).count_ones();
        a >>= 1;
    }
    if swaps & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

struct CayleyTable {
    n: usize,
    // sign[a * n + b] for the product blade a ^ b
    sign: Vec<f64>,
}

impl CayleyTable {
    fn build(sig: Signature) -> Self {
        let n = sig.blade_count();
        let mut sign = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let mut s = reorder_sign(a, b);
                let common = a & b;
                for i in 0..sig.dim() {
                    if common & (1 << i) != 0 {
                        s *= sig.square(i);
                    }
                }
                sign[a * n + b] = s;
            }
        }
        CayleyTable { n, sign }
    }
}

fn cayley(sig: Signature) -> &'static CayleyTable {
    static TABLES: OnceLock<Mutex<HashMap<Signature, &'static CayleyTable>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = tables.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(sig)
        .or_insert_with(|| Box::leak(Box::new(CayleyTable::build(sig))))
}

/// A multivector over one of the supported signatures.
#[derive(Debug, Clone, PartialEq)]
pub struct Multivector {
    sig: Signature,
    coeffs: Vec<f64>,
}

impl Multivector {
    pub fn zero(sig: Signature) -> Self {
        Multivector {
            sig,
            coeffs: vec![0.0; sig.blade_count()],
        }
    }

    pub fn scalar(sig: Signature, s: f64) -> Self {
        let mut m = Self::zero(sig);
        m.coeffs[0] = s;
        m
    }

    /// Basis vector with index `i` (see module docs for ordering).
    pub fn basis_vector(sig: Signature, i: usize) -> Self {
        Self::blade(sig, 1 << i, 1.0)
    }

    pub fn blade(sig: Signature, mask: usize, coeff: f64) -> Self {
        let mut m = Self::zero(sig);
        m.coeffs[mask] = coeff;
        m
    }

    pub fn from_coeffs(sig: Signature, coeffs: Vec<f64>) -> Result<Self, GaError> {
        if coeffs.len() != sig.blade_count() {
            return Err(GaError::LengthMismatch {
                got: coeffs.len(),
                expected: sig.blade_count(),
            });
        }
        Ok(Multivector { sig, coeffs })
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn get(&self, mask: usize) -> f64 {
        self.coeffs[mask]
    }

    pub fn set(&mut self, mask: usize, value: f64) {
        self.coeffs[mask] = value;
    }

    pub fn scalar_part(&self) -> f64 {
        self.coeffs[0]
    }

    fn check_sig(&self, other: &Multivector) -> Result<(), GaError> {
        if self.sig != other.sig {
            return Err(GaError::SignatureMismatch {
                left: self.sig,
                right: other.sig,
            });
        }
        Ok(())
    }

    /// Geometric product.
    pub fn gp(&self, other: &Multivector) -> Result<Multivector, GaError> {
        self.check_sig(other)?;
        Ok(self.gp_unchecked(other))
    }

    fn gp_unchecked(&self, other: &Multivector) -> Multivector {
        let table = cayley(self.sig);
        let n = table.n;
        let mut out = vec![0.0; n];
        for (a, &ca) in self.coeffs.iter().enumerate() {
            if ca == 0.0 {
                continue;
            }
            let row = &table.sign[a * n..(a + 1) * n];
            for (b, &cb) in other.coeffs.iter().enumerate() {
                if cb == 0.0 {
                    continue;
                }
                let s = row[b];
                if s != 0.0 {
                    out[a ^ b] += s * ca * cb;
                }
            }
        }
        Multivector {
            sig: self.sig,
            coeffs: out,
        }
    }

    /// Reversion: grade-k blades pick up `(-1)^(k(k-1)/2)`.
    pub fn reverse(&self) -> Multivector {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(mask, &c)| {
                let k = mask.count_ones();
                if (k * k.saturating_sub(1) / 2) % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .collect();
        Multivector {
            sig: self.sig,
            coeffs,
        }
    }

    pub fn grade_project(&self, k: usize) -> Result<Multivector, GaError> {
        if k > self.sig.dim() {
            return Err(GaError::GradeOutOfRange {
                grade: k,
                max: self.sig.dim(),
            });
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(mask, &c)| if mask.count_ones() as usize == k { c } else { 0.0 })
            .collect();
        Ok(Multivector {
            sig: self.sig,
            coeffs,
        })
    }

    pub fn checked_add(&self, other: &Multivector) -> Result<Multivector, GaError> {
        self.check_sig(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn checked_sub(&self, other: &Multivector) -> Result<Multivector, GaError> {
        self.check_sig(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &Multivector, f: impl Fn(f64, f64) -> f64) -> Multivector {
        Multivector {
            sig: self.sig,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Multivector {
        Multivector {
            sig: self.sig,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn div_scalar(&self, s: f64) -> Result<Multivector, GaError> {
        if s == 0.0 {
            return Err(GaError::DivisionByZero);
        }
        Ok(Multivector {
            sig: self.sig,
            coeffs: self.coeffs.iter().map(|c| c / s).collect(),
        })
    }

    /// Scalar part of `a ã`.
    pub fn norm_squared(&self) -> f64 {
        self.gp_unchecked(&self.reverse()).scalar_part()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().abs().sqrt()
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Multivector) -> f64 {
        debug_assert_eq!(self.sig, other.sig);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest absolute coefficient on blades rejected by `keep`.
    pub fn max_abs_outside(&self, keep: impl Fn(usize) -> bool) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(mask, _)| !keep(*mask))
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    }

    pub fn is_even(&self, tol: f64) -> bool {
        self.max_abs_outside(|mask| mask.count_ones() % 2 == 0) <= tol
    }

    /// `|m m~ - 1|` measured as the largest coefficient deviation.
    pub fn versor_deviation(&self) -> f64 {
        let prod = self.gp_unchecked(&self.reverse());
        prod.max_abs_diff(&Multivector::scalar(self.sig, 1.0))
    }

    /// `self * x * reverse(self)`.
    pub fn sandwich(&self, x: &Multivector) -> Result<Multivector, GaError> {
        self.check_sig(x)?;
        Ok(self.gp_unchecked(x).gp_unchecked(&self.reverse()))
    }

    /// Apply a normalized rotor/motor to a Euclidean point.
    ///
    /// Points are embedded as follows:
    /// * CGA: `P = n_o + p + ½|p|² n_inf` with `n_o = ½(e5 - e4)`,
    ///   `n_inf = e4 + e5`; the result is divided by `-P·n_inf`.
    /// * PGA: the trivector `P = e123 + x e032 + y e013 + z e021`; the
    ///   result is divided by its `e123` weight. With this orientation the
    ///   translator `1 - ½ e0 t` moves points by `+t`.
    pub fn sandwich_apply(&self, point: [f64; 3]) -> Result<[f64; 3], GaError> {
        if !self.sig.is_pga() && !self.sig.is_cga() {
            return Err(GaError::UnsupportedAlgebra(self.sig));
        }
        let deviation = self.versor_deviation();
        if !self.is_even(NORMALIZED_TOL) || deviation > NORMALIZED_TOL {
            return Err(GaError::NotNormalized { deviation });
        }
        let embedded = embed_point(self.sig, point);
        let moved = self.sandwich(&embedded)?;
        extract_point(&moved)
    }
}

/// Embed a Euclidean point in PGA or CGA (see [`Multivector::sandwich_apply`]).
pub fn embed_point(sig: Signature, p: [f64; 3]) -> Multivector {
    let mut m = Multivector::zero(sig);
    if sig.is_pga() {
        // e032 = -e023, e013, e021 = -e012
        m.coeffs[0b1110] = 1.0;
        m.coeffs[0b1101] = -p[0];
        m.coeffs[0b1011] = p[1];
        m.coeffs[0b0111] = -p[2];
    } else {
        let half_sq = 0.5 * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        m.coeffs[1] = p[0];
        m.coeffs[2] = p[1];
        m.coeffs[4] = p[2];
        // n_o = ½(e5 - e4), n_inf = e4 + e5
        m.coeffs[8] = -0.5 + half_sq;
        m.coeffs[16] = 0.5 + half_sq;
    }
    m
}

/// Inverse of [`embed_point`], tolerant of an overall weight.
pub fn extract_point(m: &Multivector) -> Result<[f64; 3], GaError> {
    let sig = m.signature();
    let c = m.coeffs();
    if sig.is_pga() {
        let w = c[0b1110];
        if w == 0.0 {
            return Err(GaError::DivisionByZero);
        }
        Ok([-c[0b1101] / w, c[0b1011] / w, -c[0b0111] / w])
    } else if sig.is_cga() {
        // weight = -P·n_inf = a5 - a4
        let w = c[16] - c[8];
        if w == 0.0 {
            return Err(GaError::DivisionByZero);
        }
        Ok([c[1] / w, c[2] / w, c[4] / w])
    } else {
        Err(GaError::UnsupportedAlgebra(sig))
    }
}

impl Add for &Multivector {
    type Output = Multivector;

    /// Panics on signature mismatch; use [`Multivector::checked_add`] otherwise.
    fn add(self, rhs: &Multivector) -> Multivector {
        self.checked_add(rhs).expect("multivector add")
    }
}

impl Sub for &Multivector {
    type Output = Multivector;

    fn sub(self, rhs: &Multivector) -> Multivector {
        self.checked_sub(rhs).expect("multivector sub")
    }
}

impl Mul for &Multivector {
    type Output = Multivector;

    /// Geometric product. Panics on signature mismatch.
    fn mul(self, rhs: &Multivector) -> Multivector {
        self.gp(rhs).expect("geometric product")
    }
}

impl Mul<f64> for &Multivector {
    type Output = Multivector;

    fn mul(self, rhs: f64) -> Multivector {
        self.scale(rhs)
    }
}

impl Neg for &Multivector {
    type Output = Multivector;

    fn neg(self) -> Multivector {
        self.scale(-1.0)
    }
}

impl fmt::Display for Multivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (mask, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if first {
                write!(f, "{c}")?;
            } else if c < 0.0 {
                write!(f, " - {}", -c)?;
            } else {
                write!(f, " + {c}")?;
            }
            if mask != 0 {
                write!(f, "{}", self.sig.blade_name(mask))?;
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cga_e(i: usize) -> Multivector {
        // CGA basis names start at e1
        Multivector::basis_vector(Signature::CGA, i - 1)
    }

    fn pga_e(i: usize) -> Multivector {
        Multivector::basis_vector(Signature::PGA, i)
    }

    #[test]
    fn metric_squares() {
        assert_eq!(&cga_e(1) * &cga_e(1), Multivector::scalar(Signature::CGA, 1.0));
        assert_eq!(&cga_e(5) * &cga_e(5), Multivector::scalar(Signature::CGA, -1.0));
        assert_eq!(&pga_e(0) * &pga_e(0), Multivector::zero(Signature::PGA));
        for sig in [Signature::PGA, Signature::CGA] {
            for i in 0..sig.dim() {
                let e = Multivector::basis_vector(sig, i);
                assert_eq!((&e * &e).coeffs()[0], sig.square(i));
                assert!((&e * &e).max_abs_outside(|m| m == 0) == 0.0);
            }
        }
    }

    #[test]
    fn anticommuting_basis_vectors() {
        let e12 = &cga_e(1) * &cga_e(2);
        assert_eq!(e12, Multivector::blade(Signature::CGA, 0b11, 1.0));
        assert_eq!(&cga_e(2) * &cga_e(1), Multivector::blade(Signature::CGA, 0b11, -1.0));
    }

    #[test]
    fn one_plus_e12_times_one_minus_e12() {
        let one = Multivector::scalar(Signature::CGA, 1.0);
        let e12 = Multivector::blade(Signature::CGA, 0b11, 1.0);
        let prod = &(&one + &e12) * &(&one - &e12);
        assert_eq!(prod, Multivector::scalar(Signature::CGA, 2.0));
    }

    #[test]
    fn signature_mismatch_is_an_error() {
        let a = Multivector::scalar(Signature::PGA, 1.0);
        let b = Multivector::scalar(Signature::CGA, 1.0);
        assert!(matches!(a.gp(&b), Err(GaError::SignatureMismatch { .. })));
        assert!(a.checked_add(&b).is_err());
    }

    #[test]
    fn reverse_signs() {
        let s = Multivector::scalar(Signature::CGA, 1.0);
        assert_eq!(s.reverse(), s);
        let e12 = Multivector::blade(Signature::CGA, 0b11, 1.0);
        assert_eq!(e12.reverse(), -&e12);
        assert_eq!(cga_e(1).reverse(), cga_e(1));
        let e123 = Multivector::blade(Signature::CGA, 0b111, 1.0);
        assert_eq!(e123.reverse(), -&e123);
        let e1234 = Multivector::blade(Signature::CGA, 0b1111, 1.0);
        assert_eq!(e1234.reverse(), e1234);
    }

    #[test]
    fn grade_projection() {
        let one = Multivector::scalar(Signature::CGA, 1.0);
        let e12 = Multivector::blade(Signature::CGA, 0b11, 1.0);
        let x = &one + &e12;
        assert_eq!(x.grade_project(0).unwrap(), one);
        assert_eq!(x.grade_project(2).unwrap(), e12);
        assert_eq!(cga_e(1).grade_project(2).unwrap(), Multivector::zero(Signature::CGA));
        assert!(matches!(x.grade_project(6), Err(GaError::GradeOutOfRange { .. })));
    }

    #[test]
    fn arithmetic() {
        let mut t = Multivector::scalar(Signature::PGA, 1.0);
        t.set(0b0011, -0.5);
        let doubled = t.scale(2.0);
        assert_eq!(doubled.get(0), 2.0);
        assert_eq!(doubled.get(0b0011), -1.0);
        assert_eq!(&t + &Multivector::zero(Signature::PGA), t);
        assert_eq!(t.div_scalar(0.0), Err(GaError::DivisionByZero));

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut r = Multivector::scalar(Signature::CGA, h);
        r.set(0b11, -h);
        assert!((r.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn blade_names() {
        assert_eq!(Signature::PGA.blade_name(0b0011), "e01");
        assert_eq!(Signature::CGA.blade_name(0b0011), "e12");
        assert_eq!(Signature::CGA.blade_name(0b11000), "e45");
        let (mask, sign) = Signature::PGA.blade_mask(&[0, 3, 2]);
        assert_eq!(mask, 0b1101);
        assert_eq!(sign, -1.0);
    }

    #[test]
    fn identity_sandwich() {
        for sig in [Signature::PGA, Signature::CGA] {
            let one = Multivector::scalar(sig, 1.0);
            assert_eq!(one.sandwich_apply([1.0, 2.0, 3.0]).unwrap(), [1.0, 2.0, 3.0]);
        }
    }

    #[test]
    fn cga_translator_moves_origin() {
        // T = 1 - ½ t n_inf with t = 2 e1
        let n_inf = &cga_e(4) + &cga_e(5);
        let t = cga_e(1).scale(2.0);
        let one = Multivector::scalar(Signature::CGA, 1.0);
        let translator = &one - &(&t * &n_inf).scale(0.5);
        let p = translator.sandwich_apply([0.0, 0.0, 0.0]).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-15 && p[1].abs() < 1e-15 && p[2].abs() < 1e-15);
    }

    #[test]
    fn pga_translator_moves_point() {
        // Closed form 1 - ½ e0 (t1 e1 + t2 e2 + t3 e3) with t = (1, -2, 3)
        let t = [1.0, -2.0, 3.0];
        let mut translator = Multivector::scalar(Signature::PGA, 1.0);
        translator.set(0b0011, -0.5 * t[0]);
        translator.set(0b0101, -0.5 * t[1]);
        translator.set(0b1001, -0.5 * t[2]);
        let p = translator.sandwich_apply([0.5, 0.5, 0.5]).unwrap();
        for i in 0..3 {
            assert!((p[i] - (0.5 + t[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn rotor_quarter_turn_about_z() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for sig in [Signature::PGA, Signature::CGA] {
            let (e12, _) = sig.blade_mask(&[sig.r as usize, sig.r as usize + 1]);
            let mut r = Multivector::scalar(sig, h);
            r.set(e12, -h);
            let p = r.sandwich_apply([1.0, 0.0, 0.0]).unwrap();
            assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15 && p[2].abs() < 1e-15);
        }
    }

    #[test]
    fn unnormalized_versor_rejected() {
        let m = Multivector::scalar(Signature::CGA, 2.0);
        assert!(matches!(m.sandwich_apply([0.0; 3]), Err(GaError::NotNormalized { .. })));
        let e = Multivector::scalar(Signature::new(3, 0, 0).unwrap(), 1.0);
        assert!(matches!(e.sandwich_apply([0.0; 3]), Err(GaError::UnsupportedAlgebra(_))));
    }

    fn arb_mv(sig: Signature) -> impl Strategy<Value = Multivector> {
        proptest::collection::vec(-1.0f64..1.0, sig.blade_count())
            .prop_map(move |c| Multivector::from_coeffs(sig, c).unwrap())
    }

    fn arb_sig() -> impl Strategy<Value = Signature> {
        prop_oneof![Just(Signature::PGA), Just(Signature::CGA)]
    }

    proptest! {
        #[test]
        fn associativity((a, b, c) in arb_sig().prop_flat_map(|s| (arb_mv(s), arb_mv(s), arb_mv(s)))) {
            let left = &(&a * &b) * &c;
            let right = &a * &(&b * &c);
            prop_assert!(left.max_abs_diff(&right) < 1e-12);
        }

        #[test]
        fn reverse_antidistributes((a, b) in arb_sig().prop_flat_map(|s| (arb_mv(s), arb_mv(s)))) {
            let left = (&a * &b).reverse();
            let right = &b.reverse() * &a.reverse();
            prop_assert!(left.max_abs_diff(&right) < 1e-12);
        }

        #[test]
        fn grades_sum_back(a in arb_sig().prop_flat_map(arb_mv)) {
            let mut sum = Multivector::zero(a.signature());
            for k in 0..=a.signature().dim() {
                sum = &sum + &a.grade_project(k).unwrap();
            }
            prop_assert_eq!(sum, a);
        }

        #[test]
        fn distributes_over_addition((a, b, c) in arb_sig().prop_flat_map(|s| (arb_mv(s), arb_mv(s), arb_mv(s)))) {
            let left = &a * &(&b + &c);
            let right = &(&a * &b) + &(&a * &c);
            prop_assert!(left.max_abs_diff(&right) < 1e-12);
        }
    }
}
