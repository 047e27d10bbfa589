//! Rigid transform representation forms and the conversions between them.
//!
//! Every form is reduced to a canonical hub `(q, t, scale)` made of a unit
//! quaternion, a translation and a per-axis scale. Composition order is
//! fixed throughout the crate: `M = Translation * Rotation * Scale`, which
//! for the GA forms is the motor `T * R` with the scale kept aside.
//!
//! Quaternions are canonicalized so that `q0 >= 0`; when `q0 == 0` the
//! first nonzero of `q1, q2, q3` is made positive.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ga::{GaError, Multivector, Signature, NORMALIZED_TOL};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Orthonormality tolerance used when reading a rotation out of a matrix.
pub const ROTATION_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum XformError {
    #[error("non-TRS matrix: {0}")]
    NonTrs(String),
    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),
    #[error("zero rotation axis with nonzero angle {0}")]
    ZeroAxis(f64),
    #[error("quaternion is not unit (norm {0})")]
    NonUnitQuaternion(f64),
    #[error("non-rigid transform not representable as {0} (scale {1:?})")]
    NonRigid(Form, Vec3),
    #[error("multivector is not a translator: {0}")]
    NotATranslator(String),
    #[error("multivector is not a rotor: {0}")]
    NotARotor(String),
    #[error("multivector is not a motor: {0}")]
    NotAMotor(String),
    #[error("{form} expects {expected} coefficients, got {got}")]
    Arity { form: Form, expected: usize, got: usize },
    #[error("unknown representation form {0:?}")]
    UnknownForm(String),
    #[error("invalid {form} payload: {reason}")]
    Invalid { form: Form, reason: String },
    #[error(transparent)]
    Ga(#[from] GaError),
}

pub type Result<T, E = XformError> = std::result::Result<T, E>;

pub fn vec_add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn vec_sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn vec_norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn mat3_identity() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat3_det(m: &Mat3) -> f64 {
    dot3(m[0], cross(m[1], m[2]))
}

fn mat3_transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

/// Largest deviation of `r rᵀ` from the identity.
fn orthonormality_error(r: &Mat3) -> f64 {
    let rrt = mat3_mul(r, &mat3_transpose(r));
    let id = mat3_identity();
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((rrt[i][j] - id[i][j]).abs());
        }
    }
    worst
}

/// Row-major 4×4 affine matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4(pub [f64; 16]);

impl Mat4 {
    pub const IDENTITY: Mat4 = Mat4([
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    ]);

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.0[row * 4 + col]
    }

    pub fn translation(t: Vec3) -> Mat4 {
        let mut m = Mat4::IDENTITY;
        m.0[3] = t[0];
        m.0[7] = t[1];
        m.0[11] = t[2];
        m
    }

    /// `T * R * S`.
    pub fn from_trs(rotation: &Mat3, t: Vec3, scale: Vec3) -> Mat4 {
        let mut m = Mat4::IDENTITY;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i * 4 + j] = rotation[i][j] * scale[j];
            }
            m.0[i * 4 + 3] = t[i];
        }
        m
    }

    pub fn mul(&self, other: &Mat4) -> Mat4 {
        let mut out = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                out[i * 4 + j] = (0..4).map(|k| self.0[i * 4 + k] * other.0[k * 4 + j]).sum();
            }
        }
        Mat4(out)
    }

    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        let m = &self.0;
        [
            m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + m[3],
            m[4] * p[0] + m[5] * p[1] + m[6] * p[2] + m[7],
            m[8] * p[0] + m[9] * p[1] + m[10] * p[2] + m[11],
        ]
    }

    pub fn origin(&self) -> Vec3 {
        [self.0[3], self.0[7], self.0[11]]
    }

    pub fn linear_block(&self) -> Mat3 {
        let m = &self.0;
        [[m[0], m[1], m[2]], [m[4], m[5], m[6]], [m[8], m[9], m[10]]]
    }

    /// Inverse of an affine matrix with nonsingular linear block.
    pub fn inverse_affine(&self) -> Option<Mat4> {
        let a = self.linear_block();
        let det = mat3_det(&a);
        if det.abs() < 1e-300 {
            return None;
        }
        let mut inv = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                inv[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / det;
            }
        }
        let t = self.origin();
        let mut out = Mat4::IDENTITY;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i * 4 + j] = inv[i][j];
            }
            out.0[i * 4 + 3] = -(0..3).map(|k| inv[i][k] * t[k]).sum::<f64>();
        }
        Some(out)
    }

    pub fn max_abs_diff(&self, other: &Mat4) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Split an affine TRS matrix into rotation, translation and per-axis scale.
pub fn decompose_matrix(m: &Mat4) -> Result<(Mat3, Vec3, Vec3)> {
    let last = [m.at(3, 0), m.at(3, 1), m.at(3, 2), m.at(3, 3)];
    if last != [0.0, 0.0, 0.0, 1.0] {
        return Err(XformError::NonTrs(format!("last row is {last:?}")));
    }
    let block = m.linear_block();
    let mut scale = [0.0; 3];
    let mut rotation = [[0.0; 3]; 3];
    for j in 0..3 {
        let col = [block[0][j], block[1][j], block[2][j]];
        let n = vec_norm(col);
        if !(n > 0.0) || !n.is_finite() {
            return Err(XformError::NonTrs(format!("column {j} is degenerate")));
        }
        scale[j] = n;
        for i in 0..3 {
            rotation[i][j] = col[i] / n;
        }
    }
    let err = orthonormality_error(&rotation);
    if err > ROTATION_TOL {
        return Err(XformError::NonTrs(format!("shear detected (orthonormality error {err:e})")));
    }
    if mat3_det(&rotation) < 0.0 {
        return Err(XformError::NonTrs("reflection (negative determinant)".into()));
    }
    Ok((rotation, m.origin(), scale))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);

    pub const fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Quaternion { q0, q1, q2, q3 }
    }

    pub fn pure(v: Vec3) -> Self {
        Quaternion::new(0.0, v[0], v[1], v[2])
    }

    pub fn vector(&self) -> Vec3 {
        [self.q1, self.q2, self.q3]
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.q0, self.q1, self.q2, self.q3]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }

    /// Hamilton product.
    pub fn mul(&self, o: &Quaternion) -> Quaternion {
        Quaternion::new(
            self.q0 * o.q0 - self.q1 * o.q1 - self.q2 * o.q2 - self.q3 * o.q3,
            self.q0 * o.q1 + self.q1 * o.q0 + self.q2 * o.q3 - self.q3 * o.q2,
            self.q0 * o.q2 - self.q1 * o.q3 + self.q2 * o.q0 + self.q3 * o.q1,
            self.q0 * o.q3 + self.q1 * o.q2 - self.q2 * o.q1 + self.q3 * o.q0,
        )
    }

    pub fn conj(&self) -> Quaternion {
        Quaternion::new(self.q0, -self.q1, -self.q2, -self.q3)
    }

    pub fn scale(&self, s: f64) -> Quaternion {
        Quaternion::new(self.q0 * s, self.q1 * s, self.q2 * s, self.q3 * s)
    }

    pub fn dot(&self, o: &Quaternion) -> f64 {
        self.q0 * o.q0 + self.q1 * o.q1 + self.q2 * o.q2 + self.q3 * o.q3
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORMALIZED_TOL
    }

    /// Sign representative with `q0 >= 0` (see module docs for the tie-break).
    pub fn canonical(&self) -> Quaternion {
        let flip = if self.q0 != 0.0 {
            self.q0 < 0.0
        } else {
            [self.q1, self.q2, self.q3]
                .into_iter()
                .find(|c| *c != 0.0)
                .is_some_and(|c| c < 0.0)
        };
        if flip {
            self.scale(-1.0)
        } else {
            *self
        }
    }

    /// `q p q*`.
    pub fn rotate(&self, p: Vec3) -> Vec3 {
        self.mul(&Quaternion::pure(p)).mul(&self.conj()).vector()
    }

    pub fn to_rotation(&self) -> Mat3 {
        let Quaternion { q0: w, q1: x, q2: y, q3: z } = *self;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    /// Shepperd-style extraction; the largest-diagonal branch handles
    /// rotations near 180°.
    pub fn from_rotation(r: &Mat3) -> Result<Quaternion> {
        let err = orthonormality_error(r);
        if err > ROTATION_TOL || !err.is_finite() {
            return Err(XformError::InvalidRotation(format!("orthonormality error {err:e}")));
        }
        if mat3_det(r) <= 0.0 {
            return Err(XformError::InvalidRotation("determinant is not +1".into()));
        }
        let trace = r[0][0] + r[1][1] + r[2][2];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quaternion::new(
                0.25 * s,
                (r[2][1] - r[1][2]) / s,
                (r[0][2] - r[2][0]) / s,
                (r[1][0] - r[0][1]) / s,
            )
        } else if r[0][0] > r[1][1] && r[0][0] > r[2][2] {
            let s = (1.0 + r[0][0] - r[1][1] - r[2][2]).sqrt() * 2.0;
            Quaternion::new(
                (r[2][1] - r[1][2]) / s,
                0.25 * s,
                (r[0][1] + r[1][0]) / s,
                (r[0][2] + r[2][0]) / s,
            )
        } else if r[1][1] > r[2][2] {
            let s = (1.0 + r[1][1] - r[0][0] - r[2][2]).sqrt() * 2.0;
            Quaternion::new(
                (r[0][2] - r[2][0]) / s,
                (r[0][1] + r[1][0]) / s,
                0.25 * s,
                (r[1][2] + r[2][1]) / s,
            )
        } else {
            let s = (1.0 + r[2][2] - r[0][0] - r[1][1]).sqrt() * 2.0;
            Quaternion::new(
                (r[1][0] - r[0][1]) / s,
                (r[0][2] + r[2][0]) / s,
                (r[1][2] + r[2][1]) / s,
                0.25 * s,
            )
        };
        let n = q.norm();
        Ok(q.scale(1.0 / n).canonical())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleAxis {
    pub angle: f64,
    pub axis: Vec3,
}

impl AngleAxis {
    pub fn to_quat(&self) -> Result<Quaternion> {
        let n = vec_norm(self.axis);
        if n == 0.0 {
            if self.angle == 0.0 {
                return Ok(Quaternion::IDENTITY);
            }
            return Err(XformError::ZeroAxis(self.angle));
        }
        let (s, c) = (0.5 * self.angle).sin_cos();
        let k = s / n;
        Ok(Quaternion::new(c, k * self.axis[0], k * self.axis[1], k * self.axis[2]))
    }

    /// Canonical angle in `[0, π]`; the identity gets axis `+x`.
    pub fn from_quat(q: &Quaternion) -> AngleAxis {
        let q = q.canonical();
        let v = q.vector();
        let vn = vec_norm(v);
        if vn == 0.0 {
            return AngleAxis {
                angle: 0.0,
                axis: [1.0, 0.0, 0.0],
            };
        }
        AngleAxis {
            angle: 2.0 * vn.atan2(q.q0),
            axis: [v[0] / vn, v[1] / vn, v[2] / vn],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualQuaternion {
    pub real: Quaternion,
    pub dual: Quaternion,
}

impl DualQuaternion {
    /// `real = q`, `dual = ½ (0, t) q`.
    pub fn from_qt(q: &Quaternion, t: Vec3) -> Result<DualQuaternion> {
        if !q.is_unit() {
            return Err(XformError::NonUnitQuaternion(q.norm()));
        }
        Ok(DualQuaternion {
            real: *q,
            dual: Quaternion::pure(t).mul(q).scale(0.5),
        })
    }

    pub fn to_qt(&self) -> Result<(Quaternion, Vec3)> {
        if !self.real.is_unit() {
            return Err(XformError::NonUnitQuaternion(self.real.norm()));
        }
        let t = self.dual.mul(&self.real.conj()).scale(2.0).vector();
        Ok((self.real, t))
    }
}

/// Which GA flavour a translator/rotor/motor lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algebra {
    Pga,
    Cga,
}

impl Algebra {
    pub fn signature(self) -> Signature {
        match self {
            Algebra::Pga => Signature::PGA,
            Algebra::Cga => Signature::CGA,
        }
    }

    pub fn of(mv: &Multivector) -> Result<Algebra> {
        match mv.signature() {
            s if s == Signature::PGA => Ok(Algebra::Pga),
            s if s == Signature::CGA => Ok(Algebra::Cga),
            s => Err(GaError::UnsupportedAlgebra(s).into()),
        }
    }

    /// Masks of `e12, e13, e23` (the rotation plane blades).
    fn rotor_blades(self) -> [usize; 3] {
        match self {
            Algebra::Pga => [0b0110, 0b1010, 0b1100],
            Algebra::Cga => [0b00011, 0b00101, 0b00110],
        }
    }

    /// Blades of the translation part for axis `i`: `e0i` in PGA and the
    /// pair `(e_i e4, e_i e5)` in CGA.
    fn translator_blades(self, i: usize) -> (usize, Option<usize>) {
        match self {
            Algebra::Pga => (1 | (2 << i), None),
            Algebra::Cga => ((1 << i) | 0b01000, Some((1 << i) | 0b10000)),
        }
    }

    /// True for blades free of the null direction(s).
    fn is_euclidean_blade(self, mask: usize) -> bool {
        match self {
            Algebra::Pga => mask & 1 == 0,
            Algebra::Cga => mask & 0b11000 == 0,
        }
    }
}

/// `1 - ½ e0 t` in PGA, `1 - ½ t n_inf` in CGA.
pub fn translator_from_t(t: Vec3, algebra: Algebra) -> Multivector {
    let mut m = Multivector::scalar(algebra.signature(), 1.0);
    for (i, &ti) in t.iter().enumerate() {
        let (a, b) = algebra.translator_blades(i);
        m.set(a, -0.5 * ti);
        if let Some(b) = b {
            m.set(b, -0.5 * ti);
        }
    }
    m
}

/// Read the translation back, dividing by the scalar part first.
pub fn t_from_translator(translator: &Multivector) -> Result<Vec3> {
    let algebra = Algebra::of(translator)?;
    let s = translator.scalar_part();
    if s == 0.0 {
        return Err(XformError::NotATranslator("zero scalar part".into()));
    }
    let unit = translator.div_scalar(s)?;
    let mut allowed = vec![0usize];
    for i in 0..3 {
        let (a, b) = algebra.translator_blades(i);
        allowed.push(a);
        allowed.extend(b);
    }
    let stray = unit.max_abs_outside(|m| allowed.contains(&m));
    if stray > NORMALIZED_TOL {
        return Err(XformError::NotATranslator(format!("stray blade coefficient {stray:e}")));
    }
    let mut t = [0.0; 3];
    for (i, ti) in t.iter_mut().enumerate() {
        match algebra.translator_blades(i) {
            (a, None) => *ti = -2.0 * unit.get(a),
            (a, Some(b)) => {
                let (ca, cb) = (unit.get(a), unit.get(b));
                if (ca - cb).abs() > NORMALIZED_TOL {
                    return Err(XformError::NotATranslator(format!(
                        "e{}4 and e{}5 parts differ ({ca} vs {cb})",
                        i + 1,
                        i + 1
                    )));
                }
                *ti = -(ca + cb);
            }
        }
    }
    Ok(t)
}

/// `q0 - q3 e12 + q2 e13 - q1 e23`.
pub fn rotor_from_quat(q: &Quaternion, algebra: Algebra) -> Multivector {
    let [e12, e13, e23] = algebra.rotor_blades();
    let mut m = Multivector::scalar(algebra.signature(), q.q0);
    m.set(e12, -q.q3);
    m.set(e13, q.q2);
    m.set(e23, -q.q1);
    m
}

pub fn quat_from_rotor(rotor: &Multivector) -> Result<Quaternion> {
    let algebra = Algebra::of(rotor)?;
    let blades = algebra.rotor_blades();
    let stray = rotor.max_abs_outside(|m| m == 0 || blades.contains(&m));
    if stray > NORMALIZED_TOL {
        return Err(XformError::NotARotor(format!("stray blade coefficient {stray:e}")));
    }
    let [e12, e13, e23] = blades;
    Ok(Quaternion::new(rotor.scalar_part(), -rotor.get(e23), rotor.get(e13), -rotor.get(e12)).canonical())
}

/// `T * R`: rotate first, then translate.
pub fn motor_compose(translator: &Multivector, rotor: &Multivector) -> Result<Multivector> {
    Ok(translator.gp(rotor)?)
}

/// Split a (possibly scaled) motor into a translator and a rotor with
/// `T * R = M / |R|`, the rotor sign canonicalized to `q0 >= 0`.
pub fn motor_decompose(motor: &Multivector) -> Result<(Multivector, Multivector)> {
    let algebra = Algebra::of(motor)?;
    let sig = algebra.signature();
    let mut rotor = Multivector::zero(sig);
    for (mask, &c) in motor.coeffs().iter().enumerate() {
        if algebra.is_euclidean_blade(mask) {
            rotor.set(mask, c);
        }
    }
    let weight = rotor.norm();
    if !(weight > 0.0) || !weight.is_finite() {
        return Err(XformError::NotAMotor("vanishing rotor part".into()));
    }
    let mut unit = motor.div_scalar(weight)?;
    let mut rotor = rotor.div_scalar(weight)?;
    if !unit.is_even(NORMALIZED_TOL) {
        return Err(XformError::NotAMotor("odd-grade part present".into()));
    }
    let deviation = unit.versor_deviation();
    if deviation > NORMALIZED_TOL {
        return Err(XformError::NotAMotor(format!("|M M~ - 1| = {deviation:e}")));
    }
    let [e12, e13, e23] = algebra.rotor_blades();
    let raw = Quaternion::new(rotor.scalar_part(), -rotor.get(e23), rotor.get(e13), -rotor.get(e12));
    if raw.canonical() != raw {
        rotor = -&rotor;
        unit = -&unit;
    }
    let translator = unit.gp(&rotor.reverse())?;
    // shape checks
    t_from_translator(&translator).map_err(|e| XformError::NotAMotor(e.to_string()))?;
    quat_from_rotor(&rotor).map_err(|e| XformError::NotAMotor(e.to_string()))?;
    Ok((translator, rotor))
}

/// Representation form tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Form {
    Matrix,
    AngleAxisT,
    QuatT,
    DualQuat,
    PgaMotor,
    CgaMotor,
}

impl Form {
    pub const ALL: [Form; 6] = [
        Form::Matrix,
        Form::AngleAxisT,
        Form::QuatT,
        Form::DualQuat,
        Form::PgaMotor,
        Form::CgaMotor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Form::Matrix => "matrix",
            Form::AngleAxisT => "angle_axis_t",
            Form::QuatT => "quat_t",
            Form::DualQuat => "dual_quat",
            Form::PgaMotor => "pga_motor",
            Form::CgaMotor => "cga_motor",
        }
    }

    /// Number of payload coefficients (excluding the scale side channel).
    pub fn arity(self) -> usize {
        match self {
            Form::Matrix => 16,
            Form::AngleAxisT | Form::QuatT => 7,
            Form::DualQuat => 8,
            Form::PgaMotor => 16,
            Form::CgaMotor => 32,
        }
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Form {
    type Err = XformError;

    fn from_str(s: &str) -> Result<Self> {
        Form::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| XformError::UnknownForm(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Matrix(Mat4),
    AngleAxisT(AngleAxis, Vec3),
    QuatT(Quaternion, Vec3),
    DualQuat(DualQuaternion),
    PgaMotor(Multivector),
    CgaMotor(Multivector),
}

/// Canonical intermediate every conversion goes through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub rotation: Quaternion,
    pub translation: Vec3,
    pub scale: Vec3,
}

impl RigidPose {
    pub fn to_matrix(&self) -> Mat4 {
        Mat4::from_trs(&self.rotation.to_rotation(), self.translation, self.scale)
    }
}

/// A TRS pose in one of the six forms. For every form except `Matrix` the
/// scale travels in a side channel and must be uniform; `Matrix` folds the
/// scale into its linear block and keeps the side channel at `(1,1,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformRepr {
    payload: Payload,
    scale: Vec3,
}

const UNIT_SCALE: Vec3 = [1.0, 1.0, 1.0];

fn is_uniform(s: Vec3) -> bool {
    let hi = s.iter().cloned().fold(f64::MIN, f64::max);
    let lo = s.iter().cloned().fold(f64::MAX, f64::min);
    hi - lo <= NORMALIZED_TOL * hi.abs().max(1.0)
}

impl TransformRepr {
    pub fn identity() -> Self {
        TransformRepr::matrix(Mat4::IDENTITY)
    }

    pub fn matrix(m: Mat4) -> Self {
        TransformRepr {
            payload: Payload::Matrix(m),
            scale: UNIT_SCALE,
        }
    }

    /// Build from a payload plus side-channel scale. A scale passed with a
    /// `Matrix` payload is folded into the matrix (`M * S`).
    pub fn new(payload: Payload, scale: Vec3) -> Self {
        match payload {
            Payload::Matrix(m) if scale != UNIT_SCALE => {
                let s = Mat4::from_trs(&mat3_identity(), [0.0; 3], scale);
                TransformRepr::matrix(m.mul(&s))
            }
            payload => TransformRepr { payload, scale },
        }
    }

    pub fn from_pose(pose: &RigidPose, form: Form) -> Result<Self> {
        let RigidPose {
            rotation: q,
            translation: t,
            scale,
        } = *pose;
        if form != Form::Matrix && !is_uniform(scale) {
            return Err(XformError::NonRigid(form, scale));
        }
        let payload = match form {
            Form::Matrix => return Ok(TransformRepr::matrix(pose.to_matrix())),
            Form::AngleAxisT => Payload::AngleAxisT(AngleAxis::from_quat(&q), t),
            Form::QuatT => Payload::QuatT(q, t),
            Form::DualQuat => Payload::DualQuat(DualQuaternion::from_qt(&q, t)?),
            Form::PgaMotor => Payload::PgaMotor(motor_compose(
                &translator_from_t(t, Algebra::Pga),
                &rotor_from_quat(&q, Algebra::Pga),
            )?),
            Form::CgaMotor => Payload::CgaMotor(motor_compose(
                &translator_from_t(t, Algebra::Cga),
                &rotor_from_quat(&q, Algebra::Cga),
            )?),
        };
        Ok(TransformRepr { payload, scale })
    }

    pub fn form(&self) -> Form {
        match self.payload {
            Payload::Matrix(_) => Form::Matrix,
            Payload::AngleAxisT(..) => Form::AngleAxisT,
            Payload::QuatT(..) => Form::QuatT,
            Payload::DualQuat(_) => Form::DualQuat,
            Payload::PgaMotor(_) => Form::PgaMotor,
            Payload::CgaMotor(_) => Form::CgaMotor,
        }
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn scale(&self) -> Vec3 {
        self.scale
    }

    /// Reduce to the canonical `(q, t, scale)` hub.
    pub fn to_pose(&self) -> Result<RigidPose> {
        let (rotation, translation) = match &self.payload {
            Payload::Matrix(m) => {
                let (r, t, scale) = decompose_matrix(m)?;
                return Ok(RigidPose {
                    rotation: Quaternion::from_rotation(&r)?,
                    translation: t,
                    scale,
                });
            }
            Payload::AngleAxisT(aa, t) => (aa.to_quat()?.canonical(), *t),
            Payload::QuatT(q, t) => {
                if !q.is_unit() {
                    return Err(XformError::NonUnitQuaternion(q.norm()));
                }
                (q.canonical(), *t)
            }
            Payload::DualQuat(dq) => {
                let (q, t) = dq.to_qt()?;
                (q.canonical(), t)
            }
            Payload::PgaMotor(m) | Payload::CgaMotor(m) => {
                let (tr, r) = motor_decompose(m)?;
                (quat_from_rotor(&r)?, t_from_translator(&tr)?)
            }
        };
        Ok(RigidPose {
            rotation,
            translation,
            scale: self.scale,
        })
    }

    pub fn convert(&self, target: Form) -> Result<TransformRepr> {
        if target == self.form() {
            return Ok(self.clone());
        }
        TransformRepr::from_pose(&self.to_pose()?, target)
    }

    pub fn to_matrix(&self) -> Result<Mat4> {
        match &self.payload {
            Payload::Matrix(m) => Ok(*m),
            _ => Ok(self.to_pose()?.to_matrix()),
        }
    }

    /// Apply to a point: scale, then the rigid part.
    pub fn apply(&self, p: Vec3) -> Result<Vec3> {
        let s = self.scale;
        let scaled = [p[0] * s[0], p[1] * s[1], p[2] * s[2]];
        match &self.payload {
            Payload::Matrix(m) => Ok(m.apply_point(p)),
            Payload::AngleAxisT(aa, t) => Ok(vec_add(aa.to_quat()?.rotate(scaled), *t)),
            Payload::QuatT(q, t) => Ok(vec_add(q.rotate(scaled), *t)),
            Payload::DualQuat(dq) => {
                let (q, t) = dq.to_qt()?;
                Ok(vec_add(q.rotate(scaled), t))
            }
            Payload::PgaMotor(m) | Payload::CgaMotor(m) => Ok(m.sandwich_apply(scaled)?),
        }
    }

    /// Check every invariant of the payload and the side channel.
    pub fn validate(&self) -> Result<()> {
        let form = self.form();
        let invalid = |reason: String| XformError::Invalid { form, reason };
        if self.scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(invalid(format!("scale {:?} must be positive", self.scale)));
        }
        match &self.payload {
            Payload::Matrix(m) => {
                if self.scale != UNIT_SCALE {
                    return Err(invalid("matrix side-channel scale must be (1,1,1)".into()));
                }
                decompose_matrix(m)?;
            }
            Payload::AngleAxisT(aa, _) => {
                if (vec_norm(aa.axis) - 1.0).abs() > NORMALIZED_TOL {
                    return Err(invalid(format!("axis norm {}", vec_norm(aa.axis))));
                }
                if !(0.0..=std::f64::consts::PI + NORMALIZED_TOL).contains(&aa.angle) {
                    return Err(invalid(format!("angle {} outside [0, π]", aa.angle)));
                }
            }
            Payload::QuatT(q, _) => {
                if !q.is_unit() {
                    return Err(XformError::NonUnitQuaternion(q.norm()));
                }
            }
            Payload::DualQuat(dq) => {
                if !dq.real.is_unit() {
                    return Err(XformError::NonUnitQuaternion(dq.real.norm()));
                }
                let ortho = dq.real.dot(&dq.dual);
                if ortho.abs() > NORMALIZED_TOL {
                    return Err(invalid(format!("real·dual = {ortho:e}")));
                }
            }
            Payload::PgaMotor(m) | Payload::CgaMotor(m) => {
                let expected = if form == Form::PgaMotor { Signature::PGA } else { Signature::CGA };
                if m.signature() != expected {
                    return Err(invalid(format!("signature {}", m.signature())));
                }
                let dev = m.versor_deviation();
                if !m.is_even(NORMALIZED_TOL) || dev > NORMALIZED_TOL {
                    return Err(invalid(format!("not a unit motor (|M M~ - 1| = {dev:e})")));
                }
                motor_decompose(m)?;
            }
        }
        if form != Form::Matrix && !is_uniform(self.scale) {
            return Err(XformError::NonRigid(form, self.scale));
        }
        Ok(())
    }

    /// Flat payload coefficients in the documented layout:
    /// matrix row-major (16), `[angle, axis, t]` (7), `[q, t]` (7),
    /// `[real, dual]` (8), PGA blades (16), CGA blades (32).
    pub fn coeffs(&self) -> Vec<f64> {
        match &self.payload {
            Payload::Matrix(m) => m.0.to_vec(),
            Payload::AngleAxisT(aa, t) => {
                vec![aa.angle, aa.axis[0], aa.axis[1], aa.axis[2], t[0], t[1], t[2]]
            }
            Payload::QuatT(q, t) => vec![q.q0, q.q1, q.q2, q.q3, t[0], t[1], t[2]],
            Payload::DualQuat(dq) => {
                let mut v = dq.real.to_array().to_vec();
                v.extend(dq.dual.to_array());
                v
            }
            Payload::PgaMotor(m) | Payload::CgaMotor(m) => m.coeffs().to_vec(),
        }
    }

    /// Inverse of [`TransformRepr::coeffs`]; checks arity only.
    pub fn from_coeffs(form: Form, c: &[f64], scale: Vec3) -> Result<Self> {
        if c.len() != form.arity() {
            return Err(XformError::Arity {
                form,
                expected: form.arity(),
                got: c.len(),
            });
        }
        let payload = match form {
            Form::Matrix => {
                let mut m = [0.0; 16];
                m.copy_from_slice(c);
                Payload::Matrix(Mat4(m))
            }
            Form::AngleAxisT => Payload::AngleAxisT(
                AngleAxis {
                    angle: c[0],
                    axis: [c[1], c[2], c[3]],
                },
                [c[4], c[5], c[6]],
            ),
            Form::QuatT => Payload::QuatT(Quaternion::new(c[0], c[1], c[2], c[3]), [c[4], c[5], c[6]]),
            Form::DualQuat => Payload::DualQuat(DualQuaternion {
                real: Quaternion::new(c[0], c[1], c[2], c[3]),
                dual: Quaternion::new(c[4], c[5], c[6], c[7]),
            }),
            Form::PgaMotor => Payload::PgaMotor(Multivector::from_coeffs(Signature::PGA, c.to_vec())?),
            Form::CgaMotor => Payload::CgaMotor(Multivector::from_coeffs(Signature::CGA, c.to_vec())?),
        };
        Ok(TransformRepr::new(payload, scale))
    }
}

impl Default for TransformRepr {
    fn default() -> Self {
        TransformRepr::identity()
    }
}
