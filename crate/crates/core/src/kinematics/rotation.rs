//! Rotation algebra: unit quaternions, Euler triples in BVH channel order,
//! and 3x3 matrices.

use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Middle-angle distance from ±90° below which an Euler decomposition is
/// treated as gimbal-locked.
pub const GIMBAL_MARGIN_DEG: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        match i {
            0 => Axis::X,
            1 => Axis::Y,
            _ => Axis::Z,
        }
    }
}

/// Three distinct axes; the first entry is applied outermost.
pub type RotationOrder = [Axis; 3];

pub fn is_permutation(order: &RotationOrder) -> bool {
    order[0] != order[1] && order[1] != order[2] && order[0] != order[2]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_axis_angle(axis: Axis, radians: f64) -> Self {
        let (s, c) = (radians * 0.5).sin_cos();
        let mut q = Quaternion::new(c, 0.0, 0.0, 0.0);
        match axis {
            Axis::X => q.x = s,
            Axis::Y => q.y = s,
            Axis::Z => q.z = s,
        }
        q
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(self, o: Quaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn normalize(self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    /// Picks the representative with `w >= 0`.
    pub fn canonical(self) -> Self {
        if self.w < 0.0 {
            Self::new(-self.w, -self.x, -self.y, -self.z)
        } else {
            self
        }
    }

    pub fn conjugate(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn mul(self, o: Quaternion) -> Self {
        Quaternion {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        mat_vec(&self.to_matrix(), v)
    }

    /// Rotation matrix of a unit quaternion. The polynomial form is used for
    /// non-unit inputs too, which keeps it consistent with the
    /// differentiable kinematics op.
    pub fn to_matrix(self) -> Mat3 {
        let Quaternion { w, x, y, z } = self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Angle in degrees between the rotations represented by `self` and `o`.
    pub fn angle_to(self, o: Quaternion) -> f64 {
        let rel = self.normalize().conjugate().mul(o.normalize());
        let v = (rel.x * rel.x + rel.y * rel.y + rel.z * rel.z).sqrt();
        2.0 * v.atan2(rel.w.abs()).to_degrees()
    }
}

/// Composes intrinsic axis rotations: `angles[i]` (degrees) about `order[i]`,
/// with `order[0]` outermost. This is how BVH channel triples are read.
pub fn euler_to_quaternion(angles: [f64; 3], order: RotationOrder) -> Quaternion {
    let mut q = Quaternion::IDENTITY;
    for (a, axis) in angles.iter().zip(order) {
        q = q.mul(Quaternion::from_axis_angle(axis, a.to_radians()));
    }
    q.normalize().canonical()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerDecomposition {
    pub angles: [f64; 3],
    pub gimbal: bool,
}

/// Inverse of [`euler_to_quaternion`]. Near gimbal lock the third angle is
/// zeroed and the first absorbs the coupled rotation.
pub fn quaternion_to_euler(q: Quaternion, order: RotationOrder) -> EulerDecomposition {
    let m = q.normalize().to_matrix();
    let (i, j, k) = (order[0].index(), order[1].index(), order[2].index());
    let parity = if (j + 3 - i) % 3 == 1 { 1.0 } else { -1.0 };
    let sin_mid = (parity * m[i][k]).clamp(-1.0, 1.0);
    let mid = sin_mid.asin();
    let gimbal = (90.0 - mid.to_degrees().abs()) < GIMBAL_MARGIN_DEG;
    let (first, third) = if gimbal {
        ((parity * m[k][j]).atan2(m[j][j]), 0.0)
    } else {
        (
            (-parity * m[j][k]).atan2(m[k][k]),
            (-parity * m[i][j]).atan2(m[i][i]),
        )
    };
    EulerDecomposition {
        angles: [first.to_degrees(), mid.to_degrees(), third.to_degrees()],
        gimbal,
    }
}

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c];
        }
    }
    out
}

pub fn mat_transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (r, row) in m.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            out[c][r] = *v;
        }
    }
    out
}

pub const MAT3_IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn norm3(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}
