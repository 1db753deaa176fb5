//! Inverse affine matrices (output pixel -> source pixel) and recentring.

use std::ops::Mul;

use crate::error::{Error, Result};
use crate::transforms::geometric::{GeoOp, GeoParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMatrix(pub [[f64; 3]; 3]);

impl AffineMatrix {
    pub const IDENTITY: AffineMatrix = AffineMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Builds a matrix from its top two rows; the last row is `(0, 0, 1)`.
    pub fn from_rows(r0: [f64; 3], r1: [f64; 3]) -> Result<Self> {
        let m = AffineMatrix([r0, r1, [0.0, 0.0, 1.0]]);
        if m.det2().abs() <= 1e-9 || !r0.iter().chain(&r1).all(|v| v.is_finite()) {
            return Err(Error::Param(format!("affine matrix is singular: {m:?}")));
        }
        Ok(m)
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        AffineMatrix([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])
    }

    /// Determinant of the upper-left 2x2 block.
    pub fn det2(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.0;
        (m[0][0] * x + m[0][1] * y + m[0][2], m[1][0] * x + m[1][1] * y + m[1][2])
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det2();
        if det.abs() <= 1e-9 {
            return Err(Error::Param("affine matrix is singular".into()));
        }
        let m = &self.0;
        let a = m[1][1] / det;
        let b = -m[0][1] / det;
        let c = -m[1][0] / det;
        let d = m[0][0] / det;
        Ok(AffineMatrix([
            [a, b, -(a * m[0][2] + b * m[1][2])],
            [c, d, -(c * m[0][2] + d * m[1][2])],
            [0.0, 0.0, 1.0],
        ]))
    }

    pub fn max_abs_diff(&self, other: &AffineMatrix) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Mul for AffineMatrix {
    type Output = AffineMatrix;

    fn mul(self, rhs: AffineMatrix) -> AffineMatrix {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        AffineMatrix(out)
    }
}

/// Standard (origin-anchored) inverse matrix of one geometric operation.
pub fn inverse_affine(kind: GeoOp, params: &GeoParams, width: usize, height: usize) -> Result<AffineMatrix> {
    params.validate()?;
    let m = match kind {
        GeoOp::Ro => {
            let (s, c) = params.ro.sin_cos();
            AffineMatrix([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        }
        GeoOp::Tr => AffineMatrix::translation(-params.tr_x * width as f64, -params.tr_y * height as f64),
        GeoOp::Sc => {
            let k = 1.0 / params.sc;
            AffineMatrix([[k, 0.0, 0.0], [0.0, k, 0.0], [0.0, 0.0, 1.0]])
        }
        GeoOp::Sh => AffineMatrix([
            [1.0, params.sh_x.tan(), 0.0],
            [params.sh_y.tan(), 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ]),
    };
    if m.det2().abs() <= 1e-9 {
        return Err(Error::Param(format!(
            "{kind:?} with {params:?} gives a singular matrix"
        )));
    }
    Ok(m)
}

/// Conjugates `m` so it acts about the pixel centre `((w-1)/2, (h-1)/2)`.
pub fn recenter(m: &AffineMatrix, width: usize, height: usize) -> AffineMatrix {
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    AffineMatrix::translation(cx, cy) * *m * AffineMatrix::translation(-cx, -cy)
}

/// Recentred inverse matrix for one operation, as used by the warps.
pub fn step_matrix(kind: GeoOp, params: &GeoParams, width: usize, height: usize) -> Result<AffineMatrix> {
    Ok(recenter(&inverse_affine(kind, params, width, height)?, width, height))
}
