//! Projective transforms and their estimation from point correspondences.
//!
//! Estimation is the normalized DLT: both point sets are translated to a zero
//! centroid and scaled to a mean distance of √2, the 2N×9 homogeneous system
//! `A h = 0` is solved by SVD, and the result is de-normalized.

use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Smallest |det| accepted after normalization.
pub const MIN_ABS_DET: f64 = 1e-12;

/// Ratio σ₈/σ₁ (second-smallest to largest singular value of the normalized
/// design matrix) below which the configuration is treated as degenerate.
pub const CONDITION_THRESHOLD: f64 = 1e-8;

/// A 3×3 projective transform acting on `(x, y, 1)` pixel coordinates.
///
/// Stored normalized: `m[2][2] == 1` when that entry is non-zero, otherwise
/// unit Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

impl Homography {
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "homography has non-finite entries".into(),
            ));
        }
        let mut mat = Matrix3::from_fn(|r, c| m[r][c]);
        let corner = mat[(2, 2)];
        if corner.abs() > f64::EPSILON * mat.norm() {
            mat /= corner;
        } else {
            let n = mat.norm();
            if n == 0.0 {
                return Err(Error::Degenerate("zero homography".into()));
            }
            mat /= n;
        }
        if mat.determinant().abs() <= MIN_ABS_DET {
            return Err(Error::Degenerate(format!(
                "homography is singular (det {:e})",
                mat.determinant()
            )));
        }
        Ok(Self::from_matrix(&mat))
    }

    fn from_matrix(mat: &Matrix3<f64>) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = mat[(r, c)];
            }
        }
        Self { m }
    }

    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    pub fn scaling(sx: f64, sy: f64) -> Result<Self> {
        Self::new([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.m
    }

    fn as_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.m[r][c])
    }

    /// Maps `(x, y)`; `None` when the point lands on the line at infinity.
    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let m = &self.m;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        if w.abs() < 1e-12 {
            return None;
        }
        Some((
            (m[0][0] * x + m[0][1] * y + m[0][2]) / w,
            (m[1][0] * x + m[1][1] * y + m[1][2]) / w,
        ))
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .as_matrix()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("homography is not invertible".into()))?;
        Self::new(Self::from_matrix(&inv).m)
    }

    /// `self · other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Homography) -> Result<Self> {
        Self::new(Self::from_matrix(&(self.as_matrix() * other.as_matrix())).m)
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let m: [[f64; 3]; 3] = serde_json::from_slice(bytes)?;
        Self::new(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_slice(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(&self.m).expect("matrix serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = <[[f64; 3]; 3]>::deserialize(d)?;
        Homography::new(m).map_err(serde::de::Error::custom)
    }
}

/// A point in cube pixel coordinates and its match in RGB pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub src: [f64; 2],
    pub dst: [f64; 2],
}

pub fn parse_correspondences(bytes: &[u8]) -> Result<Vec<Correspondence>> {
    let points: Vec<Correspondence> = serde_json::from_slice(bytes)?;
    if points
        .iter()
        .any(|p| p.src.iter().chain(&p.dst).any(|v| !v.is_finite()))
    {
        return Err(Error::InvalidInput("non-finite correspondence".into()));
    }
    Ok(points)
}

pub fn load_correspondences(path: impl AsRef<Path>) -> Result<Vec<Correspondence>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_correspondences(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomographyEstimate {
    pub homography: Homography,
    /// Root-mean-square reprojection error over the input points, in RGB pixels.
    pub rms: f64,
}

/// Similarity transform taking the centroid to the origin and the mean
/// distance from it to √2.
fn normalizer(points: impl Iterator<Item = [f64; 2]> + Clone) -> Result<Matrix3<f64>> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points
        .clone()
        .fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = points
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist <= 1e-12 * (1.0 + cx.abs().max(cy.abs())) {
        return Err(Error::Degenerate("points are coincident".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(
        s,
        0.0,
        -s * cx,
        0.0,
        s,
        -s * cy,
        0.0,
        0.0,
        1.0,
    ))
}

fn transform(t: &Matrix3<f64>, p: [f64; 2]) -> (f64, f64) {
    let v = t * Vector3::new(p[0], p[1], 1.0);
    (v[0] / v[2], v[1] / v[2])
}

/// Normalized-DLT estimate of the homography taking `src` to `dst`.
pub fn estimate_homography(points: &[Correspondence]) -> Result<HomographyEstimate> {
    if points.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 correspondences, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| p.src.iter().chain(&p.dst).any(|v| !v.is_finite()))
    {
        return Err(Error::InvalidInput("non-finite correspondence".into()));
    }
    let t_src = normalizer(points.iter().map(|p| p.src))?;
    let t_dst = normalizer(points.iter().map(|p| p.dst))?;

    let n = points.len();
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, p) in points.iter().enumerate() {
        let (x, y) = transform(&t_src, p.src);
        let (u, v) = transform(&t_dst, p.dst);
        let r0 = 2 * i;
        let r1 = r0 + 1;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let largest = svd.singular_values[order[0]];
    let second_smallest = svd.singular_values[order[7]];
    if !(second_smallest > CONDITION_THRESHOLD * largest) {
        return Err(Error::Degenerate(format!(
            "ill-conditioned correspondence set (σ8/σ1 = {:e})",
            second_smallest / largest
        )));
    }
    let h = v_t.row(order[8]);
    let h_norm = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);

    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("normalization not invertible".into()))?;
    let homography = Homography::new(Homography::from_matrix(&(t_dst_inv * h_norm * t_src)).m)?;

    let mut sq = 0.0;
    for p in points {
        match homography.apply(p.src[0], p.src[1]) {
            Some((x, y)) => sq += (x - p.dst[0]).powi(2) + (y - p.dst[1]).powi(2),
            None => return Err(Error::Degenerate("point maps to infinity".into())),
        }
    }
    Ok(HomographyEstimate {
        homography,
        rms: (sq / n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(src: [f64; 2], h: &Homography) -> Correspondence {
        let (x, y) = h.apply(src[0], src[1]).unwrap();
        Correspondence { src, dst: [x, y] }
    }

    fn square() -> Vec<[f64; 2]> {
        vec![[0.0, 0.0], [100.0, 0.0], [100.0, 80.0], [0.0, 80.0]]
    }

    fn max_entry_diff(a: &Homography, b: &Homography) -> f64 {
        a.matrix()
            .iter()
            .flatten()
            .zip(b.matrix().iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_from_four_points() {
        let id = Homography::identity();
        let pts: Vec<_> = square().into_iter().map(|p| corr(p, &id)).collect();
        let est = estimate_homography(&pts).unwrap();
        assert!(est.rms < 1e-9);
        assert!(max_entry_diff(&est.homography, &id) < 1e-9);
    }

    #[test]
    fn translation_recovered() {
        let t = Homography::translation(3.0, -2.0);
        let pts: Vec<_> = square().into_iter().map(|p| corr(p, &t)).collect();
        let est = estimate_homography(&pts).unwrap();
        assert!(max_entry_diff(&est.homography, &t) < 1e-9);
    }

    #[test]
    fn too_few_points() {
        let id = Homography::identity();
        let pts: Vec<_> = square()[..3].iter().map(|&p| corr(p, &id)).collect();
        assert!(matches!(
            estimate_homography(&pts),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn collinear_points_rejected() {
        let id = Homography::identity();
        let pts: Vec<_> = (0..8)
            .map(|i| corr([i as f64 * 10.0, i as f64 * 5.0 + 1.0], &id))
            .collect();
        assert!(matches!(
            estimate_homography(&pts),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn three_of_four_collinear_rejected() {
        let id = Homography::identity();
        let pts: Vec<_> = [[0.0, 0.0], [50.0, 0.0], [100.0, 0.0], [20.0, 60.0]]
            .into_iter()
            .map(|p| corr(p, &id))
            .collect();
        assert!(matches!(
            estimate_homography(&pts),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn coincident_points_rejected() {
        let pts = vec![
            Correspondence {
                src: [5.0, 5.0],
                dst: [1.0, 2.0]
            };
            6
        ];
        assert!(matches!(
            estimate_homography(&pts),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn singular_matrix_rejected() {
        assert!(Homography::new([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        assert!(Homography::new([[0.0; 3]; 3]).is_err());
    }

    #[test]
    fn normalization_forms() {
        let h = Homography::new([[2.0, 0.0, 4.0], [0.0, 2.0, 6.0], [0.0, 0.0, 2.0]]).unwrap();
        assert_eq!(h, Homography::translation(2.0, 3.0));
        // zero corner → unit Frobenius norm
        let h = Homography::new([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0]]).unwrap();
        let norm: f64 = h.matrix().iter().flatten().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_and_compose() {
        let h = Homography::new([[1.1, 0.05, 3.0], [-0.02, 0.9, 7.0], [1e-4, 2e-4, 1.0]]).unwrap();
        let round = h.compose(&h.inverse().unwrap()).unwrap();
        assert!(max_entry_diff(&round, &Homography::identity()) < 1e-12);
    }

    #[test]
    fn json_forms() {
        let h = Homography::translation(1.5, -2.0);
        let json = serde_json::to_string(&h).unwrap();
        assert_eq!(json, "[[1.0,0.0,1.5],[0.0,1.0,-2.0],[0.0,0.0,1.0]]");
        assert_eq!(Homography::from_json_slice(json.as_bytes()).unwrap(), h);
        let pts = parse_correspondences(br#"[{"src":[0,0],"dst":[1,2]}]"#).unwrap();
        assert_eq!(pts[0].dst, [1.0, 2.0]);
        assert!(parse_correspondences(br#"[{"src":[0],"dst":[1,2]}]"#).is_err());
    }
}
