//! Phase-to-modal voltage transforms.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::registry::Registry;

pub const DEFAULT_MODAL_TRANSFORM: &str = "clarke-power-invariant";

/// Fixed real 3x3 map from (va, vb, vc) to (v0, v1, v2).
pub trait ModalTransform: Send + Sync {
    fn name(&self) -> &'static str;
    fn matrix(&self) -> Matrix3<f64>;

    fn inverse(&self) -> Matrix3<f64> {
        self.matrix()
            .try_inverse()
            .expect("modal transforms are invertible")
    }

    fn forward(&self, va: &[f64], vb: &[f64], vc: &[f64]) -> Result<[Vec<f64>; 3]> {
        apply(&self.matrix(), [va, vb, vc])
    }

    fn backward(&self, v0: &[f64], v1: &[f64], v2: &[f64]) -> Result<[Vec<f64>; 3]> {
        apply(&self.inverse(), [v0, v1, v2])
    }
}

fn apply(m: &Matrix3<f64>, x: [&[f64]; 3]) -> Result<[Vec<f64>; 3]> {
    let n = x[0].len();
    if x[1].len() != n || x[2].len() != n {
        return Err(Error::LengthMismatch(format!(
            "channels have {}, {} and {} samples",
            x[0].len(),
            x[1].len(),
            x[2].len()
        )));
    }
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        for (r, o) in out.iter_mut().enumerate() {
            o[k] = m[(r, 0)] * x[0][k] + m[(r, 1)] * x[1][k] + m[(r, 2)] * x[2][k];
        }
    }
    Ok(out)
}

/// Orthogonal Clarke matrix (the inverse is the transpose).
pub struct ClarkePowerInvariant;

impl ModalTransform for ClarkePowerInvariant {
    fn name(&self) -> &'static str {
        "clarke-power-invariant"
    }

    fn matrix(&self) -> Matrix3<f64> {
        let s2 = 2f64.sqrt();
        let s3 = 3f64.sqrt();
        let s6 = 6f64.sqrt();
        Matrix3::new(
            1.0 / s3, 1.0 / s3, 1.0 / s3,
            2.0 / s6, -1.0 / s6, -1.0 / s6,
            0.0, 1.0 / s2, -1.0 / s2,
        )
    }

    fn inverse(&self) -> Matrix3<f64> {
        self.matrix().transpose()
    }
}

/// Clarke matrix scaled so a balanced set keeps its phase amplitude.
pub struct ClarkeAmplitudeInvariant;

impl ModalTransform for ClarkeAmplitudeInvariant {
    fn name(&self) -> &'static str {
        "clarke-amplitude-invariant"
    }

    fn matrix(&self) -> Matrix3<f64> {
        let s3 = 3f64.sqrt();
        Matrix3::new(
            1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0,
            2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0,
            0.0, 1.0 / s3, -1.0 / s3,
        )
    }
}

pub static MODAL_TRANSFORMS: Registry<dyn ModalTransform> = Registry::new(
    "modal transform",
    &[
        ("clarke-power-invariant", || Box::new(ClarkePowerInvariant)),
        ("clarke-amplitude-invariant", || Box::new(ClarkeAmplitudeInvariant)),
    ],
);

/// Applies the default modal transform sample-wise.
pub fn modal_transform(va: &[f64], vb: &[f64], vc: &[f64]) -> Result<[Vec<f64>; 3]> {
    ClarkePowerInvariant.forward(va, vb, vc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all() -> Vec<Box<dyn ModalTransform>> {
        MODAL_TRANSFORMS
            .names()
            .into_iter()
            .map(|n| MODAL_TRANSFORMS.get(n).unwrap())
            .collect()
    }

    #[test]
    fn balanced_set_has_no_zero_mode() {
        let n = 200;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * 1e-4).collect();
        let w = 2.0 * std::f64::consts::PI * 60.0;
        let ph = 2.0 * std::f64::consts::PI / 3.0;
        let va: Vec<f64> = t.iter().map(|t| (w * t).sin()).collect();
        let vb: Vec<f64> = t.iter().map(|t| (w * t - ph).sin()).collect();
        let vc: Vec<f64> = t.iter().map(|t| (w * t + ph).sin()).collect();
        for m in all() {
            let [v0, _, _] = m.forward(&va, &vb, &vc).unwrap();
            assert!(v0.iter().all(|x| x.abs() < 1e-12), "{}", m.name());
        }
    }

    #[test]
    fn common_mode_is_pure_zero_mode() {
        let ones = vec![1.0; 10];
        for m in all() {
            let [v0, v1, v2] = m.forward(&ones, &ones, &ones).unwrap();
            assert!(v1.iter().chain(&v2).all(|x| x.abs() < 1e-15));
            assert!(v0.iter().all(|x| (x - v0[0]).abs() < 1e-15 && *x > 0.0));
        }
    }

    #[test]
    fn zero_mode_row_is_uniform() {
        for m in all() {
            let r = m.matrix();
            assert!((r[(0, 0)] - r[(0, 1)]).abs() < 1e-15 && (r[(0, 0)] - r[(0, 2)]).abs() < 1e-15);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            modal_transform(&[1.0], &[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(
            MODAL_TRANSFORMS.get("park"),
            Err(Error::Unknown { .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip(xs in prop::collection::vec((-1e5f64..1e5, -1e5f64..1e5, -1e5f64..1e5), 100)) {
            let va: Vec<f64> = xs.iter().map(|x| x.0).collect();
            let vb: Vec<f64> = xs.iter().map(|x| x.1).collect();
            let vc: Vec<f64> = xs.iter().map(|x| x.2).collect();
            for m in all() {
                let [a, b, c] = m.forward(&va, &vb, &vc).unwrap();
                let [ra, rb, rc] = m.backward(&a, &b, &c).unwrap();
                // independent oracle: numerically inverted matrix
                let inv = m.matrix().try_inverse().unwrap();
                for k in 0..va.len() {
                    let scale = 1.0 + va[k].abs() + vb[k].abs() + vc[k].abs();
                    prop_assert!((ra[k] - va[k]).abs() / scale < 1e-12);
                    prop_assert!((rb[k] - vb[k]).abs() / scale < 1e-12);
                    prop_assert!((rc[k] - vc[k]).abs() / scale < 1e-12);
                    let o = inv * nalgebra::Vector3::new(a[k], b[k], c[k]);
                    prop_assert!((o[0] - va[k]).abs() / scale < 1e-12);
                }
            }
        }
    }
}
