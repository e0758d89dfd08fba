use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{PatchPair, Point3, PointCloud};
use crate::error::{Error, Result};

/// Random similarity applied to both clouds of a pair, plus clipped Gaussian
/// jitter on the input only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Uniformly random rotation in SO(3).
    pub rotate: bool,
    pub scale_min: f64,
    pub scale_max: f64,
    pub jitter_sigma: f64,
    /// Per-coordinate bound on the jitter offset.
    pub jitter_clip: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rotate: true,
            scale_min: 0.8,
            scale_max: 1.2,
            jitter_sigma: 0.005,
            jitter_clip: 0.02,
        }
    }
}

impl AugmentConfig {
    pub const IDENTITY: AugmentConfig = AugmentConfig {
        rotate: false,
        scale_min: 1.0,
        scale_max: 1.0,
        jitter_sigma: 0.0,
        jitter_clip: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.scale_min > 0.0 && self.scale_min <= self.scale_max && self.scale_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "augmentation scale range [{}, {}] must be positive and ordered",
                self.scale_min, self.scale_max
            )));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_clip >= 0.0 && self.jitter_sigma.is_finite() && self.jitter_clip.is_finite()) {
            return Err(Error::InvalidArgument("augmentation jitter must be finite and non-negative".into()));
        }
        Ok(())
    }
}

type Mat3 = [[f64; 3]; 3];

/// Rotation from a uniformly random unit quaternion.
fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin(), b * (tau * u3).cos());
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn transform(cloud: &PointCloud, m: &Mat3, s: f64) -> PointCloud {
    let apply = |p: Point3| -> Point3 { std::array::from_fn(|r| s * (m[r][0] * p[0] + m[r][1] * p[1] + m[r][2] * p[2])) };
    PointCloud::new(cloud.points().iter().map(|&p| apply(p)).collect()).expect("similarity keeps points finite")
}

/// Augmented copy of `pair`. Stages that are disabled by the config draw no
/// randomness and leave coordinates untouched.
pub fn augment<R: Rng + ?Sized>(pair: &PatchPair, rng: &mut R, config: &AugmentConfig) -> Result<PatchPair> {
    config.validate()?;
    let mut out = pair.clone();
    let rotation = config.rotate.then(|| random_rotation(rng));
    let s = if config.scale_max > config.scale_min {
        rng.random_range(config.scale_min..config.scale_max)
    } else {
        config.scale_min
    };
    if rotation.is_some() || s != 1.0 {
        let m = rotation.unwrap_or([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        out.input = transform(&out.input, &m, s);
        out.target = transform(&out.target, &m, s);
    }
    if config.jitter_sigma > 0.0 {
        let normal = Normal::new(0.0, config.jitter_sigma).expect("sigma validated");
        let clip = config.jitter_clip;
        let pts = out
            .input
            .points()
            .iter()
            .map(|p| std::array::from_fn(|c| p[c] + normal.sample(rng).clamp(-clip, clip)))
            .collect();
        out.input = PointCloud::new(pts)?;
    }
    Ok(out)
}

/// I.i.d. zero-mean Gaussian offset of standard deviation `level` on every
/// coordinate.
pub fn add_gaussian_noise<R: Rng + ?Sized>(points: &PointCloud, level: f64, rng: &mut R) -> Result<PointCloud> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise level {level} must be finite and non-negative")));
    }
    if level == 0.0 {
        return Ok(points.clone());
    }
    let normal = Normal::new(0.0, level).expect("level validated");
    PointCloud::new(points.points().iter().map(|p| std::array::from_fn(|c| p[c] + normal.sample(rng))).collect())
}
