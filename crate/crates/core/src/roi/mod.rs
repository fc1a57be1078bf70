//! Outlier rejection inside a region of interest and reduction of the
//! surviving samples to a single 3D keypoint.

mod cobb;
mod dbscan;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cobb::{cobb_filter, cobb_radius, within_radius, DEFAULT_COBB_RATIO};
pub use dbscan::{dbscan_depth, select_target_cluster, Clustering, DepthCluster, DEFAULT_EPS, DEFAULT_MIN_PTS};

use crate::camera::{deproject_pixel, Camera, CameraIntrinsics, Point3};
use crate::error::{Error, Result};
use crate::frame::{DepthSample, RoiPointSet};

/// How a keypoint's depth is chosen from an ROI's samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KeypointStrategy {
    /// Mean depth of the CoBB-masked samples.
    #[serde(rename = "mean")]
    MeanDepth,
    /// Median depth of the CoBB-masked samples.
    #[serde(rename = "median")]
    MedianDepth,
    /// Depth of the CoBB-masked sample nearest the camera.
    #[serde(rename = "closest")]
    ClosestPoint,
    /// Mean depth of the dominant depth cluster over the whole box.
    #[serde(rename = "dbscan")]
    DbscanCluster,
}

impl KeypointStrategy {
    pub const ALL: [KeypointStrategy; 4] = [
        KeypointStrategy::MeanDepth,
        KeypointStrategy::MedianDepth,
        KeypointStrategy::ClosestPoint,
        KeypointStrategy::DbscanCluster,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            KeypointStrategy::MeanDepth => "mean",
            KeypointStrategy::MedianDepth => "median",
            KeypointStrategy::ClosestPoint => "closest",
            KeypointStrategy::DbscanCluster => "dbscan",
        }
    }

    pub fn uses_cobb(&self) -> bool {
        !matches!(self, KeypointStrategy::DbscanCluster)
    }
}

impl fmt::Display for KeypointStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KeypointStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" | "mean-depth" => Ok(KeypointStrategy::MeanDepth),
            "median" | "median-depth" => Ok(KeypointStrategy::MedianDepth),
            "closest" | "closest-point" | "min" => Ok(KeypointStrategy::ClosestPoint),
            "dbscan" | "dbscan-cluster" => Ok(KeypointStrategy::DbscanCluster),
            other => Err(Error::InvalidParameter(format!(
                "unknown strategy `{other}` (expected mean, median, closest or dbscan)"
            ))),
        }
    }
}

/// Outlier-rejection parameters shared by face and hand ROIs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiParams {
    pub eps: f64,
    pub min_pts: usize,
    pub cobb_ratio: f64,
}

impl Default for RoiParams {
    fn default() -> Self {
        Self { eps: DEFAULT_EPS, min_pts: DEFAULT_MIN_PTS, cobb_ratio: DEFAULT_COBB_RATIO }
    }
}

impl RoiParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be > 0 (got {})", self.eps)));
        }
        if self.min_pts == 0 {
            return Err(Error::InvalidParameter("min_pts must be >= 1".into()));
        }
        if !(self.cobb_ratio > 0.0 && self.cobb_ratio <= 0.5) {
            return Err(Error::InvalidParameter(format!("cobb_ratio must lie in (0, 0.5] (got {})", self.cobb_ratio)));
        }
        Ok(())
    }
}

fn pixel_centroid<'a>(samples: impl ExactSizeIterator<Item = &'a DepthSample>) -> (f64, f64) {
    let n = samples.len() as f64;
    let (su, sv) = samples.fold((0.0, 0.0), |(su, sv), s| (su + s.u, sv + s.v));
    (su / n, sv / n)
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Reduces already-selected samples to a keypoint: pixel centroid of the
/// samples, deprojected at the strategy's depth statistic.
///
/// For the three CoBB strategies `roi` should already be masked; for
/// [`KeypointStrategy::DbscanCluster`] it should be the raw box contents and
/// the keypoint is built from the dominant cluster's members only.
pub fn estimate_keypoint(
    roi: &RoiPointSet,
    strategy: KeypointStrategy,
    params: &RoiParams,
    intr: &CameraIntrinsics,
) -> Result<Point3<Camera>> {
    if roi.samples.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let samples = &roi.samples;
    let (u, v, z) = match strategy {
        KeypointStrategy::MeanDepth => {
            let (u, v) = pixel_centroid(samples.iter());
            let z = samples.iter().map(|s| s.z).sum::<f64>() / samples.len() as f64;
            (u, v, z)
        }
        KeypointStrategy::MedianDepth => {
            let (u, v) = pixel_centroid(samples.iter());
            (u, v, median(samples.iter().map(|s| s.z).collect()))
        }
        KeypointStrategy::ClosestPoint => {
            let (u, v) = pixel_centroid(samples.iter());
            let z = samples.iter().map(|s| s.z).fold(f64::INFINITY, f64::min);
            (u, v, z)
        }
        KeypointStrategy::DbscanCluster => {
            let clustering = dbscan_depth(samples, params.eps, params.min_pts)?;
            let target = select_target_cluster(&clustering.clusters)?;
            let (u, v) = pixel_centroid(target.member_indices.iter().map(|&i| &samples[i]));
            (u, v, target.mean_depth)
        }
    };
    deproject_pixel(u, v, z, intr)
}

/// Full per-ROI path: CoBB mask (for the CoBB strategies) then keypoint.
pub fn roi_keypoint(
    roi: &RoiPointSet,
    strategy: KeypointStrategy,
    params: &RoiParams,
    intr: &CameraIntrinsics,
) -> Result<Point3<Camera>> {
    if strategy.uses_cobb() {
        let masked = cobb_filter(roi, params.cobb_ratio)?;
        estimate_keypoint(&masked, strategy, params, intr)
    } else {
        estimate_keypoint(roi, strategy, params, intr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::deproject;
    use crate::frame::{BoundingBox, Label};
    use proptest::prelude::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480, 1.0).unwrap()
    }

    fn roi(samples: Vec<DepthSample>) -> RoiPointSet {
        RoiPointSet::new(BoundingBox::new(0.0, 0.0, 100.0, 100.0, Label::Hand, 1.0).unwrap(), samples)
    }

    fn depth_with(strategy: KeypointStrategy, r: &RoiPointSet) -> f64 {
        estimate_keypoint(r, strategy, &RoiParams::default(), &intr()).unwrap().z
    }

    #[test]
    fn order_statistics() {
        let r = roi(vec![
            DepthSample::new(50.0, 50.0, 1.0),
            DepthSample::new(50.0, 50.0, 2.0),
            DepthSample::new(50.0, 50.0, 3.0),
        ]);
        assert_eq!(depth_with(KeypointStrategy::MeanDepth, &r), 2.0);
        assert_eq!(depth_with(KeypointStrategy::MedianDepth, &r), 2.0);
        assert_eq!(depth_with(KeypointStrategy::ClosestPoint, &r), 1.0);
    }

    #[test]
    fn even_median_averages_middle_pair() {
        let r = roi([4.0, 1.0, 3.0, 2.0].iter().map(|&z| DepthSample::new(50.0, 50.0, z)).collect());
        assert_eq!(depth_with(KeypointStrategy::MedianDepth, &r), 2.5);
    }

    #[test]
    fn singleton_is_its_own_keypoint() {
        let s = DepthSample::new(42.0, 17.0, 1.7);
        let expected = deproject(&s, &intr()).unwrap();
        let params = RoiParams { min_pts: 1, ..RoiParams::default() };
        for strategy in KeypointStrategy::ALL {
            let p = estimate_keypoint(&roi(vec![s]), strategy, &params, &intr()).unwrap();
            assert_eq!(p, expected, "{strategy}");
        }
    }

    #[test]
    fn centroid_is_arithmetic_mean() {
        let r = roi(vec![DepthSample::new(10.0, 10.0, 2.0), DepthSample::new(20.0, 20.0, 2.0)]);
        let p = estimate_keypoint(&r, KeypointStrategy::MeanDepth, &RoiParams::default(), &intr()).unwrap();
        let expected = deproject_pixel(15.0, 15.0, 2.0, &intr()).unwrap();
        assert!(p.distance(&expected) < 1e-15);
    }

    #[test]
    fn dbscan_keypoint_ignores_background() {
        let mut samples: Vec<_> =
            (0..6).map(|i| DepthSample::new(40.0 + i as f64, 50.0, 1.5 + 0.01 * i as f64)).collect();
        samples.extend((0..3).map(|i| DepthSample::new(2.0 + i as f64, 2.0, 3.0)));
        let p =
            estimate_keypoint(&roi(samples), KeypointStrategy::DbscanCluster, &RoiParams::default(), &intr()).unwrap();
        assert!((p.z - 1.525).abs() < 1e-12);
        let expected = deproject_pixel(42.5, 50.0, 1.525, &intr()).unwrap();
        assert!(p.distance(&expected) < 1e-12);
    }

    #[test]
    fn error_paths() {
        let params = RoiParams::default();
        for strategy in KeypointStrategy::ALL {
            assert_eq!(estimate_keypoint(&roi(vec![]), strategy, &params, &intr()), Err(Error::EmptyRoi));
        }
        let sparse = roi(vec![DepthSample::new(50.0, 50.0, 1.0), DepthSample::new(50.0, 50.0, 4.0)]);
        assert_eq!(estimate_keypoint(&sparse, KeypointStrategy::DbscanCluster, &params, &intr()), Err(Error::NoTarget));
        let outside = roi(vec![DepthSample::new(0.0, 0.0, 1.0)]);
        assert_eq!(roi_keypoint(&outside, KeypointStrategy::MeanDepth, &params, &intr()), Err(Error::EmptyRoi));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in KeypointStrategy::ALL {
            assert_eq!(s.as_str().parse::<KeypointStrategy>().unwrap(), s);
        }
        assert!("bogus".parse::<KeypointStrategy>().is_err());
    }

    #[test]
    fn params_validation() {
        assert!(RoiParams::default().validate().is_ok());
        assert!(RoiParams { cobb_ratio: 0.6, ..Default::default() }.validate().is_err());
        assert!(RoiParams { cobb_ratio: 0.0, ..Default::default() }.validate().is_err());
        assert!(RoiParams { eps: -1.0, ..Default::default() }.validate().is_err());
        assert!(RoiParams { min_pts: 0, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn mean_and_median_are_permutation_invariant(
            pts in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0, 0.3f64..6.0), 1..40),
            rotate in 0usize..40,
        ) {
            let samples: Vec<_> = pts.iter().map(|&(u, v, z)| DepthSample::new(u, v, z)).collect();
            let mut permuted = samples.clone();
            permuted.reverse();
            let k = rotate % permuted.len();
            permuted.rotate_left(k);
            for strategy in [KeypointStrategy::MeanDepth, KeypointStrategy::MedianDepth, KeypointStrategy::ClosestPoint] {
                let a = estimate_keypoint(&roi(samples.clone()), strategy, &RoiParams::default(), &intr()).unwrap();
                let b = estimate_keypoint(&roi(permuted.clone()), strategy, &RoiParams::default(), &intr()).unwrap();
                prop_assert!(a.distance(&b) < 1e-9);
            }
            let closest = estimate_keypoint(&roi(samples.clone()), KeypointStrategy::ClosestPoint, &RoiParams::default(), &intr()).unwrap();
            let min_z = pts.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(closest.z, min_z);
        }
    }
}
