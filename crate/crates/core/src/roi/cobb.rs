//! Center-of-bounding-box mask.
//!
//! Detectors tend to center the object in its box and pad the box slightly,
//! so samples near the box center are far more likely to be on the target
//! than samples near the edges.

use crate::error::{Error, Result};
use crate::frame::{BoundingBox, DepthSample, RoiPointSet};

/// Default mask radius as a fraction of the shorter box side.
pub const DEFAULT_COBB_RATIO: f64 = 0.35;

pub fn cobb_radius(bbox: &BoundingBox, ratio: f64) -> f64 {
    ratio * bbox.width().min(bbox.height())
}

/// `true` when the sample lies within `radius` pixels of the box center.
#[inline]
pub fn within_radius(sample: &DepthSample, center: (f64, f64), radius: f64) -> bool {
    let du = sample.u - center.0;
    let dv = sample.v - center.1;
    du * du + dv * dv <= radius * radius
}

/// Keeps the samples inside the centered circle of radius
/// `ratio * min(width, height)`. Single pass over the samples.
pub fn cobb_filter(roi: &RoiPointSet, ratio: f64) -> Result<RoiPointSet> {
    let center = roi.source_bbox.center();
    let radius = cobb_radius(&roi.source_bbox, ratio);
    let samples: Vec<DepthSample> = roi.samples.iter().copied().filter(|s| within_radius(s, center, radius)).collect();
    if samples.is_empty() {
        return Err(Error::EmptyRoi);
    }
    Ok(RoiPointSet { label: roi.label, samples, source_bbox: roi.source_bbox })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Label;
    use proptest::prelude::*;

    fn bbox_100x60() -> BoundingBox {
        BoundingBox::new(0.0, 0.0, 100.0, 60.0, Label::Hand, 1.0).unwrap()
    }

    #[test]
    fn radius_uses_shorter_side() {
        assert!((cobb_radius(&bbox_100x60(), DEFAULT_COBB_RATIO) - 21.0).abs() < 1e-12);
    }

    #[test]
    fn center_kept_corner_rejected() {
        let roi =
            RoiPointSet::new(bbox_100x60(), vec![DepthSample::new(50.0, 30.0, 1.0), DepthSample::new(0.0, 0.0, 1.0)]);
        let out = cobb_filter(&roi, DEFAULT_COBB_RATIO).unwrap();
        assert_eq!(out.samples, vec![DepthSample::new(50.0, 30.0, 1.0)]);
    }

    #[test]
    fn nothing_survives_is_empty_roi() {
        let roi = RoiPointSet::new(bbox_100x60(), vec![DepthSample::new(100.0, 60.0, 1.0)]);
        assert_eq!(cobb_filter(&roi, DEFAULT_COBB_RATIO), Err(Error::EmptyRoi));
        let none = RoiPointSet::new(bbox_100x60(), vec![]);
        assert_eq!(cobb_filter(&none, DEFAULT_COBB_RATIO), Err(Error::EmptyRoi));
    }

    fn roi_strategy() -> impl Strategy<Value = RoiPointSet> {
        (1.0f64..200.0, 1.0f64..200.0, 0usize..60).prop_flat_map(|(w, h, n)| {
            prop::collection::vec((0.0..=w, 0.0..=h, 0.2f64..8.0), n).prop_map(move |pts| {
                let bbox = BoundingBox::new(0.0, 0.0, w, h, Label::Face, 0.5).unwrap();
                RoiPointSet::new(bbox, pts.into_iter().map(|(u, v, z)| DepthSample::new(u, v, z)).collect())
            })
        })
    }

    proptest! {
        #[test]
        fn output_is_exact_radius_subset(roi in roi_strategy()) {
            let center = roi.source_bbox.center();
            let r = cobb_radius(&roi.source_bbox, DEFAULT_COBB_RATIO);
            let expected = roi.samples.iter().filter(|s| within_radius(s, center, r)).count();
            match cobb_filter(&roi, DEFAULT_COBB_RATIO) {
                Ok(out) => {
                    prop_assert!(out.samples.iter().all(|s| roi.samples.contains(s)));
                    prop_assert!(out.samples.iter().all(|s| within_radius(s, center, r)));
                    prop_assert_eq!(out.samples.len(), expected);
                }
                Err(e) => {
                    prop_assert_eq!(e, Error::EmptyRoi);
                    prop_assert_eq!(expected, 0);
                }
            }
        }

        #[test]
        fn permutation_invariant(roi in roi_strategy(), seed in any::<u64>()) {
            let mut shuffled = roi.clone();
            // deterministic Fisher-Yates driven by the seed
            let mut state = seed | 1;
            for i in (1..shuffled.samples.len()).rev() {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                let j = (state % (i as u64 + 1)) as usize;
                shuffled.samples.swap(i, j);
            }
            let key = |s: &DepthSample| (s.u.to_bits(), s.v.to_bits(), s.z.to_bits());
            let mut a: Vec<_> = cobb_filter(&roi, DEFAULT_COBB_RATIO).map(|r| r.samples).unwrap_or_default().iter().map(key).collect();
            let mut b: Vec<_> = cobb_filter(&shuffled, DEFAULT_COBB_RATIO).map(|r| r.samples).unwrap_or_default().iter().map(key).collect();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }
    }
}
