//! DBSCAN over sample depth only.
//!
//! In one dimension the eps-neighborhood of a point is a contiguous run of
//! the depth-sorted samples, so neighbor counts come from a two-pointer sweep
//! and core points connect exactly when consecutive cores (in depth order)
//! are within eps of each other. The whole pass is O(n log n).

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::frame::DepthSample;

/// Default neighborhood radius in meters.
pub const DEFAULT_EPS: f64 = 0.15;
/// Default neighborhood size (the point itself counts).
pub const DEFAULT_MIN_PTS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct DepthCluster {
    /// Indices into the clustered samples, ascending.
    pub member_indices: Vec<usize>,
    /// The subset of `member_indices` that are core points, ascending.
    pub core_indices: Vec<usize>,
    pub mean_depth: f64,
    pub size: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Clustering {
    /// Ordered by the lowest input index among each cluster's core points.
    pub clusters: Vec<DepthCluster>,
    /// Indices of samples that belong to no cluster, ascending.
    pub noise: Vec<usize>,
}

/// Clusters samples by depth. `eps` is inclusive: two samples are
/// neighbors when `|z_a - z_b| <= eps`.
///
/// A border point reachable from several clusters joins the cluster of the
/// lowest-indexed core point that reaches it.
pub fn dbscan_depth(samples: &[DepthSample], eps: f64, min_pts: usize) -> Result<Clustering> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be > 0 (got {eps})")));
    }
    if min_pts == 0 {
        return Err(Error::InvalidParameter("min_pts must be >= 1".into()));
    }
    let n = samples.len();
    if n == 0 {
        return Ok(Clustering::default());
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| samples[a].z.total_cmp(&samples[b].z).then(a.cmp(&b)));
    let zs: Vec<f64> = order.iter().map(|&i| samples[i].z).collect();

    // Neighborhood [lo, hi] in sorted positions.
    let mut lo = vec![0usize; n];
    let mut hi = vec![0usize; n];
    let (mut l, mut h) = (0usize, 0usize);
    for i in 0..n {
        while zs[i] - zs[l] > eps {
            l += 1;
        }
        if h < i {
            h = i;
        }
        while h + 1 < n && zs[h + 1] - zs[i] <= eps {
            h += 1;
        }
        lo[i] = l;
        hi[i] = h;
    }
    let is_core: Vec<bool> = (0..n).map(|i| hi[i] - lo[i] + 1 >= min_pts).collect();

    // Connected components of core points, by sorted position.
    const NONE: usize = usize::MAX;
    let mut component = vec![NONE; n];
    let mut n_components = 0usize;
    let mut prev_core: Option<usize> = None;
    for i in (0..n).filter(|&i| is_core[i]) {
        match prev_core {
            Some(p) if zs[i] - zs[p] <= eps => component[i] = component[p],
            _ => {
                component[i] = n_components;
                n_components += 1;
            }
        }
        prev_core = Some(i);
    }

    // Border points: adopt the component of the lowest-indexed reaching core.
    for i in 0..n {
        if is_core[i] {
            continue;
        }
        let owner = (lo[i]..=hi[i]).filter(|&j| is_core[j]).min_by_key(|&j| order[j]);
        if let Some(j) = owner {
            component[i] = component[j];
        }
    }

    // Renumber components by lowest core input index.
    let mut first_core = vec![usize::MAX; n_components];
    for i in (0..n).filter(|&i| is_core[i]) {
        let c = component[i];
        first_core[c] = first_core[c].min(order[i]);
    }
    let mut rank: Vec<usize> = (0..n_components).collect();
    rank.sort_by_key(|&c| first_core[c]);
    let mut relabel = vec![0usize; n_components];
    for (new, &old) in rank.iter().enumerate() {
        relabel[old] = new;
    }

    let mut label_of = vec![NONE; n];
    let mut core_of = vec![false; n];
    for i in 0..n {
        if component[i] != NONE {
            label_of[order[i]] = relabel[component[i]];
        }
        core_of[order[i]] = is_core[i];
    }

    let mut clusters: Vec<DepthCluster> = (0..n_components)
        .map(|_| DepthCluster { member_indices: Vec::new(), core_indices: Vec::new(), mean_depth: 0.0, size: 0 })
        .collect();
    let mut noise = Vec::new();
    for idx in 0..n {
        match label_of[idx] {
            NONE => noise.push(idx),
            c => {
                let cl = &mut clusters[c];
                cl.member_indices.push(idx);
                if core_of[idx] {
                    cl.core_indices.push(idx);
                }
                cl.mean_depth += samples[idx].z;
            }
        }
    }
    for cl in &mut clusters {
        cl.size = cl.member_indices.len();
        cl.mean_depth /= cl.size as f64;
    }
    Ok(Clustering { clusters, noise })
}

/// Picks the cluster with the most members; equal sizes go to the cluster
/// nearer the camera (smaller mean depth), then to the earlier cluster.
pub fn select_target_cluster(clusters: &[DepthCluster]) -> Result<&DepthCluster> {
    clusters
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            b.size
                .cmp(&a.size)
                .then(a.mean_depth.partial_cmp(&b.mean_depth).unwrap_or(Ordering::Equal))
                .then(ia.cmp(ib))
        })
        .map(|(_, c)| c)
        .ok_or(Error::NoTarget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn at_depths(zs: &[f64]) -> Vec<DepthSample> {
        zs.iter().map(|&z| DepthSample::new(0.0, 0.0, z)).collect()
    }

    /// Textbook DBSCAN with O(n^2) range queries.
    fn naive(zs: &[f64], eps: f64, min_pts: usize) -> (Vec<BTreeSet<usize>>, BTreeSet<usize>, Vec<bool>) {
        let n = zs.len();
        let neighbors = |i: usize| -> Vec<usize> { (0..n).filter(|&j| (zs[i] - zs[j]).abs() <= eps).collect() };
        let core: Vec<bool> = (0..n).map(|i| neighbors(i).len() >= min_pts).collect();
        let mut label: Vec<Option<usize>> = vec![None; n];
        let mut clusters = Vec::new();
        for i in 0..n {
            if !core[i] || label[i].is_some() {
                continue;
            }
            let c = clusters.len();
            clusters.push(BTreeSet::new());
            let mut stack = vec![i];
            label[i] = Some(c);
            while let Some(p) = stack.pop() {
                clusters[c].insert(p);
                if !core[p] {
                    continue;
                }
                for q in neighbors(p) {
                    if label[q].is_none() {
                        label[q] = Some(c);
                        stack.push(q);
                    }
                }
            }
        }
        let noise = (0..n).filter(|&i| label[i].is_none()).collect();
        (clusters, noise, core)
    }

    #[test]
    fn two_depth_groups() {
        let s = at_depths(&[1.00, 1.02, 1.05, 3.00, 3.01]);
        let out = dbscan_depth(&s, 0.1, 2).unwrap();
        assert_eq!(out.clusters.len(), 2);
        assert_eq!(out.clusters[0].member_indices, vec![0, 1, 2]);
        assert_eq!(out.clusters[1].member_indices, vec![3, 4]);
        assert!(out.noise.is_empty());
        assert!((out.clusters[0].mean_depth - (1.00 + 1.02 + 1.05) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_sample_is_noise() {
        let out = dbscan_depth(&at_depths(&[1.0]), 0.1, 2).unwrap();
        assert!(out.clusters.is_empty());
        assert_eq!(out.noise, vec![0]);
    }

    #[test]
    fn min_pts_one_makes_singletons() {
        let out = dbscan_depth(&at_depths(&[1.0, 5.0]), 0.1, 1).unwrap();
        assert_eq!(out.clusters.len(), 2);
        assert!(out.clusters.iter().all(|c| c.size == 1));
        assert!(out.noise.is_empty());
    }

    #[test]
    fn empty_input_is_not_an_error() {
        assert_eq!(dbscan_depth(&[], 0.1, 2).unwrap(), Clustering::default());
    }

    #[test]
    fn bad_parameters() {
        assert!(dbscan_depth(&at_depths(&[1.0]), 0.0, 2).is_err());
        assert!(dbscan_depth(&at_depths(&[1.0]), 0.1, 0).is_err());
    }

    #[test]
    fn border_goes_to_lowest_indexed_core() {
        // 2.0 and 1.0 are cores with min_pts=4; 1.5 borders both.
        let s = at_depths(&[2.0, 2.05, 2.1, 1.5, 1.0, 0.95, 0.9]);
        let out = dbscan_depth(&s, 0.5, 4).unwrap();
        assert_eq!(out.clusters.len(), 2);
        assert!(out.clusters[0].member_indices.contains(&3));
        assert!(!out.clusters[0].core_indices.contains(&3));
    }

    #[test]
    fn target_selection() {
        let mk = |size: usize, mean_depth: f64| DepthCluster {
            member_indices: (0..size).collect(),
            core_indices: vec![],
            mean_depth,
            size,
        };
        let a = [mk(5, 3.0), mk(3, 1.0)];
        assert_eq!(select_target_cluster(&a).unwrap().size, 5);
        let b = [mk(4, 3.5), mk(4, 2.0)];
        assert_eq!(select_target_cluster(&b).unwrap().mean_depth, 2.0);
        assert_eq!(select_target_cluster(&[]), Err(Error::NoTarget));
    }

    proptest! {
        #[test]
        fn matches_naive_reference(
            zs in prop::collection::vec(0.3f64..6.0, 0..50),
            eps in 0.01f64..0.5,
            min_pts in 1usize..6,
        ) {
            let out = dbscan_depth(&at_depths(&zs), eps, min_pts).unwrap();
            let (ref_clusters, ref_noise, ref_core) = naive(&zs, eps, min_pts);
            let noise: BTreeSet<usize> = out.noise.iter().copied().collect();
            prop_assert_eq!(noise, ref_noise);
            let mut got: Vec<BTreeSet<usize>> = out.clusters.iter().map(|c| c.core_indices.iter().copied().collect()).collect();
            let mut want: Vec<BTreeSet<usize>> = ref_clusters.iter().map(|c| c.iter().copied().filter(|&i| ref_core[i]).collect()).collect();
            got.sort();
            want.sort();
            prop_assert_eq!(got, want);
            let total: usize = out.clusters.iter().map(|c| c.size).sum::<usize>() + out.noise.len();
            prop_assert_eq!(total, zs.len());
        }
    }
}
