//! Center deduplication and the density-clustering baselines it is compared against.
//!
//! [`cdm_bruteforce`] is a line-for-line greedy suppression over the
//! confidence-ranked candidates. [`cdm_grid`] produces the same kept list but
//! only compares a candidate against kept centers in the 27 spatial-hash cells
//! around it. Both rank candidates by descending confidence with ascending
//! index as the tie-break, and suppress on strict `distance < d`.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::domain::{distance, distance_sq, Point3};
use crate::error::{Error, Result};

pub const DEFAULT_CDM_DISTANCE: f64 = 0.8;

// Hash cells are widened by this relative amount so that floating-point
// rounding in the cell index can never push a pair closer than the radius
// more than one cell apart.
const CELL_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CdmParamsDoc", into = "CdmParamsDoc")]
pub struct CdmParams {
    distance: f64,
}

#[derive(Serialize, Deserialize)]
struct CdmParamsDoc {
    d: f64,
}

impl CdmParams {
    pub fn new(distance: f64) -> Result<Self> {
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(Error::param("d", format!("must be positive, got {distance}")));
        }
        Ok(Self { distance })
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }
}

impl Default for CdmParams {
    fn default() -> Self {
        Self {
            distance: DEFAULT_CDM_DISTANCE,
        }
    }
}

impl TryFrom<CdmParamsDoc> for CdmParams {
    type Error = Error;

    fn try_from(doc: CdmParamsDoc) -> Result<Self> {
        Self::new(doc.d)
    }
}

impl From<CdmParams> for CdmParamsDoc {
    fn from(p: CdmParams) -> Self {
        CdmParamsDoc { d: p.distance }
    }
}

/// Surviving candidates in rank order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeptCenters {
    pub indices: Vec<usize>,
    pub coords: Vec<Point3>,
}

impl KeptCenters {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn push(&mut self, index: usize, p: Point3) {
        self.indices.push(index);
        self.coords.push(p);
    }
}

/// Candidate indices by descending confidence, ascending index on ties.
pub fn rank_by_confidence(confidence: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..confidence.len()).collect();
    order.sort_by(|&a, &b| confidence[b].total_cmp(&confidence[a]).then(a.cmp(&b)));
    order
}

pub fn cdm_bruteforce(shifted: &[Point3], confidence: &[f64], params: &CdmParams) -> Result<KeptCenters> {
    Error::check_len("confidences", shifted.len(), confidence.len())?;
    let d = params.distance;
    let order = rank_by_confidence(confidence);
    let mut rejected = vec![false; shifted.len()];
    let mut kept = KeptCenters::default();
    for k in 0..order.len() {
        let anchor = order[k];
        if rejected[anchor] {
            continue;
        }
        kept.push(anchor, shifted[anchor]);
        for &other in &order[k + 1..] {
            if distance(shifted[anchor], shifted[other]) < d {
                rejected[other] = true;
            }
        }
    }
    Ok(kept)
}

pub fn cdm_grid(shifted: &[Point3], confidence: &[f64], params: &CdmParams) -> Result<KeptCenters> {
    Error::check_len("confidences", shifted.len(), confidence.len())?;
    let d = params.distance;
    let mut hash = SpatialHash::new(d);
    let mut kept = KeptCenters::default();
    for idx in rank_by_confidence(confidence) {
        let p = shifted[idx];
        let suppressed = hash
            .neighbors(p)
            .any(|j| distance(shifted[j as usize], p) < d);
        if !suppressed {
            kept.push(idx, p);
            hash.insert(idx, p);
        }
    }
    Ok(kept)
}

type CellKey = [i64; 3];

// Neighborhood offsets, own cell first.
const NEIGHBORHOOD: [[i64; 3]; 27] = {
    let mut out = [[0i64; 3]; 27];
    let mut n = 1;
    let mut dx = -1;
    while dx <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dz = -1;
            while dz <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dz += 1;
            }
            dy += 1;
        }
        dx += 1;
    }
    out
};

/// Uniform 3D hash whose cells are (slightly more than) `radius` wide, so
/// every stored point within `radius` of a query sits in the query's 27-cell
/// neighborhood.
pub struct SpatialHash {
    edge: f64,
    cells: FxHashMap<CellKey, Vec<u32>>,
}

impl SpatialHash {
    pub fn new(radius: f64) -> Self {
        Self {
            edge: radius * (1.0 + CELL_SLACK),
            cells: FxHashMap::default(),
        }
    }

    pub fn from_points(points: &[Point3], radius: f64) -> Self {
        let mut hash = Self::new(radius);
        for (i, &p) in points.iter().enumerate() {
            hash.insert(i, p);
        }
        hash
    }

    fn key(&self, p: Point3) -> CellKey {
        p.map(|v| (v / self.edge).floor() as i64)
    }

    pub fn insert(&mut self, index: usize, p: Point3) {
        let key = self.key(p);
        self.cells.entry(key).or_default().push(index as u32);
    }

    /// Stored indices in the 27 cells around `p`, cell by cell in insertion order.
    pub fn neighbors(&self, p: Point3) -> impl Iterator<Item = u32> + '_ {
        let key = self.key(p);
        NEIGHBORHOOD.iter().flat_map(move |off| {
            let k = [0, 1, 2].map(|a| key[a].saturating_add(off[a]));
            self.cells.get(&k).into_iter().flatten().copied()
        })
    }
}

pub const NOISE: i32 = -1;

/// Density-based clustering. Core points have at least `min_pts` points
/// (themselves included) within `eps`. Clusters grow breadth-first from the
/// lowest-index unvisited core point; border points join the first cluster
/// that reaches them. Returns one id per point, [`NOISE`] for outliers.
pub fn dbscan(points: &[Point3], eps: f64, min_pts: usize) -> Result<Vec<i32>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", format!("must be positive, got {eps}")));
    }
    if min_pts == 0 {
        return Err(Error::param("min_pts", "must be at least 1"));
    }
    const UNVISITED: i32 = -2;
    let hash = SpatialHash::from_points(points, eps);
    let eps_sq = eps * eps;
    let region = |p: Point3| {
        let mut out: Vec<usize> = hash
            .neighbors(p)
            .map(|j| j as usize)
            .filter(|&j| distance_sq(points[j], p) <= eps_sq)
            .collect();
        out.sort_unstable();
        out
    };

    let mut labels = vec![UNVISITED; points.len()];
    let mut cluster = 0;
    let mut queue = std::collections::VecDeque::new();
    for i in 0..points.len() {
        if labels[i] != UNVISITED {
            continue;
        }
        let seeds = region(points[i]);
        if seeds.len() < min_pts {
            labels[i] = NOISE;
            continue;
        }
        labels[i] = cluster;
        queue.extend(seeds);
        while let Some(j) = queue.pop_front() {
            if labels[j] == NOISE {
                labels[j] = cluster;
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = cluster;
            let next = region(points[j]);
            if next.len() >= min_pts {
                queue.extend(next);
            }
        }
        cluster += 1;
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftParams {
    pub bandwidth: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for MeanShiftParams {
    fn default() -> Self {
        Self {
            bandwidth: DEFAULT_CDM_DISTANCE,
            max_iters: 30,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanShiftResult {
    pub labels: Vec<usize>,
    pub centers: Vec<Point3>,
}

/// Flat-kernel mean shift seeded from every point.
///
/// Each seed moves to the mean of the points within `bandwidth` until it moves
/// less than `tol` or `max_iters` is hit. Converged modes closer than
/// `bandwidth / 2` to an earlier mode are merged into it, and each point is
/// labeled with its nearest surviving mode (lowest id on ties).
pub fn meanshift(points: &[Point3], params: &MeanShiftParams) -> Result<MeanShiftResult> {
    let MeanShiftParams {
        bandwidth,
        max_iters,
        tol,
    } = *params;
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::param("bandwidth", format!("must be positive, got {bandwidth}")));
    }
    let hash = SpatialHash::from_points(points, bandwidth);
    let bw_sq = bandwidth * bandwidth;

    let mut centers: Vec<Point3> = Vec::new();
    let merge_sq = (bandwidth / 2.0) * (bandwidth / 2.0);
    for &seed in points {
        let mut x = seed;
        for _ in 0..max_iters {
            let mut sum = [0.0; 3];
            let mut count = 0usize;
            for j in hash.neighbors(x) {
                let q = points[j as usize];
                if distance_sq(q, x) <= bw_sq {
                    for k in 0..3 {
                        sum[k] += q[k];
                    }
                    count += 1;
                }
            }
            if count == 0 {
                break;
            }
            let next = sum.map(|s| s / count as f64);
            let shift = distance(next, x);
            x = next;
            if shift < tol {
                break;
            }
        }
        if !centers.iter().any(|&c| distance_sq(c, x) <= merge_sq) {
            centers.push(x);
        }
    }

    let labels = points.iter().map(|&p| nearest(p, &centers)).collect();
    Ok(MeanShiftResult { labels, centers })
}

/// Index of the closest center, lowest index on ties. `centers` must be non-empty.
pub(crate) fn nearest(p: Point3, centers: &[Point3]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, &c) in centers.iter().enumerate() {
        let d = distance_sq(p, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(d: f64) -> CdmParams {
        CdmParams::new(d).unwrap()
    }

    #[test]
    fn single_candidate_is_kept() {
        let k = cdm_bruteforce(&[[1.0, 2.0, 3.0]], &[0.4], &params(0.8)).unwrap();
        assert_eq!(k.indices, vec![0]);
        assert_eq!(k.coords, vec![[1.0, 2.0, 3.0]]);
        assert!(cdm_grid(&[], &[], &params(0.8)).unwrap().is_empty());
    }

    #[test]
    fn close_lower_confidence_is_suppressed() {
        let pts = [[0.0; 3], [0.5, 0.0, 0.0]];
        for kept in [
            cdm_bruteforce(&pts, &[0.9, 0.8], &params(0.8)).unwrap(),
            cdm_grid(&pts, &[0.9, 0.8], &params(0.8)).unwrap(),
        ] {
            assert_eq!(kept.indices, vec![0]);
        }
    }

    #[test]
    fn distance_equal_to_threshold_survives() {
        let pts = [[0.0; 3], [1.0, 0.0, 0.0]];
        let b = cdm_bruteforce(&pts, &[0.9, 0.8], &params(1.0)).unwrap();
        assert_eq!(b.indices, vec![0, 1]);
        assert_eq!(cdm_grid(&pts, &[0.9, 0.8], &params(1.0)).unwrap(), b);
        let b = cdm_bruteforce(&pts, &[0.9, 0.8], &params(0.8)).unwrap();
        assert_eq!(b.indices, vec![0, 1]);
    }

    #[test]
    fn ties_keep_lower_index() {
        let pts = [[0.0; 3], [0.1, 0.0, 0.0], [5.0, 0.0, 0.0]];
        let k = cdm_grid(&pts, &[0.5, 0.5, 0.5], &params(0.8)).unwrap();
        assert_eq!(k.indices, vec![0, 2]);
        assert_eq!(rank_by_confidence(&[0.2, 0.9, 0.2, 0.9]), vec![1, 3, 0, 2]);
    }

    #[test]
    fn suppression_follows_kept_centers_only() {
        // 1 is suppressed by 0; 2 is within d of 1 but not of 0, so it survives
        let pts = [[0.0; 3], [0.6, 0.0, 0.0], [1.2, 0.0, 0.0]];
        let k = cdm_bruteforce(&pts, &[0.9, 0.8, 0.7], &params(0.8)).unwrap();
        assert_eq!(k.indices, vec![0, 2]);
        assert_eq!(cdm_grid(&pts, &[0.9, 0.8, 0.7], &params(0.8)).unwrap(), k);
    }

    #[test]
    fn params_validation() {
        assert!(CdmParams::new(0.0).is_err());
        assert!(CdmParams::new(f64::NAN).is_err());
        assert_eq!(CdmParams::default().distance(), 0.8);
        let p: CdmParams = serde_json::from_str(r#"{"d":1.2}"#).unwrap();
        assert_eq!(p.distance(), 1.2);
        assert!(serde_json::from_str::<CdmParams>(r#"{"d":-1}"#).is_err());
    }

    fn random_case(rng: &mut ChaCha8Rng, m: usize, extent: f64) -> (Vec<Point3>, Vec<f64>) {
        let pts = (0..m)
            .map(|_| [0; 3].map(|_| rng.random_range(-extent..extent)))
            .collect();
        // coarse confidences force plenty of ties
        let conf = (0..m).map(|_| rng.random_range(0..20) as f64 / 19.0).collect();
        (pts, conf)
    }

    #[test]
    fn grid_matches_bruteforce_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let m = rng.random_range(0..400);
            let extent = rng.random_range(0.5..20.0);
            let (pts, conf) = random_case(&mut rng, m, extent);
            let d = params(rng.random_range(0.1..3.0));
            assert_eq!(cdm_grid(&pts, &conf, &d).unwrap(), cdm_bruteforce(&pts, &conf, &d).unwrap());
        }
    }

    #[test]
    fn grid_matches_bruteforce_on_lattice_at_exact_threshold() {
        // lattice spacing equals d: neighbours sit exactly at the threshold
        // and straddle cell boundaries
        for d in [0.8, 0.5, 0.25] {
            let mut pts = Vec::new();
            for i in -4..4 {
                for j in -4..4 {
                    for k in -2..2 {
                        pts.push([i as f64 * d, j as f64 * d, k as f64 * d]);
                    }
                }
            }
            let conf: Vec<f64> = (0..pts.len()).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
            let b = cdm_bruteforce(&pts, &conf, &params(d)).unwrap();
            assert_eq!(cdm_grid(&pts, &conf, &params(d)).unwrap(), b);
            if d != 0.8 {
                // dyadic spacing: distances are exactly d, so nothing is suppressed
                assert_eq!(b.len(), pts.len());
            }
        }
    }

    proptest! {
        #[test]
        fn kept_centers_are_separated_and_cover(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -1.0f64..1.0, 0.0f64..=1.0), 0..200),
            d in 0.2f64..2.0,
        ) {
            let coords: Vec<Point3> = pts.iter().map(|p| [p.0, p.1, p.2]).collect();
            let conf: Vec<f64> = pts.iter().map(|p| p.3).collect();
            let kept = cdm_grid(&coords, &conf, &params(d)).unwrap();
            for (a, &ca) in kept.coords.iter().enumerate() {
                for &cb in &kept.coords[a + 1..] {
                    prop_assert!(distance(ca, cb) >= d);
                }
            }
            let rank = rank_by_confidence(&conf);
            let pos: Vec<usize> = {
                let mut pos = vec![0; conf.len()];
                for (r, &i) in rank.iter().enumerate() { pos[i] = r; }
                pos
            };
            for i in 0..coords.len() {
                if !kept.indices.contains(&i) {
                    prop_assert!(kept.indices.iter().any(|&k| pos[k] < pos[i] && distance(coords[k], coords[i]) < d));
                }
            }
        }

        #[test]
        fn rescaling_confidence_keeps_the_same_set(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.01f64..=1.0), 1..150),
            scale in 0.01f64..0.99,
        ) {
            let coords: Vec<Point3> = pts.iter().map(|p| [p.0, p.1, 0.0]).collect();
            let conf: Vec<f64> = pts.iter().map(|p| p.2).collect();
            let scaled: Vec<f64> = conf.iter().map(|c| c * scale).collect();
            prop_assert_eq!(
                cdm_grid(&coords, &conf, &params(0.8)).unwrap(),
                cdm_grid(&coords, &scaled, &params(0.8)).unwrap()
            );
        }

        #[test]
        fn permutation_maps_kept_indices(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..=1.0), 1..150),
            seed in any::<u64>(),
        ) {
            let coords: Vec<Point3> = pts.iter().map(|p| [p.0, p.1, 0.0]).collect();
            let conf: Vec<f64> = pts.iter().map(|p| p.2).collect();
            let mut perm: Vec<usize> = (0..coords.len()).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            // ties resolve by original index: encode it into a strictly ordered confidence
            let n = coords.len();
            let mut strict = vec![0.0; n];
            for (r, &i) in rank_by_confidence(&conf).iter().enumerate() {
                strict[i] = (n - r) as f64 / n as f64;
            }
            let pc: Vec<Point3> = perm.iter().map(|&i| coords[i]).collect();
            let ps: Vec<f64> = perm.iter().map(|&i| strict[i]).collect();
            let a = cdm_grid(&coords, &strict, &params(0.8)).unwrap();
            let b = cdm_grid(&pc, &ps, &params(0.8)).unwrap();
            let mapped: Vec<usize> = b.indices.iter().map(|&i| perm[i]).collect();
            prop_assert_eq!(mapped, a.indices);
        }
    }

    fn blob(rng: &mut ChaCha8Rng, center: Point3, n: usize, spread: f64) -> Vec<Point3> {
        (0..n)
            .map(|_| [0, 1, 2].map(|k| center[k] + rng.random_range(-spread..spread)))
            .collect()
    }

    // renaming-invariant partition: each point's label replaced by the first index sharing it
    fn canonical(labels: &[i32]) -> Vec<i64> {
        labels
            .iter()
            .map(|&l| {
                if l < 0 {
                    -1
                } else {
                    labels.iter().position(|&m| m == l).unwrap() as i64
                }
            })
            .collect()
    }

    #[test]
    fn dbscan_separates_blobs_and_flags_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = blob(&mut rng, [0.0; 3], 30, 0.3);
        pts.extend(blob(&mut rng, [20.0, 0.0, 0.0], 30, 0.3));
        pts.push([100.0, 100.0, 100.0]);
        let labels = dbscan(&pts, 1.0, 2).unwrap();
        assert!(labels[..30].iter().all(|&l| l == 0));
        assert!(labels[30..60].iter().all(|&l| l == 1));
        assert_eq!(labels[60], NOISE);
        assert_eq!(dbscan(&[[0.0; 3]], 1.0, 2).unwrap(), vec![NOISE]);
        assert!(dbscan(&pts, 0.0, 2).is_err());
        assert!(dbscan(&pts, 1.0, 0).is_err());
    }

    // textbook O(n^2) DBSCAN used as the oracle
    fn naive_dbscan(points: &[Point3], eps: f64, min_pts: usize) -> (Vec<i32>, Vec<bool>) {
        let n = points.len();
        let region = |i: usize| -> Vec<usize> {
            (0..n).filter(|&j| distance(points[i], points[j]) <= eps).collect()
        };
        let core: Vec<bool> = (0..n).map(|i| region(i).len() >= min_pts).collect();
        let mut labels = vec![NOISE; n];
        let mut cluster = 0;
        for i in 0..n {
            if !core[i] || labels[i] != NOISE {
                continue;
            }
            let mut stack = vec![i];
            labels[i] = cluster;
            while let Some(j) = stack.pop() {
                for k in region(j) {
                    if labels[k] == NOISE {
                        labels[k] = cluster;
                        if core[k] {
                            stack.push(k);
                        }
                    }
                }
            }
            cluster += 1;
        }
        (labels, core)
    }

    #[test]
    fn dbscan_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let n = rng.random_range(1..250);
            let pts: Vec<Point3> = (0..n)
                .map(|_| [rng.random_range(0.0..6.0), rng.random_range(0.0..6.0), rng.random_range(0.0..1.0)])
                .collect();
            let eps = rng.random_range(0.2..1.0);
            let min_pts = rng.random_range(1..6);
            let got = dbscan(&pts, eps, min_pts).unwrap();
            let (want, core) = naive_dbscan(&pts, eps, min_pts);
            // noise sets agree exactly
            for i in 0..n {
                assert_eq!(got[i] == NOISE, want[i] == NOISE);
            }
            // core points form the same partition
            let core_idx: Vec<usize> = (0..n).filter(|&i| core[i]).collect();
            let g: Vec<i32> = core_idx.iter().map(|&i| got[i]).collect();
            let w: Vec<i32> = core_idx.iter().map(|&i| want[i]).collect();
            assert_eq!(canonical(&g), canonical(&w));
            // border points join a cluster holding one of their core neighbours
            for i in (0..n).filter(|&i| !core[i] && got[i] != NOISE) {
                assert!((0..n).any(|j| core[j] && got[j] == got[i] && distance(pts[i], pts[j]) <= eps));
            }
        }
    }

    #[test]
    fn meanshift_identical_points() {
        let pts = vec![[1.0, 2.0, 3.0]; 10];
        let r = meanshift(&pts, &MeanShiftParams::default()).unwrap();
        assert_eq!(r.centers, vec![[1.0, 2.0, 3.0]]);
        assert!(r.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn meanshift_finds_blob_centroids() {
        let bw = 1.0;
        let tol = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = blob(&mut rng, [0.0; 3], 50, 0.2);
        let b = blob(&mut rng, [10.0 * bw, 0.0, 0.0], 50, 0.2);
        let mean = |v: &[Point3]| [0, 1, 2].map(|k| v.iter().map(|p| p[k]).sum::<f64>() / v.len() as f64);
        let pts: Vec<Point3> = a.iter().chain(&b).copied().collect();
        let r = meanshift(&pts, &MeanShiftParams { bandwidth: bw, max_iters: 50, tol }).unwrap();
        assert_eq!(r.centers.len(), 2);
        assert!(distance(r.centers[0], mean(&a)) < tol);
        assert!(distance(r.centers[1], mean(&b)) < tol);
        assert!(r.labels[..50].iter().all(|&l| l == 0));
        assert!(r.labels[50..].iter().all(|&l| l == 1));
    }

    #[test]
    fn meanshift_partition_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut pts = Vec::new();
        for c in 0..4 {
            pts.extend(blob(&mut rng, [c as f64 * 8.0, (c % 2) as f64 * 8.0, 0.0], 25, 0.4));
        }
        let p = MeanShiftParams::default();
        let base = meanshift(&pts, &p).unwrap();
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.shuffle(&mut rng);
        let shuffled: Vec<Point3> = perm.iter().map(|&i| pts[i]).collect();
        let moved = meanshift(&shuffled, &p).unwrap();
        let same = |i: usize, j: usize| base.labels[perm[i]] == base.labels[perm[j]];
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert_eq!(moved.labels[i] == moved.labels[j], same(i, j));
            }
        }
    }

    #[test]
    fn nearest_prefers_lower_index_on_ties() {
        assert_eq!(nearest([0.0; 3], &[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]), 0);
        assert_eq!(nearest([0.9, 0.0, 0.0], &[[0.0; 3], [1.0, 0.0, 0.0]]), 1);
    }
}
