//! Seeded synthetic scenes and a calibrated oracle predictor.
//!
//! Instances are axis-aligned boxes resting on a thin ground slab. Box points
//! lie only on the faces (the eight corners are always included), so the
//! bounding-box center of every instance is known exactly and is never itself
//! a sampled point. All randomness comes from ChaCha8 streams seeded
//! explicitly, which keeps scenes identical across platforms.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    add, distance, norm, ClassId, ClassTaxonomy, InstanceId, PanopticLabels, Point3,
    PointCloud, PredictionSet,
};
use crate::error::{Error, Result};
use crate::io;
use crate::supervision::{gt_confidence, gt_offsets, DEFAULT_CONFIDENCE_SIGMA};

const PLACEMENT_TRIES: usize = 10_000;
const GROUND_SIGMA_Z: f64 = 0.02;
/// Mixed into a scene seed to derive the oracle's seed.
const ORACLE_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedClass {
    pub class: ClassId,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub seed: u64,
    pub n_instances: usize,
    pub instance_classes: Vec<WeightedClass>,
    /// `[min, max]` box edge lengths per axis, meters
    pub box_size_range: [[f64; 3]; 2],
    /// centers are drawn from `[-a, a]^2`; ground covers the same square
    pub placement_area: f64,
    pub min_center_separation: f64,
    /// inclusive `[min, max]`; min must be at least 8 (the corners)
    pub points_per_instance_range: [usize; 2],
    pub ground_points: usize,
    pub ground_class: ClassId,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_instances: 12,
            instance_classes: vec![
                WeightedClass { class: 1, weight: 0.6 },
                WeightedClass { class: 6, weight: 0.3 },
                WeightedClass { class: 4, weight: 0.1 },
            ],
            box_size_range: [[0.6, 0.6, 0.8], [2.0, 2.0, 2.0]],
            placement_area: 20.0,
            min_center_separation: 2.0,
            points_per_instance_range: [200, 800],
            ground_points: 4000,
            ground_class: 9,
        }
    }
}

impl SceneConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.min_center_separation > 0.0 && self.min_center_separation.is_finite()) {
            return Err(Error::param("min_center_separation", "must be positive"));
        }
        if !(self.placement_area > 0.0 && self.placement_area.is_finite()) {
            return Err(Error::param("placement_area", "must be positive"));
        }
        let [lo, hi] = self.box_size_range;
        if (0..3).any(|k| !(lo[k] > 0.0 && lo[k] <= hi[k] && hi[k].is_finite())) {
            return Err(Error::param("box_size_range", "need 0 < min <= max per axis"));
        }
        let [pmin, pmax] = self.points_per_instance_range;
        if pmin < 8 || pmin > pmax {
            return Err(Error::param("points_per_instance_range", "need 8 <= min <= max"));
        }
        if self.n_instances > 0 {
            if self.instance_classes.is_empty() {
                return Err(Error::param("instance_classes", "empty"));
            }
            if self.instance_classes.iter().any(|c| !(c.weight >= 0.0 && c.weight.is_finite()))
                || self.instance_classes.iter().all(|c| c.weight == 0.0)
            {
                return Err(Error::param("instance_classes", "weights must be >= 0, not all 0"));
            }
        }
        Ok(())
    }

    /// Checks class ids against a taxonomy: instances must be things, ground stuff.
    pub fn check_classes(&self, taxonomy: &ClassTaxonomy) -> Result<()> {
        for c in &self.instance_classes {
            if !taxonomy.is_things(c.class) {
                return Err(Error::param("instance_classes", format!("{} is not a things class", c.class)));
            }
        }
        if self.ground_points > 0 && !taxonomy.is_stuff(self.ground_class) {
            return Err(Error::param("ground_class", format!("{} is not a stuff class", self.ground_class)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub cloud: PointCloud,
    pub labels: PanopticLabels,
    /// configured center of instance `i + 1`
    pub centers: Vec<Point3>,
}

fn quantize(p: Point3) -> Point3 {
    p.map(|v| v as f32 as f64)
}

fn sample_box(rng: &mut ChaCha8Rng, center: Point3, size: Point3, count: usize, out: &mut Vec<Point3>) {
    let h = size.map(|s| s / 2.0);
    for corner in 0..8 {
        let sign = |bit: usize| if corner >> bit & 1 == 1 { 1.0 } else { -1.0 };
        out.push(quantize(add(center, [sign(0) * h[0], sign(1) * h[1], sign(2) * h[2]])));
    }
    // faces normal to axis k have area size[k+1] * size[k+2]
    let areas = [size[1] * size[2], size[0] * size[2], size[0] * size[1]];
    let faces = WeightedIndex::new(areas).expect("positive box sizes");
    for _ in 8..count {
        let axis = faces.sample(rng);
        let mut local = [0.0; 3];
        for (k, v) in local.iter_mut().enumerate() {
            *v = if k == axis {
                if rng.random_bool(0.5) { h[k] } else { -h[k] }
            } else {
                rng.random_range(-h[k]..=h[k])
            };
        }
        out.push(quantize(add(center, local)));
    }
}

pub fn generate_scene(config: &SceneConfig) -> Result<Scene> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let a = config.placement_area;
    let [size_lo, size_hi] = config.box_size_range;

    let mut centers: Vec<Point3> = Vec::with_capacity(config.n_instances);
    let mut sizes = Vec::with_capacity(config.n_instances);
    for _ in 0..config.n_instances {
        let mut placed = false;
        for _ in 0..PLACEMENT_TRIES {
            let size: Point3 = [0, 1, 2].map(|k| rng.random_range(size_lo[k]..=size_hi[k]));
            let c = [rng.random_range(-a..=a), rng.random_range(-a..=a), size[2] / 2.0];
            if centers.iter().all(|&o| distance(o, c) >= config.min_center_separation) {
                centers.push(c);
                sizes.push(size);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Placement {
                placed: centers.len(),
                requested: config.n_instances,
            });
        }
    }

    let mut coords = Vec::new();
    let mut semantic = Vec::new();
    let mut instance = Vec::new();
    if config.n_instances > 0 {
        let weights = WeightedIndex::new(config.instance_classes.iter().map(|c| c.weight))
            .map_err(|e| Error::param("instance_classes", e.to_string()))?;
        let [pmin, pmax] = config.points_per_instance_range;
        for (i, (&c, &size)) in centers.iter().zip(&sizes).enumerate() {
            let class = config.instance_classes[weights.sample(&mut rng)].class;
            let count = rng.random_range(pmin..=pmax);
            sample_box(&mut rng, c, size, count, &mut coords);
            semantic.resize(coords.len(), class);
            instance.resize(coords.len(), (i + 1) as InstanceId);
        }
    }
    let slab = Normal::new(0.0, GROUND_SIGMA_Z).expect("valid sigma");
    for _ in 0..config.ground_points {
        let p = [rng.random_range(-a..=a), rng.random_range(-a..=a), slab.sample(&mut rng)];
        coords.push(quantize(p));
    }
    semantic.resize(coords.len(), config.ground_class);
    instance.resize(coords.len(), 0);

    let intensity: Vec<f32> = (0..coords.len()).map(|_| rng.random::<f32>()).collect();
    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.shuffle(&mut rng);

    let cloud = PointCloud::new(
        order.iter().map(|&i| coords[i]).collect(),
        order.iter().map(|&i| intensity[i]).collect(),
        1,
    )?;
    let labels = PanopticLabels::new(
        order.iter().map(|&i| semantic[i]).collect(),
        order.iter().map(|&i| instance[i]).collect(),
    )?;
    Ok(Scene { cloud, labels, centers })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleNoise {
    pub offset_sigma: f64,
    pub semantic_flip_prob: f64,
    pub confidence_sigma: f64,
    /// offset noise vectors longer than this are shrunk to just under it
    pub offset_clip: Option<f64>,
}

impl Default for OracleNoise {
    fn default() -> Self {
        Self {
            offset_sigma: 0.0,
            semantic_flip_prob: 0.0,
            confidence_sigma: DEFAULT_CONFIDENCE_SIGMA,
            offset_clip: None,
        }
    }
}

impl OracleNoise {
    pub fn check(&self) -> Result<()> {
        if !(self.offset_sigma >= 0.0 && self.offset_sigma.is_finite()) {
            return Err(Error::param("offset_sigma", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.semantic_flip_prob) {
            return Err(Error::param("semantic_flip_prob", "must be in [0, 1)"));
        }
        if !(self.confidence_sigma > 0.0 && self.confidence_sigma.is_finite()) {
            return Err(Error::param("confidence_sigma", "must be positive"));
        }
        if let Some(clip) = self.offset_clip {
            if clip.is_nan() || clip <= 0.0 {
                return Err(Error::param("offset_clip", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Predictions equal to the ground truth up to the configured noise.
/// Confidences are the Gaussian-of-error targets of the oracle's own offset
/// error, so the oracle is calibrated by construction.
pub fn oracle_predict(
    cloud: &PointCloud,
    labels: &PanopticLabels,
    taxonomy: &ClassTaxonomy,
    noise: &OracleNoise,
    seed: u64,
) -> Result<PredictionSet> {
    noise.check()?;
    let targets = gt_offsets(cloud, labels, taxonomy)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: Vec<ClassId> = taxonomy.class_ids().collect();

    let mut semantic = Vec::with_capacity(cloud.len());
    let mut offsets = Vec::with_capacity(cloud.len());
    let mut errors = Vec::with_capacity(cloud.len());
    for (i, &gt) in labels.semantic.iter().enumerate() {
        if taxonomy.role(gt).is_none() {
            return Err(Error::UnknownClass(gt));
        }
        if rng.random::<f64>() < noise.semantic_flip_prob {
            let others: Vec<ClassId> = classes.iter().copied().filter(|&c| c != gt).collect();
            semantic.push(others[rng.random_range(0..others.len())]);
        } else {
            semantic.push(gt);
        }

        if targets.things_mask[i] {
            let mut e: Point3 = [0, 1, 2].map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                z * noise.offset_sigma
            });
            if let Some(clip) = noise.offset_clip {
                let len = norm(e);
                if len >= clip {
                    // margin absorbs float32 rounding of the stored offsets
                    let scale = clip * (1.0 - 1e-6) / len;
                    e = e.map(|v| v * scale);
                }
            }
            offsets.push(add(targets.targets[i], e));
            errors.push(norm(e));
        } else {
            offsets.push([0.0; 3]);
            errors.push(0.0);
        }
    }
    let confidence = gt_confidence(&errors, &targets.things_mask, noise.confidence_sigma)?;
    PredictionSet::new(semantic, offsets, confidence)
}

/// A generated scan with ground truth and oracle predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScan {
    pub stem: String,
    pub scene: Scene,
    pub predictions: PredictionSet,
}

pub fn scan_stem(index: usize) -> String {
    format!("{index:06}")
}

/// Scan `k` uses scene seed `config.seed + k`. Predictions are rounded to
/// float32, so the corpus equals its on-disk form.
pub fn generate_corpus(
    config: &SceneConfig,
    noise: &OracleNoise,
    taxonomy: &ClassTaxonomy,
    count: usize,
) -> Result<Vec<SynthScan>> {
    config.check()?;
    config.check_classes(taxonomy)?;
    noise.check()?;
    (0..count)
        .into_par_iter()
        .map(|k| {
            let cfg = SceneConfig {
                seed: config.seed.wrapping_add(k as u64),
                ..config.clone()
            };
            let scene = generate_scene(&cfg)?;
            let mut predictions =
                oracle_predict(&scene.cloud, &scene.labels, taxonomy, noise, cfg.seed ^ ORACLE_SALT)?;
            // match what the float32 prediction files hold
            predictions.offsets.iter_mut().for_each(|o| *o = quantize(*o));
            predictions.confidence.iter_mut().for_each(|c| *c = *c as f32 as f64);
            Ok(SynthScan {
                stem: scan_stem(k),
                scene,
                predictions,
            })
        })
        .collect()
}

pub const SCAN_DIR: &str = "velodyne";
pub const LABEL_DIR: &str = "labels";
pub const PREDICTION_DIR: &str = "predictions";

/// Writes `velodyne/<stem>.bin`, `labels/<stem>.label` and the oracle's
/// `predictions/<stem>.{label,off,conf}`. Returns the written paths.
pub fn write_scan(out_dir: &Path, scan: &SynthScan) -> Result<Vec<std::path::PathBuf>> {
    let scans = out_dir.join(SCAN_DIR);
    let labels = out_dir.join(LABEL_DIR);
    let preds = out_dir.join(PREDICTION_DIR);
    for d in [&scans, &labels, &preds] {
        std::fs::create_dir_all(d)?;
    }
    let stem = &scan.stem;
    let files = vec![
        (io::with_ext(&scans, stem, "bin"), io::encode_points(&scan.scene.cloud)),
        (io::with_ext(&labels, stem, "label"), crate::domain::encode_labels(&scan.scene.labels)?),
        (
            io::with_ext(&preds, stem, "label"),
            crate::domain::encode_labels(&PanopticLabels::semantic_only(scan.predictions.semantic.clone()))?,
        ),
        (io::with_ext(&preds, stem, "off"), io::encode_offsets(&scan.predictions.offsets)),
        (io::with_ext(&preds, stem, "conf"), io::encode_confidence(&scan.predictions.confidence)),
    ];
    let mut paths = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        std::fs::write(&path, bytes)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{validate, ClassRole};
    use crate::supervision::{instance_centers, mean_offset_error};

    fn tax() -> ClassTaxonomy {
        ClassTaxonomy::semantic_kitti()
    }

    // ground is stuff with instance 0, boxes are things with id > 0
    fn roles_consistent(labels: &PanopticLabels, taxonomy: &ClassTaxonomy) -> bool {
        labels.semantic.iter().zip(&labels.instance).all(|(&s, &i)| match taxonomy.role(s) {
            Some(ClassRole::Things) => i > 0,
            Some(ClassRole::Stuff) => i == 0,
            _ => false,
        })
    }

    #[test]
    fn generated_labels_validate() {
        for seed in 0..10 {
            let cfg = SceneConfig { seed, ..Default::default() };
            let s = generate_scene(&cfg).unwrap();
            assert!(validate(&s.labels, &tax()).is_empty());
            assert!(roles_consistent(&s.labels, &tax()));
            assert_eq!(s.centers.len(), cfg.n_instances);
        }
    }

    #[test]
    fn ground_only_scene() {
        let cfg = SceneConfig { n_instances: 0, instance_classes: vec![], ..Default::default() };
        let s = generate_scene(&cfg).unwrap();
        assert_eq!(s.cloud.len(), cfg.ground_points);
        assert!(s.labels.instance.iter().all(|&i| i == 0));
        assert!(validate(&s.labels, &tax()).is_empty());
    }

    #[test]
    fn deterministic() {
        let cfg = SceneConfig { seed: 42, ..Default::default() };
        let (a, b) = (generate_scene(&cfg).unwrap(), generate_scene(&cfg).unwrap());
        assert_eq!(io::encode_points(&a.cloud), io::encode_points(&b.cloud));
        assert_eq!(a, b);
        let other = generate_scene(&SceneConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.cloud, other.cloud);
    }

    #[test]
    fn separation_and_ground_slab() {
        let cfg = SceneConfig { seed: 5, n_instances: 30, ..Default::default() };
        let s = generate_scene(&cfg).unwrap();
        for (i, &a) in s.centers.iter().enumerate() {
            for &b in &s.centers[i + 1..] {
                assert!(distance(a, b) >= cfg.min_center_separation);
            }
        }
        let ground: Vec<f64> = s
            .cloud
            .coords()
            .iter()
            .zip(&s.labels.semantic)
            .filter(|(_, &c)| c == cfg.ground_class)
            .map(|(p, _)| p[2])
            .collect();
        let mean = ground.iter().sum::<f64>() / ground.len() as f64;
        let sd = (ground.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / ground.len() as f64).sqrt();
        assert!(mean.abs() < 0.005 && (sd - 0.02).abs() < 0.003, "{mean} {sd}");
    }

    #[test]
    fn bbox_midpoints_match_configured_centers() {
        let s = generate_scene(&SceneConfig { seed: 9, ..Default::default() }).unwrap();
        let centers = instance_centers(&s.cloud, &s.labels, &tax()).unwrap();
        assert_eq!(centers.len(), s.centers.len());
        for (&id, &c) in &centers {
            let want = s.centers[id as usize - 1];
            // corner coordinates are rounded to f32
            for k in 0..3 {
                assert!((c[k] - want[k]).abs() <= 4e-6 * want[k].abs().max(1.0), "{c:?} {want:?}");
            }
        }
    }

    #[test]
    fn no_point_sits_at_its_center() {
        let s = generate_scene(&SceneConfig { seed: 3, ..Default::default() }).unwrap();
        let centers = instance_centers(&s.cloud, &s.labels, &tax()).unwrap();
        let min_half = SceneConfig::default().box_size_range[0].iter().fold(f64::MAX, |m, &v| m.min(v)) / 2.0;
        for (p, &i) in s.cloud.coords().iter().zip(&s.labels.instance) {
            if i > 0 {
                assert!(distance(*p, centers[&i]) >= min_half * 0.999);
            }
        }
    }

    #[test]
    fn placement_error_when_crowded() {
        let cfg = SceneConfig {
            n_instances: 50,
            placement_area: 1.0,
            min_center_separation: 2.0,
            ..Default::default()
        };
        assert!(matches!(generate_scene(&cfg), Err(Error::Placement { requested: 50, .. })));
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SceneConfig { min_center_separation: 0.0, ..Default::default() },
            SceneConfig { points_per_instance_range: [4, 10], ..Default::default() },
            SceneConfig { box_size_range: [[1.0; 3], [0.5; 3]], ..Default::default() },
        ];
        for cfg in bad {
            assert!(generate_scene(&cfg).is_err());
        }
        let cfg = SceneConfig { ground_class: 1, ..Default::default() };
        assert!(cfg.check_classes(&tax()).is_err());
    }

    #[test]
    fn noiseless_oracle_is_exact() {
        let s = generate_scene(&SceneConfig::default()).unwrap();
        let p = oracle_predict(&s.cloud, &s.labels, &tax(), &OracleNoise::default(), 1).unwrap();
        let t = gt_offsets(&s.cloud, &s.labels, &tax()).unwrap();
        assert_eq!(p.semantic, s.labels.semantic);
        assert_eq!(p.offsets, t.targets);
        for (&c, &m) in p.confidence.iter().zip(&t.things_mask) {
            assert_eq!(c, if m { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn semantic_flips_go_elsewhere() {
        let s = generate_scene(&SceneConfig::default()).unwrap();
        let noise = OracleNoise { semantic_flip_prob: 0.3, ..Default::default() };
        let p = oracle_predict(&s.cloud, &s.labels, &tax(), &noise, 2).unwrap();
        let flipped = p.semantic.iter().zip(&s.labels.semantic).filter(|(a, b)| a != b).count();
        let rate = flipped as f64 / s.cloud.len() as f64;
        assert!((rate - 0.3).abs() < 0.03, "{rate}");
        assert!(p.semantic.iter().all(|&c| c != 0 && tax().role(c).is_some()));
    }

    #[test]
    fn oracle_offset_error_matches_chi_mean() {
        let sigma = 0.3;
        let cfg = SceneConfig {
            n_instances: 200,
            placement_area: 60.0,
            points_per_instance_range: [500, 500],
            ground_points: 0,
            ..Default::default()
        };
        let s = generate_scene(&cfg).unwrap();
        let noise = OracleNoise { offset_sigma: sigma, ..Default::default() };
        let p = oracle_predict(&s.cloud, &s.labels, &tax(), &noise, 11).unwrap();
        let t = gt_offsets(&s.cloud, &s.labels, &tax()).unwrap();
        assert!(t.things_count() >= 100_000);
        let err = mean_offset_error(&p.offsets, &t).unwrap();
        let expected = sigma * (8.0 / std::f64::consts::PI).sqrt();
        assert!((err.mean / expected - 1.0).abs() < 0.05, "{} vs {expected}", err.mean);
    }

    #[test]
    fn clipped_noise_stays_inside() {
        let s = generate_scene(&SceneConfig::default()).unwrap();
        let noise = OracleNoise { offset_sigma: 1.0, offset_clip: Some(0.4), ..Default::default() };
        let p = oracle_predict(&s.cloud, &s.labels, &tax(), &noise, 4).unwrap();
        let t = gt_offsets(&s.cloud, &s.labels, &tax()).unwrap();
        for (a, b) in p.offsets.iter().zip(&t.targets) {
            assert!(distance(*a, *b) < 0.4);
        }
    }

    #[test]
    fn corpus_writes_five_files_per_scan() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_corpus(&SceneConfig::default(), &OracleNoise::default(), &tax(), 2).unwrap();
        assert_eq!(corpus[1].stem, "000001");
        for scan in &corpus {
            let paths = write_scan(dir.path(), scan).unwrap();
            assert_eq!(paths.len(), 5);
        }
        let back = io::read_points(&dir.path().join("velodyne/000000.bin")).unwrap();
        assert_eq!(back, corpus[0].scene.cloud);
        let labels = io::read_labels(&dir.path().join("labels/000001.label")).unwrap();
        assert_eq!(labels, corpus[1].scene.labels);
        let preds = io::read_predictions(&dir.path().join("predictions"), "000001").unwrap();
        assert_eq!(preds, corpus[1].predictions);
    }
}
