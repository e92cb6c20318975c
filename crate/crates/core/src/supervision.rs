//! Training targets and forward-only loss terms for the offset and
//! confidence heads.
//!
//! Things points belonging to an instance (id > 0) regress the vector from
//! themselves to the midpoint of their instance's axis-aligned bounding box.
//! The confidence target decays as a Gaussian of the per-point offset error.
//! All reductions run sequentially in point order so results are reproducible.

use std::collections::BTreeMap;

use crate::domain::{norm, sub, ClassTaxonomy, InstanceId, PanopticLabels, Point3, PointCloud};
use crate::error::{Error, Result};

/// Weight on the positive term of the confidence cross entropy.
pub const POSITIVE_WEIGHT: f64 = 6.0;
/// Clamp for probabilities entering a logarithm.
pub const LOG_EPS: f64 = 1e-7;
pub const DEFAULT_CONFIDENCE_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetTargets {
    pub targets: Vec<Point3>,
    pub things_mask: Vec<bool>,
    pub centers: BTreeMap<InstanceId, Point3>,
}

impl OffsetTargets {
    pub fn things_count(&self) -> usize {
        self.things_mask.iter().filter(|&&m| m).count()
    }
}

fn is_instance_point(labels: &PanopticLabels, taxonomy: &ClassTaxonomy, i: usize) -> bool {
    labels.instance[i] > 0 && taxonomy.is_things(labels.semantic[i])
}

/// Bounding-box midpoint of every things instance.
pub fn instance_centers(
    cloud: &PointCloud,
    labels: &PanopticLabels,
    taxonomy: &ClassTaxonomy,
) -> Result<BTreeMap<InstanceId, Point3>> {
    Error::check_len("labels", cloud.len(), labels.len())?;
    let mut boxes: BTreeMap<InstanceId, (Point3, Point3)> = BTreeMap::new();
    for (i, &p) in cloud.coords().iter().enumerate() {
        if !is_instance_point(labels, taxonomy, i) {
            continue;
        }
        let (lo, hi) = boxes.entry(labels.instance[i]).or_insert((p, p));
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Ok(boxes
        .into_iter()
        .map(|(id, (lo, hi))| (id, [0, 1, 2].map(|k| (lo[k] + hi[k]) / 2.0)))
        .collect())
}

pub fn gt_offsets(
    cloud: &PointCloud,
    labels: &PanopticLabels,
    taxonomy: &ClassTaxonomy,
) -> Result<OffsetTargets> {
    let centers = instance_centers(cloud, labels, taxonomy)?;
    let mut targets = Vec::with_capacity(cloud.len());
    let mut things_mask = Vec::with_capacity(cloud.len());
    for (i, &p) in cloud.coords().iter().enumerate() {
        if is_instance_point(labels, taxonomy, i) {
            targets.push(sub(centers[&labels.instance[i]], p));
            things_mask.push(true);
        } else {
            targets.push([0.0; 3]);
            things_mask.push(false);
        }
    }
    Ok(OffsetTargets {
        targets,
        things_mask,
        centers,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetLoss {
    /// sum of per-point errors over the number of things points
    pub total: f64,
    pub per_point: Vec<f64>,
    /// set when there are no things points; `total` is 0 then
    pub degenerate: bool,
}

pub fn offset_loss(pred_offsets: &[Point3], targets: &OffsetTargets) -> Result<OffsetLoss> {
    Error::check_len("predicted offsets", targets.targets.len(), pred_offsets.len())?;
    let per_point: Vec<f64> = pred_offsets
        .iter()
        .zip(&targets.targets)
        .zip(&targets.things_mask)
        .map(|((&pred, &target), &things)| if things { norm(sub(pred, target)) } else { 0.0 })
        .collect();
    let count = targets.things_count();
    let sum: f64 = per_point.iter().sum();
    Ok(OffsetLoss {
        total: if count == 0 { 0.0 } else { sum / count as f64 },
        per_point,
        degenerate: count == 0,
    })
}

/// Confidence targets `exp(-L^2 / (2 sigma^2))` on things points, 0 elsewhere.
pub fn gt_confidence(per_point_loss: &[f64], things_mask: &[bool], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
    }
    Error::check_len("things mask", per_point_loss.len(), things_mask.len())?;
    let denom = 2.0 * sigma * sigma;
    Ok(per_point_loss
        .iter()
        .zip(things_mask)
        .map(|(&l, &things)| if things { (-(l * l) / denom).exp() } else { 0.0 })
        .collect())
}

/// Class-weighted binary cross entropy between predicted and target confidences.
/// Returns 0 for empty input.
pub fn wbce_loss(pred_conf: &[f64], gt_conf: &[f64]) -> Result<f64> {
    Error::check_len("target confidences", pred_conf.len(), gt_conf.len())?;
    if pred_conf.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (&p, &c) in pred_conf.iter().zip(gt_conf) {
        let p = p.clamp(LOG_EPS, 1.0 - LOG_EPS);
        sum += POSITIVE_WEIGHT * c * p.ln() + (1.0 - c) * (1.0 - p).ln();
    }
    Ok(-sum / pred_conf.len() as f64)
}

/// The scalar terms combined into one head's training loss.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub wce: f64,
    pub lovasz: f64,
    pub consistency: f64,
    pub offset: f64,
    pub wbce: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        total_loss(self.wce, self.lovasz, self.consistency, self.offset, self.wbce)
    }
}

pub fn total_loss(wce: f64, lovasz: f64, consistency: f64, offset: f64, wbce: f64) -> f64 {
    wce + 3.0 * lovasz + consistency + 2.0 * offset + wbce
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetError {
    /// meters
    pub mean: f64,
    pub degenerate: bool,
}

/// Mean Euclidean offset error over things points.
pub fn mean_offset_error(pred_offsets: &[Point3], targets: &OffsetTargets) -> Result<OffsetError> {
    let loss = offset_loss(pred_offsets, targets)?;
    Ok(OffsetError {
        mean: loss.total,
        degenerate: loss.degenerate,
    })
}
