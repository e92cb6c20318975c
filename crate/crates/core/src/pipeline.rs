//! Inference post-process: predictions in, panoptic labels out.
//!
//! 1. select points predicted as a things class
//! 2. shift each selected point by its predicted offset
//! 3. deduplicate the shifted candidates into instance centers
//! 4. assign every shifted things point to its nearest center
//! 5. majority-vote the semantic label inside each instance
//!
//! Instance ids are `1..=D` in kept-center order; everything else gets 0.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::clustering::{
    cdm_bruteforce, cdm_grid, dbscan, meanshift, nearest, CdmParams, KeptCenters, MeanShiftParams,
};
use crate::domain::{
    add, ClassId, ClassRole, ClassTaxonomy, InstanceId, PanopticLabels, Point3, PointCloud,
    PredictionSet,
};
use crate::error::{Error, Result};
use crate::geometry::{shift_points, DEFAULT_SHIFT_GATE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PipelineParamsDoc", into = "PipelineParamsDoc")]
pub struct PipelineParams {
    pub cdm: CdmParams,
    /// Confidence gate; only consulted when `gate_shift` is set.
    pub delta: f64,
    pub majority_vote: bool,
    /// Shift only candidates whose confidence exceeds `delta` in step 2.
    /// Off by default: the post-process shift is unconditional.
    pub gate_shift: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct PipelineParamsDoc {
    d: f64,
    delta: f64,
    majority_vote: bool,
    gate_shift: bool,
}

impl Default for PipelineParamsDoc {
    fn default() -> Self {
        PipelineParams::default().into()
    }
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            cdm: CdmParams::default(),
            delta: DEFAULT_SHIFT_GATE,
            majority_vote: true,
            gate_shift: false,
        }
    }
}

impl PipelineParams {
    pub fn new(cdm: CdmParams, delta: f64, majority_vote: bool) -> Result<Self> {
        let p = Self {
            cdm,
            delta,
            majority_vote,
            gate_shift: false,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::param("delta", format!("must lie in [0, 1), got {}", self.delta)));
        }
        Ok(())
    }
}

impl TryFrom<PipelineParamsDoc> for PipelineParams {
    type Error = Error;

    fn try_from(doc: PipelineParamsDoc) -> Result<Self> {
        let p = Self {
            cdm: CdmParams::new(doc.d)?,
            delta: doc.delta,
            majority_vote: doc.majority_vote,
            gate_shift: doc.gate_shift,
        };
        p.check()?;
        Ok(p)
    }
}

impl From<PipelineParams> for PipelineParamsDoc {
    fn from(p: PipelineParams) -> Self {
        Self {
            d: p.cdm.distance(),
            delta: p.delta,
            majority_vote: p.majority_vote,
            gate_shift: p.gate_shift,
        }
    }
}

/// Ascending indices of points whose predicted class is a things class.
pub fn select_things(pred_semantic: &[ClassId], taxonomy: &ClassTaxonomy) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, &class) in pred_semantic.iter().enumerate() {
        match taxonomy.role(class) {
            None => return Err(Error::UnknownClass(class)),
            Some(ClassRole::Things) => out.push(i),
            Some(_) => {}
        }
    }
    Ok(out)
}

/// Ordinal of the nearest kept center for every shifted things point.
pub fn assign_to_centers(shifted_things: &[Point3], centers: &KeptCenters) -> Result<Vec<usize>> {
    if centers.is_empty() {
        return if shifted_things.is_empty() {
            Ok(Vec::new())
        } else {
            Err(Error::NoCenters(shifted_things.len()))
        };
    }
    Ok(shifted_things
        .iter()
        .map(|&p| nearest(p, &centers.coords))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Voted {
    pub semantic: Vec<ClassId>,
    pub instance: Vec<InstanceId>,
}

/// Relabels every instance (id > 0) with its most frequent class, smallest
/// class id on ties. An instance whose winner is not a things class is
/// dissolved into instance 0.
pub fn majority_vote(
    semantic: &[ClassId],
    instance: &[InstanceId],
    taxonomy: &ClassTaxonomy,
) -> Result<Voted> {
    Error::check_len("instance ids", semantic.len(), instance.len())?;
    let mut counts: BTreeMap<InstanceId, BTreeMap<ClassId, usize>> = BTreeMap::new();
    for (&s, &inst) in semantic.iter().zip(instance) {
        if inst > 0 {
            *counts.entry(inst).or_default().entry(s).or_default() += 1;
        }
    }
    let winners: BTreeMap<InstanceId, ClassId> = counts
        .into_iter()
        .map(|(inst, votes)| {
            let mut best = (0, 0);
            for (class, n) in votes {
                if n > best.1 {
                    best = (class, n);
                }
            }
            (inst, best.0)
        })
        .collect();

    let mut out = Voted {
        semantic: semantic.to_vec(),
        instance: instance.to_vec(),
    };
    for (s, inst) in out.semantic.iter_mut().zip(out.instance.iter_mut()) {
        if let Some(&class) = winners.get(inst) {
            *s = class;
            if !taxonomy.is_things(class) {
                *inst = 0;
            }
        }
    }
    Ok(out)
}

/// How step 3/4 groups shifted things points into instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Clusterer {
    CdmGrid,
    CdmBruteforce,
    /// DBSCAN noise points keep instance 0.
    Dbscan { eps: f64, min_pts: usize },
    Meanshift(MeanShiftParams),
}

impl Clusterer {
    pub fn name(&self) -> &'static str {
        match self {
            Clusterer::CdmGrid => "cdm_grid",
            Clusterer::CdmBruteforce => "cdm_bruteforce",
            Clusterer::Dbscan { .. } => "dbscan",
            Clusterer::Meanshift(_) => "meanshift",
        }
    }
}

/// Wall-clock time of each post-process stage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    pub select: Duration,
    pub shift: Duration,
    pub cluster: Duration,
    pub assign: Duration,
    pub vote: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.select + self.shift + self.cluster + self.assign + self.vote
    }

    pub fn accumulate(&mut self, other: &StageTimings) {
        self.select += other.select;
        self.shift += other.shift;
        self.cluster += other.cluster;
        self.assign += other.assign;
        self.vote += other.vote;
    }

    pub fn as_millis_map(&self) -> BTreeMap<String, f64> {
        [
            ("select", self.select),
            ("shift", self.shift),
            ("cdm", self.cluster),
            ("assign", self.assign),
            ("vote", self.vote),
            ("postprocess_total", self.total()),
        ]
        .into_iter()
        .map(|(k, d)| (k.to_string(), d.as_secs_f64() * 1e3))
        .collect()
    }
}

pub fn panoptic_postprocess(
    cloud: &PointCloud,
    preds: &PredictionSet,
    taxonomy: &ClassTaxonomy,
    params: &PipelineParams,
) -> Result<PanopticLabels> {
    postprocess_with(cloud, preds, taxonomy, params, Clusterer::CdmGrid).map(|(labels, _)| labels)
}

pub fn postprocess_with(
    cloud: &PointCloud,
    preds: &PredictionSet,
    taxonomy: &ClassTaxonomy,
    params: &PipelineParams,
    clusterer: Clusterer,
) -> Result<(PanopticLabels, StageTimings)> {
    params.check()?;
    Error::check_len("predictions", cloud.len(), preds.len())?;
    preds.check()?;
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let things = select_things(&preds.semantic, taxonomy)?;
    timings.select = t.elapsed();

    let t = Instant::now();
    let coords: Vec<Point3> = things.iter().map(|&i| cloud.coords()[i]).collect();
    let offsets: Vec<Point3> = things.iter().map(|&i| preds.offsets[i]).collect();
    let confidence: Vec<f64> = things.iter().map(|&i| preds.confidence[i]).collect();
    let shifted = if params.gate_shift {
        shift_points(&coords, &offsets, &confidence, params.delta)?.coords
    } else {
        coords.iter().zip(&offsets).map(|(&p, &o)| add(p, o)).collect()
    };
    timings.shift = t.elapsed();

    // instance id per selected point, 0 = none
    let things_instance: Vec<InstanceId> = match clusterer {
        Clusterer::CdmGrid | Clusterer::CdmBruteforce => {
            let t = Instant::now();
            let kept = if clusterer == Clusterer::CdmGrid {
                cdm_grid(&shifted, &confidence, &params.cdm)?
            } else {
                cdm_bruteforce(&shifted, &confidence, &params.cdm)?
            };
            timings.cluster = t.elapsed();
            let t = Instant::now();
            let ordinals = assign_to_centers(&shifted, &kept)?;
            timings.assign = t.elapsed();
            ordinals.into_iter().map(|o| o as InstanceId + 1).collect()
        }
        Clusterer::Dbscan { eps, min_pts } => {
            let t = Instant::now();
            let ids = dbscan(&shifted, eps, min_pts)?;
            timings.cluster = t.elapsed();
            ids.into_iter().map(|c| (c + 1).max(0) as InstanceId).collect()
        }
        Clusterer::Meanshift(ms) => {
            let t = Instant::now();
            let result = meanshift(&shifted, &ms)?;
            timings.cluster = t.elapsed();
            result.labels.into_iter().map(|l| l as InstanceId + 1).collect()
        }
    };

    let mut instance = vec![0; cloud.len()];
    for (&i, &id) in things.iter().zip(&things_instance) {
        instance[i] = id;
    }
    let mut labels = PanopticLabels {
        semantic: preds.semantic.clone(),
        instance,
    };

    if params.majority_vote {
        let t = Instant::now();
        let voted = majority_vote(&labels.semantic, &labels.instance, taxonomy)?;
        labels = PanopticLabels {
            semantic: voted.semantic,
            instance: voted.instance,
        };
        timings.vote = t.elapsed();
    }
    Ok((labels, timings))
}
