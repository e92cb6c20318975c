//! Scan-level domain types and the packed `.label` codec.
//!
//! A scan is a [`PointCloud`] plus per-point [`PanopticLabels`]. Labels are
//! exchanged in the SemanticKITTI word layout: one little-endian `u32` per
//! point, semantic class in the low 16 bits and instance id in the high 16.
//! Class id 0 is the unlabeled/ignore class unless a taxonomy says otherwise.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ClassId = u32;
pub type InstanceId = u32;
pub type Point3 = [f64; 3];

const FIELD_MAX: u32 = u16::MAX as u32;

#[inline]
pub fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn norm(v: Point3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
pub fn distance(a: Point3, b: Point3) -> f64 {
    norm(sub(a, b))
}

#[inline]
pub fn distance_sq(a: Point3, b: Point3) -> f64 {
    let d = sub(a, b);
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

#[inline]
pub fn is_finite(p: Point3) -> bool {
    p.iter().all(|v| v.is_finite())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    Stuff,
    Things,
}

/// How a class id behaves under a taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassRole {
    Ignore,
    Stuff,
    Things,
}

impl From<ClassKind> for ClassRole {
    fn from(kind: ClassKind) -> Self {
        match kind {
            ClassKind::Stuff => ClassRole::Stuff,
            ClassKind::Things => ClassRole::Things,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: ClassId,
    pub name: String,
    pub kind: ClassKind,
}

#[derive(Serialize, Deserialize)]
struct TaxonomyDoc {
    entries: Vec<ClassEntry>,
    ignore_id: ClassId,
}

/// Registry of class ids split into stuff and things, plus one ignore id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaxonomyDoc", into = "TaxonomyDoc")]
pub struct ClassTaxonomy {
    entries: Vec<ClassEntry>,
    ignore_id: ClassId,
    // dense id -> role table; None for unregistered ids
    roles: Vec<Option<ClassRole>>,
}

impl ClassTaxonomy {
    pub fn new(entries: Vec<ClassEntry>, ignore_id: ClassId) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.id > FIELD_MAX {
                return Err(Error::InvalidTaxonomy(format!(
                    "class id {} does not fit in 16 bits",
                    e.id
                )));
            }
            if e.id == ignore_id {
                return Err(Error::InvalidTaxonomy(format!(
                    "ignore id {ignore_id} is also listed as class `{}`",
                    e.name
                )));
            }
            if !seen.insert(e.id) {
                return Err(Error::InvalidTaxonomy(format!("duplicate class id {}", e.id)));
            }
        }
        if ignore_id > FIELD_MAX {
            return Err(Error::InvalidTaxonomy(format!(
                "ignore id {ignore_id} does not fit in 16 bits"
            )));
        }
        for kind in [ClassKind::Stuff, ClassKind::Things] {
            if !entries.iter().any(|e| e.kind == kind) {
                return Err(Error::InvalidTaxonomy(format!("no {kind:?} class registered")));
            }
        }

        let max_id = entries.iter().map(|e| e.id).chain([ignore_id]).max().unwrap_or(0);
        let mut roles = vec![None; max_id as usize + 1];
        roles[ignore_id as usize] = Some(ClassRole::Ignore);
        for e in &entries {
            roles[e.id as usize] = Some(e.kind.into());
        }
        Ok(Self {
            entries,
            ignore_id,
            roles,
        })
    }

    /// The 19-class SemanticKITTI panoptic taxonomy (8 things, 11 stuff, 0 = unlabeled).
    pub fn semantic_kitti() -> Self {
        const CLASSES: [(&str, ClassKind); 19] = [
            ("car", ClassKind::Things),
            ("bicycle", ClassKind::Things),
            ("motorcycle", ClassKind::Things),
            ("truck", ClassKind::Things),
            ("other-vehicle", ClassKind::Things),
            ("person", ClassKind::Things),
            ("bicyclist", ClassKind::Things),
            ("motorcyclist", ClassKind::Things),
            ("road", ClassKind::Stuff),
            ("parking", ClassKind::Stuff),
            ("sidewalk", ClassKind::Stuff),
            ("other-ground", ClassKind::Stuff),
            ("building", ClassKind::Stuff),
            ("fence", ClassKind::Stuff),
            ("vegetation", ClassKind::Stuff),
            ("trunk", ClassKind::Stuff),
            ("terrain", ClassKind::Stuff),
            ("pole", ClassKind::Stuff),
            ("traffic-sign", ClassKind::Stuff),
        ];
        let entries = CLASSES
            .iter()
            .zip(1..)
            .map(|(&(name, kind), id)| ClassEntry {
                id,
                name: name.to_string(),
                kind,
            })
            .collect();
        Self::new(entries, 0).expect("built-in taxonomy is valid")
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    pub fn ignore_id(&self) -> ClassId {
        self.ignore_id
    }

    pub fn role(&self, class: ClassId) -> Option<ClassRole> {
        self.roles.get(class as usize).copied().flatten()
    }

    pub fn is_things(&self, class: ClassId) -> bool {
        self.role(class) == Some(ClassRole::Things)
    }

    pub fn is_stuff(&self, class: ClassId) -> bool {
        self.role(class) == Some(ClassRole::Stuff)
    }

    pub fn entry(&self, class: ClassId) -> Option<&ClassEntry> {
        self.entries.iter().find(|e| e.id == class)
    }

    pub fn class_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.entries.iter().map(|e| e.id)
    }

    pub fn things_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.entries
            .iter()
            .filter(|e| e.kind == ClassKind::Things)
            .map(|e| e.id)
    }

    pub fn stuff_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.entries
            .iter()
            .filter(|e| e.kind == ClassKind::Stuff)
            .map(|e| e.id)
    }
}

impl TryFrom<TaxonomyDoc> for ClassTaxonomy {
    type Error = Error;

    fn try_from(doc: TaxonomyDoc) -> Result<Self> {
        Self::new(doc.entries, doc.ignore_id)
    }
}

impl From<ClassTaxonomy> for TaxonomyDoc {
    fn from(t: ClassTaxonomy) -> Self {
        TaxonomyDoc {
            entries: t.entries,
            ignore_id: t.ignore_id,
        }
    }
}

/// Scan coordinates in meters plus `feature_dim` auxiliary values per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<Point3>,
    features: Vec<f32>,
    feature_dim: usize,
}

impl PointCloud {
    pub fn new(coords: Vec<Point3>, features: Vec<f32>, feature_dim: usize) -> Result<Self> {
        Error::check_len("point features", coords.len() * feature_dim, features.len())?;
        if let Some(index) = coords.iter().position(|&p| !is_finite(p)) {
            return Err(Error::NonFinite {
                what: "coordinate",
                index,
            });
        }
        Ok(Self {
            coords,
            features,
            feature_dim,
        })
    }

    pub fn from_coords(coords: Vec<Point3>) -> Result<Self> {
        Self::new(coords, Vec::new(), 0)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Point3] {
        &self.coords
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &[f32] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }
}

/// Per-point semantic class and instance id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PanopticLabels {
    pub semantic: Vec<ClassId>,
    pub instance: Vec<InstanceId>,
}

impl PanopticLabels {
    pub fn new(semantic: Vec<ClassId>, instance: Vec<InstanceId>) -> Result<Self> {
        Error::check_len("instance labels", semantic.len(), instance.len())?;
        Ok(Self { semantic, instance })
    }

    /// Semantic-only labels with every instance id set to 0.
    pub fn semantic_only(semantic: Vec<ClassId>) -> Self {
        let instance = vec![0; semantic.len()];
        Self { semantic, instance }
    }

    pub fn len(&self) -> usize {
        self.semantic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.semantic.is_empty()
    }
}

pub fn decode_labels(raw: &[u8]) -> Result<PanopticLabels> {
    if !raw.len().is_multiple_of(4) {
        return Err(Error::MalformedLabels { len: raw.len() });
    }
    let n = raw.len() / 4;
    let mut semantic = Vec::with_capacity(n);
    let mut instance = Vec::with_capacity(n);
    for chunk in raw.chunks_exact(4) {
        let word = u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        semantic.push(word & 0xFFFF);
        instance.push(word >> 16);
    }
    Ok(PanopticLabels { semantic, instance })
}

pub fn encode_labels(labels: &PanopticLabels) -> Result<Vec<u8>> {
    Error::check_len("instance labels", labels.semantic.len(), labels.instance.len())?;
    let mut out = Vec::with_capacity(labels.len() * 4);
    for (index, (&sem, &inst)) in labels.semantic.iter().zip(&labels.instance).enumerate() {
        if sem > FIELD_MAX {
            return Err(Error::LabelOverflow {
                index,
                field: "semantic",
                value: sem,
            });
        }
        if inst > FIELD_MAX {
            return Err(Error::LabelOverflow {
                index,
                field: "instance",
                value: inst,
            });
        }
        out.extend_from_slice(&(sem | (inst << 16)).to_le_bytes());
    }
    Ok(out)
}

/// A broken labeling invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownClass {
        index: usize,
        class: ClassId,
    },
    /// A stuff or ignore point carries a nonzero instance id.
    NonThingsInstance {
        index: usize,
        class: ClassId,
        instance: InstanceId,
    },
    /// One things instance id spans several semantic classes.
    MixedInstance {
        instance: InstanceId,
        classes: Vec<ClassId>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownClass { index, class } => {
                write!(f, "point {index}: unknown class {class}")
            }
            Violation::NonThingsInstance {
                index,
                class,
                instance,
            } => write!(
                f,
                "point {index}: non-things class {class} has instance {instance}"
            ),
            Violation::MixedInstance { instance, classes } => {
                write!(f, "instance {instance} spans classes {classes:?}")
            }
        }
    }
}

pub fn validate(labels: &PanopticLabels, taxonomy: &ClassTaxonomy) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut instance_classes: BTreeMap<InstanceId, BTreeSet<ClassId>> = BTreeMap::new();
    for (index, (&class, &instance)) in labels.semantic.iter().zip(&labels.instance).enumerate() {
        match taxonomy.role(class) {
            None => violations.push(Violation::UnknownClass { index, class }),
            Some(ClassRole::Things) => {
                if instance > 0 {
                    instance_classes.entry(instance).or_default().insert(class);
                }
            }
            Some(ClassRole::Stuff | ClassRole::Ignore) => {
                if instance != 0 {
                    violations.push(Violation::NonThingsInstance {
                        index,
                        class,
                        instance,
                    });
                }
            }
        }
    }
    violations.extend(
        instance_classes
            .into_iter()
            .filter(|(_, classes)| classes.len() > 1)
            .map(|(instance, classes)| Violation::MixedInstance {
                instance,
                classes: classes.into_iter().collect(),
            }),
    );
    violations
}

/// Network outputs for one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub semantic: Vec<ClassId>,
    /// Optional per-point class probabilities; column `j` is class id `j`.
    pub probabilities: Option<Vec<Vec<f64>>>,
    pub offsets: Vec<Point3>,
    pub confidence: Vec<f64>,
}

impl PredictionSet {
    pub fn new(semantic: Vec<ClassId>, offsets: Vec<Point3>, confidence: Vec<f64>) -> Result<Self> {
        let set = Self {
            semantic,
            probabilities: None,
            offsets,
            confidence,
        };
        set.check()?;
        Ok(set)
    }

    /// Builds predictions from probability rows, taking the row-wise argmax
    /// (lowest class id on ties) as the semantic label.
    pub fn from_probabilities(
        probabilities: Vec<Vec<f64>>,
        offsets: Vec<Point3>,
        confidence: Vec<f64>,
    ) -> Result<Self> {
        let mut semantic = Vec::with_capacity(probabilities.len());
        for (index, row) in probabilities.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.is_empty() || (sum - 1.0).abs() > 1e-6 {
                return Err(Error::param(
                    "probabilities",
                    format!("row {index} sums to {sum}, expected 1"),
                ));
            }
            semantic.push(argmax(row) as ClassId);
        }
        let set = Self {
            semantic,
            probabilities: Some(probabilities),
            offsets,
            confidence,
        };
        set.check()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.semantic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.semantic.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.semantic.len();
        Error::check_len("prediction offsets", n, self.offsets.len())?;
        Error::check_len("prediction confidences", n, self.confidence.len())?;
        if let Some(index) = self.offsets.iter().position(|&o| !is_finite(o)) {
            return Err(Error::NonFinite {
                what: "offset",
                index,
            });
        }
        if let Some((index, &value)) = self
            .confidence
            .iter()
            .enumerate()
            .find(|(_, c)| !(0.0..=1.0).contains(*c))
        {
            return Err(Error::InvalidConfidence { index, value });
        }
        if let Some(rows) = &self.probabilities {
            Error::check_len("probability rows", n, rows.len())?;
            for (index, row) in rows.iter().enumerate() {
                if argmax(row) as ClassId != self.semantic[index] {
                    return Err(Error::param(
                        "semantic",
                        format!("point {index} label differs from probability argmax"),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = j;
        }
    }
    best
}
