//! Panoptic quality evaluation.
//!
//! Segments are built per scan: each things instance `(class, id > 0)` is a
//! segment, and all points of a stuff class form a single `(class, 0)`
//! segment. Things points with instance 0 and ground-truth ignore points
//! belong to no segment; predicted points lying on ground-truth ignore points
//! are dropped before matching. A ground-truth and a predicted segment of the
//! same class match when their IoU exceeds 0.5, which makes matches unique.
//!
//! Per class, with matched IoUs summed into `iou_sum`:
//!
//! ```text
//! SQ = iou_sum / TP            RQ = TP / (TP + FP/2 + FN/2)            PQ = SQ * RQ
//! ```
//!
//! Aggregates are unweighted means over classes seen in either labeling.
//! PQ-dagger replaces each stuff class's PQ with its semantic IoU.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::domain::{ClassId, ClassKind, ClassRole, ClassTaxonomy, InstanceId, PanopticLabels};
use crate::error::{Error, Result};

pub type SegmentKey = (ClassId, InstanceId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Segments smaller than this are not counted as FN/FP when unmatched.
    pub min_points: usize,
}

fn segment_key(
    taxonomy: &ClassTaxonomy,
    class: ClassId,
    instance: InstanceId,
) -> Result<Option<SegmentKey>> {
    match taxonomy.role(class) {
        None => Err(Error::UnknownClass(class)),
        Some(ClassRole::Ignore) => Ok(None),
        Some(ClassRole::Stuff) => Ok(Some((class, 0))),
        Some(ClassRole::Things) => Ok((instance > 0).then_some((class, instance))),
    }
}

/// Point indices of every segment in one labeling.
pub fn segments(
    labels: &PanopticLabels,
    taxonomy: &ClassTaxonomy,
) -> Result<BTreeMap<SegmentKey, Vec<usize>>> {
    Error::check_len("instance labels", labels.semantic.len(), labels.instance.len())?;
    let mut out: BTreeMap<SegmentKey, Vec<usize>> = BTreeMap::new();
    for (i, (&s, &inst)) in labels.semantic.iter().zip(&labels.instance).enumerate() {
        if let Some(key) = segment_key(taxonomy, s, inst)? {
            out.entry(key).or_default().push(i);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassStats {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub iou_sum: f64,
    /// semantic intersection / union point counts, for mIoU
    pub intersection: u64,
    pub union: u64,
}

impl ClassStats {
    fn merge(&mut self, other: &ClassStats) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.iou_sum += other.iou_sum;
        self.intersection += other.intersection;
        self.union += other.union;
    }

    fn is_absent(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0 && self.union == 0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchStats {
    pub classes: BTreeMap<ClassId, ClassStats>,
}

impl MatchStats {
    pub fn merge(&mut self, other: &MatchStats) {
        for (class, stats) in &other.classes {
            self.classes.entry(*class).or_default().merge(stats);
        }
    }
}

pub fn match_scan(
    gt: &PanopticLabels,
    pred: &PanopticLabels,
    taxonomy: &ClassTaxonomy,
) -> Result<MatchStats> {
    match_scan_with(gt, pred, taxonomy, &EvalOptions::default())
}

pub fn match_scan_with(
    gt: &PanopticLabels,
    pred: &PanopticLabels,
    taxonomy: &ClassTaxonomy,
    options: &EvalOptions,
) -> Result<MatchStats> {
    Error::check_len("prediction labels", gt.len(), pred.len())?;
    Error::check_len("ground-truth instances", gt.len(), gt.instance.len())?;
    Error::check_len("predicted instances", pred.len(), pred.instance.len())?;

    let mut stats = MatchStats {
        classes: taxonomy.class_ids().map(|c| (c, ClassStats::default())).collect(),
    };
    let mut gt_area: FxHashMap<SegmentKey, u64> = FxHashMap::default();
    let mut pred_area: FxHashMap<SegmentKey, u64> = FxHashMap::default();
    let mut overlap: FxHashMap<(SegmentKey, SegmentKey), u64> = FxHashMap::default();
    let ignore = taxonomy.ignore_id();

    for i in 0..gt.len() {
        let (gs, ps) = (gt.semantic[i], pred.semantic[i]);
        let pred_key = segment_key(taxonomy, ps, pred.instance[i])?;
        if gs == ignore {
            continue;
        }
        let gt_key = segment_key(taxonomy, gs, gt.instance[i])?;

        if let Some(s) = stats.classes.get_mut(&gs) {
            s.union += 1;
            if ps == gs {
                s.intersection += 1;
            }
        }
        if ps != gs {
            if let Some(s) = stats.classes.get_mut(&ps) {
                s.union += 1;
            }
        }

        if let Some(g) = gt_key {
            *gt_area.entry(g).or_default() += 1;
        }
        if let Some(p) = pred_key {
            *pred_area.entry(p).or_default() += 1;
            if let Some(g) = gt_key {
                if g.0 == p.0 {
                    *overlap.entry((g, p)).or_default() += 1;
                }
            }
        }
    }

    // sorted so iou_sum accumulates in a fixed order
    let mut pairs: Vec<_> = overlap.into_iter().collect();
    pairs.sort_unstable_by_key(|&(k, _)| k);
    let mut gt_matched = rustc_hash::FxHashSet::default();
    let mut pred_matched = rustc_hash::FxHashSet::default();
    for ((g, p), inter) in pairs {
        let union = gt_area[&g] + pred_area[&p] - inter;
        let iou = inter as f64 / union as f64;
        if iou > 0.5 {
            let s = stats.classes.get_mut(&g.0).expect("class registered");
            s.tp += 1;
            s.iou_sum += iou;
            gt_matched.insert(g);
            pred_matched.insert(p);
        }
    }
    let min = options.min_points as u64;
    for (g, &area) in &gt_area {
        if !gt_matched.contains(g) && area >= min {
            stats.classes.get_mut(&g.0).expect("class registered").fn_ += 1;
        }
    }
    for (p, &area) in &pred_area {
        if !pred_matched.contains(p) && area >= min {
            stats.classes.get_mut(&p.0).expect("class registered").fp += 1;
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_id: ClassId,
    pub name: String,
    pub kind: ClassKind,
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub iou: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregates {
    pub pq: f64,
    pub pq_dagger: f64,
    pub sq: f64,
    pub rq: f64,
    pub pq_th: f64,
    pub sq_th: f64,
    pub rq_th: f64,
    pub pq_st: f64,
    pub sq_st: f64,
    pub rq_st: f64,
    pub miou: f64,
}

/// Evaluation result. All metric values are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scans: usize,
    pub aggregate: Aggregates,
    /// classes seen in either labeling, in taxonomy order
    pub classes: Vec<ClassReport>,
}

impl EvalReport {
    pub fn class(&self, class_id: ClassId) -> Option<&ClassReport> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }

    /// Summary row in the usual benchmark column order, then one row per class.
    pub fn to_table(&self) -> String {
        let a = &self.aggregate;
        let mut out = String::new();
        let heads = ["PQ", "PQ†", "SQ", "RQ", "PQTh", "SQTh", "RQTh", "PQSt", "SQSt", "RQSt", "mIoU"];
        for h in heads {
            let _ = write!(out, "{h:>7}");
        }
        out.push('\n');
        for v in [
            a.pq, a.pq_dagger, a.sq, a.rq, a.pq_th, a.sq_th, a.rq_th, a.pq_st, a.sq_st, a.rq_st, a.miou,
        ] {
            let _ = write!(out, "{v:>7.1}");
        }
        out.push_str("\n\n");
        let _ = writeln!(
            out,
            "{:<16}{:>7}{:>7}{:>7}{:>7}{:>6}{:>6}{:>6}",
            "class", "PQ", "SQ", "RQ", "IoU", "TP", "FP", "FN"
        );
        for c in &self.classes {
            let _ = writeln!(
                out,
                "{:<16}{:>7.1}{:>7.1}{:>7.1}{:>7.1}{:>6}{:>6}{:>6}",
                c.name, c.pq, c.sq, c.rq, c.iou, c.tp, c.fp, c.fn_
            );
        }
        out
    }
}

/// Streaming accumulator over scans.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    taxonomy: &'a ClassTaxonomy,
    options: EvalOptions,
    stats: MatchStats,
    scans: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(taxonomy: &'a ClassTaxonomy, options: EvalOptions) -> Self {
        Self {
            taxonomy,
            options,
            stats: MatchStats::default(),
            scans: 0,
        }
    }

    pub fn add_scan(&mut self, gt: &PanopticLabels, pred: &PanopticLabels) -> Result<()> {
        let s = match_scan_with(gt, pred, self.taxonomy, &self.options)?;
        self.add_stats(&s);
        Ok(())
    }

    pub fn add_stats(&mut self, stats: &MatchStats) {
        self.stats.merge(stats);
        self.scans += 1;
    }

    pub fn stats(&self) -> &MatchStats {
        &self.stats
    }

    pub fn report(&self) -> Result<EvalReport> {
        if self.scans == 0 {
            return Err(Error::EmptyInput("no scans to evaluate"));
        }
        Ok(report_from_stats(&self.stats, self.taxonomy, self.scans))
    }
}

pub fn evaluate<'s, I>(scans: I, taxonomy: &ClassTaxonomy) -> Result<EvalReport>
where
    I: IntoIterator<Item = (&'s PanopticLabels, &'s PanopticLabels)>,
{
    let mut ev = Evaluator::new(taxonomy, EvalOptions::default());
    for (gt, pred) in scans {
        ev.add_scan(gt, pred)?;
    }
    ev.report()
}

/// Matches scans on the rayon pool, then reduces in scan order.
pub fn evaluate_parallel(
    scans: &[(PanopticLabels, PanopticLabels)],
    taxonomy: &ClassTaxonomy,
    options: &EvalOptions,
) -> Result<EvalReport> {
    let per_scan: Vec<MatchStats> = scans
        .par_iter()
        .map(|(gt, pred)| match_scan_with(gt, pred, taxonomy, options))
        .collect::<Result<_>>()?;
    let mut ev = Evaluator::new(taxonomy, *options);
    for s in &per_scan {
        ev.add_stats(s);
    }
    ev.report()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn report_from_stats(stats: &MatchStats, taxonomy: &ClassTaxonomy, scans: usize) -> EvalReport {
    let mut classes = Vec::new();
    for entry in taxonomy.entries() {
        let Some(s) = stats.classes.get(&entry.id) else {
            continue;
        };
        if s.is_absent() {
            continue;
        }
        let (tp, fp, fn_) = (s.tp as f64, s.fp as f64, s.fn_ as f64);
        let sq = ratio(s.iou_sum, tp);
        let rq = ratio(tp, tp + 0.5 * fp + 0.5 * fn_);
        classes.push(ClassReport {
            class_id: entry.id,
            name: entry.name.clone(),
            kind: entry.kind,
            pq: 100.0 * sq * rq,
            sq: 100.0 * sq,
            rq: 100.0 * rq,
            iou: 100.0 * ratio(s.intersection as f64, s.union as f64),
            tp: s.tp,
            fp: s.fp,
            fn_: s.fn_,
        });
    }

    let of = |kind: Option<ClassKind>, f: fn(&ClassReport) -> f64| {
        mean(
            classes
                .iter()
                .filter(|c| kind.is_none_or(|k| c.kind == k))
                .map(f),
        )
    };
    let aggregate = Aggregates {
        pq: of(None, |c| c.pq),
        pq_dagger: of(None, |c| match c.kind {
            ClassKind::Stuff => c.iou,
            ClassKind::Things => c.pq,
        }),
        sq: of(None, |c| c.sq),
        rq: of(None, |c| c.rq),
        pq_th: of(Some(ClassKind::Things), |c| c.pq),
        sq_th: of(Some(ClassKind::Things), |c| c.sq),
        rq_th: of(Some(ClassKind::Things), |c| c.rq),
        pq_st: of(Some(ClassKind::Stuff), |c| c.pq),
        sq_st: of(Some(ClassKind::Stuff), |c| c.sq),
        rq_st: of(Some(ClassKind::Stuff), |c| c.rq),
        miou: of(None, |c| c.iou),
    };
    EvalReport {
        scans,
        aggregate,
        classes,
    }
}

/// True iff every class satisfies PQ = SQ x RQ (as fractions) within 1e-9.
pub fn pq_identity_check(report: &EvalReport) -> bool {
    report
        .classes
        .iter()
        .all(|c| (c.pq / 100.0 - (c.sq / 100.0) * (c.rq / 100.0)).abs() <= 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const CAR: ClassId = 1;
    const TRUCK: ClassId = 4;
    const ROAD: ClassId = 9;

    fn tax() -> ClassTaxonomy {
        ClassTaxonomy::semantic_kitti()
    }

    fn labels(semantic: Vec<ClassId>, instance: Vec<InstanceId>) -> PanopticLabels {
        PanopticLabels::new(semantic, instance).unwrap()
    }

    fn split_fixture() -> (PanopticLabels, PanopticLabels) {
        let gt = labels(vec![CAR; 10], vec![1; 10]);
        let pred = labels(vec![CAR; 10], [vec![1; 6], vec![2; 4]].concat());
        (gt, pred)
    }

    #[test]
    fn segment_construction() {
        let l = labels(vec![CAR, CAR, CAR, ROAD, ROAD, 0, CAR], vec![1, 1, 2, 0, 0, 0, 0]);
        let s = segments(&l, &tax()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[&(CAR, 1)], vec![0, 1]);
        assert_eq!(s[&(ROAD, 0)], vec![3, 4]);
        assert!(segments(&PanopticLabels::default(), &tax()).unwrap().is_empty());
    }

    #[test]
    fn segments_partition_labeled_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 300;
        let sem: Vec<ClassId> = (0..n).map(|_| rng.random_range(0..20)).collect();
        let inst: Vec<InstanceId> = sem
            .iter()
            .map(|&s| if (1..=8).contains(&s) { rng.random_range(1..5) } else { 0 })
            .collect();
        let s = segments(&labels(sem.clone(), inst), &tax()).unwrap();
        let mut seen = vec![0; n];
        for idx in s.values().flatten() {
            seen[*idx] += 1;
        }
        for i in 0..n {
            assert_eq!(seen[i], usize::from(sem[i] != 0));
        }
    }

    #[test]
    fn self_match_is_perfect() {
        let l = labels(vec![CAR, CAR, TRUCK, ROAD, ROAD], vec![1, 2, 3, 0, 0]);
        let m = match_scan(&l, &l, &tax()).unwrap();
        let car = m.classes[&CAR];
        assert_eq!((car.tp, car.fp, car.fn_, car.iou_sum), (2, 0, 0, 2.0));
        assert_eq!(m.classes[&ROAD].tp, 1);
        let r = evaluate([(&l, &l)], &tax()).unwrap();
        for c in &r.classes {
            assert_eq!((c.pq, c.sq, c.rq, c.iou), (100.0, 100.0, 100.0, 100.0));
        }
        let a = r.aggregate;
        for v in [a.pq, a.pq_dagger, a.sq, a.rq, a.pq_th, a.pq_st, a.miou] {
            assert_eq!(v, 100.0);
        }
    }

    #[test]
    fn split_instance_counts() {
        let (gt, pred) = split_fixture();
        let car = match_scan(&gt, &pred, &tax()).unwrap().classes[&CAR];
        assert_eq!((car.tp, car.fp, car.fn_), (1, 1, 0));
        assert!((car.iou_sum - 0.6).abs() < 1e-12);
    }

    #[test]
    fn split_instance_scores() {
        let (gt, pred) = split_fixture();
        let r = evaluate([(&gt, &pred)], &tax()).unwrap();
        assert_eq!(r.classes.len(), 1);
        let c = r.class(CAR).unwrap();
        // PQ = 0.6 / (1 + 0.5), SQ = 0.6, RQ = 1 / 1.5
        assert!((c.pq - 40.0).abs() < 1e-9);
        assert!((c.sq - 60.0).abs() < 1e-9);
        assert!((c.rq - 200.0 / 3.0).abs() < 1e-9);
        assert!(pq_identity_check(&r));
    }

    #[test]
    fn disjoint_predictions() {
        let gt = labels(vec![CAR, CAR, 0, 0], vec![1, 1, 0, 0]);
        let pred = labels(vec![0, 0, CAR, CAR], vec![0, 0, 1, 1]);
        // prediction only on ignore points: dropped entirely
        let m = match_scan(&gt, &pred, &tax()).unwrap().classes[&CAR];
        assert_eq!((m.tp, m.fp, m.fn_), (0, 0, 1));
        let gt = labels(vec![CAR, CAR, ROAD, ROAD], vec![1, 1, 0, 0]);
        let pred = labels(vec![ROAD, ROAD, CAR, CAR], vec![0, 0, 7, 7]);
        let m = match_scan(&gt, &pred, &tax()).unwrap();
        assert_eq!((m.classes[&CAR].tp, m.classes[&CAR].fp, m.classes[&CAR].fn_), (0, 1, 1));
        assert_eq!((m.classes[&ROAD].tp, m.classes[&ROAD].fp, m.classes[&ROAD].fn_), (0, 1, 1));
    }

    #[test]
    fn ignore_points_do_not_inflate_union() {
        // predicted segment spills onto two ignore points; IoU stays 3/3
        let gt = labels(vec![CAR, CAR, CAR, 0, 0], vec![1, 1, 1, 0, 0]);
        let pred = labels(vec![CAR; 5], vec![4; 5]);
        let m = match_scan(&gt, &pred, &tax()).unwrap().classes[&CAR];
        assert_eq!((m.tp, m.iou_sum), (1, 1.0));
        assert_eq!((m.intersection, m.union), (3, 3));
    }

    #[test]
    fn min_points_suppresses_small_unmatched() {
        let (gt, pred) = split_fixture();
        let opts = EvalOptions { min_points: 5 };
        let car = match_scan_with(&gt, &pred, &tax(), &opts).unwrap().classes[&CAR];
        assert_eq!((car.tp, car.fp), (1, 0));
    }

    #[test]
    fn errors() {
        assert!(evaluate(std::iter::empty(), &tax()).is_err());
        let a = labels(vec![CAR], vec![1]);
        let b = labels(vec![CAR, CAR], vec![1, 1]);
        assert!(match_scan(&a, &b, &tax()).is_err());
        let c = labels(vec![99], vec![0]);
        assert!(matches!(match_scan(&a, &c, &tax()), Err(Error::UnknownClass(99))));
    }

    #[test]
    fn pq_dagger_uses_stuff_iou() {
        // road predicted over 3 of 4 points plus 1 wrong point: IoU 3/5, PQ 60 from a 0.6 match
        let gt = labels(vec![ROAD, ROAD, ROAD, ROAD, CAR, CAR], vec![0, 0, 0, 0, 1, 1]);
        let pred = labels(vec![ROAD, ROAD, ROAD, CAR, ROAD, CAR], vec![0, 0, 0, 3, 0, 3]);
        let r = evaluate([(&gt, &pred)], &tax()).unwrap();
        let road = r.class(ROAD).unwrap();
        assert!((road.iou - 60.0).abs() < 1e-9);
        assert!((road.pq - 60.0).abs() < 1e-9);
        let car = r.class(CAR).unwrap();
        let want = (car.pq + road.iou) / 2.0;
        assert!((r.aggregate.pq_dagger - want).abs() < 1e-9);
        assert!(pq_identity_check(&r));
    }

    #[test]
    fn tampered_report_fails_identity() {
        let (gt, pred) = split_fixture();
        let mut r = evaluate([(&gt, &pred)], &tax()).unwrap();
        r.classes[0].pq += 1.0;
        assert!(!pq_identity_check(&r));
    }

    fn random_scan(rng: &mut ChaCha8Rng, n: usize) -> (PanopticLabels, PanopticLabels) {
        let classes = [0, CAR, TRUCK, ROAD, 10];
        let make = |rng: &mut ChaCha8Rng| {
            let sem: Vec<ClassId> = (0..n).map(|_| classes[rng.random_range(0..classes.len())]).collect();
            let inst = sem
                .iter()
                .map(|&s| if s == CAR || s == TRUCK { rng.random_range(1..4) } else { 0 })
                .collect();
            labels(sem, inst)
        };
        (make(rng), make(rng))
    }

    proptest! {
        #[test]
        fn identity_holds_on_random_scans(seed in any::<u64>(), n in 1usize..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (gt, pred) = random_scan(&mut rng, n);
            let r = evaluate([(&gt, &pred)], &tax()).unwrap();
            prop_assert!(pq_identity_check(&r));
            for c in &r.classes {
                prop_assert!((0.0..=100.0).contains(&c.pq));
            }
        }

        #[test]
        fn identity_holds_on_random_stats(
            counts in prop::collection::vec((0u64..50, 0u64..50, 0u64..50, 0.0f64..1.0), 1..19)
        ) {
            let t = tax();
            let mut stats = MatchStats::default();
            for (class, (tp, fp, fn_, frac)) in t.class_ids().zip(counts) {
                stats.classes.insert(class, ClassStats {
                    tp, fp, fn_,
                    // each matched IoU lies in (0.5, 1]
                    iou_sum: tp as f64 * (0.5 + 0.5 * frac).max(0.500001),
                    intersection: tp,
                    union: tp + fp + 1,
                });
            }
            prop_assert!(pq_identity_check(&report_from_stats(&stats, &t, 1)));
        }

        #[test]
        fn renaming_instances_changes_nothing(seed in any::<u64>(), shift in 1u32..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (gt, pred) = random_scan(&mut rng, 150);
            let renamed = PanopticLabels {
                semantic: pred.semantic.clone(),
                instance: pred.instance.iter().map(|&i| if i > 0 { i * 7 + shift } else { 0 }).collect(),
            };
            prop_assert_eq!(
                evaluate([(&gt, &pred)], &tax()).unwrap(),
                evaluate([(&gt, &renamed)], &tax()).unwrap()
            );
        }

        #[test]
        fn swapping_roles_swaps_fp_and_fn(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 120;
            let things = |rng: &mut ChaCha8Rng| {
                let sem: Vec<ClassId> = (0..n).map(|_| if rng.random_bool(0.5) { CAR } else { TRUCK }).collect();
                let inst = (0..n).map(|_| rng.random_range(1..4)).collect();
                labels(sem, inst)
            };
            let (a, b) = (things(&mut rng), things(&mut rng));
            let ab = evaluate([(&a, &b)], &tax()).unwrap();
            let ba = evaluate([(&b, &a)], &tax()).unwrap();
            for (x, y) in ab.classes.iter().zip(&ba.classes) {
                prop_assert_eq!(x.class_id, y.class_id);
                prop_assert!((x.pq - y.pq).abs() < 1e-9);
                prop_assert_eq!((x.fp, x.fn_), (y.fn_, y.fp));
            }
        }
    }

    #[test]
    fn scan_order_and_streaming_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let scans: Vec<_> = (0..6).map(|_| random_scan(&mut rng, 200)).collect();
        let forward = evaluate(scans.iter().map(|(g, p)| (g, p)), &tax()).unwrap();
        let backward = evaluate(scans.iter().rev().map(|(g, p)| (g, p)), &tax()).unwrap();
        let parallel = evaluate_parallel(&scans, &tax(), &EvalOptions::default()).unwrap();
        assert_eq!(parallel, forward);
        for (a, b) in forward.classes.iter().zip(&backward.classes) {
            assert!((a.pq - b.pq).abs() < 1e-9 && a.tp == b.tp && a.fp == b.fp);
        }
        // concatenating scans with disjoint instance ids is the same as streaming
        // them, for things classes; stuff segments merge, so compare things only
        let mut cat_gt = PanopticLabels::default();
        let mut cat_pred = PanopticLabels::default();
        for (k, (g, p)) in scans.iter().enumerate() {
            let bump = |l: &PanopticLabels, out: &mut PanopticLabels| {
                out.semantic.extend(&l.semantic);
                out.instance
                    .extend(l.instance.iter().map(|&i| if i > 0 { i + 10 * k as u32 } else { 0 }));
            };
            bump(g, &mut cat_gt);
            bump(p, &mut cat_pred);
        }
        let cat = evaluate([(&cat_gt, &cat_pred)], &tax()).unwrap();
        for class in [CAR, TRUCK] {
            let (x, y) = (cat.class(class).unwrap(), forward.class(class).unwrap());
            assert_eq!((x.tp, x.fp, x.fn_), (y.tp, y.fp, y.fn_));
            assert!((x.pq - y.pq).abs() < 1e-9);
            assert!((x.iou - y.iou).abs() < 1e-9);
        }
    }

    #[test]
    fn table_and_json() {
        let (gt, pred) = split_fixture();
        let r = evaluate([(&gt, &pred)], &tax()).unwrap();
        let table = r.to_table();
        assert!(table.lines().next().unwrap().contains("PQ†"));
        assert!(table.contains("car"));
        assert!(table.contains("   40.0"));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"fn\":0"));
        assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), r);
    }
}
