//! Command workflows: synth, segment, eval, bench, sweep.
//!
//! Each `cmd_*` function does the work and returns a [`RunManifest`]; the
//! binary parses flags, prints results and writes the manifest. Outputs are
//! deterministic given inputs and seeds, manifests differ only in timings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{CdmParams, MeanShiftParams};
use crate::domain::{ClassTaxonomy, PanopticLabels, PointCloud, PredictionSet};
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::{evaluate_parallel, pq_identity_check, EvalOptions, EvalReport};
use crate::pipeline::{postprocess_with, Clusterer, PipelineParams, StageTimings};
use crate::synth::{generate_corpus, write_scan, OracleNoise, SceneConfig, SynthScan};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub parameters: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    /// relative to the output directory where there is one
    pub outputs: Vec<PathBuf>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    fn new(command: &str, parameters: impl Serialize) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            seed: None,
            parameters: serde_json::to_value(parameters)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
        })
    }

    fn time(&mut self, stage: &str, since: Instant) {
        self.timings_ms
            .insert(stage.to_string(), since.elapsed().as_secs_f64() * 1e3);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::from(e).in_file(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(path))
}

pub fn load_taxonomy(path: Option<&Path>) -> Result<ClassTaxonomy> {
    match path {
        Some(p) => read_json(p),
        None => Ok(ClassTaxonomy::semantic_kitti()),
    }
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))?;
    Ok(pool.install(f))
}

/// Keeps the first error in input order, so failures are reported deterministically.
fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub scene: SceneConfig,
    pub noise: OracleNoise,
}

/// Writes `count` scans with labels and oracle predictions under `out_dir`.
pub fn cmd_synth(
    config: &SynthConfig,
    out_dir: &Path,
    count: usize,
    taxonomy: &ClassTaxonomy,
) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("synth", config)?;
    manifest.seed = Some(config.scene.seed);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::from(e).in_file(out_dir))?;

    let t = Instant::now();
    let corpus = generate_corpus(&config.scene, &config.noise, taxonomy, count)?;
    manifest.time("generate", t);
    let t = Instant::now();
    for scan in &corpus {
        for path in write_scan(out_dir, scan)? {
            let rel = path.strip_prefix(out_dir).unwrap_or(&path).to_path_buf();
            manifest.outputs.push(rel);
        }
    }
    manifest.time("write", t);
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

struct LoadedScan {
    stem: String,
    cloud: PointCloud,
    predictions: PredictionSet,
}

fn load_scan(scan_dir: &Path, pred_dir: &Path, stem: &str) -> Result<LoadedScan> {
    let bin = io::with_ext(scan_dir, stem, "bin");
    let cloud = io::read_points(&bin).map_err(|e| e.in_file(&bin))?;
    let label = io::with_ext(pred_dir, stem, "label");
    let predictions = io::read_predictions(pred_dir, stem).map_err(|e| e.in_file(&label))?;
    Error::check_len("predictions", cloud.len(), predictions.len()).map_err(|e| e.in_file(&label))?;
    Ok(LoadedScan {
        stem: stem.to_string(),
        cloud,
        predictions,
    })
}

fn load_scans(scan_dir: &Path, pred_dir: &Path) -> Result<Vec<LoadedScan>> {
    let stems = io::list_stems(scan_dir, "bin")?;
    first_error(
        stems
            .par_iter()
            .map(|stem| load_scan(scan_dir, pred_dir, stem))
            .collect(),
    )
}

/// Post-processes every `scan_dir/<stem>.bin` with `pred_dir/<stem>.{label,off,conf}`
/// and writes `out_dir/<stem>.label`.
pub fn cmd_segment(
    scan_dir: &Path,
    pred_dir: &Path,
    out_dir: &Path,
    params: &PipelineParams,
    taxonomy: &ClassTaxonomy,
    workers: usize,
) -> Result<RunManifest> {
    params.check()?;
    let mut manifest = RunManifest::new("segment", params)?;
    manifest.inputs = vec![scan_dir.to_path_buf(), pred_dir.to_path_buf()];
    std::fs::create_dir_all(out_dir).map_err(|e| Error::from(e).in_file(out_dir))?;

    let t = Instant::now();
    let results = with_workers(workers, || {
        let scans = load_scans(scan_dir, pred_dir)?;
        first_error(
            scans
                .par_iter()
                .map(|s| {
                    let (labels, timings) =
                        postprocess_with(&s.cloud, &s.predictions, taxonomy, params, Clusterer::CdmGrid)
                            .map_err(|e| e.in_file(io::with_ext(pred_dir, &s.stem, "label")))?;
                    let path = io::with_ext(out_dir, &s.stem, "label");
                    io::write_labels(&path, &labels).map_err(|e| e.in_file(&path))?;
                    Ok((s.stem.clone(), timings))
                })
                .collect(),
        )
    })??;

    let mut stages = StageTimings::default();
    for (stem, timings) in &results {
        stages.accumulate(timings);
        manifest.outputs.push(PathBuf::from(format!("{stem}.label")));
    }
    manifest.timings_ms = stages.as_millis_map();
    manifest.time("total", t);
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

fn load_label_pairs(gt_dir: &Path, pred_dir: &Path) -> Result<Vec<(PanopticLabels, PanopticLabels)>> {
    let gt = io::list_stems(gt_dir, "label")?;
    let pred = io::list_stems(pred_dir, "label")?;
    let missing = |stems: &[String], other: &[String], dir: &Path| {
        stems
            .iter()
            .find(|s| other.binary_search(s).is_err())
            .map(|s| {
                let path = io::with_ext(dir, s, "label");
                Error::from(std::io::Error::new(std::io::ErrorKind::NotFound, "missing counterpart"))
                    .in_file(path)
            })
    };
    if let Some(e) = missing(&gt, &pred, pred_dir).or_else(|| missing(&pred, &gt, gt_dir)) {
        return Err(e);
    }
    first_error(
        gt.par_iter()
            .map(|stem| {
                let g = io::with_ext(gt_dir, stem, "label");
                let p = io::with_ext(pred_dir, stem, "label");
                let gl = io::read_labels(&g).map_err(|e| e.in_file(&g))?;
                let pl = io::read_labels(&p).map_err(|e| e.in_file(&p))?;
                Error::check_len("predicted labels", gl.len(), pl.len()).map_err(|e| e.in_file(&p))?;
                Ok((gl, pl))
            })
            .collect(),
    )
}

pub fn cmd_eval(
    gt_dir: &Path,
    pred_dir: &Path,
    taxonomy: &ClassTaxonomy,
    options: &EvalOptions,
    workers: usize,
) -> Result<(EvalReport, RunManifest)> {
    let mut manifest = RunManifest::new("eval", options)?;
    manifest.inputs = vec![gt_dir.to_path_buf(), pred_dir.to_path_buf()];
    let t = Instant::now();
    let report = with_workers(workers, || {
        let pairs = load_label_pairs(gt_dir, pred_dir)?;
        evaluate_parallel(&pairs, taxonomy, options)
    })??;
    debug_assert!(pq_identity_check(&report));
    manifest.time("total", t);
    Ok((report, manifest))
}

/// Per-class CSV of an evaluation report.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("class_id,name,kind,pq,sq,rq,iou,tp,fp,fn\n");
    for c in &report.classes {
        let kind = match c.kind {
            crate::domain::ClassKind::Stuff => "stuff",
            crate::domain::ClassKind::Things => "things",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.class_id, c.name, kind, c.pq, c.sq, c.rq, c.iou, c.tp, c.fp, c.fn_
        );
    }
    out
}

pub const METHODS: [&str; 4] = ["cdm_grid", "cdm_bruteforce", "dbscan", "meanshift"];

/// Baselines take their radius from the CDM distance `d`.
pub fn parse_method(name: &str, d: f64) -> Result<Clusterer> {
    Ok(match name {
        "cdm_grid" => Clusterer::CdmGrid,
        "cdm_bruteforce" => Clusterer::CdmBruteforce,
        "dbscan" => Clusterer::Dbscan { eps: d, min_pts: 3 },
        "meanshift" => Clusterer::Meanshift(MeanShiftParams {
            bandwidth: d,
            ..Default::default()
        }),
        _ => {
            return Err(Error::UnknownName {
                what: "method",
                name: name.to_string(),
            })
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodBench {
    pub method: String,
    /// post-process wall-clock per scan
    pub median_ms: f64,
    pub p95_ms: f64,
    pub samples: usize,
    pub pq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scans: usize,
    pub repeats: usize,
    pub methods: Vec<MethodBench>,
}

impl BenchReport {
    pub fn method(&self, name: &str) -> Option<&MethodBench> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<16}{:>12}{:>12}{:>9}\n", "method", "median_ms", "p95_ms", "PQ");
        for m in &self.methods {
            let pq = m.pq.map_or("-".to_string(), |v| format!("{v:.1}"));
            let _ = writeln!(out, "{:<16}{:>12.3}{:>12.3}{:>9}", m.method, m.median_ms, m.p95_ms, pq);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,median_ms,p95_ms,samples,pq\n");
        for m in &self.methods {
            let pq = m.pq.map_or(String::new(), |v| v.to_string());
            let _ = writeln!(out, "{},{},{},{},{}", m.method, m.median_ms, m.p95_ms, m.samples, pq);
        }
        out
    }
}

pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Nearest-rank percentile of sorted samples.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Times each method's post-process on every scan, sequentially on the
/// calling thread. PQ is reported when `gt_dir` holds matching labels.
pub fn cmd_bench(
    scan_dir: &Path,
    pred_dir: &Path,
    gt_dir: Option<&Path>,
    methods: &[String],
    repeats: usize,
    params: &PipelineParams,
    taxonomy: &ClassTaxonomy,
) -> Result<(BenchReport, RunManifest)> {
    if repeats == 0 {
        return Err(Error::param("repeats", "must be at least 1"));
    }
    let clusterers: Vec<Clusterer> = methods
        .iter()
        .map(|m| parse_method(m, params.cdm.distance()))
        .collect::<Result<_>>()?;
    let mut manifest = RunManifest::new(
        "bench",
        serde_json::json!({ "methods": methods, "repeats": repeats, "pipeline": params }),
    )?;
    manifest.inputs = [Some(scan_dir), Some(pred_dir), gt_dir]
        .into_iter()
        .flatten()
        .map(Path::to_path_buf)
        .collect();

    let scans = with_workers(1, || load_scans(scan_dir, pred_dir))??;
    let gts: Option<Vec<PanopticLabels>> = gt_dir
        .map(|dir| {
            scans
                .iter()
                .map(|s| {
                    let p = io::with_ext(dir, &s.stem, "label");
                    io::read_labels(&p).map_err(|e| e.in_file(&p))
                })
                .collect::<Result<_>>()
        })
        .transpose()?;

    let mut results = Vec::new();
    for (clusterer, name) in clusterers.into_iter().zip(methods) {
        let mut samples = Vec::with_capacity(scans.len() * repeats);
        let mut outputs = Vec::with_capacity(scans.len());
        for s in &scans {
            for rep in 0..repeats {
                let t = Instant::now();
                let (labels, _) = postprocess_with(&s.cloud, &s.predictions, taxonomy, params, clusterer)
                    .map_err(|e| e.in_file(io::with_ext(pred_dir, &s.stem, "label")))?;
                samples.push(t.elapsed().as_secs_f64() * 1e3);
                if rep == 0 {
                    outputs.push(labels);
                }
            }
        }
        samples.sort_by(f64::total_cmp);
        let pq = match &gts {
            Some(gts) if !gts.is_empty() => {
                let pairs: Vec<_> = gts.iter().cloned().zip(outputs).collect();
                Some(evaluate_parallel(&pairs, taxonomy, &EvalOptions::default())?.aggregate.pq)
            }
            _ => None,
        };
        manifest
            .timings_ms
            .insert(format!("{name}_median"), median(&samples));
        results.push(MethodBench {
            method: name.clone(),
            median_ms: median(&samples),
            p95_ms: percentile(&samples, 95.0),
            samples: samples.len(),
            pq,
        });
    }
    let report = BenchReport {
        scans: scans.len(),
        repeats,
        methods: results,
    };
    Ok((report, manifest))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    D,
    Delta,
    Sigma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub scene: SceneConfig,
    pub noise: OracleNoise,
    pub count: usize,
    pub pipeline: PipelineParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            noise: OracleNoise::default(),
            count: 10,
            pipeline: PipelineParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn pq_curve(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.value, r.report.aggregate.pq)).collect()
    }

    /// One row per value: overall PQ, things/stuff PQ, then per-class PQ.
    pub fn to_csv(&self, taxonomy: &ClassTaxonomy) -> String {
        let classes: Vec<_> = taxonomy
            .entries()
            .iter()
            .filter(|e| self.rows.iter().any(|r| r.report.class(e.id).is_some()))
            .collect();
        let param = match self.param {
            SweepParam::D => "d",
            SweepParam::Delta => "delta",
            SweepParam::Sigma => "sigma",
        };
        let mut out = format!("{param},pq,pq_th,pq_st");
        for c in &classes {
            let _ = write!(out, ",{}", c.name);
        }
        out.push('\n');
        for r in &self.rows {
            let a = &r.report.aggregate;
            let _ = write!(out, "{},{:.4},{:.4},{:.4}", r.value, a.pq, a.pq_th, a.pq_st);
            for c in &classes {
                match r.report.class(c.id) {
                    Some(cr) => {
                        let _ = write!(out, ",{:.4}", cr.pq);
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn segment_and_eval(
    corpus: &[SynthScan],
    params: &PipelineParams,
    taxonomy: &ClassTaxonomy,
) -> Result<EvalReport> {
    let pairs: Vec<(PanopticLabels, PanopticLabels)> = first_error(
        corpus
            .par_iter()
            .map(|s| {
                let (pred, _) = postprocess_with(
                    &s.scene.cloud,
                    &s.predictions,
                    taxonomy,
                    params,
                    Clusterer::CdmGrid,
                )?;
                Ok((s.scene.labels.clone(), pred))
            })
            .collect(),
    )?;
    evaluate_parallel(&pairs, taxonomy, &EvalOptions::default())
}

/// Generates a synthetic corpus and runs segment + eval once per value.
/// Sweeping `delta` turns on the confidence-gated shift, without which the
/// gate is never consulted.
pub fn cmd_sweep(
    param: SweepParam,
    values: &[f64],
    base: &SweepConfig,
    taxonomy: &ClassTaxonomy,
    workers: usize,
) -> Result<(SweepResult, RunManifest)> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no sweep values"));
    }
    let mut manifest = RunManifest::new(
        "sweep",
        serde_json::json!({ "param": param, "values": values, "base": base }),
    )?;
    manifest.seed = Some(base.scene.seed);

    let (rows, timings) = with_workers(workers, || -> Result<(Vec<SweepRow>, Vec<(f64, f64)>)> {
        let shared = match param {
            SweepParam::Sigma => None,
            _ => Some(generate_corpus(&base.scene, &base.noise, taxonomy, base.count)?),
        };
        let mut rows = Vec::with_capacity(values.len());
        let mut timings = Vec::with_capacity(values.len());
        for &value in values {
            let t = Instant::now();
            let mut params = base.pipeline;
            let regenerated;
            let corpus = match param {
                SweepParam::D => {
                    params.cdm = CdmParams::new(value)?;
                    shared.as_deref().expect("generated")
                }
                SweepParam::Delta => {
                    params.delta = value;
                    params.gate_shift = true;
                    params.check()?;
                    shared.as_deref().expect("generated")
                }
                SweepParam::Sigma => {
                    let noise = OracleNoise {
                        confidence_sigma: value,
                        ..base.noise
                    };
                    regenerated = generate_corpus(&base.scene, &noise, taxonomy, base.count)?;
                    &regenerated[..]
                }
            };
            rows.push(SweepRow {
                value,
                report: segment_and_eval(corpus, &params, taxonomy)?,
            });
            timings.push((value, t.elapsed().as_secs_f64() * 1e3));
        }
        Ok((rows, timings))
    })??;
    for (value, ms) in timings {
        manifest.timings_ms.insert(format!("{param:?}={value}").to_lowercase(), ms);
    }
    Ok((SweepResult { param, rows }, manifest))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Table,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "centerseg", version, about = "Center-offset LiDAR panoptic post-processing and evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Overrides the scene seed of synth and sweep configs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// CDM distance threshold.
    #[arg(long, global = true)]
    pub d: Option<f64>,
    /// Confidence gate for the shift step.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Confidence target sigma used by the oracle.
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Class taxonomy JSON; defaults to the SemanticKITTI classes.
    #[arg(long, global = true)]
    pub taxonomy: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Where to write the run manifest, when the command has no output directory.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic scans, labels and oracle predictions.
    Synth {
        /// JSON with optional `scene` and `noise` sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Run the panoptic post-process over a directory of scans.
    Segment {
        #[arg(long)]
        scans: PathBuf,
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pipeline parameters JSON (`d`, `delta`, `majority_vote`, `gate_shift`).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Compute PQ/SQ/RQ/mIoU between two label directories.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        min_points: usize,
    },
    /// Time clustering methods on the post-process.
    Bench {
        #[arg(long)]
        scans: PathBuf,
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "cdm_grid,meanshift")]
        methods: Vec<String>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segment + evaluate a synthetic corpus across parameter values.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// JSON with optional `scene`, `noise`, `count` and `pipeline` sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl GlobalArgs {
    fn pipeline(&self, path: Option<&Path>) -> Result<PipelineParams> {
        let mut p: PipelineParams = match path {
            Some(p) => read_json(p)?,
            None => PipelineParams::default(),
        };
        self.apply(&mut p)?;
        Ok(p)
    }

    fn apply(&self, p: &mut PipelineParams) -> Result<()> {
        if let Some(d) = self.d {
            p.cdm = CdmParams::new(d)?;
        }
        if let Some(delta) = self.delta {
            p.delta = delta;
        }
        p.check()
    }
}

fn emit_manifest(global: &GlobalArgs, fallback: Option<PathBuf>, manifest: &RunManifest) -> Result<()> {
    match global.manifest.clone().or(fallback) {
        Some(path) => manifest.write(&path),
        None => {
            eprintln!("{}", serde_json::to_string(manifest)?);
            Ok(())
        }
    }
}

fn sibling_manifest(path: &Path) -> PathBuf {
    path.with_extension("manifest.json")
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::from(e).in_file(path)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let taxonomy = load_taxonomy(g.taxonomy.as_deref())?;
    match &cli.command {
        Command::Synth { config, out, count } => {
            let mut cfg: SynthConfig = match config {
                Some(p) => read_json(p)?,
                None => SynthConfig::default(),
            };
            if let Some(seed) = g.seed {
                cfg.scene.seed = seed;
            }
            if let Some(sigma) = g.sigma {
                cfg.noise.confidence_sigma = sigma;
            }
            let m = cmd_synth(&cfg, out, *count, &taxonomy)?;
            if let Some(path) = &g.manifest {
                m.write(path)?;
            }
            eprintln!("wrote {} scans to {}", count, out.display());
        }
        Command::Segment { scans, preds, out, params } => {
            let params = g.pipeline(params.as_deref())?;
            let m = cmd_segment(scans, preds, out, &params, &taxonomy, g.workers)?;
            if let Some(path) = &g.manifest {
                m.write(path)?;
            }
            eprintln!("segmented {} scans into {}", m.outputs.len(), out.display());
        }
        Command::Eval { gt, pred, report, min_points } => {
            let options = EvalOptions { min_points: *min_points };
            let (r, m) = cmd_eval(gt, pred, &taxonomy, &options, g.workers)?;
            if let Some(path) = report {
                write_json(path, &r)?;
            }
            let text = match g.format.unwrap_or(OutputFormat::Table) {
                OutputFormat::Table => r.to_table(),
                OutputFormat::Json => serde_json::to_string_pretty(&r)? + "\n",
                OutputFormat::Csv => report_csv(&r),
            };
            emit(&text, None)?;
            emit_manifest(g, report.as_deref().map(sibling_manifest), &m)?;
        }
        Command::Bench { scans, preds, gt, methods, repeats, params, out } => {
            let params = g.pipeline(params.as_deref())?;
            let (r, m) = cmd_bench(scans, preds, gt.as_deref(), methods, *repeats, &params, &taxonomy)?;
            let text = match g.format.unwrap_or(OutputFormat::Table) {
                OutputFormat::Table => r.to_table(),
                OutputFormat::Json => serde_json::to_string_pretty(&r)? + "\n",
                OutputFormat::Csv => r.to_csv(),
            };
            emit(&text, out.as_deref())?;
            emit_manifest(g, out.as_deref().map(sibling_manifest), &m)?;
        }
        Command::Sweep { param, values, config, out } => {
            let mut base: SweepConfig = match config {
                Some(p) => read_json(p)?,
                None => SweepConfig::default(),
            };
            if let Some(seed) = g.seed {
                base.scene.seed = seed;
            }
            if let Some(sigma) = g.sigma {
                base.noise.confidence_sigma = sigma;
            }
            g.apply(&mut base.pipeline)?;
            let (r, m) = cmd_sweep(*param, values, &base, &taxonomy, g.workers)?;
            let text = match g.format.unwrap_or(OutputFormat::Csv) {
                OutputFormat::Json => serde_json::to_string_pretty(&r)? + "\n",
                OutputFormat::Csv | OutputFormat::Table => r.to_csv(&taxonomy),
            };
            emit(&text, out.as_deref())?;
            emit_manifest(g, out.as_deref().map(sibling_manifest), &m)?;
        }
    }
    Ok(())
}
