//! Compile-and-compare judge and preference dataset builders.
//!
//! A prediction is *desirable* when it compiles and its normalized point
//! cloud lies within `cd_threshold` Chamfer distance of the ground truth's.

mod chamfer;

pub use chamfer::{chamfer_points, directed_mean_sq, KdTree};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{compile_sequence_with, sample_point_cloud_with, KernelConfig, PointCloud};
use crate::par::Exec;
use crate::seq::{parse_with_layout, validate_with_layout, CadSequence, Diagnostic, Layout};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JudgeError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("ground truth of item {item} does not compile: {detail}")]
    GroundTruthInvalid { item: usize, detail: String },
    #[error("invalid judge configuration: {0}")]
    InvalidConfig(String),
    #[error("group {0} needs at least two candidates")]
    TooFewCandidates(usize),
}

/// Symmetric Chamfer distance: mean nearest squared distance from `a` to `b`
/// plus the same from `b` to `a`.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64, JudgeError> {
    chamfer_distance_with(a, b, Exec::auto())
}

pub fn chamfer_distance_with(
    a: &PointCloud,
    b: &PointCloud,
    exec: Exec,
) -> Result<f64, JudgeError> {
    if a.points.is_empty() || b.points.is_empty() {
        return Err(JudgeError::EmptyCloud);
    }
    Ok(chamfer_points(&a.points, &b.points, exec))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CjmConfig {
    /// Chamfer distance (normalized units) below which a prediction is desirable.
    pub cd_threshold: f64,
    /// Probability of keeping a desirable sample in the binary dataset.
    pub alpha: f64,
    pub n_points: usize,
    pub seed: u64,
    pub kernel: KernelConfig,
}

impl Default for CjmConfig {
    fn default() -> Self {
        CjmConfig {
            cd_threshold: 0.05,
            alpha: 1.0,
            n_points: 2048,
            seed: 0,
            kernel: KernelConfig::default(),
        }
    }
}

impl CjmConfig {
    pub fn validate(&self) -> Result<(), JudgeError> {
        if !(self.cd_threshold > 0.0) {
            return Err(JudgeError::InvalidConfig(format!(
                "cd_threshold must be > 0, got {}",
                self.cd_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(JudgeError::InvalidConfig(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.n_points == 0 {
            return Err(JudgeError::InvalidConfig("n_points must be >= 1".into()));
        }
        if self.kernel.arc_segments < 8 {
            return Err(JudgeError::InvalidConfig(
                "arc_segments must be >= 8".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub compiled: bool,
    /// Absent when the prediction did not compile.
    pub chamfer: Option<f64>,
    pub desirable: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl JudgeVerdict {
    fn failed(diagnostics: Vec<Diagnostic>) -> Self {
        JudgeVerdict {
            compiled: false,
            chamfer: None,
            desirable: false,
            diagnostics,
        }
    }
}

/// A compiled ground truth ready to be compared against many predictions.
#[derive(Debug, Clone)]
pub struct Reference {
    cloud: PointCloud,
}

impl Reference {
    pub fn new(gt: &CadSequence, cfg: &CjmConfig, exec: Exec) -> Result<Self, JudgeError> {
        let layout = Layout::canonical(gt);
        match cloud_of(gt, &layout, cfg, exec) {
            Ok(cloud) => Ok(Reference { cloud }),
            Err(diags) => Err(JudgeError::GroundTruthInvalid {
                item: 0,
                detail: join_summaries(&diags),
            }),
        }
    }

    pub fn from_text(gt: &str, cfg: &CjmConfig, exec: Exec) -> Result<Self, JudgeError> {
        let invalid = |diags: &[Diagnostic]| JudgeError::GroundTruthInvalid {
            item: 0,
            detail: join_summaries(diags),
        };
        let (seq, layout) = parse_with_layout(gt).map_err(|d| invalid(&d))?;
        cloud_of(&seq, &layout, cfg, exec)
            .map(|cloud| Reference { cloud })
            .map_err(|d| invalid(&d))
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn judge(&self, pred: &CadSequence, cfg: &CjmConfig, exec: Exec) -> JudgeVerdict {
        self.judge_layout(pred, &Layout::canonical(pred), cfg, exec)
    }

    pub fn judge_text(&self, pred: &str, cfg: &CjmConfig, exec: Exec) -> JudgeVerdict {
        match parse_with_layout(pred) {
            Ok((seq, layout)) => self.judge_layout(&seq, &layout, cfg, exec),
            Err(diags) => JudgeVerdict::failed(diags),
        }
    }

    fn judge_layout(
        &self,
        pred: &CadSequence,
        layout: &Layout,
        cfg: &CjmConfig,
        exec: Exec,
    ) -> JudgeVerdict {
        match cloud_of(pred, layout, cfg, exec) {
            Err(diags) => JudgeVerdict::failed(diags),
            Ok(cloud) => {
                let cd = chamfer_points(&cloud.points, &self.cloud.points, exec);
                JudgeVerdict {
                    compiled: true,
                    chamfer: Some(cd),
                    desirable: cd < cfg.cd_threshold,
                    diagnostics: Vec::new(),
                }
            }
        }
    }
}

fn join_summaries(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.summary())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Normalized point cloud of a sequence, or every diagnostic explaining why it fails.
fn cloud_of(
    seq: &CadSequence,
    layout: &Layout,
    cfg: &CjmConfig,
    exec: Exec,
) -> Result<PointCloud, Vec<Diagnostic>> {
    let diags = validate_with_layout(seq, layout);
    if !diags.is_empty() {
        return Err(diags);
    }
    let model =
        compile_sequence_with(seq, &cfg.kernel, exec).map_err(|e| vec![e.to_diagnostic(layout)])?;
    let cloud = sample_point_cloud_with(&model, cfg.n_points, cfg.seed, exec);
    if cloud.is_empty() {
        return Err(vec![Diagnostic::new(
            crate::seq::DiagnosticCode::EmptyResult,
            layout.span_of(crate::seq::Location::Sequence),
            "compiled model has no boundary surface",
        )]);
    }
    Ok(cloud)
}

/// Judges `pred` against a trusted ground truth `gt`.
pub fn judge(
    pred: &CadSequence,
    gt: &CadSequence,
    cfg: &CjmConfig,
) -> Result<JudgeVerdict, JudgeError> {
    cfg.validate()?;
    let exec = Exec::auto();
    Ok(Reference::new(gt, cfg, exec)?.judge(pred, cfg, exec))
}

/// [`judge`] on sequence texts; parse failures of `pred` become diagnostics.
pub fn judge_text(pred: &str, gt: &str, cfg: &CjmConfig) -> Result<JudgeVerdict, JudgeError> {
    cfg.validate()?;
    let exec = Exec::auto();
    Ok(Reference::from_text(gt, cfg, exec)?.judge_text(pred, cfg, exec))
}

/// One training tuple `(prompt, sequence, label)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub prompt: String,
    pub sequence: String,
    pub label: bool,
    #[serde(rename = "cd")]
    pub chamfer: Option<f64>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRecord {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub cd_chosen: f64,
    pub cd_rejected: Option<f64>,
}

/// Prompt, predicted sequence text and ground-truth sequence text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeItem {
    pub prompt: String,
    pub pred: String,
    pub gt: String,
}

/// A judged prediction ready for dataset assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedSample {
    pub prompt: String,
    /// Canonical text when the prediction parses, the raw text otherwise.
    pub sequence: String,
    pub verdict: JudgeVerdict,
}

fn canonical_or_raw(text: &str) -> String {
    match crate::seq::parse_sequence(text) {
        Ok(seq) => seq.to_text(),
        Err(_) => text.to_string(),
    }
}

/// Judges every item, fanning out across items; results keep input order.
pub fn judge_items(
    items: &[JudgeItem],
    cfg: &CjmConfig,
    exec: Exec,
) -> Result<Vec<JudgedSample>, JudgeError> {
    cfg.validate()?;
    let results = exec.map_range(items.len(), |i| {
        let item = &items[i];
        let reference =
            Reference::from_text(&item.gt, cfg, Exec::Sequential).map_err(|e| match e {
                JudgeError::GroundTruthInvalid { detail, .. } => {
                    JudgeError::GroundTruthInvalid { item: i, detail }
                }
                other => other,
            })?;
        Ok(JudgedSample {
            prompt: item.prompt.clone(),
            sequence: canonical_or_raw(&item.pred),
            verdict: reference.judge_text(&item.pred, cfg, Exec::Sequential),
        })
    });
    results.into_iter().collect()
}

/// Turns judged samples into binary records. Desirable samples are kept with
/// probability `alpha` (one seeded draw per desirable sample, in order);
/// rejected samples always yield a false record carrying the prediction.
pub fn assemble_binary_records(
    samples: &[JudgedSample],
    alpha: f64,
    seed: u64,
) -> Vec<PreferenceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let keep = !s.verdict.desirable || rng.random::<f64>() < alpha;
        if keep {
            out.push(PreferenceRecord {
                prompt: s.prompt.clone(),
                sequence: s.sequence.clone(),
                label: s.verdict.desirable,
                chamfer: s.verdict.chamfer,
                diagnostics: s
                    .verdict
                    .diagnostics
                    .iter()
                    .map(Diagnostic::summary)
                    .collect(),
            });
        }
    }
    out
}

pub fn build_binary_dataset(
    items: &[JudgeItem],
    cfg: &CjmConfig,
) -> Result<Vec<PreferenceRecord>, JudgeError> {
    build_binary_dataset_with(items, cfg, Exec::auto())
}

pub fn build_binary_dataset_with(
    items: &[JudgeItem],
    cfg: &CjmConfig,
    exec: Exec,
) -> Result<Vec<PreferenceRecord>, JudgeError> {
    let judged = judge_items(items, cfg, exec)?;
    Ok(assemble_binary_records(&judged, cfg.alpha, cfg.seed))
}

/// Candidates generated for one prompt, with the prompt's ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairGroup {
    pub prompt: String,
    pub candidates: Vec<String>,
    pub gt: String,
}

/// Sort key: compiling candidates first, then ascending Chamfer distance.
fn rank_key(v: &JudgeVerdict) -> (bool, f64) {
    (!v.compiled, v.chamfer.unwrap_or(f64::INFINITY))
}

/// Indices of the best and worst candidates (stable on ties).
pub fn rank_candidates(verdicts: &[JudgeVerdict]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..verdicts.len()).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (rank_key(&verdicts[a]), rank_key(&verdicts[b]));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    Some((*order.first()?, *order.last()?))
}

pub fn build_paired_dataset(
    groups: &[PairGroup],
    cfg: &CjmConfig,
) -> Result<Vec<PairedRecord>, JudgeError> {
    build_paired_dataset_with(groups, cfg, Exec::auto())
}

/// One chosen/rejected pair per group; groups whose best candidate does not
/// compile are skipped.
pub fn build_paired_dataset_with(
    groups: &[PairGroup],
    cfg: &CjmConfig,
    exec: Exec,
) -> Result<Vec<PairedRecord>, JudgeError> {
    cfg.validate()?;
    if let Some(i) = groups.iter().position(|g| g.candidates.len() < 2) {
        return Err(JudgeError::TooFewCandidates(i));
    }
    let results = exec.map_range(
        groups.len(),
        |gi| -> Result<Option<PairedRecord>, JudgeError> {
            let g = &groups[gi];
            let reference =
                Reference::from_text(&g.gt, cfg, Exec::Sequential).map_err(|e| match e {
                    JudgeError::GroundTruthInvalid { detail, .. } => {
                        JudgeError::GroundTruthInvalid { item: gi, detail }
                    }
                    other => other,
                })?;
            let verdicts: Vec<JudgeVerdict> = g
                .candidates
                .iter()
                .map(|c| reference.judge_text(c, cfg, Exec::Sequential))
                .collect();
            let Some((best, worst)) = rank_candidates(&verdicts) else {
                return Ok(None);
            };
            let Some(cd_chosen) = verdicts[best].chamfer.filter(|_| verdicts[best].compiled) else {
                return Ok(None);
            };
            Ok(Some(PairedRecord {
                prompt: g.prompt.clone(),
                chosen: canonical_or_raw(&g.candidates[best]),
                rejected: canonical_or_raw(&g.candidates[worst]),
                cd_chosen,
                cd_rejected: verdicts[worst].chamfer,
            }))
        },
    );
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// One JSON object per line.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("records serialize"));
        s.push('\n');
    }
    s
}
