//! Evaluation metrics: per-primitive F1, Chamfer statistics and invalidity ratio.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judge::{CjmConfig, JudgeError, Reference};
use crate::par::Exec;
use crate::seq::{parse_sequence, CadSequence, Curve, Diagnostic};

/// Default per-parameter tolerance, in quantization levels, for a primitive match.
pub const DEFAULT_TOL_LEVELS: u8 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no samples to aggregate")]
    Empty,
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error("csv output failed: {0}")]
    Csv(String),
}

/// F1 per primitive type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveF1 {
    pub line: f64,
    pub arc: f64,
    pub circle: f64,
    pub extrusion: f64,
}

/// A comparable element: integer parameters plus a discrete tag that must match exactly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Element {
    tag: u8,
    params: Vec<i32>,
}

struct Elements {
    line: Vec<Element>,
    arc: Vec<Element>,
    circle: Vec<Element>,
    extrusion: Vec<Element>,
}

fn elements(seq: &CadSequence) -> Elements {
    let mut e = Elements {
        line: Vec::new(),
        arc: Vec::new(),
        circle: Vec::new(),
        extrusion: Vec::new(),
    };
    let lv = |q: crate::seq::QuantLevel| i32::from(q.get());
    for c in seq.curves() {
        let [sx, sy] = c.from.map(lv);
        match *c.curve {
            Curve::Line { end } => e.line.push(Element {
                tag: 0,
                params: vec![sx, sy, lv(end[0]), lv(end[1])],
            }),
            Curve::Arc { end, sweep, ccw } => e.arc.push(Element {
                tag: u8::from(ccw),
                params: vec![sx, sy, lv(end[0]), lv(end[1]), lv(sweep)],
            }),
            Curve::Circle { center, radius } => e.circle.push(Element {
                tag: 0,
                params: vec![lv(center[0]), lv(center[1]), lv(radius)],
            }),
        }
    }
    for x in &seq.extrudes {
        let mut params: Vec<i32> = x
            .plane
            .origin
            .iter()
            .chain(x.plane.orientation.iter())
            .map(|&q| lv(q))
            .collect();
        params.extend([lv(x.extent_pos), lv(x.extent_neg), lv(x.sketch_scale)]);
        e.extrusion.push(Element {
            tag: x.boolean as u8,
            params,
        });
    }
    e
}

fn max_diff(a: &Element, b: &Element) -> i32 {
    a.params
        .iter()
        .zip(&b.params)
        .map(|(x, y)| (x - y).abs())
        .max()
        .unwrap_or(0)
}

/// Greedy one-to-one matching: admissible pairs (same tag, every parameter
/// within `tol` levels) are taken in ascending order of their largest
/// parameter difference, ties broken by the parameters themselves.
fn greedy_matches(pred: &[Element], gt: &[Element], tol: u8) -> usize {
    let mut pairs: Vec<(i32, usize, usize)> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            let d = max_diff(p, g);
            if p.tag == g.tag && d <= i32::from(tol) {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| pred[a.1].cmp(&pred[b.1]))
            .then_with(|| gt[a.2].cmp(&gt[b.2]))
    });
    let mut used_p = vec![false; pred.len()];
    let mut used_g = vec![false; gt.len()];
    let mut tp = 0;
    for (_, i, j) in pairs {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            tp += 1;
        }
    }
    tp
}

/// `2TP / (2TP + FP + FN)`, or 1 when both sides are empty.
pub fn f1_from_counts(tp: usize, n_pred: usize, n_gt: usize) -> f64 {
    if n_pred == 0 && n_gt == 0 {
        return 1.0;
    }
    2.0 * tp as f64 / (n_pred + n_gt) as f64
}

fn f1_of(pred: &[Element], gt: &[Element], tol: u8) -> f64 {
    f1_from_counts(greedy_matches(pred, gt, tol), pred.len(), gt.len())
}

/// Per-type F1 between the primitives of `pred` and `gt`.
pub fn f1_primitives(pred: &CadSequence, gt: &CadSequence, tol_levels: u8) -> PrimitiveF1 {
    let (p, g) = (elements(pred), elements(gt));
    PrimitiveF1 {
        line: f1_of(&p.line, &g.line, tol_levels),
        arc: f1_of(&p.arc, &g.arc, tol_levels),
        circle: f1_of(&p.circle, &g.circle, tol_levels),
        extrusion: f1_of(&p.extrusion, &g.extrusion, tol_levels),
    }
}

/// Percentage of invalid samples.
pub fn invalidity_ratio(results: &[SampleEval]) -> Result<f64, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(100.0 * results.iter().filter(|r| !r.valid).count() as f64 / results.len() as f64)
}

/// `(median, mean)` of raw Chamfer values, both multiplied by 1000.
pub fn cd_stats(values: &[f64]) -> Result<(f64, f64), MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    let mean = v.iter().sum::<f64>() / n as f64;
    Ok((median * 1e3, mean * 1e3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEval {
    pub valid: bool,
    pub f1_line: Option<f64>,
    pub f1_arc: Option<f64>,
    pub f1_circle: Option<f64>,
    pub f1_extrusion: Option<f64>,
    /// Raw Chamfer distance; absent for invalid samples.
    pub chamfer: Option<f64>,
    pub diagnostics: Vec<String>,
}

/// Means over valid samples; absent when no sample is valid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Means {
    pub line: Option<f64>,
    pub arc: Option<f64>,
    pub circle: Option<f64>,
    pub extrusion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub f1: F1Means,
    /// Chamfer median over valid samples, multiplied by 1000.
    pub cd_median: Option<f64>,
    /// Chamfer mean over valid samples, multiplied by 1000.
    pub cd_mean: Option<f64>,
    pub ir_percent: f64,
    pub per_sample: Vec<SampleEval>,
}

impl EvalReport {
    /// Aggregates per-sample rows.
    pub fn from_samples(per_sample: Vec<SampleEval>) -> Result<Self, MetricsError> {
        let ir_percent = invalidity_ratio(&per_sample)?;
        let valid: Vec<&SampleEval> = per_sample.iter().filter(|s| s.valid).collect();
        let mean = |f: fn(&SampleEval) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = valid.iter().filter_map(|s| f(s)).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let f1 = F1Means {
            line: mean(|s| s.f1_line),
            arc: mean(|s| s.f1_arc),
            circle: mean(|s| s.f1_circle),
            extrusion: mean(|s| s.f1_extrusion),
        };
        let cds: Vec<f64> = valid.iter().filter_map(|s| s.chamfer).collect();
        let (cd_median, cd_mean) = match cd_stats(&cds) {
            Ok((m, a)) => (Some(m), Some(a)),
            Err(_) => (None, None),
        };
        Ok(EvalReport {
            n_samples: per_sample.len(),
            f1,
            cd_median,
            cd_mean,
            ir_percent,
            per_sample,
        })
    }

    /// One row per sample.
    pub fn to_csv(&self) -> Result<String, MetricsError> {
        let err = |e: csv::Error| MetricsError::Csv(e.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "index",
            "valid",
            "f1_line",
            "f1_arc",
            "f1_circle",
            "f1_extrusion",
            "cd",
            "diagnostics",
        ])
        .map_err(err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (i, s) in self.per_sample.iter().enumerate() {
            w.write_record([
                i.to_string(),
                s.valid.to_string(),
                opt(s.f1_line),
                opt(s.f1_arc),
                opt(s.f1_circle),
                opt(s.f1_extrusion),
                opt(s.chamfer),
                s.diagnostics.join("; "),
            ])
            .map_err(err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| MetricsError::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| MetricsError::Csv(e.to_string()))
    }
}

/// A predicted sequence text paired with its ground-truth text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub pred: String,
    pub gt: String,
}

/// Evaluates one pair; errors only when the ground truth is unusable.
pub fn evaluate_pair(
    pair: &EvalPair,
    cfg: &CjmConfig,
    tol_levels: u8,
    exec: Exec,
) -> Result<SampleEval, JudgeError> {
    let reference = Reference::from_text(&pair.gt, cfg, exec)?;
    let verdict = reference.judge_text(&pair.pred, cfg, exec);
    let summaries = |d: &[Diagnostic]| d.iter().map(Diagnostic::summary).collect::<Vec<_>>();
    if !verdict.compiled {
        return Ok(SampleEval {
            valid: false,
            f1_line: None,
            f1_arc: None,
            f1_circle: None,
            f1_extrusion: None,
            chamfer: None,
            diagnostics: summaries(&verdict.diagnostics),
        });
    }
    let (pred, gt) = match (parse_sequence(&pair.pred), parse_sequence(&pair.gt)) {
        (Ok(p), Ok(g)) => (p, g),
        _ => unreachable!("both sides compiled"),
    };
    let f1 = f1_primitives(&pred, &gt, tol_levels);
    Ok(SampleEval {
        valid: true,
        f1_line: Some(f1.line),
        f1_arc: Some(f1.arc),
        f1_circle: Some(f1.circle),
        f1_extrusion: Some(f1.extrusion),
        chamfer: verdict.chamfer,
        diagnostics: Vec::new(),
    })
}

pub fn evaluate_corpus(
    pairs: &[EvalPair],
    cfg: &CjmConfig,
    tol_levels: u8,
) -> Result<EvalReport, MetricsError> {
    evaluate_corpus_with(pairs, cfg, tol_levels, Exec::auto())
}

/// Evaluates every pair (in parallel when `exec` allows) and aggregates in input order.
pub fn evaluate_corpus_with(
    pairs: &[EvalPair],
    cfg: &CjmConfig,
    tol_levels: u8,
    exec: Exec,
) -> Result<EvalReport, MetricsError> {
    cfg.validate()?;
    let rows = exec.map_range(pairs.len(), |i| {
        evaluate_pair(&pairs[i], cfg, tol_levels, Exec::Sequential).map_err(|e| match e {
            JudgeError::GroundTruthInvalid { detail, .. } => {
                JudgeError::GroundTruthInvalid { item: i, detail }
            }
            other => other,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    EvalReport::from_samples(rows)
}
