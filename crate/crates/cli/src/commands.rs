//! Command bodies. Each takes the resolved configuration and echoes it in its JSON output.

use std::path::Path;

use cadreward::geom::{compile_sequence_with, default_subdivision, sample_mesh, tessellate_with};
use cadreward::judge::{
    assemble_binary_records, build_paired_dataset_with, judge_items, to_jsonl, JudgeError,
    JudgeItem, PairGroup, Reference,
};
use cadreward::kto::{evaluate_batch, sft_loss, KtoExample};
use cadreward::metrics::{evaluate_corpus_with, EvalPair, MetricsError};
use cadreward::par::Exec;
use cadreward::review::run_loop_with;
use cadreward::seq::{import_deepcad_json, parse_with_layout, validate_with_layout};
use cadreward::{print_sequence, CompiledModel, Diagnostic};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::files::{pair_dirs, read_text, write_atomic};
use crate::CliError;

fn emit(value: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("JSON values serialize")
    );
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("output types serialize")
}

fn report_diagnostics(diags: &[Diagnostic]) {
    eprintln!("{}", json!({ "diagnostics": diags }));
}

/// Parse, validate and compile with every failure mapped to located diagnostics.
fn compile_text(text: &str, cfg: &RunConfig, exec: Exec) -> Result<CompiledModel, Vec<Diagnostic>> {
    let (seq, layout) = parse_with_layout(text)?;
    let diags = validate_with_layout(&seq, &layout);
    if !diags.is_empty() {
        return Err(diags);
    }
    compile_sequence_with(&seq, &cfg.kernel(), exec).map_err(|e| vec![e.to_diagnostic(&layout)])
}

fn judge_error(e: JudgeError) -> CliError {
    match e {
        JudgeError::GroundTruthInvalid { .. } => CliError::GroundTruth(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

pub fn compile(
    cfg: &RunConfig,
    seq_path: &Path,
    mesh_out: Option<&Path>,
    points_out: Option<&Path>,
    n: Option<usize>,
) -> Result<(), CliError> {
    let text = read_text(seq_path)?;
    let exec = Exec::auto();
    let model = compile_text(&text, cfg, exec).map_err(|d| {
        report_diagnostics(&d);
        CliError::CompileFailed
    })?;
    let mesh = tessellate_with(&model, default_subdivision(&model, cfg.max_edge), exec);
    if let Some(path) = mesh_out {
        write_atomic(path, mesh.to_obj().as_bytes())?;
        log::info!(
            "wrote {} triangles to {}",
            mesh.triangles.len(),
            path.display()
        );
    }
    let mut n_points = None;
    if let Some(path) = points_out {
        let n = n.unwrap_or(cfg.n_points);
        let cloud = sample_mesh(&model, &mesh, n, cfg.seed, exec);
        write_atomic(path, cloud.to_ply().as_bytes())?;
        log::info!("wrote {} points to {}", cloud.len(), path.display());
        n_points = Some(cloud.len());
    }
    emit(&json!({
        "config": cfg,
        "prisms": model.prisms.len(),
        "vertices": mesh.vertices.len(),
        "triangles": mesh.triangles.len(),
        "surface_area": mesh.area(),
        "points": n_points,
    }));
    Ok(())
}

pub fn judge(cfg: &RunConfig, pred_path: &Path, gt_path: &Path) -> Result<(), CliError> {
    let (pred, gt) = (read_text(pred_path)?, read_text(gt_path)?);
    let cjm = cfg.cjm();
    cjm.validate().map_err(judge_error)?;
    let exec = Exec::auto();
    let reference = Reference::from_text(&gt, &cjm, exec).map_err(judge_error)?;
    let verdict = reference.judge_text(&pred, &cjm, exec);
    emit(&json!({ "config": cfg, "verdict": verdict }));
    if !verdict.compiled {
        report_diagnostics(&verdict.diagnostics);
        return Err(CliError::CompileFailed);
    }
    if !verdict.desirable {
        return Err(CliError::Rejected);
    }
    Ok(())
}

pub fn dataset(
    cfg: &RunConfig,
    pred_dir: &Path,
    gt_dir: &Path,
    out: &Path,
    prompt_dir: Option<&Path>,
) -> Result<(), CliError> {
    let pairs = pair_dirs(pred_dir, gt_dir)?;
    let mut items = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let stem = Path::new(&p.name)
            .file_stem()
            .map_or(p.name.clone(), |s| s.to_string_lossy().into_owned());
        let prompt = match prompt_dir {
            Some(dir) => read_text(&dir.join(format!("{stem}.txt")))?
                .trim_end()
                .to_string(),
            None => stem,
        };
        items.push(JudgeItem {
            prompt,
            pred: read_text(&p.pred)?,
            gt: read_text(&p.gt)?,
        });
    }
    let cjm = cfg.cjm();
    cjm.validate().map_err(judge_error)?;
    let judged = judge_items(&items, &cjm, Exec::auto()).map_err(|e| match e {
        JudgeError::GroundTruthInvalid { item, detail } => {
            CliError::GroundTruth(format!("{}: {detail}", pairs[item].gt.display()))
        }
        other => judge_error(other),
    })?;
    let records = assemble_binary_records(&judged, cjm.alpha, cjm.seed);
    write_atomic(out, to_jsonl(&records).as_bytes())?;
    let n_true = records.iter().filter(|r| r.label).count();
    log::info!(
        "{} records ({} desirable) written to {}",
        records.len(),
        n_true,
        out.display()
    );
    emit(&json!({
        "config": cfg,
        "items": items.len(),
        "records": records.len(),
        "labels": { "true": n_true, "false": records.len() - n_true },
    }));
    Ok(())
}

/// Parses a JSONL file, collecting every bad row (1-based) instead of stopping at the first.
fn read_jsonl<T: DeserializeOwned>(
    path: &Path,
    check: impl Fn(&T, usize) -> Result<(), String>,
) -> Result<Vec<T>, CliError> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(line) {
            Ok(row) => match check(&row, rows.len()) {
                Ok(()) => rows.push(row),
                Err(e) => bad.push(format!("row {}: {e}", i + 1)),
            },
            Err(e) => bad.push(format!("row {}: {e}", i + 1)),
        }
    }
    if !bad.is_empty() {
        return Err(CliError::MalformedRows(bad));
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!("{}: no rows", path.display())));
    }
    Ok(rows)
}

pub fn pairs(cfg: &RunConfig, groups_path: &Path, out: &Path) -> Result<(), CliError> {
    let groups: Vec<PairGroup> = read_jsonl(groups_path, |_, _| Ok(()))?;
    let cjm = cfg.cjm();
    let records = build_paired_dataset_with(&groups, &cjm, Exec::auto()).map_err(judge_error)?;
    write_atomic(out, to_jsonl(&records).as_bytes())?;
    emit(&json!({ "config": cfg, "groups": groups.len(), "records": records.len() }));
    Ok(())
}

pub fn eval(
    cfg: &RunConfig,
    pred_dir: &Path,
    gt_dir: &Path,
    report_out: &Path,
    csv_out: &Path,
) -> Result<(), CliError> {
    let files = pair_dirs(pred_dir, gt_dir)?;
    let pairs = files
        .iter()
        .map(|p| {
            Ok(EvalPair {
                pred: read_text(&p.pred)?,
                gt: read_text(&p.gt)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = evaluate_corpus_with(&pairs, &cfg.cjm(), cfg.tol_levels, Exec::auto()).map_err(
        |e| match e {
            MetricsError::Judge(JudgeError::GroundTruthInvalid { item, detail }) => {
                CliError::GroundTruth(format!("{}: {detail}", files[item].gt.display()))
            }
            MetricsError::Judge(other) => judge_error(other),
            other => CliError::Usage(other.to_string()),
        },
    )?;
    let csv = report
        .to_csv()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut doc = json!({ "config": cfg });
    if let (Value::Object(d), Value::Object(r)) = (&mut doc, to_json(&report)) {
        d.extend(r);
    }
    let names: Vec<&str> = files.iter().map(|f| f.name.as_str()).collect();
    doc["files"] = json!(names);
    write_atomic(
        report_out,
        serde_json::to_string_pretty(&doc)
            .expect("report serializes")
            .as_bytes(),
    )?;
    write_atomic(csv_out, csv.as_bytes())?;
    log::info!(
        "IR {:.2}% over {} samples",
        report.ir_percent,
        report.n_samples
    );
    emit(&doc);
    Ok(())
}

pub fn review(
    cfg: &RunConfig,
    prompt_path: &Path,
    trace_out: Option<&Path>,
) -> Result<(), CliError> {
    let prompt = read_text(prompt_path)?;
    let prompt = prompt.trim_end();
    let binding = cfg.binding();
    let mut generator = binding
        .instantiate(prompt, cfg.seed)
        .map_err(|e| CliError::Generator(e.to_string()))?;
    let result = run_loop_with(
        prompt,
        generator.as_mut(),
        &cfg.loop_config(),
        &cfg.kernel(),
        Exec::auto(),
    );
    let (trace, error) = match result {
        Ok(trace) => (trace, None),
        Err(e) => (e.trace, Some(e.error)),
    };
    let doc = json!({
        "config": cfg,
        "generator": binding,
        "trace": trace,
        "error": error.as_ref().map(|e| e.to_string()),
    });
    if let Some(path) = trace_out {
        write_atomic(
            path,
            serde_json::to_string_pretty(&doc)
                .expect("trace serializes")
                .as_bytes(),
        )?;
    }
    emit(&doc);
    if let Some(e) = error {
        return Err(CliError::Generator(e.to_string()));
    }
    for (i, a) in trace.attempts.iter().enumerate() {
        let status = if a.report.valid { "valid" } else { "rejected" };
        log::info!("attempt {}: {status}", i + 1);
    }
    if !trace.final_valid {
        return Err(CliError::CompileFailed);
    }
    Ok(())
}

pub fn kto(cfg: &RunConfig, batch_path: &Path, z0: Option<f64>) -> Result<(), CliError> {
    let batch: Vec<KtoExample> = read_jsonl(batch_path, |ex: &KtoExample, i| {
        ex.validate(i).map_err(|e| e.to_string())
    })?;
    let report =
        evaluate_batch(&batch, &cfg.kto(), z0).map_err(|e| CliError::Usage(e.to_string()))?;
    emit(&json!({ "config": cfg, "z0": report.z0, "loss": report.loss, "grads": report.grads }));
    Ok(())
}

pub fn sft(cfg: &RunConfig, batch_path: &Path) -> Result<(), CliError> {
    let batch: Vec<Vec<f64>> = read_jsonl(batch_path, |_, _| Ok(()))?;
    let loss = sft_loss(&batch).map_err(|e| CliError::Usage(e.to_string()))?;
    emit(&json!({ "config": cfg, "loss": loss }));
    Ok(())
}

pub fn import(cfg: &RunConfig, json_path: &Path, out: &Path) -> Result<(), CliError> {
    let text = read_text(json_path)?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", json_path.display())))?;
    let seq = import_deepcad_json(&doc).map_err(|d| {
        report_diagnostics(&d);
        CliError::CompileFailed
    })?;
    let compiles = compile_sequence_with(&seq, &cfg.kernel(), Exec::auto()).is_ok();
    if !compiles {
        log::warn!("{} imported but does not compile", json_path.display());
    }
    write_atomic(out, print_sequence(&seq).as_bytes())?;
    emit(&json!({ "config": cfg, "extrudes": seq.extrudes.len(), "compiles": compiles }));
    Ok(())
}
