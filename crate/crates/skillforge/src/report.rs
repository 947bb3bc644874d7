//! CSV and JSON output for evaluation runs and training curves.

use std::fs;
use std::path::Path;

use serde::Serialize;
use skillforge_core::harness::{summarize, EvalReport};
use skillforge_core::learner::TrainingCurve;

use crate::Error;

#[derive(Serialize)]
struct Row<'a> {
    task: &'a str,
    set: &'a str,
    method: &'a str,
    episodes: usize,
    success_rate: f64,
    mean_env_steps: f64,
    budget: u64,
    planning_steps: usize,
    involved_skills: usize,
}

pub fn report_csv(reports: &[EvalReport]) -> Result<String, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(Row {
            task: &r.task,
            set: &r.set,
            method: r.method.as_str(),
            episodes: r.episodes,
            success_rate: r.success_rate,
            mean_env_steps: r.mean_env_steps,
            budget: r.budget,
            planning_steps: r.planning_steps,
            involved_skills: r.involved_skills,
        })?;
    }
    finish(w)
}

/// Mean success per task set and method.
pub fn summary_csv(reports: &[EvalReport]) -> Result<String, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["set", "method", "tasks", "mean_success"])?;
    for s in summarize(reports) {
        w.write_record([s.set, s.method.to_string(), s.tasks.to_string(), s.mean_success.to_string()])?;
    }
    finish(w)
}

/// One report's step-success curve: index 0 is the start point.
pub fn curve_csv(report: &EvalReport) -> Result<String, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "skill", "success"])?;
    let names = std::iter::once("start").chain(report.curve_skills.iter().map(String::as_str));
    for (i, (name, v)) in names.zip(&report.curve).enumerate() {
        w.write_record([i.to_string(), name.to_string(), v.to_string()])?;
    }
    finish(w)
}

pub fn training_curve_csv(curve: &TrainingCurve) -> Result<String, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["episode", "return", "success", "env_steps", "smoothed"])?;
    for (i, (r, s)) in curve.records.iter().zip(&curve.smoothed).enumerate() {
        w.write_record([i.to_string(), r.ret.to_string(), u8::from(r.success).to_string(), r.env_steps.to_string(), s.to_string()])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, Error> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// `report.csv`, `summary.csv`, `report.json` and `curves/<task>__<method>.csv`.
pub fn write_eval(dir: &Path, reports: &[EvalReport]) -> Result<(), Error> {
    fs::create_dir_all(dir.join("curves"))?;
    crate::write_atomic(&dir.join("report.csv"), report_csv(reports)?.as_bytes())?;
    crate::write_atomic(&dir.join("summary.csv"), summary_csv(reports)?.as_bytes())?;
    crate::write_atomic(&dir.join("report.json"), serde_json::to_string_pretty(reports)?.as_bytes())?;
    for r in reports {
        let name = format!("{}__{}.csv", r.task, r.method.as_str());
        crate::write_atomic(&dir.join("curves").join(name), curve_csv(r)?.as_bytes())?;
    }
    Ok(())
}
