//! Persisted records: per-trial CSV or JSON, the summary, learner outputs.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vgm_core::families::BoxDistribution;
use vgm_core::learners::VgmOutput;
use vgm_core::Point;

use crate::runner::{ScenarioResult, TrialOutcome, TrialReport};

pub const CSV_COLUMNS: [&str; 13] = [
    "trial",
    "seed",
    "learner",
    "output_kind",
    "loss_true",
    "loss_est",
    "inv_true",
    "inv_est",
    "opt_loss",
    "samples",
    "queries",
    "rounds",
    "wall_ms",
];

/// What a learner returned, with components by reference.
#[derive(Clone, Debug, Serialize)]
pub struct OutputRecord {
    pub kind: String,
    pub components: Vec<serde_json::Value>,
    /// Proper: the round; filtered meta: the base round (both 0-based).
    pub base: Option<usize>,
    pub fallback: Option<Point>,
}

pub fn describe_box(b: &BoxDistribution) -> serde_json::Value {
    serde_json::to_value(b).expect("box serializes")
}

pub fn describe_vgm<D: vgm_core::Generative>(out: &VgmOutput<D>, describe: impl Fn(&D) -> serde_json::Value) -> OutputRecord {
    match out {
        VgmOutput::Proper { round, dist } => OutputRecord {
            kind: "proper".into(),
            components: vec![describe(dist)],
            base: Some(*round),
            fallback: None,
        },
        VgmOutput::Filtered(meta) => OutputRecord {
            kind: "filtered-meta".into(),
            components: meta.rounds().iter().map(describe).collect(),
            base: Some(meta.base()),
            fallback: Some(meta.fallback().clone()),
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn row(r: &TrialReport) -> [String; 13] {
    [
        r.trial.to_string(),
        r.seed.to_string(),
        r.learner.clone(),
        r.output_kind.clone(),
        cell(r.loss_true),
        cell(r.loss_est),
        cell(r.inv_true),
        cell(r.inv_est),
        cell(r.opt_loss),
        r.samples.to_string(),
        r.queries.to_string(),
        r.rounds.to_string(),
        r.wall_ms.map(|v| v.to_string()).unwrap_or_default(),
    ]
}

pub fn write_csv<W: Write>(outcomes: &[TrialOutcome], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_COLUMNS)?;
    for o in outcomes {
        wr.write_record(row(&o.report))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn csv_string(outcomes: &[TrialOutcome]) -> String {
    let mut buf = Vec::new();
    write_csv(outcomes, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

#[derive(Serialize)]
struct TrialsFile<'a> {
    scenario: &'a str,
    columns: [&'static str; 13],
    trials: &'a [TrialOutcome],
}

/// Writes `<scenario>.csv` (or `<scenario>.trials.json`) and
/// `<scenario>.summary.json` into `dir`; returns the paths written.
pub fn write_result(result: &ScenarioResult, dir: &Path, format: Format) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let name = &result.config.scenario;
    let trials_path = match format {
        Format::Csv => {
            let p = dir.join(format!("{name}.csv"));
            std::fs::write(&p, csv_string(&result.outcomes))?;
            p
        }
        Format::Json => {
            let p = dir.join(format!("{name}.trials.json"));
            let file = TrialsFile {
                scenario: name,
                columns: CSV_COLUMNS,
                trials: &result.outcomes,
            };
            std::fs::write(&p, serde_json::to_string_pretty(&file)? + "\n")?;
            p
        }
    };
    let summary_path = dir.join(format!("{name}.summary.json"));
    std::fs::write(&summary_path, serde_json::to_string_pretty(&result.summary)? + "\n")?;
    Ok(vec![trials_path, summary_path])
}
