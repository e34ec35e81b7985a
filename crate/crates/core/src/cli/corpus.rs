//! Corpus files: one CSV row per (experiment, week), or a JSON array of
//! records.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Arm, ArmWeekly, ExperimentRecord, Label};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 12] = [
    "id",
    "week",
    "n_t",
    "n_c",
    "mean_t",
    "mean_c",
    "var_t",
    "var_c",
    "effect",
    "effect_se2",
    "weekly_cost",
    "latent_label",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    id: String,
    week: usize,
    n_t: Option<u64>,
    n_c: Option<u64>,
    mean_t: Option<f64>,
    mean_c: Option<f64>,
    var_t: Option<f64>,
    var_c: Option<f64>,
    effect: f64,
    effect_se2: f64,
    weekly_cost: f64,
    latent_label: Option<String>,
}

pub fn write_csv<W: Write>(corpus: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in corpus {
        for week in 1..=r.weeks {
            let i = week - 1;
            w.serialize(Row {
                id: r.id.clone(),
                week,
                n_t: r.treatment.n_at(week),
                n_c: r.control.n_at(week),
                mean_t: r.treatment.mean_at(week),
                mean_c: r.control.mean_at(week),
                var_t: r.treatment.var_at(week),
                var_c: r.control.var_at(week),
                effect: r.observed_effect[i],
                effect_se2: r.effect_se2[i],
                weekly_cost: r.weekly_cost,
                latent_label: r.latent_label.map(|l| l.as_str().to_string()),
            })
            .map_err(|e| Error::config(format!("cannot write corpus: {e}")))?;
        }
    }
    w.flush().map_err(|e| Error::config(format!("cannot write corpus: {e}")))
}

fn line_of(e: &csv::Error) -> String {
    e.position()
        .map(|p| format!("line {}", p.line()))
        .unwrap_or_else(|| "unknown line".into())
}

struct Building {
    record: ExperimentRecord,
    first_line: u64,
}

fn finish(b: Building) -> Result<ExperimentRecord> {
    b.record
        .validate()
        .map_err(|e| Error::data(format!("line {}: {e}", b.first_line)))?;
    Ok(b.record)
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| Error::data(format!("corpus header, {}: {e}", line_of(&e))))?
        .clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::data(format!(
            "line 1: expected header `{}`",
            CSV_HEADER.join(",")
        )));
    }

    let mut corpus = Vec::new();
    let mut current: Option<Building> = None;
    for result in rdr.records() {
        let rec = result.map_err(|e| Error::data(format!("{}: {e}", line_of(&e))))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: Row = rec
            .deserialize(Some(&header))
            .map_err(|e| Error::data(format!("line {line}: {e}")))?;
        let label = match row.latent_label.as_deref() {
            None | Some("") => None,
            Some(s) => Some(
                Label::parse(s).ok_or_else(|| Error::data(format!("line {line}: unknown label `{s}`")))?,
            ),
        };

        let continues = matches!(&current, Some(b) if b.record.id == row.id);
        if !continues {
            if let Some(b) = current.take() {
                corpus.push(finish(b)?);
            }
            if corpus.iter().any(|r: &ExperimentRecord| r.id == row.id) {
                return Err(Error::data(format!(
                    "line {line}: rows of experiment {} are not contiguous",
                    row.id
                )));
            }
            current = Some(Building {
                record: ExperimentRecord {
                    id: row.id.clone(),
                    weeks: 0,
                    treatment: ArmWeekly::empty(Arm::Treatment, 0),
                    control: ArmWeekly::empty(Arm::Control, 0),
                    observed_effect: Vec::new(),
                    effect_se2: Vec::new(),
                    weekly_cost: row.weekly_cost,
                    latent_label: label,
                },
                first_line: line,
            });
        }
        let b = current.as_mut().expect("set above");
        let r = &mut b.record;
        if row.week != r.weeks + 1 {
            return Err(Error::data(format!(
                "line {line}: experiment {} expected week {}, got {}",
                r.id,
                r.weeks + 1,
                row.week
            )));
        }
        if row.weekly_cost != r.weekly_cost {
            return Err(Error::data(format!(
                "line {line}: weekly_cost changes within experiment {}",
                r.id
            )));
        }
        if label != r.latent_label {
            return Err(Error::data(format!(
                "line {line}: latent_label changes within experiment {}",
                r.id
            )));
        }
        r.weeks += 1;
        r.treatment.cumulative_n.push(row.n_t);
        r.treatment.cumulative_mean.push(row.mean_t);
        r.treatment.cumulative_var.push(row.var_t);
        r.control.cumulative_n.push(row.n_c);
        r.control.cumulative_mean.push(row.mean_c);
        r.control.cumulative_var.push(row.var_c);
        r.observed_effect.push(row.effect);
        r.effect_se2.push(row.effect_se2);
    }
    if let Some(b) = current.take() {
        corpus.push(finish(b)?);
    }
    if corpus.is_empty() {
        return Err(Error::data("corpus has no rows"));
    }
    Ok(corpus)
}

pub fn read_json<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let corpus: Vec<ExperimentRecord> = serde_json::from_reader(input).map_err(|e| {
        Error::data(format!("corpus JSON, line {}: {e}", e.line()))
    })?;
    for r in &corpus {
        r.validate()?;
    }
    if corpus.is_empty() {
        return Err(Error::data("corpus has no records"));
    }
    Ok(corpus)
}

/// Reads a corpus, choosing the format from the file extension.
pub fn read_corpus(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let file = File::open(path)
        .map_err(|e| Error::config(format!("cannot open corpus {}: {e}", path.display())))?;
    let read = if is_json(path) { read_json(file) } else { read_csv(file) };
    read.map_err(|e| match e {
        Error::Data(msg) => Error::data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}
