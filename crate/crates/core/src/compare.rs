//! Per-document comparison of models through ranked class probabilities.
//!
//! Probabilities from differently calibrated models are not comparable, so
//! every model's column is replaced by ranks (1 = most probable) before it is
//! exported as a parallel-coordinate table or SVG plot. A comparison always
//! concerns one class within one cross-validation fold.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::eval::CvReport;

/// Probability of one class for every (model, document) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMatrix {
    pub models: Vec<String>,
    pub docs: Vec<String>,
    /// `probabilities[model][doc]`
    pub probabilities: Vec<Vec<f64>>,
    /// Whether each document belongs to the class.
    pub truth: Vec<bool>,
    /// Model whose ranks drive the stroke saturation of the plot.
    pub reference: String,
}

impl RunMatrix {
    pub fn new(
        models: Vec<String>,
        docs: Vec<String>,
        probabilities: Vec<Vec<f64>>,
        truth: Vec<bool>,
        reference: impl Into<String>,
    ) -> Result<Self> {
        let reference = reference.into();
        if probabilities.len() != models.len() {
            return Err(Error::DimensionMismatch {
                expected: models.len(),
                got: probabilities.len(),
            });
        }
        if truth.len() != docs.len() {
            return Err(Error::DimensionMismatch {
                expected: docs.len(),
                got: truth.len(),
            });
        }
        for (m, column) in models.iter().zip(&probabilities) {
            if column.len() != docs.len() {
                return Err(Error::Format(format!(
                    "model {m} scores {} documents, expected {}",
                    column.len(),
                    docs.len()
                )));
            }
            if let Some(p) = column.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::Format(format!("model {m}: probability {p} outside [0, 1]")));
            }
        }
        if !models.contains(&reference) {
            return Err(Error::Config(format!(
                "reference model {reference} is not among the models"
            )));
        }
        Ok(RunMatrix {
            models,
            docs,
            probabilities,
            truth,
            reference,
        })
    }

    /// Collects the held-out predictions of `fold` for `class` from reports
    /// that were produced under one shared fold plan.
    pub fn from_reports(reports: &[CvReport], class: &str, fold: usize, reference: &str) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::Config("no reports to compare".into()))?;
        if let Some(r) = reports.iter().find(|r| r.plan.assignment != first.plan.assignment) {
            return Err(Error::Config(format!(
                "model {} was evaluated under a different fold plan than {}",
                r.model, first.model
            )));
        }
        if fold >= first.plan.k {
            return Err(Error::Config(format!(
                "fold {fold} out of range (k = {})",
                first.plan.k
            )));
        }
        let c = first
            .classes
            .iter()
            .position(|n| n == class)
            .ok_or_else(|| Error::UnknownLabel(class.to_owned()))?;

        let held_out = &first.predictions[fold].docs;
        let mut probabilities = Vec::with_capacity(reports.len());
        for r in reports {
            if r.classes != first.classes {
                return Err(Error::Config(format!("model {} uses a different label set", r.model)));
            }
            probabilities.push(r.predictions[fold].probabilities.iter().map(|p| p[c]).collect());
        }
        RunMatrix::new(
            reports.iter().map(|r| r.model.clone()).collect(),
            held_out.iter().map(ToString::to_string).collect(),
            probabilities,
            held_out.iter().map(|&d| first.truth[d] == c).collect(),
            reference,
        )
    }

    pub fn ranks(&self) -> RankMatrix {
        RankMatrix {
            models: self.models.clone(),
            docs: self.docs.clone(),
            truth: self.truth.clone(),
            ranks: self.probabilities.iter().map(|p| ranks(p)).collect(),
            reference: self.models.iter().position(|m| *m == self.reference).unwrap_or(0),
        }
    }
}

/// Ranks of every (model, document) pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankMatrix {
    pub models: Vec<String>,
    pub docs: Vec<String>,
    pub truth: Vec<bool>,
    /// `ranks[model][doc]`, each a permutation of `1..=n`.
    pub ranks: Vec<Vec<usize>>,
    /// Index of the reference model.
    pub reference: usize,
}

/// Rank 1 goes to the highest probability. Equal probabilities are ranked
/// by ascending position.
pub fn ranks(probabilities: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probabilities.len()).collect();
    order.sort_by(|&a, &b| probabilities[b].total_cmp(&probabilities[a]).then(a.cmp(&b)));
    let mut out = vec![0; probabilities.len()];
    for (r, i) in order.into_iter().enumerate() {
        out[i] = r + 1;
    }
    out
}

/// Documents whose ranks differ by at least `threshold` between some pair of
/// models, as `(document, largest gap)` sorted by decreasing gap.
pub fn disagreement_report(m: &RankMatrix, threshold: usize) -> Vec<(String, usize)> {
    let mut out: Vec<(usize, usize)> = (0..m.docs.len())
        .filter_map(|d| {
            let lo = m.ranks.iter().map(|r| r[d]).min()?;
            let hi = m.ranks.iter().map(|r| r[d]).max()?;
            (hi - lo >= threshold).then_some((d, hi - lo))
        })
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out.into_iter().map(|(d, gap)| (m.docs[d].clone(), gap)).collect()
}

/// `doc_id,truth,<model1>,...,<modelM>` with one row per document.
pub fn parallel_coords_csv(m: &RankMatrix) -> Result<String> {
    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["doc_id".to_owned(), "truth".to_owned()];
    header.extend(m.models.iter().cloned());
    csv.write_record(&header)?;
    for (d, doc) in m.docs.iter().enumerate() {
        let mut row = vec![doc.clone(), m.truth[d].to_string()];
        row.extend(m.ranks.iter().map(|r| r[d].to_string()));
        csv.write_record(&row)?;
    }
    let bytes = csv.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Inverse of [`parallel_coords_csv`]. The CSV does not record a reference
/// model, so the first model becomes the reference.
pub fn parse_parallel_coords_csv(text: &str) -> Result<RankMatrix> {
    let mut csv = csv::Reader::from_reader(text.as_bytes());
    let header = csv.headers()?.clone();
    if header.len() < 3 || &header[0] != "doc_id" || &header[1] != "truth" {
        return Err(Error::Format("expected header doc_id,truth,<models>".into()));
    }
    let models: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
    let mut docs = Vec::new();
    let mut truth = Vec::new();
    let mut ranks = vec![Vec::new(); models.len()];
    for (line, record) in csv.records().enumerate() {
        let record = record?;
        let bad = |msg: String| Error::Format(format!("row {}: {msg}", line + 2));
        docs.push(record[0].to_owned());
        truth.push(match &record[1] {
            "true" => true,
            "false" => false,
            other => return Err(bad(format!("truth must be true or false, got {other:?}"))),
        });
        for (m, cell) in record.iter().skip(2).enumerate() {
            ranks[m].push(cell.parse().map_err(|_| bad(format!("bad rank {cell:?}")))?);
        }
    }
    let n = docs.len();
    for (model, column) in models.iter().zip(&ranks) {
        let mut seen = vec![false; n + 1];
        for &r in column {
            if r == 0 || r > n || std::mem::replace(&mut seen[r], true) {
                return Err(Error::Format(format!(
                    "ranks of {model} are not a permutation of 1..{n}"
                )));
            }
        }
    }
    Ok(RankMatrix {
        models,
        docs,
        truth,
        ranks,
        reference: 0,
    })
}

const AXIS_SPACING: f64 = 120.0;
const MARGIN_X: f64 = 60.0;
const MARGIN_TOP: f64 = 40.0;
const PLOT_HEIGHT: f64 = 500.0;

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Vertical position of `rank` among `n`; rank 1 is at the top.
fn rank_y(rank: usize, n: usize) -> f64 {
    if n <= 1 {
        return MARGIN_TOP + PLOT_HEIGHT / 2.0;
    }
    MARGIN_TOP + PLOT_HEIGHT * (rank - 1) as f64 / (n - 1) as f64
}

/// Stroke saturation in percent for a document at `rank` of the reference
/// model: 100 for rank 1 falling linearly to 0 for rank `n`.
pub fn saturation(rank: usize, n: usize) -> f64 {
    if n <= 1 {
        return 100.0;
    }
    100.0 * (n - rank) as f64 / (n - 1) as f64
}

/// Parallel-coordinate plot with one axis per model and one polyline per
/// document. Members of the class are drawn blue, non-members red.
pub fn parallel_coords_svg(m: &RankMatrix) -> Result<String> {
    if m.models.len() < 2 {
        return Err(Error::Config(format!(
            "a parallel-coordinate plot needs at least 2 models, got {}",
            m.models.len()
        )));
    }
    let n = m.docs.len();
    let width = 2.0 * MARGIN_X + AXIS_SPACING * (m.models.len() - 1) as f64;
    let height = MARGIN_TOP * 2.0 + PLOT_HEIGHT;
    let x = |i: usize| MARGIN_X + AXIS_SPACING * i as f64;

    let mut svg = String::new();
    // Writing to a String cannot fail.
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let _ = writeln!(
        svg,
        r#"<g class="documents" fill="none" stroke-width="1" stroke-opacity="0.8">"#
    );
    for d in 0..n {
        let hue = if m.truth[d] { 240 } else { 0 };
        let sat = saturation(m.ranks[m.reference][d], n);
        let points: Vec<String> = m
            .ranks
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{},{}", x(i), rank_y(r[d], n)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="hsl({hue}, {sat:.1}%, 45%)"><title>{}</title></polyline>"#,
            points.join(" "),
            escape_xml(&m.docs[d])
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g class="axes" stroke="black" stroke-width="1.5">"#);
    for (i, model) in m.models.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<line class="axis" x1="{0}" y1="{1}" x2="{0}" y2="{2}"/>"#,
            x(i),
            MARGIN_TOP,
            MARGIN_TOP + PLOT_HEIGHT
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12" stroke="none">{}</text>"#,
            x(i),
            MARGIN_TOP - 12.0,
            escape_xml(model)
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// One row of a predictions file.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    pub model: String,
    pub fold: usize,
    pub doc: String,
    pub truth: String,
    pub class: String,
    pub prob: f64,
}

/// Writes held-out predictions as `model,fold,doc,truth,class,prob`, one
/// row per (model, document, class).
pub fn write_predictions_csv<W: Write>(reports: &[CvReport], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["model", "fold", "doc", "truth", "class", "prob"])?;
    for r in reports {
        for (fold, preds) in r.predictions.iter().enumerate() {
            for (&doc, probs) in preds.docs.iter().zip(&preds.probabilities) {
                for (class, p) in r.classes.iter().zip(probs) {
                    csv.write_record([
                        r.model.as_str(),
                        &fold.to_string(),
                        &doc.to_string(),
                        &r.classes[r.truth[doc]],
                        class,
                        &p.to_string(),
                    ])?;
                }
            }
        }
    }
    csv.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn read_predictions_csv<R: Read>(r: R) -> Result<Vec<PredictionRow>> {
    let mut csv = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for (line, record) in csv.records().enumerate() {
        let record = record?;
        let bad = |field: &str| Error::Format(format!("predictions row {}: bad {field}", line + 2));
        if record.len() != 6 {
            return Err(bad("column count"));
        }
        rows.push(PredictionRow {
            model: record[0].to_owned(),
            fold: record[1].parse().map_err(|_| bad("fold"))?,
            doc: record[2].to_owned(),
            truth: record[3].to_owned(),
            class: record[4].to_owned(),
            prob: record[5].parse().map_err(|_| bad("prob"))?,
        });
    }
    Ok(rows)
}

/// Builds the comparison of `class` within `fold` from prediction rows.
///
/// Every model must have scored exactly the same documents in that fold. A
/// document that a model placed in another fold is an error: ranks from
/// different folds come from different models and are not comparable.
pub fn run_matrix_from_predictions(
    rows: &[PredictionRow],
    class: &str,
    fold: usize,
    reference: &str,
) -> Result<RunMatrix> {
    let mut models: Vec<String> = Vec::new();
    let mut docs: Vec<String> = Vec::new();
    let mut doc_index: HashMap<&str, usize> = HashMap::new();
    let mut doc_fold: HashMap<(&str, &str), usize> = HashMap::new();
    let mut truth: Vec<bool> = Vec::new();
    let mut cells: HashMap<(usize, usize), f64> = HashMap::new();

    for row in rows {
        if let Some(&f) = doc_fold.get(&(row.model.as_str(), row.doc.as_str())) {
            if f != row.fold {
                return Err(Error::Format(format!(
                    "document {} appears in folds {f} and {} for model {}",
                    row.doc, row.fold, row.model
                )));
            }
        }
        doc_fold.insert((&row.model, &row.doc), row.fold);
        if row.fold != fold || row.class != class {
            continue;
        }
        let m = match models.iter().position(|x| *x == row.model) {
            Some(m) => m,
            None => {
                models.push(row.model.clone());
                models.len() - 1
            }
        };
        let d = *doc_index.entry(&row.doc).or_insert_with(|| {
            docs.push(row.doc.clone());
            truth.push(row.truth == class);
            docs.len() - 1
        });
        if cells.insert((m, d), row.prob).is_some() {
            return Err(Error::Format(format!(
                "duplicate prediction for model {} document {}",
                row.model, row.doc
            )));
        }
    }
    if models.is_empty() {
        return Err(Error::Config(format!(
            "no predictions for class {class} in fold {fold}"
        )));
    }
    let mut probabilities = vec![vec![0.0; docs.len()]; models.len()];
    for (m, column) in probabilities.iter_mut().enumerate() {
        for (d, cell) in column.iter_mut().enumerate() {
            *cell = *cells.get(&(m, d)).ok_or_else(|| {
                Error::Format(format!(
                    "model {} has no prediction for document {} in fold {fold}",
                    models[m], docs[d]
                ))
            })?;
        }
    }
    RunMatrix::new(models, docs, probabilities, truth, reference)
}
