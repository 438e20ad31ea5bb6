//! CSV writers for analysis outputs. Reals are written in shortest
//! round-trip form.

use std::io::Write;

use crate::error::Result;
use crate::inference::prediction::{PredictionCurve, Predictor};
use crate::inference::summary::PosteriorSummary;
use crate::inference::DicReport;
use crate::model::longitudinal::longitudinal_mean;
use crate::model::types::{Dataset, ParamState};

pub fn write_summary<W: Write>(w: W, summary: &PosteriorSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["parameter", "mean", "sd", "eti89_lower", "eti89_upper"])?;
    for r in &summary.rows {
        w.write_record([r.name.clone(), r.mean.to_string(), r.sd.to_string(), r.lower.to_string(), r.upper.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per visit: posterior class probabilities and the argmax label (one-based).
pub fn write_membership<W: Write>(w: W, data: &Dataset, probs: &[Vec<Vec<f64>>], labels: &[Vec<usize>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let k = probs.first().and_then(|s| s.first()).map_or(0, Vec::len);
    let mut header = vec!["id".to_string(), "visit".into(), "time".into()];
    header.extend((1..=k).map(|c| format!("p_{c}")));
    header.push("class".into());
    w.write_record(&header)?;
    for (i, s) in data.subjects().iter().enumerate() {
        for (j, v) in s.visits.iter().enumerate() {
            let mut rec = vec![s.id.clone(), (j + 1).to_string(), v.visit_time.to_string()];
            rec.extend(probs[i][j].iter().map(f64::to_string));
            rec.push((labels[i][j] + 1).to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Tidy plot data: observed trajectory, fitted trajectory per class, and the
/// predictive survival curve. Columns: `id,series,class,time,value`, where
/// `class` is empty for series that are not class-specific and survival rows
/// use absolute time `t + dt`.
pub fn write_prediction<W: Write>(
    w: W,
    data: &Dataset,
    predictor: &Predictor,
    curves: &[(usize, PredictionCurve)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["id", "series", "class", "time", "value"])?;
    let st: &ParamState = &predictor.state;
    for (i, curve) in curves {
        let s = &data.subjects()[*i];
        for v in s.visits.iter().filter(|v| v.visit_time <= curve.base_time) {
            w.write_record([s.id.as_str(), "observed", "", &v.visit_time.to_string(), &v.response.to_string()])?;
        }
        for k in 0..predictor.spec.n_classes {
            for v in &s.visits {
                let fitted = longitudinal_mean(v, &st.beta[k], &st.u[*i]);
                w.write_record([
                    s.id.as_str(),
                    "fitted",
                    &(k + 1).to_string(),
                    &v.visit_time.to_string(),
                    &fitted.to_string(),
                ])?;
            }
        }
        for (dt, p) in curve.horizons.iter().zip(&curve.survival) {
            w.write_record([
                s.id.as_str(),
                "survival",
                "",
                &(curve.base_time + dt).to_string(),
                &p.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row of a model-selection table.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub n_classes: usize,
    pub membership: String,
    pub dic: DicReport,
    /// Misclassification against known labels, when available.
    pub error_rate: Option<f64>,
}

pub fn write_selection<W: Write>(w: W, rows: &[SelectionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["k", "membership", "dic_variant", "dic_penalty", "dic", "p_d", "mean_deviance", "error_rate"])?;
    for r in rows {
        w.write_record([
            r.n_classes.to_string(),
            r.membership.clone(),
            r.dic.method.variant.to_string(),
            r.dic.method.penalty.to_string(),
            r.dic.dic.to_string(),
            r.dic.p_d.to_string(),
            r.dic.mean_deviance.to_string(),
            r.error_rate.map_or(String::new(), |e| e.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Generating labels and random effects, one row per visit.
pub fn write_truth<W: Write>(w: W, data: &Dataset, truth: &ParamState) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let q = truth.u.first().map_or(0, Vec::len);
    let mut header = vec!["id".to_string(), "time".into(), "class".into()];
    header.extend((1..=q).map(|l| format!("u_{l}")));
    w.write_record(&header)?;
    for (i, s) in data.subjects().iter().enumerate() {
        for (j, v) in s.visits.iter().enumerate() {
            let mut rec = vec![s.id.clone(), v.visit_time.to_string(), (truth.labels[i][j] + 1).to_string()];
            rec.extend(truth.u[i].iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the class column of a truth file back into zero-based labels per subject.
pub fn read_truth_labels<R: std::io::Read>(r: R, data: &Dataset) -> Result<Vec<Vec<usize>>> {
    use crate::error::JlcmError;
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |n: &str| headers.iter().position(|h| h == n).ok_or_else(|| JlcmError::MissingColumn(n.into()));
    let (c_id, c_class) = (col("id")?, col("class")?);
    let mut by_id: std::collections::HashMap<String, Vec<usize>> = std::collections::HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let k: usize = rec[c_class]
            .parse()
            .ok()
            .filter(|&k| k >= 1)
            .ok_or_else(|| JlcmError::Parse { line, message: format!("bad class `{}`", &rec[c_class]) })?;
        by_id.entry(rec[c_id].to_string()).or_default().push(k - 1);
    }
    data.subjects()
        .iter()
        .map(|s| {
            by_id
                .remove(&s.id)
                .filter(|l| l.len() == s.n_visits())
                .ok_or_else(|| JlcmError::Data(format!("truth labels missing or incomplete for subject `{}`", s.id)))
        })
        .collect()
}

/// Named truth parameters (`name,value`).
pub fn write_parameters<W: Write>(w: W, params: &[(String, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["parameter", "value"])?;
    for (n, v) in params {
        w.write_record([n.clone(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
