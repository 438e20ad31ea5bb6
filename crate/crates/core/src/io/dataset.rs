//! Long-format CSV datasets: one row per visit, subject-level columns repeated.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{JlcmError, Result};
use crate::model::types::{Dataset, LongitudinalRecord, Subject, SurvivalRecord};

/// Design term: the literal `1`, the visit time, or a column (dummy coded
/// when its values are not numeric).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Intercept,
    Time,
    Column(String),
}

impl Term {
    pub fn parse(s: &str) -> Self {
        match s.trim() {
            "1" => Self::Intercept,
            "time" => Self::Time,
            other => Self::Column(other.to_string()),
        }
    }
}

impl std::fmt::Display for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Intercept => f.write_str("1"),
            Self::Time => f.write_str("time"),
            Self::Column(c) => f.write_str(c),
        }
    }
}

/// Binds CSV columns to model roles.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub subject: String,
    pub response: String,
    pub visit_time: String,
    pub followup: String,
    pub event: String,
    pub x1: Vec<Term>,
    pub x2: Vec<Term>,
    pub x3: Vec<Term>,
    /// Random-effect dimension, `Z(t) = (1, t, ..., t^(q-1))`.
    pub q: usize,
}

pub fn parse_terms(s: &str) -> Vec<Term> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(Term::parse).collect()
}

pub fn format_terms(terms: &[Term]) -> String {
    terms.iter().map(Term::to_string).collect::<Vec<_>>().join(",")
}

impl Schema {
    /// Layout written by `simulate`.
    pub fn simulation() -> Self {
        Self {
            subject: "id".into(),
            response: "y".into(),
            visit_time: "time".into(),
            followup: "followup".into(),
            event: "event".into(),
            x1: parse_terms("X1,time"),
            x2: parse_terms("X1,time"),
            x3: parse_terms("X3"),
            q: 2,
        }
    }

    /// AIDS trial layout with the covariates used in the real-data model.
    pub fn aids() -> Self {
        Self {
            subject: "patient".into(),
            response: "CD4".into(),
            visit_time: "obstime".into(),
            followup: "Time".into(),
            event: "death".into(),
            x1: parse_terms("1,time"),
            x2: parse_terms("1,time,gender,prevOI,AZT"),
            x3: parse_terms("gender,prevOI,AZT,drug"),
            q: 2,
        }
    }

    fn columns(&self) -> Vec<&str> {
        let mut out = vec![
            self.subject.as_str(),
            self.response.as_str(),
            self.visit_time.as_str(),
            self.followup.as_str(),
            self.event.as_str(),
        ];
        for t in self.x1.iter().chain(&self.x2).chain(&self.x3) {
            if let Term::Column(c) = t {
                out.push(c);
            }
        }
        out
    }
}

/// How a covariate column becomes numbers.
#[derive(Debug, Clone)]
enum Coding {
    Numeric,
    /// Non-reference levels, sorted; the alphabetically first level is the reference.
    Dummy(Vec<String>),
}

struct Table {
    index: HashMap<String, usize>,
    rows: Vec<(usize, csv::StringRecord)>,
}

impl Table {
    fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let index = headers.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rows.push((line, rec));
        }
        Ok(Self { index, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| JlcmError::MissingColumn(name.to_string()))
    }
}

fn parse_num(s: &str, line: usize, column: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| JlcmError::Parse {
        line,
        message: format!("column `{column}`: `{s}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(JlcmError::Parse { line, message: format!("column `{column}`: non-finite value `{s}`") });
    }
    Ok(v)
}

fn expand(
    terms: &[Term],
    rec: &csv::StringRecord,
    line: usize,
    time: f64,
    table: &Table,
    coding: &BTreeMap<String, Coding>,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for t in terms {
        match t {
            Term::Intercept => out.push(1.0),
            Term::Time => out.push(time),
            Term::Column(c) => {
                let raw = &rec[table.col(c)?];
                match &coding[c] {
                    Coding::Numeric => out.push(parse_num(raw, line, c)?),
                    Coding::Dummy(levels) => out.extend(levels.iter().map(|l| (l == raw) as u8 as f64)),
                }
            }
        }
    }
    Ok(out)
}

/// Names of the expanded design columns, e.g. `gender=male` for a dummy.
pub fn expanded_names(schema: &Schema, terms: &[Term], reader: impl Read) -> Result<Vec<String>> {
    let table = Table::read(reader)?;
    let coding = codings(schema, &table)?;
    Ok(terms
        .iter()
        .flat_map(|t| match t {
            Term::Column(c) => match &coding[c] {
                Coding::Numeric => vec![c.clone()],
                Coding::Dummy(levels) => levels.iter().map(|l| format!("{c}={l}")).collect(),
            },
            other => vec![other.to_string()],
        })
        .collect())
}

fn codings(schema: &Schema, table: &Table) -> Result<BTreeMap<String, Coding>> {
    for c in schema.columns() {
        table.col(c)?;
    }
    let mut out = BTreeMap::new();
    for t in schema.x1.iter().chain(&schema.x2).chain(&schema.x3) {
        let Term::Column(c) = t else { continue };
        if out.contains_key(c) {
            continue;
        }
        let idx = table.col(c)?;
        let numeric = table.rows.iter().all(|(_, r)| r[idx].parse::<f64>().is_ok());
        let coding = if numeric {
            Coding::Numeric
        } else {
            let levels: BTreeSet<&str> = table.rows.iter().map(|(_, r)| &r[idx]).collect();
            Coding::Dummy(levels.into_iter().skip(1).map(str::to_string).collect())
        };
        out.insert(c.clone(), coding);
    }
    Ok(out)
}

/// Reads a long-format table, groups rows by subject (first-appearance
/// order) and sorts visits by time.
pub fn read_dataset<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let table = Table::read(reader)?;
    let coding = codings(schema, &table)?;
    let (c_id, c_y, c_t, c_fu, c_ev) = (
        table.col(&schema.subject)?,
        table.col(&schema.response)?,
        table.col(&schema.visit_time)?,
        table.col(&schema.followup)?,
        table.col(&schema.event)?,
    );
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<usize>> = HashMap::new();
    for (r, (_, rec)) in table.rows.iter().enumerate() {
        let id = rec[c_id].to_string();
        groups.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            Vec::new()
        });
        groups.get_mut(&rec[c_id]).expect("just inserted").push(r);
    }
    let mut subjects = Vec::with_capacity(order.len());
    for id in order {
        let rows = &groups[&id];
        let mut visits = Vec::with_capacity(rows.len());
        let mut surv: Option<(f64, bool, Vec<f64>, usize)> = None;
        for &r in rows {
            let (line, rec) = (&table.rows[r].0, &table.rows[r].1);
            let line = *line;
            let t = parse_num(&rec[c_t], line, &schema.visit_time)?;
            let y = parse_num(&rec[c_y], line, &schema.response)?;
            let fu = parse_num(&rec[c_fu], line, &schema.followup)?;
            let ev = match &rec[c_ev] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(JlcmError::Parse {
                        line,
                        message: format!("column `{}`: event must be 0 or 1, got `{other}`", schema.event),
                    })
                }
            };
            let x3 = expand(&schema.x3, rec, line, t, &table, &coding)?;
            match &surv {
                None => surv = Some((fu, ev, x3, line)),
                Some((fu0, ev0, x30, _)) => {
                    if *fu0 != fu || *ev0 != ev || *x30 != x3 {
                        return Err(JlcmError::Parse {
                            line,
                            message: format!("subject `{id}`: subject-level columns vary between rows"),
                        });
                    }
                }
            }
            visits.push(LongitudinalRecord {
                visit_time: t,
                response: y,
                x1: expand(&schema.x1, rec, line, t, &table, &coding)?,
                x2: expand(&schema.x2, rec, line, t, &table, &coding)?,
                z: crate::model::types::RandomEffectDesign { q: schema.q.max(1) }.row(t),
            });
        }
        visits.sort_by(|a, b| a.visit_time.total_cmp(&b.visit_time));
        let (fu, ev, x3, _) = surv.expect("group is non-empty");
        subjects.push(Subject { id, visits, survival: SurvivalRecord { followup_time: fu, event: ev, x3 } });
    }
    Dataset::new(subjects)
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let f = std::fs::File::open(path.as_ref())?;
    read_dataset(std::io::BufReader::new(f), schema)
}

/// Writes a dataset in the `simulate` layout: `id,time,y,followup,event`
/// followed by `x1_*`, `x2_*` and `x3_*` design columns.
///
/// Reading it back needs a schema naming those columns; see
/// [`Schema::for_written`].
pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let (d1, d2, d3) = (data.dim_x1(), data.dim_x2(), data.dim_x3());
    let mut header = vec!["id".to_string(), "time".into(), "y".into(), "followup".into(), "event".into()];
    header.extend((1..=d1).map(|c| format!("x1_{c}")));
    header.extend((1..=d2).map(|c| format!("x2_{c}")));
    header.extend((1..=d3).map(|c| format!("x3_{c}")));
    w.write_record(&header)?;
    for s in data.subjects() {
        for v in &s.visits {
            let mut rec = vec![
                s.id.clone(),
                v.visit_time.to_string(),
                v.response.to_string(),
                s.survival.followup_time.to_string(),
                (s.survival.event as u8).to_string(),
            ];
            rec.extend(v.x1.iter().chain(&v.x2).chain(&s.survival.x3).map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes simulated data in the [`Schema::simulation`] layout
/// (`id,time,y,followup,event,X1,X3`), taking `X1` and `X3` from the first
/// entries of the membership and survival design rows.
pub fn write_simulation_csv<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "time", "y", "followup", "event", "X1", "X3"])?;
    for s in data.subjects() {
        let x3 = s.survival.x3.first().copied().unwrap_or(0.0);
        for v in &s.visits {
            let x1 = v.x1.first().copied().unwrap_or(0.0);
            w.write_record([
                s.id.clone(),
                v.visit_time.to_string(),
                v.response.to_string(),
                s.survival.followup_time.to_string(),
                (s.survival.event as u8).to_string(),
                x1.to_string(),
                x3.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

impl Schema {
    /// Schema for files produced by [`write_dataset`].
    pub fn for_written(dim_x1: usize, dim_x2: usize, dim_x3: usize, q: usize) -> Self {
        let cols = |p: &str, n: usize| (1..=n).map(|c| Term::Column(format!("{p}_{c}"))).collect();
        Self {
            subject: "id".into(),
            response: "y".into(),
            visit_time: "time".into(),
            followup: "followup".into(),
            event: "event".into(),
            x1: cols("x1", dim_x1),
            x2: cols("x2", dim_x2),
            x3: cols("x3", dim_x3),
            q,
        }
    }
}
