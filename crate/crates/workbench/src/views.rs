//! JSON payloads for annotations and charts. The HTTP service and the CLI
//! both render through here.

use std::str::FromStr;

use ner_workbench_core::analytics::{DisplayFilter, FilterMode, SeriesTarget};
use ner_workbench_core::{Project, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Overview,
    Frequency,
    Positions,
}

impl FromStr for Chart {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "overview" => Ok(Chart::Overview),
            "frequency" => Ok(Chart::Frequency),
            "positions" => Ok(Chart::Positions),
            other => Err(format!("unknown chart `{other}`")),
        }
    }
}

/// `ids` is comma separated; blanks are ignored.
pub fn parse_filter(mode: Option<&str>, ids: Option<&str>, apply_alias: bool) -> Result<DisplayFilter> {
    let mode = match mode {
        Some(m) if !m.is_empty() => m.parse()?,
        _ => FilterMode::All,
    };
    let ids = ids
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from);
    Ok(DisplayFilter::new(mode, ids).with_apply_alias(apply_alias))
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("payload serializes")
}

pub fn chart(project: &Project, doc_id: &str, chart: Chart, filter: &DisplayFilter, sort: bool) -> Result<Vec<u8>> {
    project.resolve_filter(doc_id, filter)?;
    Ok(match chart {
        Chart::Overview => to_json(&project.class_overview(doc_id)?),
        Chart::Frequency => to_json(&project.frequency_table(doc_id, filter, sort)?),
        Chart::Positions => to_json(&project.positions(doc_id, filter)?),
    })
}

pub fn series(project: &Project, target: &str) -> Result<Vec<u8>> {
    Ok(to_json(&project.cross_doc_series(&target.parse::<SeriesTarget>()?)?))
}

pub fn annotations(project: &Project, doc_id: &str, filter: &DisplayFilter) -> Result<Vec<u8>> {
    Ok(to_json(&project.annotated_document(doc_id, filter)?))
}
