//! Read-only views over a project: class overview, frequency tables,
//! position scatter data, cross-document series and display filtering.
//!
//! Nothing here mutates the project. All numbers derive from the stored
//! occurrences, so every view of the same state agrees.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::ids::{AliasId, GroupId, InstanceId};
use crate::model::Project;
use crate::Result;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    #[default]
    All,
    Instance,
    Class,
    Group,
    Alias,
}

impl FromStr for FilterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(FilterMode::All),
            "instance" => Ok(FilterMode::Instance),
            "class" => Ok(FilterMode::Class),
            "group" => Ok(FilterMode::Group),
            "alias" => Ok(FilterMode::Alias),
            other => Err(Error::InvalidFilter(format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for FilterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterMode::All => "all",
            FilterMode::Instance => "instance",
            FilterMode::Class => "class",
            FilterMode::Group => "group",
            FilterMode::Alias => "alias",
        })
    }
}

/// Restricts a view to instances, classes, groups or aliases.
///
/// `selected` holds instance ids, class labels, group ids or alias ids
/// depending on `mode`; it must be empty for [`FilterMode::All`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayFilter {
    pub mode: FilterMode,
    pub selected: Vec<String>,
    pub apply_alias: bool,
}

impl DisplayFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn new<S: Into<String>>(mode: FilterMode, selected: impl IntoIterator<Item = S>) -> Self {
        DisplayFilter {
            mode,
            selected: selected.into_iter().map(Into::into).collect(),
            apply_alias: false,
        }
    }

    pub fn with_apply_alias(mut self, apply_alias: bool) -> Self {
        self.apply_alias = apply_alias;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassCount {
    pub class_label: String,
    pub color_index: u32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AliasContext {
    pub alias_id: AliasId,
    pub name: String,
    pub frequency: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyRow {
    pub instance_id: InstanceId,
    pub surface: String,
    pub class_label: String,
    pub frequency: u64,
    /// `frequency`, or the alias total when alias totals are applied.
    pub display_frequency: u64,
    pub alias: Option<AliasContext>,
}

impl FrequencyRow {
    /// Sidebar text, e.g. `獻忠|Alias_許獻忠 (13|31次)`.
    pub fn sidebar_label(&self) -> String {
        match &self.alias {
            Some(a) => format!("{}|{} ({}|{}次)", self.surface, a.name, self.frequency, a.frequency),
            None => format!("{} ({}次)", self.surface, self.frequency),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PositionPoint {
    pub instance_id: InstanceId,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Positions {
    pub doc_id: String,
    pub doc_length: usize,
    pub points: Vec<PositionPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeriesPoint {
    pub doc_id: String,
    pub frequency: u64,
}

/// What a cross-document series follows. Aliases are per-document objects,
/// so they are matched by name in each document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeriesTarget {
    Instance(InstanceId),
    Alias(String),
}

impl FromStr for SeriesTarget {
    type Err = Error;

    /// Accepts `E3`, `instance:E3` or `alias:<name>`.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(name) = s.strip_prefix("alias:") {
            return Ok(SeriesTarget::Alias(name.into()));
        }
        let id = s.strip_prefix("instance:").unwrap_or(s);
        id.parse()
            .map(SeriesTarget::Instance)
            .map_err(|_| Error::UnknownTarget(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotatedSpan {
    pub start: usize,
    pub end: usize,
    pub instance_id: InstanceId,
    pub surface: String,
    pub class_label: String,
    pub color_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub text: String,
    pub length: usize,
    pub spans: Vec<AnnotatedSpan>,
}

impl Project {
    /// Instances passing `filter` in `doc_id`.
    pub fn resolve_filter(&self, doc_id: &str, filter: &DisplayFilter) -> Result<BTreeSet<InstanceId>> {
        let invalid = |what: &str, id: &str| Error::InvalidFilter(format!("unknown {what} `{id}`"));
        let mut out = BTreeSet::new();
        match filter.mode {
            FilterMode::All => {
                if !filter.selected.is_empty() {
                    return Err(Error::InvalidFilter("mode `all` takes no ids".into()));
                }
                self.document(doc_id)?;
                out.extend(self.instances().map(|i| i.id));
            }
            FilterMode::Instance => {
                self.document(doc_id)?;
                for raw in &filter.selected {
                    let id: InstanceId = raw.parse().map_err(|_| invalid("instance", raw))?;
                    self.instance(id).ok_or_else(|| invalid("instance", raw))?;
                    out.insert(id);
                }
            }
            FilterMode::Class => {
                self.document(doc_id)?;
                let mut labels = BTreeSet::new();
                for label in &filter.selected {
                    self.class(label).ok_or_else(|| invalid("class", label))?;
                    labels.insert(label.as_str());
                }
                out.extend(
                    self.instances()
                        .filter(|i| labels.contains(i.class_label.as_str()))
                        .map(|i| i.id),
                );
            }
            FilterMode::Group => {
                for raw in &filter.selected {
                    let id: GroupId = raw.parse().map_err(|_| invalid("group", raw))?;
                    let group = self.group(doc_id, id).map_err(|e| match e {
                        Error::UnknownGroup(_) => invalid("group", raw),
                        other => other,
                    })?;
                    out.extend(group.members.iter().copied());
                }
                self.document(doc_id)?;
            }
            FilterMode::Alias => {
                for raw in &filter.selected {
                    let id: AliasId = raw.parse().map_err(|_| invalid("alias", raw))?;
                    let alias = self.alias(doc_id, id).map_err(|e| match e {
                        Error::UnknownAlias(_) => invalid("alias", raw),
                        other => other,
                    })?;
                    out.extend(alias.members.iter().copied());
                }
                self.document(doc_id)?;
            }
        }
        Ok(out)
    }

    /// Number of distinct instances of each class occurring in the document,
    /// in palette order; classes with none are omitted.
    pub fn class_overview(&self, doc_id: &str) -> Result<Vec<ClassCount>> {
        let freqs = self.frequencies(doc_id)?;
        let mut per_class: BTreeMap<&str, usize> = BTreeMap::new();
        for id in freqs.keys() {
            let instance = self.instance(*id).expect("occurrences reference live instances");
            *per_class.entry(instance.class_label.as_str()).or_insert(0) += 1;
        }
        Ok(self
            .classes()
            .filter_map(|c| {
                per_class.get(c.label.as_str()).map(|&count| ClassCount {
                    class_label: c.label.clone(),
                    color_index: c.color_index,
                    count,
                })
            })
            .collect())
    }

    pub fn group_frequency(&self, doc_id: &str, id: GroupId) -> Result<u64> {
        let group = self.group(doc_id, id)?;
        let freqs = self.frequencies(doc_id)?;
        Ok(group.members.iter().map(|m| freqs.get(m).copied().unwrap_or(0)).sum())
    }

    pub fn alias_frequency(&self, doc_id: &str, id: AliasId) -> Result<u64> {
        let alias = self.alias(doc_id, id)?;
        let freqs = self.frequencies(doc_id)?;
        Ok(alias.members.iter().map(|m| freqs.get(m).copied().unwrap_or(0)).sum())
    }

    /// Rows for every filtered instance occurring in the document.
    ///
    /// Sorted by descending frequency (ties by id) or by registration order.
    /// Aliased instances carry their alias; with `apply_alias` their
    /// display frequency is the alias total.
    pub fn frequency_table(
        &self,
        doc_id: &str,
        filter: &DisplayFilter,
        sort_by_frequency: bool,
    ) -> Result<Vec<FrequencyRow>> {
        let selected = self.resolve_filter(doc_id, filter)?;
        let freqs = self.frequencies(doc_id)?;
        let mut alias_ctx: BTreeMap<InstanceId, AliasContext> = BTreeMap::new();
        for alias in self.aliases(doc_id)? {
            let total = alias.members.iter().map(|m| freqs.get(m).copied().unwrap_or(0)).sum();
            for m in &alias.members {
                alias_ctx.insert(
                    *m,
                    AliasContext {
                        alias_id: alias.id,
                        name: alias.name.clone(),
                        frequency: total,
                    },
                );
            }
        }
        let mut rows: Vec<FrequencyRow> = freqs
            .iter()
            .filter(|(id, _)| selected.contains(id))
            .map(|(&id, &frequency)| {
                let instance = self.instance(id).expect("occurrences reference live instances");
                let alias = alias_ctx.get(&id).cloned();
                let display_frequency = match (&alias, filter.apply_alias) {
                    (Some(a), true) => a.frequency,
                    _ => frequency,
                };
                FrequencyRow {
                    instance_id: id,
                    surface: instance.surface.clone(),
                    class_label: instance.class_label.clone(),
                    frequency,
                    display_frequency,
                    alias,
                }
            })
            .collect();
        if sort_by_frequency {
            rows.sort_by(|a, b| b.frequency.cmp(&a.frequency).then(a.instance_id.cmp(&b.instance_id)));
        }
        Ok(rows)
    }

    /// One point per occurrence of each filtered instance, by start offset.
    pub fn positions(&self, doc_id: &str, filter: &DisplayFilter) -> Result<Positions> {
        let selected = self.resolve_filter(doc_id, filter)?;
        let doc = self.document(doc_id)?;
        let points = self
            .occurrences(doc_id)?
            .iter()
            .filter(|o| selected.contains(&o.instance_id))
            .map(|o| PositionPoint {
                instance_id: o.instance_id,
                start: o.start,
            })
            .collect();
        Ok(Positions {
            doc_id: doc_id.into(),
            doc_length: doc.len(),
            points,
        })
    }

    /// Frequency of the target in every document, in document order.
    pub fn cross_doc_series(&self, target: &SeriesTarget) -> Result<Vec<SeriesPoint>> {
        if self.document_count() < 2 {
            return Err(Error::SingleDocumentProject);
        }
        match target {
            SeriesTarget::Instance(id) => {
                if self.instance(*id).is_none() {
                    return Err(Error::UnknownTarget(id.to_string()));
                }
            }
            SeriesTarget::Alias(name) => {
                let known = self
                    .documents()
                    .any(|d| self.aliases(d.id().as_str()).map_or(false, |mut a| a.any(|a| a.name == *name)));
                if !known {
                    return Err(Error::UnknownTarget(format!("alias:{name}")));
                }
            }
        }
        self.documents()
            .map(|doc| {
                let doc_id = doc.id().as_str();
                let frequency = match target {
                    SeriesTarget::Instance(id) => self.frequency(doc_id, *id)?,
                    SeriesTarget::Alias(name) => match self.aliases(doc_id)?.find(|a| a.name == *name) {
                        Some(alias) => self.alias_frequency(doc_id, alias.id)?,
                        None => 0,
                    },
                };
                Ok(SeriesPoint {
                    doc_id: doc_id.into(),
                    frequency,
                })
            })
            .collect()
    }

    /// Text plus the filtered spans, ready for highlighting.
    pub fn annotated_document(&self, doc_id: &str, filter: &DisplayFilter) -> Result<AnnotatedDocument> {
        let selected = self.resolve_filter(doc_id, filter)?;
        let doc = self.document(doc_id)?;
        let spans = self
            .occurrences(doc_id)?
            .iter()
            .filter(|o| selected.contains(&o.instance_id))
            .map(|o| {
                let instance = self.instance(o.instance_id).expect("live instance");
                let color_index = self.class(&instance.class_label).map_or(0, |c| c.color_index);
                AnnotatedSpan {
                    start: o.start,
                    end: o.end,
                    instance_id: o.instance_id,
                    surface: instance.surface.clone(),
                    class_label: instance.class_label.clone(),
                    color_index,
                }
            })
            .collect();
        Ok(AnnotatedDocument {
            doc_id: doc_id.into(),
            text: doc.text().into(),
            length: doc.len(),
            spans,
        })
    }
}
