//! Auto-annotation backends and self-defined dictionaries.
//!
//! Whatever a backend predicts is reduced to a `(surface, class)` dictionary
//! and folded into the registry; the matcher then re-derives every
//! occurrence. Manual and automatic annotations therefore share one
//! representation and can never overlap.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classes::is_builtin;
use crate::error::Error;
use crate::ids::InstanceId;
use crate::matcher::Dictionary;
use crate::model::Project;
use crate::Result;

/// Body of `POST /v1/annotate`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotateRequest {
    pub documents: Vec<DocumentInput>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentInput {
    pub doc_id: String,
    pub text: String,
}

/// Response of an annotator, also accepted verbatim from a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotateResponse {
    pub predictions: Vec<DocumentPredictions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentPredictions {
    pub doc_id: String,
    pub spans: Vec<SpanPrediction>,
}

/// A predicted entity span in scalar offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub start: usize,
    pub end: usize,
    pub label: String,
    #[serde(default)]
    pub score: Option<f64>,
}

impl AnnotateRequest {
    /// One entry per document, in document order.
    pub fn for_project(project: &Project) -> Self {
        AnnotateRequest {
            documents: project
                .documents()
                .map(|d| DocumentInput {
                    doc_id: d.id().to_string(),
                    text: d.text().into(),
                })
                .collect(),
        }
    }
}

/// Something that can turn documents into span predictions.
pub trait Backend {
    fn annotate(&self, request: &AnnotateRequest) -> Result<AnnotateResponse>;
}

/// Dictionary-only backend: predicts every leftmost-longest match of a
/// fixed lexicon.
#[derive(Debug, Clone)]
pub struct GazetteerBackend {
    labels: Vec<String>,
    dictionary: Dictionary<usize>,
}

impl GazetteerBackend {
    pub fn new<S: AsRef<str>, L: Into<String>>(entries: impl IntoIterator<Item = (S, L)>) -> Self {
        let mut labels = Vec::new();
        let mut surfaces = Vec::new();
        for (surface, label) in entries {
            surfaces.push((String::from(surface.as_ref()), labels.len()));
            labels.push(label.into());
        }
        GazetteerBackend {
            labels,
            dictionary: Dictionary::compile(surfaces),
        }
    }

    /// Lexicon equal to the project's current registry.
    pub fn from_project(project: &Project) -> Self {
        Self::new(
            project
                .instances()
                .map(|i| (i.surface.as_str(), i.class_label.clone())),
        )
    }
}

impl Backend for GazetteerBackend {
    fn annotate(&self, request: &AnnotateRequest) -> Result<AnnotateResponse> {
        let predictions = request
            .documents
            .iter()
            .map(|doc| DocumentPredictions {
                doc_id: doc.doc_id.clone(),
                spans: self
                    .dictionary
                    .annotate(&doc.text)
                    .into_iter()
                    .map(|hit| SpanPrediction {
                        start: hit.start,
                        end: hit.end,
                        label: self.labels[hit.value].clone(),
                        score: None,
                    })
                    .collect(),
            })
            .collect();
        Ok(AnnotateResponse { predictions })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AutoAnnotateSummary {
    pub spans_received: usize,
    pub classes_created: Vec<String>,
    pub instances_registered: usize,
    pub instances_reclassified: usize,
}

#[derive(Debug, Default)]
struct Ballot {
    /// Earliest `(doc order, start, sequence)` seen per label.
    first_seen: BTreeMap<String, (usize, usize, usize)>,
    votes: BTreeMap<String, usize>,
}

impl Ballot {
    /// Majority label; ties go to the tied label seen earliest.
    fn winner(&self) -> &str {
        let top = self.votes.values().copied().max().unwrap_or(0);
        self.votes
            .iter()
            .filter(|(_, &n)| n == top)
            .min_by_key(|(label, _)| self.first_seen[label.as_str()])
            .map(|(label, _)| label.as_str())
            .expect("a ballot holds at least one vote")
    }

    fn first(&self) -> (usize, usize, usize) {
        self.first_seen.values().copied().min().expect("non-empty ballot")
    }
}

impl Project {
    /// Calls the backend on every document and folds the result.
    pub fn run_auto_annotation(&mut self, backend: &dyn Backend) -> Result<AutoAnnotateSummary> {
        let response = backend.annotate(&AnnotateRequest::for_project(self))?;
        self.apply_predictions(&response)
    }

    /// Folds predictions into the registry, all or nothing.
    ///
    /// Each distinct surface gets the label predicted most often for it;
    /// ties resolve to the label of its earliest span (lowest document
    /// order, then lowest start). Unknown winning labels become new classes
    /// and new surfaces are registered in first-appearance order.
    pub fn apply_predictions(&mut self, response: &AnnotateResponse) -> Result<AutoAnnotateSummary> {
        let mut ballots: BTreeMap<String, Ballot> = BTreeMap::new();
        let mut spans_received = 0;
        let mut sequence = 0;
        for doc in &response.predictions {
            let document = self
                .document(&doc.doc_id)
                .map_err(|_| Error::BackendProtocol(format!("unknown doc_id `{}`", doc.doc_id)))?;
            // byte offset of every scalar boundary
            let boundaries: Vec<usize> = document
                .text()
                .char_indices()
                .map(|(b, _)| b)
                .chain(core::iter::once(document.text().len()))
                .collect();
            for span in &doc.spans {
                spans_received += 1;
                if span.start >= span.end || span.end > document.len() {
                    return Err(Error::OffsetOutOfRange {
                        doc: doc.doc_id.clone(),
                        start: span.start,
                        end: span.end,
                        len: document.len(),
                    });
                }
                if span.label.trim().is_empty() {
                    return Err(Error::BackendProtocol("empty span label".into()));
                }
                if let Some(score) = span.score {
                    if !(0.0..=1.0).contains(&score) {
                        return Err(Error::BackendProtocol(format!("score {score} outside [0, 1]")));
                    }
                }
                let surface = &document.text()[boundaries[span.start]..boundaries[span.end]];
                let ballot = ballots.entry(surface.into()).or_default();
                *ballot.votes.entry(span.label.clone()).or_insert(0) += 1;
                let key = (document.order_index(), span.start, sequence);
                ballot
                    .first_seen
                    .entry(span.label.clone())
                    .and_modify(|k| *k = (*k).min(key))
                    .or_insert(key);
                sequence += 1;
            }
        }

        let mut decided: Vec<(&str, &str, (usize, usize, usize))> = ballots
            .iter()
            .map(|(surface, ballot)| (surface.as_str(), ballot.winner(), ballot.first()))
            .collect();
        decided.sort_by_key(|&(_, _, first)| first);

        let mut summary = AutoAnnotateSummary {
            spans_received,
            ..Default::default()
        };
        for &(_, label, _) in &decided {
            if self.class(label).is_none() {
                self.create_class(label, "")?;
                summary.classes_created.push(label.into());
            }
        }
        for (surface, label, _) in decided {
            let previous = self.instance_by_surface(surface).map(|i| i.class_label.clone());
            let (_, created) = self.upsert_instance(surface, label)?;
            if created {
                summary.instances_registered += 1;
            } else if previous.as_deref() != Some(label) {
                summary.instances_reclassified += 1;
            }
        }
        self.reannotate_all();
        Ok(summary)
    }
}

/// Parsed self-defined class file: one row per class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DefinitionFile {
    pub rows: Vec<DefinitionRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefinitionRow {
    pub class_label: String,
    pub class_description: String,
    pub surfaces: Vec<String>,
}

impl DefinitionFile {
    pub fn instance_count(&self) -> usize {
        self.rows.iter().map(|r| r.surfaces.len()).sum()
    }
}

/// Splits an `Instance_List` cell on `,`, `，` and `、`, trimming each token
/// and dropping empty ones.
pub fn split_instance_list(cell: &str) -> Vec<String> {
    cell.split([',', '，', '、'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DefinitionSummary {
    pub classes_created: Vec<String>,
    pub classes_removed: Vec<String>,
    pub instances_registered: usize,
    pub instances_removed: usize,
}

impl Project {
    /// Applies a definition file to all documents.
    ///
    /// With `replace`, instances whose surface is not defined by the file are
    /// removed, as are custom classes the file does not mention; surviving
    /// surfaces keep their ids, so applying the same file twice is a no-op.
    /// A surface listed under several rows ends up in the last one.
    pub fn apply_definition(&mut self, def: &DefinitionFile, replace: bool) -> Result<DefinitionSummary> {
        let mut labels = BTreeSet::new();
        for row in &def.rows {
            if row.class_label.is_empty() {
                return Err(Error::EmptyLabel);
            }
            if row.surfaces.iter().any(|s| s.is_empty()) {
                return Err(Error::EmptySurface);
            }
            labels.insert(row.class_label.as_str());
        }

        let mut summary = DefinitionSummary::default();
        let mut changed = false;
        if replace {
            let defined: BTreeSet<&str> = def
                .rows
                .iter()
                .flat_map(|r| r.surfaces.iter().map(String::as_str))
                .collect();
            let doomed: Vec<InstanceId> = self
                .instances()
                .filter(|i| !defined.contains(i.surface.as_str()))
                .map(|i| i.id)
                .collect();
            for id in doomed {
                self.remove_instance_entry(id);
                summary.instances_removed += 1;
                changed = true;
            }
            let stale: Vec<String> = self
                .classes()
                .filter(|c| !is_builtin(&c.label) && !labels.contains(c.label.as_str()))
                .map(|c| c.label.clone())
                .collect();
            for label in stale {
                // no instance of it survives: every survivor is re-filed below
                self.classes.remove(&label);
                summary.classes_removed.push(label);
            }
        }

        for row in &def.rows {
            if self.class(&row.class_label).is_none() {
                self.create_class(&row.class_label, &row.class_description)?;
                summary.classes_created.push(row.class_label.clone());
            }
        }
        for row in &def.rows {
            for surface in &row.surfaces {
                let before = self.instance_by_surface(surface).map(|i| i.class_label.clone());
                let (_, created) = self.upsert_instance(surface, &row.class_label)?;
                if created {
                    summary.instances_registered += 1;
                }
                changed |= created || before.as_deref() != Some(row.class_label.as_str());
            }
        }
        if changed {
            self.reannotate_all();
        }
        Ok(summary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn journey_definition() -> DefinitionFile {
        let row = |label: &str, desc: &str, list: &str| DefinitionRow {
            class_label: label.into(),
            class_description: desc.into(),
            surfaces: split_instance_list(list),
        };
        DefinitionFile {
            rows: vec![
                row(
                    "PERSON",
                    "人物",
                    "三藏, 悟空, 行者, 大聖, 八戒, 沙僧, 白馬, 牛王, 牛魔王, 公主, 羅剎, 菩薩",
                ),
                row("WEAPON", "武器", "芭蕉扇, 金箍棒"),
                row("LOC", "地理區", "火焰山, 翠雲山, 崑崙山, 峨眉山, 芭蕉洞"),
            ],
        }
    }

    #[test]
    fn instance_list_splitting() {
        assert_eq!(split_instance_list("芭蕉扇, 金箍棒").len(), 2);
        assert_eq!(split_instance_list("火焰山，翠雲山、 崑崙山 ,, "), ["火焰山", "翠雲山", "崑崙山"]);
        assert!(split_instance_list("").is_empty());
        assert_eq!(split_instance_list("\u{3000}行者\u{3000}"), ["行者"]);
    }

    #[test]
    fn definition_replace_keeps_only_defined_entities() {
        let mut p = Project::new("p", "p");
        p.add_documents([("59", "行者借芭蕉扇於火焰山，一"), ("60", "牛魔王")], None).unwrap();
        p.register_instance("一", "CARDINAL").unwrap();
        p.create_class("JUNK", "").unwrap();
        let def = journey_definition();
        assert_eq!(def.instance_count(), 19);
        let summary = p.apply_definition(&def, true).unwrap();
        assert_eq!(summary.classes_created, ["WEAPON"]);
        assert_eq!(summary.classes_removed, ["JUNK"]);
        assert_eq!(summary.instances_registered, 19);
        assert_eq!(summary.instances_removed, 1);

        let populated: BTreeSet<&str> = p.instances().map(|i| i.class_label.as_str()).collect();
        assert_eq!(populated, BTreeSet::from(["LOC", "PERSON", "WEAPON"]));
        assert_eq!(p.instances().count(), 19);
        assert_eq!(p.frequencies("59").unwrap().len(), 3);

        let once = p.clone();
        let again = p.apply_definition(&def, true).unwrap();
        assert_eq!(again, DefinitionSummary::default());
        assert_eq!(p, once);
    }

    #[test]
    fn definition_without_replace_is_additive_and_reclassifies() {
        let mut p = Project::new("p", "p");
        p.add_document("a", "芭蕉扇").unwrap();
        let fan = p.register_instance("芭蕉扇", "PRODUCT").unwrap();
        let keep = p.register_instance("一", "CARDINAL").unwrap();
        p.apply_definition(&journey_definition(), false).unwrap();
        assert_eq!(p.instance(fan).unwrap().class_label, "WEAPON");
        assert!(p.instance(keep).is_some());
        let before = p.clone();
        p.apply_definition(&DefinitionFile::default(), false).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn empty_instance_list_defines_a_bare_class() {
        let mut p = Project::new("p", "p");
        let def = DefinitionFile {
            rows: vec![DefinitionRow {
                class_label: "WEAPON".into(),
                class_description: "武器".into(),
                surfaces: Vec::new(),
            }],
        };
        p.apply_definition(&def, false).unwrap();
        assert_eq!(p.class("WEAPON").unwrap().description, "武器");
        assert_eq!(p.instances().count(), 0);
    }

    #[test]
    fn gazetteer_of_current_registry_is_a_fixed_point() {
        let mut p = Project::new("p", "p");
        p.add_documents([("a", "包公審案，包公"), ("b", "十八包公")], None).unwrap();
        p.register_instance("包公", "PERSON").unwrap();
        p.register_instance("十八", "CARDINAL").unwrap();
        p.register_instance("無", "CARDINAL").unwrap();
        let before = p.clone();
        let backend = GazetteerBackend::from_project(&p);
        let summary = p.run_auto_annotation(&backend).unwrap();
        assert_eq!(summary.spans_received, 4);
        assert_eq!(summary.instances_registered, 0);
        assert_eq!(p, before);
    }

    fn response(doc: &str, spans: &[(usize, usize, &str)]) -> AnnotateResponse {
        AnnotateResponse {
            predictions: vec![DocumentPredictions {
                doc_id: doc.into(),
                spans: spans
                    .iter()
                    .map(|&(start, end, label)| SpanPrediction {
                        start,
                        end,
                        label: label.into(),
                        score: Some(0.9),
                    })
                    .collect(),
            }],
        }
    }

    #[test]
    fn majority_label_wins() {
        let mut p = Project::new("p", "p");
        p.add_document("a", "北京北京北京").unwrap();
        let r = response("a", &[(0, 2, "LOC"), (2, 4, "GPE"), (4, 6, "GPE")]);
        p.apply_predictions(&r).unwrap();
        assert_eq!(p.instance_by_surface("北京").unwrap().class_label, "GPE");
        assert_eq!(p.frequencies("a").unwrap().values().sum::<u64>(), 3);
    }

    #[test]
    fn ties_go_to_the_earliest_span() {
        let mut p = Project::new("p", "p");
        p.add_documents([("b", "北京"), ("a", "北京")], None).unwrap();
        let r = AnnotateResponse {
            predictions: vec![
                response("b", &[(0, 2, "LOC")]).predictions.remove(0),
                response("a", &[(0, 2, "GPE")]).predictions.remove(0),
            ],
        };
        p.apply_predictions(&r).unwrap();
        // "a" ranks before "b"
        assert_eq!(p.instance_by_surface("北京").unwrap().class_label, "GPE");
    }

    #[test]
    fn new_labels_become_classes_and_ids_follow_first_appearance() {
        let mut p = Project::new("p", "p");
        p.add_document("a", "德安府孝感縣有一秀才").unwrap();
        let r = response("a", &[(7, 8, "CARDINAL"), (3, 6, "GPE"), (0, 3, "PREFECTURE")]);
        let summary = p.apply_predictions(&r).unwrap();
        assert_eq!(summary.classes_created, ["PREFECTURE"]);
        assert_eq!(summary.instances_registered, 3);
        let order: Vec<&str> = p.instances().map(|i| i.surface.as_str()).collect();
        assert_eq!(order, ["德安府", "孝感縣", "一"]);
    }

    #[test]
    fn malformed_predictions_are_rejected_atomically() {
        let mut p = Project::new("p", "p");
        p.add_document("a", "包公").unwrap();
        let before = p.clone();
        let cases = [
            (response("a", &[(0, 2, "PERSON"), (1, 3, "PERSON")]), "OffsetOutOfRange"),
            (response("a", &[(1, 1, "PERSON")]), "OffsetOutOfRange"),
            (response("a", &[(0, 2, " ")]), "BackendProtocolError"),
            (response("zzz", &[(0, 1, "PERSON")]), "BackendProtocolError"),
        ];
        for (r, code) in cases {
            assert_eq!(p.apply_predictions(&r).unwrap_err().code(), code);
            assert_eq!(p, before);
        }
        let mut r = response("a", &[(0, 2, "PERSON")]);
        r.predictions[0].spans[0].score = Some(1.5);
        assert_eq!(p.apply_predictions(&r).unwrap_err().code(), "BackendProtocolError");
    }

    #[test]
    fn wire_format_matches_protocol() {
        let json = r#"{"predictions":[{"doc_id":"a","spans":[{"start":0,"end":2,"label":"PERSON","score":null}]}]}"#;
        let parsed: AnnotateResponse = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.predictions[0].spans[0].score, None);
        assert_eq!(serde_json::to_string(&parsed).unwrap(), json);
        let req = AnnotateRequest {
            documents: vec![DocumentInput { doc_id: "a".into(), text: "包公".into() }],
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"documents":[{"doc_id":"a","text":"包公"}]}"#
        );
    }
}
