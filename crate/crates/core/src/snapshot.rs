//! Serializable form of a [`Project`]. Occurrences are derived data and are
//! not part of it; [`Project::from_snapshot`] recomputes them.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::ids::DocId;
use crate::model::{Document, DocumentState, EntityAlias, EntityClass, EntityGroup, EntityInstance, Project};
use crate::Result;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectSnapshot {
    pub format_version: u32,
    pub project_id: String,
    pub name: String,
    pub counters: Counters,
    pub classes: Vec<EntityClass>,
    pub instances: Vec<EntityInstance>,
    pub documents: Vec<DocumentRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub next_instance: u32,
    pub next_color: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: DocId,
    pub name: String,
    pub text: String,
    pub next_group: u32,
    pub next_alias: u32,
    pub groups: Vec<EntityGroup>,
    pub aliases: Vec<EntityAlias>,
}

/// Only the version field, for failing closed before parsing the rest.
#[derive(Debug, Deserialize)]
pub struct VersionProbe {
    pub format_version: u32,
}

impl Project {
    pub fn snapshot(&self) -> ProjectSnapshot {
        ProjectSnapshot {
            format_version: FORMAT_VERSION,
            project_id: self.id.clone(),
            name: self.name.clone(),
            counters: Counters {
                next_instance: self.next_instance,
                next_color: self.next_color,
            },
            classes: self.classes().cloned().collect(),
            instances: self.instances.values().cloned().collect(),
            documents: self
                .documents()
                .map(|doc| {
                    let state = &self.docs[doc.id()];
                    DocumentRecord {
                        doc_id: doc.id().clone(),
                        name: doc.name().into(),
                        text: doc.text().into(),
                        next_group: state.next_group,
                        next_alias: state.next_alias,
                        groups: state.groups.values().cloned().collect(),
                        aliases: state.aliases.values().cloned().collect(),
                    }
                })
                .collect(),
        }
    }

    /// Rebuilds a project, rejecting unknown versions and any dangling or
    /// duplicated reference, then re-derives all occurrences.
    pub fn from_snapshot(snapshot: ProjectSnapshot) -> Result<Project> {
        if snapshot.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(snapshot.format_version));
        }
        let corrupt = |msg: &str| Error::CorruptSnapshot(msg.into());

        let mut classes = BTreeMap::new();
        for class in snapshot.classes {
            let label = class.label.clone();
            if classes.insert(label, class).is_some() {
                return Err(corrupt("duplicate class label"));
            }
        }
        let mut instances = BTreeMap::new();
        let mut by_surface = BTreeMap::new();
        for instance in snapshot.instances {
            if by_surface.insert(instance.surface.clone(), instance.id).is_some() {
                return Err(corrupt("duplicate instance surface"));
            }
            if instances.insert(instance.id, instance).is_some() {
                return Err(corrupt("duplicate instance id"));
            }
        }
        let mut docs = BTreeMap::new();
        for record in snapshot.documents {
            if record.doc_id.as_str().is_empty() {
                return Err(corrupt("empty document id"));
            }
            let mut groups = BTreeMap::new();
            for group in record.groups {
                if groups.insert(group.id, group).is_some() {
                    return Err(corrupt("duplicate group id"));
                }
            }
            let mut aliases = BTreeMap::new();
            for alias in record.aliases {
                if aliases.insert(alias.id, alias).is_some() {
                    return Err(corrupt("duplicate alias id"));
                }
            }
            let document = Document::restore(record.doc_id.clone(), record.name, record.text);
            let state = DocumentState {
                document,
                groups,
                aliases,
                next_group: record.next_group,
                next_alias: record.next_alias,
                occurrences: Vec::new(),
            };
            if docs.insert(record.doc_id, state).is_some() {
                return Err(corrupt("duplicate document id"));
            }
        }

        let mut project = Project {
            id: snapshot.project_id,
            name: snapshot.name,
            docs,
            classes,
            instances,
            by_surface,
            next_instance: snapshot.counters.next_instance,
            next_color: snapshot.counters.next_color,
        };
        project.check_integrity()?;
        project.reindex_documents();
        project.reannotate_all();
        Ok(project)
    }
}
