use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classes::BUILTIN_CLASSES;
use crate::error::Error;
use crate::ids::{AliasId, DocId, GroupId, InstanceId};
use crate::matcher::Dictionary;
use crate::Result;

/// Number of distinct highlight colours; `color_index` wraps around it.
pub const PALETTE_SIZE: u32 = 20;

/// Document id used for text pasted into the workbench instead of uploaded.
pub const PASTED_TEXT_ID: &str = "pasted-text";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    id: DocId,
    name: String,
    text: String,
    char_len: usize,
    order_index: usize,
}

impl Document {
    pub(crate) fn restore(id: DocId, name: String, text: String) -> Self {
        Document {
            id,
            name,
            char_len: text.chars().count(),
            text,
            order_index: 0,
        }
    }

    pub fn id(&self) -> &DocId {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Length in Unicode scalar values.
    pub fn len(&self) -> usize {
        self.char_len
    }

    pub fn is_empty(&self) -> bool {
        self.char_len == 0
    }

    /// Rank of this document when all names are sorted bytewise.
    pub fn order_index(&self) -> usize {
        self.order_index
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityClass {
    pub label: String,
    pub description: String,
    pub color_index: u32,
    pub builtin: bool,
}

impl EntityClass {
    pub fn palette_slot(&self) -> u32 {
        self.color_index % PALETTE_SIZE
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityInstance {
    pub id: InstanceId,
    pub surface: String,
    pub class_label: String,
}

/// One annotated span; `start..end` are scalar offsets into the document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Occurrence {
    pub instance_id: InstanceId,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityGroup {
    pub id: GroupId,
    pub name: String,
    pub members: Vec<InstanceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityAlias {
    pub id: AliasId,
    pub name: String,
    pub class_label: String,
    pub members: Vec<InstanceId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct DocumentState {
    pub(crate) document: Document,
    pub(crate) groups: BTreeMap<GroupId, EntityGroup>,
    pub(crate) aliases: BTreeMap<AliasId, EntityAlias>,
    pub(crate) next_group: u32,
    pub(crate) next_alias: u32,
    pub(crate) occurrences: Vec<Occurrence>,
}

/// A whole annotation session.
///
/// Instances and classes are global: every change to them re-derives the
/// occurrences of every document. Groups and aliases belong to exactly one
/// document and never affect any other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Project {
    pub(crate) id: String,
    pub(crate) name: String,
    pub(crate) docs: BTreeMap<DocId, DocumentState>,
    pub(crate) classes: BTreeMap<String, EntityClass>,
    pub(crate) instances: BTreeMap<InstanceId, EntityInstance>,
    pub(crate) by_surface: BTreeMap<String, InstanceId>,
    pub(crate) next_instance: u32,
    pub(crate) next_color: u32,
}

fn dedup_members(members: &[InstanceId]) -> Vec<InstanceId> {
    let mut seen = BTreeSet::new();
    members.iter().copied().filter(|m| seen.insert(*m)).collect()
}

impl Project {
    /// An empty project holding the builtin entity classes.
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        let mut project = Project {
            id: id.into(),
            name: name.into(),
            docs: BTreeMap::new(),
            classes: BTreeMap::new(),
            instances: BTreeMap::new(),
            by_surface: BTreeMap::new(),
            next_instance: 0,
            next_color: 0,
        };
        for (label, description) in BUILTIN_CLASSES {
            project.insert_class(label, description, true);
        }
        project
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    // ---- documents ----

    pub fn document_count(&self) -> usize {
        self.docs.len()
    }

    /// Documents in `order_index` order.
    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        let mut docs: Vec<&Document> = self.docs.values().map(|s| &s.document).collect();
        docs.sort_by_key(|d| d.order_index);
        docs.into_iter()
    }

    pub fn document(&self, doc_id: &str) -> Result<&Document> {
        self.doc_state(doc_id).map(|s| &s.document)
    }

    pub(crate) fn doc_state(&self, doc_id: &str) -> Result<&DocumentState> {
        self.docs
            .get(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.into()))
    }

    fn doc_state_mut(&mut self, doc_id: &str) -> Result<&mut DocumentState> {
        self.docs
            .get_mut(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.into()))
    }

    /// Adds documents keyed by name, all or nothing. `limit` of `None` or
    /// `Some(0)` means unlimited.
    pub fn add_documents<N, T, I>(&mut self, documents: I, limit: Option<usize>) -> Result<Vec<DocId>>
    where
        N: Into<String>,
        T: Into<String>,
        I: IntoIterator<Item = (N, T)>,
    {
        let incoming: Vec<(String, String)> = documents
            .into_iter()
            .map(|(n, t)| (n.into(), t.into()))
            .collect();
        let mut names = BTreeSet::new();
        for (name, _) in &incoming {
            if name.is_empty() {
                return Err(Error::EmptyName);
            }
            if self.docs.contains_key(name.as_str()) || !names.insert(name.as_str()) {
                return Err(Error::DuplicateDocumentName(name.clone()));
            }
        }
        if let Some(limit) = limit.filter(|&l| l > 0) {
            if self.docs.len() + incoming.len() > limit {
                return Err(Error::TooManyDocuments { limit });
            }
        }
        if incoming.is_empty() {
            return Ok(Vec::new());
        }

        let dict = self.compile_dictionary();
        let mut ids = Vec::with_capacity(incoming.len());
        for (name, text) in incoming {
            let id = DocId(name.clone());
            let occurrences = annotate_with(&dict, &text);
            let document = Document::restore(id.clone(), name, text);
            self.docs.insert(
                id.clone(),
                DocumentState {
                    document,
                    groups: BTreeMap::new(),
                    aliases: BTreeMap::new(),
                    next_group: 0,
                    next_alias: 0,
                    occurrences,
                },
            );
            ids.push(id);
        }
        self.reindex_documents();
        Ok(ids)
    }

    pub fn add_document(&mut self, name: impl Into<String>, text: impl Into<String>) -> Result<DocId> {
        let mut ids = self.add_documents([(name.into(), text.into())], None)?;
        Ok(ids.remove(0))
    }

    pub(crate) fn reindex_documents(&mut self) {
        let mut order: Vec<(String, DocId)> = self
            .docs
            .values()
            .map(|s| (s.document.name.clone(), s.document.id.clone()))
            .collect();
        order.sort();
        for (rank, (_, id)) in order.into_iter().enumerate() {
            if let Some(state) = self.docs.get_mut(&id) {
                state.document.order_index = rank;
            }
        }
    }

    // ---- classes ----

    /// Classes in creation (palette) order.
    pub fn classes(&self) -> impl Iterator<Item = &EntityClass> {
        let mut classes: Vec<&EntityClass> = self.classes.values().collect();
        classes.sort_by_key(|c| c.color_index);
        classes.into_iter()
    }

    pub fn class(&self, label: &str) -> Option<&EntityClass> {
        self.classes.get(label)
    }

    fn insert_class(&mut self, label: &str, description: &str, builtin: bool) -> &EntityClass {
        let class = EntityClass {
            label: label.into(),
            description: description.into(),
            color_index: self.next_color,
            builtin,
        };
        self.next_color += 1;
        self.classes.entry(label.into()).or_insert(class)
    }

    pub fn create_class(&mut self, label: &str, description: &str) -> Result<EntityClass> {
        if label.is_empty() {
            return Err(Error::EmptyLabel);
        }
        if self.classes.contains_key(label) {
            return Err(Error::DuplicateClass(label.into()));
        }
        Ok(self.insert_class(label, description, false).clone())
    }

    /// Removes the class together with every instance of it, in all
    /// documents.
    pub fn delete_class(&mut self, label: &str) -> Result<()> {
        if self.classes.remove(label).is_none() {
            return Err(Error::UnknownClass(label.into()));
        }
        let doomed: Vec<InstanceId> = self
            .instances
            .values()
            .filter(|i| i.class_label == label)
            .map(|i| i.id)
            .collect();
        for id in &doomed {
            self.remove_instance_entry(*id);
        }
        if !doomed.is_empty() {
            self.reannotate_all();
        }
        Ok(())
    }

    // ---- instances ----

    /// Instances in registration (`E`-id) order.
    pub fn instances(&self) -> impl Iterator<Item = &EntityInstance> {
        self.instances.values()
    }

    pub fn instance(&self, id: InstanceId) -> Option<&EntityInstance> {
        self.instances.get(&id)
    }

    pub fn instance_by_surface(&self, surface: &str) -> Option<&EntityInstance> {
        self.by_surface.get(surface).and_then(|id| self.instances.get(id))
    }

    /// Adds `surface` under `class_label`, or moves an existing surface to
    /// that class, then re-annotates every document.
    pub fn register_instance(&mut self, surface: &str, class_label: &str) -> Result<InstanceId> {
        let id = self.upsert_instance(surface, class_label)?.0;
        self.reannotate_all();
        Ok(id)
    }

    /// Registry update without re-annotation. Returns the id and whether
    /// the instance is new.
    pub(crate) fn upsert_instance(&mut self, surface: &str, class_label: &str) -> Result<(InstanceId, bool)> {
        if surface.is_empty() {
            return Err(Error::EmptySurface);
        }
        if !self.classes.contains_key(class_label) {
            return Err(Error::UnknownClass(class_label.into()));
        }
        if let Some(&id) = self.by_surface.get(surface) {
            let instance = self.instances.get_mut(&id).expect("surface index is consistent");
            if instance.class_label != class_label {
                instance.class_label = class_label.into();
                // an alias holds a single class; a reclassified member leaves it
                for state in self.docs.values_mut() {
                    for alias in state.aliases.values_mut() {
                        if alias.class_label != class_label {
                            alias.members.retain(|m| *m != id);
                        }
                    }
                }
            }
            return Ok((id, false));
        }
        let id = InstanceId(self.next_instance);
        self.next_instance += 1;
        self.instances.insert(
            id,
            EntityInstance {
                id,
                surface: surface.into(),
                class_label: class_label.into(),
            },
        );
        self.by_surface.insert(surface.into(), id);
        Ok((id, true))
    }

    pub fn delete_instance(&mut self, id: InstanceId) -> Result<()> {
        if !self.instances.contains_key(&id) {
            return Err(Error::UnknownInstance(id.to_string()));
        }
        self.remove_instance_entry(id);
        self.reannotate_all();
        Ok(())
    }

    /// Drops the instance and its group/alias memberships; empty groups and
    /// aliases stay.
    pub(crate) fn remove_instance_entry(&mut self, id: InstanceId) {
        if let Some(instance) = self.instances.remove(&id) {
            self.by_surface.remove(&instance.surface);
        }
        for state in self.docs.values_mut() {
            for group in state.groups.values_mut() {
                group.members.retain(|m| *m != id);
            }
            for alias in state.aliases.values_mut() {
                alias.members.retain(|m| *m != id);
            }
        }
    }

    // ---- occurrences ----

    pub(crate) fn compile_dictionary(&self) -> Dictionary<InstanceId> {
        Dictionary::compile(self.instances.values().map(|i| (i.surface.as_str(), i.id)))
    }

    /// Recomputes every document's occurrences from the current registry.
    pub fn reannotate_all(&mut self) {
        let dict = self.compile_dictionary();
        for state in self.docs.values_mut() {
            state.occurrences = annotate_with(&dict, &state.document.text);
        }
    }

    pub fn occurrences(&self, doc_id: &str) -> Result<&[Occurrence]> {
        self.doc_state(doc_id).map(|s| s.occurrences.as_slice())
    }

    /// Occurrence count per instance in one document; instances that do not
    /// occur are absent.
    pub fn frequencies(&self, doc_id: &str) -> Result<BTreeMap<InstanceId, u64>> {
        let mut counts = BTreeMap::new();
        for occ in self.occurrences(doc_id)? {
            *counts.entry(occ.instance_id).or_insert(0) += 1;
        }
        Ok(counts)
    }

    pub fn frequency(&self, doc_id: &str, id: InstanceId) -> Result<u64> {
        Ok(self
            .occurrences(doc_id)?
            .iter()
            .filter(|o| o.instance_id == id)
            .count() as u64)
    }

    // ---- groups ----

    pub fn groups(&self, doc_id: &str) -> Result<impl Iterator<Item = &EntityGroup>> {
        Ok(self.doc_state(doc_id)?.groups.values())
    }

    pub fn group(&self, doc_id: &str, id: GroupId) -> Result<&EntityGroup> {
        self.doc_state(doc_id)?
            .groups
            .get(&id)
            .ok_or_else(|| Error::UnknownGroup(id.to_string()))
    }

    fn check_members(&self, members: &[InstanceId]) -> Result<Vec<InstanceId>> {
        for m in members {
            if !self.instances.contains_key(m) {
                return Err(Error::UnknownMember(m.to_string()));
            }
        }
        Ok(dedup_members(members))
    }

    pub fn create_group(&mut self, doc_id: &str, name: &str, members: &[InstanceId]) -> Result<GroupId> {
        let state = self.doc_state(doc_id)?;
        if name.is_empty() {
            return Err(Error::EmptyName);
        }
        if state.groups.values().any(|g| g.name == name) {
            return Err(Error::DuplicateName(name.into()));
        }
        let members = self.check_members(members)?;
        let state = self.doc_state_mut(doc_id)?;
        let id = GroupId(state.next_group);
        state.next_group += 1;
        state.groups.insert(
            id,
            EntityGroup {
                id,
                name: name.into(),
                members,
            },
        );
        Ok(id)
    }

    pub fn set_group_members(&mut self, doc_id: &str, id: GroupId, members: &[InstanceId]) -> Result<()> {
        self.group(doc_id, id)?;
        let members = self.check_members(members)?;
        let state = self.doc_state_mut(doc_id)?;
        state.groups.get_mut(&id).expect("checked above").members = members;
        Ok(())
    }

    pub fn delete_group(&mut self, doc_id: &str, id: GroupId) -> Result<()> {
        self.doc_state_mut(doc_id)?
            .groups
            .remove(&id)
            .map(|_| ())
            .ok_or_else(|| Error::UnknownGroup(id.to_string()))
    }

    // ---- aliases ----

    pub fn aliases(&self, doc_id: &str) -> Result<impl Iterator<Item = &EntityAlias>> {
        Ok(self.doc_state(doc_id)?.aliases.values())
    }

    pub fn alias(&self, doc_id: &str, id: AliasId) -> Result<&EntityAlias> {
        self.doc_state(doc_id)?
            .aliases
            .get(&id)
            .ok_or_else(|| Error::UnknownAlias(id.to_string()))
    }

    /// The alias of `doc_id` containing `instance`, if any.
    pub fn alias_of(&self, doc_id: &str, instance: InstanceId) -> Result<Option<&EntityAlias>> {
        Ok(self
            .doc_state(doc_id)?
            .aliases
            .values()
            .find(|a| a.members.contains(&instance)))
    }

    /// Validates an alias membership and returns `(members, class)`.
    fn check_alias(
        &self,
        doc_id: &str,
        skip: Option<AliasId>,
        members: &[InstanceId],
        fallback_class: Option<&str>,
    ) -> Result<(Vec<InstanceId>, String)> {
        let members = self.check_members(members)?;
        let mut class: Option<&str> = fallback_class;
        let mut from_members: Option<&str> = None;
        for m in &members {
            let label = self.instances[m].class_label.as_str();
            match from_members {
                None => from_members = Some(label),
                Some(first) if first != label => {
                    return Err(Error::MixedClasses(first.into(), label.into()))
                }
                Some(_) => {}
            }
        }
        if let Some(label) = from_members {
            if let Some(requested) = class.filter(|c| *c != label) {
                return Err(Error::MixedClasses(requested.into(), label.into()));
            }
            class = Some(label);
        }
        let class = class.ok_or(Error::AliasClassUndetermined)?;
        if !self.classes.contains_key(class) {
            return Err(Error::UnknownClass(class.into()));
        }
        let state = self.doc_state(doc_id)?;
        for m in &members {
            if let Some(other) = state
                .aliases
                .values()
                .find(|a| Some(a.id) != skip && a.members.contains(m))
            {
                return Err(Error::MemberAlreadyAliased {
                    instance: *m,
                    alias: other.id,
                });
            }
        }
        Ok((members, class.into()))
    }

    /// Creates an alias over same-class members. The class comes from the
    /// members; `class_label` is only needed when `members` is empty and
    /// must agree with them otherwise.
    pub fn create_alias(
        &mut self,
        doc_id: &str,
        name: &str,
        members: &[InstanceId],
        class_label: Option<&str>,
    ) -> Result<AliasId> {
        let state = self.doc_state(doc_id)?;
        if name.is_empty() {
            return Err(Error::EmptyName);
        }
        if state.aliases.values().any(|a| a.name == name) {
            return Err(Error::DuplicateName(name.into()));
        }
        let (members, class_label) = self.check_alias(doc_id, None, members, class_label)?;
        let state = self.doc_state_mut(doc_id)?;
        let id = AliasId(state.next_alias);
        state.next_alias += 1;
        state.aliases.insert(
            id,
            EntityAlias {
                id,
                name: name.into(),
                class_label,
                members,
            },
        );
        Ok(id)
    }

    /// Replaces the members; a non-empty list re-derives the alias class.
    pub fn set_alias_members(&mut self, doc_id: &str, id: AliasId, members: &[InstanceId]) -> Result<()> {
        let current = self.alias(doc_id, id)?.class_label.clone();
        let fallback = if members.is_empty() { Some(current.as_str()) } else { None };
        let (members, class_label) = self.check_alias(doc_id, Some(id), members, fallback)?;
        let alias = self
            .doc_state_mut(doc_id)?
            .aliases
            .get_mut(&id)
            .expect("checked above");
        alias.members = members;
        alias.class_label = class_label;
        Ok(())
    }

    pub fn delete_alias(&mut self, doc_id: &str, id: AliasId) -> Result<()> {
        self.doc_state_mut(doc_id)?
            .aliases
            .remove(&id)
            .map(|_| ())
            .ok_or_else(|| Error::UnknownAlias(id.to_string()))
    }

    /// Full-scan consistency check of every cross reference.
    pub fn check_integrity(&self) -> Result<()> {
        let corrupt = |msg: String| Err(Error::CorruptSnapshot(msg));
        if self.by_surface.len() != self.instances.len() {
            return corrupt("surface index out of sync".into());
        }
        for (id, instance) in &self.instances {
            if *id != instance.id || id.0 >= self.next_instance {
                return corrupt(alloc::format!("instance {id} has an invalid id"));
            }
            if instance.surface.is_empty() {
                return corrupt(alloc::format!("instance {id} has an empty surface"));
            }
            if self.by_surface.get(&instance.surface) != Some(id) {
                return corrupt(alloc::format!("surface `{}` is registered twice", instance.surface));
            }
            if !self.classes.contains_key(&instance.class_label) {
                return corrupt(alloc::format!(
                    "instance {id} references missing class `{}`",
                    instance.class_label
                ));
            }
        }
        let mut colors = BTreeSet::new();
        for (label, class) in &self.classes {
            if label.is_empty() || *label != class.label {
                return corrupt(alloc::format!("class `{label}` is malformed"));
            }
            if class.color_index >= self.next_color || !colors.insert(class.color_index) {
                return corrupt(alloc::format!("class `{label}` has an invalid color index"));
            }
        }
        for (doc_id, state) in &self.docs {
            if *doc_id != state.document.id {
                return corrupt(alloc::format!("document `{doc_id}` is keyed inconsistently"));
            }
            let mut names = BTreeSet::new();
            for (gid, group) in &state.groups {
                if *gid != group.id || gid.0 >= state.next_group {
                    return corrupt(alloc::format!("group {gid} in `{doc_id}` has an invalid id"));
                }
                if group.name.is_empty() || !names.insert(group.name.as_str()) {
                    return corrupt(alloc::format!("group name `{}` in `{doc_id}` is invalid", group.name));
                }
                self.check_member_list(doc_id, &group.members)?;
            }
            let mut names = BTreeSet::new();
            let mut aliased = BTreeSet::new();
            for (aid, alias) in &state.aliases {
                if *aid != alias.id || aid.0 >= state.next_alias {
                    return corrupt(alloc::format!("alias {aid} in `{doc_id}` has an invalid id"));
                }
                if alias.name.is_empty() || !names.insert(alias.name.as_str()) {
                    return corrupt(alloc::format!("alias name `{}` in `{doc_id}` is invalid", alias.name));
                }
                if !self.classes.contains_key(&alias.class_label) {
                    return corrupt(alloc::format!("alias {aid} references missing class"));
                }
                self.check_member_list(doc_id, &alias.members)?;
                for m in &alias.members {
                    if self.instances[m].class_label != alias.class_label {
                        return corrupt(alloc::format!("alias {aid} in `{doc_id}` mixes classes"));
                    }
                    if !aliased.insert(*m) {
                        return corrupt(alloc::format!("{m} is in two aliases of `{doc_id}`"));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_member_list(&self, doc_id: &DocId, members: &[InstanceId]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for m in members {
            if !self.instances.contains_key(m) {
                return Err(Error::CorruptSnapshot(alloc::format!(
                    "`{doc_id}` references missing instance {m}"
                )));
            }
            if !seen.insert(*m) {
                return Err(Error::CorruptSnapshot(alloc::format!(
                    "`{doc_id}` lists {m} twice in one collection"
                )));
            }
        }
        Ok(())
    }
}

fn annotate_with(dict: &Dictionary<InstanceId>, text: &str) -> Vec<Occurrence> {
    dict.annotate(text)
        .into_iter()
        .map(|hit| Occurrence {
            instance_id: hit.value,
            start: hit.start,
            end: hit.end,
        })
        .collect()
}
