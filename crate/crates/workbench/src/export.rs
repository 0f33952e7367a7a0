//! Per-document export bundle: `Entity.csv`, `Alias.csv` and `Group.csv`,
//! packed as `data.zip`, and the reverse import.
//!
//! Output is UTF-8 without BOM, LF line endings, and fields are quoted only
//! when they contain a delimiter, a quote or a line break. List cells use
//! [`crate::listcell`].

use std::collections::BTreeMap;
use std::io::{Cursor, Read, Write};

use ner_workbench_core::snapshot::{DocumentRecord, ProjectSnapshot};
use ner_workbench_core::{AliasId, DocId, EntityAlias, EntityClass, EntityGroup, EntityInstance, GroupId, InstanceId, Project};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use crate::listcell::{format_list, parse_list};

pub const ENTITY_FILE: &str = "Entity.csv";
pub const ALIAS_FILE: &str = "Alias.csv";
pub const GROUP_FILE: &str = "Group.csv";
pub const ARCHIVE_NAME: &str = "data.zip";

pub const ENTITY_HEADER: [&str; 6] = ["ID_E", "Entity", "EntityClass", "Frequency", "Relations", "Relation_Name"];
pub const ALIAS_HEADER: [&str; 6] = ["ID_A", "AliasName", "AliasClass", "AliasFrequency", "AliasMembers", "AliasMembers_Name"];
pub const GROUP_HEADER: [&str; 5] = ["ID_G", "GroupName", "GroupFrequency", "GroupMembers", "GroupMembers_Name"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportBundle {
    pub doc_id: String,
    pub entity_csv: Vec<u8>,
    pub alias_csv: Vec<u8>,
    pub group_csv: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImportError {
    #[error("malformed export: {0}")]
    MalformedCsv(String),
    #[error("{id}: recorded frequency {recorded} but the text yields {recomputed}")]
    FrequencyMismatch { id: String, recorded: u64, recomputed: u64 },
}

impl ImportError {
    pub fn code(&self) -> &'static str {
        match self {
            ImportError::MalformedCsv(_) => "MalformedCsv",
            ImportError::FrequencyMismatch { .. } => "FrequencyMismatch",
        }
    }
}

fn malformed(msg: impl Into<String>) -> ImportError {
    ImportError::MalformedCsv(msg.into())
}

fn csv_bytes<const N: usize>(header: [&str; N], rows: Vec<[String; N]>) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    writer.write_record(header).expect("write to Vec");
    for row in rows {
        writer.write_record(&row).expect("write to Vec");
    }
    writer.into_inner().expect("flush to Vec")
}

fn surfaces(project: &Project, members: &[InstanceId]) -> Vec<String> {
    members
        .iter()
        .map(|id| project.instance(*id).map(|i| i.surface.clone()).unwrap_or_default())
        .collect()
}

/// Builds the bundle for one document. Every registered instance gets a
/// row, including those that never occur in this document.
pub fn export_document(project: &Project, doc_id: &str) -> ner_workbench_core::Result<ExportBundle> {
    let freqs = project.frequencies(doc_id)?;
    let groups: Vec<&EntityGroup> = project.groups(doc_id)?.collect();
    let aliases: Vec<&EntityAlias> = project.aliases(doc_id)?.collect();

    let entity_rows = project
        .instances()
        .map(|inst| {
            let mut ids = Vec::new();
            let mut names = Vec::new();
            for g in groups.iter().filter(|g| g.members.contains(&inst.id)) {
                ids.push(g.id.to_string());
                names.push(g.name.clone());
            }
            for a in aliases.iter().filter(|a| a.members.contains(&inst.id)) {
                ids.push(a.id.to_string());
                names.push(a.name.clone());
            }
            [
                inst.id.to_string(),
                inst.surface.clone(),
                inst.class_label.clone(),
                freqs.get(&inst.id).copied().unwrap_or(0).to_string(),
                format_list(&ids),
                format_list(&names),
            ]
        })
        .collect();

    let mut alias_rows = Vec::new();
    for a in &aliases {
        alias_rows.push([
            a.id.to_string(),
            a.name.clone(),
            a.class_label.clone(),
            project.alias_frequency(doc_id, a.id)?.to_string(),
            format_list(a.members.iter().map(ToString::to_string)),
            format_list(surfaces(project, &a.members)),
        ]);
    }
    let mut group_rows = Vec::new();
    for g in &groups {
        group_rows.push([
            g.id.to_string(),
            g.name.clone(),
            project.group_frequency(doc_id, g.id)?.to_string(),
            format_list(g.members.iter().map(ToString::to_string)),
            format_list(surfaces(project, &g.members)),
        ]);
    }

    Ok(ExportBundle {
        doc_id: doc_id.into(),
        entity_csv: csv_bytes(ENTITY_HEADER, entity_rows),
        alias_csv: csv_bytes(ALIAS_HEADER, alias_rows),
        group_csv: csv_bytes(GROUP_HEADER, group_rows),
    })
}

impl ExportBundle {
    /// Zip with the three CSVs in a fixed order and fixed timestamps, so equal
    /// bundles give equal archives.
    pub fn to_zip(&self) -> Vec<u8> {
        let options = SimpleFileOptions::default()
            .compression_method(CompressionMethod::Deflated)
            .last_modified_time(DateTime::default())
            .unix_permissions(0o644);
        let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
        for (name, bytes) in self.files() {
            zip.start_file(name, options).expect("zip to memory");
            zip.write_all(bytes).expect("zip to memory");
        }
        zip.finish().expect("zip to memory").into_inner()
    }

    pub fn files(&self) -> [(&'static str, &[u8]); 3] {
        [
            (ENTITY_FILE, &self.entity_csv),
            (ALIAS_FILE, &self.alias_csv),
            (GROUP_FILE, &self.group_csv),
        ]
    }

    pub fn from_zip(doc_id: impl Into<String>, bytes: &[u8]) -> Result<Self, ImportError> {
        let mut archive = ZipArchive::new(Cursor::new(bytes)).map_err(|e| malformed(format!("archive: {e}")))?;
        if archive.len() != 3 {
            return Err(malformed(format!("archive holds {} files, expected 3", archive.len())));
        }
        let mut read = |name: &str| -> Result<Vec<u8>, ImportError> {
            let mut file = archive.by_name(name).map_err(|_| malformed(format!("archive lacks {name}")))?;
            let mut out = Vec::new();
            file.read_to_end(&mut out).map_err(|e| malformed(format!("{name}: {e}")))?;
            Ok(out)
        };
        Ok(ExportBundle {
            doc_id: doc_id.into(),
            entity_csv: read(ENTITY_FILE)?,
            alias_csv: read(ALIAS_FILE)?,
            group_csv: read(GROUP_FILE)?,
        })
    }
}

fn read_rows<const N: usize>(file: &str, bytes: &[u8], header: [&str; N]) -> Result<Vec<[String; N]>, ImportError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let mut rows = Vec::new();
    let mut saw_header = false;
    for record in reader.records() {
        let record = record.map_err(|e| malformed(format!("{file}: {e}")))?;
        if record.len() != N {
            return Err(malformed(format!("{file}: expected {N} columns, found {}", record.len())));
        }
        if !saw_header {
            if record.iter().ne(header) {
                return Err(malformed(format!("{file}: unexpected header")));
            }
            saw_header = true;
            continue;
        }
        rows.push(std::array::from_fn(|i| record[i].to_string()));
    }
    if !saw_header {
        return Err(malformed(format!("{file}: missing header")));
    }
    Ok(rows)
}

fn parse_id<T: std::str::FromStr>(file: &str, cell: &str) -> Result<T, ImportError> {
    cell.parse().map_err(|_| malformed(format!("{file}: bad id `{cell}`")))
}

fn parse_count(file: &str, cell: &str) -> Result<u64, ImportError> {
    cell.parse().map_err(|_| malformed(format!("{file}: bad frequency `{cell}`")))
}

fn parse_cell(file: &str, cell: &str) -> Result<Vec<String>, ImportError> {
    parse_list(cell).map_err(|e| malformed(format!("{file}: {e}")))
}

fn parse_members(file: &str, ids: &str, names: &str) -> Result<(Vec<InstanceId>, Vec<String>), ImportError> {
    let ids = parse_cell(file, ids)?;
    let names = parse_cell(file, names)?;
    if ids.len() != names.len() {
        return Err(malformed(format!("{file}: member ids and names differ in length")));
    }
    let ids = ids.iter().map(|id| parse_id(file, id)).collect::<Result<_, _>>()?;
    Ok((ids, names))
}

fn check_count(id: String, recorded: u64, recomputed: u64) -> Result<(), ImportError> {
    if recorded == recomputed {
        Ok(())
    } else {
        Err(ImportError::FrequencyMismatch { id, recorded, recomputed })
    }
}

/// Rebuilds a single-document project from an export bundle and the
/// document's text. Class descriptions are not part of the export and come
/// back empty unless the class is built in. Every recorded frequency is
/// checked against the matcher's count on `text`.
pub fn import_document_state(
    entity_csv: &[u8],
    alias_csv: &[u8],
    group_csv: &[u8],
    doc_name: &str,
    text: &str,
) -> Result<Project, ImportError> {
    let entity_rows = read_rows(ENTITY_FILE, entity_csv, ENTITY_HEADER)?;
    let alias_rows = read_rows(ALIAS_FILE, alias_csv, ALIAS_HEADER)?;
    let group_rows = read_rows(GROUP_FILE, group_csv, GROUP_HEADER)?;

    let mut snap = Project::new("imported", doc_name).snapshot();
    let add_class = |snap: &mut ProjectSnapshot, label: &str| {
        if !snap.classes.iter().any(|c| c.label == label) {
            snap.classes.push(EntityClass {
                label: label.into(),
                description: String::new(),
                color_index: snap.counters.next_color,
                builtin: false,
            });
            snap.counters.next_color += 1;
        }
    };

    let mut recorded = BTreeMap::new();
    for [id, surface, class, freq, relations, relation_names] in &entity_rows {
        let id: InstanceId = parse_id(ENTITY_FILE, id)?;
        add_class(&mut snap, class);
        recorded.insert(id, (parse_count(ENTITY_FILE, freq)?, parse_cell(ENTITY_FILE, relations)?, parse_cell(ENTITY_FILE, relation_names)?));
        snap.instances.push(EntityInstance {
            id,
            surface: surface.clone(),
            class_label: class.clone(),
        });
        snap.counters.next_instance = snap.counters.next_instance.max(id.0 + 1);
    }
    snap.instances.sort_by_key(|i| i.id);

    let mut record = DocumentRecord {
        doc_id: DocId::from(doc_name),
        name: doc_name.into(),
        text: text.into(),
        next_group: 0,
        next_alias: 0,
        groups: Vec::new(),
        aliases: Vec::new(),
    };
    let mut names_of = Vec::new();
    for [id, name, freq, members, member_names] in &group_rows {
        let id: GroupId = parse_id(GROUP_FILE, id)?;
        let (members, names) = parse_members(GROUP_FILE, members, member_names)?;
        names_of.push((members.clone(), names, id.to_string(), parse_count(GROUP_FILE, freq)?));
        record.next_group = record.next_group.max(id.0 + 1);
        record.groups.push(EntityGroup { id, name: name.clone(), members });
    }
    for [id, name, class, freq, members, member_names] in &alias_rows {
        let id: AliasId = parse_id(ALIAS_FILE, id)?;
        add_class(&mut snap, class);
        let (members, names) = parse_members(ALIAS_FILE, members, member_names)?;
        names_of.push((members.clone(), names, id.to_string(), parse_count(ALIAS_FILE, freq)?));
        record.next_alias = record.next_alias.max(id.0 + 1);
        record.aliases.push(EntityAlias {
            id,
            name: name.clone(),
            class_label: class.clone(),
            members,
        });
    }
    record.groups.sort_by_key(|g| g.id);
    record.aliases.sort_by_key(|a| a.id);
    snap.documents.push(record);

    let project = Project::from_snapshot(snap).map_err(|e| malformed(e.to_string()))?;

    for (members, names, _, _) in &names_of {
        if surfaces(&project, members) != *names {
            return Err(malformed("member names disagree with Entity.csv"));
        }
    }

    // Relations are derived from the group and alias files; compare them by
    // re-deriving through a fresh export.
    let bundle = export_document(&project, doc_name).map_err(|e| malformed(e.to_string()))?;
    let derived = read_rows(ENTITY_FILE, &bundle.entity_csv, ENTITY_HEADER)?;
    let freqs = project.frequencies(doc_name).map_err(|e| malformed(e.to_string()))?;
    for row in &derived {
        let id: InstanceId = parse_id(ENTITY_FILE, &row[0])?;
        let (freq, relations, relation_names) = &recorded[&id];
        check_count(id.to_string(), *freq, freqs.get(&id).copied().unwrap_or(0))?;
        if parse_cell(ENTITY_FILE, &row[4])? != *relations || parse_cell(ENTITY_FILE, &row[5])? != *relation_names {
            return Err(malformed(format!("Relations of {id} disagree with the group and alias files")));
        }
    }
    for (members, _, id, freq) in &names_of {
        let total = members.iter().map(|m| freqs.get(m).copied().unwrap_or(0)).sum();
        check_count(id.clone(), *freq, total)?;
    }
    Ok(project)
}
