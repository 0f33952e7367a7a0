//! Entity definition files: one row per class, with a comma-separated list of
//! instance surfaces.
//!
//! ```text
//! Class_Label,Class_Description,Instance_List
//! WEAPON,武器,"芭蕉扇, 金箍棒"
//! ```

use std::collections::BTreeSet;

use ner_workbench_core::backends::{split_instance_list, DefinitionFile, DefinitionRow};

pub const DEFINITION_HEADER: [&str; 3] = ["Class_Label", "Class_Description", "Instance_List"];

#[derive(Debug, thiserror::Error)]
pub enum DefinitionError {
    #[error("definition file is not valid UTF-8")]
    BadEncoding,
    #[error("definition file must start with the header `Class_Label,Class_Description,Instance_List`")]
    MissingHeader,
    #[error("class `{0}` appears on more than one row")]
    DuplicateClassInFile(String),
    #[error("row {line} has instances but no class label")]
    MissingLabel { line: u64 },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl DefinitionError {
    pub fn code(&self) -> &'static str {
        match self {
            DefinitionError::BadEncoding => "BadEncoding",
            DefinitionError::MissingHeader => "MissingHeader",
            DefinitionError::DuplicateClassInFile(_) => "DuplicateClassInFile",
            DefinitionError::MissingLabel { .. } => "EmptyLabel",
            DefinitionError::Csv(_) => "MalformedCsv",
        }
    }
}

/// Parses a definition file. A leading UTF-8 BOM is tolerated, blank rows
/// are skipped, and cells are trimmed.
pub fn parse_definition_csv(bytes: &[u8]) -> Result<DefinitionFile, DefinitionError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    std::str::from_utf8(bytes).map_err(|_| DefinitionError::BadEncoding)?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = reader.records();

    let header = match records.next() {
        Some(record) => record?,
        None => return Err(DefinitionError::MissingHeader),
    };
    let header: Vec<&str> = header.iter().map(str::trim).collect();
    if header.len() < 3 || header[..3] != DEFINITION_HEADER || header[3..].iter().any(|h| !h.is_empty()) {
        return Err(DefinitionError::MissingHeader);
    }

    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for record in records {
        let record = record?;
        let cell = |i: usize| record.get(i).map(str::trim).unwrap_or("");
        let (label, description, list) = (cell(0), cell(1), cell(2));
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        if label.is_empty() {
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            return Err(DefinitionError::MissingLabel { line });
        }
        if !seen.insert(label.to_string()) {
            return Err(DefinitionError::DuplicateClassInFile(label.into()));
        }
        rows.push(DefinitionRow {
            class_label: label.into(),
            class_description: description.into(),
            surfaces: split_instance_list(list),
        });
    }
    Ok(DefinitionFile { rows })
}
