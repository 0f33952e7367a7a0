use alloc::string::String;

use crate::ids::{AliasId, InstanceId};

/// Every way a domain operation on a [`Project`](crate::Project) can fail.
///
/// Operations validate before they mutate, so an `Err` always leaves the
/// project untouched.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("entity surface must not be empty")]
    EmptySurface,
    #[error("entity class label must not be empty")]
    EmptyLabel,
    #[error("name must not be empty")]
    EmptyName,
    #[error("unknown entity class `{0}`")]
    UnknownClass(String),
    #[error("entity class `{0}` already exists")]
    DuplicateClass(String),
    #[error("unknown entity instance `{0}`")]
    UnknownInstance(String),
    #[error("unknown document `{0}`")]
    UnknownDocument(String),
    #[error("document `{0}` already exists")]
    DuplicateDocumentName(String),
    #[error("too many documents (limit {limit})")]
    TooManyDocuments { limit: usize },
    #[error("name `{0}` is already used in this document")]
    DuplicateName(String),
    #[error("unknown member `{0}`")]
    UnknownMember(String),
    #[error("alias members mix classes `{0}` and `{1}`")]
    MixedClasses(String, String),
    #[error("{instance} already belongs to alias {alias} in this document")]
    MemberAlreadyAliased { instance: InstanceId, alias: AliasId },
    #[error("an alias without members needs an explicit class")]
    AliasClassUndetermined,
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("unknown alias `{0}`")]
    UnknownAlias(String),
    #[error("invalid display filter: {0}")]
    InvalidFilter(String),
    #[error("a cross-document series needs at least two documents")]
    SingleDocumentProject,
    #[error("unknown series target `{0}`")]
    UnknownTarget(String),
    #[error("annotator unreachable: {0}")]
    BackendUnreachable(String),
    #[error("malformed annotator response: {0}")]
    BackendProtocol(String),
    #[error("span {start}..{end} is outside document `{doc}` of length {len}")]
    OffsetOutOfRange {
        doc: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("unsupported snapshot format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
}

impl Error {
    /// Stable machine-readable code, identical to the variant name.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptySurface => "EmptySurface",
            Error::EmptyLabel => "EmptyLabel",
            Error::EmptyName => "EmptyName",
            Error::UnknownClass(_) => "UnknownClass",
            Error::DuplicateClass(_) => "DuplicateClass",
            Error::UnknownInstance(_) => "UnknownInstance",
            Error::UnknownDocument(_) => "UnknownDocument",
            Error::DuplicateDocumentName(_) => "DuplicateDocumentName",
            Error::TooManyDocuments { .. } => "TooManyDocuments",
            Error::DuplicateName(_) => "DuplicateName",
            Error::UnknownMember(_) => "UnknownMember",
            Error::MixedClasses(..) => "MixedClasses",
            Error::MemberAlreadyAliased { .. } => "MemberAlreadyAliased",
            Error::AliasClassUndetermined => "AliasClassUndetermined",
            Error::UnknownGroup(_) => "UnknownGroup",
            Error::UnknownAlias(_) => "UnknownAlias",
            Error::InvalidFilter(_) => "InvalidFilter",
            Error::SingleDocumentProject => "SingleDocumentProject",
            Error::UnknownTarget(_) => "UnknownTarget",
            Error::BackendUnreachable(_) => "BackendUnreachable",
            Error::BackendProtocol(_) => "BackendProtocolError",
            Error::OffsetOutOfRange { .. } => "OffsetOutOfRange",
            Error::UnsupportedVersion(_) => "UnsupportedVersion",
            Error::CorruptSnapshot(_) => "CorruptSnapshot",
        }
    }
}
