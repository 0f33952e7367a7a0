//! Domain model, dictionary matcher and analytics for a named-entity
//! annotation workbench over (primarily Chinese) corpora.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, the network or a concrete file format lives in the
//! `ner-workbench` companion crate.
//!
//! The central type is [`Project`]: a set of documents, a global registry of
//! entity classes and entity instances, and per-document groups and aliases.
//! Occurrences are never edited directly; they are derived by running the
//! leftmost-longest [`matcher`] over every document whenever the registry
//! changes.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytics;
pub mod backends;
pub mod classes;
mod error;
mod ids;
pub mod matcher;
mod model;
pub mod snapshot;

pub use crate::error::Error;
pub use crate::ids::{AliasId, DocId, GroupId, InstanceId, ParseIdError};
pub use crate::model::{
    Document, EntityAlias, EntityClass, EntityGroup, EntityInstance, Occurrence, Project,
    PALETTE_SIZE, PASTED_TEXT_ID,
};

pub type Result<T, E = Error> = core::result::Result<T, E>;
