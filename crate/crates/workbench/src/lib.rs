//! Corpus-facing side of the annotation workbench: file formats, durable
//! project storage, the annotator client, the HTTP service and the CLI.

pub mod definition;
pub mod export;
pub mod listcell;
pub mod annotator;
pub mod api;
pub mod cli;
pub mod store;
pub mod table;
pub mod views;
