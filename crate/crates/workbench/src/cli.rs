//! `ner-wb` command line: batch annotation, statistics, export and the HTTP
//! service.
//!
//! Exit codes: 0 success, 1 domain or I/O error, 2 usage error.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ner_workbench_core::analytics::{ClassCount, FrequencyRow, Positions, SeriesPoint};
use ner_workbench_core::backends::{AnnotateRequest, AutoAnnotateSummary, DefinitionSummary, GazetteerBackend};
use ner_workbench_core::{DocId, Project};
use serde::Serialize;

use crate::annotator::{load_predictions, AnnotatorClient};
use crate::api::{self, ServeConfig};
use crate::definition::parse_definition_csv;
use crate::export::{export_document, ARCHIVE_NAME};
use crate::store::{load_snapshot, Store, DEFAULT_MAX_DOCUMENTS};
use crate::table::{Align, Table};
use crate::views::{self, Chart};

#[derive(Debug, Parser)]
#[command(name = "ner-wb", version, about = "Dictionary-driven named-entity annotation for Chinese corpora")]
pub struct Cli {
    /// Directory holding project snapshots.
    #[arg(long, global = true, env = "NER_WB_STORE")]
    pub store_root: Option<PathBuf>,

    /// Output format for summaries and statistics.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Annotate TXT files and write one export bundle per document.
    Annotate(AnnotateArgs),
    /// Print a frequency table, class overview, positions or series.
    Stats(StatsArgs),
    /// Write export bundles for documents of a saved project.
    Export(ExportArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    None,
    Gazetteer,
    External,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// TXT files, or directories whose *.txt files are read.
    #[arg(long = "in", value_name = "PATH", num_args = 1..)]
    pub inputs: Vec<PathBuf>,

    /// Entity definition CSV (Class_Label, Class_Description, Instance_List).
    #[arg(long, value_name = "CSV")]
    pub dict: Option<PathBuf>,

    /// Drop instances and custom classes that the definition file does not list.
    #[arg(long, requires = "dict")]
    pub replace: bool,

    #[arg(long, value_enum, default_value_t = BackendChoice::None)]
    pub backend: BackendChoice,

    /// Base URL of an annotator serving POST /v1/annotate.
    #[arg(long, env = "NER_WB_ANNOTATOR")]
    pub annotator_url: Option<String>,

    /// Saved annotator response to apply instead of calling a server.
    #[arg(long, value_name = "JSON")]
    pub predictions: Option<PathBuf>,

    /// Directory receiving <document>/data.zip.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Id under which the project is saved when a store root is set.
    #[arg(long)]
    pub project_id: Option<String>,

    #[arg(long)]
    pub name: Option<String>,

    /// 0 means unlimited.
    #[arg(long, env = "NER_WB_MAX_DOCUMENTS", default_value_t = DEFAULT_MAX_DOCUMENTS)]
    pub max_documents: usize,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false, args = ["project", "snapshot"])]
pub struct Source {
    /// Project id in the store.
    #[arg(long)]
    pub project: Option<String>,

    /// Snapshot file.
    #[arg(long, value_name = "FILE")]
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum View {
    Frequency,
    Overview,
    Positions,
    Series,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub source: Source,

    /// Document id; optional when the project has a single document.
    #[arg(long)]
    pub doc: Option<String>,

    #[arg(long, value_enum, default_value_t = View::Frequency)]
    pub view: View,

    /// Display filter mode: all, instance, class, group or alias.
    #[arg(long)]
    pub mode: Option<String>,

    /// Comma-separated ids or class labels for the filter.
    #[arg(long)]
    pub ids: Option<String>,

    #[arg(long)]
    pub apply_alias: bool,

    /// Sort the frequency table by frequency, highest first.
    #[arg(long)]
    pub sort: bool,

    /// Series target: E3, instance:E3 or alias:NAME.
    #[arg(long, required_if_eq("view", "series"))]
    pub target: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub source: Source,

    /// Documents to export; all when omitted.
    #[arg(long)]
    pub doc: Vec<String>,

    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "NER_WB_PORT", default_value_t = 8080)]
    pub port: u16,

    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,

    #[arg(long, env = "NER_WB_ANNOTATOR")]
    pub annotator_url: Option<String>,

    /// 0 means unlimited.
    #[arg(long, env = "NER_WB_MAX_DOCUMENTS", default_value_t = DEFAULT_MAX_DOCUMENTS)]
    pub max_documents: usize,
}

/// A failed command: message for stderr plus exit code.
#[derive(Debug)]
pub struct Failure {
    pub exit_code: u8,
    pub message: String,
}

impl Failure {
    fn domain(message: impl std::fmt::Display) -> Self {
        Failure {
            exit_code: 1,
            message: message.to_string(),
        }
    }

    fn usage(message: impl std::fmt::Display) -> Self {
        Failure {
            exit_code: 2,
            message: message.to_string(),
        }
    }
}

macro_rules! domain_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::domain(e)
            }
        }
    )*};
}
domain_from!(
    ner_workbench_core::Error,
    crate::store::StoreError,
    crate::definition::DefinitionError,
    api::ServeError
);

type CliResult<T = ()> = Result<T, Failure>;

pub async fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Annotate(args) => annotate(cli.store_root.as_deref(), cli.format, args).await,
        Command::Stats(args) => stats(cli.store_root.as_deref(), cli.format, args),
        Command::Export(args) => export(cli.store_root.as_deref(), args),
        Command::Serve(args) => {
            let config = ServeConfig {
                bind: args.bind,
                port: args.port,
                store_root: cli.store_root.unwrap_or_else(|| ServeConfig::default().store_root),
                annotator_url: args.annotator_url,
                max_documents: args.max_documents,
            };
            Ok(api::serve(config).await?)
        }
    }
}

fn emit(bytes: &[u8]) -> CliResult {
    let mut out = std::io::stdout().lock();
    match out.write_all(bytes).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::domain(format!("writing output: {e}"))),
        _ => Ok(()),
    }
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::domain(format!("{}: {e}", path.display())))
}

/// Files given directly, plus `*.txt` directly inside given directories,
/// each directory's files sorted by name.
pub fn collect_inputs(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| Failure::domain(format!("{}: {e}", path.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("txt")))
                .collect();
            found.sort();
            files.extend(found);
        } else if path.is_file() {
            files.push(path.clone());
        } else {
            return Err(Failure::domain(format!("{}: no such file or directory", path.display())));
        }
    }
    Ok(files)
}

/// `<out>/<stem>/data.zip` per document; the full document id is used when
/// two documents share a stem.
fn bundle_dirs(project: &Project, docs: &[DocId], out: &Path) -> Vec<(DocId, PathBuf)> {
    let stem = |d: &DocId| {
        Path::new(d.as_str())
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| d.as_str().to_string())
    };
    let mut seen = BTreeSet::new();
    let clashing: BTreeSet<String> = project.documents().map(|d| stem(d.id())).filter(|s| !seen.insert(s.clone())).collect();
    docs.iter()
        .map(|d| {
            let s = stem(d);
            let dir = if clashing.contains(&s) { d.as_str().to_string() } else { s };
            (d.clone(), out.join(dir).join(ARCHIVE_NAME))
        })
        .collect()
}

fn write_bundles(project: &Project, docs: &[DocId], out: &Path) -> CliResult<Vec<(DocId, PathBuf)>> {
    let targets = bundle_dirs(project, docs, out);
    for (doc, path) in &targets {
        let zip = export_document(project, doc.as_str())?.to_zip();
        let dir = path.parent().expect("bundle path has a parent");
        fs::create_dir_all(dir).map_err(|e| Failure::domain(format!("{}: {e}", dir.display())))?;
        crate::store::write_atomic(path, &zip)?;
    }
    Ok(targets)
}

#[derive(Debug, Serialize)]
struct AnnotateReport {
    project_id: String,
    definition: Option<DefinitionSummary>,
    auto_annotation: Option<AutoAnnotateSummary>,
    documents: Vec<DocumentReport>,
}

#[derive(Debug, Serialize)]
struct DocumentReport {
    doc_id: String,
    archive: Option<String>,
    rows: Vec<FrequencyRow>,
}

async fn annotate(store_root: Option<&Path>, format: Format, args: AnnotateArgs) -> CliResult {
    let files = collect_inputs(&args.inputs)?;
    if files.is_empty() {
        return Err(Failure::domain("no documents"));
    }
    if args.backend == BackendChoice::External && args.predictions.is_some() {
        return Err(Failure::usage("--predictions and --backend external are exclusive"));
    }
    let store = store_root.map(Store::open).transpose()?;
    let project_id = args.project_id.unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    if let Some(store) = &store {
        store.path_for(&project_id)?;
        if store.exists(&project_id) {
            return Err(Failure::domain(format!("project `{project_id}` already exists in the store")));
        }
    }

    let mut docs = Vec::new();
    for file in &files {
        let name = file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| Failure::domain(format!("{}: not a file name", file.display())))?;
        let bytes = read_file(file)?;
        let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(&bytes);
        let text = String::from_utf8(bytes.to_vec())
            .map_err(|_| Failure::domain(format!("{}: not valid UTF-8", file.display())))?;
        docs.push((name, text));
    }
    let mut project = Project::new(project_id.clone(), args.name.unwrap_or_else(|| project_id.clone()));
    let limit = (args.max_documents > 0).then_some(args.max_documents);
    project.add_documents(docs, limit)?;

    let definition = match &args.dict {
        Some(path) => {
            let def = parse_definition_csv(&read_file(path)?)?;
            Some(project.apply_definition(&def, args.replace)?)
        }
        None => None,
    };

    let auto_annotation = if let Some(path) = &args.predictions {
        Some(project.apply_predictions(&load_predictions(path)?)?)
    } else {
        match args.backend {
            BackendChoice::None => None,
            BackendChoice::Gazetteer => Some(project.run_auto_annotation(&GazetteerBackend::from_project(&project))?),
            BackendChoice::External => {
                let url = args
                    .annotator_url
                    .ok_or_else(|| Failure::usage("--backend external needs --annotator-url or NER_WB_ANNOTATOR"))?;
                let response = AnnotatorClient::new(&url).annotate(&AnnotateRequest::for_project(&project)).await?;
                Some(project.apply_predictions(&response)?)
            }
        }
    };

    let doc_ids: Vec<DocId> = project.documents().map(|d| d.id().clone()).collect();
    let archives = match &args.out {
        Some(out) => write_bundles(&project, &doc_ids, out)?,
        None => Vec::new(),
    };
    if let Some(store) = &store {
        store.save(&project)?;
    }

    let filter = ner_workbench_core::analytics::DisplayFilter::all();
    let mut documents = Vec::new();
    for doc in &doc_ids {
        documents.push(DocumentReport {
            doc_id: doc.as_str().into(),
            archive: archives
                .iter()
                .find(|(d, _)| d == doc)
                .map(|(_, p)| p.display().to_string()),
            rows: project.frequency_table(doc.as_str(), &filter, true)?,
        });
    }
    let report = AnnotateReport {
        project_id,
        definition,
        auto_annotation,
        documents,
    };
    match format {
        Format::Json => {
            let mut bytes = views::to_json(&report);
            bytes.push(b'\n');
            emit(&bytes)
        }
        Format::Text => emit(render_report(&report).as_bytes()),
    }
}

fn render_report(report: &AnnotateReport) -> String {
    let mut out = format!("project {}\n", report.project_id);
    if let Some(d) = &report.definition {
        out.push_str(&format!(
            "definition: {} instances registered, {} removed, classes created {:?}, removed {:?}\n",
            d.instances_registered, d.instances_removed, d.classes_created, d.classes_removed
        ));
    }
    if let Some(a) = &report.auto_annotation {
        out.push_str(&format!(
            "auto-annotation: {} spans, {} instances registered, {} reclassified, classes created {:?}\n",
            a.spans_received, a.instances_registered, a.instances_reclassified, a.classes_created
        ));
    }
    for doc in &report.documents {
        out.push_str(&format!("\n== {} ==\n", doc.doc_id));
        if let Some(a) = &doc.archive {
            out.push_str(&format!("bundle: {a}\n"));
        }
        out.push_str(&frequency_table(&doc.rows).render());
    }
    out
}

fn frequency_table(rows: &[FrequencyRow]) -> Table {
    let mut table = Table::new([
        ("ID", Align::Left),
        ("Entity", Align::Left),
        ("Class", Align::Left),
        ("Frequency", Align::Right),
        ("Alias", Align::Left),
        ("Label", Align::Left),
    ]);
    for row in rows {
        table.row(vec![
            row.instance_id.to_string(),
            row.surface.clone(),
            row.class_label.clone(),
            row.frequency.to_string(),
            row.alias.as_ref().map(|a| a.name.clone()).unwrap_or_default(),
            row.sidebar_label(),
        ]);
    }
    table
}

fn load_source(store_root: Option<&Path>, source: &Source) -> CliResult<Project> {
    match (&source.project, &source.snapshot) {
        (Some(id), _) => {
            let root = store_root.ok_or_else(|| Failure::usage("--project needs --store-root or NER_WB_STORE"))?;
            Ok(Store::open(root)?.load(id)?)
        }
        (None, Some(path)) => Ok(load_snapshot(path)?),
        (None, None) => Err(Failure::usage("give --project or --snapshot")),
    }
}

fn stats(store_root: Option<&Path>, format: Format, args: StatsArgs) -> CliResult {
    let project = load_source(store_root, &args.source)?;
    let filter = views::parse_filter(args.mode.as_deref(), args.ids.as_deref(), args.apply_alias)?;

    if args.view == View::Series {
        let target = args.target.as_deref().expect("clap requires --target for series");
        let bytes = views::series(&project, target)?;
        return match format {
            Format::Json => emit_line(bytes),
            Format::Text => {
                let points: Vec<SeriesPoint> = project.cross_doc_series(&target.parse()?)?;
                let mut table = Table::new([("Document", Align::Left), ("Frequency", Align::Right)]);
                for p in points {
                    table.row(vec![p.doc_id, p.frequency.to_string()]);
                }
                emit(table.render().as_bytes())
            }
        };
    }

    let doc = match args.doc {
        Some(d) => d,
        None if project.document_count() == 1 => project.documents().next().expect("one document").id().as_str().into(),
        None => {
            let names: Vec<&str> = project.documents().map(|d| d.id().as_str()).collect();
            return Err(Failure::usage(format!("--doc is required; documents: {}", names.join(", "))));
        }
    };
    let chart = match args.view {
        View::Frequency => Chart::Frequency,
        View::Overview => Chart::Overview,
        View::Positions => Chart::Positions,
        View::Series => unreachable!("handled above"),
    };
    let bytes = views::chart(&project, &doc, chart, &filter, args.sort)?;
    if format == Format::Json {
        return emit_line(bytes);
    }
    let text = match chart {
        Chart::Frequency => {
            let rows: Vec<FrequencyRow> = project.frequency_table(&doc, &filter, args.sort)?;
            frequency_table(&rows).render()
        }
        Chart::Overview => {
            let counts: Vec<ClassCount> = project.class_overview(&doc)?;
            let mut table = Table::new([("Class", Align::Left), ("Count", Align::Right)]);
            for c in counts {
                table.row(vec![c.class_label, c.count.to_string()]);
            }
            table.render()
        }
        Chart::Positions => {
            let positions: Positions = project.positions(&doc, &filter)?;
            let mut table = Table::new([("ID", Align::Left), ("Entity", Align::Left), ("Start", Align::Right)]);
            for p in &positions.points {
                let surface = project.instance(p.instance_id).map(|i| i.surface.clone()).unwrap_or_default();
                table.row(vec![p.instance_id.to_string(), surface, p.start.to_string()]);
            }
            format!("{} ({} characters)\n{}", positions.doc_id, positions.doc_length, table.render())
        }
    };
    emit(text.as_bytes())
}

fn emit_line(mut bytes: Vec<u8>) -> CliResult {
    bytes.push(b'\n');
    emit(&bytes)
}

fn export(store_root: Option<&Path>, args: ExportArgs) -> CliResult {
    let project = load_source(store_root, &args.source)?;
    let docs: Vec<DocId> = if args.doc.is_empty() {
        project.documents().map(|d| d.id().clone()).collect()
    } else {
        for d in &args.doc {
            project.document(d)?;
        }
        args.doc.iter().map(|d| DocId::from(d.as_str())).collect()
    };
    let mut listing = String::new();
    for (_, path) in write_bundles(&project, &docs, &args.out)? {
        listing.push_str(&format!("{}\n", path.display()));
    }
    emit(listing.as_bytes())
}
