//! HTTP service under `/api/v1`.
//!
//! Each project sits behind its own lock. A mutation runs on a copy of the
//! project, the copy is written to the store, and only then does it replace
//! the in-memory state and the response go out. A failed save leaves both
//! disk and memory as they were.

use std::collections::{BTreeMap, HashMap};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, PoisonError, RwLock};

use axum::body::{Body, Bytes};
use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post, put};
use axum::{Json, Router};
use ner_workbench_core::backends::{AnnotateRequest, GazetteerBackend};
use ner_workbench_core::{AliasId, Document, EntityAlias, EntityGroup, GroupId, InstanceId, Project, PASTED_TEXT_ID};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::annotator::AnnotatorClient;
use crate::definition::{parse_definition_csv, DefinitionError};
use crate::export::{export_document, ARCHIVE_NAME};
use crate::store::{valid_project_id, Store, StoreError, DEFAULT_MAX_DOCUMENTS};
use crate::views::{self, Chart};

pub const BODY_LIMIT: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServeConfig {
    pub bind: IpAddr,
    pub port: u16,
    pub store_root: PathBuf,
    pub annotator_url: Option<String>,
    /// 0 means unlimited.
    pub max_documents: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            bind: IpAddr::from([127, 0, 0, 1]),
            port: 8080,
            store_root: PathBuf::from("ner-wb-store"),
            annotator_url: None,
            max_documents: DEFAULT_MAX_DOCUMENTS,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("server failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Error body: `{"code", "message", "details"}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub details: Option<Value>,
}

/// Status for an error code: 404 unknown ids, 409 conflicts, 502 annotator
/// trouble, 500 storage trouble, 400 for everything else.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "UnknownClass" | "UnknownInstance" | "UnknownDocument" | "UnknownGroup" | "UnknownAlias" | "UnknownTarget"
        | "UnknownProject" | "NotFound" => StatusCode::NOT_FOUND,
        "DuplicateClass" | "DuplicateDocumentName" | "DuplicateName" | "MemberAlreadyAliased" | "DuplicateProject" => {
            StatusCode::CONFLICT
        }
        "BackendUnreachable" | "BackendProtocolError" | "OffsetOutOfRange" => StatusCode::BAD_GATEWAY,
        "IoFailure" | "CorruptSnapshot" | "UnsupportedVersion" | "Internal" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status_for(code),
            code: code.into(),
            message: message.into(),
            details: None,
        }
    }

    fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }
}

impl From<ner_workbench_core::Error> for ApiError {
    fn from(e: ner_workbench_core::Error) -> Self {
        use ner_workbench_core::Error as E;
        let details = match &e {
            E::TooManyDocuments { limit } => Some(json!({ "limit": limit })),
            E::MemberAlreadyAliased { instance, alias } => Some(json!({ "instance": instance, "alias": alias })),
            E::OffsetOutOfRange { doc, start, end, len } => {
                Some(json!({ "doc_id": doc, "start": start, "end": end, "length": len }))
            }
            _ => None,
        };
        let err = ApiError::new(e.code(), e.to_string());
        match details {
            Some(d) => err.with_details(d),
            None => err,
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::new(e.code(), e.to_string())
    }
}

impl From<DefinitionError> for ApiError {
    fn from(e: DefinitionError) -> Self {
        ApiError::new(e.code(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new("BadRequest", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "details": self.details });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Shared service state. Projects are loaded from the store on first use.
pub struct AppState {
    store: Store,
    annotator: Option<AnnotatorClient>,
    max_documents: usize,
    // `None` marks a project deleted while a request still held its handle.
    projects: Mutex<HashMap<String, Arc<RwLock<Option<Project>>>>>,
}

impl AppState {
    pub fn new(store: Store, annotator_url: Option<&str>, max_documents: usize) -> Self {
        AppState {
            store,
            annotator: annotator_url.map(AnnotatorClient::new),
            max_documents,
            projects: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_config(config: &ServeConfig) -> Result<Self, ServeError> {
        let store = Store::open(&config.store_root).map_err(|e| ServeError::BadConfig(e.to_string()))?;
        if let Some(url) = &config.annotator_url {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(ServeError::BadConfig(format!("annotator URL `{url}` is not http(s)")));
            }
        }
        Ok(AppState::new(store, config.annotator_url.as_deref(), config.max_documents))
    }

    fn limit(&self) -> Option<usize> {
        (self.max_documents > 0).then_some(self.max_documents)
    }

    fn handle(&self, id: &str) -> ApiResult<Arc<RwLock<Option<Project>>>> {
        let mut map = self.projects.lock().unwrap_or_else(PoisonError::into_inner);
        if let Some(h) = map.get(id) {
            return Ok(h.clone());
        }
        let project = self.store.load(id).map_err(|e| match e {
            StoreError::InvalidProjectId(id) => ApiError::new("UnknownProject", format!("unknown project `{id}`")),
            other => other.into(),
        })?;
        let handle = Arc::new(RwLock::new(Some(project)));
        map.insert(id.into(), handle.clone());
        Ok(handle)
    }

    fn read<T>(&self, id: &str, f: impl FnOnce(&Project) -> ApiResult<T>) -> ApiResult<T> {
        let handle = self.handle(id)?;
        let guard = handle.read().unwrap_or_else(PoisonError::into_inner);
        match guard.as_ref() {
            Some(p) => f(p),
            None => Err(unknown_project(id)),
        }
    }

    fn mutate<T>(&self, id: &str, f: impl FnOnce(&mut Project) -> ApiResult<T>) -> ApiResult<T> {
        let handle = self.handle(id)?;
        let mut guard = handle.write().unwrap_or_else(PoisonError::into_inner);
        let current = guard.as_ref().ok_or_else(|| unknown_project(id))?;
        let mut draft = current.clone();
        let out = f(&mut draft)?;
        self.store.save(&draft)?;
        *guard = Some(draft);
        Ok(out)
    }
}

fn unknown_project(id: &str) -> ApiError {
    ApiError::new("UnknownProject", format!("unknown project `{id}`"))
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{p}", get(get_project).delete(delete_project))
        .route("/projects/{p}/documents", post(upload_documents).get(list_documents))
        .route("/projects/{p}/auto-annotate", post(auto_annotate))
        .route("/projects/{p}/definitions", post(upload_definitions))
        .route("/projects/{p}/classes", post(create_class).get(list_classes))
        .route("/projects/{p}/classes/{label}", delete(delete_class))
        .route("/projects/{p}/instances", post(register_instance).get(list_instances))
        .route("/projects/{p}/instances/{e}", delete(delete_instance))
        .route("/projects/{p}/documents/{d}/groups", post(create_group).get(list_groups))
        .route("/projects/{p}/documents/{d}/groups/{g}", put(update_group).delete(delete_group))
        .route("/projects/{p}/documents/{d}/aliases", post(create_alias).get(list_aliases))
        .route("/projects/{p}/documents/{d}/aliases/{a}", put(update_alias).delete(delete_alias))
        .route("/projects/{p}/documents/{d}/annotations", get(annotations))
        .route("/projects/{p}/documents/{d}/charts/{chart}", get(doc_chart))
        .route("/projects/{p}/charts/series", get(series))
        .route("/projects/{p}/documents/{d}/export", get(export))
        .route("/health", get(health));
    Router::new()
        .route("/health", get(health))
        .nest("/api/v1", api)
        .fallback(|| async { ApiError::new("NotFound", "no such endpoint") })
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

pub async fn serve(config: ServeConfig) -> Result<(), ServeError> {
    let state = Arc::new(AppState::from_config(&config)?);
    let addr = SocketAddr::new(config.bind, config.port);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServeError::PortInUse(config.port),
        _ => ServeError::Io(e),
    })?;
    tracing::info!(addr = %listener.local_addr()?, store = %config.store_root.display(), "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn json_bytes(status: StatusCode, bytes: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], bytes).into_response()
}

fn flag(q: &BTreeMap<String, String>, key: &str) -> ApiResult<bool> {
    match q.get(key).map(String::as_str) {
        None | Some("") | Some("false") | Some("0") => Ok(false),
        Some("true") | Some("1") => Ok(true),
        Some(other) => Err(ApiError::new("BadRequest", format!("`{key}` must be true or false, got `{other}`"))),
    }
}

fn parse_members(members: &[String]) -> ApiResult<Vec<InstanceId>> {
    members
        .iter()
        .map(|m| m.parse().map_err(|_| ApiError::from(ner_workbench_core::Error::UnknownMember(m.clone()))))
        .collect()
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Debug, Serialize)]
struct ProjectSummary {
    project_id: String,
    name: String,
    documents: Vec<DocumentSummary>,
    classes: usize,
    instances: usize,
}

#[derive(Debug, Serialize)]
struct DocumentSummary {
    doc_id: String,
    name: String,
    length: usize,
    order_index: usize,
}

fn doc_summary(d: &Document) -> DocumentSummary {
    DocumentSummary {
        doc_id: d.id().as_str().into(),
        name: d.name().into(),
        length: d.len(),
        order_index: d.order_index(),
    }
}

fn project_summary(p: &Project) -> ProjectSummary {
    ProjectSummary {
        project_id: p.id().into(),
        name: p.name().into(),
        documents: p.documents().map(doc_summary).collect(),
        classes: p.classes().count(),
        instances: p.instances().count(),
    }
}

#[derive(Debug, Deserialize)]
struct NewProject {
    #[serde(default)]
    project_id: Option<String>,
    #[serde(default)]
    name: Option<String>,
}

async fn create_project(
    State(state): State<Arc<AppState>>,
    body: Result<Json<NewProject>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let id = body.project_id.unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    if !valid_project_id(&id) {
        return Err(StoreError::InvalidProjectId(id).into());
    }
    let mut map = state.projects.lock().unwrap_or_else(PoisonError::into_inner);
    let live = map.get(&id).is_some_and(|h| h.read().unwrap_or_else(PoisonError::into_inner).is_some());
    if live || state.store.exists(&id) {
        return Err(ApiError::new("DuplicateProject", format!("project `{id}` already exists")));
    }
    let name = body.name.unwrap_or_else(|| id.clone());
    let project = Project::new(id.clone(), name);
    state.store.save(&project)?;
    let summary = project_summary(&project);
    map.insert(id, Arc::new(RwLock::new(Some(project))));
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn list_projects(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    Ok(Json(state.store.list_projects()?).into_response())
}

async fn get_project(State(state): State<Arc<AppState>>, Path(p): Path<String>) -> ApiResult<Response> {
    state.read(&p, |project| Ok(Json(project_summary(project)).into_response()))
}

async fn delete_project(State(state): State<Arc<AppState>>, Path(p): Path<String>) -> ApiResult<StatusCode> {
    let handle = state.handle(&p)?;
    let mut guard = handle.write().unwrap_or_else(PoisonError::into_inner);
    if guard.is_none() {
        return Err(unknown_project(&p));
    }
    state.store.delete_project(&p)?;
    *guard = None;
    drop(guard);
    state.projects.lock().unwrap_or_else(PoisonError::into_inner).remove(&p);
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
struct PastedText {
    #[serde(default)]
    name: Option<String>,
    text: String,
}

fn decode_text(name: &str, bytes: &[u8]) -> ApiResult<String> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    String::from_utf8(bytes.to_vec())
        .map_err(|_| ApiError::new("BadEncoding", format!("`{name}` is not valid UTF-8")).with_details(json!({ "name": name })))
}

fn is_multipart(req: &Request) -> bool {
    req.headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"))
}

/// Collects `(file name or field name, bytes)` from a multipart body.
async fn multipart_parts(req: Request, state: &Arc<AppState>) -> ApiResult<Vec<(Option<String>, String, Bytes)>> {
    let mut form = Multipart::from_request(req, state)
        .await
        .map_err(|e| ApiError::new("BadRequest", e.body_text()))?;
    let mut parts = Vec::new();
    while let Some(field) = form.next_field().await.map_err(|e| ApiError::new("BadRequest", e.body_text()))? {
        let file_name = field.file_name().map(String::from);
        let field_name = field.name().unwrap_or("").to_string();
        let bytes = field.bytes().await.map_err(|e| ApiError::new("BadRequest", e.body_text()))?;
        parts.push((file_name, field_name, bytes));
    }
    Ok(parts)
}

async fn upload_documents(
    State(state): State<Arc<AppState>>,
    Path(p): Path<String>,
    req: Request,
) -> ApiResult<Response> {
    let mut incoming = Vec::new();
    if is_multipart(&req) {
        for (file_name, field_name, bytes) in multipart_parts(req, &state).await? {
            match file_name {
                Some(name) => {
                    let text = decode_text(&name, &bytes)?;
                    incoming.push((name, text));
                }
                None if field_name == "text" => {
                    incoming.push((PASTED_TEXT_ID.to_string(), decode_text(PASTED_TEXT_ID, &bytes)?));
                }
                None => {}
            }
        }
    } else {
        let Json(body): Json<PastedText> = Json::from_request(req, &state).await?;
        let name = body.name.filter(|n| !n.is_empty()).unwrap_or_else(|| PASTED_TEXT_ID.to_string());
        incoming.push((name, body.text));
    }
    if incoming.is_empty() {
        return Ok(Json(Vec::<DocumentSummary>::new()).into_response());
    }
    let limit = state.limit();
    let added = state.mutate(&p, |project| {
        let ids = project.add_documents(incoming, limit)?;
        Ok(ids
            .iter()
            .map(|id| doc_summary(project.document(id.as_str()).expect("just added")))
            .collect::<Vec<_>>())
    })?;
    tracing::info!(project = %p, added = added.len(), "documents uploaded");
    Ok((StatusCode::CREATED, Json(added)).into_response())
}

async fn list_documents(State(state): State<Arc<AppState>>, Path(p): Path<String>) -> ApiResult<Response> {
    state.read(&p, |project| Ok(Json(project.documents().map(doc_summary).collect::<Vec<_>>()).into_response()))
}

#[derive(Debug, Deserialize)]
struct AutoAnnotate {
    backend: String,
}

async fn auto_annotate(
    State(state): State<Arc<AppState>>,
    Path(p): Path<String>,
    body: Result<Json<AutoAnnotate>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let summary = match body.backend.as_str() {
        "gazetteer" => state.mutate(&p, |project| {
            let backend = GazetteerBackend::from_project(project);
            Ok(project.run_auto_annotation(&backend)?)
        })?,
        "external" => {
            let client = state.annotator.clone().ok_or_else(|| {
                ApiError::from(ner_workbench_core::Error::BackendUnreachable("no annotator URL configured".into()))
            })?;
            let request = state.read(&p, |project| Ok(AnnotateRequest::for_project(project)))?;
            let response = client.annotate(&request).await?;
            state.mutate(&p, |project| Ok(project.apply_predictions(&response)?))?
        }
        other => {
            return Err(ApiError::new("BadRequest", format!("unknown backend `{other}`; use gazetteer or external")))
        }
    };
    Ok(Json(summary).into_response())
}

async fn upload_definitions(
    State(state): State<Arc<AppState>>,
    Path(p): Path<String>,
    Query(q): Query<BTreeMap<String, String>>,
    req: Request,
) -> ApiResult<Response> {
    let replace = flag(&q, "replace")?;
    let bytes = if is_multipart(&req) {
        multipart_parts(req, &state)
            .await?
            .into_iter()
            .map(|(_, _, b)| b)
            .next()
            .ok_or_else(|| ApiError::new("MissingHeader", "no definition file in upload"))?
    } else {
        Bytes::from_request(req, &state)
            .await
            .map_err(|e| ApiError::new("BadRequest", e.body_text()))?
    };
    let def = parse_definition_csv(&bytes)?;
    let summary = state.mutate(&p, |project| Ok(project.apply_definition(&def, replace)?))?;
    Ok(Json(summary).into_response())
}

#[derive(Debug, Deserialize)]
struct NewClass {
    label: String,
    #[serde(default)]
    description: String,
}

async fn create_class(
    State(state): State<Arc<AppState>>,
    Path(p): Path<String>,
    body: Result<Json<NewClass>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let class = state.mutate(&p, |project| Ok(project.create_class(body.label.trim(), &body.description)?))?;
    Ok((StatusCode::CREATED, Json(class)).into_response())
}

async fn list_classes(State(state): State<Arc<AppState>>, Path(p): Path<String>) -> ApiResult<Response> {
    state.read(&p, |project| Ok(Json(project.classes().collect::<Vec<_>>()).into_response()))
}

async fn delete_class(
    State(state): State<Arc<AppState>>,
    Path((p, label)): Path<(String, String)>,
) -> ApiResult<StatusCode> {
    state.mutate(&p, |project| Ok(project.delete_class(&label)?))?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
struct NewInstance {
    surface: String,
    class_label: String,
}

async fn register_instance(
    State(state): State<Arc<AppState>>,
    Path(p): Path<String>,
    body: Result<Json<NewInstance>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let instance = state.mutate(&p, |project| {
        let id = project.register_instance(&body.surface, &body.class_label)?;
        Ok(project.instance(id).expect("just registered").clone())
    })?;
    Ok((StatusCode::CREATED, Json(instance)).into_response())
}

async fn list_instances(State(state): State<Arc<AppState>>, Path(p): Path<String>) -> ApiResult<Response> {
    state.read(&p, |project| Ok(Json(project.instances().collect::<Vec<_>>()).into_response()))
}

async fn delete_instance(
    State(state): State<Arc<AppState>>,
    Path((p, e)): Path<(String, String)>,
) -> ApiResult<StatusCode> {
    let id: InstanceId = e
        .parse()
        .map_err(|_| ApiError::from(ner_workbench_core::Error::UnknownInstance(e.clone())))?;
    state.mutate(&p, |project| Ok(project.delete_instance(id)?))?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Serialize)]
struct GroupView {
    id: GroupId,
    name: String,
    members: Vec<InstanceId>,
    frequency: u64,
}

#[derive(Debug, Serialize)]
struct AliasView {
    id: AliasId,
    name: String,
    class_label: String,
    members: Vec<InstanceId>,
    frequency: u64,
}

fn group_view(project: &Project, doc: &str, g: &EntityGroup) -> ApiResult<GroupView> {
    Ok(GroupView {
        id: g.id,
        name: g.name.clone(),
        members: g.members.clone(),
        frequency: project.group_frequency(doc, g.id)?,
    })
}

fn alias_view(project: &Project, doc: &str, a: &EntityAlias) -> ApiResult<AliasView> {
    Ok(AliasView {
        id: a.id,
        name: a.name.clone(),
        class_label: a.class_label.clone(),
        members: a.members.clone(),
        frequency: project.alias_frequency(doc, a.id)?,
    })
}

#[derive(Debug, Deserialize)]
struct NewCollection {
    name: String,
    #[serde(default)]
    members: Vec<String>,
    #[serde(default)]
    class_label: Option<String>,
}

#[derive(Debug, Deserialize)]
struct NewMembers {
    members: Vec<String>,
}

fn group_id(g: &str) -> ApiResult<GroupId> {
    g.parse()
        .map_err(|_| ApiError::from(ner_workbench_core::Error::UnknownGroup(g.into())))
}

fn alias_id(a: &str) -> ApiResult<AliasId> {
    a.parse()
        .map_err(|_| ApiError::from(ner_workbench_core::Error::UnknownAlias(a.into())))
}

async fn create_group(
    State(state): State<Arc<AppState>>,
    Path((p, d)): Path<(String, String)>,
    body: Result<Json<NewCollection>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let members = parse_members(&body.members)?;
    let view = state.mutate(&p, |project| {
        let id = project.create_group(&d, &body.name, &members)?;
        group_view(project, &d, project.group(&d, id)?)
    })?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn list_groups(
    State(state): State<Arc<AppState>>,
    Path((p, d)): Path<(String, String)>,
) -> ApiResult<Response> {
    state.read(&p, |project| {
        let views = project
            .groups(&d)?
            .map(|g| group_view(project, &d, g))
            .collect::<ApiResult<Vec<_>>>()?;
        Ok(Json(views).into_response())
    })
}

async fn update_group(
    State(state): State<Arc<AppState>>,
    Path((p, d, g)): Path<(String, String, String)>,
    body: Result<Json<NewMembers>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let id = group_id(&g)?;
    let members = parse_members(&body.members)?;
    let view = state.mutate(&p, |project| {
        project.set_group_members(&d, id, &members)?;
        group_view(project, &d, project.group(&d, id)?)
    })?;
    Ok(Json(view).into_response())
}

async fn delete_group(
    State(state): State<Arc<AppState>>,
    Path((p, d, g)): Path<(String, String, String)>,
) -> ApiResult<StatusCode> {
    let id = group_id(&g)?;
    state.mutate(&p, |project| Ok(project.delete_group(&d, id)?))?;
    Ok(StatusCode::NO_CONTENT)
}

async fn create_alias(
    State(state): State<Arc<AppState>>,
    Path((p, d)): Path<(String, String)>,
    body: Result<Json<NewCollection>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let members = parse_members(&body.members)?;
    let view = state.mutate(&p, |project| {
        let id = project.create_alias(&d, &body.name, &members, body.class_label.as_deref())?;
        alias_view(project, &d, project.alias(&d, id)?)
    })?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn list_aliases(
    State(state): State<Arc<AppState>>,
    Path((p, d)): Path<(String, String)>,
) -> ApiResult<Response> {
    state.read(&p, |project| {
        let views = project
            .aliases(&d)?
            .map(|a| alias_view(project, &d, a))
            .collect::<ApiResult<Vec<_>>>()?;
        Ok(Json(views).into_response())
    })
}

async fn update_alias(
    State(state): State<Arc<AppState>>,
    Path((p, d, a)): Path<(String, String, String)>,
    body: Result<Json<NewMembers>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let id = alias_id(&a)?;
    let members = parse_members(&body.members)?;
    let view = state.mutate(&p, |project| {
        project.set_alias_members(&d, id, &members)?;
        alias_view(project, &d, project.alias(&d, id)?)
    })?;
    Ok(Json(view).into_response())
}

async fn delete_alias(
    State(state): State<Arc<AppState>>,
    Path((p, d, a)): Path<(String, String, String)>,
) -> ApiResult<StatusCode> {
    let id = alias_id(&a)?;
    state.mutate(&p, |project| Ok(project.delete_alias(&d, id)?))?;
    Ok(StatusCode::NO_CONTENT)
}

fn filter_from(q: &BTreeMap<String, String>) -> ApiResult<ner_workbench_core::analytics::DisplayFilter> {
    Ok(views::parse_filter(
        q.get("mode").map(String::as_str),
        q.get("ids").map(String::as_str),
        flag(q, "apply_alias")?,
    )?)
}

async fn annotations(
    State(state): State<Arc<AppState>>,
    Path((p, d)): Path<(String, String)>,
    Query(q): Query<BTreeMap<String, String>>,
) -> ApiResult<Response> {
    let filter = filter_from(&q)?;
    state.read(&p, |project| Ok(json_bytes(StatusCode::OK, views::annotations(project, &d, &filter)?)))
}

async fn doc_chart(
    State(state): State<Arc<AppState>>,
    Path((p, d, chart)): Path<(String, String, String)>,
    Query(q): Query<BTreeMap<String, String>>,
) -> ApiResult<Response> {
    let chart: Chart = chart.parse().map_err(|m: String| ApiError::new("NotFound", m))?;
    let filter = filter_from(&q)?;
    let sort = flag(&q, "sort")?;
    state.read(&p, |project| Ok(json_bytes(StatusCode::OK, views::chart(project, &d, chart, &filter, sort)?)))
}

async fn series(
    State(state): State<Arc<AppState>>,
    Path(p): Path<String>,
    Query(q): Query<BTreeMap<String, String>>,
) -> ApiResult<Response> {
    let target = q
        .get("target")
        .ok_or_else(|| ApiError::new("BadRequest", "missing `target` query parameter"))?;
    state.read(&p, |project| Ok(json_bytes(StatusCode::OK, views::series(project, target)?)))
}

async fn export(
    State(state): State<Arc<AppState>>,
    Path((p, d)): Path<(String, String)>,
) -> ApiResult<Response> {
    let zip = state.read(&p, |project| Ok(export_document(project, &d)?.to_zip()))?;
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/zip")),
            (
                header::CONTENT_DISPOSITION,
                HeaderValue::from_str(&format!("attachment; filename=\"{ARCHIVE_NAME}\"")).expect("ascii header"),
            ),
        ],
        Body::from(zip),
    )
        .into_response())
}
