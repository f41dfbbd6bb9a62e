//! Routes. Every response body is JSON except the label export, which is
//! JSONL; errors are `{code, message}`.

use std::collections::BTreeMap;

use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use labelforge::end_model::EndModelReport;
use labelforge::glm::{Concept, ConceptElement, ElementKind, GlmOp, Interaction};
use labelforge::label_model::LfStats;
use labelforge::project::{DocumentView, ProjectError, Statistics, Suggestion};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{ApiError, AppState};

type ApiResult<T> = Result<Json<T>, ApiError>;

/// `Json` whose rejections use the `{code, message}` error body.
pub struct Body<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ApiError::new(e.status(), "bad_request", e.body_text())),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{id}", get(project_summary))
        .route("/projects/{id}/next", get(next_document))
        .route("/projects/{id}/documents/{uid}", get(document))
        .route("/projects/{id}/interactions", post(submit_interaction))
        .route("/projects/{id}/functions", get(list_functions).post(accept_functions))
        .route("/projects/{id}/functions/{rule_id}", delete(remove_function))
        .route("/projects/{id}/statistics", get(statistics))
        .route("/projects/{id}/concepts", get(list_concepts).post(create_concept))
        .route("/projects/{id}/concepts/{name}", get(get_concept).delete(delete_concept))
        .route(
            "/projects/{id}/concepts/{name}/elements",
            get(list_elements).post(add_element).delete(delete_element),
        )
        .route("/projects/{id}/train", post(train))
        .route("/projects/{id}/export/labels", get(export_labels))
        .fallback(|| async { ApiError::not_found("no such route") })
        .with_state(state)
}

#[derive(Deserialize)]
struct CreateProject {
    name: String,
    /// File name (`unlabeled.jsonl`, `dev.jsonl`, ...) to contents.
    files: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Created {
    project_id: String,
}

async fn create_project(State(app): State<AppState>, Body(req): Body<CreateProject>) -> impl IntoResponse {
    app.create(&req.name, &req.files).await.map(|id| (StatusCode::CREATED, Json(Created { project_id: id })))
}

async fn list_projects(State(app): State<AppState>) -> Json<Vec<String>> {
    Json(app.project_ids().await)
}

#[derive(Serialize)]
struct Summary {
    id: String,
    revision: u64,
    class_names: Vec<String>,
    n_unlabeled: usize,
    n_dev: usize,
    n_test: usize,
    n_functions: usize,
    n_concepts: usize,
}

async fn project_summary(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Summary> {
    let handle = app.project(&id).await?;
    Ok(Json(
        handle
            .read(|p| Summary {
                id: p.id().to_string(),
                revision: p.revision(),
                class_names: p.config().class_names.clone(),
                n_unlabeled: p.corpora().unlabeled.len(),
                n_dev: p.corpora().dev.len(),
                n_test: p.corpora().test.len(),
                n_functions: p.functions().len(),
                n_concepts: p.concepts().len(),
            })
            .await,
    ))
}

async fn next_document(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<DocumentView> {
    let handle = app.project(&id).await?;
    let view = handle.read(|p| p.next_document().map(|d| p.document_view(d))).await?;
    Ok(Json(view))
}

async fn document(State(app): State<AppState>, Path((id, uid)): Path<(String, String)>) -> ApiResult<DocumentView> {
    let handle = app.project(&id).await?;
    let view = handle.read(|p| p.document(&uid).map(|d| p.document_view(d))).await;
    view.map(Json).ok_or_else(|| ApiError::not_found(format!("no document {uid}")))
}

async fn submit_interaction(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Body(ix): Body<Interaction>,
) -> ApiResult<Suggestion> {
    let handle = app.project(&id).await?;
    Ok(Json(handle.run(|p, ts| p.submit_interaction(ix, ts)).await?))
}

#[derive(Deserialize)]
struct AcceptRequest {
    suggestion_token: String,
    rule_ids: Vec<String>,
}

#[derive(Serialize)]
struct AcceptResponse {
    added: usize,
    #[serde(flatten)]
    statistics: Statistics,
}

async fn accept_functions(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Body(req): Body<AcceptRequest>,
) -> ApiResult<AcceptResponse> {
    let handle = app.project(&id).await?;
    let (added, statistics) =
        handle.run(|p, ts| p.accept_functions(&req.suggestion_token, &req.rule_ids, ts)).await?;
    Ok(Json(AcceptResponse { added, statistics }))
}

async fn remove_function(
    State(app): State<AppState>,
    Path((id, rule_id)): Path<(String, String)>,
) -> ApiResult<Statistics> {
    let handle = app.project(&id).await?;
    Ok(Json(handle.run(|p, ts| p.remove_function(&rule_id, ts)).await?))
}

#[derive(Serialize)]
struct FunctionView {
    rule_id: String,
    rendering: String,
    formula: String,
    accepted_at: u64,
    enabled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    dev_stats: Option<LfStats>,
}

async fn list_functions(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Vec<FunctionView>> {
    let handle = app.project(&id).await?;
    let views = handle
        .read(|p| {
            let stats = p.statistics().lf_stats.as_deref().unwrap_or_default();
            p.functions()
                .iter()
                .map(|f| FunctionView {
                    rule_id: f.id().to_string(),
                    rendering: f.rule.render(&p.config().class_names),
                    formula: f.rule.formula(),
                    accepted_at: f.accepted_at,
                    enabled: f.enabled,
                    dev_stats: stats.iter().find(|s| s.rule_id == f.id()).cloned(),
                })
                .collect()
        })
        .await;
    Ok(Json(views))
}

async fn statistics(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Statistics> {
    let handle = app.project(&id).await?;
    Ok(Json(handle.read(|p| p.statistics().clone()).await))
}

async fn list_concepts(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Vec<Concept>> {
    let handle = app.project(&id).await?;
    Ok(Json(handle.read(|p| p.concepts().iter().cloned().collect()).await))
}

async fn find_concept(app: &AppState, id: &str, name: &str) -> Result<Concept, ApiError> {
    let handle = app.project(id).await?;
    handle
        .read(|p| p.concepts().get(name).cloned())
        .await
        .ok_or_else(|| ApiError::not_found(format!("no concept {name}")))
}

async fn get_concept(State(app): State<AppState>, Path((id, name)): Path<(String, String)>) -> ApiResult<Concept> {
    Ok(Json(find_concept(&app, &id, &name).await?))
}

async fn list_elements(
    State(app): State<AppState>,
    Path((id, name)): Path<(String, String)>,
) -> ApiResult<Vec<ConceptElement>> {
    Ok(Json(find_concept(&app, &id, &name).await?.elements().to_vec()))
}

/// Applies concept edits in order and schedules a debounced refit.
async fn edit_concepts(app: &AppState, id: &str, ops: Vec<GlmOp>) -> Result<Vec<GlmOp>, ApiError> {
    let handle = app.project(id).await?;
    let inverses = handle
        .run(|p, ts| ops.into_iter().map(|op| p.edit_concepts(op, ts)).collect::<Result<Vec<_>, _>>())
        .await?;
    app.schedule_refit(handle);
    Ok(inverses)
}

#[derive(Deserialize)]
struct NewConcept {
    name: String,
    #[serde(default)]
    elements: Vec<ConceptElement>,
}

async fn create_concept(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Body(mut req): Body<NewConcept>,
) -> Result<impl IntoResponse, ApiError> {
    req.elements = req.elements.into_iter().map(normalize_element).collect();
    // validate everything up front so a bad element logs nothing
    let mut draft = Concept::new(&req.name, 0).map_err(|e| ApiError::from(ProjectError::from(e)))?;
    for element in &req.elements {
        draft.insert(element.clone(), None).map_err(|e| ApiError::from(ProjectError::from(e)))?;
    }
    let mut ops = vec![GlmOp::CreateConcept { name: req.name.clone() }];
    ops.extend(req.elements.into_iter().map(|element| GlmOp::AddElement { concept: req.name.clone(), element, position: None }));
    edit_concepts(&app, &id, ops).await?;
    Ok((StatusCode::CREATED, Json(find_concept(&app, &id, &req.name).await?)))
}

async fn delete_concept(State(app): State<AppState>, Path((id, name)): Path<(String, String)>) -> ApiResult<Concept> {
    let removed = find_concept(&app, &id, &name).await?;
    edit_concepts(&app, &id, vec![GlmOp::DeleteConcept { name }]).await?;
    Ok(Json(removed))
}

#[derive(Deserialize)]
struct ElementRequest {
    #[serde(flatten)]
    element: ConceptElement,
    #[serde(default)]
    position: Option<usize>,
}

async fn add_element(
    State(app): State<AppState>,
    Path((id, name)): Path<(String, String)>,
    Body(req): Body<ElementRequest>,
) -> ApiResult<Concept> {
    let element = normalize_element(req.element);
    edit_concepts(&app, &id, vec![GlmOp::AddElement { concept: name.clone(), element, position: req.position }]).await?;
    Ok(Json(find_concept(&app, &id, &name).await?))
}

async fn delete_element(
    State(app): State<AppState>,
    Path((id, name)): Path<(String, String)>,
    Body(req): Body<ElementRequest>,
) -> ApiResult<Concept> {
    let element = normalize_element(req.element);
    edit_concepts(&app, &id, vec![GlmOp::DeleteElement { concept: name.clone(), element }]).await?;
    Ok(Json(find_concept(&app, &id, &name).await?))
}

/// Token literals are stored case-folded; accept any case from clients.
fn normalize_element(element: ConceptElement) -> ConceptElement {
    match element.kind {
        ElementKind::Token => ConceptElement::token(&element.pattern),
        ElementKind::Regex => element,
    }
}

async fn train(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<EndModelReport> {
    let handle = app.project(&id).await?;
    Ok(Json(handle.run(|p, ts| p.train(ts)).await?))
}

async fn export_labels(State(app): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let handle = app.project(&id).await?;
    let body = handle
        .read(|p| {
            p.export_labels()
                .iter()
                .map(|row| serde_json::to_string(row).expect("labels serialize") + "\n")
                .collect::<String>()
        })
        .await;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body))
}
