use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::request::Parts;
use axum::http::{header, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use meronym_core::contact::{Channel, Contact};
use meronym_core::delivery::OutboxFilter;
use meronym_core::ids::{ContributionId, EndorsementId, QuestionId, UserId};
use meronym_core::qa::{ExpertRequest, HelperRequest};
use meronym_core::service::NewQuestion;
use meronym_core::signals::{IdentitySignal, RelationshipCategory, Seniority};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

use crate::error::ApiError;
use crate::server::AppState;

type ApiResult<T = Json<Value>> = Result<T, ApiError>;

/// JSON body whose rejections render as `BadRequest` error bodies.
struct Body<T>(T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let Json(value) = Json::<T>::from_request(req, state).await?;
        Ok(Body(value))
    }
}

struct Query<T>(T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Query<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        let axum::extract::Query(value) = axum::extract::Query::<T>::from_request_parts(parts, state).await?;
        Ok(Query(value))
    }
}

fn bearer(parts: &Parts) -> Option<&str> {
    parts
        .headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

/// The account behind the request's session token.
struct Caller(UserId);

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        bearer(parts)
            .and_then(|t| state.service.user_for_session(t))
            .map(Caller)
            .ok_or_else(ApiError::unauthorized)
    }
}

struct Admin;

impl FromRequestParts<AppState> for Admin {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        match bearer(parts) {
            Some(t) if !state.admin_token.is_empty() && t == state.admin_token => Ok(Admin),
            Some(_) => Err(ApiError::forbidden("admin token required")),
            None => Err(ApiError::unauthorized()),
        }
    }
}

/// Either the admin or a signed-in account.
enum Viewer {
    Admin,
    User(UserId),
}

impl FromRequestParts<AppState> for Viewer {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        if Admin::from_request_parts(parts, state).await.is_ok() {
            return Ok(Viewer::Admin);
        }
        Caller::from_request_parts(parts, state).await.map(|Caller(u)| Viewer::User(u))
    }
}

fn to_json<T: Serialize>(value: T) -> Json<Value> {
    Json(serde_json::to_value(value).expect("response types serialize"))
}

fn created<T: Serialize>(value: T) -> (StatusCode, Json<Value>) {
    (StatusCode::CREATED, to_json(value))
}

/// Persists after every request that may have changed state.
async fn persist_after(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let mutating = !matches!(*req.method(), Method::GET | Method::HEAD | Method::OPTIONS);
    let response = next.run(req).await;
    if mutating {
        if let Err(e) = state.persist() {
            return ApiError::from(e).into_response();
        }
    }
    response
}

pub(crate) fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/accounts", post(register))
        .route("/accounts/{id}/verify", post(verify))
        .route("/claims", post(claim))
        .route("/admin/claims/{id}/approve", post(approve_claim))
        .route("/admin/trace/{platform}/{post_id}", get(trace_post))
        .route("/admin/deliver", post(deliver))
        .route("/admin/flush", post(flush))
        .route("/endorsements", post(request_endorsement))
        .route("/endorsements/{id}", get(endorsement))
        .route("/endorsements/{id}/respond", post(respond_endorsement))
        .route("/endorsements/{id}/revoke", post(revoke_endorsement))
        .route("/signals/self", get(self_signals))
        .route("/signals/endorser", get(endorser_signals))
        .route("/signals/relational", get(relational_signals))
        .route("/meronyms/audit", post(audit))
        .route("/questions", post(create_question))
        .route("/questions/preview", post(preview_question))
        .route("/questions/{id}/experts", post(add_experts))
        .route("/questions/{id}/helpers", post(add_helpers))
        .route("/questions/{id}/answers", post(create_answer))
        .route("/answers/{id}/moderate", post(moderate))
        .route("/moderation", get(moderation_queue))
        .route("/users/{id}/questions", get(user_questions))
        .route("/feed", get(feed))
        .route("/outbox", get(outbox))
        .route("/platforms/{name}/posts", get(platform_posts))
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(state.clone(), persist_after))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such route")
}

async fn health(State(s): State<AppState>) -> Json<Value> {
    to_json(s.service.health())
}

// ---- accounts and claims ----

#[derive(Deserialize)]
struct RegisterBody {
    full_name: String,
    handle: String,
    #[serde(default)]
    contact_email: Option<String>,
    #[serde(default = "default_seniority")]
    seniority: Seniority,
}

fn default_seniority() -> Seniority {
    Seniority::Junior
}

/// The verification token is not returned: it goes to the handle's inbox so
/// that only the handle's owner can complete verification.
async fn register(State(s): State<AppState>, Body(b): Body<RegisterBody>) -> ApiResult<impl IntoResponse> {
    let reg = s.service.register(&b.full_name, &b.handle, b.contact_email.as_deref(), b.seniority)?;
    Ok(created(json!({ "account": reg.account, "session_token": reg.session_token })))
}

#[derive(Deserialize)]
struct VerifyBody {
    token: String,
}

async fn verify(State(s): State<AppState>, Path(id): Path<String>, Body(b): Body<VerifyBody>) -> ApiResult {
    Ok(to_json(s.service.verify(&UserId::new(id), &b.token)?))
}

#[derive(Deserialize)]
struct ClaimBody {
    /// Author profile URL or bare author id.
    author: String,
}

async fn claim(State(s): State<AppState>, Caller(user): Caller, Body(b): Body<ClaimBody>) -> ApiResult {
    let state = s.service.claim(&user, &b.author)?;
    Ok(to_json(json!({ "user_id": user, "claim_state": state })))
}

async fn approve_claim(State(s): State<AppState>, _: Admin, Path(id): Path<String>) -> ApiResult {
    Ok(to_json(s.service.approve_claim(&UserId::new(id))?))
}

async fn trace_post(State(s): State<AppState>, _: Admin, Path((platform, post_id)): Path<(String, String)>) -> ApiResult {
    Ok(to_json(s.service.trace_post(&platform, &post_id)?))
}

async fn deliver(State(s): State<AppState>, _: Admin) -> Json<Value> {
    to_json(json!({ "delivered": s.service.deliver_notifications() }))
}

async fn flush(State(s): State<AppState>, _: Admin) -> Json<Value> {
    to_json(s.service.flush())
}

// ---- endorsements ----

#[derive(Deserialize)]
struct EndorsementRequestBody {
    /// Endorser's author profile URL or bare author id.
    profile: String,
    contact: String,
}

async fn request_endorsement(
    State(s): State<AppState>,
    Caller(user): Caller,
    Body(b): Body<EndorsementRequestBody>,
) -> ApiResult<impl IntoResponse> {
    Ok(created(s.service.request_endorsement(&user, &b.profile, &b.contact)?))
}

/// Visible to both parties; the endorser also gets the example lines their
/// consent would unlock.
async fn endorsement(State(s): State<AppState>, Caller(user): Caller, Path(id): Path<String>) -> ApiResult {
    let id = EndorsementId::new(id);
    let endorsement = s.service.endorsement(&id)?;
    if endorsement.endorsee != user && endorsement.endorser.as_ref() != Some(&user) {
        return Err(ApiError::forbidden("not a party to this endorsement"));
    }
    let preview = s.service.endorsement_preview(&id)?;
    Ok(to_json(json!({ "endorsement": endorsement, "preview": preview })))
}

#[derive(Deserialize)]
struct RespondBody {
    accept: bool,
    #[serde(default)]
    relationship: Option<RelationshipCategory>,
    #[serde(default)]
    name_reveal: bool,
}

async fn respond_endorsement(
    State(s): State<AppState>,
    Caller(user): Caller,
    Path(id): Path<String>,
    Body(b): Body<RespondBody>,
) -> ApiResult {
    let id = EndorsementId::new(id);
    Ok(to_json(s.service.respond_endorsement(&user, &id, b.accept, b.relationship, b.name_reveal)?))
}

async fn revoke_endorsement(State(s): State<AppState>, Caller(user): Caller, Path(id): Path<String>) -> ApiResult {
    Ok(to_json(s.service.revoke_endorsement(&user, &EndorsementId::new(id))?))
}

// ---- signals and audit ----

#[derive(Serialize)]
struct SignalView {
    signal: IdentitySignal,
    rendered: String,
}

fn signal_views(signals: Vec<IdentitySignal>) -> Json<Value> {
    let views: Vec<SignalView> = signals
        .into_iter()
        .map(|signal| SignalView {
            rendered: signal.render(),
            signal,
        })
        .collect();
    to_json(views)
}

async fn self_signals(State(s): State<AppState>, Caller(user): Caller) -> ApiResult {
    Ok(signal_views(s.service.self_signals(&user)?))
}

async fn endorser_signals(State(s): State<AppState>, Caller(user): Caller) -> ApiResult {
    Ok(signal_views(s.service.endorser_signals(&user)?))
}

#[derive(Deserialize)]
struct RelationalQuery {
    expert: String,
}

async fn relational_signals(State(s): State<AppState>, Caller(user): Caller, Query(q): Query<RelationalQuery>) -> ApiResult {
    Ok(signal_views(s.service.relational_signals(&user, &q.expert)?))
}

#[derive(Deserialize)]
struct AuditBody {
    #[serde(default)]
    signals: Vec<IdentitySignal>,
}

async fn audit(State(s): State<AppState>, Caller(user): Caller, Body(b): Body<AuditBody>) -> ApiResult {
    Ok(to_json(s.service.audit(&user, &b.signals)?))
}

// ---- questions, answers, moderation ----

async fn create_question(
    State(s): State<AppState>,
    Caller(user): Caller,
    Body(b): Body<NewQuestion>,
) -> ApiResult<impl IntoResponse> {
    Ok(created(s.service.create_question(&user, &b)?))
}

#[derive(Deserialize)]
struct PreviewBody {
    text: String,
    #[serde(default)]
    meronym: Vec<IdentitySignal>,
    /// Handles that would be mentioned publicly.
    #[serde(default)]
    mentions: Vec<String>,
}

async fn preview_question(State(s): State<AppState>, Caller(user): Caller, Body(b): Body<PreviewBody>) -> ApiResult {
    Ok(to_json(s.service.preview_question(&user, &b.text, &b.meronym, &b.mentions)?))
}

#[derive(Deserialize)]
struct ExpertsBody {
    experts: Vec<ExpertRequest>,
}

async fn add_experts(
    State(s): State<AppState>,
    Caller(user): Caller,
    Path(id): Path<String>,
    Body(b): Body<ExpertsBody>,
) -> ApiResult {
    Ok(to_json(s.service.add_experts(&user, &QuestionId::new(id), &b.experts)?))
}

#[derive(Deserialize)]
struct HelpersBody {
    helpers: Vec<HelperRequest>,
}

async fn add_helpers(
    State(s): State<AppState>,
    Caller(user): Caller,
    Path(id): Path<String>,
    Body(b): Body<HelpersBody>,
) -> ApiResult {
    Ok(to_json(s.service.add_helpers(&user, &QuestionId::new(id), &b.helpers)?))
}

#[derive(Deserialize)]
struct AnswerBody {
    text: String,
    #[serde(default)]
    meronym: Vec<IdentitySignal>,
}

async fn create_answer(
    State(s): State<AppState>,
    Caller(user): Caller,
    Path(id): Path<String>,
    Body(b): Body<AnswerBody>,
) -> ApiResult<impl IntoResponse> {
    Ok(created(s.service.create_answer(&user, &QuestionId::new(id), &b.text, &b.meronym)?))
}

#[derive(Deserialize)]
struct ModerateBody {
    approve: bool,
}

async fn moderate(
    State(s): State<AppState>,
    Caller(user): Caller,
    Path(id): Path<String>,
    Body(b): Body<ModerateBody>,
) -> ApiResult {
    Ok(to_json(s.service.moderate(&user, &ContributionId::new(id), b.approve)?))
}

async fn moderation_queue(State(s): State<AppState>, Caller(user): Caller) -> ApiResult {
    Ok(to_json(s.service.moderation_queue(&user)?))
}

async fn user_questions(State(s): State<AppState>, Caller(user): Caller, Path(id): Path<String>) -> ApiResult {
    if user.as_str() != id {
        return Err(ApiError::forbidden("questions are listed only for their poster"));
    }
    Ok(to_json(s.service.list_questions(&user)?))
}

async fn feed(State(s): State<AppState>) -> Json<Value> {
    to_json(s.service.feed())
}

// ---- observability ----

#[derive(Deserialize)]
struct OutboxQuery {
    #[serde(default)]
    recipient: Option<String>,
    #[serde(default)]
    channel: Option<Channel>,
}

/// The admin sees every notification; an account sees only those addressed
/// to its own handle or email.
async fn outbox(State(s): State<AppState>, viewer: Viewer, Query(q): Query<OutboxQuery>) -> ApiResult {
    let recipient = q
        .recipient
        .map(|r| Contact::parse(&r).map(|c| c.address().to_owned()).unwrap_or(r));
    let mut items = s.service.outbox(&OutboxFilter {
        recipient,
        channel: q.channel,
    });
    if let Viewer::User(user) = viewer {
        let account = s.service.account(&user)?;
        let own: Vec<String> = std::iter::once(account.handle)
            .chain(account.contact_email)
            .filter_map(|c| Contact::parse(&c).map(|c| c.address().to_owned()))
            .collect();
        items.retain(|n| own.contains(&n.recipient));
    }
    Ok(to_json(items))
}

async fn platform_posts(State(s): State<AppState>, Path(name): Path<String>) -> ApiResult {
    Ok(to_json(s.service.platform_posts(&name)?))
}
