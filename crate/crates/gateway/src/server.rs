//! HTTP API. All bodies are JSON; `/events` streams newline-delimited
//! [`OutboundFrame`]s, starting with everything already sent.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bytes::Bytes;
use futures::stream::{self, Stream, StreamExt};
use remini_core::conversation::{Condition, Participant, ParticipantId};
use remini_core::transcript::Transcript;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::broadcast::error::RecvError;

use crate::error::GatewayError;
use crate::frames::{FrameKind, InboundFrame, OutboundFrame};
use crate::session::{Ack, Broadcast, GatewayConfig, SessionHandle};

/// Registry of live sessions.
pub struct Gateway {
    config: GatewayConfig,
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Arc<Self> {
        Arc::new(Self {
            config,
            sessions: RwLock::new(HashMap::new()),
        })
    }

    pub fn create_session(
        &self,
        condition: Condition,
        participants: Vec<Participant>,
    ) -> Result<CreatedSession, GatewayError> {
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let (handle, join_tokens) = SessionHandle::spawn(session_id.clone(), condition, participants, &self.config)?;
        self.sessions.write().unwrap().insert(session_id.clone(), Arc::new(handle));
        tracing::info!(session = %session_id, %condition, "session created");
        Ok(CreatedSession { session_id, join_tokens })
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionHandle>, GatewayError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| GatewayError::UnknownSession(id.to_string()))
    }

    /// The session and the participant a token belongs to, checked against
    /// the claimed sender when there is one.
    fn authorize(
        &self,
        id: &str,
        token: &str,
        sender: Option<&ParticipantId>,
    ) -> Result<(Arc<SessionHandle>, ParticipantId), GatewayError> {
        let session = self.session(id)?;
        let owner = session.authorize(token)?.clone();
        if let Some(sender) = sender {
            if session.participants().iter().all(|p| &p.id != sender) {
                return Err(GatewayError::UnknownParticipant(sender.to_string()));
            }
            if sender != &owner {
                return Err(GatewayError::Unauthorized);
            }
        }
        Ok((session, owner))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    pub condition: Condition,
    pub participants: Vec<Participant>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
    /// Participant id to join token.
    pub join_tokens: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostMessage {
    pub sender: ParticipantId,
    pub token: String,
    pub body: String,
    #[serde(default)]
    pub client_ts: Option<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostContinue {
    pub sender: ParticipantId,
    pub token: String,
    pub message_id: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostEnd {
    pub token: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TokenQuery {
    pub token: String,
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/continue", post(post_continue))
        .route("/sessions/{id}/end", post(post_end))
        .route("/sessions/{id}/transcript", get(get_transcript))
        .route("/sessions/{id}/events", get(get_events))
        .with_state(gateway)
}

/// Serves the API on `listener` until the task is dropped.
pub async fn serve(listener: TcpListener, gateway: Arc<Gateway>) -> std::io::Result<()> {
    axum::serve(listener, router(gateway)).await
}

async fn create_session(
    State(gateway): State<Arc<Gateway>>,
    Json(request): Json<CreateSession>,
) -> Result<(StatusCode, Json<CreatedSession>), GatewayError> {
    let created = gateway.create_session(request.condition, request.participants)?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn post_message(
    State(gateway): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Json(request): Json<PostMessage>,
) -> Result<(StatusCode, Json<Ack>), GatewayError> {
    let (session, sender) = gateway.authorize(&id, &request.token, Some(&request.sender))?;
    let ack = session
        .submit(InboundFrame {
            session_id: id,
            sender,
            kind: FrameKind::Text,
            body: request.body,
            client_ts: request.client_ts,
        })
        .await?;
    Ok((StatusCode::ACCEPTED, Json(ack)))
}

async fn post_continue(
    State(gateway): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Json(request): Json<PostContinue>,
) -> Result<(StatusCode, Json<Ack>), GatewayError> {
    let (session, sender) = gateway.authorize(&id, &request.token, Some(&request.sender))?;
    let ack = session
        .submit(InboundFrame {
            session_id: id,
            sender,
            kind: FrameKind::ContinuePress,
            body: request.message_id.to_string(),
            client_ts: None,
        })
        .await?;
    Ok((StatusCode::ACCEPTED, Json(ack)))
}

async fn post_end(
    State(gateway): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Json(request): Json<PostEnd>,
) -> Result<StatusCode, GatewayError> {
    let (session, _) = gateway.authorize(&id, &request.token, None)?;
    session.end().await?;
    Ok(StatusCode::OK)
}

async fn get_transcript(
    State(gateway): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Query(query): Query<TokenQuery>,
) -> Result<Json<Transcript>, GatewayError> {
    let (session, _) = gateway.authorize(&id, &query.token, None)?;
    Ok(Json(session.transcript().await?))
}

async fn get_events(
    State(gateway): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Query(query): Query<TokenQuery>,
) -> Result<Response, GatewayError> {
    let (session, _) = gateway.authorize(&id, &query.token, None)?;
    let body = Body::from_stream(frame_stream(session).map(|frames| {
        let mut out = String::new();
        for frame in frames {
            out.push_str(&serde_json::to_string(&frame).expect("frames serialize"));
            out.push('\n');
        }
        Ok::<_, std::convert::Infallible>(Bytes::from(out))
    }));
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

/// History first, then live frames, in batches. Ends once the session has
/// closed and every frame has been sent.
fn frame_stream(session: Arc<SessionHandle>) -> impl Stream<Item = Vec<OutboundFrame>> {
    let subscription = session.subscribe();
    let last = subscription.history.last().map(|f| f.message.message_id).unwrap_or(0);
    let history = stream::iter((!subscription.history.is_empty()).then_some(subscription.history));
    let live = stream::unfold(
        (!subscription.closed).then_some((subscription.live, last, session)),
        |state| async move {
            let (mut live, mut last, session) = state?;
            loop {
                match live.recv().await {
                    Ok(Broadcast::Frame(frame)) if frame.message.message_id <= last => continue,
                    Ok(Broadcast::Frame(frame)) => {
                        last = frame.message.message_id;
                        return Some((vec![frame], Some((live, last, session))));
                    }
                    Err(RecvError::Lagged(_)) => {
                        let missed = session.frames_after(last);
                        if let Some(f) = missed.last() {
                            last = f.message.message_id;
                            return Some((missed, Some((live, last, session))));
                        }
                    }
                    Ok(Broadcast::Closed) | Err(RecvError::Closed) => return None,
                }
            }
        },
    );
    history.chain(live)
}
