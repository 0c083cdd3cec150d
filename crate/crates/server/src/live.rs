//! `/live`: one sketch per connection, relabeled after every edit. Messages
//! are handled strictly in arrival order.

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use serde::Deserialize;
use serde_json::{json, Value};
use sketchsem::harness::label_sketch;
use sketchsem::sketch::{Point, Stroke, VectorSketch};

use crate::error::{parse_body, ApiError};
use crate::{label_response, AppState};

const DEFAULT_CANVAS: u32 = 512;

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ClientMessage {
    /// Clears the session and sets the canvas size.
    Canvas { width: u32, height: u32 },
    /// Appends one stroke; `parent` defaults to the stroke's index.
    Stroke { points: Vec<[f64; 2]>, parent: Option<u64> },
    /// Removes the stroke at `index`.
    Erase { index: usize },
    Reset,
}

pub(crate) async fn upgrade(State(state): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| session(state, socket))
}

struct Session {
    sketch: VectorSketch,
    revision: u64,
}

impl Session {
    fn apply(&mut self, msg: ClientMessage) -> Result<(), ApiError> {
        match msg {
            ClientMessage::Canvas { width, height } => {
                let fresh = VectorSketch::new(width, height);
                fresh.validate().map_err(|e| ApiError::invalid("width", e.to_string()))?;
                self.sketch = fresh;
            }
            ClientMessage::Reset => self.sketch.strokes.clear(),
            ClientMessage::Erase { index } => {
                if index >= self.sketch.strokes.len() {
                    return Err(ApiError::invalid(
                        "index",
                        format!("no stroke {index}; the sketch has {}", self.sketch.strokes.len()),
                    ));
                }
                self.sketch.strokes.remove(index);
            }
            ClientMessage::Stroke { points, parent } => {
                let parent = parent.unwrap_or(self.sketch.strokes.len() as u64);
                let stroke = Stroke::new(points.iter().map(|&[x, y]| Point::new(x, y)).collect(), parent, None);
                let mut next = self.sketch.clone();
                next.strokes.push(stroke);
                next.validate().map_err(|e| ApiError::invalid("points", e.to_string()))?;
                self.sketch = next;
            }
        }
        self.revision += 1;
        Ok(())
    }
}

fn error_message(e: &ApiError) -> Value {
    let mut body = e.body();
    body["type"] = json!("error");
    body
}

async fn session(state: AppState, mut socket: WebSocket) {
    let mut s = Session {
        sketch: VectorSketch::new(DEFAULT_CANVAS, DEFAULT_CANVAS),
        revision: 0,
    };
    while let Some(Ok(msg)) = socket.recv().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = match parse_body::<ClientMessage>(text.as_bytes()).and_then(|m| s.apply(m)) {
            Err(e) => error_message(&e),
            Ok(()) => {
                let sketch = s.sketch.clone();
                let st = state.clone();
                match tokio::task::spawn_blocking(move || label_sketch(st.ssi(), &sketch, true)).await {
                    Ok(Ok(out)) => {
                        let mut body = label_response(&out.sketch, &out.confidences);
                        body["type"] = json!("labels");
                        body["revision"] = json!(s.revision);
                        body
                    }
                    Ok(Err(e)) => error_message(&ApiError::internal(format!("model failure: {e}"), "live")),
                    Err(_) => error_message(&ApiError::internal("model task aborted", "live")),
                }
            }
        };
        if socket.send(Message::Text(reply.to_string().into())).await.is_err() {
            break;
        }
    }
}
