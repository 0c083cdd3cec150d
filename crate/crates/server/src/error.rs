use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sketchsem::sketch::{SketchError, VectorSketch};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Error body: `{"error": {status, message, fields, request_id}}`.
#[derive(Clone, Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub fields: Vec<FieldError>,
    pub request_id: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            fields: Vec::new(),
            request_id: None,
        }
    }

    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        let message = message.into();
        Self {
            fields: vec![FieldError {
                field: field.into(),
                message: message.clone(),
            }],
            ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
        }
    }

    pub fn internal(message: impl Into<String>, request_id: &str) -> Self {
        log::error!("request {request_id}: model failure");
        Self {
            request_id: Some(request_id.to_string()),
            ..Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
        }
    }

    pub fn with_request_id(mut self, id: &str) -> Self {
        self.request_id = Some(id.to_string());
        self
    }

    pub fn body(&self) -> serde_json::Value {
        serde_json::json!({
            "error": {
                "status": self.status.as_u16(),
                "message": self.message,
                "fields": self.fields,
                "request_id": self.request_id,
            }
        })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(self.body())).into_response()
    }
}

/// Two-stage decoding: malformed JSON is a 400, well-formed JSON with bad or
/// missing fields is a 422 naming the offending path.
pub fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("malformed JSON at line {}, column {}: {e}", e.line(), e.column()),
        )
    })?;
    parse_value(value)
}

pub fn parse_value<T: DeserializeOwned>(value: serde_json::Value) -> Result<T, ApiError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { String::from("body") } else { path };
        ApiError::invalid(field, e.into_inner().to_string())
    })
}

/// Parses a sketch nested under `field`, prefixing diagnostics with it.
pub fn parse_sketch(value: serde_json::Value, field: &str) -> Result<VectorSketch, ApiError> {
    let bad_label = value["strokes"].as_array().and_then(|strokes| {
        strokes
            .iter()
            .position(|s| s["label"].as_i64().is_some_and(|l| !(0..=21).contains(&l)))
    });
    VectorSketch::from_json_value(value).map_err(|e| sketch_error(e, field, bad_label))
}

fn sketch_error(e: SketchError, field: &str, bad_label: Option<usize>) -> ApiError {
    let message = e.to_string();
    let path = match &e {
        SketchError::Field { field: f, .. } if f != "sketch" => format!("{field}.{f}"),
        SketchError::OutsideCanvas { stroke, point, .. } => format!("{field}.strokes[{stroke}].points[{point}]"),
        SketchError::InvalidCanvas(..) => format!("{field}.canvas"),
        SketchError::UnknownCategory(_) => match bad_label {
            Some(i) => format!("{field}.strokes[{i}].label"),
            None => format!("{field}.strokes"),
        },
        _ => field.to_string(),
    };
    ApiError::invalid(path, message)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn internal_errors_carry_the_request_id() {
        let body = ApiError::internal("model failure: boom", "abc-123").body();
        assert_eq!(body["error"]["status"], 500);
        assert_eq!(body["error"]["request_id"], "abc-123");
        assert_eq!(body["error"]["fields"], serde_json::json!([]));
    }

    #[test]
    fn syntax_is_400_and_fields_are_422() {
        let e = parse_body::<serde_json::Value>(b"{").unwrap_err();
        assert_eq!(e.status, StatusCode::BAD_REQUEST);
        #[derive(Debug, serde::Deserialize)]
        #[allow(dead_code)]
        struct Req {
            steps: usize,
        }
        let e = parse_body::<Req>(br#"{"steps": "many"}"#).unwrap_err();
        assert_eq!(e.status, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(e.fields[0].field, "steps");
    }
}
