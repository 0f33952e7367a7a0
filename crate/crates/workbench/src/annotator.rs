//! Client for an external annotator speaking the `POST /v1/annotate` JSON
//! protocol, and the offline equivalent: a saved response read from disk.

use std::path::Path;
use std::time::Duration;

use ner_workbench_core::backends::{AnnotateRequest, AnnotateResponse};
use ner_workbench_core::Error;

pub const ANNOTATE_PATH: &str = "/v1/annotate";

#[derive(Debug, Clone)]
pub struct AnnotatorClient {
    endpoint: String,
    http: reqwest::Client,
}

impl AnnotatorClient {
    /// `base` is the annotator's root URL; a URL already ending in
    /// `/v1/annotate` is used as is.
    pub fn new(base: &str) -> Self {
        Self::with_timeout(base, Duration::from_secs(300))
    }

    pub fn with_timeout(base: &str, timeout: Duration) -> Self {
        let base = base.trim_end_matches('/');
        let endpoint = if base.ends_with(ANNOTATE_PATH) {
            base.to_string()
        } else {
            format!("{base}{ANNOTATE_PATH}")
        };
        let http = reqwest::Client::builder()
            .connect_timeout(Duration::from_secs(10))
            .timeout(timeout)
            .build()
            .expect("HTTP client without TLS builds");
        AnnotatorClient { endpoint, http }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub async fn annotate(&self, request: &AnnotateRequest) -> Result<AnnotateResponse, Error> {
        let response = self
            .http
            .post(&self.endpoint)
            .json(request)
            .send()
            .await
            .map_err(|e| Error::BackendUnreachable(format!("{}: {e}", self.endpoint)))?;
        let status = response.status();
        let body = response
            .bytes()
            .await
            .map_err(|e| Error::BackendUnreachable(format!("{}: {e}", self.endpoint)))?;
        if status.is_server_error() {
            return Err(Error::BackendUnreachable(format!("{} answered {status}", self.endpoint)));
        }
        if !status.is_success() {
            return Err(Error::BackendProtocol(format!("{} answered {status}", self.endpoint)));
        }
        parse_response(&body)
    }
}

pub fn parse_response(bytes: &[u8]) -> Result<AnnotateResponse, Error> {
    serde_json::from_slice(bytes).map_err(|e| Error::BackendProtocol(e.to_string()))
}

/// Reads a response saved from an earlier annotator run.
pub fn load_predictions(path: &Path) -> Result<AnnotateResponse, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::BackendUnreachable(format!("{}: {e}", path.display())))?;
    parse_response(&bytes)
}
