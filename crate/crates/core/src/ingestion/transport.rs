use std::path::PathBuf;
use std::time::Duration;

use super::IngestError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: Vec<u8>,
    pub retry_after: Option<Duration>,
}

/// Issues a GET for a path relative to the API root, e.g. `match/M1`.
pub trait Transport: Send + Sync {
    fn get(&self, path: &str) -> Result<Response, IngestError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, IngestError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| IngestError::Transport(e.to_string()))?;
        Ok(Self { client, base_url: base_url.trim_end_matches('/').to_string(), api_key })
    }
}

impl Transport for HttpTransport {
    fn get(&self, path: &str) -> Result<Response, IngestError> {
        let mut req = self.client.get(format!("{}/{path}", self.base_url));
        if let Some(key) = &self.api_key {
            req = req.header("X-Api-Key", key);
        }
        let resp = req.send().map_err(|e| IngestError::Transport(e.without_url().to_string()))?;
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let body = resp.bytes().map_err(|e| IngestError::Transport(e.without_url().to_string()))?.to_vec();
        Ok(Response { status, body, retry_after })
    }
}

/// Serves `{dir}/{path}.json`; a missing file answers 404.
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl Transport for FixtureTransport {
    fn get(&self, path: &str) -> Result<Response, IngestError> {
        if path.split('/').any(|seg| seg.is_empty() || seg == "." || seg == "..") {
            return Ok(Response { status: 404, body: Vec::new(), retry_after: None });
        }
        let file = self.dir.join(format!("{path}.json"));
        match std::fs::read(&file) {
            Ok(body) => Ok(Response { status: 200, body, retry_after: None }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Response { status: 404, body: Vec::new(), retry_after: None }),
            Err(e) => Err(IngestError::Transport(format!("{}: {e}", file.display()))),
        }
    }
}
