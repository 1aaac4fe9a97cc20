//! Thin async client for the streamtgn HTTP API.

use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use streamtgn_proto::*;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request to {url} failed: {source}")]
    Transport {
        url: String,
        #[source]
        source: reqwest::Error,
    },

    #[error("server returned {status}: {}", body.error)]
    Api { status: u16, body: ErrorBody },
}

impl ClientError {
    /// The server rejected the request's input (bad file, flag or config).
    pub fn is_input_error(&self) -> bool {
        matches!(self, ClientError::Api { body, .. } if body.kind == ErrorKind::Input)
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:7878`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn call<B: Serialize + ?Sized, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<&B>,
    ) -> Result<T> {
        let url = format!("{}{}", self.base, path);
        let transport = |source| ClientError::Transport {
            url: url.clone(),
            source,
        };
        let mut req = self.http.request(method, &url);
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await.map_err(transport)?;
        let status = resp.status();
        if status.is_success() {
            return resp.json().await.map_err(transport);
        }
        let text = resp.text().await.map_err(transport)?;
        let body = serde_json::from_str(&text).unwrap_or(ErrorBody {
            error: text,
            kind: if status.is_client_error() {
                ErrorKind::Input
            } else {
                ErrorKind::Internal
            },
            line: None,
        });
        Err(ClientError::Api {
            status: status.as_u16(),
            body,
        })
    }

    async fn post<B: Serialize + ?Sized, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        self.call(Method::POST, path, Some(body)).await
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.call::<(), T>(Method::GET, path, None).await
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/health").await
    }

    pub async fn gen(&self, req: &GenRequest) -> Result<GenResponse> {
        self.post("/v1/gen", req).await
    }

    pub async fn verify(&self, req: &RunRequest) -> Result<VerifyResponse> {
        self.post("/v1/verify", req).await
    }

    pub async fn bench(&self, req: &BenchRequest) -> Result<BenchResponse> {
        self.post("/v1/bench", req).await
    }

    pub async fn staleness(&self, req: &StalenessRequest) -> Result<StalenessResponse> {
        self.post("/v1/staleness", req).await
    }

    pub async fn policy_compare(&self, req: &PolicyRequest) -> Result<PolicyResponse> {
        self.post("/v1/policy-compare", req).await
    }

    pub async fn speedup_table(&self, req: &SpeedupRequest) -> Result<SpeedupResponse> {
        self.post("/v1/speedup-table", req).await
    }

    pub async fn params_init(&self, req: &ParamsInitRequest) -> Result<ParamsText> {
        self.post("/v1/params/init", req).await
    }

    pub async fn params_dump(&self, text: impl Into<String>) -> Result<ParamsSummary> {
        self.post("/v1/params/dump", &ParamsText { text: text.into() }).await
    }

    pub async fn create_session(&self, req: &CreateSession) -> Result<SessionCreated> {
        self.post("/v1/sessions", req).await
    }

    pub async fn session(&self, id: u64) -> Result<SessionStatus> {
        self.get(&format!("/v1/sessions/{id}")).await
    }

    pub async fn delete_session(&self, id: u64) -> Result<()> {
        let url = format!("{}/v1/sessions/{id}", self.base);
        let resp = self
            .http
            .delete(&url)
            .send()
            .await
            .map_err(|source| ClientError::Transport { url, source })?;
        match resp.status() {
            StatusCode::NO_CONTENT => Ok(()),
            status => Err(ClientError::Api {
                status: status.as_u16(),
                body: resp.json().await.unwrap_or(ErrorBody {
                    error: status.to_string(),
                    kind: ErrorKind::Internal,
                    line: None,
                }),
            }),
        }
    }

    pub async fn process_batch(&self, id: u64, edges: &EdgeList) -> Result<BatchResult> {
        self.post(&format!("/v1/sessions/{id}/batches"), edges).await
    }

    pub async fn enqueue(&self, id: u64, edges: &EdgeList) -> Result<Enqueued> {
        self.post(&format!("/v1/sessions/{id}/edges"), edges).await
    }

    pub async fn step(&self, id: u64) -> Result<BatchResult> {
        self.post(&format!("/v1/sessions/{id}/step"), &()).await
    }

    pub async fn embedding(&self, id: u64, node: usize) -> Result<Embedding> {
        self.get(&format!("/v1/sessions/{id}/embeddings/{node}")).await
    }
}
