//! Record/replay of provider exchanges, keyed by a hash of the request.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{validate_request, ChatProvider, ProviderError, ProviderRequest, ProviderResponse};

/// One persisted exchange; stored as `<request hash>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub provider: String,
    pub request: ProviderRequest,
    pub response: ProviderResponse,
}

/// SHA-256 over the request's JSON encoding, hex encoded.
pub fn request_hash(request: &ProviderRequest) -> String {
    let bytes = serde_json::to_vec(request).expect("request serializes");
    hex::encode(Sha256::digest(bytes))
}

fn cassette_path(dir: &Path, hash: &str) -> PathBuf {
    dir.join(format!("{hash}.json"))
}

pub struct ReplayProvider {
    dir: PathBuf,
}

impl ReplayProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl ChatProvider for ReplayProvider {
    fn id(&self) -> String {
        "replay".into()
    }

    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        validate_request(request)?;
        let hash = request_hash(request);
        let path = cassette_path(&self.dir, &hash);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ProviderError::CassetteMiss { hash })
            }
            Err(e) => return Err(ProviderError::Config(format!("{}: {e}", path.display()))),
        };
        let cassette: Cassette = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Decode(format!("{}: {e}", path.display())))?;
        Ok(cassette.response)
    }
}

/// Forwards to `inner` and persists every successful exchange.
pub struct RecordingProvider<P> {
    inner: P,
    dir: PathBuf,
    writer: Mutex<()>,
}

impl<P: ChatProvider> RecordingProvider<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
            writer: Mutex::new(()),
        }
    }
}

impl<P: ChatProvider> ChatProvider for RecordingProvider<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let response = self.inner.complete(request)?;
        let cassette = Cassette {
            provider: self.inner.id(),
            request: request.clone(),
            response: response.clone(),
        };
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let io = |e: std::io::Error| ProviderError::Config(format!("{}: {e}", self.dir.display()));
        fs::create_dir_all(&self.dir).map_err(io)?;
        let path = cassette_path(&self.dir, &request_hash(request));
        let json = serde_json::to_string_pretty(&cassette).expect("cassette serializes");
        fs::write(path, json + "\n").map_err(io)?;
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{CountingProvider, GenerationParams, ScriptedProvider};

    fn request(msg: &str) -> ProviderRequest {
        ProviderRequest {
            system: "sys".into(),
            messages: vec![msg.into()],
            model: "m".into(),
            params: GenerationParams::default(),
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        assert_eq!(request_hash(&request("a")), request_hash(&request("a")));
        assert_ne!(request_hash(&request("a")), request_hash(&request("b")));
        let mut warm = request("a");
        warm.params.temperature = 0.7;
        assert_ne!(request_hash(&warm), request_hash(&request("a")));
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let live = CountingProvider::new(ScriptedProvider::new("script", |r| {
            Ok(format!("echo {}", r.messages[0]))
        }));
        let rec = RecordingProvider::new(live, dir.path());
        let recorded = rec.complete(&request("a")).unwrap();

        let replay = ReplayProvider::new(dir.path());
        assert_eq!(replay.complete(&request("a")).unwrap(), recorded);
        assert!(matches!(
            replay.complete(&request("zzz")),
            Err(ProviderError::CassetteMiss { .. })
        ));
    }
}
