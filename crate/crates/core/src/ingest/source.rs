use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::write_atomic;
use crate::ingest::IngestError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    RainfallCsv,
    NoaaIndexText,
    IodCsv,
}

/// Where one raw input lives and where remote copies are cached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub location: String,
    pub cache_dir: PathBuf,
}

impl SourceSpec {
    pub fn new(
        kind: SourceKind,
        location: impl Into<String>,
        cache_dir: impl Into<PathBuf>,
    ) -> Result<Self, IngestError> {
        let location = location.into();
        if location.trim().is_empty() {
            return Err(IngestError::InvalidSource("empty location".into()));
        }
        Ok(Self {
            kind,
            location,
            cache_dir: cache_dir.into(),
        })
    }

    pub fn is_url(&self) -> bool {
        is_url(&self.location)
    }

    /// `<cache_dir>/<sha256(location)>`.
    pub fn cache_path(&self) -> PathBuf {
        cache_path(&self.cache_dir, &self.location)
    }
}

pub fn is_url(location: &str) -> bool {
    location.starts_with("http://") || location.starts_with("https://")
}

pub fn cache_path(cache_dir: &Path, location: &str) -> PathBuf {
    cache_dir.join(hex::encode(Sha256::digest(location.as_bytes())))
}

fn cache_lock(path: &Path) -> Arc<Mutex<()>> {
    static LOCKS: OnceLock<Mutex<HashMap<PathBuf, Arc<Mutex<()>>>>> = OnceLock::new();
    let mut map = LOCKS
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    map.entry(path.to_path_buf()).or_default().clone()
}

/// Reads a local file, or a URL through the on-disk cache.
pub fn fetch_source(spec: &SourceSpec) -> Result<String, IngestError> {
    if spec.location.trim().is_empty() {
        return Err(IngestError::InvalidSource("empty location".into()));
    }
    if !spec.is_url() {
        return read_utf8(Path::new(&spec.location));
    }
    let path = spec.cache_path();
    let lock = cache_lock(&path);
    let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
    if path.exists() {
        log::debug!("cache hit for {}", spec.location);
        return read_utf8(&path);
    }
    let body = http_get(&spec.location)?;
    write_atomic(&path, &body).map_err(|e| IngestError::Io(e.to_string()))?;
    String::from_utf8(body).map_err(|_| IngestError::Io(format!("{} is not UTF-8", spec.location)))
}

fn read_utf8(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|e| IngestError::Io(format!("{}: {e}", path.display())))
}

fn http_get(url: &str) -> Result<Vec<u8>, IngestError> {
    match ureq::get(url).call() {
        Ok(mut resp) => resp
            .body_mut()
            .read_to_vec()
            .map_err(|e| IngestError::NetworkUnavailable(e.to_string())),
        Err(ureq::Error::StatusCode(code)) => Err(IngestError::HttpStatus(code)),
        Err(e) => Err(IngestError::NetworkUnavailable(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::thread;

    /// Serves `responses` in order, one per connection.
    fn serve(responses: Vec<String>) -> (String, thread::JoinHandle<usize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!(
            "http://{}/nino34.long.anom.data",
            listener.local_addr().unwrap()
        );
        let handle = thread::spawn(move || {
            let mut served = 0;
            for resp in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = [0u8; 4096];
                let _ = stream.read(&mut buf);
                stream.write_all(resp.as_bytes()).unwrap();
                served += 1;
            }
            served
        });
        (url, handle)
    }

    fn ok(body: &str) -> String {
        format!(
            "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
    }

    #[test]
    fn local_file_read_directly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rain.csv");
        fs::write(&p, "date,rain_mm\n").unwrap();
        let spec =
            SourceSpec::new(SourceKind::RainfallCsv, p.to_string_lossy(), dir.path()).unwrap();
        assert_eq!(fetch_source(&spec).unwrap(), "date,rain_mm\n");
    }

    #[test]
    fn download_then_cache_hit_without_network() {
        let cache = tempfile::tempdir().unwrap();
        let (url, server) = serve(vec![ok("1901 1901\n")]);
        let spec = SourceSpec::new(SourceKind::NoaaIndexText, url, cache.path()).unwrap();
        let first = fetch_source(&spec).unwrap();
        assert_eq!(server.join().unwrap(), 1);
        // server is gone now; the second read must come from the cache
        let second = fetch_source(&spec).unwrap();
        assert_eq!(first.as_bytes(), second.as_bytes());
        assert_eq!(fs::read(spec.cache_path()).unwrap(), b"1901 1901\n");
    }

    #[test]
    fn not_found_is_http_status() {
        let cache = tempfile::tempdir().unwrap();
        let (url, server) = serve(vec![
            "HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n".into(),
        ]);
        let spec = SourceSpec::new(SourceKind::NoaaIndexText, url, cache.path()).unwrap();
        assert_eq!(fetch_source(&spec), Err(IngestError::HttpStatus(404)));
        server.join().unwrap();
        assert!(!spec.cache_path().exists());
    }

    #[test]
    fn refused_connection_is_network_unavailable() {
        let port = TcpListener::bind("127.0.0.1:0")
            .unwrap()
            .local_addr()
            .unwrap()
            .port();
        let cache = tempfile::tempdir().unwrap();
        let spec = SourceSpec::new(
            SourceKind::IodCsv,
            format!("http://127.0.0.1:{port}/x"),
            cache.path(),
        )
        .unwrap();
        assert!(matches!(
            fetch_source(&spec),
            Err(IngestError::NetworkUnavailable(_))
        ));
    }

    #[test]
    fn empty_location_rejected() {
        assert!(SourceSpec::new(SourceKind::IodCsv, " ", "/tmp").is_err());
    }
}
