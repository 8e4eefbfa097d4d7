use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::IngestError;

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String, IngestError> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Downloads `url` to `dest` and verifies its SHA-256 digest.
///
/// A file already present at `dest` with the expected digest is returned
/// without touching the network. On a digest mismatch the downloaded bytes
/// are removed.
pub fn fetch_file(
    url: &str,
    expected_sha256: &str,
    dest: impl AsRef<Path>,
) -> Result<PathBuf, IngestError> {
    let dest = dest.as_ref();
    let expected = expected_sha256.trim().to_ascii_lowercase();
    if dest.is_file() && sha256_file(dest)? == expected {
        return Ok(dest.to_path_buf());
    }
    if let Some(parent) = dest.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }

    let resp = ureq::get(url)
        .call()
        .map_err(|e| IngestError::Network(format!("{url}: {e}")))?;
    let mut partial = dest.as_os_str().to_owned();
    partial.push(".part");
    let partial = PathBuf::from(partial);

    let mut hasher = Sha256::new();
    let result = (|| -> Result<(), IngestError> {
        let mut reader = resp.into_reader();
        let mut out = File::create(&partial)?;
        let mut buf = vec![0u8; 1 << 16];
        loop {
            let n = reader
                .read(&mut buf)
                .map_err(|e| IngestError::Network(format!("{url}: {e}")))?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
            out.write_all(&buf[..n])?;
        }
        out.sync_all()?;
        Ok(())
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&partial);
        return Err(e);
    }

    let actual = hex::encode(hasher.finalize());
    if actual != expected {
        std::fs::remove_file(&partial)?;
        return Err(IngestError::DigestMismatch { expected, actual });
    }
    std::fs::rename(&partial, dest)?;
    Ok(dest.to_path_buf())
}
