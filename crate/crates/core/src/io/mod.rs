//! File formats: capture histories, ground truth, posterior samples and
//! run manifests.
//!
//! Every CSV may open with `#` comment lines; writers use them for the run
//! digest and for metadata, readers skip them.

mod capture;
mod manifest;
mod samples;
mod truth;

use std::path::Path;

pub use capture::{capture_csv_bytes, parse_capture_csv, read_capture_csv, write_capture_csv};
pub use manifest::{file_sha256, InputDigest, RunManifest};
pub use samples::{read_samples_csv, samples_csv_string, write_samples_csv, SampleFile};
pub use truth::{latent_csv_bytes, truth_csv_bytes, read_latent_csv, read_truth_csv, write_latent_csv, write_truth_csv};

use crate::error::{Error, Result};

pub(crate) const DIGEST_KEY: &str = "run_digest";

/// Writes `contents` in one operation, creating parent directories.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Comment header lines: the digest first, then `key=value` metadata.
pub fn comment_header(digest: Option<&str>, meta: &[(String, String)]) -> String {
    let mut s = String::new();
    if let Some(d) = digest {
        s.push_str(&format!("# {DIGEST_KEY}={d}\n"));
    }
    for (k, v) in meta {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s
}

/// `key=value` pairs from the leading comment lines of a file.
pub fn read_comment_metadata(text: &str) -> Vec<(String, String)> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| {
            let (k, v) = l.trim_start_matches('#').trim().split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

pub(crate) fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

pub(crate) fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

pub(crate) fn finish(header: String, w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    let body = w
        .into_inner()
        .map_err(|e| Error::numerical(format!("csv buffer: {e}")))?;
    let mut out = header.into_bytes();
    out.extend(body);
    Ok(out)
}

pub(crate) fn data_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}
