use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mcmc::McmcConfig;

use super::{read_file, write_file};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to repeat a fit, plus timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: McmcConfig,
    /// `(chain, stream)` pairs; each chain draws from stream `chain` of the
    /// master seed.
    pub chain_streams: Vec<(usize, u64)>,
    pub inputs: Vec<InputDigest>,
    pub retained: Vec<usize>,
    pub wall_clock_seconds: f64,
    /// SHA-256 over everything above except input paths and timing.
    pub digest: String,
}

#[derive(Serialize)]
struct Reproducible<'a> {
    version: &'a str,
    config: &'a McmcConfig,
    chain_streams: &'a [(usize, u64)],
    inputs: Vec<&'a str>,
    retained: &'a [usize],
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(
        config: McmcConfig,
        inputs: Vec<InputDigest>,
        retained: Vec<usize>,
        wall_clock_seconds: f64,
    ) -> Self {
        let chain_streams = (0..config.chains).map(|c| (c, c as u64)).collect();
        let mut m = RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            chain_streams,
            inputs,
            retained,
            wall_clock_seconds,
            digest: String::new(),
        };
        m.digest = m.compute_digest();
        m
    }

    /// Hash of everything that determines the draws. Scheduling is left out
    /// since parallel and sequential runs agree bit for bit.
    pub fn compute_digest(&self) -> String {
        let mut config = self.config.clone();
        config.execution = Default::default();
        let r = Reproducible {
            version: &self.version,
            config: &config,
            chain_streams: &self.chain_streams,
            inputs: self.inputs.iter().map(|i| i.sha256.as_str()).collect(),
            retained: &self.retained,
        };
        let json = serde_json::to_vec(&r).expect("manifest serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        write_file(path, &json)
    }

    /// Reads a manifest and checks its digest.
    pub fn read(path: &Path) -> Result<Self> {
        let m: RunManifest = serde_json::from_str(&read_file(path)?)?;
        if m.compute_digest() != m.digest {
            return Err(Error::Input {
                path: path.to_path_buf(),
                message: "manifest digest does not match its contents".into(),
            });
        }
        Ok(m)
    }

    /// Checks that `path` has the content recorded for input `index`.
    pub fn verify_input(&self, index: usize, path: &Path) -> Result<()> {
        let Some(expected) = self.inputs.get(index) else {
            return Err(Error::domain(format!("manifest records no input {index}")));
        };
        let got = file_sha256(path)?;
        if got != expected.sha256 {
            return Err(Error::Input {
                path: path.to_path_buf(),
                message: format!("content differs from the manifest (sha256 {got}, expected {})", expected.sha256),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_timing_and_paths() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("data.csv");
        std::fs::write(&input, "x").unwrap();
        let digest = InputDigest {
            path: input.clone(),
            sha256: file_sha256(&input).unwrap(),
        };
        // sha256("x")
        assert_eq!(digest.sha256, "2d711642b726b04401627ca9fbac32f5c8530fb1903cc4db02258717921a4881");
        let a = RunManifest::new(McmcConfig::default(), vec![digest.clone()], vec![10], 1.0);
        let b = RunManifest::new(
            McmcConfig::default(),
            vec![InputDigest {
                path: "elsewhere.csv".into(),
                ..digest
            }],
            vec![10],
            99.0,
        );
        assert_eq!(a.digest, b.digest);
        let c = RunManifest::new(McmcConfig { seed: 2, ..Default::default() }, a.inputs.clone(), vec![10], 1.0);
        assert_ne!(a.digest, c.digest);

        let path = dir.path().join("m.json");
        a.write(&path).unwrap();
        assert_eq!(RunManifest::read(&path).unwrap(), a);
        a.verify_input(0, &input).unwrap();
        std::fs::write(&input, "y").unwrap();
        assert!(a.verify_input(0, &input).is_err());

        let mut tampered = a.clone();
        tampered.config.iterations += 1;
        tampered.write(&path).unwrap();
        assert!(RunManifest::read(&path).is_err());
    }
}
