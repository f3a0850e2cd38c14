use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mcmc::{DpSummary, FixedEffects, Param, PosteriorSample};

use super::{comment_header, csv_reader, data_err, read_comment_metadata, read_file, write_file, DIGEST_KEY};

const HEADER: &str = "iteration,chain,parameter,unit_id,value";
/// `unit_id` of rows that describe the whole population.
const POPULATION: &str = "population";

/// Posterior draws read back from a long-format samples file.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    pub ids: Vec<String>,
    pub samples: Vec<PosteriorSample>,
    pub digest: Option<String>,
}

fn needs_quoting(s: &str) -> bool {
    s.contains([',', '"', '\n', '\r', '#']) || s.trim() != s
}

/// Long-format rows, one value each. Floats use the shortest text that
/// parses back to the same bits.
pub fn samples_csv_string(ids: &[String], samples: &[PosteriorSample], digest: Option<&str>) -> Result<String> {
    if let Some(id) = ids.iter().find(|id| needs_quoting(id) || id.as_str() == POPULATION) {
        return Err(Error::domain(format!("individual id `{id}` cannot be stored in a samples file")));
    }
    let mut out = comment_header(digest, &[]);
    out.push_str(HEADER);
    out.push('\n');
    for s in samples {
        if s.pi.len() != ids.len() {
            return Err(Error::domain("sample size does not match the id list"));
        }
        let (it, ch) = (s.iteration, s.chain);
        for p in Param::ALL {
            for (id, v) in ids.iter().zip(s.values(p)) {
                let _ = writeln!(out, "{it},{ch},{},{id},{v}", p.name());
            }
        }
        for p in Param::ALL {
            let d = s.dp(p);
            let name = p.name();
            let _ = writeln!(out, "{it},{ch},alpha,{name},{}", d.alpha);
            let _ = writeln!(out, "{it},{ch},k,{name},{}", d.k);
            let _ = writeln!(out, "{it},{ch},base_a,{name},{}", d.base_a);
            let _ = writeln!(out, "{it},{ch},base_b,{name},{}", d.base_b);
        }
        if let Some(f) = &s.fixed {
            for (y, b) in f.beta_yr.iter().enumerate() {
                let _ = writeln!(out, "{it},{ch},beta_yr,{y},{b}");
            }
            let _ = writeln!(out, "{it},{ch},gamma_d,{POPULATION},{}", f.gamma_d);
            let _ = writeln!(out, "{it},{ch},q,{POPULATION},{}", f.q);
        }
        let _ = writeln!(out, "{it},{ch},log_likelihood,{POPULATION},{}", s.log_likelihood);
    }
    Ok(out)
}

pub fn write_samples_csv(
    path: &Path,
    ids: &[String],
    samples: &[PosteriorSample],
    digest: Option<&str>,
) -> Result<()> {
    write_file(path, samples_csv_string(ids, samples, digest)?.as_bytes())
}

#[derive(Default)]
struct Partial {
    key: (usize, usize),
    values: [Vec<f64>; 3],
    dp: [[Option<f64>; 4]; 3],
    beta: Vec<f64>,
    gamma_d: Option<f64>,
    q: Option<f64>,
    log_likelihood: Option<f64>,
    line: u64,
}

impl Partial {
    fn finish(self, path: &Path) -> Result<PosteriorSample> {
        let missing = || data_err(path, self.line, "incomplete sample");
        let mut dp = [DpSummary {
            alpha: 0.0,
            k: 0,
            base_a: 0.0,
            base_b: 0.0,
        }; 3];
        for (d, v) in dp.iter_mut().zip(&self.dp) {
            let [a, k, ba, bb] = *v;
            *d = DpSummary {
                alpha: a.ok_or_else(missing)?,
                k: k.ok_or_else(missing)? as usize,
                base_a: ba.ok_or_else(missing)?,
                base_b: bb.ok_or_else(missing)?,
            };
        }
        let fixed = match (self.gamma_d, self.q) {
            (Some(gamma_d), Some(q)) => Some(FixedEffects {
                beta_yr: self.beta,
                gamma_d,
                q,
            }),
            (None, None) if self.beta.is_empty() => None,
            _ => return Err(missing()),
        };
        let [pi, gamma_hh, gamma_aa] = self.values;
        Ok(PosteriorSample {
            chain: self.key.1,
            iteration: self.key.0,
            pi,
            gamma_hh,
            gamma_aa,
            dp,
            fixed,
            log_likelihood: self.log_likelihood.ok_or_else(missing)?,
        })
    }
}

/// Parses a samples file back into the exact draws that were written.
pub fn read_samples_csv(path: &Path) -> Result<SampleFile> {
    let text = read_file(path)?;
    let digest = read_comment_metadata(&text)
        .into_iter()
        .find(|(k, _)| k == DIGEST_KEY)
        .map(|(_, v)| v);
    let mut rdr = csv_reader(&text);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != HEADER {
        return Err(Error::Input {
            path: path.to_path_buf(),
            message: format!("expected header `{HEADER}`"),
        });
    }
    let mut ids: Vec<String> = Vec::new();
    let mut ids_closed = false;
    let mut samples = Vec::new();
    let mut cur: Option<Partial> = None;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let int = |i: usize| {
            rec[i]
                .parse::<usize>()
                .map_err(|_| data_err(path, line, format!("bad {} `{}`", header[i], &rec[i])))
        };
        let key = (int(0)?, int(1)?);
        let value: f64 = rec[4]
            .parse()
            .map_err(|_| data_err(path, line, format!("bad value `{}`", &rec[4])))?;
        if cur.as_ref().is_some_and(|c| c.key != key) {
            samples.push(cur.take().expect("checked").finish(path)?);
            ids_closed = true;
        }
        let c = cur.get_or_insert_with(|| Partial {
            key,
            line,
            ..Default::default()
        });
        let (name, unit) = (&rec[2], &rec[3]);
        if let Some(p) = Param::from_name(name) {
            let vals = &mut c.values[p as usize];
            let idx = vals.len();
            if p == Param::Pi && !ids_closed && idx == ids.len() {
                ids.push(unit.to_string());
            }
            if ids.get(idx).map(String::as_str) != Some(unit) {
                return Err(data_err(path, line, format!("unexpected individual `{unit}`")));
            }
            vals.push(value);
            continue;
        }
        let slot = match name {
            "alpha" => Some(0),
            "k" => Some(1),
            "base_a" => Some(2),
            "base_b" => Some(3),
            _ => None,
        };
        if let Some(j) = slot {
            let p = Param::from_name(unit)
                .ok_or_else(|| data_err(path, line, format!("unknown parameter `{unit}`")))?;
            c.dp[p as usize][j] = Some(value);
            continue;
        }
        match name {
            "beta_yr" => {
                if unit != c.beta.len().to_string() {
                    return Err(data_err(path, line, "year effects out of order"));
                }
                c.beta.push(value);
            }
            "gamma_d" => c.gamma_d = Some(value),
            "q" => c.q = Some(value),
            "log_likelihood" => c.log_likelihood = Some(value),
            _ => return Err(data_err(path, line, format!("unknown parameter `{name}`"))),
        }
    }
    if let Some(c) = cur {
        samples.push(c.finish(path)?);
    }
    for s in &samples {
        if Param::ALL.iter().any(|&p| s.values(p).len() != ids.len()) {
            return Err(Error::Input {
                path: path.to_path_buf(),
                message: format!("sample at iteration {} has missing individuals", s.iteration),
            });
        }
    }
    Ok(SampleFile { ids, samples, digest })
}
