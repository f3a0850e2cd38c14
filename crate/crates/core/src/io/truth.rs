use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hmm::{Dataset, State, StatePath};
use crate::mcmc::{FixedEffects, Param};
use crate::synth::{IndividualTruth, Truth};

use super::{comment_header, csv_reader, csv_writer, data_err, finish, read_file, write_file};

const TRUTH_HEADER: [&str; 4] = ["individual_id", "parameter", "true_value", "group_label"];
const LATENT_HEADER: [&str; 4] = ["individual_id", "season", "week", "state"];

fn beta_name(s: usize) -> String {
    format!("beta_yr[{s}]")
}

/// Ground-truth parameter table. Population-level rows have an empty
/// `individual_id`; continuous draws have an empty `group_label`.
pub fn truth_csv_bytes(truth: &Truth, digest: Option<&str>, meta: &[(String, String)]) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(TRUTH_HEADER)?;
    for t in &truth.individuals {
        for p in Param::ALL {
            let g = t.group(p).map(|g| g.to_string()).unwrap_or_default();
            w.write_record([t.id.as_str(), p.name(), &t.value(p).to_string(), &g])?;
        }
    }
    if let Some(f) = &truth.fixed {
        for (s, b) in f.beta_yr.iter().enumerate() {
            w.write_record(["", &beta_name(s), &b.to_string(), ""])?;
        }
        w.write_record(["", "gamma_d", &f.gamma_d.to_string(), ""])?;
        w.write_record(["", "q", &f.q.to_string(), ""])?;
    }
    finish(comment_header(digest, meta), w)
}

pub fn write_truth_csv(path: &Path, truth: &Truth, digest: Option<&str>, meta: &[(String, String)]) -> Result<()> {
    write_file(path, &truth_csv_bytes(truth, digest, meta)?)
}

/// Latent states of every simulated individual, aligned to `data`.
pub fn latent_csv_bytes(truth: &Truth, data: &Dataset, digest: Option<&str>) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(LATENT_HEADER)?;
    for (t, h) in truth.individuals.iter().zip(data.histories()) {
        for (o, s) in h.occasions().iter().zip(t.path.states()) {
            w.write_record([
                t.id.as_str(),
                &o.season.to_string(),
                &o.week.to_string(),
                &s.symbol().to_string(),
            ])?;
        }
    }
    finish(comment_header(digest, &[]), w)
}

pub fn write_latent_csv(path: &Path, truth: &Truth, data: &Dataset, digest: Option<&str>) -> Result<()> {
    write_file(path, &latent_csv_bytes(truth, data, digest)?)
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str], path: &Path) -> Result<()> {
    let h: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if h != expected {
        return Err(Error::Input {
            path: path.to_path_buf(),
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

/// Latent paths keyed by individual, in file order.
pub fn read_latent_csv(path: &Path) -> Result<Vec<(String, StatePath)>> {
    let text = read_file(path)?;
    let mut rdr = csv_reader(&text);
    check_header(&mut rdr, &LATENT_HEADER, path)?;
    let mut out: Vec<(String, Vec<State>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let state = match &rec[3] {
            "H" => State::Here,
            "A" => State::Away,
            "D" => State::Dead,
            s => return Err(data_err(path, line, format!("unknown state `{s}`"))),
        };
        match out.last_mut() {
            Some((id, v)) if id == &rec[0] => v.push(state),
            _ => out.push((rec[0].to_string(), vec![state])),
        }
    }
    Ok(out
        .into_iter()
        .map(|(id, s)| (id, StatePath::from_unchecked(s)))
        .collect())
}

/// Rebuilds the ground truth from its parameter table and latent paths.
pub fn read_truth_csv(truth_path: &Path, latent_path: &Path) -> Result<Truth> {
    let text = read_file(truth_path)?;
    let mut rdr = csv_reader(&text);
    check_header(&mut rdr, &TRUTH_HEADER, truth_path)?;
    let mut order: Vec<String> = Vec::new();
    let mut params: HashMap<String, ([f64; 3], [Option<usize>; 3], [bool; 3])> = HashMap::new();
    let mut beta: Vec<(usize, f64)> = Vec::new();
    let (mut gamma_d, mut q) = (None, None);
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let value: f64 = rec[2]
            .parse()
            .map_err(|_| data_err(truth_path, line, format!("bad value `{}`", &rec[2])))?;
        let (id, name) = (&rec[0], &rec[1]);
        if id.is_empty() {
            if name == "gamma_d" {
                gamma_d = Some(value);
            } else if name == "q" {
                q = Some(value);
            } else if let Some(s) = name.strip_prefix("beta_yr[").and_then(|r| r.strip_suffix(']')) {
                let s = s
                    .parse()
                    .map_err(|_| data_err(truth_path, line, format!("bad season in `{name}`")))?;
                beta.push((s, value));
            } else {
                return Err(data_err(truth_path, line, format!("unknown population parameter `{name}`")));
            }
            continue;
        }
        let p = Param::from_name(name)
            .ok_or_else(|| data_err(truth_path, line, format!("unknown parameter `{name}`")))?;
        let group = match &rec[3] {
            "" => None,
            g => Some(
                g.parse()
                    .map_err(|_| data_err(truth_path, line, format!("bad group label `{g}`")))?,
            ),
        };
        let e = params.entry(id.to_string()).or_insert_with(|| {
            order.push(id.to_string());
            ([0.0; 3], [None; 3], [false; 3])
        });
        e.0[p as usize] = value;
        e.1[p as usize] = group;
        e.2[p as usize] = true;
    }
    beta.sort_by_key(|b| b.0);
    if beta.iter().enumerate().any(|(i, b)| b.0 != i) {
        return Err(Error::Input {
            path: truth_path.to_path_buf(),
            message: "year effects must cover seasons 0.. without gaps".into(),
        });
    }
    let fixed = match (gamma_d, q) {
        (Some(d), Some(q)) => Some(FixedEffects::new(beta.into_iter().map(|b| b.1).collect(), d, q)?),
        (None, None) if beta.is_empty() => None,
        _ => {
            return Err(Error::Input {
                path: truth_path.to_path_buf(),
                message: "incomplete population parameters".into(),
            })
        }
    };

    let mut paths: HashMap<String, StatePath> = read_latent_csv(latent_path)?.into_iter().collect();
    let mut individuals = Vec::with_capacity(order.len());
    for id in order {
        let (values, groups, present) = params[&id];
        if present.iter().any(|p| !p) {
            return Err(Error::Input {
                path: truth_path.to_path_buf(),
                message: format!("`{id}` lacks a value for every parameter"),
            });
        }
        let path = paths.remove(&id).ok_or_else(|| Error::Input {
            path: latent_path.to_path_buf(),
            message: format!("no latent path for `{id}`"),
        })?;
        individuals.push(IndividualTruth {
            id,
            values,
            groups,
            path,
        });
    }
    Ok(Truth { individuals, fixed })
}
