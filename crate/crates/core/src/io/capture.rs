use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hmm::{CaptureHistory, Dataset, ModelKind, Occasion, FIRST_WEEK, LAST_WEEK};

use super::{comment_header, csv_reader, csv_writer, data_err, finish, read_file, write_file};

const THREE_STATE_HEADER: [&str; 4] = ["individual_id", "season", "week", "seen"];
const TWO_STATE_HEADER: [&str; 3] = ["individual_id", "occasion", "seen"];

/// Reads a capture-history file. `individual_id,season,week,seen` selects
/// the three-state model and `individual_id,occasion,seen` the two-state
/// model; `expected`, when given, must agree.
pub fn parse_capture_csv(path: &Path, expected: Option<ModelKind>) -> Result<Dataset> {
    let text = read_file(path)?;
    read_capture_csv(&text, path, expected)
}

/// As [`parse_capture_csv`] on text already in memory; `path` labels errors.
pub fn read_capture_csv(text: &str, path: &Path, expected: Option<ModelKind>) -> Result<Dataset> {
    let mut rdr = csv_reader(text);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let model = if header == THREE_STATE_HEADER {
        ModelKind::ThreeState
    } else if header == TWO_STATE_HEADER {
        ModelKind::TwoState
    } else {
        return Err(Error::Input {
            path: path.to_path_buf(),
            message: format!(
                "unrecognised header `{}`; expected `{}` or `{}`",
                header.join(","),
                THREE_STATE_HEADER.join(","),
                TWO_STATE_HEADER.join(",")
            ),
        });
    };
    if let Some(m) = expected.filter(|&m| m != model) {
        return Err(Error::Input {
            path: path.to_path_buf(),
            message: format!("file holds {model} data but {m} was requested"),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(Occasion, bool, u64)>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(data_err(path, line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let int = |i: usize| -> Result<u32> {
            rec[i].parse::<u32>().map_err(|_| {
                data_err(path, line, format!("{} `{}` is not a non-negative integer", header[i], &rec[i]))
            })
        };
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(data_err(path, line, "empty individual_id"));
        }
        let occasion = match model {
            ModelKind::ThreeState => {
                let (season, week) = (int(1)?, int(2)?);
                if !(FIRST_WEEK..=LAST_WEEK).contains(&week) {
                    return Err(data_err(
                        path,
                        line,
                        format!("week {week} outside the season weeks {FIRST_WEEK}..={LAST_WEEK}"),
                    ));
                }
                Occasion::new(season, week)
            }
            ModelKind::TwoState => Occasion::new(0, int(1)?),
        };
        let seen_col = header.len() - 1;
        let seen = match &rec[seen_col] {
            "0" => false,
            "1" => true,
            other => return Err(data_err(path, line, format!("seen must be 0 or 1, found `{other}`"))),
        };
        let entry = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            Vec::new()
        });
        entry.push((occasion, seen, line));
    }
    if order.is_empty() {
        return Err(Error::Input {
            path: path.to_path_buf(),
            message: "no capture records".into(),
        });
    }

    let mut histories = Vec::with_capacity(order.len());
    for id in order {
        let mut r = rows.remove(&id).expect("grouped above");
        r.sort_by_key(|(o, _, _)| *o);
        for w in r.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(data_err(path, w[1].2, format!("duplicate occasion for `{id}`")));
            }
        }
        let seen = r.iter().map(|x| x.1).collect();
        let occasions = r.iter().map(|x| x.0).collect();
        let h = CaptureHistory::trimmed(id.as_str(), seen, occasions).map_err(|e| Error::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        histories.push(h);
    }
    Dataset::new(model, histories).map_err(|e| Error::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Serialises a dataset in the format matching its model.
pub fn capture_csv_bytes(data: &Dataset, digest: Option<&str>) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    match data.model() {
        ModelKind::ThreeState => w.write_record(THREE_STATE_HEADER)?,
        ModelKind::TwoState => w.write_record(TWO_STATE_HEADER)?,
    }
    for h in data.histories() {
        for (o, &s) in h.occasions().iter().zip(h.seen()) {
            let seen = if s { "1" } else { "0" };
            match data.model() {
                ModelKind::ThreeState => {
                    w.write_record([h.id(), &o.season.to_string(), &o.week.to_string(), seen])?
                }
                ModelKind::TwoState => w.write_record([h.id(), &o.week.to_string(), seen])?,
            }
        }
    }
    finish(comment_header(digest, &[]), w)
}

pub fn write_capture_csv(path: &Path, data: &Dataset, digest: Option<&str>) -> Result<()> {
    write_file(path, &capture_csv_bytes(data, digest)?)
}
