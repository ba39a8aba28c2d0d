//! Review-log ingestion. Every well-formed row counts as one implicit
//! interaction; ratings and timestamps are only checked for shape.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReviewFormat {
    /// Headerless `item,user,rating,timestamp` rows.
    Csv,
    /// One JSON object per line with string fields `reviewerID` and `asin`.
    JsonLines,
}

impl ReviewFormat {
    /// Guess from the file extension: `.json`/`.jsonl` are JSON lines, all
    /// else CSV.
    pub fn from_path(path: &Path) -> ReviewFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json" | "jsonl") => ReviewFormat::JsonLines,
            _ => ReviewFormat::Csv,
        }
    }
}

impl fmt::Display for ReviewFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReviewFormat::Csv => "csv",
            ReviewFormat::JsonLines => "json-lines",
        })
    }
}

impl FromStr for ReviewFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReviewFormat::Csv),
            "json-lines" | "jsonl" | "json" => Ok(ReviewFormat::JsonLines),
            other => Err(Error::Config(format!("unknown review format '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParsedReviews {
    /// `(user id, item id)` in file order; duplicates kept.
    pub pairs: Vec<(String, String)>,
    /// Nonblank rows that could not be used.
    pub skipped: usize,
}

pub fn parse_reviews(path: &Path, format: ReviewFormat) -> Result<ParsedReviews> {
    let file = File::open(path)?;
    parse_reviews_from(BufReader::new(file), format)
}

pub fn parse_reviews_from<R: BufRead>(reader: R, format: ReviewFormat) -> Result<ParsedReviews> {
    let parsed = match format {
        ReviewFormat::Csv => parse_csv(reader)?,
        ReviewFormat::JsonLines => parse_json_lines(reader)?,
    };
    if parsed.pairs.is_empty() {
        return Err(Error::Format(format!(
            "no valid {format} review rows ({} malformed)",
            parsed.skipped
        )));
    }
    Ok(parsed)
}

fn parse_csv<R: Read>(reader: R) -> Result<ParsedReviews> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut out = ParsedReviews::default();
    for record in rdr.records() {
        let rec = match record {
            Ok(r) => r,
            Err(e) => match e.kind() {
                csv::ErrorKind::Io(_) => {
                    let csv::ErrorKind::Io(io) = e.into_kind() else { unreachable!() };
                    return Err(Error::Io(io));
                }
                _ => {
                    out.skipped += 1;
                    continue;
                }
            },
        };
        let well_formed = rec.len() == 4
            && !rec[0].trim().is_empty()
            && !rec[1].trim().is_empty()
            && rec[2].trim().parse::<f64>().is_ok_and(f64::is_finite)
            && rec[3].trim().parse::<i64>().is_ok();
        if well_formed {
            out.pairs.push((rec[1].trim().to_owned(), rec[0].trim().to_owned()));
        } else {
            out.skipped += 1;
        }
    }
    Ok(out)
}

fn parse_json_lines<R: BufRead>(reader: R) -> Result<ParsedReviews> {
    let mut out = ParsedReviews::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair = serde_json::from_str::<serde_json::Value>(&line).ok().and_then(|v| {
            let user = v.get("reviewerID")?.as_str()?.trim().to_owned();
            let item = v.get("asin")?.as_str()?.trim().to_owned();
            (!user.is_empty() && !item.is_empty()).then_some((user, item))
        });
        match pair {
            Some(p) => out.pairs.push(p),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}
