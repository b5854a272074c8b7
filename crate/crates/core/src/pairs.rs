//! CSV persistence for scored pair lists and ground truth.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{ImageId, PairScore};

pub const PAIRS_HEADER: [&str; 3] = ["query_id", "reference_id", "score"];
pub const GT_HEADER: [&str; 2] = ["query_id", "reference_id"];

pub fn write_pairs<W: Write>(pairs: &[PairScore], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(PAIRS_HEADER)?;
    for p in pairs {
        if !p.score.is_finite() {
            return Err(Error::Invalid(format!(
                "pair ({}, {}) has non-finite score",
                p.query, p.reference
            )));
        }
        w.write_record([p.query.as_str(), p.reference.as_str(), &format!("{:.6}", p.score)])?;
    }
    w.flush().map_err(|e| Error::io("<pairs sink>", e))
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Format(format!(
            "expected CSV header {:?}, found {:?}",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

pub fn read_pairs<R: Read>(source: R) -> Result<Vec<PairScore>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    check_header(rd.headers()?, &PAIRS_HEADER)?;
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Format(format!("pairs row {} has {} fields", line + 2, rec.len())));
        }
        let score: f64 = rec[2]
            .parse()
            .map_err(|_| Error::Format(format!("pairs row {}: bad score {:?}", line + 2, &rec[2])))?;
        if !score.is_finite() {
            return Err(Error::Corruption(format!("pairs row {}: non-finite score", line + 2)));
        }
        out.push(PairScore {
            query: ImageId::new(&rec[0])?,
            reference: ImageId::new(&rec[1])?,
            score,
        });
    }
    Ok(out)
}

/// Known true (query, reference) matches.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    positives: BTreeSet<(ImageId, ImageId)>,
    total_positives: usize,
}

impl GroundTruth {
    /// `total_positives` defaults to the number of distinct listed pairs.
    pub fn new(positives: impl IntoIterator<Item = (ImageId, ImageId)>) -> Self {
        let positives: BTreeSet<_> = positives.into_iter().collect();
        let total_positives = positives.len();
        GroundTruth {
            positives,
            total_positives,
        }
    }

    /// Overrides the denominator, e.g. when the listing omits matches that exist.
    pub fn with_total_positives(mut self, total: usize) -> Result<Self> {
        if total < self.positives.len() {
            return Err(Error::Config(format!(
                "total positives {total} is below the {} listed pairs",
                self.positives.len()
            )));
        }
        self.total_positives = total;
        Ok(self)
    }

    pub fn is_positive(&self, query: &ImageId, reference: &ImageId) -> bool {
        // BTreeSet lookup needs an owned tuple; ids are cheap Arc clones.
        self.positives.contains(&(query.clone(), reference.clone()))
    }

    pub fn total_positives(&self) -> usize {
        self.total_positives
    }

    pub fn positives(&self) -> impl Iterator<Item = &(ImageId, ImageId)> {
        self.positives.iter()
    }
}

pub fn write_ground_truth<W: Write>(pairs: &[(ImageId, ImageId)], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(GT_HEADER)?;
    for (q, r) in pairs {
        w.write_record([q.as_str(), r.as_str()])?;
    }
    w.flush().map_err(|e| Error::io("<ground truth sink>", e))
}

pub fn read_ground_truth<R: Read>(source: R) -> Result<GroundTruth> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    check_header(rd.headers()?, &GT_HEADER)?;
    let mut pairs = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        pairs.push((ImageId::new(&rec[0])?, ImageId::new(&rec[1])?));
    }
    Ok(GroundTruth::new(pairs))
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<PairScore>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs(std::io::BufReader::new(f))
}

pub fn save_pairs(pairs: &[PairScore], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_pairs(pairs, std::io::BufWriter::new(f))
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ground_truth(std::io::BufReader::new(f))
}
