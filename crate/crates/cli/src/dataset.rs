//! Allele-count tables: `locus,allele,count`, one row per observed allele.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use coalsisr_core::datasim::Dataset;
use coalsisr_core::AlleleConfig;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: expected header `locus,allele,count`")]
    Header { line: u64 },

    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },

    #[error("line {line}: allele {allele} outside 1..={k}")]
    AlleleOutOfRange { line: u64, allele: u64, k: u32 },

    #[error("line {line}: count must be a positive integer")]
    ZeroCount { line: u64 },

    #[error("line {line}: allele {allele} repeated for locus {locus}")]
    Duplicate { line: u64, locus: String, allele: u32 },

    #[error("locus {locus} has {total} genes, expected {expected} (line {line})")]
    InconsistentTotals { line: u64, locus: String, total: u32, expected: u32 },

    #[error("no data rows")]
    Empty,

    #[error("read error: {0}")]
    Read(String),
}

/// A dataset together with the locus labels from the file, in order of
/// first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledDataset {
    pub labels: Vec<String>,
    pub dataset: Dataset,
}

struct Locus {
    label: String,
    counts: BTreeMap<u32, u32>,
    last_line: u64,
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, line: u64) -> Result<&'a str, DatasetError> {
    rec.get(i).map(str::trim).ok_or_else(|| DatasetError::Malformed { line, msg: "expected three fields".into() })
}

fn integer(s: &str, name: &str, line: u64) -> Result<u64, DatasetError> {
    s.parse::<u64>().map_err(|_| DatasetError::Malformed { line, msg: format!("{name} `{s}` is not a non-negative integer") })
}

/// Parse a table; `k` bounds the allele labels.
pub fn parse_dataset<R: Read>(input: R, k: u32) -> Result<LabelledDataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut loci: Vec<Locus> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut saw_header = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match e.position() {
            Some(p) => DatasetError::Malformed { line: p.line(), msg: e.to_string() },
            None => DatasetError::Read(e.to_string()),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if !saw_header {
            let names: Vec<&str> = rec.iter().map(str::trim).collect();
            if names != ["locus", "allele", "count"] {
                return Err(DatasetError::Header { line });
            }
            saw_header = true;
            continue;
        }
        if rec.len() != 3 {
            return Err(DatasetError::Malformed { line, msg: format!("expected three fields, found {}", rec.len()) });
        }
        let label = field(&rec, 0, line)?;
        if label.is_empty() {
            return Err(DatasetError::Malformed { line, msg: "empty locus id".into() });
        }
        let allele = integer(field(&rec, 1, line)?, "allele", line)?;
        if allele == 0 || allele > k as u64 {
            return Err(DatasetError::AlleleOutOfRange { line, allele, k });
        }
        let count = integer(field(&rec, 2, line)?, "count", line)?;
        if count == 0 {
            return Err(DatasetError::ZeroCount { line });
        }
        let count = u32::try_from(count).map_err(|_| DatasetError::Malformed { line, msg: "count too large".into() })?;
        let i = *index.entry(label.to_string()).or_insert_with(|| {
            loci.push(Locus { label: label.to_string(), counts: BTreeMap::new(), last_line: line });
            loci.len() - 1
        });
        let locus = &mut loci[i];
        if locus.counts.insert(allele as u32, count).is_some() {
            return Err(DatasetError::Duplicate { line, locus: label.to_string(), allele: allele as u32 });
        }
        locus.last_line = line;
    }
    if !saw_header {
        return Err(DatasetError::Header { line: 1 });
    }
    let first = loci.first().ok_or(DatasetError::Empty)?;
    let expected: u32 = first.counts.values().sum();
    let mut configs = Vec::with_capacity(loci.len());
    for l in &loci {
        let total: u32 = l.counts.values().sum();
        if total != expected {
            return Err(DatasetError::InconsistentTotals { line: l.last_line, locus: l.label.clone(), total, expected });
        }
        let cfg = AlleleConfig::from_counts(k, l.counts.iter().map(|(&a, &c)| (a, c)))
            .map_err(|e| DatasetError::Malformed { line: l.last_line, msg: e.to_string() })?;
        configs.push(cfg);
    }
    let dataset = Dataset::new(configs).map_err(|e| DatasetError::Malformed { line: 0, msg: e.to_string() })?;
    Ok(LabelledDataset { labels: loci.into_iter().map(|l| l.label).collect(), dataset })
}

/// Write `dataset` with loci labelled `1..=d` unless `labels` is given.
pub fn write_dataset<W: Write>(out: W, dataset: &Dataset, labels: Option<&[String]>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["locus", "allele", "count"])?;
    for (i, h) in dataset.loci.iter().enumerate() {
        let label = labels.and_then(|l| l.get(i).cloned()).unwrap_or_else(|| (i + 1).to_string());
        for &(allele, count) in h.entries() {
            w.write_record([label.as_str(), &allele.to_string(), &count.to_string()])?;
        }
    }
    w.flush()
}
