//! Streaming ingestion: files (or standard input) become validated
//! [`Sample`] streams without materializing the whole input.
//!
//! Score normalization needs global extrema, so evaluation is two-pass
//! when the source is re-readable: [`two_pass_plan`] collects the
//! pass-one statistics, then the caller streams again to bucket. For
//! non-seekable sources, [`read_all`] buffers instead; both paths yield
//! identical sample sequences for the same bytes.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Lines, Read};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::RunningSums;
use crate::model::{validate_record, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    Tsv,
    Jsonl,
}

impl InputFormat {
    fn delimiter(self) -> u8 {
        match self {
            InputFormat::Csv => b',',
            InputFormat::Tsv => b'\t',
            InputFormat::Jsonl => unreachable!("jsonl has no delimiter"),
        }
    }
}

/// A column picked by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSel {
    Name(String),
    Index(usize),
}

impl ColumnSel {
    /// Parses "3" as an index, anything else as a name.
    pub fn parse(raw: &str) -> ColumnSel {
        match raw.parse::<usize>() {
            Ok(idx) => ColumnSel::Index(idx),
            Err(_) => ColumnSel::Name(raw.to_string()),
        }
    }
}

/// Where label, bid, pctr and the optional group key live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub label: ColumnSel,
    pub bid: ColumnSel,
    pub pctr: ColumnSel,
    pub group: Option<ColumnSel>,
}

impl ColumnMap {
    /// Standard header names: label, bid, pctr, group.
    pub fn by_names() -> Self {
        ColumnMap {
            label: ColumnSel::Name("label".to_string()),
            bid: ColumnSel::Name("bid".to_string()),
            pctr: ColumnSel::Name("pctr".to_string()),
            group: Some(ColumnSel::Name("group".to_string())),
        }
    }

    /// Headerless layout: columns 0..3 in the standard order.
    pub fn by_positions() -> Self {
        ColumnMap {
            label: ColumnSel::Index(0),
            bid: ColumnSel::Index(1),
            pctr: ColumnSel::Index(2),
            group: Some(ColumnSel::Index(3)),
        }
    }
}

/// Everything needed to open and interpret one input.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    /// File path, or "-" for standard input.
    pub path: PathBuf,
    pub format: InputFormat,
    pub has_header: bool,
    pub columns: ColumnMap,
}

impl InputSpec {
    /// Infers the format from the extension (`.tsv`, `.jsonl`,
    /// `.ndjson`; anything else is CSV) and assumes a header row.
    pub fn from_path<P: AsRef<Path>>(path: P) -> Self {
        let path = path.as_ref().to_path_buf();
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => InputFormat::Tsv,
            Some("jsonl") | Some("ndjson") => InputFormat::Jsonl,
            _ => InputFormat::Csv,
        };
        InputSpec::new(path, format, true)
    }

    pub fn new(path: PathBuf, format: InputFormat, has_header: bool) -> Self {
        let columns = if has_header || format == InputFormat::Jsonl {
            ColumnMap::by_names()
        } else {
            ColumnMap::by_positions()
        };
        InputSpec {
            path,
            format,
            has_header,
            columns,
        }
    }

    pub fn is_stdin(&self) -> bool {
        self.path.as_os_str() == "-"
    }
}

/// Malformed-row counts by category, reported at end of stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorTally {
    pub row_parse: u64,
    pub non_binary_label: u64,
    pub non_positive_bid: u64,
    pub pctr_out_of_range: u64,
    pub non_finite_value: u64,
}

impl ErrorTally {
    fn record(&mut self, err: &Error) {
        match err {
            Error::NonBinaryLabel(_) => self.non_binary_label += 1,
            Error::NonPositiveBid(_) => self.non_positive_bid += 1,
            Error::PctrOutOfRange(_) => self.pctr_out_of_range += 1,
            Error::NonFiniteValue { .. } => self.non_finite_value += 1,
            _ => self.row_parse += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.row_parse
            + self.non_binary_label
            + self.non_positive_bid
            + self.pctr_out_of_range
            + self.non_finite_value
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }
}

impl fmt::Display for ErrorTally {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (name, count) in [
            ("row_parse", self.row_parse),
            ("non_binary_label", self.non_binary_label),
            ("non_positive_bid", self.non_positive_bid),
            ("pctr_out_of_range", self.pctr_out_of_range),
            ("non_finite_value", self.non_finite_value),
        ] {
            if count > 0 {
                parts.push(format!("{name}: {count}"));
            }
        }
        write!(f, "{} rows skipped ({})", self.total(), parts.join(", "))
    }
}

struct ResolvedColumns {
    label: usize,
    bid: usize,
    pctr: usize,
    group: Option<usize>,
}

enum Source {
    Delimited(csv::Reader<Box<dyn Read + Send>>),
    Jsonl {
        lines: Lines<BufReader<Box<dyn Read + Send>>>,
        label: String,
        bid: String,
        pctr: String,
        group: Option<String>,
    },
}

/// Iterator over validated samples in file order.
///
/// In lenient mode malformed rows are tallied and skipped; in strict
/// mode the first malformed row ends the stream with an error. I/O
/// failures are always fatal.
pub struct SampleStream {
    source: Source,
    columns: Option<ResolvedColumns>,
    tally: ErrorTally,
    strict: bool,
    row: u64,
    fused: bool,
    record: csv::StringRecord,
}

/// Opens the input and returns a sample stream.
pub fn stream_samples(spec: &InputSpec, strict: bool) -> Result<SampleStream> {
    let reader = open_reader(&spec.path)?;
    match spec.format {
        InputFormat::Csv | InputFormat::Tsv => {
            let mut csv_reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .delimiter(spec.format.delimiter())
                .from_reader(reader);
            let columns = resolve_delimited_columns(spec, &mut csv_reader)?;
            Ok(SampleStream {
                source: Source::Delimited(csv_reader),
                columns: Some(columns),
                tally: ErrorTally::default(),
                strict,
                row: 0,
                fused: false,
                record: csv::StringRecord::new(),
            })
        }
        InputFormat::Jsonl => {
            let name_of = |sel: &ColumnSel, what: &str| -> Result<String> {
                match sel {
                    ColumnSel::Name(n) => Ok(n.clone()),
                    ColumnSel::Index(_) => Err(Error::InvalidConfig(format!(
                        "jsonl inputs select {what} by key name, not index"
                    ))),
                }
            };
            Ok(SampleStream {
                source: Source::Jsonl {
                    lines: BufReader::new(open_reader(&spec.path)?).lines(),
                    label: name_of(&spec.columns.label, "label")?,
                    bid: name_of(&spec.columns.bid, "bid")?,
                    pctr: name_of(&spec.columns.pctr, "pctr")?,
                    group: match &spec.columns.group {
                        Some(sel) => Some(name_of(sel, "group")?),
                        None => None,
                    },
                },
                columns: None,
                tally: ErrorTally::default(),
                strict,
                row: 0,
                fused: false,
                record: csv::StringRecord::new(),
            })
        }
    }
}

fn open_reader(path: &Path) -> Result<Box<dyn Read + Send>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin()));
    }
    match File::open(path) {
        Ok(f) => Ok(Box::new(f)),
        Err(source) => Err(Error::FileNotFound {
            path: path.display().to_string(),
            source,
        }),
    }
}

fn resolve_delimited_columns(
    spec: &InputSpec,
    reader: &mut csv::Reader<Box<dyn Read + Send>>,
) -> Result<ResolvedColumns> {
    let header: Option<Vec<String>> = if spec.has_header {
        let mut record = csv::StringRecord::new();
        let got = reader
            .read_record(&mut record)
            .map_err(|e| Error::InvalidConfig(format!("cannot read header: {e}")))?;
        if !got {
            // An empty file has no header to violate; treat as an
            // input with zero rows.
            return Ok(ResolvedColumns {
                label: 0,
                bid: 1,
                pctr: 2,
                group: None,
            });
        }
        Some(record.iter().map(|f| f.trim().to_string()).collect())
    } else {
        None
    };

    let resolve = |sel: &ColumnSel, what: &str| -> Result<usize> {
        match sel {
            ColumnSel::Index(i) => Ok(*i),
            ColumnSel::Name(name) => match &header {
                Some(fields) => fields
                    .iter()
                    .position(|f| f == name)
                    .ok_or_else(|| Error::MalformedHeader(name.clone())),
                None => Err(Error::InvalidConfig(format!(
                    "{what} column {name:?} needs a header row; use an index with --no-header"
                ))),
            },
        }
    };

    Ok(ResolvedColumns {
        label: resolve(&spec.columns.label, "label")?,
        bid: resolve(&spec.columns.bid, "bid")?,
        pctr: resolve(&spec.columns.pctr, "pctr")?,
        // The group column is optional: absent from the header means
        // no groups, not an error.
        group: match &spec.columns.group {
            Some(ColumnSel::Index(i)) => Some(*i),
            Some(ColumnSel::Name(name)) => header
                .as_ref()
                .and_then(|fields| fields.iter().position(|f| f == name)),
            None => None,
        },
    })
}

impl SampleStream {
    /// Malformed-row counts accumulated so far; complete once the
    /// stream is exhausted.
    pub fn tally(&self) -> &ErrorTally {
        &self.tally
    }

    fn parse_delimited(record: &csv::StringRecord, columns: &ResolvedColumns) -> Result<Sample> {
        let field = |idx: usize, what: &str| -> Result<&str> {
            record.get(idx).ok_or_else(|| Error::RowParseError {
                row: 0,
                reason: format!("missing {what} column {idx}"),
            })
        };
        let label_raw = field(columns.label, "label")?.trim();
        let label: i64 = label_raw.parse().map_err(|_| Error::RowParseError {
            row: 0,
            reason: format!("label {label_raw:?} is not an integer"),
        })?;
        let bid_raw = field(columns.bid, "bid")?.trim();
        let bid: f64 = bid_raw.parse().map_err(|_| Error::RowParseError {
            row: 0,
            reason: format!("bid {bid_raw:?} is not a number"),
        })?;
        let pctr_raw = field(columns.pctr, "pctr")?.trim();
        let pctr: f64 = pctr_raw.parse().map_err(|_| Error::RowParseError {
            row: 0,
            reason: format!("pctr {pctr_raw:?} is not a number"),
        })?;
        let group = columns
            .group
            .and_then(|idx| record.get(idx))
            .map(str::trim)
            .filter(|g| !g.is_empty())
            .map(str::to_string);
        validate_record(label, bid, pctr, group)
    }

    fn parse_jsonl(
        line: &str,
        label_key: &str,
        bid_key: &str,
        pctr_key: &str,
        group_key: Option<&str>,
    ) -> Result<Sample> {
        let bad = |reason: String| Error::RowParseError { row: 0, reason };
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| bad(format!("invalid json: {e}")))?;
        let object = value
            .as_object()
            .ok_or_else(|| bad("line is not a json object".to_string()))?;
        let label = object
            .get(label_key)
            .and_then(serde_json::Value::as_i64)
            .ok_or_else(|| bad(format!("missing integer key {label_key:?}")))?;
        let number = |key: &str| -> Result<f64> {
            object
                .get(key)
                .and_then(serde_json::Value::as_f64)
                .ok_or_else(|| bad(format!("missing numeric key {key:?}")))
        };
        let bid = number(bid_key)?;
        let pctr = number(pctr_key)?;
        let group = group_key
            .and_then(|k| object.get(k))
            .and_then(serde_json::Value::as_str)
            .filter(|g| !g.is_empty())
            .map(str::to_string);
        validate_record(label, bid, pctr, group)
    }
}

impl Iterator for SampleStream {
    type Item = Result<Sample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.fused {
            return None;
        }
        loop {
            self.row += 1;
            let parsed: Result<Sample> = match &mut self.source {
                Source::Delimited(reader) => match reader.read_record(&mut self.record) {
                    Ok(false) => return None,
                    Ok(true) => Self::parse_delimited(&self.record, self.columns.as_ref().unwrap()),
                    Err(e) => {
                        if e.is_io_error() {
                            self.fused = true;
                            return Some(Err(Error::Io(io::Error::other(e))));
                        }
                        Err(Error::RowParseError {
                            row: 0,
                            reason: e.to_string(),
                        })
                    }
                },
                Source::Jsonl {
                    lines,
                    label,
                    bid,
                    pctr,
                    group,
                } => match lines.next() {
                    None => return None,
                    Some(Err(e)) => {
                        self.fused = true;
                        return Some(Err(Error::Io(e)));
                    }
                    Some(Ok(line)) if line.trim().is_empty() => continue,
                    Some(Ok(line)) => {
                        Self::parse_jsonl(&line, label, bid, pctr, group.as_deref())
                    }
                },
            };
            match parsed {
                Ok(sample) => return Some(Ok(sample)),
                Err(err) => {
                    self.tally.record(&err);
                    if self.strict {
                        self.fused = true;
                        return Some(Err(Error::RowParseError {
                            row: self.row,
                            reason: err.to_string(),
                        }));
                    }
                }
            }
        }
    }
}

/// Pass-one statistics over the whole input.
#[derive(Debug, Clone)]
pub struct PassOneStats {
    pub sums: RunningSums,
    pub min_pcpm: f64,
    pub max_pcpm: f64,
    /// Distinct positive bids with multiplicities, ascending.
    pub positive_bid_counts: Vec<(f64, u64)>,
    pub n_groups: u64,
    pub n_missing_group_key: u64,
    pub tally: ErrorTally,
}

impl PassOneStats {
    pub fn n_samples(&self) -> u64 {
        self.sums.n_samples
    }

    pub fn n_positive(&self) -> u64 {
        self.sums.n_positive
    }

    pub fn distinct_positive_bids(&self) -> Vec<f64> {
        self.positive_bid_counts.iter().map(|&(b, _)| b).collect()
    }
}

/// Scans the input once and returns exact score extrema, the distinct
/// positive bids, and group cardinality. Fails with `EmptyInput` when
/// no valid sample exists.
pub fn two_pass_plan(spec: &InputSpec, strict: bool) -> Result<PassOneStats> {
    let mut stream = stream_samples(spec, strict)?;
    let mut sums = RunningSums::default();
    let mut min_pcpm = f64::INFINITY;
    let mut max_pcpm = f64::NEG_INFINITY;
    let mut bids: std::collections::BTreeMap<u64, u64> = std::collections::BTreeMap::new();
    let mut groups: HashSet<String> = HashSet::new();
    let mut n_missing_group_key = 0u64;
    for item in &mut stream {
        let sample = item?;
        sums.add(&sample);
        let pcpm = sample.pcpm();
        min_pcpm = min_pcpm.min(pcpm);
        max_pcpm = max_pcpm.max(pcpm);
        if sample.label {
            *bids.entry(sample.bid.to_bits()).or_insert(0) += 1;
        }
        match sample.group_key {
            Some(key) => {
                if !groups.contains(&key) {
                    groups.insert(key);
                }
            }
            None => n_missing_group_key += 1,
        }
    }
    if sums.n_samples == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(PassOneStats {
        sums,
        min_pcpm,
        max_pcpm,
        positive_bid_counts: bids
            .into_iter()
            .map(|(bits, cnt)| (f64::from_bits(bits), cnt))
            .collect(),
        n_groups: groups.len() as u64,
        n_missing_group_key,
        tally: *stream.tally(),
    })
}

/// Buffers the whole input; the in-memory twin of the streaming path.
pub fn read_all(spec: &InputSpec, strict: bool) -> Result<(Vec<Sample>, ErrorTally)> {
    let mut stream = stream_samples(spec, strict)?;
    let mut samples = Vec::new();
    for item in &mut stream {
        samples.push(item?);
    }
    Ok((samples, *stream.tally()))
}
