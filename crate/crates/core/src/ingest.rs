//! CSV ingestion of benchmark records, microbenchmark ratios and processor lineage,
//! plus the per-suite summaries built on top of them.
//!
//! Three files feed the pipeline:
//!
//! * `systems.csv`: `record_id, suite, date, vendor, system, processor, cores, freq_mhz,
//!   l3_kb, threads_per_core, auto_parallel, transistors, score_speed, score_rate`
//! * `micros.csv`: `record_id, micro_name, ratio`
//! * `lineage.csv`: `processor, genus, parent_genus`
//!
//! Empty cells are missing values. Dates are `YYYY-MM`; finer dates are truncated.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::MonthIndex;
use crate::stats;
use crate::suite::Suite;

/// Hardware factors of one benchmarked machine. Any field may be absent in the raw data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HardwareConfig {
    pub cores: Option<u32>,
    pub freq_mhz: Option<f64>,
    pub l3_kb: Option<f64>,
    pub threads_per_core: Option<f64>,
    pub auto_parallel: Option<bool>,
    pub transistors: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub record_id: String,
    pub suite: Suite,
    pub date: MonthIndex,
    pub vendor: String,
    pub system: String,
    pub processor: String,
    /// Lowercased, whitespace-collapsed `vendor system processor`; the overlap join key.
    pub system_id: String,
    pub hw: HardwareConfig,
    pub score_speed: Option<f64>,
    pub score_rate: Option<f64>,
    pub micros: BTreeMap<String, f64>,
}

impl BenchmarkRecord {
    pub fn score(&self, kind: ScoreKind) -> Option<f64> {
        match kind {
            ScoreKind::Speed => self.score_speed,
            ScoreKind::Rate => self.score_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    #[default]
    Speed,
    Rate,
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speed" => Ok(ScoreKind::Speed),
            "rate" => Ok(ScoreKind::Rate),
            other => Err(Error::InvalidArgument(format!("unknown score kind `{other}`"))),
        }
    }
}

/// A numeric hardware factor usable as a regression covariate or plot column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HwField {
    Cores,
    FreqMhz,
    L3Kb,
    ThreadsPerCore,
    AutoParallel,
}

impl HwField {
    pub const ALL: [HwField; 5] = [
        HwField::Cores,
        HwField::FreqMhz,
        HwField::L3Kb,
        HwField::ThreadsPerCore,
        HwField::AutoParallel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HwField::Cores => "cores",
            HwField::FreqMhz => "freq_mhz",
            HwField::L3Kb => "l3_kb",
            HwField::ThreadsPerCore => "threads_per_core",
            HwField::AutoParallel => "auto_parallel",
        }
    }

    pub fn get(self, hw: &HardwareConfig) -> Option<f64> {
        match self {
            HwField::Cores => hw.cores.map(f64::from),
            HwField::FreqMhz => hw.freq_mhz,
            HwField::L3Kb => hw.l3_kb,
            HwField::ThreadsPerCore => hw.threads_per_core,
            HwField::AutoParallel => hw.auto_parallel.map(|b| if b { 1.0 } else { 0.0 }),
        }
    }
}

impl std::fmt::Display for HwField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for HwField {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        HwField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown hardware field `{s}`")))
    }
}

impl HardwareConfig {
    /// Field-wise `self`, falling back to `other` where `self` is missing.
    pub fn or(&self, other: &HardwareConfig) -> HardwareConfig {
        HardwareConfig {
            cores: self.cores.or(other.cores),
            freq_mhz: self.freq_mhz.or(other.freq_mhz),
            l3_kb: self.l3_kb.or(other.l3_kb),
            threads_per_core: self.threads_per_core.or(other.threads_per_core),
            auto_parallel: self.auto_parallel.or(other.auto_parallel),
            transistors: self.transistors.or(other.transistors),
        }
    }
}

/// Lowercase and collapse runs of whitespace to single spaces.
pub fn normalize_key(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn system_key(vendor: &str, system: &str, processor: &str) -> String {
    normalize_key(&format!("{vendor} {system} {processor}"))
}

/// A row the systems parser refused.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowError {
    pub line: u64,
    pub column: String,
    pub message: String,
}

impl From<RowError> for Error {
    fn from(e: RowError) -> Self {
        Error::Parse {
            line: e.line,
            column: e.column,
            message: e.message,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub records: Vec<BenchmarkRecord>,
    pub rejected: Vec<RowError>,
    pub input_rows: usize,
}

const SYSTEMS_COLUMNS: [&str; 14] = [
    "record_id",
    "suite",
    "date",
    "vendor",
    "system",
    "processor",
    "cores",
    "freq_mhz",
    "l3_kb",
    "threads_per_core",
    "auto_parallel",
    "transistors",
    "score_speed",
    "score_rate",
];

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn header_positions(headers: &csv::StringRecord, required: &[&str]) -> Result<Vec<usize>> {
    required
        .iter()
        .map(|name| {
            headers.iter().position(|h| h == *name).ok_or_else(|| Error::Parse {
                line: 1,
                column: name.to_string(),
                message: "missing required header".into(),
            })
        })
        .collect()
}

struct Row<'a> {
    line: u64,
    fields: &'a csv::StringRecord,
    positions: &'a [usize],
    names: &'a [&'a str],
}

impl Row<'_> {
    fn cell(&self, idx: usize) -> &str {
        self.fields.get(self.positions[idx]).unwrap_or("")
    }

    fn err(&self, idx: usize, message: impl Into<String>) -> RowError {
        RowError {
            line: self.line,
            column: self.names[idx].to_string(),
            message: message.into(),
        }
    }

    fn required(&self, idx: usize) -> Result<&str, RowError> {
        let v = self.cell(idx);
        if v.is_empty() {
            Err(self.err(idx, "required value is empty"))
        } else {
            Ok(v)
        }
    }

    fn opt<T: std::str::FromStr>(&self, idx: usize) -> Result<Option<T>, RowError> {
        let v = self.cell(idx);
        if v.is_empty() {
            return Ok(None);
        }
        v.parse()
            .map(Some)
            .map_err(|_| self.err(idx, format!("cannot parse `{v}`")))
    }

    fn positive(&self, idx: usize) -> Result<Option<f64>, RowError> {
        match self.opt::<f64>(idx)? {
            Some(x) if !(x.is_finite() && x > 0.0) => Err(self.err(idx, format!("value {x} must be positive"))),
            other => Ok(other),
        }
    }
}

fn parse_system_row(row: &Row<'_>) -> Result<BenchmarkRecord, RowError> {
    let expected = row.positions.iter().max().map_or(0, |m| m + 1);
    if row.fields.len() < expected {
        return Err(RowError {
            line: row.line,
            column: row.names[row.positions.iter().position(|&p| p >= row.fields.len()).unwrap_or(0)].to_string(),
            message: format!("row has {} fields, expected {expected}", row.fields.len()),
        });
    }

    let record_id = row.required(0)?.to_string();
    let suite: Suite = row.required(1)?.parse().map_err(|e: Error| row.err(1, e.to_string()))?;
    let date: MonthIndex = row.required(2)?.parse().map_err(|e: Error| row.err(2, e.to_string()))?;
    let vendor = row.cell(3).to_string();
    let system = row.cell(4).to_string();
    let processor = row.cell(5).to_string();

    let cores = row.opt::<u32>(6)?;
    if cores == Some(0) {
        return Err(row.err(6, "cores must be at least 1"));
    }
    let freq_mhz = row.positive(7)?;
    let l3_kb = row.opt::<f64>(8)?;
    if let Some(l3) = l3_kb {
        if !(l3.is_finite() && l3 >= 0.0) {
            return Err(row.err(8, format!("value {l3} must be nonnegative")));
        }
    }
    let threads_per_core = row.opt::<f64>(9)?;
    if let Some(t) = threads_per_core {
        if !(t.is_finite() && t >= 1.0) {
            return Err(row.err(9, format!("value {t} must be at least 1")));
        }
    }
    let auto_parallel = match row.cell(10) {
        "" => None,
        "0" => Some(false),
        "1" => Some(true),
        other => return Err(row.err(10, format!("expected 0 or 1, got `{other}`"))),
    };
    let transistors = row.opt::<u64>(11)?;
    if transistors == Some(0) {
        return Err(row.err(11, "transistor count must be positive"));
    }
    let score_speed = row.positive(12)?;
    let score_rate = row.positive(13)?;
    if score_speed.is_none() && score_rate.is_none() {
        return Err(row.err(12, "at least one of score_speed and score_rate is required"));
    }

    Ok(BenchmarkRecord {
        system_id: system_key(&vendor, &system, &processor),
        record_id,
        suite,
        date,
        vendor,
        system,
        processor,
        hw: HardwareConfig {
            cores,
            freq_mhz,
            l3_kb,
            threads_per_core,
            auto_parallel,
            transistors,
        },
        score_speed,
        score_rate,
        micros: BTreeMap::new(),
    })
}

/// Parse `systems.csv`, keeping valid rows and collecting per-row errors.
///
/// `records.len() + rejected.len() == input_rows` always holds. A duplicate
/// `record_id` rejects the later row.
pub fn parse_systems<R: Read>(input: R) -> Result<ParseReport> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let positions = header_positions(&headers, &SYSTEMS_COLUMNS)?;
    let mut report = ParseReport::default();
    let mut seen = BTreeSet::new();
    let mut fields = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut fields) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                // Malformed CSV (e.g. bad UTF-8); the reader cannot resynchronise reliably.
                let line = e.position().map_or(0, |p| p.line());
                report.input_rows += 1;
                report.rejected.push(RowError {
                    line,
                    column: String::new(),
                    message: e.to_string(),
                });
                continue;
            }
        }
        report.input_rows += 1;
        let row = Row {
            line: fields.position().map_or(0, |p| p.line()),
            fields: &fields,
            positions: &positions,
            names: &SYSTEMS_COLUMNS,
        };
        match parse_system_row(&row) {
            Ok(rec) if !seen.insert(rec.record_id.clone()) => {
                report.rejected.push(row.err(0, format!("duplicate record_id `{}`", rec.record_id)));
            }
            Ok(rec) => report.records.push(rec),
            Err(e) => report.rejected.push(e),
        }
    }
    Ok(report)
}

/// Join `micros.csv` onto already-parsed records. Any bad row is an error.
pub fn attach_micros<R: Read>(records: &mut [BenchmarkRecord], input: R) -> Result<()> {
    const COLUMNS: [&str; 3] = ["record_id", "micro_name", "ratio"];
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let positions = header_positions(&headers, &COLUMNS)?;
    let index: HashMap<String, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.record_id.clone(), i))
        .collect();
    let definitions: BTreeMap<Suite, _> = Suite::ALL.iter().map(|s| (*s, s.definition())).collect();

    for result in rdr.records() {
        let fields = result?;
        let row = Row {
            line: fields.position().map_or(0, |p| p.line()),
            fields: &fields,
            positions: &positions,
            names: &COLUMNS,
        };
        let record_id = row.required(0)?;
        let name = row.required(1)?;
        let ratio = row.positive(2)?.ok_or_else(|| row.err(2, "required value is empty"))?;
        let &i = index.get(record_id).ok_or_else(|| Error::UnknownRecord {
            line: row.line,
            record_id: record_id.to_string(),
        })?;
        let rec = &mut records[i];
        if !definitions[&rec.suite].contains(name) {
            return Err(row
                .err(1, format!("`{name}` is not a microbenchmark of suite {}", rec.suite))
                .into());
        }
        if rec.micros.insert(name.to_string(), ratio).is_some() {
            return Err(row.err(1, format!("duplicate `{name}` for record `{record_id}`")).into());
        }
    }
    Ok(())
}

/// Strict parse: any rejected systems row or bad micro row is an error.
pub fn parse_records<S: Read, M: Read>(systems: S, micros: Option<M>) -> Result<Vec<BenchmarkRecord>> {
    let report = parse_systems(systems)?;
    if let Some(first) = report.rejected.into_iter().next() {
        return Err(first.into());
    }
    let mut records = report.records;
    if let Some(m) = micros {
        attach_micros(&mut records, m)?;
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: Suite,
    pub score: ScoreKind,
    pub max: f64,
    pub mean: f64,
    pub min: f64,
    pub count: usize,
    pub mean_cores: Option<f64>,
    pub mean_freq_mhz: Option<f64>,
    pub mean_l3_kb: Option<f64>,
    pub mean_threads_per_core: Option<f64>,
}

/// Score range and hardware-factor means over the suite's records carrying `kind`.
/// A missing hardware field is excluded from that field's mean only.
pub fn summarize(records: &[BenchmarkRecord], suite: Suite, kind: ScoreKind) -> Result<SuiteSummary> {
    let rows: Vec<&BenchmarkRecord> = records
        .iter()
        .filter(|r| r.suite == suite && r.score(kind).is_some())
        .collect();
    if rows.is_empty() {
        return Err(Error::NoRecords(suite));
    }
    // Sort before summing so the result does not depend on input order.
    let mut scores: Vec<f64> = rows.iter().filter_map(|r| r.score(kind)).collect();
    scores.sort_by(f64::total_cmp);
    let field_mean = |get: &dyn Fn(&HardwareConfig) -> Option<f64>| {
        let mut xs: Vec<f64> = rows.iter().filter_map(|r| get(&r.hw)).collect();
        if xs.is_empty() {
            None
        } else {
            xs.sort_by(f64::total_cmp);
            Some(stats::mean(&xs))
        }
    };
    Ok(SuiteSummary {
        suite,
        score: kind,
        max: scores[scores.len() - 1],
        mean: stats::mean(&scores),
        min: scores[0],
        count: scores.len(),
        mean_cores: field_mean(&|h| h.cores.map(f64::from)),
        mean_freq_mhz: field_mean(&|h| h.freq_mhz),
        mean_l3_kb: field_mean(&|h| h.l3_kb),
        mean_threads_per_core: field_mean(&|h| h.threads_per_core),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageEntry {
    pub processor: String,
    pub genus: String,
    pub parent_genus: Option<String>,
}

pub fn parse_lineage<R: Read>(input: R) -> Result<Vec<LineageEntry>> {
    const COLUMNS: [&str; 3] = ["processor", "genus", "parent_genus"];
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let positions = header_positions(&headers, &COLUMNS)?;
    let mut out = Vec::new();
    for result in rdr.records() {
        let fields = result?;
        let row = Row {
            line: fields.position().map_or(0, |p| p.line()),
            fields: &fields,
            positions: &positions,
            names: &COLUMNS,
        };
        let parent = row.cell(2);
        out.push(LineageEntry {
            processor: row.required(0)?.to_string(),
            genus: row.required(1)?.to_string(),
            parent_genus: (!parent.is_empty()).then(|| parent.to_string()),
        });
    }
    Ok(out)
}

/// One generation's aggregate within a lineage branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPoint {
    pub genus: String,
    pub date: MonthIndex,
    pub mean_log_score: f64,
    pub n: usize,
}

/// A branch of the processor family tree, ancestor first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageSeries {
    pub genus: String,
    pub generations: Vec<GenerationPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageAnalysis {
    pub series: Vec<LineageSeries>,
    /// (parent generation mean, child generation mean), one per distinct parent→child edge.
    pub pairs: Vec<(f64, f64)>,
    /// `None` when either side of the pairs has zero variance.
    pub lag1_correlation: Option<f64>,
}

/// Ancestors followed above each leaf genus.
pub const MAX_ANCESTOR_GENERATIONS: usize = 3;

/// Per-branch generation means of log score and their pooled lag-1 correlation.
///
/// `observations` yields `(processor, date, score)` with positive, already
/// normalized scores. Processors are matched to lineage rows case-insensitively.
pub fn lineage_series<'a, I>(entries: &[LineageEntry], observations: I) -> Result<LineageAnalysis>
where
    I: IntoIterator<Item = (&'a str, MonthIndex, f64)>,
{
    let genus_of: HashMap<String, &str> = entries
        .iter()
        .map(|e| (normalize_key(&e.processor), e.genus.as_str()))
        .collect();
    let mut parent_of: HashMap<&str, &str> = HashMap::new();
    for e in entries {
        if let Some(p) = &e.parent_genus {
            parent_of.insert(e.genus.as_str(), p.as_str());
        }
    }

    // genus -> (sum log score, sum date, n)
    let mut acc: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for (processor, date, score) in observations {
        if !(score > 0.0) {
            return Err(Error::InvalidArgument(format!("nonpositive score {score} for `{processor}`")));
        }
        if let Some(&genus) = genus_of.get(&normalize_key(processor)) {
            let a = acc.entry(genus).or_insert((0.0, 0.0, 0));
            a.0 += score.ln();
            a.1 += date.as_f64();
            a.2 += 1;
        }
    }
    let point = |genus: &str| {
        acc.get(genus).map(|&(sum, dates, n)| GenerationPoint {
            genus: genus.to_string(),
            date: MonthIndex::round_from(dates / n as f64),
            mean_log_score: sum / n as f64,
            n,
        })
    };

    let parents: BTreeSet<&str> = parent_of.values().copied().collect();
    let mut series = Vec::new();
    let mut edges: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    for &leaf in acc.keys().filter(|g| !parents.contains(*g)) {
        let mut chain = vec![leaf];
        let mut cur = leaf;
        while chain.len() <= MAX_ANCESTOR_GENERATIONS {
            match parent_of.get(cur) {
                Some(&p) if !chain.contains(&p) => {
                    chain.push(p);
                    cur = p;
                }
                _ => break,
            }
        }
        chain.reverse();
        let generations: Vec<GenerationPoint> = chain.iter().filter_map(|g| point(g)).collect();
        for w in chain.windows(2) {
            if let (Some(a), Some(b)) = (point(w[0]), point(w[1])) {
                edges.insert((a.genus.clone(), b.genus.clone()), (a.mean_log_score, b.mean_log_score));
            }
        }
        if generations.windows(2).any(|w| w[0].date >= w[1].date) {
            log::warn!("lineage branch `{leaf}` is not strictly increasing in time");
        }
        series.push(LineageSeries {
            genus: leaf.to_string(),
            generations,
        });
    }

    if edges.is_empty() {
        return Err(Error::InsufficientData("insufficient lineage depth".into()));
    }
    let pairs: Vec<(f64, f64)> = edges.into_values().collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    Ok(LineageAnalysis {
        lag1_correlation: stats::pearson(&xs, &ys),
        series,
        pairs,
    })
}
