use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::path::Path;

use serde::Serialize;

use super::SimError;
use crate::countlaw::CountLaw;
use crate::ecf::{Provenance, Sample};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimRecord {
    pub policy_id: String,
    pub claim_count: u32,
    pub claim_amounts: Vec<f64>,
}

impl ClaimRecord {
    /// `sum_j log(amount_j)`.
    pub fn log_total(&self) -> f64 {
        self.claim_amounts.iter().map(|a| a.ln()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub policy_id: String,
    pub reason: String,
}

/// Policies left out of the dataset, by cause.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct IngestReport {
    pub zero_count: Vec<String>,
    pub frequency_only: Vec<String>,
    pub severity_only: Vec<String>,
    pub other_region: usize,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimsDataset {
    pub records: Vec<ClaimRecord>,
    pub report: IngestReport,
    pub source: String,
}

impl ClaimsDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn x_values(&self) -> Vec<f64> {
        self.records.iter().map(ClaimRecord::log_total).collect()
    }

    pub fn sample(&self) -> Result<Sample<f64>, SimError> {
        Ok(Sample::new(self.x_values(), Provenance::Ingested { source: self.source.clone() })?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestMode {
    /// Count/amount mismatches and nonpositive amounts reject the record and are reported.
    #[default]
    Lenient,
    /// The first such record is an error.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IngestOptions {
    pub mode: IngestMode,
    /// Keep only policies whose `region` column equals this value.
    pub region: Option<String>,
}

const ID: &[&str] = &["policy_id", "IDpol"];
const COUNT: &[&str] = &["claim_count", "ClaimNb"];
const AMOUNT: &[&str] = &["claim_amount", "ClaimAmount"];
const REGION: &[&str] = &["region", "Region"];

fn open(path: &Path) -> Result<csv::Reader<File>, SimError> {
    let file = File::open(path).map_err(|source| SimError::Io { path: path.display().to_string(), source })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn column(headers: &csv::StringRecord, names: &[&str], path: &Path) -> Result<usize, SimError> {
    headers.iter().position(|h| names.contains(&h)).ok_or_else(|| SimError::Schema {
        file: path.display().to_string(),
        message: format!("missing column {} (have: {})", names[0], headers.iter().collect::<Vec<_>>().join(",")),
    })
}

/// Ids such as `"17.0"` are read as `"17"`.
fn normalize_id(raw: &str) -> String {
    let raw = raw.trim().trim_matches('"');
    match raw.strip_suffix(".0") {
        Some(int) if !int.is_empty() && int.bytes().all(|b| b.is_ascii_digit()) => int.to_string(),
        _ => raw.to_string(),
    }
}

fn parse_count(raw: &str) -> Option<u32> {
    raw.parse::<u32>().ok().or_else(|| {
        let v: f64 = raw.parse().ok()?;
        (v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64).then_some(v as u32)
    })
}

fn schema(path: &Path, line: usize, message: String) -> SimError {
    SimError::Schema { file: path.display().to_string(), message: format!("row {line}: {message}") }
}

/// Inner join of a frequency file (`policy_id,claim_count[,region]`) with a severity file
/// (`policy_id,claim_amount`, one row per claim), in lenient mode.
pub fn ingest_claims(freq_csv: &Path, sev_csv: &Path) -> Result<ClaimsDataset, SimError> {
    ingest_claims_with(freq_csv, sev_csv, &IngestOptions::default())
}

pub fn ingest_claims_with(freq_csv: &Path, sev_csv: &Path, options: &IngestOptions) -> Result<ClaimsDataset, SimError> {
    let mut freq = open(freq_csv)?;
    let headers = freq.headers()?.clone();
    let (id_col, count_col) = (column(&headers, ID, freq_csv)?, column(&headers, COUNT, freq_csv)?);
    let region_col = match &options.region {
        Some(_) => Some(column(&headers, REGION, freq_csv)?),
        None => None,
    };
    let mut policies: Vec<(String, u32)> = Vec::new();
    let mut seen = HashSet::new();
    let mut report = IngestReport::default();
    for (i, row) in freq.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let id = normalize_id(row.get(id_col).unwrap_or(""));
        if id.is_empty() {
            return Err(schema(freq_csv, line, "empty policy id".into()));
        }
        let raw = row.get(count_col).unwrap_or("");
        let count = parse_count(raw).ok_or_else(|| schema(freq_csv, line, format!("claim count {raw:?} is not a nonnegative integer")))?;
        if !seen.insert(id.clone()) {
            return Err(schema(freq_csv, line, format!("duplicate policy id {id}")));
        }
        if let (Some(col), Some(want)) = (region_col, &options.region) {
            if row.get(col).map(str::trim) != Some(want.as_str()) {
                report.other_region += 1;
                continue;
            }
        }
        policies.push((id, count));
    }

    let mut sev = open(sev_csv)?;
    let headers = sev.headers()?.clone();
    let (sid_col, amount_col) = (column(&headers, ID, sev_csv)?, column(&headers, AMOUNT, sev_csv)?);
    let mut amounts: HashMap<String, Vec<f64>> = HashMap::new();
    let mut sev_order: Vec<String> = Vec::new();
    for (i, row) in sev.records().enumerate() {
        let row = row?;
        let id = normalize_id(row.get(sid_col).unwrap_or(""));
        let raw = row.get(amount_col).unwrap_or("");
        let amount: f64 = raw.parse().map_err(|_| schema(sev_csv, i + 2, format!("claim amount {raw:?} is not a number")))?;
        amounts
            .entry(id.clone())
            .or_insert_with(|| {
                sev_order.push(id);
                Vec::new()
            })
            .push(amount);
    }

    let strict = options.mode == IngestMode::Strict;
    let mut records = Vec::new();
    for (policy_id, count) in policies {
        let Some(list) = amounts.get(&policy_id) else {
            if count == 0 {
                report.zero_count.push(policy_id);
            } else {
                report.frequency_only.push(policy_id);
            }
            continue;
        };
        if count == 0 {
            report.zero_count.push(policy_id);
            continue;
        }
        if list.len() != count as usize {
            let err = SimError::JoinMismatch { policy_id: policy_id.clone(), count, amounts: list.len() };
            if strict {
                return Err(err);
            }
            report.rejected.push(Rejection { policy_id, reason: err.to_string() });
            continue;
        }
        if let Some(&amount) = list.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            let err = SimError::NonpositiveAmount { policy_id: policy_id.clone(), amount };
            if strict {
                return Err(err);
            }
            report.rejected.push(Rejection { policy_id, reason: err.to_string() });
            continue;
        }
        records.push(ClaimRecord { policy_id, claim_count: count, claim_amounts: list.clone() });
    }
    let in_freq: HashSet<&str> = seen.iter().map(String::as_str).collect();
    report.severity_only = sev_order.into_iter().filter(|id| !in_freq.contains(id.as_str())).collect();

    Ok(ClaimsDataset { records, report, source: format!("{} + {}", freq_csv.display(), sev_csv.display()) })
}

/// Writes the records back out in the two-file layout read by [`ingest_claims`].
pub fn write_claims(dataset: &ClaimsDataset, freq_csv: &Path, sev_csv: &Path) -> Result<(), SimError> {
    let create = |p: &Path| File::create(p).map_err(|source| SimError::Io { path: p.display().to_string(), source });
    let mut freq = csv::Writer::from_writer(create(freq_csv)?);
    let mut sev = csv::Writer::from_writer(create(sev_csv)?);
    freq.write_record(["policy_id", "claim_count"])?;
    sev.write_record(["policy_id", "claim_amount"])?;
    for r in &dataset.records {
        freq.write_record([r.policy_id.as_str(), &r.claim_count.to_string()])?;
        for a in &r.claim_amounts {
            sev.write_record([r.policy_id.as_str(), &a.to_string()])?;
        }
    }
    freq.flush().map_err(|source| SimError::Io { path: freq_csv.display().to_string(), source })?;
    sev.flush().map_err(|source| SimError::Io { path: sev_csv.display().to_string(), source })?;
    Ok(())
}

/// Two-point law with `p = P(N = 1)` estimated by the share of single-claim policies.
/// All-single data gives `N = 1`; all-double data gives `N = 2`.
pub fn fit_two_point(dataset: &ClaimsDataset) -> Result<CountLaw<f64>, SimError> {
    if dataset.is_empty() {
        return Err(SimError::InvalidInput("no policies to fit".into()));
    }
    if let Some(r) = dataset.records.iter().find(|r| r.claim_count > 2 || r.claim_count == 0) {
        return Err(SimError::UnsupportedCount { policy_id: r.policy_id.clone(), count: r.claim_count });
    }
    let ones = dataset.records.iter().filter(|r| r.claim_count == 1).count();
    let total = dataset.len();
    Ok(if ones == total {
        CountLaw::degenerate()
    } else if ones == 0 {
        CountLaw::tabulated(vec![0.0, 1.0])?
    } else {
        CountLaw::two_point(ones as f64 / total as f64)?
    })
}
