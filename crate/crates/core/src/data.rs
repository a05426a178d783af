//! Datasets: synthetic two-Gaussian task, label-skewed client partitioning,
//! and CSV ingestion for the credit-approval schema.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::seed::mix64;
use crate::trainer::Dataset;

/// Days-to-years divisor.
pub const DAYS_PER_YEAR: f64 = 365.0;

/// Two-class Gaussian data.
///
/// Labels are Bernoulli(`class_balance`). Features are unit-variance normals
/// centred at `+separation * u` for class 1 and `-separation * u` for class 0,
/// where `u = (1, ..., 1) / sqrt(d)`. The Bayes accuracy is therefore
/// `Phi(separation)` regardless of `d`.
pub fn generate_synthetic(
    n: usize,
    d: usize,
    class_balance: f64,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n < 10 {
        return Err(Error::InvalidConfig(format!("need at least 10 samples, got {n}")));
    }
    if d == 0 {
        return Err(Error::InvalidConfig("feature dimension must be positive".into()));
    }
    if !(class_balance > 0.0 && class_balance < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "class balance {class_balance} must lie in (0, 1)"
        )));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "separation {separation} must be finite and non-negative"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = separation / (d as f64).sqrt();
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = u8::from(rng.gen::<f64>() < class_balance);
        let centre = if y == 1 { shift } else { -shift };
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(centre + z);
        }
        labels.push(y);
    }
    Dataset::new(features, labels, d)
}

/// Deterministic shuffle-and-cut. Returns `(kept, held_out)` with
/// `round(n * fraction)` rows held out, always leaving at least one kept row.
pub fn holdout_split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (kept, held) = holdout_indices(data.len(), fraction, seed)?;
    Ok((data.subset(&kept), data.subset(&held)))
}

fn holdout_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!(
            "holdout fraction {fraction} must lie in [0, 1)"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held = ((n as f64 * fraction).round() as usize).min(n.saturating_sub(1));
    let kept = order.split_off(held);
    Ok((kept, order))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    pub num_clients: usize,
    pub dirichlet_alpha: f64,
    pub seed: u64,
    pub val_fraction: f64,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self {
            num_clients: 5,
            dirichlet_alpha: 1.0,
            seed: 0,
            val_fraction: 0.1,
        }
    }
}

impl PartitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::InvalidConfig("need at least one client".into()));
        }
        if !(self.dirichlet_alpha.is_finite() && self.dirichlet_alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dirichlet alpha {} must be positive",
                self.dirichlet_alpha
            )));
        }
        if !(0.0..=0.5).contains(&self.val_fraction) {
            return Err(Error::InvalidConfig(format!(
                "validation fraction {} must lie in [0, 0.5]",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// One client's local data.
#[derive(Debug, Clone)]
pub struct ClientSplit {
    pub train: Dataset,
    pub val: Dataset,
    /// Row indices into the partitioned dataset, train rows first.
    pub source_rows: Vec<usize>,
}

impl ClientSplit {
    pub fn total_samples(&self) -> usize {
        self.train.len() + self.val.len()
    }
}

const MAX_PARTITION_ATTEMPTS: u64 = 100;

/// Label-skewed split: for each class, client shares are drawn from
/// Dirichlet(alpha). Resamples until every client holds at least one row.
pub fn partition(data: &Dataset, spec: &PartitionSpec) -> Result<Vec<ClientSplit>> {
    spec.validate()?;
    if data.len() < spec.num_clients {
        return Err(Error::InvalidConfig(format!(
            "{} rows cannot cover {} clients",
            data.len(),
            spec.num_clients
        )));
    }
    let k = spec.num_clients;
    let gamma = Gamma::new(spec.dirichlet_alpha, 1.0)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    for attempt in 0..MAX_PARTITION_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(spec.seed ^ mix64(attempt)));
        let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); k];
        for class in [0u8, 1] {
            let mut rows: Vec<usize> = (0..data.len()).filter(|&i| data.label(i) == class).collect();
            rows.shuffle(&mut rng);
            let mut shares: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng)).collect();
            let total: f64 = shares.iter().sum();
            if total > 0.0 && total.is_finite() {
                shares.iter_mut().for_each(|s| *s /= total);
            } else {
                shares = vec![1.0 / k as f64; k];
            }
            let n_class = rows.len();
            let mut start = 0usize;
            let mut cumulative = 0.0;
            for (client, share) in shares.iter().enumerate() {
                cumulative += share;
                let end = if client + 1 == k {
                    n_class
                } else {
                    ((cumulative * n_class as f64).round() as usize).clamp(start, n_class)
                };
                assigned[client].extend_from_slice(&rows[start..end]);
                start = end;
            }
        }
        if assigned.iter().any(Vec::is_empty) {
            continue;
        }
        let splits = assigned
            .into_iter()
            .map(|mut rows| {
                rows.shuffle(&mut rng);
                let n_val = (rows.len() as f64 * spec.val_fraction).floor() as usize;
                let val_rows = rows[..n_val].to_vec();
                let train_rows = rows[n_val..].to_vec();
                let mut source_rows = train_rows.clone();
                source_rows.extend_from_slice(&val_rows);
                ClientSplit {
                    train: data.subset(&train_rows),
                    val: data.subset(&val_rows),
                    source_rows,
                }
            })
            .collect();
        return Ok(splits);
    }
    Err(Error::InvalidConfig(format!(
        "no partition gave every client a sample after {MAX_PARTITION_ATTEMPTS} attempts"
    )))
}

/// Column roles and transforms for the credit-approval CSV pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessPlan {
    pub id_column: String,
    pub status_column: String,
    /// Monthly statuses that mark an applicant as a bad credit risk.
    pub bad_statuses: Vec<String>,
    pub numeric_columns: Vec<String>,
    pub categorical_columns: Vec<String>,
    /// Day count (negative = past) converted to `age_years`.
    pub days_birth_column: Option<String>,
    /// Day count converted to `years_employed` plus an `is_unemployed` flag.
    pub days_employed_column: Option<String>,
    /// Positive placeholder meaning "not employed".
    pub unemployed_sentinel: f64,
    pub test_fraction: f64,
}

impl Default for PreprocessPlan {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        Self {
            id_column: "ID".into(),
            status_column: "STATUS".into(),
            // 60+ days past due.
            bad_statuses: s(&["2", "3", "4", "5"]),
            numeric_columns: s(&[
                "CNT_CHILDREN",
                "AMT_INCOME_TOTAL",
                "FLAG_WORK_PHONE",
                "FLAG_PHONE",
                "FLAG_EMAIL",
                "CNT_FAM_MEMBERS",
            ]),
            categorical_columns: s(&[
                "CODE_GENDER",
                "FLAG_OWN_CAR",
                "FLAG_OWN_REALTY",
                "NAME_INCOME_TYPE",
                "NAME_EDUCATION_TYPE",
                "NAME_FAMILY_STATUS",
                "NAME_HOUSING_TYPE",
                "OCCUPATION_TYPE",
            ]),
            days_birth_column: Some("DAYS_BIRTH".into()),
            days_employed_column: Some("DAYS_EMPLOYED".into()),
            unemployed_sentinel: 365_243.0,
            test_fraction: 0.2,
        }
    }
}

/// One merged applicant before imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub id: String,
    /// Values for [`FittedPlan::numeric_names`] order; `None` = missing.
    pub numeric: Vec<Option<f64>>,
    pub categorical: Vec<Option<String>>,
    pub label: u8,
}

/// Statistics learned from the training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPlan {
    pub numeric_names: Vec<String>,
    pub categorical_names: Vec<String>,
    pub medians: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub modes: Vec<String>,
    /// Sorted category vocabulary per categorical column.
    pub vocabularies: Vec<Vec<String>>,
}

impl FittedPlan {
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = self.numeric_names.clone();
        for (col, vocab) in self.categorical_names.iter().zip(&self.vocabularies) {
            names.extend(vocab.iter().map(|v| format!("{col}={v}")));
        }
        names
    }

    pub fn dim(&self) -> usize {
        self.numeric_names.len() + self.vocabularies.iter().map(Vec::len).sum::<usize>()
    }

    /// Imputes, standardizes and one-hot encodes one record.
    pub fn transform(&self, r: &RawRecord) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for (j, v) in r.numeric.iter().enumerate() {
            let x = v.unwrap_or(self.medians[j]);
            out.push((x - self.means[j]) / self.stds[j]);
        }
        for (j, v) in r.categorical.iter().enumerate() {
            let value = v.as_deref().unwrap_or(&self.modes[j]);
            let vocab = &self.vocabularies[j];
            let hit = vocab.binary_search_by(|c| c.as_str().cmp(value)).ok();
            out.extend((0..vocab.len()).map(|k| if Some(k) == hit { 1.0 } else { 0.0 }));
        }
        out
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len().is_multiple_of(2) {
        0.5 * (values[mid - 1] + values[mid])
    } else {
        values[mid]
    })
}

/// Fits imputation, scaling and vocabulary statistics on `rows`.
pub fn fit_plan(
    rows: &[RawRecord],
    numeric_names: Vec<String>,
    categorical_names: Vec<String>,
) -> Result<FittedPlan> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("cannot fit preprocessing on zero rows".into()));
    }
    let mut medians = Vec::new();
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for j in 0..numeric_names.len() {
        let mut present: Vec<f64> = rows.iter().filter_map(|r| r.numeric[j]).collect();
        let med = median(&mut present).unwrap_or(0.0);
        let imputed: Vec<f64> = rows.iter().map(|r| r.numeric[j].unwrap_or(med)).collect();
        let n = imputed.len() as f64;
        let mean = imputed.iter().sum::<f64>() / n;
        let var = imputed.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        medians.push(med);
        means.push(mean);
        stds.push(if std > 0.0 { std } else { 1.0 });
    }
    let mut modes = Vec::new();
    let mut vocabularies = Vec::new();
    for j in 0..categorical_names.len() {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in rows {
            if let Some(v) = &r.categorical[j] {
                *counts.entry(v.as_str()).or_default() += 1;
            }
        }
        // Highest count wins; BTreeMap order breaks ties lexicographically.
        let mode = counts
            .iter()
            .fold(None::<(&str, usize)>, |best, (&v, &c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((v, c)),
            })
            .map_or_else(|| "__missing__".to_string(), |(v, _)| v.to_string());
        let mut vocab: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
        if !vocab.contains(&mode) {
            vocab.push(mode.clone());
            vocab.sort();
        }
        modes.push(mode);
        vocabularies.push(vocab);
    }
    Ok(FittedPlan {
        numeric_names,
        categorical_names,
        medians,
        means,
        stds,
        modes,
        vocabularies,
    })
}

fn is_missing(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || ["na", "nan", "null", "none"].contains(&t.to_ascii_lowercase().as_str())
}

fn parse_number(s: &str, column: &str) -> Result<Option<f64>> {
    if is_missing(s) {
        return Ok(None);
    }
    s.trim()
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Malformed(format!("column {column}: {s:?} is not a number")))
}

/// Output of [`ingest_csv`].
#[derive(Debug, Clone)]
pub struct Ingested {
    pub train: Dataset,
    pub test: Dataset,
    pub plan: FittedPlan,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

fn header_index(headers: &csv::StringRecord, name: &str, file: &Path) -> Result<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| {
        Error::Malformed(format!("{} has no column {name:?}", file.display()))
    })
}

/// Reads both files and merges them into raw records (application file order).
pub fn read_raw_records(
    application_path: &Path,
    credit_path: &Path,
    plan: &PreprocessPlan,
) -> Result<(Vec<RawRecord>, Vec<String>, Vec<String>)> {
    let mut credit = csv::Reader::from_path(credit_path)?;
    let headers = credit.headers()?.clone();
    let id_col = header_index(&headers, &plan.id_column, credit_path)?;
    let status_col = header_index(&headers, &plan.status_column, credit_path)?;
    let bad: HashSet<&str> = plan.bad_statuses.iter().map(String::as_str).collect();
    let mut risk: HashMap<String, bool> = HashMap::new();
    for rec in credit.records() {
        let rec = rec?;
        let id = rec.get(id_col).unwrap_or("").trim().to_string();
        let is_bad = bad.contains(rec.get(status_col).unwrap_or("").trim());
        *risk.entry(id).or_insert(false) |= is_bad;
    }

    let mut app = csv::Reader::from_path(application_path)?;
    let headers = app.headers()?.clone();
    let app_id = header_index(&headers, &plan.id_column, application_path)?;
    let numeric_idx = plan
        .numeric_columns
        .iter()
        .map(|c| header_index(&headers, c, application_path))
        .collect::<Result<Vec<_>>>()?;
    let categorical_idx = plan
        .categorical_columns
        .iter()
        .map(|c| header_index(&headers, c, application_path))
        .collect::<Result<Vec<_>>>()?;
    let birth_idx = plan
        .days_birth_column
        .as_ref()
        .map(|c| header_index(&headers, c, application_path))
        .transpose()?;
    let employed_idx = plan
        .days_employed_column
        .as_ref()
        .map(|c| header_index(&headers, c, application_path))
        .transpose()?;

    let mut numeric_names = plan.numeric_columns.clone();
    if birth_idx.is_some() {
        numeric_names.push("age_years".into());
    }
    if employed_idx.is_some() {
        numeric_names.push("years_employed".into());
        numeric_names.push("is_unemployed".into());
    }

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for rec in app.records() {
        let rec = rec?;
        let id = rec.get(app_id).unwrap_or("").trim().to_string();
        let Some(&is_bad) = risk.get(&id) else { continue };
        if !seen.insert(id.clone()) {
            continue;
        }
        let field = |i: usize| rec.get(i).unwrap_or("");
        let mut numeric = Vec::with_capacity(numeric_names.len());
        for (&i, name) in numeric_idx.iter().zip(&plan.numeric_columns) {
            numeric.push(parse_number(field(i), name)?);
        }
        if let (Some(i), Some(name)) = (birth_idx, &plan.days_birth_column) {
            numeric.push(parse_number(field(i), name)?.map(|d| -d / DAYS_PER_YEAR));
        }
        if let (Some(i), Some(name)) = (employed_idx, &plan.days_employed_column) {
            match parse_number(field(i), name)? {
                Some(d) if d == plan.unemployed_sentinel || d > 0.0 => {
                    numeric.push(Some(0.0));
                    numeric.push(Some(1.0));
                }
                Some(d) => {
                    numeric.push(Some(-d / DAYS_PER_YEAR));
                    numeric.push(Some(0.0));
                }
                None => {
                    numeric.push(None);
                    numeric.push(None);
                }
            }
        }
        let categorical = categorical_idx
            .iter()
            .map(|&i| {
                let v = field(i);
                (!is_missing(v)).then(|| v.trim().to_string())
            })
            .collect();
        records.push(RawRecord {
            id,
            numeric,
            categorical,
            label: u8::from(is_bad),
        });
    }
    Ok((records, numeric_names, plan.categorical_columns.clone()))
}

/// Merge, label, split 80/20 (by `seed`), then fit preprocessing on the
/// training rows and transform both splits.
pub fn ingest_csv(
    application_path: &Path,
    credit_path: &Path,
    plan: &PreprocessPlan,
    seed: u64,
) -> Result<Ingested> {
    for p in [application_path, credit_path] {
        if !p.exists() {
            return Err(Error::InvalidInput(format!("{} does not exist", p.display())));
        }
    }
    let (records, numeric_names, categorical_names) =
        read_raw_records(application_path, credit_path, plan)?;
    if records.is_empty() {
        return Err(Error::InvalidInput("no applicants left after merging".into()));
    }
    let (train_idx, test_idx) = holdout_indices(records.len(), plan.test_fraction, seed)?;
    let train_rows: Vec<RawRecord> = train_idx.iter().map(|&i| records[i].clone()).collect();
    let test_rows: Vec<RawRecord> = test_idx.iter().map(|&i| records[i].clone()).collect();
    let fitted = fit_plan(&train_rows, numeric_names, categorical_names)?;
    let build = |rows: &[RawRecord]| -> Result<Dataset> {
        let features: Vec<f64> = rows.iter().flat_map(|r| fitted.transform(r)).collect();
        Dataset::with_rows(features, rows.iter().map(|r| r.label).collect(), fitted.dim())
    };
    Ok(Ingested {
        train: build(&train_rows)?,
        test: build(&test_rows)?,
        train_ids: train_rows.iter().map(|r| r.id.clone()).collect(),
        test_ids: test_rows.iter().map(|r| r.id.clone()).collect(),
        plan: fitted,
    })
}
