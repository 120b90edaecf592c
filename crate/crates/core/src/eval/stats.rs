use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::{inducer_name, EvalReport};
use crate::ensemble::Strategy;
use crate::error::{Error, Result};

/// Two-tailed Nemenyi critical values `q_α` for k = 2..=10.
const Q_05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const Q_10: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64> {
    if !(2..=10).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "Nemenyi table covers 2 to 10 algorithms, got {k}"
        )));
    }
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &Q_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_10
    } else {
        return Err(Error::InvalidArgument(format!(
            "alpha must be 0.05 or 0.10, got {alpha}"
        )));
    };
    Ok(table[k - 2])
}

/// Mean accuracies: one row per dataset, one column per algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub datasets: Vec<String>,
    pub algorithms: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl AccuracyTable {
    pub fn new(datasets: Vec<String>, algorithms: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != datasets.len() || values.iter().any(|r| r.len() != algorithms.len()) {
            return Err(Error::Shape(format!(
                "accuracy table must be {}x{}",
                datasets.len(),
                algorithms.len()
            )));
        }
        Ok(AccuracyTable {
            datasets,
            algorithms,
            values,
        })
    }

    /// Builds the table from cross-validation reports.
    ///
    /// Columns are ensemble strategies. Rows are datasets; when the reports
    /// cover more than one inducer every (dataset, inducer) pair is its own
    /// row, labelled `dataset [inducer]`.
    pub fn from_reports(reports: &[EvalReport]) -> Result<Self> {
        let grid = ReportGrid::build(reports)?;
        AccuracyTable::new(
            grid.rows,
            grid.strategies.iter().map(|s| s.name().to_string()).collect(),
            grid.cells.iter().map(|r| r.iter().map(|c| c.mean).collect()).collect(),
        )
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.algorithms.iter().position(|a| a == name)
    }
}

/// Reports arranged by row (dataset, or dataset and inducer) and strategy.
pub(super) struct ReportGrid<'a> {
    pub rows: Vec<String>,
    pub strategies: Vec<Strategy>,
    pub cells: Vec<Vec<&'a EvalReport>>,
}

impl<'a> ReportGrid<'a> {
    pub fn build(reports: &'a [EvalReport]) -> Result<Self> {
        let strategies: Vec<Strategy> = Strategy::ALL
            .into_iter()
            .filter(|s| reports.iter().any(|r| r.strategy == *s))
            .collect();
        let mut inducers: Vec<_> = reports.iter().map(|r| r.inducer).collect();
        inducers.sort_by_key(|i| inducer_name(*i));
        inducers.dedup();
        let multi = inducers.len() > 1;

        let mut keys: Vec<(&str, &'static str)> = reports
            .iter()
            .map(|r| (r.dataset.as_str(), inducer_name(r.inducer)))
            .collect();
        keys.sort_unstable();
        keys.dedup();

        let label = |(d, i): (&str, &str)| if multi { format!("{d} [{i}]") } else { d.to_string() };
        let mut cells = Vec::with_capacity(keys.len());
        for &key in &keys {
            let mut line = Vec::with_capacity(strategies.len());
            for &s in &strategies {
                let mut hits = reports.iter().filter(|r| {
                    r.dataset == key.0 && inducer_name(r.inducer) == key.1 && r.strategy == s
                });
                let hit = hits.next().ok_or_else(|| Error::MissingCell {
                    dataset: label(key),
                    algorithm: s.name().into(),
                })?;
                if hits.next().is_some() {
                    return Err(Error::InvalidArgument(format!(
                        "more than one report for dataset `{}`, algorithm `{}`",
                        label(key),
                        hit.algorithm
                    )));
                }
                line.push(hit);
            }
            cells.push(line);
        }
        Ok(ReportGrid {
            rows: keys.into_iter().map(label).collect(),
            strategies,
            cells,
        })
    }
}

/// Ranks within each row: 1 for the highest accuracy, ties averaged.
pub fn rank_rows(values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    values
        .iter()
        .map(|row| {
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
            let mut ranks = vec![0.0; row.len()];
            let mut i = 0;
            while i < order.len() {
                let mut j = i;
                while j + 1 < order.len() && row[order[j + 1]] == row[order[i]] {
                    j += 1;
                }
                // positions i..=j share the mean of ranks i+1..=j+1
                let shared = (i + j) as f64 / 2.0 + 1.0;
                for &o in &order[i..=j] {
                    ranks[o] = shared;
                }
                i = j + 1;
            }
            ranks
        })
        .collect()
}

pub fn average_ranks(ranks: &[Vec<f64>]) -> Vec<f64> {
    let k = ranks.first().map_or(0, Vec::len);
    let n = ranks.len() as f64;
    (0..k).map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n).collect()
}

/// Mean over datasets of `100·(alg − plain)/plain`.
pub fn average_improvement(alg: &[f64], plain: &[f64]) -> Result<f64> {
    if alg.len() != plain.len() || alg.is_empty() {
        return Err(Error::Shape(format!(
            "{} accuracies against {} baseline accuracies",
            alg.len(),
            plain.len()
        )));
    }
    let mut total = 0.0;
    for (a, p) in alg.iter().zip(plain) {
        if *p == 0.0 {
            return Err(Error::InvalidArgument(
                "baseline accuracy of zero makes the improvement undefined".into(),
            ));
        }
        total += 100.0 * (a - p) / p;
    }
    Ok(total / alg.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub algorithms: Vec<String>,
    pub datasets: Vec<String>,
    pub ranks: Vec<Vec<f64>>,
    pub average_ranks: Vec<f64>,
    pub friedman_chi2: f64,
    /// `None` when every dataset ranks the algorithms identically, which
    /// sends the statistic to infinity.
    pub iman_davenport_f: Option<f64>,
    pub df1: usize,
    pub df2: usize,
    pub f_critical: f64,
    pub rejects_null: bool,
    pub alpha: f64,
    pub nemenyi_q: f64,
    pub nemenyi_cd: f64,
}

pub fn rank_summary(table: &AccuracyTable, alpha: f64) -> Result<RankSummary> {
    let n = table.datasets.len();
    let k = table.algorithms.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 datasets, got {n}")));
    }
    let q = nemenyi_q(k, alpha)?;
    let ranks = rank_rows(&table.values);
    let avg = average_ranks(&ranks);
    let (nf, kf) = (n as f64, k as f64);

    let sum_sq: f64 = avg.iter().map(|r| r * r).sum();
    let chi2 = 12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0);
    let denom = nf * (kf - 1.0) - chi2;
    let f = (denom > 1e-12 * nf * kf).then(|| (nf - 1.0) * chi2 / denom);

    let df1 = k - 1;
    let df2 = (k - 1) * (n - 1);
    let dist = FisherSnedecor::new(df1 as f64, df2 as f64)
        .map_err(|e| Error::InvalidArgument(format!("F({df1}, {df2}): {e}")))?;
    let f_critical = dist.inverse_cdf(1.0 - alpha);
    let rejects_null = f.is_none_or(|f| f > f_critical);
    let cd = q * (kf * (kf + 1.0) / (6.0 * nf)).sqrt();

    Ok(RankSummary {
        algorithms: table.algorithms.clone(),
        datasets: table.datasets.clone(),
        ranks,
        average_ranks: avg,
        friedman_chi2: chi2,
        iman_davenport_f: f,
        df1,
        df2,
        f_critical,
        rejects_null,
        alpha,
        nemenyi_q: q,
        nemenyi_cd: cd,
    })
}
