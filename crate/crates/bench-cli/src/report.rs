//! Collects `summary.csv` files into one table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub source: String,
    pub domain: String,
    pub arm: String,
    pub episodes: usize,
    pub reward: (f64, f64),
    pub cost: Vec<(f64, f64)>,
    pub violation_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub domain: String,
    pub rows: Vec<ReportRow>,
}

fn summary_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("summary.csv")
    } else {
        p.to_path_buf()
    }
}

fn read_summary(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{}: missing column {name}", path.display()))
    };
    let (domain, arm, episodes) = (col("domain")?, col("arm")?, col("episodes")?);
    let (mean_r, se_r, viol) = (col("mean_V_R")?, col("se_V_R")?, col("violation_rate")?);
    let k = header.iter().filter(|h| h.starts_with("mean_V_C_")).count();
    let cost_cols: Vec<(usize, usize)> = (1..=k)
        .map(|i| Ok((col(&format!("mean_V_C_{i}"))?, col(&format!("se_V_C_{i}"))?)))
        .collect::<Result<_>>()?;
    let source = path.display().to_string();
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .with_context(|| format!("{source} row {}: bad number {:?}", line + 1, &record[i]))
        };
        rows.push(ReportRow {
            source: source.clone(),
            domain: record[domain].to_string(),
            arm: record[arm].to_string(),
            episodes: record[episodes]
                .parse()
                .with_context(|| format!("{source} row {}: bad episode count", line + 1))?,
            reward: (num(mean_r)?, num(se_r)?),
            cost: cost_cols
                .iter()
                .map(|&(m, s)| Ok((num(m)?, num(s)?)))
                .collect::<Result<_>>()?,
            violation_rate: num(viol)?,
        });
    }
    Ok(rows)
}

/// Read summaries from files or result directories. All rows must share one
/// domain and cost dimension.
pub fn collect(inputs: &[PathBuf]) -> Result<Report> {
    if inputs.is_empty() {
        bail!("report needs at least one summary file or result directory");
    }
    let mut rows = Vec::new();
    for p in inputs {
        rows.extend(read_summary(&summary_path(p))?);
    }
    let Some(first) = rows.first() else {
        bail!("no summary rows found");
    };
    let (domain, k) = (first.domain.clone(), first.cost.len());
    for row in &rows {
        if row.domain != domain {
            bail!(
                "cannot mix domains in one report: {domain:?} and {:?} ({})",
                row.domain,
                row.source
            );
        }
        if row.cost.len() != k {
            bail!(
                "cost dimensions differ: {k} and {} ({})",
                row.cost.len(),
                row.source
            );
        }
    }
    Ok(Report { domain, rows })
}

impl Report {
    pub fn channels(&self) -> usize {
        self.rows[0].cost.len()
    }

    pub fn to_table(&self) -> String {
        let mut header = vec!["arm".to_string(), "episodes".into(), "V_R".into()];
        header.extend((1..=self.channels()).map(|i| format!("V_C_{i}")));
        header.push("violations".into());
        let mut lines = vec![header];
        for r in &self.rows {
            let mut line = vec![
                r.arm.clone(),
                r.episodes.to_string(),
                format!("{:.2} ± {:.2}", r.reward.0, r.reward.1),
            ];
            line.extend(r.cost.iter().map(|(m, s)| format!("{m:.3} ± {s:.3}")));
            line.push(format!("{:.1}%", 100.0 * r.violation_rate));
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| {
                lines
                    .iter()
                    .map(|l| l[c].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = format!("domain: {}\n", self.domain);
        for line in &lines {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:<w$}", w = *w))
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        let mut header = vec![
            "source".to_string(),
            "domain".into(),
            "arm".into(),
            "episodes".into(),
        ];
        header.push("mean_V_R".into());
        header.push("se_V_R".into());
        for i in 1..=self.channels() {
            header.push(format!("mean_V_C_{i}"));
            header.push(format!("se_V_C_{i}"));
        }
        header.push("violation_rate".into());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut row = vec![
                r.source.clone(),
                r.domain.clone(),
                r.arm.clone(),
                r.episodes.to_string(),
                r.reward.0.to_string(),
                r.reward.1.to_string(),
            ];
            for (m, s) in &r.cost {
                row.push(m.to_string());
                row.push(s.to_string());
            }
            row.push(r.violation_rate.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
