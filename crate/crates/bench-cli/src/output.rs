//! CSV and JSON-lines writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use cobets::campaign::{EpisodeOutcome, ResultSummary};

/// Arm names as they appear in file names.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn episode_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = vec!["episode".into(), "seed".into(), "V_R".into()];
    h.extend((1..=k).map(|i| format!("V_C_{i}")));
    h.extend(["steps", "epochs", "violations", "wall_ms"].map(String::from));
    h
}

pub fn episode_row(o: &EpisodeOutcome) -> Vec<String> {
    let mut row = vec![
        o.episode.to_string(),
        o.seed.to_string(),
        o.value_reward.to_string(),
    ];
    row.extend(o.value_cost.iter().map(|c| c.to_string()));
    row.extend([
        o.steps.to_string(),
        o.epochs.to_string(),
        o.violations.to_string(),
        o.wall_ms.to_string(),
    ]);
    row
}

pub fn write_episodes(path: &Path, k: usize, outcomes: &[EpisodeOutcome]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(episode_header(k))?;
    for o in outcomes {
        w.write_record(episode_row(o))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns shared by every summary-style table.
pub fn summary_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = vec![
        "arm".into(),
        "episodes".into(),
        "mean_V_R".into(),
        "se_V_R".into(),
    ];
    for i in 1..=k {
        h.push(format!("mean_V_C_{i}"));
        h.push(format!("se_V_C_{i}"));
    }
    h.extend(
        [
            "violation_rate",
            "mean_steps",
            "mean_epochs",
            "mean_decision_ms",
            "mean_queries_per_decision",
        ]
        .map(String::from),
    );
    h
}

pub fn summary_row(s: &ResultSummary) -> Vec<String> {
    let mut row = vec![
        s.arm.clone(),
        s.episodes.to_string(),
        s.mean_reward.to_string(),
        s.se_reward.to_string(),
    ];
    for (m, se) in s.mean_cost.iter().zip(&s.se_cost) {
        row.push(m.to_string());
        row.push(se.to_string());
    }
    row.extend([
        s.violation_rate.to_string(),
        s.mean_steps.to_string(),
        s.mean_epochs.to_string(),
        s.mean_decision_ms.to_string(),
        s.mean_queries_per_decision.to_string(),
    ]);
    row
}

/// Summary table with leading key columns, e.g. `domain` or `queries`.
pub fn write_table(
    path: &Path,
    keys: &[&str],
    k: usize,
    rows: &[(Vec<String>, &ResultSummary)],
) -> Result<()> {
    let mut w = writer(path)?;
    let mut header: Vec<String> = keys.iter().map(|s| s.to_string()).collect();
    header.extend(summary_header(k));
    w.write_record(header)?;
    for (key, s) in rows {
        let mut row = key.clone();
        row.extend(summary_row(s));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Concatenate episode logs, tagging every record with its arm and episode.
pub fn write_logs(path: &Path, arm: &str, outcomes: &[EpisodeOutcome]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for o in outcomes {
        let Some(text) = &o.log else { continue };
        for line in text.lines() {
            let mut record: serde_json::Value = serde_json::from_str(line)?;
            if let Some(map) = record.as_object_mut() {
                map.insert("arm".into(), arm.into());
                map.insert("episode".into(), o.episode.into());
            }
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_follow_channel_count() {
        assert_eq!(
            episode_header(2),
            [
                "episode",
                "seed",
                "V_R",
                "V_C_1",
                "V_C_2",
                "steps",
                "epochs",
                "violations",
                "wall_ms"
            ]
        );
        let h = summary_header(1);
        assert_eq!(
            &h[..6],
            [
                "arm",
                "episodes",
                "mean_V_R",
                "se_V_R",
                "mean_V_C_1",
                "se_V_C_1"
            ]
        );
    }

    #[test]
    fn file_stems_are_filesystem_safe() {
        assert_eq!(file_stem("uncertainty:8"), "uncertainty_8");
        assert_eq!(file_stem("one-step"), "one-step");
        assert_eq!(file_stem("a/b c"), "a_b_c");
    }
}
