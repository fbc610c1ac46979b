//! Training metrics: one JSON object per line during training, plus a CSV
//! export for plotting tools.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::EpisodeReport;

pub const METRICS_SCHEMA: u32 = 1;

/// One line of the metrics file. `wall_clock_s` is written as 0 in
/// deterministic single-threaded runs so equal seeds produce byte-identical
/// files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub schema: u32,
    pub episode: usize,
    pub agent_rewards: Vec<f64>,
    pub team_reward: f64,
    pub critic_loss: Option<f64>,
    pub policy_objectives: Vec<f64>,
    pub attention_entropy: Vec<Vec<f64>>,
    pub total_env_steps: usize,
    pub wall_clock_s: f64,
}

impl MetricsRecord {
    pub fn from_report(report: &EpisodeReport, wall_clock_s: f64) -> Self {
        MetricsRecord {
            schema: METRICS_SCHEMA,
            episode: report.episode,
            agent_rewards: report.agent_returns.clone(),
            team_reward: report.team_return,
            critic_loss: report.critic_loss,
            policy_objectives: report.policy_objectives.clone(),
            attention_entropy: report.attention_entropy.clone(),
            total_env_steps: report.total_env_steps,
            wall_clock_s,
        }
    }
}

pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path)?;
        Ok(MetricsWriter { out: BufWriter::new(file) })
    }

    /// Opens for appending; used when resuming a run.
    pub fn append(path: &Path) -> Result<Self> {
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        Ok(MetricsWriter { out: BufWriter::new(file) })
    }

    pub fn write(&mut self, record: &MetricsRecord) -> Result<()> {
        let line = serde_json::to_string(record)?;
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let file = File::open(path)?;
    let mut records = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MetricsRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Config(format!("metrics file {} line {}: {e}", path.display(), k + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Wide-format CSV: one row per episode, one column per scalar.
pub fn export_csv(records: &[MetricsRecord], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let agents = records.first().map_or(0, |r| r.agent_rewards.len());
    let heads = records
        .first()
        .map_or(0, |r| r.attention_entropy.first().map_or(0, |h| h.len()));
    let mut header = vec![
        "episode".to_string(),
        "total_env_steps".to_string(),
        "team_reward".to_string(),
        "critic_loss".to_string(),
    ];
    for i in 0..agents {
        header.push(format!("reward_{i}"));
    }
    for i in 0..agents {
        header.push(format!("policy_objective_{i}"));
    }
    for i in 0..agents {
        for h in 0..heads {
            header.push(format!("attention_entropy_{i}_{h}"));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for r in records {
        let mut row = vec![
            r.episode.to_string(),
            r.total_env_steps.to_string(),
            format!("{}", r.team_reward),
            r.critic_loss.map_or(String::new(), |l| format!("{l}")),
        ];
        for i in 0..agents {
            row.push(r.agent_rewards.get(i).map_or(String::new(), |v| format!("{v}")));
        }
        for i in 0..agents {
            row.push(r.policy_objectives.get(i).map_or(String::new(), |v| format!("{v}")));
        }
        for i in 0..agents {
            for h in 0..heads {
                let v = r.attention_entropy.get(i).and_then(|e| e.get(h));
                row.push(v.map_or(String::new(), |v| format!("{v}")));
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Sample mean and half-width of a normal-approximation 95% interval.
pub fn mean_and_ci95(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn record(k: usize) -> MetricsRecord {
        MetricsRecord {
            schema: METRICS_SCHEMA,
            episode: k,
            agent_rewards: vec![-1.0 * k as f64, 0.5],
            team_reward: (-1.0 * k as f64 + 0.5) / 2.0,
            critic_loss: if k == 0 { None } else { Some(0.25 * k as f64) },
            policy_objectives: vec![0.1, -0.2],
            attention_entropy: vec![vec![0.6, 0.7], vec![0.8, 0.9]],
            total_env_steps: 100 * (k + 1),
            wall_clock_s: 0.0,
        }
    }

    #[test]
    fn jsonl_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.jsonl");
        let mut w = MetricsWriter::create(&path).unwrap();
        let records: Vec<MetricsRecord> = (0..5).map(record).collect();
        for r in &records {
            w.write(r).unwrap();
        }
        w.flush().unwrap();
        assert_eq!(read_metrics(&path).unwrap(), records);
    }

    #[test]
    fn every_line_is_standalone_json() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.jsonl");
        let mut w = MetricsWriter::create(&path).unwrap();
        for k in 0..3 {
            w.write(&record(k)).unwrap();
        }
        w.flush().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["schema"], METRICS_SCHEMA);
        }
    }

    #[test]
    fn csv_export_has_one_row_per_episode() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let records: Vec<MetricsRecord> = (0..4).map(record).collect();
        export_csv(&records, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("episode,total_env_steps,team_reward,critic_loss"));
        assert!(lines[0].contains("attention_entropy_1_1"));
        let cols = lines[0].split(',').count();
        for row in &lines[1..] {
            assert_eq!(row.split(',').count(), cols);
        }
        // Missing loss on episode 0 stays an empty cell.
        assert!(lines[1].contains(",,"));
    }

    #[test]
    fn ci_shrinks_with_sample_count() {
        let narrow: Vec<f64> = (0..400).map(|k| (k % 7) as f64).collect();
        let wide: Vec<f64> = narrow[..100].to_vec();
        let (_, ci_wide) = mean_and_ci95(&wide);
        let (_, ci_narrow) = mean_and_ci95(&narrow);
        assert!(ci_narrow < ci_wide * 0.6, "{ci_narrow} vs {ci_wide}");
        assert_eq!(mean_and_ci95(&[3.0]).0, 3.0);
    }
}
