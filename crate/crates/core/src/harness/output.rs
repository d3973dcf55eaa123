use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Campaign, HarnessError, RunConfig, RunRecord};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "SAFEBO_OUTPUT_DIR";

/// Frozen column order; `x` expands to `x1..xd`.
pub fn csv_header(dim: usize) -> Vec<String> {
    let mut cols = vec!["n".to_string()];
    cols.extend((1..=dim).map(|k| format!("x{k}")));
    for c in ["component", "alpha_ise", "alpha_mes", "yf", "ys", "f_true", "s_true", "violation", "regret"] {
        cols.push(c.to_string());
    }
    cols
}

pub fn write_csv<W: std::io::Write>(record: &RunRecord, dim: usize, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(dim))?;
    for row in &record.rows {
        let mut fields = vec![row.n.to_string()];
        fields.extend(row.x.iter().map(|v| v.to_string()));
        fields.push(row.component.to_string());
        for v in [row.alpha_ise, row.alpha_mes, row.yf, row.ys, row.f_true, row.s_true] {
            fields.push(v.to_string());
        }
        fields.push(u8::from(row.violation).to_string());
        fields.push(row.regret.to_string());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and standard error of the simple regret at one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub seeds: usize,
    pub regret: Vec<RegretPoint>,
    pub violation_mean: f64,
    /// Sample standard deviation across seeds.
    pub violation_std: f64,
}

impl Aggregate {
    pub fn final_regret(&self) -> Option<RegretPoint> {
        self.regret.last().copied()
    }

    /// `mean ± std` of the per-run violation fraction.
    pub fn violation_row(&self) -> String {
        format!("{:.3} ± {:.3}", self.violation_mean, self.violation_std)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-iteration regret statistics over complete records.
pub fn aggregate(records: &[&RunRecord]) -> Result<Aggregate, HarnessError> {
    let Some(first) = records.first() else {
        return Err(HarnessError::Config("nothing to aggregate".into()));
    };
    let len = first.rows.len();
    if let Some(r) = records.iter().find(|r| r.rows.len() != len) {
        return Err(HarnessError::Mismatch(len, r.rows.len()));
    }
    let regret = (0..len)
        .map(|i| {
            let values: Vec<f64> = records.iter().map(|r| r.rows[i].regret).collect();
            let (mean, std) = mean_std(&values);
            RegretPoint { n: i + 1, mean, stderr: std / (values.len() as f64).sqrt() }
        })
        .collect();
    let fractions: Vec<f64> = records.iter().map(|r| r.violation_fraction()).collect();
    let (violation_mean, violation_std) = mean_std(&fractions);
    Ok(Aggregate { seeds: records.len(), regret, violation_mean, violation_std })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub iterations: usize,
    pub final_regret: Option<f64>,
    pub violation_fraction: f64,
    pub safe_set_size: usize,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub config: RunConfig,
    pub failed_seeds: usize,
    /// Over seeds that completed every iteration.
    pub aggregate: Option<Aggregate>,
    pub violations: Option<String>,
    pub seeds: Vec<SeedSummary>,
}

impl CampaignSummary {
    pub fn new(campaign: &Campaign) -> Result<Self, HarnessError> {
        let complete: Vec<&RunRecord> = campaign.records.iter().filter(|r| r.error.is_none()).collect();
        let aggregate = if complete.is_empty() { None } else { Some(aggregate(&complete)?) };
        let seeds = campaign
            .records
            .iter()
            .map(|r| SeedSummary {
                seed: r.seed,
                iterations: r.rows.len(),
                final_regret: r.final_regret(),
                violation_fraction: r.violation_fraction(),
                safe_set_size: r.safe_set_sizes.last().copied().unwrap_or(1),
                wall_time_s: r.wall_time_s,
                error: r.error.clone(),
            })
            .collect();
        Ok(Self {
            config: campaign.config.clone(),
            failed_seeds: campaign.failed_seeds(),
            violations: aggregate.as_ref().map(Aggregate::violation_row),
            aggregate,
            seeds,
        })
    }
}

/// Output directory: the environment override, then the config, then `results`.
pub fn output_dir(config: &RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => config.output_dir.clone().unwrap_or_else(|| PathBuf::from("results")),
    }
}

/// Writes one CSV per seed and the JSON summary; returns the summary path.
pub fn write_outputs(campaign: &Campaign, dir: &Path) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(dir)?;
    let cfg = &campaign.config;
    let stem = format!("{}_{}", cfg.benchmark, cfg.strategy);
    let dim = cfg.problem(cfg.seeds[0]).map(|p| p.dim()).unwrap_or_else(|_| {
        campaign.records.iter().find_map(|r| r.rows.first().map(|row| row.x.len())).unwrap_or(0)
    });
    for record in &campaign.records {
        let file = fs::File::create(dir.join(format!("{stem}_seed{}.csv", record.seed)))?;
        write_csv(record, dim, std::io::BufWriter::new(file))?;
    }
    let path = dir.join(format!("{stem}_summary.json"));
    fs::write(&path, serde_json::to_string_pretty(&CampaignSummary::new(campaign)?)?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::Component;
    use crate::harness::RunRow;

    fn record(seed: u64, regrets: &[f64], violations: &[bool]) -> RunRecord {
        let rows = regrets
            .iter()
            .zip(violations)
            .enumerate()
            .map(|(i, (&regret, &violation))| RunRow {
                n: i + 1,
                x: vec![0.5, -1.0],
                component: Component::Ise,
                alpha_ise: 0.1,
                alpha_mes: f64::NAN,
                yf: 1.0,
                ys: 2.0,
                f_true: 1.5,
                s_true: if violation { -1.0 } else { 1.0 },
                violation,
                regret,
            })
            .collect();
        RunRecord { seed, rows, safe_set_sizes: vec![1; regrets.len()], wall_time_s: 0.0, error: None }
    }

    #[test]
    fn aggregate_arithmetic() {
        let a = record(1, &[4.0, 1.0], &[false, false]);
        let b = record(2, &[4.0, 3.0], &[false, true]);
        let agg = aggregate(&[&a, &b]).unwrap();
        assert_eq!(agg.regret[1].mean, 2.0);
        assert!((agg.regret[1].stderr - 1.0).abs() < 1e-15);
        assert_eq!(agg.regret[0].stderr, 0.0);
        assert_eq!(agg.violation_mean, 0.25);
        let single = aggregate(&[&a]).unwrap();
        assert_eq!(single.regret[1].stderr, 0.0);
        let short = record(3, &[1.0], &[false]);
        assert!(matches!(aggregate(&[&a, &short]), Err(HarnessError::Mismatch(2, 1))));
    }

    #[test]
    fn csv_columns_are_frozen() {
        let mut buf = Vec::new();
        write_csv(&record(1, &[2.0], &[true]), 2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,x1,x2,component,alpha_ise,alpha_mes,yf,ys,f_true,s_true,violation,regret"
        );
        assert_eq!(lines.next().unwrap(), "1,0.5,-1,ise,0.1,NaN,1,2,1.5,-1,1,2");
    }
}
