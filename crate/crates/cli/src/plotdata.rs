//! Plot-ready series extracted from a results CSV: grouped bars of SNR
//! improvement and own-voice distortion over switch counts, per input SNR and
//! VAD condition, with the nose-pad single-microphone improvement as the
//! reference line.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlotPoint {
    pub switches: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlotSeries {
    pub strategy: String,
    pub vad: String,
    pub points: Vec<PlotPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlotPanel {
    pub metric: String,
    pub snr_db: f64,
    pub series: Vec<PlotSeries>,
    /// Nose-pad microphone improvement relative to the references.
    pub reference: Vec<PlotPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlotData {
    pub schema: String,
    pub panels: Vec<PlotPanel>,
}

/// One parsed data row of the results CSV.
#[derive(Debug, Clone)]
struct CsvRow {
    snr_db: f64,
    switches: usize,
    vad: String,
    strategy: String,
    snr_imp: f64,
    ovd: f64,
    nose_imp: f64,
}

fn parse_rows(text: &str) -> anyhow::Result<Vec<CsvRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = match lines.next() {
        Some(h) => h,
        None => return Ok(Vec::new()),
    };
    let columns: Vec<&str> = header.split(',').collect();
    let col = |name: &str| -> anyhow::Result<usize> {
        columns
            .iter()
            .position(|c| *c == name)
            .with_context(|| format!("results CSV is missing column '{name}'"))
    };
    let (c_kind, c_snr, c_switches, c_vad, c_strategy) =
        (col("kind")?, col("snr_db")?, col("switches")?, col("vad")?, col("strategy")?);
    let (c_imp, c_ovd, c_nose) = (col("snr_imp")?, col("ovd")?, col("nose_imp")?);

    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            bail!("CSV row {} has {} fields, expected {}", i + 2, fields.len(), columns.len());
        }
        if fields[c_kind] != "data" {
            continue;
        }
        let num = |idx: usize| -> anyhow::Result<f64> {
            match fields[idx] {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                s => s.parse::<f64>().with_context(|| format!("parsing '{s}' in row {}", i + 2)),
            }
        };
        rows.push(CsvRow {
            snr_db: num(c_snr)?,
            switches: fields[c_switches].parse().context("parsing switches")?,
            vad: fields[c_vad].to_string(),
            strategy: fields[c_strategy].to_string(),
            snr_imp: num(c_imp)?,
            ovd: num(c_ovd)?,
            nose_imp: num(c_nose)?,
        });
    }
    Ok(rows)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

/// Builds plot data from results CSV text.
pub fn plotdata_from_csv(text: &str) -> anyhow::Result<PlotData> {
    let rows = parse_rows(text)?;
    let mut panels = Vec::new();
    if rows.is_empty() {
        return Ok(PlotData { schema: "occbeam-plotdata v1".into(), panels });
    }

    let snrs: BTreeSet<u64> = rows.iter().map(|r| r.snr_db.to_bits()).collect();
    let switch_counts: BTreeSet<usize> = rows.iter().map(|r| r.switches).collect();
    let mut combos: Vec<(String, String)> = Vec::new();
    for r in &rows {
        let key = (r.strategy.clone(), r.vad.clone());
        if !combos.contains(&key) {
            combos.push(key);
        }
    }

    for metric in ["snr_improvement_db", "ovd_db"] {
        for &snr_bits in &snrs {
            let snr = f64::from_bits(snr_bits);
            let mut series = Vec::new();
            for (strategy, vad) in &combos {
                let mut points = Vec::new();
                for &switches in &switch_counts {
                    let values: Vec<f64> = rows
                        .iter()
                        .filter(|r| {
                            r.snr_db == snr
                                && r.switches == switches
                                && &r.strategy == strategy
                                && &r.vad == vad
                        })
                        .map(|r| if metric == "snr_improvement_db" { r.snr_imp } else { r.ovd })
                        .collect();
                    if values.is_empty() {
                        continue;
                    }
                    let (mean, std) = mean_std(&values);
                    points.push(PlotPoint { switches, mean, std });
                }
                series.push(PlotSeries {
                    strategy: strategy.clone(),
                    vad: vad.clone(),
                    points,
                });
            }
            let mut reference = Vec::new();
            if metric == "snr_improvement_db" {
                for &switches in &switch_counts {
                    let values: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.snr_db == snr && r.switches == switches)
                        .map(|r| r.nose_imp)
                        .collect();
                    if values.is_empty() {
                        continue;
                    }
                    let (mean, std) = mean_std(&values);
                    reference.push(PlotPoint { switches, mean, std });
                }
            }
            panels.push(PlotPanel { metric: metric.into(), snr_db: snr, series, reference });
        }
    }
    Ok(PlotData { schema: "occbeam-plotdata v1".into(), panels })
}

/// Reads a results CSV and writes the plot-data JSON next to it (or to the
/// given path).
pub fn emit_plotdata(csv_path: &Path, out_path: &Path) -> anyhow::Result<PlotData> {
    let text = std::fs::read_to_string(csv_path)
        .with_context(|| format!("reading {}", csv_path.display()))?;
    let data = plotdata_from_csv(&text)?;
    let json = serde_json::to_string_pretty(&data)?;
    std::fs::write(out_path, json)
        .with_context(|| format!("writing {}", out_path.display()))?;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_csv_gives_empty_panels() {
        let data = plotdata_from_csv("").unwrap();
        assert!(data.panels.is_empty());
        let data = plotdata_from_csv("# occbeam-results v1\n").unwrap();
        assert!(data.panels.is_empty());
    }

    #[test]
    fn single_condition_gives_single_bar_with_zero_std() {
        let csv = "\
# occbeam-results v1
kind,utterance,noise,snr_db,switches,vad,strategy,snr_in_l,snr_in_r,snr_in,snr_out_l,snr_out_r,snr_out,snr_imp_l,snr_imp_r,snr_imp,ovd_l,ovd_r,ovd,nose_imp_l,nose_imp_r,nose_imp
data,u0,n0,5.000,8,oracle,adaptive,5.0,5.0,5.0,15.0,15.0,15.0,10.0,10.0,10.000,-12.0,-12.0,-12.000,6.0,6.0,6.000
";
        let data = plotdata_from_csv(csv).unwrap();
        assert_eq!(data.panels.len(), 2);
        let snr_panel = &data.panels[0];
        assert_eq!(snr_panel.metric, "snr_improvement_db");
        assert_eq!(snr_panel.series.len(), 1);
        assert_eq!(
            snr_panel.series[0].points,
            vec![PlotPoint { switches: 8, mean: 10.0, std: 0.0 }]
        );
        assert_eq!(snr_panel.reference, vec![PlotPoint { switches: 8, mean: 6.0, std: 0.0 }]);
    }

    #[test]
    fn aggregate_mean_equals_mean_of_rows() {
        let csv = "\
kind,snr_db,switches,vad,strategy,snr_imp,ovd,nose_imp
data,5.000,8,oracle,adaptive,10.000,-12.000,6.000
data,5.000,8,oracle,adaptive,14.000,-10.000,8.000
";
        let data = plotdata_from_csv(csv).unwrap();
        let p = &data.panels[0].series[0].points[0];
        assert!((p.mean - 12.0).abs() < 1e-12);
        assert!((p.std - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn malformed_csv_rejected() {
        let csv = "kind,snr_db,switches,vad,strategy,snr_imp,ovd,nose_imp\ndata,5.0,8,oracle\n";
        assert!(plotdata_from_csv(csv).is_err());
    }
}
