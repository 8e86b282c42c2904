//! Campaign result directory writer.
//!
//! Layout:
//!
//! ```text
//! <out>/meta.json                   config echo, seeds, version, rep status
//! <out>/rep_<k>/events.jsonl        one {episode, tick, requirement} per event
//! <out>/rep_<k>/timeline.csv        sample_index, step, coverage, violations_total
//! <out>/rep_<k>/qtable_growth.csv   step, distinct states (tabular techniques)
//! <out>/rep_<k>/trajectories.jsonl  lead-vehicle polyline per failing episode
//! <out>/rep_<k>/qtable.csv          final table dump (plain Q-learning)
//! <out>/rep_<k>/loss.csv            step, loss, epsilon (deep agent)
//! ```
//!
//! No timestamps or machine identifiers are written: identical configs
//! produce byte-identical directories.

use super::{CampaignResult, RepetitionResult, Technique};
use crate::error::{Error, Result};
use crate::monitors::Requirement;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn events_jsonl(rep: &RepetitionResult) -> String {
    let mut out = String::new();
    for e in &rep.events {
        writeln!(
            out,
            "{{\"episode\":{},\"tick\":{},\"requirement\":\"{}\"}}",
            e.event.episode,
            e.event.tick,
            e.event.requirement.label()
        )
        .unwrap();
    }
    out
}

pub fn timeline_csv(rep: &RepetitionResult) -> String {
    let mut out = String::from("sample_index,step,coverage,violations_total\n");
    for p in &rep.timeline {
        writeln!(
            out,
            "{},{},{},{}",
            p.sample_index, p.step, p.coverage, p.violations_total
        )
        .unwrap();
    }
    out
}

pub fn growth_csv(rep: &RepetitionResult, technique: Technique) -> String {
    let mut out = String::from("step");
    match technique {
        Technique::Q => out.push_str(",distinct_states"),
        Technique::Morlot => {
            for r in Requirement::ALL {
                write!(out, ",{}", r.label().to_lowercase()).unwrap();
            }
        }
        _ => {}
    }
    out.push('\n');
    for (step, states) in &rep.growth {
        write!(out, "{step}").unwrap();
        for s in states {
            write!(out, ",{s}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn trajectories_jsonl(rep: &RepetitionResult) -> String {
    let mut out = String::new();
    for (episode, cause, points) in &rep.failure_trajectories {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("[{x},{y}]")).collect();
        writeln!(
            out,
            "{{\"episode\":{},\"cause\":{},\"points\":[{}]}}",
            episode,
            serde_json::to_string(cause).unwrap(),
            pts.join(",")
        )
        .unwrap();
    }
    out
}

pub fn loss_csv(rep: &RepetitionResult) -> String {
    let mut out = String::from("step,loss,epsilon\n");
    for (step, loss, eps) in &rep.loss_curve {
        writeln!(out, "{step},{loss},{eps}").unwrap();
    }
    out
}

/// Write the campaign directory; returns the per-repetition status list
/// that also lands in `meta.json`. A failed write aborts that repetition's
/// remaining files but never silently drops the failure.
pub fn write_campaign(result: &CampaignResult, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut statuses = Vec::with_capacity(result.reps.len());
    for rep in &result.reps {
        let status = write_repetition(result, rep, dir);
        statuses.push(match status {
            Ok(()) => "ok".to_string(),
            Err(e) => format!("failed: {e}"),
        });
    }
    let meta = serde_json::json!({
        "version": crate::VERSION,
        "config": result.config,
        "campaign_id": result.config.campaign_id(),
        "seeds": result.reps.iter().map(|r| r.seed).collect::<Vec<_>>(),
        "repetition_status": statuses,
        "totals": {
            "violations_per_repetition": result
                .reps
                .iter()
                .map(|r| r.counted_violations(result.config.mode))
                .collect::<Vec<_>>(),
            "coverage_per_repetition": result
                .reps
                .iter()
                .map(|r| r.final_coverage())
                .collect::<Vec<_>>(),
        },
    });
    write_file(
        &dir.join("meta.json"),
        &serde_json::to_string_pretty(&meta).expect("meta serializes"),
    )?;
    if statuses.iter().any(|s| s != "ok") {
        return Err(Error::config("one or more repetitions failed to write"));
    }
    Ok(statuses)
}

fn write_repetition(result: &CampaignResult, rep: &RepetitionResult, dir: &Path) -> Result<()> {
    let rep_dir: PathBuf = dir.join(format!("rep_{}", rep.repetition));
    fs::create_dir_all(&rep_dir).map_err(|e| Error::io(rep_dir.display().to_string(), e))?;
    write_file(&rep_dir.join("events.jsonl"), &events_jsonl(rep))?;
    write_file(&rep_dir.join("timeline.csv"), &timeline_csv(rep))?;
    write_file(&rep_dir.join("trajectories.jsonl"), &trajectories_jsonl(rep))?;
    match result.config.technique {
        Technique::Q | Technique::Morlot => {
            write_file(
                &rep_dir.join("qtable_growth.csv"),
                &growth_csv(rep, result.config.technique),
            )?;
        }
        Technique::Dqn => {
            write_file(&rep_dir.join("loss.csv"), &loss_csv(rep))?;
            if let Some(ckpt) = &rep.dqn_checkpoint {
                write_file(&rep_dir.join("dqn.json"), ckpt)?;
            }
        }
        Technique::Random => {}
    }
    if let Some(csv) = &rep.qtable_csv {
        write_file(&rep_dir.join("qtable.csv"), csv)?;
    }
    Ok(())
}

/// Minimal view of a previously written campaign, as needed by the
/// comparison and rendering commands.
#[derive(Debug, Clone)]
pub struct StoredCampaign {
    pub meta: serde_json::Value,
    pub config: super::CampaignConfig,
    pub violations_per_repetition: Vec<u64>,
    pub coverage_per_repetition: Vec<f64>,
    /// Per repetition: the violations_total column of timeline.csv.
    pub violation_timelines: Vec<Vec<f64>>,
    /// Per repetition: the coverage column of timeline.csv.
    pub coverage_timelines: Vec<Vec<f64>>,
    pub timeline_steps: Vec<u64>,
    pub trajectories: Vec<Vec<(f64, f64)>>,
    /// Per repetition growth series (step, first table's distinct states).
    pub growth: Vec<Vec<(u64, u64)>>,
}

pub fn load_campaign(dir: &Path) -> Result<StoredCampaign> {
    let meta_path = dir.join("meta.json");
    let text =
        fs::read_to_string(&meta_path).map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    let meta: serde_json::Value = serde_json::from_str(&text)?;
    let config: super::CampaignConfig = serde_json::from_value(
        meta.get("config")
            .cloned()
            .ok_or_else(|| Error::config("meta.json missing config"))?,
    )?;
    let reps = config.repetitions as usize;
    let mut violations_per_repetition = Vec::new();
    let mut coverage_per_repetition = Vec::new();
    let mut violation_timelines = Vec::new();
    let mut coverage_timelines = Vec::new();
    let mut timeline_steps = Vec::new();
    let mut trajectories = Vec::new();
    let mut growth = Vec::new();
    for r in 0..reps {
        let rep_dir = dir.join(format!("rep_{r}"));
        let tl_path = rep_dir.join("timeline.csv");
        let tl = fs::read_to_string(&tl_path)
            .map_err(|e| Error::io(tl_path.display().to_string(), e))?;
        let mut cov = Vec::new();
        let mut vio = Vec::new();
        let mut steps = Vec::new();
        for line in tl.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::config(format!("bad timeline row `{line}`")));
            }
            steps.push(cols[1].parse::<u64>().map_err(|_| Error::config("bad step"))?);
            cov.push(cols[2].parse::<f64>().map_err(|_| Error::config("bad coverage"))?);
            vio.push(cols[3].parse::<f64>().map_err(|_| Error::config("bad violations"))?);
        }
        if timeline_steps.is_empty() {
            timeline_steps = steps;
        }
        violations_per_repetition.push(*vio.last().unwrap_or(&0.0) as u64);
        coverage_per_repetition.push(*cov.last().unwrap_or(&0.0));
        violation_timelines.push(vio);
        coverage_timelines.push(cov);

        let tr_path = rep_dir.join("trajectories.jsonl");
        let tr = fs::read_to_string(&tr_path)
            .map_err(|e| Error::io(tr_path.display().to_string(), e))?;
        for line in tr.lines() {
            let v: serde_json::Value = serde_json::from_str(line)?;
            let pts = v
                .get("points")
                .and_then(|p| p.as_array())
                .ok_or_else(|| Error::config("trajectory row missing points"))?;
            let poly: Vec<(f64, f64)> = pts
                .iter()
                .filter_map(|p| Some((p.get(0)?.as_f64()?, p.get(1)?.as_f64()?)))
                .collect();
            trajectories.push(poly);
        }

        let growth_path = rep_dir.join("qtable_growth.csv");
        if growth_path.exists() {
            let g = fs::read_to_string(&growth_path)
                .map_err(|e| Error::io(growth_path.display().to_string(), e))?;
            let mut series = Vec::new();
            for line in g.lines().skip(1) {
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() >= 2 {
                    series.push((
                        cols[0].parse::<u64>().map_err(|_| Error::config("bad growth step"))?,
                        cols[1].parse::<u64>().map_err(|_| Error::config("bad growth count"))?,
                    ));
                }
            }
            growth.push(series);
        }
    }
    Ok(StoredCampaign {
        meta,
        config,
        violations_per_repetition,
        coverage_per_repetition,
        violation_timelines,
        coverage_timelines,
        timeline_steps,
        trajectories,
        growth,
    })
}
