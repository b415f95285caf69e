//! Rolling out-of-sample forecasting: one task per (hour, ensemble member)
//! walks the schedule, fully training at every subperiod start and updating
//! the previous parameters on each later day. Tasks write their rows to
//! their own files and checkpoint periodically; the ensemble is formed when
//! all tasks have finished.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use pricedist_core::cdftools::{cdf_to_price_quantiles, ensemble_average, forecast_levels, target_levels, QuantileForecast};
use pricedist_core::dataio::{design_matrix, targets_matrix, PricePanel, WindowSchedule, WindowState, HISTORY_DAYS};
use pricedist_core::distnet::{predict, train, update, Dataset, NetConfig, NetError, NetParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::TrainingSection;
use crate::{seeds, HarnessError};

pub struct RollingContext<'a> {
    pub panel: &'a PricePanel,
    pub schedule: &'a WindowSchedule,
    /// One configuration per hour.
    pub configs: &'a [NetConfig],
    pub training: &'a TrainingSection,
    pub winsor: f64,
    pub ensembles: usize,
    pub seed: u64,
    pub run: usize,
    pub task_dir: PathBuf,
    /// Stops every task before this schedule entry, as if the process had
    /// been killed there. Used to exercise resumption.
    pub stop_before: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    next_entry: usize,
    rows: usize,
    params: Option<NetParams<f64>>,
    /// Entry at which the member diverged and was dropped.
    failed_at: Option<usize>,
    done: bool,
}

/// One member forecast: validation loss of the parameters used and the
/// predictive quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberRow {
    pub date: NaiveDate,
    pub val_loss: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskResult {
    pub hour: usize,
    pub member: usize,
    /// Row `i` belongs to schedule entry `i`.
    pub rows: Vec<MemberRow>,
    pub failed_at: Option<usize>,
}

pub fn task_stem(run: usize, hour: usize, member: usize) -> String {
    format!("run{run}_h{:02}_m{member}", hour + 1)
}

fn paths(ctx: &RollingContext<'_>, hour: usize, member: usize) -> (PathBuf, PathBuf) {
    let stem = task_stem(ctx.run, hour, member);
    (ctx.task_dir.join(format!("{stem}.csv")), ctx.task_dir.join(format!("{stem}.ckpt.json")))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(HarnessError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(HarnessError::io(path))
}

fn format_row(row: &MemberRow) -> String {
    let mut s = format!("{},{}", row.date, row.val_loss);
    for v in &row.values {
        s.push(',');
        s.push_str(&v.to_string());
    }
    s.push('\n');
    s
}

fn parse_rows(text: &str, path: &Path) -> Result<Vec<MemberRow>, HarnessError> {
    let bad = |n: usize| HarnessError::Numeric(format!("{}: malformed row {n}", path.display()));
    text.lines()
        .enumerate()
        .map(|(n, line)| {
            let mut it = line.split(',');
            let date = it.next().and_then(|d| d.parse().ok()).ok_or_else(|| bad(n))?;
            let val_loss = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad(n))?;
            let values = it.map(|v| v.parse::<f64>().map_err(|_| bad(n))).collect::<Result<Vec<_>, _>>()?;
            Ok(MemberRow { date, val_loss, values })
        })
        .collect()
}

fn read_rows(path: &Path, keep: usize) -> Result<Vec<MemberRow>, HarnessError> {
    let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
    let mut rows = parse_rows(&text, path)?;
    if rows.len() < keep {
        return Err(HarnessError::Numeric(format!("{}: {} rows, checkpoint expects {keep}", path.display(), rows.len())));
    }
    rows.truncate(keep);
    Ok(rows)
}

/// Runs or resumes the task for one (hour, member).
pub fn run_task(ctx: &RollingContext<'_>, hour: usize, member: usize) -> Result<TaskResult, HarnessError> {
    let (rows_path, ckpt_path) = paths(ctx, hour, member);
    let cfg = &ctx.configs[hour];
    let entries = &ctx.schedule.entries;
    let levels_k = target_levels();
    let levels_q = forecast_levels();

    let mut ckpt = if ckpt_path.exists() {
        let text = fs::read_to_string(&ckpt_path).map_err(HarnessError::io(&ckpt_path))?;
        serde_json::from_str::<Checkpoint>(&text)?
    } else {
        Checkpoint { next_entry: 0, rows: 0, params: None, failed_at: None, done: false }
    };
    // Rows past the checkpoint were written after it and are recomputed.
    let mut rows = if ckpt.rows > 0 { read_rows(&rows_path, ckpt.rows)? } else { Vec::new() };
    if ckpt.done {
        return Ok(TaskResult { hour, member, rows, failed_at: ckpt.failed_at });
    }
    let mut out = String::new();
    for r in &rows {
        out.push_str(&format_row(r));
    }
    fs::write(&rows_path, out).map_err(HarnessError::io(&rows_path))?;
    let mut file = fs::OpenOptions::new().append(true).open(&rows_path).map_err(HarnessError::io(&rows_path))?;

    let mut state: Option<WindowState> = None;
    let mut params = ckpt.params.take();
    for i in ckpt.next_entry..entries.len() {
        if ctx.stop_before == Some(i) {
            return Err(HarnessError::Interrupted(i));
        }
        let e = &entries[i];
        if state.is_none() || e.retrain {
            let anchor = (0..=i).rev().find(|&j| entries[j].retrain).unwrap_or(0);
            state = Some(WindowState::fit(ctx.panel, entries[anchor].window.clone(), &levels_k, ctx.winsor)?);
        }
        let st = state.as_ref().expect("state fitted above");
        let days: Vec<usize> = e.window.clone().filter(|&d| d >= HISTORY_DAYS).collect();
        let x = design_matrix(ctx.panel, st, &days, hour)?;
        let y = targets_matrix(ctx.panel, st, &days, hour);
        let data = Dataset::new(x.view(), y.view());
        let seed = seeds::derive(ctx.seed, "member", &[ctx.run as u64, hour as u64, member as u64, e.test_day as u64]);
        let fitted = match (&params, e.retrain) {
            (Some(p), false) => update(p, cfg, data, ctx.training.update_epochs, seed),
            _ => train(cfg, data, seed),
        };
        let outcome = match fitted {
            Ok(o) => o,
            Err(err @ (NetError::Diverged { .. } | NetError::NonFinite { .. })) => {
                log::warn!("hour {} member {member}: dropped on {}: {err}", hour + 1, e.date);
                let done = Checkpoint { next_entry: i, rows: rows.len(), params: None, failed_at: Some(i), done: true };
                write_atomic(&ckpt_path, serde_json::to_string(&done)?.as_bytes())?;
                return Ok(TaskResult { hour, member, rows, failed_at: Some(i) });
            }
            Err(err) => return Err(err.into()),
        };
        let xt = design_matrix(ctx.panel, st, &[e.test_day], hour)?;
        let probs = predict(&outcome.params, cfg, xt.view())?;
        let raw: Vec<f64> = probs.row(0).to_vec();
        let values = cdf_to_price_quantiles(&raw, st.table.support(hour), st.anchors[hour], st.transform(), ctx.training.grid_points, &levels_q)?;
        let row = MemberRow { date: e.date, val_loss: outcome.best_val_loss, values };
        file.write_all(format_row(&row).as_bytes()).map_err(HarnessError::io(&rows_path))?;
        rows.push(row);
        params = Some(outcome.params);
        if e.retrain || (i + 1) % ctx.training.checkpoint_every == 0 {
            file.flush().map_err(HarnessError::io(&rows_path))?;
            let c = Checkpoint { next_entry: i + 1, rows: rows.len(), params: params.clone(), failed_at: None, done: false };
            write_atomic(&ckpt_path, serde_json::to_string(&c)?.as_bytes())?;
        }
    }
    file.flush().map_err(HarnessError::io(&rows_path))?;
    let done = Checkpoint { next_entry: entries.len(), rows: rows.len(), params, failed_at: None, done: true };
    write_atomic(&ckpt_path, serde_json::to_string(&done)?.as_bytes())?;
    Ok(TaskResult { hour, member, rows, failed_at: None })
}

/// Per (day, hour): average of the better half of the surviving members by
/// validation loss. Fewer than two survivors (one for a single-member
/// ensemble) is an error.
pub fn merge_members(schedule: &WindowSchedule, hours: usize, ensembles: usize, tasks: &[TaskResult]) -> Result<Vec<QuantileForecast>, HarnessError> {
    let needed = ensembles.min(2);
    let mut out = Vec::with_capacity(schedule.len() * hours);
    for (i, e) in schedule.entries.iter().enumerate() {
        for h in 0..hours {
            let alive: Vec<&MemberRow> = tasks.iter().filter(|t| t.hour == h).filter_map(|t| t.rows.get(i)).collect();
            if alive.len() < needed {
                return Err(HarnessError::Numeric(format!("{} hour {}: only {} of {ensembles} members survive", e.date, h + 1, alive.len())));
            }
            let values: Vec<Vec<f64>> = alive.iter().map(|r| r.values.clone()).collect();
            let losses: Vec<f64> = alive.iter().map(|r| r.val_loss).collect();
            out.push(QuantileForecast { date: e.date, hour: h, values: ensemble_average(&values, &losses)? });
        }
    }
    Ok(out)
}

/// Runs every (hour, member) task on the current rayon pool and merges.
pub fn rolling_run(ctx: &RollingContext<'_>) -> Result<Vec<QuantileForecast>, HarnessError> {
    let hours = ctx.panel.hours();
    if ctx.configs.len() != hours {
        return Err(HarnessError::Config(format!("{} hour configs for a {hours}-hour panel", ctx.configs.len())));
    }
    fs::create_dir_all(&ctx.task_dir).map_err(HarnessError::io(&ctx.task_dir))?;
    let tasks: Vec<(usize, usize)> = (0..hours).flat_map(|h| (0..ctx.ensembles).map(move |m| (h, m))).collect();
    let results: Vec<TaskResult> = tasks.par_iter().map(|&(h, m)| run_task(ctx, h, m)).collect::<Result<_, _>>()?;
    merge_members(ctx.schedule, hours, ctx.ensembles, &results)
}
