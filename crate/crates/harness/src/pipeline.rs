//! The CLI stages as library functions operating on an output directory:
//!
//! ```text
//! <out>/panel.cache           ingest
//! <out>/manifest.json         hpo
//! <out>/tasks/*               forecast (per-task rows and checkpoints)
//! <out>/forecasts/*.csv       forecast, bench
//! <out>/report/*              eval
//! <out>/plots/*               export-plots
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use pricedist_core::cdftools::{forecast_levels, quantile_average, read_quantile_csv, target_levels, write_quantile_csv, QuantileForecast};
use pricedist_core::dataio::{design_matrix, load_panel, make_schedule, targets_matrix, PricePanel, WindowSchedule, WindowState, HISTORY_DAYS};
use pricedist_core::evaluate::{report, EvalReport, LevelSet, LossPanel, Subperiod};
use rayon::prelude::*;

use crate::bench::run_benchmarks;
use crate::config::{RunConfig, WORKERS_ENV};
use crate::hpo::hpo_search;
use crate::manifest::{data_hash, run_id, RunManifest};
use crate::rolling::{rolling_run, task_stem, RollingContext};
use crate::{seeds, HarnessError};

pub const POINTS_FILE: &str = "lear_points.csv";

/// Paths inside the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn panel_cache(&self) -> PathBuf {
        self.root.join("panel.cache")
    }

    pub fn tasks(&self) -> PathBuf {
        self.root.join("tasks")
    }

    pub fn forecasts(&self) -> PathBuf {
        self.root.join("forecasts")
    }

    pub fn forecast(&self, model: &str) -> PathBuf {
        self.forecasts().join(format!("{model}.csv"))
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn plots(&self) -> PathBuf {
        self.root.join("plots")
    }

    fn ensure(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(HarnessError::io(dir))
    }
}

/// Worker count from the environment; `None` leaves rayon's default.
pub fn workers() -> Result<Option<usize>, HarnessError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| HarnessError::Config(format!("{WORKERS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

/// Runs `f` on a pool sized by [`workers`]. Results do not depend on the
/// pool size.
pub fn with_workers<R: Send>(f: impl FnOnce() -> Result<R, HarnessError> + Send) -> Result<R, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

pub fn load(cfg: &RunConfig) -> Result<PricePanel, HarnessError> {
    let panel = load_panel(&cfg.data.panel, &cfg.schema())?;
    if panel.hours() != cfg.data.hours {
        return Err(HarnessError::Config(format!("panel has {} hours, config says {}", panel.hours(), cfg.data.hours)));
    }
    Ok(panel)
}

pub fn schedule(cfg: &RunConfig, panel: &PricePanel) -> Result<WindowSchedule, HarnessError> {
    let mut s = make_schedule(panel, cfg.schedule.window, cfg.schedule.oos_start, cfg.schedule.oos_end, &cfg.schedule.subperiods)?;
    s.calibration_len = cfg.bench.calibration;
    Ok(s)
}

/// Validates the panel and writes the binary-safe cache.
pub fn ingest(cfg: &RunConfig) -> Result<PricePanel, HarnessError> {
    let panel = load(cfg)?;
    let layout = Layout::new(&cfg.run.out_dir);
    layout.ensure(&layout.root)?;
    let path = layout.panel_cache();
    let file = fs::File::create(&path).map_err(HarnessError::io(&path))?;
    panel.write_cache(std::io::BufWriter::new(file))?;
    log::info!("ingested {} days x {} hours ({} .. {})", panel.n_days(), panel.hours(), panel.days[0], panel.days[panel.n_days() - 1]);
    Ok(panel)
}

/// Per-hour search on the first training window; writes the manifest.
pub fn hpo(cfg: &RunConfig) -> Result<RunManifest, HarnessError> {
    let panel = load(cfg)?;
    let sched = schedule(cfg, &panel)?;
    let first = sched.entries.first().ok_or_else(|| HarnessError::Config("empty schedule".into()))?;
    let state = WindowState::fit(&panel, first.window.clone(), &target_levels(), cfg.schedule.winsor)?;
    let days: Vec<usize> = first.window.clone().filter(|&d| d >= HISTORY_DAYS).collect();
    let selections = with_workers(|| {
        (0..panel.hours())
            .into_par_iter()
            .map(|h| {
                let x = design_matrix(&panel, &state, &days, h)?;
                let y = targets_matrix(&panel, &state, &days, h);
                hpo_search(&cfg.hpo, &cfg.training, h, &x, &y, cfg.run.seed)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let hash = data_hash(&panel, &cfg.schema())?;
    let checkpoints = (0..cfg.run.runs)
        .flat_map(|r| (0..panel.hours()).flat_map(move |h| (0..cfg.hpo.ensembles).map(move |m| format!("tasks/{}.ckpt.json", task_stem(r, h, m)))))
        .collect();
    let manifest = RunManifest {
        run_id: run_id(cfg.run.seed, &cfg.hpo, &cfg.training, &hash)?,
        seed: cfg.run.seed,
        data_hash: hash,
        space: cfg.hpo.clone(),
        training: cfg.training.clone(),
        selections,
        subperiod_starts: sched.entries.iter().filter(|e| e.retrain).map(|e| e.date).collect(),
        checkpoints,
    };
    let layout = Layout::new(&cfg.run.out_dir);
    layout.ensure(&layout.root)?;
    manifest.write(&layout.manifest())?;
    Ok(manifest)
}

fn write_forecasts(path: &Path, forecasts: &[QuantileForecast]) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(HarnessError::io(path))?;
    write_quantile_csv(std::io::BufWriter::new(file), forecasts, &forecast_levels())?;
    Ok(())
}

pub fn read_forecasts(path: &Path) -> Result<Vec<QuantileForecast>, HarnessError> {
    let file = fs::File::open(path).map_err(HarnessError::io(path))?;
    Ok(read_quantile_csv(std::io::BufReader::new(file), &forecast_levels())?)
}

/// Rolling forecasts for every run, plus their quantile average as
/// `distnn`. `stop_before` simulates an interruption (see
/// [`RollingContext::stop_before`]).
pub fn forecast(cfg: &RunConfig, stop_before: Option<usize>) -> Result<Vec<PathBuf>, HarnessError> {
    let layout = Layout::new(&cfg.run.out_dir);
    let manifest = RunManifest::read(&layout.manifest())?;
    let panel = load(cfg)?;
    if data_hash(&panel, &cfg.schema())? != manifest.data_hash {
        return Err(HarnessError::Config("panel differs from the one the search ran on; rerun `hpo`".into()));
    }
    let sched = schedule(cfg, &panel)?;
    let configs = manifest.configs();
    layout.ensure(&layout.forecasts())?;
    let mut runs = Vec::with_capacity(cfg.run.runs);
    let mut written = Vec::new();
    for r in 0..cfg.run.runs {
        let ctx = RollingContext {
            panel: &panel,
            schedule: &sched,
            configs: &configs,
            training: &manifest.training,
            winsor: cfg.schedule.winsor,
            ensembles: manifest.space.ensembles,
            seed: seeds::derive(cfg.run.seed, "run", &[r as u64]),
            run: r,
            task_dir: layout.tasks(),
            stop_before,
        };
        let out = with_workers(|| rolling_run(&ctx))?;
        let path = layout.forecast(&format!("distnn_run{r}"));
        write_forecasts(&path, &out)?;
        written.push(path);
        runs.push(out);
    }
    let avg = runs[0]
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let members: Vec<Vec<f64>> = runs.iter().map(|run| run[i].values.clone()).collect();
            Ok(QuantileForecast { date: f.date, hour: f.hour, values: quantile_average(&members)? })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let path = layout.forecast("distnn");
    write_forecasts(&path, &avg)?;
    written.push(path);
    Ok(written)
}

/// Benchmark quantile files and the LEAR point file.
pub fn bench(cfg: &RunConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let panel = load(cfg)?;
    let sched = schedule(cfg, &panel)?;
    let out = with_workers(|| run_benchmarks(&panel, &sched, &cfg.bench, cfg.run.seed))?;
    let layout = Layout::new(&cfg.run.out_dir);
    layout.ensure(&layout.forecasts())?;
    let mut written = Vec::new();
    for (name, list) in &out.quantiles {
        let path = layout.forecast(name);
        write_forecasts(&path, list)?;
        written.push(path);
    }
    let path = layout.forecasts().join(POINTS_FILE);
    let file = fs::File::create(&path).map_err(HarnessError::io(&path))?;
    out.points.write_csv(std::io::BufWriter::new(file))?;
    written.push(path);
    Ok(written)
}

/// Every quantile file in the forecasts directory, by model name.
pub fn forecast_files(layout: &Layout) -> Result<BTreeMap<String, PathBuf>, HarnessError> {
    let dir = layout.forecasts();
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(&dir).map_err(HarnessError::io(&dir))? {
        let path = entry.map_err(HarnessError::io(&dir))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if let Some(model) = name.strip_suffix(".csv") {
            if name != POINTS_FILE {
                out.insert(model.to_string(), path);
            }
        }
    }
    Ok(out)
}

pub fn subperiods(sched: &WindowSchedule) -> Vec<Subperiod> {
    let mut out: Vec<Subperiod> = Vec::new();
    for e in &sched.entries {
        match out.last_mut() {
            Some(p) if !e.retrain => p.end = e.date,
            _ => out.push(Subperiod { name: format!("from_{}", e.date), start: e.date, end: e.date }),
        }
    }
    out
}

/// Loss panels of every model for one level set, restricted to the schedule.
pub fn loss_panels(cfg: &RunConfig, panel: &PricePanel, set: LevelSet) -> Result<Vec<LossPanel>, HarnessError> {
    let layout = Layout::new(&cfg.run.out_dir);
    let files = forecast_files(&layout)?;
    if files.is_empty() {
        return Err(HarnessError::Config(format!("no forecast files in {}", layout.forecasts().display())));
    }
    let sched = schedule(cfg, panel)?;
    let dates: Vec<NaiveDate> = sched.entries.iter().map(|e| e.date).collect();
    files
        .iter()
        .map(|(model, path)| {
            let f = read_forecasts(path)?;
            Ok(LossPanel::from_forecasts(model, &f, panel, &forecast_levels(), set)?.restrict(&dates)?)
        })
        .collect()
}

/// CRPS and DM tables for all levels and for the tails.
pub fn eval(cfg: &RunConfig) -> Result<Vec<(LevelSet, EvalReport)>, HarnessError> {
    let panel = load(cfg)?;
    let sched = schedule(cfg, &panel)?;
    let layout = Layout::new(&cfg.run.out_dir);
    let dir = layout.report();
    layout.ensure(&dir)?;
    let mut out = Vec::new();
    for set in [LevelSet::All, LevelSet::Tails] {
        let panels = loss_panels(cfg, &panel, set)?;
        let rep = report(&panels, &subperiods(&sched))?;
        let name = set.name();
        let mut text = rep.text();
        if let Some(best) = best_run(&rep) {
            text.push_str(&format!("\nbest single run: {best}\n"));
        }
        for (file, body) in [
            (format!("{name}_crps.csv"), rep.crps_csv()),
            (format!("{name}_hourly_crps.csv"), rep.hourly_crps_csv()),
            (format!("{name}_dm.csv"), rep.dm_csv()),
            (format!("{name}_hourly_dm.csv"), rep.hourly_dm_csv()),
            (format!("{name}.txt"), text),
        ] {
            let path = dir.join(file);
            fs::write(&path, body).map_err(HarnessError::io(&path))?;
        }
        out.push((set, rep));
    }
    Ok(out)
}

/// Lowest overall CRPS among `distnn_run*` models, when there are several.
pub fn best_run(rep: &EvalReport) -> Option<String> {
    let all = rep.periods.len() - 1;
    let runs: Vec<(usize, f64)> = rep
        .models
        .iter()
        .enumerate()
        .filter(|(_, m)| m.starts_with("distnn_run"))
        .filter_map(|(i, _)| rep.crps[i][all].map(|c| (i, c)))
        .collect();
    if runs.len() < 2 {
        return None;
    }
    runs.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map(|&(i, _)| rep.models[i].clone())
}

/// Long-format files for external plotting: per (model, day, hour) losses
/// and 5/25/50/75/95% bands next to the realized price.
pub fn export_plots(cfg: &RunConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let panel = load(cfg)?;
    let layout = Layout::new(&cfg.run.out_dir);
    layout.ensure(&layout.plots())?;
    let mut written = Vec::new();
    for set in [LevelSet::All, LevelSet::Tails] {
        let path = layout.plots().join(format!("losses_{}.csv", set.name()));
        let mut buf = Vec::new();
        for (i, p) in loss_panels(cfg, &panel, set)?.iter().enumerate() {
            p.write_long_csv(&mut buf, i == 0)?;
        }
        fs::write(&path, buf).map_err(HarnessError::io(&path))?;
        written.push(path);
    }
    let bands = [4usize, 24, 49, 74, 94];
    let mut text = String::from("model,date,hour,price,q05,q25,q50,q75,q95\n");
    for (model, path) in forecast_files(&layout)? {
        for f in read_forecasts(&path)? {
            let Some(t) = panel.index_of(f.date) else { continue };
            text.push_str(&format!("{model},{},{},{}", f.date, f.hour + 1, panel.prices[[t, f.hour]]));
            for &b in &bands {
                text.push_str(&format!(",{}", f.values[b]));
            }
            text.push('\n');
        }
    }
    let path = layout.plots().join("bands.csv");
    fs::write(&path, text).map_err(HarnessError::io(&path))?;
    written.push(path);
    Ok(written)
}
