//! Subcommand bodies. Each writes its output files only after all of its
//! computation has succeeded.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::ascent::{multistart, CoupleEvaluator, MultiStart, SearchResult, ThresholdGrid};
use crate::bandselect::{select_bands, BandSubset, SelectionThresholds};
use crate::config::RunConfig;
use crate::datacube::{
    generate_synthetic, load_cube, load_ground_truth, random_split, GroundTruthMap, HyperCube,
    LabeledSplit, SyntheticData, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::infotheory::mi_profile;
use crate::wrapper::{join_bands, EvaluationCache, EvaluationRecord, WrapperEvaluator};

pub const MI_PROFILE_HEADER: &str = "band_index,mi_bits";
pub const SELECTION_HEADER: &str = "th_relevance,th_redundancy,n_bands,band_list";
pub const GRID_HEADER: &str = "th_redundancy,th_relevance,n_bands,accuracy,defined";
pub const TRAJECTORY_HEADER: &str = "step,th_redundancy,th_relevance,n_bands,accuracy,\
left_op,left_R,down_op,down_R,top_op,top_R,right_op,right_R,chosen,reason";
pub const SUMMARY_HEADER: &str =
    "restart,seed,start_point,final_point,final_n_bands,final_accuracy,steps";

pub struct Dataset {
    pub cube: HyperCube,
    pub gt: GroundTruthMap,
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let (cube_path, gt_path) = cfg.inputs()?;
    let cube = load_cube(cube_path, cfg.cube_format)?;
    let gt = load_ground_truth(gt_path)?;
    gt.check_matches(&cube)?;
    Ok(Dataset { cube, gt })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn fmt_accuracy(a: Option<f64>) -> String {
    a.map(|a| a.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSummary {
    pub profile: Vec<f64>,
    pub path: PathBuf,
}

impl ProfileSummary {
    pub fn min(&self) -> f64 {
        self.profile.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.profile
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// First band attaining the maximum.
    pub fn argmax(&self) -> usize {
        let max = self.max();
        self.profile.iter().position(|&v| v == max).unwrap_or(0)
    }
}

pub fn profile_csv(profile: &[f64]) -> String {
    let mut out = format!("{MI_PROFILE_HEADER}\n");
    for (i, mi) in profile.iter().enumerate() {
        writeln!(out, "{i},{mi}").unwrap();
    }
    out
}

pub fn run_mi_profile(cfg: &RunConfig) -> Result<ProfileSummary> {
    let data = load_dataset(cfg)?;
    let profile = mi_profile(&data.cube, &data.gt, cfg.levels, true)?;
    let path = cfg.out.join("mi_profile.csv");
    write_file(&path, &profile_csv(&profile))?;
    Ok(ProfileSummary { profile, path })
}

pub fn selection_csv(subset: &BandSubset) -> String {
    let t = subset.thresholds;
    format!(
        "{SELECTION_HEADER}\n{},{},{},{}\n",
        t.th_relevance,
        t.th_redundancy,
        subset.len(),
        join_bands(&subset.bands)
    )
}

/// An empty selection is a valid outcome, not an error.
pub fn run_select(cfg: &RunConfig, thresholds: SelectionThresholds) -> Result<BandSubset> {
    let data = load_dataset(cfg)?;
    let subset = select_bands(&data.cube, &data.gt, thresholds, cfg.levels, cfg.mode())?;
    write_file(&cfg.out.join("selection.csv"), &selection_csv(&subset))?;
    Ok(subset)
}

fn split_for(cfg: &RunConfig, gt: &GroundTruthMap) -> Result<LabeledSplit> {
    random_split(gt, cfg.split_fraction, cfg.split_seed, cfg.stratified)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    /// Redundancy-major, matching `ThresholdGrid::points`.
    pub records: Vec<EvaluationRecord>,
    pub invocations: usize,
}

/// Evaluates every couple of `grid`, in grid order.
pub fn evaluate_grid<E: CoupleEvaluator + ?Sized>(
    grid: &ThresholdGrid,
    evaluator: &E,
) -> Result<Vec<EvaluationRecord>> {
    grid.points()
        .map(|p| evaluator.evaluate(grid.thresholds(p)))
        .collect()
}

pub fn grid_csv(records: &[EvaluationRecord]) -> String {
    let mut out = format!("{GRID_HEADER}\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.thresholds.th_redundancy,
            r.thresholds.th_relevance,
            r.n_bands(),
            fmt_accuracy(r.accuracy),
            r.defined()
        )
        .unwrap();
    }
    out
}

/// Rows are redundancy thresholds, columns relevance thresholds; each cell
/// holds the band count and accuracy, `-` when undefined.
pub fn grid_table(grid: &ThresholdGrid, records: &[EvaluationRecord]) -> String {
    let rel = grid.relevance_axis();
    let mut out = format!("{:<8}", "TH\\MI");
    for v in rel {
        write!(out, "| {:<15}", format!("MI > {v}")).unwrap();
    }
    out.push('\n');
    write!(out, "{:<8}", "").unwrap();
    for _ in rel {
        write!(out, "| {:<6}{:<9}", "N.B", "ac(%)").unwrap();
    }
    out.push('\n');
    for (ri, red) in grid.redundancy_axis().iter().enumerate() {
        write!(out, "{:<8}", format!("{red:.2}")).unwrap();
        for mi in 0..rel.len() {
            let r = &records[ri * rel.len() + mi];
            let cell = match r.accuracy {
                Some(a) => format!("{:<6}{:<9}", r.n_bands(), format!("{a:.2}")),
                None => format!("{:<6}{:<9}", "-", "-"),
            };
            write!(out, "| {cell}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn open_cache(cfg: &RunConfig) -> Result<EvaluationCache> {
    EvaluationCache::open(cfg.cache_path())
}

fn evaluator<'a>(
    cfg: &RunConfig,
    data: &'a Dataset,
    split: &'a LabeledSplit,
    cache: &'a EvaluationCache,
) -> Result<WrapperEvaluator<'a>> {
    Ok(WrapperEvaluator::new(
        &data.cube,
        &data.gt,
        split,
        cfg.classifier.clone(),
        cfg.levels,
        cfg.mode(),
        cache,
    )?
    .with_protocol_tag(&cfg.protocol_tag()))
}

pub fn run_grid(cfg: &RunConfig) -> Result<GridReport> {
    let data = load_dataset(cfg)?;
    let split = split_for(cfg, &data.gt)?;
    let cache = open_cache(cfg)?;
    let ev = evaluator(cfg, &data, &split, &cache)?;
    let records = evaluate_grid(&cfg.grid, &ev)?;
    write_file(&cfg.out.join("grid.csv"), &grid_csv(&records))?;
    write_file(
        &cfg.out.join("grid_table.txt"),
        &grid_table(&cfg.grid, &records),
    )?;
    save_cache(&cache)?;
    Ok(GridReport {
        records,
        invocations: ev.classifier_invocations(),
    })
}

fn save_cache(cache: &EvaluationCache) -> Result<()> {
    if let Some(dir) = cache
        .path()
        .and_then(Path::parent)
        .filter(|d| !d.as_os_str().is_empty())
    {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    cache.save()
}

fn fmt_ratio(r: Option<f64>) -> String {
    match r {
        None => String::new(),
        Some(r) if r.is_infinite() => "inf".into(),
        Some(r) => r.to_string(),
    }
}

pub fn trajectory_csv(grid: &ThresholdGrid, run: &SearchResult) -> String {
    let mut out = format!("{TRAJECTORY_HEADER}\n");
    for (i, step) in run.trajectory.iter().enumerate() {
        let t = grid.thresholds(step.point);
        write!(
            out,
            "{i},{},{},{},{}",
            t.th_redundancy,
            t.th_relevance,
            step.record.n_bands(),
            fmt_accuracy(step.record.accuracy)
        )
        .unwrap();
        for a in &step.assessments {
            write!(out, ",{},{}", a.operator, fmt_ratio(a.ratio)).unwrap();
        }
        let chosen = step.chosen.map(|d| d.name()).unwrap_or("");
        writeln!(out, ",{chosen},{}", step.reason).unwrap();
    }
    out
}

pub fn summary_csv(grid: &ThresholdGrid, search: &MultiStart) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (i, run) in search.runs.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{},{}",
            run.restart_seed,
            grid.label(run.start_point),
            grid.label(run.final_point),
            run.final_record.n_bands(),
            fmt_accuracy(run.final_record.accuracy),
            run.trajectory.len()
        )
        .unwrap();
    }
    out
}

/// Writes `trajectory_<i>.csv` per restart and `search_summary.csv`.
pub fn write_search_outputs(grid: &ThresholdGrid, search: &MultiStart, out: &Path) -> Result<()> {
    for (i, run) in search.runs.iter().enumerate() {
        write_file(
            &out.join(format!("trajectory_{i}.csv")),
            &trajectory_csv(grid, run),
        )?;
    }
    write_file(&out.join("search_summary.csv"), &summary_csv(grid, search))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub search: MultiStart,
    pub invocations: usize,
}

pub fn run_search(cfg: &RunConfig) -> Result<SearchReport> {
    let data = load_dataset(cfg)?;
    let split = split_for(cfg, &data.gt)?;
    let cache = open_cache(cfg)?;
    let ev = evaluator(cfg, &data, &split, &cache)?;
    let search = multistart(&cfg.grid, cfg.restarts, cfg.seed, &ev)?;
    write_search_outputs(&cfg.grid, &search, &cfg.out)?;
    save_cache(&cache)?;
    Ok(SearchReport {
        search,
        invocations: ev.classifier_invocations(),
    })
}

pub struct SynthPaths {
    pub cube: PathBuf,
    pub gt: PathBuf,
    pub provenance: PathBuf,
}

pub fn run_synth(spec: &SyntheticSpec, seed: u64, paths: &SynthPaths) -> Result<SyntheticData> {
    spec.validate()?;
    let data = generate_synthetic(spec, seed)?;
    let bytes = data.cube.to_bytes();
    if let Some(dir) = paths.cube.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&paths.cube, bytes).map_err(|e| Error::io(&paths.cube, e))?;
    write_file(&paths.gt, &data.gt.to_text())?;
    write_file(&paths.provenance, &data.provenance_csv())?;
    Ok(data)
}
