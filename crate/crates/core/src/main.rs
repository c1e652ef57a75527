use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hsiselect::bandselect::SelectionThresholds;
use hsiselect::commands::{self, SynthPaths};
use hsiselect::config::{load_settings, RunConfig, Settings};
use hsiselect::datacube::SyntheticSpec;
use hsiselect::Result;

#[derive(Parser)]
#[command(name = "hsiselect", version, about = "Hyperspectral band selection")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Every config key, as a flag that wins over the config file.
#[derive(Args)]
struct Overrides {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    cube: Option<String>,
    /// binary-cube or pixel-csv
    #[arg(long, global = true)]
    cube_format: Option<String>,
    #[arg(long, global = true)]
    gt: Option<String>,
    /// Quantization levels per band
    #[arg(long, global = true)]
    levels: Option<String>,
    #[arg(long, global = true)]
    split_fraction: Option<String>,
    /// Defaults to --seed
    #[arg(long, global = true)]
    split_seed: Option<String>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    stratified: Option<String>,
    /// knn, knn:<k>, nearest-centroid or external
    #[arg(long, global = true)]
    classifier: Option<String>,
    #[arg(long, global = true)]
    k: Option<String>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    normalize: Option<String>,
    /// Command line of an external classifier, split on whitespace
    #[arg(long, global = true, allow_hyphen_values = true)]
    external_command: Option<String>,
    /// Comma-separated redundancy thresholds
    #[arg(long, global = true)]
    redundancy_axis: Option<String>,
    /// Comma-separated relevance thresholds
    #[arg(long, global = true)]
    relevance_axis: Option<String>,
    /// Evaluation cache file [default: <out>/eval_cache.csv]
    #[arg(long, global = true)]
    cache: Option<String>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    restarts: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Read the redundancy matrix as it is consumed instead of its pristine values
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    literal_d_matrix: Option<String>,
}

impl Overrides {
    fn settings(&self) -> Result<Settings> {
        let mut settings = match &self.config {
            Some(path) => load_settings(path)?,
            None => Settings::new(),
        };
        let flags = [
            ("cube", &self.cube),
            ("cube_format", &self.cube_format),
            ("gt", &self.gt),
            ("levels", &self.levels),
            ("split_fraction", &self.split_fraction),
            ("split_seed", &self.split_seed),
            ("stratified", &self.stratified),
            ("classifier", &self.classifier),
            ("k", &self.k),
            ("normalize", &self.normalize),
            ("external_command", &self.external_command),
            ("redundancy_axis", &self.redundancy_axis),
            ("relevance_axis", &self.relevance_axis),
            ("cache", &self.cache),
            ("out", &self.out),
            ("restarts", &self.restarts),
            ("seed", &self.seed),
            ("literal_d_matrix", &self.literal_d_matrix),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                settings.insert(key.to_string(), v.clone());
            }
        }
        Ok(settings)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the per-band mutual information with the ground truth
    MiProfile,
    /// Select bands for one threshold couple
    Select {
        #[arg(long)]
        th_relevance: f64,
        #[arg(long)]
        th_redundancy: f64,
    },
    /// Evaluate every couple of the threshold grid
    Grid,
    /// Multistart steepest ascent over the threshold grid
    Search,
    /// Generate a synthetic cube with known relevant, redundant and noise bands
    Synth {
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 4)]
        classes: u32,
        #[arg(long, default_value_t = 4)]
        relevant: usize,
        #[arg(long, default_value_t = 2)]
        copies: usize,
        #[arg(long, default_value_t = 8)]
        noise_bands: usize,
        #[arg(long, default_value_t = 0.5)]
        noise_amplitude: f64,
        #[arg(long, default_value = "synthetic.hsic")]
        cube_out: PathBuf,
        #[arg(long, default_value = "synthetic_gt.txt")]
        gt_out: PathBuf,
        #[arg(long, default_value = "synthetic_provenance.csv")]
        provenance_out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::from_settings(&cli.overrides.settings()?)?;
    match cli.command {
        Command::MiProfile => {
            let s = commands::run_mi_profile(&cfg)?;
            println!(
                "bands: {}  min: {:.6}  max: {:.6}  argmax: {}",
                s.profile.len(),
                s.min(),
                s.max(),
                s.argmax()
            );
            println!("wrote {}", s.path.display());
        }
        Command::Select {
            th_relevance,
            th_redundancy,
        } => {
            let t = SelectionThresholds::new(th_relevance, th_redundancy)?;
            let subset = commands::run_select(&cfg, t)?;
            let bands: Vec<String> = subset.bands.iter().map(usize::to_string).collect();
            println!("{} bands: {}", subset.len(), bands.join(" "));
        }
        Command::Grid => {
            let report = commands::run_grid(&cfg)?;
            print!("{}", commands::grid_table(&cfg.grid, &report.records));
            eprintln!("classifier invocations: {}", report.invocations);
        }
        Command::Search => {
            let report = commands::run_search(&cfg)?;
            let best = report.search.best();
            println!(
                "best: restart {} at {} with {} bands, accuracy {}",
                report.search.best,
                cfg.grid.label(best.final_point),
                best.final_record.n_bands(),
                best.final_record
                    .accuracy
                    .map(|a| format!("{a:.2}%"))
                    .unwrap_or_else(|| "-".into())
            );
            eprintln!("classifier invocations: {}", report.invocations);
        }
        Command::Synth {
            width,
            height,
            classes,
            relevant,
            copies,
            noise_bands,
            noise_amplitude,
            cube_out,
            gt_out,
            provenance_out,
        } => {
            let spec = SyntheticSpec {
                width,
                height,
                n_classes: classes,
                relevant_bands: relevant,
                redundant_copies_per_relevant: copies,
                noise_bands,
                noise_amplitude,
            };
            let paths = SynthPaths {
                cube: cube_out,
                gt: gt_out,
                provenance: provenance_out,
            };
            let data = commands::run_synth(&spec, cfg.seed, &paths)?;
            println!(
                "wrote {} ({} bands), {}, {}",
                paths.cube.display(),
                data.cube.n_bands(),
                paths.gt.display(),
                paths.provenance.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
