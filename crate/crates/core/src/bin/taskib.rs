use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use taskib::config::ConfigLayer;
use taskib::pipeline;
use taskib::scenegraph::PlaceFeatureStrategy;

#[derive(Parser)]
#[command(
    name = "taskib",
    version,
    about = "Task-driven information bottleneck clustering for 3D scene graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by the clustering commands. Precedence: defaults, the
/// tasks file, `--config`, then these flags.
#[derive(Args)]
struct Settings {
    /// Tasks file (JSON).
    #[arg(long)]
    tasks: PathBuf,
    /// TOML file with default settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Object-layer stopping threshold on the normalized merge loss.
    #[arg(long)]
    delta_bar_objects: Option<f64>,
    /// Region-layer stopping threshold.
    #[arg(long)]
    delta_bar_regions: Option<f64>,
    /// Null-task score for primitives.
    #[arg(long, allow_negative_numbers = true)]
    alpha_objects: Option<f64>,
    /// Null-task score for places.
    #[arg(long, allow_negative_numbers = true)]
    alpha_regions: Option<f64>,
    /// Number of ranked entries kept in each task distribution.
    #[arg(long)]
    k: Option<usize>,
    /// Minimum embedding cosine for a track association.
    #[arg(long, allow_negative_numbers = true)]
    theta_track: Option<f64>,
    /// Minimum box IoU for a track association.
    #[arg(long)]
    gamma_iou: Option<f64>,
    /// Seconds without observations after which a track is finished.
    #[arg(long)]
    tau_seconds: Option<f64>,
    #[arg(long, value_enum)]
    place_feature_strategy: Option<PlaceFeatureStrategy>,
    /// Recorded in outputs; clustering itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl Settings {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            delta_bar_objects: self.delta_bar_objects,
            delta_bar_regions: self.delta_bar_regions,
            alpha_objects: self.alpha_objects,
            alpha_regions: self.alpha_regions,
            k: self.k,
            theta_track: self.theta_track,
            gamma_iou: self.gamma_iou,
            tau_seconds: self.tau_seconds,
            place_feature_strategy: self.place_feature_strategy,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Batch clustering of a primitives file into a scene graph.
    Cluster {
        /// Primitives (JSON Lines).
        #[arg(long)]
        primitives: PathBuf,
        #[command(flatten)]
        settings: Settings,
        /// Output document (JSON).
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Tracking and incremental clustering of an observations stream.
    Stream {
        /// Segment observations (JSON Lines), ordered by frame.
        #[arg(long)]
        observations: PathBuf,
        #[command(flatten)]
        settings: Settings,
        /// Output document (JSON).
        #[arg(long, short)]
        out: PathBuf,
        /// Per-insert timing log (JSON).
        #[arg(long)]
        latency: Option<PathBuf>,
    },
    /// Region clustering over a place graph.
    Regions {
        /// Place nodes (JSON Lines).
        #[arg(long)]
        places: PathBuf,
        /// Image features (JSON Lines).
        #[arg(long)]
        images: PathBuf,
        #[command(flatten)]
        settings: Settings,
        /// Output document (JSON).
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Open-set metrics of a scene graph against ground truth.
    Eval {
        /// Scene graph produced by `cluster` or `stream`.
        #[arg(long)]
        scene: PathBuf,
        /// Ground-truth objects (JSON Lines).
        #[arg(long)]
        ground_truth: PathBuf,
        /// Tasks file (JSON).
        #[arg(long)]
        tasks: PathBuf,
        /// Machine-readable report (JSON).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// The `n` objects most similar to a query embedding.
    Query {
        /// Scene graph produced by `cluster` or `stream`.
        #[arg(long)]
        scene: PathBuf,
        /// Query embedding (JSON).
        #[arg(long)]
        query: PathBuf,
        /// Number of objects to return.
        #[arg(long, short, default_value_t = 1)]
        n: usize,
        /// Ranked results (JSON).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> taskib::Result<()> {
    match cli.command {
        Command::Cluster {
            primitives,
            settings,
            out,
        } => {
            let (tasks, cfg) = pipeline::load_tasks_and_config(
                &settings.tasks,
                settings.config.as_deref(),
                &settings.layer(),
            )?;
            let scene = pipeline::run_cluster(&primitives, &tasks, &cfg, &out)?;
            println!("{} objects -> {}", scene.objects.len(), out.display());
        }
        Command::Stream {
            observations,
            settings,
            out,
            latency,
        } => {
            let (tasks, cfg) = pipeline::load_tasks_and_config(
                &settings.tasks,
                settings.config.as_deref(),
                &settings.layer(),
            )?;
            let s = pipeline::run_stream(&observations, &tasks, &cfg, &out, latency.as_deref())?;
            println!(
                "{} primitives, {} inserts, {} objects -> {}",
                s.primitives.len(),
                s.latency.len(),
                s.scene.objects.len(),
                out.display()
            );
        }
        Command::Regions {
            places,
            images,
            settings,
            out,
        } => {
            let (tasks, cfg) = pipeline::load_tasks_and_config(
                &settings.tasks,
                settings.config.as_deref(),
                &settings.layer(),
            )?;
            let r = pipeline::run_regions(&places, &images, &tasks, &cfg, &out)?;
            println!("{} regions -> {}", r.regions.len(), out.display());
        }
        Command::Eval {
            scene,
            ground_truth,
            tasks,
            out,
        } => {
            let report = pipeline::run_eval(&scene, &ground_truth, &tasks, out.as_deref())?;
            print!("{}", pipeline::metrics_table(&report));
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Query {
            scene,
            query,
            n,
            out,
        } => {
            for r in pipeline::run_query(&scene, &query, n, out.as_deref())? {
                println!("{}\t{}\t{:.6}", r.index, r.id, r.score);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
