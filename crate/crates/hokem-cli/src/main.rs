//! `hokem` — the pipeline driver. Every subcommand reads the declarative
//! config (``--config``, ``$HOKEM_CONFIG``, or defaults), applies its flag
//! overrides, and writes one artifact. Runtime failures exit 1 with a JSON
//! error summary on stderr; usage errors exit 2.

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use hokem::checkpoint::{load_checkpoint, save_checkpoint};
use hokem::config::PipelineConfig;
use hokem::error::HokemError;
use hokem::evaluation::{
    detections_from_samples, evaluate, ground_truths_from_samples, DetectionSource, Scenario,
};
use hokem::features::{KeypointSet, FEATURE_DIM};
use hokem::geometry::{extract_object_keypoints, RleMask};
use hokem::hograph::{build_graph, AdjacencyStack};
use hokem::io::{read_jsonl, write_jsonl, Segmentation};
use hokem::network::Model;
use hokem::render::render_pair_svg;
use hokem::synthetic::{generate_split, sample_from_record, DatasetMeta, DatasetRecord};
use hokem::training::{train, write_loss_history, HOSample};

#[derive(Parser)]
#[command(name = "hokem", version, about = "Human-object interaction pipeline")]
struct Cli {
    /// Configuration file; falls back to $HOKEM_CONFIG, then defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SourceArg {
    Baseline,
    Hokem,
    Fused,
}

impl From<SourceArg> for DetectionSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Baseline => DetectionSource::Baseline,
            SourceArg::Hokem => DetectionSource::Hokem,
            SourceArg::Fused => DetectionSource::Fused,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract the 9 object keypoints from a mask document (RLE or polygons).
    ExtractKeypoints {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the 26-node human-object graph with partition labels as JSON.
    BuildGraph {
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the seeded synthetic train/test split.
    GenData {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 500)]
        train: usize,
        #[arg(long, default_value_t = 200)]
        test: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Train on the generated dataset; writes a checkpoint and loss CSV.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score the test split against its ground truth; writes a JSON report.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<u8>,
        #[arg(long, value_enum, default_value_t = SourceArg::Hokem)]
        source: SourceArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write product-fused detections for the test split as JSONL.
    Fuse {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render one dataset sample as an SVG overlay.
    Render {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_meta(dir: &Path) -> hokem::Result<DatasetMeta> {
    Ok(serde_json::from_str(&std::fs::read_to_string(
        dir.join("meta.json"),
    )?)?)
}

fn load_split(dir: &Path, split: &str) -> hokem::Result<Vec<DatasetRecord>> {
    read_jsonl(&dir.join(format!("{split}.jsonl")))
}

fn load_samples(dir: &Path, split: &str) -> hokem::Result<Vec<HOSample>> {
    load_split(dir, split)?
        .iter()
        .map(sample_from_record)
        .collect()
}

fn build_model(config: &PipelineConfig, num_classes: usize) -> hokem::Result<Model> {
    let graph = build_graph(&config.graph)?;
    let stack = AdjacencyStack::from_graph(&graph, config.beta)?;
    let mut model_config = config.model.clone();
    model_config.num_classes = num_classes;
    Model::new(model_config, stack, FEATURE_DIM)
}

fn run(cli: Cli) -> hokem::Result<()> {
    let (config, _source) = PipelineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::ExtractKeypoints { mask, out } => {
            let text = std::fs::read_to_string(&mask)?;
            // Accept either a tagged segmentation document or a bare RLE.
            let seg: Segmentation = serde_json::from_str(&text)
                .or_else(|_| serde_json::from_str::<RleMask>(&text).map(Segmentation::Rle))?;
            let raster = seg.decode()?;
            let keypoints = extract_object_keypoints(&raster);
            std::fs::write(&out, serde_json::to_string_pretty(&keypoints)? + "\n")?;
            println!("wrote {}", out.display());
        }
        Command::BuildGraph { out } => {
            let graph = build_graph(&config.graph)?;
            std::fs::write(&out, graph.to_json() + "\n")?;
            println!("wrote {}", out.display());
        }
        Command::GenData {
            seed,
            classes,
            train,
            test,
            out_dir,
        } => {
            let seed = seed.unwrap_or(config.train.seed);
            let dir = out_dir.unwrap_or(config.paths.dataset_dir);
            std::fs::create_dir_all(&dir)?;
            let (train_set, test_set) = generate_split(seed, train, test, classes)?;
            write_jsonl(&dir.join("train.jsonl"), &train_set.records)?;
            write_jsonl(&dir.join("test.jsonl"), &test_set.records)?;
            let mut meta = train_set.meta.clone();
            meta.n_samples = train + test;
            std::fs::write(
                &dir.join("meta.json"),
                serde_json::to_string_pretty(&meta)? + "\n",
            )?;
            println!(
                "wrote {} train and {} test samples over {} classes to {}",
                train,
                test,
                classes,
                dir.display()
            );
        }
        Command::Train {
            data,
            out_dir,
            seed,
            epochs,
        } => {
            let data = data.unwrap_or_else(|| config.paths.dataset_dir.clone());
            let out = out_dir.unwrap_or_else(|| config.paths.checkpoint_dir.clone());
            let meta = load_meta(&data)?;
            let samples = load_samples(&data, "train")?;
            let mut model = build_model(&config, meta.n_classes)?;
            let mut train_config = config.train.clone();
            if let Some(s) = seed {
                train_config.seed = s;
            }
            if let Some(e) = epochs {
                train_config.total_epochs = e;
            }
            let history = train(&mut model, &samples, &train_config)?;
            std::fs::create_dir_all(&out)?;
            save_checkpoint(&out, &model, &config.graph, &meta.class_names)?;
            write_loss_history(&out.join("loss.csv"), &history)?;
            let last = history.last().expect("at least one epoch");
            println!(
                "trained {} epochs on {} samples; final mean loss {:.6}; checkpoint in {}",
                history.len(),
                samples.len(),
                last.mean_loss,
                out.display()
            );
        }
        Command::Eval {
            data,
            checkpoint,
            scenario,
            source,
            out,
        } => {
            let data = data.unwrap_or_else(|| config.paths.dataset_dir.clone());
            let ckpt = checkpoint.unwrap_or_else(|| config.paths.checkpoint_dir.clone());
            let (model, _, class_names) = load_checkpoint(&ckpt)?;
            let samples = load_samples(&data, "test")?;
            let scenario = match scenario {
                None => config.scenario,
                Some(v) => Scenario::try_from(v).map_err(HokemError::Config)?,
            };
            let source = DetectionSource::from(source);
            let detections = detections_from_samples(&model, &samples, &[source])?;
            let ground_truths = ground_truths_from_samples(&samples);
            let report = evaluate(&detections, &ground_truths, scenario, &class_names, source)?;
            let out = out.unwrap_or_else(|| {
                config.paths.report_dir.join(format!(
                    "report_{:?}_s{}.json",
                    source,
                    u8::from(scenario)
                ))
            });
            if let Some(parent) = out.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&out, serde_json::to_string_pretty(&report)? + "\n")?;
            print!("{}", report.table());
            println!("wrote {}", out.display());
        }
        Command::Fuse {
            data,
            checkpoint,
            out,
        } => {
            let data = data.unwrap_or_else(|| config.paths.dataset_dir.clone());
            let ckpt = checkpoint.unwrap_or_else(|| config.paths.checkpoint_dir.clone());
            let (model, _, _) = load_checkpoint(&ckpt)?;
            let samples = load_samples(&data, "test")?;
            let detections = detections_from_samples(&model, &samples, &[DetectionSource::Fused])?;
            write_jsonl(&out, &detections)?;
            println!(
                "wrote {} fused detections to {}",
                detections.len(),
                out.display()
            );
        }
        Command::Render {
            data,
            split,
            index,
            out,
        } => {
            let data = data.unwrap_or_else(|| config.paths.dataset_dir.clone());
            let records = load_split(&data, &split)?;
            let record = records.get(index).ok_or_else(|| {
                HokemError::Contract(format!(
                    "sample index {index} out of range for {} {split} records",
                    records.len()
                ))
            })?;
            let mask = record.object_rle.decode()?;
            let kps =
                KeypointSet {
                    human: record.human.clone().try_into().map_err(|_| {
                        HokemError::Contract("record does not hold 17 joints".into())
                    })?,
                    valid: record.human_valid.clone().try_into().map_err(|_| {
                        HokemError::Contract("record does not hold 17 validity flags".into())
                    })?,
                    object: extract_object_keypoints(&mask),
                    human_bbox: record.human_bbox,
                };
            std::fs::write(&out, render_pair_svg(&mask, &kps))?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
