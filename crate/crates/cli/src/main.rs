//! `cellcut`: train fern classifiers, segment images, evaluate and generate
//! synthetic scenes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cellcut::config::PipelineConfig;
use cellcut::dump::{data_cost_grid, score_grid, weight_grid, write_dump, Grid, GRID_MAGIC};
use cellcut::eval::{generate_scene, segmentation_metrics, MetricsReport, SceneParams};
use cellcut::ferns::{load_model, save_model, PixelClass, MODEL_MAGIC};
use cellcut::imagecore::io::{load_image, load_label_map, save_image_png16, save_label_map, save_rgb_png};
use cellcut::imagecore::{Image, LabelMap};
use cellcut::pipeline;
use cellcut::seeds::load_seeds;

#[derive(Parser)]
#[command(name = "cellcut", version, about = "Seeded cell segmentation with random ferns and graph cuts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a fern model from annotated images.
    Train(TrainArgs),
    /// Segment images with a trained model.
    Segment(SegmentArgs),
    /// Compare a predicted label map with ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic scene and its ground truth.
    Synth(SynthArgs),
    /// Summarize a model file or a score dump.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set energy.label_cost=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    rng_seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(seed) = self.rng_seed {
            cfg.rng_seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training image. Repeat in the same order as `--annotation`.
    #[arg(long = "image", required = true)]
    images: Vec<PathBuf>,
    /// Label map for the preceding images (0 = background).
    #[arg(long = "annotation", required = true)]
    annotations: Vec<PathBuf>,
    /// Drop the pair whose annotation is this file (leave-one-out training).
    #[arg(long)]
    exclude_annotation: Vec<PathBuf>,
    /// Run k-fold cross-validation on the training samples.
    #[arg(long)]
    cv_folds: Option<usize>,
    /// Writes `<PREFIX>.frn`, plus `<PREFIX>.cv.json` with `--cv-folds`.
    #[arg(long)]
    out: String,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    model: PathBuf,
    /// Image to segment. Repeatable.
    #[arg(long = "image", required = true)]
    images: Vec<PathBuf>,
    /// Manual seeds, one `x y` per line, replacing extraction.
    #[arg(long)]
    seeds_file: Option<PathBuf>,
    /// Output prefix. With several images, each gets `<PREFIX>.<stem>`.
    #[arg(long)]
    out: String,
    /// Also write posterior, data-cost and edge-weight grids.
    #[arg(long)]
    dump: bool,
    /// Overlay opacity.
    #[arg(long, default_value_t = 0.45)]
    alpha: f32,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    predicted: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Print JSON instead of `key = value` text.
    #[arg(long)]
    json: bool,
    /// Also write `<PREFIX>.metrics.txt` and `<PREFIX>.metrics.json`.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Writes `<PREFIX>.png` and `<PREFIX>.gt.png`.
    #[arg(long)]
    out: String,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    min_cells: Option<usize>,
    #[arg(long)]
    max_cells: Option<usize>,
    #[arg(long)]
    min_radius: Option<f64>,
    #[arg(long)]
    max_radius: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    blur_sigma: Option<f64>,
}

#[derive(Args)]
struct InspectArgs {
    /// Model (`FRN1`) or grid dump (`GRD1`).
    path: Option<PathBuf>,
    /// Print the default configuration instead.
    #[arg(long, conflicts_with = "path")]
    default_config: bool,
}

/// Files written so far; removed unless `commit` is called.
struct Outputs {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn new() -> Self {
        Outputs {
            paths: Vec::new(),
            committed: false,
        }
    }

    fn add(&mut self, p: impl Into<PathBuf>) -> PathBuf {
        let p = p.into();
        self.paths.push(p.clone());
        p
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.paths {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn read_pairs(images: &[PathBuf], annotations: &[PathBuf]) -> Result<(Vec<Image>, Vec<LabelMap>)> {
    let mut imgs = Vec::with_capacity(images.len());
    let mut anns = Vec::with_capacity(images.len());
    for (ip, ap) in images.iter().zip(annotations) {
        let img = load_image(ip)?;
        let ann = load_label_map(ap)?;
        if img.dims() != ann.dims() {
            bail!(
                "{}: annotation is {}x{} but image {} is {}x{}",
                ap.display(),
                ann.width(),
                ann.height(),
                ip.display(),
                img.width(),
                img.height()
            );
        }
        if ann.max_label() == 0 {
            bail!("{}: annotation contains no cells", ap.display());
        }
        imgs.push(img);
        anns.push(ann);
    }
    Ok((imgs, anns))
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    if args.images.len() != args.annotations.len() {
        bail!(
            "{} images but {} annotations",
            args.images.len(),
            args.annotations.len()
        );
    }
    let (mut images, mut annotations) = (Vec::new(), Vec::new());
    for (i, a) in args.images.iter().zip(&args.annotations) {
        if args.exclude_annotation.iter().any(|x| same_file(x, a)) {
            eprintln!("excluding {}", a.display());
            continue;
        }
        images.push(i.clone());
        annotations.push(a.clone());
    }
    if images.is_empty() {
        bail!("no training pairs left after exclusions");
    }
    let (imgs, anns) = read_pairs(&images, &annotations)?;
    let outcome = pipeline::train(&imgs, &anns, &cfg, args.cv_folds)?;

    let mut out = Outputs::new();
    save_model(&outcome.model, out.add(format!("{}.frn", args.out)))?;
    println!(
        "samples: interior={} border={} exterior={} (x{} orientations)",
        outcome.sample_counts[0], outcome.sample_counts[1], outcome.sample_counts[2], cfg.fern.orientations
    );
    if let Some(cv) = &outcome.cv {
        println!(
            "cv: folds={} accuracy_mean={:.4} accuracy_std={:.4}",
            cv.fold_accuracy.len(),
            cv.mean_accuracy,
            cv.std_accuracy
        );
        let doc = serde_json::json!({
            "fold_accuracy": cv.fold_accuracy,
            "accuracy_mean": cv.mean_accuracy,
            "accuracy_std": cv.std_accuracy,
            "confusion": cv.pooled().counts,
        });
        let path = out.add(format!("{}.cv.json", args.out));
        fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    out.commit();
    Ok(())
}

fn image_prefix(out: &str, image: &Path, multiple: bool) -> String {
    if multiple {
        let stem = image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        format!("{out}.{stem}")
    } else {
        out.to_string()
    }
}

fn cmd_segment(args: SegmentArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    let model = load_model(&args.model)?;
    let multiple = args.images.len() > 1;
    let mut out = Outputs::new();
    for path in &args.images {
        let image = load_image(path)?;
        let seeds = match &args.seeds_file {
            Some(s) => Some(load_seeds(s, image.width(), image.height())?),
            None => None,
        };
        let seg = pipeline::segment(&model, &image, &cfg, seeds)
            .with_context(|| format!("segmenting {}", path.display()))?;
        let prefix = image_prefix(&args.out, path, multiple);

        let labels = seg.labeling.to_label_map();
        save_label_map(&labels, out.add(format!("{prefix}.labels.png")))?;
        let rgb = pipeline::overlay_rgb(&image, &seg.labeling, args.alpha)?;
        save_rgb_png(image.width(), image.height(), rgb, out.add(format!("{prefix}.overlay.png")))?;
        let trace = out.add(format!("{prefix}.trace.csv"));
        fs::write(&trace, seg.trace_csv()).with_context(|| format!("writing {}", trace.display()))?;
        if args.dump {
            for (grid, name, previews) in [
                (score_grid(&seg.scores), "scores", 3),
                (data_cost_grid(&seg.energy), "datacost", 1),
                (weight_grid(&seg.energy), "weights", 1),
            ] {
                for p in write_dump(&grid, &prefix, name, previews)? {
                    out.add(p);
                }
            }
        }
        let used = seg.labeling.used_labels();
        println!(
            "{}: seeds={} cells={} energy={:.4} sweeps={}",
            path.display(),
            seg.seeds.len(),
            used.iter().filter(|&&l| l != 0).count(),
            seg.trace.last().copied().unwrap_or(f64::NAN),
            seg.trace.len() - 1
        );
    }
    out.commit();
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let pred = load_label_map(&args.predicted)?;
    let truth = load_label_map(&args.truth)?;
    let m = segmentation_metrics(&pred, &truth)
        .with_context(|| format!("comparing {} with {}", args.predicted.display(), args.truth.display()))?;
    let report = MetricsReport::from_metrics(&m);
    if args.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
    }
    if let Some(prefix) = args.out {
        let mut out = Outputs::new();
        let txt = out.add(format!("{prefix}.metrics.txt"));
        fs::write(&txt, report.to_text()).with_context(|| format!("writing {}", txt.display()))?;
        let json = out.add(format!("{prefix}.metrics.json"));
        fs::write(&json, report.to_json() + "\n").with_context(|| format!("writing {}", json.display()))?;
        out.commit();
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut p = SceneParams::default();
    macro_rules! apply {
        ($($f:ident),*) => { $( if let Some(v) = args.$f { p.$f = v; } )* };
    }
    apply!(width, height, min_cells, max_cells, min_radius, max_radius, noise_sigma, blur_sigma);
    let scene = generate_scene(&p, args.rng_seed)?;
    let mut out = Outputs::new();
    save_image_png16(&scene.image, out.add(format!("{}.png", args.out)))?;
    save_label_map(&scene.ground_truth, out.add(format!("{}.gt.png", args.out)))?;
    println!(
        "{}x{} scene with {} cells",
        p.width,
        p.height,
        scene.ground_truth.max_label()
    );
    out.commit();
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> Result<()> {
    if args.default_config {
        print!("{}", PipelineConfig::default().to_text());
        return Ok(());
    }
    let path = args.path.ok_or_else(|| anyhow!("give a file to inspect or --default-config"))?;
    let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(MODEL_MAGIC) {
        let model = load_model(&path)?;
        println!("model {}", path.display());
        println!("ferns (N) = {}", model.num_ferns());
        println!("tests per fern (S) = {}", model.tests_per_fern());
        println!("window radius (l) = {}", model.window_radius());
        println!("trained = {}", model.is_trained());
        let ent = model.class_entropies();
        println!("mean table entropy per class (nats, max {:.4}):", model.tests_per_fern() as f64 * std::f64::consts::LN_2);
        for c in PixelClass::ALL {
            println!("  {:<9} {:.4}", c.name(), ent[c.index()]);
        }
    } else if bytes.starts_with(&GRID_MAGIC) {
        let grid = Grid::from_bytes(&bytes).with_context(|| format!("reading {}", path.display()))?;
        println!("grid {} {}x{} channels={}", path.display(), grid.width, grid.height, grid.channels);
        for c in 0..grid.channels {
            let (lo, hi) = grid.range(c);
            let ch = grid.channel(c);
            let mean = ch.iter().map(|&v| v as f64).sum::<f64>() / ch.len().max(1) as f64;
            println!("  channel {c}: min={lo:.6} max={hi:.6} mean={mean:.6}");
        }
    } else {
        bail!("{}: neither a model nor a grid dump", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
