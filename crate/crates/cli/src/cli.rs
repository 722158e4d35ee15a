//! Argument parsing and subcommand implementations for the `assa` binary.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use assa_core::checkpoint;
use assa_core::datagen::{make_dataset, nearest_centroid_accuracy, DatasetKind, DatasetSpec};
use assa_core::network::{evaluate, scale_depth, scale_width, train, Backbone, Clock, TrainReport};
use assa_core::profiler::{count_backbone_flops, count_sa_flops, extract_feature_patterns, Bucket, FlopsReport, PatternConfig};
use assa_core::sa::{SaConfig, SaKind};
use clap::{Args, Parser, Subcommand};

use crate::config::{default_backbone, parse_kind, FileConfig};
use crate::equiv::{run_suite, TOLERANCE};
use crate::io::{read_split, write_dataset};
use crate::latency::{measure_latency, write_csv, LatencyReport, SaBench, DEFAULT_RUNS, DEFAULT_WARMUP};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "assa", version, about = "Set-abstraction kernels: benchmarks, FLOP counts, checks and toy training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time one set-abstraction module split into subsampling, grouping and computation.
    Bench(BenchArgs),
    /// Analytic multiply-add counts per bucket.
    Flops(FlopsArgs),
    /// Check that pre-conv and vanilla blocks agree on random instances.
    EquivCheck(EquivArgs),
    /// Train a classifier on a dataset directory.
    Train(TrainArgs),
    /// Accuracy of a checkpoint on one split.
    Eval(EvalArgs),
    /// Write a synthetic dataset.
    GenData(GenArgs),
    /// Dump voxelized point patterns that drive first-stage neurons.
    Patterns(PatternArgs),
}

fn kind_arg(s: &str) -> Result<SaKind, String> {
    parse_kind(s).map_err(|e| e.to_string())
}

fn sizes_arg(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 4 => Ok(n),
        _ => Err(format!("invalid size {s:?}: expected an integer >= 4")),
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_parser = kind_arg, default_value = "vanilla")]
    pub variant: SaKind,
    /// Second variant timed on the same inputs; adds speedup columns.
    #[arg(long, value_parser = kind_arg)]
    pub compare: Option<SaKind>,
    #[arg(long, value_delimiter = ',', value_parser = sizes_arg, default_value = "1024,4096,10000,15000")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    pub runs: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    pub warmup: usize,
    /// Input and output channels of the block.
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 32)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long, default_value_t = 0.2)]
    pub radius: f64,
    /// CSV destination for the primary variant.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "ASSA_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FlopsArgs {
    #[arg(long, value_parser = kind_arg, default_value = "assa")]
    pub variant: SaKind,
    /// Channel width `C`.
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    /// Points `N`.
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    /// Count the four-stage backbone with initial width `--width` instead of one block.
    #[arg(long)]
    pub backbone: bool,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
}

#[derive(Debug, Args)]
pub struct EquivArgs {
    /// Number of random instances.
    #[arg(long, default_value_t = 100)]
    pub seeds: usize,
    /// Feed neighbor offsets to the vanilla block (the check is then expected to fail).
    #[arg(long)]
    pub edge_concat: bool,
    #[arg(long, env = "ASSA_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = kind_arg)]
    pub variant: Option<SaKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, env = "ASSA_SEED")]
    pub seed: Option<u64>,
    /// Multiplies the initial width `C`.
    #[arg(long)]
    pub scale_width: Option<usize>,
    /// Sets the blocks per stage `D`.
    #[arg(long)]
    pub scale_depth: Option<usize>,
    #[arg(long, default_value = "model.ckpt")]
    pub out: PathBuf,
    /// Per-epoch CSV report.
    #[arg(long, default_value = "train_report.csv")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub per_class: usize,
    /// Fraction of each class used for training.
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long, default_value_t = 512)]
    pub points: usize,
    #[arg(long, default_value_t = 0.005)]
    pub noise: f64,
    /// Surfaces that share a centroid and differ only in local orientation.
    #[arg(long)]
    pub aniso: bool,
    #[arg(long, env = "ASSA_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PatternArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "train")]
    pub split: String,
    #[arg(long, default_value_t = 8)]
    pub neurons: usize,
    #[arg(long, default_value_t = 20)]
    pub top_m: usize,
    #[arg(long, default_value_t = 0.05)]
    pub voxel: f64,
    #[arg(long, default_value_t = 0.3)]
    pub keep: f64,
    /// Vote with absolute positions rather than offsets from each sampled center.
    #[arg(long)]
    pub absolute: bool,
    #[arg(long, default_value = "patterns")]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run_from<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

pub fn run(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Bench(a) => bench(a),
        Command::Flops(a) => flops(a),
        Command::EquivCheck(a) => equiv_check(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::GenData(a) => gen_data(a),
        Command::Patterns(a) => patterns(a),
    }
}

fn bench_one(a: &BenchArgs, kind: SaKind) -> Result<Vec<LatencyReport>> {
    let mut b = SaBench::new(kind);
    b.width = a.width;
    b.k = a.k;
    b.mlp_layers = a.layers;
    b.radius = a.radius;
    b.seed = a.seed;
    b.block_config().validate()?;
    measure_latency(&mut b, &a.sizes, a.runs, a.warmup)
}

fn bench(a: BenchArgs) -> Result<i32> {
    let main = bench_one(&a, a.variant)?;
    let other = a.compare.map(|k| bench_one(&a, k)).transpose()?;
    if let Some(path) = &a.out {
        let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_csv(std::io::BufWriter::new(f), &main)?;
    }
    let mut out = std::io::stdout().lock();
    write!(out, "{:>8} {:>14} {:>14} {:>14} {:>14}", "N", "subsample_us", "grouping_us", "compute_us", "total_us")?;
    if let Some(k) = a.compare {
        write!(out, " {:>16} {:>12} {:>12}", format!("{}_total_us", k.name()), "speedup", "compute_x")?;
    }
    writeln!(out)?;
    for (i, r) in main.iter().enumerate() {
        write!(
            out,
            "{:>8} {:>14.1} {:>14.1} {:>14.1} {:>14.1}",
            r.input_size,
            r.bucket(Bucket::Subsampling).mean_us,
            r.bucket(Bucket::Grouping).mean_us,
            r.bucket(Bucket::Computation).mean_us,
            r.total.mean_us
        )?;
        if let Some(o) = other.as_ref().map(|o| &o[i]) {
            let speedup = o.total.mean_us / r.total.mean_us;
            let compute = o.bucket(Bucket::Computation).mean_us / r.bucket(Bucket::Computation).mean_us;
            write!(out, " {:>16.1} {:>12.2} {:>12.2}", o.total.mean_us, speedup, compute)?;
        }
        writeln!(out)?;
        for n in &r.notes {
            writeln!(out, "    note: {n}")?;
        }
    }
    writeln!(out, "variant={} runs={} warmup={} threads=1", a.variant.name(), a.runs, a.warmup)?;
    Ok(EXIT_OK)
}

fn print_flops(out: &mut impl Write, r: &FlopsReport) -> Result<()> {
    writeln!(out, "{:>6} {:>14} {:>14} {:>14} {:>14} {:>14} {:>16}", "part", "pre_mlp", "gather", "reduction", "post_mlp", "shortcut", "total")?;
    for (i, s) in r.stages.iter().enumerate() {
        writeln!(
            out,
            "{:>6} {:>14} {:>14} {:>14} {:>14} {:>14} {:>16}",
            i,
            s.pre_mlp,
            s.grouping_gather,
            s.reduction,
            s.post_mlp,
            s.shortcut,
            s.total()
        )?;
    }
    let t = &r.totals;
    writeln!(
        out,
        "{:>6} {:>14} {:>14} {:>14} {:>14} {:>14} {:>16}",
        "all",
        t.pre_mlp,
        t.grouping_gather,
        t.reduction,
        t.post_mlp,
        t.shortcut,
        t.total()
    )?;
    writeln!(out, "norm+activation (excluded): {}", r.norm_activation)?;
    writeln!(out, "ratio_vs_vanilla: {:.4}", r.ratio_vs_vanilla)?;
    writeln!(out, "measured_ratio: {:.4}", r.measured_ratio)?;
    Ok(())
}

fn flops(a: FlopsArgs) -> Result<i32> {
    let report = if a.backbone {
        let cfg = backbone_for(a.variant, a.width, a.depth, a.layers, a.k);
        count_backbone_flops(&cfg, a.n)?
    } else {
        let cfg = SaConfig { mlp_layers: a.layers, k: a.k, ..SaConfig::new(a.variant, a.width, a.width) };
        count_sa_flops(&cfg, a.n, a.k)?
    };
    print_flops(&mut std::io::stdout().lock(), &report)?;
    Ok(EXIT_OK)
}

fn backbone_for(kind: SaKind, c: usize, d: usize, l: usize, k: usize) -> assa_core::network::BackboneConfig {
    let mut cfg = default_backbone(kind);
    cfg.initial_width = c;
    cfg.depth = d;
    cfg.mlp_layers = l;
    cfg.stage_k = [k; 4];
    cfg
}

fn equiv_check(a: EquivArgs) -> Result<i32> {
    let report = run_suite(a.seeds, a.seed, a.edge_concat)?;
    println!("instances: {}", report.instances.len());
    println!("max_abs_diff: {:e}", report.max_abs_diff());
    if report.passed() {
        println!("ok: all within {TOLERANCE:e}");
        Ok(EXIT_OK)
    } else {
        if let Some(w) = report.worst() {
            println!(
                "worst: seed={} n={} queries={} in_ch={} out_ch={} k={} layers={} radius={:.4} diff={:e}",
                w.seed, w.n, w.queries, w.in_ch, w.out_ch, w.k, w.mlp_layers, w.radius, w.max_abs_diff
            );
        }
        println!("FAILED: difference above {TOLERANCE:e}");
        Ok(EXIT_FAILURE)
    }
}

struct WallClock(Instant);

impl Clock for WallClock {
    fn now_secs(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub fn write_report(path: &Path, report: &TrainReport) -> Result<()> {
    let mut s = String::from("epoch,train_loss,train_acc,test_acc,wall_secs\n");
    for e in &report.epochs {
        s.push_str(&format!("{},{:.6},{:.4},{:.4},{:.3}\n", e.epoch, e.train_loss, e.train_acc, e.test_acc, e.wall_secs));
    }
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn train_cmd(a: TrainArgs) -> Result<i32> {
    let file = match &a.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut cfg = file.backbone()?;
    if let Some(k) = a.variant {
        let mut fresh = default_backbone(k);
        fresh.initial_width = cfg.initial_width;
        fresh.depth = cfg.depth;
        fresh.mlp_layers = cfg.mlp_layers;
        fresh.num_classes = cfg.num_classes;
        cfg = fresh;
    }
    if let Some(f) = a.scale_width {
        cfg = scale_width(&cfg, cfg.initial_width * f)?;
    }
    if let Some(d) = a.scale_depth {
        cfg = scale_depth(&cfg, d)?;
    }
    let mut tc = file.train();
    if let Some(v) = a.epochs {
        tc.epochs = v;
    }
    if let Some(v) = a.lr {
        tc.lr = v;
    }
    if let Some(v) = a.batch_size {
        tc.batch_size = v;
    }
    if let Some(v) = a.seed {
        tc.seed = v;
    }
    let train_set = read_split(&a.data, "train")?;
    let test_set = read_split(&a.data, "test")?;
    let mut model = Backbone::<f32>::new(cfg, tc.seed)?;
    let report = train(&mut model, &train_set, &test_set, &tc, &mut WallClock(Instant::now()))?;
    for e in &report.epochs {
        println!(
            "epoch {:>3} loss {:.4} train_acc {:.4} test_acc {:.4} ({:.1}s)",
            e.epoch, e.train_loss, e.train_acc, e.test_acc, e.wall_secs
        );
    }
    fs::write(&a.out, checkpoint::encode(&mut model)?).with_context(|| format!("writing {}", a.out.display()))?;
    write_report(&a.report, &report)?;
    println!("test_acc: {:.4}", report.final_test_acc().unwrap_or(0.0));
    Ok(EXIT_OK)
}

fn load_model(path: &Path) -> Result<Backbone<f32>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(checkpoint::decode(&bytes)?)
}

fn eval_cmd(a: EvalArgs) -> Result<i32> {
    let mut model = load_model(&a.checkpoint)?;
    let data = read_split(&a.data, &a.split)?;
    let acc = evaluate(&mut model, &data, a.batch_size)?;
    println!("{}_acc: {acc:.4}", a.split);
    Ok(EXIT_OK)
}

fn gen_data(a: GenArgs) -> Result<i32> {
    let kind = if a.aniso { DatasetKind::Anisotropic } else { DatasetKind::Shapes };
    let spec = DatasetSpec { points: a.points, noise_sigma: a.noise, ..DatasetSpec::new(kind, a.per_class, a.split, a.seed) };
    let (train_set, test_set) = make_dataset::<f32>(&spec)?;
    let names: Vec<&str> = kind.classes().iter().map(|k| k.name()).collect();
    write_dataset(&a.out, &names, &train_set, &test_set)?;
    println!("wrote {} train / {} test clouds to {}", train_set.len(), test_set.len(), a.out.display());
    println!("nearest_centroid_acc: {:.4}", nearest_centroid_accuracy(&train_set, &test_set)?);
    Ok(EXIT_OK)
}

fn patterns(a: PatternArgs) -> Result<i32> {
    let mut model = load_model(&a.checkpoint)?;
    let data = read_split(&a.data, &a.split)?;
    let cfg = PatternConfig {
        neurons: a.neurons,
        top_m: a.top_m,
        voxel_size: a.voxel,
        keep_fraction: a.keep,
        local: !a.absolute,
    };
    let found = extract_feature_patterns(&mut model, &data, &cfg)?;
    fs::create_dir_all(&a.out)?;
    for p in &found {
        if let Some(w) = &p.warning {
            eprintln!("warning: {w}");
            continue;
        }
        let mut s = String::from("x,y,z\n");
        for q in &p.points {
            s.push_str(&format!("{},{},{}\n", q[0], q[1], q[2]));
        }
        fs::write(a.out.join(format!("neuron_{:03}.csv", p.neuron)), s)?;
        println!("neuron {:>3}: {:>5} points, compactness {:.3}", p.neuron, p.points.len(), p.compactness());
    }
    Ok(EXIT_OK)
}
