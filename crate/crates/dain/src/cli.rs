//! The `dain` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dain_core::data::{fingerprint, generate_synthetic, make_splits, SplitSpec, BASE_THETAS};
use dain_core::gradsuite;

use crate::checkpoint::load_checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{read_json, write_bytes, write_dait, write_json, write_png};
use crate::run::{self, RunMetrics};
use crate::tree::{open_dataset, scan_gtos, write_tree, INDEX_FILE};

#[derive(Debug, Parser)]
#[command(name = "dain", version, about = "Differential angular imaging networks", arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags every configurable subcommand shares.
#[derive(Debug, Args)]
pub struct Common {
    /// JSON file of flat config keys (a run's config.json also works).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Threads for image IO and differential computation.
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub workers: usize,
    /// `key=value` config overrides, applied last.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// Flags mirroring network and schedule keys.
#[derive(Debug, Args)]
pub struct NetFlags {
    #[arg(long, value_name = "single|final|intermediate|dain")]
    pub fusion_arch: Option<String>,
    #[arg(long, value_name = "sum|max")]
    pub fusion_op: Option<String>,
    #[arg(long, value_name = "voting|pooling|filter3d")]
    pub combiner: Option<String>,
    #[arg(long, value_name = "single|multiview")]
    pub eval_mode: Option<String>,
    #[arg(long, value_name = "N")]
    pub eval_views: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub n_views: Option<usize>,
    #[arg(long, value_name = "desk|paper")]
    pub schedule: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic dataset tree with its index.json.
    Gen {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Index a class/instance/condition/view tree into a JSON file.
    Scan {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Compute differential images (DAIT tensors) and a summary.
    Diff {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Also write PNG previews with zero mapped to mid-gray.
        #[arg(long)]
        preview: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Write split{0..n}.json train/test partitions.
    Split {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_name = "N")]
        n: Option<usize>,
        #[arg(long, value_name = "FRAC")]
        train_frac: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Train one network and evaluate it into a run directory.
    Train {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Split file; defaults to split `split_id` generated from the config.
        #[arg(long, value_name = "FILE")]
        split: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long)]
        dry_run: bool,
        #[command(flatten)]
        net: NetFlags,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint; writes metrics.json and report.txt.
    Eval {
        #[arg(long, value_name = "DIR")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, value_name = "FILE")]
        split: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long)]
        dry_run: bool,
        #[command(flatten)]
        net: NetFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Aggregate run directories into report.json and report.txt.
    Report {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_name = "U64", default_value_t = 0)]
        seed: u64,
        #[arg(value_name = "RUN_DIR", required = true)]
        runs: Vec<PathBuf>,
    },
    /// Run the gradient-check suite; exit 0 when every entry passes.
    Gradcheck {
        #[arg(long, value_name = "U64", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        instances: usize,
        /// Coordinates sampled per tensor.
        #[arg(long, default_value_t = 24)]
        samples: usize,
    },
}

/// Parses `argv` (program name first), runs it and returns the exit code.
pub fn dispatch<I, T>(argv: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    let _ = e.print();
                    1
                }
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve(common: &Common, flags: Vec<String>) -> Result<RunConfig> {
    let mut ov = Vec::new();
    if let Some(s) = common.seed {
        ov.push(format!("seed={s}"));
    }
    ov.extend(flags);
    ov.extend(common.overrides.iter().cloned());
    RunConfig::resolve(common.config.as_deref(), &ov)
}

fn push<T: ToString>(out: &mut Vec<String>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        out.push(format!("{key}={}", v.to_string()));
    }
}

fn net_flags(n: &NetFlags) -> Vec<String> {
    let mut v = Vec::new();
    push(&mut v, "fusion_arch", &n.fusion_arch);
    push(&mut v, "fusion_op", &n.fusion_op);
    push(&mut v, "combiner", &n.combiner);
    push(&mut v, "eval_mode", &n.eval_mode);
    push(&mut v, "eval_views", &n.eval_views);
    v
}

fn train_flags(t: &TrainFlags) -> Vec<String> {
    let mut v = Vec::new();
    push(&mut v, "epochs", &t.epochs);
    push(&mut v, "lr", &t.lr);
    push(&mut v, "batch_size", &t.batch_size);
    push(&mut v, "n_views", &t.n_views);
    push(&mut v, "schedule", &t.schedule);
    v
}

fn load_split(path: Option<&Path>, ds: &dain_core::data::Dataset, cfg: &RunConfig) -> Result<SplitSpec> {
    let split = match path {
        Some(p) => read_json::<SplitSpec>(p)?,
        None => run::default_split(ds, cfg)?,
    };
    split.validate(&ds.index).map_err(|e| Error::Data(format!("split {}: {e}", split.split_id)))?;
    Ok(split)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    let say = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(Error::io("<stdout>"));
    match command {
        Command::Gen { out: dir, common } => {
            let cfg = resolve(&common, vec![])?;
            let ds = generate_synthetic(&cfg.synth())?;
            let index = write_tree(&dir, &ds, common.workers)?;
            write_json(&dir.join(INDEX_FILE), &index)?;
            say(out, format!("wrote {} images of {} instances to {}", ds.image_count(), index.instances.len(), dir.display()))?;
        }
        Command::Scan { data, out: file } => {
            let index = scan_gtos(&data)?;
            for w in &index.warnings {
                log::warn!("{w}");
            }
            write_json(&file, &index)?;
            let incomplete = index.instances.iter().filter(|i| i.incomplete).count();
            say(
                out,
                format!("{} classes, {} instances ({} incomplete), {} warnings", index.classes.len(), index.instances.len(), incomplete, index.warnings.len()),
            )?;
        }
        Command::Diff { data, out: dir, preview, common } => {
            let cfg = resolve(&common, vec![])?;
            let ds = open_dataset(&data, common.workers)?;
            let diffs = run::differentials(&ds, &cfg, common.workers)?;
            let mut pairs = 0usize;
            let mut sum_abs = 0.0;
            for (i, inst) in ds.index.instances.iter().enumerate() {
                for (il, cond) in ds.index.illuminations.iter().enumerate() {
                    for (t, theta) in BASE_THETAS.iter().enumerate() {
                        let Some(img) = diffs.get(i, il, t) else { continue };
                        let stem = dir.join(&inst.class_name).join(&inst.instance_id).join(cond).join(format!("theta{theta:+03}"));
                        write_dait(&stem.with_extension("dait"), &img.to_tensor())?;
                        if preview {
                            let mut gray = img.clone();
                            gray.data_mut().iter_mut().for_each(|v| *v = 0.5 + 0.5 * *v);
                            write_png(&stem.with_extension("png"), &gray)?;
                        }
                        pairs += 1;
                        sum_abs += img.mean_abs();
                    }
                }
            }
            let summary = serde_json::json!({
                "pairs": pairs,
                "aligned": cfg.align,
                "mean_abs": if pairs > 0 { sum_abs / pairs as f64 } else { 0.0 },
                "alignment_failures": diffs.alignment_failures,
            });
            write_json(&dir.join("summary.json"), &summary)?;
            say(out, format!("{pairs} differential images, {} alignment fallbacks", diffs.alignment_failures.len()))?;
        }
        Command::Split { data, out: dir, n, train_frac, common } => {
            let mut flags = Vec::new();
            push(&mut flags, "n_splits", &n);
            push(&mut flags, "train_frac", &train_frac);
            let cfg = resolve(&common, flags)?;
            let index = if data.join(INDEX_FILE).is_file() { read_json(&data.join(INDEX_FILE))? } else { scan_gtos(&data)? };
            let splits = make_splits(&index, &cfg.split())?;
            for s in &splits {
                write_json(&dir.join(format!("split{}.json", s.split_id)), s)?;
                let sizes: Vec<String> = s.classes.iter().map(|c| format!("{} {}/{}", c.class, c.train.len(), c.test.len())).collect();
                say(out, format!("split{}: {}", s.split_id, sizes.join(", ")))?;
            }
            if let Some(s) = splits.first() {
                if !s.excluded_classes.is_empty() {
                    say(out, format!("excluded: {}", s.excluded_classes.join(", ")))?;
                }
            }
        }
        Command::Train { data, split, out: dir, dry_run, net, train, common } => {
            let mut flags = net_flags(&net);
            flags.extend(train_flags(&train));
            let cfg = resolve(&common, flags)?;
            if dry_run {
                print_plan(out, &cfg, Some(&dir))?;
                return Ok(0);
            }
            let ds = open_dataset(&data, common.workers)?;
            let split = load_split(split.as_deref(), &ds, &cfg)?;
            let diffs = run::differentials(&ds, &cfg, common.workers)?;
            let prepared = run::prepare(&ds, &diffs, &split, &cfg)?;
            let trained = run::train(&cfg, &prepared)?;
            let mut network = trained.network.clone();
            let metrics = run::evaluate_run(&mut network, &prepared, &split, &cfg)?;
            run::write_run_dir(&dir, &cfg, &split, &trained, &metrics)?;
            say(out, summary_line(&metrics))?;
        }
        Command::Eval { checkpoint, data, split, out: dir, dry_run, net, common } => {
            let cfg = resolve(&common, net_flags(&net))?;
            if dry_run {
                print_plan(out, &cfg, Some(&dir))?;
                return Ok(0);
            }
            let (mut network, _) = load_checkpoint(&checkpoint)?;
            let mut spec = network.spec().clone();
            spec.combiner = cfg.combiner;
            network = rebuild_with(network, spec)?;
            let ds = open_dataset(&data, common.workers)?;
            let split = load_split(split.as_deref(), &ds, &cfg)?;
            let diffs = run::differentials(&ds, &cfg, common.workers)?;
            let prepared = run::prepare(&ds, &diffs, &split, &cfg)?;
            let metrics = run::evaluate_run(&mut network, &prepared, &split, &cfg)?;
            run::write_metrics(&dir, &metrics)?;
            say(out, summary_line(&metrics))?;
        }
        Command::Report { out: dir, seed, runs } => {
            let mut results = Vec::new();
            let mut classes: Option<Vec<String>> = None;
            let mut hashes = Vec::new();
            for r in &runs {
                let m: RunMetrics = read_json(&r.join("metrics.json"))?;
                match &classes {
                    None => classes = Some(m.classes.clone()),
                    Some(c) if *c != m.classes => {
                        return Err(Error::Data(format!("{}: class list differs from the first run", r.display())));
                    }
                    _ => {}
                }
                hashes.push(m.config_hash.clone());
                results.push(m.result);
            }
            hashes.sort();
            let hash = format!("{:016x}", fingerprint(hashes.join(",").as_bytes()));
            let report = run::report(&results, &classes.unwrap_or_default(), &hash, seed);
            write_json(&dir.join("report.json"), &report)?;
            let text = report.to_text();
            write_bytes(&dir.join("report.txt"), text.as_bytes())?;
            write!(out, "{text}").map_err(Error::io("<stdout>"))?;
        }
        Command::Gradcheck { seed, instances, samples } => {
            if instances == 0 || samples == 0 {
                return Err(Error::Usage("instances and samples must be positive".into()));
            }
            let entries = gradsuite::run(seed, instances, samples)?;
            let width = entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
            for e in &entries {
                say(
                    out,
                    format!(
                        "{:width$}  max rel error {:.3e}  checked {:6}  kinks skipped {:4}  {}",
                        e.name,
                        e.max_rel_error,
                        e.checked,
                        e.nonsmooth,
                        if e.passed() { "ok" } else { "FAIL" }
                    ),
                )?;
            }
            let failed = entries.iter().filter(|e| !e.passed()).count();
            say(out, format!("{} of {} entries below {:.0e}", entries.len() - failed, entries.len(), gradsuite::MAX_REL_ERROR))?;
            return Ok(if failed == 0 { 0 } else { 2 });
        }
    }
    Ok(0)
}

/// Swaps the combiner of a loaded network, keeping every parameter.
fn rebuild_with(network: dain_core::net::Network<f32>, spec: dain_core::net::NetworkSpec) -> Result<dain_core::net::Network<f32>> {
    if *network.spec() == spec {
        return Ok(network);
    }
    let mut rebuilt = dain_core::net::Network::build(&spec, &dain_core::Rng::new(0))?;
    rebuilt.load_values(&network.named_values())?;
    Ok(rebuilt)
}

fn summary_line(m: &RunMetrics) -> String {
    format!("{}: split {} seed {} accuracy {:.4} ({}/{})", m.label, m.result.split_id, m.result.seed, m.result.accuracy, m.correct, m.total)
}

fn print_plan(out: &mut dyn Write, cfg: &RunConfig, dir: Option<&Path>) -> Result<()> {
    let spec = cfg.network_spec(cfg.classes);
    let train = cfg.train_config();
    let mut s = String::new();
    use std::fmt::Write as _;
    writeln!(s, "config {}", cfg.hash()).unwrap();
    writeln!(s, "network {} ({} parameters at {} classes)", spec.describe(), parameter_count(&spec)?, cfg.classes).unwrap();
    for (i, st) in train.stages.iter().enumerate() {
        writeln!(s, "stage {i}: {:?} lr {} {:?}", st.scope, st.base_lr, st.length).unwrap();
    }
    writeln!(s, "batch {} momentum {} samples/instance {} views {}", train.batch_size, train.momentum, train.samples_per_instance, train.n_views).unwrap();
    writeln!(s, "eval {:?}", cfg.eval_mode()).unwrap();
    if let Some(d) = dir {
        writeln!(s, "output {}", d.display()).unwrap();
    }
    writeln!(s, "{}", serde_json::to_string_pretty(cfg).expect("serializable")).unwrap();
    out.write_all(s.as_bytes()).map_err(Error::io("<stdout>"))
}

fn parameter_count(spec: &dain_core::net::NetworkSpec) -> Result<usize> {
    Ok(dain_core::net::Network::<f32>::build(spec, &dain_core::Rng::new(0))?.parameter_count())
}
