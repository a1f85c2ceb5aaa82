//! Command-line surface: synth, analyze, cluster, train, eval, ablate.
//!
//! Every command writes its primary outputs plus a run manifest listing the
//! configuration, seeds, and a SHA-256 digest of every input and output
//! file. All randomness flows from explicit `--seed` flags, so re-running a
//! command with identical flags and inputs reproduces identical outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    compute_stats_by_dataset, export_pose_features, view_histogram, FeatureMode,
};
use crate::body_frame::{compute_body_frame, viewpoint_from_frame};
use crate::heads_losses::{LossMode, LossWeights};
use crate::metrics::EvalReport;
use crate::skeleton::{read_jsonl, write_jsonl, PoseRecord};
use crate::synth::{generate, profile_by_name, SynthConfig};
use crate::toy_net::{
    evaluate, forward, keypoint_features, prepare_samples, train_samples, Checkpoint,
    ToyNet, ToyNetConfig, TrainConfig,
};
use crate::view_cluster::{fit_scoped, ClusterModel, ClusterScope};
use crate::{Error, Result};

/// Digest of one file referenced by a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Record of one CLI invocation: configuration snapshot, seeds, and
/// digests of every input and output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_time_s: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn digest_files(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

/// Writes the manifest next to the primary output (or into the output
/// directory), validating every declared output by hashing it.
fn write_manifest(
    manifest_path: &Path,
    command: &str,
    config: serde_json::Value,
    seeds: Vec<u64>,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
    started: Instant,
) -> Result<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        config,
        seeds,
        inputs: digest_files(inputs)?,
        outputs: digest_files(outputs)?,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let file = std::fs::File::create(manifest_path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &manifest)?;
    Ok(())
}

fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

#[derive(Parser, Debug)]
#[command(
    name = "viewbias",
    about = "Body-centered viewpoint geometry, quaternion clustering, and \
             viewpoint-aware pose training on synthetic datasets",
    long_about = None,
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset as JSONL pose records.
    ///
    /// Record format, one JSON object per line: {"dataset", "subject",
    /// "frame", "intrinsics": {"fx","fy","cx","cy"}, "joints3d":
    /// [[x,y,z] x 14] (mm, camera frame), "joints2d": [[u,v] x 14] (px),
    /// "pelvis_synthesized"}.
    Synth(SynthArgs),
    /// Dataset statistics, viewpoint histograms, and pose-feature export.
    Analyze(AnalyzeArgs),
    /// Fit k-means viewpoint clusters and write the model JSON
    /// {"k","seed","scope","inertia","centers": [[w,x,y,z] x k]}.
    Cluster(ClusterArgs),
    /// Train the keypoint-to-pose network, with or without the viewpoint
    /// loss; writes a checkpoint JSON and a loss-curve CSV.
    Train(TrainArgs),
    /// Evaluate a checkpoint on test sets; writes an MPJPE/PA-MPJPE/PCK3D
    /// grid CSV and a JSON report with per-joint detail.
    Eval(EvalArgs),
    /// Run an ablation sweep (cluster count, k-means restarts, loss mode,
    /// cluster scope, canonical-pose head) and write one CSV row per run.
    Ablate(AblateArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Bias profile: h36m-like, gpa-like, surreal-like, 3dpw-like, 3dhp-like.
    #[arg(long)]
    pub profile: String,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSONL path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Input JSONL files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Feature matrices to export: a mode name or "all". Repeatable.
    /// Modes: root-relative, root-relative+size-normalized, body-centered,
    /// body-centered+size-normalized.
    #[arg(long)]
    pub features: Vec<String>,
    /// Azimuth histogram bins.
    #[arg(long, default_value_t = 36)]
    pub azimuth_bins: usize,
    /// Elevation histogram bins.
    #[arg(long, default_value_t = 18)]
    pub elevation_bins: usize,
    /// Also write the joint azimuth x elevation grid per dataset.
    #[arg(long)]
    pub grid: bool,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    /// Input JSONL files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Number of clusters.
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// "global" (pool all datasets) or "local:<dataset>".
    #[arg(long, default_value = "global")]
    pub scope: String,
    /// Output model JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training JSONL file.
    #[arg(long)]
    pub train: PathBuf,
    /// Cluster model JSON; required for modes C and C+R.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    /// Loss mode: C, R, C+R, or baseline (no viewpoint loss).
    #[arg(long, default_value = "C")]
    pub mode: String,
    /// Weight of the viewpoint loss.
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 25)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Hidden layer widths, comma separated.
    #[arg(long, default_value = "256,256")]
    pub hidden: String,
    /// Add the canonical-pose third head.
    #[arg(long)]
    pub canonical_head: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output checkpoint JSON path; the loss curve goes to
    /// <out>.losses.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint JSON from `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Test JSONL files.
    #[arg(required = true)]
    pub tests: Vec<PathBuf>,
    /// Output CSV path; the JSON report goes to <out>.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-viewpoint-bin error CSVs per test set.
    #[arg(long)]
    pub by_view: bool,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    /// Training JSONL files (several datasets allowed for scope sweeps).
    #[arg(long, required = true, num_args = 1..)]
    pub train: Vec<PathBuf>,
    /// Test JSONL file.
    #[arg(long)]
    pub test: PathBuf,
    /// Sweep axis: k, restarts, mode, scope, canonical.
    #[arg(long)]
    pub sweep: String,
    /// Cluster counts for the k sweep, comma separated.
    #[arg(long, default_value = "10,24,50,100,200,500")]
    pub ks: String,
    /// Number of k-means restarts for the restarts sweep.
    #[arg(long, default_value_t = 4)]
    pub restarts: u64,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 12)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value = "256,256")]
    pub hidden: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub cluster_seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Ablate(args) => cmd_ablate(args),
    }
}

fn read_inputs(paths: &[PathBuf]) -> Result<Vec<PoseRecord>> {
    let mut records = Vec::new();
    for path in paths {
        let mut batch = read_jsonl(path)?;
        if batch.is_empty() {
            return Err(Error::InvalidRecord {
                line: 0,
                reason: format!("{} contains no records", path.display()),
            });
        }
        records.append(&mut batch);
    }
    Ok(records)
}

fn parse_hidden(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad hidden width {part:?}")))
        })
        .collect()
}

pub fn cmd_synth(args: SynthArgs) -> Result<()> {
    let started = Instant::now();
    let profile = profile_by_name(&args.profile)?;
    let config = SynthConfig::new(profile, args.count, args.seed);
    let records = generate(&config)?;
    write_jsonl(&args.out, &records)?;
    write_manifest(
        &manifest_path_for(&args.out),
        "synth",
        serde_json::to_value(&config)?,
        vec![args.seed],
        &[],
        &[args.out.clone()],
        started,
    )
}

pub fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let started = Instant::now();
    let records = read_inputs(&args.inputs)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let mut outputs = Vec::new();

    // Stats table, one row per dataset in first-appearance order.
    let stats = compute_stats_by_dataset(&records)?;
    let stats_path = args.out_dir.join("stats.csv");
    {
        let mut writer = csv::Writer::from_path(&stats_path)?;
        writer.write_record([
            "dataset",
            "count",
            "camera_distance_m_mean",
            "camera_distance_m_std",
            "focal_length_mean",
            "focal_length_std",
            "bone_length_m_mean",
            "bone_length_m_std",
        ])?;
        for (name, s) in &stats {
            writer.write_record([
                name.clone(),
                s.count.to_string(),
                format!("{:.6}", s.distance_m_mean),
                format!("{:.6}", s.distance_m_std),
                format!("{:.6}", s.focal_mean),
                format!("{:.6}", s.focal_std),
                format!("{:.6}", s.bone_m_mean),
                format!("{:.6}", s.bone_m_std),
            ])?;
        }
        writer.flush()?;
    }
    outputs.push(stats_path);

    // Histograms per dataset.
    for (name, _) in &stats {
        let subset: Vec<PoseRecord> = records
            .iter()
            .filter(|r| &r.dataset == name)
            .cloned()
            .collect();
        let hist = view_histogram(&subset, args.azimuth_bins, args.elevation_bins, args.grid)?;

        let az_path = args.out_dir.join(format!("{name}_azimuth_hist.csv"));
        {
            let mut writer = csv::Writer::from_path(&az_path)?;
            writer.write_record(["bin_start_deg", "bin_end_deg", "count"])?;
            for (bin, count) in hist.azimuth_counts.iter().enumerate() {
                let (lo, hi) = hist.azimuth_edges(bin);
                writer.write_record([format!("{lo:.3}"), format!("{hi:.3}"), count.to_string()])?;
            }
            writer.flush()?;
        }
        outputs.push(az_path);

        let el_path = args.out_dir.join(format!("{name}_elevation_hist.csv"));
        {
            let mut writer = csv::Writer::from_path(&el_path)?;
            writer.write_record(["bin_start_deg", "bin_end_deg", "count"])?;
            for (bin, count) in hist.elevation_counts.iter().enumerate() {
                let (lo, hi) = hist.elevation_edges(bin);
                writer.write_record([format!("{lo:.3}"), format!("{hi:.3}"), count.to_string()])?;
            }
            writer.flush()?;
        }
        outputs.push(el_path);

        if let Some(grid) = &hist.grid {
            let grid_path = args.out_dir.join(format!("{name}_view_grid.csv"));
            let mut writer = csv::Writer::from_path(&grid_path)?;
            writer.write_record(["azimuth_bin", "elevation_bin", "count"])?;
            for (a, row) in grid.iter().enumerate() {
                for (e, count) in row.iter().enumerate() {
                    writer.write_record([a.to_string(), e.to_string(), count.to_string()])?;
                }
            }
            writer.flush()?;
            outputs.push(grid_path);
        }
    }

    // Feature matrices.
    let mut modes: Vec<FeatureMode> = Vec::new();
    for request in &args.features {
        if request == "all" {
            modes.extend(FeatureMode::ALL);
        } else {
            modes.push(request.parse()?);
        }
    }
    modes.dedup();
    for mode in modes {
        let path = args.out_dir.join(format!("features_{mode}.csv"));
        export_pose_features(&records, mode, &path)?;
        outputs.push(path);
    }

    write_manifest(
        &args.out_dir.join("manifest.json"),
        "analyze",
        serde_json::json!({
            "azimuth_bins": args.azimuth_bins,
            "elevation_bins": args.elevation_bins,
            "grid": args.grid,
            "features": args.features,
        }),
        vec![],
        &args.inputs,
        &outputs,
        started,
    )
}

pub fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let started = Instant::now();
    let records = read_inputs(&args.inputs)?;
    let scope: ClusterScope = args.scope.parse()?;

    // Pool viewpoint quaternions per dataset, skipping degenerate frames.
    let mut groups: Vec<(String, Vec<crate::body_frame::Quat>)> = Vec::new();
    for record in &records {
        let q = match compute_body_frame(&record.joints3d) {
            Ok(frame) => frame.q,
            Err(Error::DegenerateFrame) => continue,
            Err(e) => return Err(e),
        };
        match groups.iter_mut().find(|(name, _)| *name == record.dataset) {
            Some((_, list)) => list.push(q),
            None => groups.push((record.dataset.clone(), vec![q])),
        }
    }

    let model = fit_scoped(&groups, args.k, args.seed, scope)?;
    model.save(&args.out)?;
    write_manifest(
        &manifest_path_for(&args.out),
        "cluster",
        serde_json::json!({"k": args.k, "scope": args.scope}),
        vec![args.seed],
        &args.inputs,
        &[args.out.clone()],
        started,
    )
}

/// Maps the CLI mode string to loss weights; `baseline` forces lambda 0
/// and needs no cluster model.
fn resolve_mode(mode: &str, lambda: f64) -> Result<LossWeights> {
    if mode == "baseline" {
        return Ok(LossWeights {
            lambda_q: 0.0,
            mode: LossMode::Regression,
            score_sign: 1.0,
        });
    }
    Ok(LossWeights {
        lambda_q: lambda,
        mode: mode.parse()?,
        score_sign: 1.0,
    })
}

fn config_hash(config: &TrainConfig, net: &ToyNetConfig) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(config)?);
    hasher.update(serde_json::to_vec(net)?);
    Ok(format!("{:x}", hasher.finalize()))
}

pub fn cmd_train(args: TrainArgs) -> Result<()> {
    let started = Instant::now();
    let records = read_inputs(&[args.train.clone()])?;
    let weights = resolve_mode(&args.mode, args.lambda)?;

    let model = match (&args.clusters, weights.mode.uses_classification()) {
        (Some(path), _) => Some(ClusterModel::load(path)?),
        (None, true) => return Err(Error::MissingClusterModel),
        (None, false) => None,
    };

    let net_config = ToyNetConfig {
        hidden: parse_hidden(&args.hidden)?,
        canonical_head: args.canonical_head,
        init_seed: args.seed,
        ..ToyNetConfig::default()
    };
    let train_config = TrainConfig {
        lr: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
        weights,
        seed: args.seed,
        ..TrainConfig::default()
    };

    let mut net = ToyNet::new(net_config.clone());
    let samples = prepare_samples(&records, model.as_ref())?;
    let curve = train_samples(&mut net, &samples, &train_config, model.as_ref())?;

    let hash = config_hash(&train_config, &net_config)?;
    Checkpoint::from_net(&net, hash).save(&args.out)?;

    let losses_path = {
        let mut name = args.out.file_name().unwrap_or_default().to_os_string();
        name.push(".losses.csv");
        args.out.with_file_name(name)
    };
    {
        let mut writer = csv::Writer::from_path(&losses_path)?;
        writer.write_record(["epoch", "loss", "pose_loss", "view_loss"])?;
        for e in &curve {
            writer.write_record([
                e.epoch.to_string(),
                format!("{:.9}", e.total),
                format!("{:.9}", e.pose),
                format!("{:.9}", e.view),
            ])?;
        }
        writer.flush()?;
    }

    let mut inputs = vec![args.train.clone()];
    if let Some(clusters) = &args.clusters {
        inputs.push(clusters.clone());
    }
    write_manifest(
        &manifest_path_for(&args.out),
        "train",
        serde_json::json!({
            "mode": args.mode,
            "train_config": serde_json::to_value(&train_config)?,
            "net_config": serde_json::to_value(&net_config)?,
        }),
        vec![args.seed],
        &inputs,
        &[args.out.clone(), losses_path],
        started,
    )
}

pub fn cmd_eval(args: EvalArgs) -> Result<()> {
    let started = Instant::now();
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let train_tag = args
        .checkpoint
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "checkpoint".into());
    let net = checkpoint.into_net()?;

    let mut outputs = Vec::new();
    let mut rows: Vec<(String, EvalReport)> = Vec::new();
    for test_path in &args.tests {
        let records = read_inputs(&[test_path.clone()])?;
        let report = evaluate(&net, &records)?;
        report.validate()?;
        let test_tag = records
            .first()
            .map(|r| r.dataset.clone())
            .unwrap_or_else(|| test_path.display().to_string());

        if args.by_view {
            let by_view_path = {
                let mut name = args.out.file_stem().unwrap_or_default().to_os_string();
                name.push(format!("_{test_tag}_by_view.csv"));
                args.out.with_file_name(name)
            };
            let mut samples = Vec::new();
            for record in &records {
                let frame = match compute_body_frame(&record.joints3d) {
                    Ok(f) => f,
                    Err(Error::DegenerateFrame) => continue,
                    Err(e) => return Err(e),
                };
                let vp = viewpoint_from_frame(&frame, record.joints3d.joints[0])?;
                let features = keypoint_features(record)?;
                let (pred, _, _) = forward(&net, &features)?;
                let gt = crate::skeleton::root_relative(&record.joints3d);
                samples.push((vp, crate::metrics::mpjpe(&pred, &gt)));
            }
            let profile = crate::analysis::error_by_viewpoint(&samples, 36, 18)?;
            let mut writer = csv::Writer::from_path(&by_view_path)?;
            writer.write_record(["axis", "bin_start_deg", "bin_end_deg", "count", "mean_mpjpe_mm"])?;
            for (bin, entry) in profile.azimuth.iter().enumerate() {
                if let Some(e) = entry {
                    let width = 360.0 / profile.azimuth_bins as f64;
                    let lo = -180.0 + bin as f64 * width;
                    writer.write_record([
                        "azimuth".to_string(),
                        format!("{lo:.3}"),
                        format!("{:.3}", lo + width),
                        e.count.to_string(),
                        format!("{:.6}", e.mean_error_mm),
                    ])?;
                }
            }
            for (bin, entry) in profile.elevation.iter().enumerate() {
                if let Some(e) = entry {
                    let width = 180.0 / profile.elevation_bins as f64;
                    let lo = -90.0 + bin as f64 * width;
                    writer.write_record([
                        "elevation".to_string(),
                        format!("{lo:.3}"),
                        format!("{:.3}", lo + width),
                        e.count.to_string(),
                        format!("{:.6}", e.mean_error_mm),
                    ])?;
                }
            }
            writer.flush()?;
            outputs.push(by_view_path);
        }

        rows.push((test_tag, report));
    }

    {
        let mut writer = csv::Writer::from_path(&args.out)?;
        writer.write_record([
            "train",
            "test",
            "n_samples",
            "mpjpe_mm",
            "pa_mpjpe_mm",
            "pck3d",
        ])?;
        for (test_tag, report) in &rows {
            writer.write_record([
                train_tag.clone(),
                test_tag.clone(),
                report.n_samples.to_string(),
                format!("{:.6}", report.mpjpe_mm),
                format!("{:.6}", report.pa_mpjpe_mm),
                format!("{:.6}", report.pck3d),
            ])?;
        }
        writer.flush()?;
    }
    outputs.insert(0, args.out.clone());

    let json_path = {
        let mut name = args.out.file_name().unwrap_or_default().to_os_string();
        name.push(".json");
        args.out.with_file_name(name)
    };
    {
        let reports: Vec<serde_json::Value> = rows
            .iter()
            .map(|(tag, report)| {
                Ok(serde_json::json!({"test": tag, "report": serde_json::to_value(report)?}))
            })
            .collect::<Result<_>>()?;
        let file = std::fs::File::create(&json_path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &reports)?;
    }
    outputs.push(json_path);

    let mut inputs = vec![args.checkpoint.clone()];
    inputs.extend(args.tests.iter().cloned());
    write_manifest(
        &manifest_path_for(&args.out),
        "eval",
        serde_json::json!({"by_view": args.by_view}),
        vec![],
        &inputs,
        &outputs,
        started,
    )
}

/// One ablation result row.
#[derive(Debug, Clone, Serialize)]
struct AblationRow {
    sweep: String,
    value: String,
    k: usize,
    scope: String,
    mode: String,
    lambda: f64,
    canonical_head: bool,
    cluster_seed: u64,
    train_seed: u64,
    final_train_loss: f64,
    mpjpe_mm: f64,
    pa_mpjpe_mm: f64,
    pck3d: f64,
}

pub fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let started = Instant::now();
    let train_records = read_inputs(&args.train)?;
    let test_records = read_inputs(&[args.test.clone()])?;
    let hidden = parse_hidden(&args.hidden)?;

    let quat_groups = {
        let mut groups: Vec<(String, Vec<crate::body_frame::Quat>)> = Vec::new();
        for record in &train_records {
            if let Ok(frame) = compute_body_frame(&record.joints3d) {
                match groups.iter_mut().find(|(name, _)| *name == record.dataset) {
                    Some((_, list)) => list.push(frame.q),
                    None => groups.push((record.dataset.clone(), vec![frame.q])),
                }
            }
        }
        groups
    };

    let run_one = |mode: &str,
                   k: usize,
                   scope: ClusterScope,
                   cluster_seed: u64,
                   canonical: bool|
     -> Result<AblationRow> {
        let weights = resolve_mode(mode, args.lambda)?;
        let model = if weights.mode.uses_classification() {
            Some(fit_scoped(&quat_groups, k, cluster_seed, scope.clone())?)
        } else {
            None
        };
        let net_config = ToyNetConfig {
            hidden: hidden.clone(),
            canonical_head: canonical,
            init_seed: args.seed,
            ..ToyNetConfig::default()
        };
        let train_config = TrainConfig {
            batch_size: args.batch,
            epochs: args.epochs,
            weights,
            seed: args.seed,
            ..TrainConfig::default()
        };
        let mut net = ToyNet::new(net_config);
        let samples = prepare_samples(&train_records, model.as_ref())?;
        let curve = train_samples(&mut net, &samples, &train_config, model.as_ref())?;
        let report = evaluate(&net, &test_records)?;
        Ok(AblationRow {
            sweep: args.sweep.clone(),
            value: String::new(),
            k,
            scope: scope.to_string(),
            mode: mode.to_string(),
            lambda: weights.lambda_q,
            canonical_head: canonical,
            cluster_seed,
            train_seed: args.seed,
            final_train_loss: curve.last().map(|e| e.total).unwrap_or(f64::NAN),
            mpjpe_mm: report.mpjpe_mm,
            pa_mpjpe_mm: report.pa_mpjpe_mm,
            pck3d: report.pck3d,
        })
    };

    let mut rows: Vec<AblationRow> = Vec::new();
    match args.sweep.as_str() {
        "k" => {
            let ks: Vec<usize> = args
                .ks
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad k {p:?}")))
                })
                .collect::<Result<_>>()?;
            for k in ks {
                let mut row = run_one("C", k, ClusterScope::Global, args.cluster_seed, false)?;
                row.value = k.to_string();
                rows.push(row);
            }
        }
        "restarts" => {
            let mut errors = Vec::new();
            for r in 0..args.restarts {
                let seed = args.cluster_seed + r;
                let mut row = run_one("C", args.k, ClusterScope::Global, seed, false)?;
                row.value = format!("restart{r}");
                errors.push(row.mpjpe_mm);
                rows.push(row);
            }
            let mean = errors.iter().sum::<f64>() / errors.len() as f64;
            let spread = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - errors.iter().copied().fold(f64::INFINITY, f64::min);
            let mut summary = rows.last().expect("at least one restart").clone();
            summary.value = "mean".into();
            summary.cluster_seed = args.cluster_seed;
            summary.mpjpe_mm = mean;
            summary.pa_mpjpe_mm = f64::NAN;
            summary.pck3d = f64::NAN;
            summary.final_train_loss = f64::NAN;
            rows.push(summary.clone());
            summary.value = "spread".into();
            summary.mpjpe_mm = spread;
            rows.push(summary);
        }
        "mode" => {
            for mode in ["baseline", "C", "R", "C+R"] {
                let mut row =
                    run_one(mode, args.k, ClusterScope::Global, args.cluster_seed, false)?;
                row.value = mode.to_string();
                rows.push(row);
            }
        }
        "scope" => {
            let mut row = run_one("C", args.k, ClusterScope::Global, args.cluster_seed, false)?;
            row.value = "global".into();
            rows.push(row);
            for (dataset, _) in &quat_groups {
                let scope = ClusterScope::Local(dataset.clone());
                let mut row = run_one("C", args.k, scope.clone(), args.cluster_seed, false)?;
                row.value = scope.to_string();
                rows.push(row);
            }
        }
        "canonical" => {
            for canonical in [false, true] {
                let mut row =
                    run_one("C", args.k, ClusterScope::Global, args.cluster_seed, canonical)?;
                row.value = format!("third-head={canonical}");
                rows.push(row);
            }
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "sweep must be one of k, restarts, mode, scope, canonical; got {other:?}"
            )))
        }
    }

    {
        let mut writer = csv::Writer::from_path(&args.out)?;
        writer.write_record([
            "sweep",
            "value",
            "k",
            "scope",
            "mode",
            "lambda",
            "canonical_head",
            "cluster_seed",
            "train_seed",
            "final_train_loss",
            "mpjpe_mm",
            "pa_mpjpe_mm",
            "pck3d",
        ])?;
        for row in &rows {
            writer.write_record([
                row.sweep.clone(),
                row.value.clone(),
                row.k.to_string(),
                row.scope.clone(),
                row.mode.clone(),
                format!("{:.6}", row.lambda),
                row.canonical_head.to_string(),
                row.cluster_seed.to_string(),
                row.train_seed.to_string(),
                format!("{:.9}", row.final_train_loss),
                format!("{:.6}", row.mpjpe_mm),
                format!("{:.6}", row.pa_mpjpe_mm),
                format!("{:.6}", row.pck3d),
            ])?;
        }
        writer.flush()?;
    }

    let mut inputs = args.train.clone();
    inputs.push(args.test.clone());
    write_manifest(
        &manifest_path_for(&args.out),
        "ablate",
        serde_json::json!({
            "sweep": args.sweep,
            "ks": args.ks,
            "restarts": args.restarts,
            "k": args.k,
            "lambda": args.lambda,
            "epochs": args.epochs,
            "hidden": args.hidden,
        }),
        vec![args.seed, args.cluster_seed],
        &inputs,
        &[args.out.clone()],
        started,
    )
}
