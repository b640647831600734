use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};

use motionssm::deform::{exp_svf, gaussian_smooth, jacobian_det, warp, WarpMode};
use motionssm::io::{read_params_file, write_params_file, Tensor};
use motionssm::learn::{
    evaluate_forecast, fit_offline, LearnerConfig, OnlineState, ParamVector,
};
use motionssm::lgssm::ObsSeq;
use motionssm::metrics::{dice, hd95, lcc, rmse, Mask};
use motionssm::synth::{
    online_preset_cfg, run_imputation_batch, run_online_batch, ONLINE_SHIFT_STEP,
    ONLINE_STREAM_STEPS,
};
use motionssm::{Error, Result};

use crate::report::{aggregate_rows, fmt, CsvWriter};

// ---------------------------------------------------------------- simulate

#[derive(Args)]
pub struct SimulateArgs {
    /// Parameter file (lgssm-params v1 text format).
    #[arg(long)]
    pub params: PathBuf,
    /// Number of steps to simulate.
    #[arg(long)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix; writes PREFIX.z.mseq and PREFIX.x.mseq.
    #[arg(long)]
    pub out: String,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let params = read_params_file(&args.params)?;
    let (z, x) = simulate_checked(&params, args.steps, args.seed)?;
    Tensor::from_matrix(&z).write_file(format!("{}.z.mseq", args.out))?;
    Tensor::from_matrix(&x).write_file(format!("{}.x.mseq", args.out))?;
    Ok(())
}

fn simulate_checked(
    params: &motionssm::lgssm::LgssmParams,
    steps: usize,
    seed: u64,
) -> Result<(nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>)> {
    if steps == 0 {
        return Err(Error::Precondition("--steps must be at least 1".into()));
    }
    motionssm::lgssm::simulate(params, steps, seed)
}

// --------------------------------------------------------------------- fit

#[derive(Args)]
pub struct FitArgs {
    /// Observation files (T x d_x MSEQ tensors); glob patterns allowed.
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<String>,
    /// Initial parameter file.
    #[arg(long)]
    pub init: PathBuf,
    /// Learning rate.
    #[arg(long, default_value_t = 5e-4)]
    pub lr: f64,
    /// Optimizer iterations.
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    /// Stop when the gradient infinity-norm drops below this (0 disables).
    #[arg(long, default_value_t = 0.0)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output parameter file; the loss curve goes to OUT.loss.csv.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn fit(args: FitArgs) -> Result<()> {
    let paths = expand_globs(&args.data)?;
    if paths.is_empty() {
        return Err(Error::Precondition("no data files matched".into()));
    }
    let mut dataset = Vec::with_capacity(paths.len());
    for p in &paths {
        dataset.push(read_obs(p)?);
    }
    let init = ParamVector::from_lgssm(&read_params_file(&args.init)?)?;
    let cfg = LearnerConfig {
        learning_rate: args.lr,
        max_iters: args.iters,
        grad_tol: args.grad_tol,
        seed: args.seed,
        ..Default::default()
    };
    let fit = fit_offline(&init, &dataset, &cfg)?;
    write_params_file(&args.out, &fit.params.unpack()?.lgssm)?;

    let curve_path = with_suffix(&args.out, ".loss.csv");
    let mut csv = CsvWriter::create(curve_path, "iter,loss,best_loss")?;
    for rec in &fit.trace {
        csv.row(&[rec.iter.to_string(), fmt(-rec.objective), fmt(-rec.best_objective)])?;
    }
    Ok(())
}

// ------------------------------------------------------------------ online

#[derive(Args)]
pub struct OnlineArgs {
    /// Observation stream (T x d_x MSEQ tensor).
    #[arg(long)]
    pub data: PathBuf,
    /// Pre-trained parameter file.
    #[arg(long)]
    pub params: PathBuf,
    /// Moving-horizon length N.
    #[arg(long, default_value_t = 75)]
    pub horizon: usize,
    /// Held-out forecast length H.
    #[arg(long, default_value_t = 50)]
    pub forecast: usize,
    #[arg(long, default_value_t = 5e-4)]
    pub lr: f64,
    /// Gradient updates per arriving sample.
    #[arg(long, default_value_t = 1)]
    pub inner_steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix; writes PREFIX.adapted.params, PREFIX.steps.csv,
    /// PREFIX.forecast.csv.
    #[arg(long)]
    pub out: String,
}

pub fn online(args: OnlineArgs) -> Result<()> {
    let obs = read_obs(&args.data)?;
    if obs.len() <= args.horizon + args.forecast {
        return Err(Error::Precondition(format!(
            "sequence of {} steps is too short: need more than horizon + forecast = {}",
            obs.len(),
            args.horizon + args.forecast
        )));
    }
    let frozen = ParamVector::from_lgssm(&read_params_file(&args.params)?)?;
    let cfg = LearnerConfig {
        learning_rate: args.lr,
        horizon: args.horizon,
        inner_steps_per_sample: args.inner_steps,
        seed: args.seed,
        ..Default::default()
    };

    let split = obs.len() - args.forecast;
    let mut state = OnlineState::new(frozen.clone(), cfg)?;
    for t in 0..split {
        state.step(&obs.value(t))?;
    }

    let mut steps_csv = CsvWriter::create(format!("{}.steps.csv", args.out), "step,window_len,loglik")?;
    for (k, ll) in state.loglik_log().iter().enumerate() {
        let window_len = (k + 1).min(args.horizon);
        steps_csv.row(&[k.to_string(), window_len.to_string(), fmt(*ll)])?;
    }

    let adapted = state.into_params();
    write_params_file(format!("{}.adapted.params", args.out), &adapted.unpack()?.lgssm)?;

    let past = slice_obs(&obs, 0, split)?;
    let future = slice_obs(&obs, split, obs.len())?;
    let ev_frozen = evaluate_forecast(&frozen.unpack()?.lgssm, &past, &future)?;
    let ev_adapted = evaluate_forecast(&adapted.unpack()?.lgssm, &past, &future)?;

    let mut fc_csv = CsvWriter::create(format!("{}.forecast.csv", args.out), "model,loglik,rmse")?;
    fc_csv.row(&["frozen".into(), fmt(ev_frozen.loglik), fmt(ev_frozen.rmse)])?;
    fc_csv.row(&["adapted".into(), fmt(ev_adapted.loglik), fmt(ev_adapted.rmse)])?;
    Ok(())
}

// ------------------------------------------------------------------ deform

#[derive(Subcommand)]
pub enum DeformCmd {
    /// Smooth a velocity field and exponentiate it by scaling and squaring.
    Exp(DeformExpArgs),
    /// Warp an image through a deformation field.
    Warp(DeformWarpArgs),
    /// Jacobian determinant of a deformation field; prints the minimum.
    Jacdet(DeformJacdetArgs),
}

#[derive(Args)]
pub struct DeformExpArgs {
    /// Velocity field (H x W x 2 MSEQ tensor).
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Gaussian smoothing width applied before exponentiation.
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    /// Scaling-and-squaring steps.
    #[arg(long, default_value_t = 4)]
    pub squarings: u32,
}

#[derive(Args)]
pub struct DeformWarpArgs {
    /// Image (H x W MSEQ tensor).
    #[arg(long)]
    pub image: PathBuf,
    /// Deformation field (H x W x 2 MSEQ tensor).
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = WarpModeArg::Bilinear)]
    pub mode: WarpModeArg,
}

#[derive(Args)]
pub struct DeformJacdetArgs {
    /// Deformation field (H x W x 2 MSEQ tensor).
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum WarpModeArg {
    Bilinear,
    Nearest,
}

pub fn deform(cmd: DeformCmd) -> Result<()> {
    match cmd {
        DeformCmd::Exp(args) => {
            let v = Tensor::read_file(&args.field)?.to_velocity()?;
            let smoothed = gaussian_smooth(&v, args.sigma)?;
            let phi = exp_svf(&smoothed, args.squarings);
            Tensor::from_deform(&phi).write_file(&args.out)
        }
        DeformCmd::Warp(args) => {
            let tensor = Tensor::read_file(&args.image)?;
            let was_f32 = matches!(tensor.data, motionssm::io::TensorData::F32(_));
            let img = tensor.to_frame()?;
            let phi = Tensor::read_file(&args.field)?.to_deform()?;
            let mode = match args.mode {
                WarpModeArg::Bilinear => WarpMode::Bilinear,
                WarpModeArg::Nearest => WarpMode::Nearest,
            };
            let out = warp(&img, &phi, mode)?;
            // Preserve the input precision so float32 pipelines round-trip.
            let t = if was_f32 { Tensor::from_frame_f32(&out) } else { Tensor::from_matrix(&out.data) };
            t.write_file(&args.out)
        }
        DeformCmd::Jacdet(args) => {
            let phi = Tensor::read_file(&args.field)?.to_deform()?;
            let det = jacobian_det(&phi)?;
            let min = det.min();
            Tensor::from_matrix(&det).write_file(&args.out)?;
            println!("min_jacobian_det {min}");
            Ok(())
        }
    }
}

// ----------------------------------------------------------------- metrics

#[derive(Subcommand)]
pub enum MetricsCmd {
    /// Dice score coefficient between two masks.
    Dice(MaskPairArgs),
    /// 95th-percentile Hausdorff distance between two masks.
    Hd95(MaskPairArgs),
    /// Root-mean-square error between two tensors.
    Rmse(PairArgs),
    /// Squared local normalized cross-correlation between two images.
    Lcc(LccArgs),
}

#[derive(Args)]
pub struct MaskPairArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Pixel spacing in mm as "row,col".
    #[arg(long, default_value = "1,1")]
    pub spacing: String,
    /// Optional CSV output (metric,value); always printed to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PairArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct LccArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Odd window size.
    #[arg(long, default_value_t = 9)]
    pub window: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn metrics(cmd: MetricsCmd) -> Result<()> {
    let (name, value, out) = match cmd {
        MetricsCmd::Dice(args) => {
            let (a, b) = read_mask_pair(&args)?;
            ("dice", dice(&a, &b)?, args.out)
        }
        MetricsCmd::Hd95(args) => {
            let (a, b) = read_mask_pair(&args)?;
            ("hd95", hd95(&a, &b)?, args.out)
        }
        MetricsCmd::Rmse(args) => {
            let a = Tensor::read_file(&args.a)?.to_matrix()?;
            let b = Tensor::read_file(&args.b)?.to_matrix()?;
            ("rmse", rmse(&a, &b)?, args.out)
        }
        MetricsCmd::Lcc(args) => {
            let a = Tensor::read_file(&args.a)?.to_frame()?;
            let b = Tensor::read_file(&args.b)?.to_frame()?;
            ("lcc", lcc(&a, &b, args.window)?, args.out)
        }
    };
    println!("{name},{}", fmt(value));
    if let Some(path) = out {
        let mut csv = CsvWriter::create(path, "metric,value")?;
        csv.row(&[name.to_string(), fmt(value)])?;
    }
    Ok(())
}

fn read_mask_pair(args: &MaskPairArgs) -> Result<(Mask, Mask)> {
    let spacing = parse_spacing(&args.spacing)?;
    let a = Tensor::read_file(&args.a)?.to_bool_mask()?;
    let b = Tensor::read_file(&args.b)?.to_bool_mask()?;
    Ok((Mask::with_spacing(a, spacing)?, Mask::with_spacing(b, spacing)?))
}

fn parse_spacing(raw: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Parse(format!("spacing must be \"row,col\", got \"{raw}\"")));
    }
    let row = parts[0].trim().parse::<f64>().map_err(|_| {
        Error::Parse(format!("bad spacing component \"{}\"", parts[0]))
    })?;
    let col = parts[1].trim().parse::<f64>().map_err(|_| {
        Error::Parse(format!("bad spacing component \"{}\"", parts[1]))
    })?;
    Ok((row, col))
}

// -------------------------------------------------------------- experiment

#[derive(Subcommand)]
pub enum ExperimentCmd {
    /// Sparse-observation imputation scored against ground truth
    /// (strides 1, 5, 10).
    Imputation(ImputationArgs),
    /// Online adaptation under a regime shift, adapted vs frozen.
    Online(OnlineExperimentArgs),
}

#[derive(Args)]
pub struct ImputationArgs {
    /// Number of independent synthetic worlds.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    /// Sequence length of each world.
    #[arg(long, default_value_t = 275)]
    pub frames: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct OnlineExperimentArgs {
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    /// Sequence length; must cover shift + 300 adaptation steps + forecast.
    #[arg(long, default_value_t = 500)]
    pub frames: usize,
    /// Held-out forecast length H.
    #[arg(long, default_value_t = 50)]
    pub forecast: usize,
    /// "shifted" swaps the dynamics mid-stream; "null" keeps them fixed.
    #[arg(long, value_enum, default_value_t = VariantArg::Shifted)]
    pub variant: VariantArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Shifted,
    Null,
}

const IMPUTATION_STRIDES: [usize; 3] = [1, 5, 10];

pub fn experiment(cmd: ExperimentCmd) -> Result<()> {
    match cmd {
        ExperimentCmd::Imputation(args) => {
            if args.seeds == 0 {
                return Err(Error::Precondition("--seeds must be at least 1".into()));
            }
            std::fs::create_dir_all(&args.out)?;
            let rows =
                run_imputation_batch(args.base_seed, args.seeds, &IMPUTATION_STRIDES, args.frames)?;

            let mut raw = CsvWriter::create(
                args.out.join("imputation_raw.csv"),
                "seed,stride,dice_mean,hd95_mean,x_rmse,observed_rmse,dice_rel_stride1",
            )?;
            for (seed, r) in &rows {
                raw.row(&[
                    seed.to_string(),
                    r.stride.to_string(),
                    fmt(r.dice_mean),
                    fmt(r.hd95_mean),
                    fmt(r.x_rmse),
                    fmt(r.observed_rmse),
                    fmt(r.dice_rel_stride1),
                ])?;
            }

            let mut agg = CsvWriter::create(
                args.out.join("imputation_aggregate.csv"),
                "stride,metric,median,q25,q75",
            )?;
            for stride in IMPUTATION_STRIDES {
                let select = |f: fn(&motionssm::synth::ImputationReport) -> f64| -> Vec<f64> {
                    rows.iter().filter(|(_, r)| r.stride == stride).map(|(_, r)| f(r)).collect()
                };
                let group = stride.to_string();
                aggregate_rows(&mut agg, &group, "dice_mean", &select(|r| r.dice_mean))?;
                aggregate_rows(&mut agg, &group, "hd95_mean", &select(|r| r.hd95_mean))?;
                aggregate_rows(&mut agg, &group, "x_rmse", &select(|r| r.x_rmse))?;
                aggregate_rows(
                    &mut agg,
                    &group,
                    "dice_rel_stride1",
                    &select(|r| r.dice_rel_stride1),
                )?;
            }
            Ok(())
        }
        ExperimentCmd::Online(args) => {
            if args.seeds == 0 {
                return Err(Error::Precondition("--seeds must be at least 1".into()));
            }
            let needed = ONLINE_SHIFT_STEP + ONLINE_STREAM_STEPS + args.forecast;
            if args.frames < needed {
                return Err(Error::Precondition(format!(
                    "--frames {} is too short: the protocol needs at least {needed}",
                    args.frames
                )));
            }
            std::fs::create_dir_all(&args.out)?;
            let shifted = matches!(args.variant, VariantArg::Shifted);
            let cfg = online_preset_cfg();
            let rows = run_online_batch(
                args.base_seed,
                args.seeds,
                args.frames,
                shifted,
                &cfg,
                args.forecast,
            )?;
            let variant = if shifted { "shifted" } else { "null" };

            let mut raw = CsvWriter::create(
                args.out.join("online_raw.csv"),
                "seed,variant,adapted_loglik,frozen_loglik,loglik_diff,adapted_rmse,frozen_rmse,adapted_dice25,frozen_dice25",
            )?;
            for (seed, r) in &rows {
                raw.row(&[
                    seed.to_string(),
                    variant.to_string(),
                    fmt(r.adapted_loglik),
                    fmt(r.frozen_loglik),
                    fmt(r.adapted_loglik - r.frozen_loglik),
                    fmt(r.adapted_rmse),
                    fmt(r.frozen_rmse),
                    fmt(r.adapted_dice25),
                    fmt(r.frozen_dice25),
                ])?;
            }

            let mut agg =
                CsvWriter::create(args.out.join("online_aggregate.csv"), "variant,metric,median,q25,q75")?;
            let select = |f: fn(&motionssm::synth::OnlineReport) -> f64| -> Vec<f64> {
                rows.iter().map(|(_, r)| f(r)).collect()
            };
            aggregate_rows(&mut agg, variant, "adapted_loglik", &select(|r| r.adapted_loglik))?;
            aggregate_rows(&mut agg, variant, "frozen_loglik", &select(|r| r.frozen_loglik))?;
            aggregate_rows(
                &mut agg,
                variant,
                "loglik_diff",
                &select(|r| r.adapted_loglik - r.frozen_loglik),
            )?;
            aggregate_rows(&mut agg, variant, "adapted_rmse", &select(|r| r.adapted_rmse))?;
            aggregate_rows(&mut agg, variant, "frozen_rmse", &select(|r| r.frozen_rmse))?;
            aggregate_rows(&mut agg, variant, "adapted_dice25", &select(|r| r.adapted_dice25))?;
            aggregate_rows(&mut agg, variant, "frozen_dice25", &select(|r| r.frozen_dice25))?;
            Ok(())
        }
    }
}

// ----------------------------------------------------------------- helpers

fn expand_globs(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for pattern in patterns {
        if Path::new(pattern).exists() {
            out.push(PathBuf::from(pattern));
            continue;
        }
        let matches = glob::glob(pattern)
            .map_err(|e| Error::Parse(format!("bad glob pattern \"{pattern}\": {e}")))?;
        for m in matches {
            out.push(m.map_err(|e| Error::Parse(format!("glob error: {e}")))?);
        }
    }
    out.sort();
    Ok(out)
}

fn read_obs(path: &Path) -> Result<ObsSeq> {
    let m = Tensor::read_file(path)?.to_matrix()?;
    ObsSeq::fully_observed(m)
}

fn slice_obs(obs: &ObsSeq, from: usize, to: usize) -> Result<ObsSeq> {
    let values = obs.values().rows(from, to - from).clone_owned();
    ObsSeq::fully_observed(values)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}
