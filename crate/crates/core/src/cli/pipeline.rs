use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::config::{ObservationKind, RunConfig};
use super::fielddump::{dump_field, FieldDims};
use crate::error::{Error, Result};
use crate::fluidsim::{
    band_limited_scalar, band_limited_velocity, FluidModel, ForcingSequence, Grid2D,
};
use crate::hmm::{posterior_factorized, IdentityObservation, LinearObservation, PosteriorOptions};
use crate::krylov::LanczosOptions;
use crate::opticflow::{
    covariance_frobenius_map, gradient_prior, pixel_error_map, spearman, BrightnessConstancy,
    GradientPriorSpec, ImagePair,
};
use crate::pod::{
    reconstruction_error, snapshot_basis, uncertainty_aware_basis_with, ReducedBasis,
    SecondMomentOperator, StateTrajectory, TraceEstimate, TraceMode,
};

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}

/// Sub-seed for an independent random stream of one pipeline stage.
fn stream_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub k: usize,
    pub snapshot: f64,
    pub posterior: f64,
    pub groundtruth: f64,
}

/// Normalized reconstruction error of the true trajectory versus basis size.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub rows: Vec<ErrorRow>,
}

impl ErrorCurve {
    pub const HEADER: &'static str = "k,error_snapshot,error_posterior,error_groundtruth";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e}",
                r.k, r.snapshot, r.posterior, r.groundtruth
            );
        }
        s
    }
}

/// Diagnostic maps at one time step.
#[derive(Debug, Clone)]
pub struct Fig1Maps {
    /// 1-based.
    pub t: usize,
    pub mean: Vec<f64>,
    pub truth: Vec<f64>,
    pub covariance_map: Vec<f64>,
    pub error_map: Vec<f64>,
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Bases {
    pub snapshot: ReducedBasis,
    pub posterior: ReducedBasis,
    pub groundtruth: ReducedBasis,
}

/// Everything computed by one run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub grid: Grid2D,
    pub sigma2: f64,
    pub lambda: f64,
    pub truth: StateTrajectory,
    pub second_moment: SecondMomentOperator,
    pub trace: TraceEstimate,
    pub max_regularization: f64,
    pub bases: Bases,
    pub curve: ErrorCurve,
    pub fig1: Fig1Maps,
}

struct Observed {
    /// Per time step, `M` replicas.
    observations: Vec<Vec<LinearObservation>>,
    sigma2: f64,
    /// Mean squared image gradient (1 for direct observations).
    gradient_energy: f64,
}

fn observe(config: &RunConfig, model: &FluidModel, truth: &StateTrajectory) -> Result<Observed> {
    let grid = *model.grid();
    let steps = truth.len();
    let (clean, ops): (Vec<Vec<f64>>, Vec<Arc<dyn crate::hmm::ObservationOperator>>) = match config
        .observation
    {
        ObservationKind::Direct => {
            let op: Arc<dyn crate::hmm::ObservationOperator> = Arc::new(IdentityObservation {
                dim: grid.state_dim(),
            });
            (truth.states().to_vec(), vec![op; steps])
        }
        ObservationKind::OpticFlow => {
            let (lo, hi) = config.image_band;
            let mut frame = band_limited_scalar(&grid, lo, hi, stream_seed(config.seed, 2));
            if let Some(c) = config.image_threshold {
                frame
                    .iter_mut()
                    .for_each(|g| *g = (*g - c).max(0.0).powi(2));
            }
            let mut clean = Vec::with_capacity(steps);
            let mut ops: Vec<Arc<dyn crate::hmm::ObservationOperator>> = Vec::with_capacity(steps);
            for x in truth.states() {
                let next = model.scalar_transport(&frame, x)?;
                let pair = ImagePair::new(grid, frame, next.clone())?;
                ops.push(Arc::new(BrightnessConstancy::from_image(
                    &grid,
                    &pair.frame_a,
                )));
                clean.push(pair.variation());
                frame = next;
            }
            (clean, ops)
        }
    };

    let gradient_energy = match config.observation {
        ObservationKind::Direct => 1.0,
        ObservationKind::OpticFlow => {
            // Recompute from the operators' images: mean |grad I|^2 over all frames.
            let mut acc = 0.0;
            for op in &ops {
                let d = op.gram_diagonal();
                acc += d.iter().sum::<f64>() / (d.len() / 2) as f64;
            }
            acc / steps as f64
        }
    };

    let power = clean.iter().flatten().map(|v| v * v).sum::<f64>()
        / clean.iter().map(Vec::len).sum::<usize>() as f64;
    let sigma2 = match config.sigma2 {
        Some(s) => s,
        None if power > 0.0 => power / config.snr,
        None => {
            return Err(Error::InvalidArgument(
                "observations carry no signal; set sigma2 explicitly".into(),
            ))
        }
    };

    let noise =
        Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, 3));
    let mut observations = Vec::with_capacity(steps);
    for (y, op) in clean.iter().zip(&ops) {
        let mut replicas = Vec::with_capacity(config.replicas);
        for _ in 0..config.replicas {
            let data: Vec<f64> = y.iter().map(|v| v + noise.sample(&mut rng)).collect();
            replicas.push(LinearObservation::new(
                op.clone(),
                vec![0.0; y.len()],
                sigma2,
                data,
            )?);
        }
        observations.push(replicas);
    }
    Ok(Observed {
        observations,
        sigma2,
        gradient_energy,
    })
}

/// Runs every stage in memory without touching the filesystem.
pub fn run_experiment(config: &RunConfig) -> Result<Experiment> {
    config.validate()?;
    let grid = Grid2D::new(config.width, config.height, 1.0).stage("config")?;
    let model = FluidModel::new(grid, config.alpha, config.dt).stage("config")?;

    let (lo, hi) = config.forcing_band;
    let initial =
        band_limited_velocity(&grid, lo, hi, config.max_speed, stream_seed(config.seed, 1));
    let truth = model
        .simulate(&ForcingSequence::decaying(initial, config.steps))
        .stage("simulate")?;

    let observed = observe(config, &model, &truth).stage("observe")?;
    let sigma2 = observed.sigma2;
    let lambda = config
        .lambda
        .unwrap_or(config.prior_scale * observed.gradient_energy / sigma2);
    let prior = gradient_prior(GradientPriorSpec { weight: lambda }, &grid).stage("prior")?;

    let opts = PosteriorOptions {
        cg_tol: config.cg_tol,
        max_iter: config.cg_max_iter,
    };
    let posteriors = observed
        .observations
        .par_iter()
        .map(|obs| posterior_factorized(&prior, obs, &opts))
        .collect::<Result<Vec<_>>>()
        .stage("posterior")?;
    let max_regularization = posteriors
        .iter()
        .map(|p| p.regularization)
        .fold(0.0, f64::max);
    let second_moment = SecondMomentOperator::new(posteriors).stage("posterior")?;

    let lanczos = LanczosOptions::new(config.k_max, config.krylov_dim)
        .seed(stream_seed(config.seed, 4))
        .tol(config.lanczos_tol);
    let trace_mode = TraceMode::Hutchinson {
        probes: config.trace_probes,
        seed: stream_seed(config.seed, 5),
    };
    let posterior_basis = uncertainty_aware_basis_with(&second_moment, &lanczos, trace_mode)
        .stage("posterior basis")?;
    let trace =
        crate::pod::trace_estimate_with(&second_moment, trace_mode).stage("posterior basis")?;
    let snapshot = snapshot_basis(&second_moment.means(), config.k_max).stage("snapshot basis")?;
    let groundtruth = snapshot_basis(&truth, config.k_max).stage("ground-truth basis")?;

    let mut rows = Vec::with_capacity(config.k_max);
    for k in 1..=config.k_max {
        let err = |b: &ReducedBasis| reconstruction_error(&truth, &b.truncate(k));
        rows.push(ErrorRow {
            k,
            snapshot: err(&snapshot).stage("metrics")?,
            posterior: err(&posterior_basis).stage("metrics")?,
            groundtruth: err(&groundtruth).stage("metrics")?,
        });
    }

    let t = config.fig1_index();
    let post = &second_moment.posteriors()[t - 1];
    let truth_t = truth.states()[t - 1].clone();
    let covariance_map = covariance_frobenius_map(post, &grid).stage("fig1 maps")?;
    let error_map = pixel_error_map(&truth_t, &post.mean, &grid).stage("fig1 maps")?;
    let fig1 = Fig1Maps {
        t,
        mean: post.mean.clone(),
        truth: truth_t,
        spearman: spearman(&covariance_map, &error_map),
        covariance_map,
        error_map,
    };

    Ok(Experiment {
        config: config.clone(),
        grid,
        sigma2,
        lambda,
        truth,
        second_moment,
        trace,
        max_regularization,
        bases: Bases {
            snapshot,
            posterior: posterior_basis,
            groundtruth,
        },
        curve: ErrorCurve { rows },
        fig1,
    })
}

fn spectra_csv(bases: &Bases) -> String {
    let mut s = String::from("j,sigma_snapshot,sigma_posterior,sigma_groundtruth\n");
    let len = [&bases.snapshot, &bases.posterior, &bases.groundtruth]
        .iter()
        .map(|b| b.spectrum().len())
        .max();
    let cell = |b: &ReducedBasis, j: usize| {
        b.spectrum()
            .get(j)
            .map(|v| format!("{v:.16e}"))
            .unwrap_or_default()
    };
    for j in 0..len.unwrap_or(0) {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            j + 1,
            cell(&bases.snapshot, j),
            cell(&bases.posterior, j),
            cell(&bases.groundtruth, j)
        );
    }
    s
}

fn metadata(exp: &Experiment) -> String {
    let mut s = String::from("# resolved configuration\n");
    s.push_str(&exp.config.to_text());
    s.push_str("\n# derived quantities\n");
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    put("n", exp.grid.state_dim().to_string());
    put("m", exp.grid.pixels().to_string());
    put("sigma2_resolved", format!("{:.16e}", exp.sigma2));
    put("lambda_resolved", format!("{:.16e}", exp.lambda));
    put(
        "max_regularization",
        format!("{:.16e}", exp.max_regularization),
    );
    put("trace_second_moment", format!("{:.16e}", exp.trace.value));
    put("trace_std_error", format!("{:.16e}", exp.trace.std_error));
    if let Some(tm) = exp.bases.posterior.trailing_mass() {
        put("posterior_trailing_mass", format!("{:.16e}", tm.value));
    }
    put(
        "snapshot_rank_deficient",
        exp.bases.snapshot.is_rank_deficient().to_string(),
    );
    put(
        "groundtruth_rank_deficient",
        exp.bases.groundtruth.is_rank_deficient().to_string(),
    );
    put("fig1_t_resolved", exp.fig1.t.to_string());
    put(
        "fig1_spearman",
        exp.fig1
            .spearman
            .map(|v| format!("{v:.16e}"))
            .unwrap_or_else(|| "undefined".into()),
    );
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the run's tables and field dumps into `config.output_dir`.
pub fn write_outputs(exp: &Experiment) -> Result<()> {
    let dir = &exp.config.output_dir;
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    write(&dir.join("error_curve.csv"), &exp.curve.to_csv())?;
    write(&dir.join("spectra.csv"), &spectra_csv(&exp.bases))?;
    write(&dir.join("run_metadata.txt"), &metadata(exp))?;
    let (w, h) = (exp.grid.width, exp.grid.height);
    dump_field(
        dir.join("fig1_posterior_mean.fld"),
        &exp.fig1.mean,
        FieldDims::new(w, h, 2),
    )?;
    dump_field(
        dir.join("fig1_truth.fld"),
        &exp.fig1.truth,
        FieldDims::new(w, h, 2),
    )?;
    dump_field(
        dir.join("fig1_covariance_map.fld"),
        &exp.fig1.covariance_map,
        FieldDims::new(w, h, 1),
    )?;
    dump_field(
        dir.join("fig1_error_map.fld"),
        &exp.fig1.error_map,
        FieldDims::new(w, h, 1),
    )?;
    Ok(())
}

/// Full pipeline: compute, then write outputs.
pub fn run_pipeline(config: &RunConfig) -> Result<Experiment> {
    let exp = run_experiment(config)?;
    write_outputs(&exp).stage("write outputs")?;
    Ok(exp)
}
