use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use tsfed_core::accountant::{
    calibrate, calibrate_steps, compose, default_orders, gaussian_rdp, privacy_report, subsample_amplify, to_dp, Calibration,
    CurveKind, PrivacyBudget,
};
use tsfed_core::audit::{
    run_assd, select_target_influential, select_target_outlier, CopyTrainer, GanTrainer, Normalizer, Provenance,
    ShadowTrainer,
};
use tsfed_core::data::{
    gen_sine2, gen_sine6, load_csv, one_per_party, partition, save_csv, Assignment, CsvLayout, DatasetMeta, TimeSeriesDataset,
};
use tsfed_core::dp::DpParams;
use tsfed_core::eval::{
    amplitude_awd, amplitude_ratios, awd, known_frequencies, pca_2d, sine_mae, tpd, AwdReport, MetricReport, PcaProjection,
};
use tsfed_core::seed::{derive_seed, stream};
use tsfed_core::vfl::{train, GeneratorBank, TrainConfig};

use crate::config::{DatasetKind, EvalSection, Experiment, MetricKind, NoisePlan, Selector, TrainerKind};
use crate::manifest::{sha256_hex, Manifest, PrivacyRecord, Seeds, TrainingRecord};
use crate::{CliError, Result};

pub const CONFIG_COPY: &str = "config.toml";

/// Where a command wrote its outputs, and the manifest it left there.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("meta.json")
}

/// The dataset named by the `dataset` section: generated for the sine kinds,
/// read from CSV plus its metadata sidecar otherwise.
pub fn load_dataset(exp: &Experiment) -> Result<TimeSeriesDataset> {
    let d = &exp.config.dataset;
    Ok(match d.kind {
        DatasetKind::Sine2 => gen_sine2(d.n_per_class, d.steps, d.seed, d.sine.clone())?,
        DatasetKind::Sine6 => gen_sine6(d.n_per_class, d.steps, d.seed, d.sine.clone())?,
        DatasetKind::Csv => {
            let path = exp.resolve(d.path.as_deref().expect("validated"));
            let sidecar = sidecar_path(&path);
            let text = fs::read_to_string(&sidecar)
                .map_err(|e| CliError::Config(format!("cannot read metadata {}: {e}", sidecar.display())))?;
            let meta = DatasetMeta::from_json(&text)?;
            let layout = CsvLayout { samples: meta.samples, attributes: meta.attributes, steps: meta.steps };
            let mut ds = load_csv(&path, layout)?;
            if !meta.attribute_names.is_empty() {
                ds = ds.with_attribute_names(meta.attribute_names.clone())?;
            }
            ds.with_meta(meta)
        }
    })
}

fn assignment(exp: &Experiment, dataset: &TimeSeriesDataset) -> Assignment {
    exp.config.dataset.assignment.clone().unwrap_or_else(|| one_per_party(dataset.n_attributes()))
}

fn seeds(exp: &Experiment, train: &TrainConfig) -> Seeds {
    let c = &exp.config;
    Seeds { dataset: c.dataset.seed, train: train.seed, eval: c.eval.seed, audit: c.audit.params.seed }
}

/// Training configuration with the noise settings of the `dp` section folded
/// in, calibrating σ first when a budget was given.
fn resolve_training(exp: &Experiment, n_samples: usize) -> Result<(TrainConfig, Option<PrivacyRecord>)> {
    let mut cfg = exp.config.train.clone();
    let gamma = cfg.batch_size as f64 / n_samples as f64;
    let steps = cfg.iterations as u64;
    let curve = exp.config.dp.as_ref().map(|d| d.curve).unwrap_or_default();
    let record = |clip: f64, sigma: f64, budget: Option<PrivacyBudget>, calibration: Option<Calibration>, delta: Option<f64>| {
        let report = match delta {
            Some(delta) if sigma > 0.0 => Some(privacy_report(sigma, gamma, steps, delta)?),
            _ => None,
        };
        Ok::<_, CliError>(PrivacyRecord {
            clip,
            sigma,
            sampling_rate: gamma,
            steps,
            budget,
            achieved: calibration.map(|c| c.achieved),
            curve,
            report,
        })
    };
    let privacy = match exp.config.dp.as_ref().map(|d| d.plan()).transpose()? {
        None => match cfg.dp {
            Some(dp) => Some(record(dp.clip, dp.sigma, None, None, None)?),
            None => None,
        },
        Some(NoisePlan::Fixed { clip, sigma, delta }) => {
            cfg.dp = Some(DpParams { clip, sigma });
            Some(record(clip, sigma, None, None, delta)?)
        }
        Some(NoisePlan::Budget { clip, budget, sigma_range, curve }) => {
            let cal = calibrate(budget, gamma, steps, sigma_range, curve)?;
            cfg.dp = Some(DpParams { clip, sigma: cal.sigma });
            Some(record(clip, cal.sigma, Some(budget), Some(cal), Some(budget.delta))?)
        }
    };
    Ok((cfg, privacy))
}

struct RunDir<'a> {
    exp: &'a Experiment,
    dir: PathBuf,
    outputs: Vec<String>,
}

impl<'a> RunDir<'a> {
    fn create(exp: &'a Experiment) -> Result<Self> {
        let dir = exp.output_dir();
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(CONFIG_COPY), &exp.source)?;
        Ok(Self { exp, dir, outputs: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    fn finish(
        self,
        command: &str,
        seeds: Seeds,
        dataset: DatasetMeta,
        privacy: Option<PrivacyRecord>,
        training: Option<TrainingRecord>,
    ) -> Result<RunSummary> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_file: CONFIG_COPY.into(),
            config_sha256: sha256_hex(self.exp.source.as_bytes()),
            seeds,
            dataset,
            privacy,
            training,
            outputs: self.outputs,
        };
        fs::write(self.dir.join(format!("{command}.manifest.json")), manifest.to_json())?;
        Ok(RunSummary { dir: self.dir, manifest })
    }
}

/// Writes `data.csv` and its `data.meta.json` sidecar.
pub fn cmd_gen_data(exp: &Experiment) -> Result<RunSummary> {
    let ds = load_dataset(exp)?;
    let mut run = RunDir::create(exp)?;
    let path = run.dir.join("data.csv");
    save_csv(&ds, &path)?;
    run.outputs.push("data.csv".into());
    let meta = ds.describe();
    run.write("data.meta.json", meta.to_json())?;
    let seeds = seeds(exp, &exp.config.train);
    run.finish("gen-data", seeds, meta, None, None)
}

/// Trains the federation, writing the loss history, the selected and final
/// generator banks and the privacy accounting. A diverged run still writes
/// everything up to the failure and then reports [`CliError::Divergence`].
pub fn cmd_train(exp: &Experiment) -> Result<RunSummary> {
    let ds = load_dataset(exp)?;
    let views = partition(&ds, &assignment(exp, &ds))?;
    let (cfg, privacy) = resolve_training(exp, ds.n_samples())?;
    let outcome = train(&cfg, &views, ds.frequencies())?;

    let mut run = RunDir::create(exp)?;
    run.write("history.csv", outcome.history.to_csv())?;
    run.write("best_generators.json", outcome.best.to_json())?;
    run.write("final_generators.json", outcome.state.generator_bank().to_json())?;
    if let Some(p) = &privacy {
        run.write("privacy.json", serde_json::to_string_pretty(p).expect("record serializes"))?;
    }
    let training = TrainingRecord {
        score_metric: outcome.history.score_metric.clone(),
        initial_score: outcome.initial_score,
        best_iteration: outcome.best_iteration,
        best_score: outcome.best_score,
        iterations_run: outcome.history.records.len() - 1,
        messages: outcome.state.log.len(),
        diverged: outcome.diverged.clone(),
    };
    let summary = run.finish("train", seeds(exp, &cfg), ds.describe(), privacy, Some(training))?;
    match outcome.diverged {
        Some(detail) => Err(CliError::Divergence(detail)),
        None => Ok(summary),
    }
}

/// Source of the synthetic data scored by `evaluate`.
#[derive(Debug, Clone, PartialEq)]
pub enum Synthesis {
    /// A generator bank; the run directory's `best_generators.json` when no
    /// path is given.
    Checkpoint(Option<PathBuf>),
    /// The real data itself, a control whose distances are all zero.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutputs {
    pub metrics: Vec<MetricReport>,
    pub awd: AwdReport,
    pub pca: PcaProjection,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Seeded train/test split; the test part holds `round(N·fraction)` samples,
/// at least one and at most `N − 1`.
fn split(ds: &TimeSeriesDataset, fraction: f64, seed: u64, tag: &str) -> Result<(TimeSeriesDataset, TimeSeriesDataset)> {
    let n = ds.n_samples();
    if n < 2 {
        return Err(CliError::Config("a downstream split needs at least two samples".into()));
    }
    let n_test = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, tag));
    let (test, train) = idx.split_at(n_test);
    Ok((ds.select(train)?, ds.select(test)?))
}

/// Every metric of `eval.metrics`, plus the per-cell AWD table and a PCA
/// projection of both datasets, which are always produced.
pub fn evaluate_datasets(real: &TimeSeriesDataset, synth: &TimeSeriesDataset, eval: &EvalSection) -> Result<EvalOutputs> {
    let awd_report = awd(real, synth)?;
    let freqs = || known_frequencies(real).map_err(|e| CliError::Config(format!("{e}; amplitude metrics need a sine dataset")));
    let mut metrics = Vec::new();
    for kind in &eval.metrics {
        metrics.push(match kind {
            MetricKind::Awd => MetricReport::scalar("awd", awd_report.value),
            MetricKind::AmplitudeAwd => MetricReport::scalar("amplitude_awd", amplitude_awd(real, synth, &freqs()?)?),
            MetricKind::SineMae => MetricReport::scalar("sine_mae", sine_mae(synth, &freqs()?)?),
            MetricKind::AmplitudeRatio => {
                if real.n_attributes() < 2 {
                    return Err(CliError::Config("amplitude_ratio needs at least two attributes".into()));
                }
                let f = freqs()?;
                let sorted = |ds: &TimeSeriesDataset| -> Result<Vec<f64>> {
                    let mut r = amplitude_ratios(ds, &f, 0, 1)?;
                    r.sort_by(f64::total_cmp);
                    Ok(r)
                };
                let (s, r) = (sorted(synth)?, sorted(real)?);
                let (q1, q3) = (quantile(&s, 0.25), quantile(&s, 0.75));
                MetricReport {
                    metric: "amplitude_ratio_median".into(),
                    value: quantile(&s, 0.5),
                    breakdown: vec![
                        ("q1".into(), q1),
                        ("q3".into(), q3),
                        ("iqr".into(), q3 - q1),
                        ("real_median".into(), quantile(&r, 0.5)),
                        ("real_iqr".into(), quantile(&r, 0.75) - quantile(&r, 0.25)),
                    ],
                    config: serde_json::Value::Null,
                }
            }
            MetricKind::Tpd => {
                let (real_train, real_test) = split(real, eval.test_fraction, eval.seed, "evaluate/split/real")?;
                let (synth_train, synth_test) = split(synth, eval.test_fraction, eval.seed, "evaluate/split/synthetic")?;
                let r = tpd(&real_train, &real_test, &synth_train, &synth_test, eval.task, &eval.tpd)?;
                MetricReport {
                    metric: "tpd".into(),
                    value: r.tpd,
                    breakdown: vec![("trtr".into(), r.trtr), ("tsts".into(), r.tsts), ("trts".into(), r.trts), ("tstr".into(), r.tstr)],
                    config: serde_json::json!({ "task": eval.task, "model": eval.tpd }),
                }
            }
        });
    }
    let pca = pca_2d(real, &[synth])?;
    Ok(EvalOutputs { metrics, awd: awd_report, pca })
}

fn awd_cells_csv(report: &AwdReport) -> String {
    let mut out = String::from("attribute,step,wd\n");
    for ((a, t), v) in report.cells.indexed_iter() {
        let _ = writeln!(out, "{a},{t},{v:?}");
    }
    out
}

fn pca_csv(p: &PcaProjection) -> String {
    let mut out = String::from("set,index,pc1,pc2\n");
    for (set, coords) in ["real", "synthetic"].iter().zip(&p.coordinates) {
        for (i, row) in coords.rows().into_iter().enumerate() {
            let pc2 = row.get(1).map(|v| format!("{v:?}")).unwrap_or_default();
            let _ = writeln!(out, "{set},{i},{:?},{pc2}", row[0]);
        }
    }
    out
}

/// Scores synthetic data against the configured dataset and writes
/// `eval_report.json`, `awd_cells.csv` and `pca.csv`.
pub fn cmd_evaluate(exp: &Experiment, synthesis: &Synthesis) -> Result<RunSummary> {
    let real = load_dataset(exp)?;
    let eval = &exp.config.eval;
    let synth = match synthesis {
        Synthesis::Identity => real.clone(),
        Synthesis::Checkpoint(path) => {
            let path = match path {
                Some(p) => p.clone(),
                None => exp.output_dir().join("best_generators.json"),
            };
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::Config(format!("cannot read checkpoint {}: {e}", path.display())))?;
            let bank = GeneratorBank::from_json(&text)?;
            let n = if eval.samples == 0 { real.n_samples() } else { eval.samples };
            bank.synthesize(n, derive_seed(eval.seed, "evaluate/synthesis"))?
        }
    };
    let out = evaluate_datasets(&real, &synth, eval)?;
    let mut run = RunDir::create(exp)?;
    run.write("eval_report.json", serde_json::to_string_pretty(&out.metrics).expect("reports serialize"))?;
    run.write("awd_cells.csv", awd_cells_csv(&out.awd))?;
    run.write("pca.csv", pca_csv(&out.pca))?;
    run.finish("evaluate", seeds(exp, &exp.config.train), real.describe(), None, None)
}

/// Selects a target, runs the shadow stage in both worlds and, when
/// configured, the leave-one-out game. Writes `audit_report.json` and the
/// raw per-world features in `audit_features.csv`.
pub fn cmd_audit(exp: &Experiment) -> Result<RunSummary> {
    let ds = load_dataset(exp)?;
    let section = &exp.config.audit;
    let params = &section.params;
    let (cfg, privacy) = resolve_training(exp, ds.n_samples())?;
    let trainer: Box<dyn ShadowTrainer> = match section.trainer {
        TrainerKind::Copy => Box::new(CopyTrainer),
        TrainerKind::Gan => Box::new(GanTrainer {
            config: cfg.clone(),
            assignment: assignment(exp, &ds),
            samples: section.samples,
            release: section.release,
        }),
    };
    params.validate(ds.n_samples())?;
    let (target, provenance) = match section.selector {
        Selector::Outlier => {
            let norm = Normalizer::fit(&ds);
            (select_target_outlier(&norm.apply(&ds)?, params.norm)?, Provenance::Outlier)
        }
        Selector::Influential => select_target_influential(&ds, trainer.as_ref(), params)?,
        Selector::Index(i) => (i, Provenance::Explicit),
    };
    let report = run_assd(&ds, target, provenance, trainer.as_ref(), params)?;
    let mut run = RunDir::create(exp)?;
    run.write("audit_report.json", report.to_json())?;
    run.write("audit_features.csv", report.features_csv())?;
    let privacy = if section.trainer == TrainerKind::Gan { privacy } else { None };
    run.finish("audit", seeds(exp, &cfg), ds.describe(), privacy, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccountArgs {
    pub sigma: f64,
    pub gamma: f64,
    pub steps: u64,
    pub delta: f64,
    /// Default order grid when absent.
    pub orders: Option<Vec<u32>>,
    /// Both curves when absent.
    pub curve: Option<CurveKind>,
}

fn curve_name(kind: CurveKind) -> &'static str {
    match kind {
        CurveKind::Generator => "generator",
        CurveKind::Discriminator => "discriminator",
    }
}

/// Two CSV tables separated by a blank line: the per-order Rényi curve of
/// one subsampled step and of the composition, then the converted
/// `(ε, δ)` guarantee with its minimizing order, for the external
/// (subsampled) and internal (unamplified) threat surfaces.
pub fn cmd_account(args: &AccountArgs) -> Result<String> {
    let orders = args.orders.clone().unwrap_or_else(default_orders);
    let kinds = match args.curve {
        Some(k) => vec![k],
        None => vec![CurveKind::Generator, CurveKind::Discriminator],
    };
    let mut table = String::from("curve,order,step_rdp,composed_rdp\n");
    let mut finals = String::from("curve,surface,epsilon,delta,order\n");
    for kind in kinds {
        let name = curve_name(kind);
        let step = subsample_amplify(args.sigma, args.gamma, &orders, kind)?;
        let total = compose(&step, args.steps)?;
        for ((order, e), (_, t)) in step.iter().zip(total.iter()) {
            let _ = writeln!(table, "{name},{order},{e:e},{t:e}");
        }
        let internal = compose(&gaussian_rdp(args.sigma, &orders, kind)?, args.steps)?;
        for (surface, curve) in [("external", &total), ("internal", &internal)] {
            let g = to_dp(curve, args.delta)?;
            let _ = writeln!(finals, "{name},{surface},{:e},{:e},{}", g.epsilon, g.delta, g.order);
        }
    }
    Ok(format!("{table}\n{finals}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateArgs {
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Iteration count to calibrate σ for.
    pub steps: Option<u64>,
    /// Fixed σ to find the largest admissible iteration count for, up to
    /// `max_steps`.
    pub sigma: Option<f64>,
    pub max_steps: Option<u64>,
    pub sigma_range: (f64, f64),
    pub curve: CurveKind,
}

impl CalibrateArgs {
    /// The budget of the `dp` section at the sampling rate and length of the
    /// configured training run.
    pub fn from_experiment(exp: &Experiment) -> Result<Self> {
        let dp = exp.config.dp.as_ref().ok_or_else(|| CliError::Config("calibration needs a dp section".into()))?;
        let NoisePlan::Budget { budget, sigma_range, curve, .. } = dp.plan()? else {
            return Err(CliError::Config("calibration needs dp.epsilon and dp.delta rather than dp.sigma".into()));
        };
        let n = load_dataset(exp)?.n_samples();
        let train = &exp.config.train;
        Ok(Self {
            epsilon: budget.epsilon,
            delta: budget.delta,
            gamma: train.batch_size as f64 / n as f64,
            steps: Some(train.iterations as u64),
            sigma: None,
            max_steps: None,
            sigma_range,
            curve,
        })
    }
}

/// Smallest grid σ meeting the budget after `steps` iterations, or with a
/// fixed σ the largest iteration count up to `max_steps` that does.
pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<Calibration> {
    let budget = PrivacyBudget::new(args.epsilon, args.delta).map_err(|e| CliError::Config(e.to_string()))?;
    match (args.steps, args.sigma, args.max_steps) {
        (Some(steps), None, None) => Ok(calibrate(budget, args.gamma, steps, args.sigma_range, args.curve)?),
        (None, Some(sigma), Some(max)) => Ok(calibrate_steps(budget, args.gamma, sigma, (1, max), args.curve)?),
        _ => Err(CliError::Config("give either steps, or sigma together with max_steps".into())),
    }
}
