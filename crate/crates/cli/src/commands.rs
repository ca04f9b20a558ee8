//! Subcommand implementations. Each writes its outputs and a snapshot of
//! the effective configuration into the output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use sgpuq::data::{case_split, generate_synthetic, CaseSplit, Dataset};
use sgpuq::fem::{run_compression, Mesh1D};
use sgpuq::inference::{
    calibrate as run_calibration, case_report, dram_sample, mh_sample, ChainConfig, PosteriorEnsemble,
    PosteriorSummary,
};
use sgpuq::model::QoiModel;
use sgpuq::qoi::strain_energy;
use sgpuq::sampling::ParamBox;
use sgpuq::sensitivity::test_models::{Additive, Ishigami};
use sgpuq::sensitivity::{save_scatter, size_sweep_with_designs, SensitivityReport};

use crate::config::{ExperimentConfig, SensitivityModel, Target};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn prepare_out_dir(cfg: &ExperimentConfig, command: &str) -> Result<PathBuf> {
    let dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let sidecar = dir.join(format!("{command}.config.toml"));
    std::fs::write(&sidecar, cfg.to_toml()).map_err(|e| CliError::io(&sidecar, e))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(sgpuq::Error::from)?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ))
    }
}

/// Ingested dataset if `data.dir` is set, otherwise synthetic data.
fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.data.dir {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(CliError::io(
                    dir,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
                ));
            }
            Ok(Dataset::ingest(dir)?)
        }
        None => Ok(generate_synthetic(
            &cfg.model,
            &cfg.data.truth,
            &cfg.data.sizes,
            cfg.data.replicates,
            &cfg.data.noise,
            cfg.seed,
        )?),
    }
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let out = prepare_out_dir(cfg, "simulate")?;
    let sim = &cfg.simulate;
    let mesh = Mesh1D::from_config(sim.size, &cfg.model.mesh)?;
    let (curve, trace) = run_compression(&sim.params, &mesh, &cfg.model.program, &cfg.model.solver)?;
    curve.save_csv(&out.join("curve.csv"))?;
    let profile = trace.plastic_profile(sim.profile_strain)?;
    profile.write_csv(create(&out.join("profile.csv"))?)?;
    let energy = strain_energy(&curve, cfg.model.qoi_strain).ok();
    let summary = serde_json::json!({
        "size": sim.size,
        "params": sim.params,
        "steps": trace.records.len(),
        "newton_iterations": trace.records.iter().map(|r| r.newton_iterations).sum::<usize>(),
        "final_strain": curve.max_strain(),
        "final_stress": curve.stress.last(),
        "flow_stress": curve.offset_yield_stress(sim.params.elastic_modulus, 0.002),
        "strain_energy": energy,
        "profile_asymmetry": profile.asymmetry(),
    });
    write_json(&out.join("simulate.json"), &summary)?;
    println!(
        "L = {} nm: {} steps, final stress {:.6} GPa, strain energy {}",
        sim.size,
        trace.records.len(),
        curve.stress.last().copied().unwrap_or(0.0),
        energy.map(|e| format!("{e:.6e} GPa")).unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}

pub fn gen_data(cfg: &ExperimentConfig) -> Result<()> {
    let out = prepare_out_dir(cfg, "gen-data")?;
    let data = generate_synthetic(
        &cfg.model,
        &cfg.data.truth,
        &cfg.data.sizes,
        cfg.data.replicates,
        &cfg.data.noise,
        cfg.seed,
    )?;
    let dir = out.join("data");
    let files = data.export(&dir)?;
    let noise = data.noise_summary();
    write_json(&out.join("noise_summary.json"), &noise)?;
    for n in &noise {
        println!(
            "L = {} nm: {} replicates, relative std {:.3}",
            n.size, n.replicates, n.relative_std
        );
    }
    println!("wrote {} curves to {}", files.len(), dir.display());
    Ok(())
}

fn sweep<M: QoiModel>(
    model: &M,
    bx: &ParamBox,
    sizes: &[f64],
    cfg: &ExperimentConfig,
    out: &Path,
) -> Result<SensitivityReport> {
    let s = &cfg.sensitivity;
    let (report, scatter) = size_sweep_with_designs(model, bx, sizes, s.n, s.replicates, cfg.seed)?;
    if let Some((matrix, outputs)) = scatter {
        let names = bx.names();
        for (size, qoi) in sizes.iter().zip(&outputs) {
            save_scatter(&matrix, qoi, &names, &out.join(format!("scatter_L{size}.csv")))?;
        }
    }
    Ok(report)
}

pub fn sensitivity(cfg: &ExperimentConfig) -> Result<()> {
    let out = prepare_out_dir(cfg, "sensitivity")?;
    let report = match cfg.sensitivity.model {
        SensitivityModel::Sgp => sweep(&cfg.model, &cfg.prior, &cfg.sensitivity.sizes, cfg, &out)?,
        SensitivityModel::Additive => {
            let m = Additive {
                coeffs: vec![1.0, 2.0, 3.0],
            };
            sweep(&m, &ParamBox::unit(3), &[0.0], cfg, &out)?
        }
        SensitivityModel::Ishigami => sweep(&Ishigami::default(), &Ishigami::input_box(), &[0.0], cfg, &out)?,
    };
    report.write_csv(create(&out.join("indices.csv"))?)?;
    write_json(&out.join("sensitivity.json"), &report)?;
    let head = report.headline();
    for k in head.ranking() {
        println!("{:>6}  S = {:.4} ± {:.4}", report.parameters[k], head.mean[k], head.std[k]);
    }
    Ok(())
}

/// Independent normal target used to check the sampler end to end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianTarget {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl GaussianTarget {
    fn for_box(bx: &ParamBox, std_fraction: f64) -> Self {
        Self {
            mean: bx.ranges.iter().map(|r| 0.5 * (r.lower + r.upper)).collect(),
            std: bx.ranges.iter().map(|r| std_fraction * r.width()).collect(),
        }
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        -0.5 * x
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| ((x - m) / s).powi(2))
            .sum::<f64>()
    }
}

/// Metadata stored beside a samples file so a run can be summarised again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMeta {
    pub target: Target,
    pub case: Option<CaseSplit>,
    pub gaussian: Option<GaussianTarget>,
    pub prior: ParamBox,
    pub chain: ChainConfig,
    pub acceptance_rates: Vec<f64>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport<'a> {
    pub target: Target,
    pub case: Option<&'a CaseSplit>,
    /// Analytic moments for the Gaussian target.
    pub gaussian: Option<&'a GaussianTarget>,
    pub posterior: PosteriorSummary,
}

pub fn meta_path(samples: &Path) -> PathBuf {
    samples.with_extension("meta.json")
}

fn load_posterior(samples: &Path) -> Result<(PosteriorEnsemble, PosteriorMeta)> {
    require_file(samples)?;
    let meta_file = meta_path(samples);
    require_file(&meta_file)?;
    let meta: PosteriorMeta = read_json(&meta_file)?;
    let mut ens = PosteriorEnsemble::load_csv(samples, meta.prior.clone(), meta.chain.clone())?;
    if meta.acceptance_rates.len() == ens.n_chains() {
        ens.acceptance_rates = meta.acceptance_rates.clone();
    }
    Ok((ens, meta))
}

fn print_summary(s: &PosteriorSummary) {
    println!(
        "{:>6} {:>12} {:>12} {:>12} {:>8} {:>7}",
        "param", "MAP", "mean", "std", "I", "R-hat"
    );
    for k in 0..s.parameters.len() {
        println!(
            "{:>6} {:>12.5} {:>12.5} {:>12.5} {:>8.4} {:>7.3}",
            s.parameters[k], s.map[k], s.mean[k], s.std[k], s.information[k], s.r_hat[k]
        );
    }
    let rates: Vec<String> = s.acceptance_rates.iter().map(|a| format!("{a:.3}")).collect();
    println!("acceptance rates: {}", rates.join(" "));
}

pub fn calibrate(cfg: &ExperimentConfig) -> Result<()> {
    let out = prepare_out_dir(cfg, "calibrate")?;
    let (ens, meta) = match &cfg.inference.resume_from {
        Some(path) => {
            info!("summarising existing samples in {}", path.display());
            load_posterior(path)?
        }
        None => {
            let inf = &cfg.inference;
            let chain = ChainConfig {
                seed: cfg.seed,
                ..inf.chain.clone()
            };
            let (ens, case, gaussian) = match inf.target {
                Target::Sgp => {
                    let case = inf.case.split();
                    let data = load_dataset(cfg)?;
                    let (train, _) = case_split(&data, &case)?;
                    info!(
                        "calibrating on {:?} nm with {} chains of {}",
                        case.training, chain.n_chains, chain.chain_length
                    );
                    let ens = run_calibration(&train, &cfg.model, &cfg.prior, &inf.likelihood, &chain, None)?;
                    (ens, Some(case), None)
                }
                Target::Gaussian => {
                    let g = GaussianTarget::for_box(&cfg.prior, inf.gaussian_std_fraction);
                    let lp = |x: &[f64]| g.log_density(x);
                    let ens = if chain.adaptive || chain.delayed_rejection {
                        dram_sample(&lp, &cfg.prior, &chain, None)?
                    } else {
                        mh_sample(&lp, &cfg.prior, &chain, None)?
                    };
                    (ens, None, Some(g))
                }
            };
            let samples = out.join("posterior.csv");
            ens.save_csv(&samples)?;
            let meta = PosteriorMeta {
                target: inf.target,
                case,
                gaussian,
                prior: cfg.prior.clone(),
                chain,
                acceptance_rates: ens.acceptance_rates.clone(),
            };
            write_json(&meta_path(&samples), &meta)?;
            (ens, meta)
        }
    };
    let summary = PosteriorSummary::from_ensemble(&ens)?;
    let report = CalibrationReport {
        target: meta.target,
        case: meta.case.as_ref(),
        gaussian: meta.gaussian.as_ref(),
        posterior: summary.clone(),
    };
    write_json(&out.join("summary.json"), &report)?;
    print_summary(&summary);
    Ok(())
}

pub fn predict(cfg: &ExperimentConfig) -> Result<()> {
    let samples = cfg.posterior_path();
    let (ens, meta) = load_posterior(&samples)?;
    let out = prepare_out_dir(cfg, "predict")?;
    let case = meta.case.clone().unwrap_or_else(|| cfg.inference.case.split());
    let data = load_dataset(cfg)?;
    let (report, bands) = case_report(&data, &case, &ens, &cfg.model, cfg.predict.n_draws, cfg.seed)?;
    for band in &bands {
        band.write_csv(create(&out.join(format!("band_L{}.csv", band.size)))?)?;
    }
    report.write_csv(create(&out.join("case_report.csv"))?)?;
    let table = report.to_table();
    std::fs::write(out.join("case_report.txt"), &table).map_err(|e| CliError::io(&out, e))?;
    write_json(&out.join("predict.json"), &report)?;
    print!("{table}");
    for r in report.testing() {
        println!("held-out L = {} nm: cdf_error {:.4}", r.size, r.error);
    }
    Ok(())
}
