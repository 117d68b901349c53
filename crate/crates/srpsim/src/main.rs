//! Command-line front end: dataset generation, feedback encoding, training,
//! and evaluation. Subcommand parameters come from a JSON config file
//! (`--config`); `--seed`, `--threads`, and `--out` override config values.
//!
//! Exit codes: 0 success, 2 config error, 3 data/IO error, 4 numerical
//! failure.

use clap::{Parser, Subcommand};
use serde::Deserialize;
use srpsim::channel::{compute_pdp, SimConfig};
use srpsim::codebook::{
    encode_etype2, encode_type1, encode_type2, BeamCodebook, EType2Variant, PrecoderReport,
    ReportFile, SbGrid, Type2Criterion, REPORT_SCHEMA_VERSION,
};
use srpsim::error::{Result, SimError};
use srpsim::harness::{generate_dataset, load_dataset, run_experiment, EvalConfig};
use srpsim::switch::{save_switch, train_switch, SwitchSample};
use srpsim::upsample::srpnet::{
    srpnet_forward, train_srpnet, write_log_csv, SrpnetParams, TrainHyper, TrainSample,
};
use srpsim::upsample::{deterministic_upsample, interpolate_linear, SampledPrecoders};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "srpsim", about = "SB-to-RB precoder upsampling simulator")]
struct Cli {
    /// JSON config file for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rayon thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides the config's output path).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic channel dataset.
    Gen,
    /// Encode codebook feedback reports for a dataset.
    Encode,
    /// Train the upsampling network.
    TrainSrpnet,
    /// Train the learned gain/complexity switch.
    TrainSwitch,
    /// Run the evaluation suite (fig4/fig5/fig6 CSVs).
    Eval,
    /// Merge CSV artifacts into one file.
    Report,
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let raw =
                std::fs::read(p).map_err(|e| SimError::io(p.display().to_string(), e))?;
            serde_json::from_slice(&raw)
                .map_err(|e| SimError::Config(format!("{}: {e}", p.display())))
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct GenConfig {
    sim: SimConfig,
    n_ue: usize,
    out_dir: PathBuf,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            sim: SimConfig::default(),
            n_ue: 512,
            out_dir: PathBuf::from("dataset"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Scheme {
    Type1,
    Type2,
    EType2,
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct PipelineConfig {
    dataset_dir: PathBuf,
    scheme: Scheme,
    n_rbpsb: usize,
    l: usize,
    m_v: usize,
    r: usize,
    oversampling: usize,
    criterion: Type2Criterion,
    variant: EType2Variant,
    sample_offset: usize,
    out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset_dir: PathBuf::from("dataset"),
            scheme: Scheme::EType2,
            n_rbpsb: 4,
            l: 4,
            m_v: 12,
            r: 2,
            oversampling: 4,
            criterion: Type2Criterion::Modified,
            variant: EType2Variant::Modified,
            sample_offset: 0,
            out_dir: PathBuf::from("reports"),
        }
    }
}

fn cmd_encode(cfg: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let ds = load_dataset(&cfg.dataset_dir)?;
    let cb = BeamCodebook::build(ds.meta.cfg.n_ant, cfg.oversampling)?;
    let grid = SbGrid::new(ds.meta.cfg.n_rb, cfg.n_rbpsb)?;
    let reports: Vec<PrecoderReport> = ds
        .dl
        .iter()
        .map(|dl| {
            Ok(match cfg.scheme {
                Scheme::Type1 => PrecoderReport::TypeI(encode_type1(dl, &cb, &grid)?),
                Scheme::Type2 => {
                    PrecoderReport::TypeII(encode_type2(dl, &cb, &grid, cfg.l, cfg.criterion)?)
                }
                Scheme::EType2 => PrecoderReport::ETypeII(encode_etype2(
                    dl,
                    &cb,
                    &grid,
                    cfg.l,
                    cfg.m_v,
                    cfg.r,
                    cfg.variant,
                    cfg.sample_offset,
                )?),
            })
        })
        .collect::<Result<_>>()?;
    let file = ReportFile {
        version: REPORT_SCHEMA_VERSION,
        reports,
    };
    std::fs::create_dir_all(out_dir)
        .map_err(|e| SimError::io(out_dir.display().to_string(), e))?;
    let path = out_dir.join("reports.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&file)?)
        .map_err(|e| SimError::io(path.display().to_string(), e))?;
    println!("wrote {} reports to {}", file.reports.len(), path.display());
    Ok(())
}

/// Build (sampled precoders, UL PDP, DL channel) triples from a dataset via
/// the configured eType II reports.
fn build_train_samples(cfg: &PipelineConfig) -> Result<Vec<TrainSample>> {
    let ds = load_dataset(&cfg.dataset_dir)?;
    let cb = BeamCodebook::build(ds.meta.cfg.n_ant, cfg.oversampling)?;
    let grid = SbGrid::new(ds.meta.cfg.n_rb, cfg.n_rbpsb)?;
    let bw = ds.meta.cfg.bin_width();
    ds.dl
        .iter()
        .zip(&ds.ul)
        .map(|(dl, ul)| {
            let rep = encode_etype2(
                dl,
                &cb,
                &grid,
                cfg.l,
                cfg.m_v,
                cfg.r,
                cfg.variant,
                cfg.sample_offset,
            )?;
            Ok(TrainSample {
                sp: SampledPrecoders::from_etype2(&rep, &cb)?,
                ul_pdp: compute_pdp(ul, bw),
                dl: dl.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct TrainSrpnetConfig {
    pipeline: PipelineConfig,
    hyper: TrainHyper,
}

fn cmd_train_srpnet(cfg: &TrainSrpnetConfig, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let samples = build_train_samples(&cfg.pipeline)?;
    let mut hyper = cfg.hyper.clone();
    if let Some(s) = seed {
        hyper.seed = s;
    }
    let (params, log, _) = train_srpnet(&samples, &hyper)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| SimError::io(out_dir.display().to_string(), e))?;
    let ckpt = out_dir.join("srpnet");
    let mut meta = std::collections::BTreeMap::new();
    meta.insert("epochs_run".to_string(), serde_json::json!(log.len()));
    meta.insert("seed".to_string(), serde_json::json!(hyper.seed));
    srpsim::numerics::save_checkpoint(&ckpt, &params.blocks, &meta)?;
    write_log_csv(&log, &out_dir.join("srpnet_log.csv"))?;
    let best = log
        .iter()
        .map(|e| e.val_loss)
        .fold(f64::INFINITY, f64::min);
    println!(
        "trained {} epochs, best validation loss {best:.6}, checkpoint {}",
        log.len(),
        ckpt.display()
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct TrainSwitchConfig {
    pipeline: PipelineConfig,
    hyper: TrainHyper,
    lambdas: Vec<f64>,
    /// Network checkpoint scoring ng_srp; absent = deterministic core.
    srpnet_checkpoint: Option<PathBuf>,
}

impl Default for TrainSwitchConfig {
    fn default() -> Self {
        TrainSwitchConfig {
            pipeline: PipelineConfig::default(),
            hyper: TrainHyper::default(),
            lambdas: vec![1e-5, 5e-5, 1e-4, 5e-4, 1e-3],
            srpnet_checkpoint: None,
        }
    }
}

fn cmd_train_switch(cfg: &TrainSwitchConfig, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let samples = build_train_samples(&cfg.pipeline)?;
    let net = match &cfg.srpnet_checkpoint {
        Some(p) => Some(SrpnetParams::from_blocks(
            srpsim::numerics::load_checkpoint(p)?.0,
        )?),
        None => None,
    };
    let switch_samples: Vec<SwitchSample> = samples
        .iter()
        .map(|s| {
            let w_itp = interpolate_linear(&s.sp)?;
            let w_srp = match &net {
                Some(p) => srpnet_forward(&s.sp, &s.ul_pdp, p)?,
                None => deterministic_upsample(&s.sp, &s.ul_pdp)?,
            };
            let (_, ng_itp) = srpsim::harness::normalized_gain(&w_itp.values, &s.dl)?;
            let (_, ng_srp) = srpsim::harness::normalized_gain(&w_srp.values, &s.dl)?;
            Ok(SwitchSample {
                pdp: s.ul_pdp.clone(),
                ng_srp,
                ng_itp,
            })
        })
        .collect::<Result<_>>()?;
    let mut hyper = cfg.hyper.clone();
    if let Some(s) = seed {
        hyper.seed = s;
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| SimError::io(out_dir.display().to_string(), e))?;
    for &lambda in &cfg.lambdas {
        let (params, log) = train_switch(&switch_samples, lambda, &hyper)?;
        let path = out_dir.join(format!("switch_lambda{lambda:e}"));
        save_switch(&path, &params)?;
        println!(
            "lambda {lambda:e}: {} epochs, checkpoint {}",
            log.len(),
            path.display()
        );
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct ReportConfig {
    inputs: Vec<PathBuf>,
    out_dir: PathBuf,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            inputs: Vec::new(),
            out_dir: PathBuf::from("report"),
        }
    }
}

fn cmd_report(cfg: &ReportConfig, out_dir: &Path) -> Result<()> {
    if cfg.inputs.is_empty() {
        return Err(SimError::Config(
            "report needs a non-empty `inputs` list of CSV paths".into(),
        ));
    }
    let mut merged = String::new();
    let mut header: Option<String> = None;
    for p in &cfg.inputs {
        let text = std::fs::read_to_string(p)
            .map_err(|e| SimError::io(p.display().to_string(), e))?;
        let mut lines = text.lines();
        let h = lines
            .next()
            .ok_or_else(|| SimError::Data(format!("{}: empty CSV", p.display())))?;
        match &header {
            None => {
                header = Some(h.to_string());
                merged.push_str(h);
                merged.push('\n');
            }
            Some(prev) if prev != h => {
                return Err(SimError::Data(format!(
                    "{}: header `{h}` does not match `{prev}`",
                    p.display()
                )));
            }
            Some(_) => {}
        }
        for line in lines {
            merged.push_str(line);
            merged.push('\n');
        }
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| SimError::io(out_dir.display().to_string(), e))?;
    let path = out_dir.join("merged.csv");
    std::fs::write(&path, merged).map_err(|e| SimError::io(path.display().to_string(), e))?;
    println!("merged {} files into {}", cfg.inputs.len(), path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
    }
    match cli.cmd {
        Cmd::Gen => {
            let mut cfg: GenConfig = read_config(&cli.config)?;
            if let Some(s) = cli.seed {
                cfg.sim.seed = s;
            }
            let out = cli.out.clone().unwrap_or(cfg.out_dir.clone());
            let meta = generate_dataset(&cfg.sim, cfg.n_ue, cfg.sim.seed, &out)?;
            println!(
                "generated {} channels in {} (DS histogram: {:?})",
                meta.n_ue,
                out.display(),
                meta.ds_counts
            );
            Ok(())
        }
        Cmd::Encode => {
            let cfg: PipelineConfig = read_config(&cli.config)?;
            let out = cli.out.clone().unwrap_or(cfg.out_dir.clone());
            cmd_encode(&cfg, &out)
        }
        Cmd::TrainSrpnet => {
            let cfg: TrainSrpnetConfig = read_config(&cli.config)?;
            let out = cli.out.clone().unwrap_or(cfg.pipeline.out_dir.clone());
            cmd_train_srpnet(&cfg, &out, cli.seed)
        }
        Cmd::TrainSwitch => {
            let cfg: TrainSwitchConfig = read_config(&cli.config)?;
            let out = cli.out.clone().unwrap_or(cfg.pipeline.out_dir.clone());
            cmd_train_switch(&cfg, &out, cli.seed)
        }
        Cmd::Eval => {
            let mut cfg: EvalConfig = read_config(&cli.config)?;
            if let Some(out) = &cli.out {
                cfg.out_dir = out.clone();
            }
            let report = run_experiment(&cfg)?;
            println!(
                "evaluation complete: {} fig4 rows, {} fig5 rows, {} fig6 rows in {}",
                report.fig4.len(),
                report.fig5.len(),
                report.fig6.len(),
                cfg.out_dir.display()
            );
            Ok(())
        }
        Cmd::Report => {
            let cfg: ReportConfig = read_config(&cli.config)?;
            let out = cli.out.clone().unwrap_or(cfg.out_dir.clone());
            cmd_report(&cfg, &out)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
