use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use lst_ssvep::config::RunConfig;
use lst_ssvep::domain::Dataset;
use lst_ssvep::error::{Error, Result};
use lst_ssvep::eval::run_leave_one_subject_out;
use lst_ssvep::io::{read_dataset, read_model, write_dataset, write_model};
use lst_ssvep::lst::{build_targets, transfer_dataset};
use lst_ssvep::synth::generate_subject_dataset;
use lst_ssvep::trca::fit_model;

/// SSVEP decoding with ensemble TRCA and least-squares cross-domain transfer.
#[derive(Parser)]
#[command(name = "lst-ssvep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic datasets, one file per subject and device.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a TRCA model on every trial of a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map a source dataset into the channel space of a new domain.
    Transfer {
        #[arg(long)]
        target_calib: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the leave-one-subject-out comparison on a directory of datasets.
    Evaluate {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Concurrent evaluation cells [default: available parallelism].
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Classify every trial of a dataset with a saved model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_path(p),
        None => Ok(RunConfig::default()),
    }
}

fn prepare_out(out: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(&cfg.io.resolved_config), cfg.to_json_pretty() + "\n")?;
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, out } => {
            let cfg = load_config(config.as_deref())?;
            prepare_out(&out, &cfg)?;
            for d in 0..cfg.synth.device_montages.len() {
                for s in 0..cfg.synth.n_subjects {
                    let ds = generate_subject_dataset(s, d, &cfg.synth)?;
                    let name = format!(
                        "{}_{}.{}",
                        ds.domain.subject, ds.montage.device_name, cfg.io.dataset_extension
                    );
                    write_dataset(&ds, out.join(&name))?;
                    eprintln!("wrote {name}");
                }
            }
        }
        Command::Train { data, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let ds = read_dataset(&data)?;
            prepare_out(&out, &cfg)?;
            let model = fit_model(&ds, &cfg.filterbank, cfg.preprocess.padding_seconds)?;
            write_model(&model, out.join(&cfg.io.model_file))?;
            eprintln!("trained on {} trials", ds.epochs.len());
        }
        Command::Transfer {
            target_calib,
            source,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let calib = read_dataset(&target_calib)?;
            let src = read_dataset(&source)?;
            prepare_out(&out, &cfg)?;
            let targets = build_targets(&calib)?;
            let (moved, maps) = transfer_dataset(&src, &targets, &calib.montage, cfg.lst.scope)?;
            let name = format!("{}_to_{}.{}", stem(&source), calib.montage.device_name, cfg.io.dataset_extension);
            write_dataset(&moved, out.join(name))?;
            let mut csv = String::from("stimulusIndex,sourceTrialIndex,residualFrobenius,rankDeficient\n");
            for m in &maps {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    m.stimulus_index.unwrap_or_default(),
                    m.source_trial_index.unwrap_or_default(),
                    m.residual_frobenius,
                    m.rank_deficient
                );
            }
            fs::write(out.join(&cfg.io.residual_csv), csv)?;
            eprintln!("transferred {} trials into {} channels", maps.len(), moved.n_channels());
        }
        Command::Evaluate {
            data_dir,
            config,
            out,
            jobs,
        } => {
            let cfg = load_config(config.as_deref())?;
            let mut files: Vec<PathBuf> = fs::read_dir(&data_dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == cfg.io.dataset_extension.as_str()))
                .collect();
            files.sort();
            let datasets = files.iter().map(read_dataset).collect::<Result<Vec<Dataset>>>()?;
            eprintln!("loaded {} datasets", datasets.len());
            prepare_out(&out, &cfg)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            let opts = cfg.eval_options();
            let report = pool.install(|| run_leave_one_subject_out(&datasets, &cfg.eval, &opts))?;
            fs::write(out.join(&cfg.io.report_csv), report.to_csv())?;
            let summary = serde_json::to_string_pretty(&report.summary_json())?;
            fs::write(out.join(&cfg.io.summary_json), summary + "\n")?;
            eprintln!("{} report rows", report.rows.len());
        }
        Command::Classify { model, data, out } => {
            let model = read_model(&model)?;
            let ds = read_dataset(&data)?;
            fs::create_dir_all(&out)?;
            let mut csv = String::from("stimulusIndex,trialIndex,decision");
            for s in &model.stimuli {
                let _ = write!(csv, ",rho{}", s.index);
            }
            csv.push('\n');
            let mut correct = 0;
            for e in ds.sorted_epochs() {
                let score = model.classify(&e.data)?;
                correct += usize::from(score.decision == e.stimulus_index);
                let _ = write!(csv, "{},{},{}", e.stimulus_index, e.trial_index, score.decision);
                for r in &score.rho {
                    let _ = write!(csv, ",{r}");
                }
                csv.push('\n');
            }
            fs::write(out.join("classification.csv"), csv)?;
            eprintln!("{correct}/{} trials matched their labels", ds.epochs.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let help = format!("Config keys and defaults (JSON, camelCase):\n{}", RunConfig::documented_defaults());
    let mut cmd = Cli::command().after_long_help(help.clone());
    for name in ["synth", "train", "transfer", "evaluate"] {
        cmd = cmd.mut_subcommand(name, |c| c.after_long_help(help.clone()));
    }
    let matches = cmd.get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
