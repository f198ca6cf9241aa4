//! `fvlab`: synthetic data, training, evaluation, probes, study statistics
//! and the study service from one binary.
//!
//! Every pipeline subcommand reads an optional flat `key = value` config
//! file (`--config`), applies its flags on top, writes its reports into the
//! output directory and echoes the effective settings there as
//! `<subcommand>.cfg`. Exit status: 0 success, 1 runtime error, 2 usage.

mod commands;
mod serve;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use settings::{Settings, UsageError};

#[derive(Parser)]
#[command(
    name = "fvlab",
    version,
    about = "Cross-modal face/voice co-embedding lab"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset manifest [default: <out>/manifest.jsonl].
    #[arg(long, global = true)]
    manifest: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    out: Option<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired face/voice dataset.
    Synth(SynthArgs),
    /// Split identities into disjoint train and test sets.
    Split(SplitArgs),
    /// Train the co-embedding heads.
    Train(TrainArgs),
    /// Two-way forced matching accuracy on the test identities.
    EvalMatch(EvalMatchArgs),
    /// Cross-modal retrieval recall@K on the test identities.
    EvalRecall(EvalRecallArgs),
    /// Linear attribute probes over learned embeddings.
    Probe(ProbeArgs),
    /// Write one embedding per clip and modality as JSON lines.
    ExportEmbeddings(ExportArgs),
    /// t tests, ANOVA and Tukey HSD over study accuracies.
    Stats(StatsArgs),
    /// Run the human study service.
    Serve(serve::ServeArgs),
}

type Flags = Vec<(&'static str, Option<String>)>;

fn flag<T: ToString>(key: &'static str, value: &Option<T>) -> (&'static str, Option<String>) {
    (key, value.as_ref().map(T::to_string))
}

fn switch(key: &'static str, on: bool) -> (&'static str, Option<String>) {
    (key, on.then(|| "true".to_string()))
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    ids: Option<usize>,
    #[arg(long)]
    clips: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Fraction of variance shared between a clip's face and voice.
    #[arg(long)]
    shared: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    feature_dim: Option<usize>,
}

impl SynthArgs {
    fn flags(&self) -> Flags {
        vec![
            flag("ids", &self.ids),
            flag("clips", &self.clips),
            flag("latent_dim", &self.latent_dim),
            flag("shared", &self.shared),
            flag("noise", &self.noise),
            flag("feature_dim", &self.feature_dim),
        ]
    }
}

#[derive(Args)]
struct SplitArgs {
    /// Training identities [default: 80%].
    #[arg(long)]
    n_train: Option<usize>,
    /// Split file to write [default: <out>/split.json].
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    split: Option<String>,
    /// Final checkpoint path [default: <out>/model.ckpt].
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lr_decay_every: Option<usize>,
    #[arg(long)]
    hard_mining_start: Option<usize>,
    /// triplet, contrastive or classifier.
    #[arg(long)]
    objective: Option<String>,
    /// V2F or F2V.
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    normalize_features: bool,
}

impl TrainArgs {
    fn flags(&self) -> Flags {
        vec![
            flag("split", &self.split),
            flag("checkpoint", &self.checkpoint),
            flag("iterations", &self.iterations),
            flag("batch_size", &self.batch_size),
            flag("lr", &self.lr),
            flag("lr_decay_every", &self.lr_decay_every),
            flag("hard_mining_start", &self.hard_mining_start),
            flag("objective", &self.objective),
            flag("direction", &self.direction),
            flag("hidden_dim", &self.hidden_dim),
            flag("embed_dim", &self.embed_dim),
            flag("checkpoint_every", &self.checkpoint_every),
            switch("normalize_features", self.normalize_features),
        ]
    }
}

/// Model and data selection shared by the evaluation subcommands.
#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    checkpoint: Option<String>,
    /// Scale features to unit L2 norm (match the training setting).
    #[arg(long)]
    normalize_features: bool,
}

impl ModelArgs {
    fn flags(&self) -> Flags {
        vec![
            flag("split", &self.split),
            flag("checkpoint", &self.checkpoint),
            switch("normalize_features", self.normalize_features),
        ]
    }
}

#[derive(Args)]
struct EvalMatchArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// none, G, E, GE or GEFA.
    #[arg(long)]
    grouping: Option<String>,
    /// Demographic cell for GEFA, as gender/ethnicity/fluency/age (e.g. m/5/Y/30s).
    #[arg(long)]
    gefa_target: Option<String>,
    #[arg(long)]
    trials_per_probe: Option<usize>,
    /// V2F or F2V [default: the model's].
    #[arg(long)]
    direction: Option<String>,
    /// Score with uniform noise instead of the model (chance baseline).
    #[arg(long)]
    random_scores: bool,
}

#[derive(Args)]
struct EvalRecallArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Gallery size N.
    #[arg(long)]
    set_size: Option<usize>,
    /// Comma-separated K values.
    #[arg(long)]
    ks: Option<String>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    random_scores: bool,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated: gender, fluency, age:<30|30s|40s|50s|>=60,
    /// ethnicity:<1-6>, facial:<name>, pitch, loudness, random_attr.
    #[arg(long)]
    attributes: Option<String>,
    /// face, voice or both.
    #[arg(long)]
    modality: Option<String>,
    #[arg(long)]
    n_trials: Option<usize>,
    /// test or all.
    #[arg(long)]
    probe_set: Option<String>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Output file [default: <out>/embeddings.jsonl].
    #[arg(long)]
    embeddings: Option<String>,
}

#[derive(Args)]
struct StatsArgs {
    /// JSON lines of {"label", "values": [...]} or {"label", "mean", "sd", "n"}.
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tukey_draws: Option<usize>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    let mut flags: Flags = vec![
        flag("manifest", &g.manifest),
        flag("seed", &g.seed),
        flag("out", &g.out),
    ];
    let command = match cli.command {
        Command::Serve(args) => return serve::run(g.config.as_deref(), &g.manifest, g.seed, &args),
        Command::Synth(a) => {
            flags.extend(a.flags());
            commands::synth as fn(&mut Settings) -> anyhow::Result<()>
        }
        Command::Split(a) => {
            flags.extend([flag("n_train", &a.n_train), flag("split", &a.split)]);
            commands::split
        }
        Command::Train(a) => {
            flags.extend(a.flags());
            commands::train
        }
        Command::EvalMatch(a) => {
            flags.extend(a.model.flags());
            flags.extend([
                flag("grouping", &a.grouping),
                flag("gefa_target", &a.gefa_target),
                flag("trials_per_probe", &a.trials_per_probe),
                flag("direction", &a.direction),
                switch("random_scores", a.random_scores),
            ]);
            commands::eval_match
        }
        Command::EvalRecall(a) => {
            flags.extend(a.model.flags());
            flags.extend([
                flag("set_size", &a.set_size),
                flag("ks", &a.ks),
                flag("repeats", &a.repeats),
                flag("direction", &a.direction),
                switch("random_scores", a.random_scores),
            ]);
            commands::eval_recall
        }
        Command::Probe(a) => {
            flags.extend(a.model.flags());
            flags.extend([
                flag("attributes", &a.attributes),
                flag("modality", &a.modality),
                flag("n_trials", &a.n_trials),
                flag("probe_set", &a.probe_set),
            ]);
            commands::probe
        }
        Command::ExportEmbeddings(a) => {
            flags.extend(a.model.flags());
            flags.push(flag("embeddings", &a.embeddings));
            commands::export_embeddings
        }
        Command::Stats(a) => {
            flags.extend([
                flag("input", &a.input),
                flag("mu0", &a.mu0),
                flag("alpha", &a.alpha),
                flag("tukey_draws", &a.tukey_draws),
            ]);
            commands::stats
        }
    };
    let mut settings = Settings::load(g.config.as_deref(), flags)?;
    command(&mut settings)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                eprintln!("run `fvlab --help` for usage");
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
