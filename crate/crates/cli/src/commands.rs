use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fvlab_core::datamodel::{
    split_by_identity, synth_generate, Dataset, Demographics, Manifest, Modality, SplitSpec,
    SynthConfig,
};
use fvlab_core::evaluation::{
    export_embeddings_to_file, make_match_trials, recall_at_k, run_matching, write_jsonl_row,
    Grouping, GroupingMode, ModelScorer, RandomScorer, Scorer,
};
use fvlab_core::model::{load_checkpoint, save_checkpoint, Direction, ModelParams, Objective};
use fvlab_core::numerics::Rng;
use fvlab_core::probes::{probe_data, run_probe, Attribute, ProbeSpec, SvmParams};
use fvlab_core::stats::{
    anova_oneway, one_sample_t, one_sample_t_from_summary, tukey_hsd, SampleSet, SummaryRow,
    DEFAULT_TUKEY_DRAWS,
};
use fvlab_core::trainer::{train_with_checkpoints, TrainConfig};
use serde::Deserialize;
use serde_json::json;

use crate::settings::{usage, List, Settings};

/// Configuration mistakes reported by the core library are usage errors.
fn core(e: fvlab_core::Error) -> anyhow::Error {
    match e {
        fvlab_core::Error::Config(m) => usage(m),
        other => other.into(),
    }
}

fn jsonl_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn manifest_path(s: &mut Settings) -> PathBuf {
    let out = s.out_dir();
    s.path("manifest", out.join("manifest.jsonl"))
}

fn load_dataset(s: &mut Settings) -> Result<Dataset> {
    let path = manifest_path(s);
    let dataset = Dataset::load(&path).with_context(|| format!("loading {}", path.display()))?;
    Ok(if s.value("normalize_features", "false")? {
        dataset.l2_normalized()
    } else {
        dataset
    })
}

fn load_split(s: &mut Settings) -> Result<SplitSpec> {
    let out = s.out_dir();
    let path = s.path("split", out.join("split.json"));
    SplitSpec::load(&path)
        .with_context(|| format!("loading split {} (run `fvlab split` first)", path.display()))
}

fn load_model(s: &mut Settings) -> Result<ModelParams> {
    let out = s.out_dir();
    let path = s.path("checkpoint", out.join("model.ckpt"));
    load_checkpoint(&path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn parse_modalities(value: &str) -> Result<Vec<Modality>> {
    match value {
        "face" => Ok(vec![Modality::Face]),
        "voice" => Ok(vec![Modality::Voice]),
        "both" => Ok(vec![Modality::Face, Modality::Voice]),
        other => Err(usage(format!(
            "`modality = {other}`: expected face, voice or both"
        ))),
    }
}

pub fn synth(s: &mut Settings) -> Result<()> {
    let d = SynthConfig::default();
    let config = SynthConfig {
        n_identities: s.value("ids", &d.n_identities.to_string())?,
        clips_per_identity: s.value("clips", &d.clips_per_identity.to_string())?,
        latent_dim: s.value("latent_dim", &d.latent_dim.to_string())?,
        shared_ratio: s.value("shared", &d.shared_ratio.to_string())?,
        noise_sigma: s.value("noise", &d.noise_sigma.to_string())?,
        feature_dim: s.value("feature_dim", &d.feature_dim.to_string())?,
        seed: s.value("seed", "0")?,
    };
    config.validate().map_err(core)?;
    let out = s.out_dir();
    let dataset = synth_generate(&config).map_err(core)?;
    let manifest = dataset.write(&out, "manifest.jsonl")?;
    s.echo("synth")?;
    println!(
        "synth: {} identities x {} clips ({}-d features) -> {}",
        config.n_identities,
        config.clips_per_identity,
        config.feature_dim,
        manifest.display()
    );
    Ok(())
}

pub fn split(s: &mut Settings) -> Result<()> {
    let path = manifest_path(s);
    let manifest = Manifest::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let n_ids = manifest.identities().len();
    let n_train: usize = s.value("n_train", &(n_ids * 4 / 5).to_string())?;
    let seed = s.value("seed", "0")?;
    let spec = split_by_identity(&manifest, n_train, seed).map_err(core)?;
    let out = s.out_dir();
    let dest = s.path("split", out.join("split.json"));
    std::fs::create_dir_all(&out)?;
    spec.save(&dest)?;
    s.echo("split")?;
    println!(
        "split: {} train / {} test identities -> {}",
        spec.train_identities.len(),
        spec.test_identities.len(),
        dest.display()
    );
    Ok(())
}

pub fn train_config(s: &mut Settings) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let config = TrainConfig {
        iterations: s.value("iterations", &d.iterations.to_string())?,
        batch_size: s.value("batch_size", &d.batch_size.to_string())?,
        lr: s.value("lr", &d.lr.to_string())?,
        lr_decay_factor: s.value("lr_decay_factor", &d.lr_decay_factor.to_string())?,
        lr_decay_every: s.value("lr_decay_every", &d.lr_decay_every.to_string())?,
        beta1: s.value("beta1", &d.beta1.to_string())?,
        beta2: s.value("beta2", &d.beta2.to_string())?,
        epsilon: s.value("epsilon", &d.epsilon.to_string())?,
        hard_mining_start: s.value("hard_mining_start", &d.hard_mining_start.to_string())?,
        hard_mining_pool: s.value("hard_mining_pool", &d.hard_mining_pool.to_string())?,
        hard_mining_keep: s.value("hard_mining_keep", &d.hard_mining_keep.to_string())?,
        direction: s.value::<Direction>("direction", &d.direction.to_string())?,
        objective: s.value::<Objective>("objective", d.objective.as_str())?,
        hidden_dim: s.value("hidden_dim", &d.hidden_dim.to_string())?,
        embed_dim: s.value("embed_dim", &d.embed_dim.to_string())?,
        margin: s.value("margin", &d.margin.to_string())?,
        normalize_features: s.value("normalize_features", &d.normalize_features.to_string())?,
        seed: s.value("seed", "0")?,
        checkpoint_every: s.value("checkpoint_every", &d.checkpoint_every.to_string())?,
    };
    config.validate().map_err(core)?;
    Ok(config)
}

pub fn train(s: &mut Settings) -> Result<()> {
    let config = train_config(s)?;
    let path = manifest_path(s);
    let dataset = Dataset::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let split = load_split(s)?;
    let out = s.out_dir();
    let checkpoint = s.path("checkpoint", out.join("model.ckpt"));
    std::fs::create_dir_all(&out)?;
    s.echo("train")?;
    let (params, log) = train_with_checkpoints(&dataset, &split, &config, |it, p| {
        save_checkpoint(p, out.join(format!("model_{it:07}.ckpt")))
    })?;
    save_checkpoint(&params, &checkpoint)?;
    log.write_jsonl(out.join("train_log.jsonl"))?;
    let n = log.records.len();
    let tail = n.saturating_sub(100)..n;
    println!(
        "train: {} iterations ({} {}), final mean loss {:.4}, {} positive fallbacks -> {}",
        config.iterations,
        config.objective,
        config.direction,
        if n == 0 {
            f32::NAN
        } else {
            log.mean_loss(tail)
        },
        log.positive_fallbacks,
        checkpoint.display()
    );
    Ok(())
}

/// The model scorer, or the uniform-random baseline when `random_scores`
/// is set.
enum AnyScorer {
    Model(ModelParams),
    Random(Rng),
}

impl AnyScorer {
    fn load(s: &mut Settings, seed: u64) -> Result<(Self, Option<Direction>)> {
        if s.value("random_scores", "false")? {
            Ok((AnyScorer::Random(Rng::new(seed ^ 0x5EED)), None))
        } else {
            let m = load_model(s)?;
            let d = m.direction;
            Ok((AnyScorer::Model(m), Some(d)))
        }
    }

    fn suffix(&self) -> &'static str {
        match self {
            AnyScorer::Model(_) => "",
            AnyScorer::Random(_) => "_random",
        }
    }
}

fn direction(s: &mut Settings, model: Option<Direction>) -> Result<Direction> {
    s.value("direction", &model.unwrap_or(Direction::V2F).to_string())
}

pub fn eval_match(s: &mut Settings) -> Result<()> {
    let mode: GroupingMode = s.value("grouping", "none")?;
    let target: Option<Demographics> = s.optional("gefa_target")?;
    let grouping = Grouping::new(mode, target).map_err(core)?;
    let per_probe = s.value("trials_per_probe", "8")?;
    let seed = s.value("seed", "0")?;
    let dataset = load_dataset(s)?;
    let split = load_split(s)?;
    let (scorer, model_dir) = AnyScorer::load(s, seed)?;
    let direction = direction(s, model_dir)?;
    let trials = make_match_trials(
        &dataset,
        &split.test_set(),
        grouping,
        direction,
        per_probe,
        seed,
    )?;
    let report = match &scorer {
        AnyScorer::Model(m) => run_matching(&mut ModelScorer(m), &trials, &dataset)?,
        AnyScorer::Random(r) => run_matching(&mut RandomScorer(r.clone()), &trials, &dataset)?,
    };
    let out = s.out_dir();
    std::fs::create_dir_all(&out)?;
    let path = out.join(format!("eval_match_{mode}{}.jsonl", scorer.suffix()));
    let mut w = jsonl_writer(&path)?;
    write_jsonl_row(&mut w, &report)?;
    w.flush()?;
    s.echo("eval-match")?;
    println!(
        "eval-match: {direction} grouping {} accuracy {:.1}% over {} trials ({} ties) -> {}",
        report.grouping,
        100.0 * report.accuracy,
        report.n_trials,
        report.n_ties,
        path.display()
    );
    Ok(())
}

pub fn eval_recall(s: &mut Settings) -> Result<()> {
    let set_size = s.value("set_size", "50")?;
    let ks: List<usize> = s.value("ks", "1,5,10,50,100")?;
    let repeats = s.value("repeats", "10")?;
    let seed = s.value("seed", "0")?;
    let dataset = load_dataset(s)?;
    let split = load_split(s)?;
    let (scorer, model_dir) = AnyScorer::load(s, seed)?;
    let direction = direction(s, model_dir)?;
    let test = split.test_set();
    fn run<S: Scorer>(
        sc: &mut S,
        d: &Dataset,
        t: &std::collections::BTreeSet<String>,
        dir: Direction,
        n: usize,
        ks: &[usize],
        r: usize,
        seed: u64,
    ) -> fvlab_core::Result<fvlab_core::evaluation::RecallTable> {
        recall_at_k(sc, d, t, dir, n, ks, r, seed)
    }
    let table = match &scorer {
        AnyScorer::Model(m) => run(
            &mut ModelScorer(m),
            &dataset,
            &test,
            direction,
            set_size,
            &ks.0,
            repeats,
            seed,
        ),
        AnyScorer::Random(r) => run(
            &mut RandomScorer(r.clone()),
            &dataset,
            &test,
            direction,
            set_size,
            &ks.0,
            repeats,
            seed,
        ),
    }
    .map_err(core)?;
    let out = s.out_dir();
    std::fs::create_dir_all(&out)?;
    let path = out.join(format!("recall{}.jsonl", scorer.suffix()));
    let mut w = jsonl_writer(&path)?;
    write_jsonl_row(&mut w, &table)?;
    w.flush()?;
    s.echo("eval-recall")?;
    let cells: Vec<String> = table
        .ks
        .iter()
        .zip(&table.recalls)
        .map(|(k, r)| format!("R@{k} {:.1}%", 100.0 * r))
        .collect();
    println!(
        "eval-recall: {direction} N={set_size} {} over {} queries -> {}",
        cells.join("  "),
        table.n_queries,
        path.display()
    );
    Ok(())
}

pub fn probe(s: &mut Settings) -> Result<()> {
    let attributes: List<Attribute> = s.value("attributes", "gender")?;
    let modalities = parse_modalities(&s.value::<String>("modality", "both")?)?;
    let d = SvmParams::default();
    let svm = SvmParams {
        epochs: s.value("svm_epochs", &d.epochs.to_string())?,
        lr: s.value("svm_lr", &d.lr.to_string())?,
        l2_penalty: s.value("svm_l2", &d.l2_penalty.to_string())?,
    };
    let n_trials = s.value("n_trials", "20")?;
    let holdout_fraction = s.value("holdout_fraction", "0.2")?;
    let subset: String = s.value("probe_set", "test")?;
    let seed = s.value("seed", "0")?;
    let dataset = load_dataset(s)?;
    let dataset = match subset.as_str() {
        "all" => dataset,
        "test" => dataset.subset(&load_split(s)?.test_set()),
        other => {
            return Err(usage(format!(
                "`probe_set = {other}`: expected test or all"
            )))
        }
    };
    let model = load_model(s)?;

    let out = s.out_dir();
    std::fs::create_dir_all(&out)?;
    let mut rows = jsonl_writer(&out.join("probes.jsonl"))?;
    let mut table = jsonl_writer(&out.join("probes.tsv"))?;
    writeln!(
        table,
        "attribute\tmodality\tmap_pct\tci_pct\tchance_flagged"
    )?;
    println!(
        "probe: {} clips ({subset} identities)",
        dataset.manifest.records.len()
    );
    for attribute in &attributes.0 {
        for &modality in &modalities {
            let data = probe_data(&model, &dataset, modality, attribute)?;
            let spec = ProbeSpec {
                n_trials,
                holdout_fraction,
                svm: svm.clone(),
                ..ProbeSpec::new(attribute.to_string(), modality, seed)
            };
            let result = run_probe(&data, &spec).map_err(core)?;
            write_jsonl_row(&mut rows, &result)?;
            let line = format!(
                "{}\t{}\t{:.1}\t{:.1}\t{}",
                result.attribute,
                modality.as_str(),
                100.0 * result.map_mean,
                100.0 * result.ci_halfwidth,
                if result.chance_flagged { "chance" } else { "" }
            );
            writeln!(table, "{line}")?;
            println!("  {line}");
        }
    }
    rows.flush()?;
    table.flush()?;
    s.echo("probe")?;
    Ok(())
}

pub fn export_embeddings(s: &mut Settings) -> Result<()> {
    let dataset = load_dataset(s)?;
    let model = load_model(s)?;
    let out = s.out_dir();
    std::fs::create_dir_all(&out)?;
    let path = s.path("embeddings", out.join("embeddings.jsonl"));
    let rows = export_embeddings_to_file(&model, &dataset, &path)?;
    s.echo("export-embeddings")?;
    println!("export-embeddings: {rows} rows -> {}", path.display());
    Ok(())
}

/// One line of a stats input file: raw per-participant accuracies, or a
/// published (mean, sd, n) summary.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum StatsLine {
    Raw {
        label: String,
        values: Vec<f64>,
    },
    Summary {
        label: String,
        mean: f64,
        sd: f64,
        n: usize,
    },
}

pub fn stats(s: &mut Settings) -> Result<()> {
    let input: PathBuf = s.required("input")?;
    let mu0 = s.value("mu0", "0.5")?;
    let alpha = s.value("alpha", "0.05")?;
    let draws = s.value("tukey_draws", &DEFAULT_TUKEY_DRAWS.to_string())?;
    let seed = s.value("seed", "0")?;
    let text =
        std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
    let mut groups = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let parsed: StatsLine = serde_json::from_str(line)
            .with_context(|| format!("{} line {}", input.display(), i + 1))?;
        let (label, mean, sd, n, t) = match parsed {
            StatsLine::Raw { label, values } => {
                let set = SampleSet::new(label.clone(), values)?;
                let t = one_sample_t(&set, mu0)?;
                let row = (label, set.mean(), set.sd(), set.n(), t);
                groups.push(set);
                row
            }
            StatsLine::Summary { label, mean, sd, n } => {
                let t = one_sample_t_from_summary(mean, sd, n, mu0)?;
                (label, mean, sd, n, t)
            }
        };
        rows.push((
            SummaryRow {
                label,
                mean,
                sd: Some(sd),
                t: Some(t.statistic),
                n,
                p_value: Some(t.p_value),
            },
            t,
        ));
    }
    if rows.is_empty() {
        return Err(anyhow::anyhow!("{} holds no groups", input.display()));
    }

    let out = s.out_dir();
    std::fs::create_dir_all(&out)?;
    let mut w = jsonl_writer(&out.join("stats.jsonl"))?;
    println!("label\tmean\tsd\tt (n)\tp");
    for (row, test) in &rows {
        println!("{row}");
        write_jsonl_row(
            &mut w,
            &json!({"kind": "t_test", "mu0": mu0, "summary": row, "test": test}),
        )?;
    }
    if groups.len() >= 2 {
        let anova = anova_oneway(&groups)?;
        println!(
            "ANOVA: F = {:.2}, p = {:.3e}",
            anova.statistic, anova.p_value
        );
        write_jsonl_row(&mut w, &json!({"kind": "anova", "test": anova}))?;
        let tukey = tukey_hsd(&groups, alpha, draws, seed)?;
        for p in tukey.pairs.iter().filter(|p| p.significant) {
            println!(
                "Tukey: {} vs {}: diff {:+.3}, p = {:.4}",
                tukey.labels[p.a], tukey.labels[p.b], p.mean_diff, p.p_value
            );
        }
        write_jsonl_row(&mut w, &json!({"kind": "tukey", "result": tukey}))?;
    }
    w.flush()?;
    s.echo("stats")?;
    Ok(())
}
