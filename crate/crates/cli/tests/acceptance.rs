//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary so the lines always reach the test log.

#[path = "../../core/tests/common/gradient_oracle.rs"]
mod gradient_oracle;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use fvlab_core::datamodel::{split_by_identity, synth_generate, Dataset, Modality, SynthConfig};
use fvlab_core::evaluation::{
    make_match_trials, recall_at_k, run_matching, Grouping, GroupingMode, ModelScorer,
    RandomScorer, Scorer,
};
use fvlab_core::model::{
    triplet_loss, triplet_loss_from_distances, Direction, ModelParams, Objective,
};
use fvlab_core::numerics::Rng;
use fvlab_core::probes::{probe_data, run_probe, Attribute, ProbeData, ProbeSpec};
use fvlab_core::stats::one_sample_t_from_summary;
use fvlab_core::trainer::{adam_step, lr_at, train, AdamState, TrainConfig};
use fvlab_studysvc::session::{Choice, TrialKind};
use fvlab_studysvc::stimuli::Person;
use fvlab_studysvc::{ExperimentId, StimulusPool, StudyStore};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn loss_closed_form() -> Verdict {
    let mut rng = Rng::new(11);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let dim = 1 + (rng.next_u64() % 16) as usize;
        let scale = 0.1 + 3.0 * rng.uniform();
        let mut v = || {
            (0..dim)
                .map(|_| (scale * rng.normal()) as f32)
                .collect::<Vec<f32>>()
        };
        let (a, p, n) = (v(), v(), v());
        let dist = |x: &[f32], y: &[f32]| {
            x.iter()
                .zip(y)
                .map(|(&u, &w)| (u as f64 - w as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let s = 1.0 / (1.0 + (dist(&a, &n) - dist(&a, &p)).exp());
        let expected = 2.0 * s * s;
        worst = worst.max((triplet_loss(&a, &p, &n).unwrap() as f64 - expected).abs());
    }
    let mut boundary = 0.0f64;
    for _ in 0..1000 {
        let d = (10.0 * rng.uniform()) as f32;
        boundary = boundary.max((triplet_loss_from_distances(d, d) as f64 - 0.5).abs());
        let v: Vec<f32> = (0..8).map(|_| rng.normal() as f32).collect();
        let neg: Vec<f32> = v.iter().map(|x| -x).collect();
        boundary = boundary.max((triplet_loss(&[0.0; 8], &v, &neg).unwrap() as f64 - 0.5).abs());
    }
    check(
        worst < 1e-6 && boundary < 1e-9,
        format!("max |loss - 2s^2| = {worst:.2e} over 10^4 triples, max |loss - 0.5| at d+ = d- is {boundary:.1e}"),
    )
}

fn gradients() -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for objective in [
        Objective::Triplet,
        Objective::Contrastive,
        Objective::Classifier,
    ] {
        let o = gradient_oracle::run(objective);
        ok &= o.max_rel_err < gradient_oracle::TOLERANCE;
        parts.push(format!(
            "{objective} {:.1e} ({} checked)",
            o.max_rel_err, o.checked
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        ok && secs < 60.0,
        format!(
            "worst rel err over 50 seeds: {} in {secs:.1}s",
            parts.join(", ")
        ),
    )
}

fn optimizer() -> Verdict {
    let params = ModelParams::init(6, 5, 4, Objective::Classifier, Direction::V2F, 1).unwrap();
    let mut grads = params.zeros_like();
    let mut rng = Rng::new(2);
    for (_, block) in grads.blocks_mut() {
        for g in block.iter_mut() {
            let magnitude = 10f64.powf(-2.0 + 4.0 * rng.uniform());
            *g = (if rng.bernoulli(0.5) {
                magnitude
            } else {
                -magnitude
            }) as f32;
        }
    }
    let lr = 1e-3;
    let mut stepped = params.clone();
    let mut state = AdamState::new(&params, 0.9, 0.999, 1e-8);
    adam_step(&mut stepped, &grads, &mut state, lr).unwrap();
    let mut worst = 0.0f64;
    for (((_, before), (_, after)), (_, g)) in params
        .blocks()
        .iter()
        .zip(stepped.blocks())
        .zip(grads.blocks())
    {
        for ((&p0, &p1), &gi) in before.iter().zip(after).zip(g) {
            let step = (p0 as f64 - p1 as f64) * (gi as f64).signum();
            worst = worst.max((step / lr - 1.0).abs());
        }
    }
    let config = TrainConfig::default();
    let points = [(0, 1e-3), (80_000, 1e-4), (160_000, 1e-5)];
    let schedule_ok = points
        .iter()
        .all(|&(it, want)| ((lr_at(&config, it) - want) / want).abs() < 1e-12);
    check(
        worst < 1e-4 && schedule_ok,
        format!(
            "first step |dp|/lr within {worst:.1e} of 1; lr_at(0, 80k, 160k) = {:.0e}, {:.0e}, {:.0e}",
            lr_at(&config, 0),
            lr_at(&config, 80_000),
            lr_at(&config, 160_000)
        ),
    )
}

fn match_accuracy(data: &Dataset, shared: f64, groupings: &[GroupingMode]) -> Vec<f64> {
    let split = split_by_identity(&data.manifest, 200, 3).unwrap();
    let config = TrainConfig {
        seed: 3,
        ..TrainConfig::desk()
    };
    let (params, _) = train(data, &split, &config).unwrap();
    groupings
        .iter()
        .map(|&g| {
            let trials = make_match_trials(
                data,
                &split.test_set(),
                Grouping::new(g, None).unwrap(),
                Direction::V2F,
                8,
                3,
            )
            .unwrap();
            let r = run_matching(&mut ModelScorer(&params), &trials, data).unwrap();
            eprintln!(
                "  shared {shared}: grouping {g} accuracy {:.2}% ({} trials)",
                100.0 * r.accuracy,
                r.n_trials
            );
            r.accuracy
        })
        .collect()
}

fn learnability() -> Verdict {
    let start = Instant::now();
    let desk = SynthConfig {
        seed: 3,
        ..SynthConfig::desk()
    };
    let signal = synth_generate(&desk).unwrap();
    let acc = match_accuracy(&signal, 0.9, &[GroupingMode::None, GroupingMode::G]);
    let blind = synth_generate(&SynthConfig {
        shared_ratio: 0.0,
        ..desk
    })
    .unwrap();
    let chance = match_accuracy(&blind, 0.0, &[GroupingMode::None])[0];
    let secs = start.elapsed().as_secs_f64();
    check(
        acc[0] >= 0.70 && (chance - 0.5).abs() <= 0.03 && acc[1] < acc[0] && secs < 300.0,
        format!(
            "shared 0.9: none {:.1}%, G {:.1}%; shared 0: none {:.1}%; 200/50 ids, 2000 iterations, {secs:.0}s",
            100.0 * acc[0],
            100.0 * acc[1],
            100.0 * chance
        ),
    )
}

/// Scores 1 for a face and voice of the same identity, 0 otherwise.
struct Oracle(HashMap<Vec<u32>, String>);

impl Scorer for Oracle {
    type Code = String;

    fn encode(&self, _: Modality, x: &[f32]) -> fvlab_core::Result<String> {
        Ok(self.0[&x.iter().map(|v| v.to_bits()).collect::<Vec<u32>>()].clone())
    }

    fn compare(&mut self, face: &String, voice: &String) -> fvlab_core::Result<f32> {
        Ok(if face == voice { 1.0 } else { 0.0 })
    }
}

fn retrieval() -> Verdict {
    let data = synth_generate(&SynthConfig {
        n_identities: 250,
        clips_per_identity: 2,
        feature_dim: 8,
        latent_dim: 4,
        seed: 6,
        ..SynthConfig::default()
    })
    .unwrap();
    let ids: BTreeSet<String> = data.manifest.identities().into_iter().collect();
    let ks = [1, 5, 10, 50, 100];
    let table = recall_at_k(
        &mut RandomScorer(Rng::new(8)),
        &data,
        &ids,
        Direction::V2F,
        250,
        &ks,
        40,
        9,
    )
    .unwrap();
    let n = table.n_queries as f64;
    let mut ok = true;
    let mut cells = Vec::new();
    for (&k, &r) in ks.iter().zip(&table.recalls) {
        let p = k as f64 / 250.0;
        let se = (p * (1.0 - p) / n).sqrt();
        let z = (r - p) / se;
        ok &= z.abs() <= 3.0;
        cells.push(format!("R@{k} {:.2}% ({z:+.1} SE)", 100.0 * r));
    }

    let mut lookup = HashMap::new();
    for (i, rec) in data.manifest.records.iter().enumerate() {
        for m in [Modality::Face, Modality::Voice] {
            let bits = data
                .feature(i, m)
                .unwrap()
                .iter()
                .map(|v| v.to_bits())
                .collect();
            lookup.insert(bits, rec.identity_id.clone());
        }
    }
    let perfect = recall_at_k(
        &mut Oracle(lookup),
        &data,
        &ids,
        Direction::V2F,
        250,
        &[1],
        4,
        9,
    )
    .unwrap();
    ok &= perfect.recalls[0] == 1.0;
    check(
        ok,
        format!(
            "random N=250 over {} queries: {}; oracle R@1 {:.1}%",
            table.n_queries,
            cells.join(", "),
            100.0 * perfect.recalls[0]
        ),
    )
}

fn study_summaries() -> Verdict {
    let rows = [
        (0.714, 0.136, 70, 13.17),
        (0.650, 0.130, 70, 9.65),
        (0.584, 0.138, 73, 5.20),
        (0.552, 0.122, 75, 3.69),
    ];
    let mut ok = true;
    let mut cells = Vec::new();
    for (mean, sd, n, published) in rows {
        let r = one_sample_t_from_summary(mean, sd, n, 0.5).unwrap();
        ok &= (r.statistic - published).abs() <= 0.02 && r.p_value < 0.001;
        cells.push(format!(
            "t({n}) = {:.3} vs {published} (p = {:.1e})",
            r.statistic, r.p_value
        ));
    }
    check(ok, cells.join("; "))
}

/// Clips whose embeddings are a per-identity latent plus noise; the label
/// is the sign of a fixed linear function of the latent.
fn linear_probe_data(seed: u64) -> ProbeData {
    let mut rng = Rng::new(seed);
    let w: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
    let mut data = ProbeData::default();
    for id in 0..200 {
        let z: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let label = z.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() > 0.0;
        for _ in 0..5 {
            data.embeddings
                .push(z.iter().map(|v| (v + 0.1 * rng.normal()) as f32).collect());
            data.identities.push(format!("id{id}"));
            data.labels.push(label);
        }
    }
    data
}

fn probes() -> Verdict {
    let start = Instant::now();
    let linear = run_probe(
        &linear_probe_data(4),
        &ProbeSpec::new("linear", Modality::Face, 4),
    )
    .unwrap();
    let data = synth_generate(&SynthConfig {
        n_identities: 300,
        clips_per_identity: 3,
        latent_dim: 4,
        noise_sigma: 0.5,
        feature_dim: 16,
        seed: 100,
        ..SynthConfig::default()
    })
    .unwrap();
    let params = ModelParams::init(16, 32, 32, Objective::Triplet, Direction::V2F, 0).unwrap();
    let attr: Attribute = "random_attr".parse().unwrap();
    let random = run_probe(
        &probe_data(&params, &data, Modality::Face, &attr).unwrap(),
        &ProbeSpec::new(attr.to_string(), Modality::Face, 0),
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    check(
        linear.map_mean > 0.9 && !linear.chance_flagged && random.chance_flagged && secs < 60.0,
        format!(
            "linear attribute mAP {:.1}% +/- {:.1}; random_attr mAP {:.1}% +/- {:.1} chance-flagged {}; 20 trials each, {secs:.1}s",
            100.0 * linear.map_mean,
            100.0 * linear.ci_halfwidth,
            100.0 * random.map_mean,
            100.0 * random.ci_halfwidth,
            random.chance_flagged
        ),
    )
}

fn stimuli() -> StimulusPool {
    let mut persons = Vec::new();
    for g in ["m", "f"] {
        for e in [2, 5] {
            for i in 0..6 {
                let id = format!("{g}{e}_{i:02}");
                persons.push(Person {
                    demographics: format!("{g}/{e}/Y/30s").parse().unwrap(),
                    faces: (0..2).map(|k| format!("faces/{id}_{k}.jpg")).collect(),
                    voices: (0..2).map(|k| format!("voices/{id}_{k}.wav")).collect(),
                    id,
                });
            }
        }
    }
    StimulusPool::new(persons)
}

fn flip(c: Choice) -> Choice {
    match c {
        Choice::A => Choice::B,
        Choice::B => Choice::A,
    }
}

/// Completes one session failing the first `consistency` duplicate and the
/// first `correctness` cross-gender controls; scored answers are right
/// except every `wrong_every`-th.
fn scripted_session(
    store: &mut StudyStore,
    consistency: usize,
    correctness: usize,
    wrong_every: usize,
) -> String {
    let participant = "f/5/Y/20s".parse().unwrap();
    let id = store
        .create_session(ExperimentId::Exp3GEFA, participant, false, 0)
        .unwrap()
        .session_id;
    let trials = store.session(&id).unwrap().header.trials.clone();
    let mut choices = Vec::new();
    let (mut scored, mut cons, mut corr) = (0, 0, 0);
    for t in &trials {
        let c = match t.kind {
            TrialKind::Scored => {
                scored += 1;
                if scored % wrong_every == 0 {
                    flip(t.correct)
                } else {
                    t.correct
                }
            }
            TrialKind::Correctness => {
                corr += 1;
                if corr <= correctness {
                    flip(t.correct)
                } else {
                    t.correct
                }
            }
            TrialKind::Consistency { original } => {
                cons += 1;
                if cons <= consistency {
                    flip(choices[original])
                } else {
                    choices[original]
                }
            }
        };
        choices.push(c);
    }
    for (i, c) in choices.into_iter().enumerate() {
        store
            .submit_response(&id, i, c, 1500, 10 + i as u64)
            .unwrap();
    }
    id
}

fn study() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let exp = ExperimentId::Exp3GEFA;
    let plan = [
        (0, 0, 4),
        (1, 0, 3),
        (0, 1, 5),
        (2, 0, 4),
        (0, 2, 3),
        (1, 1, 6),
    ];
    let (expected, summary) = {
        let mut store = StudyStore::open(stimuli(), dir.path(), 12).unwrap();
        let mut expected = BTreeSet::new();
        for (cons, corr, wrong_every) in plan {
            let id = scripted_session(&mut store, cons, corr, wrong_every);
            if cons + corr >= 2 {
                expected.insert(id);
            }
        }
        (expected, store.aggregate(exp).unwrap())
    };
    let excluded: BTreeSet<String> = summary
        .excluded
        .iter()
        .map(|e| e.session_id.clone())
        .collect();
    let failures: BTreeMap<&str, usize> = summary
        .excluded
        .iter()
        .map(|e| (e.session_id.as_str(), e.failures.total()))
        .collect();
    let replayed = StudyStore::open(stimuli(), dir.path(), 12)
        .unwrap()
        .aggregate(exp)
        .unwrap();
    let scored = |w: usize| (16 - 16 / w) as f64 / 16.0;
    let mean = (scored(4) + scored(3) + scored(5)) / 3.0;
    check(
        excluded == expected && replayed == summary && (summary.row.mean - mean).abs() < 1e-12,
        format!(
            "6 sessions, excluded {} with failures {:?}, kept {}; included mean {:.4} (expected {mean:.4}); replayed aggregate identical: {}",
            excluded.len(),
            failures.values().collect::<Vec<_>>(),
            summary.included.len(),
            summary.row.mean,
            replayed == summary
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("loss closed form", loss_closed_form),
        ("gradient correctness", gradients),
        ("optimizer", optimizer),
        ("end-to-end learnability", learnability),
        ("retrieval baseline", retrieval),
        ("study summary statistics", study_summaries),
        ("probe pipeline", probes),
        ("study aggregation", study),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match verdict {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
