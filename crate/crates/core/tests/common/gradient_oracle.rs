//! Central finite differences of an independent f64 reimplementation of
//! every forward pass, compared against the analytic parameter gradients.

use fvlab_core::model::{Direction, ModelParams, Objective, TripletTuple};
use fvlab_core::numerics::Rng;

const FEATURE: usize = 5;
const HIDDEN: usize = 4;
const EMBED: usize = 3;
const MARGIN: f64 = 1.0;
const STEP: f64 = 1e-6;
/// Gradients smaller than this are compared absolutely.
const FLOOR: f64 = 1e-3;
pub const TOLERANCE: f64 = 1e-4;

/// Named parameter blocks as f64, in `ModelParams::blocks` order.
type Blocks = Vec<(String, Vec<f64>)>;

fn to_f64(p: &ModelParams) -> Blocks {
    p.blocks()
        .into_iter()
        .map(|(n, b)| (n.to_string(), b.iter().map(|&v| v as f64).collect()))
        .collect()
}

fn block<'a>(b: &'a Blocks, name: &str) -> &'a [f64] {
    &b.iter().find(|(n, _)| n == name).unwrap().1
}

/// `y = W x + b` for row-major `W` of shape `b.len() × x.len()`; records the
/// sign pattern of the result when `relu`.
fn affine(w: &[f64], b: &[f64], x: &[f64], relu: bool, signs: &mut Vec<bool>) -> Vec<f64> {
    let cols = x.len();
    (0..b.len())
        .map(|r| {
            let z = b[r] + (0..cols).map(|c| w[r * cols + c] * x[c]).sum::<f64>();
            if relu {
                signs.push(z > 0.0);
                z.max(0.0)
            } else {
                z
            }
        })
        .collect()
}

fn head(b: &Blocks, prefix: &str, x: &[f64], signs: &mut Vec<bool>) -> Vec<f64> {
    let h = affine(
        block(b, &format!("{prefix}.w1")),
        block(b, &format!("{prefix}.b1")),
        x,
        true,
        signs,
    );
    affine(
        block(b, &format!("{prefix}.w2")),
        block(b, &format!("{prefix}.b2")),
        &h,
        false,
        signs,
    )
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn classifier_ce(
    b: &Blocks,
    face: &[f64],
    voice: &[f64],
    is_match: bool,
    signs: &mut Vec<bool>,
) -> f64 {
    let x: Vec<f64> = face.iter().chain(voice).copied().collect();
    let h1 = affine(
        block(b, "classifier.w1"),
        block(b, "classifier.b1"),
        &x,
        true,
        signs,
    );
    let h2 = affine(
        block(b, "classifier.w2"),
        block(b, "classifier.b2"),
        &h1,
        true,
        signs,
    );
    let z = affine(
        block(b, "classifier.w3"),
        block(b, "classifier.b3"),
        &h2,
        false,
        signs,
    );
    let lse = z[0].max(z[1]) + ((z[0] - z[0].max(z[1])).exp() + (z[1] - z[0].max(z[1])).exp()).ln();
    lse - if is_match { z[0] } else { z[1] }
}

struct Case {
    objective: Objective,
    direction: Direction,
    anchor: Vec<f64>,
    positive: Vec<f64>,
    negative: Vec<f64>,
}

/// Loss and the pattern of every piecewise-linear switch it passed through.
fn oracle_loss(b: &Blocks, case: &Case) -> (f64, Vec<bool>) {
    let mut signs = Vec::new();
    let (a_mod, c_mod) = match case.direction {
        Direction::V2F => ("voice", "face"),
        Direction::F2V => ("face", "voice"),
    };
    let loss = match case.objective {
        Objective::Triplet => {
            let ea = head(b, a_mod, &case.anchor, &mut signs);
            let ep = head(b, c_mod, &case.positive, &mut signs);
            let en = head(b, c_mod, &case.negative, &mut signs);
            let (dp, dn) = (dist(&ea, &ep), dist(&ea, &en));
            let m = dp.max(dn);
            let (sp, sn) = ((dp - m).exp(), (dn - m).exp());
            let (sp, sn) = (sp / (sp + sn), sn / (sp + sn));
            sp * sp + (sn - 1.0) * (sn - 1.0)
        }
        Objective::Contrastive => {
            let ea = head(b, a_mod, &case.anchor, &mut signs);
            let ep = head(b, c_mod, &case.positive, &mut signs);
            let en = head(b, c_mod, &case.negative, &mut signs);
            let (dp, dn) = (dist(&ea, &ep), dist(&ea, &en));
            signs.push(dn < MARGIN);
            0.5 * (dp * dp + (MARGIN - dn).max(0.0).powi(2))
        }
        Objective::Classifier => {
            let (fa, va, fnn, vn) = match case.direction {
                Direction::V2F => (&case.positive, &case.anchor, &case.negative, &case.anchor),
                Direction::F2V => (&case.anchor, &case.positive, &case.anchor, &case.negative),
            };
            0.5 * (classifier_ce(b, fa, va, true, &mut signs)
                + classifier_ce(b, fnn, vn, false, &mut signs))
        }
    };
    (loss, signs)
}

fn random_case(seed: u64, objective: Objective) -> (ModelParams, Case) {
    let mut rng = Rng::new(seed);
    let direction = if rng.bernoulli(0.5) {
        Direction::V2F
    } else {
        Direction::F2V
    };
    let mut params =
        ModelParams::init(FEATURE, HIDDEN, EMBED, objective, direction, rng.next_u64()).unwrap();
    for (_, block) in params.blocks_mut() {
        for v in block.iter_mut() {
            *v += 0.3 * rng.normal() as f32;
        }
    }
    let vec = |rng: &mut Rng| {
        (0..FEATURE)
            .map(|_| rng.normal() as f32 as f64)
            .collect::<Vec<f64>>()
    };
    let case = Case {
        objective,
        direction,
        anchor: vec(&mut rng),
        positive: vec(&mut rng),
        negative: vec(&mut rng),
    };
    (params, case)
}

pub struct Outcome {
    pub max_rel_err: f64,
    pub checked: usize,
    pub skipped: usize,
}

pub fn check(seed: u64, objective: Objective) -> Outcome {
    let (params, case) = random_case(seed, objective);
    let as32 = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
    let (a, p, n) = (
        as32(&case.anchor),
        as32(&case.positive),
        as32(&case.negative),
    );
    let tuple = TripletTuple::new(&a, &p, &n, "anchor", "other").unwrap();
    let mut grads = params.zeros_like();
    let loss = params
        .tuple_backward(&tuple, MARGIN as f32, 1.0, &mut grads)
        .unwrap();

    let base = to_f64(&params);
    let (oracle, base_signs) = oracle_loss(&base, &case);
    assert!(
        (loss as f64 - oracle).abs() < 1e-5 * (1.0 + oracle.abs()),
        "seed {seed}: loss {loss} vs oracle {oracle}"
    );

    let mut out = Outcome {
        max_rel_err: 0.0,
        checked: 0,
        skipped: 0,
    };
    for (bi, (name, analytic)) in grads.blocks().into_iter().enumerate() {
        for (j, &g) in analytic.iter().enumerate() {
            let mut plus = base.clone();
            plus[bi].1[j] += STEP;
            let mut minus = base.clone();
            minus[bi].1[j] -= STEP;
            let (lp, sp) = oracle_loss(&plus, &case);
            let (lm, sm) = oracle_loss(&minus, &case);
            if sp != base_signs || sm != base_signs {
                out.skipped += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * STEP);
            let err = (g as f64 - numeric).abs() / (g.abs() as f64).max(numeric.abs()).max(FLOOR);
            assert!(
                err < TOLERANCE,
                "seed {seed} {objective}: {name}[{j}] analytic {g} numeric {numeric}"
            );
            out.max_rel_err = out.max_rel_err.max(err);
            out.checked += 1;
        }
    }
    out
}

pub fn run(objective: Objective) -> Outcome {
    let mut worst = 0.0f64;
    let (mut checked, mut skipped) = (0, 0);
    for seed in 0..50 {
        let o = check(seed, objective);
        worst = worst.max(o.max_rel_err);
        checked += o.checked;
        skipped += o.skipped;
    }
    assert!(
        checked > 20 * skipped,
        "{objective}: too many kink skips ({skipped} of {})",
        checked + skipped
    );
    eprintln!("{objective}: {checked} gradients checked, {skipped} skipped at kinks, worst rel err {worst:.2e}");
    Outcome {
        max_rel_err: worst,
        checked,
        skipped,
    }
}
