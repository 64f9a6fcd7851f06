//! Acceptance criteria. Each test checks one criterion at its stated
//! tolerance and writes a single `criterion N ...: PASS|FAIL` line to stderr
//! (unbuffered, so it shows up even when output capture is on).

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use depchain::chain::{extract_chain, ReprKind};
use depchain::corpus::{generate_synthetic, parse_conllu, DepSentence, SynthConfig, TemporalStatus};
use depchain::harness::{
    cross_validate, prepare_examples, resolve_embeddings, CvOutcome, EmbeddingSource, Example, Metrics,
    TrainConfig,
};
use depchain::models::{check_gradients, Activation, Classifier, ModelInput, ModelKind, ModelSpec, TreeInput};
use depchain::nncore::{softmax_xent, write_checkpoint, GradCheckConfig, Mode, SeededRng};
use depchain::saliency::{compute_saliency, explain};

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n} {name}: {verdict} ({detail})");
}

const EXAMPLE_ONE: &str = "\
# sent_id = ex1
1\tClimate\t_\t_\t_\t_\t2\tcompound\t_\t_
2\tactivists\t_\t_\t_\t_\t8\tnsubj\t_\t_
3\tfrom\t_\t_\t_\t_\t6\tcase\t_\t_
4\taround\t_\t_\t_\t_\t6\tcase\t_\t_
5\tthe\t_\t_\t_\t_\t6\tdet\t_\t_
6\tworld\t_\t_\t_\t_\t2\tnmod\t_\t_
7\twill\t_\t_\t_\t_\t8\taux\t_\t_
8\tlaunch\t_\t_\t_\t_\t0\troot\t_\t_
9\ta\t_\t_\t_\t_\t11\tdet\t_\t_
10\thunger\t_\t_\t_\t_\t11\tcompound\t_\t_
11\tstrike\t_\t_\t_\t_\t8\tdobj\t_\t_
12\there\t_\t_\t_\t_\t8\tadvmod\t_\t_
13\ton\t_\t_\t_\t_\t14\tcase\t_\t_
14\tFriday\t_\t_\t_\t_\t8\tnmod\t_\t_
15\t,\t_\t_\t_\t_\t8\tpunct\t_\t_
16\tdescribing\t_\t_\t_\t_\t8\txcomp\t_\t_
17\ttheir\t_\t_\t_\t_\t18\tnmod:poss\t_\t_
18\tprotest\t_\t_\t_\t_\t16\tdobj\t_\t_
19\tas\t_\t_\t_\t_\t22\tcase\t_\t_
20\ta\t_\t_\t_\t_\t22\tdet\t_\t_
21\tmoral\t_\t_\t_\t_\t22\tamod\t_\t_
22\treaction\t_\t_\t_\t_\t16\tnmod\t_\t_
23\t.\t_\t_\t_\t_\t8\tpunct\t_\t_
";

#[test]
fn criterion_1_chain_fixture() {
    let start = Instant::now();
    let sent = parse_conllu(EXAMPLE_ONE).unwrap().remove(0);
    let chain = extract_chain(&sent, 18).unwrap();
    let forms = |ids: &[usize]| -> Vec<String> { ids.iter().map(|&i| sent.tokens()[i - 1].form.clone()).collect() };
    let mut stage1 = forms(&chain.stage1_ids);
    stage1.sort();
    let final_chain = forms(&chain.member_ids);
    let elapsed = start.elapsed();
    let pass = stage1 == ["describing", "launch", "protest", "their"]
        && final_chain == ["will", "launch", "describing", "their", "protest"]
        && elapsed < Duration::from_secs(1);
    report(
        1,
        "chain fixture",
        pass,
        &format!("stage1 {stage1:?}, chain {final_chain:?}, {elapsed:?}"),
    );
    assert!(pass);
}

/// The synthetic distractor experiment shared by criteria 2 and 5.
struct Experiment {
    corpus: Vec<DepSentence>,
    chain_examples: Vec<Example>,
    chain: CvOutcome,
    window: CvOutcome,
    elapsed: Duration,
}

fn experiment_config(representation: ReprKind) -> TrainConfig {
    TrainConfig {
        model: ModelKind::Lstm,
        representation,
        hidden: 32,
        epochs: 20,
        embeddings: EmbeddingSource::Random { dim: 16 },
        seed: 7,
        ..Default::default()
    }
}

fn experiment() -> &'static Experiment {
    static CELL: OnceLock<Experiment> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let (corpus, mentions) = generate_synthetic(&SynthConfig {
            n_sentences: 700,
            label_weights: [0.67, 0.21, 0.12],
            distractor_len: 9,
            seed: 7,
        })
        .unwrap();
        let run = |repr| {
            let cfg = experiment_config(repr);
            let emb = resolve_embeddings(&cfg.embeddings, &corpus, cfg.seed).unwrap();
            let examples = prepare_examples(&cfg, &corpus, &mentions, &emb).unwrap();
            let out = cross_validate(&cfg, &examples, &emb, 10, 1).unwrap();
            (examples, out)
        };
        let (chain_examples, chain) = run(ReprKind::Chain);
        let (_, window) = run(ReprKind::Window);
        Experiment {
            corpus,
            chain_examples,
            chain,
            window,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn criterion_2_chain_beats_window() {
    let e = experiment();
    let chain = e.chain.pooled.micro.f1 * 100.0;
    let window = e.window.pooled.micro.f1 * 100.0;
    let pass = chain - window >= 5.0 && e.elapsed < Duration::from_secs(600);
    report(
        2,
        "chain vs window",
        pass,
        &format!(
            "chain micro-F1 {chain:.1}, window micro-F1 {window:.1}, margin {:.1} points, {:.1}s",
            chain - window,
            e.elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

fn random_seq(rng: &mut SeededRng, len: usize, d: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// A random rooted tree over `n` nodes with shuffled node numbering.
fn random_tree(rng: &mut SeededRng, n: usize, d: usize) -> TreeInput {
    let mut label: Vec<usize> = (0..n).collect();
    label.shuffle(rng);
    let mut children = vec![Vec::new(); n];
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        children[label[parent]].push(label[i]);
    }
    let readout = if rng.gen_bool(0.5) { label[0] } else { label[rng.gen_range(0..n)] };
    TreeInput {
        embeddings: random_seq(rng, n, d),
        children,
        root: label[0],
        readout,
    }
}

fn spec(kind: ModelKind, activation: Activation) -> ModelSpec {
    ModelSpec {
        kind,
        input_dim: 6,
        hidden: 8,
        dropout: 0.5,
        activation,
    }
}

#[test]
fn criterion_3_gradient_correctness() {
    let start = Instant::now();
    let cfg = GradCheckConfig {
        eps: 1e-5,
        coords_per_param: None,
        seed: 0,
    };
    let mut worst = [0.0f64; 3];
    for (k, kind) in [ModelKind::Lstm, ModelKind::Cnn, ModelKind::TreeLstm].into_iter().enumerate() {
        for seed in 0..20u64 {
            let mut rng = SeededRng::seed_from_u64(seed);
            let activation = if seed % 2 == 0 { Activation::Relu } else { Activation::Tanh };
            let mut model = Classifier::with_scale(spec(kind, activation), 0.5, &mut rng).unwrap();
            let input = match kind {
                ModelKind::TreeLstm => {
                    let n = rng.gen_range(1..9);
                    ModelInput::Tree(random_tree(&mut rng, n, 6))
                }
                _ => {
                    let len = rng.gen_range(2..10);
                    ModelInput::Sequence(random_seq(&mut rng, len, 6))
                }
            };
            let gold = TemporalStatus::ALL[rng.gen_range(0..3)];
            let err = check_gradients(&mut model, &input, gold, &cfg).unwrap();
            worst[k] = worst[k].max(err);
        }
    }
    let elapsed = start.elapsed();
    let pass = worst.iter().all(|e| *e < 1e-4) && elapsed < Duration::from_secs(120);
    report(
        3,
        "gradient correctness",
        pass,
        &format!(
            "max rel err lstm {:.2e}, cnn {:.2e}, treelstm {:.2e} over 20 seeds each, {elapsed:?}",
            worst[0], worst[1], worst[2]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_metric_identities() {
    let mut rng = SeededRng::seed_from_u64(4);
    let mut ok = true;
    for _ in 0..1000 {
        let n = rng.gen_range(1..200);
        let pairs: Vec<(TemporalStatus, TemporalStatus)> = (0..n)
            .map(|_| {
                (
                    TemporalStatus::ALL[rng.gen_range(0..3)],
                    TemporalStatus::ALL[rng.gen_range(0..3)],
                )
            })
            .collect();
        let m = Metrics::from_pairs(pairs.iter().copied()).unwrap();
        let accuracy = pairs.iter().filter(|(g, p)| g == p).count() as f64 / n as f64;
        ok &= (m.micro.precision - accuracy).abs() < 1e-12
            && (m.micro.recall - accuracy).abs() < 1e-12
            && (m.micro.f1 - accuracy).abs() < 1e-12;
        for c in TemporalStatus::ALL {
            let tp = pairs.iter().filter(|(g, p)| *g == c && *p == c).count();
            let predicted = pairs.iter().filter(|(_, p)| *p == c).count();
            let gold = pairs.iter().filter(|(g, _)| *g == c).count();
            let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
            let recall = if gold == 0 { 0.0 } else { tp as f64 / gold as f64 };
            ok &= m.class(c).precision == precision && m.class(c).recall == recall;
        }
    }
    let always_pa = Metrics::from_confusion([[1406, 0, 0], [429, 0, 0], [254, 0, 0]]).unwrap();
    let expected = 1406.0 / 2089.0;
    let pa_ok = (always_pa.micro.f1 - expected).abs() <= 1e-9;
    let pass = ok && pa_ok;
    report(
        4,
        "metric identities",
        pass,
        &format!(
            "1000 random vectors {}, always-PA micro-F1 {:.12} vs {expected:.12}",
            if ok { "consistent" } else { "inconsistent" },
            always_pa.micro.f1
        ),
    );
    assert!(pass);
}

fn loss_at(model: &Classifier, seq: &[Vec<f64>], gold: TemporalStatus) -> f64 {
    let logits = model
        .logits(&ModelInput::Sequence(seq.to_vec()), &mut Mode::Eval)
        .unwrap();
    softmax_xent(&logits, gold.index()).unwrap().loss
}

#[test]
fn criterion_5a_saliency_matches_finite_differences() {
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut rng = SeededRng::seed_from_u64(seed);
        let model = Classifier::with_scale(spec(ModelKind::Lstm, Activation::Relu), 0.5, &mut rng).unwrap();
        let len = rng.gen_range(2..8);
        let seq = random_seq(&mut rng, len, 6);
        let gold = TemporalStatus::ALL[rng.gen_range(0..3)];
        let tokens: Vec<String> = (0..len).map(|i| format!("t{i}")).collect();
        let map = compute_saliency(&model, &ModelInput::Sequence(seq.clone()), &tokens, Some(gold)).unwrap();
        for t in 0..len {
            for d in 0..6 {
                let mut plus = seq.clone();
                plus[t][d] += eps;
                let mut minus = seq.clone();
                minus[t][d] -= eps;
                let numeric = ((loss_at(&model, &plus, gold) - loss_at(&model, &minus, gold)) / (2.0 * eps)).abs();
                let analytic = map.raw[t][d];
                let rel = (analytic - numeric).abs() / analytic.max(numeric).max(1e-8);
                worst = worst.max(rel);
            }
        }
    }
    let pass = worst < 1e-4;
    report(
        5,
        "saliency finite differences",
        pass,
        &format!("max rel err {worst:.2e} over 10 random LSTM inputs"),
    );
    assert!(pass);
}

#[test]
fn criterion_5b_cue_holds_top_saliency() {
    let e = experiment();
    let sentence = |ex: &Example| {
        e.corpus
            .iter()
            .find(|s| s.doc_id() == ex.doc_id && s.sent_id() == ex.sent_id)
            .unwrap()
    };
    let (mut hits, mut total) = (0usize, 0usize);
    for fold in &e.chain.folds {
        for (&i, &predicted) in fold.test_indices.iter().zip(&fold.predictions) {
            let ex = &e.chain_examples[i];
            if ex.label != Some(TemporalStatus::Future) || predicted != TemporalStatus::Future {
                continue;
            }
            total += 1;
            let sent = sentence(ex);
            let will = ex
                .token_ids
                .iter()
                .copied()
                .find(|&id| sent.tokens()[id - 1].form.eq_ignore_ascii_case("will"))
                .expect("future chains contain will");
            let cue_verb = sent.tokens()[will - 1].head;
            let map = explain(&fold.model, ex).unwrap();
            let top = ex.token_ids[map.top_position().unwrap()];
            if top == will || top == cue_verb {
                hits += 1;
            }
        }
    }
    let share = if total == 0 { 0.0 } else { hits as f64 / total as f64 };
    let pass = total > 0 && share >= 0.70;
    report(
        5,
        "cue top-1 saliency",
        pass,
        &format!("{hits}/{total} correctly classified FUTURE test instances = {:.1}% (need >= 70%)", share * 100.0),
    );
    assert!(pass);
}

fn cv_artifacts(jobs: usize) -> (String, Vec<String>) {
    let (corpus, mentions) = generate_synthetic(&SynthConfig {
        n_sentences: 300,
        seed: 11,
        ..Default::default()
    })
    .unwrap();
    let cfg = TrainConfig {
        hidden: 12,
        epochs: 3,
        embeddings: EmbeddingSource::Random { dim: 8 },
        seed: 11,
        ..Default::default()
    };
    let emb = resolve_embeddings(&cfg.embeddings, &corpus, cfg.seed).unwrap();
    let examples = prepare_examples(&cfg, &corpus, &mentions, &emb).unwrap();
    let out = cross_validate(&cfg, &examples, &emb, 10, jobs).unwrap();
    let report = serde_json::to_string_pretty(&out.report(&cfg)).unwrap();
    let checkpoints = out
        .folds
        .iter()
        .map(|f| write_checkpoint(&f.model.to_checkpoint()))
        .collect();
    (report, checkpoints)
}

#[test]
fn criterion_6_determinism() {
    let (report_a, ckpt_a) = cv_artifacts(1);
    let (report_b, ckpt_b) = cv_artifacts(3);
    let pass = report_a == report_b && ckpt_a == ckpt_b;
    report(
        6,
        "determinism",
        pass,
        &format!(
            "reports {} bytes, {} fold checkpoints, {}",
            report_a.len(),
            ckpt_a.len(),
            if pass { "bitwise identical" } else { "differ" }
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_tree_permutation_invariance() {
    let mut rng = SeededRng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let model = Classifier::with_scale(spec(ModelKind::TreeLstm, Activation::Relu), 0.5, &mut rng).unwrap();
        let n = rng.gen_range(1..16);
        let tree = random_tree(&mut rng, n, 6);
        let mut permuted = tree.clone();
        for kids in &mut permuted.children {
            kids.shuffle(&mut rng);
        }
        let a = model.logits(&ModelInput::Tree(tree), &mut Mode::Eval).unwrap();
        let b = model.logits(&ModelInput::Tree(permuted), &mut Mode::Eval).unwrap();
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    let pass = worst <= 1e-12;
    report(
        7,
        "tree permutation invariance",
        pass,
        &format!("max |delta logit| {worst:.2e} over 100 random trees"),
    );
    assert!(pass);
}
