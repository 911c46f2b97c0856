mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use anpnet_core::analysis::{anr_of_report, anr_table, contribution_profiles, visually_equivalent, AnrMode};
use anpnet_core::checkpoint::{read_checkpoint, write_checkpoint};
use anpnet_core::dataio::{stratified_split, synth_generate, Dataset, Sample, Signal, SynthConfig, Vocabulary};
use anpnet_core::fusion::{train, FusionDims, FusionNetwork, TrainConfig};
use anpnet_core::metrics::{codetection_for_samples, topk_hit, CoDetectionMatrix};
use anpnet_core::nn::{finite_diff_grad, DenseLayer};
use anpnet_core::relevance::{explain, zb_backprop, zplus_backprop, RelevanceReport};
use anpnet_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_dims, random_network, random_probs};

type Check = std::result::Result<String, String>;

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Check,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const SMALL: FusionDims = FusionDims {
    n_adj: 8,
    n_noun: 8,
    hidden: 16,
    n_anp: 12,
};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn gradient_oracle() -> Check {
    const EPS: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0f64;
    for net_id in 0..100 {
        let dims = random_dims(&mut rng, SMALL);
        let net = random_network(&mut rng, dims);
        let mlp = net.mlp().cast::<f64>();
        let batch = rng.random_range(1..=4);
        let mut inputs: Vec<Vec<f64>> = Vec::new();
        let mut labels = Vec::new();
        while inputs.len() < batch {
            let raw: Vec<f32> = [random_probs(&mut rng, dims.n_adj), random_probs(&mut rng, dims.n_noun)].concat();
            let x: Vec<f64> = net.whitener().apply(&raw).into_iter().map(f64::from).collect();
            // Keep every hidden pre-activation away from the ReLU kink by more
            // than a finite-difference step can move it.
            let margin = 10.0 * EPS * (1.0 + x.iter().fold(0f64, |m, v| m.max(v.abs())));
            let pre = mlp.hidden().forward(&x).map_err(|e| e.to_string())?;
            if pre.iter().all(|p| p.abs() > margin) {
                inputs.push(x);
                labels.push(rng.random_range(0..dims.n_anp));
            }
        }
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let (grads, _) = mlp.batch_gradients(&refs, &labels).map_err(|e| e.to_string())?;
        let analytic = grads.to_flat();
        let mut probe = mlp.clone();
        let numeric = finite_diff_grad(
            |theta| {
                probe.set_flat(theta).unwrap();
                let total: f64 = refs.iter().zip(&labels).map(|(x, &y)| probe.loss(x, y).unwrap()).sum();
                total / refs.len() as f64
            },
            &mlp.to_flat(),
            EPS,
        );
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
        let scale = norm(&analytic).max(norm(&numeric));
        let rel = if scale == 0.0 { 0.0 } else { norm(&diff) / scale };
        worst = worst.max(rel);
        ensure(rel < 1e-6, || {
            format!("net {net_id} {dims:?}: relative error {rel:.3e}")
        })?;
    }
    Ok(format!("100 nets, worst relative error {worst:.3e}"))
}

fn relevance_conservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut checked, mut degenerate, mut blocked) = (0, 0, 0);
    let (mut worst, mut most_negative) = (0f64, 0f64);
    for case in 0..1000 {
        let dims = random_dims(&mut rng, SMALL);
        let net = random_network(&mut rng, dims);
        let adj = random_probs(&mut rng, dims.n_adj);
        let noun = random_probs(&mut rng, dims.n_noun);
        let target = rng.random_range(0..dims.n_anp);
        let r = explain(&net, &adj, &noun, target).map_err(|e| e.to_string())?;
        let min = r.adj_contrib.iter().chain(&r.noun_contrib).fold(0f64, |m, &c| m.min(c));
        most_negative = most_negative.min(min);
        ensure(min >= -1e-9, || {
            format!("case {case}: contribution {min:e} below -1e-9")
        })?;
        if r.degenerate {
            degenerate += 1;
            blocked += (r.root_relevance > 0.0) as usize;
            continue;
        }
        checked += 1;
        let err = r.conservation_error();
        worst = worst.max(err);
        ensure(err < 1e-6, || {
            format!("case {case}: relative conservation error {err:.3e}")
        })?;
    }
    ensure(checked >= 100, || format!("only {checked} non-degenerate cases"))?;
    Ok(format!(
        "{checked} conserved (worst {worst:.3e}), {degenerate} degenerate ({blocked} with positive root), min contribution {most_negative:.3e}"
    ))
}

fn hand_rule_fixtures() -> Check {
    let layer = |rows: &[Vec<f64>]| DenseLayer::from_rows(rows, vec![0.0; rows.len()]).unwrap();
    let cases: [(&str, Vec<f64>, Vec<f64>); 4] = [
        (
            "z+ x=[1,2] w=[[0.5,-0.25]]",
            zplus_backprop(&layer(&[vec![0.5, -0.25]]), &[1.0, 2.0], &[1.0]).map_err(|e| e.to_string())?,
            vec![1.0, 0.0],
        ),
        (
            "z+ x=[1,3] w=[[1,1]]",
            zplus_backprop(&layer(&[vec![1.0, 1.0]]), &[1.0, 3.0], &[2.0]).map_err(|e| e.to_string())?,
            vec![0.5, 1.5],
        ),
        (
            "zB x=[1,0] w=[[1,-1]]",
            zb_backprop(&layer(&[vec![1.0, -1.0]]), &[1.0, 0.0], 0.0, 1.0, &[1.0]).map_err(|e| e.to_string())?,
            vec![0.5, 0.5],
        ),
        (
            "zB x=[1,1] w=[[1,1]]",
            zb_backprop(&layer(&[vec![1.0, 1.0]]), &[1.0, 1.0], 0.0, 1.0, &[1.0]).map_err(|e| e.to_string())?,
            vec![0.5, 0.5],
        ),
    ];
    let mut worst = 0f64;
    for (name, got, want) in &cases {
        let err = got.iter().zip(want).fold(0f64, |m, (g, w)| m.max((g - w).abs()));
        worst = worst.max(err);
        ensure(got.len() == want.len() && err <= 1e-12, || {
            format!("{name}: got {got:?}, want {want:?}")
        })?;
    }
    Ok(format!("{} fixtures, max deviation {worst:.1e}", cases.len()))
}

fn report(adj: Vec<f64>, noun: Vec<f64>) -> RelevanceReport {
    RelevanceReport {
        target_anp: 0,
        root_relevance: adj.iter().sum::<f64>() + noun.iter().sum::<f64>(),
        adj_contrib: adj,
        noun_contrib: noun,
        degenerate: false,
    }
}

fn anr_normalization() -> Check {
    let uniform = report(vec![0.05; 117], vec![0.05; 167]);
    let anr = anr_of_report(&uniform, 117, 167).map_err(|e| format!("{e:?}"))?;
    ensure((anr - 1.0).abs() <= 1e-9, || format!("equal means gave ANR {anr}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0f64;
    for case in 0..1000 {
        let n_adj = rng.random_range(1..=200);
        let n_noun = rng.random_range(1..=200);
        let adj = (0..n_adj).map(|_| rng.random_range(0.0..1.0)).collect();
        let noun = (0..n_noun).map(|_| rng.random_range(0.01..1.0)).collect();
        let r = report(adj, noun);
        let factor = 10f64.powf(rng.random_range(-6.0..6.0));
        let base = anr_of_report(&r, n_adj, n_noun).map_err(|e| format!("{e:?}"))?;
        let scaled = anr_of_report(&r.scaled(factor), n_adj, n_noun).map_err(|e| format!("{e:?}"))?;
        let rel = (scaled - base).abs() / base.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        ensure(rel <= 1e-12, || {
            format!("case {case}: ANR {base} became {scaled} under x{factor:e}")
        })?;
    }
    Ok(format!(
        "uniform ANR {anr}, scaling drift at most {worst:.1e} over 1000 reports"
    ))
}

fn train_default(samples: &[Sample], dims: FusionDims, seed: u64) -> std::result::Result<FusionNetwork, String> {
    let mut net = FusionNetwork::build(dims, seed).map_err(|e| e.to_string())?;
    train(&mut net, samples, &TrainConfig::with_seed(seed)).map_err(|e| e.to_string())?;
    Ok(net)
}

fn orientation_recovery() -> Check {
    let (n_adj, n_noun) = (5, 4);
    let mut cfg = SynthConfig::grid(n_adj, n_noun, 500, 0.0, 5);
    let vocab = cfg.vocabulary().map_err(|e| e.to_string())?;
    let adj_informative: Vec<bool> = (0..vocab.n_anp())
        .map(|k| {
            let (a, n) = vocab.anp(k);
            (a + n) % 2 == 0
        })
        .collect();
    let pick = |adj_side: bool| {
        adj_informative
            .iter()
            .map(|&ai| if ai == adj_side { 4.0 } else { 1.0 })
            .collect()
    };
    cfg.adj_signal = Signal::PerAnp(pick(true));
    cfg.noun_signal = Signal::PerAnp(pick(false));
    let (_, samples) = synth_generate(&cfg).map_err(|e| e.to_string())?;
    let (train_set, test_set) = stratified_split(&samples, 0.8, 5).map_err(|e| e.to_string())?;
    let dims = FusionDims::new(n_adj, n_noun, FusionDims::REFERENCE.hidden, vocab.n_anp());
    let net = train_default(&train_set, dims, 5)?;
    let table = anr_table(&net, &test_set, AnrMode::AllTop5, 5).map_err(|e| e.to_string())?;

    let mut anr = vec![None; vocab.n_anp()];
    for r in &table.records {
        anr[r.anp] = Some(r.anr);
    }
    let (mut adj_ok, mut noun_ok) = (0, 0);
    for (k, &ai) in adj_informative.iter().enumerate() {
        match (ai, anr[k]) {
            (true, Some(v)) if v > 1.0 => adj_ok += 1,
            (false, Some(v)) if v < 1.0 => noun_ok += 1,
            _ => {}
        }
    }
    let n_adj_side = adj_informative.iter().filter(|&&b| b).count();
    let n_noun_side = adj_informative.len() - n_adj_side;
    let detail = format!("adjective-informative {adj_ok}/{n_adj_side} with ANR > 1, noun-informative {noun_ok}/{n_noun_side} with ANR < 1");
    ensure(adj_ok * 10 >= n_adj_side * 8 && noun_ok * 10 >= n_noun_side * 8, || {
        detail.clone()
    })?;
    Ok(detail)
}

fn separable_learning() -> Check {
    let cfg = SynthConfig::grid(5, 4, 100, 8.0, 6);
    let (vocab, samples) = synth_generate(&cfg).map_err(|e| e.to_string())?;
    let (train_set, test_set) = stratified_split(&samples, 0.8, 6).map_err(|e| e.to_string())?;
    let dims = FusionDims::new(5, 4, FusionDims::REFERENCE.hidden, vocab.n_anp());
    let net = train_default(&train_set, dims, 6)?;
    let probs = net.predict_batch(&test_set).map_err(|e| e.to_string())?;
    let rate = |k: usize| -> std::result::Result<f64, String> {
        let mut hits = 0;
        for (p, s) in probs.iter().zip(&test_set) {
            hits += topk_hit(p, s.anp(), k).map_err(|e| e.to_string())? as usize;
        }
        Ok(100.0 * hits as f64 / test_set.len() as f64)
    };
    let (top1, top5) = (rate(1)?, rate(5)?);
    let detail = format!(
        "{} classes, {} held out: top-1 {top1:.2}%, top-5 {top5:.2}%",
        vocab.n_anp(),
        test_set.len()
    );
    ensure(top1 >= 95.0 && top5 >= 99.0, || detail.clone())?;
    Ok(detail)
}

fn diagonal_is_full(m: &CoDetectionMatrix) -> bool {
    (0..3).all(|i| m.row_counts[i] == 0 || m.entries[i][i] == Some(100.0))
}

fn codetection_checks() -> Check {
    let fixture = CoDetectionMatrix::from_hits(&[[true, true, true], [true, false, false]]);
    ensure(
        fixture.entries[0] == [Some(100.0), Some(50.0), Some(50.0)]
            && fixture.entries[1] == [Some(100.0); 3]
            && fixture.entries[2] == [Some(100.0); 3]
            && fixture.row_counts == [2, 1, 1],
        || format!("two-sample fixture gave {:?}", fixture.entries),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut evaluations = 0;
    for _ in 0..200 {
        let dims = random_dims(&mut rng, SMALL);
        let net = random_network(&mut rng, dims);
        let samples: Vec<Sample> = (0..rng.random_range(1..40))
            .map(|_| Sample {
                adj_probs: random_probs(&mut rng, dims.n_adj),
                noun_probs: random_probs(&mut rng, dims.n_noun),
                adj_label: rng.random_range(0..dims.n_adj) as u32,
                noun_label: rng.random_range(0..dims.n_noun) as u32,
                anp_label: rng.random_range(0..dims.n_anp) as u32,
            })
            .collect();
        let probs = net.predict_batch(&samples).map_err(|e| e.to_string())?;
        for k in [1, 2, 5] {
            let m = codetection_for_samples(&samples, &probs, k).map_err(|e| e.to_string())?;
            ensure(diagonal_is_full(&m), || format!("diagonal not 100: {:?}", m.entries))?;
            evaluations += 1;
        }
    }
    Ok(format!("fixture exact, diagonal 100 on {evaluations} evaluations"))
}

/// Ten adjectives and ten nouns; ANP `k < 10` is `(k, k)`, ANP `k >= 10` is
/// `(k - 10, (k - 7) % 10)`. The last ANP is generated exactly like ANP 0.
fn equivalence_config(seed: u64) -> SynthConfig {
    let anps = (0..20u32)
        .map(|k| if k < 10 { (k, k) } else { (k - 10, (k - 7) % 10) })
        .collect();
    SynthConfig {
        anps: Some(anps),
        duplicate_pairs: vec![(0, 19)],
        ..SynthConfig::grid(10, 10, 500, 3.0, seed)
    }
}

fn shares_concept(vocab: &Vocabulary, a: usize, b: usize) -> bool {
    let (ai, an) = vocab.anp(a);
    let (bi, bn) = vocab.anp(b);
    ai == bi || an == bn
}

fn equivalence_recovery() -> Check {
    const PLANTED: (usize, usize) = (0, 19);
    let (mut found, mut clean, mut overlap) = (0, 0, 0);
    let mut spurious = Vec::new();
    for run in 0..10u64 {
        let cfg = equivalence_config(100 + run);
        let (vocab, samples) = synth_generate(&cfg).map_err(|e| e.to_string())?;
        let (train_set, test_set) = stratified_split(&samples, 0.8, run).map_err(|e| e.to_string())?;
        let dims = FusionDims::new(10, 10, FusionDims::REFERENCE.hidden, vocab.n_anp());
        let net = train_default(&train_set, dims, run)?;
        let profiles = contribution_profiles(&net, &test_set, 5).map_err(|e| e.to_string())?;
        let pairs = visually_equivalent(&profiles, 5);
        let planted: Vec<_> = profiles
            .iter()
            .filter(|p| p.anp == PLANTED.0 || p.anp == PLANTED.1)
            .collect();
        if let [a, b] = planted.as_slice() {
            let shared = |x: Vec<usize>, y: Vec<usize>| x.iter().filter(|i| y.contains(i)).count();
            overlap += shared(a.top_adjectives(5), b.top_adjectives(5)) + shared(a.top_nouns(5), b.top_nouns(5));
        }
        found += pairs.contains(&PLANTED) as usize;
        let bad: Vec<_> = pairs
            .iter()
            .filter(|&&(a, b)| (a, b) != PLANTED && !shares_concept(&vocab, a, b))
            .collect();
        if bad.is_empty() {
            clean += 1;
        } else {
            spurious.push(format!("run {run}: {bad:?}"));
        }
    }
    let detail = format!(
        "planted pair found in {found}/10 runs (mean shared top-5 concepts {:.1}/10), no disjoint pair in {clean}/10 runs",
        overlap as f64 / 10.0
    );
    ensure(found >= 9 && clean >= 9, || {
        if spurious.is_empty() {
            detail.clone()
        } else {
            format!("{detail}; {}", spurious.join("; "))
        }
    })?;
    Ok(detail)
}

const PIPELINE_CONFIG: &str =
    "n_adj = 5\nn_noun = 4\nsamples_per_anp = 60\nadj_signal = 3.0\nnoun_signal = 2.0\nseed = 9\n";

fn anpnet(args: &[&str]) -> std::result::Result<(), String> {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_anpnet"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!(
            "anpnet {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

/// synth, split, train, eval, explain and every analysis into `dir`.
fn run_pipeline(dir: &std::path::Path) -> std::result::Result<(), String> {
    let config = dir.join("synth.toml");
    std::fs::write(&config, PIPELINE_CONFIG).map_err(|e| e.to_string())?;
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let (out, vocab) = (p(""), p("vocab"));
    anpnet(&["synth", "--config", &p("synth.toml"), "--out-dir", &out])?;
    anpnet(&[
        "split",
        "--dataset",
        &p("dataset.anpd"),
        "--vocab-dir",
        &vocab,
        "--seed",
        "9",
        "--out-dir",
        &out,
    ])?;
    anpnet(&[
        "train",
        "--dataset",
        &p("train.anpd"),
        "--vocab-dir",
        &vocab,
        "--seed",
        "9",
        "--out-dir",
        &out,
    ])?;
    let model = [
        "--checkpoint",
        &p("model.anpm"),
        "--dataset",
        &p("test.anpd"),
        "--vocab-dir",
        &vocab,
        "--out-dir",
        &out,
    ];
    anpnet(&[&["eval"], &model[..]].concat())?;
    anpnet(&[&["explain", "--sample", "3"], &model[..]].concat())?;
    for which in ["anr", "orientation", "equiv", "related"] {
        for mode in AnrMode::ALL {
            anpnet(&[&["analyze", "--which", which, "--mode", mode.as_str()], &model[..]].concat())?;
        }
    }
    Ok(())
}

fn pipeline_determinism() -> Check {
    let dirs = [
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    ];
    for d in &dirs {
        run_pipeline(d.path())?;
    }
    let mut names: Vec<String> = std::fs::read_dir(dirs[0].path())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n.ends_with(".csv") || n.ends_with(".anpm") || n.ends_with(".anpd"))
        .collect();
    names.sort();
    for name in &names {
        let a = std::fs::read(dirs[0].path().join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(a == b, || format!("{name} differs between runs"))?;
    }
    let csvs = names.iter().filter(|n| n.ends_with(".csv")).count();
    ensure(csvs == 18 && names.iter().any(|n| n.ends_with(".anpm")), || {
        format!("only produced {names:?}")
    })?;
    Ok(format!(
        "{} files byte-identical across two runs ({csvs} CSV tables, checkpoint, datasets)",
        names.len()
    ))
}

fn random_dataset<R: Rng>(rng: &mut R) -> Dataset {
    let n_adj = rng.random_range(1..=6);
    let n_noun = rng.random_range(1..=6);
    let vocab = Vocabulary::grid(n_adj, n_noun).unwrap();
    let samples = (0..rng.random_range(0..20))
        .map(|_| {
            let k = rng.random_range(0..vocab.n_anp());
            let (a, n) = vocab.anp(k);
            Sample {
                adj_probs: random_probs(rng, n_adj),
                noun_probs: random_probs(rng, n_noun),
                adj_label: a as u32,
                noun_label: n as u32,
                anp_label: k as u32,
            }
        })
        .collect();
    Dataset::new(&vocab, samples).unwrap()
}

fn dataset_bytes(d: &Dataset) -> Vec<u8> {
    d.write_to(Vec::new()).unwrap()
}

fn checkpoint_bytes(n: &FusionNetwork) -> Vec<u8> {
    write_checkpoint(n, Vec::new()).unwrap()
}

fn corruption_categories(bytes: &[u8], read: impl Fn(&[u8]) -> anpnet_core::Result<()>, rng: &mut ChaCha8Rng) -> Check {
    let mut magic = bytes.to_vec();
    magic[0] ^= 0xFF;
    let mut version = bytes.to_vec();
    version[4] = version[4].wrapping_add(1);
    let cut = rng.random_range(0..bytes.len());
    match read(&magic) {
        Err(Error::BadMagic { .. }) => {}
        other => return Err(format!("bad magic gave {other:?}")),
    }
    match read(&version) {
        Err(Error::UnsupportedVersion { .. }) => {}
        other => return Err(format!("bad version gave {other:?}")),
    }
    match read(&bytes[..cut]) {
        Err(Error::Truncated(_)) => {}
        other => return Err(format!("truncation at {cut} of {} gave {other:?}", bytes.len())),
    }
    Ok(String::new())
}

fn format_round_trips() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..1000 {
        let d = random_dataset(&mut rng);
        let bytes = dataset_bytes(&d);
        let back = Dataset::read_from(bytes.as_slice()).map_err(|e| format!("dataset {case}: {e}"))?;
        ensure(back == d && dataset_bytes(&back) == bytes, || {
            format!("dataset {case} changed on round trip")
        })?;
        corruption_categories(&bytes, |b| Dataset::read_from(b).map(drop), &mut rng)
            .map_err(|e| format!("dataset {case}: {e}"))?;

        let dims = random_dims(&mut rng, SMALL);
        let net = random_network(&mut rng, dims);
        let bytes = checkpoint_bytes(&net);
        let back = read_checkpoint(bytes.as_slice()).map_err(|e| format!("checkpoint {case}: {e}"))?;
        ensure(back == net && checkpoint_bytes(&back) == bytes, || {
            format!("checkpoint {case} changed on round trip")
        })?;
        corruption_categories(&bytes, |b| read_checkpoint(b).map(drop), &mut rng)
            .map_err(|e| format!("checkpoint {case}: {e}"))?;
    }
    Ok("1000 datasets and 1000 checkpoints bit-identical; magic, version and truncation errors categorized".into())
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        name: "gradient oracle",
        budget: Some(Duration::from_secs(60)),
        run: gradient_oracle,
    },
    Criterion {
        id: 2,
        name: "relevance conservation",
        budget: Some(Duration::from_secs(60)),
        run: relevance_conservation,
    },
    Criterion {
        id: 3,
        name: "hand-rule fixtures",
        budget: None,
        run: hand_rule_fixtures,
    },
    Criterion {
        id: 4,
        name: "ANR normalization",
        budget: None,
        run: anr_normalization,
    },
    Criterion {
        id: 5,
        name: "orientation recovery",
        budget: Some(Duration::from_secs(300)),
        run: orientation_recovery,
    },
    Criterion {
        id: 6,
        name: "separable learning",
        budget: Some(Duration::from_secs(180)),
        run: separable_learning,
    },
    Criterion {
        id: 7,
        name: "co-detection",
        budget: None,
        run: codetection_checks,
    },
    Criterion {
        id: 8,
        name: "equivalence recovery",
        budget: None,
        run: equivalence_recovery,
    },
    Criterion {
        id: 9,
        name: "pipeline determinism",
        budget: None,
        run: pipeline_determinism,
    },
    Criterion {
        id: 10,
        name: "format round-trips",
        budget: None,
        run: format_round_trips,
    },
];

fn main() -> ExitCode {
    let filter: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let mut outcome = (c.run)();
        let elapsed = start.elapsed();
        if let (Ok(detail), Some(budget)) = (&outcome, c.budget) {
            if elapsed > budget {
                outcome = Err(format!("{detail}; took {elapsed:.1?}, budget {budget:?}"));
            }
        }
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "[{tag}] criterion {}: {}: {detail} ({:.2} s)",
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
