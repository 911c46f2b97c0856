use std::fs;
use std::path::{Path, PathBuf};

use anpnet_core::analysis::{
    anr_table, classify_orientation, contribution_profiles, related_concepts, visually_equivalent,
};
use anpnet_core::checkpoint::{load_checkpoint, save_checkpoint};
use anpnet_core::dataio::{import_csv, stratified_split, synth_generate, Dataset, SynthConfig, Vocabulary};
use anpnet_core::fusion::{self, FusionDims, FusionNetwork, TrainConfig};
use anpnet_core::metrics::{accuracy_histogram, codetection_for_samples, concept_accuracies, top_k_indices, Concept};
use anpnet_core::relevance::explain_sample;
use anpnet_core::tables;
use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::manifest::RunManifest;
use crate::{AnalyzeArgs, EvalArgs, ExplainArgs, ModelArgs, SplitArgs, SynthArgs, TrainArgs, Which};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn read_toml(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse().with_context(|| format!("parsing {}", path.display()))
}

fn load_vocab(dir: &Path) -> Result<Vocabulary> {
    Vocabulary::load(dir).with_context(|| format!("loading vocabulary from {}", dir.display()))
}

/// Binary dataset, or CSV when the file name ends in `.csv`.
fn load_dataset(path: &Path, vocab: &Vocabulary) -> Result<Dataset> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let loaded = if is_csv {
        import_csv(path, vocab)
    } else {
        Dataset::read(path, Some(vocab))
    };
    loaded.with_context(|| format!("loading dataset {}", path.display()))
}

fn write_dataset(manifest: &mut RunManifest, path: &Path, data: &Dataset) -> Result<()> {
    data.write(path)
        .with_context(|| format!("writing {}", path.display()))?;
    manifest.output(path);
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut manifest = RunManifest::start("synth");
    manifest.input("config", &args.config);
    let mut table = read_toml(&args.config)?;
    if let Some(seed) = args.seed {
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    if let Some(n) = args.samples_per_anp {
        table.insert("samples_per_anp".into(), toml::Value::Integer(n as i64));
    }
    if let Some(t) = args.noise_temp {
        table.insert("noise_temp".into(), toml::Value::Float(t));
    }
    let config: SynthConfig = table
        .try_into()
        .with_context(|| format!("invalid synth config {}", args.config.display()))?;
    let (vocab, samples) = synth_generate(&config)?;
    for w in vocab.validate().warnings {
        eprintln!("warning: {w}");
    }
    let data = Dataset::new(&vocab, samples)?;

    create_dir(&args.out_dir)?;
    let vocab_dir = args.vocab_dir.unwrap_or_else(|| args.out_dir.join("vocab"));
    let dataset = args.dataset.unwrap_or_else(|| args.out_dir.join("dataset.anpd"));
    create_dir(&vocab_dir)?;
    vocab.save(&vocab_dir)?;
    manifest.output(&vocab_dir);
    write_dataset(&mut manifest, &dataset, &data)?;
    manifest.config(&config)?;
    manifest.seed(config.seed);
    manifest.finish(&args.out_dir)?;
    println!(
        "{} samples over {} ANPs -> {}",
        data.len(),
        vocab.n_anp(),
        dataset.display()
    );
    Ok(())
}

pub fn split(args: SplitArgs) -> Result<()> {
    let mut manifest = RunManifest::start("split");
    manifest.input("dataset", &args.dataset);
    manifest.input("vocab_dir", &args.vocab_dir);
    let vocab = load_vocab(&args.vocab_dir)?;
    let data = load_dataset(&args.dataset, &vocab)?;
    let (train, test) = stratified_split(&data.samples, args.train_fraction, args.seed)?;

    create_dir(&args.out_dir)?;
    let (train_path, test_path) = (args.out_dir.join("train.anpd"), args.out_dir.join("test.anpd"));
    let (n_train, n_test) = (train.len(), test.len());
    write_dataset(&mut manifest, &train_path, &Dataset::new(&vocab, train)?)?;
    write_dataset(&mut manifest, &test_path, &Dataset::new(&vocab, test)?)?;
    manifest.config(&json!({ "train_fraction": args.train_fraction }))?;
    manifest.seed(args.seed);
    manifest.finish(&args.out_dir)?;
    println!("train {n_train}, test {n_test}");
    Ok(())
}

/// Training settings as read from a config file; every key is optional there
/// because flags may supply it.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    hidden: Option<usize>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    momentum: Option<f64>,
    weight_decay: Option<f64>,
    seed: Option<u64>,
    shuffle: Option<bool>,
    validation_fraction: Option<f64>,
}

#[derive(Serialize)]
struct TrainSettings {
    hidden: usize,
    #[serde(flatten)]
    train: TrainConfig,
}

fn train_settings(args: &TrainArgs) -> Result<TrainSettings> {
    let file: TrainFile = match &args.config {
        Some(p) => read_toml(p)?
            .try_into()
            .with_context(|| format!("invalid train config {}", p.display()))?,
        None => TrainFile::default(),
    };
    let seed = args
        .seed
        .or(file.seed)
        .ok_or_else(|| anyhow!("missing required key `seed`: set it in the config file or pass --seed"))?;
    let mut train = TrainConfig::with_seed(seed);
    let pick = |flag: Option<f64>, key: Option<f64>, default: f64| flag.or(key).unwrap_or(default);
    train.epochs = args.epochs.or(file.epochs).unwrap_or(train.epochs);
    train.batch_size = args.batch_size.or(file.batch_size).unwrap_or(train.batch_size);
    train.learning_rate = pick(args.lr, file.learning_rate, train.learning_rate);
    train.momentum = pick(args.momentum, file.momentum, train.momentum);
    train.weight_decay = pick(args.weight_decay, file.weight_decay, train.weight_decay);
    train.shuffle = file.shuffle.unwrap_or(train.shuffle);
    train.validation_fraction = args.validation_fraction.or(file.validation_fraction);
    let hidden = args.hidden.or(file.hidden).unwrap_or(FusionDims::REFERENCE.hidden);
    Ok(TrainSettings { hidden, train })
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut manifest = RunManifest::start("train");
    manifest.input("dataset", &args.dataset);
    manifest.input("vocab_dir", &args.vocab_dir);
    if let Some(c) = &args.config {
        manifest.input("config", c);
    }
    let settings = train_settings(&args)?;
    let vocab = load_vocab(&args.vocab_dir)?;
    let data = load_dataset(&args.dataset, &vocab)?;
    ensure!(!data.is_empty(), "dataset {} has no samples", args.dataset.display());

    let dims = FusionDims::new(vocab.n_adj(), vocab.n_noun(), settings.hidden, vocab.n_anp());
    let mut net = FusionNetwork::build(dims, settings.train.seed)?;
    let history = fusion::train(&mut net, &data.samples, &settings.train)?;

    create_dir(&args.out_dir)?;
    let checkpoint = args
        .checkpoint
        .clone()
        .unwrap_or_else(|| args.out_dir.join("model.anpm"));
    save_checkpoint(&net, &checkpoint).with_context(|| format!("writing {}", checkpoint.display()))?;
    manifest.output(&checkpoint);
    manifest.write(&args.out_dir.join("history.csv"), tables::history_csv(&history)?)?;
    manifest.config(&settings)?;
    manifest.seed(settings.train.seed);
    manifest.finish(&args.out_dir)?;
    if let Some(last) = history.last() {
        println!(
            "epoch {}: loss {:.6}, train top-1 {:.2}%",
            last.epoch, last.train_loss, last.train_top1
        );
    }
    Ok(())
}

struct Loaded {
    vocab: Vocabulary,
    net: FusionNetwork,
    data: Dataset,
}

fn load_model(args: &ModelArgs, manifest: &mut RunManifest) -> Result<Loaded> {
    manifest.input("checkpoint", &args.checkpoint);
    manifest.input("dataset", &args.dataset);
    manifest.input("vocab_dir", &args.vocab_dir);
    ensure!(args.k >= 1, "--k must be at least 1");
    let vocab = load_vocab(&args.vocab_dir)?;
    let net = load_checkpoint(&args.checkpoint).with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let d = net.dims();
    ensure!(
        (d.n_adj, d.n_noun, d.n_anp) == (vocab.n_adj(), vocab.n_noun(), vocab.n_anp()),
        "checkpoint dims {}/{}/{} do not match vocabulary {}/{}/{}",
        d.n_adj,
        d.n_noun,
        d.n_anp,
        vocab.n_adj(),
        vocab.n_noun(),
        vocab.n_anp()
    );
    let data = load_dataset(&args.dataset, &vocab)?;
    create_dir(&args.out_dir)?;
    Ok(Loaded { vocab, net, data })
}

fn out(args: &ModelArgs, name: &str) -> PathBuf {
    args.out_dir.join(name)
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let mut manifest = RunManifest::start("eval");
    let m = &args.model;
    let Loaded { vocab, net, data } = load_model(m, &mut manifest)?;
    ensure!(
        !data.is_empty(),
        "dataset {} has no samples to evaluate",
        m.dataset.display()
    );

    let probs = net.predict_batch(&data.samples)?;
    let mut ks = vec![1, m.k];
    ks.dedup();
    let results = ks
        .iter()
        .map(|&k| Ok((k, concept_accuracies(&data.samples, &probs, vocab.n_anp(), k)?)))
        .collect::<Result<Vec<_>>>()?;
    let at_k = &results.last().expect("at least one k").1;
    let histograms = Concept::ALL
        .into_iter()
        .map(|c| {
            let accs: Vec<f64> = at_k[c as usize].present().into_iter().map(|(_, a)| a).collect();
            Ok((c, accuracy_histogram(&accs, args.bin_width)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let codetection = codetection_for_samples(&data.samples, &probs, m.k)?;

    manifest.write(&out(m, "accuracy.csv"), tables::accuracy_csv(&results)?)?;
    manifest.write(&out(m, "per_class.csv"), tables::per_class_csv(&vocab, &results)?)?;
    manifest.write(&out(m, "histogram.csv"), tables::histogram_csv(m.k, &histograms)?)?;
    manifest.write(&out(m, "codetection.csv"), tables::codetection_csv(m.k, &codetection)?)?;
    manifest.config(&json!({ "k": m.k, "bin_width": args.bin_width }))?;
    manifest.finish(&m.out_dir)?;
    for (k, t) in &results {
        let pct = |c: Concept| t[c as usize].overall().unwrap_or(0.0);
        println!(
            "top-{k}: Adj {:.2}%, Noun {:.2}%, ANP {:.2}%",
            pct(Concept::Adjective),
            pct(Concept::Noun),
            pct(Concept::Anp)
        );
    }
    Ok(())
}

fn parse_target(key: &str, vocab: &Vocabulary) -> Result<usize> {
    vocab.find_anp(key).ok_or_else(|| {
        anyhow!(
            "unknown target ANP `{key}` (give an index below {} or an ANP name)",
            vocab.n_anp()
        )
    })
}

pub fn explain(args: ExplainArgs) -> Result<()> {
    let mut manifest = RunManifest::start("explain");
    let m = &args.model;
    let Loaded { vocab, net, data } = load_model(m, &mut manifest)?;
    let sample = data
        .samples
        .get(args.sample)
        .ok_or_else(|| anyhow!("sample {} out of range ({} samples)", args.sample, data.len()))?;
    let target = match &args.target {
        Some(key) => parse_target(key, &vocab)?,
        None => top_k_indices(&net.predict_sample(sample)?, 1)[0],
    };
    let report = explain_sample(&net, sample, target)?;

    manifest.write(&out(m, "relevance.csv"), tables::relevance_csv(&vocab, &report)?)?;
    manifest.config(&json!({
        "sample": args.sample,
        "target": target,
        "root_relevance": report.root_relevance,
        "contribution_sum": report.total(),
        "degenerate": report.degenerate,
    }))?;
    manifest.finish(&m.out_dir)?;
    println!("sample {}, target {} ({})", args.sample, target, vocab.anp_name(target));
    println!(
        "checksum: root {:.6}, sum {:.6}, adjective {:.6}, noun {:.6}",
        report.root_relevance,
        report.total(),
        report.adj_total(),
        report.noun_total()
    );
    if report.degenerate {
        println!("degenerate: relevance not fully propagated; contributions do not sum to the root");
    }
    Ok(())
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let mut manifest = RunManifest::start("analyze");
    let m = &args.model;
    let Loaded { vocab, net, data } = load_model(m, &mut manifest)?;
    let samples = &data.samples;
    match args.which {
        Which::Anr | Which::Orientation => {
            let table = anr_table(&net, samples, args.mode, m.k)?;
            if table.excluded > 0 {
                eprintln!("note: {} event(s) gave no ANR and were skipped", table.excluded);
            }
            let (name, csv) = if matches!(args.which, Which::Anr) {
                (format!("anr_{}.csv", args.mode), tables::anr_csv(&vocab, &table)?)
            } else {
                let labels = classify_orientation(&table.records);
                (
                    format!("orientation_{}.csv", args.mode),
                    tables::orientation_csv(&vocab, &labels)?,
                )
            };
            manifest.write(&out(m, &name), csv)?;
            println!("{} ANPs with ANR under {}", table.records.len(), args.mode);
        }
        Which::Equiv => {
            let pairs = visually_equivalent(&contribution_profiles(&net, samples, m.k)?, m.k);
            manifest.write(&out(m, "equivalent.csv"), tables::equivalence_csv(&vocab, &pairs)?)?;
            println!("{} visually equivalent pair(s)", pairs.len());
        }
        Which::Related => {
            let related = contribution_profiles(&net, samples, m.k)?
                .iter()
                .map(|p| related_concepts(p, &vocab, m.k))
                .collect::<anpnet_core::Result<Vec<_>>>()?;
            if related.is_empty() {
                bail!("no ANP had a qualifying prediction in {}", m.dataset.display());
            }
            manifest.write(&out(m, "related.csv"), tables::related_csv(&vocab, &related)?)?;
            println!("related concepts for {} ANPs", related.len());
        }
    }
    let which = match args.which {
        Which::Anr => "anr",
        Which::Orientation => "orientation",
        Which::Equiv => "equiv",
        Which::Related => "related",
    };
    manifest.config(&json!({ "which": which, "mode": args.mode.as_str(), "k": m.k }))?;
    manifest.finish(&m.out_dir)?;
    Ok(())
}
