use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use probekit::checkpoint::Checkpoint;
use probekit::dataset::{SplitFractions, Splits};
use probekit::heads::{branching_uas, read_heads_csv, score_heads, write_heads_csv, Branching};
use probekit::info::{
    best_skyline, conditional_v_entropy, format_table, read_report_csv, table_row, unconditional_v_entropy,
    write_report_csv, InfoReport,
};
use probekit::manifest::RunManifest;
use probekit::probes::{ProbeFamily, ProbeKind};
use probekit::seed::rng_for;
use probekit::spantree::{
    enumerate_trees, log_partition_and_marginals, log_partition_lu, map_tree, tree_log_prob, tree_log_weight,
    EdgeWeights, MAX_ENUMERATION_TOKENS,
};
use probekit::synth::{export_sample, planted_corpus, ExportSampleConfig, PlantedConfig};
use probekit::train::{hyper_search_biaffine, train as train_probe, TrainConfig};
use probekit::treebank::{
    align_attn, format_conllu, read_attn, read_conllu, write_attn, write_reprs, ReprFile, ReprSentence,
    Sentence,
};
use probekit::Error;
use rand::Rng;
use serde_json::{json, Value};

use crate::args::{HeadsArgs, InfoArgs, OracleArgs, PlotArgs, SynthArgs, SynthKind, TrainArgs};
use crate::data::{fractions, load, sibling};
use crate::svg::{chart, Series};
use crate::{CmdResult, Failure};

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn longest(splits: &Splits<f64>) -> usize {
    [&splits.train, &splits.dev, &splits.test].iter().flat_map(|s| s.iter()).map(|e| e.n()).max().unwrap_or(0)
}

pub fn train(a: TrainArgs) -> CmdResult {
    let mut config = match &a.config {
        Some(p) => TrainConfig::from_file(p)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if let Some(v) = a.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = a.eval_every {
        config.eval_every = v;
    }
    if let Some(v) = a.patience {
        config.patience = v;
    }
    if let Some(v) = a.max_batches {
        config.max_batches = v;
    }
    if let Some(v) = a.lr {
        config.lr = v;
    }
    if let Some(v) = a.dropout {
        config.dropout = v;
    }
    if let Some(v) = a.hidden {
        config.hidden = v;
    }
    config.validate()?;
    if a.trials > 0 && a.probe != ProbeKind::contextual(ProbeFamily::Biaffine) {
        return Err(Failure::Usage("--trials applies to the contextual biaffine probe only".into()));
    }
    let fr = fractions(&a.split)?;
    let loaded = load(&a.treebank, &a.reprs)?;
    let splits = loaded.splits(a.layer, config.seed, fr)?;
    if a.probe.positional {
        config.max_len = config.max_len.max(longest(&splits));
    }

    let (outcome, used_config, trials) = if a.trials > 0 {
        let s = hyper_search_biaffine(&splits.train, &splits.dev, a.trials, &config)?;
        (s.outcome, s.best_config, Some(s.trials))
    } else {
        (train_probe(a.probe, &splits.train, &splits.dev, &config)?, config.clone(), None)
    };

    let log_path = sibling(&a.out, ".log.jsonl");
    let manifest = RunManifest::new("train", &used_config.to_kv_string(), config.seed)
        .input("treebank", a.treebank.display())
        .input("reprs", a.reprs.display())
        .input("probe", a.probe)
        .input("layer", a.layer)
        .output("checkpoint", a.out.display())
        .output("log", log_path.display());
    let meta = json!({
        "manifest": manifest,
        "config": used_config,
        "probe": a.probe.to_string(),
        "layer": a.layer,
        "split": { "seed": config.seed, "dev": fr.dev, "test": fr.test },
        "sentences": { "train": splits.train.len(), "dev": splits.dev.len(), "test": splits.test.len() },
        "best_dev_bits": outcome.best_dev_bits,
        "best_step": outcome.best_step,
        "steps": outcome.steps,
        "stopped_early": outcome.stopped_early,
        "trials": trials,
    });
    let ckpt = Checkpoint { params: outcome.params, layer: a.layer, meta };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    ckpt.save(&a.out)?;

    let mut log = create(&log_path)?;
    writeln!(log, "{}", json!({ "manifest": manifest }))?;
    for r in &outcome.log {
        writeln!(log, "{}", serde_json::to_string(r).expect("record serialises"))?;
    }
    log.flush()?;
    println!(
        "{} layer {}: best dev {:.4} bits at step {} of {}",
        a.probe, a.layer, outcome.best_dev_bits, outcome.best_step, outcome.steps
    );
    Ok(())
}

fn split_meta(meta: &Value, path: &Path) -> Result<(u64, SplitFractions), Failure> {
    let split = &meta["split"];
    match (split["seed"].as_u64(), split["dev"].as_f64(), split["test"].as_f64()) {
        (Some(seed), Some(dev), Some(test)) => Ok((seed, SplitFractions { dev, test })),
        _ => Err(Error::ShapeMismatch(format!("{} has no split metadata", path.display())).into()),
    }
}

pub fn info(a: InfoArgs) -> CmdResult {
    let mut paths: Vec<_> = fs::read_dir(&a.model_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "prbp"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyDataset(format!("no .prbp checkpoints in {}", a.model_dir.display())).into());
    }
    let loaded = load(&a.treebank, &a.reprs)?;
    let mut split_cache: BTreeMap<(usize, u64, u64, u64), Splits<f64>> = BTreeMap::new();
    let mut test_of = |layer: usize, seed: u64, fr: SplitFractions| -> Result<Vec<_>, Failure> {
        let key = (layer, seed, fr.dev.to_bits(), fr.test.to_bits());
        let splits = match split_cache.entry(key) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => e.insert(loaded.splits(layer, seed, fr)?),
        };
        Ok(splits.test.clone())
    };

    let mut uncond: BTreeMap<ProbeFamily, (f64, u64, SplitFractions)> = BTreeMap::new();
    let mut contextual = Vec::new();
    for path in &paths {
        let ckpt = Checkpoint::load(path)?;
        let (seed, fr) = split_meta(&ckpt.meta, path)?;
        let kind = ckpt.params.kind();
        if kind.positional {
            let test = test_of(ckpt.layer, seed, fr)?;
            let h = unconditional_v_entropy(&ckpt.params, &test)?;
            log::info!("{}: {kind} h_uncond {h:.4} bits", path.display());
            if uncond.insert(kind.family, (h, seed, fr)).is_some() {
                log::warn!("several positional-{} checkpoints; using {}", kind.family, path.display());
            }
        } else {
            contextual.push((path.clone(), ckpt, seed, fr));
        }
    }
    if contextual.is_empty() {
        return Err(Error::EmptyDataset(format!("no contextual checkpoints in {}", a.model_dir.display())).into());
    }

    let mut rows = Vec::new();
    for (path, ckpt, seed, fr) in &contextual {
        let family = ckpt.params.kind().family;
        let Some(&(h_uncond, u_seed, u_fr)) = uncond.get(&family) else {
            return Err(Error::EmptyDataset(format!(
                "no positional-{family} checkpoint in {} to pair with {}",
                a.model_dir.display(),
                path.display()
            ))
            .into());
        };
        if u_seed != *seed || u_fr != *fr {
            log::warn!("{} was split differently from the positional-{family} probe", path.display());
        }
        let test = test_of(ckpt.layer, *seed, *fr)?;
        let h_cond = conditional_v_entropy(&ckpt.params, &test)?;
        rows.push(InfoReport::new(ckpt.layer, family, h_uncond, h_cond, None)?);
    }
    rows.sort_by_key(|r| (r.family, r.layer));

    let skyline: Vec<f64> = rows.iter().filter(|r| r.family == ProbeFamily::Biaffine).map(|r| r.i_v).collect();
    let mi = a.mi.or_else(|| best_skyline(&skyline));
    let reports: Vec<InfoReport> = match mi {
        Some(m) if m > 0.0 => rows.iter().map(|r| r.with_mi(m)).collect::<Result<_, _>>()?,
        Some(m) => {
            log::warn!("mutual information estimate {m:.4} is not positive; C_V left empty");
            rows.iter().map(|r| InfoReport { mi_estimate: Some(m), ..r.clone() }).collect()
        }
        None => rows,
    };

    let table_path = sibling(&a.out, ".table.txt");
    let manifest = RunManifest::new("info", &format!("model = {}\nmi = {:?}\n", a.model, a.mi), 0)
        .input("model_dir", a.model_dir.display())
        .input("treebank", a.treebank.display())
        .input("reprs", a.reprs.display())
        .output("report", a.out.display())
        .output("table", table_path.display());
    let mut w = create(&a.out)?;
    write_report_csv(&mut w, &reports, Some(&manifest))?;
    w.flush()?;

    let table: Vec<_> = ProbeFamily::ALL
        .iter()
        .filter_map(|&f| table_row(&format!("{}:{f}", a.model), &reports, f))
        .collect();
    let text = format_table(&table);
    let mut t = create(&table_path)?;
    writeln!(t, "# {}", manifest.to_json())?;
    t.write_all(text.as_bytes())?;
    t.flush()?;
    print!("{text}");
    Ok(())
}

pub fn heads(a: HeadsArgs) -> CmdResult {
    let corpus = read_conllu(&a.treebank)?;
    let attn = read_attn(&a.attn)?;
    let scores = score_heads(&attn, &corpus, a.decoder)?;
    let manifest = RunManifest::new("heads", &format!("decoder = {:?}\n", a.decoder), 0)
        .input("attn", a.attn.display())
        .input("treebank", a.treebank.display())
        .output("scores", a.out.display());
    let mut w = create(&a.out)?;
    write_heads_csv(&mut w, &scores, Some(&manifest))?;
    w.flush()?;

    let joined = align_attn(&corpus, &attn)?;
    let gold: Vec<_> = joined.pairs.iter().map(|(s, _)| &s.gold).collect();
    for dir in [Branching::Right, Branching::Left] {
        println!("{dir:?}-branching UAS {:.4}", branching_uas(dir, gold.iter().copied())?);
    }
    if let Some(best) = scores.iter().max_by(|x, y| x.uas.total_cmp(&y.uas)) {
        println!("best head: layer {} head {} UAS {:.4}", best.layer, best.head, best.uas);
    }
    Ok(())
}

pub fn oracle(a: OracleArgs) -> CmdResult {
    if a.n == 0 || a.n > MAX_ENUMERATION_TOKENS {
        return Err(Failure::Usage(format!("--n must lie in 1..={MAX_ENUMERATION_TOKENS}")));
    }
    let n = a.n;
    let mut rng = rng_for(a.seed, "oracle");
    let mut m = ndarray::Array2::zeros((n + 1, n + 1));
    for h in 0..=n {
        for d in 1..=n {
            if h != d {
                m[[h, d]] = 0.05 + rng.random::<f64>();
            }
        }
    }
    let w = EdgeWeights::new(m)?;
    let trees = enumerate_trees(n)?;
    let mut tree_json = Vec::with_capacity(trees.len());
    let mut logs = Vec::with_capacity(trees.len());
    for t in &trees {
        let lw = tree_log_weight(&w, t)?;
        logs.push(lw);
        tree_json.push(json!({ "heads": t.heads(), "log_weight": lw, "log_prob": tree_log_prob(&w, t)? }));
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let enumerated = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    let (log_z, mu) = log_partition_and_marginals(&w)?;
    let rows = |a: &ndarray::Array2<f64>| -> Vec<Vec<f64>> { a.rows().into_iter().map(|r| r.to_vec()).collect() };
    let manifest = RunManifest::new("oracle", &format!("n = {n}\n"), a.seed);
    let doc = json!({
        "manifest": manifest,
        "n": n,
        "seed": a.seed,
        "weights": rows(w.matrix()),
        "tree_count": trees.len(),
        "trees": tree_json,
        "log_partition": log_z,
        "log_partition_lu": log_partition_lu(&w)?,
        "log_partition_enumerated": enumerated,
        "marginals": rows(mu.matrix()),
        "map_tree": map_tree(&w)?.heads(),
    });
    let text = serde_json::to_string_pretty(&doc).expect("oracle output serialises");
    match &a.out {
        Some(p) => {
            let mut f = create(p)?;
            writeln!(f, "{text}")?;
            f.flush()?;
        }
        None => writeln!(std::io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

pub fn plotdata(a: PlotArgs) -> CmdResult {
    let reports = read_report_csv(File::open(&a.report)?)?;
    fs::create_dir_all(&a.out)?;
    let mut layers: Vec<usize> = reports.iter().map(|r| r.layer).collect();
    layers.sort_unstable();
    layers.dedup();
    let iv = |f: ProbeFamily, l: usize| reports.iter().find(|r| r.family == f && r.layer == l).map(|r| r.i_v);
    let mi = reports.iter().find_map(|r| r.mi_estimate);

    let series_path = a.out.join("info_series.csv");
    let mut w = csv::Writer::from_writer(create(&series_path)?);
    let cell = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    w.write_record(["layer", "attentional", "structural", "mi"]).map_err(csv_failure)?;
    for &l in &layers {
        w.write_record([
            l.to_string(),
            cell(iv(ProbeFamily::Attentional, l)),
            cell(iv(ProbeFamily::Structural, l)),
            cell(mi),
        ])
        .map_err(csv_failure)?;
    }
    w.flush()?;

    let line = |f: ProbeFamily| -> Vec<(f64, f64)> {
        layers.iter().filter_map(|&l| iv(f, l).map(|v| (l as f64, v))).collect()
    };
    let mut series = vec![
        Series { label: "attentional".into(), points: line(ProbeFamily::Attentional), dash: "", color: "#1f77b4", scatter: false },
        Series { label: "structural".into(), points: line(ProbeFamily::Structural), dash: "6 4", color: "#d62728", scatter: false },
    ];
    if let (Some(m), Some(&lo), Some(&hi)) = (mi, layers.first(), layers.last()) {
        series.push(Series {
            label: "mutual information".into(),
            points: vec![(lo as f64, m), (hi as f64, m)],
            dash: "2 3",
            color: "#2ca02c",
            scatter: false,
        });
    }
    fs::write(a.out.join("info.svg"), chart("V-information by layer", "layer", "bits", &series))?;

    if let Some(h) = &a.heads {
        let scores = read_heads_csv(File::open(h)?)?;
        let points = scores.iter().map(|s| (s.layer as f64, s.uas)).collect();
        let best: Vec<(f64, f64)> = layers_of(&scores)
            .into_iter()
            .map(|l| {
                let top = scores.iter().filter(|s| s.layer == l).map(|s| s.uas).fold(0.0, f64::max);
                (l as f64, top)
            })
            .collect();
        let series = [
            Series { label: "heads".into(), points, dash: "", color: "#7f7f7f", scatter: true },
            Series { label: "best head".into(), points: best, dash: "", color: "#1f77b4", scatter: false },
        ];
        fs::write(a.out.join("heads.svg"), chart("Attention heads as parsers", "layer", "UAS", &series))?;
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn layers_of(scores: &[probekit::heads::HeadScore]) -> Vec<usize> {
    let mut l: Vec<usize> = scores.iter().map(|s| s.layer).collect();
    l.sort_unstable();
    l.dedup();
    l
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure::Core(Error::Io(std::io::Error::other(e.to_string())))
}

pub fn synth(a: SynthArgs) -> CmdResult {
    fs::create_dir_all(&a.out)?;
    let manifest;
    match a.kind {
        SynthKind::Export => {
            let mut cfg = ExportSampleConfig { seed: a.seed, ..Default::default() };
            if let Some(n) = a.sentences {
                cfg.sentences = n;
            }
            let s = export_sample(&cfg)?;
            fs::write(a.out.join("sample.conllu"), &s.conllu)?;
            write_reprs(a.out.join("trained.repr"), &s.trained)?;
            write_reprs(a.out.join("untrained.repr"), &s.untrained)?;
            write_attn(a.out.join("sample.attw"), &s.attn)?;
            manifest = RunManifest::new("synth", &serde_json::to_string(&cfg).expect("config serialises"), a.seed)
                .output("treebank", "sample.conllu")
                .output("trained", "trained.repr")
                .output("untrained", "untrained.repr")
                .output("attention", "sample.attw");
        }
        SynthKind::Planted => {
            let mut cfg = PlantedConfig { seed: a.seed, ..Default::default() };
            if let Some(n) = a.sentences {
                cfg.sentences = n;
            }
            let (examples, _) = planted_corpus(&cfg)?;
            let sentences: Vec<Sentence> = examples
                .iter()
                .map(|e| Sentence {
                    sent_id: e.id.clone(),
                    tokens: (1..=e.n()).map(|k| format!("t{k}")).collect(),
                    gold: e.gold.clone(),
                })
                .collect();
            let reprs = examples
                .iter()
                .map(|e| ReprSentence {
                    sent_id: e.id.clone(),
                    n_tokens: e.n(),
                    data: e.reprs.vectors().rows().into_iter().skip(1).flatten().map(|&v| v as f32).collect(),
                })
                .collect();
            fs::write(a.out.join("planted.conllu"), format_conllu(&sentences))?;
            write_reprs(a.out.join("planted.repr"), &ReprFile::new(cfg.d1, 1, reprs)?)?;
            manifest = RunManifest::new("synth", &serde_json::to_string(&cfg).expect("config serialises"), a.seed)
                .output("treebank", "planted.conllu")
                .output("reprs", "planted.repr");
        }
    }
    fs::write(a.out.join("manifest.json"), manifest.to_json() + "\n")?;
    println!("wrote {}", a.out.display());
    Ok(())
}
