//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

#[path = "../../core/tests/common/gradcheck.rs"]
mod gradcheck;

use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tocgen::doc::{parse_layout_json, parse_layout_xml, parse_toc, serialize_toc, write_layout_xml};
use tocgen::doc::{Document, PageInfo, Rgb, TextLine, TocEntry, TocTree, MAX_TOC_DEPTH};
use tocgen::harness::{
    evaluate_detector, evaluate_hierarchizer, evaluate_pipeline, featurize, generate_corpus, hierarchizer_samples,
    run_learning_curve, title_vocab, train_pipeline, AnnotatedDoc, PipelineConfig, SyntheticSpec,
};
use tocgen::hierarchizer::HierConfig;
use tocgen::metrics::{score_toc, weighted_f1, xerox_scores, InexOptions};
use tocgen::template::TemplateToc;
use tocgen::train::TrainConfig;
use tocgen::tree::{build_toc, reorganize};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Written to the raw stderr handle so the line shows even when output is captured.
fn report(id: u32, name: &str, o: &Outcome, elapsed: Duration) {
    let line = format!(
        "[{}] {id}. {name}: {} ({:.1}s)\n",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            o.pass = false;
            o.detail = format!("{}; over the {}s limit", o.detail, limit.as_secs());
        }
    }
    (o, elapsed)
}

fn crf_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..200 {
        let (n, k) = (rng.gen_range(1..=6), rng.gen_range(1..=4));
        if let Err(e) = gradcheck::crf_against_enumeration(rng.gen(), n, k, 1e-6) {
            return outcome(false, format!("instance {i}: {e}"));
        }
    }
    outcome(true, "200 random instances agree with enumeration within 1e-6")
}

fn gradient_checks() -> Outcome {
    let results = gradcheck::all(100);
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    if failed.is_empty() {
        outcome(true, format!("{} layer checks below relative error {:e}", results.len(), gradcheck::TOL))
    } else {
        outcome(false, failed.join("; "))
    }
}

fn titles(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("t{i}")).collect()
}

fn monotone_pages(rng: &mut ChaCha8Rng, n: usize) -> (Vec<u32>, u32) {
    let mut page = 1;
    let pages = (0..n)
        .map(|_| {
            page += rng.gen_range(0..3);
            page
        })
        .collect();
    (pages, page + rng.gen_range(0..4))
}

fn tree_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..10_000 {
        let n = rng.gen_range(0..=50);
        let levels: Vec<u8> = (0..n).map(|_| rng.gen_range(1..=6)).collect();
        let t = titles(n);
        let (pages, page_count) = monotone_pages(&mut rng, n);
        let toc = match build_toc(&t, &pages, &levels, page_count) {
            Ok(toc) => toc,
            Err(e) => return outcome(false, format!("case {case}: {e}")),
        };
        if let Err(e) = toc.validate() {
            return outcome(false, format!("case {case}: invalid output: {e}"));
        }
        let order: Vec<&str> = toc.preorder().iter().map(|(e, _)| e.title.as_str()).collect();
        if order != t.iter().map(String::as_str).collect::<Vec<_>>() {
            return outcome(false, format!("case {case}: title order changed"));
        }
        let depths: Vec<u8> = toc.preorder().iter().map(|(e, _)| e.level).collect();
        if build_toc(&t, &pages, &depths, page_count).ok().as_ref() != Some(&toc) {
            return outcome(false, format!("case {case}: rebuilding is not idempotent"));
        }
        // A sequence a valid TOC could produce must come back unchanged.
        let mut valid: Vec<u8> = Vec::with_capacity(n);
        for _ in 0..n {
            let top = valid.last().map_or(1, |&p| (p + 1).min(MAX_TOC_DEPTH));
            valid.push(rng.gen_range(1..=top));
        }
        if reorganize(&valid).depths != valid {
            return outcome(false, format!("case {case}: valid sequence {valid:?} was changed"));
        }
    }
    outcome(true, "10000 sequences: valid, ordered, idempotent, identity on valid input")
}

fn random_tree(rng: &mut ChaCha8Rng) -> TocTree {
    const NAMES: [&str; 6] = ["Fees", "Risks", "Costs", "Taxes", "Glossary", "Annex"];
    let n = rng.gen_range(0..=14);
    let t: Vec<&str> = (0..n).map(|_| NAMES[rng.gen_range(0..NAMES.len())]).collect();
    let levels: Vec<u8> = (0..n).map(|_| rng.gen_range(1..=5)).collect();
    let (pages, page_count) = monotone_pages(rng, n);
    build_toc(&t, &pages, &levels, page_count).expect("valid input")
}

fn leaf(title: &str) -> TocEntry {
    TocEntry { title: title.into(), start_page: 1, end_page: 1, level: 1, children: vec![] }
}

fn metric_identities() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    let f1 = |p: f64, r: f64| 2.0 * p * r / (p + r);
    let wf1 = weighted_f1(&["T", "T", "N", "N"], &["T", "N", "N", "N"]).unwrap().weighted_f1;
    let expected = (2.0 * f1(1.0, 0.5) + 2.0 * f1(2.0 / 3.0, 1.0)) / 4.0;
    if !close(wf1, expected) {
        return outcome(false, format!("weighted F1 {wf1} vs {expected}"));
    }
    let gold = TocTree::new(vec![leaf("A"), leaf("B"), leaf("C"), leaf("D")]);
    let pred = TocTree::new(vec![leaf("A"), leaf("B"), leaf("X")]);
    let x = xerox_scores(&gold, &pred).f1;
    if !close(x, 4.0 / 7.0) {
        return outcome(false, format!("Xerox F1 {x} vs 4/7"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..1000 {
        let (g, p) = (random_tree(&mut rng), random_tree(&mut rng));
        let same = score_toc(&g, &g, &InexOptions::default());
        if [same.xerox_f1(), same.xerox_title_accuracy(), same.xerox.title_f1, same.inex08_f1()] != [1.0; 4] {
            return outcome(false, format!("pair {i}: a tree scored against itself is not 1"));
        }
        let s = xerox_scores(&g, &p);
        if s.f1 > s.title_f1 + 1e-12 {
            return outcome(false, format!("pair {i}: Xerox F1 {} above title F1 {}", s.f1, s.title_f1));
        }
    }
    outcome(
        true,
        format!("weighted F1 {wf1:.4}, Xerox F1 {x:.4}, 1000 pairs with Xerox F1 <= title F1, self-scores 1"),
    )
}

fn end_to_end() -> Outcome {
    let spec = SyntheticSpec { n_docs: 130, ..Default::default() };
    let corpus = generate_corpus(&spec, 7).unwrap();
    let mut cfg = PipelineConfig { seed: 1, ..Default::default() };
    cfg.train.epochs = 3;
    cfg.hierarchizer_train.epochs = 15;
    let ann: Vec<AnnotatedDoc> =
        corpus.docs.iter().map(|d| AnnotatedDoc::new(&d.document, d.toc.clone(), &cfg.segmenter)).collect();
    let (train, test) = ann.split_at(100);
    let pages = corpus.docs.iter().map(|d| d.document.page_count() as f64).sum::<f64>() / corpus.docs.len() as f64;
    let trained = train_pipeline(train, None, &cfg).unwrap();
    let det = evaluate_detector(&trained.models.detector, test, cfg.threshold).unwrap().weighted_f1;
    let vocab = &trained.models.hierarchizer.title_vocab;
    let seqs = hierarchizer_samples(test, &featurize(test, vocab).unwrap(), None, None);
    let hier = evaluate_hierarchizer(&trained.models.hierarchizer, &seqs).unwrap().weighted_f1;
    let pairs: Vec<(Document, TocTree)> =
        corpus.docs[100..].iter().map(|d| (d.document.clone(), d.toc.clone())).collect();
    let (_, xerox) = evaluate_pipeline(&trained.models, &pairs, &cfg).unwrap();
    outcome(
        det >= 0.95 && hier >= 0.85 && xerox >= 0.80,
        format!(
            "100/30 docs, {pages:.1} pages on average: detector F1 {det:.4} (>= 0.95), hierarchizer F1 {hier:.4} (>= 0.85), pipeline Xerox F1 {xerox:.4} (>= 0.80)"
        ),
    )
}

/// Training loop of the learning-curve runs: tiny training sets still get a
/// fixed minimum number of updates, at a lower step size than the default.
fn curve_train_config() -> TrainConfig {
    TrainConfig { batch_size: 4, epochs: 30, min_steps: 200, learning_rate: 3e-4, ..TrainConfig::default() }
}

fn template_low_resource() -> Outcome {
    let spec = SyntheticSpec { n_docs: 60, randomize_palette: true, template_consistency: 1.0, ..Default::default() };
    let corpus = generate_corpus(&spec, 11).unwrap();
    let tpl = TemplateToc::from_tree(&corpus.template).unwrap();
    let ann: Vec<AnnotatedDoc> =
        corpus.docs.iter().map(|d| AnnotatedDoc::new(&d.document, d.toc.clone(), &Default::default())).collect();
    let (pool, test) = ann.split_at(40);
    let vocab = title_vocab(pool).unwrap();
    let pool_seqs = hierarchizer_samples(pool, &featurize(pool, &vocab).unwrap(), Some(&tpl), None);
    let test_seqs = hierarchizer_samples(test, &featurize(test, &vocab).unwrap(), Some(&tpl), None);
    let hier = HierConfig { l_w: 30, ..Default::default() };
    let sizes = [2, 5];
    let seeds = [1, 2, 3];
    let run = |with: bool| {
        run_learning_curve(&pool_seqs, &test_seqs, &vocab, &sizes, with, &seeds, &hier, &curve_train_config()).unwrap()
    };
    let (without, with) = (run(false), run(true));
    let mut pass = true;
    let mut parts = Vec::new();
    for (a, b) in without.iter().zip(&with) {
        pass &= b.mean_error <= a.mean_error;
        parts.push(format!(
            "{} docs: error {:.4} with template vs {:.4} without",
            a.size, b.mean_error, a.mean_error
        ));
    }
    outcome(pass, format!("{} (mean of 3 seeds)", parts.join(", ")))
}

fn tocgen(args: &[&str], cache: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tocgen"))
        .args(args)
        .env("TOCGEN_CACHE_DIR", cache)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("tocgen {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let run = |root: &Path| -> Result<Vec<(String, Vec<u8>)>, String> {
        let p = |s: &str| root.join(s).display().to_string();
        let (corpus, models) = (p("corpus"), root.join("models"));
        tocgen(&["gen-corpus", "--out", &corpus, "--n-docs", "4", "--seed", "5"], &models)?;
        tocgen(&["train-detector", "--corpus", &corpus, "--epochs", "2", "--seed", "9"], &models)?;
        tocgen(&["train-hierarchizer", "--corpus", &corpus, "--epochs", "3", "--seed", "9"], &models)?;
        let tpl = p("corpus/template.json");
        let tpl_model = p("models/hier-template.tocw");
        tocgen(
            &["train-hierarchizer", "--corpus", &corpus, "--epochs", "2", "--seed", "9", "--template", &tpl, "-o", &tpl_model],
            &models,
        )?;
        tocgen(&["generate-toc", &corpus, "--out-dir", &p("pred")], &models)?;
        tocgen(
            &["generate-toc", &corpus, "--out-dir", &p("pred-template"), "--hierarchizer", &tpl_model, "--template", &tpl],
            &models,
        )?;
        Ok(tree_bytes(root))
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = match (run(a.path()), run(b.path())) {
        (Ok(ra), Ok(rb)) => (ra, rb),
        (Err(e), _) | (_, Err(e)) => return outcome(false, e),
    };
    let names: Vec<&str> = ra.iter().map(|(n, _)| n.as_str()).collect();
    if names != rb.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>() {
        return outcome(false, "the two runs wrote different files");
    }
    if let Some(((name, _), _)) = ra.iter().zip(&rb).find(|(x, y)| x.1 != y.1) {
        return outcome(false, format!("{name} differs between runs"));
    }
    let models = names.iter().filter(|n| n.ends_with(".tocw")).count();
    let tocs = names.iter().filter(|n| n.starts_with("pred")).count();
    outcome(
        models == 3 && tocs == 8,
        format!("{} files byte-identical over two runs ({models} models, {tocs} generated TOCs)", names.len()),
    )
}

fn random_text(rng: &mut ChaCha8Rng, max: usize) -> String {
    const CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 &<>\"'.,:;()-";
    let n = rng.gen_range(0..max);
    let mut s = String::from(char::from(b'a' + rng.gen_range(0..26)));
    s.extend((0..n).map(|_| char::from(CHARS[rng.gen_range(0..CHARS.len())])));
    if rng.gen_bool(0.2) {
        s.push_str(" \u{e9}t\u{e9} \u{2013} \u{201c}x\u{201d}");
    }
    s
}

fn random_document(rng: &mut ChaCha8Rng, id: usize) -> Document {
    let n_pages = rng.gen_range(1..=4);
    let (width, height) = (rng.gen_range(200.0..1200.0), rng.gen_range(200.0..1600.0));
    let pages = (1..=n_pages).map(|number| PageInfo { number, width, height }).collect();
    let lines = (0..rng.gen_range(0..40))
        .map(|_| TextLine {
            text: random_text(rng, 30),
            page: rng.gen_range(1..=n_pages),
            left: rng.gen_range(0.0..800.0),
            top: rng.gen_range(0.0..1200.0),
            width: rng.gen_range(0.0..500.0),
            height: rng.gen_range(1.0..40.0),
            font_size: rng.gen_range(4.0..30.0),
            bold: rng.gen(),
            italic: rng.gen(),
            color: Rgb(rng.gen()),
            font_family: ["Times", "Helvetica Neue", "Arial"][rng.gen_range(0..3)].to_string(),
        })
        .collect();
    Document::new(format!("doc-{id}"), pages, lines)
}

fn round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..1000 {
        let doc = random_document(&mut rng, i);
        match parse_layout_xml(&write_layout_xml(&doc), "x") {
            Ok(back) if back == doc => {}
            _ => return outcome(false, format!("layout document {i} changed through XML")),
        }
        match parse_layout_json(&serde_json::to_string(&doc).unwrap(), "x") {
            Ok(back) if back == doc => {}
            _ => return outcome(false, format!("layout document {i} changed through JSON")),
        }
    }
    for i in 0..1000 {
        let n = rng.gen_range(0..40);
        let t: Vec<String> = (0..n).map(|_| random_text(&mut rng, 24)).collect();
        let levels: Vec<u8> = (0..n).map(|_| rng.gen_range(1..=6)).collect();
        let (pages, page_count) = monotone_pages(&mut rng, n);
        let toc = build_toc(&t, &pages, &levels, page_count).unwrap();
        let bytes = serialize_toc(&toc).unwrap();
        match parse_toc(&bytes) {
            Ok(back) if back == toc => {}
            _ => return outcome(false, format!("TOC {i} changed through JSON")),
        }
    }
    outcome(true, "1000 layout documents (XML and JSON) and 1000 TOCs unchanged")
}

#[test]
fn acceptance() {
    let secs = Duration::from_secs;
    let criteria: Vec<(&str, Option<Duration>, fn() -> Outcome)> = vec![
        ("CRF correctness", Some(secs(10)), crf_correctness),
        ("Gradient checks", Some(secs(60)), gradient_checks),
        ("Tree-builder properties", Some(secs(30)), tree_properties),
        ("Metric identities", None, metric_identities),
        ("Synthetic end-to-end", Some(secs(15 * 60)), end_to_end),
        ("Template low-resource property", None, template_low_resource),
        ("Determinism", None, determinism),
        ("Round-trips", None, round_trips),
    ];
    let mut failed = Vec::new();
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let (o, elapsed) = timed(limit, f);
        report(i as u32 + 1, name, &o, elapsed);
        if !o.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
