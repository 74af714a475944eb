use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tocgen::detector::{train_detector, DetectorModel};
use tocgen::doc::{ingest_layout_file, parse_toc, serialize_toc, TocTree};
use tocgen::features::featurize_document;
use tocgen::harness::{
    curve_csv, detect, detector_samples, featurize, generate_corpus, generate_toc, hierarchize, hierarchizer_samples,
    read_corpus, run_learning_curve, title_vocab, train_hierarchizer_on, write_corpus, AnnotatedDoc, Models,
    PipelineConfig, SyntheticSpec, TitleSource,
};
use tocgen::hierarchizer::HierarchizerModel;
use tocgen::metrics::{score_toc, InexOptions, TocScore};
use tocgen::segment::{block_boxes, segment};
use tocgen::template::{match_title, template_only_hierarchize, TemplateToc};
use tocgen::Error;

/// Directory holding default model files when no path is given.
const CACHE_ENV: &str = "TOCGEN_CACHE_DIR";
const DEFAULT_CACHE: &str = ".tocgen";

#[derive(Parser)]
#[command(name = "tocgen", version, about = "Table-of-contents generation from layout files")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline configuration (TOML or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Template TOC; enables template features where the model uses them.
    #[arg(long, global = true)]
    template: Option<PathBuf>,
    /// Overrides the detector threshold.
    #[arg(long, global = true)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct ModelPaths {
    /// Detector weights; defaults to detector.tocw in the cache directory.
    #[arg(long)]
    detector: Option<PathBuf>,
    /// Hierarchizer weights; defaults to hierarchizer.tocw in the cache directory.
    #[arg(long)]
    hierarchizer: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parses a layout file and prints the document as JSON.
    Ingest {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Prints the text blocks of a layout file.
    Segment {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Prints one encoded feature vector per block.
    Featurize {
        input: PathBuf,
        /// Model whose title vocabulary is used.
        #[arg(long)]
        detector: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Writes a synthetic corpus of layout files and gold TOCs.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        /// Corpus spec (JSON); defaults are used for missing keys.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        n_docs: Option<usize>,
    },
    /// Trains the title detector on a corpus directory.
    TrainDetector {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Trains the hierarchizer on a corpus directory.
    TrainHierarchizer {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Train on titles found by this detector instead of all gold titles.
        #[arg(long)]
        detector: Option<PathBuf>,
    },
    /// Prints the detected titles of a layout file.
    Detect {
        input: PathBuf,
        #[arg(long)]
        detector: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Prints the detected titles of a layout file with their levels.
    Hierarchize {
        input: PathBuf,
        #[command(flatten)]
        models: ModelPaths,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generates TOC JSON for layout files or directories of them.
    GenerateToc {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        models: ModelPaths,
        /// Output file; only valid for a single input.
        #[arg(short, long, conflicts_with = "out_dir")]
        output: Option<PathBuf>,
        /// Writes `<doc-id>.toc.json` files here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Matches titles against the template TOC.
    TemplateMatch {
        titles: Vec<String>,
        /// File with one title per line.
        #[arg(long)]
        titles_file: Option<PathBuf>,
        #[arg(long, default_value_t = tocgen::template::DEFAULT_THRESHOLD_RATIO)]
        ratio: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Scores predicted TOCs against gold TOCs (files or directories).
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        fuzzy_ratio: f64,
        #[arg(long)]
        no_title_check: bool,
        #[arg(long)]
        no_page_check: bool,
        #[arg(long)]
        no_depth_check: bool,
        /// Per-document CSV report.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Draws per-document Xerox F1 bars on stderr.
        #[arg(long)]
        plot: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Hierarchizer test error against training-set size, with and without template features.
    LearningCurve {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [2, 5, 10, 20, 40])]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3])]
        seeds: Vec<u64>,
        /// Documents held out for testing, taken from the end of the sorted corpus.
        #[arg(long)]
        test_docs: Option<usize>,
        #[arg(long, value_enum, default_value_t = CurveMode::Both)]
        mode: CurveMode,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CurveMode {
    With,
    Without,
    Both,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Usage(_) | Failure::Lib(Error::Config(_)) => 1,
        Failure::Lib(Error::ModelMismatch { .. }) => 3,
        Failure::Lib(_) => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Lib(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&f))
        }
    }
}

fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV).map_or_else(|| PathBuf::from(DEFAULT_CACHE), PathBuf::from)
}

fn model_path(given: Option<PathBuf>, name: &str) -> PathBuf {
    given.unwrap_or_else(|| cache_dir().join(name))
}

fn load_config(g: &Global) -> CmdResult<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = &g.template {
        cfg.template_path = Some(t.clone());
    }
    if let Some(t) = g.threshold {
        cfg.threshold = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_template(cfg: &PipelineConfig) -> CmdResult<Option<TemplateToc>> {
    Ok(cfg.template_path.as_deref().map(TemplateToc::load).transpose()?)
}

fn emit(bytes: &[u8], output: Option<&Path>) -> CmdResult {
    match output {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
            }
            std::fs::write(p, bytes).map_err(|e| Error::Io { path: p.into(), source: e })?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, output: Option<&Path>) -> CmdResult {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(Error::from)?;
    bytes.push(b'\n');
    emit(&bytes, output)
}

fn ensure_parent(path: &Path) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    }
    Ok(())
}

fn annotated(dir: &Path, cfg: &PipelineConfig) -> CmdResult<Vec<AnnotatedDoc>> {
    Ok(read_corpus(dir)?
        .into_iter()
        .map(|(doc, toc)| AnnotatedDoc::new(&doc, toc, &cfg.segmenter))
        .collect())
}

fn layout_inputs(inputs: &[PathBuf]) -> CmdResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::Io { path: p.clone(), source: e })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "xml"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

#[derive(Serialize)]
struct DetectedTitle<'a> {
    block: usize,
    page: u32,
    p_title: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    level: Option<u8>,
    text: &'a str,
}

fn run(cli: Cli) -> CmdResult {
    let g = &cli.global;
    match cli.command {
        Command::Ingest { input, output } => {
            let doc = ingest_layout_file(&input)?;
            emit_json(&doc, output.as_deref())
        }
        Command::Segment { input, output } => {
            let cfg = load_config(g)?;
            let doc = segment(&ingest_layout_file(&input)?, &cfg.segmenter);
            emit_json(&block_boxes(&doc), output.as_deref())
        }
        Command::Featurize { input, detector, output } => {
            let cfg = load_config(g)?;
            let model = DetectorModel::load(&model_path(detector, "detector.tocw"))?;
            let doc = segment(&ingest_layout_file(&input)?, &cfg.segmenter);
            let (_, feats) = featurize_document(&doc, &model.title_vocab)?;
            let values: Vec<&[f64]> = feats.iter().map(|f| f.values.as_slice()).collect();
            emit_json(&values, output.as_deref())
        }
        Command::GenCorpus { out, spec, n_docs } => {
            let mut spec: SyntheticSpec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                }
                None => SyntheticSpec::default(),
            };
            if let Some(n) = n_docs {
                spec.n_docs = n;
            }
            spec.validate()?;
            let corpus = generate_corpus(&spec, g.seed.unwrap_or(0))?;
            write_corpus(&corpus, &spec, &out)?;
            Ok(())
        }
        Command::TrainDetector { corpus, output, epochs } => {
            let mut cfg = load_config(g)?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let docs = annotated(&corpus, &cfg)?;
            let vocab = title_vocab(&docs)?;
            let feats = featurize(&docs, &vocab)?;
            let (model, report) = train_detector(&detector_samples(&docs, &feats), vocab, &cfg.detector, &cfg.train, cfg.seed)?;
            let path = model_path(output, "detector.tocw");
            ensure_parent(&path)?;
            model.save(&path)?;
            log::info!("detector saved to {}, best epoch {}", path.display(), report.best_epoch);
            emit_json(&report, Some(&path.with_extension("report.json")))
        }
        Command::TrainHierarchizer { corpus, output, epochs, detector } => {
            let mut cfg = load_config(g)?;
            if let Some(e) = epochs {
                cfg.hierarchizer_train.epochs = e;
            }
            if cfg.template_path.is_some() {
                cfg.hierarchizer.use_template = true;
            }
            let det = match detector {
                Some(p) => {
                    cfg.hierarchizer_titles = TitleSource::Detected;
                    Some(DetectorModel::load(&p)?)
                }
                None if cfg.hierarchizer_titles == TitleSource::Detected => {
                    Some(DetectorModel::load(&model_path(None, "detector.tocw"))?)
                }
                None => None,
            };
            let template = load_template(&cfg)?;
            let docs = annotated(&corpus, &cfg)?;
            let vocab = title_vocab(&docs)?;
            let feats = featurize(&docs, &vocab)?;
            let (model, report) = train_hierarchizer_on(&docs, &feats, &vocab, template.as_ref(), det.as_ref(), &cfg)?;
            let path = model_path(output, "hierarchizer.tocw");
            ensure_parent(&path)?;
            model.save(&path)?;
            log::info!("hierarchizer saved to {}, best epoch {}", path.display(), report.best_epoch);
            emit_json(&report, Some(&path.with_extension("report.json")))
        }
        Command::Detect { input, detector, output } => {
            let cfg = load_config(g)?;
            let model = DetectorModel::load(&model_path(detector, "detector.tocw"))?;
            let det = detect(&ingest_layout_file(&input)?, &model, &cfg)?;
            let titles: Vec<DetectedTitle> = det
                .titles
                .iter()
                .map(|&i| DetectedTitle {
                    block: i,
                    page: det.doc.blocks[i].page(),
                    p_title: det.p_title[i],
                    level: None,
                    text: &det.doc.blocks[i].merged_text,
                })
                .collect();
            emit_json(&titles, output.as_deref())
        }
        Command::Hierarchize { input, models, output } => {
            let cfg = load_config(g)?;
            let detector = DetectorModel::load(&model_path(models.detector, "detector.tocw"))?;
            let hier = HierarchizerModel::load(&model_path(models.hierarchizer, "hierarchizer.tocw"))?;
            let template = load_template(&cfg)?;
            check_template(&hier, template.as_ref())?;
            let det = detect(&ingest_layout_file(&input)?, &detector, &cfg)?;
            let levels = hierarchize(&det, &hier, template.as_ref())?;
            let titles: Vec<DetectedTitle> = det
                .titles
                .iter()
                .zip(&levels)
                .map(|(&i, &l)| DetectedTitle {
                    block: i,
                    page: det.doc.blocks[i].page(),
                    p_title: det.p_title[i],
                    level: Some(l),
                    text: &det.doc.blocks[i].merged_text,
                })
                .collect();
            emit_json(&titles, output.as_deref())
        }
        Command::GenerateToc { inputs, models, output, out_dir } => {
            let cfg = load_config(g)?;
            let files = layout_inputs(&inputs)?;
            if output.is_some() && files.len() != 1 {
                return Err(Failure::Usage("--output takes a single layout file; use --out-dir".into()));
            }
            let models = Models {
                detector: DetectorModel::load(&model_path(models.detector, "detector.tocw"))?,
                hierarchizer: HierarchizerModel::load(&model_path(models.hierarchizer, "hierarchizer.tocw"))?,
                template: load_template(&cfg)?,
            };
            check_template(&models.hierarchizer, models.template.as_ref())?;
            for f in &files {
                let doc = ingest_layout_file(f)?;
                let toc = generate_toc(&doc, &models, &cfg)?;
                let bytes = serialize_toc(&toc)?;
                match (&out_dir, &output) {
                    (Some(dir), _) => emit(&bytes, Some(&dir.join(format!("{}.toc.json", doc.doc_id))))?,
                    (None, o) => emit(&bytes, o.as_deref())?,
                }
            }
            Ok(())
        }
        Command::TemplateMatch { mut titles, titles_file, ratio, output } => {
            let cfg = load_config(g)?;
            let Some(template) = load_template(&cfg)? else {
                return Err(Failure::Usage("template-match needs --template".into()));
            };
            if let Some(p) = titles_file {
                let text = std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                titles.extend(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string));
            }
            #[derive(Serialize)]
            struct Row<'a> {
                title: &'a str,
                level: Option<u8>,
                distance: usize,
                matched: Option<&'a str>,
            }
            let levels = template_only_hierarchize(&titles, &template, ratio);
            let rows: Vec<Row> = titles
                .iter()
                .zip(levels)
                .map(|(t, level)| {
                    let m = match_title(t, &template, ratio);
                    Row {
                        title: t,
                        level,
                        distance: m.distance,
                        matched: m.entry.map(|i| template.entries[i].title.as_str()),
                    }
                })
                .collect();
            emit_json(&rows, output.as_deref())
        }
        Command::Evaluate {
            gold,
            pred,
            fuzzy_ratio,
            no_title_check,
            no_page_check,
            no_depth_check,
            csv,
            plot,
            output,
        } => {
            let opts = InexOptions {
                fuzzy_ratio,
                check_title: !no_title_check,
                check_page: !no_page_check,
                check_depth: !no_depth_check,
            };
            let pairs = toc_pairs(&gold, &pred)?;
            evaluate(&pairs, &opts, csv.as_deref(), plot, output.as_deref())
        }
        Command::LearningCurve { corpus, sizes, seeds, test_docs, mode, epochs, output } => {
            let mut cfg = load_config(g)?;
            if let Some(e) = epochs {
                cfg.hierarchizer_train.epochs = e;
            }
            let Some(template) = load_template(&cfg)? else {
                return Err(Failure::Usage("learning-curve needs --template".into()));
            };
            let docs = annotated(&corpus, &cfg)?;
            let n_test = test_docs.unwrap_or(docs.len() / 3);
            if n_test == 0 || n_test >= docs.len() {
                return Err(Failure::Usage(format!("cannot hold out {n_test} of {} documents", docs.len())));
            }
            let (pool, test) = docs.split_at(docs.len() - n_test);
            let vocab = title_vocab(pool)?;
            let pool_seqs = hierarchizer_samples(pool, &featurize(pool, &vocab)?, Some(&template), None);
            let test_seqs = hierarchizer_samples(test, &featurize(test, &vocab)?, Some(&template), None);
            let modes: &[bool] = match mode {
                CurveMode::With => &[true],
                CurveMode::Without => &[false],
                CurveMode::Both => &[false, true],
            };
            let mut rows = Vec::new();
            for &with in modes {
                rows.extend(run_learning_curve(
                    &pool_seqs,
                    &test_seqs,
                    &vocab,
                    &sizes,
                    with,
                    &seeds,
                    &cfg.hierarchizer,
                    &cfg.hierarchizer_train,
                )?);
            }
            emit(curve_csv(&rows).as_bytes(), output.as_deref())
        }
    }
}

fn check_template(model: &HierarchizerModel, template: Option<&TemplateToc>) -> CmdResult {
    if model.config.use_template && template.is_none() {
        return Err(Failure::Usage("this hierarchizer was trained with template features; pass --template".into()));
    }
    Ok(())
}

fn read_toc(path: &Path) -> CmdResult<TocTree> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    Ok(parse_toc(&bytes)?)
}

/// Pairs `(id, gold, pred)`; directories are matched on `*.toc.json` file names.
fn toc_pairs(gold: &Path, pred: &Path) -> CmdResult<Vec<(String, TocTree, TocTree)>> {
    if !gold.is_dir() {
        let id = gold
            .file_name()
            .map(|n| n.to_string_lossy().trim_end_matches(".toc.json").to_string())
            .unwrap_or_default();
        return Ok(vec![(id, read_toc(gold)?, read_toc(pred)?)]);
    }
    if !pred.is_dir() {
        return Err(Failure::Usage("--gold is a directory, so --pred must be one too".into()));
    }
    let mut names: Vec<String> = std::fs::read_dir(gold)
        .map_err(|e| Error::Io { path: gold.into(), source: e })?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".toc.json"))
        .collect();
    names.sort();
    let mut out = Vec::new();
    for n in names {
        let p = pred.join(&n);
        if !p.exists() {
            log::warn!("no prediction for {n}");
            continue;
        }
        out.push((n.trim_end_matches(".toc.json").to_string(), read_toc(&gold.join(&n))?, read_toc(&p)?));
    }
    if out.is_empty() {
        return Err(Failure::Lib(Error::InvalidInput("no gold/prediction pairs found".into())));
    }
    Ok(out)
}

#[derive(Serialize)]
struct DocReport {
    doc_id: String,
    #[serde(flatten)]
    score: TocScore,
}

#[derive(Serialize)]
struct EvalReport {
    documents: Vec<DocReport>,
    mean_xerox_f1: f64,
    mean_xerox_title_accuracy: f64,
    mean_inex08_f1: f64,
}

fn evaluate(
    pairs: &[(String, TocTree, TocTree)],
    opts: &InexOptions,
    csv_path: Option<&Path>,
    plot: bool,
    output: Option<&Path>,
) -> CmdResult {
    let documents: Vec<DocReport> = pairs
        .iter()
        .map(|(id, g, p)| DocReport { doc_id: id.clone(), score: score_toc(g, p, opts) })
        .collect();
    let n = documents.len() as f64;
    let mean = |f: fn(&TocScore) -> f64| documents.iter().map(|d| f(&d.score)).sum::<f64>() / n;
    let report = EvalReport {
        mean_xerox_f1: mean(TocScore::xerox_f1),
        mean_xerox_title_accuracy: mean(TocScore::xerox_title_accuracy),
        mean_inex08_f1: mean(TocScore::inex08_f1),
        documents,
    };
    if let Some(path) = csv_path {
        let mut w = csv::Writer::from_path(path).map_err(|e| data_error(path, e))?;
        w.write_record(["doc_id", "xerox_f1", "xerox_title_accuracy", "inex08_f1"])
            .map_err(|e| data_error(path, e))?;
        for d in &report.documents {
            w.write_record([
                d.doc_id.clone(),
                d.score.xerox_f1().to_string(),
                d.score.xerox_title_accuracy().to_string(),
                d.score.inex08_f1().to_string(),
            ])
            .map_err(|e| data_error(path, e))?;
        }
        w.flush().map_err(|e| Error::Io { path: path.into(), source: e })?;
    }
    if plot {
        let width = report.documents.iter().map(|d| d.doc_id.len()).max().unwrap_or(0);
        for d in &report.documents {
            let f = d.score.xerox_f1();
            eprintln!("{:width$} {:<40} {:.3}", d.doc_id, "#".repeat((f * 40.0).round() as usize), f);
        }
    }
    emit_json(&report, output)
}

fn data_error(path: &Path, e: csv::Error) -> Failure {
    Failure::Lib(Error::Io { path: path.into(), source: std::io::Error::other(e) })
}
