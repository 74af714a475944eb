use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use tocgen::detector::{CharVocab, DetectorConfig, DetectorModel};
use tocgen::features::{featurize_document, FeatureVector, TitleVocab};
use tocgen::harness::{generate_corpus, generate_toc, Models, PipelineConfig, SyntheticSpec};
use tocgen::hierarchizer::{HierConfig, HierarchizerModel, TitleInput, WordVocab};
use tocgen::metrics::{score_toc, InexOptions};
use tocgen::nn::crf_viterbi;
use tocgen::segment::{segment, SegmenterConfig};
use tocgen::template::{match_title, TemplateToc};
use tocgen::tree::build_toc;

fn corpus() -> tocgen::harness::Corpus {
    generate_corpus(&SyntheticSpec { n_docs: 2, pages: (20, 20), ..Default::default() }, 3).unwrap()
}

fn bench_pipeline(c: &mut Criterion) {
    let corpus = corpus();
    let raw = &corpus.docs[0].document;
    let seg_cfg = SegmenterConfig::default();
    let doc = segment(raw, &seg_cfg);
    let gold: Vec<String> = corpus.docs[0].toc.preorder().iter().map(|(e, _)| e.title.clone()).collect();
    let vocab = TitleVocab::build(&gold).unwrap();
    let texts: Vec<&str> = doc.blocks.iter().map(|b| b.merged_text.as_str()).collect();
    let (_, feats) = featurize_document(&doc, &vocab).unwrap();
    let refs: Vec<&FeatureVector> = feats.iter().collect();
    let detector =
        DetectorModel::new(DetectorConfig::default(), CharVocab::build(&texts, 10, 120), vocab.clone(), 1).unwrap();
    let hierarchizer = HierarchizerModel::new(HierConfig::default(), WordVocab::build(&gold, 2), vocab.clone(), 1).unwrap();
    let titles: Vec<TitleInput> = (0..40).map(|i| TitleInput::new(texts[i].to_string(), feats[i].clone())).collect();

    c.bench_function("segment 20 pages", |b| b.iter(|| segment(black_box(raw), &seg_cfg)));
    c.bench_function("featurize 20 pages", |b| b.iter(|| featurize_document(black_box(&doc), &vocab).unwrap()));
    c.bench_function("detector 64 blocks", |b| {
        b.iter(|| detector.predict_proba(black_box(&texts[..64]), &refs[..64]).unwrap())
    });
    c.bench_function("hierarchizer 40 titles", |b| b.iter(|| hierarchizer.get_hierarchy(black_box(&titles)).unwrap()));

    let models = Models { detector, hierarchizer, template: None };
    let cfg = PipelineConfig::default();
    let mut group = c.benchmark_group("end to end");
    group.sample_size(10);
    group.bench_function("generate_toc 20 pages", |b| b.iter(|| generate_toc(black_box(raw), &models, &cfg).unwrap()));
    group.finish();
}

fn bench_post_processing(c: &mut Criterion) {
    let corpus = corpus();
    let toc = &corpus.docs[0].toc;
    let entries = toc.preorder();
    let titles: Vec<&str> = entries.iter().map(|(e, _)| e.title.as_str()).collect();
    let pages: Vec<u32> = entries.iter().map(|(e, _)| e.start_page).collect();
    let levels: Vec<u8> = (0..titles.len()).map(|i| (i % 6) as u8 + 1).collect();
    let page_count = corpus.docs[0].document.page_count();
    c.bench_function("build_toc", |b| b.iter(|| build_toc(black_box(&titles), &pages, &levels, page_count).unwrap()));

    let other = &corpus.docs[1].toc;
    c.bench_function("score_toc", |b| b.iter(|| score_toc(black_box(toc), other, &InexOptions::default())));

    let template = TemplateToc::from_tree(&corpus.template).unwrap();
    c.bench_function("match_title", |b| b.iter(|| match_title(black_box("2.3 Fees and Costs"), &template, 0.3)));

    let crf = tocgen::nn::CrfParams::new("crf", 5);
    let emissions = ndarray::Array2::from_shape_fn((400, 5), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0);
    c.bench_function("viterbi 400x5", |b| b.iter(|| crf_viterbi(black_box(&emissions), &crf)));
}

criterion_group!(benches, bench_pipeline, bench_post_processing);
criterion_main!(benches);
