use proptest::prelude::*;
use tocgen::features::{FeatureLayout, FeatureVector, TitleVocab};
use tocgen::hierarchizer::{train_hierarchizer, HierConfig, HierarchizerModel, LabeledSequence, TitleInput, WordVocab};
use tocgen::metrics::weighted_f1;
use tocgen::train::TrainConfig;

const WORDS: [&str; 8] = ["fees", "risk", "policy", "assets", "governance", "taxation", "liquidity", "annex"];

fn title(level: u8, k: usize) -> TitleInput {
    let width = FeatureLayout::standard().len;
    let mut v = vec![0.0; width];
    // A style cue per level, as font size would give.
    v[level as usize] = 1.0;
    TitleInput::new(format!("{} {}", WORDS[k % WORDS.len()], WORDS[(k * 3 + level as usize) % WORDS.len()]), FeatureVector { values: v })
}

fn docs() -> Vec<LabeledSequence> {
    let shapes: [&[u8]; 5] = [
        &[1, 2, 3, 3, 2, 1, 2],
        &[1, 2, 2, 3, 4, 1],
        &[1, 1, 2, 3, 4, 5, 2],
        &[1, 2, 3, 1, 2, 3, 4],
        &[1, 2, 1, 2, 3, 3],
    ];
    shapes
        .iter()
        .enumerate()
        .map(|(d, levels)| LabeledSequence {
            doc_id: format!("d{d}"),
            titles: levels.iter().enumerate().map(|(k, &l)| title(l, d + k)).collect(),
            levels: levels.to_vec(),
        })
        .collect()
}

fn vocabs(docs: &[LabeledSequence]) -> TitleVocab {
    let titles: Vec<&str> = docs.iter().flat_map(|d| d.titles.iter().map(|t| t.text.as_str())).collect();
    TitleVocab::build(&titles).unwrap()
}

#[test]
fn overfits_five_documents() {
    let data = docs();
    let train = TrainConfig { batch_size: 5, epochs: 150, validation_fraction: 0.0, ..TrainConfig::default() };
    let (model, report) = train_hierarchizer(&data, vocabs(&data), &HierConfig::default(), &train, 3).unwrap();
    assert!(report.train_loss.last().unwrap() < &report.train_loss[0]);
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for d in &data {
        gold.extend(&d.levels);
        pred.extend(model.get_hierarchy(&d.titles).unwrap());
    }
    assert_eq!(weighted_f1(&gold, &pred).unwrap().weighted_f1, 1.0);
}

#[test]
fn training_is_deterministic_and_order_free() {
    let data = docs();
    let train = TrainConfig { batch_size: 2, epochs: 3, validation_fraction: 0.4, ..TrainConfig::default() };
    let cfg = HierConfig::default();
    let (_, a) = train_hierarchizer(&data, vocabs(&data), &cfg, &train, 9).unwrap();
    let mut reversed = data.clone();
    reversed.reverse();
    let (_, b) = train_hierarchizer(&reversed, vocabs(&data), &cfg, &train, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn save_load_round_trip() {
    let data = docs();
    let train = TrainConfig { epochs: 1, validation_fraction: 0.0, ..TrainConfig::default() };
    let (model, _) = train_hierarchizer(&data, vocabs(&data), &HierConfig::default(), &train, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hier.tocw");
    model.save(&path).unwrap();
    let back = HierarchizerModel::load(&path).unwrap();
    back.save(&dir.path().join("again.tocw")).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(dir.path().join("again.tocw")).unwrap());
    for d in &data {
        assert_eq!(model.get_hierarchy(&d.titles).unwrap(), back.get_hierarchy(&d.titles).unwrap());
    }
}

#[test]
fn empty_title_list_gives_empty_hierarchy() {
    let data = docs();
    let cfg = HierConfig { d_w: 16, fc_dim: 16, lstm_units: 8, ..HierConfig::default() };
    let model = HierarchizerModel::new(cfg, WordVocab::build(&["fees fees"], 2), vocabs(&data), 0).unwrap();
    assert!(model.get_hierarchy(&[]).unwrap().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forbidden_transition_never_decoded(levels in prop::collection::vec(1u8..=5, 1..12), seed in 0u64..1000) {
        let data = docs();
        let cfg = HierConfig { d_w: 16, fc_dim: 16, lstm_units: 8, ..HierConfig::default() };
        let mut model = HierarchizerModel::new(cfg, WordVocab::build(&["fees fees"], 2), vocabs(&data), seed).unwrap();
        // Level 1 may never be followed by level 3.
        model.crf_mut().transitions.value[[0, 2]] = -1e9;
        let titles: Vec<TitleInput> = levels.iter().enumerate().map(|(k, &l)| title(l, k)).collect();
        let out = model.get_hierarchy(&titles).unwrap();
        prop_assert_eq!(out.len(), titles.len());
        prop_assert!(out.windows(2).all(|w| !(w[0] == 1 && w[1] == 3)));
    }
}
