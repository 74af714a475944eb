use proptest::prelude::*;
use tocgen::doc::{TocEntry, TocTree};
use tocgen::template::{levenshtein, match_title, template_only_hierarchize, TemplateToc};

fn entry(title: &str, level: u8, children: Vec<TocEntry>) -> TocEntry {
    TocEntry { title: title.into(), start_page: 1, end_page: 1, level, children }
}

fn template() -> TemplateToc {
    TemplateToc::from_tree(&TocTree::new(vec![
        entry(
            "Investment Policy",
            1,
            vec![
                entry("Eligible Assets", 2, vec![entry("Derivative Instruments", 3, vec![])]),
                entry("Fees & Costs", 2, vec![]),
            ],
        ),
        entry("Risk Profile", 1, vec![entry("Liquidity Risk", 2, vec![])]),
    ]))
    .unwrap()
}

#[test]
fn verbatim_titles_recover_levels() {
    let titles = ["Investment Policy", "Eligible Assets", "Derivative Instruments", "Fees & Costs", "Risk Profile", "Liquidity Risk"];
    let levels = template_only_hierarchize(&titles, &template(), 0.3);
    assert_eq!(levels, [Some(1), Some(2), Some(3), Some(2), Some(1), Some(2)]);
}

#[test]
fn spelled_out_ampersand_matches() {
    let m = match_title("Fees and costs", &template(), 0.3);
    assert_eq!(m.level, Some(2));
    assert_eq!(m.distance, strsim::levenshtein("fees and costs", "fees costs"));
}

#[test]
fn unrelated_title_does_not_match() {
    assert_eq!(match_title("Glossary of Terms", &template(), 0.3).level, None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn levenshtein_matches_reference(a in "\\PC{0,16}", b in "\\PC{0,16}") {
        prop_assert_eq!(levenshtein(&a, &b), strsim::levenshtein(&a, &b));
    }

    #[test]
    fn levenshtein_is_a_metric(a in "[abc]{0,8}", b in "[abc]{0,8}", c in "[abc]{0,8}") {
        prop_assert_eq!(levenshtein(&a, &a), 0);
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert_eq!(levenshtein(&a, &b) == 0, a == b);
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
    }

    #[test]
    fn case_and_punctuation_do_not_matter(
        idx in 0usize..6,
        upper in prop::collection::vec(any::<bool>(), 32),
        punct in "[.,:;!?]{0,3}",
    ) {
        let tpl = template();
        let title = &tpl.entries[idx].title;
        let noisy: String = title
            .chars()
            .zip(upper.iter().cycle())
            .map(|(c, &u)| if u { c.to_ascii_uppercase() } else { c.to_ascii_lowercase() })
            .collect::<String>() + &punct;
        let m = match_title(&noisy, &tpl, 0.3);
        prop_assert_eq!(m.level, Some(tpl.entries[idx].level));
        prop_assert_eq!(m.distance, 0);
    }

    #[test]
    fn larger_threshold_never_loses_a_match(title in "[A-Za-z ]{1,24}", lo in 0.0f64..1.0, extra in 0.0f64..1.0) {
        let tpl = template();
        let tight = match_title(&title, &tpl, lo);
        let loose = match_title(&title, &tpl, lo + extra);
        prop_assert_eq!(tight.distance, loose.distance);
        if tight.level.is_some() {
            prop_assert_eq!(loose.level, tight.level);
        }
    }
}
