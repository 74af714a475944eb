use proptest::prelude::*;
use tocgen::doc::{parse_layout_json, parse_layout_xml, parse_toc, serialize_toc, write_layout_xml};
use tocgen::doc::{Document, PageInfo, Rgb, TextLine};
use tocgen::tree::build_toc;

fn text_line(pages: u32) -> impl Strategy<Value = TextLine> {
    (
        (1..=pages, 0.0f64..1200.0, 0.0f64..800.0, 0.0f64..500.0, 1.0f64..40.0),
        (4.0f64..30.0, any::<bool>(), any::<bool>(), any::<[u8; 3]>()),
        ("[A-Za-z0-9][A-Za-z0-9 &<>\"'.,:;()-]{0,30}", "[A-Za-z]{1,8}( [A-Z][a-z]{0,5})?"),
    )
        .prop_map(|((page, top, left, width, height), (font_size, bold, italic, color), (text, font_family))| TextLine {
            text,
            page,
            left,
            top,
            width,
            height,
            font_size,
            bold,
            italic,
            color: Rgb(color),
            font_family,
        })
}

fn document() -> impl Strategy<Value = Document> {
    (1u32..=4, 200.0f64..1200.0, 200.0f64..1600.0).prop_flat_map(|(n, width, height)| {
        (
            "[a-z0-9_-]{1,12}",
            prop::collection::vec(text_line(n), 0..40),
        )
            .prop_map(move |(id, lines)| {
                let pages = (1..=n).map(|number| PageInfo { number, width, height }).collect();
                Document::new(id, pages, lines)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn layout_xml_round_trips(doc in document()) {
        let xml = write_layout_xml(&doc);
        let back = parse_layout_xml(&xml, "unused").unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(write_layout_xml(&back), xml);
    }

    #[test]
    fn layout_json_round_trips(doc in document()) {
        let json = serde_json::to_string(&doc).unwrap();
        let back = parse_layout_json(&json, "unused").unwrap();
        prop_assert_eq!(back, doc);
    }

    #[test]
    fn toc_json_round_trips(
        spec in prop::collection::vec(("\\PC{1,24}", 1u8..=6, 0u32..4), 0..40),
        tail in 0u32..5,
    ) {
        let titles: Vec<&str> = spec.iter().map(|s| s.0.as_str()).collect();
        let levels: Vec<u8> = spec.iter().map(|s| s.1).collect();
        let mut page = 1;
        let pages: Vec<u32> = spec.iter().map(|s| { page += s.2; page }).collect();
        let toc = build_toc(&titles, &pages, &levels, page + tail).unwrap();
        let bytes = serialize_toc(&toc).unwrap();
        let back = parse_toc(&bytes).unwrap();
        prop_assert_eq!(&back, &toc);
        prop_assert_eq!(serialize_toc(&back).unwrap(), bytes);
    }
}
