mod common {
    pub mod graphgen;
}

use common::graphgen::Gen;
use hbg_core::{parse_model, serialize_model, validate_graph};
use proptest::prelude::*;

fn graph_from(words: &[u32]) -> hbg_core::BondGraph {
    let mut i = 0;
    let mut next = || {
        let w = words[i % words.len()].wrapping_add((i / words.len()) as u32);
        i += 1;
        w
    };
    Gen::new(&mut next).graph()
}

fn check_spans(src: &str) {
    if let Err(errors) = parse_model(src) {
        assert!(!errors.is_empty());
        let lines: Vec<&str> = src.split('\n').collect();
        for e in errors {
            let s = e.span;
            assert!(s.offset <= src.len(), "{e:?}");
            assert!(s.line >= 1 && s.line <= lines.len(), "{e:?}");
            assert!(
                s.column >= 1 && s.column <= lines[s.line - 1].chars().count() + 1,
                "{e:?}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_graphs_round_trip(words in prop::collection::vec(any::<u32>(), 64..256)) {
        let g = graph_from(&words);
        prop_assert_eq!(validate_graph(&g), vec![]);
        let text = serialize_model(&g);
        let back = parse_model(&text).map_err(|e| TestCaseError::fail(format!("{e:?}\n{text}")))?;
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(serialize_model(&back), text);
    }

    #[test]
    fn parser_is_total_on_arbitrary_text(src in "\\PC{0,200}") {
        check_spans(&src);
    }

    #[test]
    fn parser_is_total_on_damaged_models(words in prop::collection::vec(any::<u32>(), 64), cut in any::<prop::sample::Index>(), junk in "[a-z{}();=<>#0-9. \n-]{0,12}") {
        let text = serialize_model(&graph_from(&words));
        let mut at = cut.index(text.len() + 1);
        while !text.is_char_boundary(at) {
            at -= 1;
        }
        let damaged = format!("{}{}{}", &text[..at], junk, &text[at..]);
        check_spans(&damaged);
        check_spans(&text[..at]);
    }
}
