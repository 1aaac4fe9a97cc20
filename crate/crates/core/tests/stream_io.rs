use proptest::prelude::*;

use streamtgn_core::graph::TemporalEdge;
use streamtgn_core::io::{epoch_counts, format_edges, generate_stream, parse_edges, Attachment, GenConfig};
use streamtgn_core::Error;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generate_parse_format_is_identity(
        seed in any::<u64>(),
        n in 2usize..200,
        m in 1usize..400,
        d_e in 0usize..5,
        preferential in any::<bool>(),
        burstiness in 1.0f64..5.0,
    ) {
        let cfg = GenConfig {
            seed,
            n,
            m,
            d_e,
            attachment: if preferential { Attachment::Preferential } else { Attachment::Uniform },
            burstiness,
            ..GenConfig::default()
        };
        let edges = generate_stream(&cfg).unwrap();
        prop_assert_eq!(edges.len(), m);
        prop_assert!(edges.windows(2).all(|w| w[0].t <= w[1].t));
        prop_assert!(edges.iter().all(|e| e.src < n && e.dst < n && e.src != e.dst));
        let text = format_edges(&edges, d_e);
        let (d, parsed) = parse_edges(&text, false).unwrap();
        prop_assert_eq!(d, d_e);
        prop_assert_eq!(&parsed, &edges);
        prop_assert_eq!(format_edges(&parsed, d), text);
    }

    #[test]
    fn sort_rescue_orders_any_permutation(times in prop::collection::vec(0.0f64..1e6, 1..60)) {
        let edges: Vec<TemporalEdge> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| TemporalEdge::new(i, i + 1, t, vec![]))
            .collect();
        let text = format_edges(&edges, 0);
        let (_, sorted) = parse_edges(&text, true).unwrap();
        prop_assert!(sorted.windows(2).all(|w| w[0].t <= w[1].t));
        let mut want = edges.clone();
        want.sort_by(|a, b| a.t.total_cmp(&b.t));
        prop_assert_eq!(sorted, want);
    }
}

#[test]
fn bursty_epochs_hold_the_rate_ratio() {
    for m in [1000, 1001, 4999] {
        let cfg = GenConfig {
            seed: 1,
            m,
            burstiness: 3.0,
            ..GenConfig::default()
        };
        let counts = epoch_counts(&generate_stream(&cfg).unwrap(), cfg.epoch_length, cfg.epochs);
        let low = m as f64 / 20.0;
        for (i, c) in counts.iter().enumerate() {
            let want = if i % 2 == 1 { 3.0 * low } else { low };
            assert!((*c as f64 - want).abs() <= 1.0, "m={m} epoch {i}: {c} vs {want}");
        }
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let cases = [
        ("", 1),
        ("# streamtgn-edges v2 d_e=1\n", 1),
        ("# streamtgn-edges v1 d_e=1\n0,1,1.0,0.5\n0,1,2.0\n", 3),
        ("# streamtgn-edges v1 d_e=0\n0,1,1.0\nx,1,2.0\n", 3),
        ("# streamtgn-edges v1 d_e=0\n0,1,5\n0,1,4\n", 3),
        ("# streamtgn-edges v1 d_e=0\n0,1,-1\n", 2),
        ("# streamtgn-edges v1 d_e=1\n0,1,1,NaN\n", 2),
    ];
    for (text, line) in cases {
        match parse_edges(text, false) {
            Err(Error::Parse { line: got, .. }) => assert_eq!(got, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
}
