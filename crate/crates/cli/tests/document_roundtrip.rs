use std::collections::BTreeMap;

use fbs::design::Constraint;
use fbs::{CostMatrix, FbsModel, PerfTable};
use fbs_cli::SystemDocument;
use proptest::collection::vec;
use proptest::prelude::*;

fn document() -> impl Strategy<Value = SystemDocument> {
    (1usize..=3, 1usize..=4)
        .prop_flat_map(|(n, m)| (Just(m), vec(vec(0u32..(1 << m), 1..=3), n)))
        .prop_flat_map(|(m, masks)| {
            let actions: Vec<Vec<Vec<usize>>> = masks
                .into_iter()
                .map(|set| {
                    set.into_iter()
                        .map(|mask| (0..m).filter(|f| mask >> f & 1 == 1).collect())
                        .collect()
                })
                .collect();
            let model = FbsModel::new(m, actions).unwrap();
            let (ell, n) = (model.profile_count(), model.players());
            (
                Just(model),
                proptest::option::of(vec(-1e6f64..1e6, ell)),
                proptest::option::of(vec(-50.0f64..50.0, m * n)),
                vec((vec(-3.0f64..3.0, m), -5.0f64..5.0), 0..3),
                proptest::collection::btree_map(0..m, vec(-9.0f64..9.0, n), 0..=m),
            )
        })
        .prop_map(|(model, perf, xi, constraints, fixed)| {
            let (m, n) = (model.facilities(), model.players());
            SystemDocument {
                perf: perf.map(|v| PerfTable::new(v).unwrap()),
                xi: xi.map(|v| CostMatrix::from_flat(m, n, v).unwrap()),
                constraints: constraints
                    .into_iter()
                    .map(|(c, t)| Constraint::new(c, t).unwrap())
                    .collect(),
                fixed: fixed.into_iter().collect::<BTreeMap<_, _>>(),
                model,
            }
        })
}

proptest! {
    #[test]
    fn text_form_round_trips(doc in document()) {
        let text = doc.to_text();
        let back = SystemDocument::parse(&text).unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(back.to_text(), text);
    }
}
