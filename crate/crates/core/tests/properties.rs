use std::collections::BTreeSet;

use proptest::prelude::*;

use efx_core::cuts::build_bundle_table;
use efx_core::exec::Execution;
use efx_core::instance::{detect_regimes, generate, parse_instance, serialize_instance, Family, GenParams, MultigraphInstance};
use efx_core::pipeline::{solve, SolveOptions};
use efx_core::state::{envy_report, is_efx, unpb, AllocationState};
use efx_core::valuation::{make_seeded_additive, make_seeded_monotone, parse_valuation, serialize_valuation, ValuationProfile};
use efx_core::verify::{assignment_of, brute_force_efx, efx_witness, parse_allocation, parse_trace, serialize_allocation, DEFAULT_CAP};

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Bipartite), Just(Family::Bounded), Just(Family::Girth6)]
}

fn fixture(family: Family, n: usize, edges: usize, seed: u64, monotone: bool) -> (MultigraphInstance, ValuationProfile) {
    let mut params = GenParams::new(n, if family == Family::Bounded { 2 } else { 3 });
    params.max_edges = Some(edges);
    let inst = generate(family, &params, seed).unwrap();
    let profile = if monotone {
        make_seeded_monotone(&inst, seed, 6).unwrap()
    } else {
        make_seeded_additive(&inst, seed, 6).unwrap()
    };
    (inst, profile)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pipeline_output_is_in_the_oracle_set(f in family(), n in 2usize..=4, seed in 0u64..10_000, monotone: bool) {
        let (inst, profile) = fixture(f, n, 6, seed, monotone);
        let sol = solve(&profile, &inst, SolveOptions { regime: Some(f.regime()), ..SolveOptions::default() }).unwrap();
        let all = brute_force_efx(&profile, &inst, DEFAULT_CAP, Execution::Sequential).unwrap();
        let mine = assignment_of(&sol.allocation, inst.real_edge_count()).unwrap();
        prop_assert!(all.binary_search(&mine).is_ok());
    }

    #[test]
    fn both_efx_checks_agree(f in family(), seed in 0u64..10_000, owners in prop::collection::vec(0usize..6, 12)) {
        let (inst, profile) = fixture(f, 6, 12, seed, seed % 2 == 0);
        let mut alloc = vec![Vec::new(); inst.n()];
        for e in 0..inst.real_edge_count() {
            alloc[owners[e] % inst.n()].push(e);
        }
        prop_assert_eq!(is_efx(&profile, &alloc).is_efx(), efx_witness(&profile, &alloc).is_none());
    }

    #[test]
    fn unpb_is_non_parallel_and_best(f in family(), seed in 0u64..10_000, monotone: bool) {
        let (inst, profile) = fixture(f, 5, 10, seed, monotone);
        let table = build_bundle_table(&profile, &inst, f.regime(), &detect_regimes(&inst)).unwrap();
        let x = AllocationState::new(inst.n(), table.len());
        let envy = envy_report(&profile, &table, &x);
        for v in 0..inst.n() {
            let sel = unpb(&profile, &table, &x, &envy, v).unwrap();
            let pairs: BTreeSet<_> = sel.iter().map(|&b| table.bundle(b).pair).collect();
            prop_assert_eq!(pairs.len(), sel.len());
            let family = table.family(v);
            let value = |ids: &[usize]| {
                let edges: Vec<usize> = ids.iter().flat_map(|&b| table.edges(b).iter().copied()).collect();
                profile.val(v, &edges)
            };
            let mut best = 0;
            for mask in 0u32..1 << family.len() {
                let pick: Vec<usize> = (0..family.len()).filter(|k| mask >> k & 1 == 1).map(|k| family[k]).collect();
                let ps: BTreeSet<_> = pick.iter().map(|&b| table.bundle(b).pair).collect();
                if ps.len() == pick.len() {
                    best = best.max(value(&pick));
                }
            }
            prop_assert_eq!(value(&sel), best);
        }
    }

    #[test]
    fn formats_round_trip(f in family(), seed in 0u64..10_000, monotone: bool) {
        let (inst, profile) = fixture(f, 6, 12, seed, monotone);
        let text = serialize_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(serialize_instance(&back), text);
        let vtext = serialize_valuation(&profile);
        prop_assert_eq!(serialize_valuation(&parse_valuation(&vtext, &back).unwrap()), vtext);

        let sol = solve(&profile, &inst, SolveOptions { regime: Some(f.regime()), ..SolveOptions::default() }).unwrap();
        let atext = serialize_allocation(&sol.allocation);
        prop_assert_eq!(parse_allocation(&atext, &inst).unwrap(), sol.allocation.clone());

        let parsed = parse_trace(&sol.trace.serialize()).unwrap();
        prop_assert_eq!(parsed.stages.len(), sol.trace.stages.len());
        for (p, s) in parsed.stages.iter().zip(&sol.trace.stages) {
            let held: Vec<Vec<usize>> = s.holdings.iter().map(|h| h.iter().copied().collect()).collect();
            prop_assert_eq!(&p.holdings, &held);
            prop_assert_eq!(p.bundles.len(), s.table.len());
        }
        prop_assert_eq!(parsed.allocation, Some(sol.allocation));
    }
}
