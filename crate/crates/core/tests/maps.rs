use proptest::prelude::*;

use sclqg_core::maps::{
    enumerate_decorated_maps, gasket_decompose, reassemble, EnumerationCaps, RingMode,
    StructuralSampler, WeightTable,
};
use sclqg_core::rng::Streams;

#[test]
fn every_small_map_round_trips_through_its_gasket() {
    for k in 1..=4 {
        let f = if k <= 2 { 10 } else { 9 };
        let e = enumerate_decorated_maps(k, f, 1.0, &EnumerationCaps::default()).unwrap();
        assert_eq!(e.duplicates, 0);
        for m in &e.maps {
            m.map.validate().unwrap();
            let d = gasket_decompose(&m.map).unwrap();
            let back = reassemble(&d.gasket, &d.fillings).unwrap();
            assert_eq!(back.canonical_code(), m.code, "k = {k}");
            assert_eq!(back.loop_count(), m.loops);
            assert_eq!(back.triangle_count(), m.triangles);
        }
        for lw in [1, 2] {
            let table = WeightTable::new(lw, k + f).unwrap();
            assert_eq!(
                e.weighted_counts(lw),
                table.counts(k, f).unwrap(),
                "k = {k}, weight {lw}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sampled_maps_are_valid_and_enumerated(seed in any::<u64>(), k in 1usize..=3) {
        let f = 6;
        let e = enumerate_decorated_maps(k, f, 1.5, &EnumerationCaps::default()).unwrap();
        let s = StructuralSampler::new(k, f, 1.5, RingMode::Original).unwrap();
        let mut rng = Streams::new(seed).stream("maps");
        for _ in 0..20 {
            let m = s.sample(&mut rng).unwrap().map;
            prop_assert!(m.validate().is_ok());
            prop_assert_eq!(m.perimeter(), k);
            prop_assert!(m.triangle_count() <= f);
            prop_assert!(e.index_of(&m.canonical_code()).is_some());
        }
    }
}
