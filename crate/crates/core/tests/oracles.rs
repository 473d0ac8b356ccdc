mod common;

use bbpeel::bbcode::named_code;
use bbpeel::harness::memory_dem;

#[test]
fn collision_classification_matches_naive_peeling() {
    let checked = common::collision_oracle(300, 11).unwrap();
    assert!(checked > 1000, "only {checked} pairs checked");
}

#[test]
fn decode_matches_exhaustive_map_when_dominant() {
    let stats = common::map_oracle(40, 200, 5).unwrap();
    assert!(stats.settled > 1000, "{stats:?}");
    assert_eq!(stats.settled, stats.settled_agree);
}

#[test]
fn sampled_shots_are_xor_consistent() {
    let code = named_code("gross-72").unwrap();
    let dem = memory_dem(&code, 6, 0.004).unwrap();
    common::sampler_xor_consistent(&dem, 2000, 3).unwrap();
}

#[test]
fn dem_text_round_trip_is_identity() {
    for (name, rounds) in [("bb-18", 3), ("bb-32", 2), ("gross-144", 12)] {
        let dem = memory_dem(&named_code(name).unwrap(), rounds, 0.001).unwrap();
        common::roundtrip_identical(&dem).unwrap();
    }
}

#[test]
fn min_weight_table_agrees_with_direct_combination() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let dem = common::random_dem(&mut rng, 10, 8, 0.01);
    let table = common::min_weight_table(&dem);
    for i in 0..dem.len() {
        let (syn, obs) = dem.combine(&[i]);
        let key = syn.iter().fold(0u64, |m, &d| m | 1 << d);
        assert!(table[&key].by_mask[obs as usize] <= 1);
    }
    assert_eq!((table[&0].min, table[&0].by_mask[0]), (0, 0));
}
