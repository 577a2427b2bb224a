mod common;

#[test]
fn every_operator_matches_its_goldens() {
    let checked = common::noise_golden::run().unwrap_or_else(|e| panic!("{e}"));
    assert!(checked > 300);
}
