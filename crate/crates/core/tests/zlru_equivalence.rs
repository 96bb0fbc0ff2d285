mod common;

#[test]
fn zlru_without_vop_or_reordering_is_lru() {
    common::zlru_matches_lru(1000, 500).unwrap();
}
