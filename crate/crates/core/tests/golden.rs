//! Assembled projects must match the checked-in golden trees byte for byte.
//! Run with `BLESS=1` to regenerate them after an intended change.

mod common;

#[test]
fn assembled_projects_match_goldens() {
    let bless = std::env::var_os("BLESS").is_some();
    let n = common::check_goldens(bless).unwrap();
    assert_eq!(n, 27);
}
