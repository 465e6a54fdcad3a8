//! Netlists shipped with the crate.

pub const CIRCUIT1: &str = include_str!("../circuits/circuit1.twn");
pub const CIRCUIT2: &str = include_str!("../circuits/circuit2.twn");
pub const ELECTRICAL: &str = include_str!("../circuits/electrical.twn");
pub const CIS: &str = include_str!("../circuits/cis.twn");

/// Look up a bundled netlist by its file stem.
pub fn by_name(name: &str) -> Option<&'static str> {
    match name {
        "circuit1" => Some(CIRCUIT1),
        "circuit2" => Some(CIRCUIT2),
        "electrical" => Some(ELECTRICAL),
        "cis" => Some(CIS),
        _ => None,
    }
}
