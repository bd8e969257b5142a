//! Built-in group catalogue, embedded from the `groups/` directory at the
//! repository root so the CLI works without any files on disk.

use crate::lie::{CarnotSpec, SpecError};

pub const HEISENBERG1: &str = include_str!("../../../groups/heisenberg1.json");
pub const HEISENBERG2: &str = include_str!("../../../groups/heisenberg2.json");
pub const ENGEL: &str = include_str!("../../../groups/engel.json");
pub const ABELIAN3: &str = include_str!("../../../groups/abelian3.json");
pub const STEP2_NONFAT: &str = include_str!("../../../groups/step2-nonfat.json");

pub const NAMES: &[&str] = &[
    "heisenberg1",
    "heisenberg2",
    "engel",
    "abelian3",
    "step2-nonfat",
];

/// Look up a built-in group by name.
pub fn by_name(name: &str) -> Option<Result<CarnotSpec, SpecError>> {
    let text = match name {
        "heisenberg1" => HEISENBERG1,
        "heisenberg2" => HEISENBERG2,
        "engel" => ENGEL,
        "abelian3" => ABELIAN3,
        "step2-nonfat" => STEP2_NONFAT,
        _ => return None,
    };
    Some(CarnotSpec::from_json_str(text))
}

/// First Heisenberg group; the embedded specs are tested, so unwrap is safe.
pub fn heisenberg1() -> CarnotSpec {
    CarnotSpec::from_json_str(HEISENBERG1).unwrap()
}

pub fn heisenberg2() -> CarnotSpec {
    CarnotSpec::from_json_str(HEISENBERG2).unwrap()
}

pub fn engel() -> CarnotSpec {
    CarnotSpec::from_json_str(ENGEL).unwrap()
}

pub fn abelian3() -> CarnotSpec {
    CarnotSpec::from_json_str(ABELIAN3).unwrap()
}

pub fn step2_nonfat() -> CarnotSpec {
    CarnotSpec::from_json_str(STEP2_NONFAT).unwrap()
}

/// Step-4 filiform group on 5 coordinates: [e1,e2]=e3, [e1,e3]=e4,
/// [e1,e4]=e5. Used by tests that need a deeper BCH truncation.
pub fn filiform4() -> CarnotSpec {
    CarnotSpec::from_parts(
        "filiform4",
        4,
        &[2, 1, 1, 1],
        &[
            ((0, 1, 2), 1.0),
            ((0, 2, 3), 1.0),
            ((0, 3, 4), 1.0),
        ],
        None,
    )
    .unwrap()
}
