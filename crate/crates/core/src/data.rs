//! Bundled MATPOWER cases and PMU placements.

pub const CASE5: &str = include_str!("../data/case5.m");
pub const CASE14: &str = include_str!("../data/case14.m");
pub const CASE30: &str = include_str!("../data/case30.m");
pub const CASE57: &str = include_str!("../data/case57.m");
pub const CASE118: &str = include_str!("../data/case118.m");

pub const PLACEMENT5: &str = include_str!("../data/p5.txt");
pub const PLACEMENT14: &str = include_str!("../data/p14.txt");
pub const PLACEMENT30: &str = include_str!("../data/p30.txt");
pub const PLACEMENT57: &str = include_str!("../data/p57.txt");
pub const PLACEMENT118: &str = include_str!("../data/p118.txt");

pub const CASE_NAMES: [&str; 5] = ["case5", "case14", "case30", "case57", "case118"];

/// Case text and placement text for a bundled system name such as `case14`.
pub fn bundled(name: &str) -> Option<(&'static str, &'static str)> {
    match name {
        "case5" => Some((CASE5, PLACEMENT5)),
        "case14" => Some((CASE14, PLACEMENT14)),
        "case30" => Some((CASE30, PLACEMENT30)),
        "case57" => Some((CASE57, PLACEMENT57)),
        "case118" => Some((CASE118, PLACEMENT118)),
        _ => None,
    }
}
