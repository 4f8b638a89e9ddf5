//! Named workloads with the sequence lengths of the Long Range Arena tasks and
//! related long-sequence benchmarks.

use epochsim_core::SsmVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub seq_len: usize,
    pub variant: SsmVariant,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "listops", seq_len: 2048, variant: SsmVariant::Liquid },
    Preset { name: "text", seq_len: 2048, variant: SsmVariant::S4 },
    Preset { name: "retrieval", seq_len: 4000, variant: SsmVariant::S4 },
    Preset { name: "image", seq_len: 1024, variant: SsmVariant::S4 },
    Preset { name: "pathfinder", seq_len: 1024, variant: SsmVariant::Liquid },
    Preset { name: "pathfinder-x", seq_len: 16384, variant: SsmVariant::Liquid },
    Preset { name: "imdb", seq_len: 2048, variant: SsmVariant::Liquid },
    Preset { name: "aan", seq_len: 4000, variant: SsmVariant::Liquid },
    Preset { name: "scifar", seq_len: 3072, variant: SsmVariant::Liquid },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name.eq_ignore_ascii_case(name))
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}
