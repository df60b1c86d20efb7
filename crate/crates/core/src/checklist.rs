//! Canonical attribute order and node indexing.
//!
//! Every 7-vector in the crate is ordered
//! `[APN, IR-STR, IR-PIG, RS, IR-DaG, BWV, IR-VS]`; graph node 7 is melanoma.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const N_ATTRIBUTES: usize = 7;
pub const N_NODES: usize = 8;
/// Graph index of the melanoma node.
pub const MEL: usize = 7;

/// Points per attribute under the traditional rule: majors 2, minors 1.
pub const TRADITIONAL_WEIGHTS: [f64; N_ATTRIBUTES] = [2.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0];

/// Traditional referral cut on the integer score.
pub const REFERRAL_SCORE: u32 = 3;

pub const NODE_NAMES: [&str; N_NODES] = [
    "APN", "IR-STR", "IR-PIG", "RS", "IR-DaG", "BWV", "IR-VS", "MEL",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attribute {
    /// Atypical pigment network (major).
    Apn,
    /// Irregular streaks.
    IrStr,
    /// Irregular pigmentation.
    IrPig,
    /// Regression structures.
    Rs,
    /// Irregular dots and globules.
    IrDag,
    /// Blue-whitish veil (major).
    Bwv,
    /// Irregular vascular structures (major).
    IrVs,
}

impl Attribute {
    pub const ALL: [Attribute; N_ATTRIBUTES] = [
        Attribute::Apn,
        Attribute::IrStr,
        Attribute::IrPig,
        Attribute::Rs,
        Attribute::IrDag,
        Attribute::Bwv,
        Attribute::IrVs,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn abbrev(self) -> &'static str {
        NODE_NAMES[self.index()]
    }

    /// Column name in the metadata CSV.
    pub fn column(self) -> &'static str {
        match self {
            Attribute::Apn => "pigment_network",
            Attribute::IrStr => "streaks",
            Attribute::IrPig => "pigmentation",
            Attribute::Rs => "regression",
            Attribute::IrDag => "dots_globules",
            Attribute::Bwv => "bwv",
            Attribute::IrVs => "vascular",
        }
    }

    pub fn is_major(self) -> bool {
        matches!(self, Attribute::Apn | Attribute::Bwv | Attribute::IrVs)
    }

    pub fn points(self) -> u32 {
        if self.is_major() {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

/// Index of a graph node: `0..7` are attributes, `7` is melanoma.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u8);

impl NodeId {
    pub const MEL: NodeId = NodeId(MEL as u8);

    pub fn new(index: usize) -> Option<Self> {
        (index < N_NODES).then_some(NodeId(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        NODE_NAMES[self.index()]
    }

    pub fn attribute(self) -> Option<Attribute> {
        Attribute::ALL.get(self.index()).copied()
    }

    pub fn all() -> impl Iterator<Item = NodeId> {
        (0..N_NODES).map(|i| NodeId(i as u8))
    }
}

impl From<Attribute> for NodeId {
    fn from(a: Attribute) -> Self {
        NodeId(a.index() as u8)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majors_match_traditional_weights() {
        for a in Attribute::ALL {
            assert_eq!(a.points() as f64, TRADITIONAL_WEIGHTS[a.index()]);
        }
        let majors: Vec<_> = Attribute::ALL.iter().filter(|a| a.is_major()).collect();
        assert_eq!(majors, [&Attribute::Apn, &Attribute::Bwv, &Attribute::IrVs]);
    }

    #[test]
    fn node_ids() {
        assert_eq!(NodeId::new(8), None);
        assert_eq!(NodeId::MEL.attribute(), None);
        assert_eq!(NodeId::from(Attribute::Bwv).name(), "BWV");
        assert_eq!(NodeId::all().count(), N_NODES);
    }
}
