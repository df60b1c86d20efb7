//! Directed attribute graphs mined from label co-occurrence.
//!
//! The internal graph links attributes by conditional co-occurrence
//! (`A[p][q] = Q[p][q] / totals[p]`), the external graph links each attribute
//! with the melanoma node by a ratio of occurrence totals, and the combined
//! graph blends both before pruning and proximity computation.

mod proximity;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::checklist::{NodeId, MEL, N_ATTRIBUTES, N_NODES};
use crate::dataset::AttrLabels;
use crate::{Error, Result};

pub use proximity::{
    proximity_matrix, stationary_distribution, transition_matrix, ProximityStack,
    STATIONARY_TELEPORT,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoOccurrence {
    /// `counts[p][q]`: cases where nodes `p` and `q` are both positive.
    pub counts: [[u64; N_NODES]; N_NODES],
    /// Cases where node `p` is positive.
    pub totals: [u64; N_NODES],
}

impl CoOccurrence {
    pub fn digest(&self) -> String {
        let mut bytes = Vec::with_capacity(8 * N_NODES * (N_NODES + 1));
        for row in &self.counts {
            for c in row {
                bytes.extend_from_slice(&c.to_le_bytes());
            }
        }
        for t in &self.totals {
            bytes.extend_from_slice(&t.to_le_bytes());
        }
        crate::util::sha256_hex(&bytes)
    }

    /// Checks the structural invariants: symmetric counts, diagonal equal to
    /// totals, and `counts[p][q] <= min(totals[p], totals[q])`.
    pub fn validate(&self) -> Result<()> {
        for p in 0..N_NODES {
            if self.counts[p][p] != self.totals[p] {
                return Err(Error::Config(format!("co-occurrence diagonal {p} differs from total")));
            }
            for q in 0..N_NODES {
                let c = self.counts[p][q];
                if c != self.counts[q][p] || c > self.totals[p].min(self.totals[q]) {
                    return Err(Error::Config(format!("inconsistent co-occurrence entry ({p}, {q})")));
                }
            }
        }
        Ok(())
    }
}

pub fn count_cooccurrence(labels: impl IntoIterator<Item = (AttrLabels, u8)>) -> Result<CoOccurrence> {
    let mut counts = [[0u64; N_NODES]; N_NODES];
    let mut totals = [0u64; N_NODES];
    let mut n = 0usize;
    for (attrs, mel) in labels {
        n += 1;
        let mut positive = [false; N_NODES];
        for (slot, &l) in positive.iter_mut().zip(&attrs) {
            *slot = l == 1;
        }
        positive[MEL] = mel == 1;
        for p in (0..N_NODES).filter(|&p| positive[p]) {
            totals[p] += 1;
            for q in (0..N_NODES).filter(|&q| positive[q]) {
                counts[p][q] += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData("no cases to count co-occurrence from".into()));
    }
    Ok(CoOccurrence { counts, totals })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Internal,
    External,
    Combined,
}

/// Eight-node digraph; `adjacency[[p, q]]` is the weight of edge `p -> q`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectedWeightedGraph {
    pub adjacency: Array2<f64>,
    pub kind: GraphKind,
    /// Number of entries clamped into `[0, 1]` while building this graph.
    pub clamped: usize,
}

impl DirectedWeightedGraph {
    pub fn weight(&self, from: NodeId, to: NodeId) -> f64 {
        self.adjacency[[from.index(), to.index()]]
    }

    pub fn out_degree(&self, node: NodeId) -> usize {
        self.adjacency.row(node.index()).iter().filter(|&&w| w > 0.0).count()
    }

    /// Attributes with neither incoming nor outgoing edges.
    pub fn isolated_attributes(&self) -> Vec<NodeId> {
        (0..N_ATTRIBUTES)
            .filter(|&p| {
                (0..N_NODES).all(|q| self.adjacency[[p, q]] == 0.0 && self.adjacency[[q, p]] == 0.0)
            })
            .filter_map(NodeId::new)
            .collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.adjacency.outer_iter().map(|r| r.to_vec()).collect()
    }
}

/// Attribute-to-attribute edges weighted by conditional co-occurrence.
pub fn build_internal_graph(q: &CoOccurrence) -> DirectedWeightedGraph {
    let mut a = Array2::zeros((N_NODES, N_NODES));
    for p in 0..N_ATTRIBUTES {
        for r in 0..N_ATTRIBUTES {
            if p != r && q.counts[p][r] >= 1 {
                a[[p, r]] = q.counts[p][r] as f64 / q.totals[p] as f64;
            }
        }
    }
    let g = DirectedWeightedGraph {
        adjacency: a,
        kind: GraphKind::Internal,
        clamped: 0,
    };
    let isolated = g.isolated_attributes();
    if !isolated.is_empty() {
        let names: Vec<_> = isolated.iter().map(|n| n.name()).collect();
        log::warn!("internal graph has isolated attributes: {}", names.join(", "));
    }
    g
}

/// Attribute/melanoma edges weighted by occurrence-total ratios, gated on
/// co-occurrence. Ratios above 1 are clamped and counted.
pub fn build_external_graph(q: &CoOccurrence) -> Result<DirectedWeightedGraph> {
    let mel_total = q.totals[MEL];
    if mel_total == 0 {
        return Err(Error::InsufficientData("no melanoma-positive cases".into()));
    }
    let mut a = Array2::zeros((N_NODES, N_NODES));
    let mut clamped = 0;
    let mut put = |a: &mut Array2<f64>, from: usize, to: usize, raw: f64| {
        if raw > 1.0 {
            clamped += 1;
        }
        a[[from, to]] = raw.min(1.0);
    };
    for p in 0..N_ATTRIBUTES {
        if q.counts[p][MEL] >= 1 {
            put(&mut a, MEL, p, q.totals[p] as f64 / mel_total as f64);
        }
        if q.counts[MEL][p] >= 1 {
            put(&mut a, p, MEL, mel_total as f64 / q.totals[p] as f64);
        }
    }
    if clamped > 0 {
        log::info!("external graph: clamped {clamped} weight(s) to 1");
    }
    Ok(DirectedWeightedGraph {
        adjacency: a,
        kind: GraphKind::External,
        clamped,
    })
}

/// `alpha * internal + beta * external`, clamped into `[0, 1]` with a zero diagonal.
pub fn combine_graphs(
    internal: &DirectedWeightedGraph,
    external: &DirectedWeightedGraph,
    alpha: f64,
    beta: f64,
) -> Result<DirectedWeightedGraph> {
    if !(alpha >= 0.0 && beta >= 0.0) || alpha + beta <= 0.0 || !(alpha + beta).is_finite() {
        return Err(Error::Config(format!(
            "graph blend needs alpha, beta >= 0 with a positive sum (got {alpha}, {beta})"
        )));
    }
    let mut a = &internal.adjacency * alpha + &external.adjacency * beta;
    let mut clamped = 0;
    for ((i, j), v) in a.indexed_iter_mut() {
        if i == j {
            *v = 0.0;
        } else if *v > 1.0 {
            *v = 1.0;
            clamped += 1;
        }
    }
    Ok(DirectedWeightedGraph {
        adjacency: a,
        kind: GraphKind::Combined,
        clamped,
    })
}

/// Keep each node's `max_out` heaviest outgoing edges (ties to the lower
/// target index). Every node must have at least `min_out` candidates.
pub fn prune_edges(g: &DirectedWeightedGraph, min_out: usize, max_out: usize) -> Result<DirectedWeightedGraph> {
    if min_out > max_out || max_out == 0 {
        return Err(Error::Config(format!("invalid prune bounds [{min_out}, {max_out}]")));
    }
    let n = g.adjacency.nrows();
    let mut out = Array2::zeros((n, n));
    for p in 0..n {
        let mut edges: Vec<(usize, f64)> = g
            .adjacency
            .row(p)
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, w)| w > 0.0)
            .collect();
        if edges.len() < min_out.max(1) {
            let name = NodeId::new(p).map_or_else(|| p.to_string(), |id| id.name().to_string());
            return Err(Error::IsolatedNode(name));
        }
        edges.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(q, w) in edges.iter().take(max_out) {
            out[[p, q]] = w;
        }
    }
    Ok(DirectedWeightedGraph {
        adjacency: out,
        kind: g.kind,
        clamped: g.clamped,
    })
}

/// Everything derived from the training labels that the model consumes.
#[derive(Clone, Debug)]
pub struct GraphArtifacts {
    pub cooccurrence: CoOccurrence,
    pub internal: DirectedWeightedGraph,
    pub external: DirectedWeightedGraph,
    /// Blended and pruned graph that feeds the proximity stack.
    pub combined: DirectedWeightedGraph,
    pub proximity: ProximityStack,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub alpha: f64,
    pub beta: f64,
    pub min_out: usize,
    pub max_out: usize,
    pub order: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            alpha: 0.5,
            beta: 0.5,
            min_out: 1,
            max_out: 3,
            order: 3,
        }
    }
}

impl GraphArtifacts {
    pub fn build(q: CoOccurrence, cfg: &GraphConfig) -> Result<Self> {
        q.validate()?;
        let internal = build_internal_graph(&q);
        let external = build_external_graph(&q)?;
        let blended = combine_graphs(&internal, &external, cfg.alpha, cfg.beta)?;
        let combined = prune_edges(&blended, cfg.min_out, cfg.max_out)?;
        let proximity = ProximityStack::build(&combined.adjacency, cfg.order)?;
        Ok(GraphArtifacts {
            cooccurrence: q,
            internal,
            external,
            combined,
            proximity,
        })
    }

    /// JSON dump: node names, the three graphs, `P^(0..K)`, and the stationary
    /// vector, reals rounded to 12 significant digits.
    pub fn to_json(&self) -> serde_json::Value {
        use crate::util::round_sig;
        let mat = |m: &Array2<f64>| -> Vec<Vec<f64>> {
            m.outer_iter()
                .map(|r| r.iter().map(|&v| round_sig(v, 12)).collect())
                .collect()
        };
        let proximity: serde_json::Map<String, serde_json::Value> = self
            .proximity
            .matrices
            .iter()
            .enumerate()
            .map(|(k, m)| (k.to_string(), serde_json::json!(mat(m))))
            .collect();
        serde_json::json!({
            "nodes": crate::checklist::NODE_NAMES,
            "internal": mat(&self.internal.adjacency),
            "external": mat(&self.external.adjacency),
            "combined": mat(&self.combined.adjacency),
            "proximity": proximity,
            "stationary": self.proximity.stationary.iter().map(|&v| round_sig(v, 12)).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checklist::Attribute;

    fn id(a: Attribute) -> NodeId {
        a.into()
    }

    #[test]
    fn single_saturated_case() {
        let q = count_cooccurrence([([1; 7], 1)]).unwrap();
        assert!(q.counts.iter().flatten().all(|&c| c == 1));
        assert!(q.totals.iter().all(|&t| t == 1));
        let g = build_internal_graph(&q);
        for p in 0..7 {
            for r in 0..7 {
                assert_eq!(g.adjacency[[p, r]], if p == r { 0.0 } else { 1.0 });
            }
            assert_eq!(g.adjacency[[p, MEL]], 0.0);
            assert_eq!(g.adjacency[[MEL, p]], 0.0);
        }
    }

    #[test]
    fn hand_count() {
        let mut apn = [0; 7];
        apn[0] = 1;
        let q = count_cooccurrence([(apn, 0), (apn, 1)]).unwrap();
        assert_eq!(q.totals[0], 2);
        assert_eq!(q.totals[MEL], 1);
        assert_eq!(q.counts[0][MEL], 1);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(
            count_cooccurrence(std::iter::empty()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn no_positives_leaves_everything_isolated() {
        let q = count_cooccurrence([([0; 7], 0), ([0; 7], 0)]).unwrap();
        assert!(q.counts.iter().flatten().all(|&c| c == 0));
        let g = build_internal_graph(&q);
        assert_eq!(g.isolated_attributes().len(), 7);
        assert!(matches!(build_external_graph(&q), Err(Error::InsufficientData(_))));
        assert!(matches!(prune_edges(&g, 1, 3), Err(Error::IsolatedNode(n)) if n == "APN"));
    }

    fn labels_with(pairs: &[(&[Attribute], u8, usize)]) -> Vec<(AttrLabels, u8)> {
        let mut out = Vec::new();
        for &(attrs, mel, n) in pairs {
            let mut l = [0u8; 7];
            for a in attrs {
                l[a.index()] = 1;
            }
            out.extend(std::iter::repeat_n((l, mel), n));
        }
        out
    }

    #[test]
    fn conditional_asymmetry() {
        use Attribute::*;
        // 651 joint, 1550 APN total, 2100 IR-PIG total.
        let data = labels_with(&[(&[Apn, IrPig], 1, 651), (&[Apn], 0, 899), (&[IrPig], 0, 1449)]);
        let q = count_cooccurrence(data).unwrap();
        let g = build_internal_graph(&q);
        assert!((g.weight(id(Apn), id(IrPig)) - 0.42).abs() < 1e-12);
        assert!((g.weight(id(IrPig), id(Apn)) - 0.31).abs() < 1e-12);
    }

    #[test]
    fn external_ratio_and_clamp() {
        use Attribute::*;
        // 100 melanomas, 60 of which show BWV; APN positive in 150 cases.
        let data = labels_with(&[
            (&[Bwv, Apn], 1, 60),
            (&[Apn], 1, 40),
            (&[Apn], 0, 50),
            (&[Rs], 1, 0),
        ]);
        let q = count_cooccurrence(data).unwrap();
        let g = build_external_graph(&q).unwrap();
        let mel = NodeId::MEL;
        assert_eq!(g.weight(mel, id(Bwv)), 0.6);
        assert_eq!(g.weight(id(Bwv), mel), 1.0);
        // 150 / 100 clamps; reverse is 100 / 150.
        assert_eq!(g.weight(mel, id(Apn)), 1.0);
        assert!((g.weight(id(Apn), mel) - 100.0 / 150.0).abs() < 1e-15);
        assert_eq!(g.clamped, 2);
        assert_eq!(g.weight(mel, id(Rs)), 0.0);
        for p in 0..7 {
            for r in 0..7 {
                assert_eq!(g.adjacency[[p, r]], 0.0);
            }
        }
    }

    #[test]
    fn equal_totals_give_unit_weights() {
        use Attribute::*;
        let q = count_cooccurrence(labels_with(&[(&[Rs], 1, 5)])).unwrap();
        let g = build_external_graph(&q).unwrap();
        assert_eq!(g.weight(NodeId::MEL, id(Rs)), 1.0);
        assert_eq!(g.weight(id(Rs), NodeId::MEL), 1.0);
        assert_eq!(g.clamped, 0);
    }

    fn graph(a: Array2<f64>, kind: GraphKind) -> DirectedWeightedGraph {
        DirectedWeightedGraph {
            adjacency: a,
            kind,
            clamped: 0,
        }
    }

    #[test]
    fn blends() {
        let mut ai = Array2::zeros((8, 8));
        ai[[0, 1]] = 0.8;
        ai[[2, 3]] = 0.4;
        let mut ae = Array2::zeros((8, 8));
        ae[[7, 0]] = 0.6;
        ae[[2, 3]] = 0.9;
        let gi = graph(ai.clone(), GraphKind::Internal);
        let ge = graph(ae.clone(), GraphKind::External);

        let id_blend = combine_graphs(&gi, &ge, 1.0, 0.0).unwrap();
        assert_eq!(id_blend.adjacency, ai);
        assert_eq!(id_blend.kind, GraphKind::Combined);

        let half = combine_graphs(&gi, &ge, 0.5, 0.5).unwrap();
        assert_eq!(half.adjacency[[0, 1]], 0.4);
        assert_eq!(half.adjacency[[7, 0]], 0.3);

        let mixed = combine_graphs(&gi, &ge, 0.25, 0.75).unwrap();
        assert!((mixed.adjacency[[2, 3]] - (0.25 * 0.4 + 0.75 * 0.9)).abs() < 1e-15);

        assert!(matches!(combine_graphs(&gi, &ge, 0.0, 0.0), Err(Error::Config(_))));
        assert!(matches!(combine_graphs(&gi, &ge, -1.0, 2.0), Err(Error::Config(_))));
    }

    #[test]
    fn blend_clamps() {
        let mut a = Array2::zeros((8, 8));
        a[[1, 2]] = 0.9;
        let g = graph(a, GraphKind::Internal);
        let c = combine_graphs(&g, &g, 1.0, 1.0).unwrap();
        assert_eq!(c.adjacency[[1, 2]], 1.0);
        assert_eq!(c.clamped, 1);
    }

    fn full_ring() -> Array2<f64> {
        let mut a = Array2::zeros((8, 8));
        for p in 0..8 {
            a[[p, (p + 1) % 8]] = 0.5;
        }
        a
    }

    #[test]
    fn prune_keeps_top_three() {
        let mut a = full_ring();
        for (q, w) in [(1, 0.9), (2, 0.8), (3, 0.7), (4, 0.2), (5, 0.1)] {
            a[[0, q]] = w;
        }
        let p = prune_edges(&graph(a, GraphKind::Combined), 1, 3).unwrap();
        let row: Vec<f64> = p.adjacency.row(0).to_vec();
        assert_eq!(row, [0.0, 0.9, 0.8, 0.7, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn prune_single_edge_untouched_and_ties() {
        let mut a = full_ring();
        a[[3, 5]] = 0.7;
        a[[3, 6]] = 0.3;
        a[[3, 7]] = 0.3;
        a[[3, 1]] = 0.3;
        // Row 3: 0.7 (->5), 0.5 (->4), then three-way tie at 0.3 -> lowest index 1.
        let p = prune_edges(&graph(a.clone(), GraphKind::Combined), 1, 3).unwrap();
        assert_eq!(p.adjacency.row(3).to_vec(), [0.0, 0.3, 0.0, 0.0, 0.5, 0.7, 0.0, 0.0]);
        assert_eq!(p.adjacency.row(0), a.row(0));
    }

    #[test]
    fn prune_is_idempotent() {
        let mut a = Array2::from_shape_fn((8, 8), |(i, j)| ((i * 7 + j * 3) % 5) as f64 / 5.0);
        for i in 0..8 {
            a[[i, i]] = 0.0;
        }
        let g = graph(a, GraphKind::Combined);
        let once = prune_edges(&g, 1, 3).unwrap();
        let twice = prune_edges(&once, 1, 3).unwrap();
        assert_eq!(once.adjacency, twice.adjacency);
        assert!(NodeId::all().all(|n| (1..=3).contains(&once.out_degree(n))));
    }

    #[test]
    fn digest_tracks_counts() {
        let a = count_cooccurrence([([1, 0, 0, 0, 0, 0, 0], 1)]).unwrap();
        let b = count_cooccurrence([([0, 1, 0, 0, 0, 0, 0], 1)]).unwrap();
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), a.clone().digest());
    }
}
