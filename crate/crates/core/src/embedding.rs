//! Node features from GloVe-format word vectors.
//!
//! Each graph node has a short token list; its feature row is the mean of the
//! token vectors mapped into [`NODE_FEATURE_DIM`] dimensions.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checklist::{NODE_NAMES, N_NODES};
use crate::{Error, Result};

pub const NODE_FEATURE_DIM: usize = 128;

/// Seed of the fixed source-to-128 projection.
pub const PROJECTION_SEED: u64 = 0x70C1;

pub type NodeFeatureMatrix = Array2<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Builds a table from `(word, vector)` pairs; later duplicates win.
    pub fn from_entries(entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (word, v) in entries {
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::Dimension(format!(
                        "vector for `{word}` has {} dims, expected {d}",
                        v.len()
                    )))
                }
                _ => {}
            }
            vectors.insert(word.to_lowercase(), v);
        }
        match dim {
            Some(dim) if dim > 0 => Ok(EmbeddingTable { dim, vectors }),
            _ => Err(Error::Format {
                source_name: "embeddings".into(),
                line: 0,
                message: "no vectors".into(),
            }),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&crate::util::read_to_string(path)?)
    }

    /// Parses `word v1 ... vd` lines. Blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let format_err = |line: usize, message: String| Error::Format {
            source_name: "embeddings".into(),
            line: line as u64,
            message,
        };
        let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
        let mut dim = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let mut parts = raw.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let v = parts
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| format_err(line_no, format!("`{t}` is not a number")))
                })
                .collect::<Result<Vec<_>>>()?;
            if v.is_empty() {
                return Err(format_err(line_no, format!("word `{word}` has no vector")));
            }
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(format_err(line_no, format!("expected {d} values, found {}", v.len())))
                }
                _ => {}
            }
            let key = word.to_lowercase();
            if vectors.insert(key, v).is_some() {
                log::warn!("embeddings line {line_no}: duplicate word `{word}`, keeping the later vector");
            }
        }
        let dim = dim.ok_or_else(|| format_err(0, "empty embedding file".into()))?;
        Ok(EmbeddingTable { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(&word.to_lowercase()).map(Vec::as_slice)
    }
}

/// Token list per node, in canonical node order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTokens(pub [Vec<String>; N_NODES]);

impl Default for NodeTokens {
    fn default() -> Self {
        let t = |words: &[&str]| words.iter().map(|w| w.to_string()).collect::<Vec<_>>();
        NodeTokens([
            t(&["atypical", "pigment", "network"]),
            t(&["irregular", "streaks"]),
            t(&["irregular", "pigmentation"]),
            t(&["regression", "structures"]),
            t(&["irregular", "dots", "globules"]),
            t(&["blue", "whitish", "veil"]),
            t(&["irregular", "vascular", "structures"]),
            t(&["melanoma"]),
        ])
    }
}

impl NodeTokens {
    /// Reads `{node_name: [tokens]}` keyed by the node abbreviations.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        let mut out = NodeTokens::default();
        for (slot, name) in out.0.iter_mut().zip(NODE_NAMES) {
            let tokens = map.remove(name).ok_or_else(|| Error::Schema {
                column: format!("{name} (in node token table)"),
            })?;
            if tokens.is_empty() {
                return Err(Error::Config(format!("node `{name}` has no tokens")));
            }
            *slot = tokens;
        }
        if let Some(extra) = map.keys().next() {
            return Err(Error::Config(format!("unknown node `{extra}` in token table")));
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::util::read_to_string(path)?)
    }
}

/// Maps `dim`-dimensional vectors to 128 dimensions.
///
/// The identity when `dim == 128`; otherwise a seeded Gaussian matrix
/// orthonormalized along its shorter side, so it is an isometry when
/// `dim < 128` and a partial isometry when `dim > 128`.
#[derive(Clone, Debug)]
pub struct Projection {
    matrix: Option<Array2<f64>>,
}

impl Projection {
    pub fn new(dim: usize) -> Self {
        if dim == NODE_FEATURE_DIM {
            return Projection { matrix: None };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(PROJECTION_SEED);
        let (long, short) = (NODE_FEATURE_DIM.max(dim), NODE_FEATURE_DIM.min(dim));
        // `short` orthonormal vectors of length `long`.
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
        while basis.len() < short {
            let mut v: Vec<f64> = (0..long).map(|_| StandardNormal.sample(&mut rng)).collect();
            for _ in 0..2 {
                for u in &basis {
                    let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                v.iter_mut().for_each(|x| *x /= norm);
                basis.push(v);
            }
        }
        let m = if dim < NODE_FEATURE_DIM {
            // 128 x dim with orthonormal columns.
            Array2::from_shape_fn((NODE_FEATURE_DIM, dim), |(i, j)| basis[j][i])
        } else {
            // 128 x dim with orthonormal rows.
            Array2::from_shape_fn((NODE_FEATURE_DIM, dim), |(i, j)| basis[i][j])
        };
        Projection { matrix: Some(m) }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.matrix {
            None => v.to_vec(),
            Some(m) => m.dot(&ndarray::ArrayView1::from(v)).to_vec(),
        }
    }
}

/// Deterministic unit vector for a token missing from the table.
pub fn fallback_vector(token: &str, dim: usize) -> Vec<f64> {
    let digest = Sha256::digest(token.to_lowercase().as_bytes());
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(seed);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Mean of the token vectors, projected to 128 dims.
pub fn encode_node(tokens: &[String], table: &EmbeddingTable, projection: &Projection) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Err(Error::Config("cannot encode an empty token list".into()));
    }
    let mut mean = vec![0.0; table.dim()];
    for t in tokens {
        let owned;
        let v = match table.get(t) {
            Some(v) => v,
            None => {
                log::debug!("token `{t}` not in embeddings, using hashed fallback");
                owned = fallback_vector(t, table.dim());
                &owned
            }
        };
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
    }
    let n = tokens.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(projection.apply(&mean))
}

pub fn encode_all_nodes(table: &EmbeddingTable, tokens: &NodeTokens) -> Result<NodeFeatureMatrix> {
    let projection = Projection::new(table.dim());
    let mut x = Array2::zeros((N_NODES, NODE_FEATURE_DIM));
    for (mut row, toks) in x.outer_iter_mut().zip(&tokens.0) {
        let v = encode_node(toks, table, &projection)?;
        row.iter_mut().zip(v).for_each(|(r, val)| *r = val);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            case_id: "<node features>".into(),
            message: "non-finite node feature".into(),
        });
    }
    Ok(x)
}

/// One-hot node features: the 8x8 identity padded with zeros to 128 columns.
pub fn one_hot_features() -> NodeFeatureMatrix {
    Array2::from_shape_fn((N_NODES, NODE_FEATURE_DIM), |(i, j)| (i == j) as u8 as f64)
}

pub fn feature_digest(x: &NodeFeatureMatrix) -> String {
    crate::util::digest_f64s(x.iter())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn reads_small_file() {
        let t = EmbeddingTable::parse("cat 0.1 0.2 0.3\ndog -1 0 1\n").unwrap();
        assert_eq!((t.len(), t.dim()), (2, 3));
        assert_eq!(t.get("DOG"), Some(&[-1.0, 0.0, 1.0][..]));
    }

    #[test]
    fn bad_token_cites_line() {
        match EmbeddingTable::parse("cat 0.1 0.2\ndog 0.5 abc\n") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inconsistent_and_empty() {
        assert!(matches!(EmbeddingTable::parse("a 1 2\nb 1 2 3\n"), Err(Error::Format { line: 2, .. })));
        assert!(matches!(EmbeddingTable::parse(""), Err(Error::Format { .. })));
    }

    #[test]
    fn duplicate_word_last_wins() {
        let t = EmbeddingTable::parse("a 1 2\nb 0 0\na 3 4\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("a"), Some(&[3.0, 4.0][..]));
    }

    #[test]
    fn single_token_identity_projection() {
        let v: Vec<f64> = (0..128).map(|i| i as f64 * 0.01).collect();
        let t = EmbeddingTable::from_entries([("veil".to_string(), v.clone())]).unwrap();
        let out = encode_node(&toks(&["veil"]), &t, &Projection::new(128)).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn fallback_is_deterministic_unit() {
        let a = fallback_vector("zyzzyva", 50);
        assert_eq!(a, fallback_vector("zyzzyva", 50));
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        let t = EmbeddingTable::from_entries([("x".to_string(), vec![0.0; 50])]).unwrap();
        let p = Projection::new(50);
        let once = encode_node(&toks(&["zyzzyva"]), &t, &p).unwrap();
        let twice = encode_node(&toks(&["zyzzyva"]), &t, &p).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn projection_preserves_inner_products_below_128() {
        let p = Projection::new(50);
        let a: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).cos()).collect();
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>();
        let (pa, pb) = (p.apply(&a), p.apply(&b));
        assert_eq!(pa.len(), 128);
        assert!((dot(&pa, &pb) - dot(&a, &b)).abs() < 1e-10);
    }

    #[test]
    fn projection_above_128_has_orthonormal_rows() {
        let p = Projection::new(300);
        let m = p.matrix.as_ref().unwrap();
        let gram = m.dot(&m.t());
        for i in 0..128 {
            for j in 0..128 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shared_token_gives_positive_overlap() {
        let t = EmbeddingTable::parse(include_str!("../data/demo_embeddings.txt")).unwrap();
        let p = Projection::new(t.dim());
        let a = encode_node(&toks(&["irregular", "streaks"]), &t, &p).unwrap();
        let b = encode_node(&toks(&["irregular", "pigmentation"]), &t, &p).unwrap();
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!(dot > 0.0, "{dot}");
    }

    #[test]
    fn node_matrix_is_order_independent() {
        let text = include_str!("../data/demo_embeddings.txt");
        let mut lines: Vec<&str> = text.lines().collect();
        let a = encode_all_nodes(&EmbeddingTable::parse(text).unwrap(), &NodeTokens::default()).unwrap();
        lines.reverse();
        let b = encode_all_nodes(&EmbeddingTable::parse(&lines.join("\n")).unwrap(), &NodeTokens::default())
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), (8, 128));
        assert_eq!(feature_digest(&a), feature_digest(&b));
    }

    #[test]
    fn one_hot_rows_are_orthogonal() {
        let x = one_hot_features();
        let gram = x.dot(&x.t());
        assert_eq!(gram, Array2::<f64>::eye(8));
    }

    #[test]
    fn token_table_json() {
        let json = r#"{"APN":["a"],"IR-STR":["b"],"IR-PIG":["c"],"RS":["d"],
            "IR-DaG":["e"],"BWV":["f"],"IR-VS":["g"],"MEL":["melanoma"]}"#;
        let t = NodeTokens::from_json(json).unwrap();
        assert_eq!(t.0[5], ["f"]);
        assert!(NodeTokens::from_json(r#"{"APN":["a"]}"#).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn table(scale: f64) -> EmbeddingTable {
            let words = ["alpha", "beta", "gamma", "delta"];
            EmbeddingTable::from_entries(words.iter().enumerate().map(|(i, w)| {
                let v = (0..20).map(|k| scale * ((i * 20 + k) as f64 * 0.37).sin()).collect();
                (w.to_string(), v)
            }))
            .unwrap()
        }

        proptest! {
            #[test]
            fn mean_is_permutation_invariant(perm in Just(vec!["alpha", "beta", "gamma", "delta"]).prop_shuffle()) {
                let t = table(1.0);
                let p = Projection::new(20);
                let base = encode_node(&toks(&["alpha", "beta", "gamma", "delta"]), &t, &p).unwrap();
                let shuffled = encode_node(&toks(&perm), &t, &p).unwrap();
                for (a, b) in base.iter().zip(&shuffled) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }

            #[test]
            fn encoding_is_linear_in_scale(c in 0.01f64..100.0) {
                let p = Projection::new(20);
                let words = toks(&["alpha", "gamma"]);
                let base = encode_node(&words, &table(1.0), &p).unwrap();
                let scaled = encode_node(&words, &table(c), &p).unwrap();
                for (a, b) in base.iter().zip(&scaled) {
                    prop_assert!((a * c - b).abs() < 1e-9 * c.max(1.0));
                }
            }
        }
    }
}
