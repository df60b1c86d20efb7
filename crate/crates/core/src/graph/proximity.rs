//! k-th order proximity matrices and the stationary vector of the transition chain.

use ndarray::{Array1, Array2};

use crate::{Error, Result};

/// Teleport mass mixed into the transition chain before power iteration.
pub const STATIONARY_TELEPORT: f64 = 0.1;

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 100_000;

/// Row-normalized adjacency `D^-1 A`. Rows with zero out-weight receive a
/// unit self-loop first so that `D` is invertible.
pub fn transition_matrix(adjacency: &Array2<f64>) -> Array2<f64> {
    let mut a = adjacency.clone();
    for (i, mut row) in a.outer_iter_mut().enumerate() {
        let total: f64 = row.sum();
        if total <= 0.0 {
            row.fill(0.0);
            row[i] = 1.0;
        } else {
            row.mapv_inplace(|v| v / total);
        }
    }
    a
}

/// Element-wise intersection: the sum where both entries are nonzero, else 0.
fn intersect(m: &Array2<f64>, n: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(m.raw_dim());
    ndarray::Zip::from(&mut out)
        .and(m)
        .and(n)
        .for_each(|o, &a, &b| {
            if a != 0.0 && b != 0.0 {
                *o = a + b;
            }
        });
    out
}

/// `P^(k)` of the digraph with the given adjacency.
///
/// `P^(0) = I`, `P^(1) = D^-1 A`, and for `k >= 2` the halved intersection of
/// the meeting-path matrix `T^(k-1) (T^T)^(k-1)` and the diffusion-path matrix
/// `(T^T)^(k-1) T^(k-1)`, where `T = P^(1)`.
pub fn proximity_matrix(adjacency: &Array2<f64>, k: usize) -> Array2<f64> {
    let n = adjacency.nrows();
    assert_eq!(n, adjacency.ncols(), "adjacency must be square");
    match k {
        0 => Array2::eye(n),
        1 => transition_matrix(adjacency),
        _ => {
            let t = transition_matrix(adjacency);
            let mut power = t.clone();
            for _ in 1..k - 1 {
                power = power.dot(&t);
            }
            let meeting = power.dot(&power.t());
            let diffusion = power.t().dot(&power);
            intersect(&meeting, &diffusion) / 2.0
        }
    }
}

/// Dominant left eigenvector of `(1 - eps) P + eps/n * 1 1^T` by power iteration.
pub fn stationary_distribution(p1: &Array2<f64>) -> Result<Array1<f64>> {
    let n = p1.nrows();
    if n == 0 || p1.ncols() != n {
        return Err(Error::Dimension("transition matrix must be square and nonempty".into()));
    }
    for (i, row) in p1.outer_iter().enumerate() {
        let s: f64 = row.sum();
        if (s - 1.0).abs() > 1e-9 || row.iter().any(|&v| v < 0.0) {
            return Err(Error::Config(format!("row {i} of the transition matrix is not stochastic")));
        }
    }
    let eps = STATIONARY_TELEPORT;
    let teleport = eps / n as f64;
    let mut pi = Array1::from_elem(n, 1.0 / n as f64);
    for _ in 0..POWER_MAX_ITERS {
        let mut next = pi.dot(p1) * (1.0 - eps) + teleport * pi.sum();
        let total = next.sum();
        next /= total;
        let residual: f64 = (&next - &pi).iter().map(|v| v.abs()).sum();
        pi = next;
        if residual < POWER_TOL {
            return Ok(pi);
        }
    }
    Err(Error::Numerical {
        case_id: "<graph>".into(),
        message: "power iteration did not converge".into(),
    })
}

/// `P^(0..=order)` together with the stationary vector of `P^(1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProximityStack {
    pub matrices: Vec<Array2<f64>>,
    pub stationary: Array1<f64>,
    pub order: usize,
}

impl ProximityStack {
    pub fn build(adjacency: &Array2<f64>, order: usize) -> Result<Self> {
        let matrices: Vec<_> = (0..=order).map(|k| proximity_matrix(adjacency, k)).collect();
        let stationary = stationary_distribution(&transition_matrix(adjacency))?;
        Ok(ProximityStack {
            matrices,
            stationary,
            order,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.stationary.len()
    }

    /// Normalized propagation operator applied to node features at scale `k`:
    ///
    /// * `k = 0`: identity
    /// * `k = 1`: `(Pi^1/2 P Pi^-1/2 + Pi^-1/2 P^T Pi^1/2) / 2`
    /// * `k >= 2`: `W^-1/2 P^(k) W^-1/2` with `W` the row sums of `P^(k)`
    ///   (zero sums replaced by 1).
    pub fn propagation(&self, k: usize) -> Array2<f64> {
        assert!(k <= self.order, "scale {k} exceeds proximity order {}", self.order);
        let p = &self.matrices[k];
        let n = p.nrows();
        match k {
            0 => Array2::eye(n),
            1 => {
                let sq = self.stationary.mapv(f64::sqrt);
                Array2::from_shape_fn((n, n), |(i, j)| {
                    0.5 * (sq[i] * p[[i, j]] / sq[j] + p[[j, i]] * sq[j] / sq[i])
                })
            }
            _ => {
                let w: Vec<f64> = p
                    .outer_iter()
                    .map(|r| {
                        let s = r.sum();
                        1.0 / if s == 0.0 { 1.0 } else { s }.sqrt()
                    })
                    .collect();
                Array2::from_shape_fn((n, n), |(i, j)| w[i] * p[[i, j]] * w[j])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_graph() -> Array2<f64> {
        // a=0 -> b=1 <- c=2 inside an otherwise empty 8-node graph.
        let mut a = Array2::zeros((8, 8));
        a[[0, 1]] = 1.0;
        a[[2, 1]] = 0.5;
        a
    }

    #[test]
    fn order_zero_is_identity() {
        assert_eq!(proximity_matrix(&chain_graph(), 0), Array2::<f64>::eye(8));
    }

    #[test]
    fn meeting_without_diffusion_is_not_proximal() {
        let p2 = proximity_matrix(&chain_graph(), 2);
        assert_eq!(p2[[0, 2]], 0.0);
        assert_eq!(p2[[2, 0]], 0.0);
    }

    #[test]
    fn zero_out_degree_gets_self_loop() {
        let t = transition_matrix(&chain_graph());
        assert_eq!(t[[1, 1]], 1.0);
        assert_eq!(t[[0, 1]], 1.0);
        for row in t.outer_iter() {
            assert_eq!(row.sum(), 1.0);
        }
    }

    #[test]
    fn uniform_chain_has_uniform_stationary() {
        let p = Array2::from_elem((8, 8), 1.0 / 8.0);
        let pi = stationary_distribution(&p).unwrap();
        for v in pi.iter() {
            assert!((v - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_chain_is_uniform_after_teleport() {
        let pi = stationary_distribution(&Array2::eye(8)).unwrap();
        for v in pi.iter() {
            assert!((v - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn non_stochastic_rejected() {
        let p = Array2::from_elem((8, 8), 0.2);
        assert!(stationary_distribution(&p).is_err());
    }

    #[test]
    fn propagation_at_zero_and_symmetry() {
        let mut a = Array2::zeros((8, 8));
        for i in 0..8 {
            a[[i, (i + 1) % 8]] = 0.7;
            a[[i, (i + 3) % 8]] = 0.2;
        }
        let stack = ProximityStack::build(&a, 3).unwrap();
        assert_eq!(stack.propagation(0), Array2::<f64>::eye(8));
        for k in 1..=3 {
            let s = stack.propagation(k);
            for i in 0..8 {
                for j in 0..8 {
                    assert!((s[[i, j]] - s[[j, i]]).abs() < 1e-14, "k={k}");
                }
            }
        }
    }
}
