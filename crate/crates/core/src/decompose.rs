//! Column-graph factorization `M = M1 * M2`.
//!
//! Every column of `M` is a vertex, plus a root holding the zero vector. The
//! distance between two columns is the CSD digit count of their sum or
//! difference, whichever is smaller. A Prim-style greedy tree grown from the
//! root (with a cap on vertex depth) yields one `M1` column per non-zero
//! edge; `M2` records how the edges along each root path add up to the
//! original column.

use crate::csd::{nnz, nnz_csd};
use crate::{Dyadic, Matrix, Sign};

/// Root vertex id in [`ColumnGraphResult::parent`].
pub const ROOT: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnGraphResult {
    /// `[d_in x k]` edge vectors.
    pub m1: Matrix,
    /// `[k x d_out]` with entries in {-1, 0, 1}.
    pub m2: Matrix,
    /// Tree parent of each column, [`ROOT`] for root children.
    pub parent: Vec<usize>,
    /// Sign `s` with `v_child = edge + s * v_parent`.
    pub parent_sign: Vec<Sign>,
    /// Edge weight (CSD digits of the edge vector) per column.
    pub edge_weight: Vec<usize>,
    /// `m1` column holding each column's edge, `None` for zero edges.
    pub edge_column: Vec<Option<usize>>,
    /// Edges between the root and each column.
    pub tree_depth: Vec<u32>,
    /// Columns in attach order.
    pub order: Vec<usize>,
}

impl ColumnGraphResult {
    /// Every column hangs directly off the root with a positive sign, so
    /// `m2` is a permuted identity (zero columns aside).
    pub fn is_trivial(&self) -> bool {
        self.parent.iter().zip(&self.parent_sign).all(|(&p, &s)| p == ROOT && s == Sign::Pos)
    }

    /// Number of non-zero `m2` entries in column `i`.
    pub fn path_terms(&self, i: usize) -> usize {
        (0..self.m2.rows()).filter(|&k| !self.m2.get(k, i).is_zero()).count()
    }
}

fn combine(u: &[Dyadic], v: &[Dyadic], sign: Sign) -> Vec<Dyadic> {
    u.iter().zip(v).map(|(a, b)| a - &sign.apply(b)).collect()
}

fn distance_signed(u: &[Dyadic], v: &[Dyadic]) -> (usize, Sign) {
    let minus: usize = u.iter().zip(v).map(|(a, b)| nnz(&(a - b))).sum();
    let plus: usize = u.iter().zip(v).map(|(a, b)| nnz(&(a + b))).sum();
    if plus < minus {
        (plus, Sign::Neg)
    } else {
        (minus, Sign::Pos)
    }
}

/// `min(nnz_csd(u + v), nnz_csd(u - v))`
pub fn column_distance(u: &[Dyadic], v: &[Dyadic]) -> usize {
    assert_eq!(u.len(), v.len(), "column lengths differ");
    distance_signed(u, v).0
}

/// Depth cap for a delay constraint: `2^dc`, unbounded for `dc < 0`.
pub fn depth_cap(dc: i32) -> Option<u32> {
    (dc >= 0).then(|| 1u32.checked_shl(dc as u32).unwrap_or(u32::MAX))
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Candidate {
    dist: usize,
    // parent id with the root ordered first
    parent_rank: usize,
    sign: Sign,
}

fn rank(parent: usize) -> usize {
    if parent == ROOT {
        0
    } else {
        parent + 1
    }
}

pub fn decompose(m: &Matrix, dc: i32) -> ColumnGraphResult {
    let (d_in, d_out) = (m.rows(), m.cols());
    let cap = depth_cap(dc);
    let cols: Vec<Vec<Dyadic>> = (0..d_out).map(|c| m.column(c)).collect();

    let mut best: Vec<Candidate> =
        cols.iter().map(|v| Candidate { dist: nnz_csd(v), parent_rank: 0, sign: Sign::Pos }).collect();
    let mut attached = vec![false; d_out];
    let mut parent = vec![ROOT; d_out];
    let mut parent_sign = vec![Sign::Pos; d_out];
    let mut edge_weight = vec![0; d_out];
    let mut tree_depth = vec![0u32; d_out];
    let mut order = Vec::with_capacity(d_out);

    for _ in 0..d_out {
        let Some(u) = (0..d_out).filter(|&c| !attached[c]).min_by_key(|&c| (best[c].dist, c)) else {
            break;
        };
        let cand = best[u];
        attached[u] = true;
        order.push(u);
        parent[u] = if cand.parent_rank == 0 { ROOT } else { cand.parent_rank - 1 };
        parent_sign[u] = cand.sign;
        edge_weight[u] = cand.dist;
        tree_depth[u] = if parent[u] == ROOT { 1 } else { tree_depth[parent[u]] + 1 };

        if cap.is_some_and(|cap| tree_depth[u] >= cap) {
            continue;
        }
        for v in 0..d_out {
            if attached[v] {
                continue;
            }
            let (dist, sign) = distance_signed(&cols[v], &cols[u]);
            let c = Candidate { dist, parent_rank: rank(u), sign };
            if (c.dist, c.parent_rank) < (best[v].dist, best[v].parent_rank) {
                best[v] = c;
            }
        }
    }

    // m1 columns in attach order; zero edges contribute nothing.
    let mut edge_column = vec![None; d_out];
    let mut m1_cols = Vec::new();
    for &u in &order {
        let edge = if parent[u] == ROOT {
            cols[u].clone()
        } else {
            combine(&cols[u], &cols[parent[u]], parent_sign[u])
        };
        if edge.iter().any(|v| !v.is_zero()) {
            edge_column[u] = Some(m1_cols.len());
            m1_cols.push(edge);
        }
    }
    let k = m1_cols.len();
    let m1 = Matrix::from_columns(d_in, &m1_cols);

    // m2[:, u] = e_edge(u) + sign(u) * m2[:, parent(u)]
    let mut m2 = Matrix::zeros(k, d_out);
    for &u in &order {
        if parent[u] != ROOT {
            for r in 0..k {
                let v = parent_sign[u].apply(m2.get(r, parent[u]));
                m2.set(r, u, v);
            }
        }
        if let Some(e) = edge_column[u] {
            let v = m2.get(e, u) + &Dyadic::from_int(1);
            m2.set(e, u, v);
        }
    }

    ColumnGraphResult { m1, m2, parent, parent_sign, edge_weight, edge_column, tree_depth, order }
}

pub fn is_trivial(result: &ColumnGraphResult) -> bool {
    result.is_trivial()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(v: &[i64]) -> Vec<Dyadic> {
        v.iter().map(|&x| Dyadic::from_int(x)).collect()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(column_distance(&col(&[0, 1, 2]), &col(&[1, 2, 3])), 3);
        assert_eq!(column_distance(&col(&[5, -3, 9]), &col(&[5, -3, 9])), 0);
        assert_eq!(column_distance(&col(&[0, 1, 2]), &col(&[0, 0, 0])), 2);
        // negated duplicate
        assert_eq!(column_distance(&col(&[3, 1]), &col(&[-3, -1])), 0);
    }

    #[test]
    fn figure_chain() {
        let m = Matrix::from_i64(&[[0, 1, 3], [1, 2, 4], [2, 3, 5]]);
        let r = decompose(&m, -1);
        assert_eq!(r.parent, vec![ROOT, 0, 1]);
        assert_eq!(r.edge_weight, vec![2, 3, 3]);
        assert_eq!(r.tree_depth, vec![1, 2, 3]);
        assert_eq!(r.m1, Matrix::from_i64(&[[0, 1, 2], [1, 1, 2], [2, 1, 2]]));
        assert_eq!(r.m2, Matrix::from_i64(&[[1, 1, 1], [0, 1, 1], [0, 0, 1]]));
        assert_eq!(r.m1.mul(&r.m2).unwrap(), m);
        assert!(!r.is_trivial());
    }

    #[test]
    fn dc_zero_gives_star() {
        let m = Matrix::from_i64(&[[0, 1, 3], [1, 2, 4], [2, 3, 5]]);
        let r = decompose(&m, 0);
        assert!(r.parent.iter().all(|&p| p == ROOT));
        assert!(r.is_trivial());
        assert_eq!(r.m1.mul(&r.m2).unwrap(), m);
        for c in 0..3 {
            assert_eq!(r.m1.column(r.edge_column[c].unwrap()), m.column(c));
        }
    }

    #[test]
    fn negated_column_is_a_zero_edge() {
        let m = Matrix::from_i64(&[[1, -1], [2, -2]]);
        let r = decompose(&m, -1);
        assert_eq!(r.m1.cols(), 1);
        assert_eq!(r.m2, Matrix::from_i64(&[[1, -1]]));
        assert_eq!(r.m1.mul(&r.m2).unwrap(), m);
        assert!(!r.is_trivial());
    }

    #[test]
    fn empty_matrix_is_trivial() {
        let r = decompose(&Matrix::zeros(3, 0), -1);
        assert!(r.is_trivial());
        assert_eq!(r.m1.cols(), 0);
    }

    #[test]
    fn zero_column_becomes_zero_output() {
        let m = Matrix::from_i64(&[[0, 3], [0, 5]]);
        let r = decompose(&m, 2);
        assert_eq!(r.m1.mul(&r.m2).unwrap(), m);
        assert_eq!(r.path_terms(0), 0);
    }

    fn arb_matrix(max: usize) -> impl Strategy<Value = Matrix> {
        (1..=max, 1..=max).prop_flat_map(|(r, c)| {
            proptest::collection::vec(proptest::collection::vec(-128i64..=127, c), r)
                .prop_map(|rows| Matrix::from_i64(&rows))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn factorization_is_exact(m in arb_matrix(16), dc in -1i32..=2) {
            let r = decompose(&m, dc);
            prop_assert_eq!(r.m1.mul(&r.m2).unwrap(), m.clone());
            if let Some(cap) = depth_cap(dc) {
                prop_assert!(r.tree_depth.iter().all(|&d| d <= cap));
            }
            let total_m: usize = m.iter().map(nnz).sum();
            let total_m1: usize = r.m1.iter().map(nnz).sum();
            prop_assert!(total_m1 <= total_m);
            prop_assert!(r.m2.iter().all(|v| v.is_zero() || v.abs() == Dyadic::from_int(1)));
            prop_assert_eq!(decompose(&m, dc), r);
        }
    }
}
