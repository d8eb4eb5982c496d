//! Symmetric sparse matrices made of 6x6 blocks and their block `L D L^T`
//! factorization.
//!
//! The ordering is a minimum-degree elimination on the block graph. The fill
//! pattern it produces is computed once per problem and reused by every
//! numeric factorization.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::liegroup::{Mat6, Twist};
use crate::math;

/// Position of a block inside a [`BlockSymmetric`] value array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Diagonal(usize),
    /// Off-diagonal entry `e`; `transposed` when the requested block is the
    /// lower one.
    Off { index: usize, transposed: bool },
}

/// Sparsity pattern of a block symmetric matrix: `n` diagonal blocks plus the
/// strictly upper edges `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPattern {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl BlockPattern {
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut edges: Vec<(usize, usize)> = pairs
            .into_iter()
            .filter(|(i, j)| i != j)
            .map(|(i, j)| (i.min(j), i.max(j)))
            .collect();
        assert!(edges.iter().all(|&(_, j)| j < n), "pattern index out of range");
        edges.sort_unstable();
        edges.dedup();
        Self { n, edges }
    }

    pub fn block_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn slot(&self, i: usize, j: usize) -> Option<Slot> {
        if i == j {
            return (i < self.n).then_some(Slot::Diagonal(i));
        }
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).ok().map(|index| Slot::Off {
            index,
            transposed: i > j,
        })
    }
}

/// Block symmetric matrix over a fixed pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSymmetric {
    pub diagonal: Vec<Mat6>,
    /// Upper blocks `A_ij`, `i < j`, in pattern edge order.
    pub off: Vec<Mat6>,
}

impl BlockSymmetric {
    pub fn zeros(pattern: &BlockPattern) -> Self {
        Self {
            diagonal: vec![Mat6::zeros(); pattern.n],
            off: vec![Mat6::zeros(); pattern.edges.len()],
        }
    }

    pub fn clear(&mut self) {
        self.diagonal.iter_mut().for_each(|b| b.fill(0.0));
        self.off.iter_mut().for_each(|b| b.fill(0.0));
    }

    /// Adds `block` at `slot`. For diagonal slots the caller passes the whole
    /// block; for off-diagonal slots the block as seen from the requested
    /// `(i, j)` position.
    pub fn add(&mut self, slot: Slot, block: &Mat6) {
        match slot {
            Slot::Diagonal(i) => self.diagonal[i] += block,
            Slot::Off { index, transposed: false } => self.off[index] += block,
            Slot::Off { index, transposed: true } => self.off[index] += block.transpose(),
        }
    }

    pub fn add_to_diagonal(&mut self, lambda: f64) {
        for b in &mut self.diagonal {
            for k in 0..6 {
                b[(k, k)] += lambda;
            }
        }
    }

    pub fn mean_diagonal(&self) -> f64 {
        let n = self.diagonal.len() * 6;
        if n == 0 {
            return 0.0;
        }
        self.diagonal.iter().map(|b| b.trace()).sum::<f64>() / n as f64
    }

    pub fn mul_vec(&self, pattern: &BlockPattern, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(x.len());
        for (i, d) in self.diagonal.iter().enumerate() {
            let r = d * block_of(x, i);
            add_block(&mut y, i, &r);
        }
        for (&(i, j), b) in pattern.edges.iter().zip(&self.off) {
            add_block(&mut y, i, &(b * block_of(x, j)));
            add_block(&mut y, j, &(b.transpose() * block_of(x, i)));
        }
        y
    }

    pub fn to_dense(&self, pattern: &BlockPattern) -> nalgebra::DMatrix<f64> {
        let n = 6 * pattern.n;
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for (i, d) in self.diagonal.iter().enumerate() {
            m.view_mut((6 * i, 6 * i), (6, 6)).copy_from(d);
        }
        for (&(i, j), b) in pattern.edges.iter().zip(&self.off) {
            m.view_mut((6 * i, 6 * j), (6, 6)).copy_from(b);
            m.view_mut((6 * j, 6 * i), (6, 6)).copy_from(&b.transpose());
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.diagonal.iter().chain(&self.off).all(|b| b.iter().all(|x| x.is_finite()))
    }
}

fn block_of(x: &DVector<f64>, i: usize) -> Twist {
    Twist::from_fn(|r, _| x[6 * i + r])
}

fn add_block(y: &mut DVector<f64>, i: usize, v: &Twist) {
    for r in 0..6 {
        y[6 * i + r] += v[r];
    }
}

/// Elimination order and fill pattern of a block pattern.
#[derive(Debug, Clone)]
pub struct BlockSymbolic {
    n: usize,
    /// `perm[k]` is the original block eliminated at step `k`.
    perm: Vec<usize>,
    /// Rows (in elimination order, ascending, all `> k`) of column `k` of `L`.
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    /// Where each pattern edge lands in `rows`, and whether it is stored
    /// transposed there.
    edge_target: Vec<(usize, bool)>,
}

impl BlockSymbolic {
    pub fn analyze(pattern: &BlockPattern) -> Self {
        let n = pattern.n;
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(i, j) in &pattern.edges {
            adj[i].insert(j);
            adj[j].insert(i);
        }
        let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
        let mut perm = Vec::with_capacity(n);
        let mut eliminated_with: Vec<Vec<usize>> = Vec::with_capacity(n);
        while let Some((_, v)) = queue.pop_first() {
            let nbrs: Vec<usize> = core::mem::take(&mut adj[v]).into_iter().collect();
            for &u in &nbrs {
                queue.remove(&(adj[u].len(), u));
                adj[u].remove(&v);
                for &w in &nbrs {
                    if w != u {
                        adj[u].insert(w);
                    }
                }
                queue.insert((adj[u].len(), u));
            }
            perm.push(v);
            eliminated_with.push(nbrs);
        }
        let mut iperm = vec![0; n];
        for (k, &v) in perm.iter().enumerate() {
            iperm[v] = k;
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut rows = Vec::new();
        col_ptr.push(0);
        for nbrs in &eliminated_with {
            let mut col: Vec<usize> = nbrs.iter().map(|&u| iperm[u]).collect();
            col.sort_unstable();
            rows.extend(col);
            col_ptr.push(rows.len());
        }
        let mut symbolic = Self {
            n,
            perm,
            col_ptr,
            rows,
            edge_target: Vec::new(),
        };
        let targets = pattern
            .edges
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (iperm[i], iperm[j]);
                if a > b {
                    (symbolic.position(a, b), false)
                } else {
                    (symbolic.position(b, a), true)
                }
            })
            .collect();
        symbolic.edge_target = targets;
        symbolic
    }

    // Index in `rows` of entry (row r, column c), r > c.
    fn position(&self, r: usize, c: usize) -> usize {
        let col = &self.rows[self.col_ptr[c]..self.col_ptr[c + 1]];
        self.col_ptr[c] + col.binary_search(&r).expect("fill pattern misses an entry")
    }

    pub fn block_count(&self) -> usize {
        self.n
    }

    /// Number of stored off-diagonal blocks of the factor.
    pub fn factor_blocks(&self) -> usize {
        self.rows.len()
    }

    /// Numeric factorization of `matrix`, which must share the analyzed
    /// pattern. Singular pivots are reported with the global scalar index.
    pub fn factor(&self, matrix: &BlockSymmetric) -> Result<BlockFactor> {
        let n = self.n;
        let mut diag: Vec<Mat6> = self.perm.iter().map(|&v| matrix.diagonal[v]).collect();
        let mut lower = vec![Mat6::zeros(); self.rows.len()];
        for (b, &(pos, transposed)) in matrix.off.iter().zip(&self.edge_target) {
            lower[pos] = if transposed { b.transpose() } else { *b };
        }
        // each pivot is judged against its own block: slope unknowns scale
        // with h^3 and sit far below the node blocks
        let thresholds: Vec<f64> = diag
            .iter()
            .map(|d| 1e-13 * (0..6).map(|k| math::abs(d[(k, k)])).fold(0.0, f64::max).max(f64::MIN_POSITIVE))
            .collect();
        let mut dinv = Vec::with_capacity(n);
        for k in 0..n {
            let threshold = thresholds[k];
            let d = (diag[k] + diag[k].transpose()) * 0.5;
            let inv = invert_pivot(&d, threshold).map_err(|(c, pivot)| Error::Singular {
                dof: 6 * self.perm[k] + c,
                pivot,
            })?;
            let (start, end) = (self.col_ptr[k], self.col_ptr[k + 1]);
            // W_p = A_pk, L_p = W_p D^-1; A_pq -= L_p W_q^T
            let w: Vec<Mat6> = lower[start..end].to_vec();
            let l: Vec<Mat6> = w.iter().map(|wp| wp * inv).collect();
            for (p, lp) in l.iter().enumerate() {
                let rp = self.rows[start + p];
                for (q, wq) in w.iter().enumerate().take(p + 1) {
                    let rq = self.rows[start + q];
                    let update = lp * wq.transpose();
                    if rp == rq {
                        diag[rp] -= update;
                    } else {
                        let pos = self.position(rp, rq);
                        lower[pos] -= update;
                    }
                }
            }
            lower[start..end].copy_from_slice(&l);
            dinv.push(inv);
        }
        Ok(BlockFactor {
            symbolic: self.clone_structure(),
            dinv,
            lower,
        })
    }

    fn clone_structure(&self) -> FactorStructure {
        FactorStructure {
            perm: self.perm.clone(),
            col_ptr: self.col_ptr.clone(),
            rows: self.rows.clone(),
        }
    }
}

// Inverse of a symmetric pivot block: Cholesky when positive definite, LU
// with partial pivoting otherwise. Returns the offending component and pivot
// when singular.
fn invert_pivot(d: &Mat6, threshold: f64) -> core::result::Result<Mat6, (usize, f64)> {
    if let Some(ch) = d.cholesky() {
        let l = ch.l();
        let (c, min) = (0..6)
            .map(|k| (k, l[(k, k)] * l[(k, k)]))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if min > threshold {
            return Ok(ch.inverse());
        }
        return Err((c, min));
    }
    let lu = d.lu();
    let u = lu.u();
    let (c, min) = (0..6)
        .map(|k| (k, u[(k, k)]))
        .fold((0, f64::INFINITY), |a, b| if math::abs(b.1) < math::abs(a.1) { b } else { a });
    if math::abs(min) > threshold {
        if let Some(inv) = lu.try_inverse() {
            return Ok(inv);
        }
    }
    Err((c, min))
}

#[derive(Debug, Clone)]
struct FactorStructure {
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
}

/// Numeric block `L D L^T` factor.
#[derive(Debug, Clone)]
pub struct BlockFactor {
    symbolic: FactorStructure,
    dinv: Vec<Mat6>,
    lower: Vec<Mat6>,
}

impl BlockFactor {
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let s = &self.symbolic;
        let n = s.perm.len();
        assert_eq!(rhs.len(), 6 * n);
        let mut y: Vec<Twist> = s.perm.iter().map(|&v| block_of(rhs, v)).collect();
        for k in 0..n {
            let yk = y[k];
            for idx in s.col_ptr[k]..s.col_ptr[k + 1] {
                y[s.rows[idx]] -= self.lower[idx] * yk;
            }
        }
        for k in 0..n {
            y[k] = self.dinv[k] * y[k];
        }
        for k in (0..n).rev() {
            let mut acc = y[k];
            for idx in s.col_ptr[k]..s.col_ptr[k + 1] {
                acc -= self.lower[idx].transpose() * y[s.rows[idx]];
            }
            y[k] = acc;
        }
        let mut x = DVector::zeros(6 * n);
        for (k, &v) in s.perm.iter().enumerate() {
            x.rows_mut(6 * v, 6).copy_from(&y[k]);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, pattern: &BlockPattern) -> BlockSymmetric {
        let mut m = BlockSymmetric::zeros(pattern);
        for b in &mut m.off {
            *b = Mat6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        }
        // diagonal dominance
        for (i, d) in m.diagonal.iter_mut().enumerate() {
            let a = Mat6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            *d = a * a.transpose() + Mat6::identity() * (12.0 + i as f64 % 3.0);
        }
        let degree = |i: usize| pattern.edges().iter().filter(|e| e.0 == i || e.1 == i).count();
        for i in 0..pattern.block_count() {
            m.diagonal[i] += Mat6::identity() * (6.0 * degree(i) as f64);
        }
        m
    }

    fn grid(nx: usize, ny: usize) -> BlockPattern {
        let id = |x: usize, y: usize| y * nx + x;
        let mut pairs = Vec::new();
        for y in 0..ny {
            for x in 0..nx {
                if x + 1 < nx {
                    pairs.push((id(x, y), id(x + 1, y)));
                }
                if y + 1 < ny {
                    pairs.push((id(x, y), id(x, y + 1)));
                }
            }
        }
        BlockPattern::new(nx * ny, pairs)
    }

    #[test]
    fn pattern_slots() {
        let p = BlockPattern::new(3, [(2, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(p.edges(), &[(0, 1), (0, 2)]);
        assert_eq!(p.slot(1, 1), Some(Slot::Diagonal(1)));
        assert_eq!(p.slot(0, 2), Some(Slot::Off { index: 1, transposed: false }));
        assert_eq!(p.slot(2, 0), Some(Slot::Off { index: 1, transposed: true }));
        assert_eq!(p.slot(1, 2), None);
    }

    #[test]
    fn solves_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let patterns = [
            BlockPattern::new(1, []),
            BlockPattern::new(5, [(0, 1), (1, 2), (2, 3), (3, 4)]),
            BlockPattern::new(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)]),
            grid(7, 5),
            BlockPattern::new(4, []),
        ];
        for p in &patterns {
            let m = random_spd(&mut rng, p);
            let sym = BlockSymbolic::analyze(p);
            let f = sym.factor(&m).unwrap();
            let b = DVector::from_fn(6 * p.block_count(), |_, _| rng.gen_range(-1.0..1.0));
            let x = f.solve(&b);
            let dense = m.to_dense(p);
            assert!((&dense * &x - &b).norm() < 1e-10 * b.norm());
            assert!((m.mul_vec(p, &x) - &b).norm() < 1e-10 * b.norm());
        }
    }

    #[test]
    fn indefinite_pivots_fall_back_to_lu() {
        let p = BlockPattern::new(2, [(0, 1)]);
        let mut m = BlockSymmetric::zeros(&p);
        m.diagonal[0] = Mat6::from_diagonal(&Twist::new(1.0, -2.0, 3.0, 1.0, 1.0, -1.0));
        m.diagonal[1] = Mat6::identity() * 4.0;
        m.off[0] = Mat6::identity() * 0.5;
        let f = BlockSymbolic::analyze(&p).factor(&m).unwrap();
        let b = DVector::from_fn(12, |i, _| i as f64 - 3.0);
        let x = f.solve(&b);
        assert!((m.to_dense(&p) * &x - &b).norm() < 1e-12 * b.norm());
    }

    #[test]
    fn singular_pivot_names_the_dof() {
        let p = BlockPattern::new(3, [(0, 1), (1, 2)]);
        let mut m = BlockSymmetric::zeros(&p);
        for d in &mut m.diagonal {
            *d = Mat6::identity();
        }
        m.diagonal[2][(4, 4)] = 0.0;
        match BlockSymbolic::analyze(&p).factor(&m) {
            Err(Error::Singular { dof, .. }) => assert_eq!(dof, 16),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn tiny_blocks_are_not_singular() {
        // a slope-like block 1e-13 below its neighbour still factors exactly
        let p = BlockPattern::new(2, [(0, 1)]);
        let mut m = BlockSymmetric::zeros(&p);
        m.diagonal[0] = Mat6::identity() * 1e5;
        m.diagonal[1] = Mat6::identity() * 1e-9;
        m.off[0] = Mat6::identity() * 1e-7;
        let f = BlockSymbolic::analyze(&p).factor(&m).unwrap();
        let b = DVector::from_fn(12, |i, _| 1.0 + i as f64);
        let x = f.solve(&b);
        let dense = m.to_dense(&p);
        assert!((&dense * &x - &b).norm() < 1e-12 * b.norm());
    }

    #[test]
    fn chain_has_no_fill() {
        let n = 50;
        let p = BlockPattern::new(n, (0..n - 1).map(|i| (i, i + 1)));
        let sym = BlockSymbolic::analyze(&p);
        assert_eq!(sym.factor_blocks(), n - 1);
    }

    #[test]
    fn factor_is_reusable_across_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = grid(4, 4);
        let sym = BlockSymbolic::analyze(&p);
        for _ in 0..3 {
            let m = random_spd(&mut rng, &p);
            let b = DVector::from_fn(96, |_, _| rng.gen_range(-1.0..1.0));
            let x = sym.factor(&m).unwrap().solve(&b);
            assert!((m.mul_vec(&p, &x) - &b).norm() < 1e-10 * b.norm());
        }
    }
}
