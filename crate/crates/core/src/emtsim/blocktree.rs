//! Direct solver for nodal systems whose 3x3 block sparsity is a tree.
//!
//! Blocks must be numbered so every block's parent has a smaller index
//! (breadth-first order from the root). Elimination runs leaves-first, so
//! there is no fill-in and a solve costs O(blocks).

use nalgebra::{ComplexField, Matrix3, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BlockTree<T: ComplexField> {
    parent: Vec<Option<usize>>,
    diag: Vec<Matrix3<T>>,
    /// `off[c]` is the coupling block G(c, parent(c)); the matrix is symmetric.
    off: Vec<Matrix3<T>>,
}

impl<T: ComplexField + Copy> BlockTree<T> {
    pub fn new(parent: Vec<Option<usize>>) -> Self {
        let n = parent.len();
        for (c, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                assert!(p < c, "block {c} has parent {p} with a larger index");
            } else {
                assert_eq!(c, 0, "only block 0 may be the root");
            }
        }
        BlockTree {
            parent,
            diag: vec![Matrix3::zeros(); n],
            off: vec![Matrix3::zeros(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent(&self, block: usize) -> Option<usize> {
        self.parent[block]
    }

    pub fn add_diag(&mut self, block: usize, m: &Matrix3<T>) {
        self.diag[block] += m;
    }

    /// Adds `m` to the coupling between two adjacent blocks.
    pub fn add_coupling(&mut self, a: usize, b: usize, m: &Matrix3<T>) {
        let child = if self.parent[a] == Some(b) {
            a
        } else if self.parent[b] == Some(a) {
            b
        } else {
            panic!("blocks {a} and {b} are not adjacent in the tree");
        };
        self.off[child] += m;
    }

    pub fn diag(&self, block: usize) -> &Matrix3<T> {
        &self.diag[block]
    }

    /// Block LDL^T factorisation.
    pub fn factor(&self) -> Result<BlockTreeFactor<T>> {
        let n = self.len();
        let mut schur = self.diag.clone();
        let mut inv = vec![Matrix3::zeros(); n];
        let mut w = vec![Matrix3::zeros(); n];
        for c in (0..n).rev() {
            inv[c] = schur[c]
                .try_inverse()
                .ok_or_else(|| Error::Singular(format!("pivot block {c} is singular")))?;
            if let Some(p) = self.parent[c] {
                let oc = self.off[c];
                w[c] = oc.transpose() * inv[c];
                schur[p] -= w[c] * oc;
            }
        }
        Ok(BlockTreeFactor {
            parent: self.parent.clone(),
            off: self.off.clone(),
            inv,
            w,
        })
    }

    /// Dense copy, for tests.
    pub fn to_dense(&self) -> nalgebra::DMatrix<T> {
        let n = self.len();
        let mut m = nalgebra::DMatrix::zeros(3 * n, 3 * n);
        for b in 0..n {
            m.fixed_view_mut::<3, 3>(3 * b, 3 * b).copy_from(&self.diag[b]);
            if let Some(p) = self.parent[b] {
                m.fixed_view_mut::<3, 3>(3 * b, 3 * p).copy_from(&self.off[b]);
                m.fixed_view_mut::<3, 3>(3 * p, 3 * b)
                    .copy_from(&self.off[b].transpose());
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct BlockTreeFactor<T: ComplexField> {
    parent: Vec<Option<usize>>,
    off: Vec<Matrix3<T>>,
    inv: Vec<Matrix3<T>>,
    w: Vec<Matrix3<T>>,
}

impl<T: ComplexField + Copy> BlockTreeFactor<T> {
    /// Solves in place: `rhs` holds the injections on entry and the block
    /// voltages on return.
    pub fn solve_in_place(&self, rhs: &mut [Vector3<T>]) {
        let n = self.parent.len();
        debug_assert_eq!(rhs.len(), n);
        for c in (1..n).rev() {
            if let Some(p) = self.parent[c] {
                let d = self.w[c] * rhs[c];
                rhs[p] -= d;
            }
        }
        rhs[0] = self.inv[0] * rhs[0];
        for c in 1..n {
            let p = self.parent[c].expect("non-root block has a parent");
            let r = rhs[c] - self.off[c] * rhs[p];
            rhs[c] = self.inv[c] * r;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd_tree(n: usize, rng: &mut ChaCha8Rng) -> BlockTree<f64> {
        let parent: Vec<Option<usize>> = (0..n)
            .map(|c| (c > 0).then(|| rng.random_range(0..c)))
            .collect();
        let mut t = BlockTree::new(parent);
        for c in 1..n {
            let p = t.parent(c).unwrap();
            // a conductance-like branch keeps the system SPD
            let a = Matrix3::from_fn(|_, _| rng.random_range(-0.2..0.2));
            let y = a * a.transpose() + Matrix3::identity() * rng.random_range(0.5..2.0);
            t.add_diag(c, &y);
            t.add_diag(p, &y);
            t.add_coupling(c, p, &(-y));
        }
        for b in 0..n {
            t.add_diag(b, &(Matrix3::identity() * rng.random_range(0.01..0.1)));
        }
        t
    }

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 40] {
            let t = random_spd_tree(n, &mut rng);
            let f = t.factor().unwrap();
            let b: Vec<Vector3<f64>> = (0..n)
                .map(|_| Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)))
                .collect();
            let mut x = b.clone();
            f.solve_in_place(&mut x);
            let dense = t.to_dense();
            let bd = nalgebra::DVector::from_iterator(3 * n, b.iter().flat_map(|v| v.iter().copied()));
            let xd = dense.lu().solve(&bd).unwrap();
            for i in 0..3 * n {
                assert!((x[i / 3][i % 3] - xd[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn singular_pivot_is_reported() {
        let t: BlockTree<f64> = BlockTree::new(vec![None, Some(0)]);
        assert!(matches!(t.factor(), Err(Error::Singular(_))));
    }
}
