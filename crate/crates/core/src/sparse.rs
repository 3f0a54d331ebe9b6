//! Sparse symmetric storage and an envelope (skyline) `L D Lᵀ` factorization
//! under a reverse Cuthill–McKee ordering.
//!
//! Frame stiffness matrices are banded after RCM reordering, so the envelope
//! of the factor stays close to the band and fill is confined to it.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FactorError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("non-finite entry encountered at row {0}")]
    NonFinite(usize),
}

/// Symmetric matrix in compressed-row form holding both triangles.
#[derive(Clone, Debug)]
pub struct SymmetricCsr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SymmetricCsr {
    /// Build from `(row, col, value)` triplets of the full matrix; duplicates
    /// are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i},{j}) outside {n}x{n}");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SymmetricCsr { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

/// Reverse Cuthill–McKee ordering of the matrix graph. `perm[k]` is the
/// original index placed at position `k`.
pub fn reverse_cuthill_mckee(a: &SymmetricCsr) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(j, _)| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(a, seed, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a.row(v).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
            nbrs.sort_by_key(|&j| (degree[j], j));
            for j in nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(a: &SymmetricCsr, root: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; a.dim()];
    level[root] = Some(0);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let l = level[v].unwrap();
        for (j, _) in a.row(v) {
            if level[j].is_none() {
                level[j] = Some(l + 1);
                queue.push_back(j);
            }
        }
    }
    level
}

fn pseudo_peripheral(a: &SymmetricCsr, seed: usize, degree: &[usize]) -> usize {
    let mut root = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(a, root);
        let max = levels.iter().flatten().copied().max().unwrap_or(0);
        if max <= ecc && root != seed {
            break;
        }
        ecc = max;
        let next = (0..a.dim())
            .filter(|&i| levels[i] == Some(max))
            .min_by_key(|&i| (degree[i], i))
            .unwrap_or(root);
        if next == root {
            break;
        }
        root = next;
    }
    root
}

/// `L D Lᵀ` factor of a permuted symmetric positive-definite matrix, stored
/// row-wise over each row's envelope. `L` is unit lower triangular and its
/// diagonal slots hold `D`. No square roots are taken, so scaling the matrix
/// by a power of two scales `D` and the solution exactly.
#[derive(Clone, Debug)]
pub struct EnvelopeLdl {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeLdl {
    pub fn factor(a: &SymmetricCsr) -> Result<Self, FactorError> {
        let perm = reverse_cuthill_mckee(a);
        Self::factor_with(a, perm)
    }

    pub fn factor_with(a: &SymmetricCsr, perm: Vec<usize>) -> Result<Self, FactorError> {
        let n = a.dim();
        let mut inv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (i, f) in first.iter_mut().enumerate() {
            for (j, _) in a.row(perm[i]) {
                *f = (*f).min(inv[j]);
            }
        }
        let mut offset = vec![0; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut values = vec![0.0; offset[n]];
        for i in 0..n {
            for (j, v) in a.row(perm[i]) {
                let jj = inv[j];
                if jj <= i {
                    values[offset[i] + jj - first[i]] = v;
                }
            }
        }
        let scale = (0..n).map(|i| values[offset[i + 1] - 1].abs()).fold(0.0, f64::max);
        for i in 0..n {
            let fi = first[i];
            // row i first holds t_j = L_ij D_j, converted to L_ij below
            for j in fi..i {
                let fj = first[j];
                let mut t = values[offset[i] + j - fi];
                for k in fi.max(fj)..j {
                    t -= values[offset[i] + k - fi] * values[offset[j] + k - fj];
                }
                values[offset[i] + j - fi] = t;
            }
            let mut d = values[offset[i + 1] - 1];
            for k in fi..i {
                let t = values[offset[i] + k - fi];
                let l = t / values[offset[k + 1] - 1];
                values[offset[i] + k - fi] = l;
                d -= t * l;
            }
            if !d.is_finite() {
                return Err(FactorError::NonFinite(perm[i]));
            }
            if d <= scale * 1e-14 {
                return Err(FactorError::NotPositiveDefinite { row: perm[i], pivot: d });
            }
            values[offset[i + 1] - 1] = d;
        }
        Ok(EnvelopeLdl { n, perm, first, offset, values })
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = (0..n).map(|k| b[self.perm[k]]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.values[self.offset[i] + k - fi] * y[k];
            }
            y[i] = s;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi /= self.values[self.offset[i + 1] - 1];
        }
        for i in (0..n).rev() {
            let yi = y[i];
            let fi = self.first[i];
            for k in fi..i {
                y[k] -= self.values[self.offset[i] + k - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.perm[k]] = y[k];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut impl Rng) -> SymmetricCsr {
        // Sparse diagonally dominant matrix with random off-diagonal pattern.
        let mut t = Vec::new();
        let mut diag = vec![1.0; n];
        for i in 0..n {
            for _ in 0..3 {
                let j = rng.random_range(0..n);
                if j != i {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    t.push((i, j, v));
                    t.push((j, i, v));
                    diag[i] += v.abs();
                    diag[j] += v.abs();
                }
            }
        }
        for (i, d) in diag.into_iter().enumerate() {
            t.push((i, i, d));
        }
        SymmetricCsr::from_triplets(n, t)
    }

    #[test]
    fn solves_random_spd_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 7, 40, 120] {
            let a = random_spd(n, &mut rng);
            let x_true: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = a.mul_vec(&x_true);
            let f = EnvelopeLdl::factor(&a).unwrap();
            let x = f.solve(&b);
            for (u, v) in x.iter().zip(&x_true) {
                assert!((u - v).abs() < 1e-10, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn doubling_the_matrix_halves_the_solution_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(60, &mut rng);
        let b: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let doubled = SymmetricCsr { vals: a.vals.iter().map(|v| 2.0 * v).collect(), ..a.clone() };
        let x = EnvelopeLdl::factor(&a).unwrap().solve(&b);
        let y = EnvelopeLdl::factor(&doubled).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert_eq!(*u, 2.0 * v);
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_spd(50, &mut rng);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = SymmetricCsr::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(EnvelopeLdl::factor(&a), Err(FactorError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn duplicate_triplets_sum() {
        let a = SymmetricCsr::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 4.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }
}
