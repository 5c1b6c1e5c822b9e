//! Envelope (profile) Cholesky factorization with reverse Cuthill-McKee
//! ordering.
//!
//! Fill-in of `L` stays inside the envelope of the permuted matrix, so only
//! the envelope is stored: row `i` keeps columns `first[i]..=i`.

use super::FlowError;

/// Reverse Cuthill-McKee ordering of a symmetric sparsity pattern given as
/// adjacency lists. Returns `order` with `order[new] = old`.
pub(crate) fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree = |v: usize| adj[v].len();

    while order.len() < n {
        // Component start: unvisited node of minimum degree, refined towards a
        // pseudo-peripheral node by repeated BFS.
        let mut start = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree(v), v))
            .expect("unvisited node exists");
        let mut ecc = 0;
        loop {
            let (far, depth) = farthest(adj, start, &visited);
            if depth <= ecc {
                break;
            }
            ecc = depth;
            start = far;
        }

        let head = order.len();
        visited[start] = true;
        order.push(start);
        let mut cursor = head;
        while cursor < order.len() {
            let v = order[cursor];
            cursor += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree(w), w));
            next.dedup();
            for w in next {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

/// Farthest node from `start` (ties broken by lowest degree then index) and
/// its BFS depth, restricted to unvisited nodes.
fn farthest(adj: &[Vec<usize>], start: usize, visited: &[bool]) -> (usize, usize) {
    let mut depth = vec![usize::MAX; adj.len()];
    depth[start] = 0;
    let mut queue = std::collections::VecDeque::from([start]);
    let mut best = (start, 0);
    while let Some(v) = queue.pop_front() {
        let d = depth[v];
        let better = d > best.1
            || (d == best.1 && (adj[v].len(), v) < (adj[best.0].len(), best.0));
        if better {
            best = (v, d);
        }
        for &w in &adj[v] {
            if !visited[w] && depth[w] == usize::MAX {
                depth[w] = d + 1;
                queue.push_back(w);
            }
        }
    }
    best
}

#[derive(Debug, Clone)]
pub(crate) struct EnvelopeCholesky {
    first: Vec<usize>,
    row_start: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factor a symmetric positive-definite matrix given by its lower-triangle
    /// entries `(row, col, value)` with `col <= row`. Duplicates accumulate.
    pub(crate) fn factor(n: usize, lower: &[(usize, usize, f64)]) -> Result<Self, FlowError> {
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j, _) in lower {
            debug_assert!(j <= i);
            first[i] = first[i].min(j);
        }
        let mut row_start = Vec::with_capacity(n + 1);
        row_start.push(0);
        for i in 0..n {
            row_start.push(row_start[i] + (i - first[i] + 1));
        }
        let mut values = vec![0.0; row_start[n]];
        for &(i, j, v) in lower {
            values[row_start[i] + (j - first[i])] += v;
        }
        let mut chol = EnvelopeCholesky {
            first,
            row_start,
            values,
        };

        for i in 0..n {
            let fi = chol.first[i];
            let diag = chol.at(i, i);
            for j in fi..=i {
                let fj = chol.first[j];
                let k0 = fi.max(fj);
                let ri = chol.row_start[i] - fi;
                let rj = chol.row_start[j] - fj;
                let mut s = chol.values[ri + j];
                for k in k0..j {
                    s -= chol.values[ri + k] * chol.values[rj + k];
                }
                if j < i {
                    s /= chol.values[rj + j];
                } else if s.is_nan() || s <= diag * 1e-13 * n as f64 {
                    return Err(FlowError::Singular { pivot: i, value: s });
                } else {
                    s = s.sqrt();
                }
                chol.values[ri + j] = s;
            }
        }
        Ok(chol)
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.row_start[i] + j - self.first[i]]
    }

    pub(crate) fn dim(&self) -> usize {
        self.first.len()
    }

    /// Stored entries of the factor (the envelope size).
    pub(crate) fn envelope_len(&self) -> usize {
        self.values.len()
    }

    /// Solve `L L^T x = b` in place.
    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.row_start[i]..self.row_start[i + 1]];
            let (off, diag) = row.split_at(i - fi);
            let s: f64 = off.iter().zip(&b[fi..i]).map(|(l, y)| l * y).sum();
            b[i] = (b[i] - s) / diag[0];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.row_start[i]..self.row_start[i + 1]];
            let (off, diag) = row.split_at(i - fi);
            let xi = b[i] / diag[0];
            b[i] = xi;
            for (y, l) in b[fi..i].iter_mut().zip(off) {
                *y -= l * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rcm_is_a_permutation_and_narrows_a_path() {
        // path 0-5-1-4-2-3 scrambled
        let edges = [(0, 5), (5, 1), (1, 4), (4, 2), (2, 3)];
        let mut adj = vec![Vec::new(); 6];
        for (a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let order = reverse_cuthill_mckee(&adj);
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        let mut pos = [0; 6];
        for (new, &old) in order.iter().enumerate() {
            pos[old] = new;
        }
        for (a, b) in edges {
            assert_eq!(pos[a].abs_diff(pos[b]), 1);
        }
    }

    #[test]
    fn rcm_covers_disconnected_components() {
        let adj = vec![vec![1], vec![0], vec![], vec![4], vec![3]];
        let mut order = reverse_cuthill_mckee(&adj);
        order.sort();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn solves_small_spd_system() {
        // [[4,1,0],[1,3,1],[0,1,2]] x = [1,2,3]
        let lower = [
            (0, 0, 4.0),
            (1, 0, 1.0),
            (1, 1, 3.0),
            (2, 1, 1.0),
            (2, 2, 2.0),
        ];
        let chol = EnvelopeCholesky::factor(3, &lower).unwrap();
        let mut b = vec![1.0, 2.0, 3.0];
        chol.solve_in_place(&mut b);
        let r0 = 4.0 * b[0] + b[1] - 1.0;
        let r1 = b[0] + 3.0 * b[1] + b[2] - 2.0;
        let r2 = b[1] + 2.0 * b[2] - 3.0;
        for r in [r0, r1, r2] {
            assert!(r.abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let lower = [(0, 0, 1.0), (1, 0, -1.0), (1, 1, 1.0)];
        assert!(matches!(
            EnvelopeCholesky::factor(2, &lower),
            Err(FlowError::Singular { pivot: 1, .. })
        ));
    }
}
