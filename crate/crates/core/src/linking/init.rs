//! Initial values from `N - 1` interferograms: the temporally adjacent chain
//! and the maximum-coherence spanning tree.

use std::cmp::Ordering;
use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::coherence::PhaseMagnitude;
use crate::error::{Error, Result};
use crate::phase::PhaseHistory;

fn check(pair: &PhaseMagnitude, reference: usize) -> Result<usize> {
    let n = pair.n();
    if n < 2 {
        return Err(Error::TooFewAcquisitions { needed: 2, got: n });
    }
    if reference >= n {
        return Err(Error::IndexOutOfRange { index: reference, len: n });
    }
    Ok(n)
}

/// Chains adjacent interferograms: `theta_i = phi_{i,i+1} + theta_{i+1}`.
pub fn init_tridiagonal(pair: &PhaseMagnitude, reference: usize) -> Result<PhaseHistory> {
    let n = check(pair, reference)?;
    let mut theta = vec![0.0; n];
    for i in (0..reference).rev() {
        theta[i] = pair.phase(i, i + 1) + theta[i + 1];
    }
    for i in reference..n - 1 {
        theta[i + 1] = theta[i] - pair.phase(i, i + 1);
    }
    PhaseHistory::from_raw(&theta, reference)
}

/// Maximum-weight spanning tree of the complete graph (Kruskal).
///
/// Edges are returned as `(i, j)` with `i < j` in the order they were
/// accepted. Equal weights are taken in lexicographic `(i, j)` order.
pub fn maximum_spanning_tree(weights: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = weights.nrows();
    let mut edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    edges.sort_by(|&(a, b), &(c, d)| {
        weights[(c, d)]
            .partial_cmp(&weights[(a, b)])
            .unwrap_or(Ordering::Equal)
            .then((a, b).cmp(&(c, d)))
    });

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for (i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            tree.push((i, j));
            if tree.len() + 1 == n {
                break;
            }
        }
    }
    tree
}

/// Accumulates phases outward from the reference along the spanning tree
/// of maximal total coherence.
pub fn init_spanning_tree(pair: &PhaseMagnitude, reference: usize) -> Result<PhaseHistory> {
    let n = check(pair, reference)?;
    let tree = maximum_spanning_tree(pair.magnitudes());
    let mut adjacency = vec![Vec::new(); n];
    for &(i, j) in &tree {
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    let mut theta = vec![0.0; n];
    let mut seen = vec![false; n];
    seen[reference] = true;
    let mut queue = VecDeque::from([reference]);
    while let Some(k) = queue.pop_front() {
        for &m in &adjacency[k] {
            if !seen[m] {
                // theta_m - theta_k = phi_mk
                theta[m] = pair.phase(m, k) + theta[k];
                seen[m] = true;
                queue.push_back(m);
            }
        }
    }
    PhaseHistory::from_raw(&theta, reference)
}
