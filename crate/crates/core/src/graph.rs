//! Undirected simple graphs stored as binary edge vectors.
//!
//! Edge `(i, j)` with `i < j` lives at position `i*n - i(i+1)/2 + (j - i - 1)`,
//! the row-major order of the strict upper triangle.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Number of unordered node pairs, `n choose 2`.
pub fn num_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of edge `(i, j)` in the upper-triangular order. Requires `i < j < n`.
pub fn edge_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if i >= j || j >= n {
        return Err(invalid(format!("edge ({i}, {j}) invalid for n = {n}")));
    }
    Ok(pair_index(i, j, n))
}

#[inline]
pub(crate) fn pair_index(i: usize, j: usize, n: usize) -> usize {
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Iterates `(i, j)` pairs in edge-vector order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Binary edge-presence vector.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct EdgeVector(Vec<bool>);

impl EdgeVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![true; len])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, idx: usize) -> bool {
        self.0[idx]
    }

    pub fn set(&mut self, idx: usize, value: bool) {
        self.0[idx] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn hamming(&self, other: &EdgeVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl FromIterator<bool> for EdgeVector {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// A graph being diffused: fixed nodes with scalar features, mutable edges.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSample {
    n: usize,
    node_features: Vec<f64>,
    edges: EdgeVector,
}

impl GraphSample {
    pub fn new(node_features: Vec<f64>, edges: EdgeVector) -> Result<Self> {
        let n = node_features.len();
        if edges.len() != num_pairs(n) {
            return Err(invalid(format!(
                "edge vector has length {} but n = {n} needs {}",
                edges.len(),
                num_pairs(n)
            )));
        }
        Ok(Self { n, node_features, edges })
    }

    /// Graph with `n` nodes, unit features and no edges.
    pub fn empty(n: usize) -> Self {
        Self { n, node_features: vec![1.0; n], edges: EdgeVector::zeros(num_pairs(n)) }
    }

    pub fn from_edge_list(node_features: Vec<f64>, edges: &[[usize; 2]]) -> Result<Self> {
        let n = node_features.len();
        let mut bits = EdgeVector::zeros(num_pairs(n));
        for &[a, b] in edges {
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            bits.set(edge_index(i, j, n)?, true);
        }
        Self::new(node_features, bits)
    }

    /// Builds a graph from a symmetric 0/1 matrix; only the upper triangle is read.
    pub fn from_adjacency(node_features: Vec<f64>, adj: &[Vec<u8>]) -> Result<Self> {
        let n = node_features.len();
        if adj.len() != n || adj.iter().any(|r| r.len() != n) {
            return Err(invalid("adjacency shape does not match node count"));
        }
        let bits = pairs(n).map(|(i, j)| adj[i][j] != 0).collect();
        Self::new(node_features, bits)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node_features(&self) -> &[f64] {
        &self.node_features
    }

    pub fn edges(&self) -> &EdgeVector {
        &self.edges
    }

    pub fn edges_mut(&mut self) -> &mut EdgeVector {
        &mut self.edges
    }

    /// Same nodes, different edges.
    pub fn with_edges(&self, edges: EdgeVector) -> Result<Self> {
        Self::new(self.node_features.clone(), edges)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges.get(pair_index(a, b, self.n))
    }

    pub fn num_edges(&self) -> usize {
        self.edges.count_ones()
    }

    pub fn edge_list(&self) -> Vec<[usize; 2]> {
        pairs(self.n).zip(self.edges.iter()).filter(|(_, b)| *b).map(|((i, j), _)| [i, j]).collect()
    }

    pub fn to_adjacency(&self) -> Vec<Vec<u8>> {
        let mut adj = vec![vec![0u8; self.n]; self.n];
        for ((i, j), b) in pairs(self.n).zip(self.edges.iter()) {
            if b {
                adj[i][j] = 1;
                adj[j][i] = 1;
            }
        }
        adj
    }

    /// Adjacency lists, neighbors in increasing order.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.n];
        for ((i, j), b) in pairs(self.n).zip(self.edges.iter()) {
            if b {
                nbrs[i].push(j);
                nbrs[j].push(i);
            }
        }
        for list in &mut nbrs {
            list.sort_unstable();
        }
        nbrs
    }

    pub fn degree_sequence(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for ((i, j), b) in pairs(self.n).zip(self.edges.iter()) {
            if b {
                deg[i] += 1;
                deg[j] += 1;
            }
        }
        deg
    }

    /// Local clustering coefficient per node; zero below degree two.
    pub fn local_clustering(&self) -> Vec<f64> {
        let nbrs = self.neighbors();
        nbrs.iter()
            .map(|list| {
                let d = list.len();
                if d < 2 {
                    return 0.0;
                }
                let mut tri = 0usize;
                for (a, &u) in list.iter().enumerate() {
                    for &v in &list[a + 1..] {
                        if self.has_edge(u, v) {
                            tri += 1;
                        }
                    }
                }
                tri as f64 / (d * (d - 1) / 2) as f64
            })
            .collect()
    }

    /// Node sets of the connected components, each sorted, ordered by smallest node.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let nbrs = self.neighbors();
        let mut seen = vec![false; self.n];
        let mut comps = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &v in &nbrs[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn to_record(&self) -> GraphRecord {
        GraphRecord { n: self.n, node_features: self.node_features.clone(), edge_list: self.edge_list() }
    }
}

/// Interchange form: `{n, node_features, edge_list}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub n: usize,
    pub node_features: Vec<f64>,
    pub edge_list: Vec<[usize; 2]>,
}

impl TryFrom<GraphRecord> for GraphSample {
    type Error = crate::error::Error;

    fn try_from(r: GraphRecord) -> Result<Self> {
        if r.node_features.len() != r.n {
            return Err(invalid(format!("record has n = {} but {} features", r.n, r.node_features.len())));
        }
        for &[a, b] in &r.edge_list {
            if a == b {
                return Err(invalid(format!("self-edge ({a}, {a}) not representable")));
            }
        }
        GraphSample::from_edge_list(r.node_features, &r.edge_list)
    }
}

impl From<&GraphSample> for GraphRecord {
    fn from(g: &GraphSample) -> Self {
        g.to_record()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> GraphSample {
        let bits = (0..num_pairs(n)).map(|_| rng.gen_bool(p)).collect();
        GraphSample::new(vec![1.0; n], bits).unwrap()
    }

    #[test]
    fn index_endpoints() {
        assert_eq!(edge_index(0, 1, 4).unwrap(), 0);
        assert_eq!(edge_index(2, 3, 4).unwrap(), 5);
        assert!(edge_index(1, 1, 4).is_err());
        assert!(edge_index(2, 1, 4).is_err());
        assert!(edge_index(0, 4, 4).is_err());
    }

    #[test]
    fn index_is_bijective_up_to_64() {
        for n in 0..=64 {
            let mut seen = vec![false; num_pairs(n)];
            for (k, (i, j)) in pairs(n).enumerate() {
                let idx = edge_index(i, j, n).unwrap();
                assert_eq!(idx, k);
                assert!(!seen[idx]);
                seen[idx] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn adjacency_cases() {
        let g = GraphSample::empty(5);
        assert!(g.to_adjacency().iter().flatten().all(|&a| a == 0));
        let k4 = GraphSample::new(vec![1.0; 4], EdgeVector::ones(6)).unwrap();
        let adj = k4.to_adjacency();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(adj[i][j], u8::from(i != j));
            }
        }
    }

    #[test]
    fn adjacency_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let n = rng.gen_range(0..12);
            let g = random_graph(n, rng.gen(), &mut rng);
            let back = GraphSample::from_adjacency(g.node_features().to_vec(), &g.to_adjacency()).unwrap();
            assert_eq!(back, g);
        }
    }

    #[test]
    fn degree_cases() {
        assert!(GraphSample::empty(6).degree_sequence().iter().all(|&d| d == 0));
        let k5 = GraphSample::new(vec![1.0; 5], EdgeVector::ones(10)).unwrap();
        assert!(k5.degree_sequence().iter().all(|&d| d == 4));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let n = rng.gen_range(1..15);
            let g = random_graph(n, 0.4, &mut rng);
            assert_eq!(g.degree_sequence().iter().sum::<usize>(), 2 * g.num_edges());
        }
    }

    #[test]
    fn clustering_cases() {
        let tri = GraphSample::new(vec![1.0; 3], EdgeVector::ones(3)).unwrap();
        assert_eq!(tri.local_clustering(), vec![1.0; 3]);
        let star = GraphSample::from_edge_list(vec![1.0; 5], &[[0, 1], [0, 2], [0, 3], [0, 4]]).unwrap();
        assert_eq!(star.local_clustering(), vec![0.0; 5]);
    }

    fn brute_clustering(g: &GraphSample) -> Vec<f64> {
        let adj = g.to_adjacency();
        let n = g.n();
        (0..n)
            .map(|i| {
                let d: usize = adj[i].iter().map(|&a| a as usize).sum();
                if d < 2 {
                    return 0.0;
                }
                let mut tri = 0;
                for j in 0..n {
                    for k in 0..n {
                        if j < k && adj[i][j] == 1 && adj[i][k] == 1 && adj[j][k] == 1 {
                            tri += 1;
                        }
                    }
                }
                tri as f64 / (d * (d - 1) / 2) as f64
            })
            .collect()
    }

    #[test]
    fn clustering_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let n = rng.gen_range(1..=10);
            let g = random_graph(n, rng.gen(), &mut rng);
            assert_eq!(g.local_clustering(), brute_clustering(&g));
        }
        // exhaustive over all graphs on 5 nodes
        for mask in 0u32..(1 << 10) {
            let bits = (0..10).map(|k| (mask >> k) & 1 == 1).collect();
            let g = GraphSample::new(vec![1.0; 5], bits).unwrap();
            assert_eq!(g.local_clustering(), brute_clustering(&g));
        }
    }

    #[test]
    fn record_rejects_bad_input() {
        let bad = GraphRecord { n: 3, node_features: vec![1.0; 2], edge_list: vec![] };
        assert!(GraphSample::try_from(bad).is_err());
        let bad = GraphRecord { n: 3, node_features: vec![1.0; 3], edge_list: vec![[1, 1]] };
        assert!(GraphSample::try_from(bad).is_err());
        let bad = GraphRecord { n: 3, node_features: vec![1.0; 3], edge_list: vec![[0, 3]] };
        assert!(GraphSample::try_from(bad).is_err());
    }

    proptest! {
        #[test]
        fn record_round_trip(n in 0usize..12, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(n, 0.5, &mut rng);
            let json = serde_json::to_string(&g.to_record()).unwrap();
            let back = GraphSample::try_from(serde_json::from_str::<GraphRecord>(&json).unwrap()).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
