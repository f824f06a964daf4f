//! Distribution distances between graph sets: degree, clustering and
//! 4-node orbit statistics under a Gaussian total-variation kernel.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::GraphSample;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Degree,
    Clustering,
    Orbit,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::Degree, Statistic::Clustering, Statistic::Orbit];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MMDConfig {
    pub statistic: Statistic,
    pub sigma: f64,
    pub clustering_bins: usize,
    /// Degree histograms as counts rather than frequencies.
    #[serde(default)]
    pub raw_degree_counts: bool,
}

impl MMDConfig {
    /// Bandwidths: degree 1, clustering 0.1, orbit 30.
    pub fn standard(statistic: Statistic) -> Self {
        let sigma = match statistic {
            Statistic::Degree => 1.0,
            Statistic::Clustering => 0.1,
            Statistic::Orbit => 30.0,
        };
        Self { statistic, sigma, clustering_bins: 100, raw_degree_counts: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.clustering_bins == 0 {
            return Err(invalid("clustering_bins must be at least 1"));
        }
        Ok(())
    }
}

pub const NUM_ORBITS: usize = 15;

/// Per-node counts of the 15 node orbits of connected induced graphlets on
/// 2 to 4 nodes, `n x 15` row-major.
///
/// Orbits: 0 edge; 1-2 path P3 (end, middle); 3 triangle; 4-5 path P4 (end,
/// inner); 6-7 star (leaf, centre); 8 4-cycle; 9-11 paw (pendant, degree 2,
/// degree 3); 12-13 diamond (degree 2, degree 3); 14 K4.
pub fn orbit_counts(g: &GraphSample) -> Vec<[u64; NUM_ORBITS]> {
    let n = g.n();
    let nbrs = g.neighbors();
    let adj = g.to_adjacency();
    let mut counts = vec![[0u64; NUM_ORBITS]; n];
    let mut sub = Vec::with_capacity(4);
    for v in 0..n {
        sub.push(v);
        let ext: Vec<usize> = nbrs[v].iter().copied().filter(|&u| u > v).collect();
        extend(&mut sub, ext, v, &nbrs, &adj, &mut counts);
        sub.pop();
    }
    counts
}

// Enumerates each connected vertex set of size <= 4 exactly once.
fn extend(
    sub: &mut Vec<usize>,
    mut ext: Vec<usize>,
    root: usize,
    nbrs: &[Vec<usize>],
    adj: &[Vec<u8>],
    counts: &mut [[u64; NUM_ORBITS]],
) {
    if sub.len() >= 2 {
        classify(sub, adj, counts);
    }
    if sub.len() == 4 {
        return;
    }
    while let Some(w) = ext.pop() {
        let mut next = ext.clone();
        for &u in &nbrs[w] {
            if u > root && !sub.contains(&u) && !next.contains(&u) && sub.iter().all(|&s| adj[s][u] == 0) {
                next.push(u);
            }
        }
        sub.push(w);
        extend(sub, next, root, nbrs, adj, counts);
        sub.pop();
    }
}

fn classify(sub: &[usize], adj: &[Vec<u8>], counts: &mut [[u64; NUM_ORBITS]]) {
    let k = sub.len();
    let mut deg = [0usize; 4];
    let mut edges = 0;
    for a in 0..k {
        for b in a + 1..k {
            if adj[sub[a]][sub[b]] == 1 {
                deg[a] += 1;
                deg[b] += 1;
                edges += 1;
            }
        }
    }
    let max_deg = deg[..k].iter().copied().max().unwrap_or(0);
    for a in 0..k {
        let d = deg[a];
        let orbit = match (k, edges) {
            (2, _) => 0,
            (3, 2) => if d == 1 { 1 } else { 2 },
            (3, 3) => 3,
            (4, 3) if max_deg == 3 => if d == 3 { 7 } else { 6 },
            (4, 3) => if d == 1 { 4 } else { 5 },
            (4, 4) if max_deg == 2 => 8,
            (4, 4) => match d {
                1 => 9,
                2 => 10,
                _ => 11,
            },
            (4, 5) => if d == 2 { 12 } else { 13 },
            (4, 6) => 14,
            _ => unreachable!("connected graphlet with {k} nodes and {edges} edges"),
        };
        counts[sub[a]][orbit] += 1;
    }
}

/// Summary vector of `g` for one statistic.
pub fn graph_descriptor(g: &GraphSample, cfg: &MMDConfig) -> Vec<f64> {
    let n = g.n().max(1) as f64;
    match cfg.statistic {
        Statistic::Degree => {
            let deg = g.degree_sequence();
            let max = deg.iter().copied().max().unwrap_or(0);
            let mut hist = vec![0.0; max + 1];
            for d in deg {
                hist[d] += 1.0;
            }
            if !cfg.raw_degree_counts {
                hist.iter_mut().for_each(|h| *h /= n);
            }
            hist
        }
        Statistic::Clustering => {
            let bins = cfg.clustering_bins;
            let mut hist = vec![0.0; bins];
            for c in g.local_clustering() {
                let b = ((c * bins as f64).floor() as usize).min(bins - 1);
                hist[b] += 1.0;
            }
            hist.iter_mut().for_each(|h| *h /= n);
            hist
        }
        Statistic::Orbit => {
            let mut mean = vec![0.0; NUM_ORBITS];
            for row in orbit_counts(g) {
                for (m, c) in mean.iter_mut().zip(row) {
                    *m += c as f64;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            mean
        }
    }
}

/// Half the L1 distance.
pub fn total_variation(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(invalid(format!("descriptor lengths differ: {} vs {}", u.len(), v.len())));
    }
    Ok(0.5 * u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `exp(-d_TV(u, v)^2 / (2 sigma^2))`.
pub fn tv_gaussian_kernel(u: &[f64], v: &[f64], sigma: f64) -> Result<f64> {
    let d = total_variation(u, v)?;
    Ok((-d * d / (2.0 * sigma * sigma)).exp())
}

fn pad(sets: &mut [&mut Vec<Vec<f64>>]) {
    let len = sets.iter().flat_map(|s| s.iter().map(Vec::len)).max().unwrap_or(0);
    for s in sets.iter_mut() {
        for d in s.iter_mut() {
            d.resize(len, 0.0);
        }
    }
}

// Summing sorted terms makes the result independent of argument order.
fn mean_kernel(a: &[Vec<f64>], b: &[Vec<f64>], sigma: f64) -> Result<f64> {
    let mut terms = Vec::with_capacity(a.len() * b.len());
    for u in a {
        for v in b {
            terms.push(tv_gaussian_kernel(u, v, sigma)?);
        }
    }
    terms.sort_by(f64::total_cmp);
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Biased MMD between descriptor sets (square root of the clamped MMD^2).
pub fn mmd_descriptors(a: &[Vec<f64>], b: &[Vec<f64>], sigma: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("MMD needs two nonempty sets"));
    }
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    pad(&mut [&mut a, &mut b]);
    let kaa = mean_kernel(&a, &a, sigma)?;
    let kbb = mean_kernel(&b, &b, sigma)?;
    let kab = mean_kernel(&a, &b, sigma)?;
    Ok(((kaa + kbb) - 2.0 * kab).max(0.0).sqrt())
}

pub fn mmd(a: &[GraphSample], b: &[GraphSample], cfg: &MMDConfig) -> Result<f64> {
    cfg.validate()?;
    let da: Vec<_> = a.iter().map(|g| graph_descriptor(g, cfg)).collect();
    let db: Vec<_> = b.iter().map(|g| graph_descriptor(g, cfg)).collect();
    mmd_descriptors(&da, &db, cfg.sigma)
}

mod ratio_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Wire {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Wire::Num(*v).serialize(s)
        } else {
            Wire::Text("inf".into()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Wire::deserialize(d)? {
            Wire::Num(x) => Ok(x),
            Wire::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Wire::Text(t) => Err(serde::de::Error::custom(format!("bad ratio {t:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MMDReport {
    pub mmd_gen_train: f64,
    pub mmd_train_val: f64,
    /// `mmd_gen_train / mmd_train_val`; infinite (written as "inf") when the
    /// denominator is zero.
    #[serde(with = "ratio_serde")]
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl MMDReport {
    pub fn new(mmd_gen_train: f64, mmd_train_val: f64) -> Self {
        if mmd_train_val > 0.0 {
            Self { mmd_gen_train, mmd_train_val, ratio: mmd_gen_train / mmd_train_val, warning: None }
        } else {
            Self {
                mmd_gen_train,
                mmd_train_val,
                ratio: f64::INFINITY,
                warning: Some("train and validation sets are indistinguishable; ratio undefined".into()),
            }
        }
    }
}

/// One row of results: degree, clustering and orbit ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub degree: MMDReport,
    pub clustering: MMDReport,
    pub orbit: MMDReport,
    pub generated: usize,
    pub train: usize,
    pub validation: usize,
}

impl EvaluationReport {
    pub fn get(&self, s: Statistic) -> &MMDReport {
        match s {
            Statistic::Degree => &self.degree,
            Statistic::Clustering => &self.clustering,
            Statistic::Orbit => &self.orbit,
        }
    }
}

pub fn evaluate(generated: &[GraphSample], train: &[GraphSample], validation: &[GraphSample]) -> Result<EvaluationReport> {
    let report = |s: Statistic| -> Result<MMDReport> {
        let cfg = MMDConfig::standard(s);
        let gen_train = mmd(generated, train, &cfg)?;
        let train_val = mmd(train, validation, &cfg)?;
        let r = MMDReport::new(gen_train, train_val);
        if let Some(w) = &r.warning {
            log::warn!("{s:?}: {w}");
        }
        Ok(r)
    };
    Ok(EvaluationReport {
        degree: report(Statistic::Degree)?,
        clustering: report(Statistic::Clustering)?,
        orbit: report(Statistic::Orbit)?,
        generated: generated.len(),
        train: train.len(),
        validation: validation.len(),
    })
}

/// Structural properties targeted by the control experiments.
pub mod controls {
    use crate::datasets::BACKBONE_FEATURE;
    use crate::graph::GraphSample;

    /// Whether `g` contains a clique on `k` nodes.
    pub fn has_clique(g: &GraphSample, k: usize) -> bool {
        if k <= 1 {
            return g.n() >= k;
        }
        let adj = g.to_adjacency();
        let deg = g.degree_sequence();
        let candidates: Vec<usize> = (0..g.n()).filter(|&v| deg[v] + 1 >= k).collect();
        fn grow(adj: &[Vec<u8>], chosen: &mut Vec<usize>, pool: &[usize], k: usize) -> bool {
            if chosen.len() == k {
                return true;
            }
            for (i, &v) in pool.iter().enumerate() {
                if pool.len() - i < k - chosen.len() {
                    return false;
                }
                if chosen.iter().all(|&c| adj[c][v] == 1) {
                    chosen.push(v);
                    if grow(adj, chosen, &pool[i + 1..], k) {
                        return true;
                    }
                    chosen.pop();
                }
            }
            false
        }
        grow(&adj, &mut Vec::new(), &candidates, k)
    }

    /// Largest connected component holds fewer than 60% of the nodes.
    pub fn communities_disjoint(g: &GraphSample) -> bool {
        let largest = g.connected_components().iter().map(Vec::len).max().unwrap_or(0);
        (largest as f64) < 0.6 * g.n() as f64
    }

    /// Whether some `len` backbone nodes induce a simple cycle.
    pub fn has_backbone_ring(g: &GraphSample, len: usize) -> bool {
        let backbone: Vec<usize> = (0..g.n()).filter(|&v| g.node_features()[v] == BACKBONE_FEATURE).collect();
        if len < 3 || backbone.len() < len {
            return false;
        }
        let adj = g.to_adjacency();
        let mut pick = Vec::with_capacity(len);
        fn search(adj: &[Vec<u8>], pool: &[usize], pick: &mut Vec<usize>, len: usize) -> bool {
            if pick.len() == len {
                return induces_cycle(adj, pick);
            }
            for (i, &v) in pool.iter().enumerate() {
                if pool.len() - i < len - pick.len() {
                    break;
                }
                pick.push(v);
                if search(adj, &pool[i + 1..], pick, len) {
                    return true;
                }
                pick.pop();
            }
            false
        }
        search(&adj, &backbone, &mut pick, len)
    }

    fn induces_cycle(adj: &[Vec<u8>], nodes: &[usize]) -> bool {
        let k = nodes.len();
        if nodes.iter().any(|&u| nodes.iter().filter(|&&w| adj[u][w] == 1).count() != 2) {
            return false;
        }
        // Two-regular: a single cycle iff connected.
        let mut seen = vec![false; k];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(a) = stack.pop() {
            for b in 0..k {
                if !seen[b] && adj[nodes[a]][nodes[b]] == 1 {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen.iter().all(|&s| s)
    }
}

#[cfg(test)]
mod tests {
    use super::controls::*;
    use super::*;
    use crate::graph::{num_pairs, EdgeVector};
    use crate::rng::stream_rng;
    use rand::Rng;

    fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> GraphSample {
        let bits = (0..num_pairs(n)).map(|_| rng.gen_bool(p)).collect();
        GraphSample::new(vec![1.0; n], bits).unwrap()
    }

    fn complete(n: usize) -> GraphSample {
        GraphSample::new(vec![1.0; n], EdgeVector::ones(num_pairs(n))).unwrap()
    }

    // Graphlet templates as edge lists with the orbit of each node.
    fn templates() -> Vec<(usize, Vec<[usize; 2]>, Vec<usize>)> {
        vec![
            (2, vec![[0, 1]], vec![0, 0]),
            (3, vec![[0, 1], [1, 2]], vec![1, 2, 1]),
            (3, vec![[0, 1], [1, 2], [0, 2]], vec![3, 3, 3]),
            (4, vec![[0, 1], [1, 2], [2, 3]], vec![4, 5, 5, 4]),
            (4, vec![[0, 1], [0, 2], [0, 3]], vec![7, 6, 6, 6]),
            (4, vec![[0, 1], [1, 2], [2, 3], [3, 0]], vec![8, 8, 8, 8]),
            (4, vec![[0, 1], [1, 2], [2, 0], [2, 3]], vec![10, 10, 11, 9]),
            (4, vec![[0, 1], [1, 2], [2, 3], [3, 0], [0, 2]], vec![13, 12, 13, 12]),
            (4, vec![[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]], vec![14; 4]),
        ]
    }

    fn permutations(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }

    // Every vertex subset of size 2..=4, matched to a template by trying
    // all relabelings.
    fn brute_force_orbits(g: &GraphSample) -> Vec<[u64; NUM_ORBITS]> {
        let n = g.n();
        let adj = g.to_adjacency();
        let mut counts = vec![[0u64; NUM_ORBITS]; n];
        let temps = templates();
        for mask in 0u32..(1 << n) {
            let nodes: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            let k = nodes.len();
            if !(2..=4).contains(&k) {
                continue;
            }
            'outer: for (tk, edges, orbits) in temps.iter().filter(|t| t.0 == k) {
                let mut tadj = vec![vec![0u8; *tk]; *tk];
                for &[a, b] in edges {
                    tadj[a][b] = 1;
                    tadj[b][a] = 1;
                }
                for perm in permutations(k) {
                    let ok = (0..k).all(|a| (0..k).all(|b| a == b || adj[nodes[a]][nodes[b]] == tadj[perm[a]][perm[b]]));
                    if ok {
                        for a in 0..k {
                            counts[nodes[a]][orbits[perm[a]]] += 1;
                        }
                        break 'outer;
                    }
                }
            }
        }
        counts
    }

    #[test]
    fn orbit_counts_match_brute_force() {
        let mut rng = stream_rng(31, 0);
        for _ in 0..500 {
            let n = rng.gen_range(1..=9);
            let g = random_graph(n, rng.gen_range(0.1..0.9), &mut rng);
            assert_eq!(orbit_counts(&g), brute_force_orbits(&g));
        }
        let path = GraphSample::from_edge_list(vec![1.0; 5], &[[0, 1], [1, 2], [2, 3], [3, 4]]).unwrap();
        assert_eq!(orbit_counts(&path), brute_force_orbits(&path));
    }

    #[test]
    fn orbit_counts_known_graphs() {
        let k4 = orbit_counts(&complete(4));
        for row in &k4 {
            assert_eq!(row[0], 3);
            assert_eq!(row[3], 3);
            assert_eq!(row[14], 1);
        }
        let path = GraphSample::from_edge_list(vec![1.0; 5], &[[0, 1], [1, 2], [2, 3], [3, 4]]).unwrap();
        let c = orbit_counts(&path);
        assert_eq!(c[0][4], 1);
        assert_eq!(c[2][5], 2);
        assert_eq!(c[2][2], 1);
        assert_eq!(c[2][1], 2);
    }

    #[test]
    fn descriptor_examples() {
        let deg = graph_descriptor(&complete(4), &MMDConfig::standard(Statistic::Degree));
        assert_eq!(deg, vec![0.0, 0.0, 0.0, 1.0]);
        let clus = graph_descriptor(&complete(3), &MMDConfig::standard(Statistic::Clustering));
        assert_eq!(clus.len(), 100);
        assert_eq!(clus[99], 1.0);
        let raw = MMDConfig { raw_degree_counts: true, ..MMDConfig::standard(Statistic::Degree) };
        assert_eq!(graph_descriptor(&complete(4), &raw), vec![0.0, 0.0, 0.0, 4.0]);
    }

    #[test]
    fn kernel_examples() {
        let u = vec![0.2, 0.3, 0.5];
        assert_eq!(tv_gaussian_kernel(&u, &u, 1.0).unwrap(), 1.0);
        let k = tv_gaussian_kernel(&[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        assert!((k - (-0.5f64).exp()).abs() < 1e-15);
        assert!(tv_gaussian_kernel(&[1.0], &[1.0, 0.0], 1.0).is_err());
        let mut rng = stream_rng(32, 0);
        for _ in 0..100 {
            let a: Vec<f64> = (0..6).map(|_| rng.gen()).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.gen()).collect();
            let (x, y) = (tv_gaussian_kernel(&a, &b, 0.3).unwrap(), tv_gaussian_kernel(&b, &a, 0.3).unwrap());
            assert_eq!(x, y);
            assert!(x > 0.0 && x <= 1.0);
        }
    }

    fn reference_mmd(a: &[Vec<f64>], b: &[Vec<f64>], sigma: f64) -> f64 {
        let k = |u: &Vec<f64>, v: &Vec<f64>| {
            let d: f64 = 0.5 * u.iter().zip(v).map(|(x, y)| (x - y).abs()).sum::<f64>();
            (-d * d / (2.0 * sigma * sigma)).exp()
        };
        let mut s = 0.0;
        for x in a {
            for y in a {
                s += k(x, y) / (a.len() * a.len()) as f64;
            }
        }
        for x in b {
            for y in b {
                s += k(x, y) / (b.len() * b.len()) as f64;
            }
        }
        for x in a {
            for y in b {
                s -= 2.0 * k(x, y) / (a.len() * b.len()) as f64;
            }
        }
        s.max(0.0).sqrt()
    }

    #[test]
    fn mmd_properties() {
        let mut rng = stream_rng(33, 0);
        for _ in 0..50 {
            let set = |rng: &mut crate::rng::StreamRng| -> Vec<Vec<f64>> {
                let m = rng.gen_range(1..8);
                (0..m).map(|_| (0..5).map(|_| rng.gen::<f64>()).collect()).collect()
            };
            let a = set(&mut rng);
            let b = set(&mut rng);
            let sigma = rng.gen_range(0.1..2.0);
            assert_eq!(mmd_descriptors(&a, &a, sigma).unwrap(), 0.0);
            assert_eq!(mmd_descriptors(&a, &b, sigma).unwrap(), mmd_descriptors(&b, &a, sigma).unwrap());
            let direct = reference_mmd(&a, &b, sigma);
            assert!((mmd_descriptors(&a, &b, sigma).unwrap() - direct).abs() < 1e-12);
        }
        let u = vec![1.0, 0.0];
        let v = vec![0.0, 1.0];
        let k = tv_gaussian_kernel(&u, &v, 1.0).unwrap();
        let got = mmd_descriptors(&[u], &[v], 1.0).unwrap();
        assert!((got - (2.0 - 2.0 * k).sqrt()).abs() < 1e-15);
        assert!(mmd_descriptors(&[], &[vec![1.0]], 1.0).is_err());
    }

    #[test]
    fn evaluate_ratio_identities() {
        let mut rng = stream_rng(34, 0);
        let train: Vec<_> = (0..12).map(|_| random_graph(8, 0.3, &mut rng)).collect();
        let val: Vec<_> = (0..12).map(|_| random_graph(8, 0.5, &mut rng)).collect();
        let same = evaluate(&train, &train, &val).unwrap();
        let as_val = evaluate(&val, &train, &val).unwrap();
        for s in Statistic::ALL {
            assert_eq!(same.get(s).ratio, 0.0);
            assert!((as_val.get(s).ratio - 1.0).abs() < 1e-12);
        }
        let degenerate = evaluate(&val, &train, &train).unwrap();
        assert!(degenerate.degree.ratio.is_infinite());
        assert!(degenerate.degree.warning.is_some());
        let json = serde_json::to_string(&degenerate).unwrap();
        assert!(json.contains("\"inf\""));
        let back: EvaluationReport = serde_json::from_str(&json).unwrap();
        assert!(back.degree.ratio.is_infinite());
    }

    #[test]
    fn control_checks() {
        assert!(has_clique(&complete(6), 6));
        assert!(!has_clique(&complete(5), 6));
        let mut rng = stream_rng(35, 0);
        for _ in 0..100 {
            let g = random_graph(9, 0.6, &mut rng);
            let adj = g.to_adjacency();
            let brute = (0u32..1 << 9).filter(|m| m.count_ones() == 4).any(|m| {
                let v: Vec<usize> = (0..9).filter(|&i| m >> i & 1 == 1).collect();
                v.iter().all(|&a| v.iter().all(|&b| a == b || adj[a][b] == 1))
            });
            assert_eq!(has_clique(&g, 4), brute);
        }

        let two = GraphSample::from_edge_list(vec![1.0; 10], &[[0, 1], [1, 2], [5, 6], [6, 7]]).unwrap();
        assert!(communities_disjoint(&two));
        assert!(!communities_disjoint(&complete(10)));

        let mut feats = vec![0.0; 8];
        feats[7] = 1.0;
        let ring = [[0, 1], [1, 2], [2, 3], [3, 4], [4, 5], [5, 0], [0, 7]];
        let g = GraphSample::from_edge_list(feats.clone(), &ring).unwrap();
        assert!(has_backbone_ring(&g, 6));
        let mut chorded = ring.to_vec();
        chorded.push([0, 3]);
        assert!(!has_backbone_ring(&GraphSample::from_edge_list(feats.clone(), &chorded).unwrap(), 6));
        feats[5] = 1.0;
        assert!(!has_backbone_ring(&GraphSample::from_edge_list(feats, &ring).unwrap(), 6));
    }
}
