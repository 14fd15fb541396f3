//! Natural and horizontal visibility graphs and their fixed statistical
//! summary.

use std::io::Write;
use std::path::Path;

use crate::embed::EmbeddingVector;
use crate::error::{Error, Result};
use crate::preprocess::Window;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisibilityKind {
    Natural,
    Horizontal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Undirected graph on sample indices; edges stored with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityGraph {
    pub n: usize,
    pub kind: VisibilityKind,
    pub edges: Vec<Edge>,
}

impl VisibilityGraph {
    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.i, e.j)).collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for e in &self.edges {
            deg[e.i] += 1;
            deg[e.j] += 1;
        }
        deg
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Edge list as `i,j,weight` CSV.
    pub fn write_edge_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = Vec::new();
        writeln!(text, "i,j,weight").expect("in-memory write");
        for e in &self.edges {
            writeln!(text, "{},{},{}", e.i, e.j, e.weight).expect("in-memory write");
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// `j` sees `i` iff every interior sample lies strictly below the chord. For a
/// fixed left end this reduces to the chord slope strictly exceeding every
/// slope from `i` to an interior sample, so one sweep per `i` suffices. The
/// strongest blocker is rechecked with the chord-height form.
pub fn nvg_build(x: &[f64]) -> VisibilityGraph {
    let n = x.len();
    let mut edges = Vec::new();
    for i in 0..n {
        let mut blocker: Option<(usize, f64)> = None;
        for j in (i + 1)..n {
            let slope = (x[j] - x[i]) / (j - i) as f64;
            let visible = match blocker {
                None => true,
                Some((k, max_slope)) => {
                    slope > max_slope && x[k] < x[i] + slope * (k - i) as f64
                }
            };
            if visible {
                edges.push(Edge {
                    i,
                    j,
                    weight: slope.abs(),
                });
            }
            if blocker.is_none_or(|(_, m)| slope > m) {
                blocker = Some((j, slope));
            }
        }
    }
    VisibilityGraph {
        n,
        kind: VisibilityKind::Natural,
        edges,
    }
}

/// `j` sees `i` iff every interior sample is strictly below both endpoints.
pub fn hvg_build(x: &[f64]) -> VisibilityGraph {
    let n = x.len();
    let mut edges = Vec::new();
    for i in 0..n {
        let mut interior_max = f64::NEG_INFINITY;
        for j in (i + 1)..n {
            if interior_max < x[i] && interior_max < x[j] {
                edges.push(Edge { i, j, weight: 1.0 });
            }
            interior_max = interior_max.max(x[j]);
            if interior_max >= x[i] {
                break;
            }
        }
    }
    edges.sort_by_key(|e| (e.i, e.j));
    VisibilityGraph {
        n,
        kind: VisibilityKind::Horizontal,
        edges,
    }
}

pub const GRAPH_FEATURES: usize = 7;

/// `[density, mean degree, std degree, max degree, transitivity,
/// degree assortativity, mean edge weight]`.
pub fn graph_features(g: &VisibilityGraph) -> [f64; GRAPH_FEATURES] {
    let n = g.n;
    let m = g.edges.len();
    let deg = g.degrees();
    let density = if n >= 2 {
        2.0 * m as f64 / (n as f64 * (n - 1) as f64)
    } else {
        0.0
    };
    let (mean_deg, std_deg, max_deg) = if n > 0 {
        let mean = deg.iter().sum::<usize>() as f64 / n as f64;
        let var = deg.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        (mean, var.sqrt(), *deg.iter().max().unwrap_or(&0) as f64)
    } else {
        (0.0, 0.0, 0.0)
    };

    let adj = g.adjacency();
    let mut triangles = 0usize;
    for e in &g.edges {
        // count each triangle once via its smallest two vertices
        let (a, b) = (&adj[e.i], &adj[e.j]);
        let (mut p, mut q) = (0, 0);
        while p < a.len() && q < b.len() {
            match a[p].cmp(&b[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    if a[p] > e.j {
                        triangles += 1;
                    }
                    p += 1;
                    q += 1;
                }
            }
        }
    }
    let triads: usize = deg.iter().map(|&d| d * d.saturating_sub(1) / 2).sum();
    let transitivity = if triads > 0 {
        3.0 * triangles as f64 / triads as f64
    } else {
        0.0
    };

    let assortativity = degree_assortativity(&g.edges, &deg);
    let mean_weight = if m > 0 {
        g.edges.iter().map(|e| e.weight).sum::<f64>() / m as f64
    } else {
        0.0
    };
    [
        density,
        mean_deg,
        std_deg,
        max_deg,
        transitivity,
        assortativity,
        mean_weight,
    ]
}

/// Pearson correlation of endpoint degrees over both orientations of every
/// edge; zero when either side has no variance.
fn degree_assortativity(edges: &[Edge], deg: &[usize]) -> f64 {
    if edges.is_empty() {
        return 0.0;
    }
    let count = 2.0 * edges.len() as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut cross = 0.0;
    for e in edges {
        let (a, b) = (deg[e.i] as f64, deg[e.j] as f64);
        sum += a + b;
        sum_sq += a * a + b * b;
        cross += 2.0 * a * b;
    }
    let mean = sum / count;
    let var = sum_sq / count - mean * mean;
    if var <= 1e-12 * (1.0 + mean * mean) {
        return 0.0;
    }
    ((cross / count - mean * mean) / var).clamp(-1.0, 1.0)
}

/// Per channel, the natural visibility graph summary; `7 C` values.
pub fn graph_embed(w: &Window) -> EmbeddingVector {
    let mut out = Vec::with_capacity(GRAPH_FEATURES * w.n_channels());
    for c in 0..w.n_channels() {
        out.extend(graph_features(&nvg_build(&w.channel(c))));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256StarStar;
    use ndarray::Array2;
    use std::collections::BTreeSet;

    fn graph(n: usize, pairs: &[(usize, usize)]) -> VisibilityGraph {
        VisibilityGraph {
            n,
            kind: VisibilityKind::Horizontal,
            edges: pairs.iter().map(|&(i, j)| Edge { i, j, weight: 1.0 }).collect(),
        }
    }

    fn brute_nvg(x: &[f64]) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for i in 0..x.len() {
            for j in (i + 1)..x.len() {
                let ok = ((i + 1)..j).all(|k| {
                    x[k] < x[i] + (x[j] - x[i]) / (j - i) as f64 * (k - i) as f64
                });
                if ok {
                    out.insert((i, j));
                }
            }
        }
        out
    }

    fn set(g: &VisibilityGraph) -> BTreeSet<(usize, usize)> {
        g.edge_pairs().into_iter().collect()
    }

    #[test]
    fn nvg_hand_cases() {
        assert_eq!(nvg_build(&[1.0, 2.0, 3.0, 4.0]).edge_pairs(), vec![(0, 1), (1, 2), (2, 3)]);
        let g = nvg_build(&[3.0, 1.0, 2.0]);
        assert_eq!(set(&g), [(0, 1), (0, 2), (1, 2)].into_iter().collect());
        let w02 = g.edges.iter().find(|e| (e.i, e.j) == (0, 2)).unwrap().weight;
        assert_eq!(w02, 0.5);
    }

    #[test]
    fn hvg_hand_cases() {
        assert_eq!(set(&hvg_build(&[2.0, 1.0, 3.0])), [(0, 1), (0, 2), (1, 2)].into_iter().collect());
        assert_eq!(hvg_build(&[1.0, 2.0, 3.0]).edge_pairs(), vec![(0, 1), (1, 2)]);
        // equal heights block
        assert_eq!(hvg_build(&[2.0, 2.0, 2.0]).edge_pairs(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn random_graphs_match_brute_force_and_contain_hvg() {
        let mut r = Xoshiro256StarStar::seed_from_u64(1);
        for _ in 0..200 {
            let n = 2 + r.below(63);
            let x: Vec<f64> = (0..n).map(|_| r.normal()).collect();
            let nvg = set(&nvg_build(&x));
            assert_eq!(nvg, brute_nvg(&x));
            let hvg = set(&hvg_build(&x));
            assert!(hvg.is_subset(&nvg));
            for i in 0..n - 1 {
                assert!(nvg.contains(&(i, i + 1)) && hvg.contains(&(i, i + 1)));
            }
        }
    }

    #[test]
    fn nvg_affine_invariance() {
        let mut r = Xoshiro256StarStar::seed_from_u64(2);
        for _ in 0..50 {
            // dyadic values keep alpha x + beta exact
            let x: Vec<f64> = (0..40).map(|_| r.below(64) as f64 / 8.0).collect();
            let y: Vec<f64> = x.iter().map(|v| 4.0 * v - 3.0).collect();
            assert_eq!(set(&nvg_build(&x)), set(&nvg_build(&y)));
        }
    }

    #[test]
    fn path_graph_features() {
        let f = graph_features(&graph(4, &[(0, 1), (1, 2), (2, 3)]));
        assert_eq!(f[0], 0.5);
        assert_eq!(f[1], 1.5);
        assert_eq!(f[3], 2.0);
        assert_eq!(f[4], 0.0);
        assert!((f[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn triangle_features() {
        let f = graph_features(&graph(3, &[(0, 1), (0, 2), (1, 2)]));
        assert_eq!(f[0], 1.0);
        assert_eq!(f[4], 1.0);
        assert_eq!(f[5], 0.0);
        assert_eq!(f[6], 1.0);
    }

    #[test]
    fn star_assortativity_is_negative_one() {
        let f = graph_features(&graph(4, &[(0, 1), (0, 2), (0, 3)]));
        assert!((f[5] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangles_match_brute_force_triads() {
        let mut r = Xoshiro256StarStar::seed_from_u64(3);
        for _ in 0..30 {
            let x: Vec<f64> = (0..32).map(|_| r.normal()).collect();
            let g = nvg_build(&x);
            let adj = set(&g);
            let has = |a: usize, b: usize| adj.contains(&(a.min(b), a.max(b)));
            let mut tri = 0;
            let mut triads = 0;
            for a in 0..32 {
                for b in (a + 1)..32 {
                    for c in (b + 1)..32 {
                        let k = [has(a, b), has(b, c), has(a, c)].iter().filter(|&&e| e).count();
                        if k == 3 {
                            tri += 1;
                        }
                    }
                }
            }
            for centre in 0..32 {
                let d = (0..32).filter(|&o| o != centre && has(centre, o)).count();
                triads += d * (d.saturating_sub(1)) / 2;
            }
            let f = graph_features(&g);
            assert!((f[4] - 3.0 * tri as f64 / triads as f64).abs() < 1e-12);
        }
    }

    fn window(cols: Vec<Vec<f64>>) -> Window {
        let tau = cols[0].len();
        Window {
            source_id: "w".into(),
            start: 0,
            values: Array2::from_shape_fn((tau, cols.len()), |(t, c)| cols[c][t]),
            label: 0,
        }
    }

    #[test]
    fn graph_embed_dimension_and_constant_channel() {
        let v = graph_embed(&window(vec![vec![0.0; 10], vec![1.0; 10]]));
        assert_eq!(v.len(), 14);
        assert!((v[0] - 2.0 / 10.0).abs() < 1e-12);
    }

    #[test]
    fn amplitude_scaling_only_changes_weight_feature() {
        let mut r = Xoshiro256StarStar::seed_from_u64(4);
        for _ in 0..20 {
            let x: Vec<f64> = (0..32).map(|_| r.below(1024) as f64 / 64.0).collect();
            let alpha = 2.0;
            let a = graph_embed(&window(vec![x.clone()]));
            let b = graph_embed(&window(vec![x.iter().map(|v| v * alpha).collect()]));
            for k in 0..6 {
                assert_eq!(a[k], b[k]);
            }
            assert!((b[6] - alpha * a[6]).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_csv_dump() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        nvg_build(&[3.0, 1.0, 2.0]).write_edge_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, "i,j,weight\n0,1,2\n0,2,0.5\n1,2,1\n");
    }
}
