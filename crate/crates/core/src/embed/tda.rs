//! Zero-dimensional sublevel persistence, diagram summaries and diagram
//! distances.

use std::io::Write;
use std::path::Path;

use crate::embed::graph::{graph_features, hvg_build, GRAPH_FEATURES};
use crate::embed::EmbeddingVector;
use crate::error::{Error, Result};
use crate::preprocess::Window;

pub const DEFAULT_GRID_SIZE: usize = 8;
/// Largest combined pair count accepted by the exact matching solvers.
pub const MATCHING_CAP: usize = 64;
const SCALAR_FEATURES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair {
    pub birth: f64,
    pub death: f64,
    pub essential: bool,
}

impl PersistencePair {
    pub fn finite(birth: f64, death: f64) -> Self {
        PersistencePair {
            birth,
            death,
            essential: false,
        }
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    /// L-infinity distance to the diagonal.
    fn diag_dist(&self) -> f64 {
        0.5 * self.persistence()
    }

    fn linf(&self, o: &PersistencePair) -> f64 {
        (self.birth - o.birth).abs().max((self.death - o.death).abs())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub pairs: Vec<PersistencePair>,
}

impl PersistenceDiagram {
    pub fn new(pairs: Vec<PersistencePair>) -> Self {
        PersistenceDiagram { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn essential(&self) -> Option<&PersistencePair> {
        self.pairs.iter().find(|p| p.essential)
    }

    /// `birth,death,essential` CSV.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = Vec::new();
        writeln!(text, "birth,death,essential").expect("in-memory write");
        for p in &self.pairs {
            writeln!(text, "{},{},{}", p.birth, p.death, p.essential).expect("in-memory write");
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

struct UnionFind {
    parent: Vec<usize>,
    // oldest (value, index) minimum of each root
    oldest: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }
}

fn older(x: &[f64], a: usize, b: usize) -> bool {
    x[a] < x[b] || (x[a] == x[b] && a < b)
}

/// Elder-rule persistence of the sublevel filtration of `x` over the path
/// graph. Zero-persistence merges are not reported; the surviving component
/// is closed at the global maximum and flagged essential.
pub fn sublevel_persistence(x: &[f64]) -> PersistenceDiagram {
    let n = x.len();
    if n == 0 {
        return PersistenceDiagram::default();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut uf = UnionFind {
        parent: (0..n).collect(),
        oldest: (0..n).collect(),
    };
    let mut active = vec![false; n];
    let mut pairs = Vec::new();
    for &i in &order {
        active[i] = true;
        let neighbours = [i.checked_sub(1), (i + 1 < n).then_some(i + 1)];
        for j in neighbours.into_iter().flatten().filter(|&j| active[j]) {
            let (ri, rj) = (uf.find(i), uf.find(j));
            if ri == rj {
                continue;
            }
            let (mi, mj) = (uf.oldest[ri], uf.oldest[rj]);
            let (survivor, dying) = if older(x, mi, mj) { (ri, rj) } else { (rj, ri) };
            let birth = x[uf.oldest[dying]];
            if x[i] > birth {
                pairs.push(PersistencePair::finite(birth, x[i]));
            }
            uf.parent[dying] = survivor;
        }
    }
    let lo = x[order[0]];
    let hi = x[order[n - 1]];
    pairs.push(PersistencePair {
        birth: lo,
        death: hi,
        essential: true,
    });
    PersistenceDiagram { pairs }
}

pub fn total_persistence(d: &PersistenceDiagram) -> f64 {
    d.pairs.iter().map(PersistencePair::persistence).sum()
}

pub fn max_persistence(d: &PersistenceDiagram) -> f64 {
    d.pairs
        .iter()
        .map(PersistencePair::persistence)
        .fold(0.0, f64::max)
}

pub fn persistence_entropy(d: &PersistenceDiagram) -> f64 {
    let total = total_persistence(d);
    if total <= 0.0 {
        return 0.0;
    }
    -d.pairs
        .iter()
        .map(|p| p.persistence() / total)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Number of pairs alive at each grid point, with `b <= x < d`.
pub fn betti_curve(d: &PersistenceDiagram, grid: &[f64]) -> Vec<usize> {
    grid.iter()
        .map(|&x| d.pairs.iter().filter(|p| p.birth <= x && x < p.death).count())
        .collect()
}

fn kth_tent(d: &PersistenceDiagram, k: usize, x: f64, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(
        d.pairs
            .iter()
            .map(|p| (x - p.birth).min(p.death - x).max(0.0)),
    );
    if buf.len() < k {
        return 0.0;
    }
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    *kth
}

/// Lp norm of the k-th landscape function. Tent edges only cross at births,
/// deaths and `(b_i + d_j) / 2`, so the k-th level is linear between those
/// breakpoints and is integrated exactly there.
pub fn landscape_norm(d: &PersistenceDiagram, k: usize, p: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("landscape level must be at least 1".into()));
    }
    if p != 1 && p != 2 {
        return Err(Error::Config(format!("landscape norm p must be 1 or 2, got {p}")));
    }
    let live: Vec<PersistencePair> = d.pairs.iter().copied().filter(|q| q.persistence() > 0.0).collect();
    if live.len() < k {
        return Ok(0.0);
    }
    let sub = PersistenceDiagram::new(live);
    let mut xs: Vec<f64> = Vec::with_capacity(sub.len() * (sub.len() + 2));
    for a in &sub.pairs {
        xs.push(a.birth);
        xs.push(a.death);
        for b in &sub.pairs {
            let m = 0.5 * (a.birth + b.death);
            if m > a.birth && m < b.death {
                xs.push(m);
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut buf = Vec::with_capacity(sub.len());
    let vals: Vec<f64> = xs.iter().map(|&x| kth_tent(&sub, k, x, &mut buf)).collect();
    let mut acc = 0.0;
    for i in 1..xs.len() {
        let h = xs[i] - xs[i - 1];
        let (a, b) = (vals[i - 1], vals[i]);
        acc += match p {
            1 => 0.5 * h * (a + b),
            _ => h / 3.0 * (a * a + a * b + b * b),
        };
    }
    Ok(if p == 1 { acc } else { acc.sqrt() })
}

fn check_cap(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> Result<()> {
    let total = d1.len() + d2.len();
    if total > MATCHING_CAP {
        return Err(Error::Capacity(format!(
            "diagram matching on {total} pairs exceeds the limit of {MATCHING_CAP}"
        )));
    }
    Ok(())
}

/// Square cost matrix of size `n1 + n2`: real points on both sides, with
/// diagonal slots standing in for the projections.
fn augmented_costs(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> Vec<Vec<f64>> {
    let (n1, n2) = (d1.len(), d2.len());
    let n = n1 + n2;
    let mut c = vec![vec![0.0; n]; n];
    for (i, row) in c.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = match (i < n1, j < n2) {
                (true, true) => d1.pairs[i].linf(&d2.pairs[j]),
                (true, false) => d1.pairs[i].diag_dist(),
                (false, true) => d2.pairs[j].diag_dist(),
                (false, false) => 0.0,
            };
        }
    }
    c
}

/// Minimum-cost perfect assignment (Hungarian method with potentials).
/// Returns the column assigned to each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

fn to_empty_wasserstein(d: &PersistenceDiagram, p: u32) -> f64 {
    match p {
        1 => d.pairs.iter().map(PersistencePair::diag_dist).sum(),
        _ => d
            .pairs
            .iter()
            .map(|q| q.diag_dist().powi(2))
            .sum::<f64>()
            .sqrt(),
    }
}

/// p-Wasserstein distance with the L-infinity ground metric.
pub fn wasserstein(d1: &PersistenceDiagram, d2: &PersistenceDiagram, p: u32) -> Result<f64> {
    if p != 1 && p != 2 {
        return Err(Error::Config(format!("wasserstein p must be 1 or 2, got {p}")));
    }
    // matching against nothing has a closed form and no size limit
    if d2.is_empty() {
        return Ok(to_empty_wasserstein(d1, p));
    }
    if d1.is_empty() {
        return Ok(to_empty_wasserstein(d2, p));
    }
    check_cap(d1, d2)?;
    let cost: Vec<Vec<f64>> = augmented_costs(d1, d2)
        .into_iter()
        .map(|row| row.into_iter().map(|c| c.powi(p as i32)).collect())
        .collect();
    let assign = hungarian(&cost);
    let total: f64 = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok(if p == 1 { total } else { total.sqrt() })
}

fn has_perfect_matching(allowed: &[Vec<bool>]) -> bool {
    let n = allowed.len();
    let mut match_col: Vec<Option<usize>> = vec![None; n];
    fn augment(
        i: usize,
        allowed: &[Vec<bool>],
        seen: &mut [bool],
        match_col: &mut [Option<usize>],
    ) -> bool {
        for j in 0..allowed.len() {
            if allowed[i][j] && !seen[j] {
                seen[j] = true;
                if match_col[j].is_none_or(|r| augment(r, allowed, seen, match_col)) {
                    match_col[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    (0..n).all(|i| {
        let mut seen = vec![false; n];
        augment(i, allowed, &mut seen, &mut match_col)
    })
}

/// Bottleneck distance: the smallest cost threshold admitting a perfect
/// matching, found by bisection over the distinct matrix entries.
pub fn bottleneck(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> Result<f64> {
    if d2.is_empty() {
        return Ok(d1.pairs.iter().map(PersistencePair::diag_dist).fold(0.0, f64::max));
    }
    if d1.is_empty() {
        return bottleneck(d2, d1);
    }
    check_cap(d1, d2)?;
    let cost = augmented_costs(d1, d2);
    let mut candidates: Vec<f64> = cost.iter().flatten().copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        let t = candidates[mid];
        let allowed: Vec<Vec<bool>> = cost
            .iter()
            .map(|row| row.iter().map(|&c| c <= t).collect())
            .collect();
        if has_perfect_matching(&allowed) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(candidates[lo])
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub fn tda_dim(channels: usize, grid_size: usize) -> usize {
    channels * (SCALAR_FEATURES + grid_size + GRAPH_FEATURES)
}

/// Features of one channel: entropy, total, max, finite pair count, Betti curve,
/// landscape L1 and L2, W1, W2 and bottleneck to the empty diagram, then the
/// horizontal visibility graph summary.
pub fn tda_channel_features(x: &[f64], grid_size: usize) -> Vec<f64> {
    let dgm = sublevel_persistence(x);
    let empty = PersistenceDiagram::default();
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::with_capacity(SCALAR_FEATURES + grid_size + GRAPH_FEATURES);
    out.push(persistence_entropy(&dgm));
    out.push(total_persistence(&dgm));
    out.push(max_persistence(&dgm));
    out.push(dgm.pairs.iter().filter(|p| !p.essential).count() as f64);
    out.extend(
        betti_curve(&dgm, &linspace(lo, hi, grid_size))
            .into_iter()
            .map(|b| b as f64),
    );
    // k, p and the empty reference are all valid, so these cannot fail
    out.push(landscape_norm(&dgm, 1, 1).expect("valid landscape args"));
    out.push(landscape_norm(&dgm, 1, 2).expect("valid landscape args"));
    out.push(wasserstein(&dgm, &empty, 1).expect("empty reference"));
    out.push(wasserstein(&dgm, &empty, 2).expect("empty reference"));
    out.push(bottleneck(&dgm, &empty).expect("empty reference"));
    out.extend(graph_features(&hvg_build(x)));
    out
}

pub fn tda_embed(w: &Window, grid_size: usize) -> EmbeddingVector {
    (0..w.n_channels())
        .flat_map(|c| tda_channel_features(&w.channel(c), grid_size))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256StarStar;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn dgm(pairs: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::new(pairs.iter().map(|&(b, d)| PersistencePair::finite(b, d)).collect())
    }

    fn sorted(d: &PersistenceDiagram) -> Vec<(f64, f64, bool)> {
        let mut v: Vec<_> = d.pairs.iter().map(|p| (p.birth, p.death, p.essential)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    /// For each local minimum, grow the component of `{x <= v}` around it
    /// level by level until it contains an older minimum.
    fn sweep_oracle(x: &[f64]) -> Vec<(f64, f64, bool)> {
        let n = x.len();
        let mut levels: Vec<f64> = x.to_vec();
        levels.sort_by(f64::total_cmp);
        let mut out = Vec::new();
        for i in 0..n {
            let is_min = (i == 0 || x[i - 1] > x[i]) && (i + 1 == n || x[i + 1] > x[i]);
            if !is_min {
                continue;
            }
            let mut death = None;
            for &v in levels.iter().filter(|&&v| v >= x[i]) {
                let (mut l, mut r) = (i, i);
                while l > 0 && x[l - 1] <= v {
                    l -= 1;
                }
                while r + 1 < n && x[r + 1] <= v {
                    r += 1;
                }
                if (l..=r).any(|j| x[j] < x[i]) {
                    death = Some(v);
                    break;
                }
            }
            match death {
                Some(v) => out.push((x[i], v, false)),
                None => out.push((x[i], levels[n - 1], true)),
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    #[test]
    fn hand_diagrams() {
        assert_eq!(
            sorted(&sublevel_persistence(&[2.0, 1.0, 3.0, 0.0, 4.0])),
            vec![(0.0, 4.0, true), (1.0, 3.0, false)]
        );
        assert_eq!(sorted(&sublevel_persistence(&[1.0, 2.0, 3.0])), vec![(1.0, 3.0, true)]);
        assert_eq!(sorted(&sublevel_persistence(&[5.0; 6])), vec![(5.0, 5.0, true)]);
        assert_eq!(sorted(&sublevel_persistence(&[7.0])), vec![(7.0, 7.0, true)]);
    }

    #[test]
    fn plateau_minima_use_lower_index() {
        let d = sublevel_persistence(&[1.0, 3.0, 1.0, 2.0]);
        assert_eq!(sorted(&d), vec![(1.0, 3.0, false), (1.0, 3.0, true)]);
    }

    #[test]
    fn matches_threshold_sweep_on_random_signals() {
        let mut r = Xoshiro256StarStar::seed_from_u64(11);
        for _ in 0..200 {
            let n = 1 + r.below(60);
            let x: Vec<f64> = (0..n).map(|_| r.normal()).collect();
            assert_eq!(sorted(&sublevel_persistence(&x)), sweep_oracle(&x));
        }
    }

    #[test]
    fn entropy_closed_forms() {
        assert_eq!(persistence_entropy(&dgm(&[(0.0, 1.0)])), 0.0);
        assert!((persistence_entropy(&dgm(&[(0.0, 1.0), (2.0, 3.0)])) - 2f64.ln()).abs() < 1e-12);
        let e = persistence_entropy(&dgm(&[(0.0, 3.0), (1.0, 2.0)]));
        assert!((e - 0.5623351446188083).abs() < 1e-12);
        assert_eq!(persistence_entropy(&PersistenceDiagram::default()), 0.0);
        assert_eq!(persistence_entropy(&dgm(&[(1.0, 1.0)])), 0.0);
    }

    #[test]
    fn betti_half_open() {
        let d = dgm(&[(1.0, 3.0)]);
        assert_eq!(betti_curve(&d, &[0.0, 1.0, 2.0, 3.0]), vec![0, 1, 1, 0]);
    }

    #[test]
    fn landscape_closed_forms() {
        let d = dgm(&[(0.0, 2.0)]);
        assert!((landscape_norm(&d, 1, 1).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(landscape_norm(&d, 2, 1).unwrap(), 0.0);
        // integral of the squared unit tent is 2/3
        assert!((landscape_norm(&d, 1, 2).unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(landscape_norm(&PersistenceDiagram::default(), 1, 1).unwrap(), 0.0);
        assert!(landscape_norm(&d, 0, 1).is_err());
    }

    #[test]
    fn landscape_matches_fine_quadrature() {
        let mut r = Xoshiro256StarStar::seed_from_u64(12);
        for _ in 0..20 {
            let pairs: Vec<(f64, f64)> = (0..6)
                .map(|_| {
                    let b = r.uniform(0.0, 4.0);
                    (b, b + r.uniform(0.0, 3.0))
                })
                .collect();
            let d = dgm(&pairs);
            for k in 1..=3 {
                let steps = 200_000;
                let h = 8.0 / steps as f64;
                let mut buf = Vec::new();
                let (mut s1, mut s2) = (0.0, 0.0);
                for i in 0..steps {
                    let v = kth_tent(&d, k, (i as f64 + 0.5) * h, &mut buf);
                    s1 += v * h;
                    s2 += v * v * h;
                }
                assert!((landscape_norm(&d, k, 1).unwrap() - s1).abs() < 1e-6);
                assert!((landscape_norm(&d, k, 2).unwrap() - s2.sqrt()).abs() < 1e-6);
            }
        }
    }

    /// Every matching of the augmented problem by enumerating injections of
    /// d1 into d2-or-diagonal.
    fn brute_costs(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> Vec<Vec<f64>> {
        fn rec(
            i: usize,
            d1: &PersistenceDiagram,
            d2: &PersistenceDiagram,
            used: &mut Vec<bool>,
            acc: &mut Vec<f64>,
            out: &mut Vec<Vec<f64>>,
        ) {
            if i == d1.len() {
                let mut costs = acc.clone();
                for (j, q) in d2.pairs.iter().enumerate() {
                    if !used[j] {
                        costs.push(q.diag_dist());
                    }
                }
                out.push(costs);
                return;
            }
            acc.push(d1.pairs[i].diag_dist());
            rec(i + 1, d1, d2, used, acc, out);
            acc.pop();
            for j in 0..d2.len() {
                if !used[j] {
                    used[j] = true;
                    acc.push(d1.pairs[i].linf(&d2.pairs[j]));
                    rec(i + 1, d1, d2, used, acc, out);
                    acc.pop();
                    used[j] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(0, d1, d2, &mut vec![false; d2.len()], &mut Vec::new(), &mut out);
        out
    }

    fn random_dgm(r: &mut Xoshiro256StarStar, n: usize) -> PersistenceDiagram {
        dgm(&(0..n)
            .map(|_| {
                let b = r.uniform(-2.0, 2.0);
                (b, b + r.uniform(0.0, 2.0))
            })
            .collect::<Vec<_>>())
    }

    #[test]
    fn distances_match_enumeration() {
        let mut r = Xoshiro256StarStar::seed_from_u64(13);
        for _ in 0..30 {
            let (a, b) = (random_dgm(&mut r, 5), random_dgm(&mut r, 5));
            let all = brute_costs(&a, &b);
            let w1 = all.iter().map(|c| c.iter().sum::<f64>()).fold(f64::INFINITY, f64::min);
            let w2 = all
                .iter()
                .map(|c| c.iter().map(|v| v * v).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            let bn = all
                .iter()
                .map(|c| c.iter().copied().fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min);
            assert!((wasserstein(&a, &b, 1).unwrap() - w1).abs() < 1e-9);
            assert!((wasserstein(&a, &b, 2).unwrap() - w2).abs() < 1e-9);
            assert!((bottleneck(&a, &b).unwrap() - bn).abs() < 1e-12);
            assert!(bn <= w1 + 1e-12);
        }
    }

    #[test]
    fn distance_closed_forms() {
        let a = dgm(&[(0.0, 2.0)]);
        let e = PersistenceDiagram::default();
        assert_eq!(wasserstein(&a, &e, 1).unwrap(), 1.0);
        assert_eq!(bottleneck(&a, &e).unwrap(), 1.0);
        assert_eq!(bottleneck(&e, &a).unwrap(), 1.0);
        assert_eq!(wasserstein(&a, &a, 1).unwrap(), 0.0);
        assert_eq!(bottleneck(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn capacity_error() {
        let mut r = Xoshiro256StarStar::seed_from_u64(14);
        let (a, b) = (random_dgm(&mut r, 40), random_dgm(&mut r, 30));
        assert!(matches!(wasserstein(&a, &b, 1), Err(Error::Capacity(_))));
        assert!(matches!(bottleneck(&a, &b), Err(Error::Capacity(_))));
    }

    #[test]
    fn metric_axioms_on_random_triples() {
        let mut r = Xoshiro256StarStar::seed_from_u64(15);
        for _ in 0..50 {
            let ns = [1 + r.below(8), 1 + r.below(8), 1 + r.below(8)];
            let [a, b, c] = ns.map(|n| random_dgm(&mut r, n));
            for p in [1, 2] {
                let ab = wasserstein(&a, &b, p).unwrap();
                assert!((ab - wasserstein(&b, &a, p).unwrap()).abs() < 1e-9);
                assert!(ab <= wasserstein(&a, &c, p).unwrap() + wasserstein(&c, &b, p).unwrap() + 1e-9);
            }
            let ab = bottleneck(&a, &b).unwrap();
            assert!((ab - bottleneck(&b, &a).unwrap()).abs() < 1e-9);
            assert!(ab <= bottleneck(&a, &c).unwrap() + bottleneck(&c, &b).unwrap() + 1e-9);
        }
    }

    #[test]
    fn bottleneck_stability_under_noise() {
        let mut r = Xoshiro256StarStar::seed_from_u64(16);
        for _ in 0..100 {
            let x: Vec<f64> = (0..20).map(|_| r.normal()).collect();
            let eps = 0.05;
            let y: Vec<f64> = x.iter().map(|v| v + r.uniform(-eps, eps)).collect();
            let (dx, dy) = (sublevel_persistence(&x), sublevel_persistence(&y));
            assert!(bottleneck(&dx, &dy).unwrap() <= eps + 1e-12);
        }
    }

    #[test]
    fn tda_embed_dimension_and_degenerate_channel() {
        let w = Window {
            source_id: "w".into(),
            start: 0,
            values: Array2::from_elem((12, 1), 0.5),
            label: 0,
        };
        let v = tda_embed(&w, DEFAULT_GRID_SIZE);
        assert_eq!(v.len(), 24);
        assert_eq!(tda_dim(1, 8), 24);
        for (k, val) in v[..SCALAR_FEATURES + DEFAULT_GRID_SIZE].iter().enumerate() {
            assert_eq!(*val, 0.0, "feature {k}");
        }
    }

    #[test]
    fn tda_features_of_hand_signal() {
        let f = tda_channel_features(&[2.0, 1.0, 3.0, 0.0, 4.0], 8);
        let (p1, p2) = (1.0f64 / 3.0, 2.0f64 / 3.0);
        assert!((f[0] + p1 * p1.ln() + p2 * p2.ln()).abs() < 1e-12);
        assert!((f[0] - 0.6365141682948128).abs() < 1e-12);
        assert_eq!(&f[1..4], &[6.0, 4.0, 1.0]);
    }

    #[test]
    fn diagram_csv_dump() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        sublevel_persistence(&[2.0, 1.0, 3.0, 0.0, 4.0]).write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, "birth,death,essential\n1,3,false\n0,4,true\n");
    }

    proptest! {
        #[test]
        fn value_shift_equivariance(
            xs in prop::collection::vec(-64i32..64, 1..40),
            beta in -16i32..16,
        ) {
            // quarter steps keep the shift exact
            let x: Vec<f64> = xs.iter().map(|&v| v as f64 / 4.0).collect();
            let y: Vec<f64> = x.iter().map(|v| v + beta as f64).collect();
            let shifted: Vec<_> = sorted(&sublevel_persistence(&x))
                .into_iter()
                .map(|(b, d, e)| (b + beta as f64, d + beta as f64, e))
                .collect();
            prop_assert_eq!(sorted(&sublevel_persistence(&y)), shifted);
        }

        #[test]
        fn pair_count_equals_local_minima(xs in prop::collection::vec(-1e3f64..1e3, 1..50)) {
            let mut distinct = xs.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            prop_assume!(distinct.len() == xs.len());
            let n = xs.len();
            let minima = (0..n)
                .filter(|&i| (i == 0 || xs[i - 1] > xs[i]) && (i + 1 == n || xs[i + 1] > xs[i]))
                .count();
            prop_assert_eq!(sublevel_persistence(&xs).len(), minima);
        }
    }
}
