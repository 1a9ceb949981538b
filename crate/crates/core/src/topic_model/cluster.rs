//! Average-linkage agglomerative clustering over cosine distance.
//!
//! The dendrogram is built with the nearest-neighbor-chain algorithm, which is
//! exact for average linkage because the linkage is reducible. The flat
//! clustering is the set of components joined by merges at distance
//! `<= distance_threshold`.

use crate::embedding::Embedding;
use crate::error::{Error, Result};

use super::TopicModelConfig;

/// Cluster assignment per embedding; `None` marks the outlier pool.
pub type Assignment = Vec<Option<usize>>;

pub trait Clusterer: Send + Sync {
    /// Raw cluster ids before the size filter. `None` entries are outliers.
    fn cluster(&self, embeddings: &[Embedding], config: &TopicModelConfig) -> Result<Assignment>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ThresholdAgglomerative;

impl Clusterer for ThresholdAgglomerative {
    fn cluster(&self, embeddings: &[Embedding], config: &TopicModelConfig) -> Result<Assignment> {
        let merges = average_linkage(embeddings)?;
        Ok(cut(embeddings.len(), &merges, config.distance_threshold)
            .into_iter()
            .map(Some)
            .collect())
    }
}

/// Runs `clusterer`, then relabels clusters smaller than `min_topic_size` as
/// outliers and renumbers the survivors by their first member's position.
pub fn cluster_with(
    clusterer: &dyn Clusterer,
    embeddings: &[Embedding],
    config: &TopicModelConfig,
) -> Result<Assignment> {
    if embeddings.is_empty() {
        return Err(Error::InvalidConfig("cannot cluster an empty embedding list".into()));
    }
    let raw = clusterer.cluster(embeddings, config)?;
    if raw.len() != embeddings.len() {
        return Err(Error::ContractViolation(format!(
            "clusterer returned {} assignments for {} embeddings",
            raw.len(),
            embeddings.len()
        )));
    }
    Ok(filter_small(&raw, config.min_topic_size))
}

/// Default clustering: [`ThresholdAgglomerative`] plus the size filter.
pub fn cluster(embeddings: &[Embedding], config: &TopicModelConfig) -> Result<Assignment> {
    cluster_with(&ThresholdAgglomerative, embeddings, config)
}

fn filter_small(raw: &[Option<usize>], min_size: usize) -> Assignment {
    let max_id = raw.iter().flatten().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; max_id];
    for id in raw.iter().flatten() {
        sizes[*id] += 1;
    }
    let mut renumber: Vec<Option<usize>> = vec![None; max_id];
    let mut next = 0;
    raw.iter()
        .map(|id| {
            let id = (*id)?;
            if sizes[id] < min_size {
                return None;
            }
            Some(*renumber[id].get_or_insert_with(|| {
                next += 1;
                next - 1
            }))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// Condensed upper-triangle distance matrix.
struct Condensed {
    n: usize,
    d: Vec<f64>,
}

impl Condensed {
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.n * i - i * (i + 1) / 2 + (j - i - 1)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.index(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.d[k] = v;
    }
}

fn cosine_distances(embeddings: &[Embedding]) -> Result<Condensed> {
    let n = embeddings.len();
    let dim = embeddings[0].dim();
    let mut unit = Vec::with_capacity(n);
    for e in embeddings {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: e.dim(),
            });
        }
        let norm = e.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        unit.push(e.values().iter().map(|v| v / norm).collect::<Vec<_>>());
    }
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let dot: f64 = unit[i].iter().zip(&unit[j]).map(|(x, y)| x * y).sum();
            d.push((1.0 - dot).max(0.0));
        }
    }
    Ok(Condensed { n, d })
}

/// Full average-linkage dendrogram as `n - 1` merges. Each merge names the two
/// slots it joins; the merged cluster keeps slot `b`.
pub(crate) fn average_linkage(embeddings: &[Embedding]) -> Result<Vec<Merge>> {
    let n = embeddings.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    let mut dist = cosine_distances(embeddings)?;
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut merges = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::with_capacity(n);

    for _ in 0..n - 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("two active clusters remain"));
        }
        let (a, b, d) = loop {
            let a = *chain.last().unwrap();
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            // prefer the chain predecessor on ties so the chain terminates
            let mut best = prev.map(|p| (p, dist.get(a, p)));
            for c in (0..n).filter(|&c| c != a && active[c]) {
                let dc = dist.get(a, c);
                if best.is_none_or(|(_, bd)| dc < bd) {
                    best = Some((c, dc));
                }
            }
            let (b, d) = best.expect("another active cluster exists");
            if Some(b) == prev {
                chain.truncate(chain.len() - 2);
                break (a, b, d);
            }
            chain.push(b);
        };

        let (keep, gone) = if a < b { (a, b) } else { (b, a) };
        let (sk, sg) = (size[keep] as f64, size[gone] as f64);
        for c in (0..n).filter(|&c| active[c] && c != keep && c != gone) {
            let v = (sk * dist.get(keep, c) + sg * dist.get(gone, c)) / (sk + sg);
            dist.set(keep, c, v);
        }
        active[gone] = false;
        size[keep] += size[gone];
        merges.push(Merge {
            a: gone,
            b: keep,
            distance: d,
        });
    }
    Ok(merges)
}

/// Flat cluster ids (numbered by first member) from merges at `<= threshold`.
pub(crate) fn cut(n: usize, merges: &[Merge], threshold: f64) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for m in merges.iter().filter(|m| m.distance <= threshold) {
        let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            if ids[r] == usize::MAX {
                ids[r] = next;
                next += 1;
            }
            ids[r]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::normalized(v.to_vec()).unwrap()
    }

    fn config(min_topic_size: usize, distance_threshold: f64) -> TopicModelConfig {
        TopicModelConfig {
            min_topic_size,
            distance_threshold,
            ..TopicModelConfig::default()
        }
    }

    /// Brute-force average linkage: repeatedly merge the closest pair of
    /// clusters by mean pairwise member distance.
    fn naive_flat(embeddings: &[Embedding], threshold: f64) -> Vec<Vec<usize>> {
        let d = |i: usize, j: usize| {
            1.0 - crate::embedding::cosine_similarity(&embeddings[i], &embeddings[j]).unwrap()
        };
        let mut clusters: Vec<Vec<usize>> = (0..embeddings.len()).map(|i| vec![i]).collect();
        loop {
            let mut best: Option<(usize, usize, f64)> = None;
            for x in 0..clusters.len() {
                for y in x + 1..clusters.len() {
                    let mut s = 0.0;
                    for &i in &clusters[x] {
                        for &j in &clusters[y] {
                            s += d(i, j);
                        }
                    }
                    let avg = s / (clusters[x].len() * clusters[y].len()) as f64;
                    if best.is_none_or(|b| avg < b.2) {
                        best = Some((x, y, avg));
                    }
                }
            }
            match best {
                Some((x, y, avg)) if avg <= threshold => {
                    let moved = clusters.remove(y);
                    clusters[x].extend(moved);
                    clusters[x].sort_unstable();
                }
                _ => break,
            }
        }
        clusters.sort();
        clusters
    }

    fn groups(ids: &[usize]) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); ids.iter().max().map_or(0, |m| m + 1)];
        for (i, &c) in ids.iter().enumerate() {
            out[c].push(i);
        }
        out.sort();
        out
    }

    #[test]
    fn matches_brute_force_on_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let n = 5 + trial;
            let pts: Vec<Embedding> = (0..n)
                .map(|_| emb(&[rng.random::<f64>() + 0.01, rng.random::<f64>(), rng.random::<f64>()]))
                .collect();
            let merges = average_linkage(&pts).unwrap();
            for t in [0.01, 0.05, 0.1, 0.3] {
                assert_eq!(groups(&cut(n, &merges, t)), naive_flat(&pts, t), "n={n} t={t}");
            }
        }
    }

    #[test]
    fn two_separated_groups() {
        let mut pts = Vec::new();
        for i in 0..20 {
            pts.push(emb(&[1.0, 0.01 * i as f64, 0.0]));
        }
        for i in 0..20 {
            pts.push(emb(&[0.0, 0.01 * i as f64, 1.0]));
        }
        let ids = cluster(&pts, &config(10, 0.5)).unwrap();
        assert!(ids[..20].iter().all(|&c| c == Some(0)));
        assert!(ids[20..].iter().all(|&c| c == Some(1)));
    }

    #[test]
    fn isolated_point_becomes_outlier() {
        let mut pts = vec![emb(&[1.0, 0.0, 0.0]); 20];
        pts.push(emb(&[0.0, 0.0, 1.0]));
        let ids = cluster(&pts, &config(10, 0.5)).unwrap();
        assert!(ids[..20].iter().all(|&c| c == Some(0)));
        assert_eq!(ids[20], None);
    }

    #[test]
    fn single_embedding_is_outlier() {
        let ids = cluster(&[emb(&[1.0, 0.0])], &config(2, 0.5)).unwrap();
        assert_eq!(ids, vec![None]);
        assert!(cluster(&[], &config(2, 0.5)).is_err());
    }

    #[test]
    fn identical_embeddings_form_one_cluster() {
        let pts = vec![emb(&[0.2, 0.9, 0.1]); 15];
        let ids = cluster(&pts, &config(10, 0.0)).unwrap();
        assert!(ids.iter().all(|&c| c == Some(0)));
    }

    #[test]
    fn renumbering_follows_first_member() {
        let raw = [Some(5), Some(2), Some(5), Some(9), Some(2)];
        assert_eq!(filter_small(&raw, 2), vec![Some(0), Some(1), Some(0), None, Some(1)]);
    }
}
