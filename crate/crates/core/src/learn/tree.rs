//! CART classification tree with Gini splitting.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{argmax, check_dim, LearnError, Result, TrainingData};
use crate::rng::{seeded, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` tries all of them.
    pub mtry: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { min_leaf: 5, max_depth: 30, mtry: None }
    }
}

impl TreeParams {
    /// Fully grown trees as used inside a forest.
    pub fn unpruned(mtry: usize) -> Self {
        Self { min_leaf: 1, max_depth: usize::MAX, mtry: Some(mtry) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
        /// Count-weighted Gini decrease `n*G - nL*GL - nR*GR`.
        decrease: f64,
        n: u32,
    },
    Leaf {
        distribution: Vec<f64>,
        n: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub n_classes: usize,
    pub params: TreeParams,
}

impl TreeModel {
    pub fn leaf_for(&self, x: &[f64]) -> &[f64] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right, .. } => {
                    at = if x[*feature] <= *threshold { *left } else { *right } as usize;
                }
                Node::Leaf { distribution, .. } => return distribution,
            }
        }
    }

    pub fn predict_index(&self, x: &[f64]) -> Result<usize> {
        check_dim(x.len(), self.n_features)?;
        Ok(argmax(self.leaf_for(x)))
    }

    /// Gini decrease of every accepted split, in node order.
    pub fn split_decreases(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, decrease, .. } => Some((*feature, *decrease)),
            Node::Leaf { .. } => None,
        })
    }

    /// Summed Gini decrease per feature.
    pub fn importance(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_features];
        for (f, d) in self.split_decreases() {
            imp[f] += d;
        }
        imp
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Trains a standalone CART tree on every row of `data`.
pub fn train_tree(data: &TrainingData, params: &TreeParams, seed: u64) -> Result<TreeModel> {
    if data.is_empty() {
        return Err(LearnError::Train("cannot grow a tree on an empty dataset".into()));
    }
    validate(params, data.n_features())?;
    let cols = columns(data);
    let mut rng = seeded(seed);
    Ok(grow(&cols, &data.y, data.n_classes(), (0..data.len()).collect(), params, &mut rng))
}

pub(crate) fn validate(params: &TreeParams, n_features: usize) -> Result<()> {
    if params.min_leaf == 0 {
        return Err(LearnError::Config("min_leaf must be >= 1".into()));
    }
    match params.mtry {
        Some(0) => Err(LearnError::Config("mtry must be >= 1".into())),
        Some(m) if m > n_features => Err(LearnError::Config(format!(
            "mtry {m} exceeds the {n_features} available features"
        ))),
        _ => Ok(()),
    }
}

/// Feature-major design matrix with every value replaced by its rank among
/// the distinct values of its column.
pub(crate) struct Ranked {
    pub ranks: Vec<Vec<u32>>,
    /// Distinct values per feature, ascending; `values[f][ranks[f][i]]` is row `i`.
    pub values: Vec<Vec<f64>>,
}

pub(crate) fn columns(data: &TrainingData) -> Ranked {
    let (ranks, values) = (0..data.n_features())
        .map(|f| {
            // `+ 0.0` folds -0.0 into 0.0 so ranks agree with `<=`
            let mut distinct: Vec<f64> = data.x.iter().map(|r| r[f] + 0.0).collect();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let ranks = data
                .x
                .iter()
                .map(|r| distinct.binary_search_by(|v| v.total_cmp(&(r[f] + 0.0))).expect("value present") as u32)
                .collect();
            (ranks, distinct)
        })
        .unzip();
    Ranked { ranks, values }
}

/// Grows a tree on `rows` (which may repeat, for bootstrap samples).
pub(crate) fn grow(
    cols: &Ranked,
    y: &[usize],
    n_classes: usize,
    rows: Vec<usize>,
    params: &TreeParams,
    rng: &mut Rng,
) -> TreeModel {
    let n_features = cols.ranks.len();
    let mut nodes: Vec<Node> = Vec::new();
    let mut stack = vec![(0usize, rows, 0usize)];
    nodes.push(Node::Leaf { distribution: Vec::new(), n: 0 });
    let mut scratch = Scratch::default();
    let class_bits = usize::BITS - (n_classes.max(2) - 1).leading_zeros();

    while let Some((slot, idx, depth)) = stack.pop() {
        let mut counts = vec![0usize; n_classes];
        for &i in &idx {
            counts[y[i]] += 1;
        }
        let n = idx.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure || depth >= params.max_depth || n < 2 * params.min_leaf {
            None
        } else {
            let candidates: Vec<usize> = match params.mtry {
                Some(m) if m < n_features => sample(rng, n_features, m).into_vec(),
                _ => (0..n_features).collect(),
            };
            best_split(cols, y, &idx, &counts, &candidates, params.min_leaf, class_bits, &mut scratch)
        };

        match split {
            Some(Split { feature, rank, threshold, decrease }) => {
                let ranks = &cols.ranks[feature];
                let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| ranks[i] <= rank);
                let left = nodes.len();
                nodes.push(Node::Leaf { distribution: Vec::new(), n: 0 });
                nodes.push(Node::Leaf { distribution: Vec::new(), n: 0 });
                nodes[slot] = Node::Split {
                    feature,
                    threshold,
                    left: left as u32,
                    right: left as u32 + 1,
                    decrease,
                    n: n as u32,
                };
                stack.push((left + 1, r, depth + 1));
                stack.push((left, l, depth + 1));
            }
            None => {
                let distribution = counts.iter().map(|&c| c as f64 / n as f64).collect();
                nodes[slot] = Node::Leaf { distribution, n: n as u32 };
            }
        }
    }
    TreeModel { nodes, n_features, n_classes, params: params.clone() }
}

struct Split {
    feature: usize,
    /// Largest rank sent left.
    rank: u32,
    threshold: f64,
    decrease: f64,
}

#[derive(Default)]
struct Scratch {
    keys: Vec<u64>,
    buf: Vec<u64>,
}

/// Sorts keys below `1 << bits`: LSD radix on bytes for large slices.
fn sort_keys(s: &mut Scratch, bits: u32) {
    if s.keys.len() < 256 {
        s.keys.sort_unstable();
        return;
    }
    s.buf.resize(s.keys.len(), 0);
    for pass in 0..bits.div_ceil(8) {
        let shift = 8 * pass;
        let mut offsets = [0usize; 256];
        for &k in &s.keys {
            offsets[(k >> shift) as usize & 0xFF] += 1;
        }
        let mut total = 0;
        for o in offsets.iter_mut() {
            let c = *o;
            *o = total;
            total += c;
        }
        for &k in &s.keys {
            let d = (k >> shift) as usize & 0xFF;
            s.buf[offsets[d]] = k;
            offsets[d] += 1;
        }
        std::mem::swap(&mut s.keys, &mut s.buf);
    }
}

/// Best split over `candidates`, or `None` when no split respecting
/// `min_leaf` lowers impurity. Keys pack `(rank, class)` so one integer sort
/// orders a node by value with class as tie-break.
#[allow(clippy::too_many_arguments)]
fn best_split(
    cols: &Ranked,
    y: &[usize],
    idx: &[usize],
    counts: &[usize],
    candidates: &[usize],
    min_leaf: usize,
    class_bits: u32,
    scratch: &mut Scratch,
) -> Option<Split> {
    let n = idx.len();
    let parent_sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    let parent_term = parent_sq / n as f64;
    let mut best: Option<Split> = None;
    let mut left = vec![0usize; counts.len()];
    let rank = |k: u64| (k >> class_bits) as u32;
    let class_mask = (1u64 << class_bits) - 1;

    for &f in candidates {
        let col = &cols.ranks[f];
        let bits = class_bits + (u32::BITS - (cols.values[f].len() as u32).leading_zeros());
        scratch.keys.clear();
        scratch.keys.extend(idx.iter().map(|&i| (col[i] as u64) << class_bits | y[i] as u64));
        sort_keys(scratch, bits);
        let keys = &scratch.keys;
        if rank(keys[0]) == rank(keys[n - 1]) {
            continue;
        }
        left.iter_mut().for_each(|c| *c = 0);
        // sums of squared class counts on each side, updated in O(1)
        let mut left_sq = 0.0f64;
        let mut right_sq = parent_sq;
        for p in 0..n - 1 {
            let c = (keys[p] & class_mask) as usize;
            let right_c = counts[c] - left[c];
            left_sq += (2 * left[c] + 1) as f64;
            right_sq -= (2 * right_c - 1) as f64;
            left[c] += 1;

            let n_left = p + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf || rank(keys[p]) == rank(keys[p + 1]) {
                continue;
            }
            let decrease = left_sq / n_left as f64 + right_sq / n_right as f64 - parent_term;
            if decrease > 1e-12 && best.as_ref().is_none_or(|b| decrease > b.decrease) {
                let (ra, rb) = (rank(keys[p]), rank(keys[p + 1]));
                let (a, b) = (cols.values[f][ra as usize], cols.values[f][rb as usize]);
                let mut t = a + (b - a) * 0.5;
                if t >= b {
                    t = a;
                }
                best = Some(Split { feature: f, rank: ra, threshold: t, decrease });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureId;
    use crate::learn::{gini_impurity, ClassLabel};
    use crate::signal::EmotionLabel;
    use rand::Rng as _;

    pub(crate) fn data(x: Vec<Vec<f64>>, y: &[u8]) -> TrainingData {
        let labels: Vec<ClassLabel> =
            y.iter().map(|&c| ClassLabel::Emotion(EmotionLabel::from_code(c).unwrap())).collect();
        let p = x[0].len();
        TrainingData::new(x, &labels, FeatureId::ALL[..p].to_vec()).unwrap()
    }

    #[test]
    fn single_class_is_one_leaf() {
        let d = data(vec![vec![1.0], vec![2.0], vec![3.0]], &[2, 2, 2]);
        let t = train_tree(&d, &TreeParams::default(), 0).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict_index(&[10.0]).unwrap(), 0);
    }

    #[test]
    fn separable_sign_split() {
        let xs: Vec<f64> = (-50..50).map(|i| i as f64 + 0.5).collect();
        let y: Vec<u8> = xs.iter().map(|&x| if x > 0.0 { 3 } else { 1 }).collect();
        let d = data(xs.iter().map(|&x| vec![x]).collect(), &y);
        let t = train_tree(&d, &TreeParams::default(), 0).unwrap();
        match &t.nodes[0] {
            Node::Split { threshold, .. } => assert!(*threshold > -0.5 && *threshold < 0.5),
            _ => panic!("expected a split"),
        }
        for (row, &k) in d.x.iter().zip(&d.y) {
            assert_eq!(t.predict_index(row).unwrap(), k);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let mut rng = seeded(3);
        let x: Vec<Vec<f64>> = (0..200).map(|_| (0..5).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<u8> = (0..200).map(|_| rng.random_range(1..=3)).collect();
        let d = data(x, &y);
        let p = TreeParams { mtry: Some(2), ..TreeParams::default() };
        assert_eq!(train_tree(&d, &p, 11).unwrap(), train_tree(&d, &p, 11).unwrap());
    }

    #[test]
    fn decreases_match_gini_and_leaves_sum_to_one() {
        let mut rng = seeded(5);
        let x: Vec<Vec<f64>> = (0..150).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<u8> = x.iter().map(|r| if r[0] + 0.3 * r[1] > 0.6 { 1 } else { 2 }).collect();
        let d = data(x, &y);
        let t = train_tree(&d, &TreeParams { min_leaf: 1, ..TreeParams::default() }, 0).unwrap();

        // recompute the root decrease from scratch
        if let Node::Split { feature, threshold, decrease, .. } = t.nodes[0] {
            let mut l = vec![0, 0];
            let mut r = vec![0, 0];
            for (row, &k) in d.x.iter().zip(&d.y) {
                if row[feature] <= threshold { l[k] += 1 } else { r[k] += 1 }
            }
            let nl = (l[0] + l[1]) as f64;
            let nr = (r[0] + r[1]) as f64;
            let g = (nl + nr) * gini_impurity(&d.class_counts()).unwrap()
                - nl * gini_impurity(&l).unwrap()
                - nr * gini_impurity(&r).unwrap();
            assert!((g - decrease).abs() < 1e-9);
        }
        for n in &t.nodes {
            match n {
                Node::Split { decrease, .. } => assert!(*decrease >= 0.0),
                Node::Leaf { distribution, .. } => {
                    assert!((distribution.iter().sum::<f64>() - 1.0).abs() < 1e-12)
                }
            }
        }
        // training rows in pure leaves predict their own class
        for (row, &k) in d.x.iter().zip(&d.y) {
            let leaf = t.leaf_for(row);
            if leaf.contains(&1.0) {
                assert_eq!(argmax(leaf), k);
            }
        }
    }

    #[test]
    fn min_leaf_and_depth_respected() {
        let x: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..64).map(|i| if i % 2 == 0 { 1 } else { 2 }).collect();
        let d = data(x, &y);
        let t = train_tree(&d, &TreeParams { min_leaf: 5, max_depth: 3, mtry: None }, 0).unwrap();
        assert!(t.depth() <= 3);
        for n in &t.nodes {
            if let Node::Leaf { n, .. } = n {
                assert!(*n >= 5);
            }
        }
    }

    #[test]
    fn empty_and_bad_mtry() {
        let d = data(vec![vec![1.0]], &[1]);
        let empty = d.subset(&[]);
        assert!(matches!(train_tree(&empty, &TreeParams::default(), 0), Err(LearnError::Train(_))));
        let p = TreeParams { mtry: Some(4), ..TreeParams::default() };
        assert!(matches!(train_tree(&d, &p, 0), Err(LearnError::Config(_))));
        let t = train_tree(&d, &TreeParams::default(), 0).unwrap();
        assert!(matches!(t.predict_index(&[1.0, 2.0]), Err(LearnError::Predict(_))));
    }
}
