//! Player reduction, Shapley kernel weights and coalition mask generators.
//!
//! A coalition is a binary vector over the reduced players: the `B` retained
//! features of the explained node first, then its `D` retained neighbours.
//! Generators are registered by name in [`mask_strategies`].

use std::collections::HashSet;
use std::sync::{Arc, OnceLock};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::GnnModel;
use crate::graph::Graph;
use crate::registry::Registry;

/// Largest player count for which every coalition is enumerated.
pub const MAX_ENUMERATED_PLAYERS: usize = 20;

/// Default weight of the pinned anchor coalitions.
pub const DEFAULT_ANCHOR_WEIGHT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerIndex {
    pub feature_ids: Vec<usize>,
    pub node_ids: Vec<usize>,
    /// Explained node; `None` for graph-level explanations.
    pub target: Option<usize>,
}

impl PlayerIndex {
    pub fn new(feature_ids: Vec<usize>, node_ids: Vec<usize>, target: Option<usize>) -> Result<Self> {
        let distinct = |ids: &[usize]| ids.iter().collect::<HashSet<_>>().len() == ids.len();
        if !distinct(&feature_ids) || !distinct(&node_ids) {
            return Err(Error::InvalidArgument("player ids must be distinct".into()));
        }
        if let Some(v) = target {
            if node_ids.contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "explained node {v} cannot be one of its own players"
                )));
            }
        }
        if feature_ids.is_empty() && node_ids.is_empty() {
            return Err(Error::EmptyPlayerSet(target.unwrap_or(0)));
        }
        Ok(Self {
            feature_ids,
            node_ids,
            target,
        })
    }

    pub fn num_features(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn len(&self) -> usize {
        self.feature_ids.len() + self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoalitionMask(Vec<bool>);

impl CoalitionMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![true; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }
}

/// Masks with their regression weights. Pinned masks carry the anchor
/// weight and fix the surrogate's value at that coalition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskBatch {
    pub masks: Vec<CoalitionMask>,
    pub weights: Vec<f64>,
    pub pinned: Vec<bool>,
}

impl MaskBatch {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

/// Keeps features of `v` lying outside `μ ± λσ` (statistics over all nodes
/// of `g`) and the neighbours within as many hops as the model has layers.
pub fn reduce_players(g: &Graph, model: &GnnModel, v: usize, lambda: f64) -> Result<PlayerIndex> {
    if v >= g.num_nodes() {
        return Err(Error::InvalidArgument(format!(
            "node {v} is outside the graph of {} nodes",
            g.num_nodes()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {lambda}")));
    }
    let node_ids = if model.num_layers() == 0 {
        Vec::new()
    } else {
        g.k_hop_neighbors(v, model.num_layers()).into_vec()
    };
    let (mean, std) = feature_stats(g);
    let x = g.features().row(v);
    let feature_ids = (0..g.num_features())
        .filter(|&j| (x[j] - mean[j]).abs() > lambda * std[j] + 1e-12 * (1.0 + mean[j].abs()))
        .collect();
    PlayerIndex::new(feature_ids, node_ids, Some(v))
}

/// Column means and population standard deviations of the feature matrix.
pub fn feature_stats(g: &Graph) -> (Vec<f64>, Vec<f64>) {
    let x = g.features();
    let n = x.rows().max(1) as f64;
    let mut mean = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    (mean, var.into_iter().map(|s| (s / n).sqrt()).collect())
}

/// `ln C(n, k)` as a sum of logs, stable for large `n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| (((n - k + i) as f64) / i as f64).ln()).sum()
}

/// Shapley kernel `(M−1) / (M·s) · C(M−1, s)⁻¹`, or `c` for the empty and
/// full coalitions.
pub fn kernel_weight(m: usize, s: usize, c: f64) -> f64 {
    assert!(m >= 1 && s <= m, "kernel needs 0 ≤ s ≤ M and M ≥ 1");
    if s == 0 || s == m {
        return c;
    }
    let (mf, sf) = (m as f64, s as f64);
    (((mf - 1.0) / (mf * sf)).ln() - ln_binomial(m - 1, s)).exp()
}

/// Which player count the kernel of separated strategies uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelScope {
    /// Block size and the coalition size within the block.
    #[default]
    Block,
    /// All `B + D` players and the full mask size.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskParams {
    /// Highest coalition order the smart generators enumerate.
    pub s_max: usize,
    /// Share of the budget given to feature-block masks; derived from the
    /// block sizes when absent.
    pub feature_share: Option<f64>,
    pub anchor_weight: f64,
    pub kernel_scope: KernelScope,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            s_max: 4,
            feature_share: None,
            anchor_weight: DEFAULT_ANCHOR_WEIGHT,
            kernel_scope: KernelScope::Block,
        }
    }
}

pub trait MaskStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    /// At most `budget` distinct masks, anchors included.
    fn generate(
        &self,
        players: &PlayerIndex,
        budget: usize,
        params: &MaskParams,
        rng: &mut ChaCha8Rng,
    ) -> Result<MaskBatch>;
}

pub struct All;
pub struct RandomMasks;
pub struct Smart;
pub struct SmartSeparate;
pub struct SmarterSeparate;

/// The built-in mask strategies.
pub fn mask_strategies() -> &'static Registry<dyn MaskStrategy> {
    static REGISTRY: OnceLock<Registry<dyn MaskStrategy>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut r: Registry<dyn MaskStrategy> = Registry::new("mask strategy");
        let builtins: [Arc<dyn MaskStrategy>; 5] = [
            Arc::new(All),
            Arc::new(RandomMasks),
            Arc::new(Smart),
            Arc::new(SmartSeparate),
            Arc::new(SmarterSeparate),
        ];
        for s in builtins {
            r.register(s.name(), s);
        }
        r
    })
}

/// Generates masks with the built-in strategy called `strategy`.
pub fn gen_masks(
    players: &PlayerIndex,
    budget: usize,
    strategy: &str,
    params: &MaskParams,
    seed: u64,
) -> Result<MaskBatch> {
    gen_masks_with(mask_strategies(), players, budget, strategy, params, seed)
}

/// Like [`gen_masks`] but looks `strategy` up in `registry`.
pub fn gen_masks_with(
    registry: &Registry<dyn MaskStrategy>,
    players: &PlayerIndex,
    budget: usize,
    strategy: &str,
    params: &MaskParams,
    seed: u64,
) -> Result<MaskBatch> {
    if params.s_max == 0 {
        return Err(Error::InvalidArgument("s_max must be at least 1".into()));
    }
    if !(params.anchor_weight > 0.0 && params.anchor_weight.is_finite()) {
        return Err(Error::InvalidArgument("anchor weight must be positive".into()));
    }
    if let Some(r) = params.feature_share {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidArgument(format!(
                "feature share must lie in [0, 1], got {r}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    registry.get(strategy)?.generate(players, budget, params, &mut rng)
}

/// Insertion-ordered set of block masks.
struct MaskSet {
    masks: Vec<Vec<bool>>,
    seen: HashSet<Vec<bool>>,
    /// Number of distinct masks that exist, saturating.
    capacity: usize,
}

impl MaskSet {
    fn new(size: usize) -> Self {
        Self {
            masks: Vec::new(),
            seen: HashSet::new(),
            capacity: if size >= 63 { usize::MAX } else { 1usize << size },
        }
    }

    fn insert(&mut self, m: Vec<bool>) -> bool {
        if self.seen.contains(&m) {
            return false;
        }
        self.seen.insert(m.clone());
        self.masks.push(m);
        true
    }

    fn len(&self) -> usize {
        self.masks.len()
    }

    fn full(&self) -> bool {
        self.masks.len() >= self.capacity
    }
}

fn attempt_cap(budget: usize) -> usize {
    50 * budget + 1000
}

/// Fair-coin masks until `budget` masks exist.
fn random_fill(set: &mut MaskSet, size: usize, budget: usize, rng: &mut ChaCha8Rng) {
    let mut attempts = 0;
    while set.len() < budget && !set.full() && attempts < attempt_cap(budget) {
        attempts += 1;
        let m: Vec<bool> = (0..size).map(|_| rng.random_bool(0.5)).collect();
        set.insert(m);
    }
}

fn subset_mask(size: usize, subset: &[usize], on: bool) -> Vec<bool> {
    let mut m = vec![!on; size];
    for &i in subset {
        m[i] = on;
    }
    m
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Number of distinct masks of order `k` (only `k` on, or only `k` off).
fn order_size(size: usize, k: usize) -> f64 {
    let c = ln_binomial(size, k).exp().round();
    if 2 * k == size {
        c
    } else {
        2.0 * c
    }
}

/// Exhausts coalition orders `1, 2, …` (only `k` players on, and only `k`
/// off) while they fit in 90% of `budget`. The first order that does not
/// fit is sampled partially, either with random subsets or, when `diverse`,
/// by repeatedly taking the `k` least-used players. Fair-coin masks fill
/// whatever budget remains.
fn smart_fill(set: &mut MaskSet, size: usize, budget: usize, s_max: usize, diverse: bool, rng: &mut ChaCha8Rng) {
    let smart_budget = (0.9 * budget as f64).floor() as usize;
    for k in 1..=s_max.min(size / 2) {
        if set.len() >= smart_budget {
            break;
        }
        if set.len() as f64 + order_size(size, k) <= smart_budget as f64 {
            for_each_combination(size, k, |c| {
                set.insert(subset_mask(size, c, true));
                set.insert(subset_mask(size, c, false));
            });
            continue;
        }
        let mut attempts = 0;
        if diverse {
            let mut weight = vec![1.0f64; size];
            let mut order: Vec<usize> = (0..size).collect();
            while set.len() < smart_budget && attempts < attempt_cap(budget) {
                attempts += 1;
                order.shuffle(rng);
                order.sort_by(|a, b| weight[*b].total_cmp(&weight[*a]));
                let chosen = &order[..k];
                set.insert(subset_mask(size, chosen, rng.random_bool(0.5)));
                for &e in chosen {
                    weight[e] = 1.0 / (1.0 + 1.0 / weight[e]);
                }
            }
        } else {
            while set.len() < smart_budget && attempts < attempt_cap(budget) {
                attempts += 1;
                let c = index::sample(rng, size, k).into_vec();
                set.insert(subset_mask(size, &c, true));
                if set.len() < smart_budget {
                    set.insert(subset_mask(size, &c, false));
                }
            }
        }
        break;
    }
    random_fill(set, size, budget, rng);
}

fn check_budget(budget: usize, anchors: usize) -> Result<()> {
    if budget < anchors + 1 {
        return Err(Error::BudgetTooSmall {
            budget,
            required: anchors + 1,
        });
    }
    Ok(())
}

/// Weights for masks over all players: the empty and full coalitions are
/// pinned, everything else gets its Shapley kernel weight.
fn joint_batch(masks: Vec<Vec<bool>>, c: f64) -> MaskBatch {
    let mut batch = MaskBatch {
        masks: Vec::with_capacity(masks.len()),
        weights: Vec::with_capacity(masks.len()),
        pinned: Vec::with_capacity(masks.len()),
    };
    for m in masks {
        let mask = CoalitionMask(m);
        let (size, s) = (mask.len(), mask.count_ones());
        batch.weights.push(kernel_weight(size, s, c));
        batch.pinned.push(s == 0 || s == size);
        batch.masks.push(mask);
    }
    batch
}

/// Empty and full coalitions, plus all-features-no-nodes when both blocks
/// are present.
fn joint_anchors(players: &PlayerIndex) -> MaskSet {
    let (b, m) = (players.num_features(), players.len());
    let mut set = MaskSet::new(m);
    set.insert(vec![false; m]);
    set.insert(vec![true; m]);
    if b > 0 && players.num_nodes() > 0 {
        let mut fo = vec![false; m];
        fo[..b].fill(true);
        set.insert(fo);
    }
    set
}

impl MaskStrategy for All {
    fn name(&self) -> &'static str {
        "all"
    }

    /// Every coalition, in increasing bitmask order; ignores the budget.
    fn generate(&self, players: &PlayerIndex, _budget: usize, params: &MaskParams, _rng: &mut ChaCha8Rng) -> Result<MaskBatch> {
        let m = players.len();
        if m > MAX_ENUMERATED_PLAYERS {
            return Err(Error::TooManyPlayers {
                players: m,
                limit: MAX_ENUMERATED_PLAYERS,
            });
        }
        let masks = (0..1usize << m)
            .map(|bits| (0..m).map(|j| bits >> j & 1 == 1).collect())
            .collect();
        Ok(joint_batch(masks, params.anchor_weight))
    }
}

impl MaskStrategy for RandomMasks {
    fn name(&self) -> &'static str {
        "random"
    }

    fn generate(&self, players: &PlayerIndex, budget: usize, params: &MaskParams, rng: &mut ChaCha8Rng) -> Result<MaskBatch> {
        let mut set = joint_anchors(players);
        check_budget(budget, set.len())?;
        random_fill(&mut set, players.len(), budget, rng);
        Ok(joint_batch(set.masks, params.anchor_weight))
    }
}

impl MaskStrategy for Smart {
    fn name(&self) -> &'static str {
        "smart"
    }

    fn generate(&self, players: &PlayerIndex, budget: usize, params: &MaskParams, rng: &mut ChaCha8Rng) -> Result<MaskBatch> {
        let mut set = joint_anchors(players);
        check_budget(budget, set.len())?;
        smart_fill(&mut set, players.len(), budget, params.s_max, false, rng);
        Ok(joint_batch(set.masks, params.anchor_weight))
    }
}

/// Feature-block budget: `r·P` when `r` is given, otherwise
/// `⌊P/4 + P·B/(2M)⌋`, or `⌊P·B/M⌋` when one block is empty.
pub fn feature_budget(budget: usize, b: usize, d: usize, share: Option<f64>) -> usize {
    let p = budget as f64;
    let m = (b + d) as f64;
    let raw = match share {
        Some(r) => r * p,
        None if b == 0 || d == 0 => p * b as f64 / m,
        None => 0.5 * p / 2.0 + 0.5 * p * b as f64 / m,
    };
    raw.floor() as usize
}

/// Feature-block masks (nodes all off) and node-block masks (features all
/// on), each block sampled by `smart_fill` within its share of the budget.
fn separated(players: &PlayerIndex, budget: usize, params: &MaskParams, diverse: bool, rng: &mut ChaCha8Rng) -> Result<MaskBatch> {
    let (b, d) = (players.num_features(), players.num_nodes());
    let c = params.anchor_weight;
    if b == 0 || d == 0 {
        let size = b + d;
        let mut set = MaskSet::new(size);
        set.insert(vec![false; size]);
        set.insert(vec![true; size]);
        check_budget(budget, set.len())?;
        smart_fill(&mut set, size, budget, params.s_max, diverse, rng);
        return Ok(joint_batch(set.masks, c));
    }
    check_budget(budget, 3)?;
    // Both blocks own two anchors; (1_F, 0_N) is shared, hence the +1.
    let p_feat = feature_budget(budget, b, d, params.feature_share).clamp(2, budget - 1);
    let p_node = budget - p_feat + 1;

    let mut feat = MaskSet::new(b);
    feat.insert(vec![false; b]);
    feat.insert(vec![true; b]);
    smart_fill(&mut feat, b, p_feat, params.s_max, diverse, rng);

    let mut node = MaskSet::new(d);
    node.insert(vec![false; d]);
    node.insert(vec![true; d]);
    smart_fill(&mut node, d, p_node, params.s_max, diverse, rng);

    let m = b + d;
    let mut batch = MaskBatch {
        masks: Vec::new(),
        weights: Vec::new(),
        pinned: Vec::new(),
    };
    let mut seen = HashSet::new();
    let mut push = |z: Vec<bool>, block: usize, s: usize, batch: &mut MaskBatch| {
        if !seen.insert(z.clone()) {
            return;
        }
        let anchor = s == 0 || s == block;
        let w = match params.kernel_scope {
            _ if anchor => c,
            KernelScope::Block => kernel_weight(block, s, c),
            KernelScope::Full => kernel_weight(m, z.iter().filter(|x| **x).count(), c),
        };
        batch.masks.push(CoalitionMask(z));
        batch.weights.push(w);
        batch.pinned.push(anchor);
    };
    for fm in feat.masks {
        let s = fm.iter().filter(|x| **x).count();
        let mut z = fm;
        z.resize(m, false);
        push(z, b, s, &mut batch);
    }
    for nm in node.masks {
        let s = nm.iter().filter(|x| **x).count();
        let mut z = vec![true; b];
        z.extend(nm);
        push(z, d, s, &mut batch);
    }
    Ok(batch)
}

impl MaskStrategy for SmartSeparate {
    fn name(&self) -> &'static str {
        "smart-separate"
    }

    fn generate(&self, players: &PlayerIndex, budget: usize, params: &MaskParams, rng: &mut ChaCha8Rng) -> Result<MaskBatch> {
        separated(players, budget, params, false, rng)
    }
}

impl MaskStrategy for SmarterSeparate {
    fn name(&self) -> &'static str {
        "smarter-separate"
    }

    fn generate(&self, players: &PlayerIndex, budget: usize, params: &MaskParams, rng: &mut ChaCha8Rng) -> Result<MaskBatch> {
        separated(players, budget, params, true, rng)
    }
}
