//! Parameter-isolation continual learning.
//!
//! Every network parameter carries an owner label: `0` means free, `k > 0`
//! means permanently owned by task `k`. Training a task updates only free
//! parameters (earlier tasks stay frozen). When a task finishes, the free
//! parameters are ranked by magnitude per layer; the strongest share is
//! committed to the task, the rest are zeroed and stay free for later
//! tasks. Inference for task `n` uses only parameters owned by tasks
//! `1..=n`, so earlier policies survive later training bit for bit.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio;
use crate::nn::{MaskLayer, Mlp, UpdateMask};

/// 1-based task index. Tasks run strictly in order and never interleave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId(u32);

impl TaskId {
    pub const FIRST: TaskId = TaskId(1);

    pub fn new(index: u32) -> Result<TaskId> {
        if index == 0 {
            return Err(Error::invalid_argument("task indices are 1-based"));
        }
        Ok(TaskId(index))
    }

    #[inline]
    pub fn index(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn next(self) -> TaskId {
        TaskId(self.0 + 1)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "task {}", self.0)
    }
}

/// Pruning policy for a task commit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneConfig {
    /// Fraction of a layer's free parameters discarded at commit, in (0, 1).
    /// The usual settings are 0.50 and 0.75.
    pub ratio: f64,
    /// Masked optimizer steps to run after the commit. The harness derives
    /// this from the task's training budget.
    pub retrain_steps: usize,
    /// When false, biases are exempt from magnitude ranking: at commit every
    /// free bias is assigned to the committing task unpruned. Default is to
    /// treat biases exactly like weights in one unified per-layer array.
    pub prune_biases: bool,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            ratio: 0.5,
            retrain_steps: 0,
            prune_biases: true,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::invalid_argument(format!(
                "prune ratio must be in (0, 1), got {}",
                self.ratio
            )));
        }
        Ok(())
    }
}

/// Per-parameter task-ownership labels, shape-matched to one network.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    layers: Vec<OwnerLayer>,
    current_task: TaskId,
    committed_through: u32,
}

#[derive(Debug, Clone, PartialEq)]
struct OwnerLayer {
    /// Row-major, one label per weight.
    weight: Vec<u32>,
    bias: Vec<u32>,
}

impl MaskSet {
    /// Fresh mask set: everything free, task 1 active, nothing committed.
    pub fn new(net: &Mlp) -> MaskSet {
        MaskSet {
            layers: net
                .layers()
                .iter()
                .map(|l| OwnerLayer {
                    weight: vec![0; l.out_dim() * l.in_dim()],
                    bias: vec![0; l.out_dim()],
                })
                .collect(),
            current_task: TaskId::FIRST,
            committed_through: 0,
        }
    }

    #[inline]
    pub fn current_task(&self) -> TaskId {
        self.current_task
    }

    /// Highest task index whose commit has happened.
    #[inline]
    pub fn committed_through(&self) -> u32 {
        self.committed_through
    }

    pub fn shape_matches(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers().len()
            && self.layers.iter().zip(net.layers()).all(|(o, l)| {
                o.weight.len() == l.out_dim() * l.in_dim() && o.bias.len() == l.out_dim()
            })
    }

    /// Update gate for training `task`: 1 exactly where the owner label is 0,
    /// so parameters of earlier tasks stay frozen.
    pub fn trainable_mask(&self, task: TaskId) -> Result<UpdateMask> {
        if task != self.current_task {
            return Err(Error::invalid_state(format!(
                "trainable mask requested for {task} but {} is active",
                self.current_task
            )));
        }
        if self.committed_through >= task.index() {
            return Err(Error::invalid_state(format!(
                "{task} is already committed; free parameters now belong to later tasks"
            )));
        }
        Ok(UpdateMask {
            layers: self
                .layers
                .iter()
                .map(|o| MaskLayer {
                    weight: o.weight.iter().map(|&owner| owner == 0).collect(),
                    bias: o.bias.iter().map(|&owner| owner == 0).collect(),
                })
                .collect(),
        })
    }

    /// Update gate covering exactly the parameters owned by `task`.
    pub fn owned_mask(&self, task: TaskId) -> UpdateMask {
        UpdateMask {
            layers: self
                .layers
                .iter()
                .map(|o| MaskLayer {
                    weight: o.weight.iter().map(|&owner| owner == task.index()).collect(),
                    bias: o.bias.iter().map(|&owner| owner == task.index()).collect(),
                })
                .collect(),
        }
    }

    /// Advances to the next task. Only legal once the active task has been
    /// committed, which keeps task indices strictly increasing.
    pub fn start_next_task(&mut self) -> Result<TaskId> {
        if self.committed_through < self.current_task.index() {
            return Err(Error::invalid_state(format!(
                "cannot start a new task before {} is committed",
                self.current_task
            )));
        }
        self.current_task = self.current_task.next();
        Ok(self.current_task)
    }

    /// Number of parameters per owner label, layer by layer.
    pub fn owner_histogram(&self) -> Vec<std::collections::BTreeMap<u32, usize>> {
        self.layers
            .iter()
            .map(|o| {
                let mut counts = std::collections::BTreeMap::new();
                for &owner in o.weight.iter().chain(&o.bias) {
                    *counts.entry(owner).or_insert(0) += 1;
                }
                counts
            })
            .collect()
    }

    /// Owner labels for layer `k` as `(weights, biases)`.
    pub fn layer_owners(&self, k: usize) -> (&[u32], &[u32]) {
        (&self.layers[k].weight, &self.layers[k].bias)
    }

    /// Checks that every free parameter of `net` is exactly zero. Holds at
    /// every point after the first commit.
    pub fn zero_discipline_holds(&self, net: &Mlp) -> bool {
        self.layers.iter().zip(net.layers()).all(|(o, l)| {
            o.weight
                .iter()
                .zip(l.weight().data())
                .all(|(&owner, &w)| owner != 0 || w == 0.0)
                && o.bias
                    .iter()
                    .zip(l.bias())
                    .all(|(&owner, &b)| owner != 0 || b == 0.0)
        })
    }
}

/// Commits the active task: per layer, the free parameters are ranked by
/// absolute value (descending, ties broken toward the lowest parameter
/// index) and the top `floor((1 - ratio) * free_count)` become permanently
/// owned by `task`; the remainder are zeroed and stay free. Parameters of
/// earlier tasks are untouched.
pub fn prune_and_commit(
    net: &mut Mlp,
    masks: &mut MaskSet,
    task: TaskId,
    cfg: &PruneConfig,
) -> Result<()> {
    cfg.validate()?;
    if task != masks.current_task {
        return Err(Error::invalid_state(format!(
            "commit requested for {task} but {} is active",
            masks.current_task
        )));
    }
    if masks.committed_through >= task.index() {
        return Err(Error::invalid_state(format!("{task} is already committed")));
    }
    if !masks.shape_matches(net) {
        return Err(Error::invalid_argument(
            "mask set shape does not match the network",
        ));
    }

    for (k, (owners, layer)) in masks.layers.iter_mut().zip(net.layers_mut()).enumerate() {
        let weight_len = owners.weight.len();
        // Unified per-layer parameter array: weights first, then biases.
        let free: Vec<usize> = owners
            .weight
            .iter()
            .chain(&owners.bias)
            .enumerate()
            .filter(|(_, &owner)| owner == 0)
            .map(|(i, _)| i)
            .collect();
        if free.is_empty() {
            return Err(Error::LayerExhausted { layer: k });
        }

        let value_at = |i: usize, layer: &crate::nn::Layer| -> f64 {
            if i < weight_len {
                layer.weight().data()[i]
            } else {
                layer.bias()[i - weight_len]
            }
        };

        let (candidates, exempt): (Vec<usize>, Vec<usize>) = if cfg.prune_biases {
            (free, Vec::new())
        } else {
            free.into_iter().partition(|&i| i < weight_len)
        };

        // Biases exempt from pruning are still claimed by the task so they
        // freeze afterwards.
        for i in exempt {
            owners.bias[i - weight_len] = task.index();
        }

        if candidates.is_empty() {
            continue;
        }
        let keep = ((1.0 - cfg.ratio) * candidates.len() as f64).floor() as usize;
        let mut ranked = candidates;
        ranked.sort_by(|&a, &b| {
            value_at(b, layer)
                .abs()
                .total_cmp(&value_at(a, layer).abs())
                .then(a.cmp(&b))
        });
        for (rank, &i) in ranked.iter().enumerate() {
            if rank < keep {
                if i < weight_len {
                    owners.weight[i] = task.index();
                } else {
                    owners.bias[i - weight_len] = task.index();
                }
            } else if i < weight_len {
                let (r, c) = (i / layer.in_dim(), i % layer.in_dim());
                layer.weight_mut().set(r, c, 0.0);
            } else {
                layer.bias_mut()[i - weight_len] = 0.0;
            }
        }
    }
    masks.committed_through = task.index();
    Ok(())
}

/// Something that can run masked optimization steps on the network it owns.
/// Implemented by the learning agents; tests use small adapters.
pub trait RetrainStep {
    fn network(&self) -> &Mlp;
    /// One retraining step; only parameters selected by `mask` may move.
    fn step(&mut self, mask: &UpdateMask) -> Result<()>;
}

/// Closure-driven trainee over a free-standing network.
pub struct NetTrainee<'a, F: FnMut(&mut Mlp, &UpdateMask) -> Result<()>> {
    pub net: &'a mut Mlp,
    pub step_fn: F,
}

impl<'a, F: FnMut(&mut Mlp, &UpdateMask) -> Result<()>> RetrainStep for NetTrainee<'a, F> {
    fn network(&self) -> &Mlp {
        self.net
    }

    fn step(&mut self, mask: &UpdateMask) -> Result<()> {
        (self.step_fn)(self.net, mask)
    }
}

/// Runs `cfg.retrain_steps` masked optimizer steps over the parameters owned
/// by `task`. The trainee receives the owned-parameter gate; every parameter
/// outside the gate is verified bit-unchanged afterwards.
pub fn retrain(
    trainee: &mut dyn RetrainStep,
    masks: &MaskSet,
    task: TaskId,
    cfg: &PruneConfig,
) -> Result<()> {
    if masks.committed_through < task.index() {
        return Err(Error::invalid_state(format!(
            "retraining requires {task} to be committed first"
        )));
    }
    if !masks.shape_matches(trainee.network()) {
        return Err(Error::invalid_argument(
            "mask set shape does not match the network",
        ));
    }
    let mask = masks.owned_mask(task);
    let fence: Vec<u64> = fenced_param_bits(trainee.network(), &mask);
    for _ in 0..cfg.retrain_steps {
        trainee.step(&mask)?;
    }
    if fenced_param_bits(trainee.network(), &mask) != fence {
        return Err(Error::invalid_state(
            "retraining modified parameters outside the task's ownership",
        ));
    }
    Ok(())
}

/// Bits of every parameter NOT selected by `mask`, in a fixed order.
fn fenced_param_bits(net: &Mlp, mask: &UpdateMask) -> Vec<u64> {
    let mut bits = Vec::new();
    for (layer, ml) in net.layers().iter().zip(&mask.layers) {
        bits.extend(
            layer
                .weight()
                .data()
                .iter()
                .zip(&ml.weight)
                .filter(|(_, &sel)| !sel)
                .map(|(w, _)| w.to_bits()),
        );
        bits.extend(
            layer
                .bias()
                .iter()
                .zip(&ml.bias)
                .filter(|(_, &sel)| !sel)
                .map(|(b, _)| b.to_bits()),
        );
    }
    bits
}

/// Copy of `net` restricted to tasks `1..=task`: every parameter that is
/// free or owned by a later task reads as zero. The result is an
/// independent network safe to evaluate anywhere.
pub fn inference_view(net: &Mlp, masks: &MaskSet, task: TaskId) -> Result<Mlp> {
    if task > masks.current_task {
        return Err(Error::invalid_argument(format!(
            "unknown {task}: only tasks up to {} exist",
            masks.current_task
        )));
    }
    if !masks.shape_matches(net) {
        return Err(Error::invalid_argument(
            "mask set shape does not match the network",
        ));
    }
    let mut view = net.clone();
    for (owners, layer) in masks.layers.iter().zip(view.layers_mut()) {
        for (&owner, w) in owners.weight.iter().zip(layer.weight_mut().data_mut()) {
            if owner == 0 || owner > task.index() {
                *w = 0.0;
            }
        }
        for (&owner, b) in owners.bias.iter().zip(layer.bias_mut()) {
            if owner == 0 || owner > task.index() {
                *b = 0.0;
            }
        }
    }
    Ok(view)
}

const MASK_HEADER: &str = "jamlab-masks v1";

/// Writes the owner labels next to a parameter checkpoint. Same layout as
/// the parameter file with owner integers in place of values.
pub fn save_masks(masks: &MaskSet, path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    out.push_str(MASK_HEADER);
    out.push('\n');
    let _ = writeln!(out, "current_task {}", masks.current_task.index());
    let _ = writeln!(out, "committed_through {}", masks.committed_through);
    for (k, owners) in masks.layers.iter().enumerate() {
        let _ = writeln!(out, "layer {k} {} {}", owners.weight.len(), owners.bias.len());
        push_owner_line(&mut out, &owners.weight);
        push_owner_line(&mut out, &owners.bias);
    }
    fsio::atomic_write(path, &out)
}

pub fn load_masks(path: &Path) -> Result<MaskSet> {
    let text = fsio::read_text(path)?;
    let loc = path.display().to_string();
    let mut lines = text.lines();
    if lines.next().unwrap_or("") != MASK_HEADER {
        return Err(Error::parse(&loc, "bad mask file header"));
    }
    let current = parse_tagged(lines.next().unwrap_or(""), "current_task", &loc)?;
    let committed = parse_tagged(lines.next().unwrap_or(""), "committed_through", &loc)?;
    let current_task = TaskId::new(current).map_err(|_| Error::parse(&loc, "current_task must be >= 1"))?;

    let mut layers = Vec::new();
    let mut rest = lines.peekable();
    let mut k = 0usize;
    while rest.peek().is_some() {
        let marker = rest.next().unwrap();
        if marker.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = marker.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "layer" || parts[1] != k.to_string() {
            return Err(Error::parse(&loc, format!("bad layer marker {marker:?}")));
        }
        let wlen: usize = parts[2]
            .parse()
            .map_err(|_| Error::parse(&loc, "bad weight count"))?;
        let blen: usize = parts[3]
            .parse()
            .map_err(|_| Error::parse(&loc, "bad bias count"))?;
        let weight = parse_owner_line(rest.next().unwrap_or(""), wlen, &loc)?;
        let bias = parse_owner_line(rest.next().unwrap_or(""), blen, &loc)?;
        layers.push(OwnerLayer { weight, bias });
        k += 1;
    }
    if layers.is_empty() {
        return Err(Error::parse(&loc, "mask file has no layers"));
    }
    let masks = MaskSet {
        layers,
        current_task,
        committed_through: committed,
    };
    for owners in &masks.layers {
        if owners
            .weight
            .iter()
            .chain(&owners.bias)
            .any(|&o| o > masks.current_task.index())
        {
            return Err(Error::parse(&loc, "owner label beyond current task"));
        }
    }
    Ok(masks)
}

fn push_owner_line(out: &mut String, owners: &[u32]) {
    use std::fmt::Write as _;
    let mut first = true;
    for o in owners {
        if !first {
            out.push(' ');
        }
        let _ = write!(out, "{o}");
        first = false;
    }
    out.push('\n');
}

fn parse_tagged(line: &str, tag: &str, loc: &str) -> Result<u32> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(Error::parse(loc, format!("expected {tag} line, got {line:?}")));
    }
    parts
        .next()
        .and_then(|p| p.parse::<u32>().ok())
        .ok_or_else(|| Error::parse(loc, format!("bad {tag} value")))
}

fn parse_owner_line(line: &str, expected: usize, loc: &str) -> Result<Vec<u32>> {
    let owners: Vec<u32> = line
        .split_whitespace()
        .map(|p| {
            p.parse::<u32>()
                .map_err(|_| Error::parse(loc, format!("bad owner label {p:?}")))
        })
        .collect::<Result<_>>()?;
    if owners.len() != expected {
        return Err(Error::parse(
            loc,
            format!("expected {expected} owner labels, found {}", owners.len()),
        ));
    }
    Ok(owners)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{AdamWConfig, AdamWState, GradientBuffer};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// 1x4 layer with the given weights and a zero bias.
    fn single_layer_net(weights: &[f64]) -> Mlp {
        let mut net = Mlp::new(&[weights.len(), 1], 0).unwrap();
        net.layers_mut()[0]
            .weight_mut()
            .data_mut()
            .copy_from_slice(weights);
        net.layers_mut()[0].bias_mut()[0] = 0.0;
        net
    }

    fn cfg(ratio: f64) -> PruneConfig {
        PruneConfig {
            ratio,
            ..PruneConfig::default()
        }
    }

    /// A few masked regression steps; used as "training" in the toy runs.
    fn train_steps(net: &mut Mlp, mask: &UpdateMask, steps: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut opt = AdamWState::new(net, AdamWConfig::default());
        for _ in 0..steps {
            let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (y, cache) = net.forward(&x).unwrap();
            let og: Vec<f64> = y.iter().zip(&t).map(|(a, b)| a - b).collect();
            let grads = net.backward(&cache, &og).unwrap();
            opt.step(net, &grads, Some(mask)).unwrap();
        }
    }

    #[test]
    fn fresh_mask_set_trains_everything() {
        let net = Mlp::new(&[3, 5, 2], 0).unwrap();
        let masks = MaskSet::new(&net);
        let mask = masks.trainable_mask(TaskId::FIRST).unwrap();
        assert_eq!(mask.count_ones(), net.param_count());
    }

    #[test]
    fn trainable_mask_rejects_wrong_task() {
        let net = Mlp::new(&[3, 5, 2], 0).unwrap();
        let masks = MaskSet::new(&net);
        assert!(masks.trainable_mask(TaskId::new(2).unwrap()).is_err());
    }

    #[test]
    fn commit_ranks_by_magnitude_and_zeroes_the_rest() {
        let mut net = single_layer_net(&[3.0, 1.0, 4.0, 2.0]);
        let mut masks = MaskSet::new(&net);
        // Unified array is [3, 1, 4, 2, bias 0]: keep floor(2.5) = 2.
        prune_and_commit(&mut net, &mut masks, TaskId::FIRST, &cfg(0.5)).unwrap();
        let (w_owners, b_owners) = masks.layer_owners(0);
        assert_eq!(w_owners, &[1, 0, 1, 0], "values 4 and 3 are kept");
        assert_eq!(b_owners, &[0]);
        assert_eq!(net.layers()[0].weight().data(), &[3.0, 0.0, 4.0, 0.0]);
        assert!(masks.zero_discipline_holds(&net));
    }

    #[test]
    fn commit_breaks_ties_toward_lowest_index() {
        let mut net = single_layer_net(&[0.7, 0.7, 0.7, 0.7]);
        let mut masks = MaskSet::new(&net);
        prune_and_commit(&mut net, &mut masks, TaskId::FIRST, &cfg(0.5)).unwrap();
        let (w_owners, _) = masks.layer_owners(0);
        assert_eq!(w_owners, &[1, 1, 0, 0]);
    }

    #[test]
    fn second_task_sees_half_the_free_weights() {
        let mut net = single_layer_net(&[3.0, 1.0, 4.0, 2.0]);
        let mut masks = MaskSet::new(&net);
        prune_and_commit(&mut net, &mut masks, TaskId::FIRST, &cfg(0.5)).unwrap();
        let task2 = masks.start_next_task().unwrap();

        let mask = masks.trainable_mask(task2).unwrap();
        let weight_ones = mask.layers[0].weight.iter().filter(|&&b| b).count();
        assert_eq!(weight_ones, 2, "two of four weights stay trainable");

        // Give the free parameters distinct magnitudes, then commit task 2.
        net.layers_mut()[0].weight_mut().set(0, 1, -0.9);
        net.layers_mut()[0].weight_mut().set(0, 3, 0.2);
        prune_and_commit(&mut net, &mut masks, task2, &cfg(0.5)).unwrap();
        let (w_owners, b_owners) = masks.layer_owners(0);
        // Free pool was {w1 = -0.9, w3 = 0.2, bias 0}: keep floor(1.5) = 1.
        assert_eq!(w_owners, &[1, 2, 1, 0]);
        assert_eq!(b_owners, &[0]);
        let free_weights = w_owners.iter().filter(|&&o| o == 0).count();
        assert_eq!(free_weights, 1);
    }

    #[test]
    fn commit_requires_free_parameters() {
        let mut net = single_layer_net(&[1.0, 2.0]);
        // Hand the whole layer to task 1 via a crafted mask file.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("masks.txt");
        fsio::atomic_write(
            &path,
            "jamlab-masks v1\ncurrent_task 1\ncommitted_through 1\nlayer 0 2 1\n1 1\n1\n",
        )
        .unwrap();
        let mut masks = load_masks(&path).unwrap();
        let task2 = masks.start_next_task().unwrap();
        match prune_and_commit(&mut net, &mut masks, task2, &cfg(0.5)) {
            Err(Error::LayerExhausted { layer: 0 }) => {}
            other => panic!("expected LayerExhausted, got {other:?}"),
        }
    }

    #[test]
    fn bias_exempt_mode_claims_biases_unpruned() {
        let mut net = single_layer_net(&[3.0, 1.0, 4.0, 2.0]);
        net.layers_mut()[0].bias_mut()[0] = 0.05;
        let mut masks = MaskSet::new(&net);
        let mut c = cfg(0.5);
        c.prune_biases = false;
        prune_and_commit(&mut net, &mut masks, TaskId::FIRST, &c).unwrap();
        let (w_owners, b_owners) = masks.layer_owners(0);
        assert_eq!(w_owners, &[1, 0, 1, 0]);
        assert_eq!(b_owners, &[1], "bias belongs to task 1 without pruning");
        assert_eq!(net.layers()[0].bias()[0], 0.05, "bias value survives");
    }

    #[test]
    fn invalid_ratio_is_rejected() {
        let mut net = single_layer_net(&[1.0, 2.0]);
        let mut masks = MaskSet::new(&net);
        for ratio in [0.0, 1.0, -0.2, 1.7] {
            assert!(prune_and_commit(&mut net, &mut masks, TaskId::FIRST, &cfg(ratio)).is_err());
        }
    }

    #[test]
    fn task_one_parameters_survive_all_task_two_activity() {
        let mut net = Mlp::new(&[3, 10, 4], 17).unwrap();
        let mut masks = MaskSet::new(&net);

        let mask1 = masks.trainable_mask(TaskId::FIRST).unwrap();
        train_steps(&mut net, &mask1, 25, 100);
        prune_and_commit(&mut net, &mut masks, TaskId::FIRST, &cfg(0.5)).unwrap();

        let owned1 = masks.owned_mask(TaskId::FIRST);
        let snapshot: Vec<u64> = owned_bits(&net, &owned1);
        let view1_before = inference_view(&net, &masks, TaskId::FIRST).unwrap();

        let task2 = masks.start_next_task().unwrap();
        let mask2 = masks.trainable_mask(task2).unwrap();
        train_steps(&mut net, &mask2, 25, 200);
        prune_and_commit(&mut net, &mut masks, task2, &cfg(0.5)).unwrap();
        let mut retrain_cfg = cfg(0.5);
        retrain_cfg.retrain_steps = 10;
        let mut trainee = NetTrainee {
            net: &mut net,
            step_fn: |n: &mut Mlp, m: &UpdateMask| {
                train_steps(n, m, 1, 300);
                Ok(())
            },
        };
        retrain(&mut trainee, &masks, task2, &retrain_cfg).unwrap();

        assert_eq!(owned_bits(&net, &owned1), snapshot);
        assert!(masks.zero_discipline_holds(&net));

        // Task-1 view is retention-exact on arbitrary inputs.
        let view1_after = inference_view(&net, &masks, TaskId::FIRST).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = view1_before.output(&x).unwrap();
            let b = view1_after.output(&x).unwrap();
            assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    fn owned_bits(net: &Mlp, mask: &UpdateMask) -> Vec<u64> {
        let mut bits = Vec::new();
        for (layer, ml) in net.layers().iter().zip(&mask.layers) {
            bits.extend(
                layer
                    .weight()
                    .data()
                    .iter()
                    .zip(&ml.weight)
                    .filter(|(_, &sel)| sel)
                    .map(|(w, _)| w.to_bits()),
            );
            bits.extend(
                layer
                    .bias()
                    .iter()
                    .zip(&ml.bias)
                    .filter(|(_, &sel)| sel)
                    .map(|(b, _)| b.to_bits()),
            );
        }
        bits
    }

    #[test]
    fn retrain_zero_steps_is_identity() {
        let mut net = Mlp::new(&[2, 6, 2], 3).unwrap();
        let mut masks = MaskSet::new(&net);
        prune_and_commit(&mut net, &mut masks, TaskId::FIRST, &cfg(0.5)).unwrap();
        let before = net.clone();
        let mut trainee = NetTrainee {
            net: &mut net,
            step_fn: |_: &mut Mlp, _: &UpdateMask| panic!("no steps requested"),
        };
        retrain(&mut trainee, &masks, TaskId::FIRST, &cfg(0.5)).unwrap();
        assert!(crate::nn::mlp::params_bits_equal(&net, &before));
    }

    #[test]
    fn retrain_before_commit_is_rejected() {
        let mut net = Mlp::new(&[2, 4, 2], 3).unwrap();
        let masks = MaskSet::new(&net);
        let mut trainee = NetTrainee {
            net: &mut net,
            step_fn: |_: &mut Mlp, _: &UpdateMask| Ok(()),
        };
        assert!(retrain(&mut trainee, &masks, TaskId::FIRST, &cfg(0.5)).is_err());
    }

    #[test]
    fn retrain_detects_out_of_mask_writes() {
        let mut net = Mlp::new(&[2, 4, 2], 3).unwrap();
        let mut masks = MaskSet::new(&net);
        prune_and_commit(&mut net, &mut masks, TaskId::FIRST, &cfg(0.5)).unwrap();
        let mut bad_cfg = cfg(0.5);
        bad_cfg.retrain_steps = 1;
        let mut trainee = NetTrainee {
            net: &mut net,
            step_fn: |n: &mut Mlp, _: &UpdateMask| {
                // Deliberately stomp a free (zeroed) parameter.
                let idx = n.layers()[0]
                    .weight()
                    .data()
                    .iter()
                    .position(|&w| w == 0.0)
                    .unwrap();
                n.layers_mut()[0].weight_mut().data_mut()[idx] = 9.9;
                Ok(())
            },
        };
        let result = retrain(&mut trainee, &masks, TaskId::FIRST, &bad_cfg);
        assert!(matches!(result, Err(Error::InvalidState(_))));
    }

    #[test]
    fn retrain_recovers_loss_after_prune() {
        // Fixed regression problem: y = Wx on four probe points.
        let probes: Vec<(Vec<f64>, Vec<f64>)> = vec![
            (vec![1.0, 0.0], vec![0.6, -0.2]),
            (vec![0.0, 1.0], vec![-0.4, 0.8]),
            (vec![0.5, 0.5], vec![0.1, 0.3]),
            (vec![-0.5, 1.0], vec![-0.7, 0.5]),
        ];
        let loss = |net: &Mlp| -> f64 {
            probes
                .iter()
                .map(|(x, t)| {
                    let y = net.output(x).unwrap();
                    0.5 * y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                })
                .sum::<f64>()
                / probes.len() as f64
        };

        let mut net = Mlp::new(&[2, 12, 2], 5).unwrap();
        let mut masks = MaskSet::new(&net);
        let mask1 = masks.trainable_mask(TaskId::FIRST).unwrap();

        let fit = |net: &mut Mlp, mask: &UpdateMask, steps: usize, probes: &[(Vec<f64>, Vec<f64>)]| {
            let mut opt = AdamWState::new(
                net,
                AdamWConfig {
                    weight_decay: 0.0,
                    ..AdamWConfig::default()
                },
            );
            for _ in 0..steps {
                let mut grads = GradientBuffer::zeros_like(net);
                for (x, t) in probes {
                    let (y, cache) = net.forward(x).unwrap();
                    let og: Vec<f64> = y.iter().zip(t).map(|(a, b)| a - b).collect();
                    net.backward_into(&cache, &og, &mut grads).unwrap();
                }
                grads.scale(1.0 / probes.len() as f64);
                opt.step(net, &grads, Some(mask)).unwrap();
            }
        };

        fit(&mut net, &mask1, 300, &probes);
        prune_and_commit(&mut net, &mut masks, TaskId::FIRST, &cfg(0.5)).unwrap();
        let loss_after_prune = loss(&net);

        let mut retrain_cfg = cfg(0.5);
        retrain_cfg.retrain_steps = 1;
        let mut trainee = NetTrainee {
            net: &mut net,
            step_fn: |n: &mut Mlp, m: &UpdateMask| {
                fit(n, m, 150, &probes);
                Ok(())
            },
        };
        retrain(&mut trainee, &masks, TaskId::FIRST, &retrain_cfg).unwrap();
        let loss_after_retrain = loss(&net);
        assert!(
            loss_after_retrain <= loss_after_prune,
            "retrain should not make things worse: {loss_after_retrain} vs {loss_after_prune}"
        );
    }

    #[test]
    fn inference_view_hides_free_and_later_parameters() {
        let mut net = Mlp::new(&[2, 6, 2], 9).unwrap();
        let mut masks = MaskSet::new(&net);
        prune_and_commit(&mut net, &mut masks, TaskId::FIRST, &cfg(0.5)).unwrap();
        let view = inference_view(&net, &masks, TaskId::FIRST).unwrap();
        // Free parameters are already zero after the commit, so the view
        // over the latest committed task equals the network itself.
        assert!(crate::nn::mlp::params_bits_equal(&view, &net));

        assert!(inference_view(&net, &masks, TaskId::new(3).unwrap()).is_err());
    }

    #[test]
    fn fully_owned_single_task_view_is_the_whole_net() {
        let net = single_layer_net(&[1.0, -2.0, 3.0, -4.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("masks.txt");
        fsio::atomic_write(
            &path,
            "jamlab-masks v1\ncurrent_task 1\ncommitted_through 1\nlayer 0 4 1\n1 1 1 1\n1\n",
        )
        .unwrap();
        let masks = load_masks(&path).unwrap();
        let view = inference_view(&net, &masks, TaskId::FIRST).unwrap();
        assert!(crate::nn::mlp::params_bits_equal(&view, &net));
    }

    #[test]
    fn mask_checkpoint_round_trips() {
        let mut net = Mlp::new(&[3, 7, 2], 31).unwrap();
        let mut masks = MaskSet::new(&net);
        let mask1 = masks.trainable_mask(TaskId::FIRST).unwrap();
        train_steps(&mut net, &mask1, 10, 1);
        prune_and_commit(&mut net, &mut masks, TaskId::FIRST, &cfg(0.5)).unwrap();
        masks.start_next_task().unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("masks.txt");
        save_masks(&masks, &path).unwrap();
        let loaded = load_masks(&path).unwrap();
        assert_eq!(loaded, masks);
        assert!(loaded.shape_matches(&net));
    }

    #[test]
    fn mask_checkpoint_rejects_corruption() {
        let net = Mlp::new(&[2, 3], 0).unwrap();
        let masks = MaskSet::new(&net);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("masks.txt");
        save_masks(&masks, &path).unwrap();
        let good = fsio::read_text(&path).unwrap();
        for bad in [
            good.replace("jamlab-masks v1", "nope"),
            good.replace("current_task 1", "current_task 0"),
            good.replace("layer 0 6 3", "layer 0 6 4"),
            good.replace("current_task 1", "current_task x"),
        ] {
            if bad == good {
                continue;
            }
            fsio::atomic_write(&path, &bad).unwrap();
            assert!(load_masks(&path).is_err(), "accepted corrupt mask file:\n{bad}");
        }
    }

    #[test]
    fn start_next_task_requires_commit() {
        let net = Mlp::new(&[2, 3], 0).unwrap();
        let mut masks = MaskSet::new(&net);
        assert!(masks.start_next_task().is_err());
    }
}
