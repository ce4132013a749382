//! Principal-submatrix relaxation of the `W = [[Y, X], [Xᵀ, Θ]] ⪰ 0` block.

use std::collections::{BTreeSet, VecDeque};

use mcse_conic::Constraint;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EstimationModel;
use crate::error::{CoreError, Result};
use crate::measgen::M;

/// Label of the principal-submatrix blocks.
pub const SUB_LABEL: &str = "w_sub";

/// Index sets into `{0, …, n+4}`: `0..n` address `Y`, `n..n+5` address `Θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmatrixPlan {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Sorted index sets, each of size `d`, in lexicographic order.
    pub sets: Vec<Vec<usize>>,
    /// Entries `(i, j)` of `X` not covered by any set.
    pub uncovered: Vec<(usize, usize)>,
}

impl SubmatrixPlan {
    pub fn n_d(&self) -> usize {
        self.sets.len()
    }

    pub fn covers_all(&self) -> bool {
        self.uncovered.is_empty()
    }

    /// Plan from explicit index sets; coverage is recomputed.
    pub fn from_sets(n: usize, mut sets: Vec<Vec<usize>>) -> Result<Self> {
        let mut d = 0;
        for s in &mut sets {
            s.sort_unstable();
            s.dedup();
            if s.iter().any(|&i| i >= n + M) {
                return Err(CoreError::InvalidParameter(format!("index set {s:?} exceeds {}", n + M)));
            }
            d = d.max(s.len());
        }
        sets.sort();
        sets.dedup();
        let uncovered = uncovered_entries(n, &sets);
        Ok(Self {
            n,
            d,
            seed: 0,
            sets,
            uncovered,
        })
    }
}

fn covered_by(n: usize, set: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    let split = set.partition_point(|&i| i < n);
    let (rows, cols) = set.split_at(split);
    rows.iter().flat_map(move |&i| cols.iter().map(move |&c| (i, c - n)))
}

fn uncovered_entries(n: usize, sets: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut hit = vec![false; n * M];
    for s in sets {
        for (i, j) in covered_by(n, s) {
            hit[i * M + j] = true;
        }
    }
    (0..n * M).filter(|&e| !hit[e]).map(|e| (e / M, e % M)).collect()
}

/// Buses in breadth-first order from `start`, excluding `start`.
fn bfs_order(adjacency: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut seen = vec![false; adjacency.len()];
    let mut order = Vec::new();
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(b) = queue.pop_front() {
        for &nb in &adjacency[b] {
            if !seen[nb] {
                seen[nb] = true;
                order.push(nb);
                queue.push_back(nb);
            }
        }
    }
    order
}

/// Fills `set` to `d` entries with random unused indices, buses first.
fn pad(set: &mut BTreeSet<usize>, n: usize, d: usize, rng: &mut ChaCha8Rng) {
    let mut pool: Vec<usize> = (0..n).filter(|i| !set.contains(i)).collect();
    pool.shuffle(rng);
    let mut extra: Vec<usize> = (n..n + M).filter(|i| !set.contains(i)).collect();
    extra.shuffle(rng);
    for i in pool.into_iter().chain(extra) {
        if set.len() >= d {
            break;
        }
        set.insert(i);
    }
}

/// One index set per entry `(i, j)` of `X`: `{i, n+j}` plus the `d − 2`
/// buses nearest to `i` in the feeder graph, padded randomly when the graph
/// runs out. With a cap below the base count the sets are subsampled,
/// keeping sets that add coverage first; with a larger cap extra sets drawn
/// from each anchor's wider neighbourhood are added.
pub fn select_submatrices(
    n: usize,
    adjacency: &[Vec<usize>],
    d: usize,
    cap: Option<usize>,
    seed: u64,
) -> Result<SubmatrixPlan> {
    if d < 2 || d > n + M {
        return Err(CoreError::InvalidParameter(format!("block size d = {d} outside [2, {}]", n + M)));
    }
    if adjacency.len() != n {
        return Err(CoreError::Dimension(format!("adjacency has {} buses, expected {n}", adjacency.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut base = Vec::with_capacity(n * M);
    let orders: Vec<Vec<usize>> = (0..n).map(|i| bfs_order(adjacency, i)).collect();
    for i in 0..n {
        for j in 0..M {
            let mut set = BTreeSet::from([i, n + j]);
            set.extend(orders[i].iter().copied().take(d - 2));
            pad(&mut set, n, d, &mut rng);
            let v: Vec<usize> = set.into_iter().collect();
            if seen.insert(v.clone()) {
                base.push(v);
            }
        }
    }

    let sets = match cap {
        Some(cap) if cap < base.len() => {
            base.shuffle(&mut rng);
            let mut hit = vec![false; n * M];
            let (mut keep, mut rest) = (Vec::with_capacity(cap), Vec::new());
            for s in base {
                let fresh = covered_by(n, &s).any(|(i, j)| !hit[i * M + j]);
                if fresh && keep.len() < cap {
                    for (i, j) in covered_by(n, &s) {
                        hit[i * M + j] = true;
                    }
                    keep.push(s);
                } else {
                    rest.push(s);
                }
            }
            keep.extend(rest.into_iter().take(cap - keep.len()));
            keep
        }
        Some(cap) if cap > base.len() => {
            let reach = 3 * (d - 2).max(1);
            let mut attempts = 0;
            while base.len() < cap && attempts < 100 * cap {
                attempts += 1;
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..M);
                let mut near: Vec<usize> = orders[i].iter().copied().take(reach).collect();
                near.shuffle(&mut rng);
                let mut set = BTreeSet::from([i, n + j]);
                set.extend(near.into_iter().take(d - 2));
                pad(&mut set, n, d, &mut rng);
                let v: Vec<usize> = set.into_iter().collect();
                if seen.insert(v.clone()) {
                    base.push(v);
                }
            }
            base
        }
        _ => base,
    };
    let mut sets = sets;
    sets.sort();
    let uncovered = uncovered_entries(n, &sets);
    if !uncovered.is_empty() {
        log::warn!("submatrix plan leaves {} entries of X uncovered", uncovered.len());
    }
    Ok(SubmatrixPlan {
        n,
        d,
        seed,
        sets,
        uncovered,
    })
}

/// Replaces the full `W ⪰ 0` block by one PSD constraint per index set of
/// `plan` on the matching principal submatrix. Diagonal entries of `W` that
/// no set touches keep their implied sign constraint.
pub fn apply_sparse_psd(model: &EstimationModel, plan: &SubmatrixPlan) -> Result<EstimationModel> {
    if plan.n != model.n {
        return Err(CoreError::Dimension(format!("plan for {} buses, model has {}", plan.n, model.n)));
    }
    let mut out = model.clone();
    let handles = out.projection.as_mut().ok_or_else(|| {
        CoreError::InvalidParameter(format!("{} model has no W block", model.kind.as_str()))
    })?;
    let id = handles
        .w_block
        .take()
        .ok_or_else(|| CoreError::InvalidParameter("W block already replaced".into()))?;
    let removed = out.program.remove_constraint(id)?;
    let Constraint::Psd { expr } = removed.constraint else {
        return Err(CoreError::InvalidParameter("W handle does not refer to a PSD block".into()));
    };
    let mut touched = vec![false; expr.dim()];
    for set in &plan.sets {
        out.program.add_psd_sym(SUB_LABEL, expr.principal(set))?;
        for &i in set {
            touched[i] = true;
        }
    }
    for (i, _) in touched.iter().enumerate().filter(|(_, t)| !**t) {
        out.program.add_ge(SUB_LABEL, expr.get(i, i).clone(), 0.0)?;
    }
    out.submatrices = plan.sets.len();
    Ok(out)
}
