//! Exact and stochastic leader selection, per group and across the cluster.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ParamVector;
use crate::objectives::Objective;
use crate::rng::SimRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LeaderError {
    #[error("cannot select a leader from zero workers")]
    Empty,
    #[error("worker {index} has non-finite value {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("{found} workers do not form {groups} groups of {per_group}")]
    Topology {
        groups: usize,
        per_group: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionMode {
    Exact,
    Stochastic,
}

/// Which workers compete for the global leader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GlobalRule {
    /// Argmin over every worker.
    #[default]
    AllWorkers,
    /// Argmin over the local leaders only, using their same estimates.
    AmongLocalLeaders,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WorkerId {
    pub group: usize,
    pub worker: usize,
}

impl WorkerId {
    pub fn flat(&self, per_group: usize) -> usize {
        self.group * per_group + self.worker
    }

    pub fn from_flat(index: usize, per_group: usize) -> Self {
        Self {
            group: index / per_group,
            worker: index % per_group,
        }
    }
}

/// Snapshot of the current leaders. Parameter copies are owned, so workers
/// moving afterwards never changes an entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderBoard {
    /// Per group, the index of its leader within the group.
    pub local_ids: Vec<usize>,
    pub global_id: WorkerId,
    pub local_params: Vec<ParamVector>,
    pub global_params: ParamVector,
    /// Estimated values the selection was based on.
    pub local_values: Vec<f64>,
    pub global_value: f64,
    /// Event counter at which each group's entry was last selected.
    pub selected_at: Vec<u64>,
    pub global_selected_at: u64,
}

impl LeaderBoard {
    pub fn local_leader(&self, group: usize) -> &ParamVector {
        &self.local_params[group]
    }
}

/// Index of the smallest value; ties go to the lowest index.
pub fn select_exact(values: &[f64]) -> Result<usize, LeaderError> {
    if values.is_empty() {
        return Err(LeaderError::Empty);
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(LeaderError::NonFinite { index: i, value: v });
        }
        if v < values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Draws exactly one value estimate per worker and returns the argmin of the samples.
pub fn select_stochastic(
    obj: &Objective,
    workers: &[ParamVector],
    rng: &mut SimRng,
) -> Result<usize, LeaderError> {
    if workers.is_empty() {
        return Err(LeaderError::Empty);
    }
    let samples: Vec<f64> = workers
        .iter()
        .map(|w| obj.stochastic_value(w, rng))
        .collect();
    select_exact(&samples)
}

/// Local leader per group and global leader from precomputed value estimates.
///
/// `workers` and `values` are flattened group-major: worker `i` of group `j`
/// sits at `j * per_group + i`.
pub fn select_hierarchy_from_values(
    workers: &[ParamVector],
    values: &[f64],
    groups: usize,
    per_group: usize,
    rule: GlobalRule,
    event: u64,
) -> Result<LeaderBoard, LeaderError> {
    if groups == 0
        || per_group == 0
        || workers.len() != groups * per_group
        || values.len() != workers.len()
    {
        return Err(LeaderError::Topology {
            groups,
            per_group,
            found: workers.len(),
        });
    }
    let mut local_ids = Vec::with_capacity(groups);
    for j in 0..groups {
        let slice = &values[j * per_group..(j + 1) * per_group];
        let i = select_exact(slice).map_err(|e| match e {
            LeaderError::NonFinite { index, value } => LeaderError::NonFinite {
                index: j * per_group + index,
                value,
            },
            other => other,
        })?;
        local_ids.push(i);
    }
    let global_flat = match rule {
        GlobalRule::AllWorkers => select_exact(values)?,
        GlobalRule::AmongLocalLeaders => {
            let leader_values: Vec<f64> = local_ids
                .iter()
                .enumerate()
                .map(|(j, &i)| values[j * per_group + i])
                .collect();
            let j = select_exact(&leader_values)?;
            j * per_group + local_ids[j]
        }
    };
    let global_id = WorkerId::from_flat(global_flat, per_group);
    Ok(LeaderBoard {
        local_params: local_ids
            .iter()
            .enumerate()
            .map(|(j, &i)| workers[j * per_group + i].clone())
            .collect(),
        local_values: local_ids
            .iter()
            .enumerate()
            .map(|(j, &i)| values[j * per_group + i])
            .collect(),
        local_ids,
        global_id,
        global_params: workers[global_flat].clone(),
        global_value: values[global_flat],
        selected_at: vec![event; groups],
        global_selected_at: event,
    })
}

/// Local and global leaders of a cluster, drawing one value estimate per
/// worker in stochastic mode.
#[allow(clippy::too_many_arguments)]
pub fn select_hierarchy(
    obj: &Objective,
    workers: &[ParamVector],
    groups: usize,
    per_group: usize,
    mode: SelectionMode,
    rule: GlobalRule,
    rng: &mut SimRng,
    event: u64,
) -> Result<LeaderBoard, LeaderError> {
    let values: Vec<f64> = match mode {
        SelectionMode::Exact => workers.iter().map(|w| obj.value(w)).collect(),
        SelectionMode::Stochastic => workers
            .iter()
            .map(|w| obj.stochastic_value(w, rng))
            .collect(),
    };
    select_hierarchy_from_values(workers, &values, groups, per_group, rule, event)
}
