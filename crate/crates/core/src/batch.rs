//! Many independent worlds, possibly of different mechanisms, stepped in
//! parallel. Poses and twists of all worlds live in two contiguous arrays
//! sized by the sum of per-world body counts; `body_offsets` are the prefix
//! sums that locate each world's segment.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::SolverError;
use crate::model::MechanismModel;
use crate::se3::{Pose, Twist};
use crate::stepper::{step_world, StepConfig, StepReport, WorldAux, WorldState};

#[derive(Debug, Clone)]
pub struct WorldBatch {
    models: Vec<Arc<MechanismModel>>,
    body_offsets: Vec<usize>,
    poses: Vec<Pose>,
    twists: Vec<Twist>,
    aux: Vec<WorldAux>,
    /// Worlds with `active[w] == false` are skipped by [`batch_step`].
    pub active: Vec<bool>,
    /// Whether PADMM converged in each world's most recent step.
    pub converged: Vec<bool>,
}

impl Default for WorldBatch {
    fn default() -> Self {
        Self::new()
    }
}

impl WorldBatch {
    pub fn new() -> Self {
        Self {
            models: Vec::new(),
            body_offsets: vec![0],
            poses: Vec::new(),
            twists: Vec::new(),
            aux: Vec::new(),
            active: Vec::new(),
            converged: Vec::new(),
        }
    }

    /// Append a world in its initial state; returns its index.
    pub fn push(&mut self, model: Arc<MechanismModel>) -> usize {
        let state = WorldState::new(&model);
        self.push_state(model, state)
    }

    pub fn push_state(&mut self, model: Arc<MechanismModel>, state: WorldState) -> usize {
        assert_eq!(state.poses.len(), model.n_bodies(), "state does not match model");
        self.poses.extend_from_slice(&state.poses);
        self.twists.extend_from_slice(&state.twists);
        self.body_offsets.push(self.poses.len());
        self.aux.push(state.aux);
        self.models.push(model);
        self.active.push(true);
        self.converged.push(true);
        self.models.len() - 1
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn model(&self, world: usize) -> &MechanismModel {
        &self.models[world]
    }

    pub fn body_offsets(&self) -> &[usize] {
        &self.body_offsets
    }

    /// Sum of body counts over all worlds (the allocation size).
    pub fn total_bodies(&self) -> usize {
        self.poses.len()
    }

    /// Largest per-world body count.
    pub fn max_bodies(&self) -> usize {
        self.models.iter().map(|m| m.n_bodies()).max().unwrap_or(0)
    }

    pub fn poses(&self, world: usize) -> &[Pose] {
        &self.poses[self.body_offsets[world]..self.body_offsets[world + 1]]
    }

    pub fn twists(&self, world: usize) -> &[Twist] {
        &self.twists[self.body_offsets[world]..self.body_offsets[world + 1]]
    }

    pub fn twists_mut(&mut self, world: usize) -> &mut [Twist] {
        let (a, b) = (self.body_offsets[world], self.body_offsets[world + 1]);
        &mut self.twists[a..b]
    }

    pub fn aux(&self, world: usize) -> &WorldAux {
        &self.aux[world]
    }

    pub fn aux_mut(&mut self, world: usize) -> &mut WorldAux {
        &mut self.aux[world]
    }

    /// Copy of one world's state.
    pub fn world_state(&self, world: usize) -> WorldState {
        WorldState { poses: self.poses(world).to_vec(), twists: self.twists(world).to_vec(), aux: self.aux[world].clone() }
    }
}

/// Step every active world once. Entry `w` of the result is `None` for
/// inactive worlds.
pub fn batch_step(batch: &mut WorldBatch, config: &StepConfig) -> Vec<Option<Result<StepReport, SolverError>>> {
    let mut pose_segments = Vec::with_capacity(batch.len());
    let mut twist_segments = Vec::with_capacity(batch.len());
    let (mut poses, mut twists) = (batch.poses.as_mut_slice(), batch.twists.as_mut_slice());
    for w in 0..batch.models.len() {
        let n = batch.body_offsets[w + 1] - batch.body_offsets[w];
        let (p, rest_p) = poses.split_at_mut(n);
        let (t, rest_t) = twists.split_at_mut(n);
        pose_segments.push(p);
        twist_segments.push(t);
        poses = rest_p;
        twists = rest_t;
    }

    let results: Vec<Option<Result<StepReport, SolverError>>> = pose_segments
        .into_par_iter()
        .zip(twist_segments)
        .zip(batch.aux.par_iter_mut())
        .zip(batch.models.par_iter())
        .zip(batch.active.par_iter())
        .map(|((((p, t), aux), model), &active)| active.then(|| step_world(model, p, t, aux, config)))
        .collect();

    for (w, r) in results.iter().enumerate() {
        if let Some(r) = r {
            batch.converged[w] = matches!(r, Ok(rep) if rep.diagnostics.converged);
        }
    }
    results
}
