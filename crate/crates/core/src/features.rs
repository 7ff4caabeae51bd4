//! Feature maps `phi(s, a)` for linear function approximation.

use crate::env::Action;

/// Maps a state-action pair to a real vector of fixed dimension.
pub trait FeatureMap<S> {
    fn dim(&self) -> usize;

    fn num_actions(&self) -> usize;

    /// Writes `phi(state, action)` into `out`, which has length [`FeatureMap::dim`].
    fn features_into(&self, state: &S, action: Action, out: &mut [f64]);

    fn features(&self, state: &S, action: Action) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.features_into(state, action, &mut out);
        out
    }
}

/// Indicator features over a finite state space: `phi(s, a) = e_{s * |A| + a}`.
///
/// With these features linear Q-learning and Sarsa reduce to their tabular forms.
#[derive(Debug, Clone, Copy)]
pub struct OneHot {
    num_states: usize,
    num_actions: usize,
}

impl OneHot {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
        }
    }

    pub fn index(&self, state: usize, action: Action) -> usize {
        state * self.num_actions + action
    }
}

impl FeatureMap<usize> for OneHot {
    fn dim(&self) -> usize {
        self.num_states * self.num_actions
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn features_into(&self, state: &usize, action: Action, out: &mut [f64]) {
        out.fill(0.0);
        out[self.index(*state, action)] = 1.0;
    }
}

/// The constant feature `phi = [1]` on a finite state space.
#[derive(Debug, Clone, Copy)]
pub struct Constant {
    num_actions: usize,
}

impl Constant {
    pub fn new(num_actions: usize) -> Self {
        Self { num_actions }
    }
}

impl FeatureMap<usize> for Constant {
    fn dim(&self) -> usize {
        1
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn features_into(&self, _state: &usize, _action: Action, out: &mut [f64]) {
        out[0] = 1.0;
    }
}
