//! The teaching loop of a single trial.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::advice::{AdviceEvent, Teacher};
use crate::env::{Action, Environment};
use crate::learners::{Learner, UpdateRule};
use crate::policies::{greedy_action, PolicySpec};
use crate::stats::{mean, std_dev};

use super::convergence::{first_quiet_run, sup_norm_diff};
use super::seed::{stream_rng, Stream};
use super::HarnessError;

/// Loop parameters of one trial, independent of domain and learner types.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSettings {
    pub episodes: usize,
    pub gamma: f64,
    pub policy: PolicySpec,
    /// Truncates episodes that have not terminated after this many steps.
    pub step_cap: Option<u64>,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub convergence_epsilon: f64,
    pub convergence_window: usize,
    pub log_advice: bool,
}

/// Mean and spread of the greedy evaluation episodes run after `episode` training episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalCheckpoint {
    pub episode: usize,
    pub mean_return: f64,
    pub std_return: f64,
}

/// Everything recorded during one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub trial: usize,
    pub seed: u64,
    pub returns: Vec<f64>,
    pub steps: Vec<u64>,
    /// Advice units spent during each episode.
    pub advice_spent: Vec<u64>,
    pub evaluations: Vec<EvalCheckpoint>,
    /// `||params_after_episode_i - params_before_episode_i||_inf`.
    pub parameter_changes: Vec<f64>,
    /// Episodes completed when the convergence criterion was first met.
    pub convergence_episode: Option<usize>,
    pub final_parameters: Vec<f64>,
    pub advice_log: Vec<AdviceEvent>,
}

impl LearningCurve {
    /// Area under the curve: the trial's total reward.
    pub fn total_reward(&self) -> f64 {
        crate::stats::auc(&self.returns)
    }

    pub fn final_reward(&self) -> f64 {
        *self
            .returns
            .last()
            .expect("a trial has at least one episode")
    }

    pub fn total_advice(&self) -> u64 {
        self.advice_spent.iter().sum()
    }
}

struct Loop<'a, E: Environment, L, R> {
    env: &'a mut E,
    learner: &'a mut L,
    teacher: &'a mut Teacher<E::State>,
    settings: &'a TrialSettings,
    rng: R,
    values: Vec<f64>,
    log: Vec<AdviceEvent>,
}

impl<E, L, R> Loop<'_, E, L, R>
where
    E: Environment,
    L: Learner<E::State>,
    R: Rng,
{
    fn intended(&mut self, state: &E::State) -> Result<Action, HarnessError> {
        self.learner.action_values(state, &mut self.values);
        let visits = self.learner.state_visits(state);
        Ok(self
            .settings
            .policy
            .select(&self.values, visits, &mut self.rng)?)
    }

    /// Student proposal followed by the teacher's chance to override it.
    fn act(
        &mut self,
        state: &E::State,
        episode: usize,
        step: u64,
    ) -> Result<(Action, bool), HarnessError> {
        let intended = self.intended(state)?;
        match self.teacher.advise(state, intended)? {
            Some(advised) => {
                if self.settings.log_advice {
                    self.log.push(AdviceEvent {
                        episode,
                        step,
                        state_id: self.env.state_id(state),
                        intended,
                        advised,
                    });
                }
                Ok((advised, true))
            }
            None => Ok((intended, false)),
        }
    }

    fn learn(
        &mut self,
        tr: &crate::env::Transition<E::State>,
        next: Option<Action>,
        episode: usize,
    ) -> Result<(), HarnessError> {
        self.learner
            .learn(tr, next, self.settings.gamma)
            .map(|_| ())
            .map_err(|source| HarnessError::Learner { episode, source })
    }

    /// One training episode; returns `(return, steps, advice spent)`.
    fn episode(&mut self, episode: usize) -> Result<(f64, u64, u64), HarnessError> {
        let cap = self.settings.step_cap.unwrap_or(u64::MAX);
        let state = self.env.reset(&mut self.rng);
        let mut spent = 0;
        let mut ret = 0.0;
        let mut steps = 0;
        if self.env.is_terminal(&state) {
            return Ok((0.0, 0, 0));
        }
        let (mut action, advised) = self.act(&state, episode, 0)?;
        spent += advised as u64;
        loop {
            let tr = self.env.step(action, &mut self.rng)?;
            steps += 1;
            ret += tr.reward;
            if tr.done {
                self.learn(&tr, None, episode)?;
                break;
            }
            let truncated = steps >= cap;
            match self.learner.rule() {
                UpdateRule::Sarsa => {
                    // bootstrap on the action that will actually run next, after advice
                    let next = if truncated {
                        self.intended(&tr.next_state)?
                    } else {
                        let (a, advised) = self.act(&tr.next_state, episode, steps)?;
                        spent += advised as u64;
                        a
                    };
                    self.learn(&tr, Some(next), episode)?;
                    action = next;
                }
                UpdateRule::QLearning => {
                    self.learn(&tr, None, episode)?;
                    if !truncated {
                        let (a, advised) = self.act(&tr.next_state, episode, steps)?;
                        spent += advised as u64;
                        action = a;
                    }
                }
            }
            if truncated {
                break;
            }
        }
        Ok((ret, steps, spent))
    }
}

/// Greedy episodes with learning and advice switched off.
fn evaluate<E, L, R>(
    env: &mut E,
    learner: &L,
    settings: &TrialSettings,
    rng: &mut R,
) -> Result<(f64, f64), HarnessError>
where
    E: Environment,
    L: Learner<E::State>,
    R: Rng,
{
    let cap = settings.step_cap.unwrap_or(u64::MAX);
    let mut values = vec![0.0; env.num_actions()];
    let mut returns = Vec::with_capacity(settings.eval_episodes);
    for _ in 0..settings.eval_episodes {
        let mut state = env.reset(rng);
        let mut ret = 0.0;
        let mut steps = 0;
        while !env.is_terminal(&state) && steps < cap {
            learner.action_values(&state, &mut values);
            let tr = env.step(greedy_action(&values)?, rng)?;
            ret += tr.reward;
            steps += 1;
            state = tr.next_state;
        }
        returns.push(ret);
    }
    Ok((mean(&returns), std_dev(&returns)))
}

/// Runs one trial of the teaching loop.
///
/// Per episode the student proposes an action from its current estimates, the
/// teacher may override it, the environment steps, and the learner updates with
/// the executed action. Sarsa bootstraps on the next executed (post-advice)
/// action; Q-learning chooses its next action after the update.
pub fn run_trial_with<E, L>(
    env: &mut E,
    learner: &mut L,
    teacher: &mut Teacher<E::State>,
    settings: &TrialSettings,
    trial: usize,
    trial_seed: u64,
) -> Result<LearningCurve, HarnessError>
where
    E: Environment,
    L: Learner<E::State>,
{
    let n = settings.episodes;
    let budget = teacher.budget();
    let mut eval_rng = stream_rng(trial_seed, Stream::Eval);
    let mut returns = Vec::with_capacity(n);
    let mut steps = Vec::with_capacity(n);
    let mut advice_spent = Vec::with_capacity(n);
    let mut evaluations = Vec::new();
    let mut parameter_changes = Vec::with_capacity(n);
    let mut previous = learner.parameters().to_vec();
    let num_actions = env.num_actions();

    let mut lp = Loop {
        env,
        learner,
        teacher,
        settings,
        rng: stream_rng(trial_seed, Stream::Train),
        values: vec![0.0; num_actions],
        log: Vec::new(),
    };
    for episode in 1..=n {
        let (ret, len, spent) = lp.episode(episode)?;
        returns.push(ret);
        steps.push(len);
        advice_spent.push(spent);
        let current = lp.learner.parameters();
        parameter_changes.push(sup_norm_diff(&previous, current));
        previous.copy_from_slice(current);
        if settings.eval_every > 0 && episode % settings.eval_every == 0 {
            let (mean_return, std_return) =
                evaluate(lp.env, &*lp.learner, settings, &mut eval_rng)?;
            evaluations.push(EvalCheckpoint {
                episode,
                mean_return,
                std_return,
            });
        }
    }

    let total: u64 = advice_spent.iter().sum();
    if total > budget || lp.teacher.spent() != total {
        return Err(HarnessError::BudgetExceeded {
            spent: total.max(lp.teacher.spent()),
            budget,
        });
    }
    let threshold = settings.convergence_epsilon / lp.learner.convergence_scale();
    let convergence_episode =
        first_quiet_run(&parameter_changes, threshold, settings.convergence_window);
    Ok(LearningCurve {
        trial,
        seed: trial_seed,
        returns,
        steps,
        advice_spent,
        evaluations,
        parameter_changes,
        convergence_episode,
        final_parameters: previous,
        advice_log: lp.log,
    })
}
