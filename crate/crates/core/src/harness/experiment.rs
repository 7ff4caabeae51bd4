//! Experiments: many seeded trials of one configuration, aggregated.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advice::{make_teacher, SharedOracle, Teacher, TeacherQuality};
use crate::env::{
    GridPursuit, LinearChain, Maze, PursuitFeatures, PursuitState, SingleState, TabularDomain,
    TwoState,
};
use crate::features::{FeatureMap, OneHot};
use crate::learners::{LinearLearner, LinearQ, QTable, TabularLearner, UpdateRule, WeightVector};
use crate::oracle::value_iteration;
use crate::policies::PolicySpec;
use crate::stats::{mean, std_dev};

use super::assumptions::{check_fa_assumptions, AssumptionReport};
use super::config::{DomainKind, ExperimentConfig};
use super::seed::{mix, stream_rng, stream_seed, trial_seed, Stream, PRETRAIN_INDEX};
use super::trial::{run_trial_with, LearningCurve, TrialSettings};
use super::HarnessError;

/// Mean and sample standard deviation across trials at one evaluation checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episode: usize,
    pub mean_return: f64,
    pub std_return: f64,
}

/// Aggregate of all trials of one experiment group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub group: String,
    pub trials: usize,
    pub episodes: usize,
    pub mean_returns: Vec<f64>,
    pub std_returns: Vec<f64>,
    pub mean_advice_spent: Vec<f64>,
    pub evaluations: Vec<EvalSummary>,
    /// Final reward: return of the last episode.
    pub fr_mean: f64,
    pub fr_std: f64,
    /// Total reward: area under each trial's curve.
    pub tr_mean: f64,
    pub tr_std: f64,
    /// Per-trial total rewards, in trial order (the AUC samples).
    pub tr_samples: Vec<f64>,
    pub curves: Vec<LearningCurve>,
}

impl AggregateResult {
    /// Aggregates trial curves, which must be in trial order.
    pub fn from_curves(group: String, curves: Vec<LearningCurve>) -> Self {
        let trials = curves.len();
        let episodes = curves.first().map_or(0, |c| c.returns.len());
        let column =
            |f: &dyn Fn(&LearningCurve) -> f64| -> Vec<f64> { curves.iter().map(f).collect() };
        let mut mean_returns = Vec::with_capacity(episodes);
        let mut std_returns = Vec::with_capacity(episodes);
        let mut mean_advice_spent = Vec::with_capacity(episodes);
        for e in 0..episodes {
            let r = column(&|c| c.returns[e]);
            mean_returns.push(mean(&r));
            std_returns.push(std_dev(&r));
            mean_advice_spent.push(mean(&column(&|c| c.advice_spent[e] as f64)));
        }
        let checkpoints = curves.first().map_or(0, |c| c.evaluations.len());
        let evaluations = (0..checkpoints)
            .map(|k| {
                let m = column(&|c| c.evaluations[k].mean_return);
                EvalSummary {
                    episode: curves[0].evaluations[k].episode,
                    mean_return: mean(&m),
                    std_return: std_dev(&m),
                }
            })
            .collect();
        let fr = column(&|c| c.final_reward());
        let tr = column(&|c| c.total_reward());
        AggregateResult {
            group,
            trials,
            episodes,
            mean_returns,
            std_returns,
            mean_advice_spent,
            evaluations,
            fr_mean: mean(&fr),
            fr_std: std_dev(&fr),
            tr_mean: mean(&tr),
            tr_std: std_dev(&tr),
            tr_samples: tr,
            curves,
        }
    }
}

/// Teacher value source shared by all trials of an experiment.
#[derive(Clone)]
enum Oracle {
    None,
    Table(Arc<QTable>),
    Pursuit(Arc<LinearQ<PursuitFeatures>>),
}

/// A validated configuration with its teacher oracle computed, ready to run trials.
#[derive(Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    maze: Arc<Maze>,
    oracle: Oracle,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

fn settings(config: &ExperimentConfig, step_cap: Option<u64>) -> TrialSettings {
    let r = &config.experiment;
    TrialSettings {
        episodes: r.episodes,
        gamma: config.learner.gamma,
        policy: config.policy.spec(),
        step_cap,
        eval_every: r.eval_every,
        eval_episodes: r.eval_episodes,
        convergence_epsilon: r.convergence_epsilon,
        convergence_window: r.convergence_window,
        log_advice: r.log_advice,
    }
}

fn needs_oracle(config: &ExperimentConfig) -> bool {
    matches!(
        config.teacher.quality,
        TeacherQuality::Correct | TeacherQuality::Poor
    )
}

/// Trains the Grid Pursuit teacher: a Sarsa-linear agent run for
/// `teacher.pretrain_episodes` episodes with the group's learner and policy
/// settings, seeded from `mix(master, PRETRAIN_INDEX)`. Its weights are then frozen.
pub fn pretrain_pursuit_teacher(
    config: &ExperimentConfig,
    maze: Arc<Maze>,
) -> Result<WeightVector, HarnessError> {
    let features = PursuitFeatures::new(maze.clone());
    let q = LinearQ::new(WeightVector::zeros(features.dim()), features)?
        .with_divergence_bound(config.learner.divergence_bound);
    let mut learner = LinearLearner::new(q, UpdateRule::Sarsa, config.learner.schedule());
    let mut env = GridPursuit::new(maze, config.domain.step_limit);
    let mut teacher = Teacher::silent(4);
    let mut s = settings(config, None);
    s.episodes = config.teacher.pretrain_episodes;
    s.eval_every = 0;
    s.log_advice = false;
    let seed = mix(config.experiment.seed, PRETRAIN_INDEX);
    run_trial_with(&mut env, &mut learner, &mut teacher, &s, 0, seed)
        .map_err(|e| HarnessError::Pretraining(Box::new(e)))?;
    Ok(learner.q().weights().clone())
}

impl Experiment {
    /// Validates `config` and builds the teacher oracle (value iteration on
    /// finite domains, Sarsa-linear pre-training on Grid Pursuit).
    pub fn prepare(config: ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let maze = Arc::new(Maze::canonical());
        let oracle = if !needs_oracle(&config) {
            Oracle::None
        } else if config.domain.kind == DomainKind::GridPursuit {
            let weights = pretrain_pursuit_teacher(&config, maze.clone())?;
            Oracle::Pursuit(Arc::new(LinearQ::new(
                weights,
                PursuitFeatures::new(maze.clone()),
            )?))
        } else {
            let mdp = match config.domain.kind {
                DomainKind::LinearChain => LinearChain::new(config.domain.length).to_finite_mdp(),
                DomainKind::SingleState => SingleState::default().to_finite_mdp(),
                DomainKind::TwoState => TwoState::default().to_finite_mdp(),
                DomainKind::GridPursuit => unreachable!(),
            };
            Oracle::Table(Arc::new(
                value_iteration(&mdp, config.learner.gamma, config.teacher.oracle_tolerance)?.q,
            ))
        };
        Ok(Experiment {
            config,
            maze,
            oracle,
        })
    }

    /// Like [`Experiment::prepare`] but with caller-supplied Grid Pursuit teacher
    /// weights, so several groups can share one pre-training run.
    pub fn prepare_with_pursuit_teacher(
        config: ExperimentConfig,
        weights: WeightVector,
    ) -> Result<Self, HarnessError> {
        config.validate()?;
        let maze = Arc::new(Maze::canonical());
        let oracle = Oracle::Pursuit(Arc::new(LinearQ::new(
            weights,
            PursuitFeatures::new(maze.clone()),
        )?));
        Ok(Experiment {
            config,
            maze,
            oracle,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    /// Teacher oracle Q table, on finite domains with an oracle-backed teacher.
    pub fn oracle_table(&self) -> Option<&QTable> {
        match &self.oracle {
            Oracle::Table(q) => Some(q),
            _ => None,
        }
    }

    fn teacher<S>(
        &self,
        num_actions: usize,
        oracle: Option<SharedOracle<S>>,
        seed: u64,
    ) -> Result<Teacher<S>, HarnessError> {
        let t = &self.config.teacher;
        let oracle = if needs_oracle(&self.config) {
            oracle
        } else {
            None
        };
        Ok(make_teacher(
            t.quality,
            t.strategy,
            t.budget,
            num_actions,
            oracle,
            stream_seed(seed, Stream::Teacher),
        )?)
    }

    fn table_oracle(&self) -> Option<SharedOracle<usize>> {
        match &self.oracle {
            Oracle::Table(q) => Some(q.clone() as SharedOracle<usize>),
            _ => None,
        }
    }

    fn run_tabular_domain<E>(
        &self,
        mut env: E,
        trial: usize,
        seed: u64,
        step_cap: Option<u64>,
    ) -> Result<LearningCurve, HarnessError>
    where
        E: TabularDomain,
    {
        let l = &self.config.learner;
        let (ns, na) = (env.num_states(), env.num_actions());
        let mut teacher = self.teacher(na, self.table_oracle(), seed)?;
        let s = settings(&self.config, step_cap);
        if l.kind.is_linear() {
            let q = LinearQ::new(WeightVector::zeros(ns * na), OneHot::new(ns, na))?
                .with_divergence_bound(l.divergence_bound);
            let mut learner = LinearLearner::new(q, l.kind.rule(), l.schedule());
            run_trial_with(&mut env, &mut learner, &mut teacher, &s, trial, seed)
        } else {
            let table = QTable::filled(ns, na, l.initial_value);
            let mut learner = TabularLearner::new(table, l.kind.rule(), l.schedule());
            run_trial_with(&mut env, &mut learner, &mut teacher, &s, trial, seed)
        }
    }

    fn run_pursuit(&self, trial: usize, seed: u64) -> Result<LearningCurve, HarnessError> {
        let l = &self.config.learner;
        let mut env = GridPursuit::new(self.maze.clone(), self.config.domain.step_limit);
        let oracle = match &self.oracle {
            Oracle::Pursuit(q) => Some(q.clone() as SharedOracle<PursuitState>),
            _ => None,
        };
        let mut teacher = self.teacher(4, oracle, seed)?;
        let features = PursuitFeatures::new(self.maze.clone());
        let q = LinearQ::new(WeightVector::zeros(features.dim()), features)?
            .with_divergence_bound(l.divergence_bound);
        let mut learner = LinearLearner::new(q, l.kind.rule(), l.schedule());
        run_trial_with(
            &mut env,
            &mut learner,
            &mut teacher,
            &settings(&self.config, None),
            trial,
            seed,
        )
    }

    /// Runs trial `trial` with seed `mix(master, trial)`.
    pub fn run_trial(&self, trial: usize) -> Result<LearningCurve, HarnessError> {
        let seed = trial_seed(self.config.experiment.seed, trial);
        self.run_trial_seeded(trial, seed)
            .map_err(|e| HarnessError::Trial {
                trial,
                source: Box::new(e),
            })
    }

    /// Runs one trial with an explicit trial seed.
    pub fn run_trial_seeded(&self, trial: usize, seed: u64) -> Result<LearningCurve, HarnessError> {
        let d = &self.config.domain;
        match d.kind {
            DomainKind::LinearChain => {
                self.run_tabular_domain(LinearChain::new(d.length), trial, seed, Some(d.step_cap))
            }
            DomainKind::SingleState => {
                self.run_tabular_domain(SingleState::default(), trial, seed, Some(d.step_cap))
            }
            DomainKind::TwoState => {
                self.run_tabular_domain(TwoState::default(), trial, seed, Some(d.step_cap))
            }
            DomainKind::GridPursuit => self.run_pursuit(trial, seed),
        }
    }

    /// Runs all trials, at most `jobs` at a time (0 = one per core). Results are
    /// collected by trial index, so they do not depend on scheduling.
    pub fn run(&self, jobs: usize) -> Result<AggregateResult, HarnessError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
        let curves: Vec<LearningCurve> = pool.install(|| {
            (0..self.config.experiment.trials)
                .into_par_iter()
                .map(|t| self.run_trial(t))
                .collect::<Result<_, _>>()
        })?;
        Ok(AggregateResult::from_curves(
            self.config.group_name(),
            curves,
        ))
    }

    /// Checks `Sigma_pi - gamma^2 Sigma*_pi(theta) > 0` for the configured linear learner.
    ///
    /// The behaviour policy is the configured policy at `theta = 0`. Probes are
    /// `theta = 0`, the configured explicit probes, and `random_probes` draws
    /// from `[-probe_scale, probe_scale]^d`, all seeded from the master seed.
    pub fn check_assumptions(&self) -> Result<AssumptionReport, HarnessError> {
        let a = &self.config.assumptions;
        let gamma = self.config.learner.gamma;
        let policy = self.config.policy.spec();
        let master = self.config.experiment.seed;
        let mut rng = stream_rng(master, Stream::Train);
        let probes = |d: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<f64>> {
            let mut p = vec![vec![0.0; d]];
            p.extend(a.probes.iter().cloned());
            for _ in 0..a.random_probes {
                p.push(
                    (0..d)
                        .map(|_| rng.gen_range(-a.probe_scale..=a.probe_scale))
                        .collect(),
                );
            }
            p
        };
        let d = &self.config.domain;
        fn tabular<E: TabularDomain>(
            mut env: E,
            policy: &PolicySpec,
            gamma: f64,
            samples: usize,
            probes: &dyn Fn(usize, &mut rand_chacha::ChaCha8Rng) -> Vec<Vec<f64>>,
            rng: &mut rand_chacha::ChaCha8Rng,
        ) -> Result<AssumptionReport, HarnessError> {
            let features = OneHot::new(env.num_states(), env.num_actions());
            let dim = features.dim();
            let p = probes(dim, rng);
            Ok(check_fa_assumptions(
                &mut env,
                policy,
                &features,
                &vec![0.0; dim],
                gamma,
                &p,
                samples,
                rng,
            )?)
        }
        match d.kind {
            DomainKind::LinearChain => tabular(
                LinearChain::new(d.length),
                &policy,
                gamma,
                a.samples,
                &probes,
                &mut rng,
            ),
            DomainKind::SingleState => tabular(
                SingleState::default(),
                &policy,
                gamma,
                a.samples,
                &probes,
                &mut rng,
            ),
            DomainKind::TwoState => tabular(
                TwoState::default(),
                &policy,
                gamma,
                a.samples,
                &probes,
                &mut rng,
            ),
            DomainKind::GridPursuit => {
                let features = PursuitFeatures::new(self.maze.clone());
                let dim = features.dim();
                let p = probes(dim, &mut rng);
                let mut env = GridPursuit::new(self.maze.clone(), d.step_limit);
                Ok(check_fa_assumptions(
                    &mut env,
                    &policy,
                    &features,
                    &vec![0.0; dim],
                    gamma,
                    &p,
                    a.samples,
                    &mut rng,
                )?)
            }
        }
    }
}

/// Validates `config`, builds its teacher, and runs one trial with `trial_seed`.
pub fn run_trial(
    config: &ExperimentConfig,
    trial_seed: u64,
) -> Result<LearningCurve, HarnessError> {
    Experiment::prepare(config.clone())?.run_trial_seeded(0, trial_seed)
}

/// Validates `config` and runs every trial using all available cores.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateResult, HarnessError> {
    Experiment::prepare(config.clone())?.run(0)
}

/// Greedy action table of a finished tabular trial.
pub fn greedy_policy_of_parameters(parameters: &[f64], num_actions: usize) -> Vec<usize> {
    parameters
        .chunks(num_actions)
        .map(|row| crate::policies::greedy_action(row).expect("finite parameters"))
        .collect()
}
