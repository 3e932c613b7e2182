//! Tabular episodic learner on the sampled state graph.
//!
//! States are samples of an accessibility matrix. From state `i` the agent
//! may command a transition to any of its `max_actions` most accessible
//! reachable targets; the command succeeds with probability `A[i, j]` and
//! otherwise leaves the state unchanged. Reaching the goal set ends the
//! episode. Accessibility is read directly as the success probability of a
//! commanded transition; no physics is involved.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::access::AccessibilityMatrix;
use crate::cluster::{k_access, KAccessConfig};
use crate::error::{Error, Result};
use crate::explore::InitialStateSet;
use crate::synthetic::{generate_planted, PlantedData, PlantedSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskParams {
    pub episode_steps: usize,
    pub step_cost: f64,
    pub goal_reward: f64,
    pub max_actions: usize,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self {
            episode_steps: 75,
            step_cost: -0.01,
            goal_reward: 1.0,
            max_actions: 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryTask<'a> {
    matrix: &'a AccessibilityMatrix,
    goal: Vec<bool>,
    params: TaskParams,
    actions: Vec<Vec<usize>>,
}

impl<'a> RecoveryTask<'a> {
    pub fn new(matrix: &'a AccessibilityMatrix, goal_set: &[usize], params: TaskParams) -> Result<Self> {
        let n = matrix.n();
        if goal_set.is_empty() {
            return Err(Error::InvalidArgument("goal set is empty".into()));
        }
        if params.episode_steps == 0 || params.max_actions == 0 {
            return Err(Error::InvalidArgument(
                "episode_steps and max_actions must be ≥ 1".into(),
            ));
        }
        let mut goal = vec![false; n];
        for &g in goal_set {
            if g >= n {
                return Err(Error::InvalidArgument(format!("goal state {g} out of range")));
            }
            goal[g] = true;
        }
        let actions = (0..n)
            .map(|i| {
                let mut targets: Vec<usize> =
                    (0..n).filter(|&j| j != i && !matrix.is_floor(i, j)).collect();
                // Stable sort: equal accessibility keeps the lower index first.
                targets.sort_by(|&x, &y| matrix.get(i, y).total_cmp(&matrix.get(i, x)));
                targets.truncate(params.max_actions);
                targets
            })
            .collect();
        Ok(Self {
            matrix,
            goal,
            params,
            actions,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn params(&self) -> &TaskParams {
        &self.params
    }

    pub fn is_goal(&self, s: usize) -> bool {
        self.goal[s]
    }

    /// Candidate targets from `s`, most accessible first.
    pub fn actions(&self, s: usize) -> &[usize] {
        &self.actions[s]
    }

    fn step(&self, s: usize, target: usize, u: f64) -> usize {
        if u < self.matrix.get(s, target) {
            target
        } else {
            s
        }
    }
}

/// Chooses an action index into `task.actions(state)`.
pub trait Policy {
    fn choose(&self, task: &RecoveryTask<'_>, state: usize) -> Option<usize>;
}

/// Action values, one row per state aligned with the task's action lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    values: Vec<Vec<f64>>,
}

impl QTable {
    pub fn zeros(task: &RecoveryTask<'_>) -> Self {
        Self {
            values: (0..task.n()).map(|s| vec![0.0; task.actions(s).len()]).collect(),
        }
    }

    pub fn values(&self, s: usize) -> &[f64] {
        &self.values[s]
    }

    /// Greedy action; ties go to the most accessible target.
    pub fn greedy(&self, s: usize) -> Option<usize> {
        let row = &self.values[s];
        (0..row.len()).reduce(|best, a| if row[a] > row[best] { a } else { best })
    }

    fn max_value(&self, s: usize) -> f64 {
        // States without actions are worth nothing.
        self.values[s].iter().copied().reduce(f64::max).unwrap_or(0.0)
    }
}

impl Policy for QTable {
    fn choose(&self, _task: &RecoveryTask<'_>, state: usize) -> Option<usize> {
        self.greedy(state)
    }
}

/// A fixed target per state (`None` means stay put).
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPolicy(pub Vec<Option<usize>>);

impl Policy for FixedPolicy {
    fn choose(&self, task: &RecoveryTask<'_>, state: usize) -> Option<usize> {
        let target = self.0.get(state).copied().flatten()?;
        task.actions(state).iter().position(|&t| t == target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LearnerConfig {
    pub episodes: usize,
    pub exploration_rate: f64,
    pub learning_rate: f64,
    pub discount: f64,
    pub seed: u64,
}

impl LearnerConfig {
    pub fn new(episodes: usize, seed: u64) -> Self {
        Self {
            episodes,
            exploration_rate: 0.1,
            learning_rate: 0.5,
            discount: 0.987,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.exploration_rate) {
            return Err(Error::InvalidArgument("exploration rate must lie in [0, 1]".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidArgument("learning rate must lie in (0, 1]".into()));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::InvalidArgument("discount must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub curve: Vec<EpisodeRecord>,
    pub policy: QTable,
}

impl TrainingRun {
    pub fn success_rate(&self) -> f64 {
        if self.curve.is_empty() {
            return 0.0;
        }
        self.curve.iter().filter(|r| r.success).count() as f64 / self.curve.len() as f64
    }
}

fn check_init(task: &RecoveryTask<'_>, init: &InitialStateSet) -> Result<()> {
    if init.indices.is_empty() {
        return Err(Error::InvalidArgument(format!("initial set '{}' is empty", init.label)));
    }
    init.validate(task.n())
}

/// Trains with epsilon-greedy Q-learning from uniformly drawn initial states.
pub fn run_training(task: &RecoveryTask<'_>, init: &InitialStateSet, config: &LearnerConfig) -> Result<TrainingRun> {
    run_training_with(task, init, config, |_, _| true)
}

/// Like [`run_training`], calling `after_episode(episodes_done, &q)` after
/// every episode; returning `false` stops training early.
pub fn run_training_with(
    task: &RecoveryTask<'_>,
    init: &InitialStateSet,
    config: &LearnerConfig,
    mut after_episode: impl FnMut(usize, &QTable) -> bool,
) -> Result<TrainingRun> {
    check_init(task, init)?;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut q = QTable::zeros(task);
    let mut curve = Vec::with_capacity(config.episodes);
    let p = task.params;

    for episode in 0..config.episodes {
        let mut s = init.indices[rng.gen_range(0..init.indices.len())];
        let mut ret = 0.0;
        let mut success = task.is_goal(s);
        let mut steps = 0;
        while !success && steps < p.episode_steps {
            steps += 1;
            let n_actions = task.actions(s).len();
            if n_actions == 0 {
                ret += p.step_cost;
                continue;
            }
            let a = if rng.gen::<f64>() < config.exploration_rate {
                rng.gen_range(0..n_actions)
            } else {
                q.greedy(s).expect("non-empty action list")
            };
            let next = task.step(s, task.actions(s)[a], rng.gen());
            let reached = task.is_goal(next);
            let reward = p.step_cost + if reached { p.goal_reward } else { 0.0 };
            let bootstrap = if reached { 0.0 } else { config.discount * q.max_value(next) };
            let v = &mut q.values[s][a];
            *v += config.learning_rate * (reward + bootstrap - *v);
            ret += reward;
            s = next;
            success = reached;
        }
        curve.push(EpisodeRecord { episode, ret, success });
        if !after_episode(episode + 1, &q) {
            break;
        }
    }
    Ok(TrainingRun { curve, policy: q })
}

/// Fraction of greedy rollouts that reach the goal within the episode limit.
///
/// Each rollout draws exactly one uniform number per step from its own
/// stream, so rollouts are comparable across goal sets and policies.
pub fn evaluate_policy(
    task: &RecoveryTask<'_>,
    policy: &impl Policy,
    test: &InitialStateSet,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    test.validate(task.n())?;
    if test.indices.is_empty() || trials == 0 {
        return Err(Error::InvalidArgument("need at least one test state and trial".into()));
    }
    let mut successes = 0usize;
    for (pos, &start) in test.indices.iter().enumerate() {
        for t in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((pos * trials + t) as u64);
            if rollout(task, policy, start, &mut rng) {
                successes += 1;
            }
        }
    }
    Ok(successes as f64 / (test.indices.len() * trials) as f64)
}

fn rollout(task: &RecoveryTask<'_>, policy: &impl Policy, start: usize, rng: &mut ChaCha8Rng) -> bool {
    let mut s = start;
    for _ in 0..task.params.episode_steps {
        if task.is_goal(s) {
            return true;
        }
        let u: f64 = rng.gen();
        if let Some(a) = policy.choose(task, s) {
            s = task.step(s, task.actions(s)[a], u);
        }
    }
    task.is_goal(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalSchedule {
    /// Evaluate after every `every` training episodes.
    pub every: usize,
    pub trials: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for EvalSchedule {
    fn default() -> Self {
        Self {
            every: 10,
            trials: 3,
            threshold: 0.9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThresholdRun {
    pub label: String,
    /// Training episodes until the test success rate first reached the
    /// threshold; `None` if it never did within the budget.
    pub episodes_to_threshold: Option<usize>,
    /// `(episodes trained, test success rate)` at every evaluation.
    pub checkpoints: Vec<(usize, f64)>,
    #[serde(skip)]
    pub curve: Vec<EpisodeRecord>,
}

impl ThresholdRun {
    /// Episodes to threshold, counting a miss as `budget + 1`.
    pub fn censored(&self, budget: usize) -> usize {
        self.episodes_to_threshold.unwrap_or(budget + 1)
    }
}

/// Trains from `init` and evaluates the greedy policy on `test` on a fixed
/// schedule, stopping once the success rate reaches the threshold.
pub fn episodes_to_threshold(
    task: &RecoveryTask<'_>,
    init: &InitialStateSet,
    config: &LearnerConfig,
    test: &InitialStateSet,
    schedule: &EvalSchedule,
) -> Result<ThresholdRun> {
    if schedule.every == 0 {
        return Err(Error::InvalidArgument("evaluation interval must be ≥ 1".into()));
    }
    check_init(task, init)?;
    let mut checkpoints = Vec::new();
    let first = evaluate_policy(task, &QTable::zeros(task), test, schedule.trials, schedule.seed)?;
    checkpoints.push((0, first));
    let mut reached = (first >= schedule.threshold).then_some(0);
    let mut curve = Vec::new();
    if reached.is_none() {
        let mut eval_error = None;
        let run = run_training_with(task, init, config, |done, q| {
            if done % schedule.every != 0 {
                return true;
            }
            match evaluate_policy(task, q, test, schedule.trials, schedule.seed) {
                Ok(rate) => {
                    checkpoints.push((done, rate));
                    if rate >= schedule.threshold {
                        reached = Some(done);
                        return false;
                    }
                    true
                }
                Err(e) => {
                    eval_error = Some(e);
                    false
                }
            }
        })?;
        if let Some(e) = eval_error {
            return Err(e);
        }
        curve = run.curve;
    }
    Ok(ThresholdRun {
        label: init.label.clone(),
        episodes_to_threshold: reached,
        checkpoints,
        curve,
    })
}

/// Uniform random subset of `size` samples.
pub fn random_init_set(n: usize, size: usize, seed: u64) -> Result<InitialStateSet> {
    if size == 0 || size > n {
        return Err(Error::InvalidArgument(format!("cannot draw {size} of {n} samples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = sample(&mut rng, n, size).into_vec();
    indices.sort_unstable();
    Ok(InitialStateSet::new("random", indices))
}

/// Samples of `group` whose depth is strictly below the group's median depth.
pub fn low_depth_goal(data: &PlantedData, group: usize) -> Vec<usize> {
    let members = data.members(group);
    let mut depths: Vec<f64> = members.iter().map(|&i| data.depth[i]).collect();
    depths.sort_by(f64::total_cmp);
    let Some(&median) = depths.get(depths.len() / 2) else {
        return Vec::new();
    };
    members.into_iter().filter(|&i| data.depth[i] < median).collect()
}

pub const BENCHMARK_N: usize = 60;
pub const BENCHMARK_K: usize = 5;
pub const BENCHMARK_EPISODES: usize = 3000;

/// The standard planted benchmark: 60 samples in 5 blocks, goal = the
/// low-depth half of block 0, tested from every sample.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub data: PlantedData,
    pub goal: Vec<usize>,
    pub test: InitialStateSet,
}

pub fn standard_benchmark(seed: u64) -> Result<Benchmark> {
    let data = generate_planted(&PlantedSpec::new(BENCHMARK_N, BENCHMARK_K, seed))?;
    let goal = low_depth_goal(&data, 0);
    let test = InitialStateSet::new("all", (0..BENCHMARK_N).collect());
    Ok(Benchmark { data, goal, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ArmComparison {
    pub seed: u64,
    pub budget: usize,
    pub centroid: ThresholdRun,
    pub random: ThresholdRun,
}

impl ArmComparison {
    pub fn centroid_episodes(&self) -> usize {
        self.centroid.censored(self.budget)
    }

    pub fn random_episodes(&self) -> usize {
        self.random.censored(self.budget)
    }
}

/// Runs both arms on one seed pair: K-Access centroids (k = block count)
/// against a uniform random set of the same size.
pub fn benchmark_pair(seed: u64) -> Result<ArmComparison> {
    let bench = standard_benchmark(seed)?;
    let a = &bench.data.matrix;
    let task = RecoveryTask::new(a, &bench.goal, TaskParams::default())?;
    let clusters = k_access(a, &KAccessConfig::new(BENCHMARK_K, seed))?;
    let centroid = InitialStateSet::new("centroid", clusters.c_index);
    let random = random_init_set(a.n(), BENCHMARK_K, seed.wrapping_add(1_000_000))?;
    let config = LearnerConfig::new(BENCHMARK_EPISODES, seed);
    let schedule = EvalSchedule { seed, ..Default::default() };
    let (c, r) = rayon::join(
        || episodes_to_threshold(&task, &centroid, &config, &bench.test, &schedule),
        || episodes_to_threshold(&task, &random, &config, &bench.test, &schedule),
    );
    Ok(ArmComparison {
        seed,
        budget: BENCHMARK_EPISODES,
        centroid: c?,
        random: r?,
    })
}
