//! Tabular Q-learning over (cell, machine state) pairs, plus an exact
//! dynamic-programming solver for the cross-product decision process.
//!
//! The learner exploits the machine structure: on every environment step it
//! updates the Q-values of *all* non-terminal machine states against the
//! observed label, using the expected target over the machine's stochastic
//! response (a sampled-target variant is available behind a flag). Episodes
//! end when the tracked machine state is terminal or the step cap is hit;
//! an agent stuck in an environment sink simply burns steps until the cap.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::envs::{Action, Gridworld, ACTIONS};
use crate::machines::{Prm, ProductPrm};

const N_ACTIONS: usize = 4;

/// Learning hyperparameters. Defaults match the case-study experiments.
#[derive(Debug, Clone, Copy)]
pub struct LearnParams {
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub max_episode_steps: usize,
    /// Expected update over the machine's response distribution (default);
    /// false samples a single machine transition as the target.
    pub expected_update: bool,
}

impl Default for LearnParams {
    fn default() -> Self {
        LearnParams {
            gamma: 0.9,
            alpha: 0.1,
            epsilon: 0.1,
            max_episode_steps: 400,
            expected_update: true,
        }
    }
}

/// Dense Q-table over (cell, machine state, action).
#[derive(Debug, Clone)]
pub struct QTable {
    q: Vec<f64>,
    n_machine: usize,
}

impl QTable {
    pub fn new(n_cells: usize, n_machine: usize) -> QTable {
        QTable {
            q: vec![0.0; n_cells * n_machine * N_ACTIONS],
            n_machine,
        }
    }

    #[inline]
    fn base(&self, cell: usize, u: usize) -> usize {
        (cell * self.n_machine + u) * N_ACTIONS
    }

    pub fn get(&self, cell: usize, u: usize, a: usize) -> f64 {
        self.q[self.base(cell, u) + a]
    }

    pub fn max(&self, cell: usize, u: usize) -> f64 {
        let b = self.base(cell, u);
        self.q[b..b + N_ACTIONS]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action with ties broken by the smallest action index.
    pub fn argmax(&self, cell: usize, u: usize) -> usize {
        let b = self.base(cell, u);
        let mut best = 0;
        for a in 1..N_ACTIONS {
            if self.q[b + a] > self.q[b + best] {
                best = a;
            }
        }
        best
    }

    /// Greedy action with ties broken uniformly at random. A fixed tie break
    /// on an all-zero table pins the agent against one wall and stalls
    /// exploration, so the learner uses this variant.
    pub fn argmax_random<R: Rng>(&self, cell: usize, u: usize, rng: &mut R) -> usize {
        let b = self.base(cell, u);
        let best = self.q[b..b + N_ACTIONS]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut tied = [0usize; N_ACTIONS];
        let mut n_tied = 0;
        for a in 0..N_ACTIONS {
            if self.q[b + a] == best {
                tied[n_tied] = a;
                n_tied += 1;
            }
        }
        if n_tied == 1 {
            tied[0]
        } else {
            tied[rng.gen_range(0..n_tied)]
        }
    }
}

/// Environment + machine bundle the learner runs against. The machine can
/// be the task machine itself or a causal product; label projection from
/// the environment's alphabet is precomputed.
pub struct Task<'a> {
    pub env: &'a Gridworld,
    pub machine: &'a Prm,
    /// env label bits -> machine label bits.
    proj: Vec<u32>,
}

impl<'a> Task<'a> {
    pub fn new(env: &'a Gridworld, machine: &'a Prm) -> Task<'a> {
        let proj = (0..env.alphabet().n_labels() as u32)
            .map(|bits| machine.alphabet().project(&env.alphabet().label(bits)))
            .collect();
        Task { env, machine, proj }
    }

    #[inline]
    pub fn machine_label(&self, env_bits: u32) -> u32 {
        self.proj[env_bits as usize]
    }
}

/// One learner with its mutable state; repeatedly `step`ped by episode and
/// training drivers.
pub struct QrmRunner<'a> {
    pub task: &'a Task<'a>,
    pub params: LearnParams,
    pub q: QTable,
    rng: ChaCha8Rng,
    cell: usize,
    u: usize,
    episode_steps: usize,
}

pub struct StepResult {
    pub reward: f64,
    pub episode_ended: bool,
}

impl<'a> QrmRunner<'a> {
    pub fn new(task: &'a Task<'a>, params: LearnParams, seed: u64) -> QrmRunner<'a> {
        QrmRunner {
            task,
            params,
            q: QTable::new(task.env.n_cells(), task.machine.n_states()),
            rng: ChaCha8Rng::seed_from_u64(seed),
            cell: task.env.start(),
            u: task.machine.initial(),
            episode_steps: 0,
        }
    }

    pub fn tracked_state(&self) -> (usize, usize) {
        (self.cell, self.u)
    }

    fn reset(&mut self) {
        self.cell = self.task.env.start();
        self.u = self.task.machine.initial();
        self.episode_steps = 0;
    }

    /// One environment step: act epsilon-greedily from the tracked pair,
    /// update every non-terminal machine state against the observed label,
    /// then advance the tracked machine state.
    pub fn step(&mut self) -> StepResult {
        let machine = self.task.machine;
        let p = self.params;
        let a = if self.rng.gen::<f64>() < p.epsilon {
            self.rng.gen_range(0..N_ACTIONS)
        } else {
            self.q.argmax_random(self.cell, self.u, &mut self.rng)
        };
        let dest = self.task.env.step(self.cell, Action::from_index(a), &mut self.rng);
        let env_bits = self.task.env.label_bits(dest);
        let label = self.task.machine_label(env_bits);

        for u in 0..machine.n_states() {
            if machine.is_terminal(u) {
                continue;
            }
            let target = if p.expected_update {
                let mut t = 0.0;
                for o in machine.outcomes(u, label) {
                    let cont = if machine.is_terminal(o.next) {
                        0.0
                    } else {
                        self.q.max(dest, o.next)
                    };
                    t += o.prob * (o.reward + p.gamma * cont);
                }
                t
            } else {
                let (next, reward) = machine.step(u, label, &mut self.rng);
                let cont = if machine.is_terminal(next) {
                    0.0
                } else {
                    self.q.max(dest, next)
                };
                reward + p.gamma * cont
            };
            let idx = self.q.base(self.cell, u) + a;
            self.q.q[idx] = (1.0 - p.alpha) * self.q.q[idx] + p.alpha * target;
        }

        let (u_next, reward) = machine.step(self.u, label, &mut self.rng);
        self.cell = dest;
        self.u = u_next;
        self.episode_steps += 1;
        let done = machine.is_terminal(self.u) || self.episode_steps >= p.max_episode_steps;
        if done {
            self.reset();
        }
        StepResult {
            reward,
            episode_ended: done,
        }
    }

    /// Runs a single episode to completion, returning the rewards observed.
    pub fn episode(&mut self) -> Vec<f64> {
        let mut rewards = Vec::new();
        loop {
            let r = self.step();
            rewards.push(r.reward);
            if r.episode_ended {
                return rewards;
            }
        }
    }
}

/// A sampled learning curve: (environment step, windowed reward per step).
pub type Curve = Vec<(u64, f64)>;

/// Trains for `total_steps` environment steps and samples the trailing
/// `window`-step average reward every `sample_interval` steps.
pub fn train_curve(
    task: &Task,
    params: LearnParams,
    total_steps: u64,
    window: usize,
    sample_interval: u64,
    seed: u64,
) -> Curve {
    let mut runner = QrmRunner::new(task, params, seed);
    let mut recent = std::collections::VecDeque::with_capacity(window);
    let mut curve = Vec::new();
    for step in 1..=total_steps {
        let r = runner.step();
        if recent.len() == window {
            recent.pop_front();
        }
        recent.push_back(r.reward);
        if step % sample_interval == 0 {
            let sum: f64 = recent.iter().sum();
            curve.push((step, sum / recent.len() as f64));
        }
    }
    curve
}

/// First sampled step at which the curve reaches `threshold`.
pub fn steps_to_threshold(curve: &Curve, threshold: f64) -> Option<u64> {
    curve.iter().find(|&&(_, v)| v >= threshold).map(|&(s, _)| s)
}

/// Exact solution of the cross-product decision process: optimal values
/// and a greedy policy over (cell, machine state).
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub n_cells: usize,
    pub n_machine: usize,
    pub values: Vec<f64>,
    /// Greedy action per (cell, machine state), ties to the smallest index.
    pub policy: Vec<usize>,
}

impl ExactSolution {
    pub fn value(&self, cell: usize, u: usize) -> f64 {
        self.values[cell * self.n_machine + u]
    }

    pub fn action(&self, cell: usize, u: usize) -> usize {
        self.policy[cell * self.n_machine + u]
    }
}

/// Precomputed transition data for the cross-product process.
struct CrossDynamics {
    /// Per (cell, action): list of (dest cell, prob, machine label bits).
    moves: Vec<Vec<(usize, f64, u32)>>,
}

impl CrossDynamics {
    fn new(task: &Task) -> CrossDynamics {
        let env = task.env;
        let moves = (0..env.n_cells())
            .flat_map(|cell| {
                ACTIONS.into_iter().map(move |a| (cell, a))
            })
            .map(|(cell, a)| {
                if env.is_wall(cell) {
                    return Vec::new();
                }
                env.outcomes(cell, a)
                    .into_iter()
                    .map(|(dest, p)| (dest, p, task.machine_label(env.label_bits(dest))))
                    .collect()
            })
            .collect();
        CrossDynamics { moves }
    }

    #[inline]
    fn at(&self, cell: usize, a: usize) -> &[(usize, f64, u32)] {
        &self.moves[cell * N_ACTIONS + a]
    }
}

/// Value iteration on the cross product of the environment and the machine.
pub fn exact_solve(task: &Task, gamma: f64, tol: f64) -> ExactSolution {
    let env = task.env;
    let machine = task.machine;
    let (n_cells, n_machine) = (env.n_cells(), machine.n_states());
    let dyn_ = CrossDynamics::new(task);
    let mut v = vec![0.0f64; n_cells * n_machine];
    let mut v2 = vec![0.0f64; n_cells * n_machine];
    loop {
        let mut residual = 0.0f64;
        for cell in 0..n_cells {
            if env.is_wall(cell) {
                continue;
            }
            for u in 0..n_machine {
                let idx = cell * n_machine + u;
                if machine.is_terminal(u) {
                    v2[idx] = 0.0;
                    continue;
                }
                let mut best = f64::NEG_INFINITY;
                for a in 0..N_ACTIONS {
                    let mut q = 0.0;
                    for &(dest, p, label) in dyn_.at(cell, a) {
                        for o in machine.outcomes(u, label) {
                            let cont = if machine.is_terminal(o.next) {
                                0.0
                            } else {
                                v[dest * n_machine + o.next]
                            };
                            q += p * o.prob * (o.reward + gamma * cont);
                        }
                    }
                    if q > best {
                        best = q;
                    }
                }
                v2[idx] = best;
                residual = residual.max((v2[idx] - v[idx]).abs());
            }
        }
        std::mem::swap(&mut v, &mut v2);
        if residual < tol {
            break;
        }
    }
    // Greedy policy from the converged values.
    let mut policy = vec![0usize; n_cells * n_machine];
    for cell in 0..n_cells {
        if env.is_wall(cell) {
            continue;
        }
        for u in 0..n_machine {
            if machine.is_terminal(u) {
                continue;
            }
            let mut best_a = 0;
            let mut best = f64::NEG_INFINITY;
            for a in 0..N_ACTIONS {
                let mut q = 0.0;
                for &(dest, p, label) in dyn_.at(cell, a) {
                    for o in machine.outcomes(u, label) {
                        let cont = if machine.is_terminal(o.next) {
                            0.0
                        } else {
                            v[dest * n_machine + o.next]
                        };
                        q += p * o.prob * (o.reward + gamma * cont);
                    }
                }
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            policy[cell * n_machine + u] = best_a;
        }
    }
    ExactSolution {
        n_cells,
        n_machine,
        values: v,
        policy,
    }
}

/// Evaluates a fixed stationary policy over (cell, machine state) on the
/// cross product, by iterating its Bellman operator to `tol`.
pub fn evaluate_policy(task: &Task, policy: &[usize], gamma: f64, tol: f64) -> Vec<f64> {
    let env = task.env;
    let machine = task.machine;
    let (n_cells, n_machine) = (env.n_cells(), machine.n_states());
    let dyn_ = CrossDynamics::new(task);
    let mut v = vec![0.0f64; n_cells * n_machine];
    let mut v2 = vec![0.0f64; n_cells * n_machine];
    loop {
        let mut residual = 0.0f64;
        for cell in 0..n_cells {
            if env.is_wall(cell) {
                continue;
            }
            for u in 0..n_machine {
                let idx = cell * n_machine + u;
                if machine.is_terminal(u) {
                    v2[idx] = 0.0;
                    continue;
                }
                let mut q = 0.0;
                for &(dest, p, label) in dyn_.at(cell, policy[idx]) {
                    for o in machine.outcomes(u, label) {
                        let cont = if machine.is_terminal(o.next) {
                            0.0
                        } else {
                            v[dest * n_machine + o.next]
                        };
                        q += p * o.prob * (o.reward + gamma * cont);
                    }
                }
                v2[idx] = q;
                residual = residual.max((v2[idx] - v[idx]).abs());
            }
        }
        std::mem::swap(&mut v, &mut v2);
        if residual < tol {
            break;
        }
    }
    v
}

/// Reachable (cell, machine state) pairs from the start configuration,
/// under all actions and positive-probability outcomes.
pub fn reachable_pairs(task: &Task) -> Vec<bool> {
    let env = task.env;
    let machine = task.machine;
    let n_machine = machine.n_states();
    let mut seen = vec![false; env.n_cells() * n_machine];
    let mut queue = std::collections::VecDeque::new();
    let start = env.start() * n_machine + machine.initial();
    seen[start] = true;
    queue.push_back((env.start(), machine.initial()));
    while let Some((cell, u)) = queue.pop_front() {
        if machine.is_terminal(u) {
            continue;
        }
        for a in ACTIONS {
            for (dest, _) in env.outcomes(cell, a) {
                let label = task.machine_label(env.label_bits(dest));
                for o in machine.outcomes(u, label) {
                    let idx = dest * n_machine + o.next;
                    if !seen[idx] {
                        seen[idx] = true;
                        queue.push_back((dest, o.next));
                    }
                }
            }
        }
    }
    seen
}

/// Projects an optimal policy of the machine-times-automaton product back
/// onto (cell, original machine state) pairs: for each pair, the action the
/// product policy takes at the reachable product state with the smallest
/// automaton component. Unreached pairs fall back to action 0.
pub fn project_policy(
    env: &Gridworld,
    product: &ProductPrm,
    product_solution: &ExactSolution,
    n_machine_states: usize,
) -> Vec<usize> {
    let task_b = Task::new(env, &product.prm);
    let reach = reachable_pairs(&task_b);
    let n_b = product.prm.n_states();
    let mut policy = vec![0usize; env.n_cells() * n_machine_states];
    let mut chosen_q = vec![usize::MAX; env.n_cells() * n_machine_states];
    for cell in 0..env.n_cells() {
        for x in 0..n_b {
            if !reach[cell * n_b + x] {
                continue;
            }
            let (u, q) = product.provenance[x];
            let idx = cell * n_machine_states + u;
            if q < chosen_q[idx] {
                chosen_q[idx] = q;
                policy[idx] = product_solution.action(cell, x);
            }
        }
    }
    policy
}

/// Average reward per step of a fixed policy run with epsilon-greedy
/// exploration noise, as a deterministic simulation. Used as the reference
/// plateau that learning curves are measured against.
pub fn simulate_policy_rate(
    task: &Task,
    policy: &[usize],
    epsilon: f64,
    max_episode_steps: usize,
    total_steps: u64,
    seed: u64,
) -> f64 {
    let env = task.env;
    let machine = task.machine;
    let n_machine = machine.n_states();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cell = env.start();
    let mut u = machine.initial();
    let mut episode_steps = 0usize;
    let mut total = 0.0f64;
    for _ in 0..total_steps {
        let a = if rng.gen::<f64>() < epsilon {
            rng.gen_range(0..N_ACTIONS)
        } else {
            policy[cell * n_machine + u]
        };
        let dest = env.step(cell, Action::from_index(a), &mut rng);
        let label = task.machine_label(env.label_bits(dest));
        let (u2, r) = machine.step(u, label, &mut rng);
        total += r;
        cell = dest;
        u = u2;
        episode_steps += 1;
        if machine.is_terminal(u) || episode_steps >= max_episode_steps {
            cell = env.start();
            u = machine.initial();
            episode_steps = 0;
        }
    }
    total / total_steps as f64
}
