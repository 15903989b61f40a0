"""Sequential assignment environment and the hybrid Q-learning solver.

The server-assignment subproblem is cast as a short episode: one UE is
assigned per step, and only the final step pays out a reward, the
negative dualized objective of the completed assignment under the frozen
bandwidth plan and multipliers.  Two value networks score the actions, a
dense rectifier net and a variational circuit fed through a trainable
linear compressor; their outputs are mixed elementwise by trainable
weight vectors.  Targets follow the double estimator: the online nets
pick the argmax, the target copies price it.

State features, in order, all scaled into [0, 1]:
access power gain per UE, allocated access bandwidth per UE, allocated
backhaul bandwidth per UE, the two transmit power levels, and the
flattened partial assignment matrix.  UEs are assigned in index order,
so the first all-zero row of the partial matrix marks whose turn it is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from satedge import vqc
from satedge.bandwidth import InfeasibleError
from satedge.channel import link_gains
from satedge.cost import Assignment, BandwidthPlan, residuals
from satedge.duality import (
    DualState,
    eval_dual,
    lagrangian,
    subgradient_step,
)
from satedge.mlp import DenseNet
from satedge.scenario import Scenario

AGENT_CHECKPOINT_VERSION = 1

# Reward handed out when the completed assignment has no finite
# dualized objective under the frozen plan (dead link with positive
# power); large against the O(1) scaled rewards but still finite.
SENTINEL_REWARD = -10.0


def state_dim(s: Scenario) -> int:
    return s.topology.n_ues * (s.n_servers + 3) + 2


class EpisodeEnv:
    """One assignment episode against a frozen plan and multipliers.

    The plan and dual state are copied at construction, so the episode
    cannot observe later mutation by the outer loop.
    """

    def __init__(self, s: Scenario, plan: BandwidthPlan, dual: DualState,
                 reward_scale: float | None = None):
        self.s = s
        self.plan = plan.copy()
        self.dual = dual.copy()
        if reward_scale is None:
            reward_scale = self._default_scale()
        if not reward_scale > 0:
            raise ValueError("reward_scale must be positive")
        self.reward_scale = reward_scale
        self._static = self._static_features()
        self._servers: list[int] = []

    def _default_scale(self) -> float:
        # Normalizer: the dualized objective of the everything-on-BS
        # assignment, a completion that always exists; fall back to
        # 1 J when even that is unbounded under the frozen plan.
        n, j = self.s.topology.n_ues, self.s.n_servers
        all_bs = Assignment.from_servers((j - 1,) * n, j)
        base = lagrangian(all_bs.matrix, self.dual, self.plan, self.s)
        if math.isfinite(base) and base != 0.0:
            return abs(base)
        return 1.0

    def _static_features(self) -> np.ndarray:
        s = self.s
        gains = np.asarray(link_gains(s).h_access)
        p_ue = max(s.radio.p_ue)
        p_bs = max(s.radio.p_bs)
        p_max = max(p_ue, p_bs)
        return np.concatenate([
            gains / gains.max(),
            self.plan.b_access.sum(axis=1) / s.radio.b_access_total,
            self.plan.b_s.sum(axis=1) / s.radio.b_s_total,
            [p_ue / p_max, p_bs / p_max],
        ])

    @property
    def n_ues(self) -> int:
        return self.s.topology.n_ues

    @property
    def n_actions(self) -> int:
        return self.s.n_servers

    @property
    def done(self) -> bool:
        return len(self._servers) == self.n_ues

    @property
    def assignment(self) -> Assignment:
        if not self.done:
            raise ValueError("episode not finished")
        return Assignment.from_servers(self._servers, self.n_actions)

    def _encode(self) -> np.ndarray:
        n, j = self.n_ues, self.n_actions
        partial = np.zeros((n, j))
        for i, srv in enumerate(self._servers):
            partial[i, srv] = 1.0
        return np.concatenate([self._static, partial.ravel()])

    def reset(self) -> np.ndarray:
        self._servers = []
        return self._encode()

    def terminal_reward(self) -> float:
        value = lagrangian(self.assignment.matrix, self.dual, self.plan,
                           self.s)
        if not math.isfinite(value):
            return SENTINEL_REWARD
        return -value / self.reward_scale

    def step(self, action: int):
        """Assign the cursor UE; returns (next_state, reward, done)."""
        if self.done:
            raise ValueError("episode already finished")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} out of range "
                             f"[0, {self.n_actions})")
        self._servers.append(int(action))
        done = self.done
        reward = self.terminal_reward() if done else 0.0
        return self._encode(), reward, done


@dataclass
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO store with uniform sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._next] = item
        self._next = (self._next + 1) % self.capacity

    def sample(self, rng, batch_size: int) -> list[Transition]:
        idx = rng.integers(0, len(self._items), size=batch_size)
        return [self._items[i] for i in idx]


class _AdamVec:
    """Adam state for one flat parameter vector, updated in place."""

    def __init__(self, size: int):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, p: np.ndarray, g: np.ndarray, lr: float,
             betas=(0.9, 0.999), eps: float = 1e-8) -> None:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
        b1, b2 = betas
        self.t += 1
        self.m = b1 * self.m + (1.0 - b1) * g
        self.v = b2 * self.v + (1.0 - b2) * g * g
        m_hat = self.m / (1.0 - b1 ** self.t)
        v_hat = self.v / (1.0 - b2 ** self.t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
        if not np.all(np.isfinite(p)):
            raise FloatingPointError("non-finite parameter")


def _seed_int(child) -> int:
    return int(child.generate_state(1, dtype=np.uint32)[0])


class HybridAgent:
    """Double Q-learning agent with mixed classical and circuit values.

    Q(s) = w_c * Q_net(s) + w_q * Q_circuit(compress(s)), both mixing
    vectors trainable.  Constructed without a circuit the quantum branch
    disappears entirely and the same training loop runs the classical
    net alone.  lr_quantum applies to the circuit, the compressor, and
    both mixing vectors; lr_classical to the dense net.
    """

    def __init__(self, state_dim: int, n_actions: int, *,
                 circuit: vqc.CircuitSpec | None = None,
                 hidden=(64, 32), seed: int = 0,
                 replay_capacity: int = 10_000, batch_size: int = 64,
                 gamma: float = 1.0, eps_start: float = 1.0,
                 eps_end: float = 0.05, eps_fraction: float = 0.6,
                 sync_period: int = 50, grad_steps: int = 5,
                 lr_classical: float = 1e-3, lr_quantum: float = 5e-3,
                 huber_delta: float = 1.0):
        if circuit is not None and circuit.n_readout != n_actions:
            raise ValueError(f"circuit reads out {circuit.n_readout} "
                             f"values but there are {n_actions} actions")
        self.state_dim = int(state_dim)
        self.n_actions = int(n_actions)
        self.circuit = circuit
        self.seed = int(seed)
        self.batch_size = batch_size
        self.gamma = gamma
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.eps_fraction = eps_fraction
        self.sync_period = sync_period
        self.grad_steps = grad_steps
        self.lr_classical = lr_classical
        self.lr_quantum = lr_quantum
        self.huber_delta = huber_delta

        # Fixed-role child streams keep the classical trajectory
        # byte-identical whether or not the circuit branch exists.
        net_ss, comp_ss, circ_ss, act_ss = \
            np.random.SeedSequence(seed).spawn(4)
        self.q_net = DenseNet((state_dim, *hidden, n_actions),
                              seed=_seed_int(net_ss))
        self.q_target = self.q_net.copy()
        self.w_c = np.full(n_actions, 0.5)
        self.w_c_target = self.w_c.copy()
        self._adam_w_c = _AdamVec(n_actions)

        self.train_quantum = circuit is not None
        if circuit is not None:
            self.compressor = DenseNet((state_dim, circuit.n_features),
                                       seed=_seed_int(comp_ss))
            self.compressor_target = self.compressor.copy()
            self.circ_params = np.random.default_rng(circ_ss).uniform(
                -0.1, 0.1, circuit.n_params)
            self.circ_params_target = self.circ_params.copy()
            self.w_q = np.full(n_actions, 0.5)
            self.w_q_target = self.w_q.copy()
            self._adam_circ = _AdamVec(circuit.n_params)
            self._adam_w_q = _AdamVec(n_actions)

        self.replay = ReplayBuffer(replay_capacity)
        self.rng = np.random.default_rng(act_ss)
        self._grad_steps_done = 0

    @classmethod
    def hybrid(cls, state_dim: int, n_actions: int, *,
               circuit: vqc.CircuitSpec | None = None, **kwargs):
        if circuit is None:
            circuit = vqc.CircuitSpec(n_readout=n_actions)
        return cls(state_dim, n_actions, circuit=circuit, **kwargs)

    @classmethod
    def classical(cls, state_dim: int, n_actions: int, *,
                  hidden=(256, 128), **kwargs):
        return cls(state_dim, n_actions, circuit=None, hidden=hidden,
                   **kwargs)

    @property
    def grad_steps_done(self) -> int:
        return self._grad_steps_done

    def q_values(self, states, target: bool = False) -> np.ndarray:
        """Mixed action values for one state or a batch."""
        net = self.q_target if target else self.q_net
        w_c = self.w_c_target if target else self.w_c
        q = w_c * net.forward(states)
        if self.circuit is not None:
            comp = self.compressor_target if target else self.compressor
            par = self.circ_params_target if target else self.circ_params
            w_q = self.w_q_target if target else self.w_q
            q = q + w_q * vqc.run(self.circuit, comp.forward(states), par)
        return q

    def act(self, state, epsilon: float) -> int:
        if self.rng.random() < epsilon:
            return int(self.rng.integers(self.n_actions))
        return int(np.argmax(self.q_values(state)))

    def sync_targets(self) -> None:
        self.q_target = self.q_net.copy()
        self.w_c_target = self.w_c.copy()
        if self.circuit is not None:
            self.compressor_target = self.compressor.copy()
            self.circ_params_target = self.circ_params.copy()
            self.w_q_target = self.w_q.copy()

    def _targets(self, rewards, next_states, dones) -> np.ndarray:
        y = np.asarray(rewards, dtype=float).copy()
        live = ~np.asarray(dones, dtype=bool)
        if np.any(live):
            nxt = np.asarray(next_states)[live]
            a_star = np.argmax(self.q_values(nxt), axis=1)
            q_tgt = self.q_values(nxt, target=True)
            y[live] += self.gamma * q_tgt[np.arange(len(a_star)), a_star]
        return y

    def _loss_and_grads(self, states, actions, targets):
        """Huber TD loss and its gradients for every trainable part.

        Targets are treated as constants (semi-gradient rule).
        """
        states = np.atleast_2d(np.asarray(states, dtype=float))
        actions = np.asarray(actions, dtype=int)
        targets = np.asarray(targets, dtype=float)
        batch = states.shape[0]
        rows = np.arange(batch)

        q_c = self.q_net.forward(states)
        q_sel = self.w_c[actions] * q_c[rows, actions]
        if self.circuit is not None:
            angles = self.compressor.forward(states)
            q_q = vqc.run(self.circuit, angles, self.circ_params)
            q_sel = q_sel + self.w_q[actions] * q_q[rows, actions]

        err = q_sel - targets
        delta = self.huber_delta
        abs_e = np.abs(err)
        quad = np.minimum(abs_e, delta)
        loss = float(np.mean(0.5 * quad ** 2 + delta * (abs_e - quad)))
        d_sel = np.clip(err, -delta, delta) / batch

        grad_c = np.zeros_like(q_c)
        grad_c[rows, actions] = d_sel * self.w_c[actions]
        grads = {"net": self.q_net.backward(states, grad_c)}
        g_w_c = np.zeros(self.n_actions)
        np.add.at(g_w_c, actions, d_sel * q_c[rows, actions])
        grads["w_c"] = g_w_c

        if self.circuit is not None and self.train_quantum:
            grad_q = np.zeros_like(q_q)
            grad_q[rows, actions] = d_sel * self.w_q[actions]
            d_angles, g_circ = vqc.adjoint_gradients(
                self.circuit, angles, self.circ_params, grad_q)
            grads["circ"] = g_circ
            grads["comp"] = self.compressor.backward(states, d_angles)
            g_w_q = np.zeros(self.n_actions)
            np.add.at(g_w_q, actions, d_sel * q_q[rows, actions])
            grads["w_q"] = g_w_q
        return loss, grads

    def _apply(self, grads) -> None:
        self.q_net.adam_step(grads["net"], lr=self.lr_classical)
        self._adam_w_c.step(self.w_c, grads["w_c"], self.lr_quantum)
        if "circ" in grads:
            self.compressor.adam_step(grads["comp"], lr=self.lr_quantum)
            self._adam_circ.step(self.circ_params, grads["circ"],
                                 self.lr_quantum)
            self._adam_w_q.step(self.w_q, grads["w_q"], self.lr_quantum)

    def gradient_step(self) -> float:
        """One sampled TD update; returns the loss before the update."""
        batch = self.replay.sample(self.rng, self.batch_size)
        states = np.stack([t.state for t in batch])
        actions = np.array([t.action for t in batch])
        rewards = np.array([t.reward for t in batch])
        next_states = np.stack([t.next_state for t in batch])
        dones = np.array([t.done for t in batch])

        y = self._targets(rewards, next_states, dones)
        loss, grads = self._loss_and_grads(states, actions, y)
        if not math.isfinite(loss):
            raise FloatingPointError(
                f"TD loss diverged to {loss!r} at gradient step "
                f"{self._grad_steps_done}")
        self._apply(grads)
        self._grad_steps_done += 1
        if self._grad_steps_done % self.sync_period == 0:
            self.sync_targets()
        return loss

    def save(self, path) -> None:
        payload = {
            "agent_version": np.array(AGENT_CHECKPOINT_VERSION),
            "state_dim": np.array(self.state_dim),
            "n_actions": np.array(self.n_actions),
            "w_c": self.w_c, "w_c_target": self.w_c_target,
            "grad_steps_done": np.array(self._grad_steps_done),
        }
        payload.update(self.q_net.payload("net."))
        payload.update(self.q_target.payload("net_target."))
        payload.update(_adam_payload(self._adam_w_c, "adam_w_c."))
        if self.circuit is not None:
            c = self.circuit
            payload["circuit"] = np.array(
                [c.n_qubits, c.n_layers, c.n_readout, int(c.entangle)])
            payload["circ_params"] = self.circ_params
            payload["circ_params_target"] = self.circ_params_target
            payload["w_q"] = self.w_q
            payload["w_q_target"] = self.w_q_target
            payload.update(self.compressor.payload("comp."))
            payload.update(self.compressor_target.payload("comp_target."))
            payload.update(_adam_payload(self._adam_circ, "adam_circ."))
            payload.update(_adam_payload(self._adam_w_q, "adam_w_q."))
        np.savez(path, **payload)

    @classmethod
    def load(cls, path, **kwargs) -> "HybridAgent":
        """Rebuild an agent from a checkpoint; kwargs override the
        training hyperparameters, which are not stored."""
        with np.load(path, allow_pickle=False) as data:
            version = int(data["agent_version"])
            if version != AGENT_CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            circuit = None
            if "circuit" in data:
                nq, nl, nr, ent = (int(v) for v in data["circuit"])
                circuit = vqc.CircuitSpec(n_qubits=nq, n_layers=nl,
                                          n_readout=nr, entangle=bool(ent))
            agent = cls(int(data["state_dim"]), int(data["n_actions"]),
                        circuit=circuit, **kwargs)
            agent.q_net = DenseNet.from_payload(data, "net.")
            agent.q_target = DenseNet.from_payload(data, "net_target.")
            agent.w_c = data["w_c"].copy()
            agent.w_c_target = data["w_c_target"].copy()
            agent._grad_steps_done = int(data["grad_steps_done"])
            _adam_restore(agent._adam_w_c, data, "adam_w_c.")
            if circuit is not None:
                agent.compressor = DenseNet.from_payload(data, "comp.")
                agent.compressor_target = DenseNet.from_payload(
                    data, "comp_target.")
                agent.circ_params = data["circ_params"].copy()
                agent.circ_params_target = data["circ_params_target"].copy()
                agent.w_q = data["w_q"].copy()
                agent.w_q_target = data["w_q_target"].copy()
                _adam_restore(agent._adam_circ, data, "adam_circ.")
                _adam_restore(agent._adam_w_q, data, "adam_w_q.")
        return agent


def _adam_payload(adam: _AdamVec, prefix: str) -> dict:
    return {prefix + "m": adam.m, prefix + "v": adam.v,
            prefix + "t": np.array(adam.t)}


def _adam_restore(adam: _AdamVec, data, prefix: str) -> None:
    adam.m = data[prefix + "m"].copy()
    adam.v = data[prefix + "v"].copy()
    adam.t = int(data[prefix + "t"])


def hybrid_q(agent: HybridAgent, state) -> np.ndarray:
    """Mixed action-value vector at one state."""
    return agent.q_values(state)


def td_targets(agent: HybridAgent, batch) -> np.ndarray:
    """Double-estimator regression targets for a list of transitions."""
    rewards = np.array([t.reward for t in batch])
    next_states = np.stack([t.next_state for t in batch])
    dones = np.array([t.done for t in batch])
    return agent._targets(rewards, next_states, dones)


def greedy_rollout(agent: HybridAgent, env: EpisodeEnv):
    """Roll one episode with the greedy policy; returns (assignment,
    terminal reward)."""
    state = env.reset()
    done = False
    reward = 0.0
    while not done:
        action = int(np.argmax(agent.q_values(state)))
        state, reward, done = env.step(action)
    return env.assignment, reward


@dataclass
class TrainRecord:
    """Per-episode curve row; loss is NaN until the buffer fills."""

    episode: int
    epsilon: float
    greedy_reward: float
    loss: float


def train(agent: HybridAgent, env_factory, episodes: int, seed: int = 0,
          *, visited: set | None = None):
    """Run the learning loop; returns (agent, per-episode records).

    Epsilon decays linearly from eps_start to eps_end over the first
    eps_fraction of the episodes.  Each episode appends its transitions
    to replay and then takes grad_steps sampled updates once the buffer
    can fill a batch.  The greedy reward column re-rolls each episode's
    environment with exploration off.  When ``visited`` is a set it
    collects the server tuple of every completed episode, which lets a
    caller screen the explored assignments afterwards.
    """
    agent.rng = np.random.default_rng(seed)
    span = agent.eps_fraction * episodes
    records = []
    for ep in range(episodes):
        if span > 0:
            frac = min(1.0, ep / span)
        else:
            frac = 1.0
        epsilon = agent.eps_start + (agent.eps_end - agent.eps_start) * frac

        env = env_factory()
        state = env.reset()
        done = False
        while not done:
            action = agent.act(state, epsilon)
            nxt, reward, done = env.step(action)
            agent.replay.push(Transition(state, action, reward, nxt, done))
            state = nxt
        if visited is not None:
            visited.add(env.assignment.servers)

        losses = []
        for _ in range(agent.grad_steps):
            if len(agent.replay) >= agent.batch_size:
                losses.append(agent.gradient_step())
        a_greedy, g_reward = greedy_rollout(agent, env_factory())
        if visited is not None:
            visited.add(a_greedy.servers)
        records.append(TrainRecord(
            episode=ep, epsilon=epsilon, greedy_reward=g_reward,
            loss=float(np.mean(losses)) if losses else math.nan))
    return agent, records


def repair_assignment(a: Assignment, plan: BandwidthPlan, s: Scenario,
                      tol: float = 1e-9) -> Assignment:
    """Restore latency and satellite-energy feasibility by single-UE moves.

    Each pass applies the move with the largest violation reduction;
    when no move improves, the remaining violation is unfixable under
    the frozen plan and a typed error names the dominant family.
    """
    def score(servers):
        x = Assignment.from_servers(servers, s.n_servers).matrix
        r = residuals(x, plan, s)
        v3 = max(float(np.max(r.c3)) / s.compute.t_th, 0.0)
        v6 = max(max(v / s.compute.e_th[j] for j, v in enumerate(r.c6)),
                 0.0)
        return max(v3, v6), v3, v6

    servers = list(a.servers)
    current, v3, v6 = score(servers)
    for _ in range(s.topology.n_ues * s.n_servers):
        if current <= tol:
            return Assignment.from_servers(servers, s.n_servers)
        best = (current, None)
        for n in range(s.topology.n_ues):
            for j in range(s.n_servers):
                if j == servers[n]:
                    continue
                cand = list(servers)
                cand[n] = j
                value = score(cand)[0]
                if value < best[0]:
                    best = (value, cand)
        if best[1] is None:
            break
        servers = best[1]
        current, v3, v6 = score(servers)
    if current <= tol:
        return Assignment.from_servers(servers, s.n_servers)
    raise InfeasibleError(
        "C3" if v3 >= v6 else "C6",
        f"no single-UE move restores feasibility from {tuple(servers)}")


class _AgentMinimizer:
    """Adapter: retrain the agent briefly, then answer greedily."""

    def __init__(self, agent: HybridAgent, episodes: int, seed: int,
                 visited: set | None = None):
        self.agent = agent
        self.episodes = episodes
        self.seed = seed
        self.visited = visited
        self._calls = 0

    def __call__(self, d: DualState, plan: BandwidthPlan,
                 s: Scenario) -> Assignment:
        self._calls += 1
        train(self.agent, lambda: EpisodeEnv(s, plan, d), self.episodes,
              seed=self.seed + self._calls, visited=self.visited)
        a, _ = greedy_rollout(self.agent, EpisodeEnv(s, plan, d))
        return a


def solve_x_subproblem(solver, plan: BandwidthPlan, s: Scenario,
                       dual0: DualState, schedule, *, iters: int = 80,
                       episodes_per_iter: int = 25, seed: int = 0,
                       visited: set | None = None):
    """Assignment update by dual ascent around an inner minimizer.

    ``solver`` is either a HybridAgent, retrained for a few episodes at
    every multiplier iterate (warm start), or any minimizer callable
    such as duality.ExhaustiveMinimizer, which makes the ascent exact.
    Returns (assignment, dual state at the best iterate, best dual
    value); the assignment is the inner minimizer's answer there,
    repaired to feasibility.  ``visited``, when a set, collects every
    server tuple the inner minimizer proposed or played.
    """
    if isinstance(solver, HybridAgent):
        minimizer = _AgentMinimizer(solver, episodes_per_iter, seed,
                                    visited=visited)
    else:
        minimizer = solver

    d = dual0.copy()
    best_value = -math.inf
    best_d = d.copy()
    best_x = None
    for t in range(iters):
        value, x_min = eval_dual(d, minimizer, plan, s)
        if not math.isfinite(value):
            break
        if visited is not None:
            visited.add(x_min.servers)
        if value > best_value:
            best_value, best_d, best_x = value, d.copy(), x_min
        r = residuals(x_min.matrix, plan, s)
        subgradient_step(d, r, schedule.alpha(t), s)
    if best_x is None:
        raise InfeasibleError(
            "C3", "no dual iterate produced a finite assignment value")
    return repair_assignment(best_x, plan, s), best_d, best_value
