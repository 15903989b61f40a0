"""
Watch both Q-learning agents find the best assignment
=====================================================

The discrete subproblem inside the splitting loop can be answered by a
learned policy instead of enumeration.  Here both agents train against
a frozen bandwidth plan and zero multipliers, so the reward ranking is
just (scaled, negated) energy, and the enumerated best reward is known.

The hybrid agent simulates an 8-qubit circuit next to its MLP, so its
wall-clock cost per episode is much higher; the point of the exercise
is episodes-to-target, not seconds.
"""

import math
import time

from satedge.admm import default_solver, initial_plan
from satedge.agent import EpisodeEnv, greedy_rollout, train
from satedge.baselines import enumerate_assignments
from satedge.cost import Assignment
from satedge.duality import DualState, lagrangian
from satedge.scenario import generate_scenario

EPISODES = 100

s = generate_scenario(seed=0)
plan = initial_plan(s)
dual = DualState.zeros(s)

# Enumerate what the agents are up against.
env = EpisodeEnv(s, plan, dual)
rewards = {}
for servers in enumerate_assignments(s.topology.n_ues, s.n_servers):
    value = lagrangian(Assignment.from_servers(servers, s.n_servers).matrix,
                       dual, plan, s)
    if math.isfinite(value):
        rewards[servers] = -value / env.reward_scale
best_servers = max(rewards, key=rewards.get)
best = rewards[best_servers]
print(f"{len(rewards)} completions have finite reward; "
      f"best {best:.4f} at {best_servers}")
print()

for kind in ("classical", "hybrid"):
    agent = default_solver(kind, s, seed=0)
    t0 = time.perf_counter()
    _, records = train(agent, lambda: EpisodeEnv(s, plan, dual),
                       EPISODES, seed=0)
    elapsed = time.perf_counter() - t0
    x, reward = greedy_rollout(agent, EpisodeEnv(s, plan, dual))
    print(f"[{kind}] {EPISODES} episodes in {elapsed:.1f}s, "
          f"greedy picks {x.servers} with reward {reward:.4f} "
          f"({100 * reward / best:.1f}% of best)")
    for r in records[::20]:
        # loss is nan until the replay buffer can fill a batch
        loss = "-" if math.isnan(r.loss) else f"{r.loss:.4f}"
        print(f"    ep {r.episode:>3}  eps {r.epsilon:.2f}  "
              f"greedy {r.greedy_reward:.4f}  loss {loss}")
    print()
