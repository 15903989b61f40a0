"""
Growing the offloaded task
==========================

Grow every UE's task and compare the jointly optimized design against
the equal-bandwidth baseline.  The gap widens as the band gets tight,
until the latency budget kills both.

The installed command produces the same table as a CSV:

    satedge sweep --axis task-bits --values 3e5,4e5,5e5,6e5,7e5
"""

import math

from satedge.bandwidth import InfeasibleError
from satedge.baselines import equal_bandwidth, exhaustive_search
from satedge.scenario import generate_scenario

print("task bits   joint E (J)     equal E (J)    saving")
for bits in (3e5, 4e5, 5e5, 6e5, 7e5):
    s = generate_scenario(seed=0, overrides={
        "topology": {"task_bits": bits}})
    try:
        _, _, e_joint = exhaustive_search(s)
    except InfeasibleError:
        print(f"{bits:>9.0f}   infeasible")
        continue
    try:
        _, e_eq = equal_bandwidth(s)
        saving = f"{100 * (e_eq - e_joint) / e_eq:5.2f}%"
        eq_txt = f"{e_eq:.8f}"
    except InfeasibleError:
        eq_txt, saving = "infeasible", "-"
    print(f"{bits:>9.0f}   {e_joint:.8f}    {eq_txt:>12}    {saving}")
