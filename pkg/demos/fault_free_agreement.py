"""Four processes, no faults: watch them agree and count what it cost.

Run with: python demos/fault_free_agreement.py
"""

from collections import Counter

from abalab import SimConfig, run

# mixed inputs force the processes through at least one coin flip
config = SimConfig(n=4, t=1, inputs=(0, 1, 1, 0))
rounds = Counter()
for seed in range(20):
    m = run(config, "none", seed)
    assert m.decided and not m.violations
    rounds[m.rounds] += 1
    if seed < 3:
        print(f"seed {seed}: outputs {m.outputs}, {m.rounds} round(s), "
              f"{m.msgs_total} messages ({m.msgs_acast} broadcast)")

print("rounds to decide over 20 seeds:", dict(sorted(rounds.items())))

# unanimous inputs decide in the first round, whatever the schedule
for v in (0, 1):
    m = run(SimConfig(inputs=(v,) * 4), "reorder", 5)
    print(f"unanimous {v}: decided {m.output} in round {m.rounds}")
