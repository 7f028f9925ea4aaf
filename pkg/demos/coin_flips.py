"""The common coin: how often do all correct processes see the same bit?

Run with: python demos/coin_flips.py
"""

from collections import Counter

from abalab import SimConfig, run

trials = 300
for script in ("none", "silent", "wrong_point"):
    tally = Counter()
    for seed in range(trials):
        m = run(SimConfig(workload="coin"), script, seed)
        bits = set(m.coins.get(1, ()))
        tally[bits.pop() if len(bits) == 1 else "mixed"] += 1
    print(f"{script:>12}: all 0 {tally[0] / trials:.2f}, all 1 {tally[1] / trials:.2f}, "
          f"mixed {tally['mixed'] / trials:.2f}")

# the coin is biased toward 0: it is 0 whenever any attached secret sums to 0
# modulo u = ceil(0.87 n), so the chance of a common 1 shrinks as n grows
