"""Systematic search over delivery orders instead of random sampling.

The broadcast search is exhaustive for n = 4; the secret-sharing search visits
the default schedule plus every schedule within a few deviations of it.

Run with: python demos/schedule_exploration.py
"""

from abalab import ExploreConfig, schedule_explore

for cfg in (
    ExploreConfig(target="acast", split=("a", "a", "b")),
    ExploreConfig(target="acast"),
    ExploreConfig(target="acast", corrupt_sender=False),
):
    rep = schedule_explore(cfg, bound=10_000)
    sender = "corrupt" if cfg.corrupt_sender else "correct"
    print(f"broadcast ({sender} sender, split={cfg.split}): {rep.branches} branches, exhausted={rep.exhausted}, "
          f"delivered {sorted(rep.delivered_values)}, violations {len(rep.violations)}")

rep = schedule_explore(ExploreConfig(target="ivss", deviations=1), bound=300)
print(f"secret sharing: {rep.terminals} schedules, ok={rep.ok}, outputs {sorted(rep.delivered_values)}")
