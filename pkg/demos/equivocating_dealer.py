"""A corrupt dealer equivocates, wins once, and is then named by everyone.

Process 4 deals rows of f but later reveals rows of a second polynomial g that
agrees with f only on process 1's row. The schedule delivers the rows it
needs first, so the correct processes reconstruct g(0, 0) in round 1. The
consistency checks that follow put the pair (2, 4) into every correct
process's set of known-faulty pairs, and no later candidate set uses it.

Run with: python demos/equivocating_dealer.py
"""

from pathlib import Path

from abalab import Scenario
from abalab.simnet import execute

scenario = Scenario.load(Path(__file__).resolve().parent.parent / "scenarios" / "equivocating_dealer.toml")
seed = scenario.seeds[0]
m, nodes = execute(scenario.config(), scenario.script_for(0), seed)

iid = min(i for i in m.e_instances if i.dealer == 4)
f, g = nodes[4].brain.attacks[iid]
print(f"instance {iid}: dealt secret {f.secret}, equivocated secret {g.secret}")
for pid in (1, 2, 3):
    inst = nodes[pid].ivss.instances[iid]
    print(f"  process {pid} candidate set {sorted(inst.candidate_set)} output {inst.output}")

print("rounds with a divergent output:", list(m.e_rounds))
for pid in (1, 2, 3):
    print(f"process {pid} faulty pairs: {sorted(nodes[pid].ivss.fp)}")

for rnd in range(2, scenario.rounds + 1):
    accepted = {
        tuple(sorted(inst.candidate_set))
        for other, inst in nodes[1].ivss.instances.items()
        if other.dealer == 4 and other.round == rnd and inst.candidate_set
    }
    print(f"round {rnd}: dealer 4 candidate sets seen by process 1: {sorted(accepted)}")
