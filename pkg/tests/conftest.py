import random

from abalab.field_poly import DEFAULT_PRIME
from abalab.messages import ADeliver
from abalab.node import ACAST, SEND, Node


class Cluster:
    """Nodes wired through a plain message pool; tests choose the delivery order."""

    def __init__(self, n, t, seed=0, p=DEFAULT_PRIME, node_cls=None):
        node_cls = node_cls or {}
        self.n, self.t = n, t
        self.nodes = {
            pid: node_cls.get(pid, Node)(pid, n, t, p, random.Random(f"{seed}:{pid}"))
            for pid in range(1, n + 1)
        }
        self.pool = []
        self.rng = random.Random(f"{seed}:sched")

    def flush(self):
        for node in self.nodes.values():
            for entry in node.drain():
                if entry[0] == SEND:
                    self.pool.append((entry[1], node.pid, entry[2]))
                elif entry[0] == ACAST:
                    wrapped = ADeliver(node.pid, entry[1])
                    self.pool += [(i, node.pid, wrapped) for i in self.nodes]

    def run(self, hold=None, max_steps=500_000):
        """Deliver in random order; messages matching ``hold`` wait until nothing else is left."""
        steps = 0
        self.flush()
        while self.pool and steps < max_steps:
            ready = [k for k, m in enumerate(self.pool) if hold is None or not hold(m)]
            idx = self.rng.choice(ready) if ready else 0
            dst, src, msg = self.pool.pop(idx)
            self.nodes[dst].receive(src, msg)
            self.flush()
            steps += 1
        return steps


class Recorder:
    """Listener that joins every completed sharing's reconstruction."""

    def __init__(self):
        self.outputs = {}

    def on_share_complete(self, node, iid):
        node.ivss.recon_invoke(iid)

    def on_recon_output(self, node, iid, value):
        self.outputs[(node.pid, iid)] = value

    def on_coin(self, node, r, c):
        pass

    def on_decide(self, node, sigma):
        pass


# -- acceptance verdict lines ----------------------------------------------------------

ACCEPTANCE_TITLES = {
    1: "interpolation round trip",
    2: "broadcast safety, exhaustive",
    3: "IVSS honest path",
    4: "divergent reconstruction is exposed",
    5: "no divergent reconstruction at n=5",
    6: "coin bias",
    7: "agreement validity and consistency",
    8: "expected rounds and bad-round budget",
    9: "determinism regression",
}
VERDICTS = {}


def record_verdict(num, ok, detail):
    VERDICTS[num] = (bool(ok), detail)
    print(f"criterion {num} ({ACCEPTANCE_TITLES[num]}): {'PASS' if ok else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, title in ACCEPTANCE_TITLES.items():
        if num not in VERDICTS:
            terminalreporter.write_line(f"criterion {num} ({title}): NO VERDICT - not run, or errored first")
            continue
        ok, detail = VERDICTS[num]
        terminalreporter.write_line(f"criterion {num} ({title}): {'PASS' if ok else 'FAIL'} - {detail}")
