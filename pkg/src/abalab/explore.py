"""Systematic schedule exploration for tiny configurations.

Two targets:

``acast``
    One Bracha broadcast among ``n`` processes. The sender may be corrupt, in
    which case it hands each correct receiver its own value in every phase.
    A depth-first search over delivery orders with state memoisation visits
    every reachable state (up to the branch budget) and checks agreement
    everywhere and totality at every terminal state.

``ivss``
    One sharing-plus-reconstruction by a correct dealer on full nodes. The
    state is too rich to memoise, so schedules are enumerated by deviation
    count: the baseline delivers in send order, and each explored schedule
    swaps in at most ``deviations`` out-of-order deliveries. Each complete
    execution checks that every correct process output the dealt secret.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import product

from .acast import ECHO, MSG, READY, AcastInstance
from .messages import IvssId
from .node import ACAST, SEND, Node

TARGETS = ("acast", "ivss")


@dataclass(frozen=True)
class ExploreConfig:
    target: str = "acast"
    n: int = 4
    t: int = 1
    corrupt_sender: bool = True
    values: tuple = ("a", "b")
    # acast: per-receiver values of the corrupt sender; None tries every split
    split: tuple | None = None
    deviations: int = 1  # ivss only
    seed: int = 0  # ivss only

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"unknown exploration target {self.target!r}")
        if self.n <= 3 * self.t:
            raise ValueError("need n > 3t")


@dataclass
class ExploreReport:
    target: str
    branches: int = 0
    states: int = 0
    terminals: int = 0
    exhausted: bool = True
    delivered_values: set = field(default_factory=set)
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def schedule_explore(config: ExploreConfig, bound: int = 10_000) -> ExploreReport:
    """Enumerate delivery orders up to ``bound`` branches and report safety verdicts."""
    if config.target == "acast":
        return _explore_acast(config, bound)
    return _explore_ivss(config, bound)


# -- single broadcast ----------------------------------------------------------------


def _explore_acast(config: ExploreConfig, bound: int) -> ExploreReport:
    n, t = config.n, config.t
    sender = n
    correct = tuple(range(1, n if config.corrupt_sender else n + 1))
    report = ExploreReport("acast")
    if config.corrupt_sender:
        splits = [config.split] if config.split is not None else list(product(config.values, repeat=len(correct)))
    else:
        splits = [None]
    seen: set = set()
    budget = [bound]
    for split in splits:
        insts = {i: AcastInstance(sender, "x", n, t) for i in correct}
        pending: list[tuple] = []
        if split is None:
            v = config.values[0]
            insts[sender].start(v)
            pending = [(i, sender, MSG, v) for i in correct]
        else:
            # the corrupt sender plays every phase, with its own value per receiver
            for i, v in zip(correct, split):
                pending += [(i, sender, MSG, v), (i, sender, ECHO, v), (i, sender, READY, v)]
        _dfs_acast(insts, tuple(sorted(pending)), correct, seen, report, budget,
                   expected=None if split is not None else config.values[0])
        if budget[0] <= 0:
            report.exhausted = False
            break
    report.states = len(seen)
    return report


def _acast_key(insts, pending):
    return (tuple(insts[i].snapshot() for i in sorted(insts)), pending)


def _dfs_acast(insts, pending, correct, seen, report, budget, expected) -> None:
    stack = [(insts, pending)]
    while stack:
        insts, pending = stack.pop()
        key = _acast_key(insts, pending)
        if key in seen:
            continue
        seen.add(key)
        outs = {insts[i].output for i in correct if insts[i].output is not None}
        report.delivered_values |= outs
        if len(outs) > 1:
            report.violations.append(f"agreement: correct processes delivered {sorted(map(repr, outs))}")
        if expected is not None and outs and outs != {expected}:
            report.violations.append(f"validity: delivered {outs} instead of {expected!r}")
        if not pending:
            report.terminals += 1
            done = [insts[i].output is not None for i in correct]
            if any(done) and not all(done):
                report.violations.append("totality: some but not all correct processes delivered")
            continue
        # Deliveries to different receivers commute and never disable each other,
        # so branching over one receiver's pending messages (a persistent set)
        # still reaches every terminal state; outputs are monotone, so checking
        # terminals catches every disagreement.
        focus = pending[0][0]
        tried = set()
        for idx, msg in enumerate(pending):
            if msg[0] != focus or msg in tried:
                continue
            tried.add(msg)
            if budget[0] <= 0:
                return
            budget[0] -= 1
            report.branches += 1
            dst, src, phase, value = msg
            nxt = {i: (inst.copy() if i == dst else inst) for i, inst in insts.items()}
            out, _ = nxt[dst].handle(src, phase, value)
            rest = list(pending[:idx] + pending[idx + 1:])
            for m in out:
                rest += [(i, dst, m.phase, m.value) for i in correct]
            stack.append((nxt, tuple(sorted(rest))))


# -- single sharing and reconstruction ---------------------------------------------------


class _Replay:
    """A single IVSS instance driven by an explicit choice sequence."""

    def __init__(self, config: ExploreConfig, choices: dict[int, int]):
        n, t = config.n, config.t
        self.nodes = {pid: Node(pid, n, t, 2**61 - 1, random.Random(f"{config.seed}:{pid}")) for pid in range(1, n + 1)}
        self.pending: list[tuple] = []
        self.sizes: list[int] = []
        self.choices = choices
        self.iid = IvssId(1, 1, 1)
        self.secret = random.Random(f"{config.seed}:secret").randrange(2**61 - 1)
        for node in self.nodes.values():
            node.listeners.append(self)
            node.ivss.cert_round_begin(1)
        self.nodes[1].ivss.share_start(self.iid, self.secret)
        for node in self.nodes.values():
            node.progress()
            self._flush(node)

    # listener hooks
    def on_share_complete(self, node, iid):
        node.ivss.recon_invoke(iid)

    def on_recon_output(self, node, iid, value):
        pass

    def on_coin(self, node, r, c):
        pass

    def on_decide(self, node, sigma):
        pass

    def _flush(self, node: Node) -> None:
        for entry in node.drain():
            if entry[0] == SEND:
                self.pending.append((entry[1], node.pid, entry[2]))
            elif entry[0] == ACAST:
                from .messages import ADeliver

                wrapped = ADeliver(node.pid, entry[1])
                self.pending += [(i, node.pid, wrapped) for i in self.nodes]

    def run(self) -> None:
        step = 0
        while self.pending:
            self.sizes.append(len(self.pending))
            idx = min(self.choices.get(step, 0), len(self.pending) - 1)
            dst, src, msg = self.pending.pop(idx)
            node = self.nodes[dst]
            node.receive(src, msg)
            self._flush(node)
            step += 1


def _explore_ivss(config: ExploreConfig, bound: int) -> ExploreReport:
    report = ExploreReport("ivss")
    frontier: list[dict[int, int]] = [{}]
    seen_runs = 0
    while frontier:
        choices = frontier.pop(0)
        if seen_runs >= bound:
            report.exhausted = False
            break
        seen_runs += 1
        report.branches += 1
        rep = _Replay(config, choices)
        rep.run()
        report.terminals += 1
        outs = {pid: node.ivss.instances[rep.iid].output for pid, node in rep.nodes.items()}
        report.delivered_values |= {v for v in outs.values() if v is not None}
        wrong = {pid: v for pid, v in outs.items() if v != rep.secret}
        if wrong:
            report.violations.append(f"schedule {sorted(choices.items())}: outputs {wrong} differ from the secret")
        if any(node.ivss.fp for node in rep.nodes.values()):
            report.violations.append(f"schedule {sorted(choices.items())}: faulty pair inferred with no fault")
        if len(choices) < config.deviations:
            last = max(choices, default=-1)
            for step in range(last + 1, len(rep.sizes)):
                for alt in range(1, rep.sizes[step]):
                    frontier.append({**choices, step: alt})
    report.states = seen_runs
    return report
