"""Deterministic discrete-event simulation of an asynchronous network.

Time is measured in abstract ticks. Every message gets a delay in
``[1, F]`` from the adversary's policy, and events are delivered in
``(deliver_time, sequence)`` order, so a run is a pure function of
``(config, script, seed)``. Duration is the final time divided by the
longest delay actually used, i.e. the number of "longest-message periods"
the execution lasted.

Randomness comes from one root seed: each process draws from its own stream
``Random(f"{seed}:{pid}")`` and the scheduler from ``Random(f"{seed}:net")``,
so one process's coin flips never depend on how messages were interleaved.
"""

from __future__ import annotations

import heapq
import random
from collections import Counter
from dataclasses import dataclass, field

from .acast import AcastMessage
from .adversary import AdversaryScript, Envelope
from .field_poly import DEFAULT_PRIME, coin_modulus, interpolate_symmetric
from .messages import ADeliver, IvssId, Point, Row
from .node import ACAST, BCAST, SEND, TRANSPORTS, Node

WORKLOADS = ("aba", "coin", "ivss")

CSV_COLUMNS = ("seed", "decided", "output", "rounds", "duration", "msgs_total", "msgs_acast", "e_rounds", "fp_pairs")


def default_fairness(n: int) -> int:
    return 64 * n * n


def bad_round_budget(n: int, t: int) -> float:
    """Most rounds that may contain a divergent reconstruction: ``3t / (n - 3t) + 1``."""
    return 3 * t / (n - 3 * t) + 1


@dataclass(frozen=True)
class SimConfig:
    n: int = 4
    t: int = 1
    inputs: tuple[int, ...] | None = None  # None: drawn per seed
    workload: str = "aba"
    rounds: int = 3  # ivss workload only
    advance_after: int | None = None  # ivss workload: outputs per round before moving on (default n - t)
    p: int = DEFAULT_PRIME
    fairness: int | None = None
    max_steps: int = 1_000_000
    transport: str = "ideal"

    def __post_init__(self):
        n, t = self.n, self.t
        if t < 0 or n <= 3 * t or n < 4:
            raise ValueError(f"need n > 3t and n >= 4, got n={n}, t={t}")
        if self.inputs is not None:
            if len(self.inputs) != n or any(x not in (0, 1) for x in self.inputs):
                raise ValueError("inputs must be n bits")
        if self.workload not in WORKLOADS:
            raise ValueError(f"unknown workload {self.workload!r}")
        if self.transport not in TRANSPORTS:
            raise ValueError(f"unknown transport {self.transport!r}")
        if self.p <= max(n, coin_modulus(n)):
            raise ValueError("field prime must exceed n and the coin modulus")
        if self.fairness is not None and self.fairness < 1:
            raise ValueError("fairness bound must be positive")
        if self.advance_after is not None and not 1 <= self.advance_after <= n:
            raise ValueError("advance_after must lie in [1, n]")
        if self.max_steps < 1 or self.rounds < 1:
            raise ValueError("max_steps and rounds must be positive")

    @property
    def F(self) -> int:
        return self.fairness if self.fairness is not None else default_fairness(self.n)


@dataclass
class RunMetrics:
    seed: int
    n: int
    t: int
    script: str
    workload: str
    inputs: tuple[int, ...]
    corrupt: tuple[int, ...]
    decided: bool
    outputs: dict[int, int | None]
    rounds: int | None
    duration: float
    final_time: int  # clock when the workload finished (or when the run stopped)
    max_delay: int  # longest delay over the whole run, drain included
    steps: int
    terminated: bool
    msgs_total: int
    msgs_acast: int
    msgs_by_kind: dict[str, int]
    fp_sizes: dict[int, int]
    fp_union: tuple[tuple[int, int], ...]
    e_rounds: tuple[int, ...]
    e_instances: tuple[IvssId, ...]
    coins: dict[int, tuple[int, ...]] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    @property
    def fp_pairs(self) -> int:
        return max(self.fp_sizes.values(), default=0)

    @property
    def output(self) -> int | None:
        vals = {v for v in self.outputs.values() if v is not None}
        return vals.pop() if len(vals) == 1 else None

    @property
    def within_budget(self) -> bool:
        return len(self.e_rounds) <= bad_round_budget(self.n, self.t)

    def csv_row(self) -> dict:
        return {
            "seed": self.seed,
            "decided": int(self.decided),
            "output": "" if self.output is None else self.output,
            "rounds": "" if self.rounds is None else self.rounds,
            "duration": f"{self.duration:.4f}",
            "msgs_total": self.msgs_total,
            "msgs_acast": self.msgs_acast,
            "e_rounds": len(self.e_rounds),
            "fp_pairs": self.fp_pairs,
        }


class Network:
    """Event queue plus the adversary's view of traffic."""

    def __init__(self, nodes: dict[int, Node], adversary, rng: random.Random, fairness: int):
        self.nodes = nodes
        self.adversary = adversary
        self.rng = rng
        self.fairness = fairness
        self.n = len(nodes)
        self.heap: list = []
        self.seq = 0
        self.now = 0
        self.max_delay = 0
        self.steps = 0
        self.total = 0
        self.acast_total = 0
        self.by_kind: Counter = Counter()
        self._seen_acast: set = set()

    def _post(self, src: int, dst: int, msg, env: Envelope) -> None:
        d = self.adversary.delay(env, self.rng)
        if not 1 <= d <= self.fairness:
            raise AssertionError(f"delay {d} outside [1, {self.fairness}]")
        if d > self.max_delay:
            self.max_delay = d
        self.seq += 1
        heapq.heappush(self.heap, (self.now + d, self.seq, dst, src, msg))
        self.total += 1

    def flush(self, node: Node) -> None:
        src = node.pid
        for entry in node.drain():
            tag = entry[0]
            if tag == SEND:
                _, dst, msg = entry
                kind = "row" if type(msg) is Row else "point" if type(msg) is Point else type(msg).__name__
                self.by_kind[kind] += 1
                self._post(src, dst, msg, Envelope(src, dst, kind, None, (kind, getattr(msg, "iid", None))))
            elif tag == ACAST:
                payload = entry[1]
                key = (src, payload.topic)
                if key in self._seen_acast:
                    continue
                self._seen_acast.add(key)
                wrapped = ADeliver(src, payload)
                name = type(payload).__name__
                for dst in range(1, self.n + 1):
                    self.by_kind[name] += 1
                    self.acast_total += 1
                    self._post(src, dst, wrapped, Envelope(src, dst, "deliver", src, payload.topic))
            elif tag == BCAST:
                m: AcastMessage = entry[1]
                name = type(m.value).__name__
                for dst in range(1, self.n + 1):
                    self.by_kind[name] += 1
                    self.acast_total += 1
                    self._post(src, dst, m, Envelope(src, dst, m.phase, m.origin, m.topic))

    def step(self) -> bool:
        if not self.heap:
            return False
        when, _, dst, src, msg = heapq.heappop(self.heap)
        self.now = when
        self.steps += 1
        node = self.nodes[dst]
        node.clock = self.steps
        node.receive(src, msg)
        self.flush(node)
        return True


class _Progress:
    """Listener counting how many correct processes finished the workload."""

    def __init__(self, correct):
        self.correct = correct
        self.decided: set[int] = set()
        self.coins: dict[int, set[int]] = {}

    def on_share_complete(self, node, iid):
        pass

    def on_recon_output(self, node, iid, value):
        pass

    def on_coin(self, node, r, c):
        if node.pid in self.correct:
            self.coins.setdefault(r, set()).add(node.pid)

    def on_decide(self, node, sigma):
        if node.pid in self.correct:
            self.decided.add(node.pid)


class IvssWorkload:
    """Repeated IVSS rounds without the agreement layer.

    In round ``r`` every process deals one secret, joins reconstruction of
    every instance of that round once its sharing completes, and moves on
    after ``advance_after`` reconstructions of the round (``n - t`` unless
    set) have produced output.
    """

    def __init__(self, rounds: int, advance_after: int | None = None):
        self.rounds = rounds
        self.advance_after = advance_after
        self.done: set[int] = set()
        self.current: dict[int, int] = {}
        self.outputs: dict[int, Counter] = {}

    def begin(self, node: Node, r: int) -> None:
        self.current[node.pid] = r
        node.ivss.cert_round_begin(r)
        if r > self.rounds:
            self.done.add(node.pid)
            return
        node.ivss.share_start(IvssId(node.pid, r, 1), node.rng.randrange(node.p))

    def start(self, node: Node) -> None:
        self.outputs[node.pid] = Counter()
        self.begin(node, 1)
        node.progress()

    def on_share_complete(self, node, iid):
        if iid.round <= self.rounds:
            node.ivss.recon_invoke(iid)

    def on_recon_output(self, node, iid, value):
        out = self.outputs[node.pid]
        out[iid.round] += 1
        r = self.current[node.pid]
        need = self.advance_after if self.advance_after is not None else node.n - node.t
        if iid.round == r and out[r] >= need and r <= self.rounds:
            self.begin(node, r + 1)

    def on_coin(self, node, r, c):
        pass

    def on_decide(self, node, sigma):
        pass


def draw_inputs(config: SimConfig, seed: int) -> tuple[int, ...]:
    if config.inputs is not None:
        return tuple(config.inputs)
    rng = random.Random(f"{seed}:inputs")
    return tuple(rng.randrange(2) for _ in range(config.n))


def build(config: SimConfig, script: AdversaryScript, seed: int):
    adversary = script.build(config.n, config.t, config.F)
    nodes = {
        pid: adversary.make_node(pid, config.p, random.Random(f"{seed}:{pid}"), config.transport)
        for pid in range(1, config.n + 1)
    }
    net = Network(nodes, adversary, random.Random(f"{seed}:net"), config.F)
    return adversary, nodes, net


def run(config: SimConfig, script: AdversaryScript | str | None = None, seed: int = 0) -> RunMetrics:
    """Simulate one execution until every correct process finishes or ``max_steps`` is hit."""
    return execute(config, script, seed)[0]


def execute(config: SimConfig, script: AdversaryScript | str | None = None, seed: int = 0):
    """Like :func:`run`, but also return the final node map for inspection."""
    if script is None:
        script = AdversaryScript()
    elif not isinstance(script, AdversaryScript):
        script = AdversaryScript.from_record(script)
    adversary, nodes, net = build(config, script, seed)
    correct = [pid for pid in nodes if pid not in adversary.corrupt]
    tracker = _Progress(set(correct))
    inputs = draw_inputs(config, seed)
    workload = IvssWorkload(config.rounds, config.advance_after) if config.workload == "ivss" else None
    for node in nodes.values():
        node.listeners.append(tracker)
        if workload is not None:
            node.listeners.append(workload)
    for pid, node in nodes.items():
        if config.workload == "aba":
            node.start_aba(inputs[pid - 1])
        elif config.workload == "coin":
            node.start_coin(1)
        elif not node.crashed:
            workload.start(node)
        net.flush(node)

    goal = len(correct)

    def finished() -> bool:
        if config.workload == "aba":
            return len(tracker.decided) == goal
        if config.workload == "coin":
            return len(tracker.coins.get(1, ())) == goal
        return all(pid in workload.done for pid in correct)

    # Processes keep relaying after they finish, so the queue is drained (or the
    # step limit hit); the clock is read when the workload itself finished.
    done_at = None
    while net.steps < config.max_steps:
        if done_at is None and finished():
            done_at = (net.now, net.max_delay)
        if not net.step():
            break
    if done_at is None and finished():
        done_at = (net.now, net.max_delay)
    return collect(config, script, seed, adversary, nodes, net, inputs, done_at), nodes


# -- oracles -------------------------------------------------------------------


def defined_secret(nodes: dict[int, Node], correct, iid: IvssId, t: int) -> int | None:
    """The secret an instance fixes: the dealt one, or the one correct candidate-set rows agree on."""
    dealer = nodes.get(iid.dealer)
    if iid.dealer in correct and dealer is not None:
        inst = dealer.ivss.instances.get(iid)
        return inst.dealt.secret if inst is not None and inst.dealt is not None else None
    members = None
    for pid in correct:
        inst = nodes[pid].ivss.instances.get(iid)
        if inst is not None and inst.candidate_set is not None:
            members = inst.candidate_set
            break
    if members is None:
        return None
    rows = {}
    for i in members:
        if i in correct:
            inst = nodes[i].ivss.instances.get(iid)
            if inst is not None and inst.my_row is not None:
                rows[i] = inst.my_row
    return interpolate_symmetric(rows, t).secret


def detect_event_E(nodes: dict[int, Node], correct, iid: IvssId, t: int) -> bool:
    """True when some correct process output a value other than the instance's defined secret."""
    outs = [nodes[k].ivss.instances[iid].output for k in correct if iid in nodes[k].ivss.instances]
    outs = [o for o in outs if o is not None]
    if not outs:
        return False
    s = defined_secret(nodes, correct, iid, t)
    return any(o != s for o in outs)


def coin_diagnostics(nodes: dict[int, Node], correct, r: int, t: int) -> list[str]:
    """Check the fixed-value and common-core properties of round ``r``'s coin."""
    problems = []
    values: dict[int, set[int]] = {}
    for pid in correct:
        st = nodes[pid].icc.rounds.get(r)
        if st is None:
            continue
        for j, v in st.values.items():
            values.setdefault(j, set()).add(v)
    for j, vs in values.items():
        if len(vs) > 1:
            problems.append(f"round {r}: correct processes disagree on the value attached to {j}")
    enablers = [nodes[pid].icc.rounds.get(r) for pid in correct]
    enablers = [st for st in enablers if st is not None and st.S is not None]
    if not enablers:
        return problems
    first = min(enablers, key=lambda st: st.enabled_at)
    counts: Counter = Counter()
    for l in first.S:
        a_l = first.accepts.get(l)
        if a_l is not None:
            counts.update(a_l)
    core = {k for k, c in counts.items() if c >= t + 1}
    n = len(nodes)
    if 3 * len(core) < n:
        problems.append(f"round {r}: common core of size {len(core)} is below n/3")
    for pid in correct:
        st = nodes[pid].icc.rounds.get(r)
        if st is None or st.decided_by is None:
            continue
        for j, h, s in st.hs:
            if j == st.decided_by and not core <= h:
                problems.append(f"round {r}: process {pid} accepted an H missing common-core members")
            if j == st.decided_by:
                break
    return problems


def collect(config, script, seed, adversary, nodes, net: Network, inputs, done_at) -> RunMetrics:
    """Gather metrics and run every oracle; ``done_at`` is (time, max delay) at completion, or None."""
    finished = done_at is not None
    final_time, delay_then = done_at if finished else (net.now, net.max_delay)
    correct = [pid for pid in nodes if pid not in adversary.corrupt]
    violations = []
    outputs: dict[int, int | None] = {}
    rounds = None
    if config.workload == "aba":
        for pid in correct:
            outputs[pid] = nodes[pid].aba.output
        decided = [nodes[pid].aba.decision_round for pid in correct if nodes[pid].aba.output is not None]
        if decided:
            rounds = max(decided)
        vals = {v for v in outputs.values() if v is not None}
        if len(vals) > 1:
            violations.append("agreement: correct processes decided different values")
        correct_inputs = {inputs[pid - 1] for pid in correct}
        if len(correct_inputs) == 1 and vals and vals != correct_inputs:
            violations.append("validity: unanimous correct input not decided")
    elif config.workload == "coin":
        for pid in correct:
            st = nodes[pid].icc.rounds.get(1)
            outputs[pid] = None if st is None else st.output
        vals = {v for v in outputs.values() if v is not None}
        rounds = 1
    else:
        rounds = config.rounds

    coins: dict[int, tuple[int, ...]] = {}
    coin_rounds = set()
    for pid in correct:
        coin_rounds |= set(nodes[pid].icc.rounds)
    for r in sorted(coin_rounds):
        got = tuple(
            nodes[pid].icc.rounds[r].output if r in nodes[pid].icc.rounds else None for pid in correct
        )
        if any(c is not None for c in got):
            coins[r] = got
        violations.extend(coin_diagnostics(nodes, correct, r, config.t))

    seen: set[IvssId] = set()
    for pid in correct:
        seen.update(iid for iid, inst in nodes[pid].ivss.instances.items() if inst.output is not None)
    e_instances = tuple(sorted(iid for iid in seen if detect_event_E(nodes, correct, iid, config.t)))
    e_rounds = tuple(sorted({iid.round for iid in e_instances}))

    fp_sizes = {pid: len(nodes[pid].ivss.fp) for pid in correct}
    fp_union = set()
    for pid in correct:
        fp_union |= nodes[pid].ivss.fp
    for a, b in fp_union:
        if a in correct and b in correct:
            violations.append(f"faulty-pair set holds two correct processes {a}, {b}")
    if net.max_delay > config.F:
        violations.append("fairness bound exceeded")

    return RunMetrics(
        seed=seed,
        n=config.n,
        t=config.t,
        script=script.name,
        workload=config.workload,
        inputs=tuple(inputs),
        corrupt=tuple(sorted(adversary.corrupt)),
        decided=finished,
        outputs=outputs,
        rounds=rounds,
        duration=final_time / max(delay_then, 1),
        final_time=final_time,
        max_delay=net.max_delay,
        steps=net.steps,
        terminated=finished,
        msgs_total=net.total,
        msgs_acast=net.acast_total,
        msgs_by_kind=dict(sorted(net.by_kind.items())),
        fp_sizes=fp_sizes,
        fp_union=tuple(sorted(fp_union)),
        e_rounds=e_rounds,
        e_instances=e_instances,
        coins=coins,
        violations=violations,
    )
