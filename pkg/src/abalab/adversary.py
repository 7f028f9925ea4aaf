"""Built-in static adversaries.

An adversary script is a declarative record: a behaviour name, an optional
corrupt set and a few numeric parameters. It is turned into two things at
run time:

* corrupt :class:`~abalab.node.Node` subclasses, which may read and bend their
  own state freely (the adversary controls them completely);
* a delay policy, which only ever sees an :class:`Envelope`. Envelopes carry
  routing metadata and no payload, so scheduling decisions cannot depend on
  what correct processes say to each other.

Corrupt processes of one run share a single :class:`Brain`, standing in for
the coordinating adversary.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Hashable, Mapping

from .field_poly import SymBivarPoly, UniPoly, poly_mul_linear, sample_symmetric
from .messages import IvssId
from .node import Node

SCRIPTS = ("none", "silent", "delay", "reorder", "wrong_point", "equivocating_dealer")

# scripts that corrupt processes (the rest only steer the network)
_CORRUPTING = {"silent", "wrong_point", "equivocating_dealer"}

_PARAMS = {"name", "corrupt", "target", "jitter", "favored", "slow", "candidate"}

DEFAULT_JITTER = 16


class ScriptError(ValueError):
    """A scenario named an unknown behaviour or parameter."""


@dataclass(frozen=True, slots=True)
class Envelope:
    """What the scheduler may see of a message in flight."""

    src: int
    dst: int
    kind: str
    origin: int | None
    topic: Hashable


def envelope_iid(env: Envelope) -> IvssId | None:
    topic = env.topic
    if isinstance(topic, tuple) and len(topic) >= 2 and isinstance(topic[1], IvssId):
        return topic[1]
    return None


@dataclass(frozen=True)
class AdversaryScript:
    name: str = "none"
    corrupt: tuple[int, ...] | None = None
    target: int = 1
    jitter: int = DEFAULT_JITTER
    favored: tuple[int, ...] | None = None
    slow: int | None = None
    candidate: tuple[int, ...] | None = None  # candidate set a corrupt dealer insists on

    def __post_init__(self):
        if self.name not in SCRIPTS:
            raise ScriptError(f"unknown adversary script {self.name!r}; choose from {', '.join(SCRIPTS)}")
        if self.jitter < 1:
            raise ScriptError("jitter must be at least 1")

    @classmethod
    def from_record(cls, record: Mapping | str) -> "AdversaryScript":
        """Build from a scenario table (or a bare script name); unknown keys are rejected."""
        if isinstance(record, str):
            return cls(name=record.replace("-", "_"))
        extra = set(record) - _PARAMS
        if extra:
            raise ScriptError(f"unsupported adversary parameters: {', '.join(sorted(extra))}")
        kw = dict(record)
        kw["name"] = str(kw.get("name", "none")).replace("-", "_")
        for key in ("corrupt", "favored", "candidate"):
            if kw.get(key) is not None:
                kw[key] = tuple(int(i) for i in kw[key])
        return cls(**kw)

    def corrupt_set(self, n: int, t: int) -> frozenset[int]:
        if self.name not in _CORRUPTING:
            if self.corrupt:
                raise ScriptError(f"script {self.name!r} does not corrupt processes")
            return frozenset()
        ids = self.corrupt if self.corrupt is not None else tuple(range(n - t + 1, n + 1))
        if len(set(ids)) > t or not all(1 <= i <= n for i in ids):
            raise ScriptError(f"corrupt set {ids} invalid for n={n}, t={t}")
        return frozenset(ids)

    def build(self, n: int, t: int, fairness: int) -> "Adversary":
        return Adversary(self, n, t, fairness)


@dataclass
class Brain:
    """State shared by all corrupt processes of one run."""

    corrupt: frozenset[int]
    favored: frozenset[int]
    candidate: frozenset[int] | None = None
    attacks: dict[IvssId, tuple[SymBivarPoly, SymBivarPoly]] = field(default_factory=dict)


class Adversary:
    def __init__(self, script: AdversaryScript, n: int, t: int, fairness: int):
        self.script = script
        self.n = n
        self.t = t
        self.fairness = fairness
        self.corrupt = script.corrupt_set(n, t)
        correct = [i for i in range(1, n + 1) if i not in self.corrupt]
        favored = script.favored if script.favored is not None else tuple(correct[:t])
        cand = frozenset(script.candidate) if script.candidate is not None else None
        self.brain = Brain(self.corrupt, frozenset(favored), cand)
        self.slow = script.slow if script.slow is not None else max(2, fairness // 2)

    def node_class(self, pid: int) -> type[Node]:
        if pid not in self.corrupt:
            return Node
        return {
            "silent": SilentNode,
            "wrong_point": WrongPointNode,
            "equivocating_dealer": EquivocatingNode,
        }[self.script.name]

    def make_node(self, pid: int, p: int, rng: random.Random, transport: str) -> Node:
        node = self.node_class(pid)(pid, self.n, self.t, p, rng, transport)
        if node.corrupt:
            node.brain = self.brain
        return node

    def delay(self, env: Envelope, rng: random.Random) -> int:
        """Ticks until delivery, always within ``[1, fairness]``."""
        name = self.script.name
        F = self.fairness
        if name == "reorder":
            return rng.randint(1, F)
        if name == "delay" and (env.src == self.script.target or env.origin == self.script.target):
            return max(1, F - 1)
        if name == "equivocating_dealer":
            iid = envelope_iid(env)
            if iid is not None and iid.dealer in self.corrupt:
                if env.topic[0] == "rrow":
                    fast = env.origin in self.corrupt or env.origin in self.brain.favored
                    return 1 if fast else min(F, self.slow)
                return 1
        return rng.randint(1, min(F, self.script.jitter))


class CorruptNode(Node):
    corrupt = True
    brain: Brain

    def vote_bit(self, r: int, x: int) -> int:
        return 1 - x


class SilentNode(CorruptNode):
    """Crashed from the start: never sends anything."""

    crashed = True

    def receive(self, src, msg) -> None:
        pass

    def start_aba(self, x: int) -> None:
        pass

    def start_coin(self, r: int = 1) -> None:
        pass

    def send(self, dst, msg) -> None:
        pass

    def acast(self, payload) -> None:
        pass


class WrongPointNode(CorruptNode):
    """Lies about points, vouches for everyone, and reconstructs with garbage rows."""

    def point_value(self, iid, i, value):
        return (value + 1) % self.p

    def confirms_equal(self, iid, i, matched):
        return True

    def recon_row(self, iid, row):
        return UniPoly(tuple(self.rng.randrange(self.p) for _ in range(self.t + 1)), self.p)


class EquivocatingNode(CorruptNode):
    """Deals consistent rows of ``f`` but reconstructs with rows of a second polynomial.

    ``g = f + c * prod_{a in favored} (x - a)(y - a)`` agrees with ``f`` exactly on
    the favored processes' rows, so the corrupt rows together with the favored
    correct rows fit ``g``; once they are delivered first, a correct process
    can pick them as its interpolation set and output ``g(0, 0)``.
    """

    def deal(self, iid, secret):
        f = sample_symmetric(secret, self.t, self.rng, self.p)
        self.brain.attacks[iid] = (f, skewed(f, self.brain.favored, self.rng.randrange(1, self.p)))
        return f

    def recon_row(self, iid, row):
        attack = self.brain.attacks.get(iid)
        if attack is None:
            return row
        return attack[1].row(self.pid)

    def candidate_orders(self, iid, pool, size):
        # hold out for a set containing every anchor while one could still be accepted
        want = self.brain.candidate or (self.brain.corrupt | self.brain.favored)
        fp = self.ivss.fp
        if len(want) <= size and not any(pr in fp for pr in combinations(sorted(want), 2)):
            return [c for c in combinations(sorted(pool), size) if want.issubset(c)]
        return combinations(sorted(pool), size)


def skewed(f: SymBivarPoly, anchors, c: int) -> SymBivarPoly:
    """``f + c * prod_a (x - a)(y - a)``; keeps rows at ``anchors`` and the degree when ``|anchors| <= t``."""
    p = f.p
    if len(anchors) > f.t:
        raise ValueError("at most t anchors keep the degree at t")
    h = [1]
    for a in sorted(anchors):
        h = poly_mul_linear(h, a, p)
    rows = [list(r) for r in f.coeffs]
    for a_idx, ha in enumerate(h):
        for b_idx, hb in enumerate(h):
            rows[a_idx][b_idx] = (rows[a_idx][b_idx] + c * ha * hb) % p
    return SymBivarPoly(tuple(tuple(r) for r in rows), p)
