"""Bracha reliable broadcast (A-Cast) as an explicit state machine.

An instance is named by ``(origin, topic)``. Every process runs one
:class:`AcastInstance` per name it hears about; the origin runs the same
machine and also echoes and readies its own value. Handlers never perform
I/O: they return the phases to broadcast to all ``n`` processes, plus the
delivered value when delivery happens.

Thresholds for ``n > 3t``:

* echo after the origin's ``msg``;
* ready after ``n - t`` matching echoes or ``t + 1`` matching readies;
* deliver after ``2t + 1`` matching readies.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Hashable

MSG, ECHO, READY = "msg", "echo", "ready"
PHASES = (MSG, ECHO, READY)

AWAITING, ECHOED, READIED, DELIVERED = "awaiting-msg", "echoed", "readied", "delivered"


class ProtocolViolation(RuntimeError):
    """A correct process was asked to do something the protocol forbids."""


@dataclass(frozen=True, slots=True)
class AcastMessage:
    """Wire record of the broadcast layer; ``value`` is opaque here."""

    origin: int
    topic: Hashable
    phase: str
    value: Hashable


class AcastInstance:
    __slots__ = (
        "origin", "topic", "n", "t", "started", "echoed", "sent_ready",
        "echo_from", "ready_from", "echo_counts", "ready_counts", "output",
    )

    def __init__(self, origin: int, topic: Hashable, n: int, t: int):
        self.origin = origin
        self.topic = topic
        self.n = n
        self.t = t
        self.started = False
        self.echoed = False
        self.sent_ready = False
        self.echo_from: set[int] = set()
        self.ready_from: set[int] = set()
        self.echo_counts: Counter = Counter()
        self.ready_counts: Counter = Counter()
        self.output = None

    @property
    def phase(self) -> str:
        if self.output is not None:
            return DELIVERED
        if self.sent_ready:
            return READIED
        if self.echoed:
            return ECHOED
        return AWAITING

    def _wire(self, phase: str, value) -> AcastMessage:
        return AcastMessage(self.origin, self.topic, phase, value)

    def start(self, value) -> list[AcastMessage]:
        """Origin side: emit ``msg`` to everyone (the caller fans out to all n)."""
        if self.started:
            raise ProtocolViolation(f"A-Cast {self.origin}/{self.topic!r} started twice")
        if value is None:
            raise ValueError("None cannot be broadcast")
        self.started = True
        return [self._wire(MSG, value)]

    def handle(self, sender: int, phase: str, value) -> tuple[list[AcastMessage], object]:
        """Process one incoming phase message.

        Returns ``(broadcasts, delivered)`` where ``delivered`` is the value
        delivered by this very step, or None.
        """
        out: list[AcastMessage] = []
        if value is None:
            return out, None
        if phase == MSG:
            if sender != self.origin or self.echoed:
                return out, None
            self.echoed = True
            out.append(self._wire(ECHO, value))
        elif phase == ECHO:
            if sender in self.echo_from:
                return out, None
            self.echo_from.add(sender)
            self.echo_counts[value] += 1
            if not self.sent_ready and self.echo_counts[value] >= self.n - self.t:
                self.sent_ready = True
                out.append(self._wire(READY, value))
        elif phase == READY:
            if sender in self.ready_from:
                return out, None
            self.ready_from.add(sender)
            self.ready_counts[value] += 1
            c = self.ready_counts[value]
            if not self.sent_ready and c >= self.t + 1:
                self.sent_ready = True
                out.append(self._wire(READY, value))
            if self.output is None and c >= 2 * self.t + 1:
                self.output = value
                return out, value
        return out, None

    def snapshot(self) -> tuple:
        """Hashable summary of the state, used for schedule exploration."""
        return (
            self.started, self.echoed, self.sent_ready,
            frozenset(self.echo_from), frozenset(self.ready_from),
            frozenset(self.echo_counts.items()), frozenset(self.ready_counts.items()),
            self.output,
        )

    def copy(self) -> "AcastInstance":
        c = AcastInstance(self.origin, self.topic, self.n, self.t)
        c.started, c.echoed, c.sent_ready, c.output = self.started, self.echoed, self.sent_ready, self.output
        c.echo_from = set(self.echo_from)
        c.ready_from = set(self.ready_from)
        c.echo_counts = Counter(self.echo_counts)
        c.ready_counts = Counter(self.ready_counts)
        return c


class AcastEngine:
    """All broadcast instances seen by one process."""

    def __init__(self, pid: int, n: int, t: int):
        self.pid = pid
        self.n = n
        self.t = t
        self.instances: dict[tuple[int, Hashable], AcastInstance] = {}

    def instance(self, origin: int, topic: Hashable) -> AcastInstance:
        key = (origin, topic)
        inst = self.instances.get(key)
        if inst is None:
            inst = self.instances[key] = AcastInstance(origin, topic, self.n, self.t)
        return inst

    def send(self, topic: Hashable, value) -> list[AcastMessage]:
        return self.instance(self.pid, topic).start(value)

    def handle(self, sender: int, msg: AcastMessage) -> tuple[list[AcastMessage], object]:
        return self.instance(msg.origin, msg.topic).handle(sender, msg.phase, msg.value)

