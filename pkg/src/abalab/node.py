"""One simulated process: the full protocol stack behind a single inbox.

A node owns an IVSS/certification layer, a coin layer and the vote/agreement
layer. The network calls :meth:`Node.receive` once per delivered message;
the node dispatches it, runs every layer to quiescence, and leaves outgoing
traffic in :attr:`Node.outbox` for the network to collect.

Broadcasts run either through the real Bracha state machine
(``transport="bracha"``) or as ideal reliable broadcast (``"ideal"``), where
the network hands each payload to every process individually after an
adversary-chosen delay. Both give the same all-or-nothing, single-value
guarantee; ``"ideal"`` just skips the echo/ready traffic.

Hook methods (``deal``, ``point_value`` ...) carry the correct behaviour;
corrupt nodes in :mod:`abalab.adversary` override them.
"""

from __future__ import annotations

import random
from itertools import combinations

from .aba import AbaLayer
from .acast import AcastEngine, AcastMessage
from .field_poly import SymBivarPoly, UniPoly, sample_symmetric
from .icc import IccLayer
from .ivss import IvssLayer
from .messages import (
    HS,
    Accepts,
    ADeliver,
    Attach,
    CandidateSet,
    Checked,
    CompleteWith,
    CoreInvocations,
    Equal,
    IvssId,
    Point,
    ReadyToComplete,
    ReconRow,
    ReconstructEnabled,
    Row,
    VoteInput,
    VoteRevote,
    VoteVote,
    claims_origin,
    payload_round,
)

TRANSPORTS = ("ideal", "bracha")

SEND, ACAST, BCAST = "send", "acast", "bcast"

# payloads that must be honoured regardless of the participation limit
_UNLIMITED = (CompleteWith, CoreInvocations, Checked)


class Node:
    corrupt = False
    crashed = False

    def __init__(self, pid: int, n: int, t: int, p: int, rng: random.Random, transport: str = "ideal"):
        if transport not in TRANSPORTS:
            raise ValueError(f"unknown transport {transport!r}")
        self.pid = pid
        self.n = n
        self.t = t
        self.p = p
        self.rng = rng
        self.transport = transport
        self.engine = AcastEngine(pid, n, t) if transport == "bracha" else None
        self.outbox: list[tuple] = []
        self.clock = 0  # set by the network before each delivery
        self.max_round: int | None = None
        self.listeners: list = []
        self.ivss = IvssLayer(self)
        self.icc = IccLayer(self)
        self.aba = AbaLayer(self)
        self.aba_started = False
        self._dispatch = {
            Equal: self.ivss.on_equal,
            CandidateSet: self.ivss.on_candidate_set,
            ReconRow: self.ivss.on_recon_row,
            ReadyToComplete: self.ivss.on_ready,
            CoreInvocations: self.ivss.on_core,
            Checked: self.ivss.on_checked,
            Attach: self.icc.on_attach,
            Accepts: self.icc.on_accepts,
            ReconstructEnabled: self.icc.on_enabled,
            HS: self.icc.on_hs,
            VoteInput: self.aba.on_vote_input,
            VoteVote: self.aba.on_vote_vote,
            VoteRevote: self.aba.on_vote_revote,
            CompleteWith: self.aba.on_complete_with,
        }

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.pid})"

    # -- outbound --------------------------------------------------------------

    def send(self, dst: int, msg) -> None:
        self.outbox.append((SEND, dst, msg))

    def acast(self, payload) -> None:
        if self.engine is None:
            self.outbox.append((ACAST, payload))
        else:
            for m in self.engine.send(payload.topic, payload):
                self.outbox.append((BCAST, m))

    def drain(self) -> list[tuple]:
        out, self.outbox = self.outbox, []
        return out

    def active(self, r: int | None) -> bool:
        return r is None or self.max_round is None or r <= self.max_round

    # -- inbound ---------------------------------------------------------------

    def receive(self, src: int, msg) -> None:
        kind = type(msg)
        if kind is ADeliver:
            self.deliver(msg.origin, msg.payload)
        elif kind is AcastMessage:
            if self.engine is None:
                return
            out, value = self.engine.handle(src, msg)
            for m in out:
                self.outbox.append((BCAST, m))
            if value is not None and getattr(value, "topic", None) == msg.topic:
                self.deliver(msg.origin, value)
        elif kind is Row or kind is Point:
            iid = msg.iid
            if isinstance(iid, IvssId) and not self.active(iid.round):
                return
            if kind is Row:
                self.ivss.handle_row(src, msg)
            else:
                self.ivss.handle_point(src, msg)
        self.progress()

    def deliver(self, origin: int, payload) -> None:
        handler = self._dispatch.get(type(payload))
        if handler is None or not claims_origin(payload, origin):
            return
        if not isinstance(payload, _UNLIMITED) and not self.active(payload_round(payload)):
            return
        handler(origin, payload)

    def progress(self) -> None:
        while True:
            self.ivss.progress()
            busy = self.icc.progress()
            busy = self.aba.progress() or busy
            if not busy:
                return

    # -- upward notifications ----------------------------------------------------

    def on_share_complete(self, iid: IvssId) -> None:
        self.icc.on_share_complete(iid)
        for lis in self.listeners:
            lis.on_share_complete(self, iid)

    def on_recon_output(self, iid: IvssId, value: int) -> None:
        self.icc.on_recon_output(iid, value)
        for lis in self.listeners:
            lis.on_recon_output(self, iid, value)

    def on_coin(self, r: int, c: int) -> None:
        if self.aba_started:
            self.aba.on_coin(r, c)
        for lis in self.listeners:
            lis.on_coin(self, r, c)

    def on_decide(self, sigma: int) -> None:
        for lis in self.listeners:
            lis.on_decide(self, sigma)

    # -- entry points ------------------------------------------------------------

    def start_aba(self, x: int) -> None:
        self.aba_started = True
        self.aba.start(x)
        self.progress()

    def start_coin(self, r: int = 1) -> None:
        self.ivss.cert_round_begin(r)
        self.icc.icc_start(r)
        self.progress()

    # -- behaviour hooks (correct defaults) --------------------------------------

    def deal(self, iid: IvssId, secret: int) -> SymBivarPoly:
        return sample_symmetric(secret, self.t, self.rng, self.p)

    def dealt_row(self, iid: IvssId, f: SymBivarPoly, i: int) -> UniPoly:
        return f.row(i)

    def point_value(self, iid: IvssId, i: int, value: int) -> int:
        return value

    def confirms_equal(self, iid: IvssId, i: int, matched: bool) -> bool:
        return matched

    def recon_row(self, iid: IvssId, row: UniPoly) -> UniPoly:
        return row

    def candidate_orders(self, iid: IvssId, pool: list[int], size: int):
        return combinations(sorted(pool), size)

    def vote_bit(self, r: int, x: int) -> int:
        return x
