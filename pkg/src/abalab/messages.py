"""Wire records exchanged between simulated processes.

Two families travel on the network:

* private point-to-point records (:class:`Row`, :class:`Point`);
* A-Cast payloads, each carrying a ``topic``. A process A-Casts at most one
  payload per topic, and the pair ``(origin, topic)`` names the broadcast
  instance. Payloads are immutable and hashable so the broadcast layer can
  count matching echoes and readies by value.

Fields that name the originating process (``k`` in :class:`Equal`, ``owner`` in
:class:`CoreInvocations` and so on) must match the A-Cast origin; receivers
drop payloads where they differ.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, NamedTuple


class IvssId(NamedTuple):
    """Identity of one IVSS invocation: dealer, round, per-round counter."""

    dealer: int
    round: int
    counter: int


Pair = tuple  # (i, j) with i < j


def pair(i: int, j: int) -> Pair:
    return (i, j) if i < j else (j, i)


# -- private records ---------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Row:
    iid: IvssId
    coeffs: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class Point:
    iid: IvssId
    value: int


# -- A-Cast payloads: IVSS and certification ---------------------------------


@dataclass(frozen=True, slots=True)
class Equal:
    iid: IvssId
    k: int
    i: int

    @property
    def topic(self) -> Hashable:
        return ("equal", self.iid, self.i)


@dataclass(frozen=True, slots=True)
class CandidateSet:
    iid: IvssId
    members: frozenset[int]

    @property
    def topic(self) -> Hashable:
        return ("cand", self.iid)


@dataclass(frozen=True, slots=True)
class ReconRow:
    iid: IvssId
    coeffs: tuple[int, ...]

    @property
    def topic(self) -> Hashable:
        return ("rrow", self.iid)


@dataclass(frozen=True, slots=True)
class ReadyToComplete:
    iid: IvssId

    @property
    def topic(self) -> Hashable:
        return ("ready", self.iid)


@dataclass(frozen=True, slots=True)
class CoreInvocations:
    owner: int
    round: int
    ids: frozenset[IvssId]

    @property
    def topic(self) -> Hashable:
        return ("core", self.round)


@dataclass(frozen=True, slots=True)
class Checked:
    """Batched clearance: checker ``k`` vouches for ``pairs`` against owner ``l``'s history."""

    k: int
    l: int
    round: int
    batch: int
    pairs: frozenset[Pair]

    @property
    def topic(self) -> Hashable:
        return ("checked", self.l, self.round, self.batch)


# -- A-Cast payloads: common coin --------------------------------------------


@dataclass(frozen=True, slots=True)
class Attach:
    i: int
    round: int
    dealers: frozenset[int]

    @property
    def topic(self) -> Hashable:
        return ("attach", self.round)


@dataclass(frozen=True, slots=True)
class Accepts:
    i: int
    round: int
    accepted: frozenset[int]

    @property
    def topic(self) -> Hashable:
        return ("accepts", self.round)


@dataclass(frozen=True, slots=True)
class ReconstructEnabled:
    i: int
    round: int

    @property
    def topic(self) -> Hashable:
        return ("enabled", self.round)


@dataclass(frozen=True, slots=True)
class HS:
    i: int
    round: int
    h: frozenset[int]
    s: frozenset[int]

    @property
    def topic(self) -> Hashable:
        return ("hs", self.round)


# -- A-Cast payloads: vote and agreement -------------------------------------


@dataclass(frozen=True, slots=True)
class VoteInput:
    j: int
    round: int
    x: int

    @property
    def topic(self) -> Hashable:
        return ("vinput", self.round)


@dataclass(frozen=True, slots=True)
class VoteVote:
    """``inputs`` holds the voter's frozen ``(id, bit)`` entries."""

    j: int
    round: int
    inputs: frozenset[tuple[int, int]]
    a: int

    @property
    def topic(self) -> Hashable:
        return ("vote", self.round)


@dataclass(frozen=True, slots=True)
class VoteRevote:
    """``votes`` holds ``(id, a_id)`` entries; each id's vote is unique by A-Cast."""

    j: int
    round: int
    votes: frozenset[tuple[int, int]]
    b: int

    @property
    def topic(self) -> Hashable:
        return ("revote", self.round)


@dataclass(frozen=True, slots=True)
class CompleteWith:
    j: int
    sigma: int
    round: int

    @property
    def topic(self) -> Hashable:
        return ("complete",)


ORIGIN_FIELD = {
    Equal: "k",
    CoreInvocations: "owner",
    Checked: "k",
    Attach: "i",
    Accepts: "i",
    ReconstructEnabled: "i",
    HS: "i",
    VoteInput: "j",
    VoteVote: "j",
    VoteRevote: "j",
    CompleteWith: "j",
}


def claims_origin(payload, origin: int) -> bool:
    """True when the payload's self-identifying field (if any) names ``origin``."""
    name = ORIGIN_FIELD.get(type(payload))
    return name is None or getattr(payload, name) == origin


def payload_round(payload) -> int | None:
    """Protocol round a payload belongs to, used for participation limits."""
    iid = getattr(payload, "iid", None)
    if iid is not None:
        return iid.round
    return getattr(payload, "round", None)


# -- transport wrappers --------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ADeliver:
    """Ideal-broadcast delivery of ``payload`` A-Cast by ``origin``."""

    origin: int
    payload: object
