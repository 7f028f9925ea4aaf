"""Graded voting and the agreement loop built on the common coin.

Vote is binary. Majorities over an even-sized set break ties toward 0.
Grades: 2 (overwhelming), 1 (distinct), 0 (none; value reported as None).

The loop runs Vote then the round's coin, sequentially, per round. After a
process broadcasts ``complete with`` it takes part in exactly one further
round and then joins no new Vote or coin instance; it still answers traffic
for instances it already joined, so its peers can terminate.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from .messages import CompleteWith, VoteInput, VoteRevote, VoteVote

if TYPE_CHECKING:
    from .node import Node


def majority(bits) -> int:
    bits = list(bits)
    ones = sum(bits)
    return 1 if 2 * ones > len(bits) else 0


def _contained(entries, known: dict[int, int], size: int, claimed: int) -> bool | None:
    """Admission test for a vote/revote: True admit, False reject forever, None wait."""
    if len(entries) != size or claimed != majority(b for _, b in entries):
        return False
    for k, b in entries:
        have = known.get(k)
        if have is None:
            return None
        if have != b:
            return False
    return True


class VoteState:
    """One process's view of the Vote instance of one round."""

    def __init__(self, r: int, n: int, t: int):
        self.round = r
        self.n = n
        self.t = t
        self.started = False
        self.x: int | None = None
        self.grow_A: dict[int, int] = {}
        self.A: frozenset[tuple[int, int]] | None = None
        self.a: int | None = None
        self.pending_votes: dict[int, VoteVote] = {}
        self.grow_B: dict[int, int] = {}
        self.B: frozenset[tuple[int, int]] | None = None
        self.b: int | None = None
        self.pending_revotes: dict[int, VoteRevote] = {}
        self.C: dict[int, int] = {}
        self.output: tuple[int | None, int] | None = None

    def admit(self) -> None:
        q = self.n - self.t
        for j, m in list(self.pending_votes.items()):
            verdict = _contained(m.inputs, self.grow_A, q, m.a)
            if verdict is not None:
                if verdict:
                    self.grow_B[j] = m.a
                del self.pending_votes[j]
        for j, m in list(self.pending_revotes.items()):
            verdict = _contained(m.votes, self.grow_B, q, m.b)
            if verdict is not None:
                if verdict:
                    self.C[j] = m.b
                del self.pending_revotes[j]

    def grade(self) -> tuple[int | None, int]:
        avals = {a for _, a in self.B}
        if len(avals) == 1:
            return (avals.pop(), 2)
        bvals = set(self.C.values())
        if len(bvals) == 1:
            return (bvals.pop(), 1)
        return (None, 0)


class AbaLayer:
    def __init__(self, node: "Node"):
        self.node = node
        self.n = node.n
        self.t = node.t
        self.round = 0
        self.v: int | None = None
        self.votes: dict[int, VoteState] = {}
        self.vote_outputs: dict[int, tuple[int | None, int]] = {}
        self.coins: dict[int, int] = {}
        self.completing_round: int | None = None
        self.complete_with: dict[int, tuple[int, int]] = {}
        self.output: int | None = None
        self.decision_round: int | None = None
        self.halted = False
        self._dirty: set[int] = set()

    def vote_state(self, r: int) -> VoteState:
        st = self.votes.get(r)
        if st is None:
            st = self.votes[r] = VoteState(r, self.n, self.t)
        return st

    # -- loop ------------------------------------------------------------------

    def start(self, x: int) -> None:
        self.v = x
        self.begin_round(1)

    def begin_round(self, r: int) -> None:
        self.round = r
        self.node.ivss.cert_round_begin(r)
        self.vote_start(r, self.v)

    def vote_start(self, r: int, x: int) -> None:
        st = self.vote_state(r)
        st.started = True
        st.x = x
        self.node.acast(VoteInput(self.node.pid, r, self.node.vote_bit(r, x)))
        self._dirty.add(r)

    def on_vote_output(self, r: int, value: int | None, grade: int) -> None:
        self.vote_outputs[r] = (value, grade)
        self.node.icc.icc_start(r)

    def on_coin(self, r: int, c: int) -> None:
        """The round's coin landed: apply the case split and move on."""
        if r != self.round or r in self.coins:
            return
        self.coins[r] = c
        y, m = self.vote_outputs[r]
        if m == 2:
            self.v = y
            if self.completing_round is None:
                self.completing_round = r
                self.node.max_round = r + 1
                self.node.acast(CompleteWith(self.node.pid, y, r))
        elif m == 1:
            self.v = y
        else:
            self.v = c
        if self.node.active(r + 1):
            self.begin_round(r + 1)
        else:
            self.halted = True

    def aba_try_decide(self) -> int | None:
        if self.output is not None:
            return self.output
        tally: dict[int, list[int]] = {}
        for sigma, r in self.complete_with.values():
            tally.setdefault(sigma, []).append(r)
        for sigma in (0, 1):
            rounds = tally.get(sigma, [])
            if len(rounds) >= self.t + 1:
                self.output = sigma
                self.decision_round = max(sorted(rounds)[: self.t + 1])
                self.node.on_decide(sigma)
                return sigma
        return None

    # -- deliveries ------------------------------------------------------------

    def on_vote_input(self, origin: int, msg: VoteInput) -> None:
        if msg.x not in (0, 1):
            return
        st = self.vote_state(msg.round)
        st.grow_A.setdefault(origin, msg.x)
        self._dirty.add(msg.round)

    def on_vote_vote(self, origin: int, msg: VoteVote) -> None:
        if not isinstance(msg.inputs, frozenset):
            return
        st = self.vote_state(msg.round)
        st.pending_votes.setdefault(origin, msg)
        self._dirty.add(msg.round)

    def on_vote_revote(self, origin: int, msg: VoteRevote) -> None:
        if not isinstance(msg.votes, frozenset):
            return
        st = self.vote_state(msg.round)
        st.pending_revotes.setdefault(origin, msg)
        self._dirty.add(msg.round)

    def on_complete_with(self, origin: int, msg: CompleteWith) -> None:
        if msg.sigma not in (0, 1) or origin in self.complete_with:
            return
        self.complete_with[origin] = (msg.sigma, msg.round)
        self.aba_try_decide()

    # -- vote steps ------------------------------------------------------------

    def vote_step(self, st: VoteState) -> None:
        q = self.n - self.t
        pid = self.node.pid
        st.admit()
        if not st.started:
            return
        if st.A is None and len(st.grow_A) >= q:
            st.A = frozenset(list(st.grow_A.items())[:q])
            st.a = majority(x for _, x in st.A)
            self.node.acast(VoteVote(pid, st.round, st.A, st.a))
        if st.A is not None and st.B is None and len(st.grow_B) >= q:
            st.B = frozenset(list(st.grow_B.items())[:q])
            st.b = majority(a for _, a in st.B)
            self.node.acast(VoteRevote(pid, st.round, st.B, st.b))
        if st.B is not None and st.output is None and len(st.C) >= q:
            st.output = st.grade()
            self.on_vote_output(st.round, *st.output)

    def progress(self) -> bool:
        if not self._dirty:
            return False
        todo, self._dirty = self._dirty, set()
        for r in sorted(todo):
            if self.node.active(r):
                self.vote_step(self.vote_state(r))
        return True
