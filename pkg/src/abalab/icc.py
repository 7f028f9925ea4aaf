"""Inferable common coin for one agreement round.

Every process deals ``n`` coin secrets, one per target process. Process
``i`` attaches the secrets of the first ``t + 1`` dealers whose whole batch
of sharings it completed, the attach/accept/enable rounds of A-Casts fix a
set of attached values everyone reconstructs, and the coin is 0 exactly when
some value in an agreed set ``H`` reduces to 0 modulo ``u = ceil(0.87 n)``.

Sets follow "grow, then freeze at a size": each growing set is an ordered
dict, and its frozen snapshot is the first ``k`` members in arrival order.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from .field_poly import coin_modulus
from .messages import HS, Accepts, Attach, IvssId, ReconstructEnabled

if TYPE_CHECKING:
    from .node import Node


def associated_value(outputs, modulus: int) -> int:
    """Sum reconstructed values as integers on their canonical representatives, then reduce."""
    return sum(outputs) % modulus


def coin_secret_bound(p: int, u: int) -> int:
    """Coin secrets are drawn from ``[0, u * floor(p / u))`` so they are exactly uniform mod u."""
    return u * (p // u)


class IccState:
    """Per-round coin state of one process."""

    def __init__(self, r: int):
        self.round = r
        self.started = False
        self.complete_batches: dict[int, int] = {}  # dealer -> completed sharings
        self.grow_T: dict[int, None] = {}
        self.T: frozenset[int] | None = None
        self.attaches: dict[int, frozenset[int]] = {}
        self.grow_A: dict[int, None] = {}
        self.A: frozenset[int] | None = None
        self.accepts: dict[int, frozenset[int]] = {}
        self.grow_S: dict[int, None] = {}
        self.S: frozenset[int] | None = None
        self.H: frozenset[int] | None = None
        self.enabled_at: int | None = None
        self.recon_targets: set[int] = set()
        self.outputs: dict[IvssId, int] = {}
        self.values: dict[int, int] = {}
        self.hs: list[tuple[int, frozenset[int], frozenset[int]]] = []
        self.output: int | None = None
        self.decided_by: int | None = None


class IccLayer:
    def __init__(self, node: "Node"):
        self.node = node
        self.n = node.n
        self.t = node.t
        self.u = coin_modulus(node.n)
        self.bound = coin_secret_bound(node.p, self.u)
        self.rounds: dict[int, IccState] = {}
        self._dirty: set[int] = set()

    def state(self, r: int) -> IccState:
        st = self.rounds.get(r)
        if st is None:
            st = self.rounds[r] = IccState(r)
        return st

    def icc_start(self, r: int) -> None:
        """Deal the ``n`` coin secrets of round ``r`` and start tracking."""
        st = self.state(r)
        if st.started:
            return
        st.started = True
        rng = self.node.rng
        for j in range(1, self.n + 1):
            self.node.ivss.share_start(IvssId(self.node.pid, r, j), rng.randrange(self.bound))
        self._dirty.add(r)

    # -- deliveries ------------------------------------------------------------

    def on_share_complete(self, iid: IvssId) -> None:
        st = self.state(iid.round)
        if not 1 <= iid.counter <= self.n:
            return
        c = st.complete_batches.get(iid.dealer, 0) + 1
        st.complete_batches[iid.dealer] = c
        if c == self.n:
            st.grow_T[iid.dealer] = None
            self._dirty.add(iid.round)

    def on_attach(self, origin: int, msg: Attach) -> None:
        st = self.state(msg.round)
        d = msg.dealers
        if origin in st.attaches or not isinstance(d, frozenset) or len(d) != self.t + 1:
            return
        if not all(isinstance(k, int) and 1 <= k <= self.n for k in d):
            return
        st.attaches[origin] = d
        self._dirty.add(msg.round)

    def on_accepts(self, origin: int, msg: Accepts) -> None:
        st = self.state(msg.round)
        a = msg.accepted
        if origin in st.accepts or not isinstance(a, frozenset) or len(a) != self.n - self.t:
            return
        st.accepts[origin] = a
        self._dirty.add(msg.round)

    def on_enabled(self, origin: int, msg: ReconstructEnabled) -> None:
        pass

    def on_hs(self, origin: int, msg: HS) -> None:
        if not isinstance(msg.h, frozenset) or not isinstance(msg.s, frozenset):
            return
        st = self.state(msg.round)
        st.hs.append((origin, msg.h, msg.s))
        self._dirty.add(msg.round)

    def on_recon_output(self, iid: IvssId, value: int) -> None:
        st = self.rounds.get(iid.round)
        if st is None:
            return
        st.outputs[iid] = value
        self._dirty.add(iid.round)

    # -- steps -----------------------------------------------------------------

    def icc_track_attach(self, st: IccState) -> bool:
        if st.T is None and st.started and len(st.grow_T) >= self.t + 1:
            st.T = frozenset(list(st.grow_T)[: self.t + 1])
            self.node.acast(Attach(self.node.pid, st.round, st.T))
        return st.T is not None

    def icc_track_accept(self, st: IccState) -> bool:
        grow = st.grow_A
        for j, tj in st.attaches.items():
            if j not in grow and tj.issubset(st.grow_T):
                grow[j] = None
        if st.A is None and st.started and len(grow) >= self.n - self.t:
            st.A = frozenset(list(grow)[: self.n - self.t])
            self.node.acast(Accepts(self.node.pid, st.round, st.A))
        return st.A is not None

    def icc_track_enable(self, st: IccState) -> bool:
        grow = st.grow_S
        for j, aj in st.accepts.items():
            if j not in grow and aj.issubset(st.grow_A):
                grow[j] = None
        if st.S is None and st.A is not None and len(grow) >= self.n - self.t:
            st.S = frozenset(grow)
            st.H = frozenset(st.grow_A)
            st.enabled_at = self.node.clock
            self.node.acast(ReconstructEnabled(self.node.pid, st.round))
            self.node.acast(HS(self.node.pid, st.round, st.H, st.S))
        return st.S is not None

    def icc_reconstruct(self, st: IccState) -> None:
        """Join reconstruction for every accepted process and fold finished ones into values."""
        ivss = self.node.ivss
        r = st.round
        for j in st.grow_A:
            if j not in st.recon_targets:
                st.recon_targets.add(j)
                for k in sorted(st.attaches[j]):
                    ivss.recon_invoke(IvssId(k, r, j))
        for j in st.recon_targets:
            if j in st.values:
                continue
            ys = [st.outputs.get(IvssId(k, r, j)) for k in st.attaches[j]]
            if all(y is not None for y in ys):
                st.values[j] = associated_value(ys, self.u)

    def icc_try_output(self, st: IccState) -> int | None:
        if st.output is not None:
            return st.output
        for j, h, s in st.hs:
            if h.issubset(st.grow_A) and s.issubset(st.grow_S) and all(k in st.values for k in h):
                st.output = 0 if any(st.values[k] == 0 for k in h) else 1
                st.decided_by = j
                self.node.on_coin(st.round, st.output)
                return st.output
        return None

    def progress(self) -> bool:
        """Advance every dirty round; returns True when some new work was triggered."""
        if not self._dirty:
            return False
        todo, self._dirty = self._dirty, set()
        for r in sorted(todo):
            if not self.node.active(r):
                continue
            st = self.state(r)
            self.icc_track_attach(st)
            self.icc_track_accept(st)
            if self.icc_track_enable(st):
                self.icc_reconstruct(st)
                self.icc_try_output(st)
        return True
