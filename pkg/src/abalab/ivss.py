"""Inferable verifiable secret sharing with round-history certification.

:class:`IvssLayer` holds everything one process knows about every IVSS
invocation it has seen, plus the certification state that spans rounds:
the faulty-pair set, the process's own ``CoreInvocations`` log, the logs
delivered from peers, and the ``checked`` clearances.

The layer is driven by its owning node. Handlers record deliveries and mark
work as dirty; :meth:`IvssLayer.progress` then runs every pending check to
quiescence. All outbound traffic goes through ``node.send`` (private) and
``node.acast`` (broadcast), and upward notifications through
``node.on_share_complete`` / ``node.on_recon_output``.

Corrupt behaviour is injected through the node's hook methods
(``deal``, ``point_value``, ``recon_row``, ``candidate_orders``), so this
module contains only the correct protocol.
"""

from __future__ import annotations

from itertools import combinations
from typing import TYPE_CHECKING, Iterable

from .acast import ProtocolViolation
from .field_poly import SymBivarPoly, UniPoly, check_interpolation_set
from .messages import (
    CandidateSet,
    Checked,
    CoreInvocations,
    Equal,
    IvssId,
    Pair,
    Point,
    ReadyToComplete,
    ReconRow,
    Row,
)

if TYPE_CHECKING:
    from .node import Node


def pairs_of(members: Iterable[int]) -> tuple[Pair, ...]:
    return tuple(combinations(sorted(members), 2))


class IvssInstanceState:
    """One process's view of one IVSS invocation."""

    __slots__ = (
        "iid", "my_row", "points", "equal_seen", "candidate_set", "sharing_complete",
        "forced", "recon_invoked", "row_sent", "recon_rows", "row_order", "tried",
        "interpolation_result", "ready_from", "output", "audited", "dealt", "m_sent",
        "accepted_by_check",
    )

    def __init__(self, iid: IvssId):
        self.iid = iid
        self.my_row: UniPoly | None = None
        self.points: dict[int, int] = {}
        self.equal_seen: set[tuple[int, int]] = set()
        self.candidate_set: frozenset[int] | None = None
        self.sharing_complete = False
        self.forced = False
        self.recon_invoked = False
        self.row_sent = False
        self.recon_rows: dict[int, UniPoly] = {}
        self.row_order: list[int] = []
        self.tried = 0
        self.interpolation_result: tuple[int, tuple[int, ...]] | None = None
        self.ready_from: set[int] = set()
        self.output: int | None = None
        self.audited = False
        self.dealt: SymBivarPoly | None = None
        self.m_sent = False
        self.accepted_by_check = False

    def missing_rows(self) -> set[int] | None:
        """Candidate-set members whose reconstruction row has not arrived; None if no set yet."""
        if self.candidate_set is None:
            return None
        return {i for i in self.candidate_set if i not in self.recon_rows}


class IvssLayer:
    def __init__(self, node: "Node"):
        self.node = node
        self.pid = node.pid
        self.n = node.n
        self.t = node.t
        self.p = node.p
        self.all_pairs = pairs_of(range(1, self.n + 1))
        self.instances: dict[IvssId, IvssInstanceState] = {}
        self.fp: set[Pair] = set()
        # own CoreInvocations: round -> ids; the open set is core_own[open_round]
        self.core_own: dict[int, set[IvssId]] = {0: set()}
        self.open_round = 0
        self.core_delivered: dict[tuple[int, int], frozenset[IvssId]] = {}
        self.core_prefix = [0] * (self.n + 1)  # rounds 0..prefix-1 delivered per owner
        self.checked_recv: dict[tuple[int, int, int], set[Pair]] = {}
        self.checked_sent: dict[tuple[int, int], set[Pair]] = {}
        self.checked_batches: dict[tuple[int, int], int] = {}
        self.checked_done: set[tuple[int, int]] = set()
        self._cert_ok: set[tuple[int, frozenset[int]]] = set()
        self._waiting: dict[int, set[IvssId]] = {}
        self._dealer_pending: dict[int, set[IvssId]] = {}
        self._share_dirty: set[IvssId] = set()
        self._dealer_dirty: set[IvssId] = set()
        self._round_dirty: set[int] = set()
        self._recon_dirty: set[IvssId] = set()
        self._cert_dirty = False

    # -- bookkeeping -----------------------------------------------------------

    def instance(self, iid: IvssId) -> IvssInstanceState:
        inst = self.instances.get(iid)
        if inst is None:
            inst = self.instances[iid] = IvssInstanceState(iid)
        return inst

    def _valid_coeffs(self, coeffs) -> bool:
        return (
            isinstance(coeffs, tuple)
            and 1 <= len(coeffs) <= self.t + 1
            and all(isinstance(c, int) and 0 <= c < self.p for c in coeffs)
        )

    def _valid_iid(self, iid) -> bool:
        return (
            isinstance(iid, tuple)
            and len(iid) == 3
            and 1 <= iid[0] <= self.n
            and iid[1] >= 1
        )

    # -- sharing ---------------------------------------------------------------

    def share_start(self, iid: IvssId, secret: int) -> None:
        """Deal ``secret``: sample a symmetric polynomial and send each process its row."""
        if iid.dealer != self.pid:
            raise ProtocolViolation(f"process {self.pid} cannot deal {iid}")
        inst = self.instance(iid)
        if inst.dealt is not None:
            raise ProtocolViolation(f"duplicate dealing of {iid}")
        f = self.node.deal(iid, secret)
        inst.dealt = f
        for i in range(1, self.n + 1):
            self.node.send(i, Row(iid, self.node.dealt_row(iid, f, i).coeffs))
        self._dealer_pending.setdefault(iid.round, set()).add(iid)
        self._dealer_dirty.add(iid)

    def handle_row(self, src: int, msg: Row) -> None:
        iid = msg.iid
        if not self._valid_iid(iid) or src != iid.dealer or not self._valid_coeffs(msg.coeffs):
            return
        inst = self.instance(iid)
        if inst.my_row is not None:
            return
        inst.my_row = row = UniPoly(msg.coeffs, self.p)
        for i in range(1, self.n + 1):
            if i != self.pid:
                self.node.send(i, Point(iid, self.node.point_value(iid, i, row(i))))
        for i, value in inst.points.items():
            self._maybe_equal(inst, i, value)

    def handle_point(self, src: int, msg: Point) -> None:
        iid = msg.iid
        if not self._valid_iid(iid) or src == self.pid or not isinstance(msg.value, int):
            return
        inst = self.instance(iid)
        if src in inst.points:
            return
        inst.points[src] = msg.value
        if inst.my_row is not None:
            self._maybe_equal(inst, src, msg.value)

    def _maybe_equal(self, inst: IvssInstanceState, i: int, value: int) -> None:
        if self.node.confirms_equal(inst.iid, i, inst.my_row(i) == value):
            self.node.acast(Equal(inst.iid, self.pid, i))

    def on_equal(self, origin: int, msg: Equal) -> None:
        if not self._valid_iid(msg.iid) or not 1 <= msg.i <= self.n:
            return
        inst = self.instance(msg.iid)
        inst.equal_seen.add((origin, msg.i))
        self._share_dirty.add(msg.iid)
        if inst.dealt is not None:
            self._dealer_dirty.add(msg.iid)

    def on_candidate_set(self, origin: int, msg: CandidateSet) -> None:
        iid = msg.iid
        if not self._valid_iid(iid) or origin != iid.dealer:
            return
        members = msg.members
        if (
            not isinstance(members, frozenset)
            or len(members) != self.n - self.t
            or not all(isinstance(i, int) and 1 <= i <= self.n for i in members)
        ):
            return
        inst = self.instance(iid)
        if inst.candidate_set is not None:
            return
        inst.candidate_set = members
        self._waiting.setdefault(iid.round, set()).add(iid)
        self._share_dirty.add(iid)
        self._recon_dirty.add(iid)
        if inst.audited:
            self._infer_all(inst)
            self._cert_dirty = True

    def _equal_ok(self, inst: IvssInstanceState, members: Iterable[int]) -> bool:
        seen = inst.equal_seen
        ms = tuple(members)
        return all((i, j) in seen for i in ms for j in ms if i != j)

    def cert_ok(self, r: int, members: frozenset[int]) -> bool:
        """Condition (b): every ``p`` in the set checked every pair against every owner ``q``."""
        key = (r, members)
        if key in self._cert_ok:
            return True
        need = pairs_of(members)
        recv = self.checked_recv
        for p in members:
            for q in members:
                got = recv.get((p, q, r))
                if got is None or not got.issuperset(need):
                    return False
        self._cert_ok.add(key)
        return True

    def dealer_try_candidate_set(self, iid: IvssId) -> bool:
        """Broadcast the first qualifying candidate set, if any exists yet."""
        inst = self.instances[iid]
        if inst.m_sent:
            return True
        size = self.n - self.t
        seen = inst.equal_seen
        degree = {i: 0 for i in range(1, self.n + 1)}
        for a, b in seen:
            if a != b and (b, a) in seen:
                degree[a] += 1
        # each ordered pair counted once per endpoint, so mutual neighbours = degree
        pool = [i for i, d in degree.items() if d >= size - 1]
        if len(pool) < size:
            return False
        for combo in self.node.candidate_orders(iid, pool, size):
            members = frozenset(combo)
            if self._equal_ok(inst, combo) and self.cert_ok(iid.round, members):
                inst.m_sent = True
                self._dealer_pending.get(iid.round, set()).discard(iid)
                self.node.acast(CandidateSet(iid, members))
                return True
        return False

    def share_try_complete(self, iid: IvssId) -> bool:
        inst = self.instances[iid]
        if inst.sharing_complete:
            return True
        members = inst.candidate_set
        if members is None:
            return False
        if inst.forced:
            self._complete_sharing(inst, by_check=False)
            return True
        if self._equal_ok(inst, members) and self.cert_ok(iid.round, members):
            self._complete_sharing(inst, by_check=True)
            return True
        return False

    def _complete_sharing(self, inst: IvssInstanceState, by_check: bool) -> None:
        inst.sharing_complete = True
        inst.accepted_by_check = by_check
        self._waiting.get(inst.iid.round, set()).discard(inst.iid)
        if inst.recon_invoked or inst.forced:
            self.recon_start(inst.iid)
        self._recon_dirty.add(inst.iid)
        self.node.on_share_complete(inst.iid)

    # -- reconstruction --------------------------------------------------------

    def recon_invoke(self, iid: IvssId) -> None:
        """Join reconstruction of ``iid`` (steps 1-3)."""
        inst = self.instance(iid)
        if inst.recon_invoked:
            return
        inst.recon_invoked = True
        if inst.sharing_complete:
            self.recon_start(iid)
        self._recon_dirty.add(iid)

    def recon_start(self, iid: IvssId) -> None:
        inst = self.instances[iid]
        if inst.row_sent or inst.candidate_set is None or self.pid not in inst.candidate_set:
            return
        if inst.my_row is None:
            return
        inst.row_sent = True
        row = self.node.recon_row(iid, inst.my_row)
        self.node.acast(ReconRow(iid, row.coeffs))

    def on_recon_row(self, origin: int, msg: ReconRow) -> None:
        iid = msg.iid
        if not self._valid_iid(iid) or not self._valid_coeffs(msg.coeffs):
            return
        inst = self.instance(iid)
        if origin in inst.recon_rows:
            return
        inst.recon_rows[origin] = UniPoly(msg.coeffs, self.p)
        inst.row_order.append(origin)
        if inst.audited and inst.candidate_set is not None and origin in inst.candidate_set:
            self._infer_row(inst, origin)
        self._cert_dirty = True
        if inst.recon_invoked:
            self._recon_dirty.add(iid)

    def recon_try_ready(self, iid: IvssId) -> bool:
        """Search new subsets for an interpolation set; on success A-Cast readiness."""
        inst = self.instances[iid]
        if inst.interpolation_result is not None:
            return True
        members = inst.candidate_set
        if not (inst.recon_invoked and inst.sharing_complete) or members is None:
            return False
        order = [i for i in inst.row_order if i in members]
        size = self.n - 2 * self.t
        rows = inst.recon_rows
        for idx in range(max(inst.tried, size - 1), len(order)):
            newest = order[idx]
            for head in combinations(order[:idx], size - 1):
                subset = head + (newest,)
                g = check_interpolation_set(rows, subset, members, self.t, min_size=size)
                if g is not None:
                    inst.tried = idx + 1
                    inst.interpolation_result = (g.secret, tuple(sorted(subset)))
                    self.node.acast(ReadyToComplete(iid))
                    self.core_own.setdefault(self.open_round, set()).add(iid)
                    return True
        inst.tried = len(order)
        return False

    def on_ready(self, origin: int, msg: ReadyToComplete) -> None:
        if not self._valid_iid(msg.iid):
            return
        inst = self.instance(msg.iid)
        inst.ready_from.add(origin)
        if inst.recon_invoked:
            self._recon_dirty.add(msg.iid)

    def recon_try_complete(self, iid: IvssId) -> int | None:
        inst = self.instances[iid]
        if inst.output is not None:
            return inst.output
        if inst.interpolation_result is None or len(inst.ready_from) < self.n - self.t:
            return None
        inst.output = inst.interpolation_result[0]
        self.node.on_recon_output(iid, inst.output)
        return inst.output

    # -- certification ---------------------------------------------------------

    def cert_round_begin(self, r: int) -> None:
        """Seal and broadcast the previous round's log; open round ``r``'s log."""
        if r != self.open_round + 1:
            raise ProtocolViolation(f"round {r} entered after round {self.open_round}")
        prev = frozenset(self.core_own.get(r - 1, ()))
        self.open_round = r
        self.core_own.setdefault(r, set())
        self.node.acast(CoreInvocations(self.pid, r - 1, prev))

    def on_core(self, origin: int, msg: CoreInvocations) -> None:
        r = msg.round
        key = (origin, r)
        if not isinstance(r, int) or r < 0 or key in self.core_delivered:
            return
        if not isinstance(msg.ids, frozenset):
            return
        ids = frozenset(i for i in msg.ids if self._valid_iid(i) and i[1] <= r)
        self.core_delivered[key] = ids
        while (origin, self.core_prefix[origin]) in self.core_delivered:
            self.core_prefix[origin] += 1
        for iid in ids:
            self.cert_complete_foreign(iid)
        self._cert_dirty = True

    def cert_complete_foreign(self, iid: IvssId) -> None:
        """An owner logged ``iid``: audit its rows and finish sharing plus step 1 locally."""
        inst = self.instance(iid)
        if not inst.audited:
            inst.audited = True
            self._infer_all(inst)
        inst.forced = True
        if inst.sharing_complete:
            self.recon_start(iid)
        else:
            self._share_dirty.add(iid)

    def _add_fp(self, i: int, j: int) -> None:
        pr = (i, j) if i < j else (j, i)
        if pr not in self.fp:
            self.fp.add(pr)
            self._cert_dirty = True

    def _infer_all(self, inst: IvssInstanceState) -> None:
        members = inst.candidate_set
        if members is None:
            return
        rows = [(i, r) for i, r in inst.recon_rows.items() if i in members]
        for (i, ri), (j, rj) in combinations(rows, 2):
            if ri(j) != rj(i):
                self._add_fp(i, j)

    def _infer_row(self, inst: IvssInstanceState, i: int) -> None:
        members = inst.candidate_set
        ri = inst.recon_rows[i]
        for j, rj in inst.recon_rows.items():
            if j != i and j in members and ri(j) != rj(i):
                self._add_fp(i, j)

    def cert_infer_pairs(self) -> set[Pair]:
        """Re-run inference over every audited instance; returns the pairs added."""
        before = set(self.fp)
        for inst in self.instances.values():
            if inst.audited:
                self._infer_all(inst)
        return self.fp - before

    def _blocked(self, owner: int, r: int) -> set[int] | None:
        blocked: set[int] = set()
        for rr in range(r):
            for iid in self.core_delivered[(owner, rr)]:
                inst = self.instances.get(iid)
                missing = inst.missing_rows() if inst is not None else None
                if missing is None:
                    return None
                blocked |= missing
        return blocked

    def cert_try_checked(self) -> list[Checked]:
        """Emit clearance batches for every (owner, round) whose history allows it."""
        emitted = []
        limit = self.node.max_round
        fp = self.fp
        for owner in range(1, self.n + 1):
            top = self.core_prefix[owner]
            if limit is not None:
                top = min(top, limit)
            for r in range(1, top + 1):
                key = (owner, r)
                if key in self.checked_done:
                    continue
                sent = self.checked_sent.setdefault(key, set())
                blocked = self._blocked(owner, r)
                if blocked is None:
                    continue
                fresh = frozenset(
                    pr for pr in self.all_pairs
                    if pr not in sent and pr not in fp and pr[0] not in blocked and pr[1] not in blocked
                )
                if fresh:
                    batch = self.checked_batches.get(key, 0)
                    self.checked_batches[key] = batch + 1
                    sent |= fresh
                    rec = Checked(self.pid, owner, r, batch, fresh)
                    self.node.acast(rec)
                    emitted.append(rec)
                if all(pr in sent or pr in fp for pr in self.all_pairs):
                    self.checked_done.add(key)
        return emitted

    def on_checked(self, origin: int, msg: Checked) -> None:
        if not isinstance(msg.pairs, frozenset) or not isinstance(msg.round, int):
            return
        key = (origin, msg.l, msg.round)
        got = self.checked_recv.get(key)
        if got is None:
            got = self.checked_recv[key] = set()
        got |= {pr for pr in msg.pairs if isinstance(pr, tuple) and len(pr) == 2 and pr[0] < pr[1]}
        self._round_dirty.add(msg.round)

    # -- driver ----------------------------------------------------------------

    def progress(self) -> None:
        """Run every pending check until nothing changes."""
        while True:
            if self._round_dirty:
                for r in self._round_dirty:
                    self._share_dirty |= self._waiting.get(r, set())
                    self._dealer_dirty |= self._dealer_pending.get(r, set())
                self._round_dirty.clear()
            if not (self._share_dirty or self._dealer_dirty or self._recon_dirty or self._cert_dirty):
                return
            if self._dealer_dirty:
                todo, self._dealer_dirty = self._dealer_dirty, set()
                for iid in sorted(todo):
                    if self.instances[iid].dealt is not None and self.node.active(iid.round):
                        self.dealer_try_candidate_set(iid)
            if self._share_dirty:
                todo, self._share_dirty = self._share_dirty, set()
                for iid in sorted(todo):
                    if self.node.active(iid.round):
                        self.share_try_complete(iid)
            if self._recon_dirty:
                todo, self._recon_dirty = self._recon_dirty, set()
                for iid in sorted(todo):
                    inst = self.instances[iid]
                    if inst.recon_invoked and self.recon_try_ready(iid):
                        self.recon_try_complete(iid)
            if self._cert_dirty:
                self._cert_dirty = False
                self.cert_try_checked()
