"""Tests for IVSS sharing, reconstruction and round-history certification."""

import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from abalab.acast import ProtocolViolation
from abalab.field_poly import UniPoly, sample_symmetric
from abalab.ivss import pairs_of
from abalab.messages import (
    CandidateSet,
    Checked,
    CoreInvocations,
    Equal,
    IvssId,
    Point,
    ReadyToComplete,
    ReconRow,
    Row,
)
from abalab.node import ACAST, SEND, Node

from conftest import Cluster, Recorder

IID = IvssId(1, 1, 1)


def lone_node(pid=1, n=4, t=1, p=97, seed=0):
    node = Node(pid, n, t, p, random.Random(seed))
    node.ivss.cert_round_begin(1)
    node.drain()
    return node


def acasts(node, kind):
    return [e[1] for e in node.drain() if e[0] == ACAST and isinstance(e[1], kind)]


def clear_all(node, r=1, skip=()):
    """Deliver round-r clearances from every checker for every owner."""
    pairs = frozenset(pr for pr in pairs_of(range(1, node.n + 1)) if pr not in skip)
    for k in range(1, node.n + 1):
        for owner in range(1, node.n + 1):
            node.deliver(k, Checked(k, owner, r, 0, pairs))


def honest_cluster(n, t, seed, dealers=(1,)):
    cl = Cluster(n, t, seed)
    rec = Recorder()
    secrets = {}
    for node in cl.nodes.values():
        node.listeners.append(rec)
        node.ivss.cert_round_begin(1)
    for d in dealers:
        iid = IvssId(d, 1, 1)
        secrets[iid] = cl.nodes[d].rng.randrange(cl.nodes[d].p)
        cl.nodes[d].ivss.share_start(iid, secrets[iid])
    for node in cl.nodes.values():
        node.progress()
    return cl, rec, secrets


class TestShareStart:
    def test_one_row_per_process(self):
        node = lone_node()
        node.ivss.share_start(IID, 5)
        rows = [e for e in node.drain() if e[0] == SEND and isinstance(e[2], Row)]
        assert sorted(e[1] for e in rows) == [1, 2, 3, 4]
        polys = {e[1]: UniPoly(e[2].coeffs, 97) for e in rows}
        for i in polys:
            for j in polys:
                assert polys[i](j) == polys[j](i)

    def test_duplicate_id(self):
        node = lone_node()
        node.ivss.share_start(IID, 5)
        with pytest.raises(ProtocolViolation):
            node.ivss.share_start(IID, 6)

    def test_only_the_dealer_deals(self):
        node = lone_node(pid=2)
        with pytest.raises(ProtocolViolation):
            node.ivss.share_start(IID, 5)

    def test_secrecy_of_one_view(self):
        """With t=1 the row seen by one process has the same law for two secrets."""
        p = 11
        views = {}
        for s in (0, 7):
            rng = random.Random(f"view:{s}")
            views[s] = Counter(sample_symmetric(s, 1, rng, p).row(2).coeffs for _ in range(12_000))
        cells = sorted(set(views[0]) | set(views[7]))
        assert len(cells) == p * p
        table = [[views[s].get(c, 0) for c in cells] for s in (0, 7)]
        assert chi2_contingency(table).pvalue > 1e-3

    def test_secrecy_via_dealer(self):
        """The view of process 2 through a real dealer carries no trace of the secret (t=1, p=11)."""
        p = 11
        views = {}
        for s in (0, 7):
            counts = Counter()
            for seed in range(4_000):
                node = Node(1, 4, 1, p, random.Random(f"{s}:{seed}"))
                node.ivss.cert_round_begin(1)
                node.ivss.share_start(IID, s)
                sent = {e[1]: e[2] for e in node.drain() if e[0] == SEND}
                counts[sent[2].coeffs] += 1
            views[s] = counts
        cells = sorted(set(views[0]) | set(views[7]))
        table = [[views[s].get(c, 0) for c in cells] for s in (0, 7)]
        assert chi2_contingency(table).pvalue > 1e-3


class TestPointExchange:
    def setup_method(self):
        self.f = sample_symmetric(3, 1, random.Random(1), 97)
        self.node = lone_node(pid=2)
        self.node.receive(1, Row(IID, self.f.row(2).coeffs))

    def test_points_sent_to_peers(self):
        points = {e[1]: e[2].value for e in self.node.drain() if e[0] == SEND and isinstance(e[2], Point)}
        assert points == {i: self.f(2, i) for i in (1, 3, 4)}

    def test_matching_point_confirms(self):
        self.node.drain()
        self.node.receive(3, Point(IID, self.f(3, 2)))
        eq = acasts(self.node, Equal)
        assert [(e.k, e.i) for e in eq] == [(2, 3)]

    def test_wrong_point_not_confirmed(self):
        self.node.drain()
        self.node.receive(3, Point(IID, (self.f(3, 2) + 1) % 97))
        assert acasts(self.node, Equal) == []

    def test_point_before_row(self):
        node = lone_node(pid=2)
        node.receive(4, Point(IID, self.f(4, 2)))
        assert acasts(node, Equal) == []
        node.receive(1, Row(IID, self.f.row(2).coeffs))
        assert [(e.k, e.i) for e in acasts(node, Equal)] == [(2, 4)]

    def test_inconsistent_rows_not_confirmed(self):
        g = sample_symmetric(3, 1, random.Random(2), 97)
        # process 3 got a row of g; its point disagrees with row 2 of f
        assert g(3, 2) != self.f(3, 2)
        self.node.drain()
        self.node.receive(3, Point(IID, g(3, 2)))
        assert acasts(self.node, Equal) == []


class TestCandidateSet:
    def dealer(self):
        node = lone_node()
        node.ivss.share_start(IID, 5)
        node.drain()
        return node

    def all_equal(self, node, members):
        for a in members:
            for b in members:
                if a != b:
                    node.deliver(a, Equal(IID, a, b))

    def test_first_lexicographic_set(self):
        node = self.dealer()
        self.all_equal(node, range(1, 5))
        clear_all(node)
        node.progress()
        (m,) = acasts(node, CandidateSet)
        assert m.members == frozenset({1, 2, 3})

    def test_too_few_equal(self):
        node = self.dealer()
        self.all_equal(node, (1, 2))
        node.deliver(3, Equal(IID, 3, 1))
        clear_all(node)
        node.progress()
        assert acasts(node, CandidateSet) == []

    def test_uncleared_pair_excluded(self):
        node = self.dealer()
        self.all_equal(node, range(1, 5))
        clear_all(node, skip={(1, 2)})
        node.progress()
        (m,) = acasts(node, CandidateSet)
        assert not {1, 2} <= m.members
        assert m.members == frozenset({1, 3, 4})

    def test_waits_for_clearances(self):
        node = self.dealer()
        self.all_equal(node, range(1, 5))
        node.progress()
        assert acasts(node, CandidateSet) == []
        clear_all(node)
        node.progress()
        assert len(acasts(node, CandidateSet)) == 1

    def test_non_dealer_completes_on_same_conditions(self):
        node = lone_node(pid=3)
        node.deliver(1, CandidateSet(IID, frozenset({1, 2, 3})))
        node.progress()
        assert not node.ivss.instances[IID].sharing_complete
        self.all_equal(node, (1, 2, 3))
        node.progress()
        assert not node.ivss.instances[IID].sharing_complete
        clear_all(node)
        node.progress()
        assert node.ivss.instances[IID].sharing_complete

    def test_candidate_set_only_from_dealer(self):
        node = lone_node(pid=3)
        node.deliver(2, CandidateSet(IID, frozenset({1, 2, 3})))
        assert node.ivss.instances.get(IID) is None or node.ivss.instances[IID].candidate_set is None


class TestHonestRuns:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([(4, 1), (5, 1), (7, 2)]))
    def test_single_dealer(self, seed, nt):
        n, t = nt
        cl, rec, secrets = honest_cluster(n, t, seed)
        cl.run()
        (iid, s), = secrets.items()
        for pid, node in cl.nodes.items():
            inst = node.ivss.instances[iid]
            assert inst.sharing_complete
            assert inst.output == s
            assert node.ivss.fp == set()
            # every ordered equal pair was delivered
            assert {(a, b) for a, b in inst.equal_seen if a != b} == {
                (a, b) for a in range(1, n + 1) for b in range(1, n + 1) if a != b
            }
            result = inst.interpolation_result
            assert set(result[1]) <= inst.candidate_set and len(result[1]) == n - 2 * t

    def test_every_dealer(self):
        cl, rec, secrets = honest_cluster(4, 1, seed=3, dealers=(1, 2, 3, 4))
        cl.run()
        for iid, s in secrets.items():
            assert {rec.outputs[(pid, iid)] for pid in cl.nodes} == {s}

    def test_reconstruction_waits_for_readiness(self):
        """Nobody outputs before n - t ready-to-complete messages are delivered."""
        cl, rec, secrets = honest_cluster(4, 1, seed=5)
        cl.run(hold=lambda m: isinstance(getattr(m[2], "payload", None), ReadyToComplete))
        for node in cl.nodes.values():
            inst = node.ivss.instances[IID]
            assert inst.output is not None
            assert len(inst.ready_from) >= 3


class TestCertification:
    def test_round_order(self):
        node = lone_node()
        with pytest.raises(ProtocolViolation):
            node.ivss.cert_round_begin(3)

    def test_round_begin_seals_previous_log(self):
        node = lone_node()
        node.ivss.core_own[1].add(IID)
        node.ivss.cert_round_begin(2)
        (core,) = acasts(node, CoreInvocations)
        assert core.round == 1 and core.ids == frozenset({IID})
        # later readiness lands in the open round and never in the sealed log
        node.ivss.core_own[2].add(IvssId(2, 1, 1))
        assert core.ids == frozenset({IID})

    def test_round_one_clears_everything(self):
        node = lone_node(pid=2)
        node.deliver(3, CoreInvocations(3, 0, frozenset()))
        node.progress()
        batches = acasts(node, Checked)
        assert [(c.l, c.round) for c in batches] == [(3, 1)]
        assert batches[0].pairs == frozenset(pairs_of(range(1, 5)))

    def audited_node(self, rows):
        node = lone_node(pid=2)
        node.deliver(1, CandidateSet(IID, frozenset({1, 2, 3})))
        for i, r in rows.items():
            node.deliver(i, ReconRow(IID, r.coeffs))
        node.deliver(4, CoreInvocations(4, 1, frozenset({IID})))
        node.progress()
        return node

    def test_honest_instance_adds_no_pair(self):
        f = sample_symmetric(3, 1, random.Random(4), 97)
        node = self.audited_node({i: f.row(i) for i in (1, 2, 3)})
        assert node.ivss.fp == set()

    def test_divergent_rows_infer_pairs(self):
        f = sample_symmetric(3, 1, random.Random(4), 97)
        g = sample_symmetric(3, 1, random.Random(5), 97)
        rows = {1: f.row(1), 2: f.row(2), 3: g.row(3)}
        node = self.audited_node(rows)
        oracle = {(i, j) for i in rows for j in rows if i < j and rows[i](j) != rows[j](i)}
        assert node.ivss.fp == oracle == {(1, 3), (2, 3)}
        assert node.ivss.cert_infer_pairs() == set()
        assert node.ivss.fp == oracle

    def test_late_row_still_inferred(self):
        f = sample_symmetric(3, 1, random.Random(4), 97)
        g = sample_symmetric(3, 1, random.Random(5), 97)
        node = self.audited_node({1: f.row(1), 2: f.row(2)})
        assert node.ivss.fp == set()
        node.deliver(3, ReconRow(IID, g.row(3).coeffs))
        assert node.ivss.fp == {(1, 3), (2, 3)}

    def test_foreign_log_completes_sharing(self):
        f = sample_symmetric(3, 1, random.Random(4), 97)
        node = lone_node(pid=2)
        node.receive(1, Row(IID, f.row(2).coeffs))
        node.deliver(1, CandidateSet(IID, frozenset({1, 2, 3})))
        node.drain()
        node.deliver(4, CoreInvocations(4, 1, frozenset({IID})))
        node.progress()
        assert node.ivss.instances[IID].sharing_complete
        rows = acasts(node, ReconRow)
        assert [UniPoly(r.coeffs, 97) for r in rows] == [f.row(2)]

    def test_faulty_pair_never_cleared(self):
        node = lone_node(pid=2)
        node.ivss.fp.add((1, 3))
        node.deliver(4, CoreInvocations(4, 0, frozenset()))
        node.progress()
        (batch,) = acasts(node, Checked)
        assert (1, 3) not in batch.pairs
        assert len(batch.pairs) == 5

    def test_checked_waits_for_history_rows(self):
        """Round-2 clearance for an owner waits until the rows of its round-1 instances arrive."""
        f = sample_symmetric(3, 1, random.Random(4), 97)
        node = lone_node(pid=2)
        node.deliver(1, CandidateSet(IID, frozenset({1, 2, 3})))
        node.deliver(4, CoreInvocations(4, 0, frozenset()))
        node.deliver(4, CoreInvocations(4, 1, frozenset({IID})))
        node.progress()
        assert [(c.l, c.round) for c in acasts(node, Checked)] == [(4, 1)]
        for i in (1, 2, 3):
            node.deliver(i, ReconRow(IID, f.row(i).coeffs))
        node.progress()
        assert [(c.l, c.round) for c in acasts(node, Checked)] == [(4, 2)]
