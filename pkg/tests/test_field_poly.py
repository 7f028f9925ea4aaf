"""Tests for prime-field symmetric bivariate polynomials."""

import random
from collections import Counter
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from abalab.field_poly import (
    MERSENNE_61,
    InconsistentRows,
    InsufficientRows,
    SymBivarPoly,
    UniPoly,
    check_interpolation_set,
    coin_modulus,
    interpolate_symmetric,
    is_probable_prime,
    min_prime_bound,
    row,
    sample_symmetric,
)

P = MERSENNE_61


def brute_eval(coeffs, x, y, p):
    """Independent evaluator: plain double sum over the coefficient matrix."""
    total = 0
    for a, line in enumerate(coeffs):
        for b, c in enumerate(line):
            total += c * x**a * y**b
    return total % p


def poly_from_entries(entries, p):
    """Symmetric matrix from a dict {(a, b): c} with a <= b."""
    t = max(max(k) for k in entries)
    m = [[0] * (t + 1) for _ in range(t + 1)]
    for (a, b), c in entries.items():
        m[a][b] = m[b][a] = c % p
    return SymBivarPoly(tuple(map(tuple, m)), p)


@st.composite
def sym_polys(draw, max_t=3, p=P):
    t = draw(st.integers(0, max_t))
    entries = {(a, b): draw(st.integers(0, p - 1)) for a in range(t + 1) for b in range(a, t + 1)}
    return poly_from_entries(entries, p)


class TestFieldBasics:
    def test_mersenne_prime(self):
        assert P == 2**61 - 1
        assert is_probable_prime(P)
        assert not is_probable_prime(P - 2)

    def test_small_primes(self):
        primes = [q for q in range(2, 200) if is_probable_prime(q)]
        oracle = [q for q in range(2, 200) if all(q % d for d in range(2, q))]
        assert primes == oracle

    @pytest.mark.parametrize("n,u", [(4, 4), (5, 5), (7, 7), (10, 9), (100, 87), (101, 88)])
    def test_coin_modulus(self, n, u):
        assert coin_modulus(n) == u
        assert min_prime_bound(n) == max(n, u)


class TestSampleSymmetric:
    def test_degree_zero_is_constant(self):
        f = sample_symmetric(42, 0, random.Random(1))
        assert f.coeffs == ((42,),)
        assert f(5, 9) == 42

    @given(st.integers(0, P - 1), st.integers(0, 4), st.integers(0, 2**32))
    def test_symmetric_with_secret(self, s, t, seed):
        f = sample_symmetric(s, t, random.Random(seed))
        assert f.t == t
        assert f(0, 0) == s
        assert f.is_symmetric()
        for i in range(1, 5):
            for j in range(1, 5):
                assert f(i, j) == f(j, i)

    def test_off_diagonal_uniform(self):
        """coeffs[0][1] is uniform over F_97 (frequency count vs chi-square)."""
        rng = random.Random(2024)
        counts = Counter(sample_symmetric(5, 1, rng, 97).coeffs[0][1] for _ in range(10_000))
        observed = [counts.get(v, 0) for v in range(97)]
        assert sum(observed) == 10_000
        assert chisquare(observed).pvalue > 1e-3

    def test_same_seed_same_poly(self):
        assert sample_symmetric(3, 2, random.Random(9)) == sample_symmetric(3, 2, random.Random(9))


class TestRow:
    def test_constant(self):
        f = sample_symmetric(11, 0, random.Random(0))
        for i in range(1, 6):
            assert row(f, i)(123) == 11

    def test_worked_example(self):
        """f = x + y + xy + 3 over F_97, row 1 is 2y + 4."""
        f = poly_from_entries({(0, 0): 3, (0, 1): 1, (1, 1): 1}, 97)
        r1 = row(f, 1)
        assert r1.coeffs == (4, 2)
        for j in range(97):
            assert r1(j) == (1 + j + j + 3) % 97

    @given(sym_polys())
    def test_row_matches_direct_evaluation(self, f):
        for i in range(1, 5):
            ri = row(f, i)
            for j in range(1, 5):
                assert ri(j) == brute_eval(f.coeffs, i, j, f.p)
                assert ri(j) == row(f, j)(i)
            assert ri(0) == brute_eval(f.coeffs, i, 0, f.p)


class TestInterpolate:
    def test_constant_rows(self):
        rows = {1: UniPoly((7,), 97), 2: UniPoly((7,), 97)}
        assert interpolate_symmetric(rows, 1).secret == 7

    def test_worked_example(self):
        rows = {1: UniPoly((4, 2), 97), 2: UniPoly((5, 3), 97)}
        f = interpolate_symmetric(rows, 1)
        assert f.secret == 3
        for x in range(10):
            for y in range(10):
                assert f(x, y) == (x + y + x * y + 3) % 97

    @settings(max_examples=60)
    @given(sym_polys(), st.data())
    def test_round_trip_any_subset(self, f, data):
        t = f.t
        ids = data.draw(st.lists(st.integers(1, 12), min_size=t + 1, max_size=t + 3, unique=True))
        g = interpolate_symmetric({i: f.row(i) for i in ids}, t)
        assert g.coeffs == f.coeffs

    @settings(max_examples=40)
    @given(sym_polys(max_t=2), st.data())
    def test_seed_subset_does_not_matter(self, f, data):
        t = f.t
        ids = data.draw(st.lists(st.integers(1, 9), min_size=t + 2, max_size=t + 3, unique=True))
        rows = {i: f.row(i) for i in ids}
        results = {interpolate_symmetric(rows, t, seed=s).coeffs for s in combinations(sorted(ids), t + 1)}
        assert results == {f.coeffs}

    def test_insufficient(self):
        with pytest.raises(InsufficientRows):
            interpolate_symmetric({1: UniPoly((1, 2), 97)}, 1)

    def test_reports_all_bad_pairs(self):
        f = sample_symmetric(1, 1, random.Random(3), 97)
        rows = {i: f.row(i) for i in (1, 2, 3, 4)}
        # shift row 3 by a constant: pairs with 3 break, others hold
        rows[3] = UniPoly(((rows[3].coeffs[0] + 1) % 97, rows[3].coeffs[1]), 97)
        with pytest.raises(InconsistentRows) as err:
            interpolate_symmetric(rows, 1)
        assert err.value.pairs == {(1, 3), (2, 3), (3, 4)}

    def test_zero_point_rejected(self):
        with pytest.raises(ValueError):
            interpolate_symmetric({0: UniPoly((1,), 97), 1: UniPoly((1,), 97)}, 1)

    @settings(max_examples=30)
    @given(sym_polys(max_t=2, p=101), sym_polys(max_t=2, p=101))
    def test_distinct_polys_share_at_most_t_rows(self, f, g):
        if f.t != g.t or f == g:
            return
        shared = [i for i in range(1, 101) if f.row(i) == g.row(i)]
        assert len(shared) <= f.t


class TestInterpolationSet:
    def test_honest_rows(self):
        f = sample_symmetric(9, 1, random.Random(5))
        cand = {i: f.row(i) for i in (1, 2, 3)}
        for sub in combinations(cand, 2):
            assert check_interpolation_set(cand, sub, cand, 1, min_size=2) == f

    def test_two_interpolation_sets(self):
        """f = xy and g = x + y - 1 share row 1; {1,2} fits f, {1,3} fits g."""
        p = 97
        f = poly_from_entries({(1, 1): 1}, p)
        g = poly_from_entries({(0, 0): -1, (0, 1): 1}, p)
        assert f.row(1) == g.row(1)
        cand = {1: f.row(1), 2: f.row(2), 3: g.row(3)}
        witness = {1, 2, 3}
        got_g = check_interpolation_set(cand, {1, 3}, witness, 1, min_size=2)
        got_f = check_interpolation_set(cand, {1, 2}, witness, 1, min_size=2)
        assert got_g == g and got_f == f
        # direct-evaluation oracle on the witness grid
        for i in (1, 3):
            assert all(brute_eval(got_g.coeffs, i, j, p) == cand[i](j) for j in witness)
        for i in (1, 2):
            assert all(brute_eval(got_f.coeffs, i, j, p) == cand[i](j) for j in witness)
        assert got_f.secret != got_g.secret
        assert check_interpolation_set(cand, {2, 3}, witness, 1) is None

    def test_corrupted_evaluation_fails(self):
        f = sample_symmetric(9, 1, random.Random(6), 97)
        cand = {i: f.row(i) for i in (1, 2, 3, 4)}
        sub = {1, 2, 3}
        assert check_interpolation_set(cand, sub, cand, 1) == f
        c0, c1 = cand[3].coeffs
        # row 3 stays consistent with row 1 but is off at the witness point 2
        cand[3] = UniPoly(((c0 - 1) % 97, (c1 + 1) % 97), 97)
        assert cand[3](1) == f(3, 1) and cand[3](2) != f(3, 2)
        assert check_interpolation_set(cand, sub, cand, 1) is None
        assert check_interpolation_set(cand, {1, 3}, {1, 3}, 1) is not None

    def test_subset_too_small(self):
        f = sample_symmetric(9, 1, random.Random(5))
        cand = {i: f.row(i) for i in (1, 2, 3)}
        with pytest.raises(ValueError):
            check_interpolation_set(cand, {1}, cand, 1, min_size=2)
