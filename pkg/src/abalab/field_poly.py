"""Prime-field polynomials for bivariate secret sharing.

Field elements are plain Python ints kept in canonical form ``[0, p)``.
Process ids double as evaluation points ``1..n``; the point 0 is reserved
for the secret, so ``f(0, 0)`` is the shared value.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Mapping, Sequence

MERSENNE_61 = (1 << 61) - 1
DEFAULT_PRIME = MERSENNE_61


class InsufficientRows(ValueError):
    """Fewer rows than the degree bound allows interpolating from."""


class InconsistentRows(ValueError):
    """Supplied rows violate ``rows[i](j) == rows[j](i)``.

    ``pairs`` holds every violating unordered pair as ``(i, j)`` with i < j.
    """

    def __init__(self, pairs: set[tuple[int, int]]):
        self.pairs = pairs
        super().__init__(f"{len(pairs)} inconsistent row pair(s): {sorted(pairs)}")


def min_prime_bound(n: int) -> int:
    """Smallest value the field prime must exceed: max(n, ceil(0.87 n))."""
    return max(n, coin_modulus(n))


def coin_modulus(n: int) -> int:
    # ceil(0.87 n) in exact integer arithmetic
    return -(-87 * n // 100)


def is_probable_prime(p: int) -> bool:
    if p < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for q in small:
        if p % q == 0:
            return p == q
    d, s = p - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, p)
        if x in (1, p - 1):
            continue
        for _ in range(s - 1):
            x = x * x % p
            if x == p - 1:
                break
        else:
            return False
    return True


def inv(a: int, p: int) -> int:
    if a % p == 0:
        raise ZeroDivisionError("zero has no inverse")
    return pow(a, p - 2, p)


@dataclass(frozen=True, slots=True)
class UniPoly:
    """Univariate polynomial of low degree; ``coeffs[k]`` multiplies ``y**k``."""

    coeffs: tuple[int, ...]
    p: int = DEFAULT_PRIME

    def __call__(self, y: int) -> int:
        acc = 0
        p = self.p
        for c in reversed(self.coeffs):
            acc = (acc * y + c) % p
        return acc

    @property
    def degree(self) -> int:
        d = len(self.coeffs) - 1
        while d > 0 and self.coeffs[d] == 0:
            d -= 1
        return d

    def padded(self, length: int) -> tuple[int, ...]:
        if len(self.coeffs) >= length:
            return self.coeffs
        return self.coeffs + (0,) * (length - len(self.coeffs))


@dataclass(frozen=True, slots=True)
class SymBivarPoly:
    """Symmetric bivariate polynomial, ``coeffs[a][b]`` multiplies ``x**a * y**b``."""

    coeffs: tuple[tuple[int, ...], ...]
    p: int = DEFAULT_PRIME

    @property
    def t(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x: int, y: int) -> int:
        return self.row(x)(y)

    def row(self, i: int) -> UniPoly:
        p = self.p
        size = len(self.coeffs)
        out = [0] * size
        xp = 1
        for a in range(size):
            ca = self.coeffs[a]
            for b in range(size):
                out[b] += ca[b] * xp
            xp = xp * i % p
        return UniPoly(tuple(c % p for c in out), p)

    def is_symmetric(self) -> bool:
        c = self.coeffs
        return all(c[a][b] == c[b][a] for a in range(len(c)) for b in range(a))

    @property
    def secret(self) -> int:
        return self.coeffs[0][0]


def sample_symmetric(secret: int, t: int, rng: random.Random, p: int = DEFAULT_PRIME) -> SymBivarPoly:
    """Draw a uniform symmetric degree-``t`` bivariate polynomial with ``f(0,0) = secret``."""
    if t < 0:
        raise ValueError("degree bound must be non-negative")
    m = [[0] * (t + 1) for _ in range(t + 1)]
    for a in range(t + 1):
        for b in range(a, t + 1):
            c = secret % p if a == b == 0 else rng.randrange(p)
            m[a][b] = m[b][a] = c
    return SymBivarPoly(tuple(tuple(r) for r in m), p)


def row(f: SymBivarPoly, i: int) -> UniPoly:
    """The row polynomial ``y -> f(i, y)`` handed to process ``i``."""
    return f.row(i)


def poly_mul_linear(poly: list[int], root: int, p: int) -> list[int]:
    # poly * (y - root)
    out = [0] * (len(poly) + 1)
    for k, c in enumerate(poly):
        out[k + 1] = (out[k + 1] + c) % p
        out[k] = (out[k] - c * root) % p
    return out


@lru_cache(maxsize=4096)
def lagrange_basis(points: tuple[int, ...], p: int) -> tuple[tuple[int, ...], ...]:
    """Coefficient vectors of the Lagrange basis polynomials over ``points``."""
    basis = []
    for i in points:
        num = [1]
        denom = 1
        for k in points:
            if k == i:
                continue
            num = poly_mul_linear(num, k, p)
            denom = denom * (i - k) % p
        scale = inv(denom, p)
        basis.append(tuple(c * scale % p for c in num))
    return tuple(basis)


def inconsistent_pairs(rows: Mapping[int, UniPoly]) -> set[tuple[int, int]]:
    """All unordered pairs ``(i, j)`` with ``rows[i](j) != rows[j](i)``."""
    bad = set()
    for i, j in combinations(sorted(rows), 2):
        if rows[i](j) != rows[j](i):
            bad.add((i, j))
    return bad


def _lagrange_double_sum(rows: Mapping[int, UniPoly], seed: Sequence[int], p: int) -> SymBivarPoly:
    # f0(x, y) = sum_{i,j in seed} L_i(x) L_j(y) rows[i](j); as matrices L^T V L
    basis = lagrange_basis(tuple(seed), p)
    size = len(seed)
    vals = [[rows[i](j) for j in seed] for i in seed]
    # W = V L  (size x size), then C = L^T W
    w = [[sum(vals[a][k] * basis[k][b] for k in range(size)) % p for b in range(size)] for a in range(size)]
    coeffs = tuple(
        tuple(sum(basis[k][a] * w[k][b] for k in range(size)) % p for b in range(size))
        for a in range(size)
    )
    return SymBivarPoly(coeffs, p)


def interpolate_symmetric(
    rows: Mapping[int, UniPoly],
    t: int,
    p: int | None = None,
    seed: Sequence[int] | None = None,
) -> SymBivarPoly:
    """Recover the unique symmetric degree-``t`` polynomial behind ``rows``.

    Args:
        rows: process id -> row polynomial ``f_i``; ids must be distinct and nonzero.
        t: degree bound.
        p: field prime; defaults to the prime carried by the rows.
        seed: the ``t + 1`` ids whose cross evaluations feed the Lagrange
            construction. Defaults to the smallest ``t + 1`` ids.

    Raises:
        InsufficientRows: fewer than ``t + 1`` rows.
        InconsistentRows: some pair violates ``f_i(j) == f_j(i)``; carries all such pairs.
    """
    if len(rows) < t + 1:
        raise InsufficientRows(f"need {t + 1} rows, got {len(rows)}")
    if any(i == 0 for i in rows):
        raise ValueError("point 0 is reserved for the secret")
    if p is None:
        p = next(iter(rows.values())).p
    if any(len(r.coeffs) > t + 1 and r.degree > t for r in rows.values()):
        raise ValueError(f"row of degree above {t}")
    bad = inconsistent_pairs(rows)
    if bad:
        raise InconsistentRows(bad)
    if seed is None:
        seed = sorted(rows)[: t + 1]
    elif len(seed) != t + 1 or not set(seed) <= set(rows):
        raise ValueError("seed must be t+1 of the supplied ids")
    f = _lagrange_double_sum(rows, seed, p)
    # every supplied row, not only the seed, must agree with the result
    for i, r in rows.items():
        if f.row(i).padded(t + 1) != r.padded(t + 1)[: t + 1]:
            raise ArithmeticError(f"interpolated polynomial disagrees with row {i}")
    if not f.is_symmetric():
        raise ArithmeticError("interpolated polynomial is not symmetric")
    return f


def check_interpolation_set(
    candidates: Mapping[int, UniPoly],
    subset: Iterable[int],
    witness_points: Iterable[int],
    t: int,
    min_size: int | None = None,
) -> SymBivarPoly | None:
    """Test whether ``subset`` fits one symmetric polynomial on the witness points.

    Returns the polynomial ``g`` with ``g(i, j) == candidates[i](j)`` for every
    ``i`` in ``subset`` and ``j`` in ``witness_points``, or None when no such
    polynomial exists. ``min_size`` is the size floor (``n - 2t`` in the protocol).
    """
    subset = list(subset)
    if min_size is not None and len(subset) < min_size:
        raise ValueError(f"interpolation subset has {len(subset)} ids, need {min_size}")
    if not set(subset) <= set(candidates):
        raise ValueError("subset must be drawn from the candidate rows")
    rows = {i: candidates[i] for i in subset}
    try:
        g = interpolate_symmetric(rows, t)
    except ValueError:
        return None
    witness = list(witness_points)
    for i in subset:
        gi = g.row(i)
        ri = rows[i]
        if any(gi(j) != ri(j) for j in witness):
            return None
    return g
