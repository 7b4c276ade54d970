"""Root sets of the companion polynomial modulo primes.

For each prime p the table stores I_p, the sorted residues where B! * f
vanishes mod p, with I_p = () whenever p <= B or p divides the leading
coefficient (those primes are never used by the sieve). Production root
finding is algebraic above a small cutoff: linear solve for degree 1,
discriminant plus a modular square root for degree 2, and gcd(X^p - X, f)
followed by deterministic equal-degree splitting beyond that. Primes below
the cutoff use a vectorized exhaustive scan; the scan also serves as the
independent cross-check route in the test suite.
"""

from __future__ import annotations

import hashlib
import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .gfpoly import (
    Poly,
    gf_divmod,
    gf_gcd,
    gf_monic,
    gf_normalize,
    gf_powmod,
    gf_sub,
)
from .poly import IntPolynomial
from .primes import sieve_primes, sqrt_mod_prime

# primes below this are scanned exhaustively; at and above it the algebraic
# path runs (and is cross-checked against an independent scan in the tests)
SCAN_LIMIT = 64

_CACHE_MAGIC = b"CFROOTS1"


def _roots_scan(comp: tuple[int, ...], p: int) -> tuple[int, ...]:
    xs = np.arange(p, dtype=np.int64)
    acc = np.zeros(p, dtype=np.int64)
    for c in reversed(comp):
        acc = (acc * xs + c % p) % p
    return tuple(int(r) for r in np.nonzero(acc == 0)[0])


def _quad_roots(c0: int, c1: int, c2: int, p: int) -> tuple[int, ...]:
    """Roots of c2 x^2 + c1 x + c0 mod an odd prime p, p not dividing c2."""
    disc = (c1 * c1 - 4 * c2 * c0) % p
    s = sqrt_mod_prime(disc, p)
    if s is None:
        return ()
    inv = pow(2 * c2, -1, p)
    r1 = ((-c1 + s) * inv) % p
    r2 = ((-c1 - s) * inv) % p
    return tuple(sorted({r1, r2}))


def _split_linear_factors(g: Poly, p: int) -> list[int]:
    """All roots of a monic squarefree product of linear factors mod p."""
    roots: list[int] = []
    stack = [g]
    while stack:
        h = stack.pop()
        d = len(h) - 1
        if d <= 0:
            continue
        if d == 1:
            roots.append((-h[0] * pow(h[1], -1, p)) % p)
            continue
        if d == 2:
            roots.extend(_quad_roots(h[0], h[1], h[2], p))
            continue
        # deterministic splitting sweep; terminates because the roots are
        # distinct and some shift separates them by quadratic character
        for a in range(1, p):
            w = gf_sub(gf_powmod((a, 1), (p - 1) // 2, h, p), (1,), p)
            f1 = gf_gcd(w, h, p)
            if 0 < len(f1) - 1 < d:
                q, r = gf_divmod(h, f1, p)
                assert not r
                stack.append(f1)
                stack.append(gf_monic(q, p))
                break
        else:  # pragma: no cover - cannot happen for squarefree split input
            raise ArithmeticError(f"splitting failed mod {p}")
    return roots


def _roots_algebraic(comp: tuple[int, ...], p: int) -> tuple[int, ...]:
    cp = gf_normalize(comp, p)
    d = len(cp) - 1
    if d <= 0:
        return ()
    if d == 1:
        return ((-cp[0] * pow(cp[1], -1, p)) % p,)
    if d == 2:
        return _quad_roots(cp[0], cp[1], cp[2], p)
    cp = gf_monic(cp, p)
    xp = gf_powmod((0, 1), p, cp, p)
    g = gf_gcd(gf_sub(xp, (0, 1), p), cp, p)
    if len(g) - 1 <= 0:
        return ()
    return tuple(sorted(_split_linear_factors(g, p)))


def roots_mod_p(f: IntPolynomial, p: int, _comp: tuple[int, ...] | None = None) -> tuple[int, ...]:
    """Sorted residues r with (B! * f)(r) = 0 mod p.

    Empty for p <= degree or p dividing the leading coefficient: those
    primes carry no usable congruence information for the sieve.
    """
    if p <= f.degree or f.leading % p == 0:
        return ()
    comp = _comp if _comp is not None else f.companion()
    if p < SCAN_LIMIT:
        return _roots_scan(comp, p)
    return _roots_algebraic(comp, p)


@dataclass
class RootTable:
    """Root sets I_p for every prime p <= limit."""

    poly: IntPolynomial
    limit: int
    primes: np.ndarray
    roots: dict[int, tuple[int, ...]]
    _diff_sets: dict[int, frozenset[int]] = field(default_factory=dict, repr=False)

    def root_count(self, p: int) -> int:
        return len(self.roots[p])

    def usable_primes(self) -> list[int]:
        """Primes with a nonempty root set, ascending."""
        return [int(p) for p in self.primes if self.roots[int(p)]]

    def primes_between(self, lo: int | float, hi: int | float) -> list[int]:
        """Primes q with lo < q <= hi, ascending."""
        i = np.searchsorted(self.primes, math.floor(lo), side="right")
        j = np.searchsorted(self.primes, math.floor(hi), side="right")
        return [int(p) for p in self.primes[i:j]]

    def usable_between(self, lo: int | float, hi: int | float) -> list[int]:
        return [q for q in self.primes_between(lo, hi) if self.roots[q]]

    def density_product(self, hi: int | float, lo: int | float = 0) -> float:
        """prod over primes lo < q <= hi of (1 - nu_q / q)."""
        out = 1.0
        for q in self.primes_between(lo, hi):
            k = len(self.roots[q])
            if k:
                out *= 1.0 - k / q
        return out

    def diff_set(self, q: int) -> frozenset[int]:
        """Pairwise root differences mod q, self-differences included, so 0
        is present whenever the root set is nonempty (cached)."""
        ds = self._diff_sets.get(q)
        if ds is None:
            rs = self.roots[q]
            ds = frozenset((a - b) % q for a in rs for b in rs)
            self._diff_sets[q] = ds
        return ds


def _poly_digest(f: IntPolynomial) -> int:
    h = hashlib.sha256(str(f).encode()).digest()
    return struct.unpack("<Q", h[:8])[0]


def _cache_path(cache_dir: str, f: IntPolynomial, limit: int) -> str:
    return os.path.join(cache_dir, f"roots_{_poly_digest(f):016x}_{limit}.bin")


def _write_cache(path: str, f: IntPolynomial, limit: int, primes: np.ndarray, roots: dict) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<QQ", _poly_digest(f), limit))
        for p in primes:
            rs = roots[int(p)]
            fh.write(struct.pack("<QQ", int(p), len(rs)))
            if rs:
                fh.write(struct.pack(f"<{len(rs)}Q", *rs))
    os.replace(tmp, path)


def _read_cache(path: str, f: IntPolynomial, limit: int) -> dict | None:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError:
        return None
    if len(data) < 24 or data[:8] != _CACHE_MAGIC:
        return None
    digest, stored_limit = struct.unpack_from("<QQ", data, 8)
    if digest != _poly_digest(f) or stored_limit != limit:
        return None
    roots: dict[int, tuple[int, ...]] = {}
    off = 24
    try:
        while off < len(data):
            p, k = struct.unpack_from("<QQ", data, off)
            off += 16
            rs = struct.unpack_from(f"<{k}Q", data, off)
            off += 8 * k
            roots[int(p)] = tuple(int(r) for r in rs)
    except struct.error:
        return None
    return roots


def build_root_table(f: IntPolynomial, limit: int, cache_dir: str | None = None) -> RootTable:
    """Compute (or load from cache) all root sets for primes <= limit.

    A corrupt or mismatching cache file is ignored and rebuilt.
    """
    primes = sieve_primes(limit)
    if cache_dir:
        path = _cache_path(cache_dir, f, limit)
        cached = _read_cache(path, f, limit)
        if cached is not None and len(cached) == len(primes):
            return RootTable(f, limit, primes, cached)
    comp = f.companion()
    roots = {int(p): roots_mod_p(f, int(p), _comp=comp) for p in primes}
    if cache_dir:
        os.makedirs(cache_dir, exist_ok=True)
        _write_cache(_cache_path(cache_dir, f, limit), f, limit, primes, roots)
    return RootTable(f, limit, primes, roots)


@dataclass(frozen=True)
class DensityStats:
    """Summary statistics of root densities over primes up to x."""

    x: int
    n_primes: int
    n_usable: int
    mertens_sum: float  # sum of nu_q / q, compare against loglog x + const
    sigma: float  # prod (1 - nu_q / q); sigma * log x should stabilize
    rho_hat: float  # fraction of primes with nu >= 1
    rho_hat_norm: float  # usable-prime count normalized by x / log x
    rho_nu_hat: dict[int, float]  # fraction of primes with nu = k, k >= 1
    nu_weighted_sum: float  # sum over k of k * rho_nu_hat[k]; tends to 1

    def loglog_gap(self) -> float:
        return self.mertens_sum - math.log(math.log(self.x))


def density_stats(table: RootTable, limit: int | None = None) -> DensityStats:
    x = table.limit if limit is None else min(limit, table.limit)
    mert = 0.0
    sigma = 1.0
    counts: dict[int, int] = {}
    n_primes = 0
    for p in table.primes:
        p = int(p)
        if p > x:
            break
        n_primes += 1
        k = len(table.roots[p])
        if k:
            mert += k / p
            sigma *= 1.0 - k / p
            counts[k] = counts.get(k, 0) + 1
    n_usable = sum(counts.values())
    rho_nu = {k: c / n_primes for k, c in sorted(counts.items())}
    return DensityStats(
        x=x,
        n_primes=n_primes,
        n_usable=n_usable,
        mertens_sum=mert,
        sigma=sigma,
        rho_hat=n_usable / n_primes if n_primes else 0.0,
        rho_hat_norm=n_usable * math.log(x) / x if x > 1 else 0.0,
        rho_nu_hat=rho_nu,
        nu_weighted_sum=sum(k * v for k, v in rho_nu.items()),
    )


def residue_collision_count(table: RootTable, m: int, qmin: int, qmax: int) -> int:
    """Number of primes qmin < q <= qmax whose root set contains two roots
    differing by m mod q. Drives the heuristic independence check: the count
    should stay logarithmic in m."""
    total = 0
    for q in table.primes_between(qmin, qmax):
        if table.roots[q] and m % q in table.diff_set(q):
            total += 1
    return total


def companion_eval_mod(comp: tuple[int, ...], n: int, p: int) -> int:
    """(B! * f)(n) mod p for a precomputed companion coefficient tuple."""
    acc = 0
    for c in reversed(comp):
        acc = (acc * n + c) % p
    return acc
