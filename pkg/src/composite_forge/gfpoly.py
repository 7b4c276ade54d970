"""Dense polynomial arithmetic over prime fields.

Polynomials are tuples of ints, ascending degree, trimmed (no trailing
zeros); the zero polynomial is the empty tuple. Shared by the algebraic root
finder and the irreducibility check.
"""

from __future__ import annotations

Poly = tuple[int, ...]


def gf_trim(c: list[int]) -> Poly:
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def gf_normalize(c, p: int) -> Poly:
    return gf_trim([int(ci) % p for ci in c])


def gf_monic(a: Poly, p: int) -> Poly:
    if not a or a[-1] == 1:
        return a
    inv = pow(a[-1], -1, p)
    return tuple((ci * inv) % p for ci in a)


def gf_add(a: Poly, b: Poly, p: int) -> Poly:
    n = max(len(a), len(b))
    out = [0] * n
    for i, ci in enumerate(a):
        out[i] = ci
    for i, ci in enumerate(b):
        out[i] = (out[i] + ci) % p
    return gf_trim(out)


def gf_sub(a: Poly, b: Poly, p: int) -> Poly:
    n = max(len(a), len(b))
    out = [0] * n
    for i, ci in enumerate(a):
        out[i] = ci
    for i, ci in enumerate(b):
        out[i] = (out[i] - ci) % p
    return gf_trim(out)


def gf_mul(a: Poly, b: Poly, p: int) -> Poly:
    if not a or not b:
        return ()
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] = (out[i + j] + ai * bj) % p
    return gf_trim(out)


def gf_divmod(a: Poly, b: Poly, p: int) -> tuple[Poly, Poly]:
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    r = list(a)
    q = [0] * max(len(a) - len(b) + 1, 0)
    inv_lead = pow(b[-1], -1, p)
    db = len(b) - 1
    while len(r) >= len(b) and any(r):
        while r and r[-1] == 0:
            r.pop()
        if len(r) < len(b):
            break
        shift = len(r) - len(b)
        coef = (r[-1] * inv_lead) % p
        q[shift] = coef
        for i in range(db + 1):
            r[shift + i] = (r[shift + i] - coef * b[i]) % p
    return gf_trim(q), gf_trim(r)


def gf_mod(a: Poly, b: Poly, p: int) -> Poly:
    return gf_divmod(a, b, p)[1]


def gf_mulmod(a: Poly, b: Poly, m: Poly, p: int) -> Poly:
    return gf_mod(gf_mul(a, b, p), m, p)


def gf_powmod(base: Poly, e: int, m: Poly, p: int) -> Poly:
    """base**e mod (m, p) by square and multiply."""
    result: Poly = (1,)
    base = gf_mod(base, m, p)
    while e > 0:
        if e & 1:
            result = gf_mulmod(result, base, m, p)
        base = gf_mulmod(base, base, m, p)
        e >>= 1
    return result


def gf_gcd(a: Poly, b: Poly, p: int) -> Poly:
    while b:
        a, b = b, gf_mod(a, b, p)
    return gf_monic(a, p)


def gf_eval(c: Poly, n: int, p: int) -> int:
    acc = 0
    for ci in reversed(c):
        acc = (acc * n + ci) % p
    return acc


def gf_is_irreducible(c: Poly, p: int) -> bool:
    """Irreducibility of c over the p-element field.

    Standard criterion: X^(p^d) = X mod c, and gcd(X^(p^(d/l)) - X, c) = 1
    for every prime l dividing d.
    """
    c = gf_monic(gf_normalize(c, p), p)
    d = len(c) - 1
    if d <= 0:
        return False
    if d == 1:
        return True
    x: Poly = (0, 1)
    if gf_powmod(x, p**d, c, p) != x:
        return False
    dd = d
    prime_divs = []
    f = 2
    while f * f <= dd:
        if dd % f == 0:
            prime_divs.append(f)
            while dd % f == 0:
                dd //= f
        f += 1
    if dd > 1:
        prime_divs.append(dd)
    for l in prime_divs:
        h = gf_sub(gf_powmod(x, p ** (d // l), c, p), x, p)
        if len(gf_gcd(h, c, p)) != 1:
            return False
    return True
