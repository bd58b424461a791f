"""Shared random-object factories and independent evaluation oracles.

Everything takes an explicit numpy Generator so each test seeds itself
and failures replay deterministically.
"""

from __future__ import annotations

import numpy as np

from odexpand import ExpPolySum, LogPowerSum, MultiLinearMap


def cvec(rng, n: int) -> np.ndarray:
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def random_matrix(rng, n: int, re_lo: float = 0.5, re_hi: float = 3.0) -> np.ndarray:
    """Well-conditioned matrix with eigenvalue real parts in [re_lo, re_hi].

    Upper-triangular eigenstructure under a unitary similarity, so the
    spectrum is exact and the conditioning stays tame while the matrix is
    generically non-normal.
    """
    re = rng.uniform(re_lo, re_hi, size=n)
    im = rng.uniform(-2.0, 2.0, size=n)
    T = np.diag(re + 1j * im).astype(complex)
    iu = np.triu_indices(n, 1)
    T[iu] = 0.4 * (rng.standard_normal(len(iu[0])) + 1j * rng.standard_normal(len(iu[0])))
    Q, _ = np.linalg.qr(cvec(rng, n * n).reshape(n, n))
    return Q @ T @ Q.conj().T


def random_real_matrix(rng, n: int, re_lo: float = 0.5, re_hi: float = 3.0) -> np.ndarray:
    """Real matrix with eigenvalue real parts in [re_lo, re_hi]."""
    D = np.diag(rng.uniform(re_lo, re_hi, size=n))
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    N = 0.3 * np.triu(rng.standard_normal((n, n)), 1)
    return Q @ (D + N) @ Q.T


def random_expsum(
    rng,
    dim: int,
    n_terms: int = 3,
    max_degree: int = 2,
    re_lo: float = -3.0,
    re_hi: float = -0.2,
) -> ExpPolySum:
    raw = []
    for _ in range(n_terms):
        nu = complex(rng.uniform(re_lo, re_hi), rng.uniform(-2.0, 2.0))
        deg = int(rng.integers(0, max_degree + 1))
        raw.append((nu, cvec(rng, (deg + 1) * dim).reshape(deg + 1, dim)))
    return ExpPolySum.build(dim, raw)


def random_alpha(rng, depth: int, m: int | None = None, mu: float | None = None):
    """Exponent tuple of length depth+2; pinned to the (m, mu) class if given."""
    a = [complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)) for _ in range(depth + 2)]
    if m is not None:
        for j in range(min(m + 1, depth + 2)):
            a[j] = complex(0.0, a[j].imag)
        if m + 1 < depth + 2:
            a[m + 1] = complex(mu, a[m + 1].imag)
    return tuple(a)


def random_logpower(
    rng,
    dim: int,
    depth: int,
    n_terms: int = 3,
    m: int | None = None,
    mu: float | None = None,
) -> LogPowerSum:
    raw = [(random_alpha(rng, depth, m, mu), cvec(rng, dim)) for _ in range(n_terms)]
    return LogPowerSum.build(dim, depth, raw)


def random_multilinear(
    rng, arity: int, dim: int, n_entries: int = 4, real: bool = False
) -> MultiLinearMap:
    entries = []
    for _ in range(n_entries):
        out = int(rng.integers(0, dim))
        idx = tuple(int(rng.integers(0, dim)) for _ in range(arity))
        val = rng.standard_normal() if real else complex(*rng.standard_normal(2))
        entries.append((out, idx, val))
    return MultiLinearMap(arity, dim, tuple(entries))


def dense_apply(G: MultiLinearMap, args) -> np.ndarray:
    """Apply a multilinear map by brute force over its entry list.

    Independent of MultiLinearMap.__call__: no shared code beyond the
    entry tuples themselves.
    """
    out = np.zeros(G.dim, dtype=complex)
    for target, idx, val in G.entries:
        prod = val
        for k, j in enumerate(idx):
            prod = prod * args[k][j]
        out[target] += prod
    return out


def eval_expsum_oracle(s: ExpPolySum, t: float) -> np.ndarray:
    """Pointwise evaluation without Horner or any ExpPolySum code path."""
    out = np.zeros(s.dim, dtype=complex)
    for nu, rows in s.items():
        for j, row in enumerate(rows):
            out += row * (t**j) * np.exp(nu * t)
    return out


def sym_logpower(rng, dim: int, depth: int, n_terms: int = 2) -> LogPowerSum:
    """Conjugation-symmetric sum: q + conj(q) for a random q."""
    q = random_logpower(rng, dim, depth, n_terms)
    return q + q.conjugate()
