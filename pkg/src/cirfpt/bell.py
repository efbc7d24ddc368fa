"""Partial/complete exponential Bell polynomials and logarithmic polynomials.

The single-index functions enumerate integer partitions and are exact for
any numeric type that supports ``+`` and ``*`` (ints, Fractions, floats,
mpf).  The ``*_sequence`` helpers return all orders 1..K at once through the
classical moment/cumulant recursions; the cumulant engine uses those because
the number of partitions of 60 is close to a million.
"""

from __future__ import annotations

import threading
from math import comb, factorial

__all__ = [
    "partition_table",
    "partial_bell",
    "complete_bell",
    "log_partition_poly",
    "complete_bell_sequence",
    "log_partition_sequence",
]

_tables: dict[tuple[int, int], tuple[tuple[int, tuple[int, ...]], ...]] = {}
_tables_lock = threading.Lock()


def _partitions(k: int, j: int, largest: int):
    """Partitions of k into exactly j parts, each part <= largest, as descending tuples."""
    if j == 0:
        if k == 0:
            yield ()
        return
    if k < j:
        return
    for part in range(min(largest, k - j + 1), 0, -1):
        if part * j < k:
            break
        for rest in _partitions(k - part, j - 1, part):
            yield (part,) + rest


def partition_table(k: int, j: int) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """Exponent/coefficient table of B_{k,j}.

    Each entry is ``(coef, lam)`` with ``lam[i-1]`` the multiplicity of part
    ``i`` and ``coef = k! / prod(lam_i! (i!)^lam_i)`` an exact integer.
    """
    key = (k, j)
    table = _tables.get(key)
    if table is not None:
        return table
    with _tables_lock:
        table = _tables.get(key)
        if table is None:
            width = k - j + 1
            rows = []
            for parts in _partitions(k, j, width):
                lam = [0] * width
                for p in parts:
                    lam[p - 1] += 1
                denom = 1
                for i, m in enumerate(lam, start=1):
                    denom *= factorial(m) * factorial(i) ** m
                rows.append((factorial(k) // denom, tuple(lam)))
            table = tuple(rows)
            _tables[key] = table
    return table


def partial_bell(k: int, j: int, x):
    """B_{k,j}(x_1, ..., x_{k-j+1}); ``x[0]`` holds x_1."""
    if not 1 <= j <= k:
        raise ValueError("need 1 <= j <= k")
    if len(x) < k - j + 1:
        raise IndexError(f"B_{{{k},{j}}} needs {k - j + 1} variables, got {len(x)}")
    total = 0
    for coef, lam in partition_table(k, j):
        term = coef
        for i, m in enumerate(lam):
            if m:
                term = term * x[i] ** m
        total = total + term
    return total


def complete_bell(k: int, x):
    """Y_k(x_1, ..., x_k) with Y_0 = 1."""
    if k == 0:
        return 1
    if len(x) < k:
        raise IndexError(f"Y_{k} needs {k} variables, got {len(x)}")
    return sum((partial_bell(k, j, x) for j in range(1, k + 1)), 0)


def log_partition_poly(k: int, x):
    """P_k = sum_j (-1)^(j-1) (j-1)! B_{k,j}(x)."""
    if k < 1:
        raise ValueError("k must be positive")
    if len(x) < k:
        raise IndexError(f"P_{k} needs {k} variables, got {len(x)}")
    total = 0
    for j in range(1, k + 1):
        sign = 1 if j % 2 else -1
        total = total + sign * factorial(j - 1) * partial_bell(k, j, x)
    return total


def complete_bell_sequence(x, K: int, one=1) -> list:
    """[Y_0, ..., Y_K] through Y_k = sum_i C(k-1, i-1) x_i Y_{k-i}.

    This is the cumulant-to-moment recursion with ``x`` as cumulants.
    ``one`` sets the numeric type of Y_0.
    """
    if len(x) < K:
        raise IndexError(f"need {K} variables, got {len(x)}")
    Y = [one]
    for k in range(1, K + 1):
        acc = x[k - 1] * Y[0]
        for i in range(1, k):
            acc = acc + comb(k - 1, i - 1) * x[i - 1] * Y[k - i]
        Y.append(acc)
    return Y


def log_partition_sequence(x, K: int) -> list:
    """[P_1, ..., P_K] through P_k = x_k - sum_{i<k} C(k-1, i-1) P_i x_{k-i}.

    This is the moment-to-cumulant recursion with ``x`` as moments, i.e. the
    coefficients of log(1 + sum_k x_k z^k / k!).
    """
    if len(x) < K:
        raise IndexError(f"need {K} variables, got {len(x)}")
    P = []
    for k in range(1, K + 1):
        acc = x[k - 1]
        for i in range(1, k):
            acc = acc - comb(k - 1, i - 1) * P[i - 1] * x[k - i - 1]
        P.append(acc)
    return P
