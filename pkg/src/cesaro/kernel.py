"""Exact lower-triangular kernels of the iterated averaging operator.

T maps a sequence to its running arithmetic means; T^k is the k-fold
composition.  T^k is represented by a lower-triangular matrix whose row n
holds the weights that average the first n sequence terms.  Entries are
computed by the column-sum recurrence

    T^k_(n,m) = (1/n) * sum_{i=m}^{n} T^(k-1)_(i,m)

which costs O(1) amortized per entry with the per-column accumulators kept
by the cache.  Everything is an exact ``Fraction``.

Concurrency: rows are published as immutable tuples.  A single lock guards
extension of the table; readers never need it once a row is visible.
"""

import os
import threading
from fractions import Fraction

from .errors import BudgetExceededError
from .exact import ZERO

DEFAULT_K_MAX = 6
DEFAULT_N_MAX = 400
BUDGET_ENV_VAR = "CESARO_CACHE_BUDGET"


class KernelCache:
    """Memo table of kernel rows, bounded by a (k_max, n_max) budget."""

    def __init__(self, k_max: int = DEFAULT_K_MAX, n_max: int = DEFAULT_N_MAX):
        if k_max < 1 or n_max < 1:
            raise ValueError("budget must allow k>=1 and n>=1")
        self.k_max = k_max
        self.n_max = n_max
        self._rows: dict[tuple[int, int], tuple[Fraction, ...]] = {}
        # per level k: rows built so far and running column sums of level k-1
        self._built: dict[int, int] = {}
        self._colsums: dict[int, list[Fraction]] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_env(cls) -> "KernelCache":
        """Budget from CESARO_CACHE_BUDGET='K_MAX,N_MAX' if set."""
        raw = os.environ.get(BUDGET_ENV_VAR)
        if not raw:
            return cls()
        try:
            k_max, n_max = (int(part) for part in raw.split(","))
        except ValueError:
            raise ValueError(
                f"{BUDGET_ENV_VAR} must look like 'K_MAX,N_MAX', got {raw!r}"
            ) from None
        return cls(k_max=k_max, n_max=n_max)

    def _check_budget(self, k: int, n: int) -> None:
        if k > self.k_max or n > self.n_max:
            raise BudgetExceededError(
                "kernel_cache",
                "requested kernel row exceeds the cache budget",
                k=k, n=n, k_max=self.k_max, n_max=self.n_max,
            )

    def row(self, k: int, n: int) -> tuple[Fraction, ...]:
        """Row n of T^k: entries for columns 1..n.  Sums exactly to 1."""
        if k < 1 or n < 1:
            raise ValueError("row indices are 1-based naturals")
        self._check_budget(k, n)
        got = self._rows.get((k, n))
        if got is not None:
            return got
        with self._lock:
            self._extend_level(k, n)
        return self._rows[(k, n)]

    def _extend_level(self, k: int, n: int) -> None:
        # caller holds the lock; recursion depth is k <= k_max
        if k == 1:
            built = self._built.get(1, 0)
            for i in range(built + 1, n + 1):
                self._rows[(1, i)] = (Fraction(1, i),) * i
            self._built[1] = max(built, n)
            return
        if self._built.get(k - 1, 0) < n:
            self._extend_level(k - 1, n)
        built = self._built.get(k, 0)
        cols = self._colsums.setdefault(k, [])
        for i in range(built + 1, n + 1):
            cols.append(ZERO)  # column i opens at row i
            prev = self._rows[(k - 1, i)]
            row = []
            for m in range(1, i + 1):
                cols[m - 1] += prev[m - 1]
                row.append(cols[m - 1] / i)
            self._rows[(k, i)] = tuple(row)
        self._built[k] = max(built, n)

    def entry(self, k: int, n: int, m: int) -> Fraction:
        """T^k_(n,m); zero above the diagonal (m > n)."""
        if k < 1 or n < 1 or m < 1:
            raise ValueError("kernel indices are 1-based naturals")
        if m > n:
            return ZERO
        return self.row(k, n)[m - 1]

    def row_tail(self, k: int, n: int, m_from: int, width_cap: int = 4096) -> list[Fraction]:
        """Entries T^k_(n,m) for m = m_from..n, computed without the cache.

        The recurrence for columns >= m_from only ever touches rows in
        [m_from, n], so a local triangle suffices; this is how constructions
        reach row indices far beyond the cache budget.
        """
        if not (1 <= m_from <= n):
            raise ValueError("need 1 <= m_from <= n")
        width = n - m_from + 1
        if width > width_cap:
            raise BudgetExceededError(
                "row_tail", "tail width exceeds cap",
                n=n, m_from=m_from, width=width, width_cap=width_cap,
            )
        tri = [[Fraction(1, i)] * (i - m_from + 1) for i in range(m_from, n + 1)]
        for _level in range(2, k + 1):
            cols = [ZERO] * width
            nxt = []
            for idx in range(width):
                i = m_from + idx
                row = []
                for j in range(idx + 1):
                    cols[j] += tri[idx][j]
                    row.append(cols[j] / i)
                nxt.append(row)
            tri = nxt
        return tri[-1]


_default_cache: KernelCache | None = None
_default_lock = threading.Lock()


def default_cache() -> KernelCache:
    """Process-wide cache (budget from the environment on first use)."""
    global _default_cache
    if _default_cache is None:
        with _default_lock:
            if _default_cache is None:
                _default_cache = KernelCache.from_env()
    return _default_cache


def _vadd(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _vscale(c, a):
    return tuple(c * x for x in a)


def apply_iterate(k, prefix, n, cache: KernelCache | None = None):
    """[T^k(theta)]_n as the kernel-row weighted sum of the first n terms.

    ``prefix`` is a sequence of coordinate tuples; k=0 returns the term itself.
    """
    if n < 1 or n > len(prefix):
        raise ValueError(f"index n={n} outside prefix of length {len(prefix)}")
    if k == 0:
        return prefix[n - 1]
    cache = cache or default_cache()
    row = cache.row(k, n)
    d = len(prefix[0])
    acc = (ZERO,) * d
    for m in range(n):
        acc = _vadd(acc, _vscale(row[m], prefix[m]))
    return acc


def apply_iterate_oracle(k, prefix, n):
    """[T^k(theta)]_n by literally averaging k times; the independent check path."""
    if n < 1 or n > len(prefix):
        raise ValueError(f"index n={n} outside prefix of length {len(prefix)}")
    values = list(prefix[:n])
    d = len(values[0])
    for _ in range(k):
        acc = (ZERO,) * d
        out = []
        for j, v in enumerate(values, start=1):
            acc = _vadd(acc, v)
            out.append(_vscale(Fraction(1, j), acc))
        values = out
    return values[n - 1]


def phi(v: int, lambdas, i: int, cache: KernelCache | None = None) -> Fraction:
    """Kernel mass that block i of a partition contributes at its end index.

    phi_i = sum_{j=1}^{lambda_i} T^(k+1-i)_(v+lambda_1+..+lambda_i, v+..+lambda_{i-1}+j)
    with k = len(lambdas).  Always strictly between 0 and 1.
    """
    k = len(lambdas)
    if not (1 <= i <= k) or v < 1 or any(l < 1 for l in lambdas):
        raise ValueError("need v>=1, all lambdas>=1, 1<=i<=k")
    cache = cache or default_cache()
    end = v + sum(lambdas[:i])
    start = end - lambdas[i - 1]
    level = k + 1 - i
    if end <= cache.n_max and level <= cache.k_max:
        row = cache.row(level, end)
        return sum(row[start:end], ZERO)
    tail = cache.row_tail(level, end, start + 1)
    return sum(tail, ZERO)


class CheckResult:
    """Truthy on success; carries both sides of a failed identity."""

    def __init__(self, ok: bool, detail: dict | None = None):
        self.ok = ok
        self.detail = detail or {}

    def __bool__(self) -> bool:
        return self.ok

    def __repr__(self) -> str:
        return f"CheckResult(ok={self.ok}, detail={self.detail})"


def recurrence_check(k, prefix, n, a, cache: KernelCache | None = None) -> CheckResult:
    """Verify [T^k]_(n+a) = (n/(n+a)) [T^k]_n + ([T^(k-1)]_(n+1)+..+[T^(k-1)]_(n+a))/(n+a).

    Exact; False indicates an implementation bug, not bad input.
    """
    if n < 1 or a < 1 or n + a > len(prefix):
        raise ValueError("need n, a >= 1 and n + a within the prefix")
    cache = cache or default_cache()
    lhs = apply_iterate(k, prefix, n + a, cache)
    d = len(prefix[0])
    acc = (ZERO,) * d
    for j in range(1, a + 1):
        acc = _vadd(acc, apply_iterate(k - 1, prefix, n + j, cache))
    rhs = _vadd(
        _vscale(Fraction(n, n + a), apply_iterate(k, prefix, n, cache)),
        _vscale(Fraction(1, n + a), acc),
    )
    if lhs == rhs:
        return CheckResult(True)
    return CheckResult(False, {"k": k, "n": n, "a": a, "lhs": lhs, "rhs": rhs})


def convexity_expansion(k: int, n: int, a: int) -> dict:
    """Weights expressing [T^k]_(n+a) over {[T^j]_n : j<=k} and theta_(n+1..n+a).

    Repeated application of the one-step recurrence; the result is an exact
    convex combination (weights >= 0, summing to 1).  Keys are ("T", j, n)
    and ("theta", index).
    """
    if k < 1 or n < 1 or a < 0:
        raise ValueError("need k, n >= 1 and a >= 0")
    memo: dict[tuple[int, int], dict] = {}

    def expand(level: int, off: int) -> dict:
        if off == 0:
            return {("T", level, n): Fraction(1)}
        if level == 0:
            return {("theta", n + off): Fraction(1)}
        key = (level, off)
        got = memo.get(key)
        if got is not None:
            return got
        total = n + off
        out: dict = {("T", level, n): Fraction(n, total)}
        unit = Fraction(1, total)
        for i in range(1, off + 1):
            for basis, w in expand(level - 1, i).items():
                out[basis] = out.get(basis, ZERO) + unit * w
        memo[key] = out
        return out

    weights = expand(k, a)
    assert all(w >= 0 for w in weights.values())
    assert sum(weights.values()) == 1
    return weights
