"""Probability mass functions on finite or countably infinite alphabets.

A :class:`Pmf` is an explicit vector of masses plus an optional tail model
describing the symbols that follow the explicit support. Tails are kept in
closed form so that entropies and power sums over an infinite alphabet can be
evaluated without materialising the whole support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy import stats

from .errors import MassSumMismatch, NegativeMass, TailNotSummable, UnsortableTail

SUM_TOL = 1e-9
PREFIX_TOL = 1e-12
MAX_TAIL_TERMS = 10**7

# Below this mass a tail term is treated as zero when summing numerically.
_NEGLIGIBLE = 1e-300


def kahan_prefix_sums(x: np.ndarray) -> np.ndarray:
    """Prefix sums with compensated summation.

    ``out[k]`` is the sum of the first ``k`` entries, so ``out[0] == 0`` and
    the result has one more entry than ``x``.
    """
    out = np.empty(len(x) + 1)
    out[0] = 0.0
    s = 0.0
    c = 0.0
    for i, v in enumerate(x.tolist()):
        y = v - c
        t = s + y
        c = (t - s) - y
        s = t
        out[i + 1] = s
    return out


def eta(u: np.ndarray) -> np.ndarray:
    """Entropy density -u log u with the convention 0 log 0 = 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u >= _NEGLIGIBLE
    out[pos] = -u[pos] * np.log(u[pos])
    return out


# --------------------------------------------------------------------------
# Tail models
# --------------------------------------------------------------------------


def _h2_over_p(p: float, log_p: float) -> float:
    """h2(p)/p, evaluated stably for p down to exp(-1e300)."""
    if p >= 1.0:
        return 0.0
    if p < 1e-8:
        # -log1p(-p)/p = 1 + p/2 + p^2/3 + ...
        return -log_p + (1.0 - p) * (1.0 + p / 2.0)
    return -log_p - (1.0 - p) * math.log1p(-p) / p


@dataclass(frozen=True)
class GeometricTail:
    """Masses ``mass * p * (1-p)**i`` for i = 0, 1, 2, ...

    The decay is stored as ``log_p`` so that extremely slow decays (p far
    below the smallest double) remain representable.
    """

    mass: float
    log_p: float
    kind = "geometric"

    @classmethod
    def from_first_ratio(cls, first: float, ratio: float) -> "GeometricTail":
        if not (0.0 <= ratio < 1.0) or first < 0:
            raise ValueError("geometric tail needs first >= 0 and 0 <= ratio < 1")
        p = 1.0 - ratio
        return cls(mass=first / p, log_p=math.log(p))

    @property
    def p(self) -> float:
        return math.exp(self.log_p)

    @property
    def first(self) -> float:
        return self.mass * self.p

    @property
    def ratio(self) -> float:
        return -math.expm1(self.log_p)

    def _log1m_p(self) -> float:
        p = self.p
        return -p if p < 1e-17 else math.log1p(-p)

    def total(self) -> float:
        return self.mass

    def first_mass(self) -> float:
        return self.first

    def is_decreasing(self) -> bool:
        return True

    def head(self, n: int) -> np.ndarray:
        if self.mass == 0.0:
            return np.zeros(n)
        i = np.arange(n, dtype=float)
        return np.exp(math.log(self.mass) + self.log_p + i * self._log1m_p())

    def advance(self, n: int) -> "GeometricTail":
        return GeometricTail(self.mass * math.exp(n * self._log1m_p()), self.log_p)

    def entropy(self) -> float:
        if self.mass == 0.0:
            return 0.0
        return float(eta(np.array([self.mass]))[0]) + self.mass * _h2_over_p(
            self.p, self.log_p
        )

    def power_sum(self, alpha: float) -> float:
        """Sum of t**alpha over the tail terms."""
        if self.mass == 0.0:
            return 0.0
        if self.log_p < -700.0:
            log_den = math.log(alpha) + self.log_p
        else:
            log_den = math.log(-math.expm1(alpha * self._log1m_p()))
        expo = alpha * (math.log(self.mass) + self.log_p) - log_den
        return math.inf if expo > 709.0 else math.exp(expo)

    def count_until(self, tol: float) -> int:
        """Smallest n whose remaining mass after n terms is at most tol."""
        if self.mass <= tol:
            return 0
        step = self._log1m_p()
        if step == 0.0:
            return MAX_TAIL_TERMS + 1
        n = max(0, math.ceil(math.log(tol / self.mass) / step) - 2)
        while self.advance(n).mass > tol:
            n += 1
        return n

    def to_dict(self) -> dict:
        if self.log_p > -700.0:
            return {"kind": "geometric", "first": self.first, "ratio": self.ratio}
        return {"kind": "geometric", "mass": self.mass, "log_p": self.log_p}


@dataclass(frozen=True)
class PoissonTail:
    """Poisson masses ``mean**(k-1) e**(-mean) / (k-1)!`` for symbols k >= start."""

    mean: float
    start: int
    kind = "poisson"

    def _k0(self) -> int:
        return self.start - 1

    def total(self) -> float:
        return float(stats.poisson.sf(self._k0() - 1, self.mean))

    def first_mass(self) -> float:
        return float(stats.poisson.pmf(self._k0(), self.mean))

    def is_decreasing(self) -> bool:
        return self.start >= self.mean

    def head(self, n: int) -> np.ndarray:
        return stats.poisson.pmf(np.arange(self._k0(), self._k0() + n), self.mean)

    def advance(self, n: int) -> "PoissonTail":
        return PoissonTail(self.mean, self.start + n)

    def _terms(self):
        """Yield chunks of log-masses until they are negligible."""
        k = self._k0()
        chunk = max(1024, int(4 * math.sqrt(self.mean) + 64))
        while True:
            ks = np.arange(k, k + chunk)
            logp = stats.poisson.logpmf(ks, self.mean)
            yield logp
            k += chunk
            if k > self.mean and logp[-1] < math.log(_NEGLIGIBLE) - 50:
                return

    def entropy(self) -> float:
        return math.fsum(float(np.sum(-np.exp(lp) * lp)) for lp in self._terms())

    def power_sum(self, alpha: float) -> float:
        return math.fsum(float(np.sum(np.exp(alpha * lp))) for lp in self._terms())

    def count_until(self, tol: float) -> int:
        n = 0
        chunk = max(1024, int(4 * math.sqrt(self.mean) + 64))
        while True:
            ks = np.arange(self._k0() + n, self._k0() + n + chunk)
            rem = stats.poisson.sf(ks - 1, self.mean)
            hit = np.nonzero(rem <= tol)[0]
            if hit.size:
                return n + int(hit[0])
            n += chunk
            if n > MAX_TAIL_TERMS:
                raise TailNotSummable("poisson tail needs more than 1e7 terms")

    def to_dict(self) -> dict:
        return {"kind": "poisson", "mean": self.mean, "start": self.start}


_LP_BLOCK = 10**6


@lru_cache(maxsize=64)
def _log_power_zeta(start: int, alpha: float = 1.0) -> float:
    """Sum over x >= start of (x log^2 x)**(-alpha), start >= 2."""
    x = np.arange(start, start + _LP_BLOCK, dtype=float)
    head = math.fsum(np.power(x * np.log(x) ** 2, -alpha).tolist())
    a = float(start + _LP_BLOCK)
    la = math.log(a)
    if alpha == 1.0:
        f = 1.0 / (a * la * la)
        fp = -(la + 2.0) / (a * a * la**3)
        rest = 1.0 / la + f / 2.0 - fp / 12.0
    else:
        # leading term of the integral plus the half-endpoint correction
        rest = a ** (1.0 - alpha) / ((alpha - 1.0) * la ** (2.0 * alpha))
        rest += (a * la * la) ** (-alpha) / 2.0
    return head + rest


@dataclass(frozen=True)
class LogPowerTail:
    """Masses ``scale / (x log^2 x)`` for x >= start.

    Summable, but with divergent Shannon entropy: the canonical witness that a
    finite-mass tail can carry infinite uncertainty.
    """

    scale: float
    start: int
    kind = "log-power"

    def __post_init__(self):
        if self.start < 2:
            raise ValueError("log-power tail must start at x >= 2")

    @classmethod
    def with_mass(cls, mass: float, start: int) -> "LogPowerTail":
        return cls(mass / _log_power_zeta(start), start)

    def total(self) -> float:
        return self.scale * _log_power_zeta(self.start)

    def first_mass(self) -> float:
        x = float(self.start)
        return self.scale / (x * math.log(x) ** 2)

    def is_decreasing(self) -> bool:
        return True

    def head(self, n: int) -> np.ndarray:
        x = np.arange(self.start, self.start + n, dtype=float)
        return self.scale / (x * np.log(x) ** 2)

    def advance(self, n: int) -> "LogPowerTail":
        return LogPowerTail(self.scale, self.start + n)

    def entropy(self) -> float:
        return math.inf if self.scale > 0 else 0.0

    def power_sum(self, alpha: float) -> float:
        if self.scale == 0:
            return 0.0
        if alpha < 1.0:
            return math.inf
        return self.scale**alpha * _log_power_zeta(self.start, float(alpha))

    def _remaining(self, n: int) -> float:
        # integral estimate, accurate to O(1/(x log^2 x)) which is ample here
        a = float(self.start + n)
        return self.scale * (1.0 / math.log(a) + 0.5 / (a * math.log(a) ** 2))

    def count_until(self, tol: float) -> int:
        if self._remaining(MAX_TAIL_TERMS) > tol:
            raise TailNotSummable(
                "log-power tail needs more than 1e7 terms for the requested tolerance",
                tolerance=tol,
            )
        lo, hi = 0, MAX_TAIL_TERMS
        while lo < hi:
            mid = (lo + hi) // 2
            if self._remaining(mid) <= tol:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def to_dict(self) -> dict:
        return {"kind": "log-power", "scale": self.scale, "start": self.start}


Tail = Union[GeometricTail, PoissonTail, LogPowerTail]


def tail_from_dict(d: dict) -> Tail | None:
    kind = d.get("kind", "none")
    if kind == "none":
        return None
    if kind == "geometric":
        if "log_p" in d:
            return GeometricTail(float(d["mass"]), float(d["log_p"]))
        return GeometricTail.from_first_ratio(float(d["first"]), float(d["ratio"]))
    if kind == "poisson":
        return PoissonTail(float(d["mean"]), int(d["start"]))
    if kind == "log-power":
        if "mass" in d:
            return LogPowerTail.with_mass(float(d["mass"]), int(d["start"]))
        return LogPowerTail(float(d["scale"]), int(d["start"]))
    raise ValueError(f"unknown tail kind {kind!r}")


# --------------------------------------------------------------------------
# Pmf
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Pmf:
    masses: np.ndarray
    labels: tuple | None = None
    tail: Tail | None = None

    def __post_init__(self):
        m = np.array(self.masses, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return len(self.masses)

    def __repr__(self) -> str:
        tail = f", tail={self.tail!r}" if self.tail is not None else ""
        return f"Pmf({np.array2string(self.masses, precision=6)}{tail})"

    @property
    def tail_free(self) -> bool:
        return self.tail is None

    @property
    def tail_mass(self) -> float:
        return 0.0 if self.tail is None else self.tail.total()

    def total(self) -> float:
        return math.fsum(self.masses.tolist()) + self.tail_mass

    def support_size(self) -> int:
        return int(np.count_nonzero(self.masses))

    def expand(self, n: int) -> "Pmf":
        """Move the first n tail terms into the explicit part."""
        if self.tail is None or n <= 0:
            return self
        masses = np.concatenate([self.masses, self.tail.head(n)])
        labels = None
        if self.labels is not None:
            labels = self.labels + tuple(f"tail{i}" for i in range(n))
        return Pmf(masses, labels, self.tail.advance(n))

    def to_dict(self) -> dict:
        out: dict = {"masses": self.masses.tolist()}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        if self.tail is not None:
            out["tail"] = self.tail.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict, renormalize: bool = False) -> "Pmf":
        tail = tail_from_dict(d["tail"]) if d.get("tail") else None
        return validate(d["masses"], d.get("labels"), tail, renormalize=renormalize)


def validate(
    masses: Sequence[float],
    labels: Sequence | None = None,
    tail: Tail | None = None,
    renormalize: bool = False,
) -> Pmf:
    """Check masses and build a :class:`Pmf`.

    Raises:
        NegativeMass: some mass is below zero.
        MassSumMismatch: masses plus tail deviate from one by more than 1e-9
            and ``renormalize`` is false.
    """
    m = np.asarray(masses, dtype=float).ravel()
    if not np.all(np.isfinite(m)):
        raise ValueError("masses must be finite reals")
    if np.any(m < 0):
        idx = int(np.nonzero(m < 0)[0][0])
        raise NegativeMass(f"mass at index {idx} is negative", index=idx)
    if labels is not None and len(labels) != len(m):
        raise ValueError("labels must align with masses")
    tail_mass = 0.0 if tail is None else tail.total()
    if tail_mass > 1.0 + SUM_TOL:
        raise MassSumMismatch("tail mass exceeds one", total=tail_mass)
    total = math.fsum(m.tolist()) + tail_mass
    if abs(total - 1.0) > SUM_TOL:
        if not renormalize:
            raise MassSumMismatch(f"masses sum to {total!r}", total=total)
        explicit = total - tail_mass
        if explicit <= 0:
            raise MassSumMismatch("cannot renormalize an empty explicit part", total=total)
        m = m * ((1.0 - tail_mass) / explicit)
    return Pmf(m, None if labels is None else tuple(labels), tail)


def decreasing_rearrangement(P: Pmf) -> Pmf:
    """Sort the explicit masses into nonincreasing order.

    The sort is stable, so equal masses keep their original relative order.
    A tail is kept only if it is itself nonincreasing and starts no higher
    than the smallest explicit mass.
    """
    if P.tail is not None:
        if not P.tail.is_decreasing() or (
            len(P) and P.tail.first_mass() > float(P.masses.min())
        ):
            raise UnsortableTail("tail interleaves with the explicit masses; truncate first")
    order = np.argsort(-P.masses, kind="stable")
    labels = None if P.labels is None else tuple(P.labels[i] for i in order)
    return Pmf(P.masses[order], labels, P.tail)


def sorted_head(P: Pmf, n: int) -> tuple[np.ndarray, Tail | None]:
    """Nonincreasing masses with at least n entries, plus the tail that follows."""
    Q = decreasing_rearrangement(P)
    if len(Q) < n:
        if Q.tail is not None:
            Q = Q.expand(n - len(Q))
        else:
            return np.concatenate([Q.masses, np.zeros(n - len(Q))]), None
    return np.array(Q.masses), Q.tail


def truncate(P: Pmf, mass_tolerance: float, renormalize: bool = False) -> tuple[Pmf, float]:
    """Replace the tail by explicit masses, dropping at most ``mass_tolerance``.

    Returns the tail-free Pmf and the omitted mass.

    Raises:
        TailNotSummable: the tail would need more than 1e7 explicit terms.
    """
    if mass_tolerance <= 0:
        raise ValueError("mass_tolerance must be positive")
    if P.tail is None:
        return P, 0.0
    n = P.tail.count_until(mass_tolerance)
    if n > MAX_TAIL_TERMS:
        raise TailNotSummable("tail needs more than 1e7 terms", tolerance=mass_tolerance)
    Q = P.expand(n)
    omitted = Q.tail.total() if Q.tail is not None else 0.0
    masses = np.array(Q.masses)
    if renormalize and omitted > 0:
        masses = masses / math.fsum(masses.tolist())
    return Pmf(masses, Q.labels), omitted


def _tail_free(P: Pmf) -> np.ndarray:
    if P.tail is None:
        return np.array(P.masses)
    return np.array(truncate(P, 1e-15)[0].masses)


@dataclass(frozen=True)
class MajorizationVerdict:
    holds: bool
    witness: int | None = None

    def __bool__(self) -> bool:
        return self.holds


def majorizes(R: Pmf, P: Pmf, tol: float = PREFIX_TOL) -> MajorizationVerdict:
    """Whether R majorizes P, i.e. every prefix sum of R sorted dominates P's.

    The witness is the first 1-based prefix length at which R falls short.
    """
    r = np.sort(_tail_free(R))[::-1]
    p = np.sort(_tail_free(P))[::-1]
    n = max(len(r), len(p))
    r = np.concatenate([r, np.zeros(n - len(r))])
    p = np.concatenate([p, np.zeros(n - len(p))])
    cr = kahan_prefix_sums(r)[1:]
    cp = kahan_prefix_sums(p)[1:]
    bad = np.nonzero(cr < cp - tol)[0]
    if bad.size:
        return MajorizationVerdict(False, int(bad[0]) + 1)
    return MajorizationVerdict(True)


def variational_distance(P: Pmf, Q: Pmf) -> float:
    """Half the l1 distance between two aligned mass vectors."""
    p = _tail_free(P)
    q = _tail_free(Q)
    n = max(len(p), len(q))
    p = np.concatenate([p, np.zeros(n - len(p))])
    q = np.concatenate([q, np.zeros(n - len(q))])
    return 0.5 * math.fsum(np.abs(p - q).tolist())


def as_pmf(x) -> Pmf:
    """Accept a Pmf or a plain sequence of masses."""
    return x if isinstance(x, Pmf) else validate(x)
