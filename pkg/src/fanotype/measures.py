"""Symmetric functionals of a distribution and their conditional averages.

A functional phi is applied to each conditional distribution P_{X|Y=y} and
averaged over y; Shannon entropy, Arimoto and Hayashi conditional Renyi
entropies, the Bhattacharyya parameter, quadratic entropy and the pairwise
total-variation quantity K(X|Y) are all of this form (up to a monotone map).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import UnsupportedTail
from .pmf import SUM_TOL, Pmf, eta, validate

KINDS = ("shannon", "lp-norm", "lp-norm-power", "one-minus-lp2-squared", "dbar")


@dataclass(frozen=True)
class PhiFunctional:
    kind: str
    alpha: float | None = None
    M: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional {self.kind!r}")
        if self.kind in ("lp-norm", "lp-norm-power"):
            if self.alpha is None or not self.alpha > 0:
                raise ValueError("alpha must be positive")
        if self.kind == "dbar" and (self.M is None or self.M < 2):
            raise ValueError("dbar needs a finite alphabet size M >= 2")

    @classmethod
    def shannon(cls):
        return cls("shannon")

    @classmethod
    def lp_norm(cls, alpha):
        return cls("lp-norm", float(alpha))

    @classmethod
    def lp_power(cls, alpha):
        return cls("lp-norm-power", float(alpha))

    @classmethod
    def quadratic(cls):
        return cls("one-minus-lp2-squared")

    @classmethod
    def dbar(cls, M):
        return cls("dbar", M=int(M))

    @property
    def concave(self) -> bool:
        if self.kind in ("shannon", "one-minus-lp2-squared"):
            return True
        if self.kind == "dbar":
            return False
        return self.alpha <= 1.0

    @property
    def convex(self) -> bool:
        if self.kind == "dbar":
            return True
        if self.kind in ("lp-norm", "lp-norm-power"):
            return self.alpha >= 1.0
        return False

    @property
    def strictly_concave(self) -> bool:
        if self.kind in ("shannon", "one-minus-lp2-squared"):
            return True
        return self.kind in ("lp-norm", "lp-norm-power") and self.alpha < 1.0

    @property
    def separable(self) -> bool:
        """Whether phi(P) = g2(sum_x g1(P(x)))."""
        return self.kind != "dbar"

    def describe(self) -> str:
        if self.alpha is not None:
            return f"{self.kind}({self.alpha:g})"
        if self.M is not None:
            return f"{self.kind}({self.M})"
        return self.kind


# --------------------------------------------------------------------------
# Unconditional quantities
# --------------------------------------------------------------------------


def _power_sum(P: Pmf, alpha: float) -> float:
    m = P.masses[P.masses > 0]
    s = math.fsum(np.power(m, alpha).tolist())
    if P.tail is not None:
        s += P.tail.power_sum(alpha)
    return s


def shannon_entropy(P) -> float:
    """Shannon entropy in nats; ``math.inf`` when the tail carries infinite entropy."""
    P = _pmf(P)
    h = math.fsum(eta(P.masses).tolist())
    if P.tail is not None:
        h += P.tail.entropy()
    return h


def renyi_entropy(P, alpha: float) -> float:
    P = _pmf(P)
    if alpha == 1:
        return shannon_entropy(P)
    s = _power_sum(P, alpha)
    if math.isinf(s):
        return math.inf
    return math.log(s) / (1.0 - alpha)


def lp_norm(P, alpha: float) -> float:
    P = _pmf(P)
    s = _power_sum(P, alpha)
    return math.inf if math.isinf(s) else s ** (1.0 / alpha)


def binary_entropy(u: float) -> float:
    if u <= 0.0 or u >= 1.0:
        return 0.0
    return -u * math.log(u) - (1.0 - u) * math.log1p(-u)


def binary_divergence(a: float, b: float) -> float:
    def term(x, y):
        if x == 0.0:
            return 0.0
        if y == 0.0:
            return math.inf
        return x * math.log(x / y)

    return term(a, b) + term(1.0 - a, 1.0 - b)


def dbar_value(p: np.ndarray, M: int) -> float:
    """Mean pairwise absolute difference, normalised by 2(M-1).

    Uses the sorted identity sum_{i,j}|p_i - p_j| = 2 sum_i (2i - M - 1) p_(i)
    with p sorted ascending and i counted from 1.
    """
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    if len(p) > M:
        raise ValueError(f"distribution has more than M={M} nonzero symbols")
    p = np.concatenate([p, np.zeros(M - len(p))])
    asc = np.sort(p)
    i = np.arange(1, M + 1)
    return 2.0 * math.fsum(((2 * i - M - 1) * asc).tolist()) / (2.0 * (M - 1))


def phi_array(phi: PhiFunctional, p: np.ndarray) -> float:
    """phi on a plain tail-free mass vector."""
    p = np.asarray(p, dtype=float)
    k = phi.kind
    if k == "shannon":
        return math.fsum(eta(p).tolist())
    if k == "lp-norm-power":
        return math.fsum(np.power(p[p > 0], phi.alpha).tolist())
    if k == "lp-norm":
        return math.fsum(np.power(p[p > 0], phi.alpha).tolist()) ** (1.0 / phi.alpha)
    if k == "one-minus-lp2-squared":
        return 1.0 - math.fsum((p * p).tolist())
    return dbar_value(p, phi.M)


def phi_eval(phi: PhiFunctional, P) -> float:
    """phi(P), including the closed-form contribution of a tail if there is one.

    Raises:
        UnsupportedTail: phi is not separable and P has a tail.
    """
    P = _pmf(P)
    if P.tail is None:
        return phi_array(phi, P.masses)
    k = phi.kind
    if k == "shannon":
        return shannon_entropy(P)
    if k == "lp-norm-power":
        return _power_sum(P, phi.alpha)
    if k == "lp-norm":
        return lp_norm(P, phi.alpha)
    if k == "one-minus-lp2-squared":
        return 1.0 - _power_sum(P, 2.0)
    raise UnsupportedTail(f"{phi.describe()} has no closed form on a {P.tail.kind} tail")


# --------------------------------------------------------------------------
# Joint distributions and conditional quantities
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JointDist:
    """A finite joint distribution given as P_Y and the rows P_{X|Y=y}."""

    py: np.ndarray
    cond: np.ndarray

    def __post_init__(self):
        py = np.array(self.py, dtype=float).ravel()
        cond = np.atleast_2d(np.array(self.cond, dtype=float))
        if cond.shape[0] != len(py):
            raise ValueError("need one conditional per output symbol")
        for arr in (py, cond):
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError("joint masses must be finite and nonnegative")
        if abs(math.fsum(py.tolist()) - 1.0) > SUM_TOL:
            raise ValueError("P_Y must sum to one")
        rows = np.array([math.fsum(r) for r in cond.tolist()])
        if np.any(np.abs(rows - 1.0) > SUM_TOL):
            raise ValueError("every conditional must sum to one")
        py.setflags(write=False)
        cond.setflags(write=False)
        object.__setattr__(self, "py", py)
        object.__setattr__(self, "cond", cond)

    @property
    def n_y(self) -> int:
        return len(self.py)

    @property
    def n_x(self) -> int:
        return self.cond.shape[1]

    @property
    def conditionals(self) -> tuple[Pmf, ...]:
        return tuple(Pmf(r) for r in self.cond)

    def joint(self) -> np.ndarray:
        """Matrix of P(x, y) with x along rows."""
        return (self.cond * self.py[:, None]).T

    def marginal(self) -> Pmf:
        m = np.array([math.fsum(c) for c in (self.cond * self.py[:, None]).T.tolist()])
        return Pmf(m)

    def to_dict(self) -> dict:
        return {"py": self.py.tolist(), "conditionals": self.cond.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "JointDist":
        rows = d["conditionals"]
        width = max(len(r) for r in rows)
        cond = [list(r) + [0.0] * (width - len(r)) for r in rows]
        return cls(np.array(d["py"], dtype=float), np.array(cond, dtype=float))

    @classmethod
    def independent(cls, q) -> "JointDist":
        return cls(np.array([1.0]), np.array([np.asarray(_pmf(q).masses)]))


def conditional_measure(J: JointDist, phi: PhiFunctional) -> float:
    """h_phi(X|Y) = sum_y P_Y(y) phi(P_{X|Y=y})."""
    vals = [phi_array(phi, row) for row in J.cond]
    return math.fsum((w * v) for w, v in zip(J.py.tolist(), vals) if w > 0)


def arimoto(J: JointDist, alpha: float) -> float:
    """Arimoto conditional Renyi entropy: alpha/(1-alpha) log E ||P_{X|Y}||_alpha."""
    if alpha == 1:
        return conditional_measure(J, PhiFunctional.shannon())
    e = conditional_measure(J, PhiFunctional.lp_norm(alpha))
    return alpha / (1.0 - alpha) * math.log(e)


def hayashi(J: JointDist, alpha: float) -> float:
    """Hayashi conditional Renyi entropy: 1/(1-alpha) log E ||P_{X|Y}||_alpha^alpha."""
    if alpha == 1:
        return conditional_measure(J, PhiFunctional.shannon())
    e = conditional_measure(J, PhiFunctional.lp_power(alpha))
    return math.log(e) / (1.0 - alpha)


def bhattacharyya(J: JointDist) -> float:
    """Unnormalised Bhattacharyya parameter, summed over all ordered symbol pairs."""
    joint = J.joint()
    total = 0.0
    for y, w in enumerate(J.py.tolist()):
        if w <= 0:
            continue
        col = joint[:, y]
        total += float(np.sum(np.sqrt(np.outer(col, col))))
    return total


def quadratic(J: JointDist) -> float:
    """Conditional quadratic entropy E[1 - sum_x P_{X|Y}(x)^2]."""
    return math.fsum(
        w * (1.0 - float(np.dot(r, r))) for w, r in zip(J.py.tolist(), J.cond) if w > 0
    )


def ktv(J: JointDist) -> float:
    """E over y of the normalised pairwise l1 spread of P_{X|Y=y}, by direct double sum."""
    M = J.n_x
    out = 0.0
    for w, r in zip(J.py.tolist(), J.cond):
        if w > 0:
            out += w * float(np.abs(r[:, None] - r[None, :]).sum()) / (2.0 * (M - 1))
    return out


# --------------------------------------------------------------------------
# Named measures, as used by the bound and the command line
# --------------------------------------------------------------------------

MEASURE_NAMES = (
    "shannon",
    "renyi",
    "arimoto",
    "hayashi",
    "bhattacharyya",
    "quadratic",
    "ktv",
    "lp",
    "dbar",
)
_NEEDS_ALPHA = ("renyi", "arimoto", "hayashi", "lp")


@dataclass(frozen=True)
class Measure:
    """A named information measure: a functional phi plus a monotone map of its value."""

    name: str
    alpha: float | None = None

    @classmethod
    def parse(cls, text: str) -> "Measure":
        name, _, arg = text.strip().partition(":")
        if name not in MEASURE_NAMES:
            raise ValueError(f"unknown measure {name!r}")
        if name in _NEEDS_ALPHA:
            if not arg:
                raise ValueError(f"measure {name!r} needs an order, e.g. {name}:2")
            alpha = float(Fraction(arg))
            if alpha <= 0:
                raise ValueError("order must be positive")
            return cls(name, alpha)
        if arg:
            raise ValueError(f"measure {name!r} takes no order")
        return cls(name)

    def __str__(self) -> str:
        return self.name if self.alpha is None else f"{self.name}:{self.alpha:g}"

    @property
    def is_renyi(self) -> bool:
        return self.name in ("renyi", "arimoto", "hayashi") and self.alpha != 1

    def phi(self, M: int | None = None) -> PhiFunctional:
        n = self.name
        if n == "shannon" or (n in ("renyi", "arimoto", "hayashi") and self.alpha == 1):
            return PhiFunctional.shannon()
        if n in ("renyi", "arimoto"):
            return PhiFunctional.lp_norm(self.alpha)
        if n == "hayashi":
            return PhiFunctional.lp_power(self.alpha)
        if n == "bhattacharyya":
            return PhiFunctional.lp_norm(0.5)
        if n == "quadratic":
            return PhiFunctional.quadratic()
        if n == "lp":
            return PhiFunctional.lp_norm(self.alpha)
        if M is None:
            raise ValueError(f"measure {n!r} needs a finite alphabet size")
        return PhiFunctional.dbar(M)

    def from_phi(self, v: float) -> float:
        """Map the (averaged) phi value to the measure's own scale."""
        if not self.is_renyi:
            return v
        a = self.alpha
        if math.isinf(v):
            return math.inf if a < 1 else -math.inf
        if self.name == "hayashi":
            return math.log(v) / (1.0 - a)
        return a / (1.0 - a) * math.log(v)

    def upper_bounded(self, M: int | None = None) -> bool:
        """True when the Fano-type bound is an upper bound on this measure.

        Concave phi gives a supremum directly. Convex phi gives an infimum,
        which the Renyi maps turn back into an upper bound because they are
        decreasing for alpha > 1.
        """
        phi = self.phi(M)
        if phi.concave:
            return True
        return self.is_renyi

    def of_pmf(self, P) -> float:
        P = _pmf(P)
        M = max(len(P), 2)
        if self.is_renyi:
            return renyi_entropy(P, self.alpha)
        return phi_eval(self.phi(M), P)

    def of_joint(self, J: JointDist) -> float:
        n = self.name
        if n == "renyi":
            raise ValueError("renyi is unconditional; use arimoto or hayashi for a joint")
        if n == "arimoto":
            return arimoto(J, self.alpha)
        if n == "hayashi":
            return hayashi(J, self.alpha)
        if n == "bhattacharyya":
            return bhattacharyya(J)
        if n == "quadratic":
            return quadratic(J)
        if n in ("ktv", "dbar"):
            return ktv(J)
        return conditional_measure(J, self.phi(J.n_x))


def _pmf(P) -> Pmf:
    return P if isinstance(P, Pmf) else validate(P)
