"""Minimum list-decoding error probabilities and the range they can take.

With list size L, the optimal decoder outputs the L most likely symbols of
each conditional, so the minimum error is one minus the expected top-L mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import Infeasible, ZTooSmall
from .measures import JointDist
from .pmf import Pmf, sorted_head, validate

EPS_TOL = 1e-12


def parse_y_card(text) -> int | None:
    """Read ``finite:N``, ``N``, ``inf`` or ``infinite``; ``None`` means countably infinite."""
    if text is None:
        return None
    if isinstance(text, int):
        if text < 1:
            raise ValueError("|Y| must be at least 1")
        return text
    s = str(text).strip().lower()
    if s in ("inf", "infinite", "countably-infinite", "aleph0"):
        return None
    if s.startswith("finite:"):
        s = s[len("finite:"):]
    n = int(s)
    if n < 1:
        raise ValueError("|Y| must be at least 1")
    return n


def describe_y_card(n: int | None) -> str:
    return "inf" if n is None else f"finite:{n}"


def _top_sum(row: np.ndarray, L: int) -> float:
    if L >= len(row):
        return math.fsum(row.tolist())
    top = np.partition(row, len(row) - L)[len(row) - L:]
    return math.fsum(top.tolist())


def list_map_error(J: JointDist, L: int) -> float:
    """Minimum probability that X is missing from a list of L guesses made from Y."""
    if L < 1:
        raise ValueError("list size must be at least 1")
    hit = math.fsum(w * _top_sum(r, L) for w, r in zip(J.py.tolist(), J.cond) if w > 0)
    return max(0.0, 1.0 - hit)


def marginal_list_error(Q, L: int) -> float:
    """Error of the best blind list: one minus the L largest masses."""
    if L < 1:
        raise ValueError("list size must be at least 1")
    Q = _pmf(Q)
    head, _ = sorted_head(Q, L)
    return max(0.0, _one_minus(head[:L]))


def feasible_range(Q, L: int, y_card: int | None) -> tuple[float, float]:
    """Interval of list-decoding errors attainable by joints with X-marginal Q.

    The upper end is reached when Y is independent of X; the lower end when Y
    names one of ``y_card`` disjoint blocks of L symbols.
    """
    Q = _pmf(Q)
    hi = marginal_list_error(Q, L)
    if y_card is None:
        lo = max(0.0, 1.0 - Q.total())
    else:
        head, _ = sorted_head(Q, y_card * L)
        lo = max(0.0, _one_minus(head[: y_card * L]))
    return min(lo, hi), hi


@dataclass(frozen=True)
class SystemSpec:
    """A marginal Q, a list size L, an error budget eps and the cardinality of Y.

    ``y_card`` is an integer for finite Y and ``None`` for countably infinite Y.
    Construction fails with :class:`Infeasible` when eps cannot be attained.
    """

    q: Pmf
    L: int
    eps: float
    y_card: int | None = None

    def __post_init__(self):
        if not isinstance(self.q, Pmf):
            object.__setattr__(self, "q", validate(self.q))
        if int(self.L) != self.L or self.L < 1:
            raise ValueError("list size must be a positive integer")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "y_card", parse_y_card(self.y_card))
        check_eps(self.q, self.L, self.eps, self.y_card)

    @property
    def range(self) -> tuple[float, float]:
        return feasible_range(self.q, self.L, self.y_card)


def check_eps(Q: Pmf, L: int, eps: float, y_card: int | None) -> tuple[float, float]:
    if not (0.0 <= eps <= 1.0) or math.isnan(eps):
        lo, hi = feasible_range(Q, L, y_card)
        raise Infeasible(eps, lo, hi)
    lo, hi = feasible_range(Q, L, y_card)
    if eps < lo - EPS_TOL or eps > hi + EPS_TOL:
        raise Infeasible(eps, lo, hi)
    return lo, hi


def restricted_list_error(J: JointDist, L: int, Z: Iterable[int]) -> float:
    """List-decoding error when every guess must come from the symbol set Z (0-based)."""
    Z = sorted(set(int(z) for z in Z))
    if len(Z) < 1:
        raise ZTooSmall("the decoding range must contain at least one symbol")
    if Z[0] < 0 or Z[-1] >= J.n_x:
        raise ValueError("decoding range refers to symbols outside the support")
    sub = J.cond[:, Z]
    hit = math.fsum(w * _top_sum(r, L) for w, r in zip(J.py.tolist(), sub) if w > 0)
    return max(0.0, 1.0 - hit)


def symbolwise_error(joints: Sequence[JointDist], L: int) -> float:
    """Arithmetic mean of the per-position list-decoding errors."""
    joints = list(joints)
    if not joints:
        raise ValueError("need at least one position")
    return math.fsum(list_map_error(j, L) for j in joints) / len(joints)


def _one_minus(x: np.ndarray) -> float:
    """1 - sum(x), correctly rounded."""
    return math.fsum([1.0] + [-v for v in x.tolist()])


def _pmf(Q) -> Pmf:
    return Q if isinstance(Q, Pmf) else validate(Q)
