"""Fano-type distributions and the bound they induce.

Given a marginal Q, a list size L and an error budget eps, the extremal
marginal keeps the largest masses of Q, raises positions J..L to a common
level V so that the top-L mass is exactly 1 - eps, and lowers positions
L+1..K to a common level W so that total mass is preserved. Evaluating a
concave symmetric functional at this distribution bounds the conditional
quantity h_phi(X|Y) of every joint with marginal Q and list error <= eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import (
    BadZCardinality,
    DeltaOutOfRange,
    EpsOutOfRange,
    Infeasible,
    KInfinite,
    NonConcavePhi,
    PhiInfinite,
    TailNotSummable,
    UnsupportedTail,
)
from .errprob import EPS_TOL, SystemSpec, check_eps, marginal_list_error
from .measures import Measure, PhiFunctional, phi_eval, shannon_entropy
from .pmf import (
    MAX_TAIL_TERMS,
    Pmf,
    decreasing_rearrangement,
    eta,
    kahan_prefix_sums,
    sorted_head,
    validate,
)

GRID = 12  # decimal places used for tie-robust index comparisons


def _le(a, b):
    return np.round(a, GRID) <= np.round(b, GRID)


@dataclass(frozen=True)
class FanoIndices:
    """Where the Fano construction levels masses.

    Positions J..L (1-based, in decreasing order of Q) get mass V and
    positions L+1..K get mass W. ``K`` is ``None`` when it is infinite, which
    only happens for eps = 0 on an infinite support. When K = L no position
    is lowered and W is the sentinel -1.
    """

    J: int
    K: int | None
    V: float
    W: float

    @property
    def k_infinite(self) -> bool:
        return self.K is None

    def to_dict(self) -> dict:
        return {"J": self.J, "K": "inf" if self.K is None else self.K, "V": self.V, "W": self.W}


def _levels(qs: np.ndarray, S: np.ndarray, L: int, eps: float, k_max: int):
    """Compute (J, K, V, W) on sorted masses ``qs`` with prefix sums ``S``.

    The last element is False when the lowering run reaches ``k_max``
    without terminating; callers decide whether that means "expand further"
    or "cap here".
    """
    target = 1.0 - eps
    J = L
    for j in range(1, L + 1):
        if _le(qs[j - 1], (target - S[j - 1]) / (L - j + 1)):
            J = j
            break
    V = (target - S[J - 1]) / (L - J + 1)
    if k_max <= L:
        return J, L, V, -1.0, True
    ks = np.arange(L + 1, k_max + 1)
    W = (S[ks] - target) / (ks - L)
    ok = _le(W, qs[ks - 1])
    bad = np.nonzero(~ok)[0]
    if bad.size:
        K = L + int(bad[0])
        stopped = True
    else:
        K = k_max
        stopped = False
    Wk = -1.0 if K == L else float((S[K] - target) / (K - L))
    return J, K, float(V), Wk, stopped


def _assemble(qs: np.ndarray, J: int, K: int, L: int, V: float, W: float) -> np.ndarray:
    p = np.array(qs, dtype=float)
    p[J - 1 : L] = V
    if K > L:
        p[L:K] = W
    return p


def fano_type0(M: int, L: int, eps: float) -> Pmf:
    """Two-level distribution: (1-eps)/L on L symbols and eps/(M-L) on the next M-L.

    Raises:
        EpsOutOfRange: eps is outside [0, 1 - L/M].
    """
    if not (1 <= L < M):
        raise ValueError("need 1 <= L < M")
    hi = 1.0 - L / M
    if not (0.0 <= eps <= hi + EPS_TOL):
        raise EpsOutOfRange(f"eps must lie in [0, {hi!r}]", range=[0.0, hi])
    return Pmf(np.concatenate([np.full(L, (1.0 - eps) / L), np.full(M - L, eps / (M - L))]))


def _type1_tailed(Q: Pmf, L: int, eps: float) -> tuple[Pmf, FanoIndices]:
    n = max(2 * L, 64, len(Q))
    while True:
        head, tail = sorted_head(Q, n)
        S = kahan_prefix_sums(head)
        if eps == 0.0:
            J, _, V, _, _ = _levels(head, S, L, eps, L)
            p = np.concatenate([head[: J - 1], np.full(L - J + 1, V)])
            return Pmf(p), FanoIndices(J, None, V, 0.0)
        J, K, V, W, stopped = _levels(head, S, L, eps, len(head))
        if stopped:
            return Pmf(_assemble(head, J, K, L, V, W), None, tail), FanoIndices(J, K, V, W)
        if n >= MAX_TAIL_TERMS:
            raise TailNotSummable("lowering run did not terminate within 1e7 terms")
        n = min(4 * n, MAX_TAIL_TERMS)


def fano_type1(Q, L: int, eps: float) -> tuple[Pmf, FanoIndices]:
    """Fano distribution for a countably infinite Y.

    The output is nonincreasing, majorizes Q, and has list error exactly eps.

    Raises:
        Infeasible: eps lies outside [0, marginal list error of Q].
    """
    Q = _pmf(Q)
    check_eps(Q, L, eps, None)
    hi = marginal_list_error(Q, L)
    eps = float(min(max(eps, 0.0), hi))
    if Q.tail is not None:
        if eps >= hi - EPS_TOL:
            # no slack: Q itself is extremal, and a slowly decaying tail would
            # otherwise tie at the comparison grid for ever
            head, tail = sorted_head(Q, L + 1)
            J, K, V, W, _ = _levels(head, kahan_prefix_sums(head), L, hi, L + 1)
            return Pmf(head, None, tail), FanoIndices(J, K, V, W)
        return _type1_tailed(Q, L, eps)
    qs, _ = sorted_head(Q, L + 1)
    S = kahan_prefix_sums(qs)
    k_max = max(L, int(np.count_nonzero(qs)))
    J, K, V, W, _ = _levels(qs, S, L, eps, k_max)
    # positions past the support stay at zero, so the padding can go
    return Pmf(_assemble(qs, J, K, L, V, W)[: len(Q)]), FanoIndices(J, K, V, W)


def fano_type2(Q, L: int, eps: float, N: int) -> tuple[Pmf, FanoIndices]:
    """Fano distribution for a Y with N elements; lowering stops at position N*L.

    Unlike the countable case the output need not be nonincreasing.

    Raises:
        Infeasible: eps lies outside the range attainable with N outputs.
    """
    Q = _pmf(Q)
    N = int(N)
    lo, hi = check_eps(Q, L, eps, N)
    eps = float(min(max(eps, lo), hi))
    qs, tail = sorted_head(Q, N * L + 1)
    S = kahan_prefix_sums(qs)
    cap = N * L
    if tail is None:
        cap = min(cap, max(L, int(np.count_nonzero(qs))))
    J, K, V, W, _ = _levels(qs, S, L, eps, cap)
    p = _assemble(qs, J, K, L, V, W)
    if tail is None:
        p = p[: len(Q)]
    return Pmf(p, None, tail), FanoIndices(J, K, V, W)


def fano_type3(Q, L: int, eps: float, N: int, Z: Iterable[int]) -> tuple[Pmf, FanoIndices]:
    """Fano distribution when every list must be drawn from the symbol set Z.

    Z holds 0-based positions into Q's explicit masses and must have exactly
    N*L elements. Masses outside Z are left untouched; inside Z they are
    ranked by decreasing Q (ties by position) and levelled as in the
    unrestricted case.

    Raises:
        BadZCardinality: ``len(Z) != N*L``.
        Infeasible: eps lies outside [1 - Q(Z), 1 - top-L mass within Z].
    """
    Q = _pmf(Q)
    Z = list(dict.fromkeys(int(z) for z in Z))
    if len(Z) != N * L:
        raise BadZCardinality(f"|Z| = {len(Z)} but N*L = {N * L}", size=len(Z), required=N * L)
    if min(Z) < 0 or max(Z) >= len(Q):
        raise ValueError("Z refers to symbols outside the explicit support")
    q = np.array(Q.masses)
    beta = sorted(Z, key=lambda z: (-q[z], z))
    qz = q[beta]
    S = kahan_prefix_sums(qz)
    lo = max(0.0, 1.0 - S[-1])
    hi = 1.0 - S[L]
    if not (lo - EPS_TOL <= eps <= hi + EPS_TOL):
        raise Infeasible(eps, lo, hi)
    eps = float(min(max(eps, lo), hi))
    J, K, V, W, _ = _levels(qz, S, L, eps, N * L)
    p = q.copy()
    p[beta] = _assemble(qz, J, K, L, V, W)
    return Pmf(p, Q.labels, Q.tail), FanoIndices(J, K, V, W)


def spade_threshold(J: int, K: int, L: int) -> int:
    """min{C(K-J+1, L-J+1), (K-J)^2 + 1}: outputs needed to realise the Fano distribution."""
    return min(math.comb(K - J + 1, L - J + 1), (K - J) ** 2 + 1)


def spade_min_y(Q, L: int, eps: float) -> int:
    """Smallest |Y| for which the countable-Y bound is attained.

    Raises:
        KInfinite: the lowering run is infinite (eps = 0 on an infinite support).
    """
    _, idx = fano_type1(Q, L, eps)
    if idx.K is None:
        raise KInfinite("K is infinite; attainment needs J = L and a countably infinite Y")
    return spade_threshold(idx.J, idx.K, L)


# --------------------------------------------------------------------------
# Finiteness guard and the bound itself
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FinitenessVerdict:
    finite: bool
    value: float

    def __bool__(self) -> bool:
        return self.finite


def phi_finiteness_guard(phi: PhiFunctional, Q) -> FinitenessVerdict:
    """Decide whether phi(Q) is finite, using the tail's closed form.

    A separable phi that is infinite at Q stays infinite at every Fano
    distribution with eps > 0, so no finite bound exists in that case.
    """
    if not phi.separable:
        raise ValueError(f"{phi.describe()} is not separable")
    v = phi_eval(phi, _pmf(Q))
    return FinitenessVerdict(math.isfinite(v), v)


@dataclass(frozen=True)
class BoundReport:
    value: float
    measure: str
    upper: bool
    phi_value: float
    distribution: Pmf
    indices: FanoIndices
    sharp: tuple[str, ...]
    closed_form_check: float | None
    y_card: int | None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "measure": self.measure,
            "direction": "upper" if self.upper else "lower",
            "phi_value": self.phi_value,
            "distribution": self.distribution.to_dict(),
            "indices": self.indices.to_dict(),
            "sharp": list(self.sharp),
            "closed_form_check": self.closed_form_check,
            "y_card": "inf" if self.y_card is None else self.y_card,
        }


def _closed_form(measure: Measure, phi: PhiFunctional, qs_head, tail, idx: FanoIndices, L):
    """Evaluate the bound piecewise from the index data, without building the distribution."""
    J, K, V, W = idx.J, idx.K, idx.V, idx.W
    k = L if K is None else K
    rest = np.concatenate([qs_head[: J - 1], qs_head[k:]]) if K is not None else qs_head[: J - 1]
    pieces = [(V, L - J + 1), (W, k - L)]
    if phi.kind == "shannon":
        total = math.fsum(eta(rest).tolist()) + sum(m * float(eta(np.array([v]))[0]) for v, m in pieces)
        if tail is not None and K is not None:
            total += tail.entropy()
        return total
    if phi.kind in ("lp-norm", "lp-norm-power"):
        a = phi.alpha
        s = math.fsum(np.power(rest[rest > 0], a).tolist())
        s += sum(m * v**a for v, m in pieces if m > 0 and v > 0)
        if tail is not None and K is not None:
            s += tail.power_sum(a)
        if measure.is_renyi:
            return math.log(s) / (1.0 - a)
        return s ** (1.0 / a) if phi.kind == "lp-norm" else s
    return None


def _sharp_labels(Q: Pmf, L: int, eps: float, y_card, idx: FanoIndices) -> tuple[str, ...]:
    out = []
    hi = marginal_list_error(Q, L)
    interior = 0.0 < eps < hi - EPS_TOL
    if abs(eps - hi) <= EPS_TOL:
        out.append("eps-at-upper-endpoint")
    if y_card is None:
        if idx.K is not None and interior:
            out.append("enough-outputs-interior-eps")
        if idx.K is not None and Q.tail is None:
            out.append("enough-outputs-finite-support")
        if idx.J == L:
            out.append("J-equals-L-countable-Y")
    elif idx.K is not None and y_card >= spade_threshold(idx.J, idx.K, L):
        out.append("enough-outputs")
    return tuple(out)


def bound(sys: SystemSpec, measure="shannon") -> BoundReport:
    """Evaluate the Fano-type bound for a system and a measure.

    ``measure`` may be a selector string (``"shannon"``, ``"arimoto:2"``, ...),
    a :class:`Measure`, or a bare :class:`PhiFunctional`. Finite Y uses the
    type-2 distribution and countable Y the type-1 distribution.

    For concave phi the value is an upper bound on h_phi(X|Y); for convex phi
    it is a lower bound, and the Renyi maps turn that back into an upper
    bound on the Arimoto and Hayashi entropies.

    Raises:
        Infeasible: eps outside the attainable range.
        NonConcavePhi: phi is neither concave nor convex.
        PhiInfinite: phi(Q) is infinite and eps > 0, so no finite bound exists.
    """
    Q, L, eps, N = sys.q, sys.L, float(sys.eps), sys.y_card
    if isinstance(measure, PhiFunctional):
        phi = measure
        m = _measure_for_phi(phi)
    else:
        m = measure if isinstance(measure, Measure) else Measure.parse(measure)
        M = None
        if m.name in ("ktv", "dbar"):
            if Q.tail is not None:
                raise UnsupportedTail("ktv needs a finite alphabet; truncate the tail first")
            M = max(len(Q), 2)
        phi = m.phi(M)
    if not (phi.concave or phi.convex):
        raise NonConcavePhi(f"{phi.describe()} is neither concave nor convex")
    check_eps(Q, L, eps, N)
    if Q.tail is not None and eps > 0:
        if not phi.separable:
            raise UnsupportedTail(f"{phi.describe()} has no closed form on a tail")
        verdict = phi_finiteness_guard(phi, Q)
        if not verdict.finite and phi.concave:
            raise PhiInfinite(
                f"{phi.describe()} is infinite at Q, so no finite bound exists for eps > 0"
            )
    if N is None:
        P, idx = fano_type1(Q, L, eps)
    else:
        P, idx = fano_type2(Q, L, eps, N)
    phi_value = phi_eval(phi, P)
    value = m.from_phi(phi_value)
    qs, tail = sorted_head(Q, max(L, (idx.K or L)) + 1)
    closed = _closed_form(m, phi, qs, tail, idx, L)
    return BoundReport(
        value=value,
        measure=str(m),
        upper=phi.concave or m.is_renyi,
        phi_value=phi_value,
        distribution=P,
        indices=idx,
        sharp=_sharp_labels(Q, L, eps, N, idx),
        closed_form_check=closed,
        y_card=N,
    )


def _measure_for_phi(phi: PhiFunctional) -> Measure:
    if phi.kind == "shannon":
        return Measure("shannon")
    if phi.kind == "lp-norm":
        return Measure("lp", phi.alpha)
    if phi.kind == "one-minus-lp2-squared":
        return Measure("quadratic")
    if phi.kind == "dbar":
        return Measure("dbar")
    return _PowerMeasure("lp-power", phi.alpha)


@dataclass(frozen=True)
class _PowerMeasure(Measure):
    """The raw power sum, reachable only through a bare PhiFunctional."""

    def phi(self, M=None) -> PhiFunctional:
        return PhiFunctional.lp_power(self.alpha)

    def __str__(self) -> str:
        return f"lp-power:{self.alpha:g}"


# --------------------------------------------------------------------------
# Minimum entropy over a total-variation ball
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Truncation:
    distribution: Pmf
    entropy: float
    index: int | None


def ho_yeung_truncation(Q, delta: float) -> Truncation:
    """Least-entropy distribution within variational distance delta of Q.

    Moves delta of mass onto the largest symbol, taken from the smallest
    ones; ``index`` is the last symbol that keeps some mass (``None`` when
    delta = 0 and nothing moves).

    Raises:
        DeltaOutOfRange: delta is outside [0, 1 - max Q].
    """
    Q = _pmf(Q)
    head, _ = sorted_head(Q, 1)
    top = float(head[0])
    if not (0.0 <= delta <= 1.0 - top + EPS_TOL):
        raise DeltaOutOfRange(f"delta must lie in [0, {1.0 - top!r}]", range=[0.0, 1.0 - top])
    if delta == 0.0:
        P = decreasing_rearrangement(Q)
        return Truncation(P, shannon_entropy(P), None)
    P = Q
    if P.tail is not None:
        n = max(len(P), 16)
        while P.tail is not None and P.tail.total() >= delta:
            P = Q.expand(n)
            n *= 4
            if n > MAX_TAIL_TERMS:
                raise TailNotSummable("tail too heavy for the requested delta")
    qs, tail = sorted_head(P, 1)
    tail_mass = 0.0 if tail is None else tail.total()
    S = kahan_prefix_sums(qs)
    suffix = (S[-1] - S[:-1]) + tail_mass  # suffix[b-1] = mass of positions >= b
    B = int(np.nonzero(_le(delta, suffix))[0][-1]) + 1
    s = np.zeros(B)
    s[: B - 1] = qs[: B - 1]
    s[0] = qs[0] + delta
    if B > 1:
        s[B - 1] = suffix[B - 1] - delta
    else:
        s[0] = 1.0
    out = Pmf(np.maximum(s, 0.0))
    return Truncation(out, shannon_entropy(out), B)


def _pmf(Q) -> Pmf:
    return Q if isinstance(Q, Pmf) else validate(Q)
