"""Joints that attain the Fano-type bounds.

If a distribution P majorizes Q, there is a doubly stochastic matrix M with
Q = M P (Hardy, Littlewood and Polya). Writing M as a convex combination of
permutation matrices gives a joint distribution whose conditionals are all
rearrangements of P and whose X-marginal is Q, so h_phi(X|Y) = phi(P).
Applied to the Fano distribution this realises the bound exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import ConditionsUnmet, KInfinite, NotMajorized, NumericalBreakdown, YTooSmall
from .errprob import SystemSpec, list_map_error
from .fano import bound, fano_type1, fano_type2
from .measures import JointDist, Measure, PhiFunctional, conditional_measure
from .pmf import Pmf, majorizes, validate, variational_distance

DS_TOL = 1e-12
_ZERO = 1e-15


@dataclass(frozen=True, eq=False)
class DoublyStochastic:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("doubly stochastic matrix must be square")
        if np.any(m < -DS_TOL) or np.any(m > 1 + DS_TOL):
            raise ValueError("entries must lie in [0, 1]")
        if np.any(np.abs(m.sum(0) - 1) > 1e-10) or np.any(np.abs(m.sum(1) - 1) > 1e-10):
            raise ValueError("rows and columns must sum to one")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class BirkhoffDecomp:
    """M = sum_i weights[i] * Pi_i, where Pi_i[r, perms[i][r]] = 1."""

    weights: np.ndarray
    perms: tuple[np.ndarray, ...]

    def matrix(self) -> np.ndarray:
        n = len(self.perms[0])
        out = np.zeros((n, n))
        rows = np.arange(n)
        for w, p in zip(self.weights, self.perms):
            out[rows, p] += w
        return out


def hlp_transfer(P_target, R_source) -> DoublyStochastic:
    """Doubly stochastic M with sorted(P) = M @ sorted(R), both nonincreasing.

    Built as a product of at most n-1 T-transforms. Each moves mass from the
    last position that has a surplus over the target to the first later
    position with a deficit, so majorization is kept after every step.

    Raises:
        NotMajorized: R does not majorize P.
    """
    P = _pmf(P_target)
    R = _pmf(R_source)
    verdict = majorizes(R, P)
    if not verdict:
        raise NotMajorized(f"source does not majorize target (prefix {verdict.witness})",
                           witness=verdict.witness)
    n = max(len(P), len(R))
    y = np.concatenate([np.sort(P.masses)[::-1], np.zeros(n - len(P))])
    z = np.concatenate([np.sort(R.masses)[::-1], np.zeros(n - len(R))])
    M = np.eye(n)
    tol = 1e-15
    for _ in range(n):
        d = z - y
        surplus = np.nonzero(d > tol)[0]
        if surplus.size == 0:
            break
        j = int(surplus[-1])
        later = np.nonzero(d[j + 1 :] < -tol)[0]
        if later.size == 0:
            break
        k = j + 1 + int(later[0])
        delta = min(d[j], -d[k])
        t = delta / (z[j] - z[k])
        T = np.eye(n)
        T[j, j] = T[k, k] = 1.0 - t
        T[j, k] = T[k, j] = t
        M = T @ M
        z[j] -= delta
        z[k] += delta
        if d[j] <= -d[k]:
            z[j] = y[j]
        else:
            z[k] = y[k]
    return DoublyStochastic(M)


def _perfect_matching(mask: np.ndarray) -> np.ndarray | None:
    match = maximum_bipartite_matching(csr_matrix(mask.astype(np.int8)), perm_type="column")
    return None if np.any(match < 0) else match


def birkhoff_decompose(M, tol: float = 1e-13) -> BirkhoffDecomp:
    """Write a doubly stochastic matrix as a convex combination of permutations.

    Greedy: each round picks a perfect matching on the positive entries that
    maximises its smallest entry, then subtracts that entry along it. Every
    round zeroes at least one entry, which bounds the count by n^2 - 2n + 2.

    Raises:
        NumericalBreakdown: row sums of the remainder drift by more than 1e-9
            or no perfect matching remains while weight is left.
    """
    A = np.array(M.matrix if isinstance(M, DoublyStochastic) else M, dtype=float)
    n = A.shape[0]
    weights: list[float] = []
    perms: list[np.ndarray] = []
    rows = np.arange(n)
    remaining = 1.0
    while remaining > tol:
        A[A < _ZERO] = 0.0
        vals = np.unique(A[A > 0])[::-1]
        if vals.size == 0:
            break
        # largest threshold that still admits a perfect matching
        lo, hi = 0, len(vals) - 1
        best = None
        while lo <= hi:
            mid = (lo + hi) // 2
            match = _perfect_matching(A >= vals[mid])
            if match is None:
                lo = mid + 1
            else:
                best = match
                hi = mid - 1
        if best is None:
            raise NumericalBreakdown("no perfect matching on the remaining support",
                                     remaining=remaining)
        w = float(A[rows, best].min())
        A[rows, best] -= w
        weights.append(w)
        perms.append(best.astype(int))
        remaining -= w
        drift = max(np.abs(A.sum(1) - remaining).max(), np.abs(A.sum(0) - remaining).max())
        if drift > 1e-9:
            raise NumericalBreakdown("row sums drifted during extraction", drift=float(drift))
    if len(weights) > n * n - 2 * n + 2 and n > 1:
        raise NumericalBreakdown("decomposition used more permutations than possible")
    wts = np.array(weights)
    return BirkhoffDecomp(wts / wts.sum(), tuple(perms))


def _merge_rows(py: np.ndarray, rows: np.ndarray) -> JointDist:
    keyed: dict[tuple, int] = {}
    out_w: list[float] = []
    out_r: list[np.ndarray] = []
    for w, r in zip(py.tolist(), rows):
        key = tuple(np.round(r, 12).tolist())
        if key in keyed:
            out_w[keyed[key]] += w
        else:
            keyed[key] = len(out_w)
            out_w.append(w)
            out_r.append(r)
    return JointDist(np.array(out_w), np.array(out_r))


def _realise(Q: Pmf, P: np.ndarray, J: int, K: int) -> JointDist:
    """Joint whose conditionals rearrange P (sorted coordinates) with marginal Q.

    Only the window of sorted positions J..K differs between P and sorted Q,
    so the transfer matrix is built on that window alone.
    """
    order = np.argsort(-Q.masses, kind="stable")
    qs = Q.masses[order]
    n = len(qs)
    P = np.concatenate([P, np.zeros(max(0, n - len(P)))])[:n]
    a, b = J - 1, K
    p_w = P[a:b]
    q_w = qs[a:b]
    if b - a <= 1 or np.allclose(p_w, q_w, rtol=0, atol=1e-15):
        py = np.array([1.0])
        rows = P[None, :]
    else:
        M = hlp_transfer(Pmf(q_w), Pmf(p_w))
        dec = birkhoff_decompose(M)
        rows = np.tile(P, (len(dec.perms), 1))
        for i, perm in enumerate(dec.perms):
            rows[i, a:b] = p_w[perm]
        py = dec.weights
    out = np.zeros_like(rows)
    out[:, order] = rows
    return _merge_rows(py, out)


def extremal_joint_type1(Q, L: int, eps: float) -> JointDist:
    """Joint with marginal Q and list error eps attaining the countable-Y bound.

    Every conditional is a rearrangement of the type-1 Fano distribution.

    Raises:
        KInfinite: eps = 0 on an infinite support.
        ConditionsUnmet: Q has a tail (truncate it first).
        Infeasible: eps outside [0, marginal list error].
    """
    Q = _pmf(Q)
    if Q.tail is not None:
        if eps == 0:
            raise KInfinite("the lowering run is infinite for eps = 0 on an infinite support")
        raise ConditionsUnmet("joint synthesis needs a finite support; truncate the tail first")
    P, idx = fano_type1(Q, L, eps)
    return _realise(Q, np.array(P.masses), idx.J, idx.K)


def extremal_joint_type2(Q, L: int, eps: float, N: int) -> JointDist:
    """Joint with at most N outputs attaining the finite-Y bound.

    Raises:
        YTooSmall: more than N distinct conditionals would be needed.
        Infeasible: eps outside the range attainable with N outputs.
        ConditionsUnmet: Q has a tail.
    """
    Q = _pmf(Q)
    if Q.tail is not None:
        raise ConditionsUnmet("joint synthesis needs a finite support; truncate the tail first")
    P, idx = fano_type2(Q, L, eps, N)
    joint = _realise(Q, np.array(P.masses), idx.J, idx.K)
    if joint.n_y > N:
        raise YTooSmall(f"needs {joint.n_y} outputs but |Y| = {N}", needed=joint.n_y, available=N)
    return joint


def endpoint_achievers(Q, L: int, N: int | None) -> tuple[JointDist, JointDist]:
    """Joints attaining the largest and the smallest attainable list error.

    The first is the independent joint. The second splits the N*L largest
    symbols into N blocks of L; output v favours block v by rescaling it to
    the total block mass and leaves the remaining symbols as in Q. With
    ``N=None`` the second joint reveals X exactly.
    """
    Q = _pmf(Q)
    if Q.tail is not None:
        raise ConditionsUnmet("endpoint joints need a finite support; truncate the tail first")
    upper = JointDist.independent(Q)
    order = np.argsort(-Q.masses, kind="stable")
    qs = Q.masses[order]
    n = len(qs)
    n_blocks = math.ceil(n / L) if N is None else min(N, math.ceil(n / L))
    blocks = [list(range(v * L, min((v + 1) * L, n))) for v in range(n_blocks)]
    covered = sorted(i for b in blocks for i in b)
    omega1 = np.array([math.fsum(qs[b].tolist()) for b in blocks])
    omega2 = math.fsum(qs[covered].tolist())
    keep = [i for i, w in enumerate(omega1) if w > 0]
    rest = np.array(qs)
    rest[covered] = 0.0
    rows = []
    for i in keep:
        r = rest.copy()
        r[blocks[i]] = qs[blocks[i]] * (omega2 / omega1[i])
        rows.append(r)
    rows = np.array(rows)
    out = np.zeros_like(rows)
    out[:, order] = rows
    lower = JointDist(omega1[keep] / omega2, out)
    return upper, lower


@dataclass(frozen=True)
class Certificate:
    marginal_residual: float
    error_residual: float
    gap: float
    bound_value: float
    measure_value: float
    outputs_used: int
    outputs_allowed: int | None
    passed: bool

    def to_dict(self) -> dict:
        return {
            "marginal_residual": self.marginal_residual,
            "error_residual": self.error_residual,
            "gap": self.gap,
            "bound_value": self.bound_value,
            "measure_value": self.measure_value,
            "outputs_used": self.outputs_used,
            "outputs_allowed": "inf" if self.outputs_allowed is None else self.outputs_allowed,
            "passed": self.passed,
        }


def verify_extremal(J: JointDist, sys: SystemSpec, measure="shannon") -> Certificate:
    """Check that a joint is feasible for the system and how close it comes to the bound.

    ``gap`` is the distance from the joint's measure to the bound in the
    direction the bound holds, so it is nonnegative up to rounding for any
    feasible joint and zero for an extremal one.
    """
    if isinstance(measure, PhiFunctional):
        report = bound(sys, measure)
        value = conditional_measure(J, measure)
    else:
        m = measure if isinstance(measure, Measure) else Measure.parse(measure)
        report = bound(sys, m)
        value = m.of_joint(J)
    marg = variational_distance(J.marginal(), Pmf(np.asarray(sys.q.masses)))
    err = max(0.0, list_map_error(J, sys.L) - sys.eps)
    gap = report.value - value if report.upper else value - report.value
    allowed = sys.y_card
    fits = allowed is None or J.n_y <= allowed
    passed = marg <= 1e-9 and err <= 1e-10 and abs(gap) <= 1e-9 and fits
    return Certificate(marg, err, gap, report.value, value, J.n_y, allowed, bool(passed))


def _pmf(Q) -> Pmf:
    return Q if isinstance(Q, Pmf) else validate(Q)
