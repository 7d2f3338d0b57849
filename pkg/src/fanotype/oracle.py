"""Numerical searches that check the closed-form bounds from the other side.

Nothing here uses the Fano construction to compute a value: every number
returned is h_phi evaluated on an explicit joint that has been checked for
feasibility (marginal Q, list error at most eps, at most N outputs). The
searches therefore produce lower bounds on the true supremum; comparing them
with :func:`fanotype.fano.bound` tests both validity and tightness.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.spatial import Delaunay, QhullError

from .errors import MeshTooLarge, NonConcavePhi
from .errprob import check_eps, list_map_error, marginal_list_error
from .fano import fano_type1, fano_type2
from .measures import JointDist, PhiFunctional, conditional_measure, phi_array
from .pmf import Pmf, eta, validate, variational_distance

FEAS_TOL = 1e-12


@dataclass(frozen=True)
class OracleConfig:
    restarts: int = 64
    seed: int = 7
    max_iters: int = 200
    step_tolerance: float = 1e-12
    grid_resolution: int = 100

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("need at least one restart")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")

    def rng(self, stream: int) -> np.random.Generator:
        """Philox counter-based stream ``stream`` under this seed."""
        key = np.array([self.seed, stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


# --------------------------------------------------------------------------
# Vectorised functionals on batches of joint matrices
# --------------------------------------------------------------------------


def _phi_rows(phi: PhiFunctional, C: np.ndarray) -> np.ndarray:
    """phi applied to every row of C (rows are distributions)."""
    k = phi.kind
    if k == "shannon":
        return eta(C).sum(-1)
    if k == "lp-norm-power":
        return np.sum(np.where(C > 0, C, 0.0) ** phi.alpha, -1)
    if k == "lp-norm":
        return np.sum(np.where(C > 0, C, 0.0) ** phi.alpha, -1) ** (1.0 / phi.alpha)
    if k == "one-minus-lp2-squared":
        return 1.0 - np.sum(C * C, -1)
    raise NonConcavePhi(f"{phi.describe()} is not supported by the oracle")


def _objective(phi: PhiFunctional, A: np.ndarray) -> float:
    """h_phi for the joint matrix A (rows x, columns y)."""
    py = A.sum(0)
    keep = py > 0
    C = (A[:, keep] / py[keep]).T
    return float(np.dot(py[keep], _phi_rows(phi, C)))


def _gradient(phi: PhiFunctional, A: np.ndarray) -> np.ndarray:
    """d h_phi / d A for the perspective sum_y P(y) phi(A[:, y] / P(y))."""
    A = np.maximum(A, 1e-14)
    py = A.sum(0)
    C = A / py
    k = phi.kind
    if k == "shannon":
        return -np.log(C)
    if k == "lp-norm":
        a = phi.alpha
        s = np.sum(A**a, 0)
        return s ** (1.0 / a - 1.0) * A ** (a - 1.0)
    if k == "lp-norm-power":
        a = phi.alpha
        s = np.sum(A**a, 0)
        return (1.0 - a) * py ** (-a) * s + a * py ** (1.0 - a) * A ** (a - 1.0)
    return -2.0 * C + np.sum(C * C, 0)


def _simplex_rows(V: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row (last axis) onto the probability simplex."""
    n = V.shape[-1]
    U = -np.sort(-V, axis=-1)
    css = np.cumsum(U, axis=-1) - 1.0
    cond = U * np.arange(1, n + 1) > css
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], -1) / (rho[..., None] + 1)
    return np.maximum(V - theta, 0.0)


_MU_TRIALS = np.concatenate([[0.0], np.geomspace(1e-6, 1e9, 31)])


def _project(V: np.ndarray, C: np.ndarray, b: float) -> np.ndarray:
    """Project onto {rows of W in the simplex, <C, W> >= b}.

    The solution is the row-wise simplex projection of V + mu C for the
    smallest mu >= 0 meeting the half-space. <C, W(mu)> is nondecreasing and
    piecewise linear in mu, so mu is bracketed on a batch of trial values and
    then located by false position.
    """
    Ws = _simplex_rows(V[None] + _MU_TRIALS[:, None, None] * C[None])
    h = np.einsum("kij,ij->k", Ws, C)
    if h[0] >= b:
        return Ws[0]
    ok = np.nonzero(h >= b)[0]
    if ok.size == 0:
        return Ws[-1]
    i = ok[0]
    lo, hi, h_lo, h_hi, best = _MU_TRIALS[i - 1], _MU_TRIALS[i], h[i - 1] - b, h[i] - b, Ws[i]
    side = 0
    for _ in range(60):
        mu = hi - h_hi * (hi - lo) / (h_hi - h_lo)
        if not (lo < mu < hi):
            mu = 0.5 * (lo + hi)
        W = _simplex_rows(V + mu * C)
        g = float(np.sum(C * W)) - b
        if g >= 0:
            hi, h_hi, best = mu, g, W
            if g < 1e-14:
                break
            if side == 1:
                h_lo *= 0.5
            side = 1
        else:
            lo, h_lo = mu, g
            if side == -1:
                h_hi *= 0.5
            side = -1
        if hi - lo <= 1e-15 * hi:
            break
    return best


def _decoder_matrix(q: np.ndarray, decoders: list[tuple[int, ...]]) -> np.ndarray:
    C = np.zeros((len(q), len(decoders)))
    for y, D in enumerate(decoders):
        C[list(D), y] = q[list(D)]
    return C


def _top_sets(A: np.ndarray, L: int) -> list[tuple[int, ...]]:
    return [tuple(sorted(np.argsort(-A[:, y], kind="stable")[:L].tolist())) for y in range(A.shape[1])]


def _solve_fixed(phi, sign, q, W0, C, b, cfg) -> np.ndarray:
    """Maximise sign * h_phi over P_{Y|X} with fixed decoding sets (a concave program)."""
    M, N = W0.shape

    def f(w):
        return -sign * _objective(phi, q[:, None] * w.reshape(M, N))

    def g(w):
        return -sign * (q[:, None] * _gradient(phi, q[:, None] * w.reshape(M, N))).ravel()

    rows = np.kron(np.eye(M), np.ones(N))
    cons = [
        {"type": "eq", "fun": lambda w: rows @ w - 1.0, "jac": lambda w: rows},
        {"type": "ineq", "fun": lambda w: C.ravel() @ w - b, "jac": lambda w: C.ravel()[None]},
    ]
    res = minimize(
        f, W0.ravel(), jac=g, bounds=[(0.0, 1.0)] * (M * N), constraints=cons,
        method="SLSQP", options={"maxiter": cfg.max_iters, "ftol": cfg.step_tolerance},
    )
    W = np.clip(res.x.reshape(M, N), 0.0, None)
    W = _project(W / W.sum(1, keepdims=True), C, b)
    return W if -f(W.ravel()) >= -f(W0.ravel()) else W0


def _feasible_joint(q: np.ndarray, A: np.ndarray, L: int, eps: float) -> JointDist | None:
    py = A.sum(0)
    keep = py > 1e-300
    J = JointDist(py[keep] / py[keep].sum(), (A[:, keep] / py[keep]).T)
    if variational_distance(J.marginal(), Pmf(q)) > 1e-10:
        return None
    if list_map_error(J, L) > eps + FEAS_TOL:
        return None
    return J


def _local_search(phi, sign, q, L, eps, N, cfg):
    M = len(q)
    subsets = list(itertools.combinations(range(M), min(L, M)))
    b = 1.0 - eps
    best = (-math.inf, None)
    order = np.argsort(-q, kind="stable")
    block = [tuple(sorted(order[(y * L) % M : (y * L) % M + L].tolist())) for y in range(N)]
    seen = set()
    for r in range(cfg.restarts):
        rng = cfg.rng(r)
        if r == 0:
            decoders = [blk if len(blk) == min(L, M) else subsets[0] for blk in block]
        else:
            for _ in range(32):
                decoders = [subsets[i] for i in rng.integers(len(subsets), size=N)]
                if _decoder_matrix(q, decoders).max(1).sum() >= b:
                    break
        C = _decoder_matrix(q, decoders)
        if C.max(1).sum() < b - FEAS_TOL:
            continue
        if tuple(sorted(decoders)) in seen:
            continue
        W = rng.dirichlet(np.ones(N), size=M)
        for _ in range(3):
            key = tuple(sorted(decoders))
            if key in seen:
                break
            seen.add(key)
            W = _solve_fixed(phi, sign, q, _project(W, C, b), C, b, cfg)
            new = _top_sets(q[:, None] * W, min(L, M))
            C_new = _decoder_matrix(q, new)
            if new == decoders or np.sum(C_new * W) < b:
                break
            decoders, C = new, C_new
        J = _feasible_joint(q, q[:, None] * W, L, eps)
        if J is None:
            continue
        v = sign * conditional_measure(J, phi)
        if v > best[0]:
            best = (v, J)
    return best


def _arrangements(c: np.ndarray) -> np.ndarray:
    return np.array(sorted(set(itertools.permutations(c.tolist()))))


def _structured(phi, sign, q, L, eps, N, candidates):
    """Joints whose conditionals are all rearrangements of one candidate.

    The mixing weights solve a small linear program; a basic solution uses
    at most as many arrangements as there are independent constraints.
    """
    best = (-math.inf, None)
    order = np.argsort(-q, kind="stable")
    qs = q[order]
    for c in candidates:
        c = np.concatenate([c, np.zeros(max(0, len(qs) - len(c)))])[: len(qs)]
        diff = np.nonzero(np.abs(c - qs) > 1e-15)[0]
        if diff.size == 0:
            rows = c[None, :]
            w = np.array([1.0])
        else:
            a, b = int(diff[0]), int(diff[-1]) + 1
            if b - a > 8:
                continue
            arr = _arrangements(c[a:b])
            res = linprog(
                np.zeros(len(arr)),
                A_eq=arr.T,
                b_eq=qs[a:b],
                bounds=(0, None),
                method="highs-ds",
            )
            if res.status != 0:
                continue
            keep = res.x > 1e-13
            if keep.sum() > N:
                continue
            rows = np.tile(c, (int(keep.sum()), 1))
            rows[:, a:b] = arr[keep]
            w = res.x[keep] / res.x[keep].sum()
        out = np.zeros_like(rows)
        out[:, order] = rows
        try:
            J = JointDist(w, out)
        except ValueError:
            continue
        if variational_distance(J.marginal(), Pmf(q)) > 1e-10:
            continue
        if list_map_error(J, L) > eps + FEAS_TOL:
            continue
        v = sign * conditional_measure(J, phi)
        if v > best[0]:
            best = (v, J)
    return best


def _direction(phi: PhiFunctional) -> int:
    if phi.concave:
        return 1
    if phi.convex:
        return -1
    raise NonConcavePhi(f"{phi.describe()} is neither concave nor convex")


def brute_force_sup(Q, L: int, eps: float, N: int, phi: PhiFunctional, cfg: OracleConfig | None = None):
    """Largest h_phi(X|Y) found over joints with marginal Q, list error <= eps, |Y| <= N.

    For convex phi the search runs the other way and returns the smallest
    value found, matching the direction of the bound. Returns
    ``(value, joint)``. Two searches run and the better joint wins:
    local optimisation over P_{Y|X} from random starts, with each output's
    decoding set held fixed during a run (the objective is then concave over
    a polytope), and a structured family whose conditionals are all
    rearrangements of one candidate distribution.

    Raises:
        Infeasible: eps cannot be attained with N outputs.
    """
    cfg = cfg or OracleConfig()
    Q = Q if isinstance(Q, Pmf) else validate(Q)
    if Q.tail is not None or len(Q) > 8 or N is None or N > 6:
        raise ValueError("brute force is limited to |X| <= 8 and finite N <= 6")
    sign = _direction(phi)
    check_eps(Q, L, eps, N)
    q = np.array(Q.masses)
    if N == 1 or L >= len(q):
        J = JointDist.independent(Q)
        return conditional_measure(J, phi), J

    def padded(P: Pmf) -> np.ndarray:
        out = np.zeros(len(q))
        m = np.asarray(P.masses)[: len(q)]
        out[: len(m)] = m
        return out

    candidates = [padded(fano_type2(Q, L, eps, N)[0])]
    if eps <= marginal_list_error(Q, L) + FEAS_TOL:
        candidates.append(padded(fano_type1(Q, L, eps)[0]))
    rng = cfg.rng(2**32)
    top = np.zeros(len(q))
    top[0] = 1.0
    for t in rng.uniform(0.0, 1.0, size=4):
        candidates.append((1.0 - t) * np.sort(candidates[0])[::-1] + t * top)
    structured = _structured(phi, sign, q, L, eps, N, candidates)
    local = _local_search(phi, sign, q, L, eps, N, cfg)
    best = max([structured, local], key=lambda r: r[0])
    if best[1] is None:
        J = JointDist.independent(Q)
        return conditional_measure(J, phi), J
    return sign * best[0], best[1]


# --------------------------------------------------------------------------
# Minimum entropy over a total-variation ball
# --------------------------------------------------------------------------

_MAX_GRID_POINTS = 5 * 10**7


def tv_ball_min_entropy(Q, delta: float, cfg: OracleConfig | None = None) -> tuple[float, Pmf]:
    """Smallest Shannon entropy over grid distributions within TV distance delta of Q.

    Two lattices of spacing 1/r are scanned, r = ``grid_resolution``: the
    usual {k / r} grid, which holds the point masses, and its translate
    through Q, which holds Q itself. Only points inside the ball count, so
    the result is an upper estimate of the true minimum, off by O(M log r / r).
    """
    cfg = cfg or OracleConfig()
    Q = Q if isinstance(Q, Pmf) else validate(Q)
    q = np.array(Q.masses)
    M = len(q)
    r = int(cfg.grid_resolution)
    if M > 6 or r > 200 or Q.tail is not None:
        raise MeshTooLarge("TV-ball grid is limited to 6 symbols and resolution 200")
    if M == 1:
        return 0.0, Pmf([1.0])
    best_v, best_p = math.inf, None
    for base in (np.zeros(M), q):
        v, p = _scan_lattice(base, q, delta, r)
        if v < best_v:
            best_v, best_p = v, p
    return best_v, Pmf(best_p)


def _scan_lattice(base: np.ndarray, q: np.ndarray, delta: float, r: int):
    """Minimise entropy over points base + D/r (D integer) in the simplex and the ball."""
    M = len(q)
    lo = np.ceil((np.maximum(q - delta, 0.0) - base) * r).astype(int) - 1
    hi = np.floor((np.minimum(q + delta, 1.0) - base) * r).astype(int) + 1
    ranges = [np.arange(lo[i], hi[i] + 1) for i in range(M - 1)]
    total = math.prod(len(x) for x in ranges)
    if total > _MAX_GRID_POINTS:
        raise MeshTooLarge(f"grid would have {total} points")
    head_base = base[:-1]
    best_v, best_p = math.inf, None
    # iterate over the first coordinate to bound memory
    rest = np.array(np.meshgrid(*ranges[1:], indexing="ij")).reshape(M - 2, -1).T if M > 2 else np.zeros((1, 0), int)
    for d0 in ranges[0]:
        D = np.column_stack([np.full(len(rest), d0), rest])
        head = head_base + D / r
        # the last coordinate absorbs whatever mass is left
        last = 1.0 - head.sum(1)
        P = np.column_stack([head, last])
        P[np.abs(P) < 1e-13] = 0.0
        P = P[np.all(P >= 0.0, axis=1)]
        if len(P) == 0:
            continue
        tv = 0.5 * np.abs(P - q).sum(1)
        P = P[tv <= delta + 1e-12]
        if len(P) == 0:
            continue
        H = eta(P).sum(1)
        i = int(np.argmin(H))
        if H[i] < best_v:
            best_v, best_p = float(H[i]), P[i]
    return best_v, best_p


def tv_grid_slack(M: int, resolution: int) -> float:
    """How far the grid minimum may sit above the true minimum over the ball."""
    return M / resolution * (1.0 + math.log(resolution))


# --------------------------------------------------------------------------
# Exhaustive mesh on tiny instances
# --------------------------------------------------------------------------


def _polytope_vertices(q, decoders, b) -> np.ndarray:
    """Vertices of {w in [0,1]^M : sum_x a_x w_x + c >= b} for two outputs.

    w_x is the probability that symbol x is sent to output 0.
    """
    M = len(q)
    D0, D1 = set(decoders[0]), set(decoders[1])
    a = np.array([q[x] * ((x in D0) - (x in D1)) for x in range(M)])
    c = sum(q[x] for x in D1)
    corners = np.array(list(itertools.product([0.0, 1.0], repeat=M)))
    g = corners @ a + c - b
    verts = [v for v, gv in zip(corners, g) if gv >= -FEAS_TOL]
    for i, u in enumerate(corners):
        for j in range(i + 1, len(corners)):
            v = corners[j]
            if np.sum(u != v) != 1:
                continue
            if (g[i] > FEAS_TOL and g[j] < -FEAS_TOL) or (g[i] < -FEAS_TOL and g[j] > FEAS_TOL):
                t = g[i] / (g[i] - g[j])
                verts.append(u + t * (v - u))
    if not verts:
        return np.zeros((0, M))
    return np.unique(np.round(np.array(verts), 15), axis=0)


def _barycentric_grid(d: int, mesh: int) -> np.ndarray:
    pts = [c for c in itertools.product(range(mesh + 1), repeat=d) if sum(c) <= mesh]
    pts = np.array(pts, dtype=float)
    return np.column_stack([pts, mesh - pts.sum(1)]) / mesh


def _simplices(verts: np.ndarray) -> list[np.ndarray]:
    n, d = verts.shape
    if n <= d + 1:
        return [verts]
    try:
        tri = Delaunay(verts, qhull_options="QJ")
        return [verts[s] for s in tri.simplices]
    except (QhullError, ValueError):
        return [verts]


def exhaustive_small(Q, L: int, eps: float, N: int, phi: PhiFunctional, mesh: int = 64) -> tuple[float, JointDist]:
    """Best h_phi over a mesh of the whole feasible set, for |X| <= 3 and N <= 2.

    For each pair of decoding sets the feasible P_{Y|X} form a polytope; it
    is triangulated and every simplex is meshed in barycentric coordinates
    with ``mesh`` divisions. All mesh points are feasible, so the result is
    a lower bound on the supremum that converges as the mesh is refined.
    Convex phi is minimised instead.

    Raises:
        MeshTooLarge: instance or mesh beyond the limits above.
    """
    Q = Q if isinstance(Q, Pmf) else validate(Q)
    q = np.array(Q.masses)
    M = len(q)
    if M > 3 or N > 2 or mesh > 64 or mesh < 1 or Q.tail is not None:
        raise MeshTooLarge("exhaustive mesh is limited to |X| <= 3, N <= 2, mesh <= 64")
    check_eps(Q, L, eps, N)
    sign = _direction(phi)
    indep = JointDist.independent(Q)
    best_v = sign * conditional_measure(indep, phi) if list_map_error(indep, L) <= eps + FEAS_TOL else -math.inf
    best_w = None
    if N == 2 and L < M:
        subsets = list(itertools.combinations(range(M), L))
        b = 1.0 - eps
        for D in itertools.product(subsets, repeat=2):
            verts = _polytope_vertices(q, D, b)
            if len(verts) == 0:
                continue
            for simplex in _simplices(verts):
                bary = _barycentric_grid(len(simplex) - 1, mesh)
                W0 = np.clip(bary @ simplex, 0.0, 1.0)
                A0 = W0 * q
                A1 = (1.0 - W0) * q
                p0 = A0.sum(1)
                p1 = A1.sum(1)
                with np.errstate(invalid="ignore", divide="ignore"):
                    C0 = np.where(p0[:, None] > 0, A0 / p0[:, None], 0.0)
                    C1 = np.where(p1[:, None] > 0, A1 / p1[:, None], 0.0)
                top0 = -np.sort(-C0, 1)[:, :L].sum(1)
                top1 = -np.sort(-C1, 1)[:, :L].sum(1)
                pe = 1.0 - (p0 * top0 + p1 * top1)
                val = sign * (p0 * _phi_rows(phi, C0) + p1 * _phi_rows(phi, C1))
                val[pe > eps + FEAS_TOL] = -math.inf
                i = int(np.argmax(val))
                if val[i] > best_v:
                    best_v, best_w = float(val[i]), W0[i]
    if best_w is None:
        return sign * best_v, indep
    A = np.column_stack([best_w * q, (1.0 - best_w) * q])
    J = _feasible_joint(q, A, L, eps)
    return conditional_measure(J, phi), J
