"""Source families indexed by n and finite-n traces of the equivocation bound."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import BisectionFailure, FanoError
from .errprob import SystemSpec, list_map_error, marginal_list_error
from .fano import bound
from .measures import JointDist, Measure, conditional_measure, shannon_entropy
from .pmf import GeometricTail, Pmf, _h2_over_p, truncate, validate

MAX_PRODUCT_SIZE = 2**20
TRACE_HEADER = ("n", "H", "logL", "eps", "bound", "excess", "excess_ratio")

Schedule = Callable[[int], float]


def _power_of_ten(n: int) -> float:
    return 10.0**n


def _reciprocal(n: int) -> float:
    return 1.0 / n


@dataclass(frozen=True)
class SourceFamily:
    """A sequence of marginals P_{X_n}.

    Use the constructors rather than the raw fields. Schedules are plain
    callables of n.
    """

    kind: str
    base: Pmf | None = None
    mean: Schedule | None = None
    gamma: float = 1.0
    L: int = 1
    delta: Schedule | None = None

    @classmethod
    def iid_product(cls, base) -> "SourceFamily":
        return cls("iid-product", base=base if isinstance(base, Pmf) else validate(base))

    @classmethod
    def poisson(cls, mean: Schedule = _power_of_ten) -> "SourceFamily":
        return cls("poisson", mean=mean)

    @classmethod
    def counterexample4(cls, gamma: float = 1.0, L: int = 2, delta: Schedule = _reciprocal) -> "SourceFamily":
        if gamma <= 0 or L < 1:
            raise ValueError("need gamma > 0 and L >= 1")
        return cls("counterexample4", gamma=gamma, L=L, delta=delta)

    @classmethod
    def example5(cls, L: int = 2) -> "SourceFamily":
        return cls("example5", L=L)


def poisson_pmf(mean: float) -> Pmf:
    """Poisson(mean) on symbols 1, 2, ... (symbol k has mass of count k-1).

    Only the window holding all but 1e-14 of the mass is stored, labelled by
    symbol. Masses come from the ratio recurrence p_k / p_{k-1} = mean / k
    anchored at the mode and scaled to the window's probability; evaluating
    exp(log pmf) directly loses about 1e-11 of total mass at mean 1e4.
    """
    if mean <= 0:
        raise ValueError("Poisson mean must be positive")
    lo = int(stats.poisson.isf(1.0 - 5e-15, mean)) if mean > 30 else 0
    hi = int(stats.poisson.isf(5e-15, mean)) + 1
    lo = max(0, lo - 1)
    k = np.arange(lo, hi + 1)
    mode = min(max(int(math.floor(mean)), lo), hi)
    steps = math.log(mean) - np.log(np.maximum(k, 1).astype(float))
    log_w = np.zeros(len(k))
    i = mode - lo
    log_w[i + 1 :] = np.cumsum(steps[i + 1 :])
    log_w[:i] = -np.cumsum(steps[1 : i + 1][::-1])[::-1]
    w = np.exp(log_w)
    inside = 1.0 - float(stats.poisson.cdf(lo - 1, mean)) - float(stats.poisson.sf(hi, mean))
    m = w * (inside / math.fsum(w.tolist()))
    return validate(m, labels=tuple(int(x) + 1 for x in k))


def counterexample4_p(gamma: float, L: int, delta: float) -> float:
    """Solve delta * h2(p) / p = gamma for p, returned as log p."""
    if not (0.0 < delta < 1.0):
        raise BisectionFailure("delta must lie strictly between 0 and 1", delta=delta)
    p_max = min(1.0, (1.0 - delta) / (delta * L))

    def f(u: float) -> float:
        return delta * _h2_over_p(math.exp(-u), -u) - gamma

    u_lo = -math.log(p_max)
    if f(u_lo) > 0:
        raise BisectionFailure(
            "no root in the admissible range; delta is too large for this gamma",
            delta=delta,
            p_max=p_max,
        )
    # h2(p)/p < 2 - log p, so the root lies below gamma / delta
    u_hi = max(u_lo + 1.0, gamma / delta)
    while f(u_hi) < 0:
        u_hi *= 2.0
    while u_hi - u_lo > 1e-14 * u_hi:
        mid = 0.5 * (u_lo + u_hi)
        if f(mid) > 0:
            u_hi = mid
        else:
            u_lo = mid
    return -0.5 * (u_lo + u_hi)


def realize(src: SourceFamily, n: int) -> Pmf:
    """The marginal P_{X_n} of the family at index n.

    Raises:
        BisectionFailure: counterexample4 schedule gives no admissible p_n.
    """
    if n < 1:
        raise ValueError("index n must be at least 1")
    if src.kind == "iid-product":
        q = np.asarray(src.base.masses)
        if len(q) ** n > MAX_PRODUCT_SIZE:
            raise ValueError(f"product alphabet of size {len(q)}**{n} is too large")
        out = np.ones(1)
        for _ in range(n):
            out = np.outer(out, q).ravel()
        return validate(out)
    if src.kind == "poisson":
        return poisson_pmf(src.mean(n))
    if src.kind == "counterexample4":
        d = src.delta(n)
        log_p = counterexample4_p(src.gamma, src.L, d)
        head = np.full(src.L, (1.0 - d) / src.L)
        return validate(head, tail=GeometricTail(mass=d, log_p=log_p))
    if src.kind == "example5":
        return validate([0.5, 0.5])
    raise ValueError(f"unknown source kind {src.kind!r}")


def aep_defect(P, delta: float) -> float:
    """P{ -log P(X) <= (1 - delta) H(P) }; zero by convention when H(P) = 0."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    P = P if isinstance(P, Pmf) else validate(P)
    H = shannon_entropy(P)
    if H == 0.0:
        return 0.0
    if math.isinf(H):
        raise ValueError("entropy is infinite")
    thr = (1.0 - delta) * H
    m = P.masses[P.masses > 0]
    out = math.fsum(m[-np.log(m) <= thr].tolist())
    t = P.tail
    if t is None or t.total() == 0.0:
        return out
    if isinstance(t, GeometricTail):
        # terms mass*p*(1-p)**i; the surprisal grows with i
        first = math.log(t.mass) + t.log_p
        step = t._log1m_p()
        if -first > thr:
            return out
        count = math.floor((first + thr) / -step) + 1 if step < 0 else math.inf
        if math.isinf(count):
            return out + t.mass
        return out + t.mass * -math.expm1(count * step)
    expanded, _ = truncate(P, 1e-15)
    m = expanded.masses[len(P.masses):]
    m = m[m > 0]
    return out + math.fsum(m[-np.log(m) <= thr].tolist())


def _unconditional(measure: Measure) -> Callable[[Pmf], float]:
    if measure.name in ("arimoto", "hayashi", "renyi"):
        return lambda P: Measure("renyi", measure.alpha).of_pmf(P)
    return measure.of_pmf


@dataclass(frozen=True)
class TraceRow:
    n: int
    H: float
    logL: float
    eps: float
    bound: float | None
    excess: float | None
    excess_ratio: float | None
    error: dict | None = None

    @property
    def feasible(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in TRACE_HEADER}
        d["feasible"] = self.feasible
        if self.error is not None:
            d["error"] = self.error
        return d


def _as_schedule(x) -> Schedule:
    if x is None or callable(x):
        return x
    return lambda n: x


def equivocation_trace(
    src: SourceFamily,
    L,
    ns: Iterable[int],
    eps=None,
    measure="shannon",
) -> list[TraceRow]:
    """Evaluate the countable-Y bound along the family at each n in ``ns``.

    ``L`` and ``eps`` are constants or callables of n. Without ``eps`` the
    error budget is that of guessing blind (Y independent of X). Rows whose
    budget is infeasible are kept with the error recorded.
    """
    m = measure if isinstance(measure, Measure) else Measure.parse(measure)
    L_of = _as_schedule(L)
    eps_of = _as_schedule(eps)
    H_of = _unconditional(m)
    rows = []
    for n in ns:
        P = realize(src, n)
        Ln = int(L_of(n))
        e = marginal_list_error(P, Ln) if eps_of is None else float(eps_of(n))
        H = H_of(P)
        logL = math.log(Ln)
        try:
            b = bound(SystemSpec(P, Ln, e, None), m).value
        except FanoError as err:
            rows.append(TraceRow(n, H, logL, e, None, None, None, err.to_dict()))
            continue
        excess = max(b - logL, 0.0)
        ratio = excess / H if H > 0 else (0.0 if excess == 0 else math.inf)
        rows.append(TraceRow(n, H, logL, e, b, excess, ratio))
    return rows


def _fmt(x) -> str:
    if isinstance(x, int):
        return str(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def trace_to_csv(rows: Sequence[TraceRow]) -> str:
    """CSV text with the fixed trace header.

    Rows that could not be evaluated carry the error name (for instance
    ``Infeasible``) in the bound columns.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in rows:
        w.writerow([r.error["error"] if getattr(r, k) is None else _fmt(getattr(r, k)) for k in TRACE_HEADER])
    return buf.getvalue()


@dataclass(frozen=True)
class SymbolwiseReport:
    pe_sym: float
    errors: tuple[float, ...]
    equivocations: tuple[float, ...]
    bounds: tuple[float, ...]
    mean_bound: float
    jensen_bound: float | None
    log_L: float
    extras: dict = field(default_factory=dict)

    @property
    def normalized_equivocation(self) -> float:
        return math.fsum(self.equivocations) / len(self.equivocations)

    def to_dict(self) -> dict:
        return {
            "pe_sym": self.pe_sym,
            "errors": list(self.errors),
            "equivocations": list(self.equivocations),
            "normalized_equivocation": self.normalized_equivocation,
            "bounds": list(self.bounds),
            "mean_bound": self.mean_bound,
            "jensen_bound": self.jensen_bound,
            "log_L": self.log_L,
        }


def _same_marginal(joints: Sequence[JointDist]) -> Pmf | None:
    ref = joints[0].marginal()
    for j in joints[1:]:
        m = j.marginal()
        if len(m) != len(ref) or np.max(np.abs(m.masses - ref.masses)) > 1e-12:
            return None
    return ref


def symbolwise_trace(joints: Sequence[JointDist], L: int, reference=None) -> SymbolwiseReport:
    """Per-position errors, equivocations and Fano bounds for a block of positions.

    The mean of the per-position bounds upper-bounds the normalised
    equivocation. When every position shares one marginal (or ``reference``
    is given) the bound at the mean error is also reported; by concavity in
    eps it is at least the mean of the bounds.
    """
    joints = list(joints)
    if not joints:
        raise ValueError("need at least one position")
    errs = tuple(list_map_error(j, L) for j in joints)
    eqs = tuple(conditional_measure(j, Measure("shannon").phi()) for j in joints)
    bounds = tuple(bound(SystemSpec(j.marginal(), L, e, None)).value for j, e in zip(joints, errs))
    pe = math.fsum(errs) / len(errs)
    ref = reference if reference is not None else _same_marginal(joints)
    jensen = None
    if ref is not None:
        ref = ref if isinstance(ref, Pmf) else validate(ref)
        jensen = bound(SystemSpec(ref, L, min(pe, marginal_list_error(ref, L)), None)).value
    return SymbolwiseReport(
        pe_sym=pe,
        errors=errs,
        equivocations=eqs,
        bounds=bounds,
        mean_bound=math.fsum(bounds) / len(bounds),
        jensen_bound=jensen,
        log_L=math.log(L),
    )
