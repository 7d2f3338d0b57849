import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from fanotype import (
    BadZCardinality,
    EpsOutOfRange,
    GeometricTail,
    Infeasible,
    KInfinite,
    LogPowerTail,
    PhiFunctional,
    PhiInfinite,
    DeltaOutOfRange,
    SystemSpec,
    binary_entropy,
    bound,
    fano_type0,
    fano_type1,
    fano_type2,
    fano_type3,
    feasible_range,
    ho_yeung_truncation,
    majorizes,
    marginal_list_error,
    phi_eval,
    phi_finiteness_guard,
    renyi_entropy,
    shannon_entropy,
    spade_min_y,
    spade_threshold,
    validate,
)
from fanotype.fano import _levels
from fanotype.pmf import kahan_prefix_sums

from conftest import pmfs

Q3 = validate([0.5, 0.3, 0.2])


def _sorted(q):
    return np.sort(np.asarray(q, dtype=float))[::-1]


@st.composite
def systems(draw, max_size=7, finite_y=False):
    q = draw(pmfs(min_size=3, max_size=max_size))
    L = draw(st.integers(1, len(q) - 1))
    N = draw(st.integers(1, 4)) if finite_y else None
    lo, hi = feasible_range(validate(q), L, N)
    t = draw(st.floats(0, 1))
    return validate(q), L, lo + t * (hi - lo), N


@st.composite
def more_concentrated(draw, q):
    """Random transfers from smaller to larger masses: the result majorizes q."""
    r = _sorted(q).copy()
    for _ in range(draw(st.integers(0, 6))):
        i, j = sorted(draw(st.lists(st.integers(0, len(r) - 1), min_size=2, max_size=2, unique=True)))
        t = draw(st.floats(0, 1)) * r[j]
        r[i] += t
        r[j] -= t
        r = np.sort(r)[::-1]
    return r


class TestType0:
    def test_eight_three(self):
        P = fano_type0(8, 3, 0.375)
        assert np.allclose(P.masses, [0.625 / 3] * 3 + [0.075] * 5, atol=1e-15)
        assert P.masses[0] == pytest.approx(0.208333, abs=1e-6)

    def test_zero_eps(self):
        assert np.allclose(fano_type0(5, 2, 0.0).masses, [0.5, 0.5, 0, 0, 0])

    def test_binary(self):
        assert np.allclose(fano_type0(2, 1, 0.25).masses, [0.75, 0.25])

    def test_out_of_range(self):
        with pytest.raises(EpsOutOfRange):
            fano_type0(4, 1, 0.8)


class TestType1:
    def test_running_example(self):
        P, idx = fano_type1(Q3, 1, 0.3)
        assert np.allclose(P.masses, [0.7, 0.15, 0.15], atol=1e-15)
        assert (idx.J, idx.K) == (1, 3)
        assert idx.V == pytest.approx(0.7, abs=1e-15)
        assert idx.W == pytest.approx(0.15, abs=1e-15)

    def test_upper_endpoint_returns_sorted_q(self):
        q = validate([0.2, 0.5, 0.3])
        P, _ = fano_type1(q, 1, marginal_list_error(q, 1))
        assert np.allclose(P.masses, [0.5, 0.3, 0.2], atol=1e-15)

    @pytest.mark.parametrize("M, L", [(4, 1), (6, 2), (8, 3)])
    def test_uniform_reduces_to_type0(self, M, L):
        for eps in np.linspace(0, 1 - L / M, 7):
            P, _ = fano_type1(validate([1 / M] * M), L, eps)
            assert np.allclose(P.masses, fano_type0(M, L, eps).masses, atol=1e-13)

    def test_infeasible(self):
        with pytest.raises(Infeasible):
            fano_type1(Q3, 1, 0.6)

    def test_geometric_tail(self):
        Q = validate([], tail=GeometricTail.from_first_ratio(0.5, 0.5))
        P, idx = fano_type1(Q, 1, 0.3)
        assert P.masses[0] == pytest.approx(0.7, abs=1e-15)
        assert P.total() == pytest.approx(1.0, abs=1e-12)
        assert idx.K is not None and idx.K > 1
        assert majorizes(P, Q)

    def test_zero_eps_on_tail_has_infinite_k(self):
        Q = validate([], tail=GeometricTail.from_first_ratio(0.5, 0.5))
        P, idx = fano_type1(Q, 2, 0.0)
        assert idx.K is None and idx.k_infinite
        assert np.allclose(P.masses, [0.5, 0.5])
        with pytest.raises(KInfinite):
            spade_min_y(Q, 2, 0.0)

    def test_zero_eps_finite_support(self):
        P, idx = fano_type1(Q3, 2, 0.0)
        assert np.allclose(P.masses[:2], [0.5, 0.5]) and P.masses[2] == 0.0
        assert idx.K is not None

    @given(systems())
    def test_sorted_with_exact_error_and_majorizing(self, s):
        Q, L, eps, _ = s
        P, idx = fano_type1(Q, L, eps)
        assert np.all(np.diff(P.masses) <= 1e-15)
        assert marginal_list_error(P, L) == pytest.approx(eps, abs=1e-12)
        assert majorizes(P, Q)
        assert P.total() == pytest.approx(1.0, abs=1e-12)
        assert idx.J <= L <= idx.K
        if idx.K > L:
            assert idx.V >= idx.W - 1e-15

    @given(st.data())
    def test_minimal_among_majorizing(self, data):
        q = data.draw(pmfs(min_size=3, max_size=6))
        L = data.draw(st.integers(1, len(q) - 1))
        r = data.draw(more_concentrated(q))
        lo, hi = marginal_list_error(validate(r), L), marginal_list_error(validate(q), L)
        eps = lo + data.draw(st.floats(0, 1)) * (hi - lo)
        P, _ = fano_type1(validate(q), L, eps)
        assert majorizes(validate(r), P)

    @given(pmfs(min_size=3, max_size=6), st.integers(1, 2))
    def test_entropy_concave_in_eps(self, q, L):
        Q = validate(q)
        hi = marginal_list_error(Q, L)
        grid = np.linspace(0, hi, 50)
        H = np.array([shannon_entropy(fano_type1(Q, L, e)[0]) for e in grid])
        assert np.all(H[1:-1] >= 0.5 * (H[:-2] + H[2:]) - 1e-10)
        assert np.all(np.diff(H) >= -1e-12)


class TestType2:
    def test_running_example(self):
        P, idx = fano_type2(Q3, 1, 0.3, 2)
        assert np.allclose(P.masses, [0.7, 0.1, 0.2], atol=1e-15)
        assert idx.K == 2

    def test_many_outputs_match_type1(self):
        P2, i2 = fano_type2(Q3, 1, 0.3, 5)
        P1, i1 = fano_type1(Q3, 1, 0.3)
        assert i2.K == i1.K
        assert np.allclose(P2.masses, P1.masses)

    def test_upper_endpoint(self):
        P, _ = fano_type2(Q3, 1, 0.5, 2)
        assert np.allclose(P.masses, [0.5, 0.3, 0.2])

    def test_infeasible(self):
        with pytest.raises(Infeasible):
            fano_type2(Q3, 1, 0.1, 2)

    @given(systems(finite_y=True))
    def test_majorizes_type1(self, s):
        Q, L, eps, N = s
        P2, idx = fano_type2(Q, L, eps, N)
        P1, _ = fano_type1(Q, L, eps)
        assert P2.total() == pytest.approx(1.0, abs=1e-12)
        assert majorizes(P2, P1)
        assert idx.K <= N * L
        for m in ("shannon", "arimoto:2", "hayashi:0.5", "quadratic"):
            assert bound(SystemSpec(Q, L, eps, N), m).value <= bound(SystemSpec(Q, L, eps, None), m).value + 1e-12


class TestType3:
    def test_prefix_z_is_type2(self):
        q = validate([0.4, 0.25, 0.15, 0.12, 0.08])
        for eps in (0.3, 0.4, 0.5):
            P3, _ = fano_type3(q, 1, eps, 3, [0, 1, 2])
            P2, _ = fano_type2(q, 1, eps, 3)
            assert np.allclose(P3.masses, P2.masses, atol=1e-15)

    def test_upper_endpoint_unchanged(self):
        P, _ = fano_type3(Q3, 1, 0.7, 2, [1, 2])
        assert np.allclose(P.masses, [0.5, 0.3, 0.2])

    def test_hand_instance(self):
        # Z holds the 0.3 and 0.2 symbols; eps = 0.5 is the lower end 1 - Q(Z)
        P, idx = fano_type3(Q3, 1, 0.5, 2, [1, 2])
        assert np.allclose(P.masses, [0.5, 0.5, 0.0], atol=1e-15)
        assert (idx.J, idx.K) == (1, 2)
        P, _ = fano_type3(Q3, 1, 0.6, 2, [1, 2])
        assert np.allclose(P.masses, [0.5, 0.4, 0.1], atol=1e-15)

    def test_bad_cardinality(self):
        with pytest.raises(BadZCardinality):
            fano_type3(Q3, 1, 0.5, 2, [1])

    def test_infeasible(self):
        with pytest.raises(Infeasible):
            fano_type3(Q3, 1, 0.3, 2, [1, 2])

    @given(st.data())
    def test_majorizes_type2(self, data):
        q = data.draw(pmfs(min_size=4, max_size=7))
        Q = validate(q)
        L = data.draw(st.integers(1, 2))
        N = data.draw(st.integers(1, (len(q) // L)))
        Z = data.draw(st.lists(st.integers(0, len(q) - 1), min_size=N * L, max_size=N * L, unique=True))
        lo3 = 1.0 - math.fsum(q[Z].tolist())
        hi2 = marginal_list_error(Q, L)
        assume(lo3 <= hi2)
        eps = lo3 + data.draw(st.floats(0, 1)) * (hi2 - lo3)
        P3, _ = fano_type3(Q, L, eps, N, Z)
        P2, _ = fano_type2(Q, L, eps, N)
        assert majorizes(P3, P2)
        off = np.setdiff1d(np.arange(len(q)), Z)
        assert np.array_equal(P3.masses[off], q[off])


class TestSpade:
    def test_threshold_arithmetic(self):
        assert spade_threshold(2, 7, 3) == 15
        assert spade_threshold(3, 7, 3) == 5
        assert spade_threshold(1, 9, 1) == 9

    def test_running_example(self):
        assert spade_min_y(Q3, 1, 0.3) == 3


class TestBound:
    def test_classical_fano(self):
        r = bound(SystemSpec(validate([0.5, 0.5]), 1, 0.25, None), "shannon")
        assert r.value == pytest.approx(binary_entropy(0.25), abs=1e-15)
        assert r.value == pytest.approx(0.562335, abs=1e-6)

    @pytest.mark.parametrize("m", ["arimoto:2", "hayashi:2", "renyi:2"])
    def test_renyi_route(self, m):
        r = bound(SystemSpec(validate([0.5, 0.5]), 1, 0.25, None), m)
        assert r.value == pytest.approx(-math.log(0.625), abs=1e-15)
        assert r.value == pytest.approx(0.470004, abs=1e-6)
        assert r.upper

    def test_running_example(self):
        r = bound(SystemSpec(Q3, 1, 0.3, None), "shannon")
        assert r.value == pytest.approx(0.8188084562, abs=1e-10)
        assert r.closed_form_check == pytest.approx(r.value, abs=1e-12)
        r2 = bound(SystemSpec(Q3, 1, 0.3, 2), "shannon")
        assert r2.value == pytest.approx(shannon_entropy(validate([0.7, 0.1, 0.2])), abs=1e-15)

    def test_upper_endpoint_is_independence(self):
        r = bound(SystemSpec(Q3, 1, 0.5, None), "shannon")
        assert r.value == pytest.approx(shannon_entropy(Q3), abs=1e-15)
        assert "eps-at-upper-endpoint" in r.sharp

    def test_convex_phi_is_lower(self):
        r = bound(SystemSpec(Q3, 1, 0.3, None), "lp:2")
        assert not r.upper
        assert r.value == pytest.approx(math.sqrt(0.49 + 2 * 0.15**2), abs=1e-15)

    def test_phi_functional_accepted(self):
        r = bound(SystemSpec(Q3, 1, 0.3, None), PhiFunctional.lp_power(0.5))
        assert r.value == pytest.approx(math.sqrt(0.7) + 2 * math.sqrt(0.15), abs=1e-14)

    def test_infinite_phi_refused(self):
        Q = validate([0.9], tail=LogPowerTail.with_mass(0.1, 2))
        with pytest.raises(PhiInfinite):
            bound(SystemSpec(Q, 1, 0.05, None), "shannon")

    def test_geometric_tail_bound(self):
        Q = validate([], tail=GeometricTail.from_first_ratio(0.5, 0.5))
        r = bound(SystemSpec(Q, 1, 0.4, None), "shannon")
        assert math.isfinite(r.value)
        assert r.value <= shannon_entropy(Q) + 1e-12
        assert r.closed_form_check == pytest.approx(r.value, abs=1e-10)

    @given(systems())
    def test_closed_form_cross_check(self, s):
        Q, L, eps, _ = s
        P, _ = fano_type1(Q, L, eps)
        for m, a in (("arimoto", 0.5), ("arimoto", 2.0), ("hayashi", 3.0)):
            r = bound(SystemSpec(Q, L, eps, None), f"{m}:{a}")
            assert r.closed_form_check == pytest.approx(r.value, abs=1e-12)
            assert r.value == pytest.approx(renyi_entropy(P, a), abs=1e-12)

    @given(pmfs(min_size=3, max_size=6), st.integers(1, 3))
    def test_nondecreasing_in_eps(self, q, L):
        Q = validate(q)
        assume(L < len(q))
        hi = marginal_list_error(Q, L)
        vals = [bound(SystemSpec(Q, L, e, None)).value for e in np.linspace(0, hi, 20)]
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_to_dict(self):
        d = bound(SystemSpec(Q3, 1, 0.3, None)).to_dict()
        assert set(d) >= {"value", "distribution", "indices", "sharp", "closed_form_check"}
        assert set(d["indices"]) == {"J", "K", "V", "W"}


class TestLevels:
    def test_ties_favour_smaller_j(self):
        # at eps = 0.4 with L = 2 the first comparison is an exact tie
        qs = np.array([0.3, 0.3, 0.2, 0.2])
        J, K, V, W, _ = _levels(qs, kahan_prefix_sums(qs), 2, 0.4, 4)
        assert J == 1 and V == pytest.approx(0.3)


class TestTruncation:
    def test_zero_delta(self):
        t = ho_yeung_truncation(validate([0.2, 0.5, 0.3]), 0.0)
        assert np.allclose(t.distribution.masses, [0.5, 0.3, 0.2])

    def test_hand_instance(self):
        t = ho_yeung_truncation(Q3, 0.1)
        assert np.allclose(t.distribution.masses, [0.6, 0.3, 0.1], atol=1e-15)
        assert t.entropy == pytest.approx(0.897946, abs=1e-6)
        assert t.index == 3

    def test_full_delta(self):
        t = ho_yeung_truncation(Q3, 0.5)
        assert t.entropy == pytest.approx(0.0, abs=1e-15)

    def test_out_of_range(self):
        with pytest.raises(DeltaOutOfRange):
            ho_yeung_truncation(Q3, 0.6)

    @given(pmfs(min_size=2, max_size=7), st.floats(0, 1))
    def test_stays_in_ball_and_majorizes(self, q, t):
        Q = validate(q)
        delta = t * (1 - q.max())
        S = ho_yeung_truncation(Q, delta).distribution
        n = max(len(S), len(q))
        a = np.pad(S.masses, (0, n - len(S)))
        b = np.pad(_sorted(q), (0, n - len(q)))
        assert 0.5 * np.abs(a - b).sum() <= delta + 1e-12
        assert majorizes(S, Q)


class TestFinitenessGuard:
    def test_finite_support(self):
        assert phi_finiteness_guard(PhiFunctional.shannon(), Q3)

    def test_geometric(self):
        Q = validate([], tail=GeometricTail.from_first_ratio(0.5, 0.5))
        v = phi_finiteness_guard(PhiFunctional.shannon(), Q)
        assert v.finite and v.value == pytest.approx(2 * math.log(2))

    def test_log_power(self):
        Q = validate([0.9], tail=LogPowerTail.with_mass(0.1, 2))
        assert not phi_finiteness_guard(PhiFunctional.shannon(), Q)

    def test_nonseparable(self):
        with pytest.raises(ValueError):
            phi_finiteness_guard(PhiFunctional.dbar(3), Q3)


def test_type2_phi_matches_hand_value():
    P, _ = fano_type2(Q3, 1, 0.3, 2)
    assert phi_eval(PhiFunctional.quadratic(), P) == pytest.approx(1 - (0.49 + 0.01 + 0.04), abs=1e-15)
