import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fanotype import (
    DoublyStochastic,
    JointDist,
    NotMajorized,
    PhiFunctional,
    SystemSpec,
    YTooSmall,
    birkhoff_decompose,
    conditional_measure,
    endpoint_achievers,
    extremal_joint_type1,
    extremal_joint_type2,
    fano_type1,
    fano_type2,
    feasible_range,
    hlp_transfer,
    list_map_error,
    marginal_list_error,
    shannon_entropy,
    spade_threshold,
    validate,
    verify_extremal,
)

from conftest import pmfs

Q3 = validate([0.5, 0.3, 0.2])


def _desc(x):
    return np.sort(np.asarray(x, dtype=float))[::-1]


@st.composite
def majorization_pairs(draw, max_n=12):
    """(target, source) with source majorizing target, built from random T-transforms."""
    n = draw(st.integers(2, max_n))
    w = np.array(draw(st.lists(st.integers(1, 50), min_size=n, max_size=n)), dtype=float)
    src = _desc(w / w.sum())
    tgt = src.copy()
    for _ in range(draw(st.integers(0, 2 * n))):
        i, j = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
        t = draw(st.floats(0, 1))
        a, b = tgt[i], tgt[j]
        tgt[i], tgt[j] = (1 - t) * a + t * b, t * a + (1 - t) * b
    return validate(tgt), validate(src)


class TestHLP:
    def test_identity(self):
        M = hlp_transfer(Q3, Q3)
        assert np.allclose(M.matrix, np.eye(3))

    def test_two_by_two(self):
        M = hlp_transfer(validate([0.5, 0.5]), validate([0.7, 0.3]))
        assert np.allclose(M.matrix, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_three_by_three(self):
        R = validate([0.7, 0.15, 0.15])
        M = hlp_transfer(Q3, R)
        assert np.allclose(M.matrix @ R.masses, Q3.masses, atol=1e-15)

    def test_surplus_pairs_with_first_later_deficit(self):
        # a largest-surplus/largest-deficit pairing would move 0.05 from position 1 to
        # position 4 here and break majorization on the way
        z = validate([0.5, 0.25, 0.25, 0.0])
        y = validate([0.3, 0.3, 0.2, 0.2])
        M = hlp_transfer(y, z)
        assert np.allclose(M.matrix @ z.masses, y.masses, atol=1e-15)

    def test_not_majorized(self):
        with pytest.raises(NotMajorized):
            hlp_transfer(validate([0.7, 0.15, 0.15]), Q3)

    @given(majorization_pairs())
    def test_reproduces_target(self, pair):
        P, R = pair
        M = hlp_transfer(P, R)
        assert np.allclose(M.matrix @ _desc(R.masses), _desc(P.masses), atol=1e-10)
        assert np.allclose(M.matrix.sum(0), 1, atol=1e-12)
        assert np.allclose(M.matrix.sum(1), 1, atol=1e-12)


class TestBirkhoff:
    def test_permutation(self):
        Pm = np.eye(4)[[2, 0, 3, 1]]
        d = birkhoff_decompose(DoublyStochastic(Pm))
        assert len(d.perms) == 1 and d.weights[0] == 1.0
        assert np.array_equal(d.matrix(), Pm)

    def test_two_by_two(self):
        d = birkhoff_decompose(DoublyStochastic(np.array([[0.6, 0.4], [0.4, 0.6]])))
        assert np.allclose(d.weights, [0.6, 0.4])
        assert [list(p) for p in d.perms] == [[0, 1], [1, 0]]

    def test_uniform_three(self):
        d = birkhoff_decompose(DoublyStochastic(np.full((3, 3), 1 / 3)))
        assert len(d.perms) == 3
        assert np.allclose(d.weights, 1 / 3)
        assert np.allclose(d.matrix(), 1 / 3, atol=1e-15)

    def test_rejects_non_stochastic(self):
        with pytest.raises(ValueError):
            DoublyStochastic(np.array([[0.5, 0.6], [0.5, 0.4]]))

    @given(majorization_pairs())
    def test_round_trip(self, pair):
        P, R = pair
        M = hlp_transfer(P, R)
        d = birkhoff_decompose(M)
        n = M.n
        assert len(d.perms) <= n * n - 2 * n + 2
        assert d.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(d.matrix(), M.matrix, atol=1e-12)
        r = _desc(R.masses)
        applied = sum(w * r[p] for w, p in zip(d.weights, d.perms))
        assert np.allclose(applied, _desc(P.masses), atol=1e-9)


def _check_extremal(J, Q, L, eps, P):
    assert np.allclose(J.marginal().masses, Q.masses, atol=1e-10)
    assert list_map_error(J, L) == pytest.approx(eps, abs=1e-10)
    target = _desc(P.masses)
    for row in J.cond:
        assert np.allclose(_desc(row)[: len(target)], target, atol=1e-12)


class TestType1Joint:
    def test_running_example(self):
        J = extremal_joint_type1(Q3, 1, 0.3)
        assert J.n_y <= 3
        assert conditional_measure(J, PhiFunctional.shannon()) == pytest.approx(0.8188084562, abs=1e-10)
        assert np.allclose(J.marginal().masses, [0.5, 0.3, 0.2], atol=1e-12)

    def test_upper_endpoint_is_independent(self):
        J = extremal_joint_type1(Q3, 1, 0.5)
        assert J.n_y == 1
        assert np.allclose(J.cond[0], Q3.masses)

    def test_zero_error(self):
        Q = validate([0.4, 0.3, 0.2, 0.1])
        J = extremal_joint_type1(Q, 2, 0.0)
        assert list_map_error(J, 2) == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(J.marginal().masses, Q.masses, atol=1e-12)
        for row in J.cond:
            assert np.count_nonzero(row > 1e-15) <= 2

    @given(pmfs(min_size=2, max_size=7), st.data())
    def test_attains_and_respects_spade(self, q, data):
        Q = validate(q)
        L = data.draw(st.integers(1, len(q)))
        eps = data.draw(st.floats(0, 1)) * marginal_list_error(Q, L)
        J = extremal_joint_type1(Q, L, eps)
        P, idx = fano_type1(Q, L, eps)
        _check_extremal(J, Q, L, eps, P)
        assert J.n_y <= spade_threshold(idx.J, idx.K, L)
        # conditionals are merged, so n_y also counts distinct conditionals
        assert J.n_y <= math.comb(idx.K - idx.J + 1, L - idx.J + 1)
        cert = verify_extremal(J, SystemSpec(Q, L, eps, None))
        assert cert.passed, cert

    @given(pmfs(min_size=3, max_size=6), st.data())
    def test_perturbing_a_conditional_loses_equivocation(self, q, data):
        Q = validate(q)
        hi = marginal_list_error(Q, 1)
        eps = hi * data.draw(st.floats(0.1, 0.9))
        J = extremal_joint_type1(Q, 1, eps)
        h = conditional_measure(J, PhiFunctional.shannon())
        # move mass from the smallest positive entry of one conditional to its largest;
        # the list error cannot grow and the row is no longer a rearrangement of P
        rows = J.cond.copy()
        r = rows[0]
        i = int(np.argmax(r))
        pos = np.nonzero(r > 1e-9)[0]
        j = int(pos[np.argmin(r[pos])])
        if i == j:
            return
        t = 0.5 * r[j]
        r[i] += t
        r[j] -= t
        G = JointDist(J.py, rows)
        assert list_map_error(G, 1) <= eps + 1e-12
        assert conditional_measure(G, PhiFunctional.shannon()) < h - 1e-12


class TestType2Joint:
    def test_running_example(self):
        J = extremal_joint_type2(Q3, 1, 0.3, 2)
        assert J.n_y <= 2
        for row in J.cond:
            assert np.allclose(_desc(row), [0.7, 0.2, 0.1], atol=1e-12)
        assert np.allclose(J.marginal().masses, Q3.masses, atol=1e-12)
        assert list_map_error(J, 1) == pytest.approx(0.3, abs=1e-12)
        assert verify_extremal(J, SystemSpec(Q3, 1, 0.3, 2)).passed

    def test_upper_endpoint(self):
        J = extremal_joint_type2(Q3, 1, 0.5, 2)
        assert J.n_y == 1

    def test_too_few_outputs(self):
        # the type-2 construction needs six outputs here
        Q = validate([0.3, 0.25, 0.2, 0.15, 0.1])
        with pytest.raises(YTooSmall):
            extremal_joint_type2(Q, 2, 0.15, 2)

    @given(pmfs(min_size=2, max_size=7), st.data())
    def test_list_size_one_is_sharp(self, q, data):
        Q = validate(q)
        N0 = data.draw(st.integers(1, 4))
        lo, hi = feasible_range(Q, 1, N0)
        eps = lo + data.draw(st.floats(0, 1)) * (hi - lo)
        P, idx = fano_type2(Q, 1, eps, N0)
        N = max(N0, (idx.K - idx.J) ** 2 + 1)
        P, _ = fano_type2(Q, 1, eps, N)
        J = extremal_joint_type2(Q, 1, eps, N)
        assert J.n_y <= N
        _check_extremal(J, Q, 1, eps, P)
        assert verify_extremal(J, SystemSpec(Q, 1, eps, N)).passed


class TestEndpoints:
    def test_running_example(self):
        up, low = endpoint_achievers(Q3, 1, 2)
        assert list_map_error(up, 1) == pytest.approx(0.5, abs=1e-15)
        assert list_map_error(low, 1) == pytest.approx(0.2, abs=1e-15)
        assert np.allclose(low.marginal().masses, Q3.masses, atol=1e-15)
        assert low.n_y <= 2

    def test_full_cover(self):
        _, low = endpoint_achievers(Q3, 2, 2)
        assert list_map_error(low, 2) == pytest.approx(0.0, abs=1e-15)
        _, low = endpoint_achievers(Q3, 1, None)
        assert list_map_error(low, 1) == pytest.approx(0.0, abs=1e-15)

    @given(pmfs(min_size=2, max_size=8), st.integers(1, 3), st.integers(1, 4))
    def test_both_ends(self, q, L, N):
        Q = validate(q)
        lo, hi = feasible_range(Q, L, N)
        up, low = endpoint_achievers(Q, L, N)
        assert list_map_error(up, L) == pytest.approx(hi, abs=1e-12)
        assert list_map_error(low, L) == pytest.approx(lo, abs=1e-12)
        assert np.allclose(low.marginal().masses, Q.masses, atol=1e-12)
        assert low.n_y <= N


class TestCertificate:
    def test_independent_joint_has_gap(self):
        J = JointDist.independent(Q3)
        # independence has error 0.5, so it is feasible for eps = 0.5 but sits below the eps = 0.3 bound
        c = verify_extremal(J, SystemSpec(Q3, 1, 0.3, None))
        assert c.error_residual > 0.1
        assert not c.passed
        c = verify_extremal(J, SystemSpec(Q3, 1, 0.5, None))
        assert c.passed

    def test_strict_gap_at_interior_eps(self):
        _, low = endpoint_achievers(Q3, 1, 2)
        c = verify_extremal(low, SystemSpec(Q3, 1, 0.3, 2))
        assert c.error_residual == 0.0
        assert c.gap > 1e-3 and not c.passed

    def test_corrupted_marginal(self):
        J = extremal_joint_type1(Q3, 1, 0.3)
        bad = JointDist(J.py, J.cond[:, [1, 0, 2]])
        c = verify_extremal(bad, SystemSpec(Q3, 1, 0.3, None))
        assert c.marginal_residual > 1e-3 and not c.passed

    def test_measure_variants(self):
        J = extremal_joint_type1(Q3, 1, 0.3)
        for m in ("arimoto:2", "hayashi:0.5", "quadratic", "bhattacharyya"):
            c = verify_extremal(J, SystemSpec(Q3, 1, 0.3, None), m)
            assert c.passed, (m, c)
        assert shannon_entropy(validate([0.7, 0.15, 0.15])) == pytest.approx(
            verify_extremal(J, SystemSpec(Q3, 1, 0.3, None)).measure_value, abs=1e-14)

    def test_to_dict(self):
        d = verify_extremal(extremal_joint_type1(Q3, 1, 0.3), SystemSpec(Q3, 1, 0.3, None)).to_dict()
        assert {"marginal_residual", "error_residual", "gap", "passed"} <= set(d)
