import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from viscolab.monitor import (
    AdmissibilityWarning,
    NormSeries,
    advection_budget,
    assemble_report,
    boundedness_report,
    functional_Y,
    functional_Z,
    initial_Y,
    initial_Z,
)


def make_series(times, q, E, v, grad=None, ps=(2.0,)):
    times = np.asarray(times, dtype=float)
    nt, nq = len(times), len(q)
    E = np.broadcast_to(np.asarray(E, dtype=float).reshape(-1, 1) if np.ndim(E) == 1 else E, (nt, nq))
    v = np.broadcast_to(np.asarray(v, dtype=float).reshape(-1, 1) if np.ndim(v) == 1 else v, (nt, nq))
    norms = {}
    for p in ps:
        norms[("E", p)] = E
        norms[("v", p)] = v
        norms[("c", p)] = E
    g = np.zeros(nt) if grad is None else grad
    return NormSeries(times, q, norms, g)


def test_zero_series_gives_zero():
    s = make_series(np.linspace(0, 1, 5), [-2, -1, 0, 1, 2], 0.0, 0.0, ps=(2.0, 4.0))
    rep = assemble_report(s)
    assert np.all(rep.Y == 0) and all(np.all(z == 0) for z in rep.Z.values())
    assert rep.Y0 == 0 and rep.X0 == {2.0: 0.0, 4.0: 0.0}
    verdicts = boundedness_report(rep, lambda1=1.0)
    assert all(v.rest_state and v.passed is None for v in verdicts.values())
    assert "rest state" in verdicts[2.0].describe()


def test_constant_low_block_closed_form():
    e, w = 0.3, 0.7
    t = np.linspace(0, 4, 41)
    s = make_series(t, [-1], np.full(41, e), np.full(41, w))
    Y = functional_Y(s, 0.0, 1.0, 2.0)
    # weights 2^{q(s+1)}, 2^{q(s+2)} at q = -1, s = 0
    a = e / 2 + w
    b = (e + w) / 4
    c = e / 2
    assert Y == pytest.approx(a + b * t + c * np.sqrt(t), rel=1e-13)
    assert Y[0] == pytest.approx(a)
    assert initial_Y(s, 0.0, 1.0, 2.0) == pytest.approx(e + w)
    assert np.all(functional_Z(s, 2.0, 2.0) == 0)


def test_single_sample_keeps_sup_terms():
    s = make_series([0.0], [-1], [[0.3]], [[0.7]])
    assert functional_Y(s, 0.0, 1.0, 2.0) == pytest.approx([0.15 + 0.7])


def test_decaying_high_block():
    e, w = 0.2, 0.05
    t = np.linspace(0, 3, 3001)
    decay = np.exp(-t)
    s = make_series(t, [2], e * decay, w * decay)
    # p = 2, N = 2: E weights 2^{q}, v weights 2^{0} and 2^{2q}
    Z = functional_Z(s, 2.0, 2.0)
    oracle = 4 * e + 4 * e * (1 - decay) + w + 16 * w * (1 - decay)
    assert Z == pytest.approx(oracle, rel=1e-6)
    assert initial_Z(s, 2.0, 2.0) == pytest.approx(4 * e + w)
    Y = functional_Y(s, 0.0, 1.0, 2.0)
    # the high block enters Y through E in L~inf(s+1), E^h in L~1(s+1) and v in L~inf(s), L~1(s+2)
    oracle_Y = 4 * e + 4 * e * (1 - decay) + w + 16 * w * (1 - decay)
    assert Y == pytest.approx(oracle_Y, rel=1e-6)


def test_X_is_Y_plus_Z():
    rng = np.random.default_rng(2)
    t = np.linspace(0, 1, 11)
    q = [-2, -1, 0, 1, 2]
    norms = {(f, p): rng.uniform(0, 1, (11, 5)) for f in ("E", "v", "c") for p in (2.0, 4.0)}
    s = NormSeries(t, q, norms, rng.uniform(0, 1, 11))
    rep = assemble_report(s, ps=(2.0, 4.0))
    for p in (2.0, 4.0):
        assert np.array_equal(rep.X[p], rep.Y + rep.Z[p])
        assert rep.X0[p] == rep.Y0 + rep.Z0[p]
    assert rep.U_tilde is s.U_tilde


@given(arrays(float, (6, 4), elements=st.floats(0, 10)), arrays(float, (6, 4), elements=st.floats(0, 10)))
def test_functionals_are_monotone(E, v):
    s = make_series(np.arange(6) * 0.3, [-1, 0, 1, 2], E, v)
    rep = assemble_report(s, ps=(2.0,))
    assert np.all(np.diff(rep.Y) >= -1e-12)
    assert np.all(np.diff(rep.Z[2.0]) >= -1e-12)


@given(st.floats(1e-3, 1e3))
def test_functionals_are_homogeneous(a):
    rng = np.random.default_rng(5)
    s = make_series(np.linspace(0, 2, 9), [-1, 0, 1, 2], rng.uniform(0, 1, (9, 4)), rng.uniform(0, 1, (9, 4)))
    r1 = assemble_report(s, ps=(2.0,))
    r2 = assemble_report(s.scaled(a), ps=(2.0,))
    assert r2.X[2.0] == pytest.approx(a * r1.X[2.0], rel=1e-12)
    assert r2.ratio(2.0) == pytest.approx(r1.ratio(2.0), rel=1e-12)


def test_advection_budget():
    t = np.linspace(0, 2, 21)
    assert advection_budget(t, np.full(21, 2.0)) == pytest.approx(2 * t)
    assert advection_budget(t, t) == pytest.approx(t**2 / 2, rel=1e-2, abs=1e-2)
    assert advection_budget(np.array([]), np.array([])).size == 0
    s = make_series(t, [0], 0.0, 0.0, grad=np.full(21, 2.0))
    assert s.U_tilde[-1] == pytest.approx(4.0)


def test_admissibility_warning():
    s = make_series([0.0, 1.0], [0], [[1.0], [1.0]], [[1.0], [1.0]])
    with pytest.warns(AdmissibilityWarning):
        functional_Y(s, 1.0, 1.0, 2.0, dim=2)
    with pytest.warns(AdmissibilityWarning):
        functional_Y(s, -1.0, 1.0, 2.0, dim=2)
    with pytest.warns(AdmissibilityWarning):
        functional_Y(s, 0.0, 2.0, 2.0, dim=2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        functional_Y(s, 0.0, 1.0, 2.0, dim=2)
        functional_Y(s, 0.4, 2.0, 2.0, dim=3)


def test_verdicts():
    t = np.linspace(0, 1, 3)
    s = make_series(t, [-1, 2], [[1.0, 1.0]] * 3, [[1.0, 1.0]] * 3, ps=(2.0, 4.0))
    rep = assemble_report(s, ps=(2.0, 4.0))
    v = boundedness_report(rep, lambda1=1e6, constant=1e6)
    assert v[2.0].passed and v[2.0].hypothesis_held
    v = boundedness_report(rep, lambda1=0.1, constant=1.0)
    assert not v[4.0].passed and not v[4.0].hypothesis_held
    assert "FAIL" in v[4.0].describe() and "VIOLATED" in v[4.0].describe()


def test_series_validation():
    with pytest.raises(ValueError, match="unknown field"):
        NormSeries([0.0], [0], {("w", 2.0): [[1.0]]}, [0.0])
    with pytest.raises(ValueError, match="non-negative"):
        NormSeries([0.0], [0], {("v", 2.0): [[-1.0]]}, [0.0])
    with pytest.raises(ValueError, match="grad_v_inf"):
        NormSeries([0.0, 1.0], [0], {("v", 2.0): [[1.0], [1.0]]}, [0.0])
    with pytest.raises(ValueError, match="increasing"):
        NormSeries([1.0, 0.0], [0], {}, [0.0, 0.0])
    s = make_series(np.linspace(0, 1, 4), [0], 1.0, 1.0)
    with pytest.raises(KeyError):
        s.block("v", 4.0)
    assert len(s.truncated(2).times) == 2
    assert s.ps == (2.0,)
    assert math.isclose(s.truncated(2).U_tilde[-1], 0.0)
