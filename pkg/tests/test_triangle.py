import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artifact.dispersion import TweedieFamily
from artifact.errors import ValidationError
from artifact.stable import StableFamily
from artifact.triangle import (
    SCHEDULE_P_SHA256,
    DevelopmentPattern,
    Triangle,
    bundled_checksums,
    chain_ladder,
    load_schedule_p,
    outstanding_mean,
    read_triangles,
    simulate_triangle,
    standard_mask,
    write_triangles,
)

import oracles

BASE = DevelopmentPattern(np.full(10, 5.0), np.linspace(1, 0.55, 10), 0.2)


def rows(tri):
    return [list(tri.values[i][tri.mask[i]]) for i in range(tri.n_ay)]


# ----------------------------------------------------------------- validation


def test_triangle_validation():
    with pytest.raises(ValidationError):
        Triangle(np.full((2, 2), np.nan))
    with pytest.raises(ValidationError):
        Triangle([1.0, 2.0])
    with pytest.raises(ValidationError):
        Triangle([[1.0, np.nan], [1.0, 2.0]], mask=[[True, True], [True, True]])
    t = Triangle([[1.0, 2.0], [3.0, np.nan]])
    assert t.is_standard and t.shape == (2, 2)
    with pytest.raises(ValueError):
        t.values[0, 0] = 5.0


def test_pattern_validation_and_pin():
    with pytest.raises(ValidationError):
        DevelopmentPattern([1.0, -1.0], [1.0, 1.0], 0.1)
    with pytest.raises(ValidationError):
        DevelopmentPattern([1.0, 1.0], [1.0, 1.0], 0.0)
    p = DevelopmentPattern([2.0, 4.0], [0.5, 0.25], 0.1).normalized()
    assert p.nu[0] == 1.0 and np.allclose(p.means(), [[1, 0.5], [2, 1]])
    q = DevelopmentPattern([2.0, 4.0], [0.5, 0.25], 0.1).normalized("eta")
    assert q.eta[0] == 1.0 and np.allclose(q.means(), p.means())


# ---------------------------------------------------------------- chain ladder


def test_chain_ladder_hand_example():
    cl = chain_ladder(Triangle([[100.0, 50.0], [100.0, np.nan]]))
    assert cl.dev_factors[0] == 1.5
    assert np.allclose(cl.outstanding_by_ay, [0.0, 50.0])


def test_chain_ladder_constant_rows():
    row = np.array([10.0, 6.0, 3.0, 1.0])
    v = np.tile(row, (4, 1))
    cl = chain_ladder(Triangle(np.where(standard_mask(4), v, np.nan)))
    assert np.allclose(cl.completed, v, rtol=1e-13)


def test_chain_ladder_full_square_has_no_reserve():
    cl = chain_ladder(Triangle(np.arange(1.0, 10.0).reshape(3, 3)))
    assert np.all(cl.outstanding_by_ay == 0)


@pytest.mark.parametrize("lob", ["personal", "commercial"])
def test_chain_ladder_schedule_p_oracle(lob):
    tri = load_schedule_p()[lob]
    cl = chain_ladder(tri)
    f, ult, res = oracles.chain_ladder_brute(rows(tri))
    assert np.allclose(cl.dev_factors, f, rtol=1e-10, atol=0)
    assert np.allclose(cl.ultimate, ult, rtol=1e-10, atol=0)
    assert np.allclose(cl.outstanding_by_ay, res, rtol=1e-10, atol=1e-9)


@given(st.lists(st.floats(0.5, 3.0), min_size=4, max_size=4), st.lists(st.floats(1.0, 100.0), min_size=5, max_size=5))
def test_chain_ladder_recovers_multiplicative_pattern(nu, eta):
    pattern = DevelopmentPattern(eta, [1.0] + nu, 0.1)
    full = pattern.means()
    cl = chain_ladder(Triangle(np.where(standard_mask(5), full, np.nan)))
    cum = np.cumsum(full, axis=1)
    assert np.allclose(cl.dev_factors, cum[0, 1:] / cum[0, :-1], rtol=1e-12)
    assert np.allclose(cl.completed, full, rtol=1e-11)


def test_chain_ladder_errors():
    with pytest.raises(ValidationError):
        chain_ladder(Triangle([[0.0, 1.0], [0.0, np.nan]]))
    with pytest.raises(ValidationError, match="gap"):
        chain_ladder(Triangle([[1.0, np.nan, 1.0], [1.0, 1.0, np.nan], [1.0, np.nan, np.nan]]))


def test_chain_ladder_accepts_negative_increments():
    cl = chain_ladder(Triangle([[100.0, -10.0], [50.0, np.nan]]))
    assert cl.dev_factors[0] == pytest.approx(0.9)


# --------------------------------------------------------------- simulation


def test_simulated_cell_mean(rng):
    x = np.array([simulate_triangle(BASE, TweedieFamily(2), rng).values[0, 0] for _ in range(10_000)])
    assert abs(x.mean() - 5.0) < 3 * x.std() / np.sqrt(x.size)


def test_vanishing_dispersion(rng):
    p = DevelopmentPattern(BASE.eta, BASE.nu, 1e-8)
    tri = simulate_triangle(p, TweedieFamily(2), rng)
    i, j, x = tri.cells()
    assert np.allclose(x, p.means()[i, j], rtol=5e-4)


def test_stable_contamination(rng):
    # unit-level scale 2: about 7 of 200 triangles are expected to qualify
    fam, pattern = StableFamily(1.8), DevelopmentPattern(BASE.eta, BASE.nu, 2.0)
    hits = 0
    for _ in range(200):
        x = simulate_triangle(pattern, fam, rng).cells()[2]
        hits += np.max(x) > 0.25 * np.sum(x)
    assert hits >= 1


def test_simulate_round_trip_means(rng):
    fam = TweedieFamily(1.5)
    n = 10_000
    draws = np.stack([simulate_triangle(BASE, fam, rng, return_full=True)[1] for _ in range(n)])
    m = BASE.means()
    se = np.sqrt(BASE.gamma * m**1.5 / n)
    assert np.all(np.abs(draws.mean(axis=0) - m) < 4 * se)


def test_simulation_is_seeded():
    a = simulate_triangle(BASE, TweedieFamily(1.32), np.random.default_rng(5))
    b = simulate_triangle(BASE, TweedieFamily(1.32), np.random.default_rng(5))
    assert a == b


# ------------------------------------------------------------------ outstanding


def test_outstanding_mean_examples():
    p = DevelopmentPattern([1.0, 1.0], [1.0, 0.5], 0.1)
    assert np.allclose(outstanding_mean(p, Triangle([[1.0, 1.0], [1.0, np.nan]])), [0.0, 0.5])
    assert np.all(outstanding_mean(p, Triangle(np.ones((2, 2)))) == 0)
    with pytest.raises(ValidationError):
        outstanding_mean(p, Triangle(np.ones((3, 3))))


# ----------------------------------------------------------------------- files


def test_bundled_data_integrity():
    assert bundled_checksums() == SCHEDULE_P_SHA256
    d = load_schedule_p()
    assert d["personal"].values[0, 0] == 16864
    assert d["personal"].premium[0] == 62467
    assert d["commercial"].values[9, 0] == 9076
    assert d["commercial"].values[0, 9] == 6
    assert all(t.is_standard and t.shape == (10, 10) for t in d.values())


def test_csv_round_trip(tmp_path):
    d = load_schedule_p()
    path = tmp_path / "tri.csv"
    write_triangles(path, d)
    back = read_triangles(path)
    assert back["personal"] == d["personal"] and back["commercial"] == d["commercial"]


def test_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValidationError, match="header"):
        read_triangles(bad)
    bad.write_text("lob,accident_year,development_year,value\nx,1,1,abc\n")
    with pytest.raises(ValidationError):
        read_triangles(bad)
    bad.write_text("lob,accident_year,development_year,value\nx,1,1,1\nx,1,1,2\n")
    with pytest.raises(ValidationError, match="duplicate"):
        read_triangles(bad)
    with pytest.raises(ValidationError):
        read_triangles(tmp_path / "missing.csv")
