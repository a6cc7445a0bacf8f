import numpy as np
import pytest

from carlaseg.carla import (
    ActionBounds,
    DensityTable,
    DiscreteAutomaton,
    ReferenceWindow,
    compute_beta,
    discrete_lri_update,
    init_uniform,
    neighborhood,
    push_cost,
    select_action,
    update_density,
    write_density_csv,
)


def trapz_cdf(values, dx):
    return np.concatenate([[0.0], np.cumsum((values[1:] + values[:-1]) * 0.5 * dx)])


def trained(rng, n=50):
    a = init_uniform(ActionBounds(0.0, 255.0))
    for _ in range(n):
        a = update_density(a, rng.uniform(0, 255), rng.uniform(0, 1))
    return a


def test_uniform_init():
    a = init_uniform(ActionBounds(0.0, 0.5))
    assert a.density.resolution == 256
    assert np.all(a.density.values == 2.0)
    assert a.density.integral() == pytest.approx(1.0, abs=1e-12)
    assert a.sigma_n == pytest.approx(0.01) and a.lambda_n == pytest.approx(0.6)
    with pytest.raises(ValueError):
        init_uniform(ActionBounds(0.0, 1.0), resolution=4)


def test_select_action_endpoints_and_uniform_quantiles():
    a = init_uniform(ActionBounds(-2.0, 6.0))
    assert select_action(a, 0.0) == -2.0
    assert select_action(a, 1.0) == 6.0
    for z in (0.1, 0.25, 0.5, 0.9):
        assert select_action(a, z) == pytest.approx(-2.0 + 8.0 * z, abs=1e-12)
    with pytest.raises(ValueError):
        select_action(a, 1.5)


def test_select_action_rejects_unnormalized():
    a = init_uniform(ActionBounds(0.0, 1.0))
    bad = type(a)(DensityTable(a.bounds, a.density.values * 2), a.g_w, a.g_h)
    with pytest.raises(ValueError):
        select_action(bad, 0.5)


def test_update_keeps_unit_area(rng):
    # randomized bounds, actions and reinforcements, 10^4 updates in total
    for _ in range(20):
        lo = rng.uniform(-100, 100)
        b = ActionBounds(lo, lo + rng.uniform(0.1, 300))
        a = init_uniform(b, g_w=rng.uniform(0.005, 0.2), g_h=rng.uniform(0.05, 1.0))
        for _ in range(500):
            a = update_density(a, rng.uniform(b.min, b.max), rng.uniform(0, 1))
            v = a.density.values
            area = trapz_cdf(v, a.density.dx)
            assert abs(area[-1] - 1.0) <= 1e-9
            assert np.all(np.diff(area) >= 0)


def test_update_raises_density_near_action():
    a = init_uniform(ActionBounds(0.0, 255.0))
    b = update_density(a, 100.0, 1.0)
    grid = a.density.grid
    assert b.density.values[np.argmin(abs(grid - 100))] > a.density.values[0]
    assert b.density.values[0] < a.density.values[0]
    assert b.density.values[0] > 0


def test_update_beta_zero_is_identity():
    a = init_uniform(ActionBounds(0.0, 1.0))
    assert update_density(a, 0.3, 0.0) is a
    with pytest.raises(ValueError):
        update_density(a, 0.3, 1.5)
    with pytest.raises(ValueError):
        update_density(a, 2.0, 0.5)


def test_update_matches_definition():
    a = init_uniform(ActionBounds(0.0, 10.0))
    r, beta = 3.3, 0.7
    v = a.density.values + beta * neighborhood(a, a.density.grid, r)
    v /= trapz_cdf(v, a.density.dx)[-1]
    np.testing.assert_allclose(update_density(a, r, beta).density.values, v, rtol=1e-13)


def test_select_action_ks(rng):
    a = trained(rng)
    dens = a.density
    z = rng.random(100_000)
    draws = np.array([select_action(a, float(v)) for v in z])
    cdf = trapz_cdf(dens.values, dens.dx)
    cdf /= cdf[-1]
    draws.sort()
    model = np.interp(draws, dens.grid, cdf)
    n = draws.size
    ks = max(np.max(np.arange(1, n + 1) / n - model), np.max(model - np.arange(n) / n))
    assert ks <= 0.01


def test_window_fifo():
    w = ReferenceWindow(3)
    for c in (5, 4, 3, 2):
        push_cost(w, c)
    assert w.costs == [4, 3, 2]
    with pytest.raises(ValueError):
        push_cost(w, float("nan"))
    with pytest.raises(ValueError):
        ReferenceWindow(1)


def test_beta_hand_case():
    w = ReferenceWindow(5, [1, 2, 3, 4, 5])
    assert compute_beta(w, 1.5) == pytest.approx(0.75)
    assert compute_beta(w, 1.0) == 1.0
    assert compute_beta(w, 3.0) == 0.0
    assert compute_beta(w, 4.0) == 0.0


def test_beta_flat_window():
    w = ReferenceWindow(4, [2.0, 2.0, 2.0])
    assert compute_beta(w, 2.0) == 1.0
    assert compute_beta(w, 2.5) == 0.0
    with pytest.raises(ValueError):
        compute_beta(ReferenceWindow(4), 1.0)


def test_beta_random_windows(rng):
    for _ in range(10_000):
        w = ReferenceWindow(25, rng.exponential(size=int(rng.integers(1, 26))))
        j = float(rng.exponential())
        push_cost(w, j)
        b = compute_beta(w, j)
        assert 0.0 <= b <= 1.0


def test_discrete_lri():
    d = DiscreteAutomaton.uniform(4, 0.1)
    d2 = discrete_lri_update(d, 2, 1.0)
    assert d2.probs[2] == pytest.approx(0.25 + 0.1 * 0.75)
    assert d2.probs[0] == pytest.approx(0.225)
    assert abs(d2.probs.sum() - 1.0) <= 1e-15
    assert discrete_lri_update(d, 1, 0.0).probs.tolist() == d.probs.tolist()
    assert d.choose(0.0) == 0 and d.choose(0.99) == 3
    with pytest.raises(IndexError):
        discrete_lri_update(d, 4, 0.5)


def test_density_csv(tmp_path):
    a = init_uniform(ActionBounds(0.0, 1.0), resolution=8)
    path = write_density_csv(a.density, tmp_path, "mu1", 500)
    lines = path.read_text().splitlines()
    assert path.name == "density_mu1_500.csv"
    assert lines[0] == "x,f" and len(lines) == 10
