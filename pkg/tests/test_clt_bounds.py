"""Bound reports, the three bound modes, and the inner-product fluctuation oracle."""

import itertools
import json
import math

import numpy as np
import pytest

from poisson_ustats import (
    AssumptionViolationError,
    BoundReport,
    BoxWindow,
    CapacityError,
    CellGrid,
    ConfigError,
    DegenerateFunctionalError,
    IntensityModel,
    Integrator,
    LineWindow,
    LocalityError,
    LocalTerm,
    MTerm,
    SimpleFunction,
    UStatKernel,
    counterexample_kernel,
    default_local_constant,
    enumerate_pi_bar,
    geometric_bound,
    gilbert_kernel,
    local_bound,
    make_kernel,
    r_terms_small,
    unit_ball_volume,
    wasserstein_bound,
)

UNIT_SQUARE = BoxWindow(((0.0, 1.0), (0.0, 1.0)))

JSON_FIELDS = [
    "mode",
    "k",
    "lambda",
    "variance",
    "variance_se",
    "m",
    "bound",
    "vtilde",
    "b_delta",
    "c_k",
]


def unit_count_kernel() -> UStatKernel:
    return UStatKernel(1, lambda t: np.ones(t.shape[0]), name="unit-count", geometric=True)


# ---------------------------------------------------------------------------
# report container


def _report(**overrides) -> BoundReport:
    base = dict(
        mode="general",
        k=2,
        lam=5.0,
        variance=3.0,
        variance_se=0.1,
        m=(MTerm(1, 1, 2.0, 0.05),),
        bound=1.5,
    )
    base.update(overrides)
    return BoundReport(**base)


def test_report_rejects_unknown_mode():
    with pytest.raises(ConfigError):
        _report(mode="sideways")


def test_report_rejects_negative_bound():
    with pytest.raises(ConfigError):
        _report(bound=-0.25)
    with pytest.raises(ConfigError):
        _report(bound=float("nan"))


def test_report_rejects_nonpositive_variance():
    with pytest.raises(ConfigError):
        _report(variance=0.0)
    with pytest.raises(ConfigError):
        _report(variance=-1.0)


def test_report_rejects_negative_m_entry():
    with pytest.raises(ConfigError):
        _report(m=(MTerm(1, 1, -0.5, 0.0),))


def test_report_json_field_order_and_round_trip():
    rep = _report(m=(MTerm(1, 1, 2.0, 0.05), MTerm(1, 2, 0.75, 0.01)))
    doc = json.loads(rep.to_json())
    assert list(doc) == JSON_FIELDS
    assert doc["lambda"] == 5.0
    assert doc["m"][1] == {"i": 1, "j": 2, "value": 0.75, "se": 0.01}
    assert BoundReport.from_json(rep.to_json()) == rep


def test_report_from_json_requires_every_field():
    doc = json.loads(_report().to_json())
    del doc["vtilde"]
    with pytest.raises(ConfigError, match="vtilde"):
        BoundReport.from_json(json.dumps(doc))


# ---------------------------------------------------------------------------
# general mode


def test_flat_count_bound_is_two_over_root_lam():
    integ = Integrator(samples=500, seed=3)
    for lam in (1.0, 4.0, 16.0, 100.0):
        rep = wasserstein_bound(unit_count_kernel(), IntensityModel(lam, UNIT_SQUARE), integ)
        assert rep.mode == "general"
        assert rep.bound == 2.0 / math.sqrt(lam)
        assert rep.variance == lam
        assert rep.variance_se == 0.0
        assert [(t.i, t.j) for t in rep.m] == [(1, 1)]
        assert rep.m[0].value == lam


def test_zero_kernel_is_refused():
    dead = UStatKernel(2, lambda t: np.zeros(t.shape[0]), name="zero")
    with pytest.raises(DegenerateFunctionalError, match="consistent with zero"):
        wasserstein_bound(dead, IntensityModel(3.0, UNIT_SQUARE), Integrator(samples=400, seed=1))


def test_signed_kernel_gets_a_note():
    integ = Integrator(samples=600, seed=11, strata=2)
    rep = wasserstein_bound(counterexample_kernel(), IntensityModel(4.0, BoxWindow(((-1.0, 1.0),))), integ)
    assert "negative values" in rep.notes
    pos = wasserstein_bound(unit_count_kernel(), IntensityModel(4.0, UNIT_SQUARE), integ)
    assert pos.notes == ""


# ---------------------------------------------------------------------------
# geometric mode


def test_geometric_mode_needs_the_flag():
    plain = UStatKernel(2, lambda t: np.ones(t.shape[0]), name="plain")
    with pytest.raises(ConfigError, match="intensity-independent"):
        geometric_bound(plain, IntensityModel(4.0, UNIT_SQUARE), Integrator(samples=200, seed=0))
    scaled = UStatKernel(
        1,
        lambda t: np.ones(t.shape[0]),
        geometric=True,
        intensity_factor=lambda lam: 1.0 / lam,
    )
    with pytest.raises(ConfigError, match="intensity-independent"):
        geometric_bound(scaled, IntensityModel(4.0, UNIT_SQUARE), Integrator(samples=200, seed=0))


def test_geometric_mode_needs_lam_at_least_one():
    kern = make_kernel("pairwise-distance")
    with pytest.raises(AssumptionViolationError, match="lam >= 1"):
        geometric_bound(kern, IntensityModel(0.5, UNIT_SQUARE), Integrator(samples=200, seed=0))


def test_geometric_mode_rejects_vanishing_first_order_part():
    # the sign kernel's first-order projection integrates to zero, so the
    # rate form has no Gaussian part to normalize by
    integ = Integrator(samples=800, seed=5, strata=2)
    window = BoxWindow(((-1.0, 1.0),))
    with pytest.raises(AssumptionViolationError, match="consistent with zero"):
        geometric_bound(counterexample_kernel(), IntensityModel(9.0, window), integ)


def test_quadrupling_lam_halves_the_geometric_bound():
    kern = make_kernel("pairwise-distance")
    integ = Integrator(samples=900, seed=21)
    reports = {
        lam: geometric_bound(kern, IntensityModel(lam, UNIT_SQUARE), integ)
        for lam in (4.0, 16.0, 64.0)
    }
    assert reports[16.0].bound == reports[4.0].bound / 2.0
    assert reports[64.0].bound == reports[16.0].bound / 2.0
    for lam, rep in reports.items():
        assert rep.mode == "geometric"
        assert rep.bound == rep.rate_factor / math.sqrt(lam)
        # the unit-intensity ingredients do not move with lam
        assert rep.vtilde == reports[4.0].vtilde
        assert [(t.i, t.j) for t in rep.m] == [(1, 1), (1, 2), (2, 2)]
        assert rep.m == reports[4.0].m


def test_geometric_and_general_agree_for_the_flat_count():
    integ = Integrator(samples=500, seed=7)
    model = IntensityModel(9.0, UNIT_SQUARE)
    geo = geometric_bound(unit_count_kernel(), model, integ)
    gen = wasserstein_bound(unit_count_kernel(), model, integ)
    assert geo.bound == pytest.approx(gen.bound, rel=1e-12)
    assert geo.bound == 2.0 / 3.0
    assert geo.vtilde == 1.0
    assert geo.variance == 9.0


# ---------------------------------------------------------------------------
# local mode


def test_default_local_constant_counts_connected_diagrams():
    assert default_local_constant(1) == 2.0
    expected = 0
    for i, j in ((1, 1), (1, 2), (2, 2)):
        expected += len(enumerate_pi_bar((i, i, j, j)))
    assert default_local_constant(2) == 2.0 * 2**3.5 * expected


def test_local_mode_needs_a_support_radius():
    kern = make_kernel("pairwise-distance")
    with pytest.raises(LocalityError, match="support diameter"):
        local_bound(kern, IntensityModel(25.0, UNIT_SQUARE), Integrator(samples=200, seed=0))


def test_local_mode_rejects_line_windows():
    kern = gilbert_kernel(0.1)
    with pytest.raises(ConfigError, match="spatial window"):
        local_bound(kern, IntensityModel(25.0, LineWindow(1.0)), Integrator(samples=200, seed=0))


def test_local_mode_input_validation():
    kern = gilbert_kernel(0.1)
    integ = Integrator(samples=200, seed=0)
    with pytest.raises(AssumptionViolationError, match="lam >= 1"):
        local_bound(kern, IntensityModel(0.25, UNIT_SQUARE), integ)
    with pytest.raises(ConfigError, match="c_k"):
        local_bound(kern, IntensityModel(25.0, UNIT_SQUARE), integ, c_k=0.0)


def test_local_mode_rejects_vanishing_first_order_part():
    base = counterexample_kernel()
    signed_local = UStatKernel(2, base.fn, name="signed-local", locality=4.0)
    integ = Integrator(samples=800, seed=5, strata=2)
    window = BoxWindow(((-1.0, 1.0),))
    with pytest.raises(AssumptionViolationError, match="consistent with zero"):
        local_bound(signed_local, IntensityModel(9.0, window), integ)


def test_local_report_ingredients():
    delta = 0.1
    lam = 25.0
    kern = gilbert_kernel(delta)
    rep = local_bound(kern, IntensityModel(lam, UNIT_SQUARE), Integrator(samples=1500, seed=13))
    assert rep.mode == "local"
    assert rep.m == ()
    assert rep.delta == delta
    assert rep.b_delta == lam * unit_ball_volume(2) * (4.0 * delta) ** 2
    assert rep.c_k == default_local_constant(2)
    assert math.isfinite(rep.bound) and rep.bound > 0
    assert len(rep.local_terms) == 2
    for i, term in enumerate(rep.local_terms, start=1):
        assert isinstance(term, LocalTerm)
        assert term.i == i
        assert term.weight == lam ** (1.0 - 1.5 * i) * max(1.0, rep.b_delta ** (i / 2.0))
        assert term.contribution == pytest.approx(term.weight * term.norm / rep.vtilde, rel=1e-12)
    assert rep.bound == pytest.approx(
        rep.c_k * math.fsum(t.contribution for t in rep.local_terms), rel=1e-12
    )


def test_local_bound_accepts_a_sharper_constant():
    kern = gilbert_kernel(0.1)
    model = IntensityModel(25.0, UNIT_SQUARE)
    integ = Integrator(samples=800, seed=13)
    loose = local_bound(kern, model, integ)
    tight = local_bound(kern, model, integ, c_k=1.0)
    assert tight.c_k == 1.0
    assert tight.bound == pytest.approx(loose.bound / default_local_constant(2), rel=1e-12)


# ---------------------------------------------------------------------------
# inner-product fluctuation oracle

GRID3 = CellGrid.regular((0.0,), (1.0,), (3,))
WINDOW3 = BoxWindow(((0.0, 1.0),))
F1 = SimpleFunction(GRID3, np.array([0.5, -0.25, 0.75]))
F2 = SimpleFunction(
    GRID3,
    np.array(
        [
            [0.0, 0.8, -0.4],
            [0.8, 0.0, 0.6],
            [-0.4, 0.6, 0.0],
        ]
    ),
)


def test_r_terms_input_validation():
    model = IntensityModel(2.0, WINDOW3)
    with pytest.raises(ConfigError, match="at least one"):
        r_terms_small([], model, replicates=100)
    with pytest.raises(ConfigError, match="not a cell-grid"):
        r_terms_small([lambda x: x], model, replicates=100)
    with pytest.raises(ConfigError, match="order 1"):
        r_terms_small([F2], model, replicates=100)
    with pytest.raises(ConfigError, match="2 batches"):
        r_terms_small([F1], model, replicates=30, batches=20)
    with pytest.raises(ConfigError, match="batches"):
        r_terms_small([F1], model, replicates=100, batches=1)
    other = SimpleFunction(CellGrid.regular((0.0,), (2.0,), (3,)), np.zeros((3, 3)))
    with pytest.raises(ConfigError, match="incompatible grids"):
        r_terms_small([F1, other], model, replicates=100)


def test_r_terms_capacity_limits():
    model = IntensityModel(2.0, WINDOW3)
    f3 = SimpleFunction(GRID3, np.zeros((3, 3, 3)))
    with pytest.raises(CapacityError, match="order <= 2"):
        r_terms_small([F1, F2, f3], model, replicates=100)
    wide = CellGrid.regular((0.0,), (1.0,), (33,))
    with pytest.raises(CapacityError, match="32 cells"):
        r_terms_small([SimpleFunction(wide, np.ones(33))], model, replicates=100)


def _centered_poisson_moment(mu: float, power: int) -> float:
    # E (N - mu)^p for N ~ Poisson(mu), p <= 4
    return {0: 1.0, 1: 0.0, 2: mu, 3: mu, 4: mu + 3.0 * mu**2}[power]


def test_r_terms_match_closed_form_moments():
    lam = 2.0
    model = IntensityModel(lam, WINDOW3)
    r, rt = r_terms_small([F1, F2], model, replicates=6000, seed=9, batches=20)

    mu = lam * GRID3.measures()
    a1 = F1.coeffs
    a2 = F2.coeffs

    # X_11 is nonrandom, so its variance vanishes
    assert abs(r[0][0].value) < 1e-20

    # X_12 = sum_d h_d (N_d - mu_d) with h = (mu a1) @ a2
    h = (mu * a1) @ a2
    x12_second_moment = float(np.sum(h**2 * mu))
    assert r[0][1].within(x12_second_moment, nse=4.0)
    assert r[1][0].value == r[0][1].value

    # X_22 = sum_{d,e} A_{de} (N_d - mu_d)(N_e - mu_e), A = a2^T diag(mu) a2
    big_a = a2.T @ (mu[:, None] * a2)
    mean_x22 = float(np.sum(np.diag(big_a) * mu))
    second = 0.0
    cells = range(GRID3.n_cells)
    for a, b, c, d in itertools.product(cells, repeat=4):
        counts = {}
        for idx in (a, b, c, d):
            counts[idx] = counts.get(idx, 0) + 1
        factor = 1.0
        for cell, mult in counts.items():
            factor *= _centered_poisson_moment(float(mu[cell]), mult)
        second += big_a[a, b] * big_a[c, d] * factor
    var_x22 = second - mean_x22**2
    assert r[1][1].within(var_x22, nse=4.0)

    # fourth-power cell sums
    w1_exact = float(np.sum(mu * a1**4))
    assert rt[0].value == pytest.approx(w1_exact, rel=1e-12)
    assert rt[0].se < 1e-12
    w2_exact = 0.0
    for c in cells:
        row = a2[c]
        w2_exact += float(mu[c]) * (
            float(np.sum(row**4 * mu)) + 3.0 * float(np.sum(row**2 * mu)) ** 2
        )
    assert rt[1].within(w2_exact, nse=4.0)
