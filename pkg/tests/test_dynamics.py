import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from driftlab.asym import small_beta_speed
from driftlab.dynamics import (Frame, IntegratorConfig, Method, SpaceTimeRecord, _rk4_step,
                               default_dt, integrate, mass_partition, measure_drift_speed,
                               peak_position, selfsimilar_collapse)
from driftlab.errors import DivergenceError, DomainError, EstimatorError
from driftlab.model import (BiasKind, BiasModel, LatticeState, dispersion, moment_rates,
                            one_site_party, uniform_state)
from driftlab.verify import first_moment_error, mass_drift

SELF = BiasKind.SELF_INCITEMENT


def run(state, beta, t_end, kind=SELF, ell=1, **kw):
    return integrate(state, BiasModel(kind, beta, ell), IntegratorConfig(t_end=t_end, **kw))


def test_config_validation():
    with pytest.raises(DomainError):
        IntegratorConfig(t_end=1.0, dt=0.0)
    with pytest.raises(DomainError):
        IntegratorConfig(t_end=1.0, rtol=-1.0)
    with pytest.raises(DomainError):
        IntegratorConfig(t_end=1.0, method=Method.RK45, rtol=1e-13)
    with pytest.raises(ValueError):
        IntegratorConfig(t_end=1.0, method="euler")


def test_default_step():
    assert default_dt(0.0, 1.0) == 0.01
    assert default_dt(1.0, 10.0) == pytest.approx(0.1 / 40)


def test_uniform_state_is_stationary():
    state = uniform_state(1.0, 40, periodic=True)
    rec = run(state, 0.0, 10.0, output_dt=1.0)
    assert np.max(np.abs(rec.snapshots[-1].values - state.values)) <= 1e-10


def test_output_cadence_and_times():
    rec = run(one_site_party(), 0.1, 5.0, output_dt=0.5)
    assert np.allclose(rec.times, np.arange(11) * 0.5)
    assert np.all(np.diff(rec.times) > 0)


@pytest.mark.parametrize("kind", list(BiasKind))
def test_mass_conservation_all_bias_kinds(kind):
    assert mass_drift(kind) <= 1e-8


def test_mass_conservation_adaptive():
    rec = run(one_site_party(), 0.3, 30.0, method=Method.RK45, output_dt=5.0)
    m = rec.masses()
    assert np.max(np.abs(m - m[0])) <= 1e-8


def test_first_moment_rate_fourth_order():
    e1, e2 = first_moment_error(1e-2), first_moment_error(5e-3)
    assert e1 < 1e-6
    assert np.log2(e1 / e2) == pytest.approx(4.0, abs=0.3)


@pytest.mark.parametrize("sigma", [np.pi / 6, np.pi / 3, np.pi / 2])
@pytest.mark.parametrize("beta", [0.0, 1.0])
def test_linear_growth_matches_dispersion(sigma, beta):
    n = 24 if sigma != np.pi / 2 else 16
    k = np.arange(n)
    eps = 1e-6
    state = LatticeState(1.0 + eps * np.cos(sigma * k), periodic=True)
    t_end = 4.0
    rec = run(state, beta, t_end, output_dt=t_end)
    lam = dispersion(sigma, beta, 1.0)
    dev = rec.snapshots[-1].values - 1.0
    # project on the complex mode and read off its amplitude
    amp = np.abs(np.sum(dev * np.exp(-1j * sigma * k))) / (n / 2)
    rate = np.log(amp / eps) / t_end
    assert rate == pytest.approx(np.real(lam), rel=0.01, abs=1e-3)


def test_frame_invariance():
    fixed = run(one_site_party(), 0.2, 40.0, output_dt=2.0)
    moving = run(one_site_party(), 0.2, 40.0, output_dt=2.0, frame=Frame.ADAPTIVE_PEAK)
    assert moving.snapshots[-1].frame_shift != 0
    assert np.allclose(fixed.mean_opinions(), moving.mean_opinions(), rtol=0, atol=1e-10)
    assert np.allclose(fixed.peak_positions, moving.peak_positions, rtol=0, atol=1e-10)
    assert np.allclose(fixed.mass_partition, moving.mass_partition, rtol=0, atol=1e-10)


def test_window_grows_with_the_party():
    rec = run(one_site_party(pad=3), 0.5, 60.0, output_dt=5.0)
    assert rec.stats["extensions"] >= 1
    last = rec.snapshots[-1]
    assert abs(last.values[0]) <= 1e-14 and abs(last.values[-1]) <= 1e-14


def test_divergence_is_reported():
    # the alternating mode decays at rate 8, outside the RK4 stability region for dt = 0.5
    state = LatticeState(1.0 + 0.1 * (-1.0) ** np.arange(30), periodic=True)
    with pytest.raises(DivergenceError):
        run(state, 0.0, 200.0, dt=0.5)


def test_compromise_bias_does_not_drift():
    rec = run(one_site_party(mass=1.0), 0.7, 30.0, kind=BiasKind.COMPROMISE, output_dt=1.0)
    assert np.all(rec.peak_positions == rec.peak_positions[0])


def test_peak_position_parabolic():
    # samples of -(x - 0.3)^2 + 5 at -1, 0, 1 recover the vertex
    state = LatticeState(np.array([0.0, 5 - 1.69, 5 - 0.09, 5 - 0.49, 0.0]), origin_index=-2)
    assert peak_position(state) == pytest.approx(0.3, abs=1e-14)


# drift speed ------------------------------------------------------------------


def test_speed_without_bias_is_zero():
    rec = run(one_site_party(), 0.0, 20.0, output_dt=1.0)
    assert abs(measure_drift_speed(rec)) <= 1e-10


def test_short_window_is_rejected():
    rec = run(one_site_party(), 0.05, 10.0, output_dt=0.1)
    with pytest.raises(EstimatorError):
        measure_drift_speed(rec)


def test_weak_bias_speed_at_beta_002():
    beta = 0.02
    period = 1.0 / small_beta_speed(beta, with_correction=True)
    rec = run(one_site_party(), beta, 6.5 * period, output_dt=0.05)
    v = -measure_drift_speed(rec, (1.5 * period, 6.5 * period))
    assert v == pytest.approx(small_beta_speed(beta, with_correction=True), rel=0.03)


def test_short_run_at_beta_005():
    # one traversal only: the plain least-squares slope is close to the
    # corrected speed, and well below the leading-order 2 beta / pi
    beta = 0.05
    rec = run(one_site_party(), beta, 40.0, output_dt=0.05)
    slope = -np.polyfit(rec.times, rec.mean_opinions(), 1)[0]
    assert slope == pytest.approx(small_beta_speed(beta, with_correction=True), rel=0.03)
    assert abs(slope - small_beta_speed(beta)) / small_beta_speed(beta) > 0.1


def test_linear_bias_initial_speed():
    rec = run(one_site_party(pad=6), 0.1, 30.0, kind=BiasKind.LINEAR, ell=1, output_dt=0.1)
    assert abs(measure_drift_speed(rec, (0.0, 30.0))) == pytest.approx(0.1, rel=0.1)


# mass partition and the linear-bias tails ----------------------------------


def test_partition_of_one_site_party():
    assert mass_partition(one_site_party(mass=2.5)) == (2.5, 0.0, 0.0)


@given(st.lists(st.floats(0, 5), min_size=1, max_size=30), st.booleans())
def test_partition_sums_to_total(values, periodic):
    values = np.array(values)
    if not np.any(values):
        values[0] = 1.0
    state = LatticeState(values, periodic=periodic)
    party, trailing, leading = mass_partition(state)
    assert party + trailing + leading == state.mass
    assert min(party, trailing) >= 0


def test_partition_rejects_empty_state():
    with pytest.raises(DomainError):
        mass_partition(LatticeState(np.zeros(5)))


@pytest.fixture(scope="module")
def linear_bias_run():
    return run(one_site_party(pad=8), 0.1, 800.0, kind=BiasKind.LINEAR, ell=1,
               method=Method.RK45, rtol=1e-10, output_dt=10.0)


@pytest.mark.slow
def test_party_mass_decays_monotonically(linear_bias_run):
    rec = linear_bias_run
    fraction = rec.mass_partition[:, 0] / rec.masses()
    after = fraction[rec.times >= 50.0]
    assert np.all(np.diff(after) < 0)


@pytest.mark.slow
def test_leading_edge_collapses(linear_bias_run):
    assert selfsimilar_collapse(linear_bias_run, [200.0, 400.0, 800.0]) < 0.1


def test_collapse_of_identical_snapshots_is_zero(linear_bias_run):
    assert selfsimilar_collapse(linear_bias_run, [400.0, 400.0, 400.0]) == 0.0


def test_collapse_without_bias_has_no_tail():
    rec = run(one_site_party(), 0.0, 30.0, kind=BiasKind.COMPROMISE, output_dt=10.0)
    assert max(s.values[s.indices < -5].sum() for s in rec.snapshots) < 1e-12
    with pytest.raises(EstimatorError):
        selfsimilar_collapse(rec, [10.0, 20.0, 30.0])


def test_record_lookup():
    rec = run(one_site_party(), 0.1, 2.0, output_dt=0.5)
    assert isinstance(rec, SpaceTimeRecord)
    assert rec.at_time(1.04) is rec.snapshots[2]


def test_rk4_step_is_exact_on_equilibria():
    P = np.zeros(9)
    P[4] = 1.0
    assert np.array_equal(_rk4_step(P, 0.1, BiasModel(SELF, 0.0), False), P)
    _, d1 = moment_rates(LatticeState(P), BiasModel(SELF, 0.0))
    assert d1 == 0.0
