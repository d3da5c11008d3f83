import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from driftlab.errors import DomainError
from driftlab.model import (BiasKind, BiasModel, LatticeState, TwoSiteParty, dispersion,
                            dispersion_derivatives, lattice_rates, moment_rates, one_site_party,
                            rhs, uniform_state)


def scalar_rates(P, kind, beta, ell=1):
    """Site-by-site evaluation of the four lattice models, out-of-window values zero."""
    n = len(P)

    def at(i):
        return P[i] if 0 <= i < n else 0.0

    out = np.zeros(n)
    for i in range(n):
        p0, p1, m1, p2, m2 = at(i), at(i + 1), at(i - 1), at(i + 2), at(i - 2)
        if kind is BiasKind.COMPROMISE:
            out[i] = (2 - beta) * p1 * m1 - (1 - beta) * p0 * p2 - p0 * m2
            continue
        r = 2 * p1 * m1 - p0 * (p2 + m2)
        if kind is BiasKind.SELF_INCITEMENT:
            r += beta * (p1 ** 2 - p0 ** 2)
        elif kind is BiasKind.NEIGHBOR:
            r += beta * (p1 * p0 - p0 * m1)
        else:
            r += beta * (at(i + ell) - p0) / ell
        out[i] = r
    return out


def padded(values, pad=4):
    return np.concatenate((np.zeros(pad), values, np.zeros(pad)))


populations = arrays(np.float64, st.integers(1, 12), elements=st.floats(0.0, 3.0))
kinds = st.sampled_from(list(BiasKind))
betas = st.floats(0.0, 1.0)


def test_zero_state_has_zero_rates():
    state = LatticeState(np.zeros(9))
    for kind in BiasKind:
        assert np.all(rhs(state, BiasModel(kind, 0.5)) == 0.0)


def test_single_site_self_incitement_rates():
    beta = 0.37
    state = one_site_party(site=0, mass=1.0)
    rates = rhs(state, BiasModel(BiasKind.SELF_INCITEMENT, beta))
    i0 = list(state.indices).index(0)
    expected = np.zeros_like(rates)
    expected[i0 - 1] = beta
    expected[i0] = -beta
    assert np.array_equal(rates, expected)


def test_single_site_linear_bias_rates():
    beta = 0.21
    state = one_site_party(site=0, mass=1.0)
    rates = rhs(state, BiasModel(BiasKind.LINEAR, beta, 1))
    i0 = list(state.indices).index(0)
    assert rates[i0 - 1] == pytest.approx(beta, abs=1e-15)
    assert rates[i0] == pytest.approx(-beta, abs=1e-15)
    assert np.allclose(np.delete(rates, [i0 - 1, i0]), 0.0, atol=0)


def test_uniform_state_is_equilibrium_without_bias():
    state = uniform_state(0.8, 20, periodic=True)
    assert np.all(rhs(state, BiasModel(BiasKind.SELF_INCITEMENT, 0.0)) == 0.0)


@given(populations, kinds, betas, st.integers(1, 4))
def test_rates_match_scalar_oracle(P, kind, beta, ell):
    P = padded(P)
    bias = BiasModel(kind, beta, ell)
    assert np.allclose(lattice_rates(P, bias), scalar_rates(P, kind, beta, ell), rtol=0,
                       atol=1e-13 * max(1.0, P.max()) ** 2)


@given(populations, kinds, betas, st.integers(1, 4))
def test_rates_conserve_mass(P, kind, beta, ell):
    P = padded(P, pad=max(4, ell + 2))
    rates = rhs(LatticeState(P), BiasModel(kind, beta, ell))
    assert abs(rates.sum()) <= 1e-13 * max(P.sum(), 1.0) ** 2


@given(populations, kinds, betas, st.integers(1, 4), st.integers(-5, 5))
def test_first_moment_rate_matches_closed_form(P, kind, beta, ell, origin):
    P = padded(P, pad=max(4, ell + 2))
    state = LatticeState(P, origin_index=origin)
    bias = BiasModel(kind, beta, ell)
    direct = float(np.dot(state.indices, rhs(state, bias)))
    dmass, dmoment = moment_rates(state, bias)
    scale = max(1.0, float(np.sum(P)) ** 2 * (abs(origin) + P.size))
    assert dmass == 0.0
    assert abs(direct - dmoment) <= 1e-12 * scale


def test_moment_rates_vanish_without_bias():
    state = LatticeState(padded(np.array([0.3, 1.2, 0.5])))
    assert moment_rates(state, BiasModel(BiasKind.SELF_INCITEMENT, 0.0)) == (0.0, 0.0)


def test_one_site_first_moment_rate():
    m, beta = 1.7, 0.3
    _, d1 = moment_rates(one_site_party(mass=m), BiasModel(BiasKind.SELF_INCITEMENT, beta))
    assert d1 == pytest.approx(-beta * m * m, rel=1e-15)


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.9])
def test_two_site_mean_opinion_rate(alpha):
    beta = 0.2
    state = TwoSiteParty(3, alpha, 1.0).to_state()
    _, d1 = moment_rates(state, BiasModel(BiasKind.SELF_INCITEMENT, beta))
    assert d1 / state.mass == pytest.approx(-beta * (alpha ** 2 + (1 - alpha) ** 2), rel=1e-14)


@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5, 1.0])
def test_two_site_party_equilibria(alpha):
    state = TwoSiteParty(0, alpha, 2.0).to_state()
    assert np.all(rhs(state, BiasModel(BiasKind.SELF_INCITEMENT, 0.0)) == 0.0)
    assert np.all(rhs(state, BiasModel(BiasKind.COMPROMISE, 0.6)) == 0.0)


def test_one_site_party_is_equilibrium_of_neighbor_bias():
    assert np.all(rhs(one_site_party(mass=1.3), BiasModel(BiasKind.NEIGHBOR, 0.8)) == 0.0)


def test_validation():
    with pytest.raises(DomainError):
        LatticeState(np.array([1.0, -1e-6]))
    LatticeState(np.array([1.0, -1e-13]))
    with pytest.raises(DomainError):
        BiasModel(BiasKind.SELF_INCITEMENT, -0.1)
    with pytest.raises(DomainError):
        BiasModel(BiasKind.COMPROMISE, 1.5)
    with pytest.raises(DomainError):
        BiasModel(BiasKind.LINEAR, 0.1, 0)
    with pytest.raises(DomainError):
        TwoSiteParty(0, 1.2)


# dispersion -----------------------------------------------------------------


def linearised_symbol(sigma, beta, m, n=24, eps=1e-7):
    """Growth rate of a discrete Fourier mode from central differences of the lattice field."""
    k = np.arange(n)
    mode = np.cos(sigma * k)
    bias = BiasModel(BiasKind.SELF_INCITEMENT, beta)
    base = np.full(n, m)
    dF_cos = (lattice_rates(base + eps * mode, bias, True)
              - lattice_rates(base - eps * mode, bias, True)) / (2 * eps)
    mode_s = np.sin(sigma * k)
    dF_sin = (lattice_rates(base + eps * mode_s, bias, True)
              - lattice_rates(base - eps * mode_s, bias, True)) / (2 * eps)
    # J e^{i sigma k} = lambda e^{i sigma k}
    lam = (dF_cos + 1j * dF_sin) / np.exp(1j * sigma * k)
    return lam.mean()


@pytest.mark.parametrize("j", [1, 3, 4, 7, 12])
@pytest.mark.parametrize("beta", [0.0, 0.6, 1.7])
def test_dispersion_matches_linearised_lattice(j, beta):
    sigma = 2 * np.pi * j / 24
    assert dispersion(sigma, beta, 0.9) == pytest.approx(linearised_symbol(sigma, beta, 0.9),
                                                         abs=1e-7)


def test_dispersion_landmarks():
    assert abs(dispersion(0.0, 0.7, 1.3)) <= 1e-14
    assert dispersion(np.pi / 3, 0.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    s = np.linspace(-np.pi, np.pi, 20001)
    assert np.max(np.real(dispersion(s, 2.0, 1.0))) == pytest.approx(0.0, abs=1e-15)


def test_dispersion_without_bias_reduces():
    s = np.linspace(-3, 3, 13)
    assert np.allclose(dispersion(s, 0.0, 1.4), 2 * 1.4 * (2 * np.cos(s) - np.cos(2 * s) - 1),
                       atol=1e-14)


@given(st.floats(-3, 3), st.floats(-1.5, 1.5), st.floats(0, 3), st.floats(0.1, 5))
def test_dispersion_symmetries(sr, si, beta, m):
    s = complex(sr, si)
    assert dispersion(-s.conjugate(), beta, m) == pytest.approx(np.conj(dispersion(s, beta, m)),
                                                                abs=1e-10)
    assert np.real(dispersion(sr, beta, m)) == pytest.approx(np.real(dispersion(-sr, beta, m)),
                                                            abs=1e-12)


@given(st.floats(-3, 3), st.floats(-1, 1), st.floats(0, 2.5))
def test_dispersion_derivative_by_finite_differences(sr, si, beta):
    s = complex(sr, si)
    d1, d2 = dispersion_derivatives(s, beta, 1.1)
    h = 1e-5
    fd1 = (dispersion(s + h, beta, 1.1) - dispersion(s - h, beta, 1.1)) / (2 * h)
    fd2 = (dispersion(s + h, beta, 1.1) - 2 * dispersion(s, beta, 1.1)
           + dispersion(s - h, beta, 1.1)) / h ** 2
    assert d1 == pytest.approx(fd1, abs=1e-7)
    assert d2 == pytest.approx(fd2, abs=1e-3)


@pytest.mark.parametrize("beta", [0.1, 0.5, 1.0, 1.9, 2.0, 2.1, 3.0])
def test_instability_iff_beta_below_two(beta):
    s = np.linspace(0, np.pi, 200001)
    growth = np.max(np.real(dispersion(s, beta, 1.0)))
    if beta < 2:
        assert growth > 1e-9
    else:
        assert growth <= 1e-15
