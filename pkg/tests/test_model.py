import numpy as np
import pytest

from qdmro.lindblad import build_liouvillian_matrix, integrate
from qdmro.model import (
    CROSS_FORBIDDEN,
    DriveTerm,
    RateSet,
    build_channels,
    build_hamiltonian,
    build_transition_table,
    microwave_drives,
    readout_drives,
)
from qdmro.states import DensityMatrix, Level, mixed, pure_state
from qdmro.units import hz_to_rad_per_ns

L = Level


def by_name(channels):
    return {ch.name: ch for ch in channels}


def test_default_rates():
    r = RateSet()
    assert r.gamma_O == pytest.approx(2 * np.pi)
    assert r.gamma_F == pytest.approx(2 * np.pi * 1e-3)
    assert r.gamma_1 == pytest.approx(1e-5)
    assert r.gamma_2_ST == pytest.approx(1 / 200)
    assert r.gamma_2_T == pytest.approx(0.2)


def test_rate_validation():
    with pytest.raises(ValueError):
        RateSet(gamma_1=-1.0)
    with pytest.raises(ValueError):
        RateSet(depolarization_overrides=(((L.S, L.XP), 1.0),))
    with pytest.warns(UserWarning):
        RateSet(gamma_F=10.0, gamma_O=1.0)


def test_transition_table_contents():
    t = build_transition_table()
    assert (L.XP, L.TP) in t.allowed and (L.XM, L.TM) in t.allowed
    assert (L.XP, L.S) in t.forbidden and (L.XM, L.S) in t.forbidden
    assert set(CROSS_FORBIDDEN) <= set(t.forbidden)
    assert set(t.allowed).isdisjoint(t.forbidden)
    without = build_transition_table(include_cross=False)
    assert set(without.forbidden) == {(L.XP, L.S), (L.XM, L.S)}


def test_collected_iff_triplet_ground():
    for ch in build_channels(RateSet()):
        if "->" in ch.name and not ch.name.startswith(("depol", "dephase")):
            ground = Level.from_label(ch.name.split("->")[1])
            assert ch.collected == (ground in (L.T0, L.TP, L.TM)), ch.name
        else:
            assert not ch.collected


def test_channel_rates_and_ordering():
    rates = RateSet()
    chans = build_channels(rates)
    names = [c.name for c in chans]
    assert names[-2:] == ["dephase S-T0", "dephase T0-T+-"]
    depol = [c for c in chans if c.name.startswith("depol")]
    assert len(depol) == 12
    assert all(c.rate == pytest.approx(rates.gamma_1 / 3) for c in depol)
    ch = by_name(chans)
    assert ch["X+->T+"].rate == rates.gamma_O
    assert ch["X+->S"].rate == rates.gamma_F


def test_depolarization_override():
    rates = RateSet(depolarization_overrides=(((L.S, L.TP), 0.125),))
    ch = by_name(build_channels(rates))
    assert ch["depol S->T+"].rate == 0.125
    assert ch["depol T+->S"].rate == pytest.approx(rates.gamma_1 / 3)


def _coherence_decay(rates, a, b, t=3.0):
    psi = np.zeros(8, dtype=complex)
    psi[a] = psi[b] = 1 / np.sqrt(2)
    rho0 = DensityMatrix(np.outer(psi, psi.conj()))
    traj = integrate(rho0, np.zeros((8, 8)), build_channels(rates), t)
    return abs(traj.final_state[a, b]) / 0.5


@pytest.mark.parametrize(
    "pair, attr",
    [((L.S, L.T0), "gamma_2_ST"), ((L.T0, L.TP), "gamma_2_T"), ((L.T0, L.TM), "gamma_2_T")],
)
def test_dephasing_hits_each_coherence_at_its_rate(pair, attr):
    # only dephasing active, all other rates off
    rates = RateSet(gamma_O=0, gamma_F=0, gamma_1=0, gamma_2_ST=0.3, gamma_2_T=0.7)
    t = 3.0
    assert _coherence_decay(rates, *pair, t) == pytest.approx(np.exp(-getattr(rates, attr) * t), rel=1e-6)


def test_drive_hamiltonians():
    rates = RateSet()
    H = build_hamiltonian(readout_drives(rates))
    assert H[L.TP, L.XP] == pytest.approx(rates.omega_C / 2)
    assert H[L.XM, L.TM] == pytest.approx(rates.omega_C / 2)
    assert np.allclose(H, H.conj().T)
    Hm = build_hamiltonian(microwave_drives(rates))
    assert Hm[L.T0, L.TP] == Hm[L.T0, L.TM] == pytest.approx(rates.omega_MW / 2)
    assert np.count_nonzero(Hm) == 4
    det = build_hamiltonian([DriveTerm(L.S, L.T0, 1.0, detuning=0.25)])
    assert det[L.T0, L.T0] == 0.25


def test_duplicate_drive_rejected():
    with pytest.raises(ValueError):
        build_hamiltonian([DriveTerm(L.S, L.T0, 1.0), DriveTerm(L.T0, L.S, 2.0)])
    with pytest.raises(ValueError):
        DriveTerm(L.S, L.S, 1.0)


def test_full_generator_is_physical():
    rates = RateSet()
    M = build_liouvillian_matrix(build_hamiltonian(readout_drives(rates)), build_channels(rates))
    assert np.max(np.linalg.eigvals(M).real) <= 1e-10


def test_readout_initial_coherence_irrelevant():
    """The T+/T- coherence of the post-pulse state does not change emission."""
    rates = RateSet()
    H = build_hamiltonian(readout_drives(rates))
    chans = build_channels(rates)
    psi = np.zeros(8, dtype=complex)
    psi[L.TP] = psi[L.TM] = 1 / np.sqrt(2)
    coherent = DensityMatrix(np.outer(psi, psi.conj()))
    incoherent = mixed([(0.5, pure_state(L.TP)), (0.5, pure_state(L.TM))])
    times = np.array([10.0, 100.0, 500.0])
    a = integrate(coherent, H, chans, 500.0, sample_times=times)
    b = integrate(incoherent, H, chans, 500.0, sample_times=times)
    assert np.allclose(a.collected_emission(), b.collected_emission(), rtol=1e-7, atol=1e-9)
    assert np.allclose(a.population(L.S), b.population(L.S), atol=1e-9)


def test_hz_conversion_single_point():
    assert hz_to_rad_per_ns(1e9) == pytest.approx(2 * np.pi)
