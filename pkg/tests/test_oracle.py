import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from gkpmagic.core import CELL, SQRT_PI, bloch_normalized, heterodyne_to_outcome
from gkpmagic.gaussian import GaussianState, damped_occupation, thermal, vacuum
from gkpmagic.oracle import (CutoffError, OracleConfig, _ladder, approx_codeword,
                             bell_heterodyne_bloch, check_density, codeword_basis, coherent,
                             compare, damp_displaced_thermal, damped_thermal_diagonal,
                             displacement, ec_circuit_oracle, envelope_reference, fock_density,
                             hermite_functions, heterodyne_reference, logical_pauli,
                             oracle_bloch)

CFG = OracleConfig()
SMALL = OracleConfig(beta=0.08, cutoff=120)


def moments(rho):
    a = _ladder(rho.shape[0])
    q = (a + a.T) / math.sqrt(2)
    p = (a - a.T) / (1j * math.sqrt(2))
    mq, mp = np.trace(rho @ q).real, np.trace(rho @ p).real
    vqq = np.trace(rho @ q @ q).real - mq ** 2
    vpp = np.trace(rho @ p @ p).real - mp ** 2
    vqp = 0.5 * np.trace(rho @ (q @ p + p @ q)).real - mq * mp
    return np.array([mq, mp]), np.array([[vqq, vqp], [vqp, vpp]])


def test_config_validation():
    for kwargs in ({"beta": 0}, {"cutoff": 3}, {"cutoff": 513}, {"comb_halfwidth": 0}):
        with pytest.raises(ValueError):
            OracleConfig(**kwargs)


def test_hermite_functions_orthonormal():
    x = np.linspace(-30, 30, 6001)
    h = hermite_functions(40, x)
    gram = h @ h.T * (x[1] - x[0])
    assert np.allclose(gram, np.eye(40), atol=1e-10)


def test_codeword_peaks_at_even_multiples():
    vec = approx_codeword(0, OracleConfig(beta=0.05, cutoff=300))
    x = np.linspace(-6, 6, 4801)
    psi = vec @ hermite_functions(300, x)
    inner = (x > -5) & (x < 5)
    peaks = x[1:-1][(psi[1:-1] > psi[:-2]) & (psi[1:-1] > psi[2:]) & (psi[1:-1] > 0.3 * psi.max())
                    & inner[1:-1]]
    expect = np.array([-2, 0, 2]) * SQRT_PI
    assert len(peaks) == 3
    assert np.allclose(peaks, expect, atol=0.02)


def test_codeword_overlap_shrinks_with_beta():
    overlaps = [abs(approx_codeword(0, OracleConfig(beta=b, cutoff=200))
                    @ approx_codeword(1, OracleConfig(beta=b, cutoff=200)))
                for b in (0.3, 0.2, 0.1)]
    assert overlaps[0] > overlaps[1] > overlaps[2]


def test_codeword_zero_has_even_parity():
    vec = approx_codeword(0, CFG)
    assert np.abs(vec[1::2]).max() < 1e-12 * np.abs(vec).max()


def test_logical_pauli_spectra_and_algebra():
    basis = codeword_basis(CFG)
    assert np.allclose(basis.T @ basis, np.eye(2), atol=1e-12)
    ev0 = np.linalg.eigvalsh(logical_pauli(0, CFG))
    assert np.allclose(np.sort(ev0)[-2:], [1, 1], atol=1e-10)
    assert np.abs(np.sort(ev0)[:-2]).max() < 1e-10
    ev3 = np.sort(np.linalg.eigvalsh(logical_pauli(3, CFG)))
    assert ev3[0] == pytest.approx(-1, abs=1e-10) and ev3[-1] == pytest.approx(1, abs=1e-10)
    paulis = [logical_pauli(mu, CFG) for mu in range(4)]
    gram = np.array([[np.trace(a @ b).real for b in paulis] for a in paulis])
    assert np.allclose(gram, 2 * np.eye(4), atol=1e-8)
    assert np.abs(paulis[1] @ paulis[3] + paulis[3] @ paulis[1]).max() < 1e-8


@pytest.mark.parametrize("alpha", [0.3 + 0.4j, -1.2 + 0.1j, 2.0j])
def test_displacement_matches_expm(alpha):
    n = 60
    a = _ladder(n + 60)
    ref = expm(alpha * a.T - np.conj(alpha) * a)[:n, :n]
    assert np.abs(displacement(alpha, n) - ref).max() < 1e-10


def test_coherent_state_is_displaced_vacuum():
    alpha = 0.7 - 0.3j
    assert np.allclose(coherent(alpha, 80), displacement(alpha, 80)[:, 0], atol=1e-14)


@pytest.mark.parametrize("state", [
    vacuum(), thermal(0.4), GaussianState([0.5, -0.3], 0.9 * np.eye(2)),
    GaussianState([0.2, 0.1], [[0.3, 0.1], [0.1, 1.1]]),
], ids=["vacuum", "thermal", "displaced", "squeezed"])
def test_fock_density_reproduces_moments(state):
    rho = fock_density(state, 150)
    check_density(rho)
    assert np.allclose(rho, rho.conj().T, atol=1e-12)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)
    assert np.linalg.eigvalsh(rho).min() > -1e-10
    mean, cov = moments(rho)
    assert np.allclose(mean, state.mean, atol=1e-9)
    assert np.allclose(cov, state.cov, atol=1e-9)


def test_cutoff_too_small_is_detected():
    with pytest.raises(CutoffError):
        check_density(fock_density(thermal(5.0), 20))


@given(st.floats(0, 3), st.floats(0.01, 1))
@settings(max_examples=25)
def test_damped_diagonal_is_geometric(nbar, beta):
    diag = damped_thermal_diagonal(nbar, beta, 400)
    ratio = math.exp(-2 * beta) * nbar / (nbar + 1)
    expect = (1 - ratio) * ratio ** np.arange(400)
    assert np.abs(diag - expect).max() < 1e-12
    n_prime = damped_occupation(nbar, beta)
    assert (np.arange(400) * diag).sum() == pytest.approx(n_prime, abs=1e-10)


def test_vacuum_origin_y_component_vanishes():
    b = oracle_bloch(vacuum(), (0, 0), CFG)
    assert abs(b.r[1]) < 1e-12 * b.r0


@pytest.mark.parametrize("seed", range(20))
def test_circuit_factorisations_agree(seed):
    rng = np.random.default_rng(seed)
    nbar = rng.uniform(0, 0.5)
    state = GaussianState(0.4 * rng.normal(size=2), (nbar + 0.5) * np.eye(2))
    t = rng.uniform(0, CELL, 2)
    direct = oracle_bloch(state, t, SMALL).vector
    qp = ec_circuit_oracle(state, t, SMALL, order="qp").vector
    pq = ec_circuit_oracle(state, t, SMALL, order="pq").vector
    assert np.abs(direct - qp).max() < 1e-10
    assert np.abs(qp - pq).max() < 1e-10


def test_displaced_damping_matches_fock_numerics():
    state = GaussianState([0.6, -0.4], 0.8 * np.eye(2))
    beta = 0.1
    k = np.diag(np.exp(-beta * np.arange(200)))
    rho = k @ fock_density(state, 200) @ k
    rho /= np.trace(rho)
    mean, cov = moments(rho)
    ref = damp_displaced_thermal(state, beta)
    assert np.allclose(mean, ref.mean, atol=1e-10)
    assert np.allclose(cov, ref.cov, atol=1e-10)
    with pytest.raises(ValueError):
        damp_displaced_thermal(GaussianState([0, 0], [[0.5, 0.1], [0.1, 1]]), beta)


@pytest.mark.parametrize("t", [(0.3, 1.2), (2.0, 0.7), (3.1, 3.3)])
def test_oracle_matches_envelope_reference(t):
    rep = compare(thermal(0.2), t, CFG)
    assert rep["abs_err"] < 1e-5
    assert set(rep) >= {"beta", "cutoff", "t", "bloch", "analytic_bloch", "abs_err"}


def test_raw_discrepancy_is_order_beta():
    rep = compare(vacuum(), (0.5, 1.0), CFG)
    assert 1e-3 < rep["raw_abs_err"] < 10 * CFG.beta
    assert np.allclose(envelope_reference(vacuum(), (0.5, 1.0), 1e-9).vector,
                       bloch_normalized(vacuum(), (0.5, 1.0)).vector, atol=1e-8)


@pytest.mark.parametrize("alpha", [0.2 + 0.1j, -0.6 + 0.5j, 0.9 - 1.1j])
def test_bell_pair_heterodyne(alpha):
    got = bell_heterodyne_bloch(alpha, CFG).normalized().vector
    ref = heterodyne_reference(alpha, CFG.beta).vector
    assert np.abs(got - ref).max() < 1e-5
    # against the ideal-code value the gap is the O(beta) envelope effect
    raw = bloch_normalized(vacuum(), heterodyne_to_outcome(alpha)).vector
    assert np.abs(got - raw).max() < 10 * CFG.beta
