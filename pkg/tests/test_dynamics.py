import math

import numpy as np
import pytest

from cascade_sub.fock import (
    DensityMatrix,
    FockBasis,
    build_basis,
    collective_lowering,
    embed_with_vacuum,
    mode_annihilator,
    partial_trace,
)
from cascade_sub.dynamics import (
    CascadeParams,
    ConvergenceError,
    IntegrationError,
    build_effective_liouvillian,
    build_hamiltonian,
    build_liouvillian,
    evolve,
    measure,
    steady_state,
    _steady_state_stepping,
)
from cascade_sub.subradiance import (
    analytic_p1_n2,
    ground_state,
    subradiant_state_n2,
    subradiant_state_n3,
)


def params(eps=0.3, kappa=0.2, g=1.0):
    return CascadeParams(g=g, epsilon=eps, kappa=kappa)


def initial(N, basis):
    return DensityMatrix.fock_state((N, 0, 0, 0), basis)


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------

def test_hamiltonian_hermitian():
    b = build_basis(2, 4)
    H = build_hamiltonian(b, params(eps=0.7))
    assert np.max(np.abs(H - H.conj().T)) < 1e-14


def test_hamiltonian_annihilates_dark_states():
    b = build_basis(2, 4)
    H = build_hamiltonian(b, params(eps=0.4))
    sr = subradiant_state_n2(0.4)
    vec = embed_with_vacuum(sr.vector, sr.basis, b)
    assert np.linalg.norm(H @ vec) < 1e-14
    assert np.linalg.norm(H @ b.basis_vector((0, 0, 2, 0))) == 0.0


def test_hamiltonian_matrix_element():
    # one-photon-absorption element out of |1,1,0,1>: magnitude g*sqrt(2),
    # purely imaginary with the assembled sign -i
    b = build_basis(2, 4)
    H = build_hamiltonian(b, params(eps=0.3, g=1.0))
    elem = H[b.state_index((2, 0, 0, 0)), b.state_index((1, 1, 0, 1))]
    assert elem == pytest.approx(-1j * math.sqrt(2), abs=1e-14)


# ---------------------------------------------------------------------------
# Liouvillians
# ---------------------------------------------------------------------------

def test_liouvillian_annihilates_dark_projector():
    for N, make_sr in ((2, subradiant_state_n2), (3, subradiant_state_n3)):
        b = build_basis(N, 2)
        L = build_liouvillian(b, params(eps=0.5, kappa=0.7))
        sr = make_sr(0.5)
        vec = embed_with_vacuum(sr.vector, sr.basis, b)
        rho = np.outer(vec, vec.conj())
        assert np.linalg.norm(L.matrix @ rho.flatten()) < 1e-12
        assert np.linalg.norm(L.apply(rho)) < 1e-12


def test_liouvillian_trace_preserving():
    rng = np.random.default_rng(5)
    b = build_basis(2, 2)
    L = build_liouvillian(b, params(eps=0.8, kappa=1.3))
    m = rng.normal(size=(b.dim, b.dim)) + 1j * rng.normal(size=(b.dim, b.dim))
    rho = m + m.conj().T
    out = (L.matrix @ rho.flatten()).reshape(b.dim, b.dim)
    assert abs(np.trace(out)) < 1e-12
    assert np.allclose(out, L.apply(rho), atol=1e-13)


def test_liouvillian_kappa_zero_pure_commutator():
    b = build_basis(2, 2)
    p = params(eps=0.5, kappa=0.0)
    L = build_liouvillian(b, p)
    H = build_hamiltonian(b, p)
    eye = np.eye(b.dim)
    want = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    assert np.max(np.abs(L.matrix - want)) < 1e-14


def test_effective_liouvillian_basics():
    ab = FockBasis.atomic(2)
    p = params(eps=0.4, kappa=2.0)
    L = build_effective_liouvillian(ab, p)
    # S- annihilates the dark state for any eps
    sm = collective_lowering(ab, 0.4)
    assert np.linalg.norm(sm @ subradiant_state_n2(0.4).vector) < 1e-14
    # ground state is stationary
    g = DensityMatrix.fock_state((0, 0, 2), ab)
    assert np.linalg.norm(L.apply(g.matrix)) < 1e-14
    with pytest.raises(ValueError):
        build_effective_liouvillian(ab, params(kappa=0.0))


def test_effective_equation_reproduces_closed_form_p1():
    # integrate the cavity-eliminated equation to stationarity: the dark-state
    # weight must match the closed form independently of Gamma
    ab = FockBasis.atomic(2)
    for eps in (0.3, 0.7, 2.0):
        L = build_effective_liouvillian(ab, params(eps=eps, kappa=1.7))
        r0 = DensityMatrix.fock_state((2, 0, 0), ab)
        res = steady_state(L, r0, dt=0.005)
        assert measure(res.state, eps).p1 == pytest.approx(analytic_p1_n2(eps), abs=1e-8)


def test_nullspace_dimension_counts_dark_manifold():
    # two dark states (ground + p=1) support a 4-dimensional stationary
    # operator manifold (including their mutual coherences)
    b = build_basis(2, 1)
    L = build_liouvillian(b, params(eps=0.5, kappa=0.6))
    assert L.nullspace_dimension() == 4


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------

def test_evolve_reference_run_n2():
    b = build_basis(2, 4)
    L = build_liouvillian(b, params(eps=0.3, kappa=0.2))
    traj = evolve(L, initial(2, b), t_end=60.0)
    # photons escape, lower-level occupations saturate at non-zero values
    assert traj.nph[-1] < 1e-4
    assert traj.n0[-1] > 0.02 and traj.n1[-1] > 0.02
    assert traj.p0[-1] + traj.p1[-1] > 0.999
    # invariants along the trajectory
    assert np.max(np.abs(traj.n0 + traj.n1 + traj.n2 - 2.0)) < 1e-8
    assert np.all((traj.p0 > -1e-10) & (traj.p0 < 1 + 1e-10))
    assert np.all((traj.p1 > -1e-10) & (traj.p1 < 1 + 1e-10))
    assert traj.trace_drift < 1e-6
    assert traj.times[0] == 0.0
    assert traj.n0[0] == pytest.approx(2.0) and traj.nph[0] == 0.0


def test_evolve_unitary_preserves_purity():
    b = build_basis(2, 4)
    L = build_liouvillian(b, params(eps=0.5, kappa=0.0))
    traj = evolve(L, initial(2, b), t_end=5.0)
    assert np.max(np.abs(traj.purity - 1.0)) < 1e-8


def test_evolve_instability_aborts():
    b = build_basis(2, 4)
    L = build_liouvillian(b, params(eps=0.3, kappa=0.2))
    with pytest.raises(IntegrationError):
        evolve(L, initial(2, b), t_end=400.0, dt=2.0)


def test_evolve_n3_probabilities_saturate():
    b = build_basis(3, 6)
    L = build_liouvillian(b, params(eps=0.5, kappa=0.3))
    traj = evolve(L, initial(3, b), t_end=80.0)
    assert traj.p0[-1] + traj.p1[-1] > 0.999
    assert min(traj.n0[-1], traj.n1[-1], traj.n2[-1]) > 0.05
    assert traj.top_layer_max < 1e-8


# ---------------------------------------------------------------------------
# steady states
# ---------------------------------------------------------------------------

def test_steady_state_dark_subspace_fidelity():
    b = build_basis(2, 4)
    L = build_liouvillian(b, params(eps=0.3, kappa=0.2))
    result = steady_state(L, initial(2, b))
    rho = result.state
    rho.validate()
    # photon mode relaxes to vacuum
    a = mode_annihilator(b, "photon").matrix
    nph = float(np.real(np.trace(a.conj().T @ a @ rho.matrix)))
    assert nph < 1e-6
    # all weight inside span{|sr>_0, |sr>_1} (x) |vac>
    v0 = embed_with_vacuum(ground_state(2).vector, FockBasis.atomic(2), b)
    v1 = embed_with_vacuum(subradiant_state_n2(0.3).vector, FockBasis.atomic(2), b)
    proj = np.outer(v0, v0.conj()) + np.outer(v1, v1.conj())
    fidelity = float(np.real(np.trace(proj @ rho.matrix)))
    assert fidelity > 0.999
    assert result.residual < 1e-10
    assert result.t_converged > 0


def test_steady_state_superradiant_at_unit_ratio():
    b = build_basis(2, 4)
    L = build_liouvillian(b, params(eps=1.0, kappa=10.0))
    result = steady_state(L, initial(2, b))
    target = b.basis_vector((0, 0, 2, 0))
    overlap = float(np.real(target.conj() @ result.state.matrix @ target))
    assert overlap > 0.999


def test_steady_state_stationary_mixture_structure():
    # photon-reduced steady state is the dark/ground mixture with no coherence
    b = build_basis(2, 4)
    eps = 0.3
    L = build_liouvillian(b, params(eps=eps, kappa=0.2))
    result = steady_state(L, initial(2, b))
    red = partial_trace(result.state, keep=("0", "1", "2"))
    v0 = ground_state(2).vector
    v1 = subradiant_state_n2(eps).vector
    p0 = float(np.real(v0.conj() @ red.matrix @ v0))
    p1 = float(np.real(v1.conj() @ red.matrix @ v1))
    coh = abs(v0.conj() @ red.matrix @ v1)
    assert p0 + p1 == pytest.approx(1.0, abs=1e-6)
    assert coh < 1e-12
    rebuilt = p1 * np.outer(v1, v1.conj()) + p0 * np.outer(v0, v0.conj())
    assert np.max(np.abs(rebuilt - red.matrix)) < 1e-6


def test_steady_state_sector_and_stepping_agree():
    b = build_basis(2, 4)
    p = params(eps=0.5, kappa=1.0)
    L = build_liouvillian(b, p)
    fast = steady_state(L, initial(2, b))
    slow = _steady_state_stepping(L, initial(2, b), p.default_dt, 1e-10, 1e6)
    assert fast.info["method"] == "sector-power"
    assert np.max(np.abs(fast.state.matrix - slow.state.matrix)) < 1e-9


def test_steady_state_nonconvergence_error():
    b = build_basis(2, 4)
    L = build_liouvillian(b, params(eps=0.3, kappa=0.2))
    with pytest.raises(ConvergenceError) as err:
        steady_state(L, initial(2, b), t_max=0.5)
    assert err.value.residual > 0


# ---------------------------------------------------------------------------
# measure
# ---------------------------------------------------------------------------

def test_measure_initial_state():
    b = build_basis(2, 4)
    obs = measure(initial(2, b), epsilon=0.3)
    assert obs.n0 == pytest.approx(2.0)
    assert obs.n1 == obs.n2 == obs.nph == 0.0
    assert obs.p0 == 0.0
    assert obs.purity == pytest.approx(1.0)


def test_measure_dark_state_projector():
    sr = subradiant_state_n2(0.7)
    rho = DensityMatrix.pure(sr.vector, sr.basis)
    obs = measure(rho, epsilon=0.7)
    assert obs.p1 == pytest.approx(1.0, abs=1e-12)
    assert obs.p0 == pytest.approx(0.0, abs=1e-12)


def test_measure_bad_cavity_p1_near_closed_form():
    # residual cavity corrections at kappa = 10 g shift P1 by O((g/kappa)^2)
    b = build_basis(2, 4)
    L = build_liouvillian(b, params(eps=0.3, kappa=10.0))
    result = steady_state(L, initial(2, b))
    p1 = measure(result.state, 0.3).p1
    assert p1 == pytest.approx(analytic_p1_n2(0.3), abs=5e-3)
