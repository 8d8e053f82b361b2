import math
from fractions import Fraction

import numpy as np
import pytest

from cascade_sub.fock import FockBasis, collective_lowering
from cascade_sub.subradiance import (
    SubradianceError,
    analytic_p1_n2,
    dark_space,
    delta_p,
    epsilon_pair,
    ground_state,
    hyp2f1_terminating,
    kinetic_energy,
    log_sum_beta_sq,
    mean_k,
    mean_k_hypergeometric,
    normalization_constant,
    p_from_epsilon,
    qubit_pair,
    subradiant_amplitudes,
    subradiant_state,
    subradiant_state_n2,
    subradiant_state_n3,
)


# ---------------------------------------------------------------------------
# terminating hypergeometric sums
# ---------------------------------------------------------------------------

def exact_hyp(p, b, c, z):
    """Independent oracle: exact rational Pochhammer sum."""
    total = Fraction(0)
    for k in range(p + 1):
        num, den = Fraction(1), Fraction(1)
        for i in range(k):
            num *= Fraction(-p + i) * (Fraction(b) + i)
            den *= (Fraction(c) + i) * (i + 1)
        total += num / den * Fraction(z) ** k
    return total


def test_hyp2f1_empty_product():
    assert hyp2f1_terminating(0, 0.5, -7, 3.3) == 1.0


def test_hyp2f1_one_term():
    for z in (0.1, 1.0, 4.0):
        assert abs(hyp2f1_terminating(1, 0.5, -1, z) - (1 + z / 2)) < 1e-15


def test_hyp2f1_three_term_hand_sum():
    # 1 + 4/3 + 2 = 13/3 for parameters (-2, 1/2; -3; 4)
    val = hyp2f1_terminating(2, 0.5, -3, 4.0)
    assert abs(val - 13.0 / 3.0) < 1e-14
    assert abs(val - float(exact_hyp(2, Fraction(1, 2), -3, 4))) < 1e-14


def test_hyp2f1_matches_exact_oracle():
    for p, b, c, z in ((3, 0.5, -9, 2.0), (5, 1.5, -11, 0.25), (4, 0.5, -4, 9.0)):
        got = hyp2f1_terminating(p, b, c, z)
        want = float(exact_hyp(p, Fraction(b).limit_denominator(2), c, Fraction(z).limit_denominator()))
        assert abs(got - want) < 1e-12 * max(1.0, abs(want))


def test_hyp2f1_degenerate_parameters():
    with pytest.raises(SubradianceError):
        hyp2f1_terminating(2, 0.5, -1, 1.0)  # (c)_k hits zero at k = 2


# ---------------------------------------------------------------------------
# dark states
# ---------------------------------------------------------------------------

def test_two_atom_state_closed_form():
    # general family at (N=2, p=1) reproduces the explicit two-atom state
    for eps in (0.2, 0.5, 1.0, 2.0):
        general = subradiant_state(2, 1, eps)
        explicit = subradiant_state_n2(eps)
        overlap = abs(np.vdot(general.vector, explicit.vector))
        assert 1.0 - overlap < 1e-12


def test_two_atom_amplitudes():
    sr = subradiant_state_n2(0.5)
    nrm = math.sqrt(1 + 2 * 0.25)
    assert abs(sr.amplitude((0, 2, 0)) - 1 / nrm) < 1e-15
    assert abs(sr.amplitude((1, 0, 1)) + math.sqrt(2) * 0.5 / nrm) < 1e-15


def test_ground_state_any_epsilon():
    st = subradiant_state(4, 0, 0.7)
    assert abs(st.amplitude((0, 0, 4)) - 1.0) < 1e-15
    assert st.lowering_residual() < 1e-15


def test_lowering_residuals():
    for N, p, eps in ((4, 2, 0.5), (6, 3, 1.5), (10, 5, 0.2), (8, 1, 0.7)):
        assert subradiant_state(N, p, eps).lowering_residual() < 1e-12


def test_three_atom_state():
    sr = subradiant_state_n3(0.5)
    assert abs(sr.amplitude((0, 2, 1)) - 1 / math.sqrt(2)) < 1e-15
    assert abs(sr.amplitude((1, 0, 2)) + 1 / math.sqrt(2)) < 1e-15
    for eps in (0.1, 0.5, 2.0):
        assert subradiant_state_n3(eps).lowering_residual() < 1e-12
    assert abs(np.linalg.norm(subradiant_state_n3(0.5).vector) - 1.0) < 1e-15


def test_invalid_parameters():
    with pytest.raises(SubradianceError):
        subradiant_state(2, 1, 0.0)
    with pytest.raises(SubradianceError):
        subradiant_state(3, 1, 0.5)  # odd N goes through the N=3 form
    with pytest.raises(SubradianceError):
        subradiant_state(4, 3, 0.5)  # p > N/2


def test_dark_space_kernels():
    basis2 = FockBasis.atomic(2)
    kernel = dark_space(basis2, 0.5)
    assert kernel.shape[0] == 2
    # spanned by the ground state and the two-atom dark state
    for target in (ground_state(2).vector, subradiant_state_n2(0.5).vector):
        proj = kernel.conj() @ target
        residual = np.linalg.norm(target - kernel.T @ proj)
        assert residual < 1e-10

    basis3 = FockBasis.atomic(3)
    k3 = dark_space(basis3, 0.5)
    target = subradiant_state_n3(0.5).vector
    residual = np.linalg.norm(target - k3.T @ (k3.conj() @ target))
    assert residual < 1e-10

    assert dark_space(FockBasis.atomic(4), 0.5).shape[0] >= 3


def test_dark_space_vectors_annihilated():
    basis = FockBasis.atomic(4)
    sm = collective_lowering(basis, 0.7)
    for row in dark_space(basis, 0.7):
        assert np.linalg.norm(sm @ row) < 1e-10


# ---------------------------------------------------------------------------
# stationary weight and the p <-> eps maps
# ---------------------------------------------------------------------------

def test_analytic_p1_values():
    assert analytic_p1_n2(0.0) == 1.0
    assert analytic_p1_n2(1.0) == 0.0
    # 2*(0.91)^2 / (0.81 + 2*(0.91)^2)
    want = 2 * 0.91 ** 2 / (0.81 + 2 * 0.91 ** 2)
    assert abs(analytic_p1_n2(0.3) - want) < 1e-15
    assert abs(round(analytic_p1_n2(0.3), 5) - 0.67156) < 1e-12


def test_p_from_epsilon_branches():
    for N in (10, 50):
        assert abs(p_from_epsilon(N, 0.0) - N / 2) < 1e-12
        assert abs(p_from_epsilon(N, 1.0)) < 1e-12
        edge = 1 / math.sqrt(3)
        lo = 0.5 * N * (1 - 2 * edge ** 2) / (1 - edge ** 2)
        hi = N * ((1 - edge ** 2) / (1 + edge ** 2)) ** 2
        assert abs(lo - N / 4) < 1e-12 and abs(hi - N / 4) < 1e-12
        assert abs(p_from_epsilon(N, edge) - N / 4) < 1e-12
    with pytest.raises(SubradianceError):
        p_from_epsilon(50, 1 + math.sqrt(2) + 0.01)
    with pytest.raises(SubradianceError):
        p_from_epsilon(50, -0.1)


def test_epsilon_pair_product_and_roundtrip():
    for N, p in ((8, 2), (50, 10), (50, 5), (100, 25)):
        e0, e1 = epsilon_pair(N, p)
        assert e0 < e1
        assert abs(e0 * e1 - 1.0) < 1e-12
        assert abs(p_from_epsilon(N, e0) - p) < 1e-10
        assert abs(p_from_epsilon(N, e1) - p) < 1e-10
    # p -> 0: both roots collapse onto eps = 1
    e0, e1 = epsilon_pair(50, 1e-8)
    assert abs(e0 - 1.0) < 1e-4 and abs(e1 - 1.0) < 1e-4
    with pytest.raises(SubradianceError):
        epsilon_pair(8, 3)  # p > N/4


def test_normalization_identity():
    # |C_p|^-2 from the hypergeometric closed form vs the amplitude sum
    for N, p, eps in ((2, 1, 0.5), (4, 2, 0.2), (8, 3, 1.5), (50, 10, 0.7)):
        log_closed = -2.0 * math.log(normalization_constant(N, p, eps))
        rel = abs(math.exp(log_closed - log_sum_beta_sq(N, p, eps)) - 1.0)
        assert rel < 1e-10


def test_mean_k_identity():
    for N, p, eps in ((2, 1, 0.5), (8, 2, 0.7), (50, 10, 0.618), (50, 10, 1.618)):
        a = mean_k(N, p, eps)
        b = mean_k_hypergeometric(N, p, eps)
        assert abs(a - b) <= 1e-12 * max(1.0, a)


def test_mean_k_p1_single_term_ratio():
    # at p = 1 both series are single terms: kbar = z / (2(N-1) + z(...)) shape;
    # check against the amplitude route on several N
    for N in (2, 4, 8):
        for eps in (0.3, 1.2):
            assert abs(mean_k_hypergeometric(N, 1, eps) - mean_k(N, 1, eps)) < 1e-14


# ---------------------------------------------------------------------------
# qubit pair and the splitting
# ---------------------------------------------------------------------------

def test_qubit_pair_orthonormality():
    for N, p in ((8, 2), (50, 5), (50, 10)):
        pair = qubit_pair(N, p)
        assert abs(np.vdot(pair.phi_plus, pair.phi_minus)) < 1e-12
        assert abs(np.linalg.norm(pair.phi_plus) - 1.0) < 1e-12
        assert abs(np.linalg.norm(pair.phi_minus) - 1.0) < 1e-12


def test_qubit_pair_alpha_symmetric_and_members():
    pair = qubit_pair(8, 2)
    s0 = subradiant_state(8, 2, pair.eps0)
    s1 = subradiant_state(8, 2, pair.eps1)
    a01 = float(np.real(np.vdot(s0.vector, s1.vector)))
    a10 = float(np.real(np.vdot(s1.vector, s0.vector)))
    assert abs(a01 - a10) < 1e-15
    assert abs(pair.alpha - a01) < 1e-15
    # members reproduce the closed-form amplitudes at each root
    rebuilt = (pair.phi_plus * math.sqrt(2 * (1 + pair.alpha))
               + pair.phi_minus * math.sqrt(2 * (1 - pair.alpha))) / 2.0
    assert np.allclose(rebuilt, s0.vector, atol=1e-12)


def test_kinetic_energy_values():
    assert kinetic_energy(ground_state(5)) == pytest.approx(20.0)
    basis = FockBasis.atomic(4)
    assert kinetic_energy(basis.basis_vector((4, 0, 0)), basis) == 0.0
    # two-atom dark state at eps = 1: (2*1 + 2*4/... ) = (2 + 8)/3
    assert kinetic_energy(subradiant_state_n2(1.0)) == pytest.approx(10.0 / 3.0, abs=1e-12)


def test_kinetic_energy_dark_state_closed_form():
    # <K> = 4N - 4p - 2<k> on the dark-state support
    for N, p, eps in ((4, 2, 0.5), (8, 3, 1.1), (50, 10, 0.618)):
        sr = subradiant_state(N, p, eps)
        want = 4 * N - 4 * p - 2 * mean_k(N, p, eps)
        assert kinetic_energy(sr) == pytest.approx(want, rel=1e-12)


def test_delta_p_direct_is_expectation_difference():
    pair = qubit_pair(50, 10)
    result = delta_p(pair)
    # independent evaluation of both expectations over the raw tuples
    def kin(vec):
        return sum(abs(a) ** 2 * (s[1] + 4 * s[2])
                   for s, a in zip(pair.basis.states, vec))
    want = abs(kin(pair.phi_plus) - kin(pair.phi_minus))
    assert result.direct == pytest.approx(want, rel=1e-12)
    assert math.isfinite(result.printed)
    # the printed combination is not the expectation difference; record only
    assert result.discrepancy == pytest.approx(abs(result.direct - result.printed))


def test_delta_p_regression_n50():
    for p, direct_want in ((5, 2.34517360), (10, 3.33206146)):
        result = delta_p(qubit_pair(50, p))
        assert result.direct == pytest.approx(direct_want, abs=2e-7)


def test_amplitude_signs_alternate():
    amps = subradiant_amplitudes(6, 3, 0.8)
    assert amps[0] > 0
    for k in range(len(amps) - 1):
        assert amps[k] * amps[k + 1] < 0
