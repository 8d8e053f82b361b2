"""Closed-form subradiant (dark) states and the index/rate-ratio maps.

A state |sr>_p is annihilated by the collective lowering operator
S^- = c_1^dag c_0 + eps * c_2^dag c_1 and is therefore stationary under the
dissipative dynamics.  For even N there are N/2 such states (plus the ground
state at p = 0); their amplitudes live on the occupation tuples
(p-k, 2k, N-p-k) for k = 0..p and involve a terminating hypergeometric
normalization.  For N = 3 a single closed-form dark state exists.

Amplitudes are evaluated with log-factorials and sign tracking so that the
construction stays accurate up to N ~ 100; the documented accuracy floor for
the rate ratio is eps >= 1e-3 (amplitudes scale as (2 eps)^-k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import FockBasis, collective_lowering

EPSILON_MAX = 1.0 + math.sqrt(2.0)  # existence window edge for N >> 1
EPSILON_ACCURACY_FLOOR = 1e-3

KINETIC_WEIGHTS = (0.0, 1.0, 4.0)  # level m carries m^2 recoil quanta


class SubradianceError(ValueError):
    """Raised for parameters outside the constructible dark-state family."""


def hyp2f1_terminating(p: int, b: float, c: float, z: float) -> float:
    """Terminating Gauss series 2F1(-p, b; c; z) = sum_{k<=p} of Pochhammer terms.

    The first parameter -p makes the series a finite sum; `c` may be a
    non-positive integer as long as its Pochhammer factor stays non-zero
    through k = p, otherwise the parameters are degenerate and an error is
    raised.
    """
    if p < 0 or p != int(p):
        raise SubradianceError(f"first parameter must be -p with integer p >= 0, got p={p}")
    total, term = 1.0, 1.0
    for k in range(1, int(p) + 1):
        denom = c + k - 1
        if denom == 0:
            raise SubradianceError(
                f"third-parameter Pochhammer vanishes at k={k} before termination"
            )
        term *= (-p + k - 1) * (b + k - 1) / (denom * k) * z
        total += term
    return total


def _log_beta_sq(N: int, p: int, k: int, epsilon: float) -> float:
    """log of beta_k^2 where beta_k = (-1/(2 eps))^k / k! * sqrt((2k)!(N-p-k)!/(p-k)!)."""
    return (
        -2.0 * k * math.log(2.0 * epsilon)
        - 2.0 * math.lgamma(k + 1)
        + math.lgamma(2 * k + 1)
        + math.lgamma(N - p - k + 1)
        - math.lgamma(p - k + 1)
    )


def subradiant_tuples(N: int, p: int) -> list[tuple[int, int, int]]:
    """Support tuples (p-k, 2k, N-p-k) of the p-indexed dark state."""
    return [(p - k, 2 * k, N - p - k) for k in range(p + 1)]


def subradiant_amplitudes(N: int, p: int, epsilon: float) -> np.ndarray:
    """Normalized amplitudes over k = 0..p, k=0 entry real positive.

    Signs alternate as (-1)^k from the (-1/(2 eps))^k factor; magnitudes are
    accumulated in log space to avoid factorial overflow at large N.
    """
    if p == 0:
        return np.array([1.0])
    if epsilon <= 0:
        raise SubradianceError("epsilon must be > 0 for p >= 1 (amplitudes diverge at 0)")
    logs = np.array([_log_beta_sq(N, p, k, epsilon) for k in range(p + 1)])
    logs -= logs.max()
    mags = np.exp(0.5 * logs)
    signs = np.array([(-1.0) ** k for k in range(p + 1)])
    amps = signs * mags
    return amps / np.linalg.norm(amps)


def log_sum_beta_sq(N: int, p: int, epsilon: float) -> float:
    """log of sum_k beta_k^2 (the inverse squared normalization |C_p|^-2)."""
    if p == 0:
        return math.lgamma(N + 1)
    logs = np.array([_log_beta_sq(N, p, k, epsilon) for k in range(p + 1)])
    m = logs.max()
    return m + math.log(np.exp(logs - m).sum())


def normalization_constant(N: int, p: int, epsilon: float) -> float:
    """C_p from the hypergeometric closed form.

    The terminating series has all-positive terms for eps > 0, so the value
    under the square root is positive throughout; a guard is kept in case of
    out-of-family parameters.
    """
    f = hyp2f1_terminating(p, 0.5, p - N, epsilon ** -2)
    if f <= 0:
        raise SubradianceError(f"normalization series non-positive ({f}); C_p undefined")
    log_c2 = -(math.lgamma(N - p + 1) - math.lgamma(p + 1) + math.log(f))
    return math.exp(0.5 * log_c2)


@dataclass
class SubradiantState:
    """Dark-state coefficient vector on the atomic sector basis."""

    N: int
    p: int
    epsilon: float
    basis: FockBasis
    vector: np.ndarray

    def __post_init__(self):
        nrm = np.linalg.norm(self.vector)
        if abs(nrm - 1.0) > 1e-12:
            raise SubradianceError(f"state norm deviates from 1 by {abs(nrm - 1.0):.3e}")

    @property
    def tuples(self) -> list[tuple[int, int, int]]:
        return [s for s, a in zip(self.basis.states, self.vector) if a != 0]

    def amplitude(self, state: tuple[int, int, int]) -> complex:
        return self.vector[self.basis.state_index(state)]

    def mean_k(self) -> float:
        """<k> over the (p-k, 2k, N-p-k) support, i.e. <n_1>/2."""
        occ = sum(abs(a) ** 2 * s[1] for s, a in zip(self.basis.states, self.vector))
        return float(occ) / 2.0

    def occupations(self) -> tuple[float, float, float]:
        out = [0.0, 0.0, 0.0]
        for s, a in zip(self.basis.states, self.vector):
            w = abs(a) ** 2
            for j in range(3):
                out[j] += w * s[j]
        return tuple(out)

    def lowering_residual(self) -> float:
        sm = collective_lowering(self.basis, self.epsilon)
        return float(np.linalg.norm(sm @ self.vector))

    def to_json(self) -> dict:
        """Occupation tuple -> [re, im] amplitude map plus the parameters."""
        return {
            "N": self.N,
            "p": self.p,
            "epsilon": self.epsilon,
            "amplitudes": [
                [list(s), [float(np.real(a)), float(np.imag(a))]]
                for s, a in zip(self.basis.states, self.vector) if a != 0
            ],
        }


def _state_from_amps(N: int, p: int, epsilon: float, amps: np.ndarray,
                     basis: FockBasis | None = None) -> SubradiantState:
    basis = basis if basis is not None else FockBasis.atomic(N)
    vec = np.zeros(basis.dim, dtype=complex)
    for k, a in enumerate(amps):
        vec[basis.state_index((p - k, 2 * k, N - p - k))] = a
    return SubradiantState(N=N, p=p, epsilon=epsilon, basis=basis, vector=vec)


def subradiant_state(N: int, p: int, epsilon: float,
                     basis: FockBasis | None = None) -> SubradiantState:
    """The p-indexed dark state for even N (p = 0 is the ground state |0,0,N>).

    Odd N has no closed-form family here; use `subradiant_state_n3` for N = 3
    or `dark_space` for a numerical kernel basis.
    """
    if N < 2 or N % 2 != 0:
        raise SubradianceError(
            f"closed form requires even N >= 2 (got {N}); "
            "use subradiant_state_n3 or dark_space for odd N"
        )
    if not 0 <= p <= N // 2:
        raise SubradianceError(f"p must be in [0, N/2], got p={p}")
    if p >= 1 and epsilon <= 0:
        raise SubradianceError("epsilon must be > 0 for p >= 1")
    return _state_from_amps(N, p, epsilon, subradiant_amplitudes(N, p, epsilon), basis)


def subradiant_state_n2(epsilon: float, basis: FockBasis | None = None) -> SubradiantState:
    """Two-atom dark state (|0,2,0> - sqrt(2) eps |1,0,1>)/sqrt(1 + 2 eps^2).

    Valid for eps >= 0; at eps = 0 it reduces to |0,2,0>, the eps->0 limit of
    the general closed form (up to global phase).
    """
    if epsilon < 0:
        raise SubradianceError("epsilon must be >= 0")
    basis = basis if basis is not None else FockBasis.atomic(2)
    nrm = math.sqrt(1.0 + 2.0 * epsilon ** 2)
    vec = np.zeros(basis.dim, dtype=complex)
    vec[basis.state_index((0, 2, 0))] = 1.0 / nrm
    vec[basis.state_index((1, 0, 1))] = -math.sqrt(2.0) * epsilon / nrm
    return SubradiantState(N=2, p=1, epsilon=epsilon, basis=basis, vector=vec)


def subradiant_state_n3(epsilon: float, basis: FockBasis | None = None) -> SubradiantState:
    """Three-atom dark state (|0,2,1> - 2 eps |1,0,2>)/sqrt(1 + 4 eps^2).

    Valid for eps >= 0 (the eps = 0 value |0,2,1> is still annihilated by
    S^-(0) = c_1^dag c_0).
    """
    if epsilon < 0:
        raise SubradianceError("epsilon must be >= 0")
    basis = basis if basis is not None else FockBasis.atomic(3)
    nrm = math.sqrt(1.0 + 4.0 * epsilon ** 2)
    vec = np.zeros(basis.dim, dtype=complex)
    vec[basis.state_index((0, 2, 1))] = 1.0 / nrm
    vec[basis.state_index((1, 0, 2))] = -2.0 * epsilon / nrm
    return SubradiantState(N=3, p=1, epsilon=epsilon, basis=basis, vector=vec)


def ground_state(N: int, basis: FockBasis | None = None) -> SubradiantState:
    """|0,0,N> as the p = 0 member of the family (any epsilon)."""
    basis = basis if basis is not None else FockBasis.atomic(N)
    vec = basis.basis_vector((0, 0, N)).astype(complex)
    return SubradiantState(N=N, p=0, epsilon=0.0, basis=basis, vector=vec)


def dark_space(atomic_basis: FockBasis, epsilon: float, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (rows) of the numerical kernel of S^-.

    Singular values below `tol` are treated as zero.
    """
    sm = collective_lowering(atomic_basis, epsilon)
    _, svals, vh = np.linalg.svd(sm)
    small = svals < tol
    # rows of vh beyond the rank are also kernel vectors
    extra = vh[len(svals):] if vh.shape[0] > len(svals) else np.zeros((0, vh.shape[1]))
    kernel = np.vstack([vh[: len(svals)][small], extra])
    return kernel


def analytic_p1_n2(epsilon: float) -> float:
    """Stationary dark-state weight for N = 2 in the bad-cavity limit:
    P1 = 2 (1 - eps^2)^2 / (9 eps^2 + 2 (1 - eps^2)^2)."""
    if epsilon < 0:
        raise SubradianceError("epsilon must be >= 0")
    a = 2.0 * (1.0 - epsilon ** 2) ** 2
    return a / (9.0 * epsilon ** 2 + a)


def p_from_epsilon(N: int, epsilon: float) -> float:
    """Continuous index p(eps) for large N; piecewise in the rate ratio.

    p = (N/2)(1 - 2 eps^2)/(1 - eps^2)      for 0 <= eps <= 1/sqrt(3)
    p = N ((1 - eps^2)/(1 + eps^2))^2        for 1/sqrt(3) <= eps <= 1+sqrt(2)

    Both branches give N/4 at eps = 1/sqrt(3).
    """
    if epsilon < 0 or epsilon > EPSILON_MAX + 1e-12:
        raise SubradianceError(
            f"epsilon={epsilon} outside the existence window [0, {EPSILON_MAX:.6f}]"
        )
    if epsilon <= 1.0 / math.sqrt(3.0):
        return 0.5 * N * (1.0 - 2.0 * epsilon ** 2) / (1.0 - epsilon ** 2)
    return N * ((1.0 - epsilon ** 2) / (1.0 + epsilon ** 2)) ** 2


def epsilon_pair(N: int, p: float) -> tuple[float, float]:
    """The two rate ratios sharing the same index p: eps^2 = (1 -/+ r)/(1 +/- r)
    with r = sqrt(p/N).  Smaller root first; their product is exactly 1."""
    if not 0 < p <= N / 4:
        raise SubradianceError(
            f"two roots exist only for 0 < p <= N/4 (got p={p}, N={N})"
        )
    r = math.sqrt(p / N)
    eps0 = math.sqrt((1.0 - r) / (1.0 + r))
    return eps0, 1.0 / eps0


@dataclass
class QubitPair:
    """Orthonormal superpositions of the two same-p dark states.

    phi_pm = (|sr>_{p(eps0)} +/- |sr>_{p(eps1)}) / sqrt(2 (1 +/- alpha)) with
    alpha the (real) overlap of the two members.
    """

    N: int
    p: int
    eps0: float
    eps1: float
    alpha: float
    basis: FockBasis
    phi_plus: np.ndarray
    phi_minus: np.ndarray


def qubit_pair(N: int, p: int) -> QubitPair:
    if N % 2 != 0:
        raise SubradianceError("qubit pair construction requires even N")
    eps0, eps1 = epsilon_pair(N, p)
    basis = FockBasis.atomic(N)
    s0 = subradiant_state(N, p, eps0, basis)
    s1 = subradiant_state(N, p, eps1, basis)
    alpha = float(np.real(np.vdot(s0.vector, s1.vector)))
    if abs(alpha) >= 1.0 - 1e-12:
        raise SubradianceError(f"dark states coincide (|alpha|={abs(alpha):.3e} ~ 1)")
    plus = (s0.vector + s1.vector) / math.sqrt(2.0 * (1.0 + alpha))
    minus = (s0.vector - s1.vector) / math.sqrt(2.0 * (1.0 - alpha))
    return QubitPair(N=N, p=p, eps0=eps0, eps1=eps1, alpha=alpha,
                     basis=basis, phi_plus=plus, phi_minus=minus)


def kinetic_energy(state, basis: FockBasis | None = None) -> float:
    """Expectation of n_1 + 4 n_2 in recoil units (level m carries m^2)."""
    if isinstance(state, SubradiantState):
        vec, basis = state.vector, state.basis
    else:
        vec = np.asarray(state, dtype=complex)
        if basis is None:
            raise SubradianceError("a basis is required for a bare vector")
    total = 0.0
    for s, a in zip(basis.states, vec):
        w = abs(a) ** 2
        if w:
            total += w * (KINETIC_WEIGHTS[1] * s[1] + KINETIC_WEIGHTS[2] * s[2])
    return float(total)


def mean_k(N: int, p: int, epsilon: float) -> float:
    """<k>_p from the amplitudes: |C_p|^2 sum_k beta_k^2 k."""
    amps = subradiant_amplitudes(N, p, epsilon)
    return float(np.sum(np.arange(p + 1) * amps ** 2))


def mean_k_hypergeometric(N: int, p: int, epsilon: float) -> float:
    """<k>_p via the ratio of terminating hypergeometric sums.

    kbar = p! (N-p-1)! / (2 eps^2 (N-p)! (p-1)!)
           * 2F1(1-p, 3/2; 1+p-N; eps^-2) / 2F1(-p, 1/2; p-N; eps^-2)
    """
    if p == 0:
        return 0.0
    z = epsilon ** -2
    log_pref = (
        math.lgamma(p + 1) + math.lgamma(N - p) - math.log(2.0 * epsilon ** 2)
        - math.lgamma(N - p + 1) - math.lgamma(p)
    )
    ratio = hyp2f1_terminating(p - 1, 1.5, 1 + p - N, z) / \
        hyp2f1_terminating(p, 0.5, p - N, z)
    return math.exp(log_pref) * ratio


@dataclass
class DeltaPResult:
    """Energy splitting of a qubit pair: direct expectations vs printed formula.

    `direct` is |<phi+|K|phi+> - <phi-|K|phi->| with K the kinetic-energy
    operator and is the authoritative value; `printed` evaluates the
    square-root-weighted combination of kbar terms whose structure could not
    be confirmed from first principles.  Both in recoil-energy units.
    """

    direct: float
    printed: float

    @property
    def discrepancy(self) -> float:
        return abs(self.direct - self.printed)


def delta_p(pair: QubitPair) -> DeltaPResult:
    e_plus = kinetic_energy(pair.phi_plus, pair.basis)
    e_minus = kinetic_energy(pair.phi_minus, pair.basis)
    direct = abs(e_plus - e_minus)
    kb = mean_k_hypergeometric(pair.N, pair.p, pair.eps0) + \
        mean_k_hypergeometric(pair.N, pair.p, pair.eps1)
    printed = abs(
        4.0 * (2.0 * pair.N - 2.0 * pair.p - 2.0 * kb) / math.sqrt(2.0 * (1.0 + pair.alpha))
        - 2.0 * kb / math.sqrt(2.0 * (1.0 - pair.alpha))
    )
    return DeltaPResult(direct=direct, printed=printed)
