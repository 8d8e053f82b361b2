"""Discrete-variable PPT negativity, covariance-matrix machinery, and the
nonGaussianity measure, with closed forms backed by brute-force oracles.

Quadrature convention: q_j = (c_j + c_j^dag)/sqrt(2), p_j = i(c_j^dag - c_j)/sqrt(2),
so the vacuum variance is 1/2, a thermal mode has sigma_jj = N_j + 1/2, and the
physicality / CV-PPT tests use sigma + (i/2) Omega >= 0 with
Omega = diag_blocks([[0,1],[-1,0]]).  Closed-form expressions quoted in other
normalizations are rescaled to this convention; the rescale factor applied to
the printed thermal-CM diagonal is CM_PRINTED_RESCALE and is recorded in
validation output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import DensityMatrix, FockBasis, partial_transpose, transition_operator
from .subradiance import (
    SubradiantState,
    ground_state,
    subradiant_amplitudes,
    subradiant_state_n2,
    subradiant_state_n3,
)

NEGATIVITY_THRESHOLD = -1e-12
CM_PRINTED_RESCALE = 2.0  # brute-force CM diagonal / printed thermal diagonal

_OMEGA = np.zeros((6, 6))
for _j in range(3):
    _OMEGA[2 * _j, 2 * _j + 1] = 1.0
    _OMEGA[2 * _j + 1, 2 * _j] = -1.0


# ---------------------------------------------------------------------------
# discrete-variable PPT
# ---------------------------------------------------------------------------

@dataclass
class NegativityReport:
    """Eigenvalues of the three partial transpositions of an atomic state."""

    eigenvalues: dict[int, np.ndarray]
    min_by_slot: tuple[float, float, float]
    min_eigenvalue: float
    fully_inseparable: bool

    def to_json(self) -> dict:
        return {
            "eigenvalues": {str(k): [float(v) for v in vals]
                            for k, vals in self.eigenvalues.items()},
            "min_by_slot": list(self.min_by_slot),
            "min_eigenvalue": self.min_eigenvalue,
            "fully_inseparable": self.fully_inseparable,
        }


def ppt_report(rho: DensityMatrix) -> NegativityReport:
    """Hermitian eigensolve of rho^{T_j} for j = 0, 1, 2.

    The state is fully inseparable when every one-vs-two grouping shows an
    eigenvalue below the -1e-12 threshold.
    """
    eigs = {}
    mins = []
    for slot in range(3):
        pt, _ = partial_transpose(rho, slot)
        vals = np.linalg.eigvalsh(pt)
        eigs[slot] = vals
        mins.append(float(vals.min()))
    return NegativityReport(
        eigenvalues=eigs,
        min_by_slot=tuple(mins),
        min_eigenvalue=min(mins),
        fully_inseparable=all(m < NEGATIVITY_THRESHOLD for m in mins),
    )


def steady_state_density(N: int, epsilon: float, p1: float,
                         basis: FockBasis | None = None) -> DensityMatrix:
    """Stationary atomic mixture p1 |sr_1><sr_1| + (1 - p1) |sr_0><sr_0|."""
    if not 0.0 <= p1 <= 1.0:
        raise ValueError(f"p1 must lie in [0, 1], got {p1}")
    basis = basis if basis is not None else FockBasis.atomic(N)
    if N == 2:
        dark = subradiant_state_n2(epsilon, basis)
    elif N == 3:
        dark = subradiant_state_n3(epsilon, basis)
    else:
        raise ValueError("stationary mixture form is provided for N in {2, 3}")
    g = ground_state(N, basis)
    mat = p1 * np.outer(dark.vector, dark.vector.conj()) \
        + (1.0 - p1) * np.outer(g.vector, g.vector.conj())
    return DensityMatrix(mat, basis)


def analytic_negativity_n2(epsilon: float) -> float:
    """Negative PT eigenvalue of the two-atom stationary state (bad cavity):

    A_2 = -(sqrt(2)/2) eps (eps^2 - 1)^2 / ((1/2 + eps^2)^2 (2 + eps^2)),

    zero exactly at eps = 1.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    e2 = epsilon ** 2
    return -(math.sqrt(2.0) / 2.0) * epsilon * (e2 - 1.0) ** 2 / (
        (0.5 + e2) ** 2 * (2.0 + e2))


def analytic_negativity_n2_lines(epsilon: float) -> tuple[float, float]:
    """Both printed forms of the two-atom negative eigenvalue.

    The second (moment-product) form is evaluated with its 1/(eps^2-1)^2
    singularity cancelled against the (1-eps^2)^4 carried by the moments, so
    it is finite at eps = 1.  The two forms differ by a factor eps; the
    eigensolve oracle singles out the first as the actual eigenvalue.
    """
    e2 = epsilon ** 2
    line1 = analytic_negativity_n2(epsilon)
    d = 9.0 * e2 + 2.0 * (1.0 - e2) ** 2
    moments_over_sing = 16.0 * e2 * (1.0 - e2) ** 2 / (d ** 2 * (1.0 + 2.0 * e2) ** 2)
    line2 = -(e2 * (2.0 * e2 + 3.0) ** 2 + 2.0) / (4.0 * math.sqrt(2.0)) * moments_over_sing
    return line1, line2


# ---------------------------------------------------------------------------
# covariance matrices
# ---------------------------------------------------------------------------

@dataclass
class CovarianceMatrix:
    """Second moments of R = (q1, p1, q2, p2, q3, p3) plus first moments."""

    sigma: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.mean = np.asarray(self.mean, dtype=float)
        asym = np.max(np.abs(self.sigma - self.sigma.T))
        if asym > 1e-12:
            raise ValueError(f"covariance matrix not symmetric ({asym:.3e})")

    def physicality_min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.sigma + 0.5j * _OMEGA).min())

    def is_physical(self, tol: float = 1e-10) -> bool:
        return self.physicality_min_eig() >= -tol

    def is_diagonal(self, tol: float = 1e-12) -> bool:
        off = self.sigma - np.diag(np.diag(self.sigma))
        return float(np.max(np.abs(off))) <= tol


def _atomic_tuples_any(total: int):
    if total == 0:
        return [(0, 0, 0)]
    out = []
    for n0 in range(total + 1):
        for n1 in range(total - n0 + 1):
            out.append((n0, n1, total - n0 - n1))
    return sorted(out)


def _tower(N: int):
    """Direct sum of the N-1, N, N+1 atom sectors with single-mode lowering
    matrices; just enough room to evaluate quadratic quadrature moments."""
    states = []
    for total in (N - 1, N, N + 1):
        if total >= 0:
            states.extend(_atomic_tuples_any(total))
    index = {s: i for i, s in enumerate(states)}
    d = len(states)
    lows = []
    for j in range(3):
        m = np.zeros((d, d), dtype=complex)
        for col, s in enumerate(states):
            if s[j] > 0:
                t = list(s)
                amp = math.sqrt(t[j])
                t[j] -= 1
                t = tuple(t)
                if t in index:
                    m[index[t], col] = amp
        lows.append(m)
    return states, index, lows


def covariance_matrix(state) -> CovarianceMatrix:
    """Brute-force 6x6 covariance matrix from assembled quadrature operators.

    Accepts a SubradiantState, a (vector, basis) pair, or an atomic
    DensityMatrix.  The state is embedded into the adjacent-sector tower where
    the quadratures act as square matrices; moments that change the atom
    number vanish there by construction.
    """
    if isinstance(state, SubradiantState):
        vec, basis = state.vector, state.basis
        rho = None
    elif isinstance(state, DensityMatrix):
        vec, basis, rho = None, state.basis, state.matrix
    else:
        vec, basis = state
        rho = None
    if basis.has_photon:
        raise ValueError("covariance matrix is defined for the atomic modes only")
    states, index, lows = _tower(basis.N)
    d = len(states)
    quads = []
    for c in lows:
        quads.append((c + c.conj().T) / math.sqrt(2.0))
        quads.append(1j * (c.conj().T - c) / math.sqrt(2.0))
    sel = [index[s] for s in basis.states]
    if rho is None:
        big = np.zeros(d, dtype=complex)
        big[sel] = vec
        mean = np.array([float(np.real(big.conj() @ R @ big)) for R in quads])
        sigma = np.empty((6, 6))
        rvecs = [R @ big for R in quads]
        for i in range(6):
            for j in range(i, 6):
                s = 0.5 * float(np.real(np.vdot(rvecs[i], rvecs[j])
                                        + np.vdot(rvecs[j], rvecs[i])))
                sigma[i, j] = sigma[j, i] = s - mean[i] * mean[j]
    else:
        big = np.zeros((d, d), dtype=complex)
        big[np.ix_(sel, sel)] = rho
        mean = np.array([float(np.real(np.trace(R @ big))) for R in quads])
        sigma = np.empty((6, 6))
        for i in range(6):
            for j in range(i, 6):
                s = 0.5 * float(np.real(np.trace((quads[i] @ quads[j]
                                                  + quads[j] @ quads[i]) @ big)))
                sigma[i, j] = sigma[j, i] = s - mean[i] * mean[j]
    return CovarianceMatrix(sigma=sigma, mean=mean)


def subradiant_cm_diagonal(N: int, p: int, epsilon: float) -> np.ndarray:
    """Closed-form diagonal of the dark-state CM: (<n_j> + 1/2) per quadrature
    with <n_0> = p - <k>, <n_1> = 2<k>, <n_2> = N - p - <k>."""
    amps = subradiant_amplitudes(N, p, epsilon)
    kmean = float(np.sum(np.arange(p + 1) * amps ** 2))
    occ = (p - kmean, 2.0 * kmean, N - p - kmean)
    return np.repeat([o + 0.5 for o in occ], 2)


@dataclass
class CvPptResult:
    """Outcome of the symplectic PPT test per transposed mode."""

    min_eigs: tuple[float, float, float]
    violations: tuple[bool, bool, bool]

    @property
    def any_violation(self) -> bool:
        return any(self.violations)


def cv_ppt_test(cm: CovarianceMatrix) -> CvPptResult:
    """For each mode j test Lambda_j sigma Lambda_j + (i/2) Omega >= 0.

    Lambda_j flips the sign of the j-th momentum.  A minimum eigenvalue at or
    above -1e-12 means no entanglement is detected across that grouping (for
    nonGaussian states the test is one-sided: violation would prove
    entanglement, satisfaction proves nothing).
    """
    if not cm.is_physical():
        raise ValueError(
            f"unphysical covariance matrix (min eig {cm.physicality_min_eig():.3e})")
    mins = []
    for j in range(3):
        lam = np.eye(6)
        lam[2 * j + 1, 2 * j + 1] = -1.0
        test = lam @ cm.sigma @ lam + 0.5j * _OMEGA
        mins.append(float(np.linalg.eigvalsh(test).min()))
    return CvPptResult(
        min_eigs=tuple(mins),
        violations=tuple(m < NEGATIVITY_THRESHOLD for m in mins),
    )


# ---------------------------------------------------------------------------
# reference Gaussian states and nonGaussianity
# ---------------------------------------------------------------------------

@dataclass
class ThermalReference:
    """Product of three thermal modes matching a diagonal-CM, zero-mean state."""

    occupations: tuple[float, float, float]

    def __post_init__(self):
        if any(n < 0 for n in self.occupations):
            raise ValueError("occupations must be >= 0")

    @property
    def ys(self) -> tuple[float, float, float]:
        return tuple(n / (1.0 + n) for n in self.occupations)

    def purity(self) -> float:
        """mu_tau = prod_j (1 - y_j)/(1 + y_j) (exact geometric sums)."""
        return math.prod((1.0 - y) / (1.0 + y) for y in self.ys)

    def purity_series(self, tol: float = 1e-12) -> tuple[float, float]:
        """Truncated-Fock purity and its tail bound (self-test of `purity`)."""
        total, tail = 1.0, 0.0
        for y in self.ys:
            if y == 0.0:
                continue
            n_cut = max(8, int(math.ceil(math.log(tol) / (2.0 * math.log(y)))) + 2)
            s = (1.0 - y) ** 2 * (1.0 - y ** (2 * (n_cut + 1))) / (1.0 - y ** 2)
            total *= s
            tail += (1.0 - y) ** 2 * y ** (2 * (n_cut + 1)) / (1.0 - y ** 2)
        return total, tail

    def weight(self, state: tuple[int, ...]) -> float:
        """Diagonal matrix element at an occupation tuple."""
        w = 1.0
        for y, n in zip(self.ys, state[:3]):
            w *= (1.0 - y) * (y ** n if n else 1.0)
        return w

    def overlap_with(self, rho: DensityMatrix) -> float:
        """Tr[rho tau]; exact because tau is Fock-diagonal."""
        diag = np.real(np.diag(rho.matrix))
        return float(sum(d * self.weight(s) for d, s in zip(diag, rho.basis.states)))

    def matrix_on(self, basis: FockBasis) -> np.ndarray:
        """Diagonal restriction of tau to a basis (trace < 1 if truncated)."""
        return np.diag([self.weight(s) for s in basis.states]).astype(complex)


def reference_gaussian(state) -> ThermalReference:
    """Thermal product with N_j = <n_j> of the input.

    Requires a zero-mean, diagonal-CM input (all in-scope states are such by
    the atom-number selection rule); checked via the conserving bilinears
    <c_j^dag c_k>, which carry exactly the CM off-diagonals on sector states.
    """
    if isinstance(state, SubradiantState):
        rho = DensityMatrix.pure(state.vector, state.basis)
    elif isinstance(state, DensityMatrix):
        rho = state
    else:
        vec, basis = state
        rho = DensityMatrix.pure(vec, basis)
    basis = rho.basis
    if basis.has_photon:
        raise ValueError("reference is defined for the atomic modes only")
    occ = []
    for j in range(3):
        m_jj = np.real(np.trace(transition_operator(basis, j, j) @ rho.matrix))
        occ.append(float(m_jj))
    for j in range(3):
        for k in range(3):
            if j != k:
                m_jk = np.trace(transition_operator(basis, j, k) @ rho.matrix)
                if abs(m_jk) > 1e-10:
                    raise ValueError(
                        f"non-diagonal covariance (<c_{j}^dag c_{k}> = {m_jk:.3e}); "
                        "thermal reference does not apply")
    return ThermalReference(occupations=tuple(occ))


def nong_measure(rho: DensityMatrix, tau: ThermalReference) -> float:
    """Normalized squared Hilbert-Schmidt distance to the reference Gaussian:

    delta = (mu_rho + mu_tau - 2 Tr[rho tau]) / (2 mu_rho).

    Zero iff the state is Gaussian (here: iff it is the thermal product
    itself).
    """
    mu_rho = rho.purity()
    mu_tau = tau.purity()
    kappa = tau.overlap_with(rho)
    return (mu_rho + mu_tau - 2.0 * kappa) / (2.0 * mu_rho)


def nong_subradiant_closed_form(N: int, p: int, epsilon: float) -> float:
    """delta of a pure dark state from the amplitude sums.

    delta = 1/2 + mu_tau/2 - prod_j (1-y_j) * sum_k |a_k|^2 y0^{p-k} y1^{2k} y2^{N-p-k}

    Valid for the even-N family and, by coincidence of the amplitude pattern,
    for N = 3 with p <= 1.
    """
    if N == 3 and p in (0, 1):
        # amplitude index is k: the k=0 tuple is (1,0,2), the k=1 tuple (0,2,1)
        amps = np.array([1.0]) if p == 0 else \
            np.array([-2.0 * epsilon, 1.0]) / math.sqrt(1.0 + 4.0 * epsilon ** 2)
    else:
        amps = subradiant_amplitudes(N, p, epsilon)
    ks = np.arange(p + 1)
    kmean = float(np.sum(ks * amps ** 2))
    tau = ThermalReference(occupations=(p - kmean, 2.0 * kmean, N - p - kmean))
    y0, y1, y2 = tau.ys
    overlap = 0.0
    for k, a in zip(ks, amps):
        w = a ** 2
        w *= y0 ** (p - k) if p - k else 1.0
        w *= y1 ** (2 * k) if k else 1.0
        w *= y2 ** (N - p - k) if N - p - k else 1.0
        overlap += w
    overlap *= math.prod(1.0 - y for y in tau.ys)
    return 0.5 + 0.5 * tau.purity() - overlap


def stationary_occupations(N: int, epsilon: float, p1: float) -> tuple[float, float, float]:
    """Mode occupations of the stationary dark/ground mixture."""
    if N == 2:
        dark = subradiant_state_n2(epsilon)
    elif N == 3:
        dark = subradiant_state_n3(epsilon)
    else:
        raise ValueError("stationary mixture form is provided for N in {2, 3}")
    occ_dark = dark.occupations()
    occ_ground = (0.0, 0.0, float(N))
    return tuple(p1 * od + (1.0 - p1) * og for od, og in zip(occ_dark, occ_ground))


def stationary_overlaps(N: int, epsilon: float, p1: float) -> tuple[float, float]:
    """Closed-form overlaps (Tr[rho_0 tau], Tr[rho_1 tau]) with the stationary
    reference.

    kappa_0 = y2^N prod_j (1 - y_j)
    kappa_1 = (y1^2 + 2 eps^2 y0 y2) / (1 + 2 eps^2) * prod_j (1 - y_j)   (N = 2)
    kappa_1 = y2 (y1^2 + 4 eps^2 y0 y2) / (1 + 4 eps^2) * prod_j (1 - y_j) (N = 3)

    These carry prod(1-y_j) as the thermal normalization; the variant carrying
    prod (1-y_j)/(1+y_j) instead (see `stationary_overlaps_printed`) does not
    reproduce the direct traces and is kept only for comparison reporting.
    """
    tau = ThermalReference(occupations=stationary_occupations(N, epsilon, p1))
    y0, y1, y2 = tau.ys
    norm = math.prod(1.0 - y for y in tau.ys)
    kappa0 = norm * y2 ** N
    if N == 2:
        kappa1 = norm * (y1 ** 2 + 2.0 * epsilon ** 2 * y0 * y2) / (1.0 + 2.0 * epsilon ** 2)
    else:
        kappa1 = norm * y2 * (y1 ** 2 + 4.0 * epsilon ** 2 * y0 * y2) / (1.0 + 4.0 * epsilon ** 2)
    return kappa0, kappa1


def stationary_overlaps_printed(N: int, epsilon: float, p1: float) -> tuple[float, float]:
    """As-printed overlap formulas (y2 exponent 2 and (1-y)/(1+y) weights),
    retained for discrepancy reporting against `stationary_overlaps`."""
    tau = ThermalReference(occupations=stationary_occupations(N, epsilon, p1))
    y0, y1, y2 = tau.ys
    norm = math.prod((1.0 - y) / (1.0 + y) for y in tau.ys)
    kappa0 = norm * y2 ** 2
    if N == 2:
        kappa1 = norm * (y1 ** 2 + 2.0 * epsilon ** 2 * y0 * y2) / (1.0 + 2.0 * epsilon ** 2)
    else:
        kappa1 = norm * y2 * (y1 ** 2 + 4.0 * epsilon ** 2 * y0 * y2) / (1.0 + 4.0 * epsilon ** 2)
    return kappa0, kappa1


def nong_stationary(N: int, epsilon: float, p1: float, normalized: bool = True) -> float:
    """delta of the stationary mixture from the closed-form overlaps.

    With `normalized` (default) the value carries the 1/mu_rho of the measure
    definition and coincides with `nong_measure` on the assembled state; the
    unnormalized variant is the bare quantity
    P1(P1-1) + (1 + mu_tau)/2 - (1-P1) kappa_0 - P1 kappa_1, i.e. delta * mu_rho.
    """
    if not 0.0 <= p1 <= 1.0:
        raise ValueError(f"p1 must lie in [0, 1], got {p1}")
    tau = ThermalReference(occupations=stationary_occupations(N, epsilon, p1))
    kappa0, kappa1 = stationary_overlaps(N, epsilon, p1)
    mu_tau = tau.purity()
    mu_rho = p1 ** 2 + (1.0 - p1) ** 2
    numerator_half = p1 * (p1 - 1.0) + 0.5 * (1.0 + mu_tau) \
        - (1.0 - p1) * kappa0 - p1 * kappa1
    return numerator_half / mu_rho if normalized else numerator_half
