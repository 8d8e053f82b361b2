"""Interaction Hamiltonian, master equations, and time integration.

Units: hbar = 1 and time is measured in 1/g.  The full equation couples the
atomic cascade to the cavity mode,

    d rho/dt = -i [H, rho] + 2 kappa (a rho a^dag - {a^dag a, rho}/2),
    H = -i g (a S^+ - a^dag S^-),    S^- = c_1^dag c_0 + eps c_2^dag c_1,

and in the bad-cavity limit kappa >> g the cavity is eliminated leaving the
superradiant equation with jump operator S^- at rate Gamma = g^2/kappa.

The integrator is classical fixed-step RK4 on the vectorized equation with
default dt = 0.005 / max(g, kappa, g*eps).  Trace is never renormalized;
trace drift is a quality metric and drift beyond 1e-6 aborts the run.
Steady states are found by integrating from the declared initial state (the
generator's null space is degenerate, so the stationary point depends on the
initial condition); long horizons are reached by repeated squaring of the
one-step RK4 map restricted to the exact invariant subspace of operator
elements with equal charge Q = 2 n0 + n1 + n on both sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fock import (
    DensityMatrix,
    FockBasis,
    PHOTON_SLOT,
    collective_lowering,
    mode_annihilator,
    number_operator,
    partial_trace,
)
from .subradiance import ground_state, subradiant_state, subradiant_state_n2, \
    subradiant_state_n3

DEFAULT_RESIDUAL_TOL = 1e-10
TRACE_DRIFT_LIMIT = 1e-6
TRUNCATION_WARN_LEVEL = 1e-8
_POWER_DIM_LIMIT = 1600  # largest vectorized dimension for the squaring path


class IntegrationError(RuntimeError):
    """Step-size instability: trace drifted beyond the allowed bound."""


class ConvergenceError(RuntimeError):
    """Stationary state not reached within the configured horizon."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class CascadeParams:
    """Coupling g (time unit 1/g), rate ratio eps, cavity linewidth kappa."""

    g: float = 1.0
    epsilon: float = 0.3
    kappa: float = 0.2

    def __post_init__(self):
        if self.g <= 0:
            raise ValueError("g must be > 0")
        if self.kappa < 0 or self.epsilon < 0:
            raise ValueError("kappa and epsilon must be >= 0")

    @property
    def gamma_eff(self) -> float:
        """Effective superradiant rate Gamma = g^2 / kappa."""
        if self.kappa == 0:
            raise ValueError("Gamma undefined at kappa = 0")
        return self.g ** 2 / self.kappa

    @property
    def default_dt(self) -> float:
        return 0.005 / max(self.g, self.kappa, self.g * self.epsilon)


def build_hamiltonian(basis: FockBasis, params: CascadeParams) -> np.ndarray:
    """H = -i g (a S^+ - a^dag S^-) on a photon-carrying basis (hbar = 1)."""
    if not basis.has_photon:
        raise ValueError("Hamiltonian needs the photon slot in the basis")
    a = mode_annihilator(basis, PHOTON_SLOT).matrix
    sm = collective_lowering(basis, params.epsilon)
    return -1j * params.g * (a @ sm.conj().T - a.conj().T @ sm)


class Liouvillian:
    """Generator of a Lindblad equation: unitary part plus jump channels.

    `apply` evaluates d rho/dt on a density matrix; `matrix` is the dense
    superoperator acting on row-major vectorized states (built lazily, and
    equal to `apply` by construction).
    """

    def __init__(self, basis: FockBasis, hamiltonian: np.ndarray | None,
                 jumps: list[tuple[float, np.ndarray]],
                 params: CascadeParams | None = None):
        self.basis = basis
        self.hamiltonian = hamiltonian
        self.jumps = jumps
        self.params = params
        # F(rho) = A rho + rho A^dag + sum_k rate_k J_k rho J_k^dag
        acc = np.zeros((basis.dim, basis.dim), dtype=complex)
        if hamiltonian is not None:
            acc += -1j * hamiltonian
        for rate, op in jumps:
            acc += -0.5 * rate * (op.conj().T @ op)
        self._A = acc
        self._matrix: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.basis.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = self._A @ rho + rho @ self._A.conj().T
        for rate, op in self.jumps:
            out += rate * (op @ rho @ op.conj().T)
        return out

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            d = self.dim
            eye = np.eye(d, dtype=complex)
            L = np.kron(self._A, eye) + np.kron(eye, self._A.conj())
            for rate, op in self.jumps:
                L += rate * np.kron(op, op.conj())
            self._matrix = L
        return self._matrix

    def residual(self, rho: np.ndarray) -> float:
        """Frobenius norm of d rho/dt."""
        return float(np.linalg.norm(self.apply(rho)))

    def nullspace_dimension(self, tol: float = 1e-10) -> int:
        """Diagnostic: dimension of the stationary manifold (SVD of `matrix`).

        Degenerate in general (dark states and their mutual coherences), which
        is why steady states are computed by time integration.
        """
        svals = np.linalg.svd(self.matrix, compute_uv=False)
        return int(np.count_nonzero(svals < tol * svals.max()))

    # -- exact invariant-subspace restriction ------------------------------

    def charge_pairs(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Index pairs (i, j) with equal charge Q; None if Q is undefined."""
        if self.basis.N is None:
            return None
        q = self.basis.charges()
        rows, cols = np.nonzero(q[:, None] == q[None, :])
        return rows, cols

    def sector_matrix(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Dense superoperator restricted to the equal-charge pair sector."""
        d = self.dim
        m = len(rows)
        A = self._A
        Ac = A.conj()
        Lm = np.empty((m, m), dtype=complex)
        eye = np.eye(d)
        for k in range(m):
            i, j = rows[k], cols[k]
            col = np.outer(A[:, i], eye[j]) + np.outer(eye[i], Ac[:, j])
            for rate, op in self.jumps:
                col += rate * np.outer(op[:, i], op.conj()[:, j])
            Lm[:, k] = col[rows, cols]
        return Lm


def build_liouvillian(basis: FockBasis, params: CascadeParams) -> Liouvillian:
    """Full cascade + cavity-damping generator (photon loss at rate 2 kappa)."""
    H = build_hamiltonian(basis, params)
    a = mode_annihilator(basis, PHOTON_SLOT).matrix
    return Liouvillian(basis, H, [(2.0 * params.kappa, a)], params)


def build_effective_liouvillian(atomic_basis: FockBasis, params: CascadeParams) -> Liouvillian:
    """Bad-cavity superradiant generator: jump S^- at rate Gamma = g^2/kappa."""
    if atomic_basis.has_photon:
        raise ValueError("effective generator lives on the atomic-only basis")
    gamma = params.gamma_eff  # raises at kappa = 0
    sm = collective_lowering(atomic_basis, params.epsilon)
    return Liouvillian(atomic_basis, None, [(gamma, sm)], params)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

@dataclass
class Observables:
    n0: float
    n1: float
    n2: float
    nph: float
    p0: float
    p1: float
    purity: float


def _dark_projector_vector(N: int, epsilon: float, basis: FockBasis) -> np.ndarray | None:
    if N == 2:
        return subradiant_state_n2(epsilon, basis).vector
    if N == 3:
        return subradiant_state_n3(epsilon, basis).vector
    if N % 2 == 0 and epsilon > 0:
        return subradiant_state(N, 1, epsilon, basis).vector
    return None


def measure(rho: DensityMatrix, epsilon: float) -> Observables:
    """Mode occupations, dark-state weights P0/P1, and purity.

    P_i is the weight of the i-indexed dark state in the photon-reduced
    state.  P1 is NaN when no p = 1 closed form applies (odd N > 3, or
    eps = 0 with N >= 4).
    """
    basis = rho.basis
    diag = np.real(np.diag(rho.matrix))
    occ = [float(np.dot(diag, [s[basis.slot_position(str(j))] for s in basis.states]))
           for j in range(3)]
    if basis.has_photon:
        nph = float(np.dot(diag, [s[basis.slot_position(PHOTON_SLOT)] for s in basis.states]))
        red = partial_trace(rho, keep=("0", "1", "2"))
    else:
        nph = 0.0
        red = rho
    N = basis.N
    g0 = ground_state(N, red.basis).vector
    p0 = float(np.real(g0.conj() @ red.matrix @ g0))
    v1 = _dark_projector_vector(N, epsilon, red.basis)
    p1 = float(np.real(v1.conj() @ red.matrix @ v1)) if v1 is not None else float("nan")
    return Observables(n0=occ[0], n1=occ[1], n2=occ[2], nph=nph,
                       p0=p0, p1=p1, purity=rho.purity())


def top_photon_layer_population(rho: DensityMatrix) -> float:
    """Truncation-sufficiency metric: emission-capable population of the
    n = n_max photon layer.

    Truncation clips the photon ladder only where another emission could
    leave the basis, i.e. top-layer states still holding atoms above m = 2.
    At the default n_max = 2N those states are unreachable from |N,0,0,0>
    (the charge bound Q <= 2N forces the top layer to be fully decayed), so
    the metric is exactly zero there; with a tighter cutoff it measures the
    population exposed to clipping.
    """
    basis = rho.basis
    if not basis.has_photon:
        return 0.0
    pos = basis.slot_position(PHOTON_SLOT)
    diag = np.real(np.diag(rho.matrix))
    return float(sum(w for w, s in zip(diag, basis.states)
                     if s[pos] == basis.n_max and s[0] + s[1] > 0))


# ---------------------------------------------------------------------------
# time evolution
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Observables sampled along a fixed-step integration."""

    times: np.ndarray
    n0: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    nph: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    purity: np.ndarray
    final_state: DensityMatrix
    trace_drift: float
    top_layer_max: float
    dt: float

    CSV_HEADER = "t,N0,N1,N2,Nph,P0,P1,purity"

    def rows(self):
        for k in range(len(self.times)):
            yield (self.times[k], self.n0[k], self.n1[k], self.n2[k],
                   self.nph[k], self.p0[k], self.p1[k], self.purity[k])

    def to_csv(self, path) -> None:
        from .cli import write_csv  # formatting lives with the CLI contract
        write_csv(path, self.CSV_HEADER, self.rows())


def _rk4_step(apply_fn, rho: np.ndarray, dt: float) -> np.ndarray:
    k1 = apply_fn(rho)
    k2 = apply_fn(rho + 0.5 * dt * k1)
    k3 = apply_fn(rho + 0.5 * dt * k2)
    k4 = apply_fn(rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve(L: Liouvillian, rho0: DensityMatrix, t_end: float,
           dt: float | None = None, n_samples: int = 400,
           epsilon: float | None = None) -> Trajectory:
    """Integrate to t_end with fixed-step RK4, sampling observables.

    The sample grid is declared by `n_samples` (equally spaced step indices,
    first and last step included).  Aborts with IntegrationError if the trace
    drifts by more than 1e-6.
    """
    if dt is None:
        if L.params is None:
            raise ValueError("dt not given and the generator carries no parameters")
        dt = L.params.default_dt
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be > 0")
    eps = epsilon if epsilon is not None else (L.params.epsilon if L.params else 0.0)
    n_steps = max(1, int(round(t_end / dt)))
    stride = max(1, n_steps // max(1, n_samples))
    rho = rho0.matrix.copy()
    rows = {k: [] for k in ("t", "n0", "n1", "n2", "nph", "p0", "p1", "pur")}
    drift_max = 0.0
    top_max = 0.0

    def record(step, mat):
        obs = measure(DensityMatrix(mat, L.basis), eps)
        rows["t"].append(step * dt)
        rows["n0"].append(obs.n0)
        rows["n1"].append(obs.n1)
        rows["n2"].append(obs.n2)
        rows["nph"].append(obs.nph)
        rows["p0"].append(obs.p0)
        rows["p1"].append(obs.p1)
        rows["pur"].append(obs.purity)

    record(0, rho)
    for step in range(1, n_steps + 1):
        rho = _rk4_step(L.apply, rho, dt)
        if step % stride == 0 or step == n_steps:
            drift = abs(np.real(np.trace(rho)) - 1.0)
            drift_max = max(drift_max, drift)
            if drift > TRACE_DRIFT_LIMIT:
                raise IntegrationError(
                    f"trace drift {drift:.3e} at t={step * dt:.3f} exceeds "
                    f"{TRACE_DRIFT_LIMIT} (dt={dt})"
                )
            top_max = max(top_max, top_photon_layer_population(
                DensityMatrix(rho, L.basis)))
            record(step, rho)
    final = DensityMatrix(rho, L.basis)
    return Trajectory(
        times=np.array(rows["t"]), n0=np.array(rows["n0"]), n1=np.array(rows["n1"]),
        n2=np.array(rows["n2"]), nph=np.array(rows["nph"]), p0=np.array(rows["p0"]),
        p1=np.array(rows["p1"]), purity=np.array(rows["pur"]), final_state=final,
        trace_drift=drift_max, top_layer_max=top_max, dt=dt,
    )


@dataclass
class SteadyStateResult:
    state: DensityMatrix
    t_converged: float
    residual: float
    dt: float
    info: dict = field(default_factory=dict)


def _rk4_map(Lm: np.ndarray, dt: float) -> np.ndarray:
    """One-step RK4 update matrix I + h L + ... + (h L)^4/24 for a linear flow."""
    m = Lm.shape[0]
    M = np.eye(m, dtype=complex)
    term = np.eye(m, dtype=complex)
    for k in range(1, 5):
        term = term @ (dt * Lm) / k
        M += term
    return M


def steady_state(L: Liouvillian, rho0: DensityMatrix, dt: float | None = None,
                 residual_tol: float = DEFAULT_RESIDUAL_TOL,
                 t_max: float | None = None) -> SteadyStateResult:
    """Integrate the RK4 flow until ||d rho/dt||_F < residual_tol.

    When the initial state carries no coherence between different charge-Q
    sectors (true for all Fock-diagonal initial states), the flow is confined
    to the equal-charge pair sector and long horizons are reached by repeated
    squaring of the one-step map there; the default horizon is t_max = 1e8
    (small rate ratios relax as slowly as ~ Gamma eps^4).  The stepping
    fallback defaults to t_max = 1e5.  Raises ConvergenceError (carrying the
    residual) when the horizon is exhausted.
    """
    if dt is None:
        if L.params is None:
            raise ValueError("dt not given and the generator carries no parameters")
        dt = L.params.default_dt
    d = L.dim
    pairs = L.charge_pairs()
    in_sector = False
    if pairs is not None:
        rows, cols = pairs
        mask = np.ones((d, d), dtype=bool)
        mask[rows, cols] = False
        in_sector = float(np.max(np.abs(rho0.matrix[mask]))) < 1e-14 if mask.any() else True
    if in_sector and len(rows) <= _POWER_DIM_LIMIT:
        horizon = 1e8 if t_max is None else t_max
        return _steady_state_sector(L, rho0, dt, residual_tol, horizon, rows, cols)
    horizon = 1e5 if t_max is None else t_max
    return _steady_state_stepping(L, rho0, dt, residual_tol, horizon)


def _check_trace(tr: float, t: float, dt: float) -> None:
    if abs(tr - 1.0) > TRACE_DRIFT_LIMIT:
        raise IntegrationError(
            f"trace drift {abs(tr - 1.0):.3e} at t={t:.3f} exceeds "
            f"{TRACE_DRIFT_LIMIT} (dt={dt})"
        )


def _steady_state_sector(L, rho0, dt, tol, t_max, rows, cols) -> SteadyStateResult:
    d = L.dim
    Lm = L.sector_matrix(rows, cols)
    v = rho0.matrix[rows, cols]
    diag_sel = rows == cols
    M = _rk4_map(Lm, dt)
    chunk = M
    steps = 1
    t = 0.0
    res = float(np.linalg.norm(Lm @ v))
    max_chunk_steps = 2 ** 26
    while res >= tol:
        if t >= t_max:
            raise ConvergenceError(
                f"no steady state within t_max={t_max} (residual {res:.3e})", res)
        v = chunk @ v
        t += steps * dt
        res = float(np.linalg.norm(Lm @ v))
        _check_trace(float(np.real(v[diag_sel].sum())), t, dt)
        if steps < max_chunk_steps:
            chunk = chunk @ chunk
            steps *= 2
    mat = np.zeros((d, d), dtype=complex)
    mat[rows, cols] = v
    state = DensityMatrix(mat, L.basis)
    return SteadyStateResult(
        state=state, t_converged=t, residual=res, dt=dt,
        info={"method": "sector-power", "sector_dim": len(rows),
              "top_layer_population": top_photon_layer_population(state)},
    )


def _steady_state_stepping(L, rho0, dt, tol, t_max, chunk_steps: int = 512) -> SteadyStateResult:
    rho = rho0.matrix.copy()
    t = 0.0
    res = L.residual(rho)
    n = 0
    while res >= tol:
        if t >= t_max:
            raise ConvergenceError(
                f"no steady state within t_max={t_max} (residual {res:.3e})", res)
        for _ in range(chunk_steps):
            rho = _rk4_step(L.apply, rho, dt)
        n += chunk_steps
        t = n * dt
        res = L.residual(rho)
        _check_trace(float(np.real(np.trace(rho))), t, dt)
    state = DensityMatrix(rho, L.basis)
    return SteadyStateResult(
        state=state, t_converged=t, residual=res, dt=dt,
        info={"method": "stepping",
              "top_layer_population": top_photon_layer_population(state)},
    )
