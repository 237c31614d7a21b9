"""Time-dependent Lindblad integration in the displaced frame.

The joint (ancilla x oscillator) state evolves under

    drho/dt = -i [H(alpha), rho] + (1/T_s) D[a] rho + (1/T_1) D[sigma_-] rho
              + (1/(2 T_phi)) D[sigma_z] rho,

with the displaced-frame Hamiltonian

    H(alpha) = -(chi/2) (a^dag + conj(alpha)) (a + alpha) sigma_z
               - (K_s/2) ((a^dag + conj(alpha)) (a + alpha))^2.

Integration uses fixed-step classical Runge-Kutta on the matrix-valued
right-hand side; the Hamiltonian is pentadiagonal in the Fock index, which
the stepper exploits through banded multiplies.  Transmon pulses, feedback
displacements and readout projections are instantaneous; a schedule is a
time-ordered list of such events interleaved with frame segments.

Times are microseconds; frequencies in SystemParams are ordinary (not
angular) and converted internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np
from scipy.linalg import expm

from .errors import (
    InfeasiblePulseError,
    ScheduleError,
    SpaceTagError,
    StepSizeError,
)
from .hilbert import (
    DensityMatrix,
    FockSpace,
    annihilation_op,
    displacement_op,
    make_density_matrix,
    quadrature_ops,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)   # basis order (g, e)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)     # sigma_z |e> = +|e>
KET_G = np.array([1, 0], dtype=complex)
KET_E = np.array([0, 1], dtype=complex)
KET_PLUS_X = np.array([1, 1], dtype=complex) / math.sqrt(2)

_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


@dataclass(frozen=True)
class SystemParams:
    """Device parameter set; defaults are the stabilised-cavity working point."""

    t_storage: float = 245.0          # us
    chi_over_2pi: float = 28.0        # kHz
    kerr_over_2pi: float = 1.0        # Hz
    t1: float = 50.0                  # us
    t2e: float = 60.0                 # us (echo)
    gamma_to_f: float = 1.0 / 3.0     # 1/ms
    t_int: float = 1.1                # us, conditional-displacement duration
    t_readout_half: float = 0.35      # us, projection instant into readout
    t_feedback_delay: float = 1.0     # us, rest of readout + processing
    t_round: float = 2.45             # us

    def __post_init__(self):
        for name in ("t_storage", "t1", "t2e", "t_int", "t_readout_half",
                     "t_feedback_delay", "t_round"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.chi_over_2pi < 0 or self.kerr_over_2pi < 0 or self.gamma_to_f < 0:
            raise ValueError("frequencies and rates must be nonnegative")
        if np.isfinite(self.t2e) and self.t2e > 2.0 * self.t1 + 1e-9:
            raise ValueError("t2e cannot exceed 2*t1")
        if self.t_phi <= 0:
            raise ValueError("derived pure-dephasing time must be positive")

    @property
    def chi(self) -> float:
        """Dispersive shift, rad/us."""
        return 2.0 * math.pi * self.chi_over_2pi * 1e-3

    @property
    def kerr(self) -> float:
        """Oscillator Kerr, rad/us."""
        return 2.0 * math.pi * self.kerr_over_2pi * 1e-6

    @property
    def t_phi(self) -> float:
        """Pure dephasing time 1/(1/T2e - 1/(2 T1)), us."""
        inv = (0.0 if np.isinf(self.t2e) else 1.0 / self.t2e) \
            - (0.0 if np.isinf(self.t1) else 0.5 / self.t1)
        return math.inf if inv <= 0 else 1.0 / inv

    def with_channels(self, storage_loss=True, bit_flips=True,
                      phase_flips=True) -> "SystemParams":
        """Copy with selected decoherence channels switched off."""
        kw = {}
        if not storage_loss:
            kw["t_storage"] = math.inf
        if not bit_flips:
            kw["t1"] = math.inf
            kw["t2e"] = self.t_phi if phase_flips else math.inf
        elif not phase_flips:
            kw["t2e"] = 2.0 * self.t1   # kills the pure-dephasing term
        return replace(self, **kw)

    def ideal(self) -> "SystemParams":
        return self.with_channels(False, False, False)


# ---------------------------------------------------------------------------
# schedule events
# ---------------------------------------------------------------------------

AlphaTrajectory = Union[complex, Callable[[float], complex]]


@dataclass(frozen=True)
class FrameSegment:
    """Lindblad evolution for ``duration`` with frame value alpha(t)."""

    duration: float
    alpha: AlphaTrajectory = 0.0

    def alpha_at(self, t: float) -> complex:
        if callable(self.alpha):
            return complex(self.alpha(t))
        return complex(self.alpha)


@dataclass(frozen=True)
class AncillaRotation:
    """Instantaneous rotation exp(-i angle (axis . sigma) / 2)."""

    axis: tuple[float, float, float]
    angle: float

    def matrix(self) -> np.ndarray:
        nx, ny, nz = self.axis
        norm = math.sqrt(nx * nx + ny * ny + nz * nz)
        nx, ny, nz = nx / norm, ny / norm, nz / norm
        ns = nx * SIGMA_X + ny * SIGMA_Y + nz * SIGMA_Z
        return math.cos(self.angle / 2) * np.eye(2) \
            - 1j * math.sin(self.angle / 2) * ns


@dataclass(frozen=True)
class InstantDisplacement:
    """Instantaneous unconditional oscillator displacement."""

    amplitude: complex


@dataclass(frozen=True)
class Measurement:
    """Instantaneous projective ancilla measurement along a Pauli axis."""

    basis: str = "z"

    def __post_init__(self):
        if self.basis not in _PAULI:
            raise ValueError("basis must be 'x', 'y' or 'z'")


@dataclass(frozen=True)
class FeedbackAction:
    """Outcome-conditioned displacement plus ancilla reset rotation."""

    displacement: complex = 0.0
    rotation: AncillaRotation | None = None


@dataclass(frozen=True)
class FeedbackBranch:
    """Apply per-outcome unitaries to the pending branches and merge."""

    actions: dict  # outcome (+1/-1) -> FeedbackAction


Event = Union[FrameSegment, AncillaRotation, InstantDisplacement, Measurement,
              FeedbackBranch]


@dataclass
class PulseSchedule:
    """Time-ordered event list; ``cd_gate`` marks compiled CD sequences."""

    events: list
    cd_gate: bool = False

    def validate(self):
        seen_measurement = False
        pending = False
        for ev in self.events:
            if isinstance(ev, FrameSegment):
                if ev.duration < 0:
                    raise ScheduleError("segment durations must be nonnegative")
            elif isinstance(ev, Measurement):
                if pending:
                    raise ScheduleError("measurement before previous branches merged")
                seen_measurement = True
                pending = True
            elif isinstance(ev, FeedbackBranch):
                if not seen_measurement or not pending:
                    raise ScheduleError("feedback branch without a preceding measurement")
                pending = False
        if self.cd_gate:
            last = 0.0
            for ev in self.events:
                if isinstance(ev, FrameSegment):
                    last = ev.alpha_at(ev.duration)
            if abs(last) > 1e-9:
                raise ScheduleError("CD schedule frame does not return to zero")

    @property
    def duration(self) -> float:
        return sum(ev.duration for ev in self.events if isinstance(ev, FrameSegment))

    def has_measurement(self) -> bool:
        return any(isinstance(ev, Measurement) for ev in self.events)


@dataclass
class Branch:
    """Unnormalised post-measurement matrix with its outcome and weight."""

    matrix: np.ndarray
    outcome: int
    probability: float


@dataclass
class BranchedState:
    branches: list

    def validate(self):
        total = 0.0
        for br in self.branches:
            tr = float(np.trace(br.matrix).real)
            if abs(tr - br.probability) > 1e-9:
                raise ValueError("branch probability does not match its trace")
            total += br.probability
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"branch probabilities sum to {total}, not 1")

    def probability(self, outcome: int) -> float:
        for br in self.branches:
            if br.outcome == outcome:
                return br.probability
        raise KeyError(outcome)

    def normalized(self, outcome: int, space: FockSpace) -> DensityMatrix:
        for br in self.branches:
            if br.outcome == outcome:
                return make_density_matrix(br.matrix / br.probability, space, "joint",
                                           normalize=False)
        raise KeyError(outcome)


@dataclass
class ScheduleRecord:
    """Per-run bookkeeping: outcome probabilities of each measurement."""

    measurement_probs: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------

def displaced_frame_hamiltonian(alpha: complex, params: SystemParams,
                                space: FockSpace) -> np.ndarray:
    """Dense joint-space H(alpha) in rad/us; Hermitian by construction."""
    a = annihilation_op(space)
    m = a.conj().T @ a + alpha * a.conj().T + np.conj(alpha) * a \
        + abs(alpha) ** 2 * np.eye(space.dim)
    h_disp = -0.5 * params.chi * m
    h_kerr = -0.5 * params.kerr * (m @ m)
    return np.kron(SIGMA_Z, h_disp) + np.kron(np.eye(2), h_kerr)


class _BandedH:
    """Pentadiagonal oscillator blocks h_g, h_e of the joint Hamiltonian."""

    __slots__ = ("diags_g", "diags_e")

    def __init__(self, alpha: complex, chi: float, kerr: float, dim: int):
        n = np.arange(dim, dtype=float)
        s = np.sqrt(n[:-1] + 1.0)             # a[n, n+1] = s[n]
        d0 = n + abs(alpha) ** 2
        up1 = np.conj(alpha) * s              # M[n, n+1]
        lo1 = alpha * s                       # M[n+1, n]
        # M^2 bands from the tridiagonal product
        aa = abs(alpha) ** 2
        m2_0 = d0 ** 2
        m2_0[:-1] += aa * s ** 2
        m2_0[1:] += aa * s ** 2
        m2_up1 = up1 * (d0[:-1] + d0[1:])
        m2_lo1 = lo1 * (d0[:-1] + d0[1:])
        m2_up2 = up1[:-1] * up1[1:]
        m2_lo2 = lo1[:-1] * lo1[1:]
        half_chi, half_k = 0.5 * chi, 0.5 * kerr
        self.diags_e = (
            -half_k * m2_lo2,
            -half_chi * lo1 - half_k * m2_lo1,
            -half_chi * d0 - half_k * m2_0,
            -half_chi * up1 - half_k * m2_up1,
            -half_k * m2_up2,
        )
        self.diags_g = (
            -half_k * m2_lo2,
            +half_chi * lo1 - half_k * m2_lo1,
            +half_chi * d0 - half_k * m2_0,
            +half_chi * up1 - half_k * m2_up1,
            -half_k * m2_up2,
        )


def _band_left(diags, x, out, sign):
    """out += sign * (H x) for pentadiagonal H given by diags (-2..+2)."""
    lo2, lo1, d0, up1, up2 = diags
    out += (sign * d0)[:, None] * x
    out[:-1] += (sign * up1)[:, None] * x[1:]
    out[1:] += (sign * lo1)[:, None] * x[:-1]
    if lo2.size:
        out[:-2] += (sign * up2)[:, None] * x[2:]
        out[2:] += (sign * lo2)[:, None] * x[:-2]


def _band_right(diags, x, out, sign):
    """out += sign * (x H) for pentadiagonal H given by diags (-2..+2)."""
    lo2, lo1, d0, up1, up2 = diags
    out += x * (sign * d0)[None, :]
    out[:, 1:] += x[:, :-1] * (sign * up1)[None, :]
    out[:, :-1] += x[:, 1:] * (sign * lo1)[None, :]
    if lo2.size:
        out[:, 2:] += x[:, :-2] * (sign * up2)[None, :]
        out[:, :-2] += x[:, 2:] * (sign * lo2)[None, :]


class LindbladPropagator:
    """Fixed-step RK4 integrator for the joint master equation."""

    def __init__(self, params: SystemParams, space: FockSpace):
        self.params = params
        self.space = space
        self.dim = space.dim
        self.kappa_s = 0.0 if np.isinf(params.t_storage) else 1.0 / params.t_storage
        self.gamma_1 = 0.0 if np.isinf(params.t1) else 1.0 / params.t1
        t_phi = params.t_phi
        self.gamma_phi = 0.0 if np.isinf(t_phi) else 0.5 / t_phi
        n = np.arange(self.dim, dtype=float)
        self._sqrt_n = np.sqrt(n[1:])                     # a |n> = sqrt(n) |n-1>
        self._n_joint = np.concatenate([n, n])
        self.dt_cap = 0.002 / params.chi if params.chi > 0 else math.inf

    def _h_bands(self, alpha: complex) -> _BandedH:
        return _BandedH(alpha, self.params.chi, self.params.kerr, self.dim)

    def _rhs(self, rho: np.ndarray, bands: _BandedH) -> np.ndarray:
        dim = self.dim
        out = np.zeros_like(rho)
        # -i(H rho - rho H), blockwise in the ancilla index
        _band_left(bands.diags_g, rho[:dim, :], out[:dim, :], -1j)
        _band_left(bands.diags_e, rho[dim:, :], out[dim:, :], -1j)
        _band_right(bands.diags_g, rho[:, :dim], out[:, :dim], +1j)
        _band_right(bands.diags_e, rho[:, dim:], out[:, dim:], +1j)

        if self.kappa_s:
            k = self.kappa_s
            s = self._sqrt_n
            r4 = rho.reshape(2, dim, 2, dim)
            o4 = out.reshape(2, dim, 2, dim)
            o4[:, :-1, :, :-1] += (k * s[None, :, None, None] * s[None, None, None, :]) \
                * r4[:, 1:, :, 1:]
            nj = self._n_joint
            out -= (0.5 * k) * (nj[:, None] + nj[None, :]) * rho

        if self.gamma_1:
            g = self.gamma_1
            r4 = rho.reshape(2, dim, 2, dim)
            o4 = out.reshape(2, dim, 2, dim)
            o4[0, :, 0, :] += g * r4[1, :, 1, :]
            # anticommutator with |e><e|
            out[dim:, :] -= (0.5 * g) * rho[dim:, :]
            out[:, dim:] -= (0.5 * g) * rho[:, dim:]

        if self.gamma_phi:
            gp = self.gamma_phi
            out[:dim, dim:] -= 2.0 * gp * rho[:dim, dim:]
            out[dim:, :dim] -= 2.0 * gp * rho[dim:, :dim]
        return out

    def step(self, rho: np.ndarray, dt: float,
             alpha_of: Callable[[float], complex], t0: float) -> np.ndarray:
        """One RK4 step from t0 to t0+dt with time-dependent alpha."""
        b1 = self._h_bands(alpha_of(t0))
        a_mid = alpha_of(t0 + 0.5 * dt)
        b2 = self._h_bands(a_mid) if a_mid != alpha_of(t0) else b1
        a_end = alpha_of(t0 + dt)
        b3 = self._h_bands(a_end) if a_end != a_mid else b2
        k1 = self._rhs(rho, b1)
        k2 = self._rhs(rho + 0.5 * dt * k1, b2)
        k3 = self._rhs(rho + 0.5 * dt * k2, b2)
        k4 = self._rhs(rho + dt * k3, b3)
        return rho + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)

    def evolve(self, rho: np.ndarray, segment: FrameSegment) -> np.ndarray:
        dur = segment.duration
        if dur == 0.0:
            return rho
        dt_max = min(self.dt_cap, dur / 50.0)
        n_steps = max(1, math.ceil(dur / dt_max - 1e-12))
        dt = dur / n_steps
        alpha_of = segment.alpha_at
        t = 0.0
        for _ in range(n_steps):
            rho = self.step(rho, dt, alpha_of, t)
            t += dt
        return rho


def lindblad_step(rho: DensityMatrix, hamiltonian_alpha: complex,
                  params: SystemParams, dt: float) -> DensityMatrix:
    """Single RK4 step of the joint master equation.

    ``hamiltonian_alpha`` is the displaced-frame value alpha entering H.
    """
    if rho.space_tag != "joint":
        raise SpaceTagError("lindblad_step expects a joint-space state")
    prop = LindbladPropagator(params, rho.space)
    if dt <= 0:
        raise StepSizeError("dt must be positive")
    if dt > prop.dt_cap + 1e-15:
        raise StepSizeError(f"dt={dt} exceeds stability bound {prop.dt_cap:.4g}")
    out = prop.step(rho.data, dt, lambda t: hamiltonian_alpha, 0.0)
    return make_density_matrix(out, rho.space, "joint", normalize=False)


# ---------------------------------------------------------------------------
# schedule execution
# ---------------------------------------------------------------------------

def _joint_unitary(space: FockSpace, anc: np.ndarray | None = None,
                   osc: np.ndarray | None = None) -> np.ndarray:
    a2 = anc if anc is not None else np.eye(2)
    on = osc if osc is not None else np.eye(space.dim)
    return np.kron(a2, on)


def _apply_unitary(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    return u @ rho @ u.conj().T


def _projectors(basis: str, space: FockSpace):
    pauli = _PAULI[basis]
    vals, vecs = np.linalg.eigh(pauli)
    # order as (+1, -1)
    order = np.argsort(-vals)
    projs = []
    for idx in order:
        v = vecs[:, idx]
        projs.append(_joint_unitary(space, anc=np.outer(v, v.conj())))
    return [(+1, projs[0]), (-1, projs[1])]


def run_schedule(rho: DensityMatrix, schedule: PulseSchedule, params: SystemParams):
    """Execute a schedule; returns (DensityMatrix | BranchedState, ScheduleRecord).

    Frame segments integrate the master equation; rotations, displacements
    and feedback actions are exact unitaries; measurements split the state
    into outcome branches which a later FeedbackBranch merges.
    """
    if rho.space_tag != "joint":
        raise SpaceTagError("run_schedule expects a joint-space state")
    schedule.validate()
    space = rho.space
    prop = LindbladPropagator(params, space)
    record = ScheduleRecord()

    state: np.ndarray | None = rho.data.copy()
    branches: list[Branch] | None = None

    def apply_all(fn):
        nonlocal state, branches
        if branches is None:
            state = fn(state)
        else:
            for br in branches:
                br.matrix = fn(br.matrix)

    for ev in schedule.events:
        if isinstance(ev, FrameSegment):
            apply_all(lambda m, seg=ev: prop.evolve(m, seg))
        elif isinstance(ev, AncillaRotation):
            u = _joint_unitary(space, anc=ev.matrix())
            apply_all(lambda m, u=u: _apply_unitary(m, u))
        elif isinstance(ev, InstantDisplacement):
            u = _joint_unitary(space, osc=displacement_op(ev.amplitude, space))
            apply_all(lambda m, u=u: _apply_unitary(m, u))
        elif isinstance(ev, Measurement):
            if branches is not None:
                raise ScheduleError("nested measurements are not supported")
            new_branches = []
            for outcome, proj in _projectors(ev.basis, space):
                mat = _apply_unitary(state, proj)
                prob = float(np.trace(mat).real)
                new_branches.append(Branch(mat, outcome, prob))
            total = sum(b.probability for b in new_branches)
            record.measurement_probs.append(
                {b.outcome: b.probability for b in new_branches})
            if abs(total - np.trace(state).real) > 1e-9:
                raise ScheduleError("projectors do not resolve the identity")
            state = None
            branches = new_branches
        elif isinstance(ev, FeedbackBranch):
            merged = None
            for br in branches:
                action: FeedbackAction = ev.actions[br.outcome]
                u_osc = displacement_op(action.displacement, space) \
                    if action.displacement != 0 else None
                u_anc = action.rotation.matrix() if action.rotation else None
                u = _joint_unitary(space, anc=u_anc, osc=u_osc)
                term = _apply_unitary(br.matrix, u)
                merged = term if merged is None else merged + term
            state = merged
            branches = None
        else:
            raise ScheduleError(f"unknown event {ev!r}")

    if branches is not None:
        out = BranchedState(branches)
        out.validate()
        return out, record
    return make_density_matrix(state, space, "joint", normalize=False), record


# ---------------------------------------------------------------------------
# conditional-displacement compilation
# ---------------------------------------------------------------------------

def _cd_alpha_trajectory(alpha0: complex, half: float, ramp: float):
    """Out-and-back frame response: ramp to alpha0, hold, ramp to zero."""

    def first(t: float) -> complex:
        if t < ramp:
            return alpha0 * (t / ramp)
        if t > half - ramp:
            return alpha0 * max(0.0, (half - t) / ramp)
        return alpha0

    def second(t: float) -> complex:
        return -first(t)

    return first, second


def compile_conditional_displacement(beta: complex, t_int: float,
                                     alpha_max: complex, params: SystemParams,
                                     ramp: float = 0.01):
    """Compile CD(beta) into a frame schedule; returns (schedule, gamma).

    The sequence drives the frame out by alpha0 and back, flips the ancilla,
    then drives the opposite excursion, realising U = D(gamma) CD(beta) with
    beta = i sqrt(2) chi (int_first - int_second) alpha(t).  A trailing echo
    pulse restores the ancilla frame so the schedule's dissipation-free
    unitary is exactly D(gamma) CD(beta).  gamma is the residual displacement
    -(chi^2 / (2 sqrt 2)) double-integral of alpha, evaluated by quadrature
    on the compiled trajectory.
    """
    if t_int <= 4.0 * ramp:
        raise InfeasiblePulseError("interaction window shorter than the ramps")
    chi = params.chi
    if chi <= 0:
        raise InfeasiblePulseError("conditional displacement requires chi > 0")
    half = 0.5 * t_int
    area = t_int - 2.0 * ramp   # per unit alpha0, first-minus-second weighted
    alpha0 = beta / (1j * math.sqrt(2.0) * chi * area)
    if abs(alpha0) > abs(alpha_max) + 1e-12:
        raise InfeasiblePulseError(
            f"|alpha0|={abs(alpha0):.2f} exceeds the drive limit {abs(alpha_max):.2f}")

    first, second = _cd_alpha_trajectory(alpha0, half, ramp)
    schedule = PulseSchedule(
        events=[
            FrameSegment(half, first),
            AncillaRotation((1, 0, 0), math.pi),
            FrameSegment(half, second),
            AncillaRotation((1, 0, 0), math.pi),
        ],
        cd_gate=True,
    )
    schedule.validate()

    # gamma via trapezoid double integral on the compiled alpha(t)
    n_grid = 2001
    ts = np.linspace(0.0, t_int, n_grid)
    alpha_t = np.array([first(t) if t <= half else second(t - half) for t in ts])
    inner = np.concatenate([[0.0], np.cumsum(
        0.5 * (alpha_t[1:] + alpha_t[:-1]) * np.diff(ts))])
    gamma = -(chi ** 2 / (2.0 * math.sqrt(2.0))) * np.trapezoid(inner, ts)
    return schedule, complex(gamma)


def cd_target_unitary(beta: complex, gamma: complex, space: FockSpace) -> np.ndarray:
    """Dissipation-free unitary realised by a compiled CD schedule."""
    from .hilbert import conditional_displacement_op
    d = _joint_unitary(space, osc=displacement_op(gamma, space))
    return d @ conditional_displacement_op(beta, space)


def trotter_oracle(schedule: PulseSchedule, space: FockSpace,
                   params: SystemParams, n_slices: int = 2000) -> np.ndarray:
    """Dissipation-free product of short-time propagators, in order.

    Independent check of schedule compilation: slices exp(-i H(alpha(t_k)) dt)
    accumulate in chronological order with the instantaneous rotations and
    displacements inserted exactly.
    """
    if schedule.has_measurement():
        raise ScheduleError("trotter oracle cannot process measurements")
    if n_slices < 1:
        raise ValueError("n_slices must be >= 1")
    total_t = schedule.duration
    u = np.eye(space.joint_dim, dtype=complex)

    for ev in schedule.events:
        if isinstance(ev, AncillaRotation):
            u = _joint_unitary(space, anc=ev.matrix()) @ u
        elif isinstance(ev, InstantDisplacement):
            u = _joint_unitary(space, osc=displacement_op(ev.amplitude, space)) @ u
        elif isinstance(ev, FrameSegment):
            if ev.duration == 0:
                continue
            n_seg = max(1, round(n_slices * ev.duration / total_t))
            dt = ev.duration / n_seg
            cached_alpha = None
            cached_u = None
            for k in range(n_seg):
                alpha = ev.alpha_at((k + 0.5) * dt)
                if cached_alpha is None or alpha != cached_alpha:
                    h = displaced_frame_hamiltonian(alpha, params, space)
                    cached_u = expm(-1j * dt * h)
                    cached_alpha = alpha
                u = cached_u @ u
        else:
            raise ScheduleError(f"unsupported event for oracle: {ev!r}")
    return u


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def moment_probe(rho: DensityMatrix, observable: str) -> float:
    """<q>, <p>, <q^2> or <p^2> of an oscillator state."""
    if rho.space_tag != "oscillator":
        raise SpaceTagError("moment_probe expects an oscillator state")
    q, p = quadrature_ops(rho.space)
    op = {"q": q, "p": p, "q2": q @ q, "p2": p @ p}[observable]
    val = complex(np.trace(rho.data @ op))
    if abs(val.imag) > 1e-10:
        raise ValueError(f"moment has imaginary residue {val.imag:.2e}")
    return float(val.real)


def joint_from_parts(anc_ket: np.ndarray, osc: DensityMatrix) -> DensityMatrix:
    """|anc><anc| tensor rho_osc as a joint DensityMatrix."""
    anc = np.outer(anc_ket, anc_ket.conj())
    return make_density_matrix(np.kron(anc, osc.data), osc.space, "joint",
                               normalize=False)
