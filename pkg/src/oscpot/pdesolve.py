"""Initial-boundary-value solver for the singular problem and its limit.

Domain: unit interval or unit square, homogeneous Dirichlet boundary.
Equations (potential sign per the package convention):

    eps-problem:   du/dt = Lap(u) + eps^(-gamma) W(x/eps, t/eps^k) u + f
    homogenized:   du/dt = Lap(u) - c_eff(t) u + f

Scheme: Strang splitting.  Each step is reaction over half a step,
Crank-Nicolson diffusion with trapezoidal source over a full step,
reaction over the second half.  The reaction factor is exact: W is a
trigonometric polynomial, so the in-time integral of the oscillated
potential has a closed form per mode, and the half-step multiplier
exp(eps^(-gamma) * integral) carries no quadrature error.  Diffusion uses
the standard second-order finite-difference Laplacian; the CN solve is
done exactly by diagonalizing that operator with the type-I sine
transform, whose basis is the eigenbasis of the Dirichlet
second-difference matrix.

Resolution policy for the eps-problem: at least 16 grid points per eps
(spatial oscillation) and dt no larger than min(eps^k, eps^(gamma+1))/8;
eps^k resolves the potential's time oscillation, eps^(gamma+1) keeps the
splitting commutator error in check.  Grids built by `policy_grid` use 32
points per eps: the second-difference error on the eps-wavelength
component scales like (2*pi*h/eps)^2, and 16 points leave ~15% relative
error on the corrector-sized part of u_eps - u_0, too coarse for the 10%
refinement certificate used by rate sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sp_fft

from .correctors import effective_potential
from .errors import BlowUp, GridMismatch, ResolutionViolation
from .potential import ScalarSeries, TrigField
from .regimes import RegimeSpec

BLOWUP_LIMIT = 1e12

#: Resolution policy constants: the enforced floor on points per eps, the
#: default used when building policy grids, and the divisor applied to the
#: limiting time scale.
POINTS_PER_EPS = 16
POINTS_PER_EPS_DEFAULT = 32
DT_DIVISOR = 8
#: The eps-wavelength response relaxes on the diffusive time scale
#: eps^2/(4 pi^2); Crank-Nicolson tracks that factor only for
#: dt * (2 pi / eps)^2 below ~1, hence this extra cap on policy grids.
DIFFUSIVE_DT_DIVISOR = 64


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time discretization of (0,1)^d x (0,T].

    nx interior points per axis (spacing h = 1/(nx+1)); `checkpoints`
    equispaced snapshot times; dt must divide the checkpoint interval to
    within one part in 1e6 and is nudged to divide it exactly.
    """

    d: int
    nx: int
    dt: float
    T: float
    checkpoints: int = 64

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"spatial dimension must be 1 or 2, got {self.d}")
        if self.nx < 8:
            raise ValueError(f"nx must be >= 8, got {self.nx}")
        if self.checkpoints < 8:
            raise ValueError(
                f"checkpoints must be >= 8, got {self.checkpoints}")
        if not self.T > 0:
            raise ValueError(f"final time must be positive, got {self.T}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        interval = self.T / self.checkpoints
        steps = round(interval / self.dt)
        if steps < 1 or abs(steps * self.dt - interval) > 1e-6 * interval:
            raise ValueError(
                f"dt = {self.dt} does not divide the checkpoint interval "
                f"{interval} to within 1e-6")

    @property
    def h(self) -> float:
        return 1.0 / (self.nx + 1)

    @property
    def interval(self) -> float:
        return self.T / self.checkpoints

    @property
    def steps_per_interval(self) -> int:
        return round(self.interval / self.dt)

    @property
    def dt_effective(self) -> float:
        """dt nudged so that steps land exactly on checkpoints."""
        return self.interval / self.steps_per_interval

    @property
    def total_steps(self) -> int:
        return self.steps_per_interval * self.checkpoints

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nx,) * self.d

    def axes(self) -> tuple[np.ndarray, ...]:
        """Interior grid coordinates per axis."""
        x = np.arange(1, self.nx + 1, dtype=float) * self.h
        return (x,) * self.d

    def cell_updates(self) -> int:
        """Cost measure: grid cells times time steps."""
        return self.nx ** self.d * self.total_steps

    def refined(self) -> "GridSpec":
        """Halve both mesh sizes (nested grid: nx -> 2nx+1, dt -> dt/2)."""
        return GridSpec(self.d, 2 * self.nx + 1, self.dt_effective / 2.0,
                        self.T, self.checkpoints)

    def checkpoint_times(self) -> np.ndarray:
        return np.arange(self.checkpoints + 1) * self.interval


def policy_grid(eps: float, k: float, gamma: float, T: float, d: int,
                checkpoints: int = 64) -> GridSpec:
    """Default grid for this eps: double the policy floor in space, and
    dt under both the oscillation cap and the diffusive-relaxation cap."""
    nx = max(8, math.ceil(POINTS_PER_EPS_DEFAULT / eps))
    interval = T / checkpoints
    dt_cap = min(min(eps ** k, eps ** (gamma + 1.0)) / DT_DIVISOR,
                 eps ** 2 / DIFFUSIVE_DT_DIVISOR)
    steps = max(1, math.ceil(interval / dt_cap))
    return GridSpec(d, nx, interval / steps, T, checkpoints)


def check_resolution(grid: GridSpec, eps: float, k: float, gamma: float) -> None:
    slack = 1.0 + 1e-9
    if grid.nx * slack < POINTS_PER_EPS / eps:
        raise ResolutionViolation(
            f"nx = {grid.nx} < {POINTS_PER_EPS}/eps = {POINTS_PER_EPS / eps:.1f}; "
            f"spatial oscillation unresolved")
    dt_cap = min(eps ** k, eps ** (gamma + 1.0)) / DT_DIVISOR
    if grid.dt_effective > dt_cap * slack:
        raise ResolutionViolation(
            f"dt = {grid.dt_effective:.3e} exceeds policy cap {dt_cap:.3e} "
            f"= min(eps^k, eps^(gamma+1))/{DT_DIVISOR}")


# ---------------------------------------------------------------------------
# Problem data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SourceTerm:
    """amp * prod_i sin(j_i pi x_i) * exp(sigma t) * cos(omega t)."""

    amp: float
    j: tuple[int, ...]
    sigma: float = 0.0
    omega: float = 0.0


@dataclass(frozen=True)
class SourceDescriptor:
    terms: tuple[SourceTerm, ...] = ()

    @staticmethod
    def zero() -> "SourceDescriptor":
        return SourceDescriptor(())

    def compile(self, grid: GridSpec) -> Callable[[float], np.ndarray] | None:
        if not self.terms:
            return None
        shapes = [_sine_profile(grid, t.j) for t in self.terms]

        def f(t: float) -> np.ndarray:
            out = np.zeros(grid.shape)
            for term, shape in zip(self.terms, shapes):
                out += term.amp * math.exp(term.sigma * t) \
                    * math.cos(term.omega * t) * shape
            return out

        return f


@dataclass(frozen=True)
class InitialTerm:
    """amp * prod_i sin(j_i pi x_i)."""

    amp: float
    j: tuple[int, ...]


@dataclass(frozen=True)
class InitialDescriptor:
    terms: tuple[InitialTerm, ...] = ()

    def build(self, grid: GridSpec) -> np.ndarray:
        out = np.zeros(grid.shape)
        for term in self.terms:
            out += term.amp * _sine_profile(grid, term.j)
        return out


def _sine_profile(grid: GridSpec, j: Sequence[int]) -> np.ndarray:
    if len(j) != grid.d:
        raise ValueError(
            f"mode index {tuple(j)} has dimension {len(j)}, grid is {grid.d}d")
    axes = grid.axes()
    out = np.sin(j[0] * math.pi * axes[0])
    if grid.d == 2:
        out = np.outer(out, np.sin(j[1] * math.pi * axes[1]))
    return out


@dataclass(frozen=True)
class ProblemSpec:
    """One instance of the eps-problem."""

    W: TrigField
    eps: float
    regime: RegimeSpec
    f: SourceDescriptor
    g: InitialDescriptor

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")

    @property
    def d(self) -> int:
        return self.W.d


@dataclass
class Trajectory:
    """Checkpoint snapshots of one solve, plus the running norm maximum."""

    grid: GridSpec
    times: np.ndarray
    snapshots: np.ndarray
    max_l2: float
    label: str = ""

    def l2_series(self) -> np.ndarray:
        h = self.grid.h
        axis = tuple(range(1, self.snapshots.ndim))
        return h ** (self.grid.d / 2.0) * np.sqrt(
            np.sum(self.snapshots ** 2, axis=axis))


def _l2(u: np.ndarray, grid: GridSpec) -> float:
    # Composite trapezoid over the closed box; boundary values are zero,
    # so the interior sum is the whole quadrature.
    return grid.h ** (grid.d / 2.0) * float(np.linalg.norm(u.ravel()))


# ---------------------------------------------------------------------------
# Diffusion: CN step diagonalized by the type-I sine transform
# ---------------------------------------------------------------------------

class _Diffusion:
    def __init__(self, grid: GridSpec):
        nx, h, dt = grid.nx, grid.h, grid.dt_effective
        j = np.arange(1, nx + 1)
        lam1 = -(4.0 / h ** 2) * np.sin(j * math.pi * h / 2.0) ** 2
        lam = lam1 if grid.d == 1 else lam1[:, None] + lam1[None, :]
        z = 0.5 * dt * lam
        self.gain = (1.0 + z) / (1.0 - z)
        self.solve_weight = 1.0 / (1.0 - z)
        self.half_dt = 0.5 * dt

    def step(self, u: np.ndarray, f_a: np.ndarray | None,
             f_b: np.ndarray | None) -> np.ndarray:
        uh = sp_fft.dstn(u, type=1)
        if f_a is None:
            uh = self.gain * uh
        else:
            fh = sp_fft.dstn(self.half_dt * (f_a + f_b), type=1)
            uh = self.gain * uh + self.solve_weight * fh
        return sp_fft.idstn(uh, type=1)


# ---------------------------------------------------------------------------
# Reaction factors (exact per half-step)
# ---------------------------------------------------------------------------

class _OscillatedReaction:
    """Multiplier exp(eps^(-gamma) * int_[ta,tb] W(x/eps, s/eps^k) ds).

    Per mode (m, n, c) the time integral over [ta, tb] is
        c * exp(2 pi i m.x/eps) * eps^k (e(n tb/eps^k) - e(n ta/eps^k)) / (2 pi i n)
    for n != 0 and c * exp(...) * (tb - ta) for n = 0, with e(z) =
    exp(2 pi i z).  Torus arguments are reduced mod 1 in long double so
    the phase stays accurate when t/eps^k is large.
    """

    def __init__(self, W: TrigField, eps: float, k: float, gamma: float,
                 grid: GridSpec):
        eps_ld = np.longdouble(eps)
        self.eps_k_ld = eps_ld ** np.longdouble(k)
        self.eps_k = float(self.eps_k_ld)
        self.scale = float(eps_ld ** np.longdouble(-gamma))
        axes = grid.axes()
        ys = [np.remainder(np.asarray(x, dtype=np.longdouble) / eps_ld, 1.0)
              .astype(float) for x in axes]
        self.spatial: list[tuple[int, np.ndarray]] = []
        for m, n, c in W.modes:
            phase = np.zeros(grid.shape)
            for axis, mj in enumerate(m):
                if mj:
                    if grid.d == 1:
                        phase = phase + mj * ys[axis]
                    else:
                        yj = ys[axis][:, None] if axis == 0 else ys[axis][None, :]
                        phase = phase + mj * yj
            self.spatial.append((n, c * np.exp(2j * math.pi * phase)))

    def _tau(self, t_ld) -> float:
        return float(np.remainder(t_ld / self.eps_k_ld, np.longdouble(1.0)))

    def factor(self, ta_ld, tb_ld) -> np.ndarray:
        tau_a = self._tau(ta_ld)
        tau_b = self._tau(tb_ld)
        total: np.ndarray | complex = 0.0 + 0.0j
        for n, s in self.spatial:
            if n == 0:
                total = total + float(tb_ld - ta_ld) * s
            else:
                two_pi_in = 2j * math.pi * n
                weight = self.eps_k * (np.exp(two_pi_in * tau_b)
                                       - np.exp(two_pi_in * tau_a)) / two_pi_in
                total = total + weight * s
        return np.exp(self.scale * np.real(total))


class _HomogenizedReaction:
    """Multiplier exp(-int_[ta,tb] c_eff(s) ds); c_eff constant or a
    1-periodic series in t (frozen-time regime)."""

    def __init__(self, ceff: float | ScalarSeries):
        self.ceff = ceff
        self.constant = None if isinstance(ceff, ScalarSeries) else float(ceff)

    def factor(self, ta: float, tb: float) -> float:
        a, b = float(ta), float(tb)
        if self.constant is not None:
            return math.exp(-self.constant * (b - a))
        return math.exp(-self.ceff.definite_integral(a, b))


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

def _march(grid: GridSpec, u0: np.ndarray, reaction, source_fn,
           diffusion_on: bool, label: str) -> Trajectory:
    dt = grid.dt_effective
    dt_ld = np.longdouble(grid.interval) / grid.steps_per_interval
    half_ld = dt_ld / 2
    diffusion = _Diffusion(grid) if diffusion_on else None
    u = u0.copy()
    snaps = np.empty((grid.checkpoints + 1,) + grid.shape)
    snaps[0] = u
    max_l2 = _l2(u, grid)
    step_index = 0
    for ci in range(grid.checkpoints):
        for _ in range(grid.steps_per_interval):
            t_a = np.longdouble(2 * step_index) * half_ld
            t_m = np.longdouble(2 * step_index + 1) * half_ld
            t_b = np.longdouble(2 * step_index + 2) * half_ld
            if reaction is not None:
                u = u * reaction.factor(t_a, t_m)
            if diffusion is not None:
                if source_fn is None:
                    u = diffusion.step(u, None, None)
                else:
                    u = diffusion.step(u, source_fn(float(t_a)),
                                       source_fn(float(t_b)))
            elif source_fn is not None:
                # Pure-reaction mode still honours the source via the
                # trapezoid rule so that test problems stay well-posed.
                u = u + 0.5 * dt * (source_fn(float(t_a)) + source_fn(float(t_b)))
            if reaction is not None:
                u = u * reaction.factor(t_m, t_b)
            step_index += 1
            nrm = _l2(u, grid)
            if not math.isfinite(nrm) or nrm > BLOWUP_LIMIT:
                raise BlowUp(
                    f"{label or 'solve'}: L2 norm {nrm:.3e} at "
                    f"t = {float(t_b):.6g} exceeds {BLOWUP_LIMIT:.0e}")
            max_l2 = max(max_l2, nrm)
        snaps[ci + 1] = u
    return Trajectory(grid=grid, times=grid.checkpoint_times(),
                      snapshots=snaps, max_l2=max_l2, label=label)


def solve_epsilon(p: ProblemSpec, grid: GridSpec, *,
                  enforce_policy: bool = True,
                  disable_diffusion: bool = False,
                  source_fn: Callable[[float], np.ndarray] | None = None
                  ) -> Trajectory:
    """March the eps-problem to T on the given grid.

    disable_diffusion is a test hook: with it the scheme reduces to the
    exact reaction factor alone.  source_fn overrides the declarative
    source with an arbitrary array-valued function of time (used for
    manufactured solutions).
    """
    if p.d != grid.d:
        raise ValueError(
            f"potential dimension {p.d} does not match grid dimension {grid.d}")
    if enforce_policy:
        check_resolution(grid, p.eps, p.regime.k, p.regime.gamma)
    reaction = _OscillatedReaction(p.W, p.eps, p.regime.k, p.regime.gamma, grid)
    if source_fn is None:
        source_fn = p.f.compile(grid)
    return _march(grid, p.g.build(grid), reaction, source_fn,
                  diffusion_on=not disable_diffusion,
                  label=f"eps={p.eps:g}")


def solve_homogenized(ceff: float | ScalarSeries, f: SourceDescriptor,
                      g: InitialDescriptor, grid: GridSpec, *,
                      source_fn: Callable[[float], np.ndarray] | None = None
                      ) -> Trajectory:
    """March the homogenized problem du/dt - Lap u + c_eff u = f."""
    reaction = _HomogenizedReaction(ceff)
    if source_fn is None:
        source_fn = f.compile(grid)
    return _march(grid, g.build(grid), reaction, source_fn,
                  diffusion_on=True, label="homogenized")


# ---------------------------------------------------------------------------
# Comparison and refinement diagnostics
# ---------------------------------------------------------------------------

def error_linf_l2(a: Trajectory, b: Trajectory) -> float:
    """max over checkpoints of the discrete L2 distance."""
    if a.grid.d != b.grid.d or a.grid.nx != b.grid.nx:
        raise GridMismatch(
            f"grids differ: {a.grid.d}d nx={a.grid.nx} vs "
            f"{b.grid.d}d nx={b.grid.nx}")
    if a.times.shape != b.times.shape or not np.allclose(
            a.times, b.times, rtol=1e-9, atol=1e-12):
        raise GridMismatch("checkpoint times differ")
    h = a.grid.h
    axis = tuple(range(1, a.snapshots.ndim))
    dists = h ** (a.grid.d / 2.0) * np.sqrt(
        np.sum((a.snapshots - b.snapshots) ** 2, axis=axis))
    return float(np.max(dists))


def richardson_check(p: ProblemSpec, grid: GridSpec, *,
                     enforce_policy: bool = True) -> float:
    """Relative change of the eps-vs-homogenized error under one joint
    refinement (dt/2, nx -> 2nx+1).

    Small values certify that the measured error is a property of the
    problem, not the discretization; sweeps require <= 0.1.
    """
    ceff = effective_potential(p.regime, p.W)
    errors = []
    for g in (grid, grid.refined()):
        ue = solve_epsilon(p, g, enforce_policy=enforce_policy)
        uh = solve_homogenized(ceff, p.f, p.g, g)
        errors.append(error_linf_l2(ue, uh))
    e_coarse, e_fine = errors
    top = max(e_coarse, e_fine)
    if top <= 1e-12:
        return 0.0
    return abs(e_coarse - e_fine) / top
