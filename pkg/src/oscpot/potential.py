"""Real trigonometric polynomials on the unit space-time torus.

A potential W(y, tau) is stored as a finite set of Fourier modes

    W(y, tau) = sum_k  c_k * exp(2*pi*i*(m_k . y + n_k * tau)),

with y on the d-torus and tau on the unit circle.  Realness is enforced
through Hermitian symmetry: for every mode (m, n, c) the conjugate mode
(-m, -n, conj(c)) must be present.  All calculus used elsewhere in the
package (averages, antiderivatives in tau, spatial derivatives, products)
acts exactly on the coefficients, so corrector computations downstream
carry no discretization error.

Three value types cover the shapes that occur:

* TrigField    -- function of (y, tau), the general case;
* SpatialField -- function of y only (tau-averages, spatial correctors);
* ScalarSeries -- function of tau only (y-averages, iterated correctors).

All three are immutable; arithmetic returns new objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NoApplicableRegime, NonPeriodicAntiderivative

TWO_PI = 2.0 * math.pi

# Evaluation of a Hermitian mode sum is real up to round-off; the residual
# imaginary part is checked against this factor times the coefficient mass.
_IMAG_SLACK = 1e-12


def _as_mode_key(m: Sequence[int], n: int) -> tuple[tuple[int, ...], int]:
    return tuple(int(v) for v in m), int(n)


def _neg(key: tuple[tuple[int, ...], int]) -> tuple[tuple[int, ...], int]:
    m, n = key
    return tuple(-v for v in m), -n


def _merge(entries: Iterable[tuple[tuple[tuple[int, ...], int], complex]],
           drop_below: float = 0.0) -> dict:
    out: dict = {}
    for key, c in entries:
        out[key] = out.get(key, 0.0 + 0.0j) + complex(c)
    if drop_below > 0.0:
        out = {k: c for k, c in out.items() if abs(c) > drop_below}
    else:
        out = {k: c for k, c in out.items() if c != 0}
    return out


def _check_hermitian(modes: Mapping[tuple[tuple[int, ...], int], complex]) -> None:
    scale = max((abs(c) for c in modes.values()), default=0.0)
    tol = 1e-12 * max(1.0, scale)
    for key, c in modes.items():
        partner = modes.get(_neg(key))
        if partner is None or abs(partner - c.conjugate()) > tol:
            raise ValueError(
                f"field is not real: mode m={key[0]}, n={key[1]} lacks a "
                f"matching conjugate partner")


@dataclass(frozen=True)
class TrigField:
    """Real trigonometric polynomial in (y, tau); immutable."""

    d: int
    modes: tuple[tuple[tuple[int, ...], int, complex], ...]

    def __init__(self, d: int,
                 coeffs: Mapping | Iterable | None = None,
                 *, _skip_check: bool = False):
        if d < 1:
            raise ValueError(f"spatial dimension must be >= 1, got {d}")
        items = []
        if coeffs:
            pairs = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
            for entry in pairs:
                if isinstance(entry[0], tuple) and len(entry) == 2:
                    (m, n), c = entry
                else:
                    m, n, c = entry
                key = _as_mode_key(m, n)
                if len(key[0]) != d:
                    raise ValueError(
                        f"mode {key[0]} has dimension {len(key[0])}, expected {d}")
                items.append((key, complex(c)))
        merged = _merge(items)
        if not _skip_check:
            _check_hermitian(merged)
        ordered = tuple(sorted((k[0], k[1], c) for k, c in merged.items()))
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "modes", ordered)

    # -- constructors ---------------------------------------------------

    @staticmethod
    def zero(d: int) -> "TrigField":
        return TrigField(d, [])

    @staticmethod
    def constant(d: int, value: float) -> "TrigField":
        return TrigField(d, [((0,) * d, 0, complex(value))])

    @staticmethod
    def from_cos(d: int, m: Sequence[int], n: int, amp: float = 1.0) -> "TrigField":
        """amp * cos(2*pi*(m.y + n*tau))."""
        key = _as_mode_key(m, n)
        half = 0.5 * amp
        return TrigField(d, [(key, complex(half)), (_neg(key), complex(half))])

    @staticmethod
    def from_sin(d: int, m: Sequence[int], n: int, amp: float = 1.0) -> "TrigField":
        """amp * sin(2*pi*(m.y + n*tau))."""
        key = _as_mode_key(m, n)
        half = complex(0.0, -0.5 * amp)
        return TrigField(d, [(key, half), (_neg(key), half.conjugate())])

    # -- bookkeeping ----------------------------------------------------

    def coeff_map(self) -> dict:
        return {(m, n): c for m, n, c in self.modes}

    def coeff(self, m: Sequence[int], n: int) -> complex:
        return self.coeff_map().get(_as_mode_key(m, n), 0.0 + 0.0j)

    @property
    def coeff_mass(self) -> float:
        """Sum of coefficient magnitudes; scale for round-off tolerances."""
        return sum(abs(c) for _, _, c in self.modes)

    def is_zero(self) -> bool:
        return not self.modes

    def trimmed(self, tol: float) -> "TrigField":
        """Drop modes with |coefficient| <= tol (absolute)."""
        kept = [((m, n), c) for m, n, c in self.modes if abs(c) > tol]
        return TrigField(self.d, kept, _skip_check=True)

    # -- algebra --------------------------------------------------------

    def __add__(self, other: "TrigField") -> "TrigField":
        if not isinstance(other, TrigField):
            return NotImplemented
        if other.d != self.d:
            raise ValueError("dimension mismatch in field addition")
        entries = [((m, n), c) for m, n, c in self.modes]
        entries += [((m, n), c) for m, n, c in other.modes]
        return TrigField(self.d, entries, _skip_check=True)

    def __sub__(self, other: "TrigField") -> "TrigField":
        return self + (-1.0) * other

    def __neg__(self) -> "TrigField":
        return (-1.0) * self

    def __rmul__(self, scalar: float) -> "TrigField":
        if isinstance(scalar, (int, float)):
            entries = [((m, n), scalar * c) for m, n, c in self.modes]
            return TrigField(self.d, entries, _skip_check=True)
        return NotImplemented

    def __mul__(self, other) -> "TrigField":
        if isinstance(other, (int, float)):
            return self.__rmul__(other)
        if isinstance(other, TrigField):
            if other.d != self.d:
                raise ValueError("dimension mismatch in field product")
            entries = []
            for m1, n1, c1 in self.modes:
                for m2, n2, c2 in other.modes:
                    key = (tuple(a + b for a, b in zip(m1, m2)), n1 + n2)
                    entries.append((key, c1 * c2))
            merged = _merge(entries)
            # Conjugate modes accumulate their products in different
            # orders, so one can cancel exactly while its partner keeps a
            # round-off residue; project back onto the real subspace.
            sym = []
            for key in set(merged) | {_neg(k) for k in merged}:
                value = 0.5 * (merged.get(key, 0j)
                               + merged.get(_neg(key), 0j).conjugate())
                sym.append((key, value))
            return TrigField(self.d, sym, _skip_check=True)
        return NotImplemented

    # -- evaluation -----------------------------------------------------

    def evaluate(self, y, tau):
        """Evaluate at y (scalar for d=1, length-d sequence, or arrays)
        and tau (scalar or array); broadcasting follows numpy rules."""
        if self.d == 1 and not (isinstance(y, (list, tuple)) and len(y) == 1):
            ys = (np.asarray(y, dtype=float),)
        else:
            if len(y) != self.d:
                raise ValueError(f"expected {self.d} coordinates, got {len(y)}")
            ys = tuple(np.asarray(v, dtype=float) for v in y)
        tau = np.asarray(tau, dtype=float)
        total = np.zeros(np.broadcast(*ys, tau).shape, dtype=complex)
        for m, n, c in self.modes:
            phase = n * tau
            for mj, yj in zip(m, ys):
                if mj:
                    phase = phase + mj * yj
            total = total + c * np.exp(2j * math.pi * phase)
        _check_imag(total, self.coeff_mass)
        real = np.real(total)
        return float(real) if real.ndim == 0 else real

    # -- averages -------------------------------------------------------

    def mean_full(self) -> float:
        """Average over the full (y, tau) torus."""
        c = self.coeff((0,) * self.d, 0)
        return float(c.real)

    def mean_y(self) -> "ScalarSeries":
        """Average over y; a function of tau."""
        zero = (0,) * self.d
        return ScalarSeries({n: c for m, n, c in self.modes if m == zero})

    def mean_tau(self) -> "SpatialField":
        """Average over tau; a function of y."""
        return SpatialField(self.d, {m: c for m, n, c in self.modes if n == 0})

    # -- calculus -------------------------------------------------------

    def grad_y(self) -> tuple["TrigField", ...]:
        out = []
        for axis in range(self.d):
            entries = [((m, n), TWO_PI * 1j * m[axis] * c)
                       for m, n, c in self.modes if m[axis]]
            out.append(TrigField(self.d, entries, _skip_check=True))
        return tuple(out)

    def laplacian_y(self) -> "TrigField":
        entries = [((m, n), -TWO_PI ** 2 * sum(v * v for v in m) * c)
                   for m, n, c in self.modes if any(m)]
        return TrigField(self.d, entries, _skip_check=True)

    def antiderivative_tau(self) -> "TrigField":
        """Primitive in tau vanishing at tau = 0; periodic only when every
        constant-in-tau mode is absent."""
        for m, n, c in self.modes:
            if n == 0:
                raise NonPeriodicAntiderivative(
                    f"mode m={m}, n=0 has nonzero tau-mean "
                    f"(|c| = {abs(c):.3e}); no periodic antiderivative")
        entries = []
        for m, n, c in self.modes:
            w = c / (TWO_PI * 1j * n)
            entries.append(((m, n), w))
            entries.append(((m, 0), -w))
        return TrigField(self.d, entries, _skip_check=True)


def _check_imag(total: np.ndarray, mass: float) -> None:
    resid = float(np.max(np.abs(np.imag(total)))) if total.size else 0.0
    if resid > _IMAG_SLACK * max(1.0, mass):
        raise ValueError(
            f"imaginary residue {resid:.3e} in mode sum; field coefficients "
            f"are not Hermitian")


@dataclass(frozen=True)
class SpatialField:
    """Real trigonometric polynomial in y only."""

    d: int
    modes: tuple[tuple[tuple[int, ...], complex], ...]

    def __init__(self, d: int, coeffs: Mapping | Iterable | None = None,
                 *, _skip_check: bool = False):
        items = []
        if coeffs:
            pairs = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
            for m, c in pairs:
                key = _as_mode_key(m, 0)[0]
                if len(key) != d:
                    raise ValueError(
                        f"mode {key} has dimension {len(key)}, expected {d}")
                items.append(((key, 0), complex(c)))
        merged = _merge(items)
        if not _skip_check:
            _check_hermitian(merged)
        ordered = tuple(sorted((k[0], c) for k, c in merged.items()))
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "modes", ordered)

    def as_field(self) -> TrigField:
        return TrigField(self.d, [((m, 0), c) for m, c in self.modes],
                         _skip_check=True)

    def coeff(self, m: Sequence[int]) -> complex:
        key = _as_mode_key(m, 0)[0]
        for mm, c in self.modes:
            if mm == key:
                return c
        return 0.0 + 0.0j

    def is_zero(self) -> bool:
        return not self.modes

    def mean(self) -> float:
        return float(self.coeff((0,) * self.d).real)

    def evaluate(self, y):
        return self.as_field().evaluate(y, 0.0)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return SpatialField(
                self.d, [(m, other * c) for m, c in self.modes], _skip_check=True)
        return NotImplemented

    __rmul__ = __mul__


@dataclass(frozen=True)
class ScalarSeries:
    """Real trigonometric series in tau only."""

    modes: tuple[tuple[int, complex], ...]

    def __init__(self, coeffs: Mapping | Iterable | None = None,
                 *, _skip_check: bool = False):
        items = []
        if coeffs:
            pairs = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
            for n, c in pairs:
                items.append((((), int(n)), complex(c)))
        merged = _merge(items)
        if not _skip_check:
            _check_hermitian(merged)
        ordered = tuple(sorted((k[1], c) for k, c in merged.items()))
        object.__setattr__(self, "modes", ordered)

    @staticmethod
    def constant(value: float) -> "ScalarSeries":
        return ScalarSeries({0: complex(value)})

    def as_field(self, d: int) -> TrigField:
        zero = (0,) * d
        return TrigField(d, [((zero, n), c) for n, c in self.modes],
                         _skip_check=True)

    def coeff(self, n: int) -> complex:
        for nn, c in self.modes:
            if nn == n:
                return c
        return 0.0 + 0.0j

    def is_zero(self) -> bool:
        return not self.modes

    @property
    def coeff_mass(self) -> float:
        return sum(abs(c) for _, c in self.modes)

    def mean(self) -> float:
        return float(self.coeff(0).real)

    def evaluate(self, tau):
        tau = np.asarray(tau, dtype=float)
        total = np.zeros(tau.shape, dtype=complex)
        mass = 0.0
        for n, c in self.modes:
            total = total + c * np.exp(2j * math.pi * n * tau)
            mass += abs(c)
        _check_imag(total, mass)
        real = np.real(total)
        return float(real) if real.ndim == 0 else real

    def antiderivative(self) -> "ScalarSeries":
        """Primitive vanishing at tau = 0; requires zero mean."""
        c0 = self.coeff(0)
        if c0 != 0:
            raise NonPeriodicAntiderivative(
                f"series has nonzero mean {c0.real:.3e}; "
                f"no periodic antiderivative")
        entries = []
        for n, c in self.modes:
            w = c / (TWO_PI * 1j * n)
            entries.append((n, w))
            entries.append((0, -w))
        return ScalarSeries(entries, _skip_check=True)

    def definite_integral(self, a: float, b: float) -> float:
        """Integral over the real interval [a, b] (not reduced mod 1)."""
        total = 0.0 + 0.0j
        for n, c in self.modes:
            if n == 0:
                total += c * (b - a)
            else:
                two_pi_in = 2j * math.pi * n
                total += c * (np.exp(two_pi_in * b) - np.exp(two_pi_in * a)) / two_pi_in
        return float(total.real)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return ScalarSeries([(n, other * c) for n, c in self.modes],
                                _skip_check=True)
        if isinstance(other, ScalarSeries):
            entries = []
            for n1, c1 in self.modes:
                for n2, c2 in other.modes:
                    entries.append((n1 + n2, c1 * c2))
            return ScalarSeries(entries, _skip_check=True)
        return NotImplemented

    def __rmul__(self, scalar):
        return self.__mul__(scalar)

    def __add__(self, other):
        if not isinstance(other, ScalarSeries):
            return NotImplemented
        return ScalarSeries(list(self.modes) + list(other.modes),
                            _skip_check=True)

    def __sub__(self, other):
        return self + (-1.0) * other


# ---------------------------------------------------------------------------
# Admissibility classification
# ---------------------------------------------------------------------------

class AssumptionId(Enum):
    """Admissibility class of (W, k, gamma); numbering follows the
    parameter map k > 2 strong / 1 < k < 2 / k = 2 / k > 2 weak / k <= 1."""

    STRONG_FAST_TIME = 1   # gamma = k - 1, 2 < k <= 3, tau-mean of W vanishes
    SUBCRITICAL = 2        # gamma = 1, 1 < k < 2, full mean vanishes
    CRITICAL = 3           # gamma = 1, k = 2, full mean vanishes
    SUPERCRITICAL = 4      # gamma = 1, k > 2, full mean vanishes
    SLOW_TIME = 5          # gamma = 1, 0 <= k <= 1, y-mean of W vanishes


class GammaMode(Enum):
    """How the singular exponent gamma is tied to the time exponent k."""

    UNIT = "unit"            # gamma = 1
    K_MINUS_1 = "k_minus_1"  # gamma = k - 1


def classify_assumption(W: TrigField, k: float, gamma_mode: GammaMode) -> AssumptionId:
    """Decide which admissibility class (W, k, gamma) falls into.

    Raises NoApplicableRegime naming the first violated condition.
    """
    if k < 0:
        raise ValueError(f"time exponent k must be >= 0, got {k}")
    if gamma_mode is GammaMode.K_MINUS_1:
        if not 2.0 < k <= 3.0:
            raise NoApplicableRegime(
                f"gamma = k - 1 requires 2 < k <= 3, got k = {k}")
        if not W.mean_tau().is_zero():
            raise NoApplicableRegime(
                "gamma = k - 1 requires the tau-mean of W to vanish for "
                "every y (no n = 0 modes)")
        return AssumptionId.STRONG_FAST_TIME
    if gamma_mode is not GammaMode.UNIT:
        raise ValueError(f"unknown gamma mode {gamma_mode!r}")
    if k <= 1.0:
        if not W.mean_y().is_zero():
            raise NoApplicableRegime(
                "k <= 1 requires the y-mean of W to vanish for every tau "
                "(no m = 0 modes)")
        return AssumptionId.SLOW_TIME
    if abs(W.mean_full()) > 0.0:
        raise NoApplicableRegime(
            f"k > 1 with gamma = 1 requires the full space-time mean of W "
            f"to vanish, got {W.mean_full():.6g}")
    if k < 2.0:
        return AssumptionId.SUBCRITICAL
    if k == 2.0:
        return AssumptionId.CRITICAL
    return AssumptionId.SUPERCRITICAL


# ---------------------------------------------------------------------------
# Oscillated sampling
# ---------------------------------------------------------------------------

def _frac_div(numer, denom_ld) -> np.ndarray:
    """(numer / denom) mod 1 computed in extended precision.

    The quotient can reach ~1/eps^k; reducing it in double precision
    would leave an absolute phase error near the 1e-10 contract, so the
    division and reduction run in long double.
    """
    q = np.asarray(numer, dtype=np.longdouble) / denom_ld
    return np.remainder(q, np.longdouble(1.0)).astype(float)


def sample_oscillated(W: TrigField, eps: float, k: float, gamma: float, x, t: float):
    """Evaluate eps^(-gamma) * W(x/eps, t/eps^k) at physical coordinates.

    x is a scalar (d=1), a length-d sequence, or arrays per coordinate;
    t is a scalar.  Torus arguments are reduced mod 1 in extended
    precision so that the phase error per call stays below 1e-10.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    eps_ld = np.longdouble(eps)
    if W.d == 1 and not (isinstance(x, (list, tuple)) and len(x) == 1):
        xs = (x,)
    else:
        xs = tuple(x)
    if len(xs) != W.d:
        raise ValueError(f"expected {W.d} coordinates, got {len(xs)}")
    y = [_frac_div(xi, eps_ld) for xi in xs]
    tau = _frac_div(t, eps_ld ** np.longdouble(k))
    amp = float(eps_ld ** np.longdouble(-gamma))
    value = W.evaluate(y if W.d > 1 else y[0], tau)
    return amp * value


# ---------------------------------------------------------------------------
# Descriptor I/O
# ---------------------------------------------------------------------------

def field_from_descriptor(entries: Sequence[Mapping], d: int | None = None) -> TrigField:
    """Build a TrigField from a list of {"m": [...], "n": int, "re": .., "im": ..}.

    Hermitian partners may be omitted; they are completed automatically.
    Duplicate entries for one mode must agree, and an explicitly given
    partner must be the exact conjugate.
    """
    if not isinstance(entries, Sequence) or isinstance(entries, (str, bytes)):
        raise ValueError("potential descriptor must be a list of mode entries")
    seen: dict = {}
    dim = d
    for i, entry in enumerate(entries):
        if not isinstance(entry, Mapping):
            raise ValueError(f"mode entry {i} is not an object")
        extra = set(entry) - {"m", "n", "re", "im"}
        if extra:
            raise ValueError(
                f"mode entry {i} has unknown key '{sorted(extra)[0]}'")
        if "m" not in entry or "n" not in entry:
            raise ValueError(f"mode entry {i} must give 'm' and 'n'")
        m = entry["m"]
        if not isinstance(m, Sequence) or isinstance(m, (str, bytes)):
            raise ValueError(f"mode entry {i}: 'm' must be a list of integers")
        key = _as_mode_key(m, entry["n"])
        if dim is None:
            dim = len(key[0])
        elif len(key[0]) != dim:
            raise ValueError(
                f"mode entry {i}: dimension {len(key[0])} conflicts with {dim}")
        c = complex(float(entry.get("re", 0.0)), float(entry.get("im", 0.0)))
        if key in seen:
            if abs(seen[key] - c) > 1e-12 * max(1.0, abs(c)):
                raise ValueError(
                    f"mode entry {i}: duplicate mode m={key[0]}, n={key[1]} "
                    f"with inconsistent coefficient")
            continue
        seen[key] = c
    if dim is None:
        raise ValueError("potential descriptor is empty and no dimension given")
    completed = dict(seen)
    for key, c in seen.items():
        partner = _neg(key)
        if partner in seen:
            if abs(seen[partner] - c.conjugate()) > 1e-12 * max(1.0, abs(c)):
                raise ValueError(
                    f"modes m={key[0]}, n={key[1]} and its mirror are not "
                    f"conjugate; field would not be real")
        else:
            completed[partner] = c.conjugate()
    return TrigField(dim, [(key, c) for key, c in completed.items()])


def descriptor_from_field(W: TrigField) -> list[dict]:
    """Inverse of field_from_descriptor (all modes listed explicitly)."""
    return [{"m": list(m), "n": n, "re": c.real, "im": c.imag}
            for m, n, c in W.modes]
