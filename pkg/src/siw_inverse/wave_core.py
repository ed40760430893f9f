"""Surrogate forward solver: geometry to |S11|/|S21| via an ABCD cascade.

Purpose
-------
Replace full-wave simulation with a fast, deterministic circuit model of the
SIW multimode filter. The via-fenced guide is treated as its equivalent
rectangular waveguide (TE10), the five inductive posts as thin shunt
reactances, and the gaps between them as lossless line sections.

Contents
--------
* :func:`effective_width`, :func:`cutoff_frequency`, :func:`propagation` -
  equivalent-waveguide quantities.
* :func:`check_via_rules` - leakage design rules for the via fence.
* :func:`post_reactance` - normalised reactance of one centred post.
* :class:`AbcdMatrix`, :func:`line_section`, :func:`post_section`,
  :func:`abcd_to_s` - two-port algebra in the normalised-impedance convention.
* :func:`end_length`, :func:`cascade_sections`, :func:`simulate` - the filter.
* :func:`find_resonances` - -10 dB reflection dips.

System Role
-----------
Pure functions of their inputs; safe to call concurrently from worker
processes. Every array operation runs over the whole frequency grid at once,
and sections are multiplied left to right, so results are bit-reproducible.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import reduce
from typing import TYPE_CHECKING

import numpy as np
import numpy.typing as npt

from .errors import BelowCutoffError, GeometryInfeasibleError, InvalidSubstrateError, NumericDegeneracyError
from .models import FloatArray, FrequencyGrid, Geometry, Spectrum, SubstrateSpec

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]

#: Speed of light in vacuum, m/s.
SPEED_OF_LIGHT = 2.998e8

#: Identifier of the surrogate model written into dataset manifests.
SOLVER_VERSION = "abcd-post-cascade/1"

#: |S11| below this (-10 dB) marks a resonance.
RESONANCE_THRESHOLD = 0.316

#: Smallest allowed normalised post reactance.
MIN_POST_REACTANCE = 0.01

#: Smallest allowed end-section length in mm.
MIN_END_LENGTH_MM = 0.1

_DEGENERACY_FLOOR = 1e-12


# ============================================================================
# Equivalent waveguide
# ============================================================================


def effective_width(spec: SubstrateSpec) -> float:
    """Return the equivalent rectangular-waveguide width ``W - d^2 / (0.95 p)`` in mm.

    Raises
    ------
    InvalidSubstrateError
        When the result is not positive or does not exceed the via diameter.

    Examples
    --------
    >>> round(effective_width(SubstrateSpec()), 4)
    14.4818
    >>> round(effective_width(SubstrateSpec(total_width_mm=10, via_diameter_mm=1.0, via_pitch_mm=1.0)), 4)
    8.9474
    """
    d = spec.via_diameter_mm
    w_eff = spec.total_width_mm - d * d / (0.95 * spec.via_pitch_mm)
    if w_eff <= 0 or w_eff <= d:
        raise InvalidSubstrateError(f"effective width {w_eff:.6g} mm must be positive and exceed the via diameter {d} mm")
    return w_eff


def cutoff_frequency(spec: SubstrateSpec) -> float:
    """Return the TE10 cutoff of the equivalent waveguide in GHz.

    Examples
    --------
    >>> round(cutoff_frequency(SubstrateSpec()), 2)
    6.98
    """
    w_eff_m = effective_width(spec) / 1000.0
    return SPEED_OF_LIGHT / (2.0 * w_eff_m * math.sqrt(spec.relative_permittivity)) / 1e9


def _require_above_cutoff(spec: SubstrateSpec, frequencies_ghz: FloatArray) -> float:
    cutoff = cutoff_frequency(spec)
    below = frequencies_ghz <= cutoff
    if np.any(below):
        raise BelowCutoffError(float(frequencies_ghz[below].min()), cutoff)
    return cutoff


def propagation_constants(spec: SubstrateSpec, frequencies_ghz: FloatArray) -> tuple[FloatArray, FloatArray]:
    """Vectorised :func:`propagation`: β in rad/m and λg in mm for every frequency."""
    f = np.asarray(frequencies_ghz, dtype=np.float64)
    _require_above_cutoff(spec, f)
    k = 2.0 * math.pi * f * 1e9 * math.sqrt(spec.relative_permittivity) / SPEED_OF_LIGHT
    k_c = math.pi / (effective_width(spec) / 1000.0)
    beta = np.sqrt(k * k - k_c * k_c)
    return beta, 2.0 * math.pi / beta * 1000.0


def propagation(spec: SubstrateSpec, f_ghz: float) -> tuple[float, float]:
    """Return ``(beta, lambda_g)`` in rad/m and mm at one frequency.

    Raises
    ------
    BelowCutoffError
        When ``f_ghz`` does not exceed the cutoff.

    Examples
    --------
    >>> beta, lambda_g = propagation(SubstrateSpec(), 12.0)
    >>> round(beta, 1), round(lambda_g, 1)
    (303.5, 20.7)
    """
    beta, lambda_g = propagation_constants(spec, np.asarray([f_ghz], dtype=np.float64))
    return float(beta[0]), float(lambda_g[0])


@dataclass(frozen=True)
class ViaRuleReport:
    """Outcome of the via-fence leakage rules.

    Attributes
    ----------
    diameter_margin_mm:
        ``p - d``; positive when ``d < p`` holds.
    pitch_margin_mm:
        ``lambda_g / 4 - p`` at the top of the band; positive when ``p < lambda_g / 4`` holds.
    lambda_g_mm:
        Guided wavelength at ``f_stop``.
    violations:
        Human-readable names of the violated rules.
    """

    diameter_margin_mm: float
    pitch_margin_mm: float
    lambda_g_mm: float
    violations: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.passed


def check_via_rules(spec: SubstrateSpec, grid: FrequencyGrid) -> ViaRuleReport:
    """Check ``d < p`` and ``p < lambda_g / 4`` at the shortest guided wavelength of the band.

    Raises
    ------
    BelowCutoffError
        When ``f_stop`` is at or below cutoff.

    Examples
    --------
    >>> report = check_via_rules(SubstrateSpec(), FrequencyGrid())
    >>> report.passed, round(report.lambda_g_mm, 2)
    (True, 10.78)
    """
    _, lambda_g = propagation(spec, grid.f_stop_ghz)
    diameter_margin = spec.via_pitch_mm - spec.via_diameter_mm
    pitch_margin = lambda_g / 4.0 - spec.via_pitch_mm
    violations: list[str] = []
    if not diameter_margin > 0:
        violations.append("d < p")
    if not pitch_margin > 0:
        violations.append("p < lambda_g/4")
    return ViaRuleReport(diameter_margin, pitch_margin, lambda_g, tuple(violations))


def post_reactance(spec: SubstrateSpec, radius_mm: float, f_ghz: float | FloatArray) -> FloatArray:
    """Return the normalised shunt reactance of a centred post.

    ``x = (W_eff / lambda_g) * (ln(W_eff / (pi r)) - 1)``, clamped below at
    :data:`MIN_POST_REACTANCE`. Thicker posts and lower frequencies give a
    smaller reactance.

    Examples
    --------
    >>> round(float(post_reactance(SubstrateSpec(), 0.8, 12.0)[0]), 3)
    0.525
    """
    f = np.atleast_1d(np.asarray(f_ghz, dtype=np.float64))
    _, lambda_g = propagation_constants(spec, f)
    return _reactance(effective_width(spec), lambda_g, radius_mm)


def _reactance(w_eff: float, lambda_g: FloatArray, radius_mm: float) -> FloatArray:
    x = (w_eff / lambda_g) * (math.log(w_eff / (math.pi * radius_mm)) - 1.0)
    return np.maximum(x, MIN_POST_REACTANCE)


# ============================================================================
# Two-port algebra
# ============================================================================


@dataclass(frozen=True, eq=False)
class AbcdMatrix:
    """ABCD parameters of a two-port, one entry per frequency point.

    Reference impedance is 1 at every frequency.
    """

    a: ComplexArray
    b: ComplexArray
    c: ComplexArray
    d: ComplexArray

    @classmethod
    def of(cls, a: complex | npt.ArrayLike, b: complex | npt.ArrayLike, c: complex | npt.ArrayLike, d: complex | npt.ArrayLike) -> AbcdMatrix:
        """Build a matrix from scalars or arrays, broadcasting to a common shape."""
        arrays = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=np.complex128)) for v in (a, b, c, d)))
        return cls(*(np.array(v) for v in arrays))

    @classmethod
    def identity(cls, n: int = 1) -> AbcdMatrix:
        ones = np.ones(n, dtype=np.complex128)
        zeros = np.zeros(n, dtype=np.complex128)
        return cls(ones, zeros.copy(), zeros.copy(), ones.copy())

    def __matmul__(self, other: AbcdMatrix) -> AbcdMatrix:
        return AbcdMatrix(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def determinant(self) -> ComplexArray:
        return self.a * self.d - self.b * self.c


def line_section(beta: FloatArray, length_mm: float) -> AbcdMatrix:
    """Lossless matched line of electrical length ``beta * L``."""
    theta = beta * (length_mm / 1000.0)
    cos = np.cos(theta).astype(np.complex128)
    jsin = 1j * np.sin(theta)
    return AbcdMatrix(cos, jsin, jsin.copy(), cos.copy())


def post_section(reactance: FloatArray) -> AbcdMatrix:
    """Shunt element of normalised reactance ``x``: ``C = 1 / (j x)``."""
    ones = np.ones(reactance.shape, dtype=np.complex128)
    zeros = np.zeros(reactance.shape, dtype=np.complex128)
    return AbcdMatrix(ones, zeros, 1.0 / (1j * reactance), ones.copy())


def abcd_to_s(m: AbcdMatrix) -> tuple[ComplexArray, ComplexArray]:
    """Convert normalised ABCD parameters to ``(S11, S21)``.

    Raises
    ------
    NumericDegeneracyError
        When ``a + b + c + d`` vanishes at any frequency.

    Examples
    --------
    >>> s11, s21 = abcd_to_s(AbcdMatrix.of(1, 0, 1 / 0.5j, 1))
    >>> round(float(abs(s11[0])), 4)
    0.7071
    """
    denominator = m.a + m.b + m.c + m.d
    if np.any(np.abs(denominator) < _DEGENERACY_FLOOR):
        raise NumericDegeneracyError("a + b + c + d vanishes; S-parameters are undefined")
    return (m.a + m.b - m.c - m.d) / denominator, 2.0 / denominator


# ============================================================================
# Filter cascade
# ============================================================================


def end_length(spec: SubstrateSpec, geometry: Geometry) -> float:
    """Return the length of each end section in mm.

    The active length ``G p + d`` minus the post footprint is split equally
    between both ends and clamped below at :data:`MIN_END_LENGTH_MM`.

    Raises
    ------
    GeometryInfeasibleError
        When the footprint is longer than the active length.

    Examples
    --------
    >>> from siw_inverse.models import REFERENCE_GEOMETRY
    >>> round(end_length(SubstrateSpec(), REFERENCE_GEOMETRY), 6)
    2.0
    """
    g = geometry
    footprint = 2 * g.r1 + 2 * g.r2 * 2 + 2 * g.r3 + 2 * g.d1 + 2 * g.d2
    raw = (g.g * spec.via_pitch_mm + spec.via_diameter_mm - footprint) / 2.0
    if raw < 0:
        raise GeometryInfeasibleError(f"post footprint {footprint:.6g} mm exceeds the active length {g.g * spec.via_pitch_mm + spec.via_diameter_mm:.6g} mm")
    return max(raw, MIN_END_LENGTH_MM)


def cascade_sections(
    spec: SubstrateSpec,
    geometry: Geometry,
    grid: FrequencyGrid,
    *,
    end_length_mm: float | None = None,
) -> list[AbcdMatrix]:
    """Return the eleven sections of the palindromic cascade in port-1-to-port-2 order.

    ``end_length_mm`` pins the end sections instead of deriving them from G.
    """
    beta, lambda_g = propagation_constants(spec, grid.frequencies())
    w_eff = effective_width(spec)
    ends = end_length(spec, geometry) if end_length_mm is None else end_length_mm
    g = geometry

    def post(radius: float) -> AbcdMatrix:
        return post_section(_reactance(w_eff, lambda_g, radius))

    return [
        line_section(beta, ends),
        post(g.r1),
        line_section(beta, g.d1),
        post(g.r2),
        line_section(beta, g.d2),
        post(g.r3),
        line_section(beta, g.d2),
        post(g.r2),
        line_section(beta, g.d1),
        post(g.r1),
        line_section(beta, ends),
    ]


def chain(sections: Sequence[AbcdMatrix]) -> AbcdMatrix:
    """Multiply sections left to right."""
    return reduce(lambda left, right: left @ right, sections)


def simulate(
    spec: SubstrateSpec,
    geometry: Geometry,
    grid: FrequencyGrid,
    *,
    end_length_mm: float | None = None,
) -> Spectrum:
    """Simulate the filter and return its magnitude spectrum.

    Raises
    ------
    BelowCutoffError
        When any grid frequency is at or below cutoff.
    GeometryInfeasibleError
        When the posts do not fit in the active length.

    Examples
    --------
    >>> from siw_inverse.models import REFERENCE_GEOMETRY
    >>> spectrum = simulate(SubstrateSpec(), REFERENCE_GEOMETRY, FrequencyGrid())
    >>> round(float(spectrum.s11_mag[0]), 6), round(float(spectrum.s21_mag[-1]), 6)
    (0.997503, 0.999038)
    """
    s11, s21 = abcd_to_s(chain(cascade_sections(spec, geometry, grid, end_length_mm=end_length_mm)))
    return Spectrum(s11_mag=np.abs(s11), s21_mag=np.abs(s21), grid=grid)


def find_resonances(spectrum: Spectrum, *, threshold: float = RESONANCE_THRESHOLD) -> list[float]:
    """Return frequencies (GHz) of strict |S11| minima below ``threshold``, ascending.

    A flat-bottomed dip counts once, at its lowest-index point. Band-edge
    points have only one neighbour and never count.

    Examples
    --------
    >>> grid = FrequencyGrid(9.0, 10.0, 11)
    >>> s11 = np.full(11, 0.9)
    >>> s11[4] = 0.1
    >>> find_resonances(Spectrum(s11, np.sqrt(1 - s11**2), grid))
    [9.4]
    """
    values = spectrum.s11_mag
    frequencies = spectrum.grid.frequencies()
    found: list[float] = []
    n = values.shape[0]
    k = 1
    while k < n - 1:
        end = k
        while end + 1 < n and values[end + 1] == values[k]:
            end += 1
        if values[k] < threshold and values[k - 1] > values[k] and end + 1 < n and values[end + 1] > values[k]:
            found.append(round(float(frequencies[k]), 9))
        k = end + 1
    return found


__all__ = [
    "MIN_END_LENGTH_MM",
    "MIN_POST_REACTANCE",
    "RESONANCE_THRESHOLD",
    "SOLVER_VERSION",
    "SPEED_OF_LIGHT",
    "AbcdMatrix",
    "ViaRuleReport",
    "abcd_to_s",
    "cascade_sections",
    "chain",
    "check_via_rules",
    "cutoff_frequency",
    "effective_width",
    "end_length",
    "find_resonances",
    "line_section",
    "post_reactance",
    "post_section",
    "propagation",
    "propagation_constants",
    "simulate",
]
