"""Scalar mathematics of the tone dichotomy function.

The dichotomy function of an intensity ``x`` in ``[0, 1]`` is the absolute
residual between a gamma-corrected value and the identity::

    f(x; gamma) = |x**gamma - x|

It vanishes at both ends of the unit interval, rises to a single maximum at
``d_max`` and falls again, so every output value (except the peak) has exactly
two pre-images: one on the ascending branch ``[0, d_max]`` and one on the
descending branch ``(d_max, 1]``. Scaling by ``k = 1 / f(d_max)`` maps the
output onto ``[0, 1]``.

Everything here works on Python floats in double precision. Vectorised
counterparts used by the image code carry an ``_array`` suffix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import (
    BranchMismatch,
    DegenerateGamma,
    DomainError,
    NoConvergence,
    SingularPoint,
)

PHI = (1.0 + math.sqrt(5.0)) / 2.0


class Branch(enum.Enum):
    """Monotone piece of the dichotomy curve a sample belongs to.

    ``ASCENDING`` covers ``x <= d_max`` (the peak itself included),
    ``DESCENDING`` covers ``x > d_max``.
    """

    ASCENDING = "ascending"
    DESCENDING = "descending"

    @classmethod
    def of(cls, x: float, d_max: float) -> "Branch":
        return cls.ASCENDING if x <= d_max else cls.DESCENDING


@dataclass(frozen=True)
class DichotomyParams:
    """gamma and every quantity derived from it.

    Attributes:
        gamma: exponent of the power law.
        d_max: location of the contrast maximum.
        doc_max: peak value ``|d_max**gamma - d_max|`` (maximum difference of
            contrasts).
        k: normalisation factor ``1 / doc_max``.
        m_plus: secant slope of the ascending branch, ``doc_max / d_max``.
        m_minus: secant slope of the descending branch,
            ``-doc_max / (1 - d_max)``.
        r_plus: area under the curve on ``[0, d_max]``.
        r_minus: area under the curve on ``[d_max, 1]``.
    """

    gamma: float
    d_max: float
    doc_max: float
    k: float
    m_plus: float
    m_minus: float
    r_plus: float
    r_minus: float

    def branch(self, x: float) -> Branch:
        return Branch.of(x, self.d_max)

    def to_dict(self) -> dict[str, float]:
        return {
            "gamma": self.gamma,
            "d_max": self.d_max,
            "doc_max": self.doc_max,
            "k": self.k,
            "m_plus": self.m_plus,
            "m_minus": self.m_minus,
            "r_plus": self.r_plus,
            "r_minus": self.r_minus,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DichotomyParams":
        return cls(**{name: float(data[name]) for name in cls.__dataclass_fields__})


@dataclass(frozen=True)
class GoldenSearchConfig:
    """Stopping rule for :func:`invert_golden`.

    The search stops once the bracket is narrower than ``xtol`` *and* the
    best of its midpoint and two ends reproduces the target to within
    ``epsilon``.
    """

    epsilon: float = 1e-7
    max_iters: int = 200
    xtol: float = 1e-10

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.xtol > 0:
            raise DomainError(f"xtol must be positive, got {self.xtol}")


DEFAULT_GOLDEN = GoldenSearchConfig()


# --------------------------------------------------------------------------
# validation helpers
# --------------------------------------------------------------------------


def _check_unit(x: float, name: str = "x") -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {x!r}")
    return x


def _check_gamma(gamma: float, *, allow_one: bool = True) -> float:
    gamma = float(gamma)
    if not (gamma >= 0.0) or math.isinf(gamma):
        raise DomainError(f"gamma must be a finite non-negative number, got {gamma!r}")
    if not allow_one and gamma == 1.0:
        raise DegenerateGamma("gamma = 1 makes the dichotomy function identically zero")
    return gamma


def check_gamma(gamma: float) -> float:
    """Validate a gamma usable by the dichotomy transform and return it."""
    return _check_gamma(gamma, allow_one=False)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def gamma_correct(x: float, gamma: float) -> float:
    """Plain power-law correction ``x**gamma``, with ``0**0 == 1``."""
    x = _check_unit(x)
    gamma = _check_gamma(gamma)
    return x**gamma


def _signed(x: float, gamma: float) -> float:
    # non-negative on [0, 1] for every gamma
    if gamma <= 1.0:
        return x**gamma - x
    return x - x**gamma


def dichotomy_eval(x: float, gamma: float) -> float:
    """Unnormalised dichotomy value ``|x**gamma - x|``."""
    x = _check_unit(x)
    gamma = _check_gamma(gamma)
    return abs(x**gamma - x)


def dichotomy_array(x: np.ndarray, gamma: float) -> np.ndarray:
    """Vectorised :func:`dichotomy_eval` (no range checks)."""
    x = np.asarray(x, dtype=np.float64)
    return np.abs(np.power(x, gamma) - x)


def compute_d_max(gamma: float) -> float:
    """Location of the maximum of ``|x**gamma - x|`` on ``[0, 1]``.

    Setting the derivative ``gamma * x**(gamma - 1) - 1`` to zero gives
    ``d_max = gamma**(1 / (1 - gamma))``. At ``gamma = 0`` the function is
    ``1 - x`` and the maximum sits at the origin.
    """
    gamma = _check_gamma(gamma, allow_one=False)
    if gamma == 0.0:
        return 0.0
    # log1p keeps precision when gamma is close to 1; plain log near 0
    log_gamma = math.log1p(gamma - 1.0) if gamma > 0.5 else math.log(gamma)
    return math.exp(log_gamma / (1.0 - gamma))


def region_integrals(gamma: float, d: float) -> tuple[float, float]:
    """Areas under the dichotomy curve left and right of ``d``.

    Uses the antiderivative ``x**(gamma+1)/(gamma+1) - x**2/2`` of
    ``x**gamma - x``, with the sign flipped for ``gamma > 1``.

    Returns:
        ``(r_plus, r_minus)``: the integrals over ``[0, d]`` and ``[d, 1]``.
    """
    gamma = _check_gamma(gamma, allow_one=False)
    d = _check_unit(d, "d")
    g1 = gamma + 1.0

    def primitive(x: float) -> float:
        return x**g1 / g1 - 0.5 * x * x

    sign = 1.0 if gamma < 1.0 else -1.0
    r_plus = sign * primitive(d)
    r_minus = sign * (primitive(1.0) - primitive(d))
    return r_plus, r_minus


def compute_params(gamma: float, d_max: float | None = None) -> DichotomyParams:
    """Derive :class:`DichotomyParams` for ``gamma``.

    Args:
        gamma: exponent, ``>= 0`` and ``!= 1``.
        d_max: optional override of the peak location. Useful to reproduce
            tabulated values that were computed at a rounded ``d_max``; the
            exact closed form is used when omitted.
    """
    gamma = _check_gamma(gamma, allow_one=False)
    d = compute_d_max(gamma) if d_max is None else _check_unit(d_max, "d_max")
    doc = abs(d**gamma - d)
    if doc == 0.0:
        raise DomainError(f"dichotomy function vanishes at d_max={d} for gamma={gamma}")
    m_plus = doc / d if d > 0.0 else math.inf
    m_minus = -doc / (1.0 - d) if d < 1.0 else -math.inf
    r_plus, r_minus = region_integrals(gamma, d)
    return DichotomyParams(
        gamma=gamma,
        d_max=d,
        doc_max=doc,
        k=1.0 / doc,
        m_plus=m_plus,
        m_minus=m_minus,
        r_plus=r_plus,
        r_minus=r_minus,
    )


def dichotomy_normalized(x: float, params: DichotomyParams) -> float:
    """``k * |x**gamma - x|``, clipped to 1 against rounding at the peak."""
    x = _check_unit(x)
    return min(1.0, params.k * abs(x**params.gamma - x))


def dichotomy_derivative(x: float, gamma: float, order: int = 1) -> float:
    """``order``-th derivative of the signed dichotomy function.

    The signed function is ``x**gamma - x`` for ``gamma <= 1`` and
    ``x - x**gamma`` above, i.e. the piece that equals ``|x**gamma - x|``.
    """
    x = _check_unit(x)
    gamma = _check_gamma(gamma, allow_one=False)
    if int(order) != order or order < 1:
        raise DomainError(f"order must be a positive integer, got {order!r}")
    order = int(order)

    coeff = math.prod(gamma - i for i in range(order))
    if coeff == 0.0:
        power_term = 0.0
    else:
        if x == 0.0 and gamma - order < 0.0:
            raise SingularPoint(f"derivative of order {order} diverges at x=0 for gamma={gamma}")
        power_term = coeff * x ** (gamma - order)
    linear_term = -1.0 if order == 1 else 0.0
    sign = 1.0 if gamma <= 1.0 else -1.0
    return sign * (power_term + linear_term)


def numeric_slope(x: float, gamma: float, delta: float = 1e-8) -> float:
    """Forward finite-difference slope of the signed dichotomy function."""
    gamma = _check_gamma(gamma, allow_one=False)
    if not delta > 0.0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    x = _check_unit(x)
    _check_unit(x + delta, "x + delta")
    return (_signed(x + delta, gamma) - _signed(x, gamma)) / delta


# --------------------------------------------------------------------------
# inversion: golden-section search on a single branch
# --------------------------------------------------------------------------


def _bracket(params: DichotomyParams, branch: Branch) -> tuple[float, float]:
    if branch is Branch.ASCENDING:
        return 0.0, params.d_max
    return params.d_max, 1.0


def invert_golden(
    e: float,
    params: DichotomyParams,
    branch: Branch,
    cfg: GoldenSearchConfig = DEFAULT_GOLDEN,
) -> float:
    """Recover ``x`` on ``branch`` such that ``|x**gamma - x| == e``.

    ``e`` is on the unnormalised scale; divide normalised outputs by
    ``params.k`` first. The search minimises ``| |x**gamma - x| - e |`` over
    the branch bracket, which is unimodal because the curve is monotone
    there.

    Raises:
        BranchMismatch: ``e`` is negative or exceeds the peak value.
        NoConvergence: ``cfg.max_iters`` iterations did not satisfy the
            stopping rule. Happens for targets whose preimage is far below
            ``cfg.xtol`` on a very steep ascending branch (small gamma,
            x around 1e-100), where no point of the final bracket gets the
            residual under ``cfg.epsilon``.
    """
    e = float(e)
    gamma = params.gamma
    if e < 0.0 or e > params.doc_max + cfg.epsilon:
        raise BranchMismatch(f"value {e!r} outside [0, {params.doc_max!r}]")
    if e == 0.0:
        return 0.0 if branch is Branch.ASCENDING else 1.0
    if e >= params.doc_max:
        return params.d_max

    def err(x: float) -> float:
        return abs(abs(x**gamma - x) - e)

    a, b = _bracket(params, branch)
    c = b - (b - a) / PHI
    d = a + (b - a) / PHI
    fc, fd = err(c), err(d)
    for _ in range(cfg.max_iters):
        if b - a <= cfg.xtol:
            # near a root the curve is steep enough that an endpoint can fit better than the midpoint
            best = min((0.5 * (a + b), a, b), key=err)
            if err(best) < cfg.epsilon:
                return best
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - (b - a) / PHI
            fc = err(c)
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) / PHI
            fd = err(d)
    raise NoConvergence(
        f"golden-section search for e={e!r}, gamma={gamma!r} did not converge "
        f"in {cfg.max_iters} iterations"
    )


def invert_golden_array(
    e: np.ndarray,
    params: DichotomyParams,
    ascending: np.ndarray,
    cfg: GoldenSearchConfig = DEFAULT_GOLDEN,
) -> np.ndarray:
    """Vectorised :func:`invert_golden` over many samples at once.

    Args:
        e: unnormalised dichotomy values.
        params: parameters of the forward transform.
        ascending: boolean array, True where the sample came from the
            ascending branch.
    """
    e = np.asarray(e, dtype=np.float64)
    ascending = np.broadcast_to(np.asarray(ascending, dtype=bool), e.shape)
    if e.size and (e.min() < 0.0 or e.max() > params.doc_max + cfg.epsilon):
        raise BranchMismatch(f"values outside [0, {params.doc_max!r}]")
    gamma = params.gamma

    out = np.empty(e.shape, dtype=np.float64)
    out[(e == 0.0) & ascending] = 0.0
    out[(e == 0.0) & ~ascending] = 1.0
    at_peak = e >= params.doc_max
    out[at_peak] = params.d_max

    todo = np.flatnonzero((e > 0.0) & ~at_peak)
    if todo.size == 0:
        return out
    target = e.ravel()[todo]
    asc = ascending.ravel()[todo]

    def err(x: np.ndarray, tgt: np.ndarray) -> np.ndarray:
        return np.abs(np.abs(np.power(x, gamma) - x) - tgt)

    a = np.where(asc, 0.0, params.d_max)
    b = np.where(asc, params.d_max, 1.0)
    c = b - (b - a) / PHI
    d = a + (b - a) / PHI
    fc, fd = err(c, target), err(d, target)
    result = np.full(target.shape, np.nan)
    active = np.arange(target.size)

    for _ in range(cfg.max_iters):
        mid = 0.5 * (a + b)
        e_mid, e_a, e_b = err(mid, target), err(a, target), err(b, target)
        mid = np.where(e_a < e_mid, a, mid)
        e_mid = np.minimum(e_mid, e_a)
        mid = np.where(e_b < e_mid, b, mid)
        e_mid = np.minimum(e_mid, e_b)
        done = (b - a <= cfg.xtol) & (e_mid < cfg.epsilon)
        if done.any():
            result[active[done]] = mid[done]
            keep = ~done
            active = active[keep]
            a, b, c, d = a[keep], b[keep], c[keep], d[keep]
            fc, fd, target = fc[keep], fd[keep], target[keep]
            if active.size == 0:
                break
        left = fc < fd
        # left: b <- d, d <- c; right: a <- c, c <- d
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = np.where(left, b - (b - a) / PHI, d)
        new_d = np.where(left, c, a + (b - a) / PHI)
        new_fc = np.where(left, np.nan, fd)
        new_fd = np.where(left, fc, np.nan)
        c, d = new_c, new_d
        new_fc[left] = err(c[left], target[left])
        new_fd[~left] = err(d[~left], target[~left])
        fc, fd = new_fc, new_fd
    else:
        if active.size:
            raise NoConvergence(
                f"golden-section search did not converge for {active.size} samples "
                f"in {cfg.max_iters} iterations"
            )

    flat = out.reshape(-1)
    flat[todo] = result
    return out


# --------------------------------------------------------------------------
# inversion: look-up tables for integer levels
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DichotomyLut:
    """Forward table of normalised outputs for every integer level.

    ``entries[l] = k * |(l/bit_max)**gamma - l/bit_max|``. Levels
    ``0..boundary_index`` are on the ascending branch, the rest descend.
    """

    gamma: float
    bit_max: int
    boundary_index: int
    entries: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DichotomyLut):
            return NotImplemented
        return (
            self.gamma == other.gamma
            and self.bit_max == other.bit_max
            and self.boundary_index == other.boundary_index
            and np.array_equal(self.entries, other.entries)
        )

    __hash__ = None  # type: ignore[assignment]

    def to_dict(self) -> dict[str, Any]:
        return {
            "gamma": self.gamma,
            "bit_max": self.bit_max,
            "boundary_index": self.boundary_index,
            "entries": [float(v) for v in self.entries],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DichotomyLut":
        entries = np.asarray(data["entries"], dtype=np.float64)
        bit_max = int(data["bit_max"])
        if entries.shape != (bit_max + 1,):
            raise DomainError(f"expected {bit_max + 1} LUT entries, got {entries.shape}")
        return cls(
            gamma=float(data["gamma"]),
            bit_max=bit_max,
            boundary_index=int(data["boundary_index"]),
            entries=entries,
        )


def build_lut(gamma: float, bit_max: int = 255) -> DichotomyLut:
    """Tabulate the normalised dichotomy function on ``0..bit_max``."""
    params = compute_params(gamma)
    if int(bit_max) != bit_max or bit_max < 1:
        raise DomainError(f"bit_max must be a positive integer, got {bit_max!r}")
    bit_max = int(bit_max)
    levels = np.arange(bit_max + 1, dtype=np.float64) / bit_max
    entries = np.minimum(params.k * dichotomy_array(levels, params.gamma), 1.0)
    # last level whose sample l/bit_max is <= d_max, computed with the same
    # float comparison the slope classifier uses
    boundary = int(np.count_nonzero(levels <= params.d_max)) - 1
    entries.setflags(write=False)
    return DichotomyLut(params.gamma, bit_max, boundary, entries)


def _segment(lut: DichotomyLut, ascending: bool) -> tuple[np.ndarray, np.ndarray]:
    """Branch indices and entries, ordered by increasing entry value."""
    if ascending:
        idx = np.arange(0, lut.boundary_index + 1)
    else:
        idx = np.arange(lut.bit_max, lut.boundary_index, -1)
    return idx, lut.entries[idx]


def _nearest(values: np.ndarray, idx: np.ndarray, seg: np.ndarray) -> np.ndarray:
    if idx.size == 0:
        raise BranchMismatch("requested branch holds no integer levels")
    pos = np.searchsorted(seg, values)
    left = np.clip(pos - 1, 0, seg.size - 1)
    right = np.clip(pos, 0, seg.size - 1)
    dl = np.abs(values - seg[left])
    dr = np.abs(seg[right] - values)
    il, ir = idx[left], idx[right]
    take_right = (dr < dl) | ((dr == dl) & (ir < il))
    return np.where(take_right, ir, il)


def invert_lut(value: float, lut: DichotomyLut, branch: Branch) -> int:
    """Integer level on ``branch`` whose table entry is nearest ``value``.

    Ties go to the lower level.
    """
    value = _check_unit(value, "value")
    idx, seg = _segment(lut, branch is Branch.ASCENDING)
    return int(_nearest(np.asarray([value]), idx, seg)[0])


def invert_lut_array(values: np.ndarray, lut: DichotomyLut, ascending: np.ndarray) -> np.ndarray:
    """Vectorised :func:`invert_lut`; returns integer levels."""
    values = np.asarray(values, dtype=np.float64)
    ascending = np.broadcast_to(np.asarray(ascending, dtype=bool), values.shape)
    out = np.empty(values.shape, dtype=np.int64)
    for flag in (True, False):
        sel = ascending == flag
        if sel.any():
            idx, seg = _segment(lut, flag)
            out[sel] = _nearest(values[sel], idx, seg)
    return out
