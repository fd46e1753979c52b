"""Heat-type kernels for the mixed local/nonlocal generator.

The three families are the Gaussian kernel of exp(t Lap), the isotropic
stable kernel of exp(-t (-Lap)^(alpha/2)), and their convolution, the
kernel of the full mixed flow. All grid kernels are built in frequency
space by applying the matching semigroup multiplier to a discrete delta,
which pins the discrete mass to one at the zero mode and, by Poisson
summation, makes the grid kernel the periodization of the exact one.

Quadrature inversions of the Fourier formulas are kept as cross-check
oracles only; they never feed the simulation path.
"""

import logging
import math

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError, NumericalFailureError
from .grid import (Field, GridSpec, apply_symbol, delta_field, integral,
                   make_symbol)

log = logging.getLogger(__name__)

# Kernels are exact-mass by construction; a deviation this large means
# the transform itself broke.
_MASS_FAILURE = 1e-4
_RIPPLE_REPORT = 1e-10


def _check_kernel(k: Field, label: str) -> Field:
    mass = integral(k)
    if abs(mass - 1.0) > _MASS_FAILURE:
        raise NumericalFailureError(f"{label}: kernel mass {mass} deviates from 1")
    vmax = float(k.values.max())
    vmin = float(k.values.min())
    if vmin < -_RIPPLE_REPORT * vmax:
        log.warning("%s: negative ripple %.3e relative to peak %.3e", label, vmin, vmax)
    return k


def gaussian_kernel(grid: GridSpec, t: float) -> Field:
    """Pointwise Gaussian kernel (4 pi t)^(-N/2) exp(-|x|^2 / 4t)."""
    if not t > 0:
        raise ConfigurationError(f"gaussian_kernel needs t > 0, got {t}")
    coords = grid.coords()
    r2 = sum(c ** 2 for c in coords)
    v = (4.0 * np.pi * t) ** (-grid.dim / 2.0) * np.exp(-r2 / (4.0 * t))
    return Field(grid=grid, values=v)


def stable_kernel(grid: GridSpec, alpha: float, t: float) -> Field:
    """Stable kernel: semigroup multiplier exp(-t |xi|^alpha) on a delta."""
    if not t > 0:
        raise ConfigurationError(f"stable_kernel needs t > 0, got {t}")
    sym = make_symbol(grid, alpha, kind="fractional")
    k = apply_symbol(delta_field(grid), sym, scale=t, mode="semigroup")
    return _check_kernel(k, f"stable_kernel(alpha={alpha}, t={t})")


def mixed_kernel(grid: GridSpec, alpha: float, t: float) -> Field:
    """Kernel of the mixed flow: exp(-t (|xi|^2 + |xi|^alpha)) on a delta."""
    if not t > 0:
        raise ConfigurationError(f"mixed_kernel needs t > 0, got {t}")
    sym = make_symbol(grid, alpha, kind="mixed")
    k = apply_symbol(delta_field(grid), sym, scale=t, mode="semigroup")
    return _check_kernel(k, f"mixed_kernel(alpha={alpha}, t={t})")


def kernel_lq_norm(f: Field, q: float) -> float:
    """Discrete L^q norm with cell-volume weighting; q = inf gives max |f|."""
    v = np.abs(f.values)
    if q == np.inf:
        return float(v.max())
    if not q >= 1:
        raise ConfigurationError(f"q must be >= 1 or inf, got {q}")
    return float((np.sum(v ** q) * f.grid.cell_volume) ** (1.0 / q))


def taylor_contraction_error(g: Field, t_list, alpha: float):
    """L^1 distance between E(t) * g and (mass of g) E(t) for each t.

    Returns (errors, x_moment) where x_moment = || |x| g ||_L1 is the
    first-moment factor appearing in the contraction bound
    C min(t^(-1/2), t^(-1/alpha)) * x_moment.
    """
    grid = g.grid
    sym = make_symbol(grid, alpha, kind="mixed")
    mass = integral(g)
    coords = grid.coords()
    radius = np.sqrt(sum(c ** 2 for c in coords))
    x_moment = float(np.sum(radius * np.abs(g.values)) * grid.cell_volume)
    errors = []
    for t in np.atleast_1d(np.asarray(t_list, dtype=float)):
        smoothed = apply_symbol(g, sym, scale=t, mode="semigroup")
        kern = apply_symbol(delta_field(grid), sym, scale=t, mode="semigroup")
        diff = smoothed.values - mass * kern.values
        errors.append(float(np.sum(np.abs(diff)) * grid.cell_volume))
    return np.array(errors), x_moment


def stable_tail_constant(alpha: float, dim: int) -> float:
    """Far-field constant A in P_alpha(x, t) ~ A t |x|^(-N-alpha)."""
    if not 0 < alpha < 2:
        raise ConfigurationError(f"alpha must be in (0, 2), got {alpha}")
    return (alpha * 2.0 ** (alpha - 1.0) * np.pi ** (-(dim / 2.0 + 1.0))
            * math.sin(math.pi * alpha / 2.0)
            * math.gamma((dim + alpha) / 2.0) * math.gamma(alpha / 2.0))


def stable_tail_mass(alpha: float, t: float, half_width: float, dim: int) -> float:
    """Asymptotic stable-kernel mass outside the box [-L, L)^N."""
    a = stable_tail_constant(alpha, dim)
    surface = 2.0 if dim == 1 else 2.0 * np.pi
    return surface * a * t * half_width ** (-alpha) / alpha


def half_width_for_tail(alpha: float, t: float, dim: int,
                        tail_mass: float = 1e-8) -> float:
    """Box half-width so the exact stable tail mass stays below target.

    For small alpha and large t this grows like (t / tail_mass)^(1/alpha)
    and can be impractically large; callers sizing sup-norm experiments
    should bound the wrapped peak contamination instead.
    """
    a = stable_tail_constant(alpha, dim)
    surface = 2.0 if dim == 1 else 2.0 * np.pi
    return (surface * a * t / (alpha * tail_mass)) ** (1.0 / alpha)


def _cosine_transform(symbol_exponent, x: float, t: float) -> float:
    """(1/pi) int_0^inf exp(-t * symbol(xi)) cos(x xi) dxi for 1D oracles."""
    f = lambda xi: np.exp(-t * symbol_exponent(xi))
    if abs(x) < 1e-12:
        val, err = quad(f, 0.0, np.inf, limit=400)
    else:
        # QAWF Fourier integration; absolute accuracy only.
        val, err = quad(f, 0.0, np.inf, weight="cos", wvar=abs(x), limit=400)
    if not np.isfinite(val):
        raise NumericalFailureError("kernel quadrature oracle diverged")
    return val / np.pi


def stable_kernel_quadrature(x: float, alpha: float, t: float) -> float:
    """1D stable kernel by direct Fourier-cosine quadrature (oracle)."""
    return _cosine_transform(lambda xi: xi ** alpha, x, t)


def mixed_kernel_quadrature(x: float, alpha: float, t: float) -> float:
    """1D mixed kernel by direct Fourier-cosine quadrature (oracle)."""
    return _cosine_transform(lambda xi: xi ** 2 + xi ** alpha, x, t)
