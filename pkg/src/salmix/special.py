r"""
Log-scale modified Bessel function of the third kind and GIG moments.

The generalized inverse Gaussian density with parameters ``(a, b, nu)`` is

.. math::
    q(x) = \frac{(a/b)^{\nu/2} x^{\nu-1}}{2 K_\nu(\sqrt{ab})}
           \exp\left(-\frac{a x + b/x}{2}\right), \qquad x > 0.

Everything here works with :math:`\log K_\nu` so that moment ratios stay
finite when :math:`\sqrt{ab}` is very large or very small.
"""

from typing import NamedTuple

import numpy as np
from scipy.special import kve

from .exceptions import BesselRangeError, DomainError

# kve returns nan for subnormal orders; K is even in nu, so below this K_nu = K_0 to double precision
TINY_ORDER = 1e-150

class GigParams(NamedTuple):
    """Parameters of a GIG law: ``a`` multiplies x, ``b`` multiplies 1/x."""

    a: float
    b: float
    nu: float


def _log_kv_recurrence(nu, x):
    # Upward recurrence K_{m+1} = K_{m-1} + (2m/x) K_m, carried as the ratio
    # r_m = K_{m+1}/K_m, which is the dominant (stable) direction.
    n_steps = int(np.floor(nu))
    nu0 = nu - n_steps
    log_k0 = np.log(kve(nu0, x)) - x
    ratio = kve(nu0 + 1.0, x) / kve(nu0, x)
    log_k = log_k0.copy()
    for j in range(n_steps):
        log_k = log_k + np.log(ratio)
        ratio = 1.0 / ratio + 2.0 * (nu0 + j + 1.0) / x
    return log_k


def log_bessel_k(nu, x):
    """
    Natural log of the modified Bessel function K_nu(x).

    Uses the exponentially scaled ``scipy.special.kve`` where it is finite and
    falls back to upward recurrence in the order from the fractional part of
    ``nu`` where K_nu overflows double precision (large ``|nu|``, small ``x``).

    Parameters
    ----------
    nu : float
        Order. ``K_{-nu} = K_nu`` so only ``|nu|`` matters.
    x : float or ndarray
        Argument, strictly positive and finite.

    Returns
    -------
    float or ndarray
        ``log K_nu(x)``, same shape as ``x``.
    """
    nu = float(nu)
    if not np.isfinite(nu):
        raise DomainError(f"Bessel order must be finite, got {nu}")
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise DomainError("Bessel argument must be finite and > 0")
    nu = abs(nu)
    if nu < TINY_ORDER:
        nu = 0.0
    with np.errstate(over="ignore", divide="ignore"):
        scaled = kve(nu, x)
    out = np.log(scaled) - x
    bad = ~np.isfinite(out)
    if np.any(bad):
        out = np.where(bad, 0.0, out)
        out[bad] = _log_kv_recurrence(nu, x[bad])
        if not np.all(np.isfinite(out)):
            raise BesselRangeError(f"log K_{nu} not representable for some arguments")
    return float(out) if scalar else out


def _log_kv_half(order, x):
    # closed forms for |nu| = 1/2, 3/2
    base = 0.5 * np.log(np.pi / (2.0 * x)) - x
    return base if order == 0.5 else base + np.log1p(1.0 / x)


def log_bessel_k_orders(orders, x):
    """
    ``log K`` at several orders for the same arguments, evaluating each distinct ``|order|`` once.

    Orders 1/2 and 3/2 use their elementary closed forms.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise DomainError("Bessel argument must be finite and > 0")
    cache = {}
    out = []
    for order in orders:
        key = abs(float(order))
        if key not in cache:
            cache[key] = _log_kv_half(key, x) if key in (0.5, 1.5) else log_bessel_k(key, x)
        out.append(cache[key])
    return out


def gig_expectations(a, b=None, nu=None):
    r"""
    E[X] and E[1/X] for X ~ GIG(a, b, nu).

    Takes either the three parameters or a single :class:`GigParams`.

    ``E[1/X]`` is evaluated as :math:`\sqrt{a/b}\,K_{\nu-1}/K_\nu`, which equals
    :math:`\sqrt{a/b}\,K_{\nu+1}/K_\nu - 2\nu/b` by the Bessel recurrence but
    avoids the cancellation of the second form when ``ab`` is small.

    ``a`` and ``b`` may be arrays (broadcast together); ``nu`` is a scalar.

    Examples
    --------
    >>> gig_expectations(4.0, 1.0, -0.5)
    (0.5, 3.0)
    """
    if b is None and nu is None:
        a, b, nu = a
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(a > 0) and np.all(b > 0) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DomainError("GIG parameters a and b must be finite and > 0")
    u = np.sqrt(a * b)
    if np.any(u == 0.0) or not np.all(np.isfinite(u)):
        raise BesselRangeError("sqrt(ab) is outside the representable range")
    lk, lk_up, lk_down = log_bessel_k_orders((nu, nu + 1.0, nu - 1.0), u)
    e_w = np.sqrt(b / a) * np.exp(lk_up - lk)
    e_inv_w = np.sqrt(a / b) * np.exp(lk_down - lk)
    if e_w.ndim == 0:
        return float(e_w), float(e_inv_w)
    return e_w, e_inv_w


def gig_log_density(x, a, b, nu):
    """Log of the GIG density at ``x > 0``."""
    x = np.asarray(x, dtype=float)
    return (
        0.5 * nu * np.log(a / b)
        + (nu - 1.0) * np.log(x)
        - np.log(2.0)
        - log_bessel_k(nu, np.sqrt(a * b))
        - 0.5 * (a * x + b / x)
    )
