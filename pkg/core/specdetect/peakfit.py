"""Separable window x line-shape fits of individual peak candidates.

Around every candidate a rectangular patch of the matrix is cut out and the
rank-one surface

    F(t, f) = mag * G(t; o, d, alpha, beta) * L(f; c, sigma2, nu)

is fitted to it, with G the unit-height elution window and L the unit-area
pseudo-Voigt line. The line amplitude and the window magnitude only enter as
a product, so both are folded into ``mag`` and ``a_hat`` is reported as 1.

The optimiser works on unconstrained parameters

    theta = [log mag, log sigma2, c, logit nu, o, log d, log alpha, log beta]

with a damped Gauss-Newton (Levenberg-Marquardt) iteration and an analytic
Jacobian.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from specdetect.exceptions import DataError
from specdetect.model.lineshapes import gaussian_density, lorentzian_density
from specdetect.model.types import LN2, MeasurementMatrix, PeakCandidate, PeakFit
from specdetect.runtime import parallel_map
from specdetect.schemas import PipelineConfig

logger = logging.getLogger(__name__)

N_PARAMS = 8
MAX_ITER = 500
REL_TOL = 1e-8

_LAMBDA_INIT = 1e-3
_LAMBDA_MAX = 1e12
_LOG_FLOOR = 1e-9
# Log-coordinates are clipped here before exponentiating.
_LOG_CEIL = 700.0


@dataclass(frozen=True, eq=False)
class Patch:
    """Sub-matrix around a candidate plus the offsets mapping it back to Y."""
    values: np.ndarray
    t0: int
    f0: int
    t_axis: np.ndarray
    f_axis: np.ndarray

    @property
    def energy(self) -> float:
        return float(np.sum(self.values ** 2))

    def local(self, cand: PeakCandidate) -> tuple[int, int]:
        return cand.t_index - self.t0, cand.f_index - self.f0


def extract_patch(y: MeasurementMatrix, cand: PeakCandidate, half_f: int = 15, pad_t: int = 10) -> Patch:
    """Cuts [t_start - pad_t, t_stop + pad_t] x [f - half_f, f + half_f], clipped to Y.

    Raises:
        DataError: If the clipped region is empty.
    """
    n, m = y.shape
    t_lo, t_hi = max(cand.t_start - pad_t, 0), min(cand.t_stop + pad_t, n - 1)
    f_lo, f_hi = max(cand.f_index - half_f, 0), min(cand.f_index + half_f, m - 1)
    if t_lo > t_hi or f_lo > f_hi:
        raise DataError(f"empty patch for candidate at ({cand.t_index}, {cand.f_index})")
    return Patch(
        values=y.values[t_lo:t_hi + 1, f_lo:f_hi + 1].copy(),
        t0=t_lo,
        f0=f_lo,
        t_axis=y.grid_t.axis[t_lo:t_hi + 1],
        f_axis=y.grid_f.axis[f_lo:f_hi + 1],
    )


# ------------------------------------------------------------------ model

def _window_terms(t: np.ndarray, o: float, d: float, a: float, b: float) -> tuple[np.ndarray, ...]:
    """G(t) and its partial derivatives w.r.t. o, d, alpha, beta."""
    rise_end = o + a
    plateau_end = rise_end + d
    end = plateau_end + b
    in_rise = (t > o) & (t <= rise_end)
    in_plateau = (t > rise_end) & (t <= plateau_end)
    in_fall = (t > plateau_end) & (t <= end)

    safe_a = a if a > 0 else 1.0
    safe_b = b if b > 0 else 1.0
    tau = t - o
    u = b - (t - plateau_end)
    sin_r = np.sin(math.pi * tau / safe_a)
    sin_f = np.sin(math.pi * u / safe_b)

    zero = np.zeros_like(t)
    g = np.select(
        [in_rise, in_plateau, in_fall],
        [0.5 * (1.0 - np.cos(math.pi * tau / safe_a)), np.ones_like(t), 0.5 * (1.0 - np.cos(math.pi * u / safe_b))],
        default=0.0,
    )
    dg_dtau = 0.5 * math.pi / safe_a * sin_r
    dg_du = 0.5 * math.pi / safe_b * sin_f
    dg_do = np.select([in_rise, in_fall], [-dg_dtau, dg_du], default=0.0)
    dg_dd = np.where(in_fall, dg_du, zero)
    dg_da = np.select([in_rise, in_fall], [-0.5 * sin_r * math.pi * tau / safe_a ** 2, dg_du], default=0.0)
    dg_db = np.where(in_fall, dg_du * (1.0 - u / safe_b), zero)
    return g, dg_do, dg_dd, dg_da, dg_db


def _line_terms(f: np.ndarray, c: float, s: float, nu: float) -> tuple[np.ndarray, ...]:
    """L(f) and its partial derivatives w.r.t. c, sigma2 and nu."""
    gam = math.sqrt(2.0 * LN2 * s)
    u = f - c
    g = gaussian_density(f, c, s)
    lor = lorentzian_density(f, c, gam)
    den = u * u + gam * gam
    dg_dc = g * u / s
    dg_ds = g * (u * u / (2.0 * s * s) - 1.0 / (2.0 * s))
    dl_dc = 2.0 * gam * u / (math.pi * den * den)
    dl_dgam = (u * u - gam * gam) / (math.pi * den * den)
    dl_ds = dl_dgam * LN2 / gam
    line = nu * g + (1.0 - nu) * lor
    return line, nu * dg_dc + (1.0 - nu) * dl_dc, nu * dg_ds + (1.0 - nu) * dl_ds, g - lor


def _exp(x: float) -> float:
    return math.exp(min(float(x), _LOG_CEIL))


def _unpack(theta: np.ndarray) -> tuple[float, ...]:
    mag = _exp(theta[0])
    s = _exp(theta[1])
    c = float(theta[2])
    nu = float(expit(theta[3]))
    o = float(theta[4])
    d, a, b = (_exp(x) for x in theta[5:8])
    return mag, s, c, nu, o, d, a, b


def separable_model(theta: np.ndarray, t_axis: np.ndarray, f_axis: np.ndarray) -> np.ndarray:
    """mag * outer(G(t), L(f)) for the unconstrained parameter vector ``theta``."""
    mag, s, c, nu, o, d, a, b = _unpack(np.asarray(theta, dtype=float))
    g = _window_terms(np.asarray(t_axis, dtype=float), o, d, a, b)[0]
    line = _line_terms(np.asarray(f_axis, dtype=float), c, s, nu)[0]
    return mag * np.outer(g, line)


def separable_jacobian(theta: np.ndarray, t_axis: np.ndarray, f_axis: np.ndarray) -> np.ndarray:
    """d model / d theta, shape (len(t_axis) * len(f_axis), 8), row-major like ``ravel``."""
    mag, s, c, nu, o, d, a, b = _unpack(np.asarray(theta, dtype=float))
    g, dg_do, dg_dd, dg_da, dg_db = _window_terms(np.asarray(t_axis, dtype=float), o, d, a, b)
    line, dl_dc, dl_ds, dl_dnu = _line_terms(np.asarray(f_axis, dtype=float), c, s, nu)
    cols = [
        mag * np.outer(g, line),
        mag * np.outer(g, s * dl_ds),
        mag * np.outer(g, dl_dc),
        mag * np.outer(g, nu * (1.0 - nu) * dl_dnu),
        mag * np.outer(dg_do, line),
        mag * np.outer(d * dg_dd, line),
        mag * np.outer(a * dg_da, line),
        mag * np.outer(b * dg_db, line),
    ]
    return np.column_stack([col.ravel() for col in cols])


# -------------------------------------------------------------- initialise

def _half_max_width(profile: np.ndarray, peak: int) -> float:
    """Full width at half maximum (in bins) by linear interpolation of the crossings."""
    half = 0.5 * profile[peak]
    left = peak
    while left > 0 and profile[left - 1] >= half:
        left -= 1
    right = peak
    while right < profile.size - 1 and profile[right + 1] >= half:
        right += 1
    lo = float(left)
    if left > 0 and profile[left] != profile[left - 1]:
        lo = left - (profile[left] - half) / (profile[left] - profile[left - 1])
    hi = float(right)
    if right < profile.size - 1 and profile[right] != profile[right + 1]:
        hi = right + (profile[right] - half) / (profile[right] - profile[right + 1])
    return max(hi - lo, 1.0)


def initial_theta(patch: Patch, cand: PeakCandidate) -> np.ndarray:
    """Starting point from the candidate and the patch profiles."""
    values = np.clip(patch.values, 0.0, None)
    nt, nf = values.shape
    jt, jf = patch.local(cand)
    jt = min(max(jt, 0), nt - 1)
    jf = min(max(jf, 0), nf - 1)
    dt = float(patch.t_axis[1] - patch.t_axis[0]) if nt > 1 else 1.0
    df = float(patch.f_axis[1] - patch.f_axis[0]) if nf > 1 else 1.0

    rows = slice(max(cand.t_start - patch.t0, 0), min(cand.t_stop - patch.t0, nt - 1) + 1)
    prof_f = values[rows].sum(axis=0)
    c0 = float(patch.f_axis[jf])
    if prof_f[jf] > 0:
        # FWHM of a pseudo-Voigt with tied widths is 2 * gamma.
        gam0 = 0.5 * _half_max_width(prof_f, jf) * df
    else:
        gam0 = df
    s0 = max(gam0 * gam0 / (2.0 * LN2), 0.25 * df * df)

    cols = slice(max(jf - 1, 0), min(jf + 1, nf - 1) + 1)
    prof_t = values[:, cols].sum(axis=1)
    top = float(prof_t.max())
    if top > 0:
        support = np.flatnonzero(prof_t >= 0.05 * top)
        plateau = np.flatnonzero(prof_t >= 0.95 * top)
        s_lo, s_hi = int(support.min()), int(support.max())
        p_lo, p_hi = int(plateau.min()), int(plateau.max())
    else:
        s_lo, s_hi = rows.start, rows.stop - 1
        p_lo, p_hi = s_lo, s_hi
    t = patch.t_axis
    o0 = float(t[s_lo]) - 0.5 * dt
    a0 = max(float(t[p_lo]) - o0, dt)
    d0 = max(float(t[p_hi] - t[p_lo]), dt)
    b0 = max(float(t[s_hi]) + 0.5 * dt - float(t[p_hi]), dt)

    theta = np.array([0.0, math.log(s0), c0, 0.0, o0, math.log(d0), math.log(a0), math.log(b0)])
    unit = separable_model(theta, patch.t_axis, patch.f_axis)
    denom = float(np.sum(unit * unit))
    mag0 = float(np.sum(unit * patch.values)) / denom if denom > 0 else 0.0
    if not mag0 > 0:
        peak_unit = float(unit.max())
        mag0 = float(patch.values.max()) / peak_unit if peak_unit > 0 and patch.values.max() > 0 else 1.0
    theta[0] = math.log(mag0)
    return theta


# -------------------------------------------------------------------- fit

def _residual(theta: np.ndarray, patch: Patch, target: np.ndarray) -> tuple[np.ndarray | None, float]:
    """Model minus data and its RSS; (None, inf) where the model is not representable."""
    try:
        with np.errstate(all="ignore"):
            resid = separable_model(theta, patch.t_axis, patch.f_axis).ravel() - target
            rss = float(resid @ resid)
    except (ArithmeticError, ValueError):
        return None, math.inf
    if not math.isfinite(rss):
        return None, math.inf
    return resid, rss


def _levenberg_marquardt(
    theta: np.ndarray, patch: Patch, max_iter: int
) -> tuple[np.ndarray, float, bool, int, list[float]]:
    target = patch.values.ravel()
    resid, rss = _residual(theta, patch, target)
    if resid is None:
        return theta, rss, False, 0, [rss]
    trace = [rss]
    lam = _LAMBDA_INIT
    floor = 1e-30 * max(patch.energy, 1e-300)

    for it in range(1, max_iter + 1):
        if rss <= floor:
            return theta, rss, True, it - 1, trace
        with np.errstate(all="ignore"):
            jac = separable_jacobian(theta, patch.t_axis, patch.f_axis)
        if not np.all(np.isfinite(jac)):
            return theta, rss, False, it, trace
        hess = jac.T @ jac
        grad = jac.T @ resid
        diag = np.diag(hess).copy()
        diag = np.maximum(diag, 1e-12 * max(float(diag.max()), 1e-300))

        accepted = False
        singular = True
        while lam <= _LAMBDA_MAX:
            try:
                step = np.linalg.solve(hess + lam * np.diag(diag), -grad)
                singular = False
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = theta + step
            cand_resid, cand_rss = _residual(cand, patch, target)
            if cand_resid is not None and cand_rss < rss:
                accepted = True
                break
            lam *= 10.0

        if not accepted:
            # No damped step lowers the RSS: a stationary point, unless every solve failed.
            return theta, rss, not singular, it, trace

        improvement = (rss - cand_rss) / rss
        theta, resid, rss = cand, cand_resid, cand_rss
        trace.append(rss)
        lam = max(lam / 10.0, 1e-12)
        if improvement < REL_TOL:
            return theta, rss, True, it, trace

    return theta, rss, False, max_iter, trace


def fit_separable_peak(patch: Patch, init: PeakCandidate, max_iter: int = MAX_ITER) -> PeakFit:
    """Fits mag * G(t) * L(f) to ``patch`` starting from ``init``.

    Never raises on numerical trouble: a stalled or singular solve returns the
    best parameters so far with ``converged=False``.

    Raises:
        DataError: If the patch is empty.
    """
    if patch.values.size == 0:
        raise DataError("cannot fit an empty patch")
    energy = patch.energy
    f_c = float(patch.f_axis[min(max(init.f_index - patch.f0, 0), patch.f_axis.size - 1)])

    def empty_fit() -> PeakFit:
        return PeakFit(
            candidate=init, a_hat=1.0, gamma_hat=0.0, c_hat=f_c, nu_hat=0.5,
            o_hat=float(patch.t_axis[0]), d_hat=0.0, alpha_hat=0.0, beta_hat=0.0, mag_hat=0.0,
            rss=energy, converged=False, sigma2_hat=0.0, iterations=0, patch_energy=energy, trace=(energy,),
        )

    if energy == 0.0:
        return empty_fit()

    try:
        theta0 = initial_theta(patch, init)
    except (ArithmeticError, ValueError):
        logger.debug("no starting point for candidate at (%d, %d)", init.t_index, init.f_index)
        return empty_fit()
    try:
        theta, rss, converged, iterations, trace = _levenberg_marquardt(theta0, patch, max_iter)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        logger.debug("fit at (%d, %d) failed: %s", init.t_index, init.f_index, exc)
        resid, rss = _residual(theta0, patch, patch.values.ravel())
        theta, converged, iterations, trace = theta0, False, 0, [rss]
        if resid is None:
            return empty_fit()
    mag, s, c, nu, o, d, a, b = _unpack(theta)

    if not patch.f_axis[0] <= c <= patch.f_axis[-1]:
        logger.debug("fit at (%d, %d) drifted out of its patch (c=%.2f)", init.t_index, init.f_index, c)
        converged = False

    return PeakFit(
        candidate=init,
        a_hat=1.0,
        gamma_hat=math.sqrt(2.0 * LN2 * s),
        c_hat=c,
        nu_hat=nu,
        o_hat=o,
        d_hat=d,
        alpha_hat=a,
        beta_hat=b,
        mag_hat=mag,
        rss=rss,
        converged=converged,
        sigma2_hat=s,
        iterations=iterations,
        patch_energy=energy,
        trace=tuple(trace),
    )


def fit_all(
    y: MeasurementMatrix, candidates: Sequence[PeakCandidate], config: PipelineConfig | None = None
) -> list[PeakFit]:
    """Fits every candidate and keeps the fits that explain their patch.

    A fit is rejected when rss / patch energy exceeds ``config.reject_ratio``.
    Retained fits keep the order of ``candidates``.
    """
    config = config or PipelineConfig()
    if not candidates:
        return []

    def run(cand: PeakCandidate) -> PeakFit:
        return fit_separable_peak(extract_patch(y, cand, config.half_f, config.pad_t), cand, config.max_iter)

    fits = parallel_map(run, list(candidates))
    kept = [f for f in fits if f.patch_energy > 0 and f.rss / f.patch_energy <= config.reject_ratio]
    rejected = len(fits) - len(kept)
    if rejected:
        logger.warning("rejected %d of %d peak fits (rss/energy > %g)", rejected, len(fits), config.reject_ratio)
    failed = sum(not f.converged for f in kept)
    if failed:
        logger.warning("%d retained peak fits did not converge", failed)
    return kept


def logit_nu(nu: float) -> float:
    """Unconstrained coordinate of a mixing fraction, clipped away from 0 and 1."""
    return float(logit(min(max(nu, _LOG_FLOOR), 1.0 - _LOG_FLOOR)))


def theta_from_params(
    mag: float, sigma2: float, center: float, nu: float, origin: float, duration: float, rise: float, fall: float
) -> np.ndarray:
    """Packs physical parameters into the optimiser's coordinates."""
    return np.array([
        math.log(mag),
        math.log(sigma2),
        center,
        logit_nu(nu),
        origin,
        math.log(max(duration, _LOG_FLOOR)),
        math.log(max(rise, _LOG_FLOOR)),
        math.log(max(fall, _LOG_FLOOR)),
    ])
