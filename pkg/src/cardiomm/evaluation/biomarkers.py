"""Relaxometry fits, LGE mass, ventricular phenotypes and wall thickness."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from ..phantom import LABEL_LV, LABEL_MYO, LABEL_RV

INVALID = np.nan
MYO_DENSITY = 1.05  # g/mL


# ---------------------------------------------------------------- T1 / T2
@dataclass
class FitResult:
    value: np.ndarray          # T1 or T2 map (ms), INVALID where the fit failed
    residual: np.ndarray       # RMS residual per pixel
    valid: np.ndarray          # bool
    params: dict = field(default_factory=dict)


def _t1_model(a, b, t1, ti):
    e = np.exp(-ti / t1)
    return np.abs(a - b * e), e


def fit_t1(series: np.ndarray, tis, max_iters: int = 50, tol: float = 1e-10) -> FitResult:
    """Per-pixel Levenberg-Marquardt fit of ``|A - B exp(-TI/T1)|``.

    Parameters
    ----------
    series : ndarray, shape (T, ...)
        Magnitude images at the inversion times ``tis``.
    tis : sequence of float
        At least three inversion times (ms).
    max_iters : int
        Iteration cap; pixels not converged by then are flagged invalid.
    """
    tis = np.asarray(tis, dtype=float)
    s = np.asarray(series, dtype=float)
    if tis.size < 3 or s.shape[0] != tis.size:
        raise ValueError("T1 fitting needs >= 3 inversion times matching the series length")
    shape = s.shape[1:]
    y = s.reshape(tis.size, -1).T                       # (P, T)
    p = y.shape[0]
    a = y.max(axis=1)
    b = 2 * a
    t1 = np.full(p, float(np.median(tis)))
    mu = np.full(p, 1e-3)
    ti = tis[None, :]

    def cost(a, b, t1, rows=slice(None)):
        f, _ = _t1_model(a[:, None], b[:, None], t1[:, None], ti)
        return np.sum((f - y[rows]) ** 2, axis=1)

    c = cost(a, b, t1)
    converged = np.zeros(p, dtype=bool)
    active = a > 0
    for _ in range(max_iters):
        idx = np.flatnonzero(active & ~converged)
        if idx.size == 0:
            break
        A, B, T = a[idx, None], b[idx, None], t1[idx, None]
        e = np.exp(-ti / T)
        raw = A - B * e
        sgn = np.where(raw >= 0, 1.0, -1.0)
        r = sgn * raw - y[idx]
        J = np.stack([sgn, -sgn * e, -sgn * B * e * ti / T ** 2], axis=-1)   # (n, T, 3)
        JtJ = np.einsum("ntk,ntl->nkl", J, J)
        Jtr = np.einsum("ntk,nt->nk", J, r)
        damp = mu[idx, None, None] * (np.eye(3) * np.diagonal(JtJ, axis1=1, axis2=2)[:, None, :]
                                      + 1e-12 * np.eye(3))
        try:
            step = -np.linalg.solve(JtJ + damp, Jtr[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = -np.stack([np.linalg.lstsq(m, v, rcond=None)[0]
                              for m, v in zip(JtJ + damp, Jtr)])
        na, nb, nt = a[idx] + step[:, 0], b[idx] + step[:, 1], t1[idx] + step[:, 2]
        ok = nt > 0
        nc = np.where(ok, cost(na, nb, np.where(ok, nt, 1.0), idx), np.inf)
        better = nc < c[idx]
        rel = np.abs(c[idx] - nc) / np.maximum(c[idx], 1e-300)
        upd = idx[better]
        a[upd], b[upd], t1[upd], c[upd] = na[better], nb[better], nt[better], nc[better]
        mu[idx] = np.where(better, mu[idx] * 0.3, mu[idx] * 10)
        small_step = np.abs(step[:, 2]) <= 1e-9 * np.maximum(t1[idx], 1)
        converged[idx] = (better & (rel < tol)) | (c[idx] <= 1e-24 * np.sum(y[idx] ** 2, axis=1)) \
            | small_step | (mu[idx] > 1e12)
    valid = converged & active
    value = np.where(valid, t1, INVALID)
    resid = np.sqrt(c / tis.size)
    return FitResult(value.reshape(shape), resid.reshape(shape), valid.reshape(shape),
                     {"A": a.reshape(shape), "B": b.reshape(shape)})


def fit_t2(series: np.ndarray, tes) -> FitResult:
    """Log-linear weighted least squares fit of ``PD exp(-TE/T2)``.

    Weights are ``s**2``, which compensates the noise amplification of the log.
    Non-decaying pixels get an infinite T2 and are flagged invalid.
    """
    tes = np.asarray(tes, dtype=float)
    s = np.asarray(series, dtype=float)
    if tes.size < 2 or s.shape[0] != tes.size:
        raise ValueError("T2 fitting needs >= 2 echo times matching the series length")
    shape = s.shape[1:]
    y = s.reshape(tes.size, -1).T
    pos = np.all(y > 0, axis=1)
    logy = np.log(np.where(y > 0, y, 1.0))
    w = y ** 2
    sw = w.sum(1)
    swx = (w * tes).sum(1)
    swxx = (w * tes ** 2).sum(1)
    swy = (w * logy).sum(1)
    swxy = (w * tes * logy).sum(1)
    det = sw * swxx - swx ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = (sw * swxy - swx * swy) / det
        intercept = (swxx * swy - swx * swxy) / det
        t2 = -1.0 / slope
    valid = pos & (det > 0) & (slope < 0) & np.isfinite(t2)
    t2 = np.where(valid, t2, np.inf)
    pd = np.exp(intercept)
    pred = pd[:, None] * np.exp(-tes[None, :] / np.where(valid, t2, np.inf)[:, None])
    resid = np.sqrt(np.mean((np.where(valid[:, None], pred, y) - y) ** 2, axis=1))
    return FitResult(t2.reshape(shape), resid.reshape(shape), valid.reshape(shape),
                     {"PD": pd.reshape(shape)})


# -------------------------------------------------------------------- LGE
def fwhm_lge_mass(lge_image: np.ndarray, myo_mask: np.ndarray) -> float:
    """Percentage of myocardial pixels at or above half the myocardial maximum."""
    img = np.asarray(lge_image, dtype=float)
    mask = np.asarray(myo_mask, dtype=bool)
    if not mask.any():
        raise ValueError("myocardial mask is empty")
    vals = img[mask]
    thr = 0.5 * vals.max()
    return float(100.0 * np.count_nonzero(vals >= thr) / vals.size)


# -------------------------------------------------------------- phenotypes
@dataclass
class PhenotypeReport:
    LVEDV: float
    LVESV: float
    LVSV: float
    LVCO: float
    LVM: float
    LVEF: float
    RVEDV: float
    RVESV: float
    RVSV: float
    RVEF: float
    ed_frame: int
    es_frame: int
    lv_volumes: list = field(default_factory=list)
    rv_volumes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def derived_indices(edv: float, esv: float) -> tuple[float, float]:
    """Stroke volume and ejection fraction (%) from end-diastolic/systolic volumes."""
    sv = edv - esv
    return sv, (100.0 * sv / edv if edv > 0 else INVALID)


def cardiac_output(sv_ml: float, heart_rate: float) -> float:
    """L/min from stroke volume in mL and heart rate in beats/min."""
    return sv_ml * heart_rate / 1000.0


def phenotypes(masks: np.ndarray, spacing, slice_thickness: float,
               heart_rate: float = 60.0) -> PhenotypeReport:
    """Biventricular volumes and function from per-frame label stacks.

    Parameters
    ----------
    masks : ndarray, shape (frames, slices, ny, nx) or (frames, ny, nx)
        Labels with LV, MYO and RV codes.
    spacing : (float, float)
        In-plane pixel spacing (mm).
    slice_thickness : float
        Slice thickness (mm); voxel volume is ``dy * dx * thickness``.
    """
    m = np.asarray(masks)
    if m.ndim == 3:
        m = m[:, None]
    voxel_ml = float(spacing[0]) * float(spacing[1]) * float(slice_thickness) / 1000.0
    lv = np.array([np.count_nonzero(f == LABEL_LV) for f in m]) * voxel_ml
    rv = np.array([np.count_nonzero(f == LABEL_RV) for f in m]) * voxel_ml
    if np.any(lv == 0):
        raise ValueError(f"empty LV mask in frame {int(np.argmin(lv))}")
    ed = int(np.argmax(lv))   # argmax/argmin return the earliest tie
    es = int(np.argmin(lv))
    lvsv, lvef = derived_indices(lv[ed], lv[es])
    rvsv, rvef = derived_indices(rv[ed], rv[es])
    lvm = np.count_nonzero(m[ed] == LABEL_MYO) * voxel_ml * MYO_DENSITY
    return PhenotypeReport(
        LVEDV=float(lv[ed]), LVESV=float(lv[es]), LVSV=float(lvsv),
        LVCO=float(cardiac_output(lvsv, heart_rate)), LVM=float(lvm), LVEF=float(lvef),
        RVEDV=float(rv[ed]), RVESV=float(rv[es]), RVSV=float(rvsv), RVEF=float(rvef),
        ed_frame=ed, es_frame=es, lv_volumes=lv.tolist(), rv_volumes=rv.tolist())


# ------------------------------------------------------------------ LVMWT
SEGMENTS_PER_LEVEL = {"basal": 6, "mid": 6, "apical": 4}
_SEGMENT_OFFSET = {"basal": 0, "mid": 6, "apical": 12}


@dataclass
class WallThickness:
    segments: np.ndarray                 # (16,) mm, nan where not measured
    global_max: float
    flagged: list = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        """16 segment values followed by the global value."""
        return np.append(self.segments, self.global_max)


def _ray_profile(field_img, center, angles, max_r, step):
    r = np.arange(0.0, max_r, step)
    yy = center[0] + np.sin(angles)[:, None] * r[None, :]
    xx = center[1] + np.cos(angles)[:, None] * r[None, :]
    vals = ndimage.map_coordinates(field_img, [yy, xx], order=1, mode="constant", cval=0.0)
    return r, vals


def _crossing(r, vals, level, start):
    """First radius at or after index ``start`` where ``vals`` rises above ``level``
    (or falls below, when ``vals[start] >= level``); linear interpolation."""
    above = vals >= level
    for i in range(start, len(r) - 1):
        if above[i] != above[i + 1]:
            t = (level - vals[i]) / (vals[i + 1] - vals[i])
            return r[i] + t * (r[i + 1] - r[i]), i + 1
    return None, None


def wall_thickness_rays(myo_mask, lv_mask, n_rays: int = 360, step: float = 0.05,
                        smooth: float = 1.0):
    """Per-ray wall thickness (pixels) from the LV centroid.

    Masks are Gaussian-smoothed and boundaries taken at the 0.5 level of the
    myocardium indicator along each ray, which recovers sub-pixel edges.
    Returns ``(angles, thickness)``; thickness is nan where no wall is crossed.
    """
    myo = np.asarray(myo_mask, dtype=float)
    lv = np.asarray(lv_mask, dtype=bool)
    if not lv.any():
        raise ValueError("LV mask is empty")
    center = ndimage.center_of_mass(lv)
    field_img = ndimage.gaussian_filter(myo, smooth) if smooth > 0 else myo
    angles = 2 * np.pi * np.arange(n_rays) / n_rays
    max_r = float(np.hypot(*myo.shape))
    r, prof = _ray_profile(field_img, center, angles, max_r, step)
    thick = np.full(n_rays, np.nan)
    for k in range(n_rays):
        inner, i = _crossing(r, prof[k], 0.5, 0)
        if inner is None:
            continue
        outer, _ = _crossing(r, prof[k], 0.5, i)
        if outer is not None:
            thick[k] = outer - inner
    return angles, thick


def lvmwt_aha(myo_mask, lv_mask, rv_insertion_angle: float = 0.0, level: str = "mid",
              spacing: float = 1.0, n_rays: int = 360) -> WallThickness:
    """Maximum wall thickness per AHA segment for one short-axis slice.

    ``myo_mask``/``lv_mask`` may be single slices or ``{level: (myo, lv)}``
    dicts covering several levels via :func:`lvmwt_aha_volume`. Angles are
    measured from the anterior RV insertion point (radians, image
    convention: rows downward); each level's sectors split 360 degrees evenly.
    """
    return lvmwt_aha_volume({level: (myo_mask, lv_mask, rv_insertion_angle)}, spacing, n_rays)


def lvmwt_aha_volume(slices: dict, spacing: float = 1.0, n_rays: int = 360) -> WallThickness:
    """``slices`` maps ``basal``/``mid``/``apical`` to ``(myo, lv, rv_insertion_angle)``."""
    segs = np.full(16, np.nan)
    flagged = []
    for level, (myo, lv, origin) in slices.items():
        if level not in SEGMENTS_PER_LEVEL:
            raise ValueError(f"unknown slice level {level!r}")
        nseg = SEGMENTS_PER_LEVEL[level]
        angles, thick = wall_thickness_rays(myo, lv, n_rays)
        rel = (angles - origin) % (2 * np.pi)
        sector = np.minimum((rel / (2 * np.pi / nseg)).astype(int), nseg - 1)
        for s in range(nseg):
            sel = thick[sector == s]
            seg_id = _SEGMENT_OFFSET[level] + s
            if sel.size == 0 or np.any(np.isnan(sel)):
                flagged.append(seg_id + 1)
            if np.any(np.isfinite(sel)):
                segs[seg_id] = float(np.nanmax(sel)) * spacing
    glob = float(np.nanmax(segs)) if np.any(np.isfinite(segs)) else np.nan
    return WallThickness(segs, glob, sorted(flagged))
