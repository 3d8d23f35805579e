"""Synthetic short-axis cardiac phantoms and multi-coil k-space synthesis.

Geometry is expressed in normalised coordinates: ``u`` (rows) and ``v``
(columns) run from -1 to 1 across the field of view. Label maps use
:data:`LABEL_LV`, :data:`LABEL_MYO` and :data:`LABEL_RV`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .physics import fft2c, ifft2c, normalize_sensitivities, sos

LABEL_LV, LABEL_MYO, LABEL_RV = 1, 2, 3
MODALITIES = ("cine", "lge", "t1map", "t2map")

# (T1 ms, T2 ms, proton density) per tissue at 1.5T-like values.
TISSUES = {
    "blood": (1550.0, 250.0, 0.95),
    "myocardium": (1000.0, 45.0, 0.80),
    "fat": (300.0, 80.0, 1.00),
    "liver": (600.0, 40.0, 0.75),
    "lung": (1200.0, 30.0, 0.10),
    "body": (900.0, 50.0, 0.70),
    "lesion": (1200.0, 65.0, 0.85),
}


class GeometryError(ValueError):
    pass


@dataclass
class PhantomSpec:
    """Anatomy, tissue and motion parameters of one phantom."""

    shape: tuple[int, int] = (64, 64)
    pixel_spacing: tuple[float, float] = (2.0, 2.0)
    slice_thickness: float = 8.0
    torso_axes: tuple[float, float] = (0.70, 0.90)
    heart_center: tuple[float, float] = (0.05, 0.10)
    lv_radius: float = 0.17
    myo_thickness: float = 0.08
    rv_offset: tuple[float, float] = (-0.02, -0.24)
    rv_axes: tuple[float, float] = (0.22, 0.22)
    motion_amplitude: float = 0.35
    n_frames: int = 12
    lesion_sector: tuple[float, float] | None = None
    edge_width: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.myo_thickness <= 0:
            raise GeometryError("myo_thickness must be > 0")
        if self.lv_radius <= 0:
            raise GeometryError("lv_radius must be > 0")
        if self.n_frames < 1:
            raise GeometryError("n_frames must be >= 1")
        cy, cx = self.heart_center
        ro = self.lv_radius + self.myo_thickness
        if abs(cy) + ro > 1 or abs(cx) + ro > 1:
            raise GeometryError("heart exceeds the field of view")
        ry, rx = self.torso_axes
        if ry > 1 or rx > 1:
            raise GeometryError("torso ellipse exceeds the field of view")
        if ((cy / ry) ** 2 + (cx / rx) ** 2) > 1 or ro > min(ry, rx):
            raise GeometryError("heart does not fit inside the torso")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def random(cls, seed: int, **overrides) -> "PhantomSpec":
        """Anatomical variation drawn deterministically from ``seed``."""
        rng = np.random.default_rng(seed)
        params = dict(
            torso_axes=(rng.uniform(0.62, 0.78), rng.uniform(0.80, 0.95)),
            heart_center=(rng.uniform(-0.06, 0.10), rng.uniform(0.02, 0.18)),
            lv_radius=rng.uniform(0.13, 0.20),
            myo_thickness=rng.uniform(0.06, 0.10),
            rv_offset=(rng.uniform(-0.06, 0.04), rng.uniform(-0.28, -0.20)),
            rv_axes=(rng.uniform(0.17, 0.26), rng.uniform(0.16, 0.24)),
            motion_amplitude=rng.uniform(0.25, 0.45),
            seed=int(seed),
        )
        params.update(overrides)
        return cls(**params)


@dataclass
class FrameGeometry:
    lv_radius: float
    epi_radius: float
    rv_axes: tuple[float, float]


@dataclass
class Phantom:
    """Per-frame tissue maps and ground-truth labels."""

    spec: PhantomSpec
    labels: np.ndarray          # (frames, ny, nx) int
    lesion: np.ndarray          # (frames, ny, nx) bool
    t1: np.ndarray              # (frames, ny, nx) ms
    t2: np.ndarray
    pd: np.ndarray
    torso: np.ndarray           # (ny, nx) bool
    geometry: list[FrameGeometry] = field(default_factory=list)


def grid_coords(shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    ny, nx = shape
    u = (np.arange(ny) + 0.5) / ny * 2 - 1
    v = (np.arange(nx) + 0.5) / nx * 2 - 1
    return np.meshgrid(u, v, indexing="ij")


def frame_geometry(spec: PhantomSpec, t: float) -> FrameGeometry:
    """Geometry at frame ``t``; periodic with period ``n_frames``.

    The LV cavity contracts radially while myocardial area is conserved.
    """
    s = np.sin(np.pi * t / spec.n_frames) ** 2
    r_lv = spec.lv_radius * (1 - spec.motion_amplitude * s)
    r_epi0 = spec.lv_radius + spec.myo_thickness
    r_epi = np.sqrt(r_lv ** 2 + r_epi0 ** 2 - spec.lv_radius ** 2)
    k = 1 - 0.5 * spec.motion_amplitude * s
    return FrameGeometry(float(r_lv), float(r_epi), (spec.rv_axes[0] * k, spec.rv_axes[1] * k))


def _soft(signed_dist: np.ndarray, width: float) -> np.ndarray:
    """Smooth inside-indicator from a signed distance (positive inside)."""
    return 0.5 * (1 + np.tanh(signed_dist / max(width, 1e-9)))


def _ellipse_dist(u, v, center, axes):
    """Approximate signed distance to an ellipse boundary (positive inside)."""
    du, dv = u - center[0], v - center[1]
    rho = np.sqrt((du / axes[0]) ** 2 + (dv / axes[1]) ** 2)
    return (1 - rho) * min(axes)


def make_phantom(spec: PhantomSpec) -> Phantom:
    """Rasterise tissue maps and hard labels for every frame."""
    ny, nx = spec.shape
    u, v = grid_coords(spec.shape)
    rng = np.random.default_rng(spec.seed)
    px = 2.0 / min(ny, nx)
    w = spec.edge_width * px

    torso_d = _ellipse_dist(u, v, (0, 0), spec.torso_axes)
    torso = torso_d > 0
    fat_d = _ellipse_dist(u, v, (0, 0), (spec.torso_axes[0] - 0.05, spec.torso_axes[1] - 0.05))
    liver_c = (rng.uniform(0.25, 0.40), rng.uniform(-0.55, -0.35))
    liver_d = _ellipse_dist(u, v, liver_c, (rng.uniform(0.22, 0.30), rng.uniform(0.28, 0.38)))
    lung_l = _ellipse_dist(u, v, (-0.30, -0.55), (0.28, 0.22))
    lung_r = _ellipse_dist(u, v, (-0.30, 0.62), (0.26, 0.18))

    cy, cx = spec.heart_center
    rr = np.sqrt((u - cy) ** 2 + (v - cx) ** 2)
    ang = np.arctan2(u - cy, v - cx)

    frames = spec.n_frames
    labels = np.zeros((frames, ny, nx), dtype=np.int16)
    lesion = np.zeros((frames, ny, nx), dtype=bool)
    maps = {k: np.zeros((frames, ny, nx)) for k in ("t1", "t2", "pd")}
    geoms = []
    for f in range(frames):
        g = frame_geometry(spec, f)
        geoms.append(g)
        lv_d = g.lv_radius - rr
        epi_d = g.epi_radius - rr
        rv_c = (cy + spec.rv_offset[0], cx + spec.rv_offset[1])
        rv_d = np.minimum(_ellipse_dist(u, v, rv_c, g.rv_axes), -epi_d)

        lv_mask = lv_d > 0
        myo_mask = (epi_d > 0) & ~lv_mask
        rv_mask = (rv_d > 0) & ~(epi_d > 0) & torso
        labels[f][lv_mask] = LABEL_LV
        labels[f][myo_mask] = LABEL_MYO
        labels[f][rv_mask] = LABEL_RV

        # Soft tissue fractions, painted back to front.
        layers = [
            ("body", _soft(torso_d, w)),
            ("fat", _soft(torso_d, w) * (1 - _soft(fat_d, w))),
            ("liver", _soft(liver_d, w)),
            ("lung", np.maximum(_soft(lung_l, w), _soft(lung_r, w))),
            ("myocardium", _soft(epi_d, w)),
            ("blood", np.maximum(_soft(lv_d, w), _soft(rv_d, w))),
        ]
        t1 = np.zeros((ny, nx)); t2 = np.zeros((ny, nx)); pd = np.zeros((ny, nx))
        for name, frac in layers:
            T1, T2, PD = TISSUES[name]
            t1 = t1 * (1 - frac) + T1 * frac
            t2 = t2 * (1 - frac) + T2 * frac
            pd = pd * (1 - frac) + PD * frac
        if spec.lesion_sector is not None:
            a0, a1 = spec.lesion_sector
            in_sector = ((ang - a0) % (2 * np.pi)) < ((a1 - a0) % (2 * np.pi))
            lesion[f] = myo_mask & in_sector
            T1, T2, PD = TISSUES["lesion"]
            t1[lesion[f]], t2[lesion[f]], pd[lesion[f]] = T1, T2, PD
        maps["t1"][f], maps["t2"][f], maps["pd"][f] = t1, t2, pd

    return Phantom(spec, labels, lesion, maps["t1"], maps["t2"], maps["pd"], torso, geoms)


def render(phantom: Phantom, modality: str, frame: int = 0) -> np.ndarray:
    """Magnitude image of one frame with a modality-specific contrast, max 1."""
    t1, t2, pd = phantom.t1[frame], phantom.t2[frame], phantom.pd[frame]
    if modality == "cine":
        img = pd * np.sqrt(np.divide(t2, t1, out=np.zeros_like(t2), where=t1 > 0))
    elif modality == "lge":
        # Post-contrast inversion recovery: shortened T1 with myocardium nulled.
        t1_post = np.where(t1 > 0, 1.0 / (1.0 / np.maximum(t1, 1) + 1.0 / 900.0), 1)
        t1_post[phantom.lesion[frame]] = 180.0
        ti = 0.69 * 1.0 / (1.0 / 1000.0 + 1.0 / 900.0)
        img = pd * np.abs(1 - 2 * np.exp(-ti / t1_post))
    elif modality == "t1map":
        img = simulate_weighted_series(phantom, "t1map", [1000.0], frame)[0]
    elif modality == "t2map":
        img = simulate_weighted_series(phantom, "t2map", [0.0], frame)[0]
    else:
        raise ValueError(f"unknown modality {modality!r}")
    peak = img.max()
    return img / peak if peak > 0 else img


def simulate_weighted_series(phantom_or_maps, modality: str, timings, frame: int = 0
                             ) -> np.ndarray:
    """T1 (inversion times) or T2 (echo times) weighted image series.

    T1: ``|A - B exp(-TI/T1)|`` with ``A = PD`` and ``B = 2 PD``.
    T2: ``PD exp(-TE/T2)``.
    ``phantom_or_maps`` is a :class:`Phantom` or a dict with ``t1``, ``t2``, ``pd``
    arrays of any shape.
    """
    timings = np.asarray(timings, dtype=float)
    if np.any(np.diff(timings) < 0):
        raise ValueError("timings must be sorted")
    if isinstance(phantom_or_maps, Phantom):
        t1, t2, pd = (phantom_or_maps.t1[frame], phantom_or_maps.t2[frame],
                      phantom_or_maps.pd[frame])
    else:
        t1, t2, pd = (np.asarray(phantom_or_maps[k], dtype=float) for k in ("t1", "t2", "pd"))
    tt = timings.reshape((-1,) + (1,) * np.ndim(pd))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if modality == "t1map":
            decay = np.where(t1 > 0, np.exp(-tt / np.where(t1 > 0, t1, 1)), 0.0)
            return np.abs(pd - 2 * pd * decay)
        if modality == "t2map":
            decay = np.where(t2 > 0, np.exp(-tt / np.where(t2 > 0, t2, 1)), 0.0)
            return pd * decay
    raise ValueError(f"no weighted series for modality {modality!r}")


# ---------------------------------------------------------------------- coils
def simulate_coils(n: int, shape: tuple[int, int], seed: int = 0) -> np.ndarray:
    """Smooth complex receive maps around the torso, normalised to unit RSS.

    Magnitudes fall off as ``1 / (1 + (d / w)^2)`` with distance ``d`` to a coil
    centre on a ring around the field of view; phases are low-order
    polynomials.
    """
    if n < 1:
        raise ValueError("need at least one coil")
    rng = np.random.default_rng(seed)
    u, v = grid_coords(shape)
    maps = np.empty((n,) + tuple(shape), dtype=complex)
    base = rng.uniform(0, 2 * np.pi)
    for j in range(n):
        theta = base + 2 * np.pi * j / n + rng.uniform(-0.15, 0.15)
        c = 1.25 * np.array([np.sin(theta), np.cos(theta)])
        width = rng.uniform(0.8, 1.1)
        d2 = (u - c[0]) ** 2 + (v - c[1]) ** 2
        mag = 1.0 / (1.0 + d2 / width ** 2)
        a = rng.uniform(-0.6, 0.6, size=5)
        phase = rng.uniform(-np.pi, np.pi) + a[0] * u + a[1] * v + 0.3 * (a[2] * u * v
                                                                             + a[3] * u ** 2 + a[4] * v ** 2)
        maps[j] = mag * np.exp(1j * phase)
    return normalize_sensitivities(maps)


def smooth_phase(shape: tuple[int, int], rng: np.random.Generator, scale: float = 0.8
                 ) -> np.ndarray:
    u, v = grid_coords(shape)
    a = rng.uniform(-1, 1, size=6) * scale
    return a[0] + a[1] * u + a[2] * v + 0.5 * (a[3] * u * v + a[4] * u ** 2 + a[5] * v ** 2)


# --------------------------------------------------------------------- records
@dataclass
class ScanRecord:
    """One 2-D multi-coil acquisition with its reference and text metadata."""

    kspace: np.ndarray                  # (C, ky, kx) complex64
    reference: np.ndarray               # (ky, kx) float32
    sensitivities: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)
    segmentation: np.ndarray | None = None
    lesion: np.ndarray | None = None
    pixel_spacing: tuple[float, float] = (2.0, 2.0)
    slice_thickness: float = 8.0
    frame: int | None = None
    scan_id: str = ""
    masks: list = field(default_factory=list)

    @property
    def modality(self) -> str:
        return self.metadata.get("modality", "unknown")

    def reference_error(self) -> float:
        """Max deviation between the stored reference and SoS(ifft2c(kspace))."""
        return float(np.max(np.abs(sos(ifft2c(self.kspace.astype(complex))) - self.reference)))


def synthesize_kspace(magnitude: np.ndarray, n_coils: int, snr: float, seed: int = 0,
                      maps: np.ndarray | None = None, phase_scale: float = 0.8,
                      **record_fields) -> ScanRecord:
    """Physics-informed multi-coil k-space from a magnitude image.

    A smooth synthetic phase is attached, the image is weighted by simulated
    coil maps and Fourier transformed, and complex Gaussian noise is added.
    ``snr`` is mean signal power over the object support divided by the noise
    variance per complex sample; ``np.inf`` disables noise.
    """
    magnitude = np.asarray(magnitude, dtype=float)
    if np.any(magnitude < 0):
        raise ValueError("magnitude image must be nonnegative")
    if not snr > 0:
        raise ValueError(f"snr must be > 0, got {snr}")
    rng = np.random.default_rng(seed)
    if maps is None:
        maps = simulate_coils(n_coils, magnitude.shape, seed=int(rng.integers(2 ** 31)))
    phase = smooth_phase(magnitude.shape, rng, phase_scale)
    img = magnitude * np.exp(1j * phase)
    ksp = fft2c(maps * img[None])
    if np.isfinite(snr):
        support = magnitude > 1e-3 * magnitude.max()
        sigma2 = np.mean(magnitude[support] ** 2) / snr
        noise = rng.standard_normal(ksp.shape) + 1j * rng.standard_normal(ksp.shape)
        ksp = ksp + np.sqrt(sigma2 / 2) * noise
    ksp = ksp.astype(np.complex64)
    reference = sos(ifft2c(ksp.astype(complex))).astype(np.float32)
    return ScanRecord(kspace=ksp, reference=reference, sensitivities=maps.astype(np.complex64),
                      **record_fields)


def measure_snr(record: ScanRecord, magnitude: np.ndarray) -> float:
    """Estimate SNR from coil images: background noise vs. support signal power."""
    coil_imgs = ifft2c(record.kspace.astype(complex))
    support = magnitude > 1e-3 * magnitude.max()
    background = magnitude == 0
    if not background.any():
        raise ValueError("no background region to estimate noise from")
    sigma2 = np.mean(np.abs(coil_imgs[:, background]) ** 2)
    n_coils = coil_imgs.shape[0]
    signal = np.mean(np.sum(np.abs(coil_imgs[:, support]) ** 2, axis=0)) - n_coils * sigma2
    return float(signal / sigma2)


def default_metadata(modality: str, view: str = "sax", field_strength: float = 1.5,
                     vendor: str | None = "simulated", population: str | None = None) -> dict:
    md = {"modality": modality, "view": view, "field": field_strength, "vendor": vendor}
    if population:
        md["population"] = population
    return md


def phantom_records(spec: PhantomSpec, modality: str = "cine", frames=None, n_coils: int = 8,
                    snr: float = 400.0, seed: int = 0, field_strength: float = 1.5
                    ) -> list[ScanRecord]:
    """Render frames of a phantom and synthesise one record per frame."""
    ph = make_phantom(spec)
    frames = range(spec.n_frames) if frames is None else frames
    maps = simulate_coils(n_coils, spec.shape, seed=seed)
    out = []
    for f in frames:
        mag = render(ph, modality, f)
        rec = synthesize_kspace(
            mag, n_coils, snr, seed=seed * 1000 + f, maps=maps,
            metadata=default_metadata(modality, field_strength=field_strength),
            segmentation=ph.labels[f].astype(np.int16),
            lesion=ph.lesion[f] if spec.lesion_sector is not None else None,
            pixel_spacing=spec.pixel_spacing, slice_thickness=spec.slice_thickness,
            frame=f, scan_id=f"phantom{spec.seed}_{modality}_f{f}")
        out.append(rec)
    return out


def with_shape(spec: PhantomSpec, shape: tuple[int, int]) -> PhantomSpec:
    return replace(spec, shape=tuple(shape))
