"""Point-cloud loading and synthetic manifold generators."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

N_LABEL_BINS = 10  # parameter-value quantization used for coloring labels


@dataclass
class PointCloud:
    """An N x D matrix of samples with optional integer class labels.

    Parameters
    ----------
    points : ndarray of shape (n, d)
        Sample coordinates; must be finite.
    labels : ndarray of shape (n,), optional
        Integer class ids aligned with ``points`` rows.
    name : str
        Identifier carried through pipeline artifacts.
    """

    points: np.ndarray
    labels: np.ndarray | None = None
    name: str = "cloud"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValueError("points must be a 2-D array")
        n, d = self.points.shape
        if n < 1 or d < 1:
            raise ValueError("points must be at least 1x1")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("points contain non-finite values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ValueError(
                    f"labels length {self.labels.shape} does not match {n} points"
                )

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def load_csv(path, label_column: str | None = None) -> PointCloud:
    """Load a point cloud from a comma-separated file.

    The file may start with a single header row; it is detected by any cell
    failing to parse as a number. ``label_column`` selects a header name whose
    integer values become class labels, so it requires a header row.

    Raises
    ------
    ValueError
        On ragged rows, non-numeric or non-finite cells, an empty file, or an
        unknown label column.
    OSError
        If the file cannot be read.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: empty file")

    header = None
    if not _all_numeric(rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: header but no data rows")

    label_idx = None
    if label_column is not None:
        if header is None:
            raise ValueError("label_column requires a header row")
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise ValueError(f"label column {label_column!r} not in header {header}")

    arity = len(rows[0])
    data = np.empty((len(rows), arity), dtype=np.float64)
    for r, row in enumerate(rows):
        if len(row) != arity:
            raise ValueError(f"{path}: row {r} has {len(row)} cells, expected {arity}")
        for c, cell in enumerate(row):
            try:
                val = float(cell)
            except ValueError:
                raise ValueError(f"{path}: non-numeric cell {cell!r} at row {r}")
            if not np.isfinite(val):
                raise ValueError(f"{path}: non-finite cell {cell!r} at row {r}")
            data[r, c] = val

    labels = None
    if label_idx is not None:
        raw = data[:, label_idx]
        if not np.all(raw == np.round(raw)):
            raise ValueError(f"label column {label_column!r} has non-integer values")
        labels = raw.astype(np.int64)
        data = np.delete(data, label_idx, axis=1)
        if data.shape[1] == 0:
            raise ValueError("label column leaves no feature columns")

    return PointCloud(data, labels, name=os.path.basename(str(path)))


def _all_numeric(row) -> bool:
    for cell in row:
        try:
            float(cell)
        except ValueError:
            return False
    return True


def _quantize(values: np.ndarray, bins: int = N_LABEL_BINS) -> np.ndarray:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi <= lo:
        return np.zeros(len(values), dtype=np.int64)
    q = np.floor((values - lo) / (hi - lo) * bins).astype(np.int64)
    return np.minimum(q, bins - 1)


def swiss_roll_surface(t: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Map (t, h) parameters onto the rolled sheet (t cos t, h, t sin t)."""
    return np.column_stack((t * np.cos(t), h, t * np.sin(t)))


def gen_swiss_roll(n: int, noise_sd: float = 0.0, seed: int = 0) -> PointCloud:
    """Sample the Swiss roll: a flat sheet rolled up in 3-D.

    Parameters are drawn uniformly, t on [1.5*pi, 4.5*pi] and height on
    [0, 21]. Labels quantize t so plots can color the unrolling order.
    """
    if n < 4:
        raise ValueError("swiss roll needs n >= 4")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    t = rng.uniform(1.5 * np.pi, 4.5 * np.pi, size=n)
    h = rng.uniform(0.0, 21.0, size=n)
    pts = swiss_roll_surface(t, h)
    if noise_sd > 0:
        pts = pts + rng.normal(0.0, noise_sd, size=pts.shape)
    return PointCloud(pts, _quantize(t), name="swiss_roll")


def s_curve_points(t: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Map (t, h) onto the S-shaped sheet (sin t, h, sign(t)*(cos t - 1))."""
    return np.column_stack((np.sin(t), h, np.sign(t) * (np.cos(t) - 1.0)))


def s_curve_parameter(points: np.ndarray) -> np.ndarray:
    """Invert the noise-free S-curve parametrization back to t.

    The branch is picked from the sign of the z coordinate (z <= 0 on the
    t >= 0 half), then the angle is unwrapped into [-1.5*pi, 1.5*pi].
    """
    x = points[:, 0]
    z = points[:, 2]
    neg = z > 0
    xs = np.where(neg, -x, x)
    zs = np.where(neg, -z, z)
    theta = np.arctan2(xs, zs + 1.0)
    theta = np.where(theta < 0, theta + 2.0 * np.pi, theta)
    return np.where(neg, -theta, theta)


def gen_s_curve(n: int, noise_sd: float = 0.0, seed: int = 0) -> PointCloud:
    """Sample the S-curve sheet: t uniform on [-1.5*pi, 1.5*pi], h on [0, 2]."""
    if n < 4:
        raise ValueError("s-curve needs n >= 4")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    t = rng.uniform(-1.5 * np.pi, 1.5 * np.pi, size=n)
    h = rng.uniform(0.0, 2.0, size=n)
    pts = s_curve_points(t, h)
    if noise_sd > 0:
        pts = pts + rng.normal(0.0, noise_sd, size=pts.shape)
    return PointCloud(pts, _quantize(t), name="s_curve")


def trefoil_curve(t: np.ndarray) -> np.ndarray:
    """Evaluate the closed trefoil knot curve at parameter t."""
    t = np.asarray(t, dtype=np.float64)
    return np.column_stack(
        (
            np.sin(t) + 2.0 * np.sin(2.0 * t),
            np.cos(t) - 2.0 * np.cos(2.0 * t),
            -np.sin(3.0 * t),
        )
    )


def gen_trefoil(n: int, noise_sd: float = 0.0, seed: int = 0) -> PointCloud:
    """Sample the trefoil knot on an equispaced parameter grid over [0, 2*pi).

    The grid (rather than random draws) keeps consecutive samples adjacent
    along the curve, so the noise-free 2-NN graph is the cycle graph. The
    seed only drives the optional Gaussian noise.
    """
    if n < 8:
        raise ValueError("trefoil needs n >= 8")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    t = np.arange(n) * (2.0 * np.pi / n)
    pts = trefoil_curve(t)
    if noise_sd > 0:
        rng = np.random.default_rng(seed)
        pts = pts + rng.normal(0.0, noise_sd, size=pts.shape)
    return PointCloud(pts, _quantize(t), name="trefoil")


RING_RADII = (1.0, 2.0, 3.0)
BRIDGE_LABEL = 3
# the bridge segment occupies this slice of the gap width, biased toward the
# inner ring so the noise clump stays outside every ring point's kNN window
BRIDGE_SEGMENT = (0.35, 0.50)


def gen_three_rings(
    n_per_ring: int,
    n_bridge: int = 10,
    bridge_noise_sd: float = 0.03,
    seed: int = 0,
) -> PointCloud:
    """Three concentric rings plus noise-bridge clumps in the gaps.

    Rings of radii 1, 2, 3 carry labels 0, 1, 2; bridge points carry label 3
    so downstream tests can tell planted noise from genuine ring structure.
    Each adjacent-ring gap gets ``n_bridge`` points spread along a short
    radial segment on the inner side of the gap (gap 0-1 at angle 0, gap 1-2
    at angle pi) with Gaussian jitter; jittered radii are clamped back into
    the segment, so bridge radii stay strictly between the two rings.
    """
    if n_per_ring < 16:
        raise ValueError("three rings need n_per_ring >= 16")
    if n_bridge < 0:
        raise ValueError("n_bridge must be >= 0")
    if bridge_noise_sd < 0:
        raise ValueError("bridge_noise_sd must be >= 0")

    rng = np.random.default_rng(seed)
    parts = []
    labels = []
    for ring, radius in enumerate(RING_RADII):
        ang = np.arange(n_per_ring) * (2.0 * np.pi / n_per_ring)
        parts.append(np.column_stack((radius * np.cos(ang), radius * np.sin(ang))))
        labels.append(np.full(n_per_ring, ring, dtype=np.int64))

    for gap, angle in ((0, 0.0), (1, np.pi)):
        if n_bridge == 0:
            continue
        r_in, r_out = RING_RADII[gap], RING_RADII[gap + 1]
        width = r_out - r_in
        lo = r_in + BRIDGE_SEGMENT[0] * width
        hi = r_in + BRIDGE_SEGMENT[1] * width
        frac = (np.arange(n_bridge) + 1.0) / (n_bridge + 1.0)
        radii = lo + frac * (hi - lo)
        pts = np.column_stack((radii * np.cos(angle), radii * np.sin(angle)))
        if bridge_noise_sd > 0:
            pts = pts + rng.normal(0.0, bridge_noise_sd, size=pts.shape)
        r = np.linalg.norm(pts, axis=1)
        r_clamped = np.clip(r, lo, hi)
        scale = np.where(r > 0, r_clamped / np.maximum(r, 1e-300), 1.0)
        pts = pts * scale[:, None]
        parts.append(pts)
        labels.append(np.full(n_bridge, BRIDGE_LABEL, dtype=np.int64))

    return PointCloud(np.vstack(parts), np.concatenate(labels), name="three_rings")


GENERATORS = {
    "swiss_roll": gen_swiss_roll,
    "s_curve": gen_s_curve,
    "trefoil": gen_trefoil,
}


def save_csv(cloud: PointCloud, path) -> None:
    """Write a cloud as CSV with header f0..f{D-1}[,label]."""
    header = [f"f{i}" for i in range(cloud.dim)]
    if cloud.labels is not None:
        header.append("label")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in range(cloud.n):
            cells = [repr(float(v)) for v in cloud.points[r]]
            if cloud.labels is not None:
                cells.append(str(int(cloud.labels[r])))
            fh.write(",".join(cells) + "\n")
