"""Shared geometric and numerical primitives.

3-vectors are plain numpy arrays of shape (3,); complex 3-vectors carry a
complex dtype.  Sampled fields are arrays of shape (n,) or (n, 3) over a
uniform arclength grid.  Everything here is a pure function over immutable
values; nothing mutates its inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

# Orthonormality is checked to ORTHO_TOL after projection; generic geometric
# comparisons use GEOM_TOL unless an operation states otherwise.
ORTHO_TOL = 1e-10
GEOM_TOL = 1e-8

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


class GeometryError(ValueError):
    """Raised on malformed grids, degenerate point sets and broken invariants."""


def norm(v: np.ndarray) -> float:
    return float(np.linalg.norm(v))


def unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        raise GeometryError("cannot normalize the zero vector")
    return v / n


def nearest_rotation(m: np.ndarray) -> np.ndarray:
    """Polar-decomposition projection of a 3x3 matrix to the nearest rotation.

    Symmetric in the rows (no axis is privileged, unlike Gram-Schmidt).
    """
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


@dataclass(frozen=True)
class OrthoFrame:
    """Orthonormal frame (T, Re N, Im N) with T real and N complex.

    The rows of ``matrix()`` are T, Re N, Im N; a valid frame has an
    orthogonal matrix with determinant +1.
    """

    T: np.ndarray
    N: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.array([self.T, self.N.real, self.N.imag], dtype=float)

    def orthonormality_error(self) -> float:
        m = self.matrix()
        return float(np.max(np.abs(m @ m.T - np.eye(3))))

    def renormalized(self) -> "OrthoFrame":
        """Project onto the nearest rotation; idempotent."""
        r = nearest_rotation(self.matrix())
        return OrthoFrame(T=r[0], N=r[1] + 1j * r[2])

    def check(self, tol: float = ORTHO_TOL) -> None:
        if self.orthonormality_error() > tol:
            raise GeometryError(
                f"frame orthonormality error {self.orthonormality_error():.3e} > {tol:.1e}"
            )
        if np.linalg.det(self.matrix()) < 0:
            raise GeometryError("frame is left-handed")


def standard_frame() -> OrthoFrame:
    """The canonical frame (e1, e2 + i e3)."""
    return OrthoFrame(T=E1.copy(), N=E2 + 1j * E3)


@dataclass(frozen=True)
class SampledCurve:
    """Curve sampled on a strictly increasing arclength grid.

    topology is "closed" (periodic indexing, s omits the duplicate endpoint)
    or "open-truncated" (explicit endpoints, finite-domain integrals only).
    """

    s: np.ndarray
    points: np.ndarray
    topology: str = "open-truncated"
    tangent: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.topology not in ("closed", "open-truncated"):
            raise GeometryError(f"unknown topology {self.topology!r}")
        if self.points.shape != (self.s.size, 3):
            raise GeometryError("points must have shape (len(s), 3)")
        if np.any(np.diff(self.s) <= 0):
            raise GeometryError("arclength grid must be strictly increasing")
        if self.tangent is not None and self.tangent.shape != self.points.shape:
            raise GeometryError("tangent field shape mismatch")

    @property
    def n(self) -> int:
        return self.s.size

    def spacing(self) -> float:
        h = np.diff(self.s)
        if np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, abs(h[0])):
            raise GeometryError("grid is not uniform")
        return float(h[0])

    def chord_error(self) -> float:
        """Max deviation of consecutive chord lengths from the grid spacing."""
        chords = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return float(np.max(np.abs(chords - np.diff(self.s))))

    def check_arclength(self, tol: float = 1e-3) -> None:
        if self.chord_error() > tol * max(1.0, self.spacing()):
            raise GeometryError("curve is not arclength-parametrized within tolerance")
        if self.tangent is not None:
            err = np.max(np.abs(np.linalg.norm(self.tangent, axis=1) - 1.0))
            if err > 1e-6:
                raise GeometryError(f"tangent field not unit: max deviation {err:.3e}")

    def translated(self, d: np.ndarray) -> "SampledCurve":
        return replace(self, points=self.points + d)

    def rotated(self, r: np.ndarray) -> "SampledCurve":
        tangent = None if self.tangent is None else self.tangent @ r.T
        return replace(self, points=self.points @ r.T, tangent=tangent)

    def resampled(self, n: int) -> "SampledCurve":
        """Linear resampling onto n uniform arclength nodes."""
        s_new = np.linspace(self.s[0], self.s[-1], n)
        pts = np.column_stack([np.interp(s_new, self.s, self.points[:, k]) for k in range(3)])
        return SampledCurve(s=s_new, points=pts, topology=self.topology)


def curve_to_csv(curve: SampledCurve, path) -> None:
    """Write `s,x,y,z[,tx,ty,tz]`, one node per row, UTF-8, LF line endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if curve.tangent is None:
            w.writerow(["s", "x", "y", "z"])
            for si, p in zip(curve.s, curve.points):
                w.writerow([repr(float(si))] + [repr(float(c)) for c in p])
        else:
            w.writerow(["s", "x", "y", "z", "tx", "ty", "tz"])
            for si, p, t in zip(curve.s, curve.points, curve.tangent):
                w.writerow([repr(float(si))] + [repr(float(c)) for c in p]
                           + [repr(float(c)) for c in t])


def curve_from_csv(path, topology: str = "open-truncated") -> SampledCurve:
    with open(path, "r", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    if header[:4] != ["s", "x", "y", "z"]:
        raise GeometryError(f"unexpected CSV header {header!r}")
    arr = np.array([[float(v) for v in row] for row in data])
    tangent = arr[:, 4:7] if len(header) >= 7 else None
    return SampledCurve(s=arr[:, 0], points=arr[:, 1:4], topology=topology, tangent=tangent)


def finite_diff(values: np.ndarray, order: int, grid: np.ndarray,
                topology: str = "open-truncated") -> np.ndarray:
    """Second-order finite differences of a sampled field on a uniform grid.

    Centered stencils in the interior; one-sided stencils at open boundaries
    (cubic-exact, so the global error stays O(h^2)); periodic wrap for closed
    topology.  values may be (n,), (n, k), real or complex.
    """
    values = np.asarray(values)
    grid = np.asarray(grid, dtype=float)
    n = grid.size
    if n < 5:
        raise GeometryError("finite_diff needs at least 5 nodes")
    if values.shape[0] != n:
        raise GeometryError("values/grid length mismatch")
    if order not in (1, 2):
        raise GeometryError("order must be 1 or 2")
    h = np.diff(grid)
    if np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, abs(h[0])):
        raise GeometryError("finite_diff requires a uniform grid")
    h = float(h[0])

    if topology == "closed":
        if order == 1:
            return (np.roll(values, -1, axis=0) - np.roll(values, 1, axis=0)) / (2 * h)
        return (np.roll(values, -1, axis=0) - 2 * values + np.roll(values, 1, axis=0)) / (h * h)

    out = np.empty_like(values, dtype=np.result_type(values, float))
    if order == 1:
        out[1:-1] = (values[2:] - values[:-2]) / (2 * h)
        # one-sided 4-point stencils, exact for cubics
        out[0] = (-11 * values[0] + 18 * values[1] - 9 * values[2] + 2 * values[3]) / (6 * h)
        out[-1] = (11 * values[-1] - 18 * values[-2] + 9 * values[-3] - 2 * values[-4]) / (6 * h)
    else:
        out[1:-1] = (values[2:] - 2 * values[1:-1] + values[:-2]) / (h * h)
        out[0] = (2 * values[0] - 5 * values[1] + 4 * values[2] - values[3]) / (h * h)
        out[-1] = (2 * values[-1] - 5 * values[-2] + 4 * values[-3] - values[-4]) / (h * h)
    return out


@dataclass(frozen=True)
class Alignment:
    rotation: np.ndarray
    translation: np.ndarray
    residual: float


def align_rigid(a: SampledCurve, b: SampledCurve) -> Alignment:
    """Least-squares rigid alignment of A onto B (orthogonal Procrustes).

    Returns (R, d) minimizing RMS |R p_i + d - q_i| over the node sets;
    residual is the RMS distance after alignment.  Node counts must match
    (resample first if they do not).
    """
    if a.n != b.n:
        raise GeometryError("align_rigid needs equal node counts; resample first")
    p = a.points - a.points.mean(axis=0)
    q = b.points - b.points.mean(axis=0)
    cov = p.T @ q
    u, sing, vt = np.linalg.svd(cov)
    if sing[1] <= 1e-12 * max(sing[0], 1e-300):
        raise GeometryError("degenerate (collinear) point set: alignment not unique")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    translation = b.points.mean(axis=0) - r @ a.points.mean(axis=0)
    resid = np.sqrt(np.mean(np.sum((a.points @ r.T + translation - b.points) ** 2, axis=1)))
    return Alignment(rotation=r, translation=translation, residual=float(resid))


def hausdorff_distance(a: SampledCurve, b: SampledCurve) -> float:
    """Symmetric discrete Hausdorff distance over the node sets."""
    if a.n == 0 or b.n == 0:
        raise GeometryError("hausdorff_distance needs non-empty curves")
    ta, tb = cKDTree(a.points), cKDTree(b.points)
    d_ab = np.max(tb.query(a.points)[0])
    d_ba = np.max(ta.query(b.points)[0])
    return float(max(d_ab, d_ba))


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a (not necessarily unit) axis."""
    k = unit(np.asarray(axis, dtype=float))
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * (kx @ kx)
