"""
Pinhole projection with two-term radial distortion, and point triangulation.

Triangulation is batched: every row of a batch is one camera subset (a mask
over the same cameras), so the selector can triangulate all candidates of a
joint in one call.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from posecap.core.config import settings
from posecap.core.errors import ArityError, BehindCameraError
from posecap.core.types import CameraParams

logger = logging.getLogger(__name__)


def distort(normalized: np.ndarray, k1: float, k2: float) -> np.ndarray:
    """Apply the radial model ``x * (1 + k1 r^2 + k2 r^4)`` to normalized points (..., 2)."""
    r2 = np.sum(normalized ** 2, axis=-1, keepdims=True)
    return normalized * (1.0 + k1 * r2 + k2 * r2 ** 2)


def camera_points(cam: CameraParams, X: np.ndarray) -> np.ndarray:
    """World points (..., 3) in the camera frame."""
    return np.asarray(X, dtype=float) @ cam.R.T + cam.t


def project_points(cam: CameraParams, X: np.ndarray, apply_distortion: bool = True) -> np.ndarray:
    """
    Vectorised projection of world points (N, 3) to pixels (N, 2).

    No depth check; points behind the camera project to mirrored pixels.
    """
    Xc = camera_points(cam, X)
    normalized = Xc[..., :2] / Xc[..., 2:3]
    if apply_distortion:
        normalized = distort(normalized, cam.k1, cam.k2)
    return np.stack(
        [cam.fx * normalized[..., 0] + cam.cx, cam.fy * normalized[..., 1] + cam.cy], axis=-1
    )


def project(cam: CameraParams, X, apply_distortion: bool = True) -> np.ndarray:
    """
    Project one world point to pixel coordinates.

    Args:
        cam: Camera to project into
        X: World point in meters
        apply_distortion: Apply the radial model (off gives the ideal pinhole image)

    Returns:
        np.ndarray: ``(u, v)`` in pixels

    Raises:
        BehindCameraError: If the point has nonpositive depth in the camera frame
    """
    X = np.asarray(X, dtype=float).reshape(3)
    depth = camera_points(cam, X)[2]
    if not depth > 0:
        raise BehindCameraError(f"point {X.tolist()} has depth {depth} in camera {cam.camera_id}")
    return project_points(cam, X[None, :], apply_distortion)[0]


def undistort_points(cam: CameraParams, pixels: np.ndarray, iterations: int | None = None) -> np.ndarray:
    """
    Pixels (..., 2) to undistorted normalized image points (..., 2).

    The radial polynomial is inverted along each ray with a fixed number of
    Newton steps on the radius.
    """
    iterations = iterations or settings.UNDISTORT_ITERATIONS
    pixels = np.asarray(pixels, dtype=float)
    distorted = np.stack([(pixels[..., 0] - cam.cx) / cam.fx, (pixels[..., 1] - cam.cy) / cam.fy], axis=-1)
    if cam.k1 == 0.0 and cam.k2 == 0.0:
        return distorted
    rd = np.linalg.norm(distorted, axis=-1)
    r = rd.copy()
    for _ in range(iterations):
        r2 = r * r
        f = r * (1.0 + cam.k1 * r2 + cam.k2 * r2 * r2) - rd
        df = 1.0 + 3.0 * cam.k1 * r2 + 5.0 * cam.k2 * r2 * r2
        r = r - f / df
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(rd > 0, r / rd, 1.0)
    return distorted * scale[..., None]


def undistort_pixel(cam: CameraParams, pixel, iterations: int | None = None) -> np.ndarray:
    return undistort_points(cam, np.asarray(pixel, dtype=float).reshape(2), iterations)


# ─── Triangulation ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class TriangulationResult:
    """A triangulated point with its quality flags."""
    point: np.ndarray
    low_confidence: bool = False
    diverged: bool = False


@dataclass(frozen=True)
class BatchTriangulation:
    """Points (B, 3) with per-row flags."""
    points: np.ndarray
    low_confidence: np.ndarray
    diverged: np.ndarray


class _Stack:
    """Camera parameters of a rig stacked for broadcasting against (B, K, ...) arrays."""

    def __init__(self, cams: Sequence[CameraParams]):
        self.cams = list(cams)
        self.R = np.stack([c.R for c in cams])
        self.t = np.stack([c.t for c in cams])
        self.f = np.array([[c.fx, c.fy] for c in cams])
        self.c = np.array([[c.cx, c.cy] for c in cams])
        self.k1 = np.array([c.k1 for c in cams])
        self.k2 = np.array([c.k2 for c in cams])

    def residuals(self, X: np.ndarray, pixels: np.ndarray, mask: np.ndarray):
        """
        Reprojection residuals (B, K, 2), their Jacobians (B, K, 2, 3) and the masked cost (B,).

        Rows with a masked camera behind it get infinite cost.
        """
        Xc = np.einsum("kij,bj->bki", self.R, X) + self.t[None]
        depth = Xc[..., 2]
        safe = np.where(np.abs(depth) > 1e-300, depth, 1e-300)
        a = Xc[..., 0] / safe
        b = Xc[..., 1] / safe
        r2 = a * a + b * b
        k1, k2 = self.k1[None], self.k2[None]
        d = 1.0 + k1 * r2 + k2 * r2 * r2
        dd = 2.0 * (k1 + 2.0 * k2 * r2)
        fx, fy = self.f[None, :, 0], self.f[None, :, 1]
        predicted = np.stack([fx * a * d, fy * b * d], axis=-1) + self.c[None]
        res = np.where(mask[..., None], predicted - pixels, 0.0)

        # d(u, v) / d(a, b)
        dn = np.empty(a.shape + (2, 2))
        dn[..., 0, 0] = fx * (d + a * a * dd)
        dn[..., 0, 1] = fx * a * b * dd
        dn[..., 1, 0] = fy * b * a * dd
        dn[..., 1, 1] = fy * (d + b * b * dd)
        # d(a, b) / d(Xc)
        inv = 1.0 / safe
        dp = np.zeros(a.shape + (2, 3))
        dp[..., 0, 0] = inv
        dp[..., 0, 2] = -a * inv
        dp[..., 1, 1] = inv
        dp[..., 1, 2] = -b * inv
        J = np.einsum("bkij,bkjl,klm->bkim", dn, dp, self.R)
        J = np.where(mask[..., None, None], J, 0.0)

        cost = np.sum(res ** 2, axis=(1, 2))
        behind = np.any(mask & (depth <= 0), axis=1)
        cost = np.where(behind, np.inf, cost)
        return res, J, cost


def _linear(stack: _Stack, normalized: np.ndarray, mask: np.ndarray, condition_limit: float):
    """DLT in undistorted normalized coordinates for every row of the batch."""
    P = np.concatenate([stack.R, stack.t[..., None]], axis=2)  # (K, 3, 4)
    x = normalized[..., 0:1]
    y = normalized[..., 1:2]
    rows_x = x * P[None, :, 2, :] - P[None, :, 0, :]
    rows_y = y * P[None, :, 2, :] - P[None, :, 1, :]
    A = np.stack([rows_x, rows_y], axis=2)  # (B, K, 2, 4)
    A = np.where(mask[..., None, None], A, 0.0)
    A = np.nan_to_num(A).reshape(A.shape[0], -1, 4)
    _, s, vt = np.linalg.svd(A)
    Xh = vt[:, -1, :]
    w = Xh[:, 3]
    w = np.where(np.abs(w) > 1e-300, w, 1e-300)
    points = Xh[:, :3] / w[:, None]
    with np.errstate(divide="ignore"):
        condition = s[:, 0] / s[:, 2]
    low = ~(condition <= condition_limit)
    return points, low


def triangulate_batch(
    cams: Sequence[CameraParams],
    pixels: np.ndarray,
    mask: np.ndarray,
    refine: bool = True,
    max_iterations: int | None = None,
    condition_limit: float | None = None,
) -> BatchTriangulation:
    """
    Linear plus refined triangulation of many camera subsets at once.

    Args:
        cams: The K cameras every row refers to
        pixels: (B, K, 2) observed pixels; entries outside the mask are ignored
        mask: (B, K) booleans selecting the cameras of each row (at least 2 per row)
        refine: Run damped Gauss-Newton on the reprojection error after the DLT
        max_iterations: Iteration cap of the refinement
        condition_limit: DLT condition number above which a row is flagged low-confidence

    Returns:
        BatchTriangulation: Points and flags, one per row

    Raises:
        ArityError: If a row selects fewer than two cameras
    """
    pixels = np.asarray(pixels, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if pixels.ndim != 3 or pixels.shape[1:] != (len(cams), 2) or mask.shape != pixels.shape[:2]:
        raise ArityError(f"expected pixels (B, {len(cams)}, 2) and mask (B, {len(cams)})")
    if np.any(mask.sum(axis=1) < 2):
        raise ArityError("triangulation needs at least 2 observations per point")
    stack = _Stack(cams)
    normalized = np.stack([undistort_points(cam, pixels[:, k]) for k, cam in enumerate(cams)], axis=1)
    points, low = _linear(stack, normalized, mask, condition_limit or settings.TRIANGULATION_CONDITION_LIMIT)
    diverged = np.zeros(len(points), dtype=bool)
    if refine and len(points):
        points, diverged = _refine(stack, points, pixels, mask, max_iterations)
    n_low = int(low.sum())
    if n_low:
        logger.debug(f"{n_low}/{len(points)} triangulations flagged low-confidence")
    return BatchTriangulation(points, low, diverged)


def _refine(stack: _Stack, X0: np.ndarray, pixels: np.ndarray, mask: np.ndarray, max_iterations: int | None):
    """
    Batched Levenberg-Marquardt on the 3D point of every row.

    Only cost-decreasing steps are accepted, so no row ends above its initial
    residual. Rows whose initial point is behind a camera come back unchanged
    and flagged as diverged.
    """
    max_iterations = settings.LM_MAX_ITERATIONS if max_iterations is None else max_iterations
    tol = settings.LM_RELATIVE_TOLERANCE
    pixels = np.where(mask[..., None], pixels, 0.0)
    X = X0.copy()
    res, J, cost = stack.residuals(X, pixels, mask)
    diverged = ~np.isfinite(cost)
    active = ~diverged & (cost > 1e-24)
    lam = np.full(len(X), settings.LM_INITIAL_DAMPING)
    eye = np.eye(3)

    for _ in range(max_iterations):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        Ja, ra = J[idx], res[idx]
        H = np.einsum("bkia,bkic->bac", Ja, Ja)
        g = np.einsum("bkia,bki->ba", Ja, ra)
        diag = np.einsum("bii->bi", H)
        damped = H + lam[idx, None, None] * (diag[:, :, None] * eye + 1e-12 * eye)
        step = -np.linalg.solve(damped, g[..., None])[..., 0]
        candidate = X[idx] + step
        new_res, new_J, new_cost = stack.residuals(candidate, pixels[idx], mask[idx])

        accept = new_cost < cost[idx]
        acc = idx[accept]
        relative = (cost[acc] - new_cost[accept]) / np.maximum(cost[acc], 1e-300)
        X[acc] = candidate[accept]
        res[acc] = new_res[accept]
        J[acc] = new_J[accept]
        cost[acc] = new_cost[accept]
        lam[acc] /= 10.0
        rej = idx[~accept]
        lam[rej] *= 10.0

        done = np.zeros(len(X), dtype=bool)
        done[acc] = (relative < tol) | (cost[acc] <= 1e-24)
        done[rej] = lam[rej] > 1e16
        active &= ~done

    X[diverged] = X0[diverged]
    return X, diverged


def _as_batch(observations: Sequence[Tuple[CameraParams, Sequence[float]]]):
    if len(observations) < 2:
        raise ArityError(f"triangulation needs at least 2 observations, got {len(observations)}")
    cams = [cam for cam, _ in observations]
    pixels = np.array([np.asarray(px, dtype=float).reshape(2) for _, px in observations])[None]
    mask = np.ones((1, len(cams)), dtype=bool)
    return cams, pixels, mask


def triangulate_linear(observations: Sequence[Tuple[CameraParams, Sequence[float]]]) -> TriangulationResult:
    """
    DLT triangulation from (camera, pixel) pairs; pixels are undistorted first.

    Near-parallel rays give a flagged, still returned, estimate.

    Raises:
        ArityError: With fewer than two observations
    """
    cams, pixels, mask = _as_batch(observations)
    out = triangulate_batch(cams, pixels, mask, refine=False)
    if out.low_confidence[0]:
        logger.warning("Linear triangulation is ill-conditioned (near-parallel rays)")
    return TriangulationResult(out.points[0], bool(out.low_confidence[0]))


def triangulate_refined(
    observations: Sequence[Tuple[CameraParams, Sequence[float]]],
    initial,
    max_iterations: int | None = None,
) -> TriangulationResult:
    """Refine ``initial`` by minimizing the summed squared reprojection error."""
    cams, pixels, mask = _as_batch(observations)
    X0 = np.asarray(initial, dtype=float).reshape(1, 3)
    X, diverged = _refine(_Stack(cams), X0, pixels, mask, max_iterations)
    if diverged[0]:
        logger.warning("Point refinement diverged; returning the initial estimate")
    return TriangulationResult(X[0], diverged=bool(diverged[0]))


def reprojection_rms(observations: Sequence[Tuple[CameraParams, Sequence[float]]], X) -> float:
    """RMS pixel distance between observations and the projections of ``X``."""
    X = np.asarray(X, dtype=float).reshape(1, 3)
    errors = [np.linalg.norm(project_points(cam, X)[0] - np.asarray(px, dtype=float)) for cam, px in observations]
    return float(np.sqrt(np.mean(np.square(errors))))
