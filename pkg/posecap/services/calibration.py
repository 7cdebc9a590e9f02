"""
Rig calibration: planar-board initialization and bundle adjustment.

The world frame is the board frame of the shared anchor placement (view 0 of
every camera). Bundle adjustment then refines all cameras and world points
with the first camera's pose held fixed.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from posecap.core.config import settings
from posecap.core.errors import ConfigurationError, DegeneracyError
from posecap.core.types import CameraParams, CameraRig
from posecap.schemas.camera import ObservationRecord, PlanarCameraRecord
from posecap.schemas.pipeline import BundleAdjustMask
from posecap.services.geometry import triangulate_batch

logger = logging.getLogger(__name__)

# rvec(3) t(3) fx fy cx cy k1 k2
N_CAMERA_PARAMS = 12
_POSE = slice(0, 6)
_INTRINSICS = slice(6, 10)
_DISTORTION = slice(10, 12)
MIN_OBSERVATIONS_PER_CAMERA = 6


@dataclass(frozen=True)
class ZhangEstimate:
    """Linear intrinsics and per-view board-to-camera poses."""
    fx: float
    fy: float
    cx: float
    cy: float
    rotations: Tuple[np.ndarray, ...]
    translations: Tuple[np.ndarray, ...]

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def camera(self, camera_id: str, view: int = 0, image_size=None) -> CameraParams:
        """Camera whose world frame is the board frame of ``view``."""
        return CameraParams(
            camera_id=camera_id,
            fx=self.fx, fy=self.fy, cx=self.cx, cy=self.cy,
            R=self.rotations[view], t=self.translations[view],
            image_size=image_size or settings.DEFAULT_IMAGE_SIZE,
        )


@dataclass(frozen=True)
class BundleAdjustResult:
    rig: CameraRig
    points: Dict[str, np.ndarray]
    mean_error: float
    initial_error: float
    converged: bool
    n_evaluations: int = 0


@dataclass(frozen=True)
class CalibrationResult:
    rig: CameraRig
    points: Dict[str, np.ndarray]
    mean_error: float
    initial_error: float
    converged: bool
    initial_rig: Optional[CameraRig] = field(default=None, compare=False)


# ─── Linear initialization ───────────────────────────────────────────────────

def _normalizing_transform(points: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to the origin with mean distance sqrt(2)."""
    center = points.mean(axis=0)
    spread = np.mean(np.linalg.norm(points - center, axis=1))
    if not spread > 0:
        raise DegeneracyError("all points coincide")
    s = np.sqrt(2.0) / spread
    return np.array([[s, 0.0, -s * center[0]], [0.0, s, -s * center[1]], [0.0, 0.0, 1.0]])


def _apply(T: np.ndarray, points: np.ndarray) -> np.ndarray:
    return points @ T[:2, :2].T + T[:2, 2]


def homography_dlt(board: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    """
    Normalized DLT homography mapping board-plane points to pixels.

    Args:
        board: (N, 2) board coordinates in meters
        pixels: (N, 2) image coordinates

    Returns:
        np.ndarray: 3x3 homography with ``H[2, 2] == 1``

    Raises:
        DegeneracyError: With fewer than four correspondences or a rank-deficient system
    """
    board = np.asarray(board, dtype=float)
    pixels = np.asarray(pixels, dtype=float)
    if len(board) < 4 or len(board) != len(pixels):
        raise DegeneracyError(f"a homography needs at least 4 correspondences, got {len(board)}")
    Tb = _normalizing_transform(board)
    Tp = _normalizing_transform(pixels)
    b = _apply(Tb, board)
    p = _apply(Tp, pixels)
    n = len(b)
    A = np.zeros((2 * n, 9))
    A[0::2, 0:2] = b
    A[0::2, 2] = 1.0
    A[0::2, 6:8] = -p[:, 0:1] * b
    A[0::2, 8] = -p[:, 0]
    A[1::2, 3:5] = b
    A[1::2, 5] = 1.0
    A[1::2, 6:8] = -p[:, 1:2] * b
    A[1::2, 8] = -p[:, 1]
    _, s, vt = np.linalg.svd(A)
    if s[7] <= 1e-12 * s[0]:
        raise DegeneracyError("board points are collinear")
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.solve(Tp, Hn @ Tb)
    return H / H[2, 2]


def _conic_row(H: np.ndarray, i: int, j: int) -> np.ndarray:
    """Coefficients of ``h_i^T B h_j`` in b = (B11, B22, B13, B23, B33) for zero skew."""
    hi, hj = H[:, i], H[:, j]
    return np.array([
        hi[0] * hj[0],
        hi[1] * hj[1],
        hi[2] * hj[0] + hi[0] * hj[2],
        hi[2] * hj[1] + hi[1] * hj[2],
        hi[2] * hj[2],
    ])


def _pose_from_homography(K_inv: np.ndarray, H: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    h1, h2, h3 = K_inv @ H[:, 0], K_inv @ H[:, 1], K_inv @ H[:, 2]
    scale = 1.0 / np.linalg.norm(h1)
    r1, r2, t = scale * h1, scale * h2, scale * h3
    if t[2] < 0:
        r1, r2, t = -r1, -r2, -t
    Q = np.column_stack([r1, r2, np.cross(r1, r2)])
    U, _, Vt = np.linalg.svd(Q)
    R = U @ np.diag([1.0, 1.0, np.linalg.det(U @ Vt)]) @ Vt
    return R, t


def zhang_init(views: Sequence[np.ndarray], camera_id: str = "camera") -> ZhangEstimate:
    """
    Zero-skew intrinsics and per-view extrinsics from planar-board views.

    Args:
        views: Per view an (N, 4) array of ``[board_x_m, board_y_m, pixel_u, pixel_v]``
        camera_id: Used in error messages

    Returns:
        ZhangEstimate: Intrinsics plus one board-to-camera pose per view

    Raises:
        DegeneracyError: Fewer than 3 views, a bad view (named by index) or a
            rank-deficient conic system
    """
    if len(views) < 3:
        raise DegeneracyError(f"camera {camera_id}: intrinsic initialization needs at least 3 views, got {len(views)}")
    views = [np.asarray(v, dtype=float).reshape(-1, 4) for v in views]
    T = _normalizing_transform(np.concatenate([v[:, 2:] for v in views]))

    homographies = []
    for i, view in enumerate(views):
        try:
            homographies.append(homography_dlt(view[:, :2], view[:, 2:]))
        except DegeneracyError as e:
            raise DegeneracyError(f"camera {camera_id}, view {i}: {e}")

    V = []
    for H in homographies:
        Hn = T @ H
        V.append(_conic_row(Hn, 0, 1))
        V.append(_conic_row(Hn, 0, 0) - _conic_row(Hn, 1, 1))
    _, s, vt = np.linalg.svd(np.array(V))
    if s[-2] <= 1e-10 * s[0]:
        raise DegeneracyError(f"camera {camera_id}: board orientations do not constrain the intrinsics")
    B11, B22, B13, B23, B33 = vt[-1]
    if B11 * B22 <= 0:
        raise DegeneracyError(f"camera {camera_id}: conic estimate is not positive definite")
    cx_n = -B13 / B11
    cy_n = -B23 / B22
    lam = B33 - B13 ** 2 / B11 - B23 ** 2 / B22
    if lam / B11 <= 0 or lam / B22 <= 0:
        raise DegeneracyError(f"camera {camera_id}: conic estimate is not positive definite")

    # undo the pixel normalization: K_n = T K
    scale = T[0, 0]
    fx = np.sqrt(lam / B11) / scale
    fy = np.sqrt(lam / B22) / scale
    cx = (cx_n - T[0, 2]) / scale
    cy = (cy_n - T[1, 2]) / scale

    K_inv = np.linalg.inv(np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]]))
    poses = [_pose_from_homography(K_inv, H) for H in homographies]
    logger.info(f"Camera {camera_id}: linear intrinsics fx={fx:.2f} fy={fy:.2f} cx={cx:.2f} cy={cy:.2f}")
    return ZhangEstimate(
        float(fx), float(fy), float(cx), float(cy),
        tuple(R for R, _ in poses), tuple(t for _, t in poses),
    )


# ─── Bundle adjustment ───────────────────────────────────────────────────────

def _pack_camera(cam: CameraParams) -> np.ndarray:
    rvec = Rotation.from_matrix(cam.R).as_rotvec()
    return np.concatenate([rvec, cam.t, [cam.fx, cam.fy, cam.cx, cam.cy, cam.k1, cam.k2]])


def _unpack_camera(template: CameraParams, params: np.ndarray) -> CameraParams:
    R = Rotation.from_rotvec(params[0:3]).as_matrix()
    return CameraParams(
        camera_id=template.camera_id,
        fx=float(params[6]), fy=float(params[7]), cx=float(params[8]), cy=float(params[9]),
        R=R, t=params[3:6], k1=float(params[10]), k2=float(params[11]),
        image_size=template.image_size,
    )


def _free_mask(n_cameras: int, n_points: int, mask: BundleAdjustMask) -> np.ndarray:
    cam_free = np.ones((n_cameras, N_CAMERA_PARAMS), dtype=bool)
    cam_free[0, _POSE] = False
    if mask.intrinsics:
        cam_free[:, _INTRINSICS] = False
    if mask.distortion:
        cam_free[:, _DISTORTION] = False
    point_free = np.full((n_points, 3), not mask.points)
    return np.concatenate([cam_free.ravel(), point_free.ravel()])


def _project_all(full: np.ndarray, n_cameras: int, cam_idx: np.ndarray, pt_idx: np.ndarray) -> np.ndarray:
    cams = full[: n_cameras * N_CAMERA_PARAMS].reshape(n_cameras, N_CAMERA_PARAMS)
    points = full[n_cameras * N_CAMERA_PARAMS:].reshape(-1, 3)
    R = Rotation.from_rotvec(cams[:, 0:3]).as_matrix()
    Xc = np.einsum("oij,oj->oi", R[cam_idx], points[pt_idx]) + cams[cam_idx, 3:6]
    xy = Xc[:, :2] / Xc[:, 2:3]
    r2 = np.sum(xy ** 2, axis=1)
    c = cams[cam_idx]
    radial = 1.0 + c[:, 10] * r2 + c[:, 11] * r2 ** 2
    xy = xy * radial[:, None]
    return np.column_stack([c[:, 6] * xy[:, 0] + c[:, 8], c[:, 7] * xy[:, 1] + c[:, 9]])


def bundle_adjust(
    rig: CameraRig,
    observations: Sequence[ObservationRecord],
    points: Mapping[str, np.ndarray],
    mask: BundleAdjustMask | None = None,
    max_iterations: int | None = None,
) -> BundleAdjustResult:
    """
    Levenberg-Marquardt refinement of cameras and world points.

    Residuals are pixel differences; the reported error is the mean over
    observations of the residual norm. The first camera's pose is the gauge
    and never moves; ``mask`` holds further parameter blocks fixed.

    Args:
        rig: Initial cameras
        observations: Pixel observations referencing rig cameras and point ids
        points: Initial world point per point id
        mask: Parameter blocks to hold fixed
        max_iterations: Iteration budget; zero returns the input unchanged

    Returns:
        BundleAdjustResult: Refined rig and points, mean errors before and after, convergence flag

    Raises:
        ConfigurationError: Unknown camera or point ids, or a camera with fewer than 6 observations
    """
    mask = mask or BundleAdjustMask()
    max_iterations = settings.LM_MAX_ITERATIONS if max_iterations is None else max_iterations
    point_ids = list(points)
    point_index = {pid: i for i, pid in enumerate(point_ids)}
    cam_idx = np.array([rig.index(o.camera_id) for o in observations], dtype=int)
    try:
        pt_idx = np.array([point_index[o.point_id] for o in observations], dtype=int)
    except KeyError as e:
        raise ConfigurationError(f"observation references unknown point {e}")
    counts = np.bincount(cam_idx, minlength=len(rig))
    for cam, count in zip(rig, counts):
        if count < MIN_OBSERVATIONS_PER_CAMERA:
            raise ConfigurationError(
                f"camera {cam.camera_id} has {count} observations; bundle adjustment needs {MIN_OBSERVATIONS_PER_CAMERA}"
            )
    observed = np.array([[o.u, o.v] for o in observations], dtype=float)

    n_cameras = len(rig)
    full0 = np.concatenate(
        [np.concatenate([_pack_camera(cam) for cam in rig]),
         np.concatenate([np.asarray(points[pid], dtype=float).reshape(3) for pid in point_ids])]
    )
    free = _free_mask(n_cameras, len(point_ids), mask)

    def residuals(x: np.ndarray) -> np.ndarray:
        full = full0.copy()
        full[free] = x
        return (_project_all(full, n_cameras, cam_idx, pt_idx) - observed).ravel()

    def mean_error(x: np.ndarray) -> float:
        return float(np.mean(np.linalg.norm(residuals(x).reshape(-1, 2), axis=1)))

    x0 = full0[free]
    initial_error = mean_error(x0)
    if max_iterations == 0 or not free.any():
        logger.info(f"Bundle adjustment skipped; mean reprojection error {initial_error:.6f} px")
        return BundleAdjustResult(rig, {pid: np.asarray(points[pid], dtype=float) for pid in point_ids},
                                  initial_error, initial_error, converged=False)

    n_residuals = 2 * len(observations)
    method = "lm" if n_residuals >= x0.size else "trf"
    result = least_squares(
        residuals, x0,
        method=method,
        x_scale="jac",
        ftol=settings.LM_RELATIVE_TOLERANCE,
        xtol=1e-15,
        gtol=1e-15,
        max_nfev=max_iterations * (x0.size + 1),
    )
    # MINPACK returns its best iterate; keep the input if it somehow did worse
    x = result.x if np.sum(result.fun ** 2) <= np.sum(residuals(x0) ** 2) else x0
    full = full0.copy()
    full[free] = x
    cams = full[: n_cameras * N_CAMERA_PARAMS].reshape(n_cameras, N_CAMERA_PARAMS)
    refined_points = full[n_cameras * N_CAMERA_PARAMS:].reshape(-1, 3)
    refined_rig = CameraRig(tuple(_unpack_camera(cam, cams[i]) for i, cam in enumerate(rig)))
    error = mean_error(x)
    converged = bool(result.status > 0)
    if not converged:
        logger.warning(f"Bundle adjustment stopped at the evaluation budget ({result.nfev} evaluations)")
    logger.info(
        f"Bundle adjustment ({method}): mean reprojection error {initial_error:.6f} -> {error:.6g} px "
        f"over {len(observations)} observations"
    )
    return BundleAdjustResult(
        refined_rig,
        {pid: refined_points[i].copy() for i, pid in enumerate(point_ids)},
        error, initial_error, converged, int(result.nfev),
    )


# ─── Full calibration ────────────────────────────────────────────────────────

def _anchor_observations(rig: CameraRig, planar: Mapping[str, PlanarCameraRecord]) -> List[ObservationRecord]:
    """Board corners of the shared anchor view as observations keyed by board position."""
    records = []
    for cam in rig:
        for bx, by, u, v in planar[cam.camera_id].views[0]:
            records.append(ObservationRecord(camera_id=cam.camera_id, point_id=f"anchor:{bx:.6f},{by:.6f}", u=u, v=v))
    return records


def initial_points(rig: CameraRig, observations: Sequence[ObservationRecord]) -> Dict[str, np.ndarray]:
    """Triangulate every point id seen by at least two cameras."""
    by_point: Dict[str, Dict[int, Tuple[float, float]]] = {}
    for o in observations:
        by_point.setdefault(o.point_id, {})[rig.index(o.camera_id)] = (o.u, o.v)
    usable = [pid for pid, seen in by_point.items() if len(seen) >= 2]
    skipped = len(by_point) - len(usable)
    if skipped:
        logger.warning(f"{skipped} points are seen by fewer than 2 cameras and are left out")
    if not usable:
        return {}
    pixels = np.zeros((len(usable), len(rig), 2))
    mask = np.zeros((len(usable), len(rig)), dtype=bool)
    for row, pid in enumerate(usable):
        for k, px in by_point[pid].items():
            pixels[row, k] = px
            mask[row, k] = True
    out = triangulate_batch(rig.cameras, pixels, mask)
    return {pid: out.points[row] for row, pid in enumerate(usable)}


def calibrate_rig(
    planar: Mapping[str, PlanarCameraRecord],
    observations: Optional[Sequence[ObservationRecord]] = None,
    mask: BundleAdjustMask | None = None,
    max_iterations: int | None = None,
) -> CalibrationResult:
    """
    Initialize every camera from its planar views, then bundle adjust the rig.

    Without explicit observations the anchor-view board corners are used.
    """
    cameras = []
    for camera_id, record in planar.items():
        estimate = zhang_init(record.views, camera_id)
        cameras.append(estimate.camera(camera_id, view=0, image_size=record.image_size))
    initial_rig = CameraRig(tuple(cameras))

    if observations is None:
        observations = _anchor_observations(initial_rig, planar)
    points = initial_points(initial_rig, observations)
    kept = [o for o in observations if o.point_id in points]
    result = bundle_adjust(initial_rig, kept, points, mask, max_iterations)
    logger.info(f"Calibrated {len(result.rig)} cameras; mean reprojection error {result.mean_error:.6g} px")
    return CalibrationResult(
        result.rig, result.points, result.mean_error, result.initial_error, result.converged, initial_rig
    )
