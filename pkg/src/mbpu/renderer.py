"""Differentiable orthographic depth renderer for unit-ball point clouds.

Each camera looks at the origin along ``view``.  A point projects to
``u = p.right``, ``v = p.up`` and depth ``(p.view + 1) / 2``.  Points are
splatted into a ``(H, W, D)`` grid with a separable Gaussian of std ``sigma``
cells, truncated at ``3 sigma`` per axis; occupancy is ``1 - exp(-density)``.
Along each pixel ray the termination probabilities are
``r_d = o_d * prod_{j<d} (1 - o_j)`` and the pixel stores
``sum_d r_d depth_d + (1 - sum_d r_d) * background``.

Images are ``(H, W)`` arrays; row 0 is the top of the image.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Op, Tensor

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))
_BALL_TOL = 1e-9


@dataclass(frozen=True)
class RenderConfig:
    width: int = 32
    height: int = 32
    depth_bins: int = 64
    sigma: float = 1.0
    background: float = 1.0

    def __post_init__(self):
        if min(self.width, self.height) < 1 or self.depth_bins < 2:
            raise ValueError("render grid needs width, height >= 1 and depth_bins >= 2")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class CameraRig:
    views: np.ndarray  # (V, 3)
    ups: np.ndarray
    rights: np.ndarray

    def __len__(self):
        return len(self.views)

    def subset(self, idx) -> "CameraRig":
        idx = np.atleast_1d(idx)
        return CameraRig(self.views[idx], self.ups[idx], self.rights[idx])


def camera_triad(view) -> tuple:
    """``(right, up, view)`` forming a right-handed orthonormal frame."""
    v = np.asarray(view, dtype=np.float64)
    v = v / np.linalg.norm(v)
    ref = np.array([0.0, 0.0, 1.0])
    if abs(v @ ref) > 1 - 1e-9:
        ref = np.array([1.0, 0.0, 0.0])
    up = ref - (ref @ v) * v
    up /= np.linalg.norm(up)
    right = np.cross(up, v)
    return right, up, v


def make_camera_rig(n_views: int = 32) -> CameraRig:
    """Cameras on a Fibonacci-sphere lattice, each looking at the origin."""
    if n_views < 1:
        raise ValueError("n_views must be >= 1")
    i = np.arange(n_views)
    z = 1.0 - (2.0 * i + 1.0) / n_views
    r = np.sqrt(1.0 - z * z)
    phi = i * _GOLDEN_ANGLE
    positions = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    triads = [camera_triad(-p) for p in positions]
    rights, ups, views = (np.array(a) for a in zip(*triads))
    return CameraRig(views=views, ups=ups, rights=rights)


# ---------------------------------------------------------------------------
# render op


def _axis_weights(coord, n, sigma):
    cells = np.arange(n, dtype=np.float64)
    off = cells[None, :] - coord[:, None]
    mask = np.abs(off) <= 3.0 * sigma
    g = np.where(mask, np.exp(-0.5 * (off / sigma) ** 2), 0.0)
    return g, off, mask


def _project(pts, right, up, view, cfg):
    u = pts @ right
    v = pts @ up
    z = 0.5 * (pts @ view + 1.0)
    xp = 0.5 * (u + 1.0) * cfg.width - 0.5
    yp = 0.5 * (1.0 - v) * cfg.height - 0.5
    zp = z * cfg.depth_bins - 0.5
    return xp, yp, zp


def _bin_depths(cfg):
    return (np.arange(cfg.depth_bins) + 0.5) / cfg.depth_bins


def _splat(pts, right, up, view, cfg):
    xp, yp, zp = _project(pts, right, up, view, cfg)
    gx, ox, mx = _axis_weights(xp, cfg.width, cfg.sigma)
    gy, oy, my = _axis_weights(yp, cfg.height, cfg.sigma)
    gz, oz, mz = _axis_weights(zp, cfg.depth_bins, cfg.sigma)
    n = len(pts)
    kxy = (gy[:, :, None] * gx[:, None, :]).reshape(n, -1)
    density = (kxy.T @ gz).reshape(cfg.height, cfg.width, cfg.depth_bins)
    return density, (gx, gy, gz, ox, oy, oz, kxy), (mx, my, mz)


def composite(density, cfg):
    """Front-to-back compositing of one density grid.  Returns ``(image, r)``."""
    occ = 1.0 - np.exp(-density)
    trans = np.cumprod(1.0 - occ, axis=-1)
    before = np.concatenate([np.ones(density.shape[:-1] + (1,)), trans[..., :-1]], axis=-1)
    r = occ * before
    image = (r * _bin_depths(cfg)).sum(axis=-1) + (1.0 - r.sum(axis=-1)) * cfg.background
    return image, r


def _composite_grad(density, cfg):
    """d image / d density for every cell, shape ``(H, W, D)``."""
    z = _bin_depths(cfg)
    cum = np.cumsum(density, axis=-1)
    T_next = np.exp(-cum)  # T_{d+1}
    T_cur = np.exp(-(cum - density))  # T_d
    T_end = T_next[..., -1:]
    # image = sum_d (T_d - T_{d+1}) z_d + T_D * bg
    a = np.cumsum((T_next * z)[..., ::-1], axis=-1)[..., ::-1]  # sum_{d>=k} T_{d+1} z_d
    b = np.cumsum((T_cur * z)[..., ::-1], axis=-1)[..., ::-1] - T_cur * z  # sum_{d>k} T_d z_d
    return a - b - T_end * cfg.background


class RenderViews(Op):
    name = "render"

    @staticmethod
    def forward(pts, rights, ups, views, cfg):
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"render: expected (n, 3) points, got {pts.shape}")
        if len(pts) and np.sqrt((pts * pts).sum(axis=1)).max() > 1.0 + _BALL_TOL:
            raise ValueError("render: points must lie in the unit ball; normalize the cloud first")
        V = len(views)
        images = np.empty((V, cfg.height, cfg.width))
        saved = []
        for i in range(V):
            if len(pts) == 0:
                images[i] = cfg.background
                saved.append(None)
                continue
            density, parts, masks = _splat(pts, rights[i], ups[i], views[i], cfg)
            images[i], _ = composite(density, cfg)
            saved.append((density, parts, masks))
        return images, saved

    @staticmethod
    def backward(g, saved, pts, rights, ups, views, cfg):
        gp = np.zeros_like(pts)
        n = len(pts)
        s2 = cfg.sigma**2
        for i, item in enumerate(saved):
            if item is None:
                continue
            density, (gx, gy, gz, ox, oy, oz, kxy), _ = item
            grho = (g[i][:, :, None] * _composite_grad(density, cfg)).reshape(-1, cfg.depth_bins)
            ggz = kxy @ grho
            m = (gz @ grho.T).reshape(n, cfg.height, cfg.width)
            ggx = np.einsum("pyx,py->px", m, gy)
            ggy = np.einsum("pyx,px->py", m, gx)
            gxp = (ggx * gx * ox).sum(axis=1) / s2
            gyp = (ggy * gy * oy).sum(axis=1) / s2
            gzp = (ggz * gz * oz).sum(axis=1) / s2
            gu = gxp * 0.5 * cfg.width
            gv = -gyp * 0.5 * cfg.height
            gdot = gzp * cfg.depth_bins * 0.5
            gp += np.outer(gu, rights[i]) + np.outer(gv, ups[i]) + np.outer(gdot, views[i])
        return (gp, None, None, None)

    @staticmethod
    def branch(saved, out):
        parts = [np.concatenate([m.reshape(-1) for m in item[2]]) for item in saved if item is not None]
        return np.concatenate(parts) if parts else None


def render_views(points, rig: CameraRig, cfg: RenderConfig = RenderConfig()) -> Tensor:
    """Depth images of ``points`` for every camera of ``rig``: ``(V, H, W)``."""
    pts = points if isinstance(points, Tensor) else Tensor(np.asarray(points, np.float64).reshape(-1, 3))
    return RenderViews.apply(pts, Tensor(rig.rights), Tensor(rig.ups), Tensor(rig.views), cfg=cfg)


def render_depth(points, pose, cfg: RenderConfig = RenderConfig()) -> Tensor:
    """Single-camera render.  ``pose`` is ``(right, up, view)`` or a one-camera rig."""
    if isinstance(pose, CameraRig):
        rig = pose
    else:
        right, up, view = pose
        rig = CameraRig(np.atleast_2d(view), np.atleast_2d(up), np.atleast_2d(right))
    return ad.reshape(render_views(points, rig, cfg), (cfg.height, cfg.width))


def termination_probabilities(points, pose, cfg: RenderConfig = RenderConfig()) -> np.ndarray:
    """Per-ray termination probabilities ``(H, W, D)`` of a single camera."""
    right, up, view = pose
    pts = np.asarray(points, np.float64).reshape(-1, 3)
    if len(pts) == 0:
        return np.zeros((cfg.height, cfg.width, cfg.depth_bins))
    density, _, _ = _splat(pts, right, up, view, cfg)
    return composite(density, cfg)[1]


def view_loss(rendered, reference) -> Tensor:
    """Sum over cameras and pixels of absolute depth differences."""
    rendered = ad.as_tensor(rendered)
    reference = ad.as_tensor(reference)
    if rendered.shape != reference.shape:
        raise ValueError(f"view_loss: image stacks differ {rendered.shape} vs {reference.shape}")
    return ad.sum_(ad.absolute(ad.sub(rendered, reference)))


# ---------------------------------------------------------------------------
# PFM


def write_pfm(path, image) -> None:
    """Grayscale little-endian PFM; rows are stored bottom-to-top."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("write_pfm expects a 2D image")
    h, w = img.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    body = np.ascontiguousarray(img[::-1]).astype("<f4").tobytes()
    with open(os.fspath(path), "wb") as fh:
        fh.write(header + body)


def read_pfm(path) -> np.ndarray:
    with open(os.fspath(path), "rb") as fh:
        data = fh.read()
    lines = data.split(b"\n", 3)
    if len(lines) < 4 or lines[0].strip() != b"Pf":
        raise ValueError(f"{path}: not a grayscale PFM file")
    w, h = (int(t) for t in lines[1].split())
    scale = float(lines[2])
    dtype = "<f4" if scale < 0 else ">f4"
    body = np.frombuffer(lines[3], dtype=dtype, count=w * h)
    return body.reshape(h, w)[::-1].astype(np.float64)
