"""Pinhole camera with a rigid world-to-camera transform."""

from __future__ import annotations

import numpy as np


class Camera:
    """Intrinsics + extrinsics for one view.

    ``world_to_camera`` is a 4x4 rigid transform; the rotation block must be
    orthonormal (right-handed) and focal lengths positive.
    """

    def __init__(self, world_to_camera, fx, fy, cx, cy, height, width):
        w2c = np.asarray(world_to_camera, dtype=np.float64)
        if w2c.shape != (4, 4):
            raise ValueError(f"world_to_camera must be 4x4, got {w2c.shape}")
        R = w2c[:3, :3]
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-9:
            raise ValueError("world_to_camera rotation block is not orthonormal")
        if np.linalg.det(R) < 0:
            raise ValueError("world_to_camera rotation has determinant -1 "
                             "(reflection, not a rigid transform)")
        if np.abs(w2c[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > 1e-12:
            raise ValueError("world_to_camera bottom row must be [0,0,0,1]")
        if fx <= 0 or fy <= 0:
            raise ValueError(f"focal lengths must be positive, got ({fx}, {fy})")
        if height < 1 or width < 1:
            raise ValueError(f"image size must be positive, got {height}x{width}")
        self.world_to_camera = w2c
        self.fx = float(fx)
        self.fy = float(fy)
        self.cx = float(cx)
        self.cy = float(cy)
        self.height = int(height)
        self.width = int(width)

    @property
    def rotation(self) -> np.ndarray:
        return self.world_to_camera[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.world_to_camera[:3, 3]

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    @classmethod
    def identity(cls, height, width, focal=None):
        """Axis-aligned camera at the origin looking down +z."""
        f = focal if focal is not None else float(max(height, width))
        return cls(np.eye(4), f, f, width / 2.0, height / 2.0, height, width)

    def to_dict(self) -> dict:
        return {
            "world_to_camera": self.world_to_camera.tolist(),
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "height": self.height, "width": self.width,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        return cls(d["world_to_camera"], d["fx"], d["fy"], d["cx"], d["cy"],
                   d["height"], d["width"])
