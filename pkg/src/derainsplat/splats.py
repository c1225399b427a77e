"""Gaussian scene representation and differentiable front-to-back rasterizer.

The scene is a set of anisotropic Gaussians (position, unit-quaternion
rotation, log-scales, opacity logit, per-channel SH color coefficients).
Rendering projects each Gaussian to an image-plane mean and 2x2 covariance,
sorts by camera depth, and alpha-composites front to back:

    weight_i = alpha_i * exp(-0.5 * d^T inv(cov2d_i) d)
    C        = sum_i color_i * weight_i * prod_{j<i} (1 - weight_j)

Compositing constants (shared with the flatland path and any reference
evaluation): a contribution is skipped once the running transmittance drops
below ``TRANSMITTANCE_CUTOFF``, and a Gaussian influences only pixels within
``MAHALANOBIS_CUTOFF`` standard deviations of its center.

A flatland mode parameterizes splats directly in the image plane (2D mean,
rotation angle, log-scales, plain RGB); it shares every line of compositing
and backward code with the 3D path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import autodiff as ad
from .autodiff import Tensor
from .camera import Camera

TRANSMITTANCE_CUTOFF = 1e-4
MAHALANOBIS_CUTOFF = 3.0
COV2D_FLOOR = 0.3  # px^2, added after projection as a low-pass guard

_SH_C0 = 0.28209479177387814
_SH_C1 = 0.4886025119029199
_SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
          -1.0925484305920792, 0.5462742152960396)


def sh_coeff_count(degree: int) -> int:
    return (degree + 1) ** 2


# ---------------------------------------------------------------------------
# scene containers
# ---------------------------------------------------------------------------

@dataclass
class GaussianSet:
    """Learnable 3D scene: all fields are Tensors with requires_grad set."""
    mu: Tensor            # (N,3) world positions
    rot: Tensor           # (N,4) quaternions (w,x,y,z), renormalized after steps
    log_scale: Tensor     # (N,3)
    opacity_logit: Tensor  # (N,)
    sh: Tensor            # (N,3,K) per-channel SH coefficients
    sh_degree: int

    def __len__(self):
        return self.mu.data.shape[0]

    def parameters(self) -> dict:
        return {"mu": self.mu, "rot": self.rot, "log_scale": self.log_scale,
                "opacity_logit": self.opacity_logit, "sh": self.sh}

    def renormalize_rotations(self):
        q = self.rot.data
        q /= np.linalg.norm(q, axis=1, keepdims=True)


@dataclass
class FlatSplats:
    """Flatland scene: splats live directly in the image plane."""
    mean2d: Tensor        # (N,2) pixel coords (x,y)
    rot_angle: Tensor     # (N,) radians
    log_scale: Tensor     # (N,2)
    opacity_logit: Tensor  # (N,)
    color: Tensor         # (N,3)
    depth: np.ndarray = None  # (N,) compositing order key; defaults to index

    def __post_init__(self):
        if self.depth is None:
            self.depth = np.arange(self.mean2d.data.shape[0], dtype=np.float64)

    def __len__(self):
        return self.mean2d.data.shape[0]

    def parameters(self) -> dict:
        return {"mean2d": self.mean2d, "rot_angle": self.rot_angle,
                "log_scale": self.log_scale,
                "opacity_logit": self.opacity_logit, "color": self.color}


@dataclass
class RenderOutput:
    color: Tensor          # (H,W,3)
    alpha_accum: Tensor    # (H,W), 1 - final transmittance
    n_culled: int = 0
    kept: np.ndarray = field(default=None)


# ---------------------------------------------------------------------------
# covariance and projection
# ---------------------------------------------------------------------------

def quat_to_rotmat(q: Tensor) -> Tensor:
    """(N,4) unit quaternions (w,x,y,z) -> (N,3,3) rotation matrices."""
    q = ad.astensor(q)
    norm = ad.tsqrt(ad.tsum(ad.mul(q, q), axis=1, keepdims=True))
    qn = ad.div(q, ad.expand(norm, q.shape))
    w, x, y, z = (qn[:, 0], qn[:, 1], qn[:, 2], qn[:, 3])
    two = 2.0
    r00 = 1.0 - two * (ad.mul(y, y) + ad.mul(z, z))
    r01 = two * (ad.mul(x, y) - ad.mul(w, z))
    r02 = two * (ad.mul(x, z) + ad.mul(w, y))
    r10 = two * (ad.mul(x, y) + ad.mul(w, z))
    r11 = 1.0 - two * (ad.mul(x, x) + ad.mul(z, z))
    r12 = two * (ad.mul(y, z) - ad.mul(w, x))
    r20 = two * (ad.mul(x, z) - ad.mul(w, y))
    r21 = two * (ad.mul(y, z) + ad.mul(w, x))
    r22 = 1.0 - two * (ad.mul(x, x) + ad.mul(y, y))
    rows = [ad.stack([r00, r01, r02], axis=1),
            ad.stack([r10, r11, r12], axis=1),
            ad.stack([r20, r21, r22], axis=1)]
    return ad.stack(rows, axis=1)


def covariance3d(rot, scale) -> Tensor:
    """R diag(scale^2) R^T from a quaternion and positive per-axis scales.

    Accepts a single (4,)/(3,) pair or batched (N,4)/(N,3).
    """
    rot, scale = ad.astensor(rot), ad.astensor(scale)
    single = rot.data.ndim == 1
    if single:
        rot = ad.reshape(rot, (1, 4))
        scale = ad.reshape(scale, (1, 3))
    if np.any(scale.data <= 0):
        raise ValueError("covariance3d: scales must be strictly positive")
    R = quat_to_rotmat(rot)
    s2 = ad.mul(scale, scale)                       # (N,3)
    s2e = ad.expand(ad.reshape(s2, (len(s2.data), 1, 3)), R.shape)
    cov = ad.matmul(ad.mul(R, s2e), ad.transpose(R, (0, 2, 1)))
    return ad.reshape(cov, (3, 3)) if single else cov


@dataclass
class ProjectedSplats:
    mean2d: Tensor      # (M,2)
    cov2d: Tensor       # (M,2,2), floor already added
    depth: np.ndarray   # (M,)
    kept: np.ndarray    # (M,) indices into the original set
    n_culled: int = 0


def project_gaussians(mu: Tensor, cov3d: Tensor, cam: Camera,
                      near: float = 0.01) -> ProjectedSplats:
    """Project means and covariances to the image plane.

    Uses the Jacobian of the pinhole projection at each camera-space mean;
    the projected covariance gets a ``COV2D_FLOOR`` diagonal guard.  Gaussians
    behind the near plane are culled (reported via ``n_culled``, not raised).
    """
    mu, cov3d = ad.astensor(mu), ad.astensor(cov3d)
    n = mu.data.shape[0]
    Rc = cam.rotation
    tc = cam.translation
    z_all = mu.data @ Rc[2] + tc[2]
    kept = np.nonzero(z_all > near)[0]
    n_culled = n - kept.size
    if kept.size == 0:
        return ProjectedSplats(Tensor(np.zeros((0, 2))), Tensor(np.zeros((0, 2, 2))),
                               np.zeros(0), kept, n_culled)

    mu_k = ad.take(mu, kept)
    cov_k = ad.take(cov3d, kept)
    m = len(kept)

    Rt = Tensor(Rc.T.copy())
    tvec = Tensor(tc.copy())
    mean_cam = ad.add(ad.matmul(mu_k, Rt), ad.expand(ad.reshape(tvec, (1, 3)),
                                                     (m, 3)))
    x, y, z = mean_cam[:, 0], mean_cam[:, 1], mean_cam[:, 2]
    inv_z = ad.div(1.0, z)
    fx_z = ad.mul(inv_z, cam.fx)
    fy_z = ad.mul(inv_z, cam.fy)
    x_z = ad.mul(x, inv_z)
    y_z = ad.mul(y, inv_z)
    zeros = Tensor(np.zeros(m))
    j_row0 = ad.stack([fx_z, zeros, ad.neg(ad.mul(fx_z, x_z))], axis=1)
    j_row1 = ad.stack([zeros, fy_z, ad.neg(ad.mul(fy_z, y_z))], axis=1)
    J = ad.stack([j_row0, j_row1], axis=1)           # (M,2,3)

    Rb = ad.expand(ad.reshape(Tensor(Rc.copy()), (1, 3, 3)), (m, 3, 3))
    cov_cam = ad.matmul(ad.matmul(Rb, cov_k), ad.transpose(Rb, (0, 2, 1)))
    cov2d = ad.matmul(ad.matmul(J, cov_cam), ad.transpose(J, (0, 2, 1)))
    floor = Tensor(np.broadcast_to(COV2D_FLOOR * np.eye(2), (m, 2, 2)).copy())
    cov2d = ad.add(cov2d, floor)

    mean2d = ad.stack([ad.add(ad.mul(x_z, cam.fx), cam.cx),
                       ad.add(ad.mul(y_z, cam.fy), cam.cy)], axis=1)
    return ProjectedSplats(mean2d, cov2d, z_all[kept], kept, n_culled)


def sh_eval(sh: Tensor, view_dir, degree: int) -> Tensor:
    """Contract SH coefficients (N,3,K) against the real SH basis.

    ``view_dir`` is (N,3) unit vectors (ignored for degree 0).  Degree is
    capped at 2.
    """
    sh = ad.astensor(sh)
    if degree not in (0, 1, 2):
        raise ValueError(f"sh_eval: degree must be 0, 1 or 2, got {degree}")
    n = sh.data.shape[0]
    need = sh_coeff_count(degree)
    if sh.data.shape[2] < need:
        raise ValueError(f"sh_eval: degree {degree} needs {need} coefficients, "
                         f"got {sh.data.shape[2]}")
    out = ad.mul(sh[:, :, 0], _SH_C0)
    if degree == 0:
        return out

    d = ad.astensor(view_dir)
    norms = np.linalg.norm(d.data, axis=1)
    if np.abs(norms - 1.0).max() > 1e-6:
        raise ValueError("sh_eval: view directions must be unit length")
    x, y, z = d[:, 0], d[:, 1], d[:, 2]

    def band(coeff_idx, basis):
        return ad.mul(sh[:, :, coeff_idx], ad.expand(ad.reshape(basis, (n, 1)),
                                                     (n, 3)))

    out = ad.add(out, band(1, ad.mul(y, -_SH_C1)))
    out = ad.add(out, band(2, ad.mul(z, _SH_C1)))
    out = ad.add(out, band(3, ad.mul(x, -_SH_C1)))
    if degree == 1:
        return out

    xx, yy, zz = ad.mul(x, x), ad.mul(y, y), ad.mul(z, z)
    out = ad.add(out, band(4, ad.mul(ad.mul(x, y), _SH_C2[0])))
    out = ad.add(out, band(5, ad.mul(ad.mul(y, z), _SH_C2[1])))
    out = ad.add(out, band(6, ad.mul(ad.sub(ad.sub(ad.mul(zz, 2.0), xx), yy),
                                     _SH_C2[2])))
    out = ad.add(out, band(7, ad.mul(ad.mul(x, z), _SH_C2[3])))
    out = ad.add(out, band(8, ad.mul(ad.sub(xx, yy), _SH_C2[4])))
    return out


# ---------------------------------------------------------------------------
# compositing core (shared by 3D and flatland)
# ---------------------------------------------------------------------------

def composite_splats(mean2d: Tensor, cov2d: Tensor, colors: Tensor,
                     alphas: Tensor, height: int, width: int):
    """Front-to-back composite of depth-ordered splats.

    Rows must already be sorted front to back.  Returns ``(color, alpha_accum)``
    as Tensors; backward produces gradients for all four inputs.  Pixel (i,j)
    is sampled at its center (j+0.5, i+0.5).
    """
    mean2d, cov2d = ad.astensor(mean2d), ad.astensor(cov2d)
    colors, alphas = ad.astensor(colors), ad.astensor(alphas)
    n = mean2d.data.shape[0]
    H, W = int(height), int(width)

    m = mean2d.data
    S = cov2d.data
    col = colors.data
    alp = alphas.data

    a = S[:, 0, 0]
    b = 0.5 * (S[:, 0, 1] + S[:, 1, 0])  # symmetric by contract; ulp-safe
    c = S[:, 1, 1]
    det = a * c - b * b
    if n and det.min() <= 0.0:
        raise ValueError("composite_splats: singular 2D covariance "
                         "(determinant <= 0)")
    ia = c / det
    ib = -b / det
    ic = a / det
    lam_max = 0.5 * (a + c) + np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    radius = MAHALANOBIS_CUTOFF * np.sqrt(lam_max)
    power_cutoff = 0.5 * MAHALANOBIS_CUTOFF ** 2

    xs = np.arange(W) + 0.5
    ys = np.arange(H) + 0.5

    pix_l, splat_l, pow_l, dx_l, dy_l = [], [], [], [], []
    for i in range(n):
        x_lo = max(int(m[i, 0] - radius[i] - 1.0), 0)
        x_hi = min(int(m[i, 0] + radius[i] + 2.0), W)
        y_lo = max(int(m[i, 1] - radius[i] - 1.0), 0)
        y_hi = min(int(m[i, 1] + radius[i] + 2.0), H)
        if x_lo >= x_hi or y_lo >= y_hi:
            continue
        dx = xs[x_lo:x_hi] - m[i, 0]
        dy = ys[y_lo:y_hi] - m[i, 1]
        DX = dx[None, :]
        DY = dy[:, None]
        power = 0.5 * (ia[i] * DX * DX + 2.0 * ib[i] * DX * DY + ic[i] * DY * DY)
        keep = power <= power_cutoff
        if not keep.any():
            continue
        ky, kx = np.nonzero(keep)
        pix_l.append((ky + y_lo) * W + (kx + x_lo))
        splat_l.append(np.full(ky.size, i, dtype=np.int64))
        pow_l.append(power[keep])
        dx_l.append(dx[kx])
        dy_l.append(dy[ky])

    if not pix_l:
        c_t = Tensor(np.zeros((H, W, 3)))
        a_t = Tensor(np.zeros((H, W)))
        if any(t.requires_grad or t._grad_fn is not None
               for t in (mean2d, cov2d, colors, alphas)):
            def grad_empty(_):
                mean2d.accumulate_grad(np.zeros_like(m))
                cov2d.accumulate_grad(np.zeros_like(S))
                colors.accumulate_grad(np.zeros_like(col))
                alphas.accumulate_grad(np.zeros_like(alp))

            c_t.requires_grad = True
            c_t._parents = (mean2d, cov2d, colors, alphas)
            c_t._grad_fn = grad_empty
        return c_t, a_t

    fpix = np.concatenate(pix_l)
    fsplat = np.concatenate(splat_l)
    fpow = np.concatenate(pow_l)
    fdx = np.concatenate(dx_l)
    fdy = np.concatenate(dy_l)

    # stable sort by pixel keeps the front-to-back build order per pixel
    order = np.argsort(fpix, kind="stable")
    fpix, fsplat, fpow = fpix[order], fsplat[order], fpow[order]
    fdx, fdy = fdx[order], fdy[order]
    fexp = np.exp(-fpow)
    falpha = alp[fsplat] * fexp

    uniq, counts = np.unique(fpix, return_counts=True)
    P = uniq.size
    F = int(counts.max())
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    rowid = np.repeat(np.arange(P), counts)
    slot = np.arange(fpix.size) - np.repeat(starts, counts)

    pal = np.zeros((P, F))
    pal[rowid, slot] = falpha
    pcol = np.zeros((P, F, 3))
    pcol[rowid, slot] = col[fsplat]

    # sequential front-to-back pass; padded slots have alpha 0 and are inert
    trans = np.ones(P)
    wmat = np.zeros((P, F))
    tmat = np.zeros((P, F))
    acc_color = np.zeros((P, 3))
    for f in range(F):
        include = trans >= TRANSMITTANCE_CUTOFF
        tmat[:, f] = trans
        w = pal[:, f] * trans * include
        wmat[:, f] = w
        acc_color += w[:, None] * pcol[:, f, :]
        trans = np.where(include, trans * (1.0 - pal[:, f]), trans)

    out_c = np.zeros((H * W, 3))
    out_c[uniq] = acc_color
    out_c = out_c.reshape(H, W, 3)
    out_a = np.zeros(H * W)
    out_a[uniq] = 1.0 - trans
    out_a = out_a.reshape(H, W)

    out_color = Tensor(out_c)
    out_alpha = Tensor(out_a)
    needs_grad = any(t.requires_grad or t._grad_fn is not None
                     for t in (mean2d, cov2d, colors, alphas))
    if not needs_grad:
        return out_color, out_alpha

    trans_end = trans
    include = tmat >= TRANSMITTANCE_CUTOFF
    inv_one_minus = 1.0 / np.maximum(1.0 - pal, 1e-15)

    def _scatter_alpha_grads(ga_mat):
        """Route per-slot d/d(weight) back to alphas, means and covariances."""
        ga = ga_mat[rowid, slot]
        galpha = np.zeros_like(alp)
        np.add.at(galpha, fsplat, ga * fexp)

        gp = -ga * falpha
        iaf, ibf, icf = ia[fsplat], ib[fsplat], ic[fsplat]
        gdx = gp * (iaf * fdx + ibf * fdy)
        gdy = gp * (ibf * fdx + icf * fdy)
        gmean = np.zeros_like(m)
        np.add.at(gmean[:, 0], fsplat, -gdx)
        np.add.at(gmean[:, 1], fsplat, -gdy)

        gv = np.zeros((n, 2, 2))
        np.add.at(gv[:, 0, 0], fsplat, gp * 0.5 * fdx * fdx)
        np.add.at(gv[:, 0, 1], fsplat, gp * 0.5 * fdx * fdy)
        np.add.at(gv[:, 1, 0], fsplat, gp * 0.5 * fdx * fdy)
        np.add.at(gv[:, 1, 1], fsplat, gp * 0.5 * fdy * fdy)
        V = np.zeros((n, 2, 2))
        V[:, 0, 0] = ia
        V[:, 0, 1] = ib
        V[:, 1, 0] = ib
        V[:, 1, 1] = ic
        gcov = -V @ gv @ V

        mean2d.accumulate_grad(gmean)
        cov2d.accumulate_grad(gcov)
        alphas.accumulate_grad(galpha)

    def grad_color(g_img):
        gact = g_img.reshape(-1, 3)[uniq]                      # (P,3)
        dotc = np.einsum("pfc,pc->pf", pcol, gact)             # (P,F)
        e = wmat * dotc
        # suffix sums: D[:, f] = sum_{k>f} e[:, k]
        D = np.zeros_like(e)
        run = np.zeros(P)
        for f in range(F - 1, -1, -1):
            D[:, f] = run
            run = run + e[:, f]
        gcolors = np.zeros_like(col)
        np.add.at(gcolors, fsplat, wmat[rowid, slot, None] * gact[rowid])
        colors.accumulate_grad(gcolors)
        _scatter_alpha_grads(include * (tmat * dotc - D * inv_one_minus))

    def grad_acc(g_acc):
        gacc = g_acc.reshape(-1)[uniq]
        colors.accumulate_grad(np.zeros_like(col))
        _scatter_alpha_grads(include * (gacc[:, None] * trans_end[:, None]
                                        * inv_one_minus))

    out_alpha.requires_grad = True
    out_alpha._parents = (mean2d, cov2d, colors, alphas)
    out_alpha._grad_fn = grad_acc
    out_color.requires_grad = True
    out_color._parents = (mean2d, cov2d, colors, alphas)
    out_color._grad_fn = grad_color
    return out_color, out_alpha


# ---------------------------------------------------------------------------
# rasterization entry points
# ---------------------------------------------------------------------------

def rasterize(scene: GaussianSet, cam: Camera, training: bool = True,
              near: float = 0.01) -> RenderOutput:
    """Render a GaussianSet through a camera.

    With ``training=False`` the scene parameters are detached first, so no
    graph is recorded.
    """
    if training:
        mu, rot = scene.mu, scene.rot
        log_scale, opacity = scene.log_scale, scene.opacity_logit
        sh = scene.sh
    else:
        mu, rot = scene.mu.detach(), scene.rot.detach()
        log_scale, opacity = scene.log_scale.detach(), scene.opacity_logit.detach()
        sh = scene.sh.detach()

    H, W = cam.height, cam.width
    n = len(scene)
    if n == 0:
        return RenderOutput(Tensor(np.zeros((H, W, 3))), Tensor(np.zeros((H, W))),
                            n_culled=0, kept=np.zeros(0, dtype=np.int64))

    cov3d = covariance3d(rot, ad.texp(log_scale))
    proj = project_gaussians(mu, cov3d, cam, near=near)
    if proj.kept.size == 0:
        return RenderOutput(Tensor(np.zeros((H, W, 3))), Tensor(np.zeros((H, W))),
                            n_culled=proj.n_culled, kept=proj.kept)

    order = np.argsort(proj.depth, kind="stable")
    mean2d = ad.take(proj.mean2d, order)
    cov2d = ad.take(proj.cov2d, order)
    sh_k = ad.take(sh, proj.kept[order])
    alphas = ad.sigmoid(ad.take(opacity, proj.kept[order]))

    if scene.sh_degree == 0:
        colors = sh_eval(sh_k, None, 0)
    else:
        mu_k = ad.take(mu, proj.kept[order])
        center = Tensor(cam.center.copy())
        diff = ad.sub(mu_k, ad.expand(ad.reshape(center, (1, 3)),
                                      (len(proj.kept), 3)))
        norm = ad.tsqrt(ad.tsum(ad.mul(diff, diff), axis=1, keepdims=True))
        dirs = ad.div(diff, ad.expand(norm, diff.shape))
        colors = sh_eval(sh_k, dirs, scene.sh_degree)

    color, acc = composite_splats(mean2d, cov2d, colors, alphas, H, W)
    return RenderOutput(color, acc, n_culled=proj.n_culled, kept=proj.kept[order])


def rasterize_backward(render: RenderOutput, color_grad: np.ndarray):
    """Run the adjoint pass from a rendered image gradient.

    Populates ``.grad`` on every scene parameter that contributed.
    """
    render.color.backward(grad=np.asarray(color_grad, dtype=np.float64))


def flat_cov2d(splats: FlatSplats) -> Tensor:
    """Per-splat 2x2 covariance from rotation angle + log-scales (+ floor)."""
    n = len(splats)
    cth, sth = ad.tcos(splats.rot_angle), ad.tsin(splats.rot_angle)
    s2 = ad.texp(ad.mul(splats.log_scale, 2.0))     # (N,2) scale^2
    s0, s1 = s2[:, 0], s2[:, 1]
    # R diag(s2) R^T for a 2D rotation
    c00 = ad.add(ad.mul(ad.mul(cth, cth), s0), ad.mul(ad.mul(sth, sth), s1))
    c01 = ad.mul(ad.mul(cth, sth), ad.sub(s0, s1))
    c11 = ad.add(ad.mul(ad.mul(sth, sth), s0), ad.mul(ad.mul(cth, cth), s1))
    row0 = ad.stack([c00, c01], axis=1)
    row1 = ad.stack([c01, c11], axis=1)
    cov = ad.stack([row0, row1], axis=1)
    floor = Tensor(np.broadcast_to(COV2D_FLOOR * np.eye(2), (n, 2, 2)).copy())
    return ad.add(cov, floor)


def rasterize_flatland(splats: FlatSplats, height: int, width: int,
                       training: bool = True) -> RenderOutput:
    """Render flatland splats; identical compositing math to `rasterize`."""
    n = len(splats)
    if n == 0:
        return RenderOutput(Tensor(np.zeros((height, width, 3))),
                            Tensor(np.zeros((height, width))))
    if training:
        s = splats
    else:
        s = FlatSplats(splats.mean2d.detach(), splats.rot_angle.detach(),
                       splats.log_scale.detach(), splats.opacity_logit.detach(),
                       splats.color.detach(), splats.depth)
    order = np.argsort(np.asarray(s.depth, dtype=np.float64), kind="stable")
    cov2d = ad.take(flat_cov2d(s), order)
    mean2d = ad.take(s.mean2d, order)
    colors = ad.take(s.color, order)
    alphas = ad.sigmoid(ad.take(s.opacity_logit, order))
    color, acc = composite_splats(mean2d, cov2d, colors, alphas, height, width)
    return RenderOutput(color, acc, kept=order)


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def _nn_distances(points: np.ndarray) -> np.ndarray:
    if points.shape[0] == 1:
        return np.ones(1)
    tree = cKDTree(points)
    dist, _ = tree.query(points, k=2)
    return np.maximum(dist[:, 1], 1e-4)


def init_gaussians(points=None, count: int = None, box=None, seed: int = 0,
                   sh_degree: int = 0) -> GaussianSet:
    """Build an initial GaussianSet from a point cloud or a seeded box fill.

    Scales come from nearest-neighbor distances, opacity starts at 0.1 and
    color at mid-gray (degree-0 band only).
    """
    if points is not None:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise ValueError("init_gaussians: points must be a nonempty (N,3) array")
    else:
        if count is None or count <= 0:
            raise ValueError("init_gaussians: need points or a positive count")
        lo, hi = (np.asarray(v, dtype=np.float64) for v in
                  (box if box is not None else ((-1, -1, -1), (1, 1, 1))))
        rng = np.random.default_rng(seed)
        pts = lo + rng.random((count, 3)) * (hi - lo)

    n = pts.shape[0]
    d = _nn_distances(pts)
    k = sh_coeff_count(sh_degree)
    sh = np.zeros((n, 3, k))
    sh[:, :, 0] = 0.5 / _SH_C0
    rot = np.zeros((n, 4))
    rot[:, 0] = 1.0
    return GaussianSet(
        mu=Tensor(pts, requires_grad=True),
        rot=Tensor(rot, requires_grad=True),
        log_scale=Tensor(np.log(d)[:, None].repeat(3, axis=1), requires_grad=True),
        opacity_logit=Tensor(np.full(n, _logit(0.1)), requires_grad=True),
        sh=Tensor(sh, requires_grad=True),
        sh_degree=sh_degree,
    )


def init_flat_splats(height: int, width: int, count: int, seed: int = 0,
                     color_image: np.ndarray = None) -> FlatSplats:
    """Seeded uniform splat layout over an image plane.

    ``color_image`` (H,W,3), when given, initializes colors by sampling it at
    the splat centers; otherwise colors start at mid-gray.
    """
    if count <= 0:
        raise ValueError("init_flat_splats: count must be positive")
    rng = np.random.default_rng(seed)
    pos = rng.random((count, 2)) * np.array([width, height], dtype=np.float64)
    d = _nn_distances(np.column_stack([pos, np.zeros(count)]))
    if color_image is not None:
        yy = np.clip(pos[:, 1].astype(np.int64), 0, height - 1)
        xx = np.clip(pos[:, 0].astype(np.int64), 0, width - 1)
        colors = np.asarray(color_image, dtype=np.float64)[yy, xx]
    else:
        colors = np.full((count, 3), 0.5)
    return FlatSplats(
        mean2d=Tensor(pos, requires_grad=True),
        rot_angle=Tensor(np.zeros(count), requires_grad=True),
        log_scale=Tensor(np.log(d)[:, None].repeat(2, axis=1), requires_grad=True),
        opacity_logit=Tensor(np.full(count, _logit(0.1)), requires_grad=True),
        color=Tensor(colors, requires_grad=True),
    )


def _logit(p: float) -> float:
    return float(np.log(p / (1.0 - p)))
