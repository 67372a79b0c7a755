"""Rotations in SO(2) and SO(3), their real irreducible representations,
characters, and Haar / Langevin samplers.

SO(2) elements are stored as an angle in [0, 2pi); SO(3) elements as a unit
quaternion ``(w, x, y, z)`` with ``w >= 0``. Representation matrices are real
throughout: SO(2) irreps ``k >= 1`` are 2x2 rotation blocks and SO(3) irreps
are real Wigner-D matrices in the real spherical-harmonic basis.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from math import sqrt

import numpy as np

from . import _kernels
from .errors import CapabilityError, UsageError

TWO_PI = 2.0 * np.pi
LMAX_CAP = 16
_SMALL_ANGLE = 1e-7


class Group(str, Enum):
    SO2 = "SO2"
    SO3 = "SO3"

    @property
    def d(self):
        """Dimension of the defining (fundamental) representation."""
        return 2 if self is Group.SO2 else 3

    @property
    def manifold_dim(self):
        return 1 if self is Group.SO2 else 3


def as_group(tag):
    if isinstance(tag, Group):
        return tag
    try:
        return Group(str(tag).upper())
    except ValueError:
        raise UsageError(f"unknown group tag {tag!r}") from None


@dataclass(frozen=True)
class IrrepIndex:
    group: Group
    index: int

    def __post_init__(self):
        object.__setattr__(self, "group", as_group(self.group))
        if self.index < 0:
            raise UsageError("irrep index must be non-negative")

    @property
    def dim(self):
        if self.group is Group.SO2:
            return 1 if self.index == 0 else 2
        return 2 * self.index + 1


def irrep_dim(group, index):
    return IrrepIndex(as_group(group), index).dim


@dataclass(frozen=True, eq=False)
class Rotation:
    """A single group element. Build with :meth:`so2`, :meth:`so3` or
    :meth:`from_matrix`; compose with ``a @ b``."""

    group: Group
    params: tuple

    @classmethod
    def so2(cls, angle):
        return cls(Group.SO2, (float(np.mod(angle, TWO_PI)),))

    @classmethod
    def so3(cls, quaternion):
        q = np.asarray(quaternion, dtype=float)
        norm = np.linalg.norm(q)
        if q.shape != (4,) or norm == 0.0:
            raise UsageError("SO(3) rotation needs a non-zero 4-vector quaternion")
        q = q / norm
        if q[0] < 0:
            q = -q
        return cls(Group.SO3, tuple(float(v) for v in q))

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape == (2, 2):
            return cls.so2(np.arctan2(matrix[1, 0], matrix[0, 0]))
        if matrix.shape == (3, 3):
            return cls.so3(quaternions_from_matrices(matrix[None])[0])
        raise UsageError(f"cannot build a rotation from a {matrix.shape} matrix")

    @classmethod
    def identity(cls, group):
        return identity(group)

    @property
    def angle(self):
        """SO(2): the stored angle. SO(3): the rotation angle in [0, pi]."""
        if self.group is Group.SO2:
            return self.params[0]
        return rotation_angle(self)

    @property
    def quaternion(self):
        if self.group is not Group.SO3:
            raise UsageError("quaternion is only defined for SO(3)")
        return np.array(self.params)

    def matrix(self):
        return fundamental_matrix(self)

    def inv(self):
        return inverse(self)

    def __matmul__(self, other):
        return compose(self, other)

    def __eq__(self, other):
        if not isinstance(other, Rotation) or other.group is not self.group:
            return NotImplemented
        return self.params == other.params

    def __hash__(self):
        return hash((self.group, self.params))

    def __repr__(self):
        if self.group is Group.SO2:
            return f"Rotation.so2({self.params[0]!r})"
        return f"Rotation.so3({list(self.params)!r})"


def identity(group):
    group = as_group(group)
    if group is Group.SO2:
        return Rotation.so2(0.0)
    return Rotation.so3((1.0, 0.0, 0.0, 0.0))


def _same_group(a, b):
    if a.group is not b.group:
        raise UsageError(f"group mismatch: {a.group.value} vs {b.group.value}")


def quaternion_product(p, q):
    pw, px, py, pz = np.moveaxis(np.asarray(p, dtype=float), -1, 0)
    qw, qx, qy, qz = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def compose(a, b):
    _same_group(a, b)
    if a.group is Group.SO2:
        return Rotation.so2(a.params[0] + b.params[0])
    return Rotation.so3(quaternion_product(a.params, b.params))


def inverse(a):
    if a.group is Group.SO2:
        return Rotation.so2(-a.params[0])
    w, x, y, z = a.params
    return Rotation.so3((w, -x, -y, -z))


def matrices_from_quaternions(q):
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        axis=-2,
    )


def quaternions_from_matrices(mats):
    from scipy.spatial.transform import Rotation as _SciRot

    xyzw = _SciRot.from_matrix(np.asarray(mats, dtype=float)).as_quat()
    q = np.concatenate([xyzw[:, 3:], xyzw[:, :3]], axis=1)
    return np.where(q[:, :1] < 0, -q, q)


def so2_matrices(angles):
    angles = np.asarray(angles, dtype=float)
    c, s = np.cos(angles), np.sin(angles)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def fundamental_matrix(g):
    if g.group is Group.SO2:
        return so2_matrices(g.params[0])
    return matrices_from_quaternions(np.array(g.params))


def stack_matrices(rotations):
    """Fundamental matrices of a sequence of same-group rotations, shape (n, d, d)."""
    rotations = list(rotations)
    if not rotations:
        raise UsageError("empty rotation list")
    group = rotations[0].group
    if any(r.group is not group for r in rotations):
        raise UsageError("mixed groups in rotation list")
    if group is Group.SO2:
        return so2_matrices(np.array([r.params[0] for r in rotations]))
    return matrices_from_quaternions(np.array([r.params for r in rotations]))


def rotations_from_matrices(mats):
    mats = np.asarray(mats, dtype=float)
    if mats.shape[-1] == 2:
        return [Rotation.so2(a) for a in np.arctan2(mats[:, 1, 0], mats[:, 0, 0])]
    return [Rotation(Group.SO3, tuple(float(v) for v in q)) for q in quaternions_from_matrices(mats)]


def rotation_angles(mats):
    """Rotation angle in [0, pi] of each matrix in a (n, d, d) stack."""
    mats = np.asarray(mats, dtype=float)
    if mats.shape[-1] == 2:
        return np.abs(np.arctan2(mats[..., 1, 0], mats[..., 0, 0]))
    # atan2 form stays accurate near 0 and pi where arccos of the trace does not
    skew = np.stack(
        [mats[..., 2, 1] - mats[..., 1, 2], mats[..., 0, 2] - mats[..., 2, 0], mats[..., 1, 0] - mats[..., 0, 1]],
        -1,
    )
    trace = np.trace(mats, axis1=-2, axis2=-1)
    return np.arctan2(0.5 * np.linalg.norm(skew, axis=-1), 0.5 * (trace - 1.0))


def rotation_angle(g):
    if g.group is Group.SO2:
        a = g.params[0]
        return min(a, TWO_PI - a)
    w = g.params[0]
    v = np.linalg.norm(g.params[1:])
    return float(2.0 * np.arctan2(v, abs(w)))


def geodesic_distance(a, b):
    """Rotation angle of ``a^{-1} b``."""
    return rotation_angle(compose(inverse(a), b))


# ---------------------------------------------------------------------------
# characters


def character(irrep, rotation_angle):
    """Character of ``irrep`` at a rotation by ``rotation_angle``.

    SO(3) uses the Dirichlet kernel ``sin((l+1/2)phi) / sin(phi/2)``; within
    1e-7 of a multiple of 2pi the limit ``2l+1`` (with the sign of the
    half-angle cosine power) is evaluated through the cosine sum instead.
    """
    phi = np.asarray(rotation_angle, dtype=float)
    k = irrep.index
    if irrep.group is Group.SO2:
        out = np.ones_like(phi) if k == 0 else 2.0 * np.cos(k * phi)
        return out if out.ndim else float(out)
    half = np.sin(0.5 * phi)
    safe = np.abs(half) > _SMALL_ANGLE
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = np.sin((k + 0.5) * phi) / half
    series = 1.0 + 2.0 * sum(np.cos(m * phi) for m in range(1, k + 1)) if k else np.ones_like(phi)
    out = np.where(safe, closed, series)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# real Wigner-D


@lru_cache(maxsize=None)
def _real_basis(l):
    """Unitary map from complex to real spherical harmonics (rows: real m)."""
    w = 2 * l + 1
    u = np.zeros((w, w), dtype=complex)
    u[l, l] = 1.0
    r = 1.0 / sqrt(2.0)
    for m in range(1, l + 1):
        sign = (-1) ** m
        u[l + m, l - m] = r
        u[l + m, l + m] = sign * r
        u[l - m, l - m] = 1j * r
        u[l - m, l + m] = -1j * sign * r
    return u


@lru_cache(maxsize=None)
def _z_pattern(l):
    """Diagonal/anti-diagonal structure of a z-rotation in the real basis.

    ``Zr(a) = diag(cos(k a)) + antidiag(sigma * sin(k a))`` with ``k = |m|``;
    the signs ``sigma`` are read off once from the complex construction.
    """
    u = _real_basis(l)
    m = np.arange(-l, l + 1)
    probe = 0.37
    z = (np.conj(u) @ np.diag(np.exp(-1j * m * probe)) @ u.T).real
    k = np.abs(m)
    anti = z[np.arange(2 * l + 1), np.arange(2 * l, -1, -1)]
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.where(k > 0, np.round(anti / np.sin(k * probe)), 0.0)
    return k.astype(float), sigma


def _apply_z_left(angles, k, sigma, x):
    c = np.cos(angles[:, None] * k[None, :])
    s = np.sin(angles[:, None] * k[None, :]) * sigma[None, :]
    return c[:, :, None] * x + s[:, :, None] * x[:, ::-1, :]


def _apply_z_right(angles, k, sigma, x):
    # x @ Zr: column j mixes with column w-1-j; Zr[w-1-j, j] = sigma[w-1-j] sin(k a)
    c = np.cos(angles[:, None] * k[None, :])
    s = np.sin(angles[:, None] * k[::-1][None, :]) * sigma[::-1][None, :]
    return x * c[:, None, :] + x[:, :, ::-1] * s[:, None, :]


def euler_zyz(mats):
    """ZYZ Euler angles with ``R = Rz(alpha) Ry(beta) Rz(gamma)``."""
    mats = np.asarray(mats, dtype=float)
    sb = np.hypot(mats[:, 0, 2], mats[:, 1, 2])
    beta = np.arctan2(sb, mats[:, 2, 2])
    alpha = np.arctan2(mats[:, 1, 2], mats[:, 0, 2])
    gamma = np.arctan2(mats[:, 2, 1], -mats[:, 2, 0])
    lock = sb < 1e-12
    if np.any(lock):
        north = lock & (mats[:, 2, 2] > 0)
        south = lock & ~north
        alpha = np.where(north, np.arctan2(mats[:, 1, 0], mats[:, 0, 0]), alpha)
        alpha = np.where(south, np.arctan2(-mats[:, 0, 1], -mats[:, 0, 0]), alpha)
        gamma = np.where(lock, 0.0, gamma)
    return alpha, beta, gamma


def _check_lmax(lmax):
    if lmax > LMAX_CAP:
        raise CapabilityError(f"irrep order {lmax} exceeds the supported maximum {LMAX_CAP}")


def real_small_d(lmax, betas, lmin=0):
    """Real-basis Wigner-D of y-rotations by ``betas``; list of (n, 2l+1, 2l+1)."""
    _check_lmax(lmax)
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    packed = _kernels.small_d_packed(lmax, betas)
    offsets = _kernels.block_offsets(lmax)
    n = betas.shape[0]
    out = []
    for l in range(lmin, lmax + 1):
        w = 2 * l + 1
        if l == 0:
            out.append(np.ones((n, 1, 1)))
            continue
        d = packed[:, offsets[l] : offsets[l + 1]].reshape(n, w, w)
        rows, cols, coef = _real_gather(l)
        out.append(np.einsum("nabt,abt->nab", d[:, rows, cols], coef))
    return out


@lru_cache(maxsize=None)
def _real_gather(l):
    """Sparse form of ``d -> Re(U) d Re(U)^T + Im(U) d Im(U)^T``.

    Every real-basis entry mixes at most four complex-basis entries, so the
    change of basis is a gather of four terms instead of two dense products.
    """
    u = _real_basis(l)
    full = np.einsum("ap,bq->abpq", u.real, u.real) + np.einsum("ap,bq->abpq", u.imag, u.imag)
    w = 2 * l + 1
    rows = np.zeros((w, w, 4), dtype=np.intp)
    cols = np.zeros((w, w, 4), dtype=np.intp)
    coef = np.zeros((w, w, 4))
    for a in range(w):
        for b in range(w):
            p, q = np.nonzero(np.abs(full[a, b]) > 1e-15)
            rows[a, b, : len(p)] = p
            cols[a, b, : len(p)] = q
            coef[a, b, : len(p)] = full[a, b, p, q]
    return rows, cols, coef


def z_rotation_pattern(l):
    """``(k, sigma)`` such that the real D^l of a z-rotation by ``a`` is
    ``diag(cos(k a)) + antidiag(sigma sin(k a))``."""
    return _z_pattern(l)


def wigner_blocks_from_euler(lmax, alpha, beta, gamma, lmin=0):
    """Real Wigner-D matrices for l in [lmin, lmax]; list of (n, 2l+1, 2l+1)."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    out = []
    for l, dr in zip(range(lmin, lmax + 1), real_small_d(lmax, beta, lmin=lmin)):
        if l == 0:
            out.append(dr)
            continue
        k, sigma = _z_pattern(l)
        out.append(_apply_z_right(gamma, k, sigma, _apply_z_left(alpha, k, sigma, dr)))
    return out


def euler_to_matrices(alpha, beta, gamma):
    """``Rz(alpha) Ry(beta) Rz(gamma)`` for arrays of angles, shape (n, 3, 3)."""
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    cg, sg = np.cos(gamma), np.sin(gamma)
    return np.stack(
        [
            np.stack([ca * cb * cg - sa * sg, -ca * cb * sg - sa * cg, ca * sb], -1),
            np.stack([sa * cb * cg + ca * sg, -sa * cb * sg + ca * cg, sa * sb], -1),
            np.stack([-sb * cg, sb * sg, cb], -1),
        ],
        -2,
    )


def expmap(group, omega):
    """Group exponential of tangent vectors: (n,) angles for SO(2), (n, 3) rotation vectors for SO(3)."""
    group = as_group(group)
    omega = np.asarray(omega, dtype=float)
    if group is Group.SO2:
        return so2_matrices(omega.reshape(-1))
    omega = omega.reshape(-1, 3)
    theta = np.linalg.norm(omega, axis=1)
    # sin(t/2)/t written through sinc to stay finite at zero
    scale = 0.5 * np.sinc(theta / (2.0 * np.pi))
    q = np.concatenate([np.cos(0.5 * theta)[:, None], scale[:, None] * omega], axis=1)
    return matrices_from_quaternions(q)


def so3_irrep_blocks(lmax, mats, lmin=0):
    mats = np.asarray(mats, dtype=float)
    if mats.ndim == 2:
        mats = mats[None]
    return wigner_blocks_from_euler(lmax, *euler_zyz(mats), lmin=lmin)


def so2_irrep_blocks(kmax, angles, kmin=0):
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    out = []
    for k in range(kmin, kmax + 1):
        if k == 0:
            out.append(np.ones((angles.shape[0], 1, 1)))
            continue
        c, s = np.cos(k * angles), np.sin(k * angles)
        out.append(np.stack([np.stack([c, s], -1), np.stack([-s, c], -1)], -2))
    return out


def irrep_blocks(group, lmax, mats, lmin=0):
    """Irrep matrices for every order in [lmin, lmax] of a (n, d, d) stack."""
    group = as_group(group)
    mats = np.asarray(mats, dtype=float)
    if mats.ndim == 2:
        mats = mats[None]
    if group is Group.SO2:
        _check_lmax(lmax)
        return so2_irrep_blocks(lmax, np.arctan2(mats[:, 1, 0], mats[:, 0, 0]), kmin=lmin)
    return so3_irrep_blocks(lmax, mats, lmin=lmin)


def irrep_matrix(irrep, g):
    """Real irreducible representation matrix of ``g``."""
    if irrep.group is not g.group:
        raise UsageError(f"irrep of {irrep.group.value} applied to a {g.group.value} element")
    _check_lmax(irrep.index)
    return irrep_blocks(g.group, irrep.index, fundamental_matrix(g), lmin=irrep.index)[0][0]


# ---------------------------------------------------------------------------
# sampling


def _as_rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def haar_matrices(group, n, rng):
    group = as_group(group)
    rng = _as_rng(rng)
    if group is Group.SO2:
        return so2_matrices(rng.uniform(0.0, TWO_PI, n))
    return matrices_from_quaternions(rng.normal(size=(n, 4)))


def sample_haar(group, rng):
    return rotations_from_matrices(haar_matrices(group, 1, rng))[0]


def _so3_langevin_angles(kappa, n, rng):
    """Rotation angles with density proportional to (1 - cos t) exp(2 kappa cos t) on [0, pi].

    Envelope: 1 - cos t <= t^2 / 2 and cos t - 1 <= -2 t^2 / pi^2 on [0, pi],
    so a scaled chi(3) proposal truncated to [0, pi] dominates the target.
    For small kappa that proposal mostly falls beyond pi; the t^2 envelope on
    [0, pi] alone is used instead (exp term <= 1).
    """
    a = 4.0 * kappa / np.pi**2 if kappa > 0.5 else 0.0
    out = np.empty(n)
    filled = 0
    while filled < n:
        batch = max(64, 2 * (n - filled))
        if a > 0:
            t = np.linalg.norm(rng.normal(size=(batch, 3)), axis=1) / np.sqrt(2.0 * a)
        else:
            # inverse-CDF of t^2 on [0, pi]
            t = np.pi * rng.uniform(size=batch) ** (1.0 / 3.0)
        t = t[t <= np.pi]
        log_ratio = np.log1p(-np.cos(t)) - np.log(0.5 * t**2) + 2.0 * kappa * (np.cos(t) - 1.0) + a * t**2
        accept = np.log(rng.uniform(size=t.shape[0])) < log_ratio
        take = t[accept][: n - filled]
        out[filled : filled + take.shape[0]] = take
        filled += take.shape[0]
    return out


def langevin_noise_matrices(group, kappa, n, rng):
    """``n`` draws from the isotropic Langevin law with mode identity, (n, d, d)."""
    group = as_group(group)
    if kappa < 0:
        raise UsageError("Langevin concentration must be non-negative")
    rng = _as_rng(rng)
    if group is Group.SO2:
        # density exp(kappa Tr R) = exp(2 kappa cos t): von Mises with concentration 2 kappa
        return so2_matrices(rng.vonmises(0.0, 2.0 * kappa, n))
    angles = _so3_langevin_angles(kappa, n, rng)
    axes = rng.normal(size=(n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    q = np.concatenate([np.cos(0.5 * angles)[:, None], np.sin(0.5 * angles)[:, None] * axes], axis=1)
    return matrices_from_quaternions(q)


def sample_langevin(mode, kappa, rng):
    """One draw with density proportional to exp(kappa Tr(mode^{-1} R))."""
    noise = langevin_noise_matrices(mode.group, kappa, 1, rng)[0]
    return Rotation.from_matrix(fundamental_matrix(mode) @ noise)
