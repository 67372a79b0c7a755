"""Fourier coefficients of edge losses, robust-loss scale policies and
band-limited functions on SO(2) / SO(3).

A loss ``h(||sigma(g) - sigma(g~)||)`` has matrix coefficients
``K^l rho_l(g~)``; only the scalars ``K^l`` are computed here. For a rotation
by ``phi`` the residual is ``||sigma - I||_F = sqrt(4 - 4 cos phi)`` in both
groups, so every transform is a one-dimensional integral over the angle.
Haar measure is normalized to total mass one.
"""

import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import NumericError, UsageError
from .group import Group, IrrepIndex, as_group, character, irrep_blocks, stack_matrices

QUAD_EPSABS = 1e-10
FALLBACK_NODES = 100_000
TOLERANCE = 1e-8


class LossKind(str, Enum):
    QUADRATIC = "quadratic"
    CAUCHY = "cauchy"
    GMC = "gmc"
    CUSTOM = "custom"


class Kernel(str, Enum):
    DIRICHLET = "dirichlet"
    FEJER = "fejer"


def cauchy(x, lam):
    return lam**2 * np.log1p((x / lam) ** 2)


def geman_mcclure(x, lam):
    x2 = x * x
    return 2.0 * x2 / (x2 + 4.0 * lam**2)


def quadratic(x, lam=None):
    return x * x


@dataclass(frozen=True)
class LossSpec:
    """Edge loss ``h``; ``lam=None`` means lambda follows kappa per edge."""

    kind: LossKind = LossKind.QUADRATIC
    lam: Optional[float] = None
    h: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if self.kind is LossKind.CUSTOM and self.h is None:
            raise UsageError("custom loss needs a scalar function h")
        if self.lam is not None and self.lam <= 0:
            raise UsageError("loss scale lambda must be positive")

    @property
    def robust(self):
        return self.kind in (LossKind.CAUCHY, LossKind.GMC)

    def profile(self, lam=None):
        """The scalar map x -> h(x) at a given lambda."""
        if self.kind is LossKind.QUADRATIC:
            return quadratic
        if self.kind is LossKind.CUSTOM:
            return self.h
        lam = self.lam if lam is None else lam
        if lam is None or lam <= 0:
            raise UsageError(f"{self.kind.value} loss needs a positive lambda")
        fn = cauchy if self.kind is LossKind.CAUCHY else geman_mcclure
        return lambda x: fn(x, lam)

    def edge_lambda(self, d, kappa):
        if not self.robust:
            return None
        return self.lam if self.lam is not None else lambda_policy(self.kind, d, kappa)


def lambda_policy(kind, d, kappa):
    """Scale of a robust loss matched to Langevin noise of concentration kappa."""
    kind = LossKind(kind)
    if kappa <= 0:
        raise UsageError("kappa must be positive")
    if kind is LossKind.CAUCHY:
        return (d + np.sqrt(10.0)) / np.sqrt(kappa)
    if kind is LossKind.GMC:
        return (d * np.sqrt(3.0) + np.sqrt(30.0)) / (2.0 * np.sqrt(kappa))
    raise UsageError(f"no lambda policy for {kind.value} loss")


@dataclass(frozen=True)
class FourierWeights:
    """Scalars K^l for l = 0..lmax (index 0 is the trivial irrep)."""

    group: Group
    kernel: Kernel
    values: np.ndarray
    nodes: int
    error: float

    @property
    def lmax(self):
        return len(self.values) - 1

    def __getitem__(self, l):
        return self.values[l]

    def scaled(self, factor):
        return FourierWeights(self.group, self.kernel, self.values * factor, self.nodes, self.error * abs(factor))


def _residual_profile(h):
    """Loss as a function of the rotation angle, checked for finiteness."""

    def H(phi):
        val = h(np.sqrt(np.maximum(4.0 - 4.0 * np.cos(phi), 0.0)))
        return val

    probe = H(np.linspace(0.0, np.pi, 257))
    if not np.all(np.isfinite(probe)):
        raise NumericError("loss is not finite on the residual range", diagnostics={"samples": 257})
    return H


def _integrand(group, kernel, l, H):
    # all integrands are even in phi, so integrate over [0, pi] and double
    if group is Group.SO3:
        if kernel is Kernel.FEJER:
            if l == 0:
                return lambda p: H(p) * (1.0 - np.cos(p))
            return lambda p: H(p) * (1.0 - np.cos(l * p)) / (l * (2 * l + 1))
        irrep = IrrepIndex(Group.SO3, l)
        return lambda p: H(p) * (1.0 - np.cos(p)) * character(irrep, p) / (2 * l + 1)
    if kernel is Kernel.FEJER and l > 0:
        return lambda p: H(p) * (1.0 - np.cos(l * p)) / (2 * l)
    return lambda p: H(p) * np.cos(l * p)


def _quad(fn, l):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(fn, 0.0, np.pi, epsabs=QUAD_EPSABS, epsrel=0.0, limit=400)
        except integrate.IntegrationWarning:
            val, err = np.nan, np.inf
    if np.isfinite(val) and err <= TOLERANCE:
        return val / np.pi, err / np.pi, 0
    # periodic even integrand: the trapezoid rule converges fast
    p = np.linspace(0.0, np.pi, FALLBACK_NODES + 1)
    y = fn(p)
    val = integrate.trapezoid(y, p)
    coarse = integrate.trapezoid(y[::2], p[::2])
    err = abs(val - coarse)
    if not np.isfinite(val) or err > TOLERANCE:
        raise NumericError(
            f"quadrature did not converge at l={l}",
            diagnostics={"l": l, "estimate": val / np.pi, "error": err / np.pi, "nodes": FALLBACK_NODES},
        )
    return val / np.pi, err / np.pi, FALLBACK_NODES


def loss_fourier_coefficients(loss, lam, lmax, kernel=Kernel.FEJER, group=Group.SO3):
    """Fourier scalars of the loss for every irrep order up to ``lmax``.

    ``lam=None`` falls back to the scale stored on the loss spec.
    """
    if lmax < 1:
        raise UsageError("lmax must be at least 1")
    if not isinstance(loss, LossSpec):
        loss = LossSpec(loss)
    lam = loss.lam if lam is None else lam
    if loss.robust and (lam is None or lam <= 0):
        raise UsageError("robust losses need lambda > 0")
    kernel, group = Kernel(kernel), as_group(group)
    if loss.kind is LossKind.CUSTOM:
        return _coefficients(loss.profile(), lmax, kernel, group)
    return _cached_coefficients(loss.kind, None if not loss.robust else float(lam), lmax, kernel, group)


@lru_cache(maxsize=256)
def _cached_coefficients(kind, lam, lmax, kernel, group):
    return _coefficients(LossSpec(kind).profile(lam), lmax, kernel, group)


def _coefficients(h, lmax, kernel, group):
    H = _residual_profile(h)
    vals, errs, nodes = [], [], 0
    for l in range(lmax + 1):
        v, e, n = _quad(_integrand(group, kernel, l, H), l)
        vals.append(v)
        errs.append(e)
        nodes = max(nodes, n)
    values = np.array(vals)
    values.setflags(write=False)
    return FourierWeights(group, kernel, values, nodes, float(max(errs)))


def edge_weights(loss, group, kappas, lmax, kernel=Kernel.FEJER):
    """Per-edge Fourier scalars, shape (n_edges, lmax + 1).

    Each edge loss is ``(kappa / 2) h(x)`` so that every loss agrees with the
    Langevin log-likelihood to second order near zero residual.
    """
    group = as_group(group)
    kappas = np.asarray(kappas, dtype=float)
    out = np.empty((kappas.shape[0], lmax + 1))
    cache = {}
    for e, kappa in enumerate(kappas):
        lam = loss.edge_lambda(group.d, kappa)
        if lam not in cache:
            cache[lam] = loss_fourier_coefficients(loss, lam, lmax, kernel, group).values
        out[e] = 0.5 * kappa * cache[lam]
    return out


def write_coefficient_table(path, weights):
    with open(path, "w") as fh:
        fh.write(f"# group={weights.group.value} kernel={weights.kernel.value}\n")
        fh.write("# l K error\n")
        for l, v in enumerate(weights.values):
            fh.write(f"{l} {v:.17g} {weights.error:.3g}\n")


def read_coefficient_table(path):
    data = np.loadtxt(path, comments="#", ndmin=2)
    return data[:, 0].astype(int), data[:, 1], data[:, 2]


# ---------------------------------------------------------------------------
# band-limited functions


def plancherel_weight(irrep):
    """Multiplicity of an irrep in the inversion formula.

    SO(3) irreps are absolutely irreducible and carry d_l. A real 2x2 block of
    SO(2) pairs the complex characters e^{+-ik}, each of dimension one, so its
    weight is 1.
    """
    return 2 * irrep.index + 1 if irrep.group is Group.SO3 else 1


def _commutant_part(group, l, c):
    # only the rotation-commuting part of an SO(2) block is seen by evaluation
    if group is Group.SO2 and l > 0:
        a = 0.5 * (c[0, 0] + c[1, 1])
        b = 0.5 * (c[0, 1] - c[1, 0])
        return np.array([[a, b], [-b, a]])
    return c


@dataclass
class BandLimitedFunction:
    """``f(g) = sum_l w_l Tr(rho_l(g)^T C_l)`` over the orders present in ``coeffs``."""

    group: Group
    coeffs: dict

    def __post_init__(self):
        self.group = as_group(self.group)
        for l, c in self.coeffs.items():
            dim = IrrepIndex(self.group, l).dim
            c = np.asarray(c, dtype=float)
            if c.shape != (dim, dim):
                raise UsageError(f"coefficient at order {l} must be {dim}x{dim}")
            self.coeffs[l] = c

    @property
    def lmax(self):
        return max(self.coeffs) if self.coeffs else 0

    @classmethod
    def delta(cls, g0, lmax, lmin=0):
        mats = stack_matrices([g0])
        blocks = irrep_blocks(g0.group, lmax, mats, lmin=lmin)
        return cls(g0.group, {l: b[0] for l, b in zip(range(lmin, lmax + 1), blocks)})

    def evaluate_matrices(self, mats):
        mats = np.asarray(mats, dtype=float)
        if mats.ndim == 2:
            mats = mats[None]
        out = np.zeros(mats.shape[0])
        if not self.coeffs:
            return out
        blocks = irrep_blocks(self.group, self.lmax, mats)
        for l, c in self.coeffs.items():
            w = plancherel_weight(IrrepIndex(self.group, l))
            out += w * np.einsum("nab,ab->n", blocks[l], c)
        return out


def evaluate(f, g):
    """Value of a band-limited function at one group element."""
    if g.group is not f.group:
        raise UsageError("group mismatch between function and element")
    return float(f.evaluate_matrices(stack_matrices([g]))[0])


def parseval_norm(f):
    """Squared L2 norm of ``f`` under normalized Haar measure."""
    total = 0.0
    for l, c in f.coeffs.items():
        irrep = IrrepIndex(f.group, l)
        c = _commutant_part(f.group, l, c)
        total += plancherel_weight(irrep) * float(np.sum(c * c))
    return total
