"""Two-dimensional periodic spectral operators and flux diagnostics.

This module numerically verifies the integral identities that make the
compactness analysis of the mixture equations work: the inverse
Laplacian, the second Riesz operator ``R = grad grad inv_lap`` and its
self-adjointness, the commutator ``Comm(a, b) = (R a) b - a (R b)``
(weakly continuous where plain products are not), the divergence
identity for tensor stresses, the effective viscous fluxes
``F_i = p_i - sum_k nu[i, k] div u_k``, density cut-offs, and
oscillatory weak-limit experiments.

Conventions, recorded in every report: fields live on the torus
``[0, 2pi)^2`` sampled on an n-by-n grid with n a power of two; the
inverse Laplacian acts on the zero-mean part (the mean mode is
projected out); inner products are true torus integrals,
``<f, g> = (2pi)^2 * mean(f g)``.

The lab is two-dimensional on purpose: in one dimension ``R``
collapses to the identity minus the mean and the commutator
degenerates to a rank-one expression, so nothing nontrivial could be
verified.  Two dimensions is the smallest setting where the projector
``k (x) k / |k|^2`` genuinely mixes directions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .model import ConfigurationError, ViscosityMatrices

__all__ = [
    "PeriodicField2D",
    "SpectralOps",
    "torus_grid",
    "inner",
    "norm",
    "inv_laplacian",
    "grad",
    "div",
    "riesz_second",
    "riesz_vector",
    "check_selfadjoint",
    "comm",
    "div_identity_residual",
    "effective_viscous_flux",
    "comm_expansion_residual",
    "cutoff",
    "renorm_residual",
    "OscillatorySequenceSpec",
    "WeakLimitReport",
    "weak_limit_experiment",
    "band_limited_field",
    "smooth_field",
    "smooth_vector_field",
    "smooth_tensor_field",
    "EvfReport",
    "ZERO_MEAN_CONVENTION",
]

ZERO_MEAN_CONVENTION = (
    "inverse Laplacian acts on the zero-mean part; fields on the torus [0, 2pi)^2"
)


def _check_grid_size(n):
    if n < 16 or (n & (n - 1)) != 0:
        raise ConfigurationError(
            f"grid size must be a power of two >= 16, got {n}"
        )


@dataclass(frozen=True, eq=False)
class PeriodicField2D:
    """Validated scalar field on the torus with its mean cached."""

    values: np.ndarray
    mean: float = field(init=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"field must be square 2-d, got shape {v.shape}")
        _check_grid_size(v.shape[0])
        if not np.isfinite(v).all():
            raise ValueError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mean", float(v.mean()))

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _vals(f):
    if isinstance(f, PeriodicField2D):
        return f.values
    return np.asarray(f, dtype=float)


class SpectralOps:
    """Wavenumber tables for an n-by-n periodic grid (real FFT layout).

    Instances are immutable after construction and safe to share; use
    the module-level functions for one-off calls (they cache one ops
    table per grid size).
    """

    def __init__(self, n: int):
        _check_grid_size(n)
        self.n = n
        kx = np.fft.fftfreq(n, 1.0 / n)
        ky = np.fft.rfftfreq(n, 1.0 / n)
        self.kx = kx[:, None]
        self.ky = ky[None, :]
        k2 = self.kx**2 + self.ky**2
        inv_k2 = np.zeros_like(k2)
        nz = k2 > 0
        inv_k2[nz] = 1.0 / k2[nz]
        self.k2 = k2
        self.inv_k2 = inv_k2
        for a in (self.kx, self.ky, self.k2, self.inv_k2):
            a.setflags(write=False)

    def fwd(self, f):
        return np.fft.rfft2(f)

    def inv(self, F):
        return np.fft.irfft2(F, s=(self.n, self.n))

    def inv_laplacian(self, f):
        F = self.fwd(f) * (-self.inv_k2)
        return self.inv(F)

    def grad(self, f):
        F = self.fwd(f)
        gx = self.inv(1j * self.kx * F)
        gy = self.inv(1j * self.ky * F)
        return np.stack([gx, gy])

    def div(self, vec):
        Fx = self.fwd(vec[0])
        Fy = self.fwd(vec[1])
        return self.inv(1j * self.kx * Fx + 1j * self.ky * Fy)

    def riesz_second(self, f):
        F = self.fwd(f)
        k = (self.kx, self.ky)
        out = np.empty((2, 2, self.n, self.n))
        for a in range(2):
            for b in range(2):
                out[a, b] = self.inv(k[a] * k[b] * self.inv_k2 * F)
        return out

    def riesz_vector(self, g):
        """``grad inv_lap div`` applied to a vector field (2, n, n)."""
        Fd = 1j * self.kx * self.fwd(g[0]) + 1j * self.ky * self.fwd(g[1])
        phi = -self.inv_k2 * Fd
        return np.stack([
            self.inv(1j * self.kx * phi),
            self.inv(1j * self.ky * phi),
        ])


@lru_cache(maxsize=8)
def _ops(n: int) -> SpectralOps:
    return SpectralOps(n)


def torus_grid(n):
    """Coordinates (X, Y) of the n-by-n sample points, 'ij' indexing."""
    x = 2.0 * np.pi * np.arange(n) / n
    return np.meshgrid(x, x, indexing="ij")


def inner(f, g) -> float:
    """Torus inner product ``integral(f g) = (2pi)^2 mean(f g)``."""
    f, g = _vals(f), _vals(g)
    return float((f * g).mean() * (2.0 * np.pi) ** 2)


def norm(f) -> float:
    return inner(f, f) ** 0.5


def inv_laplacian(f):
    """Zero-mean inverse Laplacian: ``lap(output) = f - mean(f)``."""
    f = _vals(f)
    return _ops(f.shape[0]).inv_laplacian(f)


def grad(f):
    f = _vals(f)
    return _ops(f.shape[0]).grad(f)


def div(vec):
    vec = np.asarray(vec, dtype=float)
    return _ops(vec.shape[-1]).div(vec)


def riesz_second(f):
    """Second Riesz operator ``R f = grad grad inv_lap f``, (2, 2, n, n).

    Fourier symbol ``k (x) k / |k|^2`` (mean mode deleted): symmetric,
    idempotent direction projector; its trace returns ``f - mean(f)``.
    """
    f = _vals(f)
    return _ops(f.shape[0]).riesz_second(f)


def riesz_vector(g):
    """``grad inv_lap div`` on a vector field: the same symbol applied
    through a contraction, as the commutator needs for vector slots."""
    g = np.asarray(g, dtype=float)
    return _ops(g.shape[-1]).riesz_vector(g)


def check_selfadjoint(a, b):
    """Component-wise gaps ``|<R_ab a, b> - <a, R_ab b>|``, shape (2, 2)."""
    Ra = riesz_second(a)
    Rb = riesz_second(b)
    a, b = _vals(a), _vals(b)
    gaps = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            gaps[i, j] = abs(inner(Ra[i, j], b) - inner(a, Rb[i, j]))
    return gaps


def comm(a, b):
    """Commutator ``Comm(a, b) = (R a) b - a (R b)``.

    For two scalars the result is a symmetric tensor field (2, 2, n, n).
    When the first argument is a vector field, ``R`` acts through
    ``grad inv_lap div`` and the result is a vector field (2, n, n).
    Bilinear and antisymmetric; ``Comm(a, a) = 0`` pointwise.
    """
    b = _vals(b)
    if isinstance(a, PeriodicField2D) or np.asarray(a).ndim == 2:
        a = _vals(a)
        return riesz_second(a) * b - a * riesz_second(b)
    g = np.asarray(a, dtype=float)
    Rb = riesz_second(b)
    return riesz_vector(g) * b - np.einsum("abxy,bxy->axy", Rb, g)


def div_identity_residual(S, rho_j, tau) -> float:
    """Integral residual of the stress divergence identity.

    For smooth periodic fields,

        integral[ S : grad(x)[(inv_lap rho) grad tau]
                + S : grad(x)[tau grad inv_lap rho]
                - (div div S) tau inv_lap rho ] = 0

    exactly (the integrand is a total divergence), so the returned
    magnitude measures pure discretization error.  The derivative of
    each pointwise product is taken spectrally, which is where finite
    resolution enters.
    """
    S = np.asarray(S, dtype=float)
    rho_j, tau = _vals(rho_j), _vals(tau)
    ops = _ops(rho_j.shape[0])
    q = ops.inv_laplacian(rho_j)
    vec1 = q * ops.grad(tau)
    vec2 = tau * ops.grad(q)
    total = 0.0
    for a in range(2):
        ga1 = ops.grad(vec1[a])   # (b, x, y) = d_b vec1_a
        ga2 = ops.grad(vec2[a])
        for b in range(2):
            total += inner(S[a, b], ga1[b]) + inner(S[a, b], ga2[b])
    # div div S = d_a d_b S_ab, assembled spectrally row by row
    divdiv = ops.div(np.stack([ops.div(S[0]), ops.div(S[1])]))
    total -= inner(divdiv, tau * q)
    return abs(total)


def effective_viscous_flux(p, divu, visc: ViscosityMatrices):
    """Effective viscous fluxes ``F_i = p_i - sum_k nu[i, k] div u_k``.

    Shape-agnostic over trailing axes, so it serves both the 1-d solver
    fields and the 2-d lab.  For one constituent it reduces to the
    classical single-fluid combination ``p - nu div u``.
    """
    p = np.asarray(p, dtype=float)
    divu = np.asarray(divu, dtype=float)
    return p - np.einsum("ik,k...->i...", visc.nu, divu)


def comm_expansion_residual(w, u, rho_i, rho_j):
    """Residuals of the two commutator pairing expansions.

    For smooth periodic fields both vanish:

    steady form (the operator is moved by self-adjointness)::

        integral[ w . Comm(rho_i u, rho_j) ]
          = integral[ rho_i u . grad inv_lap div(rho_j w) ]
          - integral[ (rho_i w (x) u) : R rho_j ]

    unsteady form (no transfer of the operator)::

        integral[ w . Comm(rho_i u, rho_j) ]
          = integral[ rho_j w . grad inv_lap div(rho_i u) ]
          - integral[ (rho_i w (x) u) : R rho_j ]

    The standalone pairings evaluate their divergences through the
    product rule (``div(rho w) = rho div w + w . grad rho``), a
    different discrete route from the direct transform inside ``comm``,
    so the residuals genuinely measure resolution error and shrink
    spectrally.  Returns ``(steady, unsteady)``.
    """
    w = np.asarray(w, dtype=float)
    u = np.asarray(u, dtype=float)
    rho_i, rho_j = _vals(rho_i), _vals(rho_j)
    ops = _ops(rho_i.shape[0])

    c = comm(rho_i * u, rho_j)
    lhs = sum(inner(w[a], c[a]) for a in range(2))

    grad_rj = ops.grad(rho_j)
    div_rjw = rho_j * ops.div(w) + w[0] * grad_rj[0] + w[1] * grad_rj[1]
    va = ops.grad(ops.inv_laplacian(div_rjw))
    term_a = sum(inner(rho_i * u[a], va[a]) for a in range(2))

    grad_ri = ops.grad(rho_i)
    div_riu = rho_i * ops.div(u) + u[0] * grad_ri[0] + u[1] * grad_ri[1]
    vb = ops.grad(ops.inv_laplacian(div_riu))
    term_b = sum(inner(rho_j * w[a], vb[a]) for a in range(2))

    Rj = ops.riesz_second(rho_j)
    term_2 = sum(
        inner(rho_i * w[a] * u[b], Rj[a, b]) for a in range(2) for b in range(2)
    )
    return abs(lhs - (term_a - term_2)), abs(lhs - (term_b - term_2))


def cutoff(s, r):
    """Density cut-off ``T_r(s) = min(s, r)``: nondecreasing,
    1-Lipschitz, idempotent, and bounded by r from above."""
    if not r > 0.0:
        raise ValueError("cut-off level r must be positive")
    out = np.minimum(np.asarray(s, dtype=float), r)
    return float(out) if out.ndim == 0 else out


def renorm_residual(rho, w):
    """Renormalization health metrics for a density/velocity pair.

    Returns ``(ibp, transport)`` where
    ``ibp = |integral(rho div w) + integral(w . grad rho)|`` vanishes
    identically on the torus (integration by parts) and
    ``transport = |integral(rho div w)|`` is the quantity that must
    vanish for steady mass-conserving flows; it is reported as a
    steady-state diagnostic.
    """
    rho = _vals(rho)
    w = np.asarray(w, dtype=float)
    ops = _ops(rho.shape[0])
    divw = ops.div(w)
    gr = ops.grad(rho)
    t1 = inner(rho, divw)
    t2 = inner(w[0], gr[0]) + inner(w[1], gr[1])
    return abs(t1 + t2), abs(t1)


@dataclass(frozen=True, eq=False)
class OscillatorySequenceSpec:
    """Oscillating field pair a_n = a0 + A sin(n k.x + phase),
    b_n = b0 + B sin(n k.x).

    Bases and amplitudes may be scalars or full fields; the wave vector
    is a nonzero integer pair and the indices are the strictly
    increasing oscillation frequencies of the sequence.
    """

    base_a: object = 0.0
    base_b: object = 0.0
    amp_a: object = 1.0
    amp_b: object = 1.0
    wavevec: tuple = (1, 0)
    phase: float = 0.0
    indices: tuple = (4, 8, 16, 32)

    def __post_init__(self):
        kx, ky = self.wavevec
        if int(kx) != kx or int(ky) != ky or (kx == 0 and ky == 0):
            raise ValueError("wavevec must be a nonzero integer pair")
        idx = tuple(int(m) for m in self.indices)
        if len(idx) == 0 or any(m <= 0 for m in idx) or any(
            b <= a for a, b in zip(idx, idx[1:])
        ):
            raise ValueError("indices must be strictly increasing positive integers")
        object.__setattr__(self, "indices", idx)


@dataclass(frozen=True, eq=False)
class WeakLimitReport:
    """Gap table of a weak-limit experiment."""

    indices: tuple
    product_gap: np.ndarray
    comm_gap: np.ndarray
    analytic_product_limit: float
    convention: str = ZERO_MEAN_CONVENTION


def weak_limit_experiment(seq: OscillatorySequenceSpec, phi) -> WeakLimitReport:
    """Measure how products and commutators pass to the weak limit.

    For each oscillation index n the naive product gap
    ``|<a_n b_n - a0 b0, phi>|`` tends to the nonzero resonance value
    ``|<(A B / 2) cos(phase), phi>|`` (products of weakly convergent
    sequences do not converge to the product of the limits), while the
    commutator gap ``max_components |<Comm(a_n, b_n) - Comm(a0, b0),
    phi>|`` decays: the commutator survives the weak limit.
    """
    phi = _vals(phi)
    n_grid = phi.shape[0]
    kx, ky = seq.wavevec
    kmax = max(abs(kx), abs(ky))
    if seq.indices[-1] * kmax >= n_grid / 4:
        raise ConfigurationError(
            f"oscillation {seq.indices[-1]} * |k|={kmax} is not resolvable "
            f"on an n={n_grid} grid (need < n/4)"
        )
    X, Y = torus_grid(n_grid)
    theta = kx * X + ky * Y
    a0 = np.broadcast_to(np.asarray(seq.base_a, float), phi.shape)
    b0 = np.broadcast_to(np.asarray(seq.base_b, float), phi.shape)
    A = np.broadcast_to(np.asarray(seq.amp_a, float), phi.shape)
    B = np.broadcast_to(np.asarray(seq.amp_b, float), phi.shape)

    c0 = comm(a0, b0)
    p0 = a0 * b0
    product_gap = []
    comm_gap = []
    for m in seq.indices:
        an = a0 + A * np.sin(m * theta + seq.phase)
        bn = b0 + B * np.sin(m * theta)
        product_gap.append(abs(inner(an * bn - p0, phi)))
        dc = comm(an, bn) - c0
        comm_gap.append(
            max(abs(inner(dc[a, b], phi)) for a in range(2) for b in range(2))
        )
    analytic = abs(inner(0.5 * A * B * np.cos(seq.phase), phi))
    return WeakLimitReport(
        indices=seq.indices,
        product_gap=np.array(product_gap),
        comm_gap=np.array(comm_gap),
        analytic_product_limit=analytic,
    )


def band_limited_field(n, rng, max_mode=3, zero_mean=True):
    """Random real field supported on modes |kx|,|ky| <= max_mode."""
    X, Y = torus_grid(n)
    f = np.zeros((n, n))
    for p in range(-max_mode, max_mode + 1):
        for q in range(0, max_mode + 1):
            if q == 0 and p <= 0:
                continue
            c, s = rng.normal(size=2)
            f += c * np.cos(p * X + q * Y) + s * np.sin(p * X + q * Y)
    if not zero_mean:
        f += rng.normal()
    scale = np.sqrt((f * f).mean())
    return f / scale if scale > 0 else f


def _poisson_kernel(theta, r):
    return (1.0 - r * r) / (1.0 - 2.0 * r * np.cos(theta) + r * r)


def smooth_field(n, rng, decay=0.80, terms=4, zero_mean=False):
    """Random analytic field whose Fourier coefficients fall off
    geometrically at rate ``decay`` (products of Poisson kernels).

    Unlike a band-limited sample, such a field carries energy at every
    mode, so quadrature and product-aliasing errors are nonzero at any
    finite resolution and shrink geometrically under refinement --
    exactly what resolution-sensitivity checks need.
    """
    X, Y = torus_grid(n)
    f = np.zeros((n, n))
    for _ in range(terms):
        ax, ay = rng.uniform(0.0, 2.0 * np.pi, size=2)
        f += rng.normal() * _poisson_kernel(X - ax, decay) * _poisson_kernel(Y - ay, decay)
    if zero_mean:
        f -= f.mean()
    scale = np.sqrt((f * f).mean())
    return f / scale if scale > 0 else f


def smooth_vector_field(n, rng, decay=0.80, terms=4):
    return np.stack([smooth_field(n, rng, decay, terms) for _ in range(2)])


def smooth_tensor_field(n, rng, decay=0.80, terms=4):
    """Random symmetric 2x2 tensor field with analytic components."""
    sxx = smooth_field(n, rng, decay, terms)
    syy = smooth_field(n, rng, decay, terms)
    sxy = smooth_field(n, rng, decay, terms)
    return np.array([[sxx, sxy], [sxy, syy]])


@dataclass(frozen=True, eq=False)
class EvfReport:
    """Structured diagnostics report: named scalar entries plus the
    operating convention, rendered as deterministic key/value text."""

    kind: str
    entries: tuple
    convention: str = ZERO_MEAN_CONVENTION
    fluxes: np.ndarray | None = None

    def as_text(self) -> str:
        lines = [f"report: {self.kind}", f"convention: {self.convention}"]
        for key, value in self.entries:
            if isinstance(value, float):
                lines.append(f"{key} = {value:.17g}")
            else:
                lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"
