"""Divergence-free extensions of boundary velocity data into the square.

The extension is a stream function ``psi = p + q``.  ``p`` is harmonic
with ``p = w`` on the boundary, where ``dw/ds = -v_n``, which matches the
normal component.  ``q`` is clamped biharmonic with ``q = 0`` and
``dq/dn = v_tau - dp/dn``, which corrects the tangential component.  The
curl of a node stream function is discretely divergence free.

The boundary-layer (Hopf) variant multiplies ``q`` by a cutoff ``theta``
of the wall distance that drops from 1 to 0 on a log-linear ramp between
``d_in = exp(-2/delta) / 2`` and ``d_out = 2 exp(-1/delta)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from ..errors import ConfigurationError, ResolutionError
from ..rng import as_state
from .boundary import BoundaryTrace, tangential_antiderivative
from .elliptic import outward_derivative, solve_clamped_biharmonic, solve_dirichlet_laplace
from .grid import SquareDomain, VelocityField


@dataclass(frozen=True)
class StreamData:
    """Potentials of an extension: harmonic ``p``, biharmonic ``q``, boundary ``w``."""

    p: np.ndarray
    q: np.ndarray
    w: np.ndarray

    @property
    def psi(self) -> np.ndarray:
        return self.p + self.q


def extension_streams(domain: SquareDomain, v_n, v_tau) -> StreamData:
    w = tangential_antiderivative(domain, v_n)
    p = solve_dirichlet_laplace(domain, w)
    corrected = np.asarray(v_tau, dtype=float) - outward_derivative(p, domain)
    q = solve_clamped_biharmonic(domain, corrected)
    return StreamData(p, q, w)


def extend_boundary_field(domain: SquareDomain, v_n, v_tau, return_stream: bool = False):
    """Divergence-free field whose boundary trace is ``(v_n, v_tau)``."""
    s = extension_streams(domain, v_n, v_tau)
    field = VelocityField.from_stream(domain, s.psi)
    return (field, s) if return_stream else field


def boundary_trace(field: VelocityField):
    """Measured ``(v_n, v_tau)`` at boundary nodes; corners are ``nan``.

    The normal component averages the two wall faces next to a node; the
    tangential component extrapolates the first three interior faces to
    the wall with weights ``(15, -10, 3) / 8``.
    """
    U, V, n = field.U, field.V, field.domain.n
    e = np.array([15.0, -10.0, 3.0]) / 8
    k = np.arange(1, n)
    vn = np.full(U.shape[:-2] + (4 * n,), np.nan)
    vt = np.full_like(vn, np.nan)
    # bottom, outward (0, -1), tangent (1, 0)
    vn[..., k] = -0.5 * (V[..., 0, k - 1] + V[..., 0, k])
    vt[..., k] = e[0] * U[..., 0, k] + e[1] * U[..., 1, k] + e[2] * U[..., 2, k]
    # right, outward (1, 0), tangent (0, 1)
    vn[..., n + k] = 0.5 * (U[..., k - 1, n] + U[..., k, n])
    vt[..., n + k] = e[0] * V[..., k, n - 1] + e[1] * V[..., k, n - 2] + e[2] * V[..., k, n - 3]
    # top, outward (0, 1), tangent (-1, 0); node index i = n - k
    i = n - k
    vn[..., 2 * n + k] = 0.5 * (V[..., n, i - 1] + V[..., n, i])
    vt[..., 2 * n + k] = -(e[0] * U[..., n - 1, i] + e[1] * U[..., n - 2, i] + e[2] * U[..., n - 3, i])
    # left, outward (-1, 0), tangent (0, -1); node index j = n - k
    j = n - k
    vn[..., 3 * n + k] = -0.5 * (U[..., j - 1, 0] + U[..., j, 0])
    vt[..., 3 * n + k] = -(e[0] * V[..., j, 0] + e[1] * V[..., j, 1] + e[2] * V[..., j, 2])
    return vn, vt


def trace_error(field: VelocityField, v_n, v_tau) -> float:
    """Max deviation of the measured trace from ``(v_n, v_tau)`` away from corners."""
    mn, mt = boundary_trace(field)
    keep = ~field.domain.corner_mask()
    return float(max(np.max(np.abs(mn - v_n)[..., keep]), np.max(np.abs(mt - v_tau)[..., keep])))


# -- boundary-layer cutoff -------------------------------------------------

def cutoff_radii(delta: float):
    """Inner plateau radius and outer support radius of the cutoff."""
    if not 0 < delta < 0.5:
        raise ConfigurationError("cutoff parameter delta must lie in (0, 0.5)")
    return 0.5 * np.exp(-2.0 / delta), 2.0 * np.exp(-1.0 / delta)


def cutoff_profile(d, delta: float) -> np.ndarray:
    """``theta(d)``: 1 for ``d <= d_in``, 0 for ``d >= d_out``, linear in ``log d`` between."""
    d_in, d_out = cutoff_radii(delta)
    d = np.asarray(d, dtype=float)
    span = np.log(d_out / d_in)
    with np.errstate(divide="ignore"):
        ramp = np.log(d_out / np.maximum(d, d_in)) / span
    return np.clip(ramp, 0.0, 1.0)


def cutoff_slope(d, delta: float) -> np.ndarray:
    """``d theta / d d``."""
    d_in, d_out = cutoff_radii(delta)
    d = np.asarray(d, dtype=float)
    inside = (d > d_in) & (d < d_out)
    return np.where(inside, -1.0 / (np.where(inside, d, 1.0) * np.log(d_out / d_in)), 0.0)


def hopf_cutoff(domain: SquareDomain, delta: float) -> np.ndarray:
    """Cutoff ``theta`` at the nodes of ``domain``.

    Raises ``ResolutionError`` when the support radius does not exceed the
    grid spacing, since no interior node would then carry the layer.
    """
    d_in, d_out = cutoff_radii(delta)
    if d_out <= domain.h:
        need = int(np.ceil(1.0 / d_out)) + 1
        raise ResolutionError(f"cutoff support {d_out:.3e} is below h = {domain.h:.3e}",
                              suggested_n=need)
    x, y = domain.node_coords()
    return cutoff_profile(domain.wall_distance(x, y), delta)


def cutoff_gradient_check(domain: SquareDomain, delta: float) -> dict:
    """Max over cell centres of ``|grad theta| * dist`` by central differences."""
    x, y = domain.cell_coords()
    d = domain.wall_distance(x, y)
    eps = 1e-4 * np.minimum(domain.h, d)

    def th(a, b):
        return cutoff_profile(domain.wall_distance(a, b), delta)

    gx = (th(x + eps, y) - th(x - eps, y)) / (2 * eps)
    gy = (th(x, y + eps) - th(x, y - eps)) / (2 * eps)
    value = float(np.max(np.hypot(gx, gy) * d))
    bound = delta * (1 + 5 * domain.h)
    return {"max_grad_dist": value, "bound": bound, "pass": bool(value <= bound)}


def hopf_extension(domain: SquareDomain, v_n, v_tau, delta: float) -> VelocityField:
    """Boundary-layer extension ``curl(p + theta q)``.

    The harmonic part carrying the normal component is kept uncut; with
    purely tangential data it vanishes and the field is supported within
    ``d_out`` of the walls.
    """
    theta = hopf_cutoff(domain, delta)
    s = extension_streams(domain, v_n, v_tau)
    return VelocityField.from_stream(domain, s.p + theta * s.q)


def lift_Q(trace: BoundaryTrace, delta: float | None = None) -> VelocityField:
    """Per-time extension of a boundary trace; batch axis = time samples.

    ``delta=None`` uses the plain extension, otherwise the boundary-layer one.
    """
    dom = trace.domain
    T = trace.times.size
    out = VelocityField.zeros(dom, (T,))
    U, V = out.U.copy(), out.V.copy()
    for k in range(T):
        if trace.is_zero(k):
            continue
        vn, vt = trace.at(k)
        f = extend_boundary_field(dom, vn, vt) if delta is None else hopf_extension(dom, vn, vt, delta)
        U[k], V[k] = f.U, f.V
    return VelocityField(dom, U, V)


# -- trilinear form check -------------------------------------------------

def boundary_h1_norm(domain: SquareDomain, v) -> float:
    """Discrete ``H^1`` norm of a periodic boundary function."""
    v = np.asarray(v, dtype=float)
    dv = (np.roll(v, -1) - v) / domain.h
    return float(np.sqrt(domain.h * (np.sum(v**2) + np.sum(dv**2))))


def _gauss(a, b, m):
    """Composite Gauss-Legendre nodes and weights on consecutive intervals ``a -> b``."""
    x, w = np.polynomial.legendre.leggauss(m)
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _graded(d_in, d_out, pieces=24, m=8):
    """Normal-direction rule on ``[0, d_out]`` graded geometrically from ``d_in``."""
    edges = np.concatenate([[0.0], np.geomspace(d_in, d_out, pieces + 1)])
    return _gauss(edges[:-1], edges[1:], m)


def _separable(x, k_max):
    """``x(1-x) sin(k pi x)`` and its first two derivatives, shape ``(k_max, P)``."""
    k = np.arange(1, k_max + 1)[:, None] * np.pi
    g, g1, g2 = x * (1 - x), 1 - 2 * x, -2.0
    s, s1, s2 = np.sin(k * x), k * np.cos(k * x), -k**2 * np.sin(k * x)
    return g * s, g1 * s + g * s1, g2 * s + 2 * g1 * s1 + g * s2


def _test_field(c, x, y, k_max):
    """Velocity ``curl(phi)`` and its gradient for ``phi = sum c_kl X_k(x) X_l(y)``."""
    X0, X1, X2 = _separable(x, k_max)
    Y0, Y1, Y2 = _separable(y, k_max)

    def d(a, b):
        return np.einsum("skl,kp,lp->sp", c, a, b, optimize=True)

    px, py, pxx, pxy, pyy = d(X1, Y0), d(X0, Y1), d(X2, Y0), d(X1, Y1), d(X0, Y2)
    u1, u2 = -py, px
    return u1, u2, -pxy, -pyy, pxx, pxy


def _strips(d_in, d_out, panels=32, m=8):
    """Quadrature points covering ``{dist <= d_out}`` by four non-overlapping strips."""
    tn, tw = _graded(d_in, d_out)
    sx, sw = _gauss(np.linspace(0, 1, panels + 1)[:-1], np.linspace(0, 1, panels + 1)[1:], m)
    e = np.linspace(d_out, 1 - d_out, panels + 1)
    sy, syw = _gauss(e[:-1], e[1:], m)
    xs, ys, ws = [], [], []
    for along, aw, across in ((sx, sw, "bottom"), (sx, sw, "top"), (sy, syw, "left"), (sy, syw, "right")):
        A, N = np.meshgrid(along, tn, indexing="ij")
        W = np.outer(aw, tw)
        if across == "bottom":
            xs.append(A), ys.append(N)
        elif across == "top":
            xs.append(A), ys.append(1 - N)
        elif across == "left":
            xs.append(N), ys.append(A)
        else:
            xs.append(1 - N), ys.append(A)
        ws.append(W)
    return (np.concatenate([a.ravel() for a in xs]), np.concatenate([a.ravel() for a in ys]),
            np.concatenate([a.ravel() for a in ws]))


def hopf_trilinear_ratio(domain: SquareDomain, v_tau, delta: float, n_samples: int = 100,
                         rng=0, k_max: int = 3) -> dict:
    """Sup over random test fields of ``|((u . grad) zeta, u)| / (|v| ||u||_1^2)``.

    ``zeta = curl(theta q)`` uses a bicubic spline of the grid biharmonic
    potential ``q`` for purely tangential data ``v_tau`` and the exact
    cutoff, so the check is not limited by the grid spacing.  The form is
    evaluated as ``-((u . grad) u, zeta)``, valid for divergence-free
    ``u`` vanishing on the walls, by graded Gauss-Legendre quadrature over
    the support strips.  Test fields are ``curl`` of
    ``x(1-x)y(1-y) sum c_kl sin(k pi x) sin(l pi y)`` with standard normal
    ``c``; ``|v|`` is the discrete boundary ``H^1`` norm.
    """
    d_in, d_out = cutoff_radii(delta)
    s = extension_streams(domain, np.zeros(domain.n_boundary), v_tau)
    grid = domain.h * np.arange(domain.n + 1)
    spline = RectBivariateSpline(grid, grid, s.q.T, kx=3, ky=3)
    x, y, w = _strips(d_in, d_out)
    q = spline.ev(x, y)
    qx, qy = spline.ev(x, y, dx=1), spline.ev(x, y, dy=1)
    dist = np.minimum(np.minimum(x, 1 - x), np.minimum(y, 1 - y))
    nearest = np.argmin(np.stack([x, 1 - x, y, 1 - y]), axis=0)
    dx = np.select([nearest == 0, nearest == 1], [1.0, -1.0], 0.0)
    dy = np.select([nearest == 2, nearest == 3], [1.0, -1.0], 0.0)
    th, ts = cutoff_profile(dist, delta), cutoff_slope(dist, delta)
    z1 = -(ts * dy * q + th * qy)
    z2 = ts * dx * q + th * qx

    state = as_state(rng)
    c = state.generator().standard_normal((n_samples, k_max, k_max))
    u1, u2, u1x, u1y, u2x, u2y = _test_field(c, x, y, k_max)
    a1 = u1 * u1x + u2 * u1y
    a2 = u1 * u2x + u2 * u2y
    tri = -np.sum((a1 * z1 + a2 * z2) * w, axis=1)

    gx, gw = _gauss(np.linspace(0, 1, 9)[:-1], np.linspace(0, 1, 9)[1:], 8)
    X, Y = np.meshgrid(gx, gx, indexing="ij")
    W = np.outer(gw, gw).ravel()
    _, _, b1x, b1y, b2x, b2y = _test_field(c, X.ravel(), Y.ravel(), k_max)
    h1 = np.sum((b1x**2 + b1y**2 + b2x**2 + b2y**2) * W, axis=1)
    vnorm = boundary_h1_norm(domain, v_tau)
    ratio = np.abs(tri) / (vnorm * h1)
    return {"delta": float(delta), "sup_ratio": float(np.max(ratio)), "trilinear": tri,
            "h1_sq": h1, "v_norm": vnorm, "d_out": float(d_out)}
