"""One-dimensional fractional-Laplacian backend on the interval (-1, 1).

Closed-form jump density, Green function and exit (Poisson) density of the
symmetric stable process on the unit interval, together with the graded
quadrature machinery needed to apply them: composite Gauss panels refined
geometrically toward the endpoints and kernel diagonals, with product
weights on the innermost panels that integrate the known power singularities
exactly.  The kernel constants are taken from standard closed forms but are
treated as untrusted: construction re-validates symmetry, positivity, the
exit-density normalization, and the symbol identity for the jump density,
and the Monte Carlo walk cross-checks them again at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import hyp2f1, roots_jacobi, roots_legendre

from .semilinear import LadderConfig, Nonlinearity, Solution, solve_ladder

__all__ = [
    "ContinuumProblem",
    "ExteriorData",
    "FracKernels",
    "QuadGrid",
    "apply_PD",
    "apply_PV_interval",
    "apply_RD",
    "build_grid",
    "build_kernels",
    "const_exterior",
    "continuum_callable",
    "default_nest",
    "example77_report",
    "green_matrix",
    "indicator_exterior",
    "levy_symbol",
    "martin_boundary_fn",
    "martin_kernel",
    "martin_vector",
    "nest_from_potential",
    "power_singular_exterior",
    "projective_exhaustion_defects",
    "solve_continuum",
    "zero_exterior",
]


# ---------------------------------------------------------------------------
# quadrature primitives

@lru_cache(maxsize=64)
def _gl(order: int):
    x, w = roots_legendre(order)
    return x, w


@lru_cache(maxsize=256)
def _gj(order: int, a: float, b: float):
    x, w = roots_jacobi(order, a, b)
    return x, w


def _panel_rule(a: float, b: float, order: int, jacobi: float = 0.0, side: str = ""):
    """Nodes/weights on [a, b]; optional product weights for a power weight.

    With ``jacobi`` = gamma and ``side`` = "left", the returned weights
    integrate (y - a)^gamma * smooth(y) exactly when applied to values of the
    full integrand; likewise for "right" with (b - y)^gamma.
    """
    h = b - a
    if jacobi == 0.0 or not side:
        t, w = _gl(order)
        y = a + 0.5 * h * (t + 1.0)
        return y, 0.5 * h * w
    if side == "left":
        t, w = _gj(order, 0.0, jacobi)
        y = a + 0.5 * h * (t + 1.0)
        return y, (0.5 * h) ** (jacobi + 1.0) * w * (y - a) ** (-jacobi)
    t, w = _gj(order, jacobi, 0.0)
    y = b - 0.5 * h * (1.0 - t)
    return y, (0.5 * h) ** (jacobi + 1.0) * w * (b - y) ** (-jacobi)


def _graded_breaks(a: float, b: float, levels: int, toward_left: bool):
    h = b - a
    steps = h * 2.0 ** (-np.arange(levels, 0, -1, dtype=float))
    return np.concatenate([[a], a + steps, [b]]) if toward_left \
        else np.concatenate([[a], b - steps[::-1], [b]])


def _graded_panels(a: float, b: float, *, order: int, levels: int,
                   grade_left: bool, grade_right: bool,
                   jacobi_left: float = 0.0, jacobi_right: float = 0.0,
                   n_base: int = 4):
    """Composite rule on [a, b] graded geometrically toward marked endpoints."""
    if grade_left and grade_right:
        mid = 0.5 * (a + b)
        breaks = np.concatenate([_graded_breaks(a, mid, levels, True)[:-1],
                                 _graded_breaks(mid, b, levels, False)])
    elif grade_left:
        breaks = _graded_breaks(a, b, levels, True)
    elif grade_right:
        breaks = _graded_breaks(a, b, levels, False)
    else:
        breaks = np.linspace(a, b, n_base + 1)
    xs, ws = [], []
    last = len(breaks) - 2
    for k in range(last + 1):
        jac, side = 0.0, ""
        if k == 0 and grade_left and jacobi_left != 0.0:
            jac, side = jacobi_left, "left"
        elif k == last and grade_right and jacobi_right != 0.0:
            jac, side = jacobi_right, "right"
        y, w = _panel_rule(breaks[k], breaks[k + 1], order, jac, side)
        xs.append(y)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


# ---------------------------------------------------------------------------
# kernels

@dataclass(frozen=True)
class FracKernels:
    """Closed-form kernels of the stable process on the unit interval."""

    alpha: float
    jump_coef: float
    green_coef: float
    poisson_coef: float
    exit_coef: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    def j(self, r) -> np.ndarray:
        """Jump density at distance r > 0."""
        r = np.asarray(r, dtype=float)
        return self.jump_coef * r ** (-1.0 - self.alpha)

    def _radial_body(self, r: np.ndarray) -> np.ndarray:
        """Integral of s^(alpha/2-1) (1+s)^(-1/2) over (0, r).

        The hypergeometric form degenerates at alpha = 1, where the closed
        arcsinh expression is used instead.
        """
        a = self.alpha
        if abs(a - 1.0) < 1e-12:
            return 2.0 * np.arcsinh(np.sqrt(r))
        return (2.0 / a) * r ** (a / 2.0) * hyp2f1(0.5, a / 2.0, a / 2.0 + 1.0, -r)

    def green(self, x, y) -> np.ndarray:
        """Green function of (-1, 1); zero off the interval, +inf allowed on
        the diagonal when alpha <= 1."""
        a = self.alpha
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        inside = (np.abs(x) < 1.0) & (np.abs(y) < 1.0)
        d = np.abs(x - y)
        out = np.zeros(d.shape)
        on_diag = inside & (d == 0.0)
        off = inside & ~on_diag
        if np.any(off):
            dv = d[off]
            r = (1.0 - x[off] ** 2) * (1.0 - y[off] ** 2) / dv ** 2
            out[off] = self.green_coef * dv ** (a - 1.0) * self._radial_body(r)
        if np.any(on_diag):
            if a > 1.0:
                q = ((1.0 - x[on_diag] ** 2) ** 2) ** ((a - 1.0) / 2.0)
                out[on_diag] = self.green_coef * (2.0 / (a - 1.0)) * q
            else:
                out[on_diag] = np.inf
        return out if out.shape else float(out)

    def poisson(self, x, y) -> np.ndarray:
        """Exit density from (-1, 1) at interior x toward exterior y."""
        a = self.alpha
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        ok = (np.abs(x) < 1.0) & (np.abs(y) > 1.0)
        out = np.zeros(x.shape)
        if np.any(ok):
            out[ok] = self.poisson_coef * ((1.0 - x[ok] ** 2) / (y[ok] ** 2 - 1.0)) ** (a / 2.0) \
                / np.abs(x[ok] - y[ok])
        return out if out.shape else float(out)

    def green_interval(self, radius: float, x, y) -> np.ndarray:
        """Green function of (-radius, radius) by stable scaling."""
        return radius ** (self.alpha - 1.0) * self.green(np.asarray(x) / radius,
                                                         np.asarray(y) / radius)

    def poisson_interval(self, radius: float, x, y) -> np.ndarray:
        """Exit density of (-radius, radius) by stable scaling."""
        return self.poisson(np.asarray(x) / radius, np.asarray(y) / radius) / radius

    def mean_exit_ball(self, radius: float) -> float:
        """Expected exit time from a centered interval of given radius,
        started at the center."""
        return self.exit_coef * radius ** self.alpha


def levy_symbol(kernels: FracKernels, xi: float, order: int = 12, levels: int = 40,
                cutoff: float = 256.0) -> float:
    """Numerical symbol integral of 2*j: must reproduce |xi|^alpha.

    The [0, 1] part is a graded quadrature with the r^(1-alpha) factor baked
    into the innermost panel; the oscillatory tail is reduced twice by parts
    and the remaining rapidly decaying integral truncated with a provable
    remainder below 1e-6 relative.
    """
    a = kernels.alpha
    A = kernels.jump_coef

    def body(r):
        return (1.0 - np.cos(r * xi)) * 2.0 * kernels.j(r)

    y, w = _graded_panels(0.0, 1.0, order=order, levels=levels,
                          grade_left=True, grade_right=False, jacobi_left=1.0 - a)
    head = float(np.sum(w * body(y)))
    # integral over [1, inf) of cos(r xi) r^(-1-alpha), two integrations by parts
    n_panels = max(8, int(np.ceil(cutoff * xi / np.pi)))
    breaks = np.linspace(1.0, cutoff, n_panels + 1)
    t_int = 0.0
    for k in range(n_panels):
        yk, wk = _panel_rule(breaks[k], breaks[k + 1], order)
        t_int += float(np.sum(wk * np.cos(yk * xi) * yk ** (-3.0 - a)))
    s_int = np.cos(xi) / xi - (2.0 + a) / xi * t_int
    c_int = -np.sin(xi) / xi + (1.0 + a) / xi * s_int
    return head + 2.0 * A * (1.0 / a - c_int)


def _validate_kernels(k: FracKernels) -> dict:
    rng = np.random.default_rng(7)
    xs = rng.uniform(-0.98, 0.98, size=40)
    ys = rng.uniform(-0.98, 0.98, size=40)
    gsym = float(np.max(np.abs(k.green(xs, ys) - k.green(ys, xs))))
    gpos = float(np.min(k.green(xs, ys)))
    probes = np.array([0.0, 0.5, -0.5, 0.9])
    norm_defect = 0.0
    for x in probes:
        total = _poisson_total_mass(k, x)
        norm_defect = max(norm_defect, abs(total - 1.0))
    sym_defect = 0.0
    for xi in (1.0, 2.0, 4.0):
        sym_defect = max(sym_defect, abs(levy_symbol(k, xi) - xi ** k.alpha) / xi ** k.alpha)
    diag = {"green_symmetry": gsym, "green_min": gpos,
            "poisson_normalization": norm_defect, "symbol_relative": sym_defect}
    if gsym > 1e-8 or gpos < -1e-14:
        raise ValueError(f"Green-function invariants failed: {diag}")
    if norm_defect > 1e-6:
        raise ValueError(f"exit-density normalization failed: {diag}")
    if sym_defect > 1e-4:
        raise ValueError(f"jump-density symbol check failed: {diag}")
    return diag


def build_kernels(alpha: float, validate: bool = True) -> FracKernels:
    """Kernel pack for the given stability index, re-validated numerically."""
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    a = alpha
    jump = a * 2.0 ** (a - 1.0) * gamma_fn((1.0 + a) / 2.0) / (math.sqrt(math.pi) * gamma_fn(1.0 - a / 2.0))
    green = 2.0 ** (-a) / gamma_fn(a / 2.0) ** 2
    poisson = math.sin(math.pi * a / 2.0) / math.pi
    exit_c = math.sqrt(math.pi) / (2.0 ** a * gamma_fn(1.0 + a / 2.0) * gamma_fn((1.0 + a) / 2.0))
    k = FracKernels(alpha=a, jump_coef=jump, green_coef=green,
                    poisson_coef=poisson, exit_coef=exit_c)
    if validate:
        k.diagnostics.update(_validate_kernels(k))
    return k


# ---------------------------------------------------------------------------
# grids and integral operators

@dataclass(frozen=True)
class QuadGrid:
    """Shared quadrature carrier: interior panels and a truncated exterior.

    Interior panels are geometrically graded toward the endpoints; the
    exterior rule is graded toward the boundary (with the exit-density edge
    power baked into the innermost panels) and doubled outward to the
    truncation radius, beyond which tails are handled analytically.
    """

    alpha: float
    order: int
    edge_levels: int
    n_base: int
    out_levels: int
    interior_x: np.ndarray
    interior_w: np.ndarray
    interior_breaks: np.ndarray
    exterior_x: np.ndarray
    exterior_w: np.ndarray
    radius: float

    def refine(self) -> "QuadGrid":
        """Finer grid; halves (at least) the self-reported quadrature error."""
        return build_grid(self.alpha, order=self.order + 2, n_base=2 * self.n_base,
                          edge_levels=self.edge_levels + 4, out_levels=self.out_levels + 1)


def _interior_breaks(n_base: int, edge_levels: int) -> np.ndarray:
    left = -1.0 + 0.5 * 2.0 ** (-np.arange(edge_levels, 0, -1, dtype=float))
    mid = np.linspace(-0.5, 0.5, n_base + 1)
    return np.concatenate([[-1.0], left, mid[1:-1], -left[::-1], [1.0]])


def _exterior_rule(alpha: float, order: int, edge_levels: int, out_levels: int,
                   edge_gamma: float | None = None):
    """Rule on (1, R) mirrored to (-R, -1); innermost panels carry the
    (y^2-1)^(-alpha/2) edge power (plus any declared data power)."""
    gamma = -alpha / 2.0 if edge_gamma is None else edge_gamma
    if gamma <= -1.0:
        raise ValueError("exterior edge power is not integrable")
    xs, ws = [], []
    steps = 2.0 ** (-np.arange(edge_levels, 0, -1, dtype=float))
    breaks_in = np.concatenate([[1.0], 1.0 + steps, [2.0]])
    for k in range(len(breaks_in) - 1):
        jac, side = (gamma, "left") if k == 0 else (0.0, "")
        y, w = _panel_rule(breaks_in[k], breaks_in[k + 1], order, jac, side)
        xs.append(y)
        ws.append(w)
    lo = 2.0
    for _ in range(out_levels):
        y, w = _panel_rule(lo, 2.0 * lo, order)
        xs.append(y)
        ws.append(w)
        lo *= 2.0
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    return np.concatenate([-x[::-1], x]), np.concatenate([w[::-1], w]), lo


def build_grid(alpha: float, order: int = 10, n_base: int = 8, edge_levels: int = 22,
               out_levels: int = 10) -> QuadGrid:
    breaks = _interior_breaks(n_base, edge_levels)
    xs, ws = [], []
    for k in range(len(breaks) - 1):
        y, w = _panel_rule(breaks[k], breaks[k + 1], order)
        xs.append(y)
        ws.append(w)
    ext_x, ext_w, radius = _exterior_rule(alpha, order, edge_levels, out_levels)
    return QuadGrid(alpha=alpha, order=order, edge_levels=edge_levels, n_base=n_base,
                    out_levels=out_levels,
                    interior_x=np.concatenate(xs), interior_w=np.concatenate(ws),
                    interior_breaks=breaks, exterior_x=ext_x, exterior_w=ext_w,
                    radius=radius)


@dataclass(frozen=True)
class ExteriorData:
    """Exterior datum g on |y| > 1 with declared tail and edge powers.

    ``tail_exponent`` s means g(y) ~ c |y|^s as |y| -> inf (s < alpha needed
    for a finite exit average); ``edge_exponent`` p means g blows up like
    (|y| - 1)^p toward the boundary (p > alpha/2 - 1 needed).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    tail_exponent: float = 0.0
    edge_exponent: float = 0.0
    name: str = "custom"

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.asarray(self.fn(y), dtype=float)


def zero_exterior() -> ExteriorData:
    return ExteriorData(fn=lambda y: np.zeros_like(y), name="zero")


def const_exterior(c: float) -> ExteriorData:
    return ExteriorData(fn=lambda y: np.full_like(y, float(c)), name=f"const[{c}]")


def indicator_exterior(a: float, b: float) -> ExteriorData:
    return ExteriorData(fn=lambda y: ((y >= a) & (y <= b)).astype(float),
                        tail_exponent=-4.0, name=f"indicator[{a},{b}]")


def power_singular_exterior(p: float, coef: float = 1.0) -> ExteriorData:
    """g(y) = coef * (|y| - 1)^(-p): singular at the boundary, decaying far out."""
    return ExteriorData(fn=lambda y: coef * (np.abs(y) - 1.0) ** (-p),
                        tail_exponent=-p, edge_exponent=-p, name=f"power_singular[{p}]")


def _poisson_total_mass(kernels: FracKernels, x: float, order: int = 14,
                        edge_levels: int = 30, out_levels: int = 10) -> float:
    ext_x, ext_w, radius = _exterior_rule(kernels.alpha, order, edge_levels, out_levels)
    main = float(np.sum(ext_w * kernels.poisson(x, ext_x)))
    return main + _poisson_tail(kernels, np.asarray([x]), const_exterior(1.0), radius)[0]


def _poisson_tail(kernels: FracKernels, x: np.ndarray, g: ExteriorData, radius: float) -> np.ndarray:
    """Analytic tail of the exit average beyond |y| = radius.

    Uses the power-law decay of the exit density with three expansion terms;
    the truncation error is O(radius^(s - alpha - 3)).
    """
    a, s = kernels.alpha, g.tail_exponent
    if s >= a:
        raise ValueError("exterior datum grows too fast: exit average diverges")
    R = radius
    out = np.zeros_like(x)
    for sign in (1.0, -1.0):
        c = float(g(np.asarray([sign * R]))[0]) * R ** (-s)
        if c == 0.0:
            continue
        terms = (R ** (s - a) / (a - s)
                 + sign * x * R ** (s - a - 1.0) / (a + 1.0 - s)
                 + (x ** 2 + a / 2.0) * R ** (s - a - 2.0) / (a + 2.0 - s))
        out += kernels.poisson_coef * (1.0 - x ** 2) ** (a / 2.0) * c * terms
    return out


def apply_PD(kernels: FracKernels, grid: QuadGrid, g, x=None) -> np.ndarray:
    """Exit average of the exterior datum g at interior points.

    Divergence of the exit average (the finiteness hypothesis on g failing)
    is detected through the declared tail power and through non-decaying
    outward panel contributions, and reported as an error.
    """
    if not isinstance(g, ExteriorData):
        g = ExteriorData(fn=g)
    x = grid.interior_x if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    if g.edge_exponent != 0.0:
        ext_x, ext_w, radius = _exterior_rule(
            grid.alpha, grid.order, grid.edge_levels, grid.out_levels,
            edge_gamma=-kernels.alpha / 2.0 + g.edge_exponent)
    else:
        ext_x, ext_w, radius = grid.exterior_x, grid.exterior_w, grid.radius
    gv = g(ext_x)
    _check_outward_decay(kernels, g, radius)
    vals = (kernels.poisson(x[:, None], ext_x[None, :]) * (ext_w * gv)[None, :]).sum(axis=1)
    return vals + _poisson_tail(kernels, x, g, radius)


def _check_outward_decay(kernels: FracKernels, g: ExteriorData, radius: float) -> None:
    mids = radius * 2.0 ** np.arange(-3, 1, dtype=float)
    contrib = np.abs(g(mids)) * mids ** (-kernels.alpha) \
        + np.abs(g(-mids)) * mids ** (-kernels.alpha)
    if contrib[-1] > 1e-12 and np.any(np.diff(contrib) >= 0):
        raise ValueError(
            f"exit average not converging under tail refinement: panel masses {contrib.tolist()}")


def apply_RD(kernels: FracKernels, grid: QuadGrid, h=None, atoms=(), x=None,
             edge_exponent: float = 0.0, order: int | None = None,
             edge_levels: int | None = None) -> np.ndarray:
    """Green potential of a density h plus point atoms, at interior points.

    Direct per-point quadrature: panels graded toward both endpoints and the
    evaluation point, with the known diagonal and edge powers baked into the
    innermost panels.  ``edge_exponent`` declares an extra boundary power of
    h itself.
    """
    x = grid.interior_x if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    order = order or grid.order + 2
    edge_levels = edge_levels or grid.edge_levels + 6
    a = kernels.alpha
    diag_gamma = a - 1.0 if a < 1.0 else 0.0
    edge_gamma = a / 2.0 + edge_exponent
    out = np.zeros_like(x)
    if h is not None:
        for i, xi in enumerate(x):
            acc = 0.0
            for (lo, hi, jl, jr) in ((-1.0, xi, edge_gamma, diag_gamma),
                                     (xi, 1.0, diag_gamma, edge_gamma)):
                y, w = _graded_panels(lo, hi, order=order, levels=edge_levels,
                                      grade_left=True, grade_right=True,
                                      jacobi_left=jl, jacobi_right=jr)
                acc += float(np.sum(w * kernels.green(xi, y) * h(y)))
            out[i] = acc
    for (pos, weight) in atoms:
        out += weight * kernels.green(x, float(pos))
    return out


def apply_PV_interval(kernels: FracKernels, radius: float, fn, x: float,
                      y_hi: float = 1.0, edge_exponent: float = 0.0,
                      order: int = 12, levels: int = 24) -> float:
    """Exit average over (-radius, radius) of fn restricted to radius < |y| < y_hi."""
    a = kernels.alpha
    acc = 0.0
    for (lo, hi, inner_left) in ((radius, y_hi, True), (-y_hi, -radius, False)):
        y, w = _graded_panels(lo, hi, order=order, levels=levels,
                              grade_left=True, grade_right=True,
                              jacobi_left=(-a / 2.0) if inner_left else edge_exponent,
                              jacobi_right=edge_exponent if inner_left else (-a / 2.0))
        acc += float(np.sum(w * kernels.poisson_interval(radius, x, y) * fn(y)))
    return acc


def _pv_exterior(kernels: FracKernels, radius: float, g: ExteriorData, x: float,
                 grid: QuadGrid) -> float:
    """Exit average over (-radius, radius) of the part of g beyond |y| > 1."""
    gv = g(grid.exterior_x)
    val = float(np.sum(grid.exterior_w * kernels.poisson_interval(radius, x, grid.exterior_x) * gv))
    scaled = ExteriorData(fn=lambda y: g(radius * y), tail_exponent=g.tail_exponent)
    tail = _poisson_tail(kernels, np.asarray([x / radius]), scaled, grid.radius / radius)[0]
    return val + float(tail)


# ---------------------------------------------------------------------------
# product-integration matrix for the Green operator

def _lagrange_matrix(ref_nodes: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Values of the Lagrange basis on ref_nodes at pts (barycentric form)."""
    n = ref_nodes.size
    lam = np.ones(n)
    for i in range(n):
        lam[i] = 1.0 / np.prod(ref_nodes[i] - np.delete(ref_nodes, i))
    diff = pts[:, None] - ref_nodes[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15)
    safe = np.where(exact, 1.0, diff)
    terms = lam[None, :] / safe
    denom = terms.sum(axis=1, keepdims=True)
    B = terms / denom
    hit = exact.any(axis=1)
    B[hit] = exact[hit].astype(float)
    return B


def green_matrix(kernels: FracKernels, grid: QuadGrid, diag_levels: int = 16) -> np.ndarray:
    """Product-integration matrix W: (W @ f_at_nodes)[j] ~ R_D f at node j.

    Sources are represented panelwise by their Lagrange interpolants on the
    panel quadrature nodes; far panels are integrated with a finer plain
    rule, panels containing or adjacent to the target with a rule graded
    toward the target (diagonal power baked in below alpha = 1).
    """
    a = kernels.alpha
    nodes = grid.interior_x
    breaks = grid.interior_breaks
    order = grid.order
    n_panels = len(breaks) - 1
    panel_of = np.repeat(np.arange(n_panels), order)
    t_ref, _ = _gl(order)
    t_fine, w_fine = _gl(order + 6)
    B_fine = _lagrange_matrix(t_ref, t_fine)
    diag_gamma = a - 1.0 if a < 1.0 else 0.0
    W = np.zeros((nodes.size, nodes.size))
    for p in range(n_panels):
        lo, hi = breaks[p], breaks[p + 1]
        half = 0.5 * (hi - lo)
        cols = slice(p * order, (p + 1) * order)
        near = np.abs(panel_of - p) <= 1
        far = ~near
        yq = lo + half * (t_fine + 1.0)
        gv = kernels.green(nodes[far][:, None], yq[None, :])
        W[far, cols] = gv @ (B_fine * (w_fine * half)[:, None])
        for jloc in np.nonzero(near)[0]:
            xj = nodes[jloc]
            pieces = []
            if lo < xj < hi:
                pieces.append((lo, xj, False, True))
                pieces.append((xj, hi, True, False))
            else:
                toward_left = xj <= lo
                pieces.append((lo, hi, toward_left, not toward_left))
            row = np.zeros(order)
            for (pa, pb, gl_, gr_) in pieces:
                y, w = _graded_panels(pa, pb, order=order, levels=diag_levels,
                                      grade_left=gl_, grade_right=gr_,
                                      jacobi_left=diag_gamma if gl_ else 0.0,
                                      jacobi_right=diag_gamma if gr_ else 0.0)
                tloc = (y - lo) / half - 1.0
                Bloc = _lagrange_matrix(t_ref, tloc)
                row += (w * kernels.green(xj, y)) @ Bloc
            W[jloc, cols] = row
    return W


# ---------------------------------------------------------------------------
# Martin kernel

def martin_vector(kernels: FracKernels, xs, endpoint: int, k_lo: int = 6,
                  k_hi: int = 18):
    """Boundary limit of the normalized Green ratio toward an endpoint.

    Returns (values, tail_variation) from a geometric approach sequence with
    one Richardson step; the base point of the normalization is the origin.
    """
    if endpoint not in (1, -1):
        raise ValueError("endpoint must be +1 or -1")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ks = np.arange(k_lo, k_hi + 1)
    ys = endpoint * (1.0 - 2.0 ** (-ks.astype(float)))
    ratios = kernels.green(xs[:, None], ys[None, :]) / kernels.green(0.0, ys)[None, :]
    rich = 2.0 * ratios[:, 1:] - ratios[:, :-1]
    tail = np.abs(rich[:, -1] - rich[:, -2])
    return rich[:, -1], tail


def martin_kernel(kernels: FracKernels, x: float, endpoint: int,
                  tail_tol: float = 1e-4) -> float:
    vals, tail = martin_vector(kernels, [x], endpoint)
    if tail[0] > tail_tol:
        raise ValueError(f"Martin-ratio extrapolation not converged: tail variation {tail[0]:.3e}")
    return float(vals[0])


def martin_boundary_fn(kernels: FracKernels, endpoint: int):
    """Martin limit as a callable on all of (-1, 1), plus its calibration spread.

    The Green-ratio extrapolation is only valid at points well inside the
    interval, so the boundary-pole profile is continued by the local power
    shape of the ratio, calibrated against the extrapolated values at a
    spread of interior probes.  The returned spread measures how consistent
    that calibration is; it doubles as a kernel cross-check.
    """
    a = kernels.alpha

    def shape(y):
        y = np.asarray(y, dtype=float)
        return (1.0 - y ** 2) ** (a / 2.0) / np.abs(endpoint - y)

    probes = np.array([0.0, 0.25, -0.25, 0.5, -0.5])
    vals, _ = martin_vector(kernels, probes, endpoint)
    ratios = vals / shape(probes)
    c = float(np.mean(ratios))
    spread = float(np.max(np.abs(ratios - c)))

    def fn(y):
        return c * shape(y)

    return fn, spread


# ---------------------------------------------------------------------------
# continuum problems

def default_nest(levels: int = 12) -> tuple:
    """Interval exhaustion radii 1 - 2^-n, n = 1..levels."""
    return tuple(1.0 - 2.0 ** (-n) for n in range(1, levels + 1))


def nest_from_potential(kernels: FracKernels, grid: QuadGrid, levels: int = 8) -> tuple:
    """Exhaustion by level sets of the mean exit time (its profile is
    symmetric and decreasing toward the boundary)."""
    xs = np.linspace(0.0, 1.0 - 2.0 ** (-levels - 4), 200)
    phi = apply_RD(kernels, grid, h=lambda y: np.ones_like(y), x=xs,
                   order=8, edge_levels=14)
    top = phi[0]
    radii = []
    for nlev in range(1, levels + 1):
        t = top / 2.0 ** nlev
        k = int(np.searchsorted(-phi, -t))
        radii.append(float(xs[min(k, xs.size - 1)]))
    return tuple(sorted(set(radii)))


@dataclass(frozen=True)
class ContinuumProblem:
    """Fractional-Laplacian problem on (-1, 1) with boundary-measure data.

    ``nu_plus`` / ``nu_minus`` are atom weights of the boundary measure at
    the endpoints, realized through the Martin kernel; ``g`` acts on |y| > 1.
    """

    kernels: FracKernels
    grid: QuadGrid
    g: ExteriorData
    f: Nonlinearity
    mu_atoms: tuple = ()
    nu_plus: float = 0.0
    nu_minus: float = 0.0
    nest: tuple = ()

    def nest_radii(self) -> tuple:
        return self.nest or default_nest()


def _martin_part(prob: ContinuumProblem, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    if prob.nu_plus:
        out += prob.nu_plus * martin_vector(prob.kernels, x, +1)[0]
    if prob.nu_minus:
        out += prob.nu_minus * martin_vector(prob.kernels, x, -1)[0]
    return out


def _check_absorption_integrable(prob: ContinuumProblem) -> None:
    """Hypothesis check for boundary-measure data: the absorption evaluated
    along the Martin part must have a finite Green potential."""
    kern, grid = prob.kernels, prob.grid

    def h(y):
        return np.abs(prob.f(y, _martin_part(prob, y)))

    probes = np.array([0.0, 0.5])
    v1 = apply_RD(kern, grid, h=h, x=probes, order=8, edge_levels=16)
    v2 = apply_RD(kern, grid, h=h, x=probes, order=8, edge_levels=24)
    scale = max(1.0, float(np.max(np.abs(v2))))
    if float(np.max(np.abs(v2 - v1))) / scale > 0.05:
        raise ValueError("absorption along the boundary part has no finite potential "
                         f"(refinement moved {v1} -> {v2})")


def solve_continuum(prob: ContinuumProblem, ladder: LadderConfig | None = None) -> Solution:
    """Solve u = martin part + exit average of g + Green terms on the grid."""
    kern, grid = prob.kernels, prob.grid
    nodes = grid.interior_x
    base = apply_PD(kern, grid, prob.g, x=nodes)
    if prob.nu_plus or prob.nu_minus:
        base = base + _martin_part(prob, nodes)
        if not prob.f.is_zero:
            _check_absorption_integrable(prob)
    if prob.mu_atoms:
        base = base + apply_RD(kern, grid, atoms=prob.mu_atoms, x=nodes)
    if prob.f.is_zero:
        u = base
        trace, meta = [], {"converged": True, "monotone_up_slack": 0.0,
                           "monotone_down_slack": 0.0, "final_inner_residual": 0.0}
    else:
        prob.f.check_monotone(nodes)
        W = green_matrix(kern, grid)
        u, trace, meta = solve_ladder(base, W, prob.f, nodes, ladder)
        meta["green_matrix"] = W
    res = float(np.max(np.abs(u - base - (meta.get("green_matrix", 0.0) @ prob.f(nodes, u)
                                          if not prob.f.is_zero else 0.0))))
    return Solution(u=u, residuals={"fixed_point": res}, ladder_trace=trace,
                    converged=meta["converged"],
                    meta={"x": nodes, "grid": grid, "problem": prob,
                          "monotone_up_slack": meta["monotone_up_slack"],
                          "monotone_down_slack": meta["monotone_down_slack"]})


def continuum_callable(prob: ContinuumProblem, sol: Solution):
    """u as a function on the line: interpolated inside, the datum outside."""
    nodes = sol.meta["x"]

    def u_fn(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.empty_like(y)
        inside = np.abs(y) < 1.0
        out[inside] = np.interp(y[inside], nodes, sol.u)
        out[~inside] = prob.g(y[~inside])
        return out

    return u_fn


def projective_exhaustion_defects(prob: ContinuumProblem, sol: Solution,
                                  probes=(0.0, 0.25, -0.25)) -> np.ndarray:
    """Gap |P_V(u) - exit average of g| at probes, one row per nest level."""
    kern, grid = prob.kernels, prob.grid
    u_fn = continuum_callable(prob, sol)
    pdg = apply_PD(kern, grid, prob.g, x=np.asarray(probes, dtype=float))
    rows = []
    for radius in prob.nest_radii():
        vals = []
        for j, x in enumerate(np.asarray(probes, dtype=float)):
            pv = apply_PV_interval(kern, radius, u_fn, x, y_hi=1.0)
            pv += _pv_exterior(kern, radius, prob.g, x, grid)
            vals.append(abs(pv - pdg[j]))
        rows.append(vals)
    return np.asarray(rows)


def example77_report(prob: ContinuumProblem, sol: Solution) -> dict:
    """Weighted-norm ledger for the interval problem.

    Interior weight is dist-to-boundary^(alpha/2); the exterior datum is
    measured against min(dist^(-alpha/2), dist^(-alpha-1)).  The constant in
    the bound is not asserted, only the observed ratio is reported.
    """
    kern, grid = prob.kernels, prob.grid
    a = kern.alpha
    nodes, w = grid.interior_x, grid.interior_w
    delta = 1.0 - np.abs(nodes)
    wgt = delta ** (a / 2.0)
    fu = prob.f(nodes, sol.u)
    f0 = prob.f(nodes, np.zeros_like(nodes))
    lhs_u = float(np.sum(w * np.abs(sol.u)))
    lhs_f = float(np.sum(w * np.abs(fu) * wgt))
    rhs_f0 = float(np.sum(w * np.abs(f0) * wgt))
    rhs_mu = float(sum(abs(wt) * (1.0 - abs(pos)) ** (a / 2.0) for pos, wt in prob.mu_atoms))
    dist_ext = np.abs(grid.exterior_x) - 1.0
    wgt_ext = np.minimum(dist_ext ** (-a / 2.0), dist_ext ** (-a - 1.0))
    gv = np.abs(prob.g(grid.exterior_x))
    rhs_g = float(np.sum(grid.exterior_w * gv * wgt_ext))
    s = prob.g.tail_exponent
    c_tail = float(np.abs(prob.g(np.asarray([grid.radius]))[0])) * grid.radius ** (-s) \
        + float(np.abs(prob.g(np.asarray([-grid.radius]))[0])) * grid.radius ** (-s)
    rhs_g += c_tail * grid.radius ** (s - a - 1.0) / (a + 1.0 - s)
    rhs = rhs_f0 + rhs_mu + rhs_g + prob.nu_plus + prob.nu_minus
    lhs = lhs_u + lhs_f
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else float("inf"))
    return {"lhs_l1": lhs_u, "lhs_weighted_absorption": lhs_f,
            "rhs_absorption_at_zero": rhs_f0, "rhs_measure": rhs_mu,
            "rhs_exterior": rhs_g, "ratio": ratio}
