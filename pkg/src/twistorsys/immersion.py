"""Conformal immersions into model spaces on conformal grids.

Fixtures ship analytic first derivatives and adapted frames, so the
conformality invariant holds at roundoff and every discretised quantity
(second fundamental form, connection coefficients, divergences) is built
from centered stencils applied to smooth sampled data.  Frame components:
tangent indices run over (e1, e2), normal indices over the normal frame
rows; Hom(T, N) fields are stored as (nu, nv, q, 2) matrices per 1-form
slot.  Hodge star on 1-forms: *du = dv, *dv = -du.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage

from . import symspace
from .forms import ResidualReport, SurfaceGrid, partial_u, partial_v


class ImmersionError(Exception):
    pass


class NotConformal(ImmersionError):
    pass


class BranchPoint(ImmersionError):
    pass


class NotImmersed(ImmersionError):
    pass


class FrameDiscontinuity(ImmersionError):
    pass


class MaskedPoint(ImmersionError):
    pass


@dataclass
class ImmersionField:
    grid: SurfaceGrid
    space: symspace.ModelSpace
    phi: np.ndarray            # (nu, nv, m)
    dphi_u: np.ndarray         # (nu, nv, m) analytic first derivatives
    dphi_v: np.ndarray
    conformal_factor: np.ndarray   # (nu, nv), lambda^2 = |d_u phi|^2
    e1: np.ndarray             # (nu, nv, m) orthonormal tangent frame
    e2: np.ndarray
    normal_frame: np.ndarray   # (nu, nv, q, m) orthonormal normal frame
    branch_mask: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.branch_mask is None:
            self.branch_mask = np.zeros((self.grid.nu, self.grid.nv), dtype=bool)

    @property
    def ambient_dim(self) -> int:
        return self.phi.shape[-1]

    @property
    def normal_rank(self) -> int:
        return self.normal_frame.shape[-2]

    @property
    def lam(self):
        return np.sqrt(self.conformal_factor)

    @property
    def n1(self):
        return self.normal_frame[..., 0, :]

    @property
    def n2(self):
        return self.normal_frame[..., 1, :]

    def report_mask(self, margin: int = 1):
        mask = self.grid.interior_mask(margin)
        if self.branch_mask.any():
            bad = scipy.ndimage.binary_dilation(self.branch_mask, iterations=max(margin, 1) + 1)
            mask = mask & ~bad
        return mask

    def conformality_residual(self) -> float:
        nu2 = np.sum(self.dphi_u ** 2, axis=-1)
        nv2 = np.sum(self.dphi_v ** 2, axis=-1)
        cross = np.sum(self.dphi_u * self.dphi_v, axis=-1)
        scale = max(float(np.mean(nu2)), 1e-30)
        mask = ~self.branch_mask
        return float(np.max(np.maximum(np.abs(nu2 - nv2), 2.0 * np.abs(cross))[mask]) / scale)


@dataclass
class TwistorField:
    grid: SurfaceGrid
    sign: int                  # +1 or -1: requested orientation component
    j_ambient: np.ndarray      # (nu, nv, m, m)
    j_T: np.ndarray            # (nu, nv, 2, 2) frame components on the tangent
    j_N: np.ndarray            # (nu, nv, q, q) frame components on the normal
    eps: int                   # rotation sense on the normal frame


@dataclass
class SecondFundamentalForm:
    """Symmetric bilinear form in normal-frame coefficients.

    coeffs[..., s, p] = <II(e_a, e_b), n_p> for slots s = (11, 12, 22);
    crosscheck_12 holds the mixed slot differenced the other way round.
    """

    grid: SurfaceGrid
    coeffs: np.ndarray          # (nu, nv, 3, q)
    crosscheck_12: np.ndarray   # (nu, nv, q)

    def hom(self):
        """As a Hom(T, N)-valued 1-form in frame slots: (nu, nv, 2, q, 2)."""
        c = self.coeffs
        nu, nv, _, q = c.shape
        M = np.zeros((nu, nv, 2, q, 2))
        M[..., 0, :, 0] = c[..., 0, :]
        M[..., 0, :, 1] = c[..., 1, :]
        M[..., 1, :, 0] = c[..., 1, :]
        M[..., 1, :, 1] = c[..., 2, :]
        return M


@dataclass
class SplitII:
    plus: np.ndarray    # (nu, nv, 2, q, 2) Hom slots commuting with j
    minus: np.ndarray   # anticommuting part


# --------------------------------------------------------------------- fixtures

def _grid(n, lo_u, hi_u, lo_v, hi_v, periodic_u=False, periodic_v=False):
    if periodic_u:
        hu = (hi_u - lo_u) / n
    else:
        hu = (hi_u - lo_u) / (n - 1)
    if periodic_v:
        hv = (hi_v - lo_v) / n
    else:
        hv = (hi_v - lo_v) / (n - 1)
    return SurfaceGrid(nu=n, nv=n, hu=hu, hv=hv, periodic_u=periodic_u,
                       periodic_v=periodic_v, u0=lo_u, v0=lo_v)


def _stack(*comps):
    return np.stack(np.broadcast_arrays(*comps), axis=-1)


def _plane(params, U, V):
    Z = np.zeros_like(U)
    O = np.ones_like(U)
    phi = _stack(U, V, Z, Z)
    return dict(phi=phi, dphi_u=_stack(O, Z, Z, Z), dphi_v=_stack(Z, O, Z, Z),
                e1=_stack(O, Z, Z, Z), e2=_stack(Z, O, Z, Z),
                normals=[_stack(Z, Z, O, Z), _stack(Z, Z, Z, O)])


def _complex_line(params, U, V):
    # a holomorphic curve in the Kahler plane: maximally non-Lagrangian
    return _plane(params, U, V)


def _lagrangian_plane(params, U, V):
    Z = np.zeros_like(U)
    O = np.ones_like(U)
    phi = _stack(U, Z, V, Z)
    return dict(phi=phi, dphi_u=_stack(O, Z, Z, Z), dphi_v=_stack(Z, Z, O, Z),
                e1=_stack(O, Z, Z, Z), e2=_stack(Z, Z, O, Z),
                normals=[_stack(Z, O, Z, Z), _stack(Z, Z, Z, O)])


def _round_sphere(params, U, V):
    # stereographic chart of the round 2-sphere of radius r inside R^3 x {0}
    r = params.get("r", 1.0)
    D = 1.0 + U ** 2 + V ** 2
    Z = np.zeros_like(U)
    phi = _stack(2 * r * U / D, 2 * r * V / D, r * (U ** 2 + V ** 2 - 1) / D, Z)
    dphi_u = _stack(2 * r * (D - 2 * U ** 2) / D ** 2, -4 * r * U * V / D ** 2,
                    4 * r * U / D ** 2, Z)
    dphi_v = _stack(-4 * r * U * V / D ** 2, 2 * r * (D - 2 * V ** 2) / D ** 2,
                    4 * r * V / D ** 2, Z)
    lam = 2 * r / D
    return dict(phi=phi, dphi_u=dphi_u, dphi_v=dphi_v,
                e1=dphi_u / lam[..., None], e2=dphi_v / lam[..., None],
                normals=[phi / r, _stack(Z, Z, Z, np.ones_like(U))])


def _clifford_torus(params, U, V):
    a = params.get("a", 1.0 / math.sqrt(2.0))
    cu, su, cv, sv = np.cos(U), np.sin(U), np.cos(V), np.sin(V)
    Z = np.zeros_like(U)
    phi = a * _stack(cu, su, cv, sv)
    dphi_u = a * _stack(-su, cu, Z, Z)
    dphi_v = a * _stack(Z, Z, -sv, cv)
    s2 = 1.0 / math.sqrt(2.0)
    return dict(phi=phi, dphi_u=dphi_u, dphi_v=dphi_v,
                e1=_stack(-su, cu, Z, Z), e2=_stack(Z, Z, -sv, cv),
                normals=[s2 * _stack(cu, su, cv, sv), s2 * _stack(-cu, -su, cv, sv)])


def _clifford_torus_s4(params, U, V):
    # the same torus as a minimal surface of the unit 4-sphere in R^5
    cu, su, cv, sv = np.cos(U), np.sin(U), np.cos(V), np.sin(V)
    Z = np.zeros_like(U)
    O = np.ones_like(U)
    s2 = 1.0 / math.sqrt(2.0)
    phi = s2 * _stack(cu, su, cv, sv, Z)
    dphi_u = s2 * _stack(-su, cu, Z, Z, Z)
    dphi_v = s2 * _stack(Z, Z, -sv, cv, Z)
    return dict(phi=phi, dphi_u=dphi_u, dphi_v=dphi_v,
                e1=_stack(-su, cu, Z, Z, Z), e2=_stack(Z, Z, -sv, cv, Z),
                normals=[s2 * _stack(cu, su, -cv, -sv, Z), _stack(Z, Z, Z, Z, O)])


def _product_torus(params, U, V):
    r1 = params.get("r1", 1.0)
    r2 = params.get("r2", 0.6)
    cu, su = np.cos(U / r1), np.sin(U / r1)
    cv, sv = np.cos(V / r2), np.sin(V / r2)
    Z = np.zeros_like(U)
    phi = _stack(r1 * cu, r1 * su, r2 * cv, r2 * sv)
    return dict(phi=phi, dphi_u=_stack(-su, cu, Z, Z), dphi_v=_stack(Z, Z, -sv, cv),
                e1=_stack(-su, cu, Z, Z), e2=_stack(Z, Z, -sv, cv),
                normals=[_stack(cu, su, Z, Z), _stack(Z, Z, cv, sv)])


def _helicoid(params, U, V):
    Z = np.zeros_like(U)
    ch, sh = np.cosh(U), np.sinh(U)
    cv, sv = np.cos(V), np.sin(V)
    phi = _stack(sh * cv, sh * sv, V, Z)
    dphi_u = _stack(ch * cv, ch * sv, Z, Z)
    dphi_v = _stack(-sh * sv, sh * cv, np.ones_like(U), Z)
    return dict(phi=phi, dphi_u=dphi_u, dphi_v=dphi_v,
                e1=dphi_u / ch[..., None], e2=dphi_v / ch[..., None],
                normals=[_stack(sv / ch, -cv / ch, sh / ch, Z),
                         _stack(Z, Z, Z, np.ones_like(U))])


def _revolution_torus_chart(eps):
    """Closed-form isothermal chart of the torus of revolution R=1, r=1/2+eps."""
    R, r = 1.0, 0.5 + eps
    a = R / r
    s = math.sqrt(a ** 2 - 1.0) / 2.0
    k = math.sqrt((a + 1.0) / (a - 1.0))
    period_u = 2.0 * math.pi / math.sqrt(a ** 2 - 1.0)
    return R, r, s, k, period_u


def _perturbed_torus(params, U, V):
    # non-CMC torus of revolution in R^3 x {0}; u is the flat isothermal
    # coordinate along the profile, v the azimuth
    eps = params.get("eps", 0.1)
    R, r, s, k, _ = _revolution_torus_chart(eps)
    theta = 2.0 * np.arctan2(k * np.sin(s * U), np.cos(s * U))
    ct, st = np.cos(theta), np.sin(theta)
    cv, sv = np.cos(V), np.sin(V)
    rho = R + r * ct
    Z = np.zeros_like(U)
    phi = _stack(rho * cv, rho * sv, r * st, Z)
    e1 = _stack(-st * cv, -st * sv, ct, Z)
    e2 = _stack(-sv, cv, Z, Z)
    return dict(phi=phi, dphi_u=rho[..., None] * e1, dphi_v=rho[..., None] * e2,
                e1=e1, e2=e2,
                normals=[_stack(ct * cv, ct * sv, st, Z),
                         _stack(Z, Z, Z, np.ones_like(U))])


def _saddle_arclength(x):
    """Arclength of y = 3 x^2 from 0: (x sqrt(1+36x^2) + asinh(6x)/6) / 2."""
    return 0.5 * (x * np.sqrt(1.0 + 36.0 * x ** 2) + np.arcsinh(6.0 * x) / 6.0)


def _invert_arclength(svals):
    x = np.array(svals, dtype=float)
    for _ in range(60):
        f = _saddle_arclength(x) - svals
        x = x - f / np.sqrt(1.0 + 36.0 * x ** 2)
    return x


def _lagrangian_graph(params, U, V):
    potential = params.get("potential", "saddle")
    Z = np.zeros_like(U)
    O = np.ones_like(U)
    if potential == "saddle":
        # gradient graph of x1^2 - x2^2: conformal as-is since Hess^2 = 4 I
        phi = _stack(U, 2 * U, V, -2 * V)
        s5 = 1.0 / math.sqrt(5.0)
        return dict(phi=phi, dphi_u=_stack(O, 2 * O, Z, Z), dphi_v=_stack(Z, Z, O, -2 * O),
                    e1=s5 * _stack(O, 2 * O, Z, Z), e2=s5 * _stack(Z, Z, O, -2 * O),
                    normals=[s5 * _stack(-2 * O, O, Z, Z), s5 * _stack(Z, Z, 2 * O, O)])
    if potential == "cubic":
        # gradient graph of x1^3: a cylinder over the parabola y1 = 3 x1^2,
        # parametrised by arclength u of the profile (isothermal, lambda = 1)
        x = _invert_arclength(U)
        xp = 1.0 / np.sqrt(1.0 + 36.0 * x ** 2)   # dx/du along the profile
        phi = _stack(x, 3.0 * x ** 2, V, Z)
        e1 = _stack(xp, 6.0 * x * xp, Z, Z)
        e2 = _stack(Z, Z, O, Z)
        return dict(phi=phi, dphi_u=e1, dphi_v=e2, e1=e1, e2=e2,
                    normals=[_stack(-6.0 * x * xp, xp, Z, Z), _stack(Z, Z, Z, O)])
    raise KeyError(f"unknown potential {potential!r}")


def _graph(params, U, V):
    # generic graph over the plane: a non-conformal negative control
    amp = params.get("amplitude", 0.3)
    Z = np.zeros_like(U)
    O = np.ones_like(U)
    phi = _stack(U, V, amp * np.sin(U) * np.sin(V), Z)
    dphi_u = _stack(O, Z, amp * np.cos(U) * np.sin(V), Z)
    dphi_v = _stack(Z, O, amp * np.sin(U) * np.cos(V), Z)
    return dict(phi=phi, dphi_u=dphi_u, dphi_v=dphi_v, gram_schmidt=True)


def _branched_disk(params, U, V):
    # image of z -> z^2: conformal with a branch point at the origin
    Z = np.zeros_like(U)
    phi = _stack(U ** 2 - V ** 2, 2 * U * V, Z, Z)
    dphi_u = _stack(2 * U, 2 * V, Z, Z)
    dphi_v = _stack(-2 * V, 2 * U, Z, Z)
    return dict(phi=phi, dphi_u=dphi_u, dphi_v=dphi_v, gram_schmidt=True)


def _octonion_plane(params, U, V):
    Z = np.zeros_like(U)
    O = np.ones_like(U)
    i, j = params.get("axes", (0, 1))
    comps_phi = [Z] * 8
    comps_phi[i] = U
    comps_phi[j] = V
    du = [Z] * 8
    du[i] = O
    dv = [Z] * 8
    dv[j] = O
    normals = []
    for k in range(8):
        if k in (i, j):
            continue
        nk = [Z] * 8
        nk[k] = O
        normals.append(_stack(*nk))
    return dict(phi=_stack(*comps_phi), dphi_u=_stack(*du), dphi_v=_stack(*dv),
                e1=_stack(*du), e2=_stack(*dv), normals=normals)


def _octonion_graph(params, U, V):
    # the holomorphic curve (z, z^2) inside the first two complex slots of R^8
    Z = np.zeros_like(U)
    O = np.ones_like(U)
    phi = _stack(U, V, U ** 2 - V ** 2, 2 * U * V, Z, Z, Z, Z)
    dphi_u = _stack(O, Z, 2 * U, 2 * V, Z, Z, Z, Z)
    dphi_v = _stack(Z, O, -2 * V, 2 * U, Z, Z, Z, Z)
    return dict(phi=phi, dphi_u=dphi_u, dphi_v=dphi_v, gram_schmidt=True)


def _default_grid(kind, params, n):
    if kind in ("clifford_torus", "clifford_torus_s4"):
        return _grid(n, 0.0, 2 * math.pi, 0.0, 2 * math.pi, True, True)
    if kind == "product_torus":
        r1 = params.get("r1", 1.0)
        r2 = params.get("r2", 0.6)
        return _grid(n, 0.0, 2 * math.pi * r1, 0.0, 2 * math.pi * r2, True, True)
    if kind == "perturbed_torus":
        period_u = _revolution_torus_chart(params.get("eps", 0.1))[4]
        return _grid(n, 0.0, period_u, 0.0, 2 * math.pi, True, True)
    if kind == "round_sphere":
        return _grid(n, -0.8, 0.8, -0.8, 0.8)
    if kind == "helicoid":
        return _grid(n, -0.7, 0.7, -0.7, 0.7)
    if kind == "lagrangian_graph" and params.get("potential", "saddle") == "cubic":
        s_lo, s_hi = _saddle_arclength(np.array([0.15, 0.75]))
        return _grid(n, float(s_lo), float(s_hi), 0.0, 0.6)
    if kind in ("octonion_graph",):
        return _grid(n, -0.6, 0.6, -0.6, 0.6)
    return _grid(n, -1.0, 1.0, -1.0, 1.0)


FIXTURE_BUILDERS = {
    "plane": (_plane, "euclidean4"),
    "graph": (_graph, "euclidean4"),
    "round_sphere": (_round_sphere, "euclidean4"),
    "clifford_torus": (_clifford_torus, "euclidean4"),
    "clifford_torus_s4": (_clifford_torus_s4, "sphere4"),
    "product_torus": (_product_torus, "complex2"),
    "perturbed_torus": (_perturbed_torus, "euclidean4"),
    "helicoid": (_helicoid, "euclidean4"),
    "lagrangian_plane": (_lagrangian_plane, "complex2"),
    "lagrangian_graph": (_lagrangian_graph, "complex2"),
    "complex_line": (_complex_line, "complex2"),
    "branched_disk": (_branched_disk, "euclidean4"),
    "octonion_plane": (_octonion_plane, "euclidean8"),
    "octonion_graph": (_octonion_graph, "euclidean8"),
}


def list_fixture_kinds():
    return sorted(FIXTURE_BUILDERS)


def build_immersion(kind, params=None, grid=None, n=32, space=None,
                    tol_conf=1e-6) -> ImmersionField:
    """Sample a named fixture surface with adapted frames.

    Analytic fixtures carry exact derivatives and frames; graph-type
    fixtures fall back to deterministic Gram-Schmidt frames.  Raises
    NotConformal above `tol_conf` unless params allow_nonconformal,
    BranchPoint when degenerate points dominate the grid.
    """
    params = dict(params or {})
    if kind not in FIXTURE_BUILDERS:
        raise KeyError(f"unknown fixture kind {kind!r}")
    builder, default_space = FIXTURE_BUILDERS[kind]
    if grid is None:
        grid = _default_grid(kind, params, n)
    U, V = grid.mesh()
    data = builder(params, U, V)
    if space is None:
        space = symspace.model_space(default_space)
    if space.ambient_dim != data["phi"].shape[-1]:
        raise ValueError(f"fixture {kind!r} is {data['phi'].shape[-1]}-dimensional, "
                         f"model space expects {space.ambient_dim}")

    conf = np.sum(data["dphi_u"] ** 2, axis=-1)
    branch = conf < 1e-10
    if np.mean(branch) > 0.1:
        raise BranchPoint(f"fixture {kind!r}: {np.mean(branch):.0%} of the grid is degenerate")

    if data.get("gram_schmidt"):
        e1, e2, normal_frame, disc = _gram_schmidt_frames(data["dphi_u"], data["dphi_v"], branch)
    else:
        e1, e2 = data["e1"], data["e2"]
        normal_frame = np.stack(data["normals"], axis=-2)
        disc = False

    out = ImmersionField(grid=grid, space=space, phi=data["phi"],
                         dphi_u=data["dphi_u"], dphi_v=data["dphi_v"],
                         conformal_factor=conf, e1=e1, e2=e2,
                         normal_frame=normal_frame, branch_mask=branch,
                         meta={"kind": kind, "params": params,
                               "frame_discontinuity": disc})
    resid = out.conformality_residual()
    out.meta["conformality_residual"] = resid
    if resid > tol_conf and not params.get("allow_nonconformal"):
        raise NotConformal(f"fixture {kind!r} conformality residual {resid:.3e} > {tol_conf:.1e}")
    return out


def _gram_schmidt_frames(dphi_u, dphi_v, branch):
    lam = np.sqrt(np.maximum(np.sum(dphi_u ** 2, axis=-1), 1e-30))
    e1 = dphi_u / lam[..., None]
    w = dphi_v - np.sum(dphi_v * e1, axis=-1, keepdims=True) * e1
    e2 = w / np.maximum(np.linalg.norm(w, axis=-1, keepdims=True), 1e-30)
    m = dphi_u.shape[-1]
    q = m - 2
    accepted = []
    for axis in range(m):
        if len(accepted) == q:
            break
        cand = np.zeros_like(e1)
        cand[..., axis] = 1.0
        for prev in [e1, e2] + accepted:
            cand = cand - np.sum(cand * prev, axis=-1, keepdims=True) * prev
        norms = np.linalg.norm(cand, axis=-1)
        if np.min(norms[~branch]) < 0.35:
            continue
        # sign is coherent by construction: the component along the generating
        # axis equals |cand|^2 before normalisation, hence positive everywhere
        cand = cand / np.maximum(norms[..., None], 1e-30)
        accepted.append(cand)
    if len(accepted) < q:
        raise FrameDiscontinuity("could not complete a stable normal frame from the axes")
    normal_frame = np.stack(accepted, axis=-2)
    disc = _max_neighbor_jump(e1) > 0.5 or _max_neighbor_jump(normal_frame) > 0.5
    return e1, e2, normal_frame, bool(disc)


def _max_neighbor_jump(f):
    du = np.linalg.norm(np.diff(f, axis=0), axis=-1)
    dv = np.linalg.norm(np.diff(f, axis=1), axis=-1)
    return max(float(np.max(du, initial=0.0)), float(np.max(dv, initial=0.0)))


# ---------------------------------------------------------- second fundamental

def second_fundamental_form(field: ImmersionField, space=None) -> SecondFundamentalForm:
    """II(e_a, e_b) in normal-frame coefficients by centered differences.

    For the sphere target the ambient covariant derivative is the R^5
    derivative projected to the sphere tangent space; since the normal
    frame is orthogonal to the position, taking normal components of the
    raw derivative is exactly that projection.
    """
    space = space or field.space
    grid = field.grid
    D11 = partial_u(grid, field.dphi_u)
    D12 = 0.5 * (partial_u(grid, field.dphi_v) + partial_v(grid, field.dphi_u))
    D12_alt = partial_v(grid, field.dphi_u)
    D22 = partial_v(grid, field.dphi_v)
    inv = 1.0 / np.maximum(field.conformal_factor, 1e-30)
    N = field.normal_frame
    coeffs = np.stack([np.einsum("uvqm,uvm,uv->uvq", N, D, inv)
                       for D in (D11, D12, D22)], axis=-2)
    cross = np.einsum("uvqm,uvm,uv->uvq", N, D12_alt, inv)
    return SecondFundamentalForm(grid=grid, coeffs=coeffs, crosscheck_12=cross)


def mean_curvature(II: SecondFundamentalForm):
    """H = (1/2) trace II in normal-frame coefficients: (nu, nv, q)."""
    return 0.5 * (II.coeffs[..., 0, :] + II.coeffs[..., 2, :])


# ----------------------------------------------------------------- twistor lift

def twistor_lift(field: ImmersionField, sign: int = +1) -> TwistorField:
    """Canonical lift: +pi/2 rotation on the tangent, +/-pi/2 on the normal.

    The normal rotation sense eps is fixed by the requested orientation
    component: the 4-frame (e1, j e1, n1, j n1) must be positively
    (sign=+1) or negatively oriented against the ambient volume form (for
    the sphere, the volume form contracted with the outward position).
    """
    if field.normal_rank != 2:
        raise NotImmersed("canonical lifts need normal rank 2")
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    m = field.ambient_dim
    cols = [field.e1, field.e2, field.n1, field.n2]
    if m == 5:
        r = field.space.radius or 1.0
        cols = [field.phi / r] + cols
    M = np.stack(cols, axis=-1)
    det = np.linalg.det(M)
    mask = field.report_mask(0)
    if np.min(np.abs(det[mask])) < 1e-6:
        raise NotImmersed("degenerate adapted frame")
    eps_field = sign * np.sign(det)
    vals = np.unique(eps_field[mask])
    if vals.size != 1:
        raise FrameDiscontinuity("orientation flips across the grid")
    eps = int(vals[0])

    e1, e2, n1, n2 = field.e1, field.e2, field.n1, field.n2
    j = (np.einsum("uvi,uvj->uvij", e2, e1) - np.einsum("uvi,uvj->uvij", e1, e2)
         + eps * (np.einsum("uvi,uvj->uvij", n2, n1) - np.einsum("uvi,uvj->uvij", n1, n2)))
    nu, nv = field.grid.nu, field.grid.nv
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    j_T = np.broadcast_to(rot, (nu, nv, 2, 2)).copy()
    j_N = np.broadcast_to(eps * rot, (nu, nv, 2, 2)).copy()
    return TwistorField(grid=field.grid, sign=sign, j_ambient=j, j_T=j_T, j_N=j_N, eps=eps)


def flip_tangent_orientation(field: ImmersionField, tw: TwistorField) -> TwistorField:
    """The anti-holomorphic twin: reverse the tangent rotation, keep the normal."""
    e1, e2, n1, n2 = field.e1, field.e2, field.n1, field.n2
    j = (-np.einsum("uvi,uvj->uvij", e2, e1) + np.einsum("uvi,uvj->uvij", e1, e2)
         + tw.eps * (np.einsum("uvi,uvj->uvij", n2, n1) - np.einsum("uvi,uvj->uvij", n1, n2)))
    return TwistorField(grid=tw.grid, sign=tw.sign, j_ambient=j,
                        j_T=-tw.j_T, j_N=tw.j_N, eps=tw.eps)


def lift_from_octonion_structure(field: ImmersionField, j_ambient) -> TwistorField:
    """Wrap an ambient orthogonal complex structure as a TwistorField in frames."""
    e = np.stack([field.e1, field.e2], axis=-2)
    N = field.normal_frame
    j_T = np.einsum("uvam,uvmk,uvbk->uvab", e, j_ambient, e)
    j_N = np.einsum("uvpm,uvmk,uvqk->uvpq", N, j_ambient, N)
    return TwistorField(grid=field.grid, sign=+1, j_ambient=np.asarray(j_ambient),
                        j_T=j_T, j_N=j_N, eps=0)


# ------------------------------------------------------------------ connections

def frame_connection(field: ImmersionField):
    """Connection coefficients of the tangent and normal frames.

    Returns (om_u, om_v, wn_u, wn_v): skew matrices <f_a, d f_b> per
    direction, by centered differences of the frames.
    """
    grid = field.grid
    E = np.stack([field.e1, field.e2], axis=-2)
    N = field.normal_frame

    def coeff(F, dF):
        raw = np.einsum("uvam,uvbm->uvab", F, dF)
        return 0.5 * (raw - np.swapaxes(raw, -1, -2))

    om_u = coeff(E, partial_u(grid, E))
    om_v = coeff(E, partial_v(grid, E))
    wn_u = coeff(N, partial_u(grid, N))
    wn_v = coeff(N, partial_v(grid, N))
    return om_u, om_v, wn_u, wn_v


def split_II(II: SecondFundamentalForm, tw: TwistorField) -> SplitII:
    """II = II_plus + II_minus: j-commuting and j-anticommuting Hom parts.

    Per 1-form slot X: minus = (1/2)(A + j_N A j_T), plus the complement;
    the conjugation C(A) = j_N A j_T is an involution on Hom(T, N).
    """
    M = II.hom()
    conj = np.einsum("uvpq,uvxqb,uvbc->uvxpc", tw.j_N, M, tw.j_T)
    minus = 0.5 * (M + conj)
    plus = 0.5 * (M - conj)
    return SplitII(plus=plus, minus=minus)


def _hom_covariant_divergence(field: ImmersionField, hom_slots):
    """sum_dir nabla_dir of the dir-slot of a Hom-valued 1-form.

    hom_slots has shape (nu, nv, 2, q, 2) with slots evaluated on the
    orthonormal tangent vectors; the slots are rescaled by lambda to
    coordinate components before differencing, so the result is the value
    of d^(nabla, nabla_perp) of the Hodge-starred form on (du, dv).
    """
    grid = field.grid
    om_u, om_v, wn_u, wn_v = frame_connection(field)
    lam = field.lam[..., None, None]
    B_u = lam * hom_slots[..., 0, :, :]
    B_v = lam * hom_slots[..., 1, :, :]
    div = (partial_u(grid, B_u) + wn_u @ B_u - B_u @ om_u
           + partial_v(grid, B_v) + wn_v @ B_v - B_v @ om_v)
    return div


def _frobenius(Mfield):
    return np.linalg.norm(Mfield, axis=(-2, -1))


def _masked_report(name, field, pointwise, margin):
    mask = field.report_mask(margin)
    vals = np.asarray(pointwise)[mask]
    if vals.size == 0:
        raise MaskedPoint("no interior points survive the mask")
    rep = ResidualReport(name)
    return rep.add(field.grid.h, float(np.max(vals)), float(np.sqrt(np.mean(vals ** 2))))


def normal_connection_derivative(field: ImmersionField, H):
    """(nabla_perp_du H, nabla_perp_dv H) in normal coefficients."""
    grid = field.grid
    _, _, wn_u, wn_v = frame_connection(field)
    G_u = partial_u(grid, H) + np.einsum("uvpq,uvq->uvp", wn_u, H)
    G_v = partial_v(grid, H) + np.einsum("uvpq,uvq->uvp", wn_v, H)
    return G_u, G_v


def vertical_harmonicity_residual(field: ImmersionField, tw: TwistorField,
                                  space=None, margin: int = 2) -> ResidualReport:
    """Norm of d^(nabla, nabla_perp) * II_minus over the interior."""
    II = second_fundamental_form(field, space)
    sp = split_II(II, tw)
    div = _hom_covariant_divergence(field, sp.minus)
    return _masked_report("vertical_harmonicity", field, _frobenius(div), margin)


def holomorphic_H_residual(field: ImmersionField, tw: TwistorField,
                           space=None, margin: int = 2) -> ResidualReport:
    """Norm of nabla_perp_du H + j nabla_perp_dv H (the anti-holomorphic part)."""
    II = second_fundamental_form(field, space)
    H = mean_curvature(II)
    G_u, G_v = normal_connection_derivative(field, H)
    resid = G_u + np.einsum("uvpq,uvq->uvp", tw.j_N, G_v)
    return _masked_report("holomorphic_H", field, np.linalg.norm(resid, axis=-1), margin)


def divergence_identity_residual(field: ImmersionField, tw: TwistorField,
                                 space=None, margin: int = 2) -> ResidualReport:
    """Pointwise identity  * d * II_minus = 2 pi_minus(nabla_perp H).

    Holds for every conformal immersion into the shipped space forms,
    solutions and non-solutions alike.
    """
    II = second_fundamental_form(field, space)
    sp = split_II(II, tw)
    inv2 = 1.0 / np.maximum(field.conformal_factor, 1e-30)
    lhs = inv2[..., None, None] * _hom_covariant_divergence(field, sp.minus)
    H = mean_curvature(II)
    G_u, G_v = normal_connection_derivative(field, H)
    inv = 1.0 / np.maximum(field.lam, 1e-30)
    Ghom = np.stack([G_u * inv[..., None], G_v * inv[..., None]], axis=-1)
    conj = np.einsum("uvpq,uvqb,uvbc->uvpc", tw.j_N, Ghom, tw.j_T)
    rhs = Ghom + conj  # = 2 pi_minus(Ghom)
    return _masked_report("divergence_identity", field, _frobenius(lhs - rhs), margin)


def codazzi_identity_residual(field: ImmersionField, space=None,
                              margin: int = 2) -> ResidualReport:
    """Traced Codazzi identity:
    (* d * II)(X) = (R(e_i, X) e_i)^perp + 2 nabla_perp_X H, X in (e1, e2).
    """
    space = space or field.space
    II = second_fundamental_form(field, space)
    M = II.hom()
    inv2 = 1.0 / np.maximum(field.conformal_factor, 1e-30)
    lhs = inv2[..., None, None] * _hom_covariant_divergence(field, M)
    H = mean_curvature(II)
    G_u, G_v = normal_connection_derivative(field, H)
    inv = 1.0 / np.maximum(field.lam, 1e-30)
    Ghom = np.stack([G_u * inv[..., None], G_v * inv[..., None]], axis=-1)
    N = field.normal_frame
    Rterm = np.zeros_like(Ghom)
    for b, Xb in enumerate((field.e1, field.e2)):
        acc = None
        for ei in (field.e1, field.e2):
            Rop = symspace.curvature_operator(space, ei, Xb)
            vec = np.einsum("uvij,uvj->uvi", Rop, ei)
            acc = vec if acc is None else acc + vec
        Rterm[..., :, b] = np.einsum("uvpm,uvm->uvp", N, acc)
    rhs = Rterm + 2.0 * Ghom
    return _masked_report("codazzi_identity", field, _frobenius(lhs - rhs), margin)


def curvature_commutator_residual(field: ImmersionField, tw: TwistorField,
                                  space=None, margin: int = 0) -> ResidualReport:
    """Pointwise |[R(dphi e1, dphi e2), j]|: algebraic, no differencing."""
    space = space or field.space
    Rop = symspace.curvature_operator(space, field.e1, field.e2)
    comm = Rop @ tw.j_ambient - tw.j_ambient @ Rop
    return _masked_report("curvature_commutator", field, _frobenius(comm), margin)
