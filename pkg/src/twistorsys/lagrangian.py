"""Lagrangian surfaces in the flat Kahler plane: Maslov form machinery.

Conventions: omega(X, Y) = <J^N X, Y> with J^N (x1, y1, x2, y2) =
(-y1, x1, -y2, x2); the Maslov 1-form is beta(X) = omega(H, dphi X)
= <dphi X, J^N H> (no 1/pi normalisation).  With these conventions the
anticommuting part of the second fundamental form satisfies
II_minus = -beta * J^N|T, which is the sign the identity check uses.
Co-closedness is reported in divergence form: d*beta = du beta_u + dv
beta_v in the conformal chart (the true codifferential carries an extra
-1/lambda^2, irrelevant for the vanishing test).
"""
from __future__ import annotations

import numpy as np

from . import immersion, symspace
from .forms import ResidualReport, partial_u, partial_v


class NotKahler(Exception):
    pass


class NotLagrangian(Exception):
    pass


def _require_kahler(space: symspace.ModelSpace):
    if space is None or space.kahler is None:
        raise NotKahler("this check needs a model space with a Kahler structure")
    return np.asarray(space.kahler)


def _pullback_omega(field: immersion.ImmersionField, J):
    JX = np.einsum("ij,uvj->uvi", J, field.dphi_u)
    return np.sum(JX * field.dphi_v, axis=-1)


def lagrangian_residual(field: immersion.ImmersionField, space=None,
                        margin: int = 0) -> ResidualReport:
    """Pointwise |omega(du phi, dv phi)|, the only pullback component."""
    space = space or field.space
    J = _require_kahler(space)
    pw = np.abs(_pullback_omega(field, J))
    mask = field.report_mask(margin)
    rep = ResidualReport("lagrangian")
    return rep.add(field.grid.h, float(np.max(pw[mask])),
                   float(np.sqrt(np.mean(pw[mask] ** 2))))


def lagrangian_twistor_check(field: immersion.ImmersionField, tw: immersion.TwistorField,
                             space=None) -> dict:
    """Paired report: sup |{j, J^N}| against sup |omega pullback|.

    The two vanish together exactly when the lift lands in the circle
    bundle of structures anticommuting with the ambient one.
    """
    space = space or field.space
    J = _require_kahler(space)
    anti = np.einsum("uvij,jk->uvik", tw.j_ambient, J) + np.einsum("ij,uvjk->uvik", J, tw.j_ambient)
    mask = field.report_mask(0)
    anti_sup = float(np.max(np.linalg.norm(anti, axis=(-2, -1))[mask]))
    lag_sup = lagrangian_residual(field, space).final_sup
    both_small = anti_sup <= 1e-8 and lag_sup <= 1e-8
    both_large = anti_sup >= 1e-3 and lag_sup >= 1e-3
    return {"anticommutator_sup": anti_sup, "lagrangian_sup": lag_sup,
            "both_small": both_small, "both_large": both_large,
            "consistent": both_small or both_large}


def maslov_form(field: immersion.ImmersionField, space=None, tol: float = 1e-6):
    """beta = iota_H omega as coordinate coefficients (beta_u, beta_v).

    Asserts the defining contraction against the closed form
    beta(X) = <dphi X, J^N H>; raises NotLagrangian above `tol`.
    """
    space = space or field.space
    J = _require_kahler(space)
    if lagrangian_residual(field, space).final_sup > tol:
        raise NotLagrangian("Maslov form needs a Lagrangian immersion")
    II = immersion.second_fundamental_form(field, space)
    Hc = immersion.mean_curvature(II)
    H_amb = np.einsum("uvq,uvqm->uvm", Hc, field.normal_frame)
    JH = np.einsum("ij,uvj->uvi", J, H_amb)
    beta_u = np.sum(JH * field.dphi_u, axis=-1)
    beta_v = np.sum(JH * field.dphi_v, axis=-1)
    # closed-form cross-check (symmetry of the metric): beta(X) = <dphi X, J^N H>
    assert np.max(np.abs(beta_u - np.einsum("uvm,uvm->uv", field.dphi_u, JH))) <= 1e-10
    return beta_u, beta_v


def maslov_identity_residual(field: immersion.ImmersionField, tw: immersion.TwistorField,
                             space=None, margin: int = 2) -> ResidualReport:
    """Norm of II_minus(X, .) + beta(X) J^N|T over slots X in (e1, e2)."""
    space = space or field.space
    J = _require_kahler(space)
    beta_u, beta_v = maslov_form(field, space)
    II = immersion.second_fundamental_form(field, space)
    minus = immersion.split_II(II, tw).minus            # (nu, nv, 2, q, 2)
    E = np.stack([field.e1, field.e2], axis=-2)
    JNT = np.einsum("uvpm,mk,uvbk->uvpb", field.normal_frame, J, E)
    inv = 1.0 / np.maximum(field.lam, 1e-30)
    beta_frame = np.stack([beta_u * inv, beta_v * inv], axis=-1)  # beta(e_a)
    resid = minus + beta_frame[..., :, None, None] * JNT[..., None, :, :]
    pw = np.max(np.linalg.norm(resid, axis=(-2, -1)), axis=-1)
    mask = field.report_mask(margin)
    rep = ResidualReport("maslov_identity")
    return rep.add(field.grid.h, float(np.max(pw[mask])),
                   float(np.sqrt(np.mean(pw[mask] ** 2))))


def hamiltonian_stationary_residual(field: immersion.ImmersionField, space=None,
                                    margin: int = 2) -> ResidualReport:
    """Divergence-form co-closedness of the Maslov form: du beta_u + dv beta_v."""
    space = space or field.space
    beta_u, beta_v = maslov_form(field, space)
    div = partial_u(field.grid, beta_u) + partial_v(field.grid, beta_v)
    mask = field.report_mask(margin)
    rep = ResidualReport("hamiltonian_stationary")
    return rep.add(field.grid.h, float(np.max(np.abs(div)[mask])),
                   float(np.sqrt(np.mean(div[mask] ** 2))))
