"""Octonions, left-multiplication complex structures and the 6-sphere lift.

The multiplication table is generated by Cayley-Dickson doubling of the
quaternions (i j = k convention): (a, b)(c, d) = (a c - d* b, d a + b c*).
Basis order: e0 = 1, e1 = i, e2 = j, e3 = k, e4 = (0, 1), e5 = (0, i),
e6 = (0, j), e7 = (0, k).  Norm multiplicativity guards the table against
transcription errors.
"""
from __future__ import annotations

import numpy as np

from . import immersion


class NotUnitImaginary(Exception):
    pass


class LiftPropertyViolated(Exception):
    pass


def _quaternion_table():
    T = np.zeros((4, 4, 4))
    T[0, :, :] = np.eye(4)
    T[:, 0, :] = np.eye(4)
    for i in (1, 2, 3):
        T[i, i, 0] = -1.0
    cyc = {(1, 2): 3, (2, 3): 1, (3, 1): 2}
    for (i, j), k in cyc.items():
        T[i, j, k] = 1.0
        T[j, i, k] = -1.0
    return T


def _cayley_dickson(T):
    """Double an algebra-with-conjugation given by table T (conj flips e1..)."""
    n = T.shape[0]
    conj = -np.eye(n)
    conj[0, 0] = 1.0

    def mul(a, b):
        return np.einsum("i,j,ijk->k", a, b, T)

    N = 2 * n
    out = np.zeros((N, N, N))
    eye = np.eye(n)
    for i in range(N):
        a = eye[i] if i < n else np.zeros(n)
        b = eye[i - n] if i >= n else np.zeros(n)
        for j in range(N):
            c = eye[j] if j < n else np.zeros(n)
            d = eye[j - n] if j >= n else np.zeros(n)
            first = mul(a, c) - mul(conj @ d, b)
            second = mul(d, a) + mul(b, conj @ c)
            out[i, j, :n] = first
            out[i, j, n:] = second
    return out


OCTONION_TABLE = _cayley_dickson(_quaternion_table())


def multiply(a, b):
    """Octonion product; supports leading broadcast axes on 8-vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.einsum("...i,...j,ijk->...k", a, b, OCTONION_TABLE)


def conjugate(a):
    a = np.asarray(a, dtype=float)
    out = -a.copy()
    out[..., 0] = a[..., 0]
    return out


def norm(a):
    return np.linalg.norm(np.asarray(a, dtype=float), axis=-1)


def basis_unit(i):
    e = np.zeros(8)
    e[i] = 1.0
    return e


def left_mult_structure(q, tol: float = 1e-8):
    """L_q with L_q x = q x; an orthogonal complex structure for unit imaginary q."""
    q = np.asarray(q, dtype=float)
    if abs(norm(q) - 1.0) > tol or abs(q[..., 0]) > tol:
        raise NotUnitImaginary("left multiplication needs a unit imaginary octonion")
    return np.einsum("i,ijk->kj", q, OCTONION_TABLE)


def _left_mult_field(q):
    return np.einsum("...i,ijk->...kj", np.asarray(q, dtype=float), OCTONION_TABLE)


def canonical_lift(field: immersion.ImmersionField, tol: float = 1e-8):
    """The 6-sphere valued lift of a conformal immersion into R^8.

    q = e2 * conj(e1) for the oriented orthonormal tangent basis (e1, e2);
    this order makes left multiplication rotate dphi(du) onto dphi(dv),
    which the function asserts (LiftPropertyViolated on failure).  Returns
    (q field, TwistorField wrapping j = L_q).
    """
    if field.ambient_dim != 8:
        raise ValueError("the octonion lift lives in R^8")
    if field.branch_mask.any():
        raise immersion.NotImmersed("octonion lift across branch points")
    q = multiply(field.e2, conjugate(field.e1))
    qerr = max(float(np.max(np.abs(norm(q) - 1.0))), float(np.max(np.abs(q[..., 0]))))
    if qerr > tol:
        raise immersion.NotImmersed(f"tangent frame degenerate: q off S^6 by {qerr:.3e}")
    j = _left_mult_field(q)
    resid = np.einsum("uvij,uvj->uvi", j, field.dphi_u) - field.dphi_v
    scale = float(np.max(field.lam))
    rel = float(np.max(np.linalg.norm(resid, axis=-1))) / max(scale, 1e-30)
    if rel > tol:
        raise LiftPropertyViolated(f"j dphi(du) != dphi(dv) (relative residual {rel:.3e})")
    tw = immersion.lift_from_octonion_structure(field, j)
    return q, tw
