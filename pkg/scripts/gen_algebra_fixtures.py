#!/usr/bin/env python3
"""Regenerate the shipped algebra fixture JSON files.

Each file holds {name, ambient_dim, basis, J} with matrices as row-major
lists of floats.  Bases are written unnormalised; the loader normalises.
"""
import json
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "twistorsys" / "data"


def complex_to_real(Z):
    """2x2 complex -> 4x4 real, A + iB -> [[A, -B], [B, A]]."""
    A, B = Z.real, Z.imag
    top = np.hstack([A, -B])
    bot = np.hstack([B, A])
    return np.vstack([top, bot])


def su2_order4():
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    basis = [complex_to_real(1j * s) for s in (sz, sy, sx)]
    J = complex_to_real(np.diag([np.exp(1j * np.pi / 4), np.exp(-1j * np.pi / 4)]))
    return {"name": "su2_order4", "ambient_dim": 4,
            "basis": [b.reshape(-1).tolist() for b in basis],
            "J": J.reshape(-1).tolist()}


def rot_block():
    return np.array([[0.0, -1.0], [1.0, 0.0]])


def so5_s4():
    basis = []
    for i in range(5):
        for j in range(i + 1, 5):
            E = np.zeros((5, 5))
            E[i, j] = 1.0
            E[j, i] = -1.0
            basis.append(E)
    J = np.eye(5)
    J[0:2, 0:2] = rot_block()
    J[2:4, 2:4] = rot_block()
    return {"name": "so5_s4", "ambient_dim": 5,
            "basis": [b.reshape(-1).tolist() for b in basis],
            "J": J.reshape(-1).tolist()}


def se4_r4():
    basis = []
    for i in range(4):
        for j in range(i + 1, 4):
            E = np.zeros((5, 5))
            E[i, j] = 1.0
            E[j, i] = -1.0
            basis.append(E)
    for i in range(4):
        E = np.zeros((5, 5))
        E[i, 4] = 1.0
        basis.append(E)
    J = np.eye(5)
    J[0:2, 0:2] = rot_block()
    J[2:4, 2:4] = rot_block()
    return {"name": "se4_r4", "ambient_dim": 5,
            "basis": [b.reshape(-1).tolist() for b in basis],
            "J": J.reshape(-1).tolist()}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for fx in (su2_order4(), so5_s4(), se4_r4()):
        path = OUT / f"{fx['name']}.json"
        path.write_text(json.dumps(fx, indent=1) + "\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
