"""Two-qubit gates on the 1 2 2 1 | 1 2 2 1 register.

Gates are plain 4x4 complex arrays in the basis order |11>, |13>, |31>, |33>,
where |ab> means left qubit internal label a and right qubit label b.
"""
from __future__ import annotations

import json
from typing import Mapping, Sequence

import numpy as np

from .hilbert import AnyonState, apply_braid, operator_matrix
from .protocol import ProtocolScript, execute

QUBIT = (1, 2, 2, 1)
REGISTER = QUBIT + QUBIT
BASIS = ("11", "13", "31", "33")

_R3 = np.sqrt(3)

EG = np.array([[-0.5, 0, 0, -0.5j * _R3],
               [0, -0.5, -0.5j * _R3, 0],
               [0, -0.5j * _R3, -0.5, 0],
               [-0.5j * _R3, 0, 0, -0.5]])

CEG = np.array([[0.25, 0.25j * _R3, -0.75, 0.25j * _R3],
                [0.25j * _R3, 0.25, 0.25j * _R3, -0.75],
                [-0.75, 0.25j * _R3, 0.25, 0.25j * _R3],
                [0.25j * _R3, -0.75, 0.25j * _R3, 0.25]])

REC4 = np.array([[0, -0.5j * _R3, -0.5, 0],
                 [-0.5j * _R3, 0, 0, -0.5],
                 [-0.5, 0, 0, -0.5j * _R3],
                 [0, -0.5, -0.5j * _R3, 0]])

GOLDEN_GATES = {"EG": EG, "CEG": CEG, "REC4": REC4}

# cycle (1432) on basis positions: 1 -> 4 -> 3 -> 2 -> 1
J = np.zeros((4, 4))
for _src, _dst in ((0, 3), (3, 2), (2, 1), (1, 0)):
    J[_dst, _src] = 1


class GateError(ValueError):
    pass


class LeakageError(GateError):
    pass


# -- states of the register -----------------------------------------------------

def qubit_state(label: int) -> AnyonState:
    return AnyonState.basis(QUBIT, (label, 1), 0)


def register_state(amplitudes: Mapping[str, complex] | Sequence[complex]) -> AnyonState:
    """Normalized register state from {'11': a, ...} or a length-4 vector."""
    if not isinstance(amplitudes, Mapping):
        vec = list(amplitudes)
        if len(vec) != 4:
            raise GateError("need four amplitudes for |11>, |13>, |31>, |33>")
        amplitudes = dict(zip(BASIS, vec))
    amps = {}
    for key, a in amplitudes.items():
        if key not in BASIS:
            raise GateError(f"unknown basis label {key!r}; use one of {BASIS}")
        if a:
            amps[(int(key[0]), 1, 0, 1, int(key[1]), 1)] = a
    return AnyonState.from_labels(REGISTER, 0, amps).normalized()


def register_vector(state: AnyonState, leak_tol: float = 1e-9) -> np.ndarray:
    """Coordinates on |11>, |13>, |31>, |33>; leakage beyond ``leak_tol`` raises."""
    if tuple(state.leaves) != REGISTER or state.total != 0:
        raise LeakageError(f"final anyons {state.leaves} total {state.total} are not two 1 2 2 1 qubits")
    vec = np.array([state.amplitude((int(k[0]), 1, 0, 1, int(k[1]), 1)) for k in BASIS])
    leak = abs(state.norm() ** 2 - np.vdot(vec, vec).real)
    if leak > leak_tol:
        raise LeakageError(f"state leaks {leak:.3g} outside the computational space")
    return vec


def leakage(state: AnyonState) -> float:
    vec = np.array([state.amplitude((int(k[0]), 1, 0, 1, int(k[1]), 1)) for k in BASIS])
    return float(abs(state.norm() ** 2 - np.vdot(vec, vec).real))


# -- comparisons ---------------------------------------------------------------------

def _phase_ratio(u, v):
    k = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(v[k]) == 0:
        return 1.0 + 0j
    lam = u[k] / v[k]
    return lam / abs(lam) if abs(lam) > 0 else 1.0 + 0j


def phase_deviation(u, v) -> float:
    """max |u - lam v| with lam the unit phase read off the largest entry of v."""
    u, v = np.asarray(u, dtype=complex), np.asarray(v, dtype=complex)
    if u.shape != v.shape:
        raise GateError(f"shape mismatch {u.shape} vs {v.shape}")
    return float(np.max(np.abs(u - _phase_ratio(u, v) * v)))


def equal_up_to_phase(u, v, tol: float = 1e-9) -> bool:
    if tol <= 0:
        raise GateError("tolerance must be positive")
    return phase_deviation(u, v) <= tol


def fix_phase(u: np.ndarray) -> np.ndarray:
    """Make entry (1,1) real non-positive, or entry (4,1) negative imaginary if (1,1) vanishes."""
    u = np.asarray(u, dtype=complex)
    if abs(u[0, 0]) > 1e-12:
        return u * (-abs(u[0, 0]) / u[0, 0])
    if abs(u[3, 0]) > 1e-12:
        return u * (-1j * abs(u[3, 0]) / u[3, 0])
    return u


def is_unitary(u, tol: float = 1e-9) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(u @ u.conj().T - np.eye(len(u)))) <= tol)


def is_entangling(u, tol: float = 1e-9) -> bool:
    """Some column, read as a 2x2 (left, right) array, has determinant above ``tol``."""
    u = np.asarray(u, dtype=complex)
    return any(abs(np.linalg.det(u[:, j].reshape(2, 2))) > tol for j in range(4))


def circulant(c0: complex, c1: complex = 0, c2: complex = 0, c3: complex = 0) -> np.ndarray:
    return c0 * np.eye(4) + c1 * J + c2 * (J @ J) + c3 * (J @ J @ J)


def apply_local_block(u, side: str, block) -> np.ndarray:
    """(L x I) u or (I x L) u."""
    block = np.asarray(block, dtype=complex)
    if not is_unitary(block):
        raise GateError("local block is not unitary")
    if side == "left":
        return np.kron(block, np.eye(2)) @ u
    if side == "right":
        return np.kron(np.eye(2), block) @ u
    raise GateError(f"side must be 'left' or 'right', got {side!r}")


def qubit_full_twist() -> np.ndarray:
    """sigma_2^2 on one 1 2 2 1 qubit, computed from the braid group action."""
    return operator_matrix(lambda s: apply_braid(apply_braid(s, 1), 1), QUBIT, 0)


# -- extraction -------------------------------------------------------------------

def extract_gate(script: ProtocolScript, outcomes: Sequence[int] | None = None, *,
                 options: Mapping[str, bool] | None = None, tol: float = 1e-9) -> np.ndarray:
    """Gate realized by ``script`` along a forced outcome path.

    Columns are the final register states for the four basis inputs, with
    one common phase chosen by :func:`fix_phase`. The result on
    (|11> + |33>)/sqrt2 is checked against the columns.
    """
    if script.leaves != REGISTER or script.total != 0:
        raise GateError(f"script {script.name!r} does not act on two 1 2 2 1 qubits")

    def run(state):
        if script.steps:
            state = execute(script, state, "forced", outcomes=outcomes, options=options).final_state
        return register_vector(state, tol)

    cols = [run(register_state({k: 1})) for k in BASIS]
    gate = np.array(cols).T
    probe = run(register_state({"11": 1, "33": 1}))
    if not equal_up_to_phase(probe, (gate[:, 0] + gate[:, 3]) / np.sqrt(2), tol):
        raise GateError("forced path is not linear on (|11> + |33>)/sqrt2")
    return fix_phase(gate)


def gate_to_json(u) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(u, dtype=complex)]


def gate_from_json(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data])


def dumps_gate(u) -> str:
    return json.dumps(gate_to_json(u))


def two_qubit_basis():
    """(label, state) for the four computational inputs."""
    return [(k, register_state({k: 1})) for k in BASIS]
