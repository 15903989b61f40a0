"""Statevector simulator for the variational readout circuit.

Amplitudes live in a flat complex array whose index bits follow qubit
order, qubit 0 most significant.  Gates act in place through reshaped
views, so a batch of states with per-sample angles costs one vectorized
pass.  Gradients come either from the parameter-shift rule or from an
adjoint sweep that reuses the forward state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CircuitSpec:
    """Width, depth, and readout of the circuit.

    Encoding is Rx then Rz per qubit from the feature angles; each
    variational layer applies a general rotation per qubit followed by
    a ring of CNOTs (omitted when entangle is off or width is 1).
    """

    n_qubits: int = 16
    n_layers: int = 2
    n_readout: int = 4
    entangle: bool = True

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be at least 1")
        if self.n_layers < 0:
            raise ValueError("n_layers must be nonnegative")
        if not 1 <= self.n_readout <= self.n_qubits:
            raise ValueError("n_readout must lie in [1, n_qubits]")

    @property
    def n_params(self) -> int:
        return 3 * self.n_qubits * self.n_layers

    @property
    def n_features(self) -> int:
        return 2 * self.n_qubits


def zero_state(n_qubits: int, batch: int | None = None) -> np.ndarray:
    shape = (2 ** n_qubits,) if batch is None else (batch, 2 ** n_qubits)
    psi = np.zeros(shape, dtype=np.complex128)
    psi[..., 0] = 1.0
    return psi


def _n_qubits_of(psi: np.ndarray) -> int:
    return int(psi.shape[-1]).bit_length() - 1


def _angle_factors(theta, psi):
    """cos/sin halves shaped to broadcast over the qubit views."""
    t = np.asarray(theta, dtype=float)
    if t.ndim == 0:
        return math.cos(float(t) / 2), math.sin(float(t) / 2)
    if psi.ndim != 2 or t.shape != (psi.shape[0],):
        raise ValueError("batched angle must match the state batch")
    t = t[:, None, None]
    return np.cos(t / 2), np.sin(t / 2)


def _view(psi, q):
    n = _n_qubits_of(psi)
    lead = psi.shape[:-1]
    return psi.reshape(*lead, 2 ** q, 2, 2 ** (n - q - 1))


def _apply_su2(psi, q, u00, u01, u10, u11):
    view = _view(psi, q)
    a0 = view[..., 0, :].copy()
    a1 = view[..., 1, :]
    view[..., 0, :] = u00 * a0 + u01 * a1
    view[..., 1, :] = u10 * a0 + u11 * a1
    return psi


def _apply_rx(psi, q, theta):
    c, s = _angle_factors(theta, psi)
    return _apply_su2(psi, q, c, -1j * s, -1j * s, c)


def _apply_ry(psi, q, theta):
    c, s = _angle_factors(theta, psi)
    return _apply_su2(psi, q, c, -s, s, c)


def _apply_rz(psi, q, theta):
    c, s = _angle_factors(theta, psi)
    phase = c - 1j * s
    view = _view(psi, q)
    view[..., 0, :] *= phase
    view[..., 1, :] *= np.conj(phase)
    return psi


def _apply_cnot(psi, control, target):
    if control == target:
        raise ValueError("control and target must differ")
    n = _n_qubits_of(psi)
    q1, q2 = sorted((control, target))
    lead = psi.shape[:-1]
    view = psi.reshape(*lead, 2 ** q1, 2, 2 ** (q2 - q1 - 1), 2,
                       2 ** (n - q2 - 1))
    if control == q1:
        sub = view[..., 1, :, :, :]
        tmp = sub[..., 0, :].copy()
        sub[..., 0, :] = sub[..., 1, :]
        sub[..., 1, :] = tmp
    else:
        sub = view[..., 1, :]
        tmp = sub[..., 0, :, :].copy()
        sub[..., 0, :, :] = sub[..., 1, :, :]
        sub[..., 1, :, :] = tmp
    return psi


def apply_gate(psi: np.ndarray, gate: tuple, wires: tuple) -> np.ndarray:
    """In-place gate application; returns the same array."""
    kind = gate[0]
    if kind == "rx":
        return _apply_rx(psi, wires[0], gate[1])
    if kind == "ry":
        return _apply_ry(psi, wires[0], gate[1])
    if kind == "rz":
        return _apply_rz(psi, wires[0], gate[1])
    if kind == "rot":
        _apply_rz(psi, wires[0], gate[1])
        _apply_ry(psi, wires[0], gate[2])
        return _apply_rz(psi, wires[0], gate[3])
    if kind == "cnot":
        return _apply_cnot(psi, wires[0], wires[1])
    raise ValueError(f"unknown gate {kind!r}")


_ROT_KINDS = ("rz", "ry", "rz")


def _circuit_ops(spec: CircuitSpec):
    """Primitive rotations and entanglers with parameter references.

    Reference ("f", i) reads encoding feature i, ("p", i) variational
    parameter i; the general rotation unrolls to rz, ry, rz so every
    parametrized op is a plain rotation with a known generator.
    """
    ops = []
    n = spec.n_qubits
    for q in range(n):
        ops.append(("rx", q, ("f", 2 * q)))
        ops.append(("rz", q, ("f", 2 * q + 1)))
    for layer in range(spec.n_layers):
        for q in range(n):
            base = 3 * (layer * n + q)
            for off, kind in enumerate(_ROT_KINDS):
                ops.append((kind, q, ("p", base + off)))
        if spec.entangle and n >= 2:
            for q in range(n):
                ops.append(("cnot", (q, (q + 1) % n), None))
    return ops


_ROTATE = {"rx": _apply_rx, "ry": _apply_ry, "rz": _apply_rz}


def _angle_of(ref, features, params):
    source, idx = ref
    if source == "f":
        return features[..., idx]
    return params[idx]


def _check_shapes(spec, features, params):
    features = np.asarray(features, dtype=float)
    params = np.asarray(params, dtype=float)
    if features.shape[-1] != spec.n_features:
        raise ValueError(
            f"expected {spec.n_features} feature angles, "
            f"got {features.shape[-1]}")
    if params.shape != (spec.n_params,):
        raise ValueError(
            f"expected {spec.n_params} circuit parameters, "
            f"got {params.size}")
    return features, params


def _forward_state(spec, features, params):
    batch = None if features.ndim == 1 else features.shape[0]
    psi = zero_state(spec.n_qubits, batch)
    for op in _circuit_ops(spec):
        kind, wire, ref = op
        if kind == "cnot":
            _apply_cnot(psi, wire[0], wire[1])
        else:
            _ROTATE[kind](psi, wire, _angle_of(ref, features, params))
    return psi


def _z_expectations(psi, n_readout):
    probs = np.abs(psi) ** 2
    outs = []
    for q in range(n_readout):
        view = _view(probs, q)
        outs.append(view[..., 0, :].sum(axis=(-2, -1))
                    - view[..., 1, :].sum(axis=(-2, -1)))
    return np.stack(outs, axis=-1)


def run(spec: CircuitSpec, features, params) -> np.ndarray:
    """Z expectations of the first n_readout qubits."""
    features, params = _check_shapes(spec, features, params)
    psi = _forward_state(spec, features, params)
    return _z_expectations(psi, spec.n_readout)


def parameter_shift_grad(spec: CircuitSpec, features, params) -> np.ndarray:
    """Exact Jacobian d outputs / d params via the +-pi/2 shift rule."""
    features, params = _check_shapes(spec, features, params)
    rows = []
    for p in range(spec.n_params):
        up = params.copy()
        up[p] += math.pi / 2
        down = params.copy()
        down[p] -= math.pi / 2
        rows.append((run(spec, features, up)
                     - run(spec, features, down)) / 2.0)
    return np.array(rows)


_PAULI_OF = {"rx": "x", "ry": "y", "rz": "z"}


def _pauli_apply(psi, kind, q):
    """G psi as a new array for G in {X, Y, Z}."""
    out = psi.copy()
    view = _view(out, q)
    if kind == "x":
        tmp = view[..., 0, :].copy()
        view[..., 0, :] = view[..., 1, :]
        view[..., 1, :] = tmp
    elif kind == "y":
        tmp = view[..., 0, :].copy()
        view[..., 0, :] = -1j * view[..., 1, :]
        view[..., 1, :] = 1j * tmp
    else:
        view[..., 1, :] *= -1.0
    return out


def adjoint_gradients(spec: CircuitSpec, features, params, grad_out):
    """Gradients of grad_out . outputs w.r.t. features and params.

    One forward pass plus one reverse sweep; batch rows share params,
    so the parameter gradient is batch-summed while feature gradients
    stay per-row.
    """
    features, params = _check_shapes(spec, features, params)
    single = features.ndim == 1
    feats = np.atleast_2d(features)
    gouts = np.atleast_2d(np.asarray(grad_out, dtype=float))
    if gouts.shape != (feats.shape[0], spec.n_readout):
        raise ValueError("grad_out shape must be (batch, n_readout)")

    n = spec.n_qubits
    ket = _forward_state(spec, feats, params)

    signs = np.empty((spec.n_readout, 2 ** n))
    idx = np.arange(2 ** n)
    for q in range(spec.n_readout):
        signs[q] = np.where((idx >> (n - 1 - q)) & 1, -1.0, 1.0)
    bra = (gouts @ signs) * ket

    d_feats = np.zeros_like(feats)
    d_params = np.zeros(spec.n_params)
    for op in reversed(_circuit_ops(spec)):
        kind, wire, ref = op
        if kind == "cnot":
            _apply_cnot(ket, wire[0], wire[1])
            _apply_cnot(bra, wire[0], wire[1])
            continue
        g_ket = _pauli_apply(ket, _PAULI_OF[kind], wire)
        overlap = np.sum(np.conj(bra) * g_ket, axis=-1)
        grad = np.imag(overlap)
        source, pidx = ref
        if source == "p":
            d_params[pidx] += float(grad.sum())
            angle = -params[pidx]
        else:
            d_feats[:, pidx] += grad
            angle = -feats[:, pidx]
        _ROTATE[kind](ket, wire, angle)
        _ROTATE[kind](bra, wire, angle)
    if single:
        return d_feats[0], d_params
    return d_feats, d_params
