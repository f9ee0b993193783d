"""Dense operator and superoperator algebra.

Operators are numpy complex arrays. Vectorization stacks columns, so
vec(A X B) = (B^T kron A) vec(X): left multiplication by A is (I kron A)
and right multiplication by B is (B^T kron I).
"""

import math
import string
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.linalg

from clustersim.exceptions import DimensionError, StateError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_FLOOR = -1e-9

PAULI = {
    "I": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI_LABELS = ("I", "x", "y", "z")


def as_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-d operator, got shape {arr.shape}")
    return arr


def _require_square(m: np.ndarray) -> int:
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"operator must be square, got shape {m.shape}")
    return m.shape[0]


def dagger(m) -> np.ndarray:
    return as_matrix(m).conj().T


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(*ops) -> np.ndarray:
    return reduce(np.kron, [as_matrix(op) for op in ops])


def expm(m) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximants)"""
    m = as_matrix(m)
    _require_square(m)
    return scipy.linalg.expm(m)


def vec(op) -> np.ndarray:
    return as_matrix(op).reshape(-1, order="F")


def unvec(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    dim = math.isqrt(v.size)
    if dim * dim != v.size:
        raise DimensionError(f"vector of length {v.size} is not a vectorized square operator")
    return v.reshape((dim, dim), order="F")


def spre(a) -> np.ndarray:
    a = as_matrix(a)
    return np.kron(np.eye(a.shape[1]), a)


def spost(b) -> np.ndarray:
    b = as_matrix(b)
    return np.kron(b.T, np.eye(b.shape[0]))


def sprepost(a, b) -> np.ndarray:
    """Superoperator of X -> A X B"""
    return np.kron(as_matrix(b).T, as_matrix(a))


def apply_superoperator(s, rho) -> np.ndarray:
    return unvec(as_matrix(s) @ vec(rho))


def trace_row(dim: int) -> np.ndarray:
    """Row vector r with r @ vec(X) = Tr X"""
    return vec(np.eye(dim))


def partial_trace(rho, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    rho = as_matrix(rho)
    dims = [int(d) for d in dims]
    total = math.prod(dims)
    if rho.shape != (total, total):
        raise DimensionError(f"operator shape {rho.shape} does not match subsystem dims {dims}")
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep={keep} out of range for {n} subsystems")
    if 2 * n > len(string.ascii_letters):
        raise DimensionError("too many subsystems")

    rows = list(string.ascii_letters[:n])
    cols = list(string.ascii_letters[n:2 * n])
    for i in range(n):
        if i not in keep:
            cols[i] = rows[i]
    out = [rows[i] for i in keep] + [cols[i] for i in keep]
    spec = "".join(rows) + "".join(cols) + "->" + "".join(out)
    reduced = np.einsum(spec, rho.reshape(dims + dims))
    kept_dim = math.prod(dims[i] for i in keep)
    return np.asarray(reduced).reshape(kept_dim, kept_dim)


def permute_subsystems(rho, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors; order[i] is the old index of new factor i"""
    rho = as_matrix(rho)
    dims = [int(d) for d in dims]
    n = len(dims)
    if sorted(order) != list(range(n)):
        raise DimensionError(f"order {list(order)} is not a permutation of {n} subsystems")
    total = math.prod(dims)
    if rho.shape != (total, total):
        raise DimensionError(f"operator shape {rho.shape} does not match subsystem dims {dims}")
    axes = list(order) + [n + i for i in order]
    return rho.reshape(dims + dims).transpose(axes).reshape(total, total)


def apply_on_leading(superop, dim_in: int, dim_out: int, rho) -> np.ndarray:
    """Apply a map on the leading tensor factor, identity on the rest.

    superop acts on column-stacked dim_in x dim_in operators and returns
    dim_out x dim_out operators.
    """
    superop = as_matrix(superop)
    rho = as_matrix(rho)
    if superop.shape != (dim_out * dim_out, dim_in * dim_in):
        raise DimensionError(f"map shape {superop.shape} does not match {dim_in} -> {dim_out}")
    size = _require_square(rho)
    if size % dim_in:
        raise DimensionError(f"operator of size {size} has no leading factor of size {dim_in}")
    rest = size // dim_in

    result = np.zeros((dim_out * rest, dim_out * rest), dtype=complex)
    for a in range(dim_in):
        for b in range(dim_in):
            block = rho[a * rest:(a + 1) * rest, b * rest:(b + 1) * rest]
            if not np.any(block):
                continue
            image = unvec(superop[:, b * dim_in + a])
            result += np.kron(image, block)
    return result


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def validate_density_matrix(rho, normalized: bool = True) -> np.ndarray:
    rho = as_matrix(rho)
    _require_square(rho)
    if not is_hermitian(rho):
        raise StateError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr.imag) > TRACE_TOL:
        raise StateError(f"trace has imaginary part {tr.imag:.3e}")
    if normalized and abs(tr.real - 1.0) > TRACE_TOL:
        raise StateError(f"trace {tr.real:.12f} differs from 1")
    if not normalized and not (-TRACE_TOL <= tr.real <= 1.0 + TRACE_TOL):
        raise StateError(f"conditional trace {tr.real:.12f} outside [0, 1]")
    if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < PSD_FLOOR:
        raise StateError("density matrix has negative eigenvalues")
    return rho


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1, 1)
    return psi @ psi.conj().T


def overlap_fidelity(target_pure, rho) -> float:
    """Tr[target rho] for a pure-state projector target"""
    target = as_matrix(target_pure)
    rho = as_matrix(rho)
    _require_square(target)
    if target.shape != rho.shape:
        raise DimensionError(f"shape mismatch {target.shape} vs {rho.shape}")
    if not is_hermitian(target, 1e-9):
        raise StateError("target is not Hermitian")
    if abs(np.trace(target) - 1.0) > 1e-9 or np.max(np.abs(target @ target - target)) > 1e-9:
        raise StateError("target is not a rank-1 projector")
    return float(np.real(np.trace(target @ rho)))
