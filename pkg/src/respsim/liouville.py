"""Dense superoperator algebra on row-major vectorized density matrices.

A density matrix ``rho`` of dimension ``d`` is flattened row-major, so the
entry ``rho[i, j]`` lands in slot ``i * d + j`` (the pairing |i> (x) <j|*).
With that ordering the map ``rho -> X rho Y^dagger`` is the matrix
``kron(X, conj(Y))``.

Everything here is a pure function of its inputs.
"""

import numpy as np
from scipy import linalg

HERMITIAN_ATOL = 1e-12

# sigma_z |g> = +|g>, with the ground state at index 0
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def as_operator(a):
    """Return ``a`` as a square complex array, raising on bad shapes."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"operator must be a non-empty square matrix, got shape {a.shape}")
    return a


def dag(a):
    return np.conj(np.transpose(a))


def is_hermitian(a, atol=HERMITIAN_ATOL):
    a = np.asarray(a)
    return bool(np.max(np.abs(a - dag(a)), initial=0.0) <= atol)


def vectorize(rho):
    rho = as_operator(rho)
    return rho.reshape(-1).copy()


def devectorize(vec):
    vec = np.asarray(vec, dtype=complex)
    d = int(round(np.sqrt(vec.shape[0])))
    if d * d != vec.shape[0]:
        raise ValueError(f"vector length {vec.shape[0]} is not a perfect square")
    return vec.reshape(d, d).copy()


def kron(*ops):
    """Kronecker product of one or more operators, left factor slowest."""
    out = as_operator(ops[0])
    for op in ops[1:]:
        out = np.kron(out, as_operator(op))
    return out


def sandwich(x, y):
    """Superoperator of ``rho -> x @ rho @ y^dagger``."""
    x, y = as_operator(x), as_operator(y)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return np.kron(x, np.conj(y))


def commutator_super(x):
    """Superoperator of ``rho -> x rho - rho x``."""
    x = as_operator(x)
    eye = np.eye(x.shape[0])
    return np.kron(x, eye) - np.kron(eye, x.T)


def anticommutator_super(x):
    """Superoperator of ``rho -> x rho + rho x``."""
    x = as_operator(x)
    eye = np.eye(x.shape[0])
    return np.kron(x, eye) + np.kron(eye, x.T)


def dissipator_super(x):
    """Lindblad dissipator ``D[x] rho = x rho x^dagger - {x^dagger x, rho} / 2``."""
    x = as_operator(x)
    return sandwich(x, x) - 0.5 * anticommutator_super(dag(x) @ x)


def lindbladian(h, collapse=()):
    """Generator ``-i[h, .] + sum_k D[c_k]`` as a dense superoperator."""
    gen = -1j * commutator_super(h)
    for c in collapse:
        gen = gen + dissipator_super(c)
    return gen


def apply(superop, rho):
    """Apply a superoperator to a density matrix and return the matrix."""
    return devectorize(np.asarray(superop) @ vectorize(rho))


def matrix_exponential(generator, t=1.0):
    """``exp(generator * t)`` by scaling and squaring with a Pade approximant."""
    generator = np.asarray(generator, dtype=complex)
    if not np.all(np.isfinite(generator)) or not np.isfinite(t):
        raise ValueError("matrix exponential needs finite entries and time")
    if t == 0:
        return np.eye(generator.shape[0], dtype=complex)
    return linalg.expm(generator * t)


def trace_of_vec(vec):
    """Trace of the density matrix encoded by ``vec`` without reshaping."""
    vec = np.asarray(vec)
    d = int(round(np.sqrt(vec.shape[-1])))
    return vec[..., :: d + 1].sum(axis=-1)


def population_functional(projector):
    """Row vector ``w`` with ``w @ vec(rho) == trace(projector @ rho)``."""
    projector = as_operator(projector)
    # trace(P rho) = sum_ij P[j, i] rho[i, j]
    return projector.T.reshape(-1).copy()


def trace_distance(rho, sigma):
    diff = as_operator(rho) - as_operator(sigma)
    diff = 0.5 * (diff + dag(diff))
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def check_density_matrix(rho, trace=1.0, atol=1e-10, eig_tol=1e-8):
    """List the density-matrix invariants that ``rho`` violates."""
    rho = as_operator(rho)
    problems = []
    if not is_hermitian(rho, atol):
        problems.append("not Hermitian")
    if abs(np.trace(rho) - trace) > atol:
        problems.append(f"trace {np.trace(rho).real:.3g} != {trace}")
    herm = 0.5 * (rho + dag(rho))
    if np.min(np.linalg.eigvalsh(herm)) < -eig_tol:
        problems.append("negative eigenvalue")
    return problems
