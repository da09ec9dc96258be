"""Channel families: clock-shift unitaries, their roots, damping, flips and Werner-Holevo."""
import numpy as np
from scipy.linalg import schur
from scipy.stats import unitary_group

from qops.choi import KrausChannel
from qops.operators import LabeledOperator, SystemLabel
from qops.symmetric import permutation_unitary
from utils.errors import BadIndex, BadParameter, NotUnitary

UNITARY_TOL = 1e-10


def shift(d):
    """X_d = Σ |l⊕1><l|."""
    return np.roll(np.eye(d), 1, axis=0).astype(complex)


def clock(d):
    """Z_d = Σ ω^l |l><l|."""
    return np.diag(np.exp(2j * np.pi * np.arange(d) / d))


def clock_shift(d, i, j):
    """X_d^i Z_d^j."""
    if d < 1 or not (0 <= i < d and 0 <= j < d):
        raise BadIndex(f"clock_shift({d}, {i}, {j}) needs 0 <= i, j < d")
    return np.linalg.matrix_power(shift(d), i) @ np.linalg.matrix_power(clock(d), j)


def clock_shift_family(d):
    """All d² operators, index i*d + j for X^i Z^j."""
    return [clock_shift(d, i, j) for i in range(d) for j in range(d)]


def is_unitary(u, tol=UNITARY_TOL):
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


def check_unitary(u):
    if not is_unitary(u):
        raise NotUnitary("Matrix is not unitary")
    return np.asarray(u, dtype=complex)


def principal_sqrt(u):
    """Principal square root of a unitary, eigenphases taken in (-π, π]."""
    u = check_unitary(u)
    t, z = schur(u, output='complex')
    phases = np.angle(np.diag(t))
    phases[np.isclose(phases, -np.pi)] = np.pi
    return z @ np.diag(np.exp(0.5j * phases)) @ z.conj().T


def pauli_matrices():
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return np.eye(2, dtype=complex), sx, sy, sz


def displayed_pauli_roots():
    """Square roots of σx, σy, σz in their conventional matrix form (roots up to global phase)."""
    phase = np.exp(1j * np.pi / 4) / np.sqrt(2)
    root_x = phase * np.array([[1, 1j], [1j, 1]])
    root_y = phase * np.array([[1, -1], [1, 1]], dtype=complex)
    root_z = np.diag([1, 1j])
    return root_x, root_y, root_z


def _labels(d_in, d_out, input_name, output_name):
    return SystemLabel(input_name, d_in), SystemLabel(output_name, d_out)


def unitary_channel(u, input_name='I', output_name='O'):
    u = check_unitary(u)
    d = u.shape[0]
    return KrausChannel(*_labels(d, d, input_name, output_name), (u,))


def identity_channel(d, input_name='I', output_name='O'):
    return unitary_channel(np.eye(d), input_name, output_name)


def _probability(p):
    if not 0.0 <= p <= 1.0:
        raise BadParameter(f"Probability {p} outside [0, 1]")
    return float(p)


def bit_flip(p, input_name='I', output_name='O'):
    """ρ ↦ p ρ + (1-p) σx ρ σx."""
    p = _probability(p)
    _, sx, _, _ = pauli_matrices()
    return KrausChannel(*_labels(2, 2, input_name, output_name), (np.sqrt(p) * np.eye(2), np.sqrt(1 - p) * sx))


def amplitude_damping(p, input_name='I', output_name='O'):
    """Kraus operators B0 = diag(1, √(1-p)), B1 = √p |0><1|."""
    p = _probability(p)
    b0 = np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex)
    b1 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)
    return KrausChannel(*_labels(2, 2, input_name, output_name), (b0, b1))


def werner_holevo(d, symmetric, input_name='I', output_name='O'):
    """Choi matrix proportional to the (anti)symmetric projector on I⊗O."""
    if d < 2:
        raise BadParameter(f"Werner-Holevo channels need d >= 2, got {d}")
    swap = permutation_unitary(d, 2, (1, 0))
    sign = 1 if symmetric else -1
    projector = (np.eye(d * d) + sign * swap) / 2
    scale = 2.0 / (d + sign)
    systems = _labels(d, d, input_name, output_name)
    return LabeledOperator(systems, scale * projector)


def haar_unitary(d, rng=None):
    """Haar-random unitary; rng is a numpy Generator or seed."""
    rng = np.random.default_rng(rng)
    return unitary_group.rvs(d, random_state=rng) if d > 1 else np.exp(2j * np.pi * rng.random()) * np.eye(1)


def maximally_entangled(system_a, system_b):
    """Σ_ij |ii><jj| on two systems of equal dimension (unnormalized)."""
    if system_a.dim != system_b.dim:
        raise BadParameter("Maximally entangled operator needs equal dimensions")
    v = np.eye(system_a.dim).reshape(-1)
    return LabeledOperator((system_a, system_b), np.outer(v, v))