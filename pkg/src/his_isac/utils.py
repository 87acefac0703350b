import numpy as np


def db_to_linear(value_db: float) -> float:
    return float(10.0 ** (value_db / 10.0))


def linear_to_db(value: float) -> float:
    """
    Converts a linear power ratio to decibels.

    Zero maps to -inf; negative ratios are rejected.
    """
    if value < 0:
        raise ValueError(f"power ratio {value} not in range [0, inf)")
    if value == 0:
        return float("-inf")
    return float(10.0 * np.log10(value))


def convert_mA2_to_A2(power_mA2: float) -> float:
    """
    Converts a current-power budget in mA^2 to A^2.
    """
    # 1 mA = 1e-3 A
    return power_mA2 * 1e-6


def convert_A2_to_mA2(power_A2: float) -> float:
    return power_A2 * 1e6


def sinc(x: np.ndarray | float) -> np.ndarray:
    """
    Unnormalized sinc, sin(x)/x, with the limit value 1 at x = 0.

    numpy's sinc is the normalized sin(pi x)/(pi x), so the argument is rescaled.
    """
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def is_hermitian(a: np.ndarray, rtol: float = 1e-12) -> bool:
    scale = max(float(np.max(np.abs(a), initial=0.0)), 1e-300)
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= rtol * scale)


def min_eigenvalue(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(hermitian_part(a))[0])


def unit_vector(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("cannot normalize a zero vector")
    return v / norm


def fix_phase(v: np.ndarray) -> np.ndarray:
    """
    Rotates a vector so its largest-magnitude entry is real and nonnegative.

    Eigenvectors are only defined up to a unit-modulus factor; this picks one
    representative so outputs are reproducible.
    """
    if v.size == 0:
        return v
    pivot = v[int(np.argmax(np.abs(v)))]
    if pivot == 0:
        return v
    return v * (np.abs(pivot) / pivot)
