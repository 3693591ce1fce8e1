"""
Checks shared by the configuration dataclasses.
"""
import numpy as np

from ..errors import ConfigError

# Tolerance for symmetry and for the smallest eigenvalue of noise matrices.
PSD_TOLERANCE = 1e-12


def require_psd(name: str, matrix: np.ndarray, size: int) -> np.ndarray:
    """
    Validate a noise matrix and return it as a float array.

    Raises:
        ConfigError: If the matrix is not a symmetric positive-semidefinite size x size matrix
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (size, size):
        raise ConfigError(f"{name} must be {size}x{size}, got shape {matrix.shape}")
    if not np.allclose(matrix, matrix.T, atol=PSD_TOLERANCE):
        raise ConfigError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(matrix).min() < -PSD_TOLERANCE:
        raise ConfigError(f"{name} must be positive-semidefinite")
    return matrix


def require_positive(name: str, value: float) -> float:
    """
    Raises:
        ConfigError: If value is not a positive number
    """
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value
