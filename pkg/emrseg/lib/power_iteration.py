"""
power_iteration.py
Dominant singular direction of a small stack of vectors.
"""

import logging
from typing import Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)


def dominant_direction(
    vectors: np.ndarray,
    max_steps: int = 100,
    tolerance: float = 1e-10
) -> Tuple[Optional[np.ndarray], int]:
    """
    First left singular vector of the d x J matrix whose columns are the rows
    of ``vectors``.

    Power iteration runs on the smaller Gram matrix: J x J when J < d (the
    result is mapped back through the vectors), d x d otherwise. It starts
    from the vector with the largest norm and stops after ``max_steps`` or
    once successive iterates have cosine >= 1 - tolerance. A result whose
    Rayleigh quotient falls short of the top Gram eigenvalue is replaced by the
    eigenvector from ``np.linalg.eigh``, so a start orthogonal to the dominant
    direction still gives the right answer.

    Args:
        vectors: (J, d) float array, one sentence vector per row
        max_steps: Iteration cap
        tolerance: Convergence threshold on 1 - cosine

    Returns:
        (unit d-vector or None for an all-zero input, steps taken)
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise ValueError(f"Expected a (J, d) array, got shape {vectors.shape}")

    norms = np.linalg.norm(vectors, axis=1)
    if vectors.size == 0 or not np.any(norms > 0):
        return None, 0

    num_vectors, dim = vectors.shape
    seed_row = int(np.argmax(norms))
    small_side = num_vectors < dim
    if small_side:
        gram = vectors @ vectors.T
        current = gram[:, seed_row].copy()
    else:
        gram = vectors.T @ vectors
        current = vectors[seed_row].copy()
    current /= np.linalg.norm(current)

    steps = 0
    for steps in range(1, max_steps + 1):
        nxt = gram @ current
        norm = np.linalg.norm(nxt)
        if norm == 0:
            break
        nxt /= norm
        cosine = float(nxt @ current)
        current = nxt
        if cosine >= 1.0 - tolerance:
            break

    rayleigh = float(current @ gram @ current)
    top = float(np.linalg.eigvalsh(gram)[-1])
    if rayleigh < top - 1e-9 * abs(top):
        # Start vector had no component along the top eigenvector, or the step cap hit first
        logger.debug(f"Power iteration stalled at {rayleigh:.6g} below the top eigenvalue {top:.6g}; using eigh")
        current = np.linalg.eigh(gram)[1][:, -1]

    if small_side:
        direction = vectors.T @ current
        direction /= np.linalg.norm(direction)
    else:
        direction = current

    logger.debug(f"Power iteration converged after {steps} step(s) on a {gram.shape[0]}x{gram.shape[0]} Gram matrix")
    return direction, steps
