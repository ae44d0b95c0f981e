"""Closed-form proximal and projection operators for the distributed
solver, plus the affine lift that runs them over a stacked variable.

All operators are exact, entrywise or group-wise, and pure.
"""

from dataclasses import dataclass

import numpy as np

from .knowledge import EdgeGroupSet


def _check_gamma(gamma):
    if gamma <= 0:
        raise ValueError(f"prox step must be strictly positive, got {gamma}")


def prox_weighted_l1(x, w, gamma):
    """Entrywise soft-threshold of ``x`` at per-entry level ``gamma * w``.

    Proximal operator of ``u -> gamma * sum_ij w_ij |u_ij|``.
    """
    _check_gamma(gamma)
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape:
        raise ValueError(f"shape mismatch: x {x.shape}, w {w.shape}")
    t = gamma * w
    return np.maximum(x - t, 0.0) + np.minimum(x + t, 0.0)


def prox_group_l2(x, eg, eps, gamma):
    """Per-group block soft-threshold: ``x_g * max(1 - eps*gamma/||x_g||, 0)``.

    Proximal operator of ``u -> eps * gamma * sum_k ||u_gk||_2``. With the
    singleton complement active, entries outside every group shrink
    entrywise at level ``eps * gamma``; otherwise they pass through.
    """
    _check_gamma(gamma)
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape != (eg.p, eg.p):
        raise ValueError(f"expected shape {(eg.p, eg.p)}, got {x.shape}")
    t = eps * gamma
    norms = eg.group_l2_norms(x)
    factors = np.where(norms > 0, np.maximum(1.0 - t / np.where(norms > 0, norms, 1.0), 0.0), 0.0)
    singles = None
    if eg.singleton_complement:
        # a singleton group's block threshold reduces to the scalar one
        mag = np.abs(x)
        singles = np.where(mag > 0, np.maximum(1.0 - t / np.where(mag > 0, mag, 1.0), 0.0), 0.0)
    return eg.scale_groups(x, factors, singleton_factors=singles)


def proj_weighted_linf_ball(x, center, w, lam):
    """Clamp ``x - center`` entrywise to ``[-w*lam, w*lam]``, re-centered.

    Projection onto ``{u : |u_ij - center_ij| <= w_ij * lam for all i,j}``.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (x.shape == center.shape == w.shape):
        raise ValueError(
            f"shape mismatch: x {x.shape}, center {center.shape}, w {w.shape}"
        )
    r = lam * w
    return np.clip(x - center, -r, r) + center


def proj_group_dual_ball(x, center, eg, eps, lam):
    """Per-group radial projection of ``x - center`` onto radius ``eps*lam``.

    Projection onto ``{u : ||(u - center)_gk||_2 <= eps * lam for all k}``.
    A group with zero offset is already interior and is returned unchanged.
    Singleton-complement entries are clipped entrywise to the same radius.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    if not (x.shape == center.shape == (eg.p, eg.p)):
        raise ValueError(
            f"shape mismatch: x {x.shape}, center {center.shape}, p={eg.p}"
        )
    r = eps * lam
    offset = x - center
    norms = eg.group_l2_norms(offset)
    factors = np.where(norms > r, r / np.where(norms > 0, norms, 1.0), 1.0)
    singles = None
    if eg.singleton_complement:
        mag = np.abs(offset)
        singles = np.where(mag > r, r / np.where(mag > 0, mag, 1.0), 1.0)
    return eg.scale_groups(offset, factors, singleton_factors=singles) + center


@dataclass(frozen=True)
class StackedVariable:
    """Pair of equally-shaped blocks making up a stacked iterate."""

    delta_e: np.ndarray
    delta_g: np.ndarray

    def __post_init__(self):
        de = np.asarray(self.delta_e, dtype=float)
        dg = np.asarray(self.delta_g, dtype=float)
        if de.shape != dg.shape:
            raise ValueError(f"block shapes differ: {de.shape} vs {dg.shape}")
        object.__setattr__(self, "delta_e", de)
        object.__setattr__(self, "delta_g", dg)

    @property
    def total(self):
        return self.delta_e + self.delta_g


def lift_block_prox(stack, block, prox):
    """Prox of ``f(A_k z)`` where ``A_k`` selects one block of the stack.

    Since the selector satisfies ``A A^T = I``, the lift applies ``prox`` to
    that block and leaves every other block untouched. ``stack`` is an
    array of shape (n_blocks, p, p).
    """
    out = stack.copy()
    out[block] = prox(stack[block])
    return out


def lift_sum_projection(stack, project):
    """Prox of the indicator of ``{z : sum of blocks in C}``.

    For the summing map ``A = [I ... I]`` over n blocks, ``A A^T = n I``, so
    the lifted prox is ``z + A^T (proj_C(A z) - A z) / n``: the projection
    correction, split evenly across blocks.
    """
    n = stack.shape[0]
    x = stack.sum(axis=0)
    corr = (project(x) - x) / n
    return stack + corr[None, :, :]


def affine_prox_lift(y, which, w=None, eg=None, eps=None, lam=None, backward=None, gamma=None):
    """Apply one of the four lifted operators to a stacked variable.

    Parameters
    ----------
    y : StackedVariable
        Current iterate.
    which : {"F1", "F2", "G1", "G2"}
        F1: weighted l1 prox on the edge block (needs ``w``, ``gamma``).
        F2: group l2 prox on the group block (needs ``eg``, ``eps``, ``gamma``).
        G1: projection of the block sum onto the weighted l-inf ball around
        ``backward`` (needs ``w``, ``lam``).
        G2: projection of the block sum onto the per-group l2 ball around
        ``backward`` (needs ``eg``, ``eps``, ``lam``).
    gamma : float
        Prox step; must be strictly positive. Scale-invariant for the two
        projections, where only feasibility matters.

    Returns
    -------
    StackedVariable
    """
    _check_gamma(gamma if gamma is not None else 0)
    stack = np.stack([y.delta_e, y.delta_g])
    if which == "F1":
        out = lift_block_prox(stack, 0, lambda b: prox_weighted_l1(b, w, gamma))
    elif which == "F2":
        out = lift_block_prox(stack, 1, lambda b: prox_group_l2(b, eg, eps, gamma))
    elif which == "G1":
        out = lift_sum_projection(stack, lambda x: proj_weighted_linf_ball(x, backward, w, lam))
    elif which == "G2":
        out = lift_sum_projection(stack, lambda x: proj_group_dual_ball(x, backward, eg, eps, lam))
    else:
        raise ValueError(f"unknown operator selector {which!r}")
    return StackedVariable(out[0], out[1])
