"""Edge-weight and node-group knowledge: validation, expansion of node
groups into edge groups, and evaluation of the hybrid sparsity norm and
its dual.

The hybrid norm over a superposition ``delta = delta_e + delta_g`` is

    ``sum_ij W[i,j] |delta_e[i,j]|  +  eps * sum_k ||delta_g restricted to group k||_2``

where the groups are edge-index sets, typically Cartesian squares of node
groups, with ungrouped entries treated as singleton groups.
"""

from dataclasses import dataclass, field

import numpy as np


def validate_weight_matrix(w, name="weight matrix"):
    """Check symmetry and strict positivity of an edge-weight matrix.

    Every entry must be strictly positive for the weighted l1 term to be a
    norm. Returns the array as float64.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"{name} must be square, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(w <= 0):
        raise ValueError(f"{name} must have strictly positive entries")
    scale = max(np.abs(w).max(), 1.0)
    if np.abs(w - w.T).max() > 1e-12 * scale:
        raise ValueError(f"{name} is not symmetric")
    return w


@dataclass(frozen=True)
class NodeGroupSet:
    """Disjoint groups of node indices over ``{0, ..., p-1}``.

    Overlapping groups are rejected: the sparsity theory assumes disjoint
    supports, and multi-knowledge scenarios should use separate group sets
    with the multi-source solver instead.
    """

    groups: tuple
    p: int

    def __init__(self, groups, p):
        groups = tuple(tuple(sorted(int(i) for i in g)) for g in groups)
        if p <= 0:
            raise ValueError("p must be positive")
        seen = set()
        for g in groups:
            if not g:
                raise ValueError("node groups must be nonempty")
            for i in g:
                if not 0 <= i < p:
                    raise ValueError(f"node index {i} out of range for p={p}")
                if i in seen:
                    raise ValueError(f"node {i} appears in more than one group")
                seen.add(i)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "p", int(p))

    def __len__(self):
        return len(self.groups)


class EdgeGroupSet:
    """Disjoint groups of matrix entries, with optional singleton complement.

    Parameters
    ----------
    p : int
        Matrix dimension.
    groups : sequence
        Each group is a collection of ``(i, j)`` index pairs. Groups must be
        pairwise disjoint.
    singleton_complement : bool, optional
        When True (default), every entry not covered by an explicit group is
        treated as its own group of cardinality 1, so the group structure
        covers all ``p**2`` entries. When False, uncovered entries carry no
        group penalty or constraint.

    Notes
    -----
    Internally the groups are stored as a label matrix, so per-group norms
    and scalings run in O(p^2) regardless of the number of groups.
    """

    def __init__(self, p, groups, singleton_complement=True):
        if p <= 0:
            raise ValueError("p must be positive")
        self.p = int(p)
        self.singleton_complement = bool(singleton_complement)
        labels = np.full((p, p), -1, dtype=np.int64)
        for k, g in enumerate(groups):
            for (i, j) in g:
                if not (0 <= i < p and 0 <= j < p):
                    raise ValueError(f"edge index ({i},{j}) out of range for p={p}")
                if labels[i, j] != -1:
                    raise ValueError(f"edge ({i},{j}) appears in more than one group")
                labels[i, j] = k
        self.labels = labels
        self.n_groups = len(list(groups))
        self.grouped_mask = labels >= 0

    @property
    def groups(self):
        """Explicit groups as lists of ``(i, j)`` pairs (singletons excluded)."""
        out = [[] for _ in range(self.n_groups)]
        for i, j in zip(*np.nonzero(self.grouped_mask)):
            out[self.labels[i, j]].append((int(i), int(j)))
        return out

    @property
    def n_grouped_entries(self):
        return int(self.grouped_mask.sum())

    def group_l2_norms(self, m):
        """Vector of l2 norms of ``m`` restricted to each explicit group."""
        m = np.asarray(m, dtype=float)
        if m.shape != (self.p, self.p):
            raise ValueError(f"expected shape {(self.p, self.p)}, got {m.shape}")
        vals = m[self.grouped_mask]
        labs = self.labels[self.grouped_mask]
        sq = np.bincount(labs, weights=vals**2, minlength=self.n_groups)
        return np.sqrt(sq)

    def scale_groups(self, m, factors, singleton_factors=None):
        """Multiply each explicit group of ``m`` by its factor.

        ``singleton_factors`` (a (p, p) array, read only at ungrouped
        positions) scales the complement entries; they are left unchanged
        when it is None.
        """
        m = np.asarray(m, dtype=float)
        out = m.copy()
        if self.n_groups:
            fm = np.asarray(factors, dtype=float)[self.labels[self.grouped_mask]]
            out[self.grouped_mask] = m[self.grouped_mask] * fm
        if singleton_factors is not None:
            free = ~self.grouped_mask
            out[free] = m[free] * np.asarray(singleton_factors, dtype=float)[free]
        return out

    def complement_values(self, m):
        """Entries of ``m`` outside every explicit group, as a flat array."""
        m = np.asarray(m, dtype=float)
        return m[~self.grouped_mask]


def expand_node_groups(node_groups, singleton_complement=True):
    """Expand node groups into edge groups of all within-group pairs.

    Each node group ``{a, b, ...}`` of size m maps to the edge group of all
    m**2 ordered pairs ``(i, j)`` with both endpoints in the group,
    diagonal pairs included.

    Parameters
    ----------
    node_groups : NodeGroupSet
    singleton_complement : bool, optional
        Passed through to the resulting :class:`EdgeGroupSet`.

    Returns
    -------
    EdgeGroupSet
    """
    edge_groups = [
        [(i, j) for i in g for j in g] for g in node_groups.groups
    ]
    return EdgeGroupSet(node_groups.p, edge_groups, singleton_complement=singleton_complement)


def _group_norm_total(m, eg):
    """Sum of per-group l2 norms, singletons included when active."""
    total = float(eg.group_l2_norms(m).sum())
    if eg.singleton_complement:
        total += float(np.abs(eg.complement_values(m)).sum())
    return total


def _group_norm_max(m, eg):
    """Max of per-group l2 norms, singletons included when active."""
    norms = eg.group_l2_norms(m)
    best = float(norms.max()) if norms.size else 0.0
    if eg.singleton_complement:
        comp = eg.complement_values(m)
        if comp.size:
            best = max(best, float(np.abs(comp).max()))
    return best


def kev_norm(delta_e, delta_g, w, eg, eps):
    """Hybrid edge-weighted l1 plus group l2 norm of a superposition.

    Parameters
    ----------
    delta_e, delta_g : array-like, shape (p, p)
        The two components of the superposition.
    w : array-like, shape (p, p)
        Positive symmetric edge weights applied to ``delta_e``.
    eg : EdgeGroupSet
        Group structure applied to ``delta_g``.
    eps : float
        Positive weight of the group term.

    Returns
    -------
    float
    """
    delta_e = np.asarray(delta_e, dtype=float)
    delta_g = np.asarray(delta_g, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (delta_e.shape == delta_g.shape == w.shape == (eg.p, eg.p)):
        raise ValueError(
            f"dimension mismatch: delta_e {delta_e.shape}, delta_g {delta_g.shape}, "
            f"w {w.shape}, groups over p={eg.p}"
        )
    if eps <= 0:
        raise ValueError("eps must be positive")
    return float(np.sum(w * np.abs(delta_e))) + eps * _group_norm_total(delta_g, eg)


def kev_dual_norm(u, w, eg, eps):
    """Dual of :func:`kev_norm`: max of weighted l-inf and scaled block norms.

    Evaluates ``max( max_ij |u_ij| / w_ij , (1/eps) * max_k ||u_gk||_2 )``
    where the group maximum runs over explicit groups and, when the
    singleton complement is active, over the remaining entries.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (u.shape == w.shape == (eg.p, eg.p)):
        raise ValueError(
            f"dimension mismatch: u {u.shape}, w {w.shape}, groups over p={eg.p}"
        )
    if eps <= 0:
        raise ValueError("eps must be positive")
    weighted_inf = float(np.abs(u / w).max())
    return max(weighted_inf, _group_norm_max(u, eg) / eps)
