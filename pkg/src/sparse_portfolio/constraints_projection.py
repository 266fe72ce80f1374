"""Euclidean projections onto simplices, sparse sets and grouped budget sets.

The grouped set is

    Omega = { w : p_i <= sum(w_i) <= q_i,  ||w_i||_0 <= k_i,  w_i >= 0 }

for a partition of the assets into groups ``w = [w_1, ..., w_m]``. Its
projection splits into independent per-group problems: keep the ``k_i``
largest entries of ``w_i`` and project them onto the box-sum set
``{z >= 0, p_i <= 1'z <= q_i}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class PartitionError(ValueError):
    """Invalid group specification. ``errors`` lists every violated rule."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class GroupSpec:
    name: str
    indices: tuple[int, ...]
    p: float = 0.0
    q: float = 1.0
    k: int = 1

    def problems(self) -> list[str]:
        errs = []
        idx = list(self.indices)
        if not idx:
            errs.append(f"group {self.name!r}: no assets")
        elif any(b <= a for a, b in zip(idx, idx[1:])):
            errs.append(f"group {self.name!r}: indices must be strictly increasing")
        if not (0.0 <= self.p <= self.q <= 1.0):
            errs.append(f"group {self.name!r}: need 0 <= p <= q <= 1, got p={self.p}, q={self.q}")
        if not (1 <= self.k <= max(len(idx), 1)):
            errs.append(f"group {self.name!r}: need 1 <= k <= {len(idx)}, got k={self.k}")
        return errs


@dataclass(frozen=True)
class GroupPartition:
    groups: tuple[GroupSpec, ...]
    n: int

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        errs = []
        for g in self.groups:
            errs.extend(g.problems())
        covered = [i for g in self.groups for i in g.indices]
        if len(covered) != len(set(covered)):
            errs.append("groups overlap")
        if set(covered) != set(range(self.n)):
            missing = sorted(set(range(self.n)) - set(covered))
            extra = sorted(set(covered) - set(range(self.n)))
            if missing:
                errs.append(f"assets not covered by any group: {missing[:10]}")
            if extra:
                errs.append(f"group indices out of range: {extra[:10]}")
        sum_p = sum(g.p for g in self.groups)
        sum_q = sum(g.q for g in self.groups)
        if sum_p > 1.0 + 1e-12:
            errs.append(f"infeasible budgets: sum of lower bounds p is {sum_p:g} > 1")
        if sum_q < 1.0 - 1e-12:
            errs.append(f"infeasible budgets: sum of upper bounds q is {sum_q:g} < 1")
        if errs:
            raise PartitionError(errs)

    @classmethod
    def single(cls, n: int, k: int | None = None, p: float = 0.0, q: float = 1.0):
        """One group over all assets with a global cardinality cap (default: none)."""
        return cls((GroupSpec("all", tuple(range(n)), p, q, n if k is None else k),), n)

    @classmethod
    def from_labels(cls, labels: Sequence[str], k=None, p=0.0, q=1.0, exclude=()):
        """Group assets sharing a label. ``k``, ``p``, ``q`` may be scalars or
        dicts keyed by label; labels in ``exclude`` get ``q = 0, k = 1``."""
        order = list(dict.fromkeys(labels))
        groups = []
        for lab in order:
            idx = tuple(i for i, x in enumerate(labels) if x == lab)
            pick = lambda v, default: v.get(lab, default) if isinstance(v, dict) else v
            if lab in exclude:
                groups.append(GroupSpec(lab, idx, 0.0, 0.0, 1))
                continue
            kk = pick(k, None)
            kk = len(idx) if kk is None else min(int(kk), len(idx))
            groups.append(GroupSpec(lab, idx, float(pick(p, 0.0)), float(pick(q, 1.0)), kk))
        return cls(tuple(groups), len(labels))

    @property
    def is_global(self) -> bool:
        """Single group whose budget interval contains 1 (only the cardinality cap binds)."""
        return len(self.groups) == 1 and self.groups[0].p <= 1.0 <= self.groups[0].q

    def cardinality_free(self, group: GroupSpec) -> bool:
        return group.k >= len(group.indices)


def project_simplex(x, c: float = 1.0) -> np.ndarray:
    """Projection onto {z >= 0, sum(z) = c} by sort and threshold."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x.copy()
    s = np.sort(x)[::-1]
    css = np.cumsum(s) - c
    ks = np.arange(1, x.size + 1)
    active = s > css / ks
    # the top entry always qualifies; rounding can hide that when c is tiny
    active[0] = True
    rho = np.nonzero(active)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(x - theta, 0.0)


def project_topk(x, k: int) -> np.ndarray:
    """Keep the k entries largest in magnitude (ties: lowest index), zero the rest."""
    x = np.asarray(x, dtype=float)
    keep = np.argsort(-np.abs(x), kind="stable")[:k]
    out = np.zeros_like(x)
    out[keep] = x[keep]
    return out


def top_indices(x, k: int) -> np.ndarray:
    """Indices of the k largest entries by signed value, ties broken by lowest index."""
    return np.argsort(-np.asarray(x, dtype=float), kind="stable")[:k]


def project_box_sum(u, p: float, q: float) -> np.ndarray:
    """Projection onto {z >= 0, p <= sum(z) <= q}."""
    u = np.asarray(u, dtype=float)
    pos = np.maximum(u, 0.0)
    s = pos.sum()
    if s < p:
        return project_simplex(u, p) if p > 0 else pos
    if s > q:
        return project_simplex(u, q) if q > 0 else np.zeros_like(u)
    return pos


def project_group(w_i, spec: GroupSpec) -> np.ndarray:
    """Projection of one group's weights onto {z >= 0, p <= 1'z <= q, ||z||_0 <= k}.

    Selection is by signed value: entries that enter negative never help a
    nonnegative target set, unlike the plain l0-ball where magnitude decides.
    """
    w_i = np.asarray(w_i, dtype=float)
    out = np.zeros_like(w_i)
    if spec.q <= 0:
        return out
    keep = top_indices(w_i, min(spec.k, w_i.size))
    out[keep] = project_box_sum(w_i[keep], spec.p, spec.q)
    return out


def project_omega(w, partition: GroupPartition) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    out = np.zeros_like(w)
    for g in partition.groups:
        idx = list(g.indices)
        out[idx] = project_group(w[idx], g)
    return out


def project_sparse_simplex(x, k: int) -> np.ndarray:
    """Projection onto {z in simplex, ||z||_0 <= k}: simplex projection of the k largest entries."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    keep = top_indices(x, k)
    out[keep] = project_simplex(x[keep], 1.0)
    return out


def project_budgeted_simplex(x, partition: GroupPartition, support=None, tol=1e-15) -> np.ndarray:
    """Projection onto the unit simplex intersected with the group budgets
    ``p_i <= sum(z_i) <= q_i``, optionally restricted to ``support``.

    The multiplier on ``sum(z) = 1`` is found by bisection; every group then
    reduces to a box-sum projection of the shifted point.
    """
    x = np.asarray(x, dtype=float)
    mask = np.ones(x.size, bool) if support is None else np.isin(np.arange(x.size), list(support))
    groups = []
    for g in partition.groups:
        idx = np.array([i for i in g.indices if mask[i]], dtype=int)
        if idx.size:
            groups.append((idx, g.p, g.q))
        elif g.p > 0:
            raise PartitionError(f"group {g.name!r} needs weight >= {g.p} but has no support")
    if sum(q for _, _, q in groups) < 1.0 - 1e-12:
        raise PartitionError("support cannot carry a full budget under the group upper bounds")

    def assemble(theta):
        z = np.zeros_like(x)
        for idx, p, q in groups:
            z[idx] = project_box_sum(x[idx] - theta, p, q)
        return z

    # total weight is nonincreasing in theta
    span = np.abs(x[mask]).max() if mask.any() else 0.0
    lo, hi = -span - 1.0, span + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if assemble(mid).sum() > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    z_lo, z_hi = assemble(lo), assemble(hi)
    s_lo, s_hi = z_lo.sum(), z_hi.sum()
    if s_lo == s_hi:
        return z_hi
    # total weight is linear between the bracket ends at this resolution
    lam = (s_lo - 1.0) / (s_lo - s_hi)
    return (1.0 - lam) * z_lo + lam * z_hi


def feasibility_problems(w, partition: GroupPartition, atol: float = 1e-10) -> list[str]:
    """Every violated constraint of ``w`` against the simplex and the group rules."""
    w = np.asarray(w, dtype=float)
    errs = []
    if w.shape != (partition.n,):
        return [f"weight vector has shape {w.shape}, expected ({partition.n},)"]
    if np.any(w < 0):
        errs.append(f"negative weights at {np.nonzero(w < 0)[0].tolist()[:10]}")
    if abs(w.sum() - 1.0) > atol:
        errs.append(f"weights sum to {w.sum():.15g}, not 1")
    for g in partition.groups:
        wi = w[list(g.indices)]
        s = wi.sum()
        if s < g.p - atol or s > g.q + atol:
            errs.append(f"group {g.name!r}: budget {s:.12g} outside [{g.p}, {g.q}]")
        card = int(np.count_nonzero(wi))
        if card > g.k:
            errs.append(f"group {g.name!r}: {card} holdings exceed cap {g.k}")
    return errs


def is_feasible(w, partition: GroupPartition, atol: float = 1e-10) -> bool:
    return not feasibility_problems(w, partition, atol)
