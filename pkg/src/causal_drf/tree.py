"""Honest trees with a (weighted) MMD splitting criterion.

Each tree is grown on a subsample that is split into a build half, which
determines the splits, and a populate half, which fills the leaves and is the
only data the tree's weights ever touch.  In causal mode a split is valid only
when every child keeps at least kappa build observations from each treatment
arm; in plain mode the floor applies to the total child size and the split
score is the unweighted MMD between the two children.

The split score for candidate children (I_L, I_R) is

    (|I_L||I_R| / (|I_L|+|I_R|)^2) * (1/S) * sum_s | sum_{i in I_L} nu_{i,L} phi_s(Y_i)
                                                   - sum_{i in I_R} nu_{i,R} phi_s(Y_i) |^2

with phi_s the random Fourier feature of frequency omega_s and, in causal
mode, nu_{i,side} = W_i / #(side, W=1) - (1 - W_i) / #(side, W=0); in plain
mode nu_{i,side} = 1 / |side|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CAUSAL_WEIGHTED_MMD, Dataset, ForestConfig
from .errors import EmptyTreatmentArm, InsufficientData
from .kernel import KernelSpec, fourier_embed, sample_fourier_features


@dataclass
class Tree:
    """Flattened binary tree over global training-row indices.

    ``feature[i] == -1`` marks node i as a leaf; internal nodes carry a
    (feature, threshold) pair and child ids.  ``leaf_members[i]`` holds the
    populate-half row indices routed to leaf i.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_members: list
    build_indices: np.ndarray
    populate_indices: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.feature.shape[0]

    def leaf_for(self, x: np.ndarray) -> int:
        """Route a covariate vector to its leaf node id."""
        node = 0
        feature = self.feature
        while feature[node] >= 0:
            if x[feature[node]] < self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return node


def group_split_weights(side_indices: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Signed per-observation weights nu for one side of a candidate split.

    Entry i (aligned with ``side_indices``) is +1/#(side, W=1) for treated
    rows and -1/#(side, W=0) for controls, so the side's weights sum to zero.
    """
    side_indices = np.asarray(side_indices)
    w = np.asarray(W)[side_indices]
    n1 = int(w.sum())
    n0 = w.shape[0] - n1
    if n1 == 0 or n0 == 0:
        raise EmptyTreatmentArm(f"side has {n1} treated and {n0} control rows")
    return np.where(w == 1, 1.0 / n1, -1.0 / n0)


def split_criterion(
    embedded: np.ndarray,
    left_idx: np.ndarray,
    right_idx: np.ndarray,
    W: np.ndarray,
    mode: str = CAUSAL_WEIGHTED_MMD,
) -> float:
    """Reference (non-incremental) evaluation of the split score.

    ``embedded`` holds the 2S-real Fourier embedding of each observation's
    outcome, indexed consistently with ``left_idx``/``right_idx``/``W``.
    """
    left_idx = np.asarray(left_idx)
    right_idx = np.asarray(right_idx)
    if mode == CAUSAL_WEIGHTED_MMD:
        nu_l = group_split_weights(left_idx, W)
        nu_r = group_split_weights(right_idx, W)
    else:
        nu_l = np.full(left_idx.shape[0], 1.0 / left_idx.shape[0])
        nu_r = np.full(right_idx.shape[0], 1.0 / right_idx.shape[0])
    diff = nu_l @ embedded[left_idx] - nu_r @ embedded[right_idx]
    n_l, n_r = left_idx.shape[0], right_idx.shape[0]
    size_factor = n_l * n_r / (n_l + n_r) ** 2
    # 2S real coordinates; the complex modulus sums cos^2 + sin^2 pairs.
    two_s = embedded.shape[1]
    return float(size_factor * (diff @ diff) / (two_s // 2))


def _scan_feature(values, order, Phi, w, kappa, alpha, causal):
    """Best (score, threshold) along one feature, or None if no valid cut.

    Scans every midpoint between consecutive distinct sorted values with
    cumulative sums; among score ties the smallest threshold wins.
    """
    m = values.shape[0]
    v = values[order]
    t = np.arange(1, m, dtype=np.float64)
    valid = v[1:] > v[:-1]
    min_child = alpha * m
    valid &= (t >= min_child) & (m - t >= min_child)
    Phi_s = Phi[order]
    if causal:
        ws = w[order].astype(np.float64)
        c1 = np.cumsum(ws)[:-1]
        c0 = t - c1
        n1 = ws.sum()
        n0 = m - n1
        valid &= (c1 >= kappa) & (c0 >= kappa)
        valid &= (n1 - c1 >= kappa) & (n0 - c0 >= kappa)
        cut = np.flatnonzero(valid)
        if cut.size == 0:
            return None
        A1 = np.cumsum(Phi_s * ws[:, None], axis=0)
        A0 = np.cumsum(Phi_s * (1.0 - ws)[:, None], axis=0)
        T1, T0 = A1[-1], A0[-1]
        c1c, c0c = c1[cut, None], c0[cut, None]
        tau_l = A1[cut] / c1c - A0[cut] / c0c
        tau_r = (T1 - A1[cut]) / (n1 - c1c) - (T0 - A0[cut]) / (n0 - c0c)
    else:
        valid &= (t >= kappa) & (m - t >= kappa)
        cut = np.flatnonzero(valid)
        if cut.size == 0:
            return None
        A = np.cumsum(Phi_s, axis=0)
        T = A[-1]
        tc = t[cut, None]
        tau_l = A[cut] / tc
        tau_r = (T - A[cut]) / (m - tc)
    diff = tau_l - tau_r
    tcut = t[cut]
    S = Phi.shape[1] // 2
    scores = (tcut * (m - tcut) / m**2) * np.einsum("ij,ij->i", diff, diff) / S
    best = int(np.argmax(scores))  # first max -> smallest threshold
    pos = int(cut[best]) + 1
    return float(scores[best]), 0.5 * (v[pos - 1] + v[pos])


def best_split(
    node_positions: np.ndarray,
    Xb: np.ndarray,
    Wb: np.ndarray,
    Phi: np.ndarray,
    config: ForestConfig,
    rng: np.random.Generator,
):
    """Best (feature, threshold) over mtry candidate features, or None.

    Candidate features are drawn uniformly without replacement and examined
    in increasing index order, so ties resolve to the smaller feature index.
    """
    m = node_positions.shape[0]
    if m < 2:
        return None
    p = Xb.shape[1]
    mtry = config.resolved_mtry(p)
    features = np.sort(rng.choice(p, size=mtry, replace=False))
    causal = config.split_mode == CAUSAL_WEIGHTED_MMD
    kappa = config.min_leaf_per_group
    Phi_node = Phi[node_positions]
    w_node = Wb[node_positions]
    best = None
    for j in features:
        values = Xb[node_positions, j]
        order = np.argsort(values, kind="stable")
        res = _scan_feature(
            values, order, Phi_node, w_node, kappa, config.alpha_regularity, causal
        )
        if res is not None and (best is None or res[0] > best[0]):
            best = (res[0], int(j), res[1])
    if best is None:
        return None
    return best[1], best[2]


def _leaf_ok(members, W, kappa, causal) -> bool:
    if causal:
        n1 = int(W[members].sum())
        return n1 >= kappa and members.shape[0] - n1 >= kappa
    return members.shape[0] >= kappa


def build_tree(
    subsample_indices: np.ndarray,
    dataset: Dataset,
    spec: KernelSpec,
    config: ForestConfig,
    rng: np.random.Generator,
) -> Tree:
    """Grow one honest tree on ``subsample_indices`` (global row indices).

    The subsample is split into a build half and a populate half, splits are
    chosen greedily on the build half under the alpha-regularity and per-arm
    kappa constraints, populate observations are routed down the tree, and
    any leaf whose populate sample violates the kappa floor is merged with
    its sibling (the parent collapses to a leaf) until every leaf complies.
    """
    subsample_indices = np.asarray(subsample_indices)
    causal = config.split_mode == CAUSAL_WEIGHTED_MMD
    kappa = config.min_leaf_per_group

    perm = rng.permutation(subsample_indices.shape[0])
    n_build = int(round(subsample_indices.shape[0] * config.honesty_fraction))
    build_idx = subsample_indices[perm[:n_build]]
    populate_idx = subsample_indices[perm[n_build:]]

    ff = sample_fourier_features(spec, config.fourier_count, rng)
    Phi = fourier_embed(dataset.Y[build_idx], ff)
    Xb = dataset.X[build_idx]
    Wb = dataset.W[build_idx]

    def grow(positions):
        res = best_split(positions, Xb, Wb, Phi, config, rng)
        if res is None:
            return {"leaf": True}
        j, thr = res
        mask = Xb[positions, j] < thr
        return {
            "leaf": False,
            "feature": j,
            "threshold": thr,
            "children": (grow(positions[mask]), grow(positions[~mask])),
        }

    root = grow(np.arange(n_build))

    # Route the populate half and apply the honesty merge bottom-up: a
    # subtree whose populated leaves cannot all satisfy the kappa floor
    # collapses to a single leaf holding all its members.
    Xp = dataset.X[populate_idx]

    def finalize(node, member_positions):
        members = populate_idx[member_positions]
        if not node["leaf"]:
            mask = Xp[member_positions, node["feature"]] < node["threshold"]
            left = finalize(node["children"][0], member_positions[mask])
            right = finalize(node["children"][1], member_positions[~mask])
            if left is not None and right is not None:
                return {
                    "leaf": False,
                    "feature": node["feature"],
                    "threshold": node["threshold"],
                    "children": (left, right),
                }
        if _leaf_ok(members, dataset.W, kappa, causal):
            return {"leaf": True, "members": members}
        return None

    final = finalize(root, np.arange(populate_idx.shape[0]))
    if final is None:
        raise InsufficientData(
            "populate half cannot satisfy the per-leaf kappa floor at the root"
        )

    feature, threshold, left, right, leaf_members = [], [], [], [], []

    def flatten(node) -> int:
        nid = len(feature)
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        leaf_members.append(None)
        if node["leaf"]:
            leaf_members[nid] = np.asarray(node["members"])
        else:
            feature[nid] = node["feature"]
            threshold[nid] = node["threshold"]
            left[nid] = flatten(node["children"][0])
            right[nid] = flatten(node["children"][1])
        return nid

    flatten(final)
    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        leaf_members=leaf_members,
        build_indices=build_idx,
        populate_indices=populate_idx,
    )


def tree_weights(
    tree: Tree, x: np.ndarray, W: np.ndarray, mode: str = CAUSAL_WEIGHTED_MMD
) -> tuple[np.ndarray, np.ndarray]:
    """Sparse signed weights of one tree at query point ``x``.

    Returns (row_indices, values).  Causal mode: +1/#(leaf, W=1) on treated
    leaf members and -1/#(leaf, W=0) on controls, so the treated weights sum
    to +1 and the control weights to -1.  Plain mode: 1/|leaf| on every
    member.
    """
    members = tree.leaf_members[tree.leaf_for(np.asarray(x, dtype=np.float64))]
    if mode == CAUSAL_WEIGHTED_MMD:
        values = group_split_weights(members, W)
    else:
        values = np.full(members.shape[0], 1.0 / members.shape[0])
    return members, values
