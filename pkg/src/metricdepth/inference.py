"""Depth-based two-group permutation inference.

The test statistic is the metric distance between the deepest in-sample
objects of the two label groups, each computed within its own group's
distance sub-matrix. The null distribution is simulated by group-size
preserving label permutations; the pooled distance matrix is computed once
and permutations act on indices only.

The p-value follows the plain convention
``#{ t_observed <= t_permuted } / B`` (ties count toward the numerator),
which can return 0; ``corrected=True`` switches to the finite-sample
``(1 + #) / (1 + B)`` variant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_distance_array
from .deepest import deepest_in_sample
from .depths import DepthMethod
from .errors import InsufficientSampleError, InvalidArgumentError
from .seeding import PERMUTATION_TAG, SUBTEST_TAG, SWAP_TAG, child_rng, child_seed
from .spaces import ObjectSet, distance_matrix


@dataclass(frozen=True)
class PermutationReport:
    """Observed statistic, permuted draws, and the resulting p-value."""

    t_observed: float
    t_permuted: np.ndarray
    p_value: float
    method: DepthMethod
    B: int
    seed: int
    corrected: bool = False

    def to_dict(self) -> dict:
        return {
            "t_observed": float(self.t_observed),
            "t_permuted": [float(x) for x in self.t_permuted],
            "p_value": float(self.p_value),
            "method": self.method.value,
            "B": int(self.B),
            "seed": int(self.seed),
            "corrected": bool(self.corrected),
        }


@dataclass(frozen=True)
class SwapExperimentReport:
    """Mean p-values per method across repeated random label swaps."""

    k: int
    repeats: int
    B: int
    seed: int
    methods: tuple
    p_values: dict  # method name -> list of per-repeat p-values

    def mean_p_value(self, method: str) -> float:
        return float(np.mean(self.p_values[method]))

    def to_dict(self) -> dict:
        return {
            "k": int(self.k),
            "repeats": int(self.repeats),
            "B": int(self.B),
            "seed": int(self.seed),
            "methods": list(self.methods),
            "per_method": {
                m: {"mean_p_value": self.mean_p_value(m),
                    "p_values": [float(x) for x in self.p_values[m]]}
                for m in self.methods
            },
        }


def _two_groups(labels) -> tuple[np.ndarray, list]:
    labels = np.asarray(labels)
    names = sorted(set(labels.tolist()))
    if len(names) != 2:
        raise InvalidArgumentError(f"need exactly two labels, got {names}")
    return labels, names


def _check_group_sizes(labels, names, method: DepthMethod) -> None:
    for name in names:
        size = int(np.count_nonzero(labels == name))
        if size < method.min_sample:
            raise InsufficientSampleError(
                f"group {name!r} has {size} objects; {method.value} needs {method.min_sample}"
            )


def statistic_from_dm(dm, labels, method: DepthMethod) -> float:
    """Distance between the two groups' deepest in-sample objects."""
    v = as_distance_array(dm)
    labels, names = _two_groups(labels)
    if labels.size != v.shape[0]:
        raise InvalidArgumentError("labels length must match the distance matrix")
    _check_group_sizes(labels, names, method)
    picks = []
    for name in names:
        idx = np.nonzero(labels == name)[0]
        sub = v[np.ix_(idx, idx)]
        picks.append(int(idx[deepest_in_sample(sub, method).index]))
    return float(v[picks[0], picks[1]])


def deepest_distance_statistic(objects: ObjectSet, method: DepthMethod,
                               metric: str | None = None) -> float:
    """Observed test statistic of a labeled two-group object set."""
    if objects.labels is None:
        raise InvalidArgumentError("object set carries no labels")
    dm = distance_matrix(objects, metric)
    return statistic_from_dm(dm, objects.labels, DepthMethod(method))


def permutation_test(objects: ObjectSet, method: DepthMethod, B: int, seed: int,
                     metric: str | None = None, corrected: bool = False,
                     labels=None, dm=None) -> PermutationReport:
    """Two-group permutation test of the deepest-distance statistic.

    Labels are permuted uniformly at random ``B`` times (group sizes
    preserved); permutation b draws from the child stream of (seed, b), so
    the report is independent of evaluation order. ``labels`` overrides the
    object set's own labels and ``dm`` short-circuits the single distance
    matrix computation.
    """
    method = DepthMethod(method)
    if B < 1:
        raise InvalidArgumentError("need at least one permutation")
    if labels is None:
        labels = objects.labels
    if labels is None:
        raise InvalidArgumentError("object set carries no labels")
    labels, names = _two_groups(labels)
    if len(labels) != len(objects):
        raise InvalidArgumentError("labels length must match the object set")
    _check_group_sizes(labels, names, method)
    if dm is None:
        dm = distance_matrix(objects, metric)
    v = as_distance_array(dm)
    t_obs = statistic_from_dm(v, labels, method)
    t_perm = np.empty(B)
    n = len(labels)
    for b in range(B):
        rng = child_rng(seed, PERMUTATION_TAG, b)
        t_perm[b] = statistic_from_dm(v, labels[rng.permutation(n)], method)
    hits = int(np.count_nonzero(t_obs <= t_perm))
    p = (1 + hits) / (1 + B) if corrected else hits / B
    return PermutationReport(t_observed=t_obs, t_permuted=t_perm, p_value=float(p),
                             method=method, B=B, seed=seed, corrected=corrected)


def label_swap_experiment(objects: ObjectSet, methods, k: int, repeats: int, B: int,
                          seed: int, metric: str | None = None,
                          corrected: bool = False) -> SwapExperimentReport:
    """Contaminate labels by swapping k per group, then re-test, repeatedly.

    Per repeat, k objects drawn uniformly from each group exchange labels
    and the permutation test runs for every method on the contaminated
    labels (group sizes are preserved by construction). Reports per-repeat
    and mean p-values per method.
    """
    if objects.labels is None:
        raise InvalidArgumentError("object set carries no labels")
    if repeats < 1:
        raise InvalidArgumentError("need at least one repeat")
    methods = [DepthMethod(m) for m in methods]
    labels, names = _two_groups(objects.labels)
    idx_a = np.nonzero(labels == names[0])[0]
    idx_b = np.nonzero(labels == names[1])[0]
    if k < 0 or k > min(idx_a.size, idx_b.size):
        raise InvalidArgumentError(
            f"k={k} must be between 0 and the smaller group size {min(idx_a.size, idx_b.size)}"
        )
    dm = distance_matrix(objects, metric)
    p_values = {m.value: [] for m in methods}
    for rep in range(repeats):
        rng = child_rng(seed, SWAP_TAG, rep)
        swapped = labels.copy()
        if k > 0:
            from_a = rng.choice(idx_a, size=k, replace=False)
            from_b = rng.choice(idx_b, size=k, replace=False)
            swapped[from_a] = names[1]
            swapped[from_b] = names[0]
        for m_index, method in enumerate(methods):
            sub_seed = child_seed(seed, SUBTEST_TAG, rep, m_index)
            report = permutation_test(objects, method, B, sub_seed,
                                      corrected=corrected, labels=swapped, dm=dm)
            p_values[method.value].append(report.p_value)
    return SwapExperimentReport(k=k, repeats=repeats, B=B, seed=seed,
                                methods=tuple(m.value for m in methods),
                                p_values=p_values)
