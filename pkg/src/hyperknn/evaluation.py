"""Train/test splitting, error metrics, and the grid sweep over k and size policies."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import GeometryConfig, SizePolicy, batch_counts
from .predictors import _feature_table, _point_knn, _vote, predict_label_modified, predict_weight_modified
from .weighting import LABEL, WEIGHT, ObservationMap, bucketize_labels

PAPER_EPSILONS = (5 / 3, 4 / 3, 1.0, 2 / 3, 1 / 2)


@dataclass(frozen=True)
class SplitSpec:
    """Holdout fraction and RNG seed; the only sources of randomness in an evaluation."""

    holdout_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must be in (0, 1)")


def split_observations(F: ObservationMap, spec: SplitSpec = SplitSpec()) -> tuple[ObservationMap, ObservationMap]:
    """Uniform random partition of the observed edges into (train, test), reproducible per seed."""
    ids = sorted(F.domain())
    if len(ids) < 2:
        raise ValueError("need at least 2 observed edges to split")
    rng = random.Random(spec.seed)
    shuffled = ids[:]
    rng.shuffle(shuffled)
    n_test = int(round(len(ids) * spec.holdout_fraction))
    n_test = min(max(n_test, 1), len(ids) - 1)
    test_ids = set(shuffled[:n_test])
    return F.restrict(e for e in ids if e not in test_ids), F.restrict(sorted(test_ids))


def mae(pairs: Iterable[tuple[float, float]]) -> float:
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty prediction list")
    return sum(abs(t - p) for t, p in pairs) / len(pairs)


def rmse(pairs: Iterable[tuple[float, float]]) -> float:
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty prediction list")
    return math.sqrt(sum((t - p) ** 2 for t, p in pairs) / len(pairs))


def error_rate(pairs: Iterable[tuple[int, int]]) -> float:
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty prediction list")
    return sum(1 for t, p in pairs if t != p) / len(pairs)


@dataclass(frozen=True)
class GridCell:
    """One evaluated configuration: epsilon is None for the unbounded size policy."""

    method: str
    task: str
    k: int
    epsilon: float | None
    mae: float | None = None
    rmse: float | None = None
    error_rate: float | None = None
    q: int | None = None

    @property
    def criterion(self) -> float:
        return self.mae if self.task == WEIGHT else self.error_rate

    def to_dict(self) -> dict:
        out = {"method": self.method, "task": self.task, "k": self.k, "epsilon": self.epsilon}
        if self.task == WEIGHT:
            out.update(mae=self.mae, rmse=self.rmse)
        else:
            out.update(error_rate=self.error_rate, q=self.q)
        return out


@dataclass
class GridResult:
    """Full grid table plus the winning configuration.

    Under the paper protocol the best cell minimizes the test criterion over
    the whole table.  Under the validation protocol ``selection`` is the cell
    chosen on the inner validation split and ``best`` re-evaluates that
    configuration on the untouched test set.
    """

    task: str
    method: str
    q: int
    protocol: str
    split: SplitSpec
    n_train: int
    n_test: int
    cells: list[GridCell]
    best: GridCell
    selection: GridCell | None = None

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "method": self.method,
            "q": self.q,
            "protocol": self.protocol,
            "holdout_fraction": self.split.holdout_fraction,
            "seed": self.split.seed,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "grid": [c.to_dict() for c in self.cells],
            "best": self.best.to_dict(),
            "selection": self.selection.to_dict() if self.selection else None,
        }


def _cell(task: str, method: str, k: int, policy: SizePolicy, pairs: list, q: int | None) -> GridCell:
    if task == WEIGHT:
        m, r = mae(pairs), rmse(pairs)
        assert m <= r + 1e-12, "MAE exceeded RMSE"
        return GridCell(method, task, k, policy.epsilon, mae=m, rmse=r)
    return GridCell(method, task, k, policy.epsilon, error_rate=error_rate(pairs), q=q)


def _sweep(
    X,
    train_map: ObservationMap,
    eval_map: ObservationMap,
    task: str,
    method: str,
    policies: Sequence[SizePolicy],
    ks: Sequence[int],
    q: int,
    workers: int | None,
) -> list[GridCell]:
    """Evaluate every (policy, k) cell; geometry is computed once per policy.

    Predictions depend on a query edge only through its count (modified) or
    its feature vector (embedded), so they are memoized on those keys.
    """
    train_ids = sorted(train_map.domain())
    eval_ids = sorted(eval_map.domain())
    all_ids = sorted(set(train_ids) | set(eval_ids))
    cells: list[GridCell] = []
    for policy in policies:
        config = GeometryConfig(size_policy=policy)
        if method == "modified":
            counts = batch_counts(X, train_ids, train_map, config, edges=all_ids, workers=workers)
            cache: dict = {}
            for k in ks:
                pairs = []
                for e in eval_ids:
                    key = (counts[e], k)
                    if key not in cache:
                        if task == WEIGHT:
                            cache[key] = predict_weight_modified(e, train_ids, train_map, counts, k)
                        else:
                            cache[key] = predict_label_modified(e, train_ids, train_map, counts, k)
                    pairs.append((eval_map[e], cache[key]))
                cells.append(_cell(task, method, k, policy, pairs, q))
        else:
            L = bucketize_labels(train_map, q) if task == WEIGHT else train_map
            ids, mat = _feature_table(X, train_ids, train_map, L, config, q, all_ids, workers=workers)
            row = {f: i for i, f in enumerate(ids)}
            train_feats = mat[[row[f] for f in train_ids]]
            train_vals = (
                np.fromiter((float(train_map[f]) for f in train_ids), np.float64, len(train_ids))
                if task == WEIGHT
                else [train_map[f] for f in train_ids]
            )
            cache = {}
            for k in ks:
                pairs = []
                for e in eval_ids:
                    key = (tuple(int(x) for x in mat[row[e]]), k)
                    if key not in cache:
                        sel = _point_knn(train_feats, mat[row[e]], k)
                        if task == WEIGHT:
                            cache[key] = float(train_vals[sel].sum() / sel.size)
                        else:
                            cache[key] = _vote([train_vals[i] for i in sel], q)
                    pairs.append((eval_map[e], cache[key]))
                cells.append(_cell(task, method, k, policy, pairs, q))
    return cells


def _best(cells: Sequence[GridCell]) -> GridCell:
    # ties: smaller k first, then the larger (least restrictive) size cap
    return min(cells, key=lambda c: (c.criterion, c.k, -(math.inf if c.epsilon is None else c.epsilon)))


def grid_search(
    X,
    F: ObservationMap,
    task: str = WEIGHT,
    method: str = "modified",
    *,
    k_range: Iterable[int] | None = None,
    epsilons: Sequence[float] = PAPER_EPSILONS,
    include_unbounded: bool = True,
    q: int = 2,
    split: SplitSpec = SplitSpec(),
    protocol: str = "paper",
    workers: int | None = None,
) -> GridResult:
    """Sweep k and the size policies, returning the full table and the best configuration.

    The per-edge bandwidth is always the std of the neighborhood values.  Under
    ``protocol="paper"`` the winner minimizes the test criterion itself; under
    ``protocol="validation"`` it is chosen on an inner split of the training
    half and then scored once on the test half.
    """
    if task not in (WEIGHT, LABEL):
        raise ValueError(f"unknown task {task!r}")
    if method not in ("modified", "embedded"):
        raise ValueError(f"unknown method {method!r}")
    if protocol not in ("paper", "validation"):
        raise ValueError(f"unknown protocol {protocol!r}")
    if task == LABEL:
        if F.kind != LABEL:
            raise ValueError("label task needs a label map")
        q = F.q
    elif F.kind != WEIGHT:
        raise ValueError("weight task needs a weight map")
    ks = list(k_range) if k_range is not None else list(range(1, 21))
    policies = ([SizePolicy.unbounded()] if include_unbounded else []) + [SizePolicy.scaled(e) for e in epsilons]
    if not policies or not ks:
        raise ValueError("empty grid")

    train, test = split_observations(F, split)
    if protocol == "paper":
        cells = _sweep(X, train, test, task, method, policies, ks, q, workers)
        best = _best(cells)
        selection = None
    else:
        inner = SplitSpec(split.holdout_fraction, split.seed + 1)
        core, val = split_observations(train, inner)
        cells = _sweep(X, core, val, task, method, policies, ks, q, workers)
        selection = _best(cells)
        best = _sweep(X, train, test, task, method, [SizePolicy(selection.epsilon)], [selection.k], q, workers)[0]
    return GridResult(
        task=task,
        method=method,
        q=q,
        protocol=protocol,
        split=split,
        n_train=len(train),
        n_test=len(test),
        cells=cells,
        best=best,
        selection=selection,
    )
