"""K-Means over standardized state vectors.

Features are z-scored internally (zero-variance columns are dropped with a
warning), centers start from k-means++ seeding, and Lloyd iterations run
until the largest centroid shift falls under the tolerance. Each fit is the
best of several seeded restarts by final inertia. Within a single run the
inertia sequence never increases; that is checked, not assumed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, TooFewRowsError, ZeroVarianceWarning
from .features import Dataset


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray  # (k, d) in standardized space
    feature_names: tuple[str, ...]
    feature_means: np.ndarray
    feature_stds: np.ndarray
    dropped: tuple[str, ...]
    assignments: np.ndarray
    inertia: float

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)

    def raw_centroids(self) -> np.ndarray:
        """Centroids mapped back to raw feature units."""
        return self.centroids * self.feature_stds + self.feature_means

    def predict(self, X_raw: np.ndarray) -> np.ndarray:
        Z = (np.atleast_2d(X_raw) - self.feature_means) / self.feature_stds
        assign, _ = kernels.assign_points(np.ascontiguousarray(Z), self.centroids)
        return assign


def _standardize(X: np.ndarray, names: tuple[str, ...]):
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    keep = stds > 0.0
    if not keep.all():
        dropped = tuple(n for n, k in zip(names, keep) if not k)
        warnings.warn(
            f"dropping zero-variance features before clustering: {', '.join(dropped)}",
            ZeroVarianceWarning,
            stacklevel=3,
        )
    else:
        dropped = ()
    kept_names = tuple(n for n, k in zip(names, keep) if k)
    Z = (X[:, keep] - means[keep]) / stds[keep]
    return np.ascontiguousarray(Z), kept_names, means[keep], stds[keep], dropped


def _kmeans_pp(Z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = Z.shape[0]
    centers = np.empty((k, Z.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = Z[first]
    d2 = ((Z - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # all remaining points coincide with a chosen center
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[c] = Z[idx]
        d2 = np.minimum(d2, ((Z - centers[c]) ** 2).sum(axis=1))
    return centers


def _lloyd(
    Z: np.ndarray, k: int, rng: np.random.Generator, max_iter: int, tol: float
) -> tuple[np.ndarray, np.ndarray, float]:
    centers = _kmeans_pp(Z, k, rng)
    prev_inertia = np.inf
    assign, inertia = kernels.assign_points(Z, centers)
    for _ in range(max_iter):
        if inertia > prev_inertia + 1e-9:
            raise RuntimeError(
                f"inertia increased within a run: {prev_inertia} -> {inertia}"
            )
        prev_inertia = inertia
        new_centers = np.empty_like(centers)
        counts = np.bincount(assign, minlength=k)
        for c in range(k):
            if counts[c] > 0:
                new_centers[c] = Z[assign == c].mean(axis=0)
        empties = [c for c in range(k) if counts[c] == 0]
        if empties:
            # reseed each empty cluster with the point farthest from its
            # current centroid, never reusing a point
            residual = ((Z - centers[assign]) ** 2).sum(axis=1)
            taken: set[int] = set()
            for c in empties:
                order = np.argsort(-residual, kind="stable")
                pick = next(int(i) for i in order if int(i) not in taken)
                taken.add(pick)
                new_centers[c] = Z[pick]
                residual[pick] = -1.0
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        assign, inertia = kernels.assign_points(Z, centers)
        if shift < tol:
            break
    return centers, assign, float(inertia)


def fit(
    data: Dataset | np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
    n_restarts: int = 10,
    feature_names: tuple[str, ...] | None = None,
) -> ClusterModel:
    """Cluster rows into k groups; returns the lowest-inertia restart.

    Restart r uses RNG stream seed + r, so results depend only on the data
    contents, seed and restart count.
    """
    if isinstance(data, Dataset):
        X = data.X
        names = tuple(data.feature_names)
    else:
        X = np.asarray(data, dtype=np.float64)
        names = feature_names or tuple(f"f{i}" for i in range(X.shape[1]))
    if k < 1:
        raise ConfigError("k must be >= 1")
    if X.shape[0] < k:
        raise TooFewRowsError(f"{X.shape[0]} rows cannot form {k} clusters")
    Z, kept, means, stds, dropped = _standardize(X, names)

    best = None
    for r in range(n_restarts):
        rng = np.random.default_rng(seed + r)
        centers, assign, inertia = _lloyd(Z, k, rng, max_iter, tol)
        if best is None or inertia < best[2]:
            best = (centers, assign, inertia)
    centers, assign, inertia = best
    return ClusterModel(
        k=k,
        centroids=centers,
        feature_names=kept,
        feature_means=means,
        feature_stds=stds,
        dropped=dropped,
        assignments=assign,
        inertia=inertia,
    )


@dataclass(frozen=True)
class ElbowResult:
    k_values: tuple[int, ...]
    inertias: tuple[float, ...]
    suggested_k: int


def elbow(
    data: Dataset | np.ndarray,
    k_min: int = 2,
    k_max: int = 15,
    seed: int = 0,
    n_restarts: int = 10,
    feature_names: tuple[str, ...] | None = None,
) -> ElbowResult:
    """Inertia curve over k plus the knee suggestion.

    The suggestion maximizes the discrete second difference
    I(k-1) - 2 I(k) + I(k+1); endpoints cannot win. With enough restarts the
    curve is non-increasing in k, but that is a statistical expectation, not
    a guarantee, so it is reported rather than enforced.
    """
    if isinstance(data, Dataset):
        n = data.n_rows
    else:
        n = np.asarray(data).shape[0]
    ks = [k for k in range(k_min, k_max + 1) if k <= n]
    if not ks:
        raise TooFewRowsError("no feasible k in range")
    inertias = []
    for k in ks:
        model = fit(
            data,
            k,
            seed=seed,
            n_restarts=n_restarts,
            feature_names=feature_names,
        )
        inertias.append(model.inertia)
    if len(ks) < 3:
        suggested = ks[0]
    else:
        curve = np.asarray(inertias)
        second = curve[:-2] - 2.0 * curve[1:-1] + curve[2:]
        suggested = ks[1 + int(np.argmax(second))]
    return ElbowResult(
        k_values=tuple(ks),
        inertias=tuple(float(v) for v in inertias),
        suggested_k=int(suggested),
    )
