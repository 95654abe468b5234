"""Reward sources: synthetic Gaussian/linear environments and file-backed replay.

Replay substitutes for live model evaluation: each arm carries a list of
already-scored pull records, and a pull returns one of them - sampled with
replacement by default (matching the i.i.d. reward assumption), or cycled in
recorded order in the strict-sequential mode used for exact regressions. The
sequential mode keeps a per-arm cursor and is the one stateful environment;
use a fresh instance per run.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import ConfigurationError, DomainError, Instance


def brevity_score(length: float, tau_low: float, tau_high: float) -> float:
    """Map a token length into [0, 1]: 1 up to tau_low, 0 from tau_high, linear between."""
    if tau_low >= tau_high:
        raise ConfigurationError(f"need tau_low < tau_high, got {tau_low} >= {tau_high}")
    if length < 0:
        raise DomainError(f"length must be >= 0, got {length}")
    if length <= tau_low:
        return 1.0
    if length >= tau_high:
        return 0.0
    return (tau_high - length) / (tau_high - tau_low)


class ReplayTable:
    """Recorded per-arm pull observations; every arm needs at least one record."""

    def __init__(self, records: list[np.ndarray]):
        if not records:
            raise ConfigurationError("replay table has no arms")
        cleaned = []
        width = None
        for arm, rows in enumerate(records):
            mat = np.asarray(rows, dtype=float)
            if mat.ndim != 2 or mat.shape[0] < 1:
                raise ConfigurationError(f"replay arm {arm} has no recorded pulls")
            if width is None:
                width = mat.shape[1]
            elif mat.shape[1] != width:
                raise ConfigurationError("replay records disagree on the objective count")
            if not np.all(np.isfinite(mat)):
                raise ConfigurationError(f"replay arm {arm} has non-finite records")
            cleaned.append(mat)
        if width < 2:
            raise ConfigurationError("replay records need m >= 2 objectives")
        self.records = cleaned

    @property
    def n_arms(self) -> int:
        return len(self.records)

    @property
    def n_objectives(self) -> int:
        return self.records[0].shape[1]

    def means(self) -> np.ndarray:
        return np.array([mat.mean(axis=0) for mat in self.records])

    def subset(self, n_arms: int) -> "ReplayTable":
        if not 1 <= n_arms <= self.n_arms:
            raise ConfigurationError(f"cannot take {n_arms} arms from a {self.n_arms}-arm table")
        return ReplayTable(self.records[:n_arms])


class GaussianEnvironment:
    """Independent Gaussian noise of scale sigma around each arm's mean vector."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.n_arms = instance.n_arms
        self.n_objectives = instance.n_objectives

    def _check_arm(self, arm: int) -> None:
        if not 0 <= arm < self.n_arms:
            raise DomainError(f"arm {arm} out of range [0, {self.n_arms})")

    def pull(self, arm: int, rng: np.random.Generator) -> np.ndarray:
        self._check_arm(arm)
        noise = rng.normal(0.0, 1.0, size=self.n_objectives) * self.instance.sigma
        return self.instance.means[arm] + noise

    def true_means(self) -> np.ndarray:
        return self.instance.means

    @property
    def features(self) -> np.ndarray | None:
        return self.instance.features


class LinearEnvironment(GaussianEnvironment):
    """Gaussian environment whose means are guaranteed to follow the linear model."""

    def __init__(self, instance: Instance):
        if instance.features is None or instance.theta is None:
            raise ConfigurationError("a linear environment needs features and theta")
        super().__init__(instance)


class ReplayEnvironment:
    """Samples recorded pulls; iid mode draws uniformly with replacement."""

    def __init__(self, table: ReplayTable, mode: str = "iid", features: np.ndarray | None = None):
        if mode not in ("iid", "sequential"):
            raise ConfigurationError(f"unknown replay mode {mode!r}")
        self.table = table
        self.mode = mode
        self.n_arms = table.n_arms
        self.n_objectives = table.n_objectives
        self._cursors = [0] * table.n_arms
        if features is not None:
            features = np.asarray(features, dtype=float)
            if features.shape[0] != table.n_arms:
                raise ConfigurationError("replay features must have one row per arm")
        self.features = features

    def pull(self, arm: int, rng: np.random.Generator) -> np.ndarray:
        if not 0 <= arm < self.n_arms:
            raise DomainError(f"arm {arm} out of range [0, {self.n_arms})")
        rows = self.table.records[arm]
        if self.mode == "iid":
            idx = int(rng.integers(rows.shape[0]))
        else:
            idx = self._cursors[arm] % rows.shape[0]
            self._cursors[arm] += 1
        return rows[idx].copy()

    def true_means(self) -> np.ndarray:
        return self.table.means()


def make_environment(kind: str, source, **options):
    """Build an environment: kind in {gaussian, linear, replay}."""
    if kind == "gaussian":
        return GaussianEnvironment(source)
    if kind == "linear":
        return LinearEnvironment(source)
    if kind == "replay":
        return ReplayEnvironment(source, **options)
    raise ConfigurationError(f"unknown environment kind {kind!r}")


def load_replay_csv(path: str | Path, brevity: tuple[float, float] | None = None) -> ReplayTable:
    """Read a replay table from CSV: header arm_id[,len_tokens],obj_1,...,obj_m.

    With ``brevity=(tau_low, tau_high)`` the second objective is recomputed
    from the recorded token length column.
    """
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise ConfigurationError(f"replay file {path} is empty")
        header = [h.strip() for h in header]
        if header[0] != "arm_id":
            raise ConfigurationError(f"replay file {path} must start with an arm_id column")
        has_tokens = len(header) > 1 and header[1] == "len_tokens"
        first_obj = 2 if has_tokens else 1
        if brevity is not None and not has_tokens:
            raise ConfigurationError("brevity recomputation needs a len_tokens column")
        per_arm: dict[int, list[list[float]]] = {}
        for row in reader:
            if not row:
                continue
            arm = int(row[0])
            values = [float(v) for v in row[first_obj:]]
            if brevity is not None:
                values[1] = brevity_score(float(row[1]), *brevity)
            per_arm.setdefault(arm, []).append(values)
    if not per_arm:
        raise ConfigurationError(f"replay file {path} holds no records")
    n_arms = max(per_arm) + 1
    missing = [a for a in range(n_arms) if a not in per_arm]
    if missing:
        raise ConfigurationError(f"replay file {path} is missing records for arms {missing}")
    return ReplayTable([np.array(per_arm[a], dtype=float) for a in range(n_arms)])


def load_instance_json(path: str | Path) -> Instance:
    """Read an instance from JSON: {K, m, sigma, means, features?, theta?}."""
    data = json.loads(Path(path).read_text())
    return instance_from_dict(data)


def instance_from_dict(data: dict) -> Instance:
    means = np.asarray(data["means"], dtype=float)
    if "K" in data and means.shape[0] != int(data["K"]):
        raise ConfigurationError(f"declared K={data['K']} but means has {means.shape[0]} rows")
    if "m" in data and means.shape[1] != int(data["m"]):
        raise ConfigurationError(f"declared m={data['m']} but means has {means.shape[1]} columns")
    features = np.asarray(data["features"], dtype=float) if "features" in data else None
    theta = np.asarray(data["theta"], dtype=float) if "theta" in data else None
    return Instance(means=means, sigma=float(data.get("sigma", 0.0)), features=features, theta=theta)


def random_instance(
    rng: np.random.Generator,
    n_arms: int,
    n_objectives: int = 2,
    sigma: float = 0.5,
    low: float = 0.0,
    high: float = 1.0,
) -> Instance:
    """Instance with means drawn uniformly from [low, high]^m."""
    means = rng.uniform(low, high, size=(n_arms, n_objectives))
    return Instance(means=means, sigma=sigma)


def random_constrained_instance(
    rng: np.random.Generator,
    n_arms: int,
    tau: float,
    sigma: float = 0.5,
) -> Instance:
    """Two-objective instance guaranteed to contain at least one feasible arm."""
    means = rng.uniform(0.0, 1.0, size=(n_arms, 2))
    if not np.any(means[:, 1] >= tau):
        lucky = int(rng.integers(n_arms))
        means[lucky, 1] = tau + (1.0 - tau) * rng.uniform(0.1, 1.0)
    return Instance(means=means, sigma=sigma)


def random_linear_instance(
    rng: np.random.Generator,
    n_arms: int,
    dim: int,
    n_objectives: int = 2,
    sigma: float = 0.5,
) -> Instance:
    """Linear-reward instance with unit-scaled random features."""
    features = rng.normal(size=(n_arms, dim)) / np.sqrt(dim)
    theta = rng.normal(size=(dim, n_objectives))
    return Instance(means=features @ theta, sigma=sigma, features=features, theta=theta)
