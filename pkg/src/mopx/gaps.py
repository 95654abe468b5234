"""Dominance and gap machinery, for true means and plug-in estimates alike.

All functions take a K x m matrix of mean vectors; applying them to estimated
means yields the empirical quantities used by the elimination loops. Argmax
and argmin ties always break toward the lowest arm index. Unbounded gap
components are ``math.inf`` - which compares above every finite gap - and are
serialised as the string ``"inf"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DomainError, InstanceError

UNBOUNDED = math.inf


@dataclass(frozen=True)
class GapEntry:
    """Gap value, classification and defining components for one arm."""

    arm: int
    gap: float
    classification: str
    components: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "arm": self.arm,
            "gap": _json_num(self.gap),
            "classification": self.classification,
            "components": {k: _json_num(v) for k, v in self.components.items()},
        }


@dataclass(frozen=True)
class GapReport:
    """Per-arm gap entries for one instance, plus the derived hardness if defined."""

    mode: str  # "pareto" or "constrained"
    entries: tuple[GapEntry, ...]
    tau: float | None = None
    optimal_arm: int | None = None

    def gap(self, arm: int) -> float:
        return self.entries[arm].gap

    def gaps(self) -> dict[int, float]:
        return {e.arm: e.gap for e in self.entries}

    def to_dict(self) -> dict:
        out: dict = {"mode": self.mode, "entries": [e.to_dict() for e in self.entries]}
        if self.tau is not None:
            out["tau"] = self.tau
        if self.optimal_arm is not None:
            out["optimal_arm"] = self.optimal_arm
        return out


def _json_num(value: float) -> float | str:
    return "inf" if math.isinf(value) else float(value)


def _check_means(means: np.ndarray) -> np.ndarray:
    mat = np.asarray(means, dtype=float)
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 2:
        raise DomainError(f"means must be K x m with m >= 2, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise DomainError("means must be finite")
    return mat


def dominates(u: np.ndarray, v: np.ndarray) -> bool:
    """Strict Pareto dominance: >= everywhere and > somewhere."""
    return bool(np.all(u >= v) and np.any(u > v))


def pareto_front(means: np.ndarray) -> list[int]:
    """Indices of the non-dominated arms; equal vectors never dominate each other."""
    mat = _check_means(means)
    k = mat.shape[0]
    front = []
    for x in range(k):
        if not any(dominates(mat[y], mat[x]) for y in range(k) if y != x):
            front.append(x)
    return front


def _pair_terms(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs closeness terms: small[x, y] = min_i (mu_i(y) - mu_i(x)),
    large[x, y] = max_i (mu_i(x) - mu_i(y))."""
    diff = mat[None, :, :] - mat[:, None, :]  # diff[x, y, i] = mu_i(y) - mu_i(x)
    return diff.min(axis=2), (-diff).max(axis=2)


def pareto_gap_report(means: np.ndarray) -> GapReport:
    """Pareto gaps of every arm.

    Dominated arms get the largest domination margin from a front arm; front
    arms get the smaller of their distinguishability from the rest of the
    front (delta_plus) and the cheapest route through a dominated arm
    (delta_minus). Missing comparison sets yield unbounded components.
    """
    mat = _check_means(means)
    k = mat.shape[0]
    front = set(pareto_front(mat))
    small, large = _pair_terms(mat)

    dominated = [x for x in range(k) if x not in front]
    entries: list[GapEntry] = []
    dominated_gap: dict[int, float] = {}
    for x in dominated:
        dominated_gap[x] = float(max(small[x, y] for y in sorted(front)))

    for x in range(k):
        if x not in front:
            entries.append(
                GapEntry(
                    arm=x,
                    gap=dominated_gap[x],
                    classification="dominated",
                    components={"domination_margin": dominated_gap[x]},
                )
            )
            continue
        others = [y for y in sorted(front) if y != x]
        if others:
            delta_plus = float(min(min(large[x, y], large[y, x]) for y in others))
        else:
            delta_plus = UNBOUNDED
        if dominated:
            delta_minus = float(
                min(max(large[y, x], 0.0) + dominated_gap[y] for y in dominated)
            )
        else:
            delta_minus = UNBOUNDED
        entries.append(
            GapEntry(
                arm=x,
                gap=min(delta_plus, delta_minus),
                classification="pareto",
                components={"delta_plus": delta_plus, "delta_minus": delta_minus},
            )
        )
    return GapReport(mode="pareto", entries=tuple(entries))


def pareto_gap(means: np.ndarray, arm: int) -> GapEntry:
    """Pareto gap entry of a single arm (see ``pareto_gap_report``)."""
    mat = _check_means(means)
    if mat.shape[0] < 2:
        raise DomainError("pareto gaps need K >= 2 arms")
    if not 0 <= arm < mat.shape[0]:
        raise DomainError(f"arm {arm} out of range [0, {mat.shape[0]})")
    return pareto_gap_report(mat).entries[arm]


def feasible_arms(means: np.ndarray, tau: float) -> list[int]:
    """Arms whose constraint objective meets the threshold (mu_2 >= tau)."""
    mat = _check_means(means)
    return [x for x in range(mat.shape[0]) if mat[x, 1] >= tau]


def best_feasible_arm(means: np.ndarray, tau: float) -> int:
    """Feasibility-constrained maximiser of the primary objective, lowest index on ties."""
    mat = _check_means(means)
    feas = feasible_arms(mat, tau)
    if not feas:
        raise InstanceError(f"no feasible arm at threshold tau={tau}")
    return max(feas, key=lambda x: (mat[x, 0], -x))


def constrained_gap_report(means: np.ndarray, tau: float) -> GapReport:
    """Constrained gaps of every arm for a two-objective instance.

    Each arm's raw difficulty is the larger of its constraint violation and
    its primary-objective suboptimality; the gap is that difficulty capped by
    the optimal arm's own constraint margin.
    """
    mat = _check_means(means)
    if mat.shape[1] != 2:
        raise DomainError("constrained gaps are defined for m = 2 objectives")
    star = best_feasible_arm(mat, tau)
    cap = float(mat[star, 1] - tau)
    entries = []
    for x in range(mat.shape[0]):
        viol = float(max(tau - mat[x, 1], 0.0))
        subopt = float(mat[star, 0] - mat[x, 0])
        delta = max(viol, subopt)
        gap = float(min(delta, cap))
        if x == star:
            classification = "optimal"
        elif mat[x, 1] >= tau:
            classification = "feasible"
        else:
            classification = "infeasible"
        entries.append(
            GapEntry(
                arm=x,
                gap=gap,
                classification=classification,
                components={
                    "violation": viol,
                    "suboptimality": subopt,
                    "difficulty": delta,
                    "margin_cap": cap,
                },
            )
        )
    return GapReport(mode="constrained", entries=tuple(entries), tau=tau, optimal_arm=star)


def constrained_gap(means: np.ndarray, tau: float, arm: int) -> GapEntry:
    """Constrained gap entry of a single arm (see ``constrained_gap_report``)."""
    mat = _check_means(means)
    if not 0 <= arm < mat.shape[0]:
        raise DomainError(f"arm {arm} out of range [0, {mat.shape[0]})")
    return constrained_gap_report(mat, tau).entries[arm]


def hardness(means: np.ndarray, tau: float) -> float:
    """max over non-optimal arms of 1 / gap^2; infinite-gap arms contribute zero."""
    mat = _check_means(means)
    if mat.shape[0] < 2:
        raise DomainError("hardness needs K >= 2 arms")
    report = constrained_gap_report(mat, tau)
    worst = 0.0
    for entry in report.entries:
        if entry.arm == report.optimal_arm:
            continue
        if entry.gap == 0.0:
            raise InstanceError(
                f"arm {entry.arm} has zero constrained gap; hardness is undefined"
            )
        worst = max(worst, 1.0 / entry.gap**2)
    return worst
