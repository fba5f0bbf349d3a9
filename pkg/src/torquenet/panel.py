"""Per-village individual panel: households, covariates, knowledge waves.

A VillagePanel carries one village's per-node attributes with nodes in the
same dense order as the village's MultiplexNetwork. Knowledge indicators
may be missing (NaN); treatment flags may not. Topics are free-form names;
each topic contributes its own treated / wave-1 / wave-3 columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError

# Fixed covariate order used by the regression design matrix.
COVARIATE_NAMES: tuple[str, ...] = (
    "sociability", "age", "gender", "education", "income", "self_health",
)

INCOME_LEVELS = (1, 2, 3, 4)


@dataclass(frozen=True)
class VillagePanel:
    """Attributes for every node of one village.

    All arrays are aligned to dense node ids. Knowledge arrays use NaN for
    missing; treated arrays are strict 0/1.
    """

    village: str
    nodes: tuple[str, ...]
    household: np.ndarray
    sociability: np.ndarray
    age: np.ndarray
    gender: np.ndarray
    education: np.ndarray
    income: np.ndarray
    self_health: np.ndarray
    topics: tuple[str, ...] = ()
    treated: dict[str, np.ndarray] = field(default_factory=dict)
    k_w1: dict[str, np.ndarray] = field(default_factory=dict)
    k_w3: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.nodes)
        for name in ("household",) + COVARIATE_NAMES:
            arr = getattr(self, name)
            if len(arr) != n:
                raise DataError(f"panel column {name} has length {len(arr)}, expected {n}")
        finite_income = self.income[np.isfinite(self.income)]
        if finite_income.size and not np.isin(finite_income, INCOME_LEVELS).all():
            bad = sorted(set(finite_income) - set(INCOME_LEVELS))
            raise DataError(f"income values outside 1..4: {bad}")
        for topic in self.topics:
            for group, strict in ((self.treated, True), (self.k_w1, False), (self.k_w3, False)):
                if topic not in group:
                    raise DataError(f"panel missing topic column for {topic!r}")
                arr = group[topic]
                if len(arr) != n:
                    raise DataError(f"topic column {topic!r} has length {len(arr)}")
                vals = arr[np.isfinite(arr)] if arr.dtype.kind == "f" else arr
                if not np.isin(vals, (0, 1)).all():
                    raise DataError(f"non-binary values in topic column {topic!r}")
                if strict and arr.dtype.kind == "f" and not np.isfinite(arr).all():
                    raise DataError(f"treatment flags for {topic!r} may not be missing")

    @property
    def n(self) -> int:
        return len(self.nodes)

    def check_topic(self, topic: str) -> None:
        if topic not in self.topics:
            raise DataError(
                f"unknown topic {topic!r}; panel has: {', '.join(self.topics) or 'none'}")

    def intervened(self, topic: str) -> np.ndarray:
        """Boolean mask: treated at wave 1 on this topic."""
        self.check_topic(topic)
        return np.asarray(self.treated[topic]) == 1

    def validated(self, topic: str) -> np.ndarray:
        """Interior-node validity: accurate wave-3 knowledge or wave-1 treatment.

        Missing wave-3 knowledge does not validate a node.
        """
        self.check_topic(topic)
        k3 = np.asarray(self.k_w3[topic], dtype=float)
        correct = np.zeros(self.n, dtype=bool)
        finite = np.isfinite(k3)
        correct[finite] = k3[finite] == 1
        return correct | self.intervened(topic)

    def covariate_matrix(self) -> np.ndarray:
        """n x 6 float matrix in COVARIATE_NAMES order; NaN marks missing."""
        return np.column_stack([
            np.asarray(getattr(self, name), dtype=float) for name in COVARIATE_NAMES
        ])

    def with_topic(self, topic: str, treated: np.ndarray,
                   k_w1: np.ndarray, k_w3: np.ndarray) -> "VillagePanel":
        """Copy of the panel with one topic's columns added or replaced."""
        topics = self.topics if topic in self.topics else self.topics + (topic,)
        return replace(
            self,
            topics=topics,
            treated={**self.treated, topic: np.asarray(treated)},
            k_w1={**self.k_w1, topic: np.asarray(k_w1, dtype=float)},
            k_w3={**self.k_w3, topic: np.asarray(k_w3, dtype=float)},
        )
