"""Distance-based accuracy (DBA) scoring and top-k accuracy.

The DBA score averages, over the top-1/2/3 candidate sets, one minus the
normalized beam-index distance to the true beam, where distances are divided
by ``DELTA`` and clipped at 1.  A per-scenario breakdown accompanies the
overall score so generalization to underrepresented scenarios is visible.

Beam ids are 1-based (1..64) everywhere at this interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

N_BEAMS = 64

# Normalization factor of the index-distance metric: beams more than
# DELTA indices away contribute the full penalty of 1.
DELTA = 5.0


@dataclass(frozen=True)
class BeamLabel:
    """Ground-truth beam index in 1..64."""

    index: int

    def __post_init__(self):
        if not 1 <= self.index <= N_BEAMS:
            raise ValueError(f"beam index {self.index} outside 1..{N_BEAMS}")


@dataclass(frozen=True)
class BeamPrediction:
    """Ordered top-3 beam candidates, most likely first.

    Candidate ids must be pairwise distinct and confidences non-increasing.
    """

    topk: tuple[int, int, int]
    scores: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.topk) != 3:
            raise ValueError("prediction must carry exactly 3 candidates")
        for b in self.topk:
            if not 1 <= b <= N_BEAMS:
                raise ValueError(f"candidate beam {b} outside 1..{N_BEAMS}")
        if len(set(self.topk)) != 3:
            raise ValueError(f"candidate beams must be distinct, got {self.topk}")
        if not (self.scores[0] >= self.scores[1] >= self.scores[2]):
            raise ValueError("candidate scores must be non-increasing")


@dataclass(frozen=True)
class DbaReport:
    """Overall and per-scenario DBA scores plus the three Y_k terms."""

    overall: float
    y1: float
    y2: float
    y3: float
    n_samples: int
    per_scenario: dict[int, float] = field(default_factory=dict)

    def as_text(self) -> str:
        """Flat key=value block, one entry per line."""
        lines = [
            f"overall={self.overall!r}",
            f"y1={self.y1!r}",
            f"y2={self.y2!r}",
            f"y3={self.y3!r}",
            f"n_samples={self.n_samples}",
        ]
        for sid in sorted(self.per_scenario):
            lines.append(f"scenario_{sid}={self.per_scenario[sid]!r}")
        return "\n".join(lines) + "\n"

    def as_csv(self) -> str:
        names = ["overall", "y1", "y2", "y3", "n_samples"]
        values = [repr(self.overall), repr(self.y1), repr(self.y2), repr(self.y3), str(self.n_samples)]
        for sid in sorted(self.per_scenario):
            names.append(f"scenario_{sid}")
            values.append(repr(self.per_scenario[sid]))
        return ",".join(names) + "\n" + ",".join(values) + "\n"


def _penalty(truth: int, candidates: Sequence[int], k: int) -> float:
    """min over the first k candidates of min(|candidate - truth| / DELTA, 1)."""
    return min(min(abs(c - truth) / DELTA, 1.0) for c in candidates[:k])


def _score_subset(truths: Sequence[BeamLabel], preds: Sequence[BeamPrediction]) -> tuple[float, float, float]:
    n = len(truths)
    ys = []
    for k in (1, 2, 3):
        total = sum(_penalty(t.index, p.topk, k) for t, p in zip(truths, preds))
        ys.append(1.0 - total / n)
    return tuple(ys)


def dba_score(
    truths: Sequence[BeamLabel],
    preds: Sequence[BeamPrediction],
    scenario_ids: Sequence[int],
) -> DbaReport:
    """Score top-3 predictions against ground truth.

    All three sequences must have equal, nonzero length.  The per-scenario
    entries are the same score restricted to each scenario's samples.
    """
    if not (len(truths) == len(preds) == len(scenario_ids)):
        raise ValueError(
            f"length mismatch: {len(truths)} truths, {len(preds)} predictions, "
            f"{len(scenario_ids)} scenario ids"
        )
    if len(truths) == 0:
        raise ValueError("cannot score an empty sample set")

    y1, y2, y3 = _score_subset(truths, preds)
    per_scenario = {}
    for sid in sorted(set(scenario_ids)):
        idx = [i for i, s in enumerate(scenario_ids) if s == sid]
        s1, s2, s3 = _score_subset([truths[i] for i in idx], [preds[i] for i in idx])
        per_scenario[sid] = (s1 + s2 + s3) / 3.0

    return DbaReport(
        overall=(y1 + y2 + y3) / 3.0,
        y1=y1,
        y2=y2,
        y3=y3,
        n_samples=len(truths),
        per_scenario=per_scenario,
    )


def topk_accuracy(truths: Sequence[BeamLabel], preds: Sequence[BeamPrediction], k: int) -> float:
    """Fraction of samples whose truth appears among the first k candidates."""
    if not 1 <= k <= 3:
        raise ValueError(f"k must be in 1..3, got {k}")
    if not (len(truths) == len(preds)):
        raise ValueError(f"length mismatch: {len(truths)} truths, {len(preds)} predictions")
    if len(truths) == 0:
        raise ValueError("cannot score an empty sample set")
    hits = sum(1 for t, p in zip(truths, preds) if t.index in p.topk[:k])
    return hits / len(truths)
