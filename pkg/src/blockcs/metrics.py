"""Evaluation indicators and the user-level detection protocol."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .model import Problem, objective
from .types import BlockStructure, ContractError, as_signal

ZERO_TOL = 1e-8
BISECTION_STEPS = 64


@dataclass(frozen=True)
class MetricsRecord:
    iterations: float
    wall_time: float
    r_error: float
    obj_value: float
    t_rate: float
    tc_rate: float

    def __post_init__(self):
        for name in ("t_rate", "tc_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ContractError(f"{name}: must lie in [0, 100], got {v}")
        if not self.r_error >= 0:
            raise ContractError(f"r_error: must be nonnegative, got {self.r_error}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DetectionStats:
    fap: float
    fir: float
    threshold: float
    trials: int

    def __post_init__(self):
        if not 0.0 <= self.fap <= 1.0:
            raise ContractError(f"fap: must lie in [0, 1], got {self.fap}")
        if not 0.0 <= self.fir <= 1.0:
            raise ContractError(f"fir: must lie in [0, 1], got {self.fir}")
        if not self.threshold >= 0:
            raise ContractError(f"threshold: must be nonnegative, got {self.threshold}")
        if self.trials < 1:
            raise ContractError(f"trials: must be >= 1, got {self.trials}")


def relative_error(x_rec, x_true, denominator: str = "recovered") -> float:
    """``||x_rec - x_true|| / ||x_rec||``.

    ``denominator="true"`` divides by ``||x_true||`` instead. A zero denominator gives
    ``inf`` unless the numerator is also zero, in which case the error is 0.
    """
    x_rec = as_signal(x_rec, name="x_rec")
    x_true = as_signal(x_true, x_rec.shape[0], "x_true")
    if denominator == "recovered":
        den = float(np.linalg.norm(x_rec))
    elif denominator == "true":
        den = float(np.linalg.norm(x_true))
    else:
        raise ContractError(f"denominator must be 'recovered' or 'true', got {denominator!r}")
    num = float(np.linalg.norm(x_rec - x_true))
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / den


def support_rates(x_rec, x_true, zero_tol: float = ZERO_TOL) -> tuple[float, float]:
    """Percentages of true nonzeros recovered as nonzero and true zeros kept below ``zero_tol``."""
    x_rec = as_signal(x_rec, name="x_rec")
    x_true = as_signal(x_true, x_rec.shape[0], "x_true")
    if zero_tol < 0:
        raise ContractError(f"zero_tol must be nonnegative, got {zero_tol}")
    on = x_true != 0
    big = np.abs(x_rec) > zero_tol
    k = int(np.count_nonzero(on))
    n0 = x_true.shape[0] - k
    t_rate = 100.0 * np.count_nonzero(on & big) / k if k else 100.0
    tc_rate = 100.0 * np.count_nonzero(~on & ~big) / n0 if n0 else 100.0
    return float(t_rate), float(tc_rate)


def objective_metric(p: Problem, x_rec) -> float:
    return objective(p, x_rec)


def block_statistics(signals, bs: BlockStructure) -> np.ndarray:
    """Largest entry modulus of every block, shape ``(trials, blocks)``."""
    rows = []
    for x in signals:
        mag = np.abs(as_signal(x, bs.total_len))
        rows.append(np.maximum.reduceat(mag, np.asarray(bs.offsets)) if mag.size else mag)
    return np.asarray(rows, dtype=float).reshape(len(rows), bs.num_blocks)


def _rates(stat: np.ndarray, active: np.ndarray, threshold: float) -> tuple[float, float]:
    declared = stat > threshold
    fap = float(np.mean(declared[~active]))
    fir = float(np.mean(~declared[active])) if np.any(active) else 0.0
    return fap, fir


def detection_rates(recovered, truths, bs: BlockStructure, threshold: float) -> tuple[float, float]:
    """FAP and FIR at a fixed threshold, pooled over user-trials."""
    stat = block_statistics(recovered, bs)
    active = block_statistics(truths, bs) > 0
    if not np.any(~active):
        raise ContractError("no inactive user-trials: false-alarm probability is undefined")
    return _rates(stat, active, threshold)


def calibrate_threshold(recovered, truths, bs: BlockStructure, target_fap: float) -> DetectionStats:
    """Smallest threshold whose false-alarm probability is at most ``target_fap``.

    A user is declared active when some entry of its block exceeds the threshold.
    Candidates are 0 and the observed block statistics; since FAP is nonincreasing in
    the threshold, the smallest admissible candidate is found by bisection.
    """
    recovered, truths = list(recovered), list(truths)
    if not recovered or len(recovered) != len(truths):
        raise ContractError(
            f"need equally many recovered and true signals (>= 1), got {len(recovered)} and {len(truths)}"
        )
    stat = block_statistics(recovered, bs)
    active = block_statistics(truths, bs) > 0
    return calibrate_statistics(stat, active, target_fap)


def calibrate_statistics(stat, active, target_fap: float) -> DetectionStats:
    """Calibration on precomputed block statistics.

    ``stat`` and ``active`` have shape ``(trials, users)``: the largest recovered
    modulus of each block and whether the user was truly active.
    """
    stat = np.asarray(stat, dtype=float)
    active = np.asarray(active, dtype=bool)
    if stat.ndim != 2 or stat.shape != active.shape or stat.shape[0] < 1:
        raise ContractError(f"statistics and activity must share a (trials, users) shape, got "
                            f"{stat.shape} and {active.shape}")
    if not 0.0 < target_fap < 1.0:
        raise ContractError(f"target_fap must lie in (0, 1), got {target_fap}")
    if not np.any(~active):
        raise ContractError("no inactive user-trials: false-alarm probability is undefined")
    cand = np.unique(np.concatenate([[0.0], stat.ravel()]))
    lo, hi = 0, cand.size - 1                  # FAP at the largest candidate is 0
    for _ in range(BISECTION_STEPS):
        if lo >= hi:
            break
        mid = (lo + hi) // 2
        if _rates(stat, active, cand[mid])[0] <= target_fap:
            hi = mid
        else:
            lo = mid + 1
    t = float(cand[lo])
    fap, fir = _rates(stat, active, t)
    return DetectionStats(fap=fap, fir=fir, threshold=t, trials=stat.shape[0])


def aggregate(records) -> MetricsRecord:
    """Fieldwise arithmetic mean."""
    records = list(records)
    if not records:
        raise ContractError("cannot aggregate an empty list of records")
    names = [f.name for f in fields(MetricsRecord)]
    means = {k: float(np.mean([getattr(r, k) for r in records])) for k in names}
    means["t_rate"] = min(max(means["t_rate"], 0.0), 100.0)
    means["tc_rate"] = min(max(means["tc_rate"], 0.0), 100.0)
    return MetricsRecord(**means)
