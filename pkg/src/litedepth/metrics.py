"""Challenge metrics and the speed/accuracy score."""

from dataclasses import dataclass

import numpy as np

PRED_FLOOR = 1e-6

# published leaderboard rows:
# (rank, team, si-RMSE, RMSE, log10, REL, runtime ms, score)
CHALLENGE_TABLE = (
    (1, "TCL", 0.277, 3.47, 0.110, 0.299, 46.0, 297.79),
    (2, "Zhenyu Li", 0.311, 3.79, 0.124, 0.342, 37.0, 232.04),
    (3, "ChaoMI", 0.299, 3.89, 0.134, 0.380, 54.0, 187.77),
    (4, "parkzyzhang", 0.303, 3.80, 12.189, 0.301, 68.0, 141.07),
    (5, "RocheL", 0.329, 4.06, 0.137, 0.366, 65.0, 102.07),
    (6, "mvc", 0.349, 4.46, 0.140, 0.340, 139.0, 36.07),
    (7, "Byung Hyun Lee", 0.338, 6.73, 0.332, 0.507, 142.0, 41.58),
)

_TO_MS = {"ms": 1.0, "s": 1000.0}


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class EvalResult:
    si_rmse: float
    rmse: float
    log10: float
    rel: float
    n_valid: int

    def to_dict(self):
        return {"si_rmse": self.si_rmse, "rmse": self.rmse, "log10": self.log10,
                "rel": self.rel, "n_valid": self.n_valid}


@dataclass(frozen=True)
class ScoreParams:
    """Score constant ``C`` and runtime; ``unit`` is mandatory ("ms" or "s")."""

    C: float
    runtime: float
    unit: str

    def __post_init__(self):
        if self.unit not in _TO_MS:
            raise ValueError(f"runtime unit must be one of {sorted(_TO_MS)}, got {self.unit!r}")
        if not self.C > 0:
            raise ValueError(f"score constant C must be positive, got {self.C}")
        if not self.runtime > 0:
            raise ValueError(f"runtime must be positive, got {self.runtime}")

    @property
    def runtime_ms(self):
        return self.runtime * _TO_MS[self.unit]


def _select(pred, gt, valid):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if pred.shape != gt.shape or pred.shape != valid.shape:
        raise MetricError(f"shape mismatch: pred {pred.shape}, gt {gt.shape}, valid {valid.shape}")
    if not valid.any():
        raise MetricError("valid mask is empty")
    p, g = pred[valid], gt[valid]
    if np.any(g <= 0):
        raise MetricError("ground truth must be positive on valid pixels")
    return np.maximum(p, PRED_FLOOR), g


def si_rmse(pred, gt, valid):
    p, g = _select(pred, gt, valid)
    e = np.log(p) - np.log(g)
    return float(np.sqrt(max(np.mean(e * e) - np.mean(e) ** 2, 0.0)))


def evaluate(pred, gt, valid):
    """si-RMSE (natural log), RMSE, mean |log10 ratio| and REL over valid pixels."""
    p, g = _select(pred, gt, valid)
    e = np.log(p) - np.log(g)
    return EvalResult(
        si_rmse=float(np.sqrt(max(np.mean(e * e) - np.mean(e) ** 2, 0.0))),
        rmse=float(np.sqrt(np.mean((p - g) ** 2))),
        log10=float(np.mean(np.abs(np.log10(p) - np.log10(g)))),
        rel=float(np.mean(np.abs(p - g) / g)),
        n_valid=int(p.size),
    )


def evaluate_many(triples):
    """Aggregate over images two ways: mean of per-image metrics, and pooled pixels."""
    triples = list(triples)
    if not triples:
        raise MetricError("no images to evaluate")
    per_image = [evaluate(*t) for t in triples]
    mean = EvalResult(
        si_rmse=float(np.mean([r.si_rmse for r in per_image])),
        rmse=float(np.mean([r.rmse for r in per_image])),
        log10=float(np.mean([r.log10 for r in per_image])),
        rel=float(np.mean([r.rel for r in per_image])),
        n_valid=int(sum(r.n_valid for r in per_image)),
    )
    sel = [_select(*t) for t in triples]
    pooled = evaluate(np.concatenate([p for p, _ in sel]), np.concatenate([g for _, g in sel]),
                      np.ones(sum(p.size for p, _ in sel), dtype=bool))
    return per_image, mean, pooled


def challenge_score(si_rmse_value, params):
    """2^(-20 * si-RMSE) / (C * runtime[ms])."""
    return 2.0 ** (-20.0 * si_rmse_value) / (params.C * params.runtime_ms)


def fit_score_constant(si_rmse_value, runtime_ms, score):
    """Solve the score formula for ``C`` given one published (si-RMSE, runtime, score) row."""
    if runtime_ms <= 0 or score <= 0:
        raise MetricError("runtime and score must be positive")
    return 2.0 ** (-20.0 * si_rmse_value) / (runtime_ms * score)
