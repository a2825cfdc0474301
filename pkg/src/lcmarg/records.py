"""Seeded streams, Monte Carlo estimates and run-log records.

Stream split rule: child ``i`` of a root seed ``s`` is
``Generator(PCG64(SeedSequence(entropy=s, spawn_key=(i,))))``.  Every loop
that can run in parallel draws item ``i`` from child ``i`` so results do not
depend on the worker count.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np


def make_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def child_rng(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def spawn(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    """Independent child streams of ``rng`` (deterministic in the parent state)."""
    return rng.spawn(count)


def seed_of(rng: np.random.Generator) -> str:
    """Provenance string for a generator: root entropy plus spawn key."""
    ss = getattr(rng.bit_generator, "seed_seq", None)
    if ss is None or not hasattr(ss, "entropy"):
        return "unknown"
    key = ",".join(str(k) for k in ss.spawn_key)
    return f"{ss.entropy}/{key}" if key else str(ss.entropy)


def parallel_map(fn: Callable[[Any], Any], items: Sequence[Any], workers: int = 1) -> list[Any]:
    """Order-preserving map; threads only, so closures need not pickle."""
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class EstimateWithCI:
    """Scalar Monte Carlo estimate.

    ``lower``/``upper`` carry a deterministic bracket when the method yields
    one (volume sandwiches, Fradelizi brackets); otherwise they are None.
    ``status`` is ``"ok"`` or ``"indeterminate"``.
    """

    value: float
    stderr: float
    N: int
    seed: str
    method: str
    lower: float | None = None
    upper: float | None = None
    status: str = "ok"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError(f"stderr must be nonnegative, got {self.stderr}")

    @property
    def ci(self) -> tuple[float, float]:
        return self.value - 2.0 * self.stderr, self.value + 2.0 * self.stderr

    @property
    def pessimistic_upper(self) -> float:
        """Upper end used by acceptance tests: bracket top plus two stderr."""
        top = self.value if self.upper is None else max(self.value, self.upper)
        return top + 2.0 * self.stderr

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["extra"] = _jsonable(rec["extra"])
        return rec


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def wilson_interval(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def power_mean(values: np.ndarray, q: float) -> tuple[float, float]:
    """``(mean v^q)^(1/q)`` for positive ``values`` with delta-method stderr.

    ``q = 0`` is the geometric mean.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if q == 0:
        logs = np.log(v)
        g = float(np.exp(logs.mean()))
        return g, g * float(logs.std(ddof=1)) / math.sqrt(n)
    # scale out the largest term so extreme powers stay finite
    logv = np.log(v)
    shift = logv.max() if q > 0 else logv.min()
    w = np.exp(q * (logv - shift))
    m = w.mean()
    se_m = w.std(ddof=1) / math.sqrt(n)
    val = math.exp(shift) * m ** (1.0 / q)
    se = val * se_m / (abs(q) * m)
    return float(val), float(se)


def digest_array(a: np.ndarray, decimals: int = 10) -> str:
    a = np.round(np.asarray(a, dtype=float), decimals) + 0.0  # folds -0.0
    return hashlib.sha256(a.tobytes()).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, EstimateWithCI):
        return obj.to_record()
    return obj


def inputs_digest(inputs: dict) -> str:
    blob = json.dumps(_jsonable(inputs), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class RunLog:
    """Append-only JSONL run log; every estimator record carries seed and method."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.records: list[dict] = []

    def emit(self, kind: str, inputs: dict, result: EstimateWithCI | dict, wall_time: float | None = None) -> dict:
        body = result.to_record() if isinstance(result, EstimateWithCI) else _jsonable(result)
        rec = {"kind": kind, "inputs_digest": inputs_digest(inputs), "inputs": _jsonable(inputs), **body}
        if wall_time is not None:
            rec["wall_time"] = round(wall_time, 6)
        self.records.append(rec)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        return rec

    def timed(self, kind: str, inputs: dict, fn: Callable[[], EstimateWithCI]) -> EstimateWithCI:
        t0 = time.perf_counter()
        est = fn()
        self.emit(kind, inputs, est, time.perf_counter() - t0)
        return est


def iter_jsonl(path: str | Path) -> Iterable[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)
