"""Inverse-runtime scoring against a stored reference profile.

Each timed test scores w[i] * t_ref[i] / avg_ms; the memory probe scores
proportionally to the reached resolution.  A profile is calibrated by
fixing t_ref/L_ref to a machine's measured suite so that machine scores
exactly the chosen total.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ScoringError
from .runner import Measurement, MemoryProbeResult, SuiteResult


@dataclass
class ReferenceProfile:
    name: str
    t_ref_ms: list  # per-test reference runtimes, tests 1..8
    l_ref_units: float  # reference memory-probe resolution units
    weights: list  # per-test weights, tests 1..9

    def validate(self):
        if len(self.t_ref_ms) != 8 or len(self.weights) != 9:
            raise ScoringError("profile needs 8 runtimes and 9 weights")
        if any(t <= 0 for t in self.t_ref_ms):
            raise ScoringError("reference runtimes must be positive")
        if self.l_ref_units < 1:
            raise ScoringError("reference memory units must be >= 1")
        if any(w < 0 for w in self.weights) or not any(self.weights):
            raise ScoringError("weights must be non-negative, at least one > 0")


@dataclass
class ScoreReport:
    per_test_points: list  # indices 0..8 = tests 1..9
    total: float
    profile_name: str
    failed_tests: list = field(default_factory=list)


def score_test(m: Measurement, profile: ReferenceProfile) -> float:
    if not 1 <= m.test_id <= 8:
        raise ScoringError(f"test_id {m.test_id} is not a timed test")
    if not m.passed or m.avg_ms is None:
        return 0.0
    if m.avg_ms <= 0:
        raise ScoringError(f"test {m.test_id}: avg_ms must be positive")
    i = m.test_id - 1
    return profile.weights[i] * profile.t_ref_ms[i] / m.avg_ms


def score_memory(r: MemoryProbeResult, profile: ReferenceProfile) -> float:
    return profile.weights[8] * r.max_resolution_units / profile.l_ref_units


def aggregate_score(suite: SuiteResult, profile: ReferenceProfile) -> ScoreReport:
    profile.validate()
    points = [0.0] * 9
    failed = []
    for m in suite.measurements:
        pts = score_test(m, profile)
        points[m.test_id - 1] = pts
        if not m.passed:
            failed.append(m.test_id)
    for i in range(8):
        if not any(m.test_id == i + 1 for m in suite.measurements):
            failed.append(i + 1)
    if suite.memory_probe is not None:
        points[8] = score_memory(suite.memory_probe, profile)
        if suite.memory_probe.max_resolution_units < 1:
            failed.append(9)
    else:
        failed.append(9)
    return ScoreReport(
        per_test_points=points,
        total=sum(points),
        profile_name=profile.name,
        failed_tests=sorted(set(failed)),
    )


def calibrate_profile(suite: SuiteResult, total_target: float,
                      name="calibrated") -> ReferenceProfile:
    """Profile under which the calibrating suite scores exactly the target."""
    if total_target <= 0:
        raise ScoringError("total_target must be positive")
    by_test = {m.test_id: m for m in suite.measurements}
    t_ref = []
    for t in range(1, 9):
        m = by_test.get(t)
        if m is None or not m.passed or not m.avg_ms or m.avg_ms <= 0:
            raise ScoringError(f"cannot calibrate: test {t} did not pass")
        t_ref.append(m.avg_ms)
    probe = suite.memory_probe
    if probe is None or probe.max_resolution_units < 1:
        raise ScoringError("cannot calibrate: memory probe did not pass")
    profile = ReferenceProfile(
        name=name,
        t_ref_ms=t_ref,
        l_ref_units=float(probe.max_resolution_units),
        weights=[total_target / 9.0] * 9,
    )
    profile.validate()
    return profile


def save_profile(profile: ReferenceProfile, path):
    profile.validate()
    doc = {
        "name": profile.name,
        "t_ref_ms": profile.t_ref_ms,
        "l_ref_units": profile.l_ref_units,
        "weights": profile.weights,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)


def load_profile(path) -> ReferenceProfile:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    try:
        profile = ReferenceProfile(
            name=doc["name"],
            t_ref_ms=list(doc["t_ref_ms"]),
            l_ref_units=doc["l_ref_units"],
            weights=list(doc["weights"]),
        )
    except KeyError as e:
        raise ScoringError(f"profile file missing field {e}") from None
    profile.validate()
    return profile
