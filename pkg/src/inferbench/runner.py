"""Timed execution of workloads and the escalating-resolution memory probe.

The wall clock is injected so the whole protocol is testable with a
scripted clock: the number of images started, the pass flag and the
drop-first-two averaging are pure functions of the per-image cost sequence
and the budget.
"""

from __future__ import annotations

import json
import platform
import time
from dataclasses import dataclass, field, asdict

from .dispatch import OPTIMIZED, QUANTIZED, REFERENCE, default_registry
from .errors import InferBenchError
from .graph import execute, peak_activation_bytes, validate
from .tensor import Tensor
from .workloads import (
    DEFAULT_SEED,
    generate_input,
    instantiate,
)
from .zoo import WeightStream, build_srcnn, uniform_stream

ALLOCATION_FAILURE = "allocation_failure"
CONFIGURED_CAP = "configured_cap"


class SimulatedClock:
    """Deterministic monotonic clock; time moves only via ``advance``."""

    def __init__(self, start=0.0):
        self.t = float(start)

    def __call__(self):
        return self.t

    def advance(self, dt):
        self.t += dt


@dataclass
class Measurement:
    test_id: int
    backend_id: str
    images_processed: int
    per_image_ms: list
    avg_ms: float  # None when nothing completed
    passed: bool
    budget_s: float
    start_ms: float = 0.0  # offset from suite start, monotonic
    notes: str = ""


@dataclass
class MemoryProbeResult:
    max_resolution_units: int  # hundreds of pixels per side
    limiting_cause: str
    bytes_at_limit: int
    backend_id: str = REFERENCE
    start_ms: float = 0.0


@dataclass
class SuiteResult:
    metadata: dict
    measurements: list = field(default_factory=list)
    memory_probe: MemoryProbeResult = None


def _average(per_image_ms):
    if not per_image_ms:
        return None
    kept = per_image_ms[2:] if len(per_image_ms) > 2 else per_image_ms
    return sum(kept) / len(kept)


def run_test(graph, spec, kernels, budget_s=None, clock=time.monotonic,
             seed=DEFAULT_SEED) -> Measurement:
    """Process seeded images until the budget expires.

    A new image is started only while elapsed time is under the budget;
    the image in flight at expiry runs to completion and counts.  The test
    passes when the first image finishes within the budget.
    """
    if budget_s is None:
        budget_s = spec.time_budget_s
    if not budget_s or budget_s <= 0:
        raise ValueError("budget_s must be positive")
    per_image_ms = []
    notes = ""
    t0 = clock()
    i = 0
    while i == 0 or clock() - t0 < budget_s:
        x = generate_input(spec, seed + i)
        ts = clock()
        try:
            execute(graph, x, kernels)
        except InferBenchError as e:
            notes = f"execution failed on image {i}: {e}"
            break
        per_image_ms.append((clock() - ts) * 1000.0)
        i += 1
    passed = bool(per_image_ms) and per_image_ms[0] <= budget_s * 1000.0
    return Measurement(
        test_id=spec.test_id,
        backend_id=kernels.backend_id,
        images_processed=len(per_image_ms),
        per_image_ms=per_image_ms,
        avg_ms=_average(per_image_ms),
        passed=passed,
        budget_s=budget_s,
        notes=notes,
    )


def predict_probe_bytes(side_px, seed=DEFAULT_SEED) -> int:
    """Analyzer prediction of live activation bytes for the probe network."""
    graph = validate(build_srcnn(side_px, side_px, WeightStream(seed)))
    return peak_activation_bytes(graph)


def run_memory_probe(kernels, start_units=1, step_units=1, mem_cap_bytes=None,
                     seed=DEFAULT_SEED) -> MemoryProbeResult:
    """Run the deblurring network on growing square inputs until failure.

    Sizes step in 100 px units.  A size fails when the analyzer predicts
    its live activations exceed the configured cap, or when allocation
    actually fails; the last successful size is reported.
    """
    if start_units < 1 or step_units < 1:
        raise ValueError("start_units and step_units must be >= 1")
    last_ok = 0
    bytes_at_limit = 0
    cause = ALLOCATION_FAILURE
    k = start_units
    while True:
        side = 100 * k
        predicted = predict_probe_bytes(side, seed)
        if mem_cap_bytes is not None and predicted > mem_cap_bytes:
            cause = CONFIGURED_CAP
            break
        graph = validate(build_srcnn(side, side, WeightStream(seed)))
        vals = uniform_stream(seed + k, 0, side * side * 3, 0.0, 1.0)
        x = Tensor(vals.astype("float32").reshape(1, side, side, 3))
        try:
            execute(graph, x, kernels)
        except MemoryError:
            cause = ALLOCATION_FAILURE
            break
        last_ok = k
        bytes_at_limit = predicted
        k += step_units
    return MemoryProbeResult(
        max_resolution_units=last_ok,
        limiting_cause=cause,
        bytes_at_limit=bytes_at_limit,
        backend_id=kernels.backend_id,
    )


@dataclass
class SuiteConfig:
    backend: str = "auto"  # auto | reference | optimized | quantized
    threads: int = 1
    scale: float = 1.0
    seed: int = DEFAULT_SEED
    mem_cap_bytes: int = 256 * 2**20
    budget_scale: float = 1.0
    device_name: str = ""
    soc_name: str = ""
    ram_gb: float = 0.0


def preferred_backend(test_id, spec, configured) -> str:
    """Per-test dispatch preference under the suite's backend setting.

    Tests 3, 6 and 7 always take the CPU path (optimized kernels, or
    reference when that is the configured backend); the others try the
    configured backend, with 'auto' meaning quantized for the int8 test
    and optimized otherwise.
    """
    cpu_path = REFERENCE if configured == REFERENCE else OPTIMIZED
    if test_id in (3, 6, 7):
        return cpu_path
    if configured == "auto":
        return QUANTIZED if spec.quantized else OPTIMIZED
    return configured


def run_suite(config: SuiteConfig, clock=time.monotonic, registry=None,
              progress=None) -> SuiteResult:
    """Tests 1..8 under dispatch, then the memory probe."""
    if registry is None:
        registry = default_registry(config.threads)
    metadata = {
        "schema": "inferbench-suite-v1",
        "device_name": config.device_name or platform.node(),
        "soc_name": config.soc_name or (platform.processor() or platform.machine()),
        "ram_gb": config.ram_gb,
        "host": platform.node(),
        "backend": config.backend,
        "threads": config.threads,
        "scale": config.scale,
        "seed": config.seed,
        "budget_scale": config.budget_scale,
        "mem_cap_bytes": config.mem_cap_bytes,
    }
    suite = SuiteResult(metadata=metadata)
    t0 = clock()
    for test_id in range(1, 9):
        start_ms = (clock() - t0) * 1000.0
        try:
            graph, spec = instantiate(test_id, config.scale, config.seed)
        except InferBenchError as e:
            m = Measurement(test_id, "none", 0, [], None, False, 0.0,
                            start_ms, notes=f"instantiation failed: {e}")
            suite.measurements.append(m)
            continue
        decision = registry.select_backend(
            graph, preferred_backend(test_id, spec, config.backend)
        )
        kernels = registry.kernels(decision.chosen_backend_id)
        budget = spec.time_budget_s * config.budget_scale
        m = run_test(graph, spec, kernels, budget, clock, config.seed)
        m.start_ms = start_ms
        if decision.reason != "all_ops_supported":
            note = (f"dispatch: {decision.reason} at node "
                    f"{decision.node_id} ({decision.op_kind})")
            m.notes = f"{m.notes}; {note}" if m.notes else note
        suite.measurements.append(m)
        if progress is not None:
            progress(m)
    # memory probe reuses the deblurring graph under the same dispatch rule
    graph9, spec9 = instantiate(9, config.scale, config.seed)
    decision = registry.select_backend(
        graph9, preferred_backend(9, spec9, config.backend)
    )
    probe = run_memory_probe(
        registry.kernels(decision.chosen_backend_id),
        mem_cap_bytes=config.mem_cap_bytes,
        seed=config.seed,
    )
    probe.start_ms = (clock() - t0) * 1000.0
    suite.memory_probe = probe
    if progress is not None:
        progress(probe)
    return suite


# --- JSONL serialization --------------------------------------------------


def save_suite(suite: SuiteResult, path):
    """One JSONL file: header line, then one line per result."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"type": "header", **suite.metadata}) + "\n")
        for m in suite.measurements:
            f.write(json.dumps({"type": "measurement", **asdict(m)}) + "\n")
        if suite.memory_probe is not None:
            f.write(
                json.dumps({"type": "memory_probe", **asdict(suite.memory_probe)})
                + "\n"
            )


def load_suite(path) -> SuiteResult:
    suites = load_suites(path)
    if len(suites) != 1:
        raise InferBenchError(f"{path} holds {len(suites)} suites, expected 1")
    return suites[0]


def load_suites(path):
    """Parse a JSONL file holding one or more concatenated suite results."""
    suites = []
    current = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            kind = doc.pop("type", None)
            if kind == "header":
                current = SuiteResult(metadata=doc)
                suites.append(current)
            elif kind == "measurement":
                if current is None:
                    raise InferBenchError(f"line {lineno}: measurement before header")
                current.measurements.append(Measurement(**doc))
            elif kind == "memory_probe":
                if current is None:
                    raise InferBenchError(f"line {lineno}: probe before header")
                current.memory_probe = MemoryProbeResult(**doc)
            else:
                raise InferBenchError(f"line {lineno}: unknown record type {kind!r}")
    return suites
