"""Running a miniature benchmark suite and scoring it.

Uses tiny resolutions and budgets so the demo finishes in seconds; a real
desk-scale run would use --scale 0.25 via the CLI.

Run: python3 demos/04_run_and_score.py
"""

import time

from inferbench.runner import SuiteConfig, predict_probe_bytes, run_suite
from inferbench.scoring import aggregate_score, calibrate_profile

config = SuiteConfig(
    backend="auto",
    threads=2,
    scale=0.05,          # smallest viable resolutions
    budget_scale=0.5,    # a handful of images per test
    mem_cap_bytes=int(predict_probe_bytes(100) * 4.5),
    device_name="demo-host",
    soc_name="demo-soc",
)
suite = run_suite(config, clock=time.monotonic)

print(f"{'test':>4} {'backend':<10} {'images':>6} {'avg ms':>10} pass")
for m in suite.measurements:
    print(f"{m.test_id:>4} {m.backend_id:<10} {m.images_processed:>6} "
          f"{m.avg_ms:>10.2f} {'yes' if m.passed else 'NO'}")
probe = suite.memory_probe
print(f"   9 {probe.backend_id:<10} max side {100 * probe.max_resolution_units} px "
      f"({probe.limiting_cause})")

# Calibrate a profile so this very machine scores 1000, then verify the
# fixed point.
profile = calibrate_profile(suite, total_target=1000.0, name="demo")
report = aggregate_score(suite, profile)
print(f"\nAI score against the freshly calibrated profile: {report.total:.2f}")
