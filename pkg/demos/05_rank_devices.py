"""Aggregating result files from several devices into a ranking.

Run: python3 demos/05_rank_devices.py
"""

from inferbench.aggregate import DeviceRecord, export, rank, remove_outliers
from inferbench.runner import Measurement, MemoryProbeResult, SuiteResult
from inferbench.scoring import ReferenceProfile


def fake_suite(device, soc, avg_ms, units):
    s = SuiteResult(metadata={"device_name": device, "soc_name": soc})
    for t in range(1, 9):
        s.measurements.append(
            Measurement(t, "optimized", 5, [avg_ms] * 5, avg_ms, True, 10.0)
        )
    s.memory_probe = MemoryProbeResult(units, "configured_cap", 0)
    return DeviceRecord(device, soc, 4.0, {}, s)


# A slow repeat run produces an outlier; the modified z-score filter
# removes it before averaging.
samples = [100, 102, 98, 1000]
print(f"runtimes {samples} -> kept {remove_outliers(samples)}")

profile = ReferenceProfile("demo", [100.0] * 8, 5.0, [10.0] * 9)
records = [
    fake_suite("phone-a", "soc-x", 100.0, 5),
    fake_suite("phone-a", "soc-x", 100.0, 5),
    fake_suite("phone-b", "soc-x", 50.0, 10),
    fake_suite("phone-c", "soc-y", 200.0, 4),
]

print("\nper-device ranking:")
print(export(rank(records, "device", profile), "markdown"))
print("per-SoC ranking (records pooled across devices):")
print(export(rank(records, "soc", profile), "markdown"))
