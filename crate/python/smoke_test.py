#!/usr/bin/env python3
"""Smoke test for the apmatch Python extension.

Builds the cdylib with cargo, loads it as a Python module and drives one
small end-to-end run. Exit code 0 means everything worked.

Usage: python3 python/smoke_test.py [--release]
"""
import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_extension(release: bool) -> Path:
    cmd = ["cargo", "build", "-p", "apmatch-py"]
    profile = "debug"
    if release:
        cmd.append("--release")
        profile = "release"
    subprocess.run(cmd, cwd=ROOT, check=True)
    lib = ROOT / "target" / profile / "libapmatch.so"
    if not lib.exists():  # macOS fallback
        lib = ROOT / "target" / profile / "libapmatch.dylib"
    if not lib.exists():
        sys.exit(f"built library not found under target/{profile}")
    stage = Path(tempfile.mkdtemp(prefix="apmatch_py_"))
    shutil.copy(lib, stage / "apmatch.so")
    return stage


def main() -> None:
    release = "--release" in sys.argv
    stage = build_extension(release)
    sys.path.insert(0, str(stage))
    import apmatch

    print(f"apmatch {apmatch.__version__} loaded from {stage}")

    # deterministic generation
    scen = apmatch.generate_scenario(users=12, aps=3, area=150.0, seed=7)
    again = apmatch.generate_scenario(users=12, aps=3, area=150.0, seed=7)
    assert scen == again, "same seed must generate identical scenarios"

    # full mechanism run, twice, byte-identical
    report_text = apmatch.run(scen)
    assert report_text == apmatch.run(scen), "reports must be deterministic"
    report = json.loads(report_text)
    matched = sum(len(c["users"]) for c in report["cells"])
    assert matched + len(report["unmatched"]) == 12
    assert 0.0 <= report["metrics"]["unemployment_rate"] <= 1.0
    print(
        f"run: {len(report['cells'])} cells, "
        f"{report['metrics']['unemployment_rate']:.0%} unmatched, "
        f"{report['metrics']['welfare_mac_bps'] / 1e6:.1f} Mbit/s at MAC level"
    )

    # trace is non-empty and JSON-parsable
    _, trace = apmatch.run_with_trace(scen)
    assert trace and all(json.loads(line)["event"] for line in trace)
    print(f"trace: {len(trace)} events")

    # mechanism beats or meets nothing in particular, but the optimum bounds it
    welfare_opt = apmatch.optimum_welfare(scen)
    assert report["metrics"]["welfare_modified_bps"] <= welfare_opt * (1 + 1e-9)
    print(f"optimum (modified): {welfare_opt / 1e6:.1f} Mbit/s")

    # baselines and stability on a small instance
    small = apmatch.generate_scenario(users=5, aps=2, area=100.0, seed=3)
    stability = json.loads(apmatch.check_stability(small))
    assert stability["is_pairwise_stable"]
    assert stability["core_member"] and stability["weak_core_member"]
    cmp_report = json.loads(apmatch.compare(small))
    assert cmp_report["optimum_modified"] is not None
    print("stability: pairwise + core certified on the small instance")

    # numeric helpers
    beta1 = apmatch.attempt_rate(1)
    assert abs(beta1 - 1.0 / 16.0) < 1e-12
    shares = apmatch.nash_shares(12.0, [1.0, 2.0])
    assert abs(shares[0] - 4.0) < 1e-9 and abs(shares[1] - 8.0) < 1e-9
    print("numeric helpers: attempt rate and bargained shares check out")

    print("smoke test OK")


if __name__ == "__main__":
    main()
