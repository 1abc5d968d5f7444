from __future__ import annotations

from pathlib import Path

import pytest

from slvideo.annotations import TierRoleConfig

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def tier_config() -> TierRoleConfig:
    return TierRoleConfig.from_file(DATA_DIR / "tier_config.json")


def read_eaf(name: str) -> bytes:
    return (DATA_DIR / "eaf" / name).read_bytes()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One [PASS]/[FAIL] line per acceptance criterion after the run."""
    outcomes: dict[str, str] = {}
    for status, label in [("passed", "PASS"), ("skipped", "SKIP"),
                          ("failed", "FAIL"), ("error", "FAIL")]:
        for report in terminalreporter.stats.get(status, []):
            if "test_acceptance.py::" not in report.nodeid:
                continue
            name = report.nodeid.split("::")[-1]
            if outcomes.get(name) != "FAIL":
                outcomes[name] = label
    if not outcomes:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for name, label in CRITERIA.items():
        if name in outcomes:
            terminalreporter.write_line(f"[{outcomes[name]}] {label}")
