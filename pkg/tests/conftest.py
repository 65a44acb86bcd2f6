import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import support  # noqa: E402

_START = time.perf_counter()
SUITE_LIMIT = 60.0


def pytest_terminal_summary(terminalreporter):
    if not support.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(support.ACCEPTANCE):
        passed, detail = support.ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")
    elapsed = time.perf_counter() - _START
    verdict = "within" if elapsed < SUITE_LIMIT else "OVER"
    terminalreporter.write_line(f"suite runtime: {elapsed:.1f}s ({verdict} the {SUITE_LIMIT:.0f}s limit)")
