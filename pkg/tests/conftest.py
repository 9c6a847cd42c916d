import os
import sys


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")
    config.addinivalue_line("markers", "slow: Monte Carlo tests taking more than a few seconds")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(verdicts):
        terminalreporter.write_line(verdicts[n])
    passed = sum(v.startswith("PASS") for v in verdicts.values())
    terminalreporter.write_line(f"{passed}/{len(verdicts)} criteria passed")


os.environ.setdefault("NNGF_WORKERS", "1")
