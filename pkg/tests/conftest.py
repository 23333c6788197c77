"""Prints one line per acceptance criterion at the end of a pytest run."""

ACCEPTANCE_RESULTS = []


def record_acceptance(label, ok, detail=""):
    ACCEPTANCE_RESULTS.append((label, bool(ok), detail))
    assert ok, f"{label}: {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        terminalreporter.write_line(f"[{status}] {label}{suffix}")
