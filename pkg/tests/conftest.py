import pytest

VERDICT = "acceptance_verdict"


@pytest.fixture
def verdict(request):
    """Record the one-line outcome of an acceptance criterion."""

    def record(number: int, passed: bool, detail: str, seconds: float, limit: float) -> bool:
        ok = bool(passed) and seconds < limit
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({seconds:.1f} s of {limit:.0f} s) {detail}"
        request.node.user_properties.append((VERDICT, line))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call" and key != "error":
                continue
            found = [v for k, v in getattr(rep, "user_properties", []) if k == VERDICT]
            if found:
                lines.extend(found)
            elif "test_acceptance" in rep.nodeid:
                lines.append(f"{rep.nodeid.split('::')[-1]}: FAIL (raised before a verdict)")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(lines)):
            terminalreporter.write_line(line)
