import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(results):
        checks = results[crit]
        ok = all(c[1] for c in checks)
        failed = [c[0] for c in checks if not c[1]]
        suffix = "" if ok else f"  (failing: {'; '.join(failed)})"
        tr.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'}  "
                      f"[{sum(c[1] for c in checks)}/{len(checks)} checks]{suffix}")
    tr.section("acceptance details")
    for crit in sorted(results):
        for name, ok, detail in results[crit]:
            tr.write_line(f"  {crit:2d} {'ok  ' if ok else 'FAIL'} {name}: {detail}")
