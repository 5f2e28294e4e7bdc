VERDICTS: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> bool:
    VERDICTS[n] = (ok, detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        ok, detail = VERDICTS[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")
    passed = sum(ok for ok, _ in VERDICTS.values())
    terminalreporter.write_line(f"{passed}/{len(VERDICTS)} criteria passed")
