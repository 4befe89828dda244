"""Shared pytest plumbing: collects acceptance-checklist result lines."""

_CRITERIA = {}


def record_criterion(num: int, desc: str, ok: bool) -> None:
    _CRITERIA[num] = (desc, ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance checklist")
    for num in sorted(_CRITERIA):
        desc, ok = _CRITERIA[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {num:2d}. {desc}")
