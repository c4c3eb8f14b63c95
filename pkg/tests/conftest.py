"""Collects acceptance outcomes and prints one line per criterion."""
import pytest

_RESULTS: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    number, title = mark.args[0], mark.args[1]
    entry = _RESULTS.setdefault(number, {"title": title, "ok": True, "seconds": 0.0, "detail": []})
    if rep.when == "call":
        entry["seconds"] += rep.duration
    if rep.failed:
        entry["ok"] = False
        msg = str(rep.longrepr).strip().splitlines()
        entry["detail"].append(msg[-1] if msg else "")
    for key, value in item.user_properties:
        if key == "measured":
            entry["detail"].append(value)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        e = _RESULTS[n]
        status = "PASS" if e["ok"] else "FAIL"
        detail = "; ".join(d for d in e["detail"] if d)
        terminalreporter.write_line(f"criterion {n:2d} {status}  {e['title']} ({e['seconds']:.1f} s)"
                                    + (f"  [{detail}]" if detail else ""))
