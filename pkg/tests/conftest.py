from collections import defaultdict

import pytest

_outcomes: dict[int, list[str]] = defaultdict(list)
_titles: dict[int, str] = {}
_definitions: dict[int, set] = defaultdict(set)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")
    config.addinivalue_line("markers", "L_definition(name): isotropic-constant definition used (density or volumetric)")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    _titles[number] = title
    for m in item.iter_markers("L_definition"):
        _definitions[number].add(m.args[0])
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if hasattr(report, "wasxfail"):
            _outcomes[number].append("xfail" if report.skipped else "xpass")
        else:
            _outcomes[number].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        results = _outcomes[number]
        if all(r == "passed" for r in results):
            status = "PASS"
        elif "xfail" in results and all(r in ("passed", "xfail") for r in results):
            status = "FAIL (known, documented)"
        elif all(r == "skipped" for r in results):
            status = "SKIPPED"
        else:
            status = "FAIL"
        tag = f" L:{'+'.join(sorted(_definitions[number]))}" if _definitions[number] else ""
        terminalreporter.write_line(f"criterion {number:2d} {status:<25s} {_titles[number]}  [{len(results)} tests{tag}]")
