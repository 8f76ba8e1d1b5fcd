"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def report(name: str, checks: list[tuple[str, bool]]) -> bool:
    ok = all(passed for _, passed in checks)
    detail = "; ".join(f"{text} [{'ok' if passed else 'FAIL'}]" for text, passed in checks)
    line = f"{name}: {'PASS' if ok else 'FAIL'} - {detail}"
    LINES.append(line)
    print(line)
    return ok
