"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

LINES = []


def report(name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    LINES.append(line)
    print(line)
    return ok
