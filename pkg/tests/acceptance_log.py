import contextlib

LINES: list[str] = []


@contextlib.contextmanager
def criterion(label: str):
    """Record one PASS/FAIL line for ``label``; the block may append detail."""
    detail: list[str] = []
    try:
        yield detail
    except BaseException as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        line = f"FAIL  {label}: {msg}" + (f" ({'; '.join(detail)})" if detail else "")
        LINES.append(line)
        print(line)
        raise
    line = f"PASS  {label}" + (f" ({'; '.join(detail)})" if detail else "")
    LINES.append(line)
    print(line)
