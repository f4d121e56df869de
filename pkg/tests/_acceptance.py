"""Shared record of acceptance-criterion outcomes, printed by conftest."""

import time
from contextlib import contextmanager

RESULTS: dict[int, str] = {}


@contextmanager
def criterion(number, title, bound_s=None):
    """Time a criterion and record one PASS/FAIL line for it.

    The body may append notes to the yielded list; an exception marks the
    criterion failed and is re-raised.
    """
    notes: list[str] = []
    start = time.perf_counter()
    status = "FAIL"
    try:
        yield notes
        status = "PASS"
    except BaseException as exc:
        notes.append(f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        raise
    finally:
        elapsed = time.perf_counter() - start
        timing = f"{elapsed:.1f} s"
        if bound_s is not None:
            timing += f" (bound {bound_s:g} s{'' if elapsed < bound_s else ', EXCEEDED'})"
        RESULTS[number] = f"criterion {number:2d} {status}  {title}  [{timing}]" + (
            "  " + "; ".join(notes) if notes else "")
