import json
from collections import defaultdict
from pathlib import Path

import pytest

from hullspec.dynamics import Configuration, fibonacci_hull, full_pm1_hull
from hullspec.groups import EscapeSequence, lattice


@pytest.fixture(scope="session")
def fib_hull():
    return fibonacci_hull()


@pytest.fixture(scope="session")
def fib_fixed_point(fib_hull):
    return fib_hull.fixed_point("a")


@pytest.fixture(scope="session")
def pm1_hull():
    return full_pm1_hull()


@pytest.fixture(scope="session")
def tolerances():
    path = Path(__file__).resolve().parents[1] / "src/hullspec/data/tolerances.json"
    with open(path, "r", encoding="ascii") as fh:
        payload = json.load(fh)
    if not payload.get("entries"):
        pytest.fail("tolerances.json is uncalibrated; run `hullspec calibrate` first")
    return payload["entries"]


def recurrence_sequences(
    config: Configuration,
    pattern_radius: int,
    count: int,
    span: int = 3000,
    min_terms: int = 3,
) -> list[EscapeSequence]:
    """Escape sequences along positions where the same local pattern recurs.

    Probes along such positions stabilize by construction, which makes them
    the cheap way to manufacture limit operators of seeded configurations.
    """
    z = lattice(1)
    cells = range(-pattern_radius, pattern_radius + 1)
    buckets: dict[tuple, list[int]] = defaultdict(list)
    letters = {
        p: config.letter_index(z.element((p,)))
        for p in range(-span - pattern_radius, span + pattern_radius + 1)
    }
    for p in range(-span, span + 1):
        buckets[tuple(letters[p + c] for c in cells)].append(p)
    sequences = []
    for _, positions in sorted(buckets.items()):
        chosen: list[int] = []
        for p in sorted(positions, key=lambda q: (abs(q), q)):
            if not chosen or abs(p) > abs(chosen[-1]):
                chosen.append(p)
        if len(chosen) >= min_terms:
            sequences.append(
                EscapeSequence(z, tuple(z.element((p,)) for p in chosen))
            )
        if len(sequences) == count:
            break
    return sequences
