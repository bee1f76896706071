"""Plain-text loss fixtures.

Layout (blank lines and ``#`` comments ignored)::

    N E
    <E numbers>        one line per embedding row, N lines
    <N integers>       labels
    <tau> <base_temperature>
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .supcon import LossParams

BUNDLED = ("worked_example", "all_distinct")


@dataclass
class LossFixture:
    embeddings: np.ndarray
    labels: np.ndarray
    params: LossParams


def parse_fixture(text: str) -> LossFixture:
    lines = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    try:
        n, width = (int(x) for x in lines[0])
        if len(lines) != n + 3:
            raise ValueError(f"expected {n + 3} data lines, found {len(lines)}")
        rows = [[float(x) for x in ln] for ln in lines[1 : 1 + n]]
        if any(len(r) != width for r in rows):
            raise ValueError(f"every embedding row needs {width} values")
        labels = [int(x) for x in lines[1 + n]]
        if len(labels) != n:
            raise ValueError(f"labels line has {len(labels)} entries, expected {n}")
        tau, base = (float(x) for x in lines[2 + n])
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed loss fixture: {exc}") from exc
    return LossFixture(np.array(rows, dtype=np.float64).reshape(n, width), np.array(labels), LossParams(tau, base))


def format_fixture(fx: LossFixture) -> str:
    n, width = fx.embeddings.shape
    out = [f"{n} {width}"]
    out += [" ".join(repr(float(x)) for x in row) for row in fx.embeddings]
    out.append(" ".join(str(int(x)) for x in fx.labels))
    out.append(f"{fx.params.temperature!r} {fx.params.base_temperature!r}")
    return "\n".join(out) + "\n"


def load_fixture(path_or_name: str) -> LossFixture:
    """Read a fixture file; bare names in ``BUNDLED`` resolve to packaged copies."""
    path = Path(path_or_name)
    if not path.exists() and path_or_name in BUNDLED:
        text = (resources.files("scil") / "data" / f"{path_or_name}.txt").read_text()
    else:
        text = path.read_text()
    return parse_fixture(text)
