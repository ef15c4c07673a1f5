"""Parameter metadata for the distorted-image stimulus set.

The 100 stimuli form a full grid over reach and grain in {5, 12, 26, 61,
128} crossed with coherence in {0.0, 0.33, 0.67, 1.0}.  Only the parameter
values live here; the image files themselves are external assets referenced
by stable item labels.
"""

from __future__ import annotations

from pathlib import Path

from ..core import ItemSet

REACH_VALUES = (5, 12, 26, 61, 128)
GRAIN_VALUES = (5, 12, 26, 61, 128)
COHERENCE_VALUES = (0.0, 0.33, 0.67, 1.0)

_HEADER = ("item_id", "reach", "grain", "coherence")


def parameter_grid() -> list[tuple[int, int, float]]:
    """(reach, grain, coherence) per item id, in fixed enumeration order."""
    grid = []
    for reach in REACH_VALUES:
        for grain in GRAIN_VALUES:
            for coherence in COHERENCE_VALUES:
                grid.append((reach, grain, coherence))
    return grid


def stimulus_items() -> ItemSet:
    grid = parameter_grid()
    labels = tuple(
        f"reach{reach}_grain{grain}_coh{coherence:g}" for reach, grain, coherence in grid
    )
    metadata = tuple(
        {"reach": reach, "grain": grain, "coherence": coherence}
        for reach, grain, coherence in grid
    )
    return ItemSet(len(grid), labels=labels, metadata=metadata)


def write_parameter_table(path: str | Path) -> None:
    grid = parameter_grid()
    with Path(path).open("w") as fh:
        fh.write(",".join(_HEADER) + "\n")
        for item_id, (reach, grain, coherence) in enumerate(grid):
            fh.write(f"{item_id},{reach},{grain},{coherence!r}\n")


def read_parameter_table(path: str | Path) -> list[tuple[int, int, float]]:
    grid = []
    with Path(path).open() as fh:
        header = next(fh).strip().split(",")
        if tuple(header) != _HEADER:
            raise ValueError(f"unexpected stimulus table header: {header}")
        for line in fh:
            _, reach, grain, coherence = line.strip().split(",")
            grid.append((int(reach), int(grain), float(coherence)))
    return grid
