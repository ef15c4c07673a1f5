"""Plot-ready tables from a result document.

One delimited table per panel: an x column followed by `{series}_mean` and
`{series}_sd` column pairs.  Floats are written with repr() so re-emission
from the same document is byte-identical.
"""

from __future__ import annotations

from pathlib import Path


def panel_table(panel: dict, require: tuple[str, ...] = ()) -> str:
    """Render one panel as CSV text."""
    series = panel["series"]
    missing = [name for name in require if name not in series]
    if missing:
        raise ValueError(f"panel is missing series: {', '.join(missing)}")
    names = list(series)
    header = [panel["x_label"]]
    for name in names:
        header += [f"{name}_mean", f"{name}_sd"]
    lines = [",".join(header)]
    for i, x in enumerate(panel["x"]):
        cells = [_fmt(x)]
        for name in names:
            cells.append(_fmt(series[name]["mean"][i]))
            cells.append(_fmt(series[name]["sd"][i]))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_tables(
    document: dict,
    out_dir: str | Path,
    require: dict[str, tuple[str, ...]] | None = None,
) -> list[Path]:
    """Write `<panel>.csv` per panel; `require` maps panel name -> series
    names that must be present (a missing one raises, naming it)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    require = require or {}
    for name in require:
        if name not in document["panels"]:
            raise ValueError(f"result document has no panel named {name}")
    for name, panel in document["panels"].items():
        path = out_dir / f"{name}.csv"
        path.write_text(panel_table(panel, require.get(name, ())))
        written.append(path)
    return written
