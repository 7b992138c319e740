"""Smoke test of the typicell extension module.

Build the module first, e.g. `maturin develop -m crates/python/Cargo.toml`,
or copy the cargo-built shared library next to this script as typicell.so.
"""

import json
import math
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import typicell  # noqa: E402


def main() -> None:
    assert typicell.SCHEMA == "typicell-v1"

    ps = typicell.PointSet.sample(3, 3.0, seed=7, stream=2)
    assert ps.d == 3 and len(ps) == len(ps.points)
    again = typicell.PointSet.from_json(ps.to_json())
    assert again.points == ps.points

    cell = typicell.TypicalCell.replication(3, rep=0)
    assert cell.certified
    f = cell.measure(1024)
    assert f["inr"] <= f["outr"] <= f["diam"]
    assert f["width_lower"] <= f["width_upper"] <= f["diam"]
    u = [1.0, 0.0, 0.0]
    assert math.isclose(cell.support(u), max(v[0] for v in cell.vertices))

    census = cell.census(2)
    assert [row["k"] for row in census] == [1, 2]

    center, radius = typicell.circumball([[2.0, 0.0], [0.0, 2.0]])
    assert math.isclose(radius, math.sqrt(2.0)) and math.isclose(center[0], 1.0)

    cfg = typicell.ExperimentConfig(d="2-3", reps=4, dirs=256, kmax=2)
    result = typicell.sweep(cfg)
    assert result.all_passed()
    rows = typicell.read_table(result.table_csv())
    assert rows == json.loads(result.table_json())["rows"]
    with tempfile.TemporaryDirectory() as tmp:
        written = result.write(tmp, "csv")
        assert any(Path(p).name == "results.csv" for p in written)

    report = typicell.run_replication(2, 1)
    assert report["ok"] and not report["invariant_failures"]

    print(f"smoke test passed: {cell!r}, {len(rows)} table rows")


if __name__ == "__main__":
    main()
