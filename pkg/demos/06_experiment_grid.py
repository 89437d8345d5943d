"""A small experiment grid, written as JSON lines and summarized to CSV tables.

The same grid is what ``emaclust experiment`` runs from an INI file; see
the README for the command-line version.
"""

import csv
import tempfile
from pathlib import Path

from emaclust import Hyperparameters, SyntheticSpec, generate_synthetic
from emaclust.experiments import ExperimentConfig, run_grid, write_report

spec = SyntheticSpec(n_groups=2, individuals_per_group=6, n_vars=3, missing_rate=0.05)
ds, _ = generate_synthetic(spec, seed=5)
cfg = ExperimentConfig(
    approaches=("pdc", "poc", "random", "one", "n"),
    kinds=("var", "ebm"),
    k_values=(2, 3),
    n_iterations=3,
    seed=0,
    hyper=Hyperparameters(n_cycles=30),
)

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "results.jsonl"
    results = run_grid(cfg, ds, out, progress=lambda r: print(".", end="", flush=True))
    print(f"\n{len(results)} cells")

    # a second call finds every cell on disk and recomputes nothing
    again = run_grid(cfg, ds, out)
    assert [r.deterministic_dict() for r in again] == [r.deterministic_dict() for r in results]

    for path in write_report(results, Path(tmp) / "report"):
        if path.stem in ("table1", "table2"):
            print(f"\n{path.name}")
            with path.open() as fh:
                for row in csv.DictReader(fh):
                    loss = row.get("mean_total_loss") or row.get("mean_k_effective")
                    print(f"  {row['approach']:>6} {row['kind']} k={row['k_given']}: {float(loss):.3f}")
