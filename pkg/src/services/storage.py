"""
Run directory persistence: manifest, learning curves, evaluations,
policy checkpoints, field snapshots and baseline tables.
"""

import csv
import json
import logging
from contextlib import contextmanager
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Iterator, Sequence, TextIO

import numpy as np

from src.core.episode import CURVE_COLUMNS, EpisodeLog, StepRecord
from src.core.grid import Field
from src.services.ddpg import PolicyCheckpoint

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
CURVE_NAME = "learning_curve.csv"
EVAL_NAME = "eval.csv"
BASELINE_NAME = "baseline.csv"
EVAL_COLUMNS = ("episode", "mean_return", "final_mse")
VERSIONED_PACKAGES = ("conv-rl-pde-control", "numpy", "scipy", "pydantic", "pydantic-settings")


def library_versions() -> dict[str, str]:
    versions = {}
    for package in VERSIONED_PACKAGES:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = "unknown"
    return versions


class RunStore:
    """Owns one run directory; every file is written by this single writer."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @property
    def curve_path(self) -> Path:
        return self.root / CURVE_NAME

    @property
    def eval_path(self) -> Path:
        return self.root / EVAL_NAME

    def policy_path(self, name: str) -> Path:
        return self.root / f"{name}.policy"

    def reset(self) -> None:
        """Removes the append-only outputs of an earlier run in the same directory."""
        for name in (CURVE_NAME, EVAL_NAME, BASELINE_NAME):
            (self.root / name).unlink(missing_ok=True)
        snapshots = self.root / "snapshots"
        if snapshots.is_dir():
            for path in snapshots.glob("*.txt"):
                path.unlink()

    @contextmanager
    def _append(self, path: Path, header: Sequence[str]) -> Iterator[TextIO]:
        new = not path.exists()
        with path.open("a", encoding="utf-8", newline="") as handle:
            if new:
                csv.writer(handle).writerow(header)
            yield handle
            handle.flush()

    def write_manifest(self, command: str, seed: int, config: dict[str, Any]) -> Path:
        """
        Writes manifest.json before any computation.
        The content is deterministic so identical runs give identical files.
        """
        manifest = {
            "command": command,
            "seed": seed,
            "config": config,
            "versions": library_versions(),
        }
        path = self.root / MANIFEST_NAME
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info("Run manifest written to %s", path)
        return path

    def read_manifest(self) -> dict[str, Any]:
        data: dict[str, Any] = json.loads((self.root / MANIFEST_NAME).read_text(encoding="utf-8"))
        return data

    @contextmanager
    def curve_writer(self) -> Iterator[Callable[[StepRecord], None]]:
        """Yields a callback appending and flushing one learning-curve row per control step."""
        with self._append(self.curve_path, CURVE_COLUMNS) as handle:
            writer = csv.writer(handle)

            def write(record: StepRecord) -> None:
                writer.writerow(_format_row(record.as_row()))
                handle.flush()

            yield write

    def append_eval(self, episode: int, mean_return: float, final_mse: float) -> None:
        with self._append(self.eval_path, EVAL_COLUMNS) as handle:
            csv.writer(handle).writerow(_format_row((episode, mean_return, final_mse)))

    def save_policy(self, name: str, checkpoint: PolicyCheckpoint) -> Path:
        path = self.policy_path(name)
        path.write_text(checkpoint.model_dump_json(indent=1), encoding="utf-8")
        logger.info("Policy checkpoint written to %s", path)
        return path

    def save_snapshots(self, log: EpisodeLog, label: str) -> list[Path]:
        if not log.snapshots:
            return []
        folder = self.root / "snapshots"
        folder.mkdir(exist_ok=True)
        return [
            write_snapshot(folder / f"{label}_t{time}.txt", field) for time, field in log.snapshots.items()
        ]

    def write_table(
        self, name: str, columns: Sequence[str], rows: Sequence[Sequence[Any]], note: str
    ) -> Path:
        """CSV with a leading `# note` line, used for baseline results."""
        path = self.root / name
        with path.open("w", encoding="utf-8", newline="") as handle:
            handle.write(f"# {note}\n")
            writer = csv.writer(handle)
            writer.writerow(columns)
            for row in rows:
                writer.writerow(_format_row(row))
        return path


def _format_row(row: Sequence[Any]) -> list[str]:
    return [repr(float(value)) if isinstance(value, float) else str(value) for value in row]


def write_snapshot(path: Path, field: Field) -> Path:
    """Plain-text field dump: one header line with grid metadata, then row-major values."""
    grid = field.grid
    header = (
        f"ndim={grid.ndim} length={grid.length!r} n_points={grid.n_points} "
        f"periodic={grid.periodic} components={field.n_components}"
    )
    values = field.values.reshape(-1, grid.shape[-1])
    np.savetxt(path, values, header=header, fmt="%.17g")
    return path


def read_snapshot(path: Path) -> np.ndarray:
    return np.loadtxt(path, ndmin=2)
