"""Output directories for benchmark, attack and scenario runs.

Every run gets ``<base_dir>/<timestamp>_<description>/`` with a
``metadata.json`` next to its CSV tables, traces and charts.
"""

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from .netsim import Trace

logger = logging.getLogger(__name__)

BENCH_SCHEMA = "spx-bench/1"


def schema_line(kind: str) -> str:
    return f"# schema: {BENCH_SCHEMA} kind={kind}\n"


class ExperimentTracker:
    """Writes run outputs into one timestamped directory at a time."""

    def __init__(self, base_dir: str = "./experiments"):
        self.base_dir = Path(base_dir)
        self.base_dir.mkdir(parents=True, exist_ok=True)
        self.current_experiment_dir: Optional[Path] = None

    def start_experiment(self, description: str = "", metadata: Optional[Dict[str, Any]] = None) -> Path:
        """
        Open a fresh run directory and write its ``metadata.json``.

        Two runs started within the same second get ``_2``, ``_3``, ...
        suffixes instead of sharing a directory.

        Args:
            description: Run label, e.g. ``handshake_tlx_sim``
            metadata: Extra fields for metadata.json (seed, config, ...)

        Returns:
            The new run directory
        """
        timestamp = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
        label = "".join(c if c.isalnum() or c in ("-", "_") else "_" for c in description)[:50]
        dir_name = f"{timestamp}_{label}" if label else timestamp

        path = self.base_dir / dir_name
        suffix = 1
        while path.exists():
            suffix += 1
            path = self.base_dir / f"{dir_name}_{suffix}"
        path.mkdir(parents=True)
        self.current_experiment_dir = path

        record = {
            "schema": BENCH_SCHEMA,
            "timestamp": timestamp,
            "description": description,
            "start_time": datetime.now().isoformat(),
            **(metadata or {}),
        }
        (path / "metadata.json").write_text(json.dumps(record, indent=2, default=str))

        logger.info(f"Recording run in {path}")
        return path

    def _path(self, filename: str) -> Optional[Path]:
        if self.current_experiment_dir is None:
            return None
        return self.current_experiment_dir / filename

    def save_output(self, output: str, filename: str = "output.txt") -> Optional[Path]:
        """Write text into the open run; ``None`` when no run is open."""
        path = self._path(filename)
        if path is not None:
            path.write_text(output, encoding="utf-8")
        return path

    def save_table(self, table: pd.DataFrame, kind: str, filename: Optional[str] = None) -> Optional[Path]:
        """
        Save a benchmark table as CSV behind a schema header line.

        Args:
            table: Benchmark rows
            kind: Benchmark name written into the header
            filename: Defaults to ``<kind>.csv``
        """
        return self.save_output(schema_line(kind) + table.to_csv(index=False), filename or f"{kind}.csv")

    def save_trace(self, trace: Trace, filename: str = "trace.jsonl") -> Optional[Path]:
        return self.save_output(trace.to_jsonl(), filename)

    def save_plot(self, png: bytes, filename: Optional[str] = None) -> Optional[Path]:
        """Save a PNG chart; unnamed charts become ``plot_01.png``, ``plot_02.png``, ..."""
        if self.current_experiment_dir is None:
            return None
        if filename is None:
            count = len(list(self.current_experiment_dir.glob("plot_*.png")))
            filename = f"plot_{count + 1:02d}.png"
        path = self.current_experiment_dir / filename
        path.write_bytes(png)
        return path

    def save_metadata(self, key: str, value: Any) -> None:
        path = self._path("metadata.json")
        if path is None:
            return
        record = json.loads(path.read_text()) if path.exists() else {}
        record[key] = value
        path.write_text(json.dumps(record, indent=2, default=str))

    def finish_experiment(self) -> None:
        """Stamp ``end_time`` and close the run."""
        if self.current_experiment_dir is None:
            return
        self.save_metadata("end_time", datetime.now().isoformat())
        self.current_experiment_dir = None

    def get_experiment_path(self) -> Optional[Path]:
        return self.current_experiment_dir

    def list_experiments(self) -> List[str]:
        """Run directory names, most recent first."""
        if not self.base_dir.exists():
            return []
        return sorted((d.name for d in self.base_dir.iterdir() if d.is_dir()), reverse=True)
