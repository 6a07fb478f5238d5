"""CSV and manifest serialization for the batch CLI.

All tables are CSV with ``#``-prefixed metadata header lines followed by
one column-name row.  Floats are written with 17 significant digits so
values round-trip losslessly.  Every run additionally writes one JSON
manifest sidecar echoing the configuration, the emitted files with
their row counts, wall time, and accumulated warnings.
"""

import json
import time

__all__ = ["format_float", "write_table", "RunRecorder"]

TOOL_VERSION = "lmglab 0.1.0"


def format_float(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_table(path, columns, rows, meta=None):
    """Write a CSV table; returns the number of data rows written."""
    count = 0
    with open(path, "w") as fh:
        for key, val in (meta or {}).items():
            fh.write(f"# {key} = {format_float(val)}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if isinstance(row, dict):
                row = [row[c] for c in columns]
            fh.write(",".join(format_float(v) for v in row) + "\n")
            count += 1
    return count


class RunRecorder:
    """Collects outputs and warnings of one CLI run and writes the manifest."""

    def __init__(self, manifest_path, config):
        self.manifest_path = manifest_path
        self.config = config
        self.outputs = []
        self.warnings = []
        self._t0 = time.monotonic()

    def table(self, path, columns, rows, meta=None):
        n = write_table(path, columns, rows, meta)
        self.outputs.append({"path": str(path), "rows": n})
        return n

    def json_file(self, path, payload):
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.outputs.append({"path": str(path), "rows": None})

    def warn(self, message):
        self.warnings.append(str(message))

    def finalize(self, status="ok", failing_stage=None):
        manifest = {
            "tool_version": TOOL_VERSION,
            "config": self.config,
            "outputs": self.outputs,
            "warnings": self.warnings,
            "wall_time_s": time.monotonic() - self._t0,
            "status": status,
        }
        if failing_stage:
            manifest["failing_stage"] = failing_stage
        with open(self.manifest_path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest
