import csv
import io
import json
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence
import click
import numpy as np
from pydantic import BaseModel
from app.models.schemas import RunManifest


def format_value(value: Any) -> str:
    """Shortest round-trip text for floats; plain str otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return to_jsonable(obj.model_dump(by_alias=True))
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if hasattr(obj, "isoformat"):
        return obj.isoformat()
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False)


class OutputWriter:
    """Writes CSV or JSON payloads with their run manifest."""

    @staticmethod
    def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
        return buffer.getvalue()

    @staticmethod
    def manifest_path(out: Path) -> Path:
        return out.with_name(out.name + ".manifest.json")

    def write_csv(
        self,
        header: Sequence[str],
        rows: List[Sequence[Any]],
        manifest: RunManifest,
        out: Optional[Path] = None,
    ) -> None:
        text = self.csv_text(header, rows)
        if out is None:
            click.echo(text, nl=False)
            click.echo(dumps(manifest), err=True)
            return
        out = Path(out)
        out.write_text(text, encoding="utf-8")
        self.manifest_path(out).write_text(dumps(manifest) + "\n", encoding="utf-8")

    def write_json(self, data: Any, manifest: RunManifest, out: Optional[Path] = None) -> None:
        text = dumps({"manifest": manifest, "data": data})
        if out is None:
            click.echo(text)
            return
        Path(out).write_text(text + "\n", encoding="utf-8")


output_writer = OutputWriter()
