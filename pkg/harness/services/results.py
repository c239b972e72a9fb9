# harness/services/results.py
"""
Result tables as CSV or JSON. Column names and order come from
``ResultRowSerializer``; JSON objects carry the same names as the CSV header.
"""
import csv
import io
from pathlib import Path
from typing import Iterable, List, Union

from django.core.exceptions import ValidationError
from rest_framework.renderers import JSONRenderer

from harness.models import ResultRecord
from harness.serializers import ResultRowSerializer

FORMATS = ("csv", "json")


def _rows_data(rows: List[ResultRecord], verbose: bool) -> List[dict]:
    return ResultRowSerializer(rows, many=True, context={"verbose": verbose}).data


def render_results(rows: Iterable[ResultRecord], fmt: str = "csv", verbose: bool = False) -> str:
    rows = list(rows)
    if not rows:
        raise ValidationError("no result rows to emit", code="empty_rows")
    if fmt not in FORMATS:
        raise ValidationError(f"format must be one of {FORMATS}, got {fmt!r}", code="format")
    data = _rows_data(rows, verbose)

    if fmt == "json":
        body = JSONRenderer().render(data, renderer_context={"indent": 2}).decode("utf-8")
        return body + "\n"

    buffer = io.StringIO()
    columns = list(ResultRowSerializer(context={"verbose": verbose}).fields)
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for item in data:
        writer.writerow([item[c] for c in columns])
    return buffer.getvalue()


def emit_results(rows: Iterable[ResultRecord], fmt: str, path: Union[str, Path], verbose: bool = False) -> Path:
    """Write the table to ``path``; same rows always give the same bytes."""
    text = render_results(rows, fmt, verbose)
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot write results to {target}: {exc}", code="io")
    return target
