"""Table representation, ingestion, serialization, and reduction accounting.

Cells are strings throughout; numeric interpretation happens only in the
answer normalizer of :mod:`atf.metrics`.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import random
import re
from dataclasses import dataclass, field
from typing import Callable, IO, Iterable

from .errors import (
    MismatchedProvenance,
    ParseError,
    RowOutOfRange,
    SchemaError,
    UnknownColumn,
    UnknownTokenizer,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CellAddress:
    row_index: int
    column_name: str


@dataclass(frozen=True)
class Table:
    """An immutable table: ordered headers plus a row-major grid of strings."""

    headers: tuple[str, ...]
    cells: tuple[tuple[str, ...], ...]
    source_id: str | None = None

    def __post_init__(self) -> None:
        if not self.headers:
            raise SchemaError("table must have at least one column")
        trimmed = [h.strip() for h in self.headers]
        if any(not h for h in trimmed):
            raise SchemaError("empty header name")
        if len(set(trimmed)) != len(trimmed):
            dupes = sorted({h for h in trimmed if trimmed.count(h) > 1})
            raise SchemaError(f"duplicate headers: {dupes}")
        object.__setattr__(self, "headers", tuple(trimmed))
        for i, row in enumerate(self.cells):
            if len(row) != len(self.headers):
                raise SchemaError(
                    f"row {i} has {len(row)} cells, expected {len(self.headers)}"
                )

    @property
    def n_rows(self) -> int:
        return len(self.cells)

    @property
    def n_cols(self) -> int:
        return len(self.headers)

    def column_index(self, name: str) -> int:
        try:
            return self.headers.index(name)
        except ValueError:
            raise UnknownColumn(name) from None

    def column_values(self, name: str) -> list[str]:
        j = self.column_index(name)
        return [row[j] for row in self.cells]

    def cell(self, addr: CellAddress) -> str:
        if not 0 <= addr.row_index < self.n_rows:
            raise RowOutOfRange(addr.row_index, self.n_rows)
        return self.cells[addr.row_index][self.column_index(addr.column_name)]

    def to_json_obj(self) -> dict:
        return {"headers": list(self.headers), "rows": [list(r) for r in self.cells]}


@dataclass(frozen=True)
class ReductionStats:
    """Counts and ratios describing how much of a table was removed."""

    raw_rows: int
    raw_cols: int
    kept_rows: int
    kept_cols: int
    raw_cells: int
    kept_cells: int
    cell_reduction_ratio: float
    raw_tokens: int
    kept_tokens: int
    token_reduction_ratio: float
    tokenizer: str = "whitespace"

    def as_dict(self) -> dict:
        return {
            "raw_rows": self.raw_rows,
            "raw_cols": self.raw_cols,
            "kept_rows": self.kept_rows,
            "kept_cols": self.kept_cols,
            "raw_cells": self.raw_cells,
            "kept_cells": self.kept_cells,
            "cell_reduction_ratio": self.cell_reduction_ratio,
            "raw_tokens": self.raw_tokens,
            "kept_tokens": self.kept_tokens,
            "token_reduction_ratio": self.token_reduction_ratio,
            "tokenizer": self.tokenizer,
        }


@dataclass(frozen=True)
class FilteredTable:
    """Result of filtering: kept columns, kept original row indices, sub-table."""

    selected_columns: tuple[str, ...]
    selected_row_indices: tuple[int, ...]
    table: Table
    stats: ReductionStats | None = None
    trace: dict = field(default_factory=dict)


def _decode(source: bytes | str | IO) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def load_table(source: bytes | str | IO, format: str = "csv",
               source_id: str | None = None) -> Table:
    """Parse a table from CSV or JSON bytes/text.

    CSV uses the first record as headers. Cell whitespace is trimmed at both
    ends; short rows are right-padded with empty strings (and logged) while
    rows longer than the header are rejected.
    """
    text = _decode(source)
    if format == "csv":
        try:
            records = list(csv.reader(io.StringIO(text)))
        except csv.Error as exc:
            raise ParseError(f"malformed CSV: {exc}") from exc
        records = [r for r in records if r]
        if not records:
            raise ParseError("empty CSV input")
        headers = [h.strip() for h in records[0]]
        width = len(headers)
        rows = []
        for i, rec in enumerate(records[1:]):
            if len(rec) > width:
                raise SchemaError(f"row {i} has {len(rec)} cells, header has {width}")
            if len(rec) < width:
                logger.warning("row %d padded from %d to %d cells", i, len(rec), width)
                rec = rec + [""] * (width - len(rec))
            rows.append(tuple(c.strip() for c in rec))
        return Table(headers=tuple(headers), cells=tuple(rows), source_id=source_id)
    if format == "json":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON: {exc}") from exc
        if not isinstance(obj, dict) or "headers" not in obj or "rows" not in obj:
            raise ParseError("JSON table must be an object with 'headers' and 'rows'")
        headers = [str(h).strip() for h in obj["headers"]]
        width = len(headers)
        rows = []
        for i, rec in enumerate(obj["rows"]):
            rec = [str(c).strip() for c in rec]
            if len(rec) > width:
                raise SchemaError(f"row {i} has {len(rec)} cells, header has {width}")
            if len(rec) < width:
                logger.warning("row %d padded from %d to %d cells", i, len(rec), width)
                rec = rec + [""] * (width - len(rec))
            rows.append(tuple(rec))
        return Table(headers=tuple(headers), cells=tuple(rows), source_id=source_id)
    raise ParseError(f"unknown table format: {format!r}")


def dump_table_json(table: Table) -> str:
    return json.dumps(table.to_json_obj(), ensure_ascii=False)


def sample_cell_values(table: Table, column: str, k: int, seed: int) -> list[str]:
    """Pick up to ``k`` representative cell values from one column.

    Sampling is position-based without replacement, deterministic for a fixed
    seed, and keeps row order (all rows, in order, when the table has at most
    ``k`` rows).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    values = table.column_values(column)
    n = len(values)
    if n <= k:
        return list(values)
    positions = sorted(random.Random(seed).sample(range(n), k))
    return [values[p] for p in positions]


def flatten_row_text(table: Table, row_index: int, columns: Iterable[str]) -> str:
    """Concatenate one row's cells over the given columns, space-separated.

    Empty cells contribute nothing and never produce doubled separators.
    """
    if not 0 <= row_index < table.n_rows:
        raise RowOutOfRange(row_index, table.n_rows)
    idx = [table.column_index(c) for c in columns]
    row = table.cells[row_index]
    return " ".join(v for v in (row[j] for j in idx) if v)


# --- linearization & token budget models ------------------------------------

def _whitespace_tokens(text: str) -> list[str]:
    # '|' and ':' count as separate tokens in the budget model
    return re.findall(r"[^\s|:]+|[|:]", text)

_TOKENIZERS: dict[str, Callable[[str], list[str]]] = {"whitespace": _whitespace_tokens}


def register_tokenizer(name: str, fn: Callable[[str], list[str]]) -> None:
    _TOKENIZERS[name] = fn


def get_tokenizer(name: str) -> Callable[[str], list[str]]:
    try:
        return _TOKENIZERS[name]
    except KeyError:
        raise UnknownTokenizer(name) from None


def linearize_table(table: Table | FilteredTable,
                    tokenizer: str = "whitespace") -> tuple[str, int]:
    """Render a table as delimited text and count tokens under a budget model.

    Format: a ``col:`` line with pipe-separated headers, then one
    ``row <i>:`` line per row. Filtered tables keep their original row
    indices as labels.
    """
    tok = get_tokenizer(tokenizer)
    if isinstance(table, FilteredTable):
        labels = table.selected_row_indices
        inner = table.table
    else:
        labels = tuple(range(table.n_rows))
        inner = table
    lines = ["col: " + " | ".join(inner.headers)]
    for label, row in zip(labels, inner.cells):
        lines.append(f"row {label}: " + " | ".join(row))
    text = "\n".join(lines)
    return text, len(tok(text))


def compute_reduction_stats(raw: Table, filtered: FilteredTable,
                            tokenizer: str = "whitespace") -> ReductionStats:
    """Compute cell- and token-level reduction of ``filtered`` relative to ``raw``.

    Raises MismatchedProvenance when the filtered table's columns, indices,
    or cell contents do not trace back to ``raw``.
    """
    for name in filtered.selected_columns:
        if name not in raw.headers:
            raise MismatchedProvenance(f"column {name!r} not in raw table")
    for i in filtered.selected_row_indices:
        if not 0 <= i < raw.n_rows:
            raise MismatchedProvenance(f"row index {i} not in raw table")
    col_idx = [raw.column_index(c) for c in filtered.selected_columns]
    for out_r, src_r in enumerate(filtered.selected_row_indices):
        for out_c, src_c in enumerate(col_idx):
            if filtered.table.cells[out_r][out_c] != raw.cells[src_r][src_c]:
                raise MismatchedProvenance(
                    f"cell mismatch at filtered ({out_r},{out_c})"
                )
    raw_rows, raw_cols = raw.n_rows, raw.n_cols
    kept_rows, kept_cols = filtered.table.n_rows, filtered.table.n_cols
    raw_cells = raw_rows * raw_cols
    kept_cells = kept_rows * kept_cols
    _, raw_tokens = linearize_table(raw, tokenizer)
    _, kept_tokens = linearize_table(filtered, tokenizer)
    return ReductionStats(
        raw_rows=raw_rows,
        raw_cols=raw_cols,
        kept_rows=kept_rows,
        kept_cols=kept_cols,
        raw_cells=raw_cells,
        kept_cells=kept_cells,
        cell_reduction_ratio=1.0 - kept_cells / raw_cells,
        raw_tokens=raw_tokens,
        kept_tokens=kept_tokens,
        token_reduction_ratio=1.0 - (kept_tokens / raw_tokens if raw_tokens else 0.0),
        tokenizer=tokenizer,
    )
