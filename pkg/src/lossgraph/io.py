"""Dataset ingestion and result serialisation."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyAfterFiltering, ParseError
from .fincs import FincsResult
from .graphs import Graph, to_dot
from .likelihood import DataMatrix

SCHEMA_VERSION = 1
MISSING = {"", "na", "nan", "null", "none", "?", "."}


def fmt(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    return format(float(x), ".17g")


@dataclass
class Dataset:
    data: DataMatrix
    columns: list[str]
    dropped_rows: int


def ingest_csv(path, has_header: bool = True, delimiter: str = ",") -> Dataset:
    """Read a numeric CSV, drop rows with missing cells and centre the columns."""
    path = Path(path)
    rows = []
    dropped = 0
    width = None
    columns: list[str] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, raw in enumerate(reader, start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            if has_header and not columns and width is None:
                columns = [c.strip() for c in raw]
                width = len(columns)
                continue
            if width is None:
                width = len(raw)
            if len(raw) != width:
                raise ParseError(f"{path}: expected {width} fields, found {len(raw)}", row=lineno)
            vals = []
            missing = False
            for col, cell in enumerate(raw, start=1):
                cell = cell.strip()
                if cell.lower() in MISSING:
                    missing = True
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"{path}: non-numeric value {cell!r}", row=lineno, column=col) from None
                if not math.isfinite(v):
                    missing = True
                vals.append(v)
            if missing:
                dropped += 1
            else:
                rows.append(vals)
    if width is None:
        raise EmptyAfterFiltering(f"{path}: no data")
    if len(rows) < 2:
        raise EmptyAfterFiltering(f"{path}: {len(rows)} complete rows remain after dropping {dropped}")
    if not columns:
        columns = [f"V{i + 1}" for i in range(width)]
    return Dataset(DataMatrix.from_array(np.array(rows), center=True), columns, dropped)


def write_csv_matrix(path, x, header=None):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in np.atleast_2d(x):
            w.writerow([fmt(v) for v in row])


def edges_to_string(g: Graph) -> str:
    return ";".join(f"{i + 1}-{j + 1}" for i, j in g.edges)


def edges_from_string(s: str, p: int) -> Graph:
    edges = []
    for tok in filter(None, s.split(";")):
        a, b = tok.split("-")
        edges.append((int(a) - 1, int(b) - 1))
    return Graph(p, edges)


def read_top_graphs(path, p: int) -> list[tuple[int, Graph, float]]:
    out = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append((int(rec["rank"]), edges_from_string(rec["edges"], p), float(rec["log_score"])))
    return out


@dataclass
class ResultBundle:
    p: int
    n: int
    columns: list[str]
    top_graphs: list[tuple[Graph, float]]
    inclusion: np.ndarray
    median_graph: Graph
    prior: dict
    config: dict
    stats: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)

    @classmethod
    def from_search(cls, result: FincsResult, data: DataMatrix, columns, prior, config, seeds) -> "ResultBundle":
        return cls(
            p=data.p,
            n=data.n,
            columns=list(columns),
            top_graphs=list(result.graphs.entries()),
            inclusion=result.inclusion,
            median_graph=result.median_graph,
            prior=prior,
            config=config,
            stats=dict(result.stats),
            seeds=seeds,
        )

    def to_json(self, top: int | None = 100) -> dict:
        graphs = self.top_graphs if top is None else self.top_graphs[:top]
        return {
            "schema_version": SCHEMA_VERSION,
            "p": self.p,
            "n": self.n,
            "columns": self.columns,
            "prior": self.prior,
            "config": self.config,
            "seeds": self.seeds,
            "stats": self.stats,
            "median_graph": [[i + 1, j + 1] for i, j in self.median_graph.edges],
            "inclusion": [[float(v) for v in row] for row in self.inclusion],
            "top_graphs": [
                {"rank": r, "size": g.k, "log_score": s, "edges": [[i + 1, j + 1] for i, j in g.edges]}
                for r, (g, s) in enumerate(graphs, start=1)
            ],
        }


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def emit_results(bundle: ResultBundle, outdir, emit=("json", "dot", "csv"), top: int | None = 100) -> list[Path]:
    """Write results.json, median_graph.dot, inclusion.csv and top_graphs.csv."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in emit:
        path = outdir / "results.json"
        write_json(path, bundle.to_json(top))
        written.append(path)
    if "dot" in emit:
        path = outdir / "median_graph.dot"
        path.write_text(to_dot(bundle.median_graph, "median", bundle.columns))
        written.append(path)
    if "csv" in emit:
        path = outdir / "inclusion.csv"
        write_csv_matrix(path, bundle.inclusion, header=bundle.columns)
        written.append(path)
        path = outdir / "top_graphs.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "size", "log_score", "edges"])
            for r, (g, s) in enumerate(bundle.top_graphs, start=1):
                w.writerow([r, g.k, fmt(s), edges_to_string(g)])
        written.append(path)
    return written
