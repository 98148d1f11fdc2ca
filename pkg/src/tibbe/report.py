"""Report artifacts: the score grid, per-question gain series, and the
criteria-matrix summary.

The grid has one row per (base backend, mode), one column per judge, and a
trailing Mean column averaging that row's judge cells. Full precision is kept
internally and in the CSV artifacts; the markdown table displays values
rounded half-away-from-zero to 2 decimals. Because row means are rationals
with small denominators, the rounding first quantizes the float at 1e-9 to
recover the intended decimal (e.g. the float mean 0.79499999999999993 is the
decimal 0.795, which displays as 0.80).

All emitters are pure functions of their inputs: fixed sort orders, ``repr``
float formatting, LF line endings — equal inputs give byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable

from .errors import EmptyRun, IncompleteModes, NoScoredSamples
from .judge import CRITERIA_KEYS, RunScore, aggregate_run
from .pipeline import MODE_ORDER, Mode
from .runner import EvaluationRun

GRID_MD = "grid.md"
GRID_CSV = "grid.csv"
GAINS_CSV = "gains.csv"
CRITERIA_CSV = "criteria.csv"


def display_round(value: float) -> str:
    """Half-away-from-zero rendering to 2 decimals, float noise corrected."""
    decimal_value = Decimal(repr(value)).quantize(Decimal("1E-9"), rounding=ROUND_HALF_UP)
    return str(decimal_value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass
class ScoreGrid:
    rows: list[tuple[str, Mode]]
    columns: list[str]
    cells: dict[tuple[str, Mode, str], RunScore] = field(default_factory=dict)
    failed: dict[tuple[str, Mode, str], int] = field(default_factory=dict)

    def cell_value(self, base_id: str, mode: Mode, judge_id: str) -> float | None:
        cell = self.cells.get((base_id, mode, judge_id))
        return cell.value if cell else None

    def row_mean(self, base_id: str, mode: Mode) -> float | None:
        """Full-precision arithmetic mean of the row's present judge cells."""
        values = [v for judge_id in self.columns
                  if (v := self.cell_value(base_id, mode, judge_id)) is not None]
        if not values:
            return None
        return sum(values) / len(values)


def build_grid(run: EvaluationRun) -> ScoreGrid:
    """Aggregate per-sample scores into the (base, mode) x judge grid."""
    if not run.samples:
        raise EmptyRun("run has no scored samples")
    rows = sorted(
        {(base, mode) for base in run.base_ids for mode in run.modes},
        key=lambda r: (r[0], MODE_ORDER[r[1]]),
    )
    columns = sorted(run.judge_ids)
    grid = ScoreGrid(rows=rows, columns=columns)

    failed: dict[tuple[str, Mode, str], int] = {}
    for failure in run.failures:
        if failure.stage == "pipeline":
            for judge_id in columns:
                key = (failure.base_backend_id, failure.mode, judge_id)
                failed[key] = failed.get(key, 0) + 1
        elif failure.stage == "judge":
            key = (failure.base_backend_id, failure.mode, failure.judge_backend_id)
            failed[key] = failed.get(key, 0) + 1
    grid.failed = failed

    for base_id, mode in rows:
        for judge_id in columns:
            cell_samples = sorted(
                (s for s in run.samples
                 if s.base_backend_id == base_id and s.mode is mode
                 and s.judge_backend_id == judge_id),
                key=lambda s: s.question_id,
            )
            if cell_samples:
                try:
                    grid.cells[(base_id, mode, judge_id)] = aggregate_run(
                        cell_samples, failed_count=failed.get((base_id, mode, judge_id), 0))
                except NoScoredSamples:  # pragma: no cover - guarded above
                    pass
    return grid


@dataclass(frozen=True)
class GainRow:
    question_id: str
    direct: float
    rag: float
    agentic: float
    gain_rag: float
    gain_agentic: float


@dataclass
class GainSeries:
    base_id: str
    judge_id: str
    rows: list[GainRow] = field(default_factory=list)


def build_gains(run: EvaluationRun, base_id: str, judge_id: str) -> GainSeries:
    """Per-question mode scores and deltas for one (base, judge) pair."""
    per_question: dict[str, dict[Mode, float]] = {}
    for sample in run.samples:
        if sample.base_backend_id == base_id and sample.judge_backend_id == judge_id:
            per_question.setdefault(sample.question_id, {})[sample.mode] = sample.value
    if not per_question:
        raise EmptyRun(f"no samples for base {base_id!r} judged by {judge_id!r}")

    series = GainSeries(base_id=base_id, judge_id=judge_id)
    for question_id in sorted(per_question):
        modes = per_question[question_id]
        missing = [m.value for m in (Mode.DIRECT, Mode.RAG, Mode.AGENTIC) if m not in modes]
        if missing:
            raise IncompleteModes(question_id, missing)
        direct, rag, agentic = modes[Mode.DIRECT], modes[Mode.RAG], modes[Mode.AGENTIC]
        series.rows.append(GainRow(
            question_id=question_id, direct=direct, rag=rag, agentic=agentic,
            gain_rag=rag - direct, gain_agentic=agentic - rag,
        ))
    return series


def criteria_summary(run: EvaluationRun) -> list[dict]:
    """Fraction of answers meeting each of the four criteria, per (base, mode)."""
    grouped: dict[tuple[str, Mode], list] = {}
    for record in run.criteria:
        grouped.setdefault((record.base_backend_id, record.mode), []).append(record.matrix)
    rows = []
    for (base_id, mode) in sorted(grouped, key=lambda key: (key[0], MODE_ORDER[key[1]])):
        matrices = grouped[(base_id, mode)]
        row = {"base_backend_id": base_id, "mode": mode.value, "n": len(matrices)}
        for key in CRITERIA_KEYS:
            row[key] = sum(1 for m in matrices if getattr(m, key)) / len(matrices)
        rows.append(row)
    return rows


# --- emitters ----------------------------------------------------------------

def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    return path


def _grid_markdown(grid: ScoreGrid) -> str:
    header = ["Base model", "Method"] + list(grid.columns) + ["Mean"]
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join("---" for _ in header) + " |"]
    previous_base = None
    for base_id, mode in grid.rows:
        shown_base = base_id if base_id != previous_base else ""
        previous_base = base_id
        cells = []
        for judge_id in grid.columns:
            value = grid.cell_value(base_id, mode, judge_id)
            cells.append(display_round(value) if value is not None else "-")
        mean = grid.row_mean(base_id, mode)
        cells.append(display_round(mean) if mean is not None else "-")
        lines.append("| " + " | ".join([shown_base, mode.value] + cells) + " |")

    failed_keys = sorted(grid.failed, key=lambda k: (k[0], MODE_ORDER[k[1]], k[2]))
    notes = [f"{base}/{mode.value}/{judge}: {grid.failed[(base, mode, judge)]}"
             for base, mode, judge in failed_keys if grid.failed[(base, mode, judge)]]
    if notes:
        lines.append("")
        lines.append("Failed samples excluded from the means — " + "; ".join(notes))
    return "\n".join(lines) + "\n"


def _grid_csv(grid: ScoreGrid) -> str:
    columns = list(grid.columns)
    header = ["base_backend", "mode"] + columns + ["mean"] + [f"failed_{j}" for j in columns]
    lines = [",".join(header)]
    for base_id, mode in grid.rows:
        values = []
        for judge_id in columns:
            value = grid.cell_value(base_id, mode, judge_id)
            values.append(repr(value) if value is not None else "")
        mean = grid.row_mean(base_id, mode)
        values.append(repr(mean) if mean is not None else "")
        values += [str(grid.failed.get((base_id, mode, judge_id), 0)) for judge_id in columns]
        lines.append(",".join([base_id, mode.value] + values))
    return "\n".join(lines) + "\n"


def _gains_csv(gains: GainSeries) -> str:
    lines = ["question_id,direct,rag,agentic,gain_rag,gain_agentic"]
    for row in gains.rows:
        lines.append(",".join([
            row.question_id, repr(row.direct), repr(row.rag), repr(row.agentic),
            repr(row.gain_rag), repr(row.gain_agentic),
        ]))
    return "\n".join(lines) + "\n"


def _criteria_csv(rows: Iterable[dict]) -> str:
    header = ["base_backend", "mode", "n"] + list(CRITERIA_KEYS)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            [row["base_backend_id"], row["mode"], str(row["n"])]
            + [repr(row[key]) for key in CRITERIA_KEYS]
        ))
    return "\n".join(lines) + "\n"


def emit(
    grid: ScoreGrid,
    gains: GainSeries | None,
    criteria_rows: list[dict],
    out_dir: str | Path,
    formats: Iterable[str] = ("markdown", "csv"),
) -> list[Path]:
    """Write the report artifacts; returns the paths written."""
    out = Path(out_dir)
    wanted = set(formats)
    written = []
    if "markdown" in wanted:
        written.append(_write_text(out / GRID_MD, _grid_markdown(grid)))
    if "csv" in wanted:
        written.append(_write_text(out / GRID_CSV, _grid_csv(grid)))
        if gains is not None:
            written.append(_write_text(out / GAINS_CSV, _gains_csv(gains)))
        written.append(_write_text(out / CRITERIA_CSV, _criteria_csv(criteria_rows)))
    return written
