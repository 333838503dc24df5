from typing import Any, Optional, Sequence

from rich.console import Console, Group
from rich.live import Live
from rich.spinner import Spinner
from rich.table import Table

from .models import CheckResult, SweepRow, SweepSummary


class Printer:
    """Live progress lines for long-running sweeps; use as a context manager."""

    def __init__(self, console: Console):
        self.live = Live(console=console)
        self.items: dict[str, tuple[str, bool]] = {}
        self.hide_done_ids: set[str] = set()

    def __enter__(self) -> "Printer":
        self.live.start()
        return self

    def __exit__(self, *exc) -> None:
        self.live.stop()

    def update_item(
        self, item_id: str, content: str, is_done: bool = False, hide_checkmark: bool = False
    ) -> None:
        self.items[item_id] = (content, is_done)
        if hide_checkmark:
            self.hide_done_ids.add(item_id)
        self.flush()

    def mark_item_done(self, item_id: str, content: Optional[str] = None) -> None:
        self.items[item_id] = (content or self.items[item_id][0], True)
        self.flush()

    def row_done(self, sweep: str, row: SweepRow) -> None:
        """Progress callback for sweeps.run_sweep."""
        if row.error:
            text = f"{sweep} {row.parameter:g}: [red]{row.error}[/red]"
        else:
            text = f"{sweep} {row.parameter:g}: " + ", ".join(
                f"{k}={getattr(row, k):.4g}" for k in ("w1", "wpsi", "rho") if getattr(row, k) is not None
            )
        self.update_item(f"{sweep}:{row.parameter!r}", text, is_done=True, hide_checkmark=bool(row.error))

    def flush(self) -> None:
        renderables: list[Any] = []
        for item_id, (content, is_done) in self.items.items():
            if is_done:
                prefix = "✅ " if item_id not in self.hide_done_ids else ""
                renderables.append(prefix + content)
            else:
                renderables.append(Spinner("dots", text=content))
        self.live.update(Group(*renderables))


def checks_table(title: str, checks: Sequence[CheckResult]) -> Table:
    table = Table(title=title)
    table.add_column("check")
    table.add_column("observed", justify="right")
    table.add_column("limit", justify="right")
    table.add_column("result")
    table.add_column("note")
    for c in checks:
        table.add_row(
            c.name,
            "-" if c.observed is None else f"{c.observed:.6g}",
            "-" if c.limit is None else f"{c.limit:.6g}" + (" (locked)" if c.locked else ""),
            "[green]pass[/green]" if c.passed else "[red]FAIL[/red]",
            c.message,
        )
    return table


def summary_table(summary: SweepSummary) -> Table:
    table = Table(title=f"{summary.name} ({summary.family}, {summary.rows} rows, {summary.failed_rows} failed)")
    table.add_column("column")
    table.add_column("min", justify="right")
    table.add_column("max", justify="right")
    for column, high in summary.column_max.items():
        table.add_row(column, f"{summary.column_min[column]:.6g}", f"{high:.6g}")
    return table
