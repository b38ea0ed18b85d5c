from typing import Iterable, Mapping, Optional, Tuple

from rich.console import Console
from rich.markup import escape
from rich.table import Table

console = Console()
error_console = Console(stderr=True, highlight=False, soft_wrap=True)


def format_value(value) -> str:
    """
    Render a report value for a summary table cell.

    Args:
        value: A scalar, sequence or mapping from a report.

    Returns:
        str: Short human-readable text.
    """
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, Mapping):
        return ", ".join(f"{k}={format_value(v)}" for k, v in value.items())
    if isinstance(value, (list, tuple)):
        if len(value) > 8:
            head = ", ".join(format_value(v) for v in value[:8])
            return f"[{head}, ... ({len(value)} values)]"
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    return str(value)


def display_summary(
    title: str,
    rows: Iterable[Tuple[str, object]],
    color: str = "magenta",
    artifacts: Optional[Iterable] = None,
):
    """
    Print a two-column summary table followed by the written artifacts.

    Args:
        title: The title of the table.
        rows: (label, value) pairs.
        color: The color to use for the title and labels.
        artifacts: Paths of the files written by the command.
    """
    table = Table(
        title=f"[bold {color}]{escape(title)}[/bold {color}]",
        show_header=False,
        min_width=len(title) + 4,
    )
    table.add_column(style=color, no_wrap=True)
    table.add_column()
    for label, value in rows:
        table.add_row(escape(str(label)), escape(format_value(value)))
    console.print(table)

    for path in artifacts or ():
        console.print(f"[{color}]wrote[/{color}] {escape(str(path))}")


def print_diagnostic(message: str, prefix: str = "error"):
    """
    Print a single-line diagnostic to standard error.

    Args:
        message: The diagnostic; newlines are folded into spaces.
        prefix: Leading tag, e.g. "error" or "input error".
    """
    line = " ".join(str(message).split())
    error_console.print(f"[bold red]branchenv: {prefix}:[/bold red] {escape(line)}")
