from rich.panel import Panel
from rich.table import Table
from typing import Dict


def show_summary(entries: Dict[str, str], title: str = "Run Summary") -> Panel:
    """
    Generate a two-column summary panel.
    """
    table = Table.grid(expand=True)
    table.add_column("Quantity", style="bold cyan")
    table.add_column("Value", justify="right")
    for name, value in entries.items():
        table.add_row(name, value)
    return Panel(table, title=title, border_style="magenta")
