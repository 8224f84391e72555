import csv
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence

from ..utils import ensure_dir, get_logger
from ..utils.config import CSV_SIGNIFICANT_DIGITS
from ..utils.errors import OutputError

logger = get_logger(__name__)

TMU_COLUMNS = ('sweep_var', 'value', 'sigma_d_m', 'sigma_v_mps', 'sigma_theta_rad', 'pd')
BOUND_COLUMNS = ('sweep_var', 'value', 'trace_ipcrlb', 'std_ipcrlb', 'trace_efim', 'std_efim',
                 'trace_pcrlb', 'std_pcrlb')
CLOSED_LOOP_COLUMNS = ('step', 'policy', 'rx_x', 'rx_y', 'pos_rmse', 'vel_rmse', 'pd_mean', 'pd_std',
                       'sigma_d_mean', 'sigma_d_std', 'sigma_v_mean', 'sigma_v_std',
                       'sigma_theta_mean', 'sigma_theta_std', 'diverged_runs')
TRACKING_COLUMNS = ('step', 'pos_mse', 'vel_mse', 'pos_bound_ipcrlb', 'vel_bound_ipcrlb', 'diverged_runs')
ASSUMPTION1_COLUMNS = ('theta_deg', 'dxi_dd_hz_per_m', 'sigma_v_general_mps', 'sigma_v_assumption1_mps',
                       'rel_diff')


@dataclass
class Table:
    """Column-ordered result table."""

    columns: Sequence[str]
    rows: List[Dict[str, Any]] = field(default_factory=list)

    def append(self, **values) -> None:
        missing = [c for c in self.columns if c not in values]
        extra = [k for k in values if k not in self.columns]
        if missing or extra:
            raise ValueError(f"row does not match columns (missing={missing}, extra={extra})")
        self.rows.append(values)

    def column(self, name: str) -> List[Any]:
        return [row[name] for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.{CSV_SIGNIFICANT_DIGITS}g}"
    if hasattr(value, 'item'):  # numpy scalar
        return format_value(value.item())
    return str(value)


def parse_value(text: str) -> Any:
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def emit_csv(table: Table, path: str) -> str:
    """
    Write a table as UTF-8 CSV with LF line endings.

    Raises:
        OutputError: on an empty table or when the file cannot be written.
    """
    if not table.rows:
        raise OutputError(f"refusing to write empty table to {path}")
    try:
        directory = os.path.dirname(path)
        if directory:
            ensure_dir(directory)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=list(table.columns), lineterminator='\n')
            writer.writeheader()
            for row in table.rows:
                writer.writerow({c: format_value(row[c]) for c in table.columns})
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    logger.info(f"Wrote {len(table)} rows to {path}")
    return path


def read_csv(path: str) -> Table:
    """Parse a CSV written by emit_csv back into a Table."""
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.DictReader(f)
        table = Table(columns=tuple(reader.fieldnames or ()))
        for record in reader:
            table.rows.append({k: parse_value(v) for k, v in record.items()})
    return table
