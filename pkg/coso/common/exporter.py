"""Styled xlsx workbooks built with openpyxl."""

from fractions import Fraction
from io import BytesIO
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple

from openpyxl import Workbook
from openpyxl.styles import Alignment, Font
from openpyxl.worksheet.worksheet import Worksheet

from coso.common.rationals import format_rational

Sheet = Tuple[str, List[str], List[List[Any]]]


def _cell(value: Any) -> Any:
    # Exact values stay exact in the sheet: "13/2", not 6.5.
    if isinstance(value, Fraction):
        return format_rational(value)
    return value


def _fill_sheet(
    ws: Worksheet,
    headers: List[str],
    rows: List[List[Any]],
    bold_headers: bool = True,
    auto_width: bool = True,
    wrap_text_columns: Optional[List[int]] = None,
) -> None:
    ws.append(headers)

    if bold_headers:
        header_font = Font(bold=True)
        for cell in ws[1]:
            cell.font = header_font

    for row in rows:
        ws.append([_cell(value) for value in row])

    if auto_width:
        for column in ws.columns:
            column = list(column)
            max_length = max((len(str(cell.value)) for cell in column if cell.value is not None), default=0)
            ws.column_dimensions[column[0].column_letter].width = max_length + 2

    if wrap_text_columns:
        for col_idx in wrap_text_columns:
            col_letter = ws.cell(row=1, column=col_idx + 1).column_letter
            for cell in ws[col_letter]:
                cell.alignment = Alignment(wrap_text=True)


def create_workbook(
    sheets: Sequence[Sheet],
    bold_headers: bool = True,
    auto_width: bool = True,
    wrap_text_columns: Optional[List[int]] = None,
) -> BytesIO:
    """Styled workbook with one worksheet per (title, headers, rows)."""
    wb = Workbook()
    first = True
    for title, headers, rows in sheets:
        ws = wb.active if first else wb.create_sheet()
        ws.title = title
        _fill_sheet(ws, headers, rows, bold_headers, auto_width, wrap_text_columns)
        first = False

    excel_file = BytesIO()
    wb.save(excel_file)
    excel_file.seek(0)
    return excel_file


def save_workbook(excel_file: BytesIO, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(excel_file.getvalue())
    return path
