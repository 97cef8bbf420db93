import sys
from fractions import Fraction
from pathlib import Path

from openpyxl import load_workbook

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from coso.common.exporter import create_workbook, save_workbook  # noqa: E402


def test_workbook_with_two_sheets(tmp_path):
    excel_file = create_workbook(
        [
            ("Rates", ["User", "Rate"], [[1, Fraction(13, 2)], [2, Fraction(3)]]),
            ("Notes", ["Note"], [["a fairly long note that should widen the column"]]),
        ],
        wrap_text_columns=[0],
    )
    path = save_workbook(excel_file, tmp_path / "nested" / "book.xlsx")
    workbook = load_workbook(path)
    assert workbook.sheetnames == ["Rates", "Notes"]

    rates = workbook["Rates"]
    assert rates["A1"].font.bold
    assert rates["B2"].value == "13/2"
    assert rates["B3"].value == "3"

    notes = workbook["Notes"]
    assert notes.column_dimensions["A"].width > 40
    assert notes["A2"].alignment.wrap_text
