"""
Export/Import functionality for BER results.
Writes the result CSV and its JSON metadata sidecar, an optional styled Excel
workbook, and reads result CSVs back.
"""
import csv
import json
from typing import List, Dict, Any, Optional, Tuple

import config
import utils

try:
    from openpyxl import Workbook
    from openpyxl.styles import Font, PatternFill, Alignment, Border, Side
    from openpyxl.utils import get_column_letter
    EXCEL_AVAILABLE = True
except ImportError:
    EXCEL_AVAILABLE = False
    utils.logger.warning("openpyxl not available, Excel export disabled")

logger = utils.get_logger(__name__)

RESULT_COLUMNS = ['Q', 'nm_index', 'ber', 'ci_low', 'ci_high', 'bits', 'errors']
_INT_COLUMNS = {'nm_index', 'bits', 'errors'}


def _format_value(value: Any) -> str:
    """repr precision for floats so files are exact and byte-stable"""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _ber_fill(ber: float) -> Optional[str]:
    for upper, colour in config.BER_BANDS:
        if ber < upper:
            return colour
    return None


def _autosize(ws, headers: List[str]):
    """Auto-adjust column widths"""
    for col_num, header in enumerate(headers, 1):
        max_length = len(header)
        for row in ws.iter_rows(min_row=2, max_row=ws.max_row, min_col=col_num, max_col=col_num):
            for cell in row:
                if cell.value is not None:
                    max_length = max(max_length, len(str(cell.value)))
        ws.column_dimensions[get_column_letter(col_num)].width = min(max_length + 2, 50)


def _write_header_row(ws, headers: List[str]):
    header_font = Font(bold=True, color="FFFFFF", size=12)
    header_fill = PatternFill(start_color="2196F3", end_color="2196F3", fill_type="solid")
    header_alignment = Alignment(horizontal="center", vertical="center")
    for col_num, header in enumerate(headers, 1):
        cell = ws.cell(row=1, column=col_num)
        cell.value = header
        cell.font = header_font
        cell.fill = header_fill
        cell.alignment = header_alignment


class ExportManager:
    """Manager for writing and reading BER result files"""

    @staticmethod
    def export_results_csv(filepath: str, rows: List[Dict[str, Any]], digest: str, seed: int) -> bool:
        """Write result rows (sorted by Q, NM) after the digest/seed/schema header lines"""
        try:
            ordered = sorted(rows, key=lambda r: (r['Q'], r['nm_index']))
            with open(filepath, 'w', newline='', encoding='utf-8') as csvfile:
                csvfile.write(f"# digest={digest}\n")
                csvfile.write(f"# seed={seed}\n")
                csvfile.write(f"# schema={config.RESULT_SCHEMA_VERSION}\n")
                writer = csv.writer(csvfile, lineterminator='\n')
                writer.writerow(RESULT_COLUMNS)
                for row in ordered:
                    writer.writerow([_format_value(row[c]) for c in RESULT_COLUMNS])

            logger.info(f"Exported {len(ordered)} result rows to CSV: {filepath}")
            return True

        except (OSError, KeyError) as e:
            logger.error(f"Error exporting to CSV: {e}")
            return False

    @staticmethod
    def import_results_csv(filepath: str) -> Tuple[bool, Dict[str, str], List[Dict[str, Any]]]:
        """Read a result CSV back into (success, header fields, typed rows)"""
        header: Dict[str, str] = {}
        rows: List[Dict[str, Any]] = []
        try:
            with open(filepath, newline='', encoding='utf-8') as f:
                lines = f.read().splitlines()
            body = []
            for line in lines:
                if line.startswith('#'):
                    key, _, value = line[1:].strip().partition('=')
                    header[key] = value
                elif line.strip():
                    body.append(line)
            reader = csv.DictReader(body)
            if reader.fieldnames != RESULT_COLUMNS:
                logger.error(f"Unexpected result columns in {filepath}: {reader.fieldnames}")
                return False, header, []
            for raw in reader:
                rows.append({k: int(v) if k in _INT_COLUMNS else float(v) for k, v in raw.items()})

            logger.info(f"Loaded {len(rows)} result rows from CSV: {filepath}")
            return True, header, rows

        except (OSError, ValueError) as e:
            logger.error(f"Error importing from CSV: {e}")
            return False, header, []

    @staticmethod
    def export_metadata_json(filepath: str, metadata: Dict[str, Any]) -> bool:
        """Export the run metadata sidecar"""
        try:
            with open(filepath, 'w', encoding='utf-8') as jsonfile:
                json.dump(metadata, jsonfile, indent=2, ensure_ascii=False, sort_keys=True)

            logger.info(f"Exported run metadata to JSON: {filepath}")
            return True

        except (OSError, TypeError) as e:
            logger.error(f"Error exporting to JSON: {e}")
            return False

    @staticmethod
    def export_emission_summary(filepath: str, rows: List[Dict[str, Any]]) -> bool:
        """Per-NM molecules per bit for every sweep point"""
        fieldnames = ['Q', 'nm_index', 'distance_um', 'molecules_per_bit', 'To_s']
        try:
            with open(filepath, 'w', newline='', encoding='utf-8') as csvfile:
                writer = csv.writer(csvfile, lineterminator='\n')
                writer.writerow(fieldnames)
                for row in rows:
                    writer.writerow([_format_value(row[c]) for c in fieldnames])

            logger.info(f"Exported emission summary ({len(rows)} rows) to CSV: {filepath}")
            return True

        except (OSError, KeyError) as e:
            logger.error(f"Error exporting emission summary: {e}")
            return False

    @staticmethod
    def export_to_excel(filepath: str, rows: List[Dict[str, Any]],
                        emission_rows: Optional[List[Dict[str, Any]]] = None,
                        title: str = "BER") -> bool:
        """Export result rows to Excel with formatting, one colour band per BER decade"""
        if not EXCEL_AVAILABLE:
            logger.error("Excel export not available: openpyxl not installed")
            return False

        try:
            wb = Workbook()
            ws = wb.active
            ws.title = title[:31]
            _write_header_row(ws, RESULT_COLUMNS)

            border = Border(
                left=Side(style='thin', color='E0E0E0'),
                right=Side(style='thin', color='E0E0E0'),
                top=Side(style='thin', color='E0E0E0'),
                bottom=Side(style='thin', color='E0E0E0')
            )

            ordered = sorted(rows, key=lambda r: (r['Q'], r['nm_index']))
            for row_num, row in enumerate(ordered, 2):
                colour = _ber_fill(row['ber'])
                fill = PatternFill(start_color=colour, end_color=colour, fill_type="solid") if colour else None
                for col_num, key in enumerate(RESULT_COLUMNS, 1):
                    cell = ws.cell(row=row_num, column=col_num)
                    cell.value = row[key]
                    cell.border = border
                    if fill:
                        cell.fill = fill
                    if key in ('ber', 'ci_low', 'ci_high'):
                        cell.number_format = '0.000E+00'

            _autosize(ws, RESULT_COLUMNS)
            ws.freeze_panes = "A2"

            if emission_rows:
                headers = ['Q', 'nm_index', 'distance_um', 'molecules_per_bit', 'To_s']
                es = wb.create_sheet("Emission")
                _write_header_row(es, headers)
                for row_num, row in enumerate(emission_rows, 2):
                    for col_num, key in enumerate(headers, 1):
                        cell = es.cell(row=row_num, column=col_num)
                        cell.value = row[key]
                        cell.border = border
                _autosize(es, headers)
                es.freeze_panes = "A2"

            wb.save(filepath)
            logger.info(f"Exported {len(ordered)} result rows to Excel: {filepath}")
            return True

        except (OSError, KeyError, ValueError) as e:
            logger.error(f"Error exporting to Excel: {e}")
            return False
