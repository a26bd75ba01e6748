import csv
import io
import json
import os
import tempfile
from typing import Any, Dict, List, Sequence

import numpy as np
from loguru import logger

from src.utils.error_handling import FileSaveError


def _atomic_write(output_file: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(output_file))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(output_file))
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_path, output_file)
    except OSError as e:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        logger.error(f"Failed to save output to {output_file}: {str(e)}")
        raise FileSaveError(output_file, str(e)) from e


def save_output(data: Any, output_file: str) -> None:
    """
    Saves data to a JSON file atomically (temporary file, then rename).

    The target directory is created if needed.

    Args:
        data (dict or list): JSON-serialisable data.
        output_file (str): The path to the output file.

    Raises:
        FileSaveError: If the file cannot be written.
    """
    payload = json.dumps(data, indent=4).encode("utf-8")
    _atomic_write(output_file, payload)
    logger.info(f"Data successfully saved to {output_file}")


def load_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def write_csv(output_file: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    """
    Writes a CSV table atomically.

    Args:
        output_file (str): Destination path.
        header (Sequence[str]): Column names.
        rows (Sequence[Sequence[Any]]): Row values, already formatted as needed.

    Raises:
        FileSaveError: If the file cannot be written.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    _atomic_write(output_file, buffer.getvalue().encode("utf-8"))
    logger.debug(f"Wrote {len(rows)} row(s) to {output_file}")


def read_csv(path: str) -> List[Dict[str, str]]:
    """Reads a CSV table with a header row into a list of dicts."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        return [dict(row) for row in csv.DictReader(handle, skipinitialspace=True)]


def save_matrices(output_file: str, matrices: Dict[str, np.ndarray]) -> None:
    """
    Stores named feature matrices in one ``.npz`` container, atomically.

    Args:
        output_file (str): Destination path.
        matrices (Dict[str, np.ndarray]): Arrays keyed by name.
    """
    buffer = io.BytesIO()
    np.savez(buffer, **matrices)
    _atomic_write(output_file, buffer.getvalue())
    logger.info(f"Saved {len(matrices)} matrix(es) to {output_file}")


def load_matrices(path: str) -> Dict[str, np.ndarray]:
    with np.load(path, allow_pickle=False) as archive:
        return {name: archive[name] for name in archive.files}


def write_text(output_file: str, text: str) -> None:
    """Writes a text file atomically, UTF-8 encoded."""
    _atomic_write(output_file, text.encode("utf-8"))
    logger.debug(f"Wrote {output_file}")
