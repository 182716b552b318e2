"""
File Parser Utility

Parses CSV, XLSX and JSON files containing delay matrices.
"""

import io
import json
from pathlib import Path
from typing import List, Union

import pandas as pd


def parse_matrix_file(content: bytes, extension: str) -> List[List[float]]:
    """
    Parse a matrix file (CSV, XLSX or JSON) into a 2D list.

    A JSON file holds either a bare n x n array or an object with a "d" key.

    Args:
        content: File content as bytes
        extension: File extension (csv, xlsx, xls, json)

    Returns:
        Matrix as nested list of floats

    Raises:
        ValueError: If file cannot be parsed
    """
    extension = extension.lower().lstrip(".")
    try:
        if extension == "json":
            data = json.loads(content.decode("utf-8"))
            if isinstance(data, dict):
                data = data["d"]
            df = pd.DataFrame(data)
        elif extension == "csv":
            df = pd.read_csv(io.BytesIO(content), header=None)
        elif extension in ("xlsx", "xls"):
            df = pd.read_excel(io.BytesIO(content), header=None)
        else:
            raise ValueError(f"unsupported extension '{extension}'")

        return [[float(val) for val in row] for row in df.values.tolist()]

    except Exception as e:
        raise ValueError(f"Failed to parse file: {str(e)}")


def read_matrix_path(path: Union[str, Path]) -> List[List[float]]:
    """Read a matrix file from disk, dispatching on its suffix."""
    path = Path(path)
    return parse_matrix_file(path.read_bytes(), path.suffix)
