# Utils module exports
from .file_parser import parse_matrix_file, read_matrix_path
