"""Convert a dense MULAN ARFF file into the CSV + manifest input format.

Usage:
    python convert_arff.py emotions-train.arff emotions-train.csv --labels 6
"""
import argparse
import os
import sys

import numpy as np
from scipy.io import arff

from config import logger


def arff_to_matrix(path):
    """Read a dense ARFF file into a float matrix; nominal {0,1} columns become 0/1."""
    with open(path, encoding='utf-8') as handle:
        for line in handle:
            stripped = line.strip()
            if stripped.lower().startswith('@data'):
                break
        for line in handle:
            stripped = line.strip()
            if stripped and not stripped.startswith('%'):
                if stripped.startswith('{'):
                    raise ValueError(f"{path} uses sparse ARFF rows, which are not supported")
                break
    data, meta = arff.loadarff(path)
    columns = []
    for name in meta.names():
        column = data[name]
        if column.dtype.kind in ('S', 'O'):
            column = np.array([float(value.decode() if isinstance(value, bytes) else value) for value in column])
        columns.append(np.asarray(column, dtype=np.float64))
    return np.column_stack(columns), meta.names()


def convert(arff_path, csv_path, label_count):
    matrix, names = arff_to_matrix(arff_path)
    if not 1 <= label_count < matrix.shape[1]:
        raise ValueError(f"label_count must be between 1 and {matrix.shape[1] - 1}, got {label_count}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"{arff_path} contains missing or non-finite values")
    np.savetxt(csv_path, matrix, delimiter=',', fmt='%.17g')
    manifest_path = os.path.splitext(csv_path)[0] + '.manifest'
    with open(manifest_path, 'w', encoding='utf-8') as handle:
        handle.write(f"label_count={label_count}\n")
    logger.info(
        f"Converted {arff_path}: {matrix.shape[0]} rows, {matrix.shape[1] - label_count} features, "
        f"{label_count} labels ({', '.join(names[-label_count:])}) -> {csv_path}")
    return matrix.shape


def main():
    parser = argparse.ArgumentParser(description="Convert a dense MULAN ARFF file to CSV")
    parser.add_argument("arff_path")
    parser.add_argument("csv_path")
    parser.add_argument("--labels", type=int, required=True, help="Number of trailing label attributes")
    args = parser.parse_args()
    try:
        convert(args.arff_path, args.csv_path, args.labels)
    except Exception as e:
        logger.error(f"Conversion failed: {str(e)}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
