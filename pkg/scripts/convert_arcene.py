#!/usr/bin/env python3
"""Join raw Arcene feature/label files into labeled CSVs.

The UCI distribution ships features as space-separated rows
(arcene_train.data, arcene_valid.data) and labels as one +-1 per line
(arcene_train.labels, arcene_valid.labels). This writes
data/arcene_train.csv and data/arcene_valid.csv with a header and a
trailing ``label`` column, which is what configs/arcene_lwr.ini expects.

Usage: python3 scripts/convert_arcene.py [raw_dir] [out_dir]
Both default to data/.
"""
from __future__ import annotations

import csv
import sys
from pathlib import Path


def convert(features_path: Path, labels_path: Path, out_path: Path) -> int:
    rows = [line.split() for line in features_path.read_text().splitlines() if line.strip()]
    labels = [line.strip() for line in labels_path.read_text().splitlines() if line.strip()]
    if len(rows) != len(labels):
        raise SystemExit(
            f"{features_path} has {len(rows)} rows but {labels_path} has {len(labels)} labels"
        )
    width = len(rows[0])
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f_{i}" for i in range(width)] + ["label"])
        for row, label in zip(rows, labels):
            if len(row) != width:
                raise SystemExit(f"{features_path}: ragged row of width {len(row)}")
            writer.writerow(row + [label])
    return len(rows)


def main() -> None:
    raw = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data")
    out = Path(sys.argv[2]) if len(sys.argv) > 2 else Path("data")
    out.mkdir(parents=True, exist_ok=True)
    for split in ("train", "valid"):
        n = convert(
            raw / f"arcene_{split}.data",
            raw / f"arcene_{split}.labels",
            out / f"arcene_{split}.csv",
        )
        print(f"wrote {out / f'arcene_{split}.csv'} ({n} rows)")


if __name__ == "__main__":
    main()
