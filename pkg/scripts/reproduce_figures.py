"""Write the data behind the three figures as CSV files.

    python3 scripts/reproduce_figures.py [--outdir figures]
"""

import argparse
from pathlib import Path

from genfilippov.cli import FIGURES, write_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="figures")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, make in FIGURES.items():
        header, data = make()
        path = out / f"{name}.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            write_table(header, data.tolist(), f)
        print(f"{path}: {data.shape[0]} rows, columns {', '.join(header)}")


if __name__ == "__main__":
    main()
