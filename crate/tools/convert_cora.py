#!/usr/bin/env python3
"""Convert the LINQS Cora distribution into matan input files.

The LINQS archive (cora.tgz) contains:
  cora.content  one line per paper: <id> TAB <1433 binary features> TAB <label>
  cora.cites    one line per citation: <cited-id> TAB <citing-id>

The distribution ships no word strings, only anonymous binary features, so
each paper becomes a document of synthetic tokens `w<idx>`, one per nonzero
feature, in feature-index order. Citations are copied verbatim; the loader
treats them as undirected and drops duplicates and self-loops.

Usage:
  python3 tools/convert_cora.py <cora-dir> [<out-dir>]

where <cora-dir> contains cora.content and cora.cites. Output defaults to
the same directory: documents.tsv and edges.tsv.
"""

import sys
from pathlib import Path


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    src = Path(sys.argv[1])
    out = Path(sys.argv[2]) if len(sys.argv) > 2 else src
    out.mkdir(parents=True, exist_ok=True)

    with open(src / "cora.content") as f, open(out / "documents.tsv", "w") as g:
        for line in f:
            fields = line.rstrip("\n").split("\t")
            paper_id, features = fields[0], fields[1:-1]
            words = " ".join(f"w{i}" for i, v in enumerate(features) if v == "1")
            g.write(f"{paper_id}\t{words}\n")

    with open(src / "cora.cites") as f, open(out / "edges.tsv", "w") as g:
        for line in f:
            a, b = line.split()
            g.write(f"{a}\t{b}\n")

    print(f"wrote {out / 'documents.tsv'} and {out / 'edges.tsv'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
