#!/usr/bin/env python3
"""Fetch MovieLens-100K into data/ml-100k/u.data.

Tries the GroupLens archive first; if that is unreachable, pulls the copy
bundled in the recbole wheel (through pip, so a package mirror is enough) and
rewrites it in the original tab-separated layout.
"""

import argparse
import glob
import io
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

GROUPLENS = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
INTER = "recbole/dataset_example/ml-100k/ml-100k.inter"


def from_grouplens() -> bytes:
    with urllib.request.urlopen(GROUPLENS, timeout=30) as resp:
        archive = zipfile.ZipFile(io.BytesIO(resp.read()))
    return archive.read("ml-100k/u.data")


def from_recbole() -> bytes:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "--disable-pip-version-check", "-d", tmp, "recbole==1.2.1"],
            check=True,
        )
        wheel = zipfile.ZipFile(glob.glob(f"{tmp}/recbole-*.whl")[0])
        lines = wheel.read(INTER).decode().splitlines()
    # header: user_id:token item_id:token rating:float timestamp:float
    return "".join(line + "\n" for line in lines[1:] if line.strip()).encode()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data/ml-100k/u.data")
    args = parser.parse_args()

    try:
        data = from_grouplens()
        source = "grouplens"
    except Exception as exc:  # noqa: BLE001
        print(f"grouplens unavailable ({exc}); using the recbole wheel", file=sys.stderr)
        data = from_recbole()
        source = "recbole"

    count = data.count(b"\n")
    if count != 100000:
        print(f"expected 100000 ratings, got {count}", file=sys.stderr)
        return 1
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_bytes(data)
    print(f"wrote {args.out} ({count} ratings, {source})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
