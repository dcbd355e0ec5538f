#!/usr/bin/env python3
"""Download UCR datasets into <dest>/<Name>/<Name>_{TRAIN,TEST}.tsv.

The files are taken from the `ucr-datasets` wheel on PyPI, which bundles a
subset of the archive as tab-separated text.
"""
import argparse
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", default=["BirdChicken", "Coffee"])
    ap.add_argument("--dest", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "ucr"))
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:",
                        "-d", tmp, "ucr-datasets==0.0.6"], check=True)
        wheel = next(pathlib.Path(tmp).glob("*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            members = {pathlib.PurePosixPath(n).name: n for n in zf.namelist() if n.endswith(".tsv")}
            missing = []
            for name in args.names:
                for split in ("TRAIN", "TEST"):
                    fname = f"{name}_{split}.tsv"
                    if fname not in members:
                        missing.append(fname)
                        continue
                    out = pathlib.Path(args.dest) / name / fname
                    out.parent.mkdir(parents=True, exist_ok=True)
                    out.write_bytes(zf.read(members[fname]))
                    print(f"wrote {out}")
    if missing:
        print("not in the wheel: " + ", ".join(missing), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
