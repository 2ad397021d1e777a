#!/usr/bin/env python3
"""Golden NIfTI-1 fixture for a fixed 2x2x2 float32 volume, built with struct.

Writes a hex dump (16 bytes per line) to stdout, or with --check FILE compares
against a committed dump and exits nonzero on mismatch. --big-endian builds the
byte-swapped twin.
"""
import argparse
import struct
import sys

# Voxels in [D, H, W] order; W varies fastest, so file order is identical.
VOXELS = [0.0, 1.5, -2.25, 1000.0, 0.1, -0.0, 3.14159, 65504.0]
SPACING_DHW = (2.0, 1.5, 0.75)
SROW = ((0.75, 0.0, 0.0, -1.0), (0.0, 1.5, 0.0, -2.0), (0.0, 0.0, 2.0, -3.0))


def header(order):
    d, h, w = SPACING_DHW
    fields = [
        ("i", 348),                 # sizeof_hdr
        ("10s", b""),               # data_type
        ("18s", b""),               # db_name
        ("i", 0),                   # extents
        ("h", 0),                   # session_error
        ("c", b"r"),                # regular
        ("B", 0),                   # dim_info
        ("8h", (3, 2, 2, 2, 1, 1, 1, 1)),
        ("3f", (0.0, 0.0, 0.0)),    # intent_p1..3
        ("h", 0),                   # intent_code
        ("h", 16),                  # datatype float32
        ("h", 32),                  # bitpix
        ("h", 0),                   # slice_start
        ("8f", (1.0, w, h, d, 1.0, 1.0, 1.0, 1.0)),
        ("f", 352.0),               # vox_offset
        ("f", 1.0),                 # scl_slope
        ("f", 0.0),                 # scl_inter
        ("h", 0),                   # slice_end
        ("B", 0),                   # slice_code
        ("B", 2),                   # xyzt_units: mm
        ("4f", (0.0, 0.0, 0.0, 0.0)),  # cal_max, cal_min, slice_duration, toffset
        ("2i", (0, 0)),             # glmax, glmin
        ("80s", b""),               # descrip
        ("24s", b""),               # aux_file
        ("h", 0),                   # qform_code
        ("h", 1),                   # sform_code
        ("6f", (0.0,) * 6),         # quatern_b..d, qoffset_x..z
        ("4f", SROW[0]),
        ("4f", SROW[1]),
        ("4f", SROW[2]),
        ("16s", b""),               # intent_name
        ("4s", b"n+1\0"),           # magic
    ]
    out = b""
    for fmt, value in fields:
        values = value if isinstance(value, tuple) else (value,)
        out += struct.pack(order + fmt, *values)
    assert len(out) == 348
    return out


def image_bytes(order):
    return header(order) + b"\0\0\0\0" + struct.pack(order + "8f", *VOXELS)


def hexdump(data):
    return "".join(data[i:i + 16].hex(" ") + "\n" for i in range(0, len(data), 16))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--big-endian", action="store_true")
    ap.add_argument("--check", metavar="FILE")
    args = ap.parse_args()
    text = hexdump(image_bytes(">" if args.big_endian else "<"))
    if args.check:
        with open(args.check) as f:
            committed = f.read()
        if committed != text:
            print("golden dump differs from the struct-built fixture", file=sys.stderr)
            return 1
        print("golden dump matches")
        return 0
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
