#!/usr/bin/env python3
# Copyright 2026 The mlark Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes model-blob fixtures with a writer independent of the C++ code.

Usage: gen_model_fixture.py OUT_DIR

Produces model_f64.mlrk (full precision) and model_q8.mlrk (8-bit) for a
[3, 4, 2] network whose parameter i (canonical order) is
((i * 37) % 23 - 11) / 8, and prints the checksum sum_i (i + 1) * p_i.
"""

import struct
import sys
import zlib
from pathlib import Path

DIMS = [3, 4, 2]


def parameters():
    count = sum(DIMS[l] * DIMS[l + 1] + DIMS[l + 1] for l in range(len(DIMS) - 1))
    return [((i * 37) % 23 - 11) / 8 for i in range(count)]


def tensors(params):
    out, pos = [], 0
    for l in range(len(DIMS) - 1):
        for size in (DIMS[l] * DIMS[l + 1], DIMS[l + 1]):
            out.append(params[pos:pos + size])
            pos += size
    return out


def header(encoding):
    blob = b"MLRK" + struct.pack("<HBBI", 1, encoding, 1, len(DIMS))
    return blob + b"".join(struct.pack("<I", d) for d in DIMS)


def finish(body):
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def f64_blob(params):
    return finish(header(0) + b"".join(struct.pack("<d", p) for p in params))


def q8_blob(params):
    body = header(1)
    for t in tensors(params):
        lo, hi = min(t), max(t)
        codes = []
        for p in t:
            if hi == lo:
                codes.append(0)
            else:
                # Round half away from zero, as C's round() does.
                x = (p - lo) / (hi - lo) * 255.0
                codes.append(min(255, max(0, int(x + 0.5))))
        body += struct.pack("<dd", lo, hi) + bytes(codes)
    return finish(body)


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
    out.mkdir(parents=True, exist_ok=True)
    params = parameters()
    (out / "model_f64.mlrk").write_bytes(f64_blob(params))
    (out / "model_q8.mlrk").write_bytes(q8_blob(params))
    print("parameters", len(params))
    print("checksum", repr(sum((i + 1) * p for i, p in enumerate(params))))


if __name__ == "__main__":
    main()
