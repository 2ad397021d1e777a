#!/usr/bin/env python3
"""Hand enumeration of parameters and FLOPs for the tiny default models.

Rewrites the architecture as an explicit layer table and sums the documented
per-layer costs. The C++ tests pin the printed constants; --check HEADER
verifies the committed header against this enumeration.
"""
import math
import re
import sys

IN_CH, CLASSES = 4, 5
C1, C2, C3 = 8, 16, 32
E1, E2 = 64, 96
G, K = 5, 3
NB = G + K
SIDE = 32  # input extent per axis
BATCH = 1


def vox(level):
    return (SIDE >> level) ** 3 * BATCH


def eca_k(c):
    t = int(abs((math.log2(c) + 1) / 2))
    if t % 2 == 0:
        t += 1
    return max(t, 3)


def conv(cin, cout, k, level, stride=1):
    params = cout * cin * k ** 3 + cout
    out = vox(level) // stride ** 3
    return params, 2 * cout * cin * k ** 3 * out + cout * out


def inorm(c, level):
    return 2 * c, 7 * c * vox(level)


def relu(c, level):
    return 0, c * vox(level)


def block(cin, cout, level):
    parts = [conv(cin, cout, 3, level), inorm(cout, level), relu(cout, level),
             conv(cout, cout, 3, level), inorm(cout, level), relu(cout, level)]
    return sum(p for p, _ in parts), sum(f for _, f in parts)


def pool(c, level):  # reads level, writes level + 1
    return 0, 7 * c * vox(level + 1)


def up(c, level):  # reads level, writes level - 1
    return 0, 15 * c * vox(level - 1)


def tok(cin, e, stride, level):
    n = vox(level) // stride ** 3
    params = e * cin * 27 + e + e * e + e * e * NB + e * 27 + 2 * e
    flops = 2 * e * cin * 27 * n + e * n               # patch conv + bias
    flops += (2 * K + 5 * K * (K + 1) // 2) * n * e    # basis functions
    flops += 2 * n * e * e * NB                        # spline mixing
    flops += 5 * n * e + 2 * n * e * e + n * e         # silu, base matmul, add
    flops += 2 * e * 27 * n + n * e + 7 * n * e        # depth-wise conv, residual, layer norm
    return params, flops


def eca(c, level):
    k = eca_k(c)
    v = vox(level) // BATCH
    return k, BATCH * (c * v + 2 * k * c + 4 * c + c * v)


def model(variant):
    layers = []
    layers.append(block(IN_CH, C1, 0))
    layers.append(pool(C1, 0))
    layers.append(block(C1, C2, 1))
    layers.append(pool(C2, 1))
    layers.append(block(C2, C3, 2))
    layers.append(tok(C3, E1, 2, 2))
    layers.append(tok(E1, E2, 2, 3))
    layers.append(up(E2, 4))
    layers.append(tok(E2 + E1, E1, 1, 3))
    layers.append(up(E1, 3))
    layers.append(tok(E1 + C3, C3, 1, 2))
    skip1, skip2 = C1, C2
    if variant in ("ukan_pfa", "ukan_ep_eca_after_pfa"):
        skip2 = C3 + C2
        skip1 = skip2 + C1
        layers.append(up(C3, 2))
        if variant == "ukan_ep_eca_after_pfa":
            layers.append(eca(skip2, 1))
        layers.append(up(skip2, 1))
        if variant == "ukan_ep_eca_after_pfa":
            layers.append(eca(skip1, 0))
    elif variant == "ukan_eca_after_skip":
        layers.append(eca(C2, 1))
        layers.append(eca(C1, 0))
    d2 = (C3 + skip2) // 2
    layers.append(up(C3, 2))
    layers.append(block(C3 + skip2, d2, 1))
    d1 = (d2 + skip1) // 2
    layers.append(up(d2, 1))
    layers.append(block(d2 + skip1, d1, 0))
    layers.append(conv(d1, CLASSES, 1, 0))
    return sum(p for p, _ in layers), sum(f for _, f in layers)


CONSTANTS = {
    "ukan": ("kParamsUkan", "kFlopsUkan"),
    "ukan_pfa": ("kParamsUkanPfa", "kFlopsUkanPfa"),
    "ukan_ep_eca_after_pfa": ("kParamsUkanEp", "kFlopsUkanEp"),
    "ukan_eca_after_skip": ("kParamsEcaAfterSkip", "kFlopsEcaAfterSkip"),
}


def check(header_path):
    with open(header_path) as f:
        pinned = {k: int(v) for k, v in re.findall(r"(k\w+) = (\d+);", f.read())}
    ok = True
    for name, (pk, fk) in CONSTANTS.items():
        p, fl = model(name)
        for key, value in ((pk, p), (fk, fl)):
            if pinned.get(key) != value:
                print(f"{key}: header {pinned.get(key)}, enumeration {value}", file=sys.stderr)
                ok = False
    print("constants match" if ok else "constants differ")
    return 0 if ok else 1


if __name__ == "__main__":
    if len(sys.argv) == 3 and sys.argv[1] == "--check":
        sys.exit(check(sys.argv[2]))
    for name in CONSTANTS:
        p, f = model(name)
        print(f"{name} params {p} flops {f}")
