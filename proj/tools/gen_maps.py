#!/usr/bin/env python3
"""Regenerates the bundled map documents under data/maps."""

import json
import math
import random
import sys
from pathlib import Path

SIZE = 128.0


def rect(x0, y0, w, h):
    return [[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]]


def ell(x0, y0, w, h, cw, ch):
    # L-shape: a w x h box with the top-right cw x ch corner removed.
    return [[x0, y0], [x0 + w, y0], [x0 + w, y0 + h - ch], [x0 + w - cw, y0 + h - ch],
            [x0 + w - cw, y0 + h], [x0, y0 + h]]


def edge_mid(poly, i):
    a, b = poly[i], poly[(i + 1) % len(poly)]
    return [(a[0] + b[0]) / 2, (a[1] + b[1]) / 2]


def bbox(poly):
    xs = [p[0] for p in poly]
    ys = [p[1] for p in poly]
    return min(xs), min(ys), max(xs), max(ys)


def overlaps(a, b, gap):
    return not (a[2] + gap <= b[0] or b[2] + gap <= a[0] or a[3] + gap <= b[1] or b[3] + gap <= a[1])


def landmark(n, poly, entrance_edges):
    return {"id": f"b{n}", "name": f"Building {n}", "polygon": poly,
            "entrances": [edge_mid(poly, i) for i in entrance_edges]}


def camera(i, x, y, heading_deg, rng=45.0):
    return {"id": f"cam{i}", "position": [x, y], "heading_deg": heading_deg, "fov_deg": 45.0, "range_m": rng}


def perimeter_cameras(rng_m, extra):
    # Corners look diagonally inward, edge midpoints straight inward.
    spots = [(2, 2, 45), (126, 2, 135), (126, 126, 225), (2, 126, 315),
             (64, 2, 90), (126, 64, 180), (64, 126, 270), (2, 64, 0)]
    cams = [camera(i + 1, x, y, h, rng_m) for i, (x, y, h) in enumerate(spots)]
    cams += [camera(len(cams) + i + 1, x, y, h, rng_m) for i, (x, y, h) in enumerate(extra)]
    return cams


def grid_city(seed):
    # Four by four blocks split by roads every 32 m; one building per block.
    r = random.Random(seed)
    lms, n = [], 0
    for bx in range(4):
        for by in range(4):
            if r.random() < 0.2:
                continue
            n += r.randint(1, 3)
            w, h = r.randint(6, 20), r.randint(6, 20)
            x0 = bx * 32 + 5 + r.randint(0, 22 - w)
            y0 = by * 32 + 5 + r.randint(0, 22 - h)
            poly = rect(x0, y0, w, h)
            edges = r.sample(range(4), r.randint(1, 2))
            lms.append(landmark(n, poly, sorted(edges)))
    roads = [[[k * 32.0, 0.0], [k * 32.0, SIZE]] for k in (1, 2, 3)]
    roads += [[[0.0, k * 32.0], [SIZE, k * 32.0]] for k in (1, 2, 3)]
    cams = perimeter_cameras(70.0, [(64, 64, 90), (64, 64, 270)])
    return lms, roads, cams


def scattered(seed, shapes):
    # Rejection-placed buildings of mixed scale with a 4 m clearance.
    r = random.Random(seed)
    lms, boxes, n = [], [], 0
    for kind, lo, hi in shapes:
        for _ in range(1000):
            w, h = r.randint(lo, hi), r.randint(lo, hi)
            x0, y0 = r.randint(4, int(SIZE) - 4 - w), r.randint(4, int(SIZE) - 4 - h)
            if kind == "L" and min(w, h) >= 12:
                poly = ell(x0, y0, w, h, w // 2, h // 2)
            else:
                poly = rect(x0, y0, w, h)
            b = bbox(poly)
            if any(overlaps(b, o, 5) for o in boxes):
                continue
            boxes.append(b)
            n += r.randint(1, 2)
            edges = r.sample(range(len(poly)), min(len(poly), r.randint(1, 3)))
            lms.append(landmark(n, poly, sorted(edges)))
            break
    return lms


def river_town(seed):
    shapes = [("L", 14, 26)] * 4 + [("R", 6, 16)] * 7
    lms = scattered(seed, shapes)
    roads = [[[0.0, 60.0], [50.0, 70.0], [128.0, 66.0]], [[70.0, 0.0], [64.0, 128.0]]]
    cams = perimeter_cameras(70.0, [(66, 66, 0), (66, 66, 180)])
    return lms, roads, cams


def campus(seed):
    shapes = [("R", 24, 34)] * 3 + [("L", 16, 24)] * 2 + [("R", 4, 7)] * 6
    lms = scattered(seed, shapes)
    roads = [[[0.0, 20.0], [128.0, 20.0]], [[20.0, 20.0], [20.0, 128.0]], [[20.0, 100.0], [128.0, 100.0]]]
    cams = perimeter_cameras(70.0, [(20, 20, 45), (20, 100, 0)])
    return lms, roads, cams


def demo():
    b4, b5, b6 = rect(18, 7, 11, 16), rect(21, 39, 16, 12), rect(39, 7, 10, 11)
    lms = [
        {"id": "b4", "name": "Building 4", "polygon": b4, "entrances": [edge_mid(b4, 1)]},
        {"id": "b5", "name": "Building 5", "polygon": b5, "entrances": [edge_mid(b5, 0)]},
        {"id": "b6", "name": "Building 6", "polygon": b6, "entrances": [edge_mid(b6, 3)]},
    ]
    roads = [[[0.0, 30.0], [64.0, 30.0]]]
    cams = [camera(1, 2, 30, 0, 60)]
    return {"version": 1, "id": "demo", "extent": {"width": 64.0, "height": 64.0}, "landmarks": lms,
            "roads": roads, "cameras": cams}


def document(map_id, parts):
    lms, roads, cams = parts
    return {"version": 1, "id": map_id, "extent": {"width": SIZE, "height": SIZE}, "landmarks": lms,
            "roads": roads, "cameras": cams}


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "maps")
    out.mkdir(parents=True, exist_ok=True)
    docs = {
        "grid_city": document("grid_city", grid_city(11)),
        "river_town": document("river_town", river_town(23)),
        "campus": document("campus", campus(37)),
        "demo": demo(),
    }
    for name, doc in docs.items():
        (out / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
