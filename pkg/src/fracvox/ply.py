"""Minimal PLY reader/writer for voxelized point clouds (xyz + rgb).

Supports ``ascii 1.0`` and ``binary_little_endian 1.0``. Only the
``vertex`` element is read; elements declared after it are ignored.
"""
from __future__ import annotations

import os

import numpy as np

from .cloud import RGB, YUV, Frame, yuv_to_rgb
from .errors import DomainError, PLYParseError

_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}
_REQUIRED = ("x", "y", "z", "red", "green", "blue")


def _parse_header(fh):
    first = fh.readline()
    if first.strip() != b"ply":
        raise PLYParseError(f"line 1: expected 'ply', got {first.strip()[:40]!r}")
    fmt = None
    elements: list[tuple[str, int, list]] = []
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            raise PLYParseError(f"line {lineno}: unexpected end of file before end_header")
        line = raw.decode("ascii", errors="replace").strip()
        parts = line.split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        key = parts[0]
        if key == "end_header":
            break
        if key == "format":
            if len(parts) != 3 or parts[1] not in ("ascii", "binary_little_endian"):
                raise PLYParseError(f"line {lineno}: unsupported format {line!r}")
            fmt = parts[1]
        elif key == "element":
            if len(parts) != 3 or not parts[2].isdigit():
                raise PLYParseError(f"line {lineno}: bad element declaration {line!r}")
            elements.append((parts[1], int(parts[2]), []))
        elif key == "property":
            if not elements:
                raise PLYParseError(f"line {lineno}: property before any element {line!r}")
            if len(parts) == 5 and parts[1] == "list":
                elements[-1][2].append((parts[4], None))
            elif len(parts) == 3 and parts[1] in _TYPES:
                elements[-1][2].append((parts[2], _TYPES[parts[1]]))
            else:
                raise PLYParseError(f"line {lineno}: bad property declaration {line!r}")
        else:
            raise PLYParseError(f"line {lineno}: unrecognized header line {line!r}")
    if fmt is None:
        raise PLYParseError("header has no format line")
    return fmt, elements, lineno


def read_ply_points(path) -> tuple[np.ndarray, np.ndarray]:
    """Return raw ``(xyz float64, rgb float64)`` arrays in file order."""
    with open(path, "rb") as fh:
        fmt, elements, header_lines = _parse_header(fh)
        body = fh.read()
    names = [e[0] for e in elements]
    if "vertex" not in names:
        raise PLYParseError("no 'vertex' element in header")
    vi = names.index("vertex")
    for name, _, props in elements[:vi]:
        if any(t is None for _, t in props):
            raise PLYParseError(f"cannot skip list-valued element {name!r} preceding vertex")
    _, count, props = elements[vi]
    pnames = [p[0] for p in props]
    for req in _REQUIRED:
        if req not in pnames:
            raise PLYParseError(f"vertex element lacks property {req!r}")
    if any(t is None for _, t in props):
        raise PLYParseError("list properties on vertex are not supported")

    if fmt == "ascii":
        lines = body.decode("ascii", errors="replace").splitlines()
        skip = sum(e[1] for e in elements[:vi])
        rows = lines[skip:skip + count]
        if len(rows) < count:
            raise PLYParseError(f"expected {count} vertex lines, found {len(rows)}")
        try:
            table = np.array([r.split() for r in rows], dtype=np.float64)
        except ValueError as exc:
            for i, r in enumerate(rows):
                try:
                    vals = [float(v) for v in r.split()]
                except ValueError:
                    raise PLYParseError(f"line {header_lines + skip + i + 1}: {r!r}") from exc
                if len(vals) != len(props):
                    raise PLYParseError(f"line {header_lines + skip + i + 1}: expected {len(props)} values") from exc
            raise PLYParseError(str(exc)) from exc
        table = table.reshape(count, len(props))
        col = {n: table[:, i] for i, n in enumerate(pnames)}
    else:
        offset = 0
        for _, n, pr in elements[:vi]:
            offset += n * np.dtype([(p, "<" + t) for p, t in pr]).itemsize
        dtype = np.dtype([(p, "<" + t) for p, t in props])
        need = offset + count * dtype.itemsize
        if len(body) < need:
            raise PLYParseError(f"binary body truncated: need {need} bytes, have {len(body)}")
        arr = np.frombuffer(body, dtype=dtype, count=count, offset=offset)
        col = {n: arr[n].astype(np.float64) for n in pnames}

    xyz = np.stack([col["x"], col["y"], col["z"]], axis=1)
    rgb = np.stack([col["red"], col["green"], col["blue"]], axis=1)
    return xyz, rgb


def load_ply(path, depth: int | None = None) -> Frame:
    """Load a voxelized PLY as an RGB :class:`Frame`.

    Duplicate coordinates are merged by averaging their colors. ``depth``
    defaults to the smallest depth covering every coordinate.
    """
    xyz, rgb = read_ply_points(path)
    if not np.all(np.isfinite(xyz)) or np.any(xyz != np.round(xyz)):
        raise DomainError(f"{path}: non-integer voxel coordinate")
    if len(xyz) and xyz.min() < 0:
        raise DomainError(f"{path}: negative voxel coordinate")
    return Frame.from_points(xyz.astype(np.int64), rgb, depth=depth, color_space=RGB)


def write_ply(path, coords, colors, binary: bool = True, comment: str | None = None) -> None:
    """Write integer coordinates and uchar colors (rounded and clipped)."""
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
    colors = np.clip(np.rint(np.asarray(colors, dtype=np.float64).reshape(-1, 3)), 0, 255).astype(np.uint8)
    head = ["ply", "format %s 1.0" % ("binary_little_endian" if binary else "ascii")]
    if comment:
        head.append(f"comment {comment}")
    head += [
        f"element vertex {len(coords)}",
        "property int x", "property int y", "property int z",
        "property uchar red", "property uchar green", "property uchar blue",
        "end_header",
    ]
    with open(path, "wb") as fh:
        fh.write(("\n".join(head) + "\n").encode("ascii"))
        if binary:
            rec = np.empty(len(coords), dtype=[("x", "<i4"), ("y", "<i4"), ("z", "<i4"),
                                               ("r", "u1"), ("g", "u1"), ("b", "u1")])
            rec["x"], rec["y"], rec["z"] = coords.T
            rec["r"], rec["g"], rec["b"] = colors.T
            fh.write(rec.tobytes())
        else:
            for (x, y, z), (r, g, b) in zip(coords.tolist(), colors.tolist()):
                fh.write(f"{x} {y} {z} {r} {g} {b}\n".encode("ascii"))


def save_frame(path, frame: Frame, binary: bool = True) -> None:
    if frame.color_space == YUV:
        frame = yuv_to_rgb(frame)
    write_ply(path, frame.coords, frame.attrs, binary=binary)


def list_plys(directory) -> list[str]:
    return sorted(os.path.join(directory, f) for f in os.listdir(directory) if f.lower().endswith(".ply"))
