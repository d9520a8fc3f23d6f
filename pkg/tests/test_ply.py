import numpy as np
import pytest

from fracvox.cloud import RGB
from fracvox.errors import DomainError, PLYParseError
from fracvox.ply import load_ply, write_ply


def _ascii(path, rows, extra_header=""):
    head = ["ply", "format ascii 1.0", f"element vertex {len(rows)}",
            "property float x", "property float y", "property float z",
            "property uchar red", "property uchar green", "property uchar blue"]
    if extra_header:
        head.append(extra_header)
    path.write_text("\n".join(head + ["end_header"] + [" ".join(map(str, r)) for r in rows]) + "\n")
    return path


def test_minimal_file(tmp_path):
    f = load_ply(_ascii(tmp_path / "a.ply", [(0, 0, 0, 255, 0, 0), (1, 0, 0, 0, 255, 0)]))
    assert len(f) == 2 and f.depth == 1 and f.color_space == RGB
    assert f.attrs.tolist() == [[255, 0, 0], [0, 255, 0]]


def test_duplicate_merge(tmp_path):
    f = load_ply(_ascii(tmp_path / "d.ply", [(3, 3, 3, 100, 100, 100), (3, 3, 3, 200, 200, 200)]))
    assert len(f) == 1
    assert f.attrs[0].tolist() == [150, 150, 150]


def test_negative_and_fractional_coords(tmp_path):
    with pytest.raises(DomainError):
        load_ply(_ascii(tmp_path / "n.ply", [(-1, 0, 0, 1, 1, 1)]))
    with pytest.raises(DomainError):
        load_ply(_ascii(tmp_path / "f.ply", [(0.5, 0, 0, 1, 1, 1)]))


def test_depth_override(tmp_path):
    p = _ascii(tmp_path / "a.ply", [(5, 0, 0, 1, 1, 1)])
    assert load_ply(p).depth == 3
    assert load_ply(p, depth=10).depth == 10
    with pytest.raises(DomainError):
        load_ply(p, depth=2)


def test_malformed_header_names_line(tmp_path):
    p = tmp_path / "bad.ply"
    p.write_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nbogus line here\nend_header\n0\n")
    with pytest.raises(PLYParseError, match="line 5"):
        load_ply(p)


def test_missing_color_property(tmp_path):
    p = tmp_path / "nc.ply"
    p.write_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                 "property float z\nend_header\n0 0 0\n")
    with pytest.raises(PLYParseError):
        load_ply(p)


@pytest.mark.parametrize("binary", [True, False])
def test_write_read_roundtrip_and_determinism(tmp_path, binary):
    rng = np.random.default_rng(3)
    coords = rng.integers(0, 1024, (500, 3))
    colors = rng.integers(0, 256, (500, 3))
    p = tmp_path / "rt.ply"
    write_ply(p, coords, colors, binary=binary)
    a, b = load_ply(p), load_ply(p)
    assert a.canonical_bytes() == b.canonical_bytes()
    uniq = np.unique(coords, axis=0)
    assert len(a) == len(uniq)
    assert a.depth == 10


def test_binary_with_extra_properties(tmp_path):
    # normals between position and color, double coordinates
    dt = np.dtype([("x", "<f8"), ("y", "<f8"), ("z", "<f8"), ("nx", "<f4"), ("ny", "<f4"), ("nz", "<f4"),
                   ("red", "u1"), ("green", "u1"), ("blue", "u1"), ("alpha", "u1")])
    data = np.zeros(2, dt)
    data["x"] = [1, 2]
    data["red"] = [10, 20]
    head = ("ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex 2\n"
            "property double x\nproperty double y\nproperty double z\n"
            "property float nx\nproperty float ny\nproperty float nz\n"
            "property uchar red\nproperty uchar green\nproperty uchar blue\nproperty uchar alpha\nend_header\n")
    p = tmp_path / "bin.ply"
    p.write_bytes(head.encode() + data.tobytes())
    f = load_ply(p)
    assert f.coords.tolist() == [[1, 0, 0], [2, 0, 0]]
    assert f.attrs[:, 0].tolist() == [10, 20]
