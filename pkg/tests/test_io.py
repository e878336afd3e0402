"""Tests for stmmreg.io."""

import logging
import numpy as np
import pandas as pd
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal
from stmmreg.geometry import PointSet, RigidTransform, orthogonality_drift
from stmmreg.io import (
    PlyFormatError,
    TransformSchemaError,
    UnsupportedPlyFormatError,
    downsample,
    read_json,
    read_ply,
    read_ply_cloud,
    read_transforms,
    transforms_from_json,
    transforms_to_json,
    write_json,
    write_ply,
    write_trace,
    write_transforms,
)

ASCII_WITH_EXTRAS = b"""ply
format ascii 1.0
comment scanner output
element vertex 3
property float x
property float y
property float z
property float nx
property float ny
property float nz
property uchar red
element face 1
property list uchar int vertex_indices
end_header
0 0 0 0 0 1 255
1.5 0 0 0 0 1 128
0 2.25 -1 0 0 1 0
3 0 1 2
"""


def _binary_with_normals(points: np.ndarray) -> bytes:
    header = (
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property float nx\nproperty float ny\nproperty float nz\n"
        "element face 0\nproperty list uchar int vertex_indices\nend_header\n"
    ).format(len(points))
    table = np.zeros(len(points), dtype=[(n, "<f4") for n in ("x", "y", "z", "nx", "ny", "nz")])
    for k, axis in enumerate("xyz"):
        table[axis] = points[:, k]
    table["nz"] = 1.0
    return header.encode("ascii") + table.tobytes()


def test_reads_ascii_and_skips_other_properties(tmp_path) -> None:
    path = tmp_path / "scan.ply"
    path.write_bytes(ASCII_WITH_EXTRAS)
    cloud = read_ply_cloud(path)
    assert cloud.count == 3 and cloud.format == "ascii"
    assert cloud.ignored == ("nx", "ny", "nz", "red")
    assert_array_equal(cloud.points, [[0, 0, 0], [1.5, 0, 0], [0, 2.25, -1]])


def test_reads_binary_little_endian(tmp_path) -> None:
    points = np.array([[0.5, -1.0, 2.0], [3.0, 4.0, 5.0]], dtype=np.float32)
    path = tmp_path / "scan.ply"
    path.write_bytes(_binary_with_normals(points))
    view = read_ply(path, view_id=7)
    assert view.view_id == 7 and view.name == str(path)
    assert_array_equal(view.points, points.astype(float))


def test_big_endian_is_unsupported(tmp_path) -> None:
    path = tmp_path / "big.ply"
    path.write_bytes(b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n")
    with pytest.raises(UnsupportedPlyFormatError) as info:
        read_ply_cloud(path)
    assert info.value.line == 2


@pytest.mark.parametrize(
    "content, line",
    [
        (b"plx\nformat ascii 1.0\nend_header\n", 1),
        (b"ply\nformat ascii 1.0\nelement vertex 1\nproperty floot x\nend_header\n0\n", 4),
        (b"ply\nformat ascii 2.0\nelement vertex 1\nend_header\n", 2),
        (b"ply\nformat ascii 1.0\nproperty float x\nend_header\n", 3),
        (b"ply\nformat ascii 1.0\nelement vertex one\nend_header\n", 3),
    ],
)
def test_malformed_header_names_the_line(tmp_path, content: bytes, line: int) -> None:
    path = tmp_path / "bad.ply"
    path.write_bytes(content)
    with pytest.raises(PlyFormatError) as info:
        read_ply_cloud(path)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


@pytest.mark.parametrize(
    "content",
    [
        b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nend_header\n0 0\n1 1\n",
        b"ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nproperty double y\n"
        b"property double z\nend_header\n0 0 0\n",
        b"ply\nformat ascii 1.0\nelement vertex 1\nproperty int x\nproperty int y\n"
        b"property int z\nend_header\n0 0 0\n",
        b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
        b"property float z\nend_header\n0 zero 0\n",
        b"ply\nformat ascii 1.0\nelement face 1\nend_header\n",
        b"ply\nelement vertex 1\n",
    ],
)
def test_malformed_files_raise(tmp_path, content: bytes) -> None:
    path = tmp_path / "bad.ply"
    path.write_bytes(content)
    with pytest.raises(PlyFormatError):
        read_ply_cloud(path)


def test_non_finite_vertices_are_dropped(tmp_path, caplog) -> None:
    path = tmp_path / "holes.ply"
    write_ply(np.array([[0.0, 0.0, 0.0], [np.nan, 1.0, 1.0], [2.0, np.inf, 0.0], [1.0, 1.0, 1.0]]), path)
    with caplog.at_level(logging.WARNING, logger="stmmreg.io"):
        cloud = read_ply_cloud(path)
    assert (cloud.count, cloud.rejected) == (2, 2)
    assert_array_equal(cloud.points, [[0, 0, 0], [1, 1, 1]])
    assert "non-finite" in caplog.text


def test_only_non_finite_vertices_is_an_error(tmp_path) -> None:
    path = tmp_path / "void.ply"
    write_ply(np.array([[np.nan, 0.0, 0.0]]), path)
    with pytest.raises(PlyFormatError):
        read_ply(path)


@pytest.mark.parametrize("fmt", ["ascii", "binary-le"])
def test_written_coordinates_read_back_exactly(tmp_path, rng, fmt: str) -> None:
    points = rng.normal(scale=1e3, size=(200, 3)) * np.exp(rng.uniform(-20, 20, size=(200, 1)))
    path = tmp_path / f"{fmt}.ply"
    write_ply(PointSet(1, points), path, format=fmt)
    assert_array_equal(read_ply(path).points, points)


def test_empty_cloud_writes_a_valid_header(tmp_path) -> None:
    path = tmp_path / "empty.ply"
    write_ply(np.zeros((0, 3)), path)
    assert read_ply_cloud(path).count == 0
    assert b"element vertex 0" in path.read_bytes()


def test_unknown_write_format(tmp_path) -> None:
    with pytest.raises(ValueError):
        write_ply(np.zeros((1, 3)), tmp_path / "x.ply", format="binary-be")


def test_downsample_keeps_order_and_is_seeded(cloud) -> None:
    view = PointSet(2, cloud)
    small = downsample(view, 30, seed=4)
    again = downsample(view, 30, seed=4)
    assert len(small) == 30 and small.view_id == 2
    assert_array_equal(small.points, again.points)
    kept = [int(np.flatnonzero(np.all(cloud == p, axis=1))[0]) for p in small.points]
    assert kept == sorted(kept)
    assert downsample(view, len(cloud)) is view
    with pytest.raises(ValueError):
        downsample(view, 0)


def test_transforms_round_trip(tmp_path) -> None:
    transforms = [
        RigidTransform.identity(),
        RigidTransform.from_axis_angle([1, -2, 0.5], 0.8, [0.1, 1e-9, -3.0]),
    ]
    path = tmp_path / "transforms.json"
    write_transforms(transforms, path)
    loaded = read_transforms(path)
    assert list(loaded) == [1, 2]
    for view, transform in enumerate(transforms, start=1):
        assert_array_equal(loaded[view].rotation, transform.rotation)
        assert_array_equal(loaded[view].translation, transform.translation)


def test_transforms_keep_view_ids_of_a_mapping() -> None:
    records = transforms_to_json({5: RigidTransform.identity(), 2: RigidTransform.identity()})
    assert [r["view"] for r in records] == [2, 5]
    assert list(transforms_from_json(records[::-1])) == [2, 5]


def test_small_rotation_drift_is_projected_away() -> None:
    rotation = RigidTransform.from_axis_angle([0, 0, 1], 0.4).rotation + 1e-6
    loaded = transforms_from_json([{"view": 1, "rotation": rotation.tolist(), "translation": [0, 0, 0]}])
    assert orthogonality_drift(loaded[1].rotation) < 1e-12
    assert_allclose(loaded[1].rotation, rotation, atol=1e-5)


def _record(**changes) -> dict:
    record = {"view": 1, "rotation": np.eye(3).tolist(), "translation": [0.0, 0.0, 0.0]}
    record.update(changes)
    return record


@pytest.mark.parametrize(
    "document",
    [
        {"view": 1},
        [[1, 2, 3]],
        [{"view": 1, "rotation": np.eye(3).tolist()}],
        [_record(view=0)],
        [_record(view=True)],
        [_record(view="1")],
        [_record(), _record()],
        [_record(rotation=np.diag([1.0, 1.0, -1.0]).tolist())],
        [_record(rotation=(1.01 * np.eye(3)).tolist())],
        [_record(rotation=[[1, 0], [0, 1]])],
        [_record(rotation="identity")],
        [_record(translation=[0.0, 0.0])],
        [_record(translation=[0.0, None, 0.0])],
    ],
)
def test_transform_schema_errors(document) -> None:
    with pytest.raises(TransformSchemaError):
        transforms_from_json(document)


def test_invalid_json_file(tmp_path) -> None:
    path = tmp_path / "broken.json"
    path.write_text("[{")
    with pytest.raises(TransformSchemaError):
        read_transforms(path)


def test_trace_csv(tmp_path) -> None:
    path = tmp_path / "trace.csv"
    write_trace([-10.5, -3.25, -3.125], path)
    assert path.read_text().splitlines()[0] == "iteration,q"
    frame = pd.read_csv(path)
    assert frame["iteration"].tolist() == [1, 2, 3]
    assert frame["q"].tolist() == [-10.5, -3.25, -3.125]


def test_json_helpers_accept_numpy(tmp_path) -> None:
    path = tmp_path / "data.json"
    write_json({"b": np.arange(3), "a": np.float64(0.25)}, path)
    assert read_json(path) == {"a": 0.25, "b": [0, 1, 2]}
    assert path.read_text().index('"a"') < path.read_text().index('"b"')


VALID_ASCII = (
    b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
    b"property float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n"
    b"0 0 0\n1 2 3\n"
)


def _splice(base: bytes):
    return st.tuples(st.integers(0, len(base)), st.integers(0, 8), st.binary(max_size=12)).map(
        lambda edit: base[: edit[0]] + edit[2] + base[edit[0] + edit[1] :]
    )


ply_bytes = st.one_of(
    st.binary(max_size=300),
    st.binary(max_size=300).map(lambda tail: b"ply\n" + tail),
    _splice(VALID_ASCII),
    _splice(_binary_with_normals(np.arange(6, dtype=np.float32).reshape(2, 3))),
)


@settings(max_examples=300, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(ply_bytes)
def test_ply_reader_is_total(tmp_path, content: bytes) -> None:
    path = tmp_path / "fuzz.ply"
    path.write_bytes(content)
    try:
        cloud = read_ply_cloud(path)
    except PlyFormatError:
        return
    assert cloud.points.shape == (cloud.count, 3)
    assert np.all(np.isfinite(cloud.points))


@settings(max_examples=300, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.one_of(st.binary(max_size=200), st.text(alphabet='[]{}",:0123456789.-eE truefalsnviwoa', max_size=200)))
def test_transform_reader_is_total(tmp_path, content) -> None:
    path = tmp_path / "fuzz.json"
    if isinstance(content, str):
        path.write_text(content, encoding="utf-8")
    else:
        path.write_bytes(content)
    try:
        transforms = read_transforms(path)
    except TransformSchemaError:
        return
    assert all(isinstance(view, int) for view in transforms)


def test_deeply_nested_json_is_a_schema_error(tmp_path) -> None:
    path = tmp_path / "deep.json"
    path.write_text("[" * 100000 + "]" * 100000)
    with pytest.raises(TransformSchemaError):
        read_transforms(path)
    path.write_text('[{"view": 1, "rotation": ' + "[" * 5000 + "]" * 5000 + ', "translation": [0, 0, 0]}]')
    with pytest.raises(TransformSchemaError):
        read_transforms(path)
