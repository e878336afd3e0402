"""Helper functions for reading and writing files.

Point clouds are read from and written to PLY, transforms to JSON and Q
trajectories to CSV. The formats are described in `docs/formats.md`.
"""

from typing import TYPE_CHECKING, Dict, List, Mapping, Optional, Sequence, Tuple, Union
from dataclasses import dataclass, field
import os
import json
import codecs
import logging
import numpy as np
import pandas as pd
from .geometry import (
    InvalidTransformError,
    PointSet,
    RigidTransform,
    orthogonality_drift,
    orthonormalize,
)

if TYPE_CHECKING:
    from .solver import RegistrationReport

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

# largest |R^T R - I| entry accepted from a transforms file.
TRANSFORM_REJECT_DRIFT: float = 1e-3
# drift above which a loaded rotation is projected back onto SO(3).
TRANSFORM_POLAR_DRIFT: float = 1e-12

PLY_TYPES: Dict[str, str] = {
    "char": "i1",
    "int8": "i1",
    "uchar": "u1",
    "uint8": "u1",
    "short": "i2",
    "int16": "i2",
    "ushort": "u2",
    "uint16": "u2",
    "int": "i4",
    "int32": "i4",
    "uint": "u4",
    "uint32": "u4",
    "float": "f4",
    "float32": "f4",
    "double": "f8",
    "float64": "f8",
}
PLY_FORMATS = {"ascii": "ascii", "binary-le": "binary_little_endian"}


class PlyFormatError(ValueError):
    """The bytes are not a PLY file this reader understands."""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedPlyFormatError(PlyFormatError):
    """A valid PLY encoding that is not supported (binary big-endian)."""


class TransformSchemaError(ValueError):
    """A transforms JSON document does not follow the schema."""


def jsonize(inp: object) -> object:
    """
    Make numpy values JSON serialisable, recursing into dicts and lists.

    Args:
        inp (object): input data.

    Returns:
        object: data built from plain Python types.

    Examples:
        >>> out = jsonize({"a": np.array([1, 2, 3]), "b": [np.float64(0.5)]})
        >>> isinstance(out["a"], list), type(out["b"][0]).__name__
        (True, 'float')
    """
    if isinstance(inp, dict):
        return {key: jsonize(value) for key, value in inp.items()}
    if isinstance(inp, (list, tuple)):
        return [jsonize(value) for value in inp]
    if isinstance(inp, np.ndarray):
        if np.issubdtype(inp.dtype, np.number) or np.issubdtype(inp.dtype, np.bool_):
            return inp.tolist()
        return np.array_str(inp)
    if isinstance(inp, np.generic):
        return inp.item()
    return inp


def read_json(file_name: PathLike) -> object:
    """
    Read JSON file.

    Args:
        file_name (PathLike): file path.

    Returns:
        object: JSON serialized object.
    """
    with codecs.open(str(file_name), "rb", encoding="utf-8") as handle:
        json_object = json.load(handle)
    return json_object


def write_json(json_object: object, file_name: PathLike) -> None:
    """
    JSON serializable object to json file.

    Args:
        json_object (object): JSON serializable object (numpy values allowed).
        file_name (PathLike): Path to file.
    """
    with codecs.open(str(file_name), "w", encoding="utf-8") as handle:
        json.dump(jsonize(json_object), handle, sort_keys=True, indent=4)


@dataclass(frozen=True, eq=False)
class PlyCloud:
    """
    Vertices read from a PLY file.

    Args:
        count (int): number of vertices kept.
        points (np.ndarray): (count, 3) finite coordinates, file order.
        ignored (Tuple[str, ...]): vertex properties other than x, y, z.
        rejected (int): vertices dropped for non-finite coordinates.
        format (str): "ascii" or "binary_little_endian".
    """

    count: int
    points: np.ndarray
    ignored: Tuple[str, ...] = ()
    rejected: int = 0
    format: str = "ascii"

    def __post_init__(self) -> None:
        assert self.points.shape == (self.count, 3)


@dataclass
class _Element:
    name: str
    count: int
    properties: List[Tuple[str, str]] = field(default_factory=list)  # (name, dtype)
    has_list: bool = False


def _parse_header(data: bytes) -> Tuple[str, List[_Element], int, int]:
    """Return the format, the elements, the body offset and the header line count."""
    if not data.startswith(b"ply"):
        raise PlyFormatError("missing 'ply' magic number", line=1)
    end = data.find(b"end_header")
    if end < 0:
        raise PlyFormatError("no 'end_header' line")
    newline = data.find(b"\n", end)
    body_start = len(data) if newline < 0 else newline + 1
    lines = data[:body_start].decode("ascii").splitlines()
    fmt: Optional[str] = None
    elements: List[_Element] = []
    for number, raw in enumerate(lines, start=1):
        words = raw.split()
        if not words or words[0] in ("ply", "comment", "obj_info"):
            continue
        keyword = words[0]
        if keyword == "format":
            if len(words) != 3 or words[2] != "1.0":
                raise PlyFormatError(f"bad format line {raw!r}", line=number)
            fmt = words[1]
            if fmt == "binary_big_endian":
                raise UnsupportedPlyFormatError("binary_big_endian PLY is not supported", line=number)
            if fmt not in PLY_FORMATS.values():
                raise PlyFormatError(f"unknown format {fmt!r}", line=number)
        elif keyword == "element":
            if len(words) != 3 or not words[2].isdigit():
                raise PlyFormatError(f"bad element line {raw!r}", line=number)
            elements.append(_Element(words[1], int(words[2])))
        elif keyword == "property":
            if not elements:
                raise PlyFormatError("property before any element", line=number)
            if len(words) == 5 and words[1] == "list":
                if words[2] not in PLY_TYPES or words[3] not in PLY_TYPES:
                    raise PlyFormatError(f"unknown list type in {raw!r}", line=number)
                elements[-1].has_list = True
                elements[-1].properties.append((words[4], "list"))
            elif len(words) == 3 and words[1] in PLY_TYPES:
                elements[-1].properties.append((words[2], PLY_TYPES[words[1]]))
            else:
                raise PlyFormatError(f"bad property line {raw!r}", line=number)
        elif keyword == "end_header":
            break
        else:
            raise PlyFormatError(f"unexpected header keyword {keyword!r}", line=number)
    if fmt is None:
        raise PlyFormatError("header has no format line")
    return fmt, elements, body_start, len(lines)


def _vertex_element(elements: List[_Element]) -> Tuple[int, _Element]:
    for position, element in enumerate(elements):
        if element.name == "vertex":
            names = [name for name, _ in element.properties]
            for axis in "xyz":
                if axis not in names:
                    raise PlyFormatError(f"vertex element has no {axis!r} property")
                if dict(element.properties)[axis] not in ("f4", "f8"):
                    raise PlyFormatError(f"vertex property {axis!r} must be float or double")
            return position, element
    raise PlyFormatError("no vertex element")


def _read_ascii(body: bytes, elements: List[_Element], header_lines: int) -> np.ndarray:
    position, vertex = _vertex_element(elements)
    rows = body.decode("ascii").splitlines()
    skip = sum(element.count for element in elements[:position])
    names = [name for name, _ in vertex.properties]
    columns = [names.index(axis) for axis in "xyz"]
    kinds = [kind for _, kind in vertex.properties]
    if "list" in kinds and max(columns) > kinds.index("list"):
        raise PlyFormatError("list properties before x, y, z in a vertex are not supported")
    if len(rows) < skip + vertex.count:
        raise PlyFormatError(
            f"expected {vertex.count} vertices, file ends after {max(len(rows) - skip, 0)}",
            line=header_lines + len(rows),
        )
    points = np.empty((vertex.count, 3))
    for k in range(vertex.count):
        words = rows[skip + k].split()
        try:
            points[k] = [float(words[c]) for c in columns]
        except (ValueError, IndexError) as err:
            raise PlyFormatError(f"bad vertex row: {err}", line=header_lines + skip + k + 1) from err
    return points


def _read_binary(body: bytes, elements: List[_Element]) -> np.ndarray:
    position, vertex = _vertex_element(elements)
    offset = 0
    for element in elements[:position]:
        if element.has_list:
            raise PlyFormatError(f"cannot skip list element {element.name!r} before the vertices")
        offset += element.count * np.dtype([(n, "<" + t) for n, t in element.properties]).itemsize
    if vertex.has_list:
        raise PlyFormatError("binary vertex elements with list properties are not supported")
    dtype = np.dtype([(name, "<" + kind) for name, kind in vertex.properties])
    needed = offset + vertex.count * dtype.itemsize
    if len(body) < needed:
        raise PlyFormatError(f"binary body has {len(body)} bytes, need {needed}")
    table = np.frombuffer(body, dtype=dtype, count=vertex.count, offset=offset)
    return np.column_stack([table[axis].astype(float) for axis in "xyz"])


def read_ply_cloud(path: PathLike) -> PlyCloud:
    """
    Read the vertex coordinates of an ASCII or binary little-endian PLY file.

    Faces, other elements and vertex properties besides x, y and z are
    ignored. Vertices with non-finite coordinates are dropped with a warning.

    Args:
        path (PathLike): file to read.

    Raises:
        UnsupportedPlyFormatError: for binary big-endian files.
        PlyFormatError: for anything else that cannot be parsed.
        OSError: if the file cannot be opened.

    Returns:
        PlyCloud: coordinates in file order.
    """
    with open(path, "rb") as handle:
        data = handle.read()
    try:
        fmt, elements, body_start, header_lines = _parse_header(data)
        if fmt == "ascii":
            points = _read_ascii(data[body_start:], elements, header_lines)
        else:
            points = _read_binary(data[body_start:], elements)
    except PlyFormatError:
        raise
    except (ValueError, IndexError, OverflowError) as err:
        raise PlyFormatError(f"{path}: {err}") from err
    finite = np.all(np.isfinite(points), axis=1)
    rejected = int(np.count_nonzero(~finite))
    if rejected:
        logger.warning("%s: dropped %d vertices with non-finite coordinates.", path, rejected)
        points = points[finite]
    vertex = _vertex_element(elements)[1]
    ignored = tuple(name for name, _ in vertex.properties if name not in ("x", "y", "z"))
    return PlyCloud(points.shape[0], points, ignored, rejected, fmt)


def read_ply(path: PathLike, view_id: int = 1) -> PointSet:
    """
    Read a PLY file as one view.

    Args:
        path (PathLike): file to read.
        view_id (int, optional): id given to the view. Defaults to 1.

    Raises:
        PlyFormatError: if the file cannot be parsed or has no finite vertex.

    Returns:
        PointSet: the vertices, named after the file.
    """
    cloud = read_ply_cloud(path)
    if cloud.count == 0:
        raise PlyFormatError(f"{path}: no finite vertices")
    return PointSet(view_id, cloud.points, name=str(path))


def write_ply(
    cloud: Union[PointSet, np.ndarray], path: PathLike, format: str = "ascii"
) -> None:
    """
    Write points as PLY with double x, y and z vertex properties.

    ASCII coordinates carry 17 significant digits, so reading them back gives
    the same doubles.

    Args:
        cloud (Union[PointSet, np.ndarray]): a view or an (N, 3) array (N may be 0).
        path (PathLike): output file.
        format (str, optional): "ascii" or "binary-le". Defaults to "ascii".

    Raises:
        ValueError: for an unknown format.
        OSError: if the path cannot be written.
    """
    # pylint: disable=redefined-builtin
    if format not in PLY_FORMATS:
        raise ValueError(f"format must be one of {sorted(PLY_FORMATS)}, got {format!r}.")
    points = cloud.points if isinstance(cloud, PointSet) else np.asarray(cloud, dtype=float)
    points = points.reshape(-1, 3)
    header = "\n".join(
        [
            "ply",
            f"format {PLY_FORMATS[format]} 1.0",
            "comment written by stmmreg",
            f"element vertex {points.shape[0]}",
            "property double x",
            "property double y",
            "property double z",
            "end_header",
            "",
        ]
    )
    with open(path, "wb") as handle:
        handle.write(header.encode("ascii"))
        if format == "ascii":
            np.savetxt(handle, points, fmt="%.17g")
        else:
            handle.write(np.ascontiguousarray(points, dtype="<f8").tobytes())


def downsample(point_set: PointSet, target: int, seed: int = 0) -> PointSet:
    """
    Uniform random sample of `target` points without replacement.

    Kept points stay in their original order.

    Args:
        point_set (PointSet): view to thin.
        target (int): number of points wanted, >= 1.
        seed (int, optional): generator seed. Defaults to 0.

    Returns:
        PointSet: the sample, or `point_set` itself when target >= N.

    Example::
        >>> import numpy as np
        >>> from stmmreg.geometry import PointSet
        >>> from stmmreg.io import downsample
        >>> view = PointSet(1, np.arange(30.0).reshape(10, 3))
        >>> len(downsample(view, 4, seed=1)), downsample(view, 20) is view
        (4, True)
    """
    if target < 1:
        raise ValueError(f"target must be >= 1, got {target}.")
    if target >= len(point_set):
        return point_set
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(point_set), size=target, replace=False))
    return point_set.subset(keep)


def _check_rotation(value: object, where: str) -> np.ndarray:
    try:
        rotation = np.array(value, dtype=float)
    except (TypeError, ValueError, OverflowError, RecursionError) as err:
        raise TransformSchemaError(f"{where}: rotation is not numeric.") from err
    if rotation.shape != (3, 3) or not np.all(np.isfinite(rotation)):
        raise TransformSchemaError(f"{where}: rotation must be 3x3 finite numbers.")
    drift = orthogonality_drift(rotation)
    if drift > TRANSFORM_REJECT_DRIFT:
        raise TransformSchemaError(f"{where}: rotation is not orthonormal (drift {drift:.3g}).")
    if np.linalg.det(rotation) < 0:
        raise TransformSchemaError(f"{where}: rotation is a reflection (det < 0).")
    if drift > TRANSFORM_POLAR_DRIFT:
        rotation = orthonormalize(rotation)
    return rotation


def transforms_from_json(document: object) -> Dict[int, RigidTransform]:
    """
    Validate a decoded transforms document.

    Args:
        document (object): list of {"view", "rotation", "translation"} records.

    Raises:
        TransformSchemaError: for any schema violation.

    Returns:
        Dict[int, RigidTransform]: transforms keyed by view id, ascending.
    """
    if not isinstance(document, list):
        raise TransformSchemaError("Transforms document must be a JSON list.")
    out: Dict[int, RigidTransform] = {}
    for k, record in enumerate(document):
        where = f"record {k}"
        if not isinstance(record, dict) or set(record) != {"view", "rotation", "translation"}:
            raise TransformSchemaError(f"{where}: need exactly keys view, rotation, translation.")
        view = record["view"]
        if isinstance(view, bool) or not isinstance(view, int) or view < 1:
            raise TransformSchemaError(f"{where}: view must be an integer >= 1.")
        if view in out:
            raise TransformSchemaError(f"{where}: duplicate view {view}.")
        rotation = _check_rotation(record["rotation"], f"view {view}")
        try:
            translation = np.array(record["translation"], dtype=float)
        except (TypeError, ValueError, OverflowError, RecursionError) as err:
            raise TransformSchemaError(f"view {view}: translation is not numeric.") from err
        if translation.shape != (3,) or not np.all(np.isfinite(translation)):
            raise TransformSchemaError(f"view {view}: translation must be 3 finite numbers.")
        try:
            out[view] = RigidTransform(rotation, translation)
        except InvalidTransformError as err:
            raise TransformSchemaError(f"view {view}: {err}") from err
    return dict(sorted(out.items()))


def transforms_to_json(
    transforms: Union[Sequence[RigidTransform], Mapping[int, RigidTransform]]
) -> List[dict]:
    """Records for a list (views numbered from 1) or a {view: transform} mapping."""
    if not isinstance(transforms, Mapping):
        transforms = {view: t for view, t in enumerate(transforms, start=1)}
    return [
        {
            "view": int(view),
            "rotation": transform.rotation.tolist(),
            "translation": transform.translation.tolist(),
        }
        for view, transform in sorted(transforms.items())
    ]


def read_transforms(path: PathLike) -> Dict[int, RigidTransform]:
    """
    Read a transforms JSON file.

    Args:
        path (PathLike): file to read.

    Raises:
        TransformSchemaError: for invalid JSON or schema violations.

    Returns:
        Dict[int, RigidTransform]: transforms keyed by view id, ascending.
    """
    try:
        document = read_json(path)
    except (ValueError, RecursionError) as err:
        raise TransformSchemaError(f"{path}: not valid JSON ({err}).") from err
    try:
        return transforms_from_json(document)
    except TransformSchemaError as err:
        raise TransformSchemaError(f"{path}: {err}") from err


def write_transforms(
    transforms: Union[Sequence[RigidTransform], Mapping[int, RigidTransform]], path: PathLike
) -> None:
    """
    Write transforms as JSON, rotations row-major.

    Args:
        transforms (Union[Sequence[RigidTransform], Mapping[int, RigidTransform]]):
            a list (views numbered from 1) or a {view: transform} mapping.
        path (PathLike): output file.
    """
    write_json(transforms_to_json(transforms), path)


def write_trace(trajectory: Union[Sequence[float], "RegistrationReport"], path: PathLike) -> None:
    """
    Write a Q trajectory as CSV with header `iteration,q`.

    Args:
        trajectory (Union[Sequence[float], RegistrationReport]): Q values or a
            registration report.
        path (PathLike): output file.
    """
    q = getattr(trajectory, "q_trajectory", trajectory)
    frame = pd.DataFrame({"iteration": np.arange(1, len(q) + 1), "q": np.asarray(q, dtype=float)})
    frame.to_csv(path, index=False, float_format="%.17g")
