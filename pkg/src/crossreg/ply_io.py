"""PLY reading/writing (ASCII and binary little-endian) plus a correspondence
visualization writer.

The reader accepts any vertex element whose x, y, z properties are float32 or
float64; other scalar properties are skipped. Malformed input raises
PlyParseError carrying the byte offset of the defect.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, PlyParseError
from .geometry import PointCloud, RigidTransform
from .matching import CorrespondenceSet

_SCALAR_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}
_FLOAT_TYPES = {"float", "float32", "double", "float64"}


class _Element:
    def __init__(self, name: str, count: int, line_offset: int):
        self.name = name
        self.count = count
        self.line_offset = line_offset
        self.properties: list[tuple[str, str]] = []  # (ply type, name)


def _split_lines_with_offsets(data: bytes) -> list[tuple[int, bytes]]:
    lines = []
    start = 0
    while start < len(data):
        end = data.find(b"\n", start)
        if end < 0:
            lines.append((start, data[start:]))
            break
        lines.append((start, data[start:end]))
        start = end + 1
    return lines


def _parse_header(data: bytes) -> tuple[str, list[_Element], int]:
    lines = _split_lines_with_offsets(data)
    if not lines or lines[0][1].strip() != b"ply":
        raise PlyParseError("missing 'ply' magic", 0)
    fmt = None
    elements: list[_Element] = []
    for offset, raw in lines[1:]:
        text = raw.decode("latin-1").strip()
        if text == "end_header":
            payload_start = offset + len(raw) + 1  # past this line's newline
            if fmt is None:
                raise PlyParseError("header has no format line", offset)
            if not elements:
                raise PlyParseError("header declares no elements", offset)
            return fmt, elements, payload_start
        if not text or text.startswith("comment") or text.startswith("obj_info"):
            continue
        fields = text.split()
        if fields[0] == "format":
            if len(fields) < 2 or fields[1] not in ("ascii", "binary_little_endian"):
                raise PlyParseError(f"unsupported format {text!r}", offset)
            fmt = fields[1]
        elif fields[0] == "element":
            if len(fields) != 3:
                raise PlyParseError(f"malformed element line {text!r}", offset)
            try:
                count = int(fields[2])
            except ValueError:
                raise PlyParseError(f"bad element count in {text!r}", offset) from None
            if count < 0:
                raise PlyParseError(f"negative element count in {text!r}", offset)
            elements.append(_Element(fields[1], count, offset))
        elif fields[0] == "property":
            if not elements:
                raise PlyParseError("property before any element", offset)
            if fields[1] == "list":
                elements[-1].properties.append(("list", " ".join(fields[2:])))
            elif len(fields) == 3 and fields[1] in _SCALAR_TYPES:
                elements[-1].properties.append((fields[1], fields[2]))
            else:
                raise PlyParseError(f"unsupported property line {text!r}", offset)
        else:
            raise PlyParseError(f"unrecognized header line {text!r}", offset)
    raise PlyParseError("header never reaches end_header", len(data))


def _xyz_columns(element: _Element) -> list[int]:
    names = [name for _, name in element.properties]
    columns = []
    for coord in ("x", "y", "z"):
        if coord not in names:
            raise PlyParseError(
                f"vertex element lacks property {coord!r}", element.line_offset
            )
        idx = names.index(coord)
        ptype = element.properties[idx][0]
        if ptype not in _FLOAT_TYPES:
            raise PlyParseError(
                f"vertex property {coord!r} has non-float type {ptype!r}",
                element.line_offset,
            )
        columns.append(idx)
    return columns


def _require_scalar(element: _Element) -> None:
    for ptype, name in element.properties:
        if ptype == "list":
            raise PlyParseError(
                f"list property {name!r} in element {element.name!r} is unsupported "
                "before vertex data",
                element.line_offset,
            )


def _read_ascii_vertices(
    data: bytes, payload_start: int, elements: list[_Element]
) -> np.ndarray:
    lines = _split_lines_with_offsets(data[payload_start:])
    lines = [(payload_start + off, raw) for off, raw in lines if raw.strip()]
    cursor = 0

    def take(count: int, element: _Element) -> list[tuple[int, bytes]]:
        nonlocal cursor
        if cursor + count > len(lines):
            # The first missing row would start where the payload ran out.
            raise PlyParseError(
                f"element {element.name!r} declares {count} rows, payload holds "
                f"{len(lines) - cursor}",
                len(data),
            )
        rows = lines[cursor : cursor + count]
        cursor += count
        return rows

    for element in elements:
        if element.name == "vertex":
            columns = _xyz_columns(element)
            rows = take(element.count, element)
            points = np.empty((element.count, 3), dtype=np.float64)
            for i, (offset, raw) in enumerate(rows):
                tokens = raw.split()
                if len(tokens) < len(element.properties):
                    raise PlyParseError(
                        f"vertex row has {len(tokens)} values, expected "
                        f"{len(element.properties)}",
                        offset,
                    )
                try:
                    points[i] = [float(tokens[c]) for c in columns]
                except ValueError:
                    raise PlyParseError("non-numeric vertex coordinate", offset) from None
            return points
        _require_scalar(element)
        take(element.count, element)
    raise PlyParseError("no vertex element in header", payload_start)


def _read_binary_vertices(
    data: bytes, payload_start: int, elements: list[_Element]
) -> np.ndarray:
    cursor = payload_start
    for element in elements:
        _require_scalar(element)
        dtype = np.dtype(
            [(f"p{i}", "<" + _SCALAR_TYPES[ptype]) for i, (ptype, _) in enumerate(element.properties)]
        )
        needed = dtype.itemsize * element.count
        available = len(data) - cursor
        if available < needed:
            complete = max(available, 0) // dtype.itemsize
            raise PlyParseError(
                f"element {element.name!r} declares {element.count} records, "
                f"payload holds {complete}",
                cursor + complete * dtype.itemsize,
            )
        if element.name == "vertex":
            columns = _xyz_columns(element)
            records = np.frombuffer(data, dtype=dtype, count=element.count, offset=cursor)
            points = np.stack(
                [records[f"p{c}"].astype(np.float64) for c in columns], axis=1
            )
            return points
        cursor += needed
    raise PlyParseError("no vertex element in header", payload_start)


def read_point_cloud(path) -> PointCloud:
    """Read an ASCII or binary-little-endian PLY into a PointCloud."""
    data = Path(path).read_bytes()
    fmt, elements, payload_start = _parse_header(data)
    if fmt == "ascii":
        points = _read_ascii_vertices(data, payload_start, elements)
    else:
        points = _read_binary_vertices(data, payload_start, elements)
    try:
        return PointCloud(points)
    except InvalidArgumentError as exc:
        raise PlyParseError(f"invalid vertex data: {exc}", payload_start) from exc


def write_point_cloud(path, cloud: PointCloud, binary: bool = True, dtype: str = "float64") -> None:
    """Write a PLY file with x, y, z vertex properties."""
    if dtype not in ("float32", "float64"):
        raise InvalidArgumentError(f"dtype must be float32 or float64, got {dtype!r}")
    ply_type = "float" if dtype == "float32" else "double"
    fmt = "binary_little_endian" if binary else "ascii"
    header = (
        "ply\n"
        f"format {fmt} 1.0\n"
        f"element vertex {len(cloud)}\n"
        f"property {ply_type} x\n"
        f"property {ply_type} y\n"
        f"property {ply_type} z\n"
        "end_header\n"
    )
    path = Path(path)
    with path.open("wb") as handle:
        handle.write(header.encode("ascii"))
        if binary:
            np_dtype = "<f4" if dtype == "float32" else "<f8"
            handle.write(np.ascontiguousarray(cloud.points, dtype=np_dtype).tobytes())
        else:
            pts = cloud.points.astype(np.float32) if dtype == "float32" else cloud.points
            for x, y, z in pts:
                handle.write(f"{x:.17g} {y:.17g} {z:.17g}\n".encode("ascii"))


def write_correspondence_visualization(
    path,
    source: PointCloud,
    target: PointCloud,
    correspondences: CorrespondenceSet,
    gt: RigidTransform | None = None,
    tau1: float = 0.1,
) -> None:
    """Write both clouds plus correspondence line segments as an ASCII PLY.

    Each correspondence becomes an edge; edges are green when a ground-truth
    transform is given and the pair's residual is below tau1, red otherwise.
    Vertices carry colors so the two clouds are distinguishable.
    """
    src_color = (70, 130, 180)
    tgt_color = (200, 160, 60)
    n_src, n_tgt, n_corr = len(source), len(target), len(correspondences)

    if gt is not None and n_corr:
        residuals = np.linalg.norm(
            gt.apply(correspondences.source_points) - correspondences.target_points, axis=1
        )
        inlier = residuals < tau1
    else:
        inlier = np.zeros(n_corr, dtype=bool)

    header = (
        "ply\n"
        "format ascii 1.0\n"
        f"element vertex {n_src + n_tgt + 2 * n_corr}\n"
        "property double x\n"
        "property double y\n"
        "property double z\n"
        "property uchar red\n"
        "property uchar green\n"
        "property uchar blue\n"
        f"element edge {n_corr}\n"
        "property int vertex1\n"
        "property int vertex2\n"
        "property uchar red\n"
        "property uchar green\n"
        "property uchar blue\n"
        "end_header\n"
    )
    with Path(path).open("wb") as handle:
        handle.write(header.encode("ascii"))

        def emit_vertices(points, color):
            for x, y, z in points:
                handle.write(
                    f"{x:.17g} {y:.17g} {z:.17g} {color[0]} {color[1]} {color[2]}\n".encode("ascii")
                )

        emit_vertices(source.points, src_color)
        emit_vertices(target.points, tgt_color)
        for i in range(n_corr):
            color = (0, 200, 0) if inlier[i] else (200, 0, 0)
            emit_vertices(correspondences.source_points[i : i + 1], color)
            emit_vertices(correspondences.target_points[i : i + 1], color)
        base = n_src + n_tgt
        for i in range(n_corr):
            color = (0, 200, 0) if inlier[i] else (200, 0, 0)
            handle.write(
                f"{base + 2 * i} {base + 2 * i + 1} {color[0]} {color[1]} {color[2]}\n".encode("ascii")
            )
