"""Embedding tables on disk.

JSON form::

    {"format": "siegel-embed/1", "space": "siegel:4", "epoch": 12,
     "points": [[re_00, re_01, ..., im_00, ...], ...]}

Binary form: the 8-byte magic ``b"SEMBED01"``, a little-endian ``uint32``
header length, a UTF-8 JSON header (``space``, ``num_nodes``, ``record_size``,
``epoch``, ...), then ``num_nodes * record_size`` little-endian ``float64``
values, one record per node.  A record is the row-major real part followed by
the row-major imaginary part for matrix spaces, the coordinate vector for
flat spaces and the concatenation of component records for products.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .spaces import SpaceDescriptor

MAGIC = b"SEMBED01"
FORMAT = "siegel-embed/1"


def save_embeddings(path, space: SpaceDescriptor, table: np.ndarray, epoch: int = 0,
                    meta: dict | None = None) -> Path:
    path = Path(path)
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[1] != space.flat_dim:
        raise ValueError(f"table shape {table.shape} does not match {space} (record size {space.flat_dim})")
    header = {"format": FORMAT, "space": str(space), "num_nodes": int(table.shape[0]),
              "record_size": space.flat_dim, "epoch": int(epoch), **(meta or {})}
    if path.suffix == ".json":
        header["points"] = table.tolist()
        path.write_text(json.dumps(header))
    else:
        blob = json.dumps(header).encode()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            fh.write(table.astype("<f8").tobytes())
    return path


def load_embeddings(path) -> tuple[SpaceDescriptor, np.ndarray, dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
        if head == MAGIC:
            (size,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(size).decode())
            data = np.frombuffer(fh.read(), dtype="<f8").astype(float)
            table = data.reshape(header["num_nodes"], header["record_size"])
        else:
            header = json.loads(head + fh.read())
            table = np.asarray(header.pop("points"), dtype=float).reshape(
                header["num_nodes"], header["record_size"])
    space = SpaceDescriptor.parse(header["space"])
    if table.shape[1] != space.flat_dim:
        raise ValueError(f"record size {table.shape[1]} does not match {space}")
    return space, table, header
