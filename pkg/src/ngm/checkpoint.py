"""Plain-text model checkpoints.

Per-model layout:

    ngm-ckpt v1
    dims <vocab_size> <max_source_len> <max_target_len> <embed_dim> <hidden_dim>
    <name> <rows> <cols>
    <row of cols values>          (x rows, 17 significant digits)
    ...one block per parameter matrix...

Values round-trip exactly: %.17g preserves float64 bit patterns.
"""

from __future__ import annotations

import io
from typing import TextIO

import numpy as np

from .errors import FormatError
from .seq2seq import ModelDims, Seq2SeqModel, param_shapes

HEADER = "ngm-ckpt v1"


def write_model(fh: TextIO, model: Seq2SeqModel) -> None:
    d = model.dims
    fh.write(HEADER + "\n")
    fh.write(f"dims {d.vocab_size} {d.max_source_len} {d.max_target_len} "
             f"{d.embed_dim} {d.hidden_dim}\n")
    for name, shape in param_shapes(d):
        block = model.params[name]
        fh.write(f"{name} {shape[0]} {shape[1]}\n")
        for row in block.reshape(shape):
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def read_model(fh: TextIO) -> Seq2SeqModel:
    if fh.readline().rstrip("\n") != HEADER:
        raise FormatError(f"missing '{HEADER}' header", 1)
    parts = fh.readline().split()
    if len(parts) != 6 or parts[0] != "dims":
        raise FormatError("malformed dims line", 2)
    dims = ModelDims(vocab_size=int(parts[1]), max_source_len=int(parts[2]),
                     max_target_len=int(parts[3]), embed_dim=int(parts[4]),
                     hidden_dim=int(parts[5]))
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(dims):
        head = fh.readline().split()
        if len(head) != 3 or head[0] != name or (int(head[1]), int(head[2])) != shape:
            raise FormatError(f"expected block '{name} {shape[0]} {shape[1]}'")
        rows = [np.array([float(x) for x in fh.readline().split()])
                for _ in range(shape[0])]
        block = np.vstack(rows)
        if block.shape != shape:
            raise FormatError(f"block {name} has shape {block.shape}, want {shape}")
        params[name] = block
    return Seq2SeqModel(dims, params)


def model_to_text(model: Seq2SeqModel) -> str:
    buf = io.StringIO()
    write_model(buf, model)
    return buf.getvalue()


def model_from_text(text: str) -> Seq2SeqModel:
    return read_model(io.StringIO(text))
