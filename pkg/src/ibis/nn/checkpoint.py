"""IBN1 checkpoint container: JSON architecture header plus float64 blobs.

Layout mirrors the other binary formats: magic "IBN1", version u16, header
length u32, UTF-8 JSON, then the parameter arrays in the exact order the
header declares. A fitted SVM stage rides along as an extra JSON section
with its own blobs (support vectors and dual coefficients per class pair).
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

from ..errors import BadMagic, HeaderMismatch, UnsupportedVersion
from ..svm import BinarySvmModel, MulticlassSvm, SvmHyperParams
from .model import (BaselineModel, BiLstmParams, DenseParams, HybridModel,
                    InceptionBlockParams)

MAGIC = b"IBN1"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")


def _svm_meta(svm: MulticlassSvm) -> dict:
    return {
        "classes": list(svm.classes),
        "hyper": {
            "C": svm.hyper.C, "gamma": svm.hyper.gamma, "kernel": svm.hyper.kernel,
            "degree": svm.hyper.degree, "coef0": svm.hyper.coef0,
        },
        "models": [
            {
                "pair": list(pair),
                "num_sv": int(len(m.support_vectors)),
                "dim": int(m.support_vectors.shape[1]),
                "bias": float(m.bias),
            }
            for pair, m in sorted(svm.models.items())
        ],
    }


def _svm_blobs(svm: MulticlassSvm) -> list[np.ndarray]:
    blobs = []
    for _, m in sorted(svm.models.items()):
        blobs.append(m.support_vectors)
        blobs.append(m.dual_coefs)
    return blobs


def _svm_from(meta: dict, take) -> MulticlassSvm:
    h = meta["hyper"]
    hyper = SvmHyperParams(C=h["C"], gamma=h["gamma"], kernel=h["kernel"],
                           degree=h["degree"], coef0=h["coef0"])
    models = {}
    for entry in meta["models"]:
        sv = take((entry["num_sv"], entry["dim"]))
        coefs = take((entry["num_sv"],))
        models[tuple(entry["pair"])] = BinarySvmModel(
            support_vectors=sv, dual_coefs=coefs, bias=entry["bias"], hyper=hyper
        )
    return MulticlassSvm(models=models, classes=tuple(meta["classes"]), hyper=hyper)


def write_checkpoint(model, svm: MulticlassSvm | None = None) -> bytes:
    params = model.parameters()
    header = {
        "kind": model.kind,
        "params": [{"name": k, "shape": list(v.shape)} for k, v in params.items()],
        "svm": None if svm is None else _svm_meta(svm),
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    out = io.BytesIO()
    out.write(_PREFIX.pack(MAGIC, VERSION, len(hbytes)))
    out.write(hbytes)
    for v in params.values():
        out.write(np.ascontiguousarray(v, dtype="<f8").tobytes())
    if svm is not None:
        for blob in _svm_blobs(svm):
            out.write(np.ascontiguousarray(blob, dtype="<f8").tobytes())
    return out.getvalue()


def _group(params: dict[str, np.ndarray], prefix: str) -> dict[str, np.ndarray]:
    plen = len(prefix) + 1
    return {k[plen:]: v for k, v in params.items() if k.startswith(prefix + ".")}


def parse_checkpoint(blob: bytes):
    """Rebuild (model, svm_or_None) from checkpoint bytes."""
    if len(blob) < _PREFIX.size:
        raise HeaderMismatch("file shorter than the fixed prefix")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported checkpoint version {version}")
    if len(blob) < _PREFIX.size + hlen:
        raise HeaderMismatch("file truncated inside the JSON header")
    try:
        header = json.loads(blob[_PREFIX.size:_PREFIX.size + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderMismatch(f"unreadable JSON header: {exc}") from exc

    offset = _PREFIX.size + hlen

    def take(shape) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(blob):
            raise HeaderMismatch("payload shorter than the header declares")
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        offset += nbytes
        return arr.reshape(shape).copy()

    params = {e["name"]: take(e["shape"]) for e in header["params"]}
    kind = header["kind"]
    inception = InceptionBlockParams(**_group(params, "inception"))
    head_group = _group(params, "head")
    head = DenseParams(w=head_group["w"], b=head_group["b"])
    if kind == "hybrid":
        model = HybridModel(inception=inception,
                            bilstm=BiLstmParams(**_group(params, "bilstm")),
                            head=head)
    elif kind == "inception_only":
        model = BaselineModel(inception=inception, head=head)
    else:
        raise HeaderMismatch(f"unknown model kind {kind!r}")

    svm = None if header["svm"] is None else _svm_from(header["svm"], take)
    if offset != len(blob):
        raise HeaderMismatch(f"{len(blob) - offset} trailing bytes after the payload")
    return model, svm


def write_checkpoint_file(path, model, svm: MulticlassSvm | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(write_checkpoint(model, svm))


def parse_checkpoint_file(path):
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())
