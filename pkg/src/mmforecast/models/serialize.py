"""Binary model files: per-variant magic, versioned header, f64 parameters.

Magics: LSTM, OLS1, KNN1, TREE, RF01, GBT1. All integers and floats are
little-endian; arrays are row-major.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .._io import (
    ByteReader,
    as_bytes,
    pack_f64,
    pack_f64_array,
    pack_i32_array,
    pack_str16,
    pack_u32,
)
from .baselines import (
    DecisionTreeModel,
    GbtModel,
    KnnModel,
    OlsModel,
    RandomForestModel,
    _TreeNodes,
)
from .lstm import LstmModel


class ModelFileError(ValueError):
    """Unrecognized or malformed model file."""


_VERSION = 1


def save_model(path_or_stream, model) -> None:
    payload = _encode(model)
    if isinstance(path_or_stream, (str, Path)):
        Path(path_or_stream).write_bytes(payload)
    else:
        path_or_stream.write(payload)


def load_model(path_or_stream):
    if isinstance(path_or_stream, (str, Path)):
        data = Path(path_or_stream).read_bytes()
    else:
        data = as_bytes(path_or_stream)
    reader = ByteReader(data)
    magic = reader.read(4)
    version = reader.u32()
    if version != _VERSION:
        raise ModelFileError(f"unsupported model file version {version}")
    decoders = {
        b"LSTM": _decode_lstm,
        b"OLS1": _decode_ols,
        b"KNN1": _decode_knn,
        b"TREE": _decode_tree,
        b"RF01": _decode_rf,
        b"GBT1": _decode_gbt,
    }
    if magic not in decoders:
        raise ModelFileError(f"unknown model magic {magic!r}")
    model = decoders[magic](reader)
    if not reader.at_end():
        raise ModelFileError(f"{len(data) - reader.offset} trailing bytes in model file")
    return model


def _encode(model) -> bytes:
    if isinstance(model, LstmModel):
        return _encode_lstm(model)
    if isinstance(model, OlsModel):
        return _encode_ols(model)
    if isinstance(model, KnnModel):
        return _encode_knn(model)
    if isinstance(model, RandomForestModel):
        return _encode_rf(model)
    if isinstance(model, GbtModel):
        return _encode_gbt(model)
    if isinstance(model, DecisionTreeModel):
        return b"TREE" + pack_u32(_VERSION) + _tree_block(model)
    raise ModelFileError(f"cannot serialize {type(model).__name__}")


def _encode_lstm(model: LstmModel) -> bytes:
    out = bytearray(b"LSTM")
    out += pack_u32(_VERSION)
    out += pack_u32(model.hidden_dim)
    out += pack_u32(model.steps)
    out += pack_u32(model.step_features)
    out += pack_u32(model.news_dim)
    out += pack_str16(model.news_at)
    standardized = model.x_mean is not None
    out += pack_u32(1 if standardized else 0)
    for name in LstmModel.PARAM_NAMES:
        out += pack_f64_array(model.params[name])
    if standardized:
        out += pack_f64_array(model.x_mean)
        out += pack_f64_array(model.x_std)
    return bytes(out)


def _decode_lstm(reader: ByteReader) -> LstmModel:
    hidden = reader.u32()
    steps = reader.u32()
    step_features = reader.u32()
    news_dim = reader.u32()
    news_at = reader.str16()
    standardized = reader.u32() == 1
    input_dim = step_features + news_dim
    params = {
        "W": reader.f64_array(4 * hidden * input_dim).reshape(4 * hidden, input_dim),
        "U": reader.f64_array(4 * hidden * hidden).reshape(4 * hidden, hidden),
        "b": reader.f64_array(4 * hidden),
        "w_out": reader.f64_array(hidden),
        "b_out": reader.f64_array(1),
    }
    x_mean = x_std = None
    if standardized:
        feature_length = steps * step_features + news_dim
        x_mean = reader.f64_array(feature_length)
        x_std = reader.f64_array(feature_length)
    return LstmModel(
        params,
        hidden_dim=hidden,
        news_dim=news_dim,
        news_at=news_at,
        steps=steps,
        step_features=step_features,
        x_mean=x_mean,
        x_std=x_std,
    )


def _encode_ols(model: OlsModel) -> bytes:
    if model.coef_ is None:
        raise ModelFileError("cannot serialize an unfitted model")
    out = bytearray(b"OLS1")
    out += pack_u32(_VERSION)
    out += pack_u32(model.coef_.shape[0])
    out += pack_f64(model.ridge)
    out += pack_f64(model.intercept_)
    out += pack_f64_array(model.coef_)
    return bytes(out)


def _decode_ols(reader: ByteReader) -> OlsModel:
    n_features = reader.u32()
    model = OlsModel(ridge=reader.f64())
    model.intercept_ = reader.f64()
    model.coef_ = reader.f64_array(n_features)
    return model


def _encode_knn(model: KnnModel) -> bytes:
    if model.x_ is None:
        raise ModelFileError("cannot serialize an unfitted model")
    out = bytearray(b"KNN1")
    out += pack_u32(_VERSION)
    out += pack_u32(model.k)
    out += pack_u32(model.x_.shape[0])
    out += pack_u32(model.x_.shape[1])
    out += pack_f64_array(model.x_)
    out += pack_f64_array(model.y_)
    return bytes(out)


def _decode_knn(reader: ByteReader) -> KnnModel:
    k = reader.u32()
    n = reader.u32()
    d = reader.u32()
    model = KnnModel(k=k)
    model.x_ = reader.f64_array(n * d).reshape(n, d)
    model.y_ = reader.f64_array(n)
    return model


def _tree_block(tree: DecisionTreeModel) -> bytes:
    if tree.nodes is None:
        raise ModelFileError("cannot serialize an unfitted model")
    nodes = tree.nodes
    out = bytearray()
    out += pack_u32(tree.n_features_)
    out += pack_u32(0xFFFFFFFF if tree.max_depth is None else tree.max_depth)
    out += pack_u32(tree.min_leaf)
    out += pack_u32(len(nodes.feature))
    out += pack_i32_array(np.array(nodes.feature, dtype=np.int32))
    out += pack_f64_array(np.array(nodes.threshold))
    out += pack_i32_array(np.array(nodes.left, dtype=np.int32))
    out += pack_i32_array(np.array(nodes.right, dtype=np.int32))
    out += pack_f64_array(np.array(nodes.value))
    return bytes(out)


def _read_tree_block(reader: ByteReader) -> DecisionTreeModel:
    n_features = reader.u32()
    raw_depth = reader.u32()
    min_leaf = reader.u32()
    count = reader.u32()
    tree = DecisionTreeModel(
        max_depth=None if raw_depth == 0xFFFFFFFF else raw_depth, min_leaf=min_leaf
    )
    tree.n_features_ = n_features
    tree.nodes = _TreeNodes(
        feature=list(reader.i32_array(count)),
        threshold=list(reader.f64_array(count)),
        left=list(reader.i32_array(count)),
        right=list(reader.i32_array(count)),
        value=list(reader.f64_array(count)),
    )
    return tree


def _decode_tree(reader: ByteReader) -> DecisionTreeModel:
    return _read_tree_block(reader)


def _encode_rf(model: RandomForestModel) -> bytes:
    if not model.trees:
        raise ModelFileError("cannot serialize an unfitted model")
    out = bytearray(b"RF01")
    out += pack_u32(_VERSION)
    out += pack_u32(model.n_features_)
    out += pack_f64(model.feature_fraction)
    out += pack_u32(model.seed)
    out += pack_u32(len(model.trees))
    for tree in model.trees:
        out += _tree_block(tree)
    return bytes(out)


def _decode_rf(reader: ByteReader) -> RandomForestModel:
    n_features = reader.u32()
    feature_fraction = reader.f64()
    seed = reader.u32()
    count = reader.u32()
    trees = [_read_tree_block(reader) for _ in range(count)]
    model = RandomForestModel(
        n_trees=count, feature_fraction=feature_fraction, seed=seed
    )
    model.n_features_ = n_features
    model.trees = trees
    return model


def _encode_gbt(model: GbtModel) -> bytes:
    if model.base_ is None:
        raise ModelFileError("cannot serialize an unfitted model")
    out = bytearray(b"GBT1")
    out += pack_u32(_VERSION)
    out += pack_u32(model.n_features_)
    out += pack_f64(model.base_)
    out += pack_f64(model.shrinkage)
    out += pack_u32(len(model.trees))
    for tree in model.trees:
        out += _tree_block(tree)
    return bytes(out)


def _decode_gbt(reader: ByteReader) -> GbtModel:
    n_features = reader.u32()
    base = reader.f64()
    shrinkage = reader.f64()
    count = reader.u32()
    trees = [_read_tree_block(reader) for _ in range(count)]
    model = GbtModel(rounds=count, shrinkage=shrinkage)
    model.n_features_ = n_features
    model.base_ = base
    model.trees = trees
    return model
