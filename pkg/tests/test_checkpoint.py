import json
import struct

import numpy as np
import pytest

from melscribe.errors import FormatError, ShapeError
from melscribe.labeler import (
    LabelerConfig,
    init_params,
    load_checkpoint,
    save_checkpoint,
)

CFG = LabelerConfig(layers=1, model_dim=16, heads=2, ff_dim=32, input_dim=8)


def write_ckpt(path, cfg=CFG, tau=0.35, step=123):
    params = init_params(cfg)
    save_checkpoint(path, cfg, params, tau, step)
    return params


def test_round_trip(tmp_path):
    path = tmp_path / "m.ckpt"
    params = write_ckpt(path)
    cfg, loaded, tau, step = load_checkpoint(path)
    assert cfg == CFG
    assert tau == 0.35
    assert step == 123
    assert set(loaded) == set(params)
    for name in params:
        assert loaded[name].dtype == np.float32
        assert np.array_equal(loaded[name], params[name])


def test_resave_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    params = init_params(CFG)
    save_checkpoint(a, CFG, params, 0.5, 7)
    save_checkpoint(b, CFG, params, 0.5, 7)
    assert a.read_bytes() == b.read_bytes()


def test_float64_params_are_stored_as_float32(tmp_path):
    path = tmp_path / "m.ckpt"
    params = {k: v.astype(np.float64) for k, v in init_params(CFG).items()}
    save_checkpoint(path, CFG, params, 0.5, 0)
    _, loaded, _, _ = load_checkpoint(path)
    for name, arr in params.items():
        assert np.array_equal(loaded[name], arr.astype(np.float32))


def test_save_rejects_missing_and_non_finite(tmp_path):
    params = init_params(CFG)
    broken = dict(params)
    del broken["w_out"]
    with pytest.raises(ShapeError, match="w_out"):
        save_checkpoint(tmp_path / "x.ckpt", CFG, broken, 0.5, 0)
    bad = dict(params)
    bad["b_out"] = np.array([np.nan] * bad["b_out"].size, dtype=np.float32)
    with pytest.raises(FormatError, match="non-finite"):
        save_checkpoint(tmp_path / "y.ckpt", CFG, bad, 0.5, 0)


def test_load_rejects_corruption(tmp_path):
    path = tmp_path / "m.ckpt"
    write_ckpt(path)
    raw = path.read_bytes()

    def expect(data, pattern):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(data)
        with pytest.raises(FormatError, match=pattern):
            load_checkpoint(bad)

    expect(raw[:6], "truncated")
    expect(b"NOPE" + raw[4:], "magic")
    expect(raw[:4] + struct.pack("<I", 9) + raw[8:], "version")
    head_len = struct.unpack_from("<4sII", raw)[2]
    expect(raw[: 12 + head_len - 5], "past end")
    expect(raw + b"\x00\x00\x00\x00", "trailing")
    # truncate inside the tensor payload
    expect(raw[:-8], "overruns")
    # garbage header bytes of the declared length
    expect(raw[:12] + b"{" * head_len + raw[12 + head_len :], "invalid")
    # valid JSON, wrong structure
    fake = json.dumps({"config": None}).encode()
    expect(raw[:4] + struct.pack("<II", 1, len(fake)) + fake, "malformed")


def test_load_rejects_header_payload_mismatch(tmp_path):
    path = tmp_path / "m.ckpt"
    write_ckpt(path)
    raw = bytearray(path.read_bytes())
    head_len = struct.unpack_from("<4sII", raw)[2]
    header = json.loads(raw[12 : 12 + head_len])
    # drop one tensor from the list: no longer matches the config
    header["tensors"] = header["tensors"][:-1]
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    data = raw[:4] + struct.pack("<II", 1, len(head)) + head + raw[12 + head_len :]
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(bytes(data))
    with pytest.raises(FormatError, match="does not match"):
        load_checkpoint(bad)


def test_load_rejects_non_finite_blob(tmp_path):
    path = tmp_path / "m.ckpt"
    write_ckpt(path)
    raw = bytearray(path.read_bytes())
    raw[-4:] = struct.pack("<f", np.inf)
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="non-finite"):
        load_checkpoint(path)
