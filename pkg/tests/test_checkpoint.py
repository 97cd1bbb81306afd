import numpy as np
import pytest

from danmakugen import checkpoint


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    entries = [("gen.w", rng.standard_normal((3, 4))), ("gen.b", rng.standard_normal(4)),
               ("disc.w", rng.standard_normal((2, 3, 5)))]
    path = tmp_path / "model.dgck"
    checkpoint.save(path, "psgan", seed=7, iteration=500, named_values=entries)
    header, values = checkpoint.load(path)
    assert header["arch"] == "psgan"
    assert header["seed"] == 7
    assert header["iteration"] == 500
    for name, arr in entries:
        assert np.array_equal(values[name], arr)


def test_byte_deterministic(tmp_path):
    arr = np.linspace(-1, 1, 17).reshape(1, 17)
    a, b = tmp_path / "a.dgck", tmp_path / "b.dgck"
    checkpoint.save(a, "dcgan", 1, 2, [("w", arr)])
    checkpoint.save(b, "dcgan", 1, 2, [("w", arr)])
    assert a.read_bytes() == b.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.dgck"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ValueError, match="magic"):
        checkpoint.load(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "model.dgck"
    checkpoint.save(path, "dcgan", 0, 0, [("w", np.zeros(2))])
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(ValueError, match="trailing"):
        checkpoint.load(path)
