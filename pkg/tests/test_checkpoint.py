import numpy as np
import pytest

from shufflesod.autodiff.checkpoint import load_checkpoint, save_checkpoint
from shufflesod.errors import CheckpointError
from shufflesod.config import RunConfig
from shufflesod.model import SaliencyNetwork

SMALL = RunConfig(side=32, widths=(8, 8, 16, 16), global_dim=16, decoder_dim=8)


def build(seed):
    return SaliencyNetwork.from_config(SMALL.replace(seed=seed))


def test_round_trip_preserves_bits_and_order(tmp_path):
    state = {"b": np.arange(6.0).reshape(2, 3), "a": np.array(np.pi), "c": np.random.default_rng(0).normal(size=4)}
    save_checkpoint(tmp_path / "s.ckpt", state, {"note": "x"})
    loaded, meta = load_checkpoint(tmp_path / "s.ckpt")
    assert list(loaded) == ["b", "a", "c"] and meta == {"note": "x"}
    for k in state:
        assert loaded[k].tobytes() == np.asarray(state[k], dtype=np.float64).tobytes()
        assert loaded[k].shape == np.shape(state[k])


def test_identical_state_gives_identical_bytes(tmp_path):
    state = {"w": np.linspace(0, 1, 7)}
    save_checkpoint(tmp_path / "a.ckpt", state)
    save_checkpoint(tmp_path / "b.ckpt", state)
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_model_state_round_trip(tmp_path):
    net = build(0)
    save_checkpoint(tmp_path / "m.ckpt", net.state_dict())
    other = build(1)
    other.load_state_dict(load_checkpoint(tmp_path / "m.ckpt")[0])
    for (n, p), (_, q) in zip(net.named_parameters(), other.named_parameters()):
        assert p.data.tobytes() == q.data.tobytes(), n


def test_shape_mismatch_names_first_bad_parameter():
    net = build(0)
    state = net.state_dict()
    first = next(iter(state))
    state[first] = np.zeros(3)
    with pytest.raises(CheckpointError, match=first):
        net.load_state_dict(state)


def test_missing_and_extra_parameters():
    net = build(0)
    state = net.state_dict()
    name = list(state)[5]
    del state[name]
    with pytest.raises(CheckpointError, match="missing"):
        net.load_state_dict(state)
    state = net.state_dict()
    state["extra.weight"] = np.zeros(1)
    with pytest.raises(CheckpointError, match="unexpected"):
        net.load_state_dict(state)


def test_unreadable_files(tmp_path):
    (tmp_path / "junk.ckpt").write_bytes(b"not a zip")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "junk.ckpt")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.ckpt")
