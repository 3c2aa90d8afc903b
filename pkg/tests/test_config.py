import pytest

from shufflesod.config import RunConfig, parse_pairs
from shufflesod.errors import ConfigurationError


def test_text_round_trip():
    cfg = RunConfig(side=96, patch=16, widths=(8, 8, 16, 16), lr_decoder=1.5e-3, use_global=False,
                    train_seeds=(0, 40), out_dir="x/y")
    assert RunConfig.from_text(cfg.to_text()) == cfg


def test_comments_and_overrides():
    cfg = RunConfig.from_text("# comment\nside = 64  # trailing\nepochs = 3\n", {"epochs": "5"})
    assert cfg.side == 64 and cfg.epochs == 5


@pytest.mark.parametrize("text", [
    "side = 48", "patch = 24", "widths = 8,8,16", "rescale_mode = nearest", "lr_encoder = -1.0",
    "batch_size = 0", "global_dim = 24", "bogus = 1", "use_global = maybe", "epochs = three", "side 64",
])
def test_invalid_configs_rejected(text):
    with pytest.raises(ConfigurationError):
        RunConfig.from_text(text)


def test_parse_pairs_keeps_raw_strings():
    assert parse_pairs(["a = 1, 2", "", "# x"]) == {"a": "1, 2"}


def test_fingerprint_ignores_output_dir_only():
    cfg = RunConfig()
    assert cfg.fingerprint() == cfg.replace(out_dir="elsewhere").fingerprint()
    assert cfg.fingerprint() != cfg.replace(seed=2).fingerprint()
    assert len(cfg.fingerprint()) == 16


def test_learning_rates_halve_on_schedule():
    cfg = RunConfig(halve_every=20)
    assert cfg.lrs(0) == cfg.lrs(19)
    assert cfg.lrs(20)["decoder"] == cfg.lr_decoder / 2
    assert cfg.lrs(45)["encoder"] == cfg.lr_encoder / 4


def test_decoder_rate_is_ten_times_backbone():
    cfg = RunConfig()
    assert cfg.lr_decoder == pytest.approx(10 * cfg.lr_encoder)
    assert cfg.lr_branch == cfg.lr_encoder


def test_seed_ranges():
    cfg = RunConfig()
    assert cfg.train_range == range(0, 800) and cfg.val_range == range(800, 900)
