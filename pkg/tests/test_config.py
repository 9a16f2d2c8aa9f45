"""Flat key=value run configuration."""
import dataclasses
from pathlib import Path

import pytest

from liveswap import config as cfgmod
from liveswap import dataio, nets, trainer


def write_config(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return path


def test_defaults_fill_in(tmp_path):
    rc = cfgmod.load(write_config(tmp_path, ""))
    assert rc.resolution == 64
    assert rc.batch_size == 4
    assert rc.lr == pytest.approx(1e-5)
    assert rc.lambda_img == 10.0 and rc.lambda_lbp == 2.0
    assert rc.stem_channels == (32, 64, 128)
    assert rc.depth_block_channels == (128, 196, 128)
    assert rc.attacks == ("print", "screen")
    assert rc.fusion == "mean"
    assert rc.target_root is None
    assert rc.pretrain_lr is None
    assert rc.include_content_features is False


def test_paths_resolve_relative_to_config_file(tmp_path):
    nested = tmp_path / "cfgs"
    nested.mkdir()
    path = nested / "run.cfg"
    path.write_text("data_root = ../dataset\ncheckpoint = /abs/model.pt\n")
    rc = cfgmod.load(path)
    assert rc.data_root == (tmp_path / "dataset").resolve()
    assert rc.checkpoint == Path("/abs/model.pt")
    # untouched path keys default relative to the config file too
    assert rc.out_dir == (nested / "out").resolve()
    assert rc.log_csv == (nested / "out/train_log.csv").resolve()


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ValueError, match="unknown config key"):
        cfgmod.load(write_config(tmp_path, "learning_rate = 0.1\n"))


def test_duplicate_key_rejected(tmp_path):
    with pytest.raises(ValueError, match="duplicate"):
        cfgmod.load(write_config(tmp_path, "seed = 1\nseed = 2\n"))


def test_malformed_line_rejected(tmp_path):
    with pytest.raises(ValueError, match="key = value"):
        cfgmod.load(write_config(tmp_path, "just some words\n"))


def test_bad_value_rejected(tmp_path):
    with pytest.raises(ValueError, match="cannot parse"):
        cfgmod.load(write_config(tmp_path, "steps = soon\n"))


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ValueError, match="not found"):
        cfgmod.load(tmp_path / "nope.cfg")


def test_comments_and_blanks_ignored(tmp_path):
    rc = cfgmod.load(write_config(tmp_path, "# a comment\n\nseed = 7\n"))
    assert rc.seed == 7


def test_round_trip_text(tmp_path):
    rc = cfgmod.load(write_config(
        tmp_path,
        "seed = 3\nresolution = 32\nlr = 0.001\nattacks = screen\n"
        "stem_channels = 8,12,16\ntarget_root = other\npretrain_lr = 0.01\n"
        "include_content_features = true\n"))
    text = cfgmod.to_text(rc)
    rc2 = cfgmod.parse_text(text, tmp_path / "elsewhere")
    assert rc2 == rc  # resolved form is base-dir independent


def test_seed_override(tmp_path):
    path = write_config(tmp_path, "seed = 5\n")
    assert cfgmod.load(path).seed == 5
    assert cfgmod.load(path, seed_override=99).seed == 99
    rc = cfgmod.replace_seed(cfgmod.load(path), 42)
    assert rc.seed == 42 and rc.resolution == 64


def test_adapters_map_fields(tmp_path):
    rc = cfgmod.load(write_config(
        tmp_path,
        "resolution = 32\nseed = 11\ntrain_live = 12\ntrain_spoof = 10\n"
        "lambda_img = 3\nlambda_latent = 4\nlambda_depth = 5\nlambda_lbp = 6\n"
        "stem_channels = 4,6,8\ncontent_channels = 5\nliveness_channels = 7\n"
        "lbp_channels = 8,6\ndepth_stem_channels = 4\ndepth_block_channels = 6,8,6\n"
        "depth_head_channels = 8,6\ndisc_channels = 4,6,8\n"))
    gc = cfgmod.gen_config(rc)
    assert isinstance(gc, dataio.GenConfig)
    assert gc.resolution == 32 and gc.seed == 11
    assert gc.counts["train"] == (12, 10)

    tc = cfgmod.train_config(rc)
    assert isinstance(tc, trainer.TrainConfig)
    assert tc.loss_weights == (3.0, 4.0, 5.0, 6.0)
    assert tc.resolution == 32

    nc = cfgmod.net_config(rc)
    assert isinstance(nc, nets.NetConfig)
    assert nc.stem_channels == (4, 6, 8)
    assert nc.content_channels == 5 and nc.liveness_channels == 7
    assert nc.depth_block_channels == (6, 8, 6)


def test_validate_rejects_bad_enums(tmp_path):
    rc = cfgmod.load(write_config(tmp_path, "fusion = median\n"))
    with pytest.raises(ValueError, match="fusion"):
        cfgmod.validate(rc)
    rc = dataclasses.replace(rc, fusion="mean", eval_split="holdout")
    with pytest.raises(ValueError, match="eval_split"):
        cfgmod.validate(rc)


def test_schema_covers_runconfig_exactly():
    field_names = {f.name for f in dataclasses.fields(cfgmod.RunConfig)}
    assert field_names == set(cfgmod.SCHEMA)
