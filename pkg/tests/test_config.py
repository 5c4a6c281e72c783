import pytest

from vidinpaint import config
from vidinpaint.errors import ContractError


def test_defaults_without_file(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = config.load_config()
    assert cfg == config.DEFAULTS


def test_explicit_file_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("lr = 0.002\niterations = 50\n# comment\n\nstage=2\n")
    cfg = config.load_config(str(p))
    assert cfg["lr"] == 0.002
    assert cfg["iterations"] == 50
    assert cfg["stage"] == 2
    assert cfg["batch_size"] == config.DEFAULTS["batch_size"]


def test_working_directory_file_found(tmp_path, monkeypatch):
    (tmp_path / config.DEFAULT_CONFIG_NAME).write_text("seed = 99\n")
    monkeypatch.chdir(tmp_path)
    assert config.load_config()["seed"] == 99


def test_tuple_values(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("channels = 8, 16, 32, 64\nloss_weights = 1, 5, 2\n"
                 "mask_kinds = flying_square\n")
    cfg = config.load_config(str(p))
    assert cfg["channels"] == (8, 16, 32, 64)
    assert cfg["loss_weights"] == (1.0, 5.0, 2.0)
    assert cfg["mask_kinds"] == ("flying_square",)


def test_bool_values(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("detach_feedback = false\n")
    assert config.load_config(str(p))["detach_feedback"] is False
    p.write_text("detach_feedback = maybe\n")
    with pytest.raises(ContractError):
        config.load_config(str(p))


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("learning_rate = 0.1\n")
    with pytest.raises(ContractError):
        config.load_config(str(p))


def test_malformed_line_rejected(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("just a line with no equals\n")
    with pytest.raises(ContractError):
        config.load_config(str(p))


def test_missing_explicit_file(tmp_path):
    with pytest.raises(IOError):
        config.load_config(str(tmp_path / "absent.cfg"))
