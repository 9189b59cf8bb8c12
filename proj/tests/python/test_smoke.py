import json
import math
import pathlib

import jsonschema
import pytest

import spoofwatch as sw

ROOT = pathlib.Path(__file__).resolve().parents[2]
SCHEMA = json.loads((ROOT / "schemas" / "summary.schema.json").read_text())


def tiny_config():
    cfg = sw.default_config()
    cfg["train"].update(episodes=6, warmup_episodes=2)
    cfg["eval"].update(n_nominal=2, n_attacked=2, n_profile=6, n_calibration=2)
    cfg["detectors"]["autoencoder"]["epochs"] = 5
    return cfg


def test_default_config_matches_shipped_file():
    assert sw.load_config(ROOT / "configs" / "default.json") == sw.resolve_config(sw.default_config())
    assert sw.config_hash() == sw.config_hash(sw.default_config())
    assert len(sw.config_hash()) == 16


def test_invalid_config_raises():
    cfg = sw.default_config()
    cfg["detectors"]["bocpd"]["hazard"] = 0.0
    with pytest.raises(sw.ConfigError):
        sw.resolve_config(cfg)
    with pytest.raises(sw.ConfigError):
        sw.load_config(ROOT / "does-not-exist.json")


def test_pvt_roundtrip():
    sats = sw.make_constellation(8, 2.0e7, 0)
    ranges = sw.pseudoranges(sats, [120.0, 450.0, 80.0], clock_bias=33.0)
    sol = sw.solve_pvt(sats, ranges)
    assert sol["converged"]
    assert max(abs(a - b) for a, b in zip(sol["position"], [120.0, 450.0, 80.0])) < 1e-6
    assert abs(sol["clock_bias"] - 33.0) < 1e-6


def test_bocpd_against_oracle():
    stream = [0.1, -0.4, 0.3, 0.0, -6.2, -5.8, -6.1, -5.9]
    det = sw.Bocpd(0.0, 1.0, hazard=0.05, prune_threshold=0.0)
    oracle = sw.bocpd_oracle(stream, 0.0, 1.0, 0.05)
    for q, expected in zip(stream, oracle):
        det.update(q)
        got = det.posterior()
        got += [0.0] * (len(expected) - len(got))
        assert sum(abs(a - b) for a, b in zip(got, expected)) / 2 < 1e-9
    assert sw.oracle_check(1)["max_tv"] < 1e-9
    assert sw.bocpd_flag(3, 20) and not sw.bocpd_flag(3, 5)


def test_profile():
    assert sw.fit_nominal_profile([[0.0, 0.0], [2.0, 2.0]]) == (1.0, 1.0)
    with pytest.raises(sw.InsufficientDataError):
        sw.fit_nominal_profile([[1.0]])


def test_train_and_evaluate(tmp_path):
    cfg = tiny_config()
    ckpt = tmp_path / "agent.ckpt"
    rewards = sw.train(cfg, seed=4, checkpoint=ckpt)
    assert len(rewards) == 6 and ckpt.exists()
    assert rewards == sw.train(cfg, seed=4)

    summary = sw.evaluate(ckpt, cfg, seed=4, out_dir=tmp_path / "eval")
    jsonschema.validate(summary, SCHEMA)
    on_disk = json.loads((tmp_path / "eval" / "summary.json").read_text())
    jsonschema.validate(on_disk, SCHEMA)
    assert on_disk == summary
    assert summary["episodes"]["nominal"] == 2
    for name in ("bocpd", "page_hinkley", "residual", "autoencoder"):
        acc = summary["detectors"][name]["accuracy"]["mean"]
        assert 0.0 <= acc <= 1.0 and not math.isnan(acc)


def test_corrupt_checkpoint(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(sw.CorruptFileError):
        sw.evaluate(bad, tiny_config())
