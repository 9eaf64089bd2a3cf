import dataclasses
import math

import numpy as np
import pytest

from nlcms_elm import ActivationMode, InvalidArgumentError, PgdOptions, PhaseRange, TargetEncoding, Variant
from nlcms_elm.cli import main
from nlcms_elm.data import DATA_ROOT_ENV
from nlcms_elm.experiment import (
    RAYLEIGH,
    RECORD_FIELDS,
    ExperimentConfig,
    ExperimentRecord,
    SweepPoint,
    build_system,
    format_csv,
    read_csv,
    run,
    run_point,
    summarize,
    write_csv,
)

pytest.importorskip("sklearn")

SMALL = dict(
    datasets=["wbcd"], n_r=[8, 16], n_layers=2, layer_size=16, seeds=[0, 1, 2],
    pgd=PgdOptions(max_iters=20), timing=False,
)


def small_config(**kw):
    return ExperimentConfig(**{**SMALL, **kw})


def test_default_config_is_golden():
    c = ExperimentConfig()
    assert c.datasets == ("wbcd",)
    assert c.variants == (Variant.IDEAL, Variant.OTA)
    assert c.n_layers == 5
    assert c.layer_size == 64 * 64
    assert c.pathloss_db == -50.0
    assert c.intra_pathloss_db == -10.0
    assert c.snr_db == (15.0,)
    assert c.ridge == 1e-6
    assert c.pgd == PgdOptions(max_iters=1500, step_size=0.01, rel_tol=1e-6, patience=20,
                               phase_range=PhaseRange.HALF_CIRCLE)
    assert c.ricean_k == (RAYLEIGH,)
    assert c.encoding is TargetEncoding.ZERO_ONE
    assert c.seeds == tuple(range(10))
    assert c.mnist_pixels == 100
    assert c.mnist_max_samples == 10_000
    assert c.activation is ActivationMode.APPROXIMATE
    assert c.test_fraction == 0.3


def test_yaml_round_trip_and_dotted_keys():
    c = ExperimentConfig.from_yaml(
        "n_r: [4, 8]\nridge: 1e-6\npgd.max_iters: 7\npgd:\n  step_size: 0.5\nricean_k: [rayleigh, 0, 1e2, inf]\n"
    )
    assert c.n_r == (4, 8) and c.ridge == 1e-6
    assert c.pgd.max_iters == 7 and c.pgd.step_size == 0.5
    assert c.ricean_k == (RAYLEIGH, 0.0, 100.0, math.inf)
    assert ExperimentConfig.from_yaml(c.to_yaml()) == c
    assert ExperimentConfig.from_yaml("") == ExperimentConfig()


def test_overrides():
    c = ExperimentConfig().with_overrides(["n_r=[16, 32]", "pgd.phase_range=full", "variants=[ota]",
                                           "snr_db=5"])
    assert c.n_r == (16, 32) and c.pgd.phase_range is PhaseRange.FULL_CIRCLE
    assert c.variants == (Variant.OTA,) and c.snr_db == (5.0,)
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig().with_overrides(["nr=[1]"])
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig().with_overrides(["n_r"])


@pytest.mark.parametrize("bad", [
    dict(n_r=[]), dict(seeds=[]), dict(datasets=["iris"]), dict(ridge=0), dict(ricean_k=[-1]),
    dict(ricean_k=["los"]), dict(bias_reference="spectral"), dict(workers=0), dict(layer_size=2.5),
])
def test_invalid_configs(bad):
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(**bad)


def test_unknown_keys_rejected():
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.from_mapping({"n_rr": [1]})
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.from_mapping({"pgd.steps": 3})


def test_record_count_and_order():
    c = small_config(variants=["ideal"], n_r=[8, 16], seeds=[0, 1, 2])
    recs = run(c)
    assert len(recs) == 6
    assert [(r.n_r, r.seed) for r in recs] == [(8, 0), (8, 1), (8, 2), (16, 0), (16, 1), (16, 2)]
    c = small_config(ricean_k=["rayleigh", 1.0], snr_db=[5, 15], seeds=[0])
    assert len(run(c)) == 1 * 2 * 2 * 2 * 2 * 1


def test_full_sweep_is_byte_identical():
    c = small_config(ricean_k=["rayleigh", 10])
    a, b = format_csv(run(c)), format_csv(run(c))
    assert a == b
    assert "nan" not in a


def test_master_seed_changes_results():
    a = format_csv(run(small_config(variants=["ideal"])))
    b = format_csv(run(small_config(variants=["ideal"], master_seed=1)))
    assert a != b


def test_subset_reproduces_full_sweep_rows():
    full = run(small_config(ricean_k=["rayleigh", 10]))
    sub = run(small_config(variants=["ota"], n_r=[16], seeds=[2], ricean_k=[10]))
    match = [r for r in full if (r.variant, r.n_r, r.seed, r.ricean_k) == ("ota", 16, 2, 10.0)]
    assert sub == match


def test_workers_do_not_change_output():
    c = small_config()
    assert format_csv(run(c)) == format_csv(run(dataclasses.replace(c, workers=2)))


def test_variants_share_front_system():
    c = small_config()
    ideal = build_system(c, SweepPoint("wbcd", Variant.IDEAL, 16, RAYLEIGH, 15.0, 1), 30)
    ota = build_system(c, SweepPoint("wbcd", Variant.OTA, 16, RAYLEIGH, 15.0, 1), 30)
    assert np.array_equal(ideal[0].H, ota[0].H)
    assert np.array_equal(ideal[1].b, ota[1].b)
    assert ideal[0].n_layers == 0 and ota[0].n_layers == 2
    assert ideal[0].H.shape == (16, 30)


def test_ota_records_carry_pgd_fields():
    recs = run(small_config(n_r=[8], seeds=[0]))
    ideal, ota = recs
    assert ideal.pgd_iters is None and ideal.pgd_final_objective is None
    assert ota.pgd_iters is not None and ota.pgd_iters <= 20 and ota.pgd_final_objective >= 0
    assert ideal.train_ls_error == ota.train_ls_error
    for r in recs:
        assert 0 <= r.train_accuracy <= 1 and 0 <= r.test_accuracy <= 1 and r.error == ""


def test_timing_recorded_when_enabled():
    rec = run(small_config(n_r=[8], seeds=[0], variants=["ideal"], timing=True))[0]
    assert rec.wallclock_ms > 0


def test_numeric_failures_become_error_rows(monkeypatch):
    import nlcms_elm.experiment as exp
    from nlcms_elm.errors import NumericFailureError

    real_train = exp.train

    def flaky(data, channels, bias, cfg, rng=None):
        if channels.n_r == 16:
            raise NumericFailureError("Cholesky factorization failed")
        return real_train(data, channels, bias, cfg, rng=rng)

    monkeypatch.setattr(exp, "train", flaky)
    recs = run(small_config(variants=["ideal"], seeds=[0]))
    assert recs[0].error == ""
    assert recs[1].error.startswith("NumericFailureError")
    assert math.isnan(recs[1].test_accuracy)
    assert summarize(recs) == {("wbcd", "ideal", 8, RAYLEIGH, 15.0): recs[0].test_accuracy}


def test_missing_dataset_fails_before_computation(tmp_path, monkeypatch):
    import nlcms_elm.experiment as exp

    monkeypatch.delenv(DATA_ROOT_ENV, raising=False)
    called = []
    monkeypatch.setattr(exp, "run_point", lambda *a, **k: called.append(1))
    with pytest.raises(FileNotFoundError):
        run(small_config(datasets=["wbcd", "parkinsons"], data_root=str(tmp_path)))
    assert not called


def _record(**kw):
    base = dict(dataset="wbcd", variant="ota", n_r=64, ricean_k=RAYLEIGH, snr_db=15.0, seed=3,
                train_accuracy=0.9624060150375939, test_accuracy=1 / 3, train_ls_error=123456789.0,
                pgd_final_objective=1.23456789e-7, pgd_iters=1500, wallclock_ms=12.5)
    return ExperimentRecord(**{**base, **kw})


def test_csv_empty_and_single(tmp_path):
    path = tmp_path / "out.csv"
    write_csv([], path)
    assert path.read_bytes() == (",".join(RECORD_FIELDS) + "\n").encode()
    write_csv([_record()], path)
    lines = path.read_bytes().split(b"\n")
    assert len(lines) == 3 and lines[-1] == b""
    assert b"\r" not in path.read_bytes()
    assert lines[1] == b"wbcd,ota,64,rayleigh,15,3,0.962406,0.333333,1.23457e+08,1.23457e-07,1500,12.5,"


def test_csv_round_trip(tmp_path):
    recs = [_record(), _record(variant="ideal", ricean_k=100.0, pgd_final_objective=None, pgd_iters=None,
                               wallclock_ms=None, error='bad, "quoted" cell')]
    path = tmp_path / "out.csv"
    write_csv(recs, path)
    back = read_csv(path)
    for orig, parsed in zip(recs, back):
        for name in RECORD_FIELDS:
            a, b = getattr(orig, name), getattr(parsed, name)
            if isinstance(a, float):
                assert b == pytest.approx(a, rel=5e-6)
            else:
                assert a == b


def test_csv_write_error_names_path(tmp_path):
    target = tmp_path / "missing" / "out.csv"
    with pytest.raises(OSError) as info:
        write_csv([], target)
    assert str(target) in str(info.value)


def test_cli_run_writes_csv(tmp_path, capsys):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("datasets: [wbcd]\nvariants: [ideal]\nn_r: [8]\nseeds: [0, 1]\n")
    out = tmp_path / "res.csv"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--no-timing",
                 "--override", "n_r=[8, 16]", "--seed", "5"]) == 0
    recs = read_csv(out)
    assert len(recs) == 4
    assert main(["run", "--config", str(cfg), "--no-timing", "--override", "n_r=[8, 16]",
                 "--seed", "5"]) == 0
    assert capsys.readouterr().out == out.read_text()


def test_cli_errors(tmp_path, capsys):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("datasets: [parkinsons]\nn_r: [8]\n")
    assert main(["run", "--config", str(cfg), "--override", f"data_root={tmp_path}"]) == 3
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 2
    assert main(["run", "--config", str(cfg), "--override", "bogus=1"]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_defaults(capsys):
    assert main(["defaults"]) == 0
    assert ExperimentConfig.from_yaml(capsys.readouterr().out) == ExperimentConfig()
