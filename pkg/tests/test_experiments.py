import math

import numpy as np
import pytest
from scipy import integrate

from fisherbound import experiments
from fisherbound.errors import DegenerateCovarianceError, DomainError, EmptyCurveError, RunFailedError, ValidationError
from fisherbound.experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    curve_to_csv,
    emit_csv,
    empty_curve,
    information_loss_db,
    nrmse,
    read_csv,
    run_cubic_setups,
    run_experiment,
    suffixed_path,
)
from fisherbound.plotting import emit_svg, plot_curves


def cubic_exact_fim(theta, a, b):
    """Exact FIM of z = theta x^3 + x, x ~ N(a, b), integrated over x."""

    def f(x):
        slope = 3 * theta * x * x + 1
        dx = -x**3 / slope
        score = -(x - a) / b * dx - (3 * x * x + 6 * theta * x * dx) / slope
        return score**2 * math.exp(-0.5 * (x - a) ** 2 / b) / math.sqrt(2 * math.pi * b)

    return integrate.quad(f, -np.inf, np.inf, epsrel=1e-11, limit=400)[0]


def test_loss_examples():
    assert information_loss_db(0.5, 0.5) == 0.0
    assert information_loss_db(0.05, 0.5) == pytest.approx(-10.0, rel=1e-14)
    assert information_loss_db(0.0, 3.0) == -300.0
    with pytest.raises(DomainError):
        information_loss_db(1.0, 0.0)


def test_nrmse_examples():
    assert nrmse(0.04, 0.4) == pytest.approx(0.5, rel=1e-14)
    assert nrmse(1.0, 1.0) == 1.0
    assert nrmse(0.09, -0.3) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(DomainError):
        nrmse(1.0, 0.0)


def test_gauss_mean_single_point():
    cfg = ExperimentConfig(model="ref:gauss-mean", sigma2=1.0, transforms="z", theta_grid=[0.0], n_samples=100_000)
    curve = run_experiment(cfg)
    assert len(curve.rows) == 1
    assert curve.points[0].value == pytest.approx(1.0, rel=0.02)
    assert curve.rows[0]["nrmse"] is None  # undefined at theta = 0


def test_default_grids():
    assert ExperimentConfig(model="saleh").grid().size == 40
    g = ExperimentConfig(model="rician").grid()
    assert g[0] > 0.05 and g[-1] == 2.0
    g = ExperimentConfig(model="cubic").grid()
    assert g[0] == 0.1 and g[-1] == 1.0 and g.size == 19
    assert ExperimentConfig(model="saleh", theta_min=1, theta_max=2, theta_steps=3).grid().tolist() == [1.0, 1.5, 2.0]


def test_config_validation():
    with pytest.raises(ValidationError):
        ExperimentConfig(theta_grid=[1.0, 1.0]).validate()
    with pytest.raises(ValidationError):
        ExperimentConfig(theta_steps=0).validate()
    with pytest.raises(DomainError):
        ExperimentConfig(model="saleh", theta_grid=[0.0]).validate()
    with pytest.raises(DomainError, match="theta-h"):
        ExperimentConfig(model="saleh", theta_grid=[0.05], fd_step=0.1).validate()
    with pytest.raises(ValidationError):
        ExperimentConfig(reg_tol=2.0).validate()
    with pytest.raises(ValidationError):
        ExperimentConfig(n_samples=1).validate()


def test_fingerprint_ignores_outputs():
    a = ExperimentConfig(model="rician", csv="a.csv")
    b = ExperimentConfig(model="rician", csv="b.csv", workers=4)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != ExperimentConfig(model="rician", seed=2).fingerprint()


def _small(model="saleh", **kw):
    base = dict(model=model, theta_min=0.5, theta_max=2.0, theta_steps=4, n_samples=20_000)
    base.update(kw)
    return ExperimentConfig(**base)


def test_csv_format_and_roundtrip(tmp_path):
    path = tmp_path / "c.csv"
    curve = run_experiment(_small(csv=str(path)))
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 5
    # 9 significant digits
    assert len(lines[1].split(",")[1].replace(".", "").lstrip("0")) <= 9
    rows = read_csv(path)
    for row, orig in zip(rows, curve.rows):
        assert row["theta"] == orig["theta"]
        assert row["bound"] == pytest.approx(orig["bound"], rel=1e-8)
        assert row["effective_rank"] == orig["effective_rank"]
        assert row["error"] is None


def test_one_point_csv(tmp_path):
    curve = run_experiment(_small(theta_grid=[1.0]))
    assert len(curve_to_csv(curve).splitlines()) == 2


def test_empty_curve(tmp_path):
    path = tmp_path / "e.csv"
    emit_csv(empty_curve(), path)
    assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"
    with pytest.raises(EmptyCurveError):
        emit_svg(empty_curve(), tmp_path / "e.svg")
    with pytest.raises(EmptyCurveError):
        plot_curves([], tmp_path / "e.svg", "loss_db")


def test_csv_write_failure_names_path(tmp_path):
    bad = tmp_path / "missing" / "x.csv"
    with pytest.raises(OSError, match="missing"):
        emit_csv(empty_curve(), bad)


def test_read_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValidationError):
        read_csv(path)


def test_svg_output(tmp_path):
    path = tmp_path / "s.svg"
    curve = run_experiment(_small(svg=str(path)))
    text = path.read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text
    assert "<image" not in text and "@import" not in text and 'href="http' not in text
    assert "<path" in text
    again = tmp_path / "t.svg"
    emit_svg(curve, again)
    emit_svg(curve, path)
    assert path.read_bytes() == again.read_bytes()


def test_loss_normalizers():
    saleh = run_experiment(_small("saleh", theta_grid=[2.0]))
    assert saleh.rows[0]["input_fisher"] == 1 / 8
    rician = run_experiment(_small("rician", theta_grid=[1.0]))
    assert rician.rows[0]["input_fisher"] == 1.0
    assert rician.rows[0]["loss_db"] == pytest.approx(10 * math.log10(rician.rows[0]["bound"]))
    cubic = run_experiment(_small("cubic", a=0.0, b=1.0, theta_grid=[0.5]))
    assert cubic.rows[0]["loss_db"] is None and cubic.rows[0]["nrmse"] > 0


def test_determinism_and_parallel_grid(tmp_path):
    a = curve_to_csv(run_experiment(_small("rician")))
    b = curve_to_csv(run_experiment(_small("rician")))
    c = curve_to_csv(run_experiment(_small("rician", workers=8)))
    assert a == b == c
    assert a != curve_to_csv(run_experiment(_small("rician", seed=2)))


def _failing(bad_thetas):
    real = experiments.evaluate_point

    def fake(model, tset, theta, config, workers=1):
        if theta in bad_thetas:
            raise DegenerateCovarianceError("synthetic failure")
        return real(model, tset, theta, config, workers)

    return fake


def test_flag_and_continue(monkeypatch):
    monkeypatch.setattr(experiments, "evaluate_point", _failing({0.5}))
    curve = run_experiment(_small(theta_steps=6, theta_max=3.0))
    assert curve.flagged == 1
    assert curve.rows[0]["error"].startswith("DegenerateCovarianceError")
    assert math.isnan(curve.rows[0]["bound"]) and curve.rows[1]["error"] is None


def test_run_level_failure(monkeypatch, tmp_path):
    monkeypatch.setattr(experiments, "evaluate_point", _failing({0.5, 1.0}))
    path = tmp_path / "f.csv"
    with pytest.raises(RunFailedError) as info:
        run_experiment(_small(csv=str(path)))
    assert info.value.curve.flagged == 2
    assert "DegenerateCovarianceError" in path.read_text()


def test_suffixed_path():
    assert suffixed_path("out/cubic.csv", 0.0, 2.0) == "out/cubic_a0_b2.csv"
    assert suffixed_path("cubic", 1.0, 1.0) == "cubic_a1_b1"


def test_cubic_setups_write_each(tmp_path):
    cfg = ExperimentConfig(model="cubic", theta_grid=[0.5], n_samples=20_000,
                           csv=str(tmp_path / "cubic.csv"), svg=str(tmp_path / "cubic.svg"))
    curves = run_cubic_setups(cfg)
    assert len(curves) == 4
    for a, b in ((0, 1), (1, 1), (0, 2), (2, 2)):
        assert (tmp_path / f"cubic_a{a}_b{b}.csv").exists()
    assert (tmp_path / "cubic.svg").exists()


@pytest.mark.parametrize("a,b", [(0.0, 1.0), (2.0, 2.0)])
def test_cubic_bound_below_exact_fim(a, b):
    curve = run_experiment(ExperimentConfig(model="cubic", a=a, b=b, theta_grid=[0.1, 0.5, 1.0], n_samples=200_000))
    for p in curve.points:
        exact = cubic_exact_fim(p.theta, a, b)
        assert p.value <= exact * (1 + 3 * p.rel_se)
        assert p.value > 0.8 * exact  # the 7-bank is nearly sufficient here
