"""Tests for the rendered figures: files exist, are PNGs, and render
deterministically."""

import pytest

from shiftreg.errors import InputError
from shiftreg.figures import plot_comparison, plot_loss_curves, plot_sweep
from shiftreg.reports import report_to_dict

from test_reports import fake_aggregate

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_loss_curves_renders_a_png(tmp_path):
    report = report_to_dict(fake_aggregate())
    path = tmp_path / "loss_curves.png"
    plot_loss_curves(report, path)
    data = path.read_bytes()
    assert data[:8] == PNG_MAGIC
    assert len(data) > 1000


def test_loss_curves_many_trials_skip_the_legend(tmp_path):
    report = report_to_dict(fake_aggregate(f1s=tuple(0.7 + 0.01 * i for i in range(12))))
    path = tmp_path / "many.png"
    plot_loss_curves(report, path)
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_sweep_plot_renders_a_png(tmp_path):
    rows = [(0.0, fake_aggregate(f1s=(0.9, 0.92))),
            (1.0, fake_aggregate(f1s=(0.8, 0.86)))]
    path = tmp_path / "sweep.png"
    plot_sweep("epsilon", rows, path)
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_comparison_plot_renders_grouped_bars(tmp_path):
    reports = [
        report_to_dict(fake_aggregate(dataset="cora")),
        report_to_dict(fake_aggregate(dataset="citeseer", f1s=(0.6, 0.66))),
        report_to_dict(fake_aggregate(dataset="cora", lam=0.0, beta=0.0,
                                      f1s=(0.68, 0.74))),
    ]
    path = tmp_path / "comparison.png"
    plot_comparison(reports, path)
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_figures_render_the_same_bytes_twice(tmp_path):
    report = report_to_dict(fake_aggregate())
    a = tmp_path / "a.png"
    b = tmp_path / "b.png"
    plot_loss_curves(report, a)
    plot_loss_curves(report, b)
    assert a.read_bytes() == b.read_bytes()


def test_figures_reject_empty_inputs(tmp_path):
    with pytest.raises(InputError, match="no trials"):
        plot_loss_curves({"trials": [], "config": {}}, tmp_path / "x.png")
    with pytest.raises(InputError, match="no rows"):
        plot_sweep("epsilon", [], tmp_path / "x.png")
    with pytest.raises(InputError, match="no reports"):
        plot_comparison([], tmp_path / "x.png")
