import json
from dataclasses import replace

import matplotlib.pyplot as plt
import numpy as np
import pytest

from src.errors import EmptyTraceError, OutputWriteError
from src.outputs import (
    compute_metrics,
    emit_outputs,
    friction_ratios,
    plot_tracking,
    shade_phases,
)
from src.scenario import OutputConfig, load_preset
from src.simulation import SimTrace
from utils.output_format import OutputFormat


def _config(tmp_path, formats=("all",), plots=("uav", "manipulator")):
    config = load_preset("hover")
    output = OutputConfig(out_dir=str(tmp_path / "out"), formats=formats, plots=plots)
    return replace(config, output=output)


# ================================================
# Formats
# ================================================


def test_all_expands_to_every_format():
    assert OutputFormat.expand(["all"]) == [
        OutputFormat.CSV,
        OutputFormat.SVG,
        OutputFormat.JSON,
    ]
    assert OutputFormat.expand(["json", "csv"]) == [OutputFormat.CSV, OutputFormat.JSON]


def test_unknown_format_is_rejected():
    with pytest.raises(ValueError):
        OutputFormat.expand(["pdf"])


# ================================================
# Metrics
# ================================================


def test_hover_metrics(hover_trace):
    metrics = compute_metrics(hover_trace)
    assert metrics.scenario == "hover"
    assert list(metrics.rms_error) == ["FreeFlight"]
    assert max(metrics.rms_error["FreeFlight"]["uav"]) < 1e-9
    assert metrics.contact_time is None
    assert metrics.impact_overshoot is None
    assert metrics.passivity_passed is None
    assert metrics.max_friction_ratio == 0.0


def test_mission_metrics(fig3_trace, fig3_report):
    metrics = compute_metrics(fig3_trace, fig3_report)
    assert set(metrics.rms_error) == {"FreeFlight", "Dock", "AerialGrasp"}
    assert metrics.contact_time == fig3_trace.metadata["contact_time"]
    assert 6.0 <= metrics.contact_time <= 8.0
    assert metrics.impact_overshoot is not None
    assert metrics.max_docked_deviation < 0.2
    mu = load_preset("fig3-mission").contact.friction
    assert metrics.max_friction_ratio <= mu + 1e-9
    assert set(metrics.passivity_violations) == {"uav", "manipulator", "gripper"}


def test_metrics_of_empty_trace(hover_trace):
    empty = SimTrace(hover_trace.frame.iloc[0:0], hover_trace.metadata)
    with pytest.raises(EmptyTraceError):
        compute_metrics(empty)


def test_friction_ratios_ignore_unloaded_contacts(hover_trace):
    frame = hover_trace.frame.iloc[:3].copy()
    frame.loc[:, "fc_00"] = 0.3
    frame.loc[:, "fc_02"] = 1.0
    ratios = friction_ratios(frame)
    np.testing.assert_allclose(ratios, [0.3, 0.3, 0.3])


# ================================================
# Files
# ================================================


def test_emit_outputs_writes_every_format(tmp_path, hover_trace):
    config = _config(tmp_path)
    written = emit_outputs(hover_trace, config)
    assert set(written) == {"csv", "svg", "json"}
    assert written["csv"].endswith("hover.csv")
    assert written["json"].endswith("hover_metrics.json")
    with open(written["json"], encoding="utf-8") as f:
        assert json.load(f)["scenario"] == "hover"
    with open(written["svg"], encoding="utf-8") as f:
        assert "<svg" in f.read()


def test_emit_outputs_respects_selection(tmp_path, hover_trace):
    written = emit_outputs(hover_trace, _config(tmp_path, formats=("csv",)))
    assert list(written) == ["csv"]
    assert not (tmp_path / "out" / "hover.svg").exists()


def test_svg_is_reproducible(tmp_path, hover_trace):
    first = plot_tracking(hover_trace, str(tmp_path / "a.svg"), ["uav", "energy"])
    second = plot_tracking(hover_trace, str(tmp_path / "b.svg"), ["uav", "energy"])
    with open(first, "rb") as a, open(second, "rb") as b:
        assert a.read() == b.read()


def test_unwritable_directory(tmp_path, hover_trace):
    blocker = tmp_path / "out"
    blocker.write_text("not a directory", encoding="utf-8")
    with pytest.raises(OutputWriteError) as excinfo:
        emit_outputs(hover_trace, _config(tmp_path))
    assert excinfo.value.path == str(blocker)


def test_empty_trace_writes_nothing(tmp_path, hover_trace):
    empty = SimTrace(hover_trace.frame.iloc[0:0], hover_trace.metadata)
    with pytest.raises(EmptyTraceError):
        emit_outputs(empty, _config(tmp_path))
    assert not (tmp_path / "out").exists()


def test_phases_are_shaded(fig3_trace):
    fig, ax = plt.subplots()
    try:
        shade_phases(ax, fig3_trace.frame)
        assert len(ax.patches) == 3
    finally:
        plt.close(fig)
