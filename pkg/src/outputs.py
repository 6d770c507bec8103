"""
Run outputs: summary metrics, the CSV trace, SVG tracking plots and a JSON
metrics file.
"""

# src/outputs.py

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Any, Dict, List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from src.contact import CONTACT_NAMES  # noqa: E402
from src.errors import EmptyTraceError, OutputWriteError  # noqa: E402
from src.model import PHASE_ORDER, SUBSYSTEMS, MissionPhase  # noqa: E402
from src.simulation import AXES, PassivityReport, SimTrace  # noqa: E402
from utils.output_format import OutputFormat  # noqa: E402

if TYPE_CHECKING:
    from src.scenario import ScenarioConfig

logger = logging.getLogger(__name__)

# Window after the first contact used for the impact overshoot (s)
IMPACT_WINDOW = 1.0

PHASE_COLORS = {
    MissionPhase.FREE_FLIGHT.value: "#dfe9f5",
    MissionPhase.DOCK.value: "#f9e3c6",
    MissionPhase.AERIAL_GRASP.value: "#d9f0d3",
}

# Measured and setpoint columns of each tracking plot
TRACKED = {
    "uav": ("uav_pos", "uav_sp", "UAV position (m)"),
    "manipulator": ("ee_pos", "ee_sp", "end-effector position in F_m (m)"),
}


@dataclass
class SummaryMetrics:
    """Headline numbers of one run."""

    scenario: str
    rms_error: Dict[str, Dict[str, List[float]]] = field(default_factory=dict)
    impact_overshoot: Optional[float] = None
    contact_time: Optional[float] = None
    detach_time: Optional[float] = None
    passivity_passed: Optional[bool] = None
    passivity_violations: Dict[str, int] = field(default_factory=dict)
    max_attitude_error_deg: float = 0.0
    max_docked_deviation: Optional[float] = None
    max_friction_ratio: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _errors(frame: pd.DataFrame, measured: str, setpoint: str) -> np.ndarray:
    return np.column_stack(
        [frame[f"{measured}_{a}"] - frame[f"{setpoint}_{a}"] for a in AXES]
    )


def friction_ratios(frame: pd.DataFrame) -> np.ndarray:
    """|f_t| / f_n of every loaded contact on every row (empty if none)."""
    ratios = []
    for i in range(len(CONTACT_NAMES)):
        t1 = frame[f"fc_{3 * i:02d}"].to_numpy()
        t2 = frame[f"fc_{3 * i + 1:02d}"].to_numpy()
        normal = frame[f"fc_{3 * i + 2:02d}"].to_numpy()
        loaded = normal > 0.0
        ratios.append(np.hypot(t1[loaded], t2[loaded]) / normal[loaded])
    return np.concatenate(ratios) if ratios else np.zeros(0)


def compute_metrics(
    trace: SimTrace, report: Optional[PassivityReport] = None
) -> SummaryMetrics:
    """
    Summarise a trace.

    :raises EmptyTraceError: if the trace has no rows.
    """
    if trace.is_empty:
        raise EmptyTraceError()
    frame = trace.frame
    metrics = SummaryMetrics(scenario=str(trace.metadata.get("scenario", "")))

    for phase in PHASE_ORDER:
        rows = frame[frame["mission"] == phase.value]
        if rows.empty:
            continue
        metrics.rms_error[phase.value] = {
            name: np.sqrt(np.mean(_errors(rows, m, s) ** 2, axis=0)).tolist()
            for name, (m, s, _) in TRACKED.items()
        }

    metrics.contact_time = trace.phase_entry_time(MissionPhase.DOCK)
    metrics.detach_time = trace.phase_entry_time(MissionPhase.AERIAL_GRASP)
    deviation = np.linalg.norm(_errors(frame, "uav_pos", "uav_sp"), axis=1)
    if metrics.contact_time is not None:
        after = (frame["time"] >= metrics.contact_time) & (
            frame["time"] <= metrics.contact_time + IMPACT_WINDOW
        )
        metrics.impact_overshoot = float(deviation[after.to_numpy()].max())
        docked = (frame["mission"] == MissionPhase.DOCK.value).to_numpy()
        metrics.max_docked_deviation = float(deviation[docked].max())

    metrics.max_attitude_error_deg = float(frame["attitude_error_deg"].max())
    ratios = friction_ratios(frame)
    metrics.max_friction_ratio = float(ratios.max()) if ratios.size else 0.0
    if report is not None:
        metrics.passivity_passed = report.passed
        metrics.passivity_violations = {
            sub: report.violations[sub] + report.impact_violations[sub]
            for sub in SUBSYSTEMS
        }
    return metrics


# ================================================
# Writers
# ================================================


def write_csv(trace: SimTrace, path: str) -> str:
    try:
        trace.to_csv(path)
    except OSError as error:
        raise OutputWriteError(path, error.strerror or str(error)) from error
    return path


def write_metrics(metrics: SummaryMetrics, path: str) -> str:
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(metrics.to_dict(), f, indent=2)
    except OSError as error:
        raise OutputWriteError(path, error.strerror or str(error)) from error
    return path


def shade_phases(ax, frame: pd.DataFrame) -> None:
    """Shade each contiguous mission phase in the background of `ax`."""
    time = frame["time"].to_numpy()
    mission = frame["mission"].to_numpy()
    starts = [0] + [i for i in range(1, len(mission)) if mission[i] != mission[i - 1]]
    ends = starts[1:] + [len(mission) - 1]
    for start, end in zip(starts, ends):
        ax.axvspan(
            time[start],
            time[end],
            color=PHASE_COLORS.get(mission[start], "#eeeeee"),
            alpha=0.6,
            lw=0,
        )


def _plot_panel(ax, frame: pd.DataFrame, kind: str) -> None:
    time = frame["time"]
    shade_phases(ax, frame)
    if kind in TRACKED:
        measured, setpoint, label = TRACKED[kind]
        for axis, color in zip(AXES, ("tab:blue", "tab:orange", "tab:green")):
            ax.plot(time, frame[f"{measured}_{axis}"], color=color, label=axis)
            ax.plot(time, frame[f"{setpoint}_{axis}"], color=color, ls="--", lw=0.8)
        ax.set_ylabel(label)
    elif kind == "gripper":
        ax.plot(time, frame["aperture"], label="aperture")
        ax.plot(time, frame["finger_sp"], ls="--", lw=0.8, label="setpoint")
        ax.set_ylabel("aperture (m)")
    elif kind == "energy":
        for sub in SUBSYSTEMS:
            ax.plot(time, frame[f"{sub}_V"], label=sub)
        ax.set_ylabel("storage V (J)")
    ax.legend(loc="upper right", fontsize="small")


def plot_tracking(trace: SimTrace, path: str, plots: List[str]) -> str:
    """Write the requested panels, stacked over a shared time axis, as SVG."""
    frame = trace.frame
    plots = plots or ["uav"]
    plt.rcParams["svg.hashsalt"] = "flying-hand"
    fig, axes = plt.subplots(
        len(plots), 1, sharex=True, figsize=(9, 2.6 * len(plots)), squeeze=False
    )
    try:
        for ax, kind in zip(axes[:, 0], plots):
            _plot_panel(ax, frame, kind)
        axes[-1, 0].set_xlabel("time (s)")
        fig.suptitle(str(trace.metadata.get("scenario", "")))
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as error:
        raise OutputWriteError(path, error.strerror or str(error)) from error
    finally:
        plt.close(fig)
    return path


def emit_outputs(
    trace: SimTrace,
    config: "ScenarioConfig",
    report: Optional[PassivityReport] = None,
) -> Dict[str, str]:
    """
    Write the trace and its summaries to `config.output.out_dir`.

    Parameters:
    - trace (SimTrace): simulated trace
    - config (ScenarioConfig): scenario, for the output settings
    - report (PassivityReport): passivity check to include in the metrics

    Returns:
    - dict[str, str]: written path per format

    Raises:
    - EmptyTraceError: if the trace has no rows
    - OutputWriteError: if a file cannot be written
    """
    if trace.is_empty:
        raise EmptyTraceError()
    out_dir = config.output.out_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as error:
        raise OutputWriteError(out_dir, error.strerror or str(error)) from error

    stem = os.path.join(out_dir, config.name)
    written: Dict[str, str] = {}
    for fmt in OutputFormat.expand(config.output.formats):
        if fmt is OutputFormat.CSV:
            written[fmt.value] = write_csv(trace, f"{stem}.csv")
        elif fmt is OutputFormat.SVG:
            written[fmt.value] = plot_tracking(
                trace, f"{stem}.svg", list(config.output.plots)
            )
        elif fmt is OutputFormat.JSON:
            metrics = compute_metrics(trace, report)
            written[fmt.value] = write_metrics(metrics, f"{stem}_metrics.json")
    for fmt_name, path in written.items():
        logger.info("wrote %s output to %s", fmt_name, path)
    return written
