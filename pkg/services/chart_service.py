"""Plotly HTML charts written next to the CSV outputs; display only."""
from __future__ import annotations

from pathlib import Path
from typing import List, Sequence

import plotly.graph_objects as go

from domain.arena import EvalMatrix
from domain.simulation import OpinionTrajectory, SpreadState
from domain.theory import TheoryTrajectory
from storage.paths import ensure_dir


CHART_HEIGHT = 360
_MARGIN = dict(l=40, r=20, t=40, b=40)


def _write(fig: go.Figure, path: str | Path) -> Path:
    p = Path(path)
    ensure_dir(p.parent)
    # fixed div id keeps re-runs byte-stable
    fig.write_html(str(p), include_plotlyjs="cdn", full_html=True, div_id=p.stem)
    return p


def _layout(fig: go.Figure, title: str, x_title: str, y_title: str) -> None:
    fig.update_layout(
        title=title,
        height=CHART_HEIGHT,
        margin=_MARGIN,
        xaxis_title=x_title,
        yaxis_title=y_title,
        hovermode="x unified",
    )


def eval_heatmap(matrix: EvalMatrix, path: str | Path) -> Path:
    """Rows: detector F^i; columns: dataset D^j."""
    n_rows, n_cols = matrix.f1.shape
    fig = go.Figure(go.Heatmap(
        z=matrix.f1,
        x=[f"D{j}" for j in range(n_cols)],
        y=[f"F{i}" for i in range(n_rows)],
        colorscale="RdBu",
        zmin=0.0,
        zmax=1.0,
        text=[[f"{v:.3f}" for v in row] for row in matrix.f1],
        texttemplate="%{text}",
        hovertemplate="detector %{y}<br>data %{x}<br>F1 %{z:.4f}<extra></extra>",
    ))
    fig.update_layout(title=f"F1 ({matrix.row_mode})", height=CHART_HEIGHT, margin=_MARGIN)
    fig.update_yaxes(autorange="reversed")
    return _write(fig, path)


def opinion_lines(trajectories: Sequence[OpinionTrajectory], names: Sequence[str], path: str | Path) -> Path:
    """Per-step mean opinion with a ±std band, one line per trajectory."""
    if len(trajectories) != len(names):
        raise ValueError("opinion_lines: one name per trajectory")
    fig = go.Figure()
    for traj, name in zip(trajectories, names):
        steps: List[int] = traj.step_numbers
        m, s = traj.means, traj.stds
        fig.add_trace(go.Scatter(
            x=steps + steps[::-1],
            y=list(m + s) + list((m - s)[::-1]),
            fill="toself",
            line=dict(width=0),
            opacity=0.2,
            showlegend=False,
            hoverinfo="skip",
            name=f"{name} std",
        ))
        fig.add_trace(go.Scatter(x=steps, y=m, mode="lines", line=dict(width=2), name=name))
    _layout(fig, "Group opinion", "step", "mean opinion")
    return _write(fig, path)


def spread_curve(state: SpreadState, path: str | Path) -> Path:
    steps = list(range(len(state.counts)))
    fig = go.Figure(go.Scatter(
        x=steps,
        y=state.counts,
        mode="lines+markers",
        line=dict(width=2, color="#d92d20"),
        name="authors",
        hovertemplate="step %{x}<br>authors %{y}<extra></extra>",
    ))
    _layout(fig, "Cumulative authors", "step", "authors")
    return _write(fig, path)


def theory_lines(traj: TheoryTrajectory, path: str | Path) -> Path:
    steps = [s.step for s in traj.steps]
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=steps, y=[s.avg_tv for s in traj.steps], mode="lines", name="avg TV"))
    fig.add_trace(go.Scatter(x=steps, y=[s.max_f_dev for s in traj.steps], mode="lines", name="max |F - 0.5|"))
    _layout(fig, "Alternating optimization", "outer step", "distance")
    fig.update_yaxes(type="log")
    return _write(fig, path)
