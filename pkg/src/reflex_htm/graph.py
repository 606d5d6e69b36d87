"""LangGraph graph export for langgraph dev server."""

from typing import Any, TypedDict

from langgraph.graph import END, START, StateGraph

from .models import ExperimentSpec, ExperimentState, SweepRow


class ExperimentGraphState(TypedDict, total=False):
    """State for the experiment workflow."""

    spec: ExperimentSpec

    # Loaded stream
    values: list[float]
    labels: list[bool] | None
    dataset_name: str

    # Results: mode label -> RunResult
    runs: dict[str, Any]
    sweep_rows: list[SweepRow]

    # Built reports: file name -> DataFrame or JSON-ready dict
    reports: dict[str, Any]

    # Saved file paths
    written: list[str]

    errors: list[str]


def _as_state(state: ExperimentGraphState) -> ExperimentState:
    spec = state["spec"]
    if not isinstance(spec, ExperimentSpec):
        spec = ExperimentSpec.model_validate(spec)
    return ExperimentState(
        spec=spec,
        values=state.get("values", []),
        labels=state.get("labels"),
        dataset_name=state.get("dataset_name", ""),
        runs=state.get("runs", {}),
        sweep_rows=state.get("sweep_rows", []),
        reports=state.get("reports", {}),
        errors=state.get("errors", []),
    )


def load_stream_node(state: ExperimentGraphState) -> dict[str, Any]:
    """Node: Load the dataset or build the synthetic stream."""
    from .nodes.dataset_loader import load_stream

    return load_stream(_as_state(state))


def run_modes_node(state: ExperimentGraphState) -> dict[str, Any]:
    """Node: Run every requested mode over the stream."""
    from .nodes.mode_runner import run_modes

    return run_modes(_as_state(state))


def run_window_sweep_node(state: ExperimentGraphState) -> dict[str, Any]:
    """Node: Sweep the control-unit window against the SM-only baseline."""
    from .nodes.window_sweep import run_window_sweep

    return run_window_sweep(_as_state(state))


def build_reports_node(state: ExperimentGraphState) -> dict[str, Any]:
    """Node: Build metrics, timing, sweep and cost reports."""
    from .nodes.report_builder import build_reports

    return build_reports(_as_state(state))


def save_reports_node(state: ExperimentGraphState) -> dict[str, Any]:
    """Node: Write the reports to the output directory."""
    from .nodes.report_writer import save_reports

    return save_reports(_as_state(state))


def route_experiment(state: ExperimentGraphState) -> str:
    """Sweep when window values were given, otherwise compare modes."""
    spec = _as_state(state).spec
    return "run_window_sweep" if spec.windows else "run_modes"


def create_graph() -> StateGraph:
    """Create the experiment workflow graph.

    Workflow Structure:

        START
          │
          ▼
        load_stream (CSV dataset or synthetic stream)
          │
          ▼
        [conditional: window sweep requested?]
          │
          ├── no ───► run_modes (HTM / AHTM / H-AHTM)
          │              │
          └── yes ──► run_window_sweep (SM baseline + AHTM per window)
                         │
                         ▼
                      build_reports (metrics, timing, sweep, cost ledger)
                         │
                         ▼
                      save_reports (CSV / JSON files)
                         │
                         ▼
                        END
    """
    builder = StateGraph(ExperimentGraphState)

    builder.add_node("load_stream", load_stream_node)
    builder.add_node("run_modes", run_modes_node)
    builder.add_node("run_window_sweep", run_window_sweep_node)
    builder.add_node("build_reports", build_reports_node)
    builder.add_node("save_reports", save_reports_node)

    builder.add_edge(START, "load_stream")
    builder.add_conditional_edges(
        "load_stream",
        route_experiment,
        {
            "run_modes": "run_modes",
            "run_window_sweep": "run_window_sweep",
        },
    )
    builder.add_edge("run_modes", "build_reports")
    builder.add_edge("run_window_sweep", "build_reports")
    builder.add_edge("build_reports", "save_reports")
    builder.add_edge("save_reports", END)

    return builder


# Compiled graph referenced in langgraph.json
graph = create_graph().compile()
