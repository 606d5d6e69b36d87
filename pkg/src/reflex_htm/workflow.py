"""LangGraph workflow for reflex-htm experiments.

This module provides convenience functions for running experiments.
The graph definition is in graph.py for langgraph dev compatibility.
"""

from collections.abc import Iterator
from typing import Any

from langgraph.checkpoint.memory import MemorySaver

from .graph import ExperimentGraphState, create_graph, graph
from .models import ExperimentSpec

__all__ = [
    "ExperimentGraphState",
    "create_graph",
    "graph",
    "compile_workflow",
    "run_experiment",
    "stream_experiment",
    "get_workflow_visualization",
]


def compile_workflow(checkpointer: MemorySaver | None = None):
    """Compile the workflow into an executable graph.

    Args:
        checkpointer: Optional memory saver for persistence.

    Returns:
        Compiled graph ready for execution.
    """
    builder = create_graph()

    if checkpointer:
        return builder.compile(checkpointer=checkpointer)
    return builder.compile()


def _initial_state(spec: ExperimentSpec) -> ExperimentGraphState:
    return {
        "spec": spec,
        "values": [],
        "labels": None,
        "dataset_name": "",
        "runs": {},
        "sweep_rows": [],
        "reports": {},
        "written": [],
        "errors": [],
    }


def _thread(thread_id: str | None) -> tuple[MemorySaver | None, dict[str, Any]]:
    if not thread_id:
        return None, {}
    return MemorySaver(), {"configurable": {"thread_id": thread_id}}


def run_experiment(spec: ExperimentSpec, thread_id: str | None = None) -> dict[str, Any]:
    """Run the experiment workflow.

    Args:
        spec: What to run and where to write the reports.
        thread_id: Optional thread ID for persistence.

    Returns:
        The final state with runs, reports and written file paths.
    """
    checkpointer, config = _thread(thread_id)
    compiled_graph = compile_workflow(checkpointer=checkpointer)
    return compiled_graph.invoke(_initial_state(spec), config=config or None)


def stream_experiment(
    spec: ExperimentSpec, thread_id: str | None = None
) -> Iterator[dict[str, Any]]:
    """Stream the experiment workflow execution.

    Yields:
        Updates from each node as they complete.
    """
    checkpointer, config = _thread(thread_id)
    compiled_graph = compile_workflow(checkpointer=checkpointer)
    yield from compiled_graph.stream(
        _initial_state(spec), config=config or None, stream_mode="updates"
    )


def get_workflow_visualization() -> str:
    """Get a Mermaid diagram of the workflow."""
    try:
        return graph.get_graph().draw_mermaid()
    except Exception:
        return "Visualization not available"
