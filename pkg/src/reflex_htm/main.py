"""Main entry point for reflex-htm."""

import argparse
import logging
import sys
from datetime import datetime
from typing import Any

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

# Load environment variables from .env file
load_dotenv()

from .config import Mode, get_settings, load_engine_config, parse_override
from .errors import ContractViolation, DatasetError, ReflexHtmError
from .models import ExperimentSpec
from .selftest import run_selftest
from .workflow import get_workflow_visualization, stream_experiment

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_SELFTEST = 3


def describe_validation_error(error: ValidationError) -> str:
    """List the offending keys of a pydantic validation error."""
    lines = []
    for item in error.errors():
        key = ".".join(str(part) for part in item["loc"]) or "(config)"
        lines.append(f"  - {key}: {item['msg']}")
    return "\n".join(lines)


def run_with_streaming(spec: ExperimentSpec) -> dict[str, Any]:
    """Run the experiment workflow, printing a line per finished node."""
    print(f"\n{'='*60}")
    print(f"Running reflex-htm - {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print(f"{'='*60}\n")

    final_state: dict[str, Any] = {}

    print("📊 Workflow Progress:")
    print("-" * 40)

    for update in stream_experiment(spec):
        for node_name, node_output in update.items():
            if node_name == "load_stream":
                values = node_output.get("values", [])
                labelled = "labelled" if node_output.get("labels") is not None else "unlabelled"
                print(f"  • Load Stream: ✅ Complete ({len(values)} values, {labelled})")

            elif node_name in ("run_modes", "run_window_sweep"):
                for label, run in node_output.get("runs", {}).items():
                    print(
                        f"  • Mode {label}: ✅ Complete (match rate {run.metrics.match_rate:.3f}, "
                        f"RM-served {run.rm_fraction:.3f}, {run.timing.mean_ms:.3f} ms/step)"
                    )

            elif node_name == "build_reports":
                reports = node_output.get("reports", {})
                print(f"  • Report Generation: ✅ Complete ({len(reports)} reports)")

            elif node_name == "save_reports":
                print("  • Save Reports: ✅ Complete")

            final_state.update(node_output)

    print("-" * 40)
    return final_state


def cmd_run(spec: ExperimentSpec) -> int:
    """Run an experiment and report its outcome as an exit code."""
    try:
        result = run_with_streaming(spec)
    except ValidationError as e:
        print(f"❌ Configuration error:\n{describe_validation_error(e)}")
        return EXIT_VALIDATION
    except ContractViolation as e:
        print(f"❌ Validation error: {e}")
        return EXIT_VALIDATION
    except (DatasetError, OSError) as e:
        print(f"❌ I/O error: {e}")
        return EXIT_IO
    except ReflexHtmError as e:
        print(f"❌ Validation error: {e}")
        return EXIT_VALIDATION

    for path in result.get("written", []):
        print(f"✅ Report saved to: {path}")

    for error in result.get("errors", []):
        print(f"⚠️  {error}")

    sweep = result.get("sweep_rows", [])
    if sweep:
        print("\n📊 Window sweep:")
        for row in sweep:
            print(
                f"  - W={row.window}: RM-served {row.rm_fraction:.3f}, "
                f"speedup {row.speedup:.2f}x, accuracy penalty {row.accuracy_penalty:+.3f}"
            )
    return EXIT_OK


def cmd_selftest(seed: int = 0, snapshot: str | None = None) -> int:
    """Run the oracle suites and print a pass/fail summary."""
    print("\n🧪 Selftest:")
    results = run_selftest(seed=seed, snapshot=snapshot)
    for r in results:
        mark = "✅" if r.passed else "❌"
        print(f"  • {r.name}: {mark} {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"\n❌ {len(failed)} suite(s) failed: {', '.join(failed)}")
        return EXIT_SELFTEST
    print(f"\n✅ All {len(results)} suites passed")
    return EXIT_OK


def show_workflow() -> None:
    """Display the workflow visualization."""
    print("\n📈 reflex-htm Experiment Workflow (Mermaid):\n")
    print(get_workflow_visualization())
    print()


def add_experiment_arguments(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--dataset", type=str, help="CSV file with a header row")
    source.add_argument(
        "--synth",
        type=str,
        help="Synthetic stream KIND[:key=val,...], e.g. noisy-cycle:length=2000,noise=0.05",
    )
    parser.add_argument(
        "--column", type=str, default="value", help="Value column of the dataset"
    )
    parser.add_argument(
        "--label-column", type=str, help="Dataset column marking anomalies (truthy = anomaly)"
    )
    parser.add_argument(
        "--mode",
        type=str,
        nargs="+",
        choices=[m.value for m in Mode] + [m.label for m in Mode],
        help="Modes to run (default: all)",
    )
    parser.add_argument("--config", type=str, help="Path to the engine configuration file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override one dotted configuration key (repeatable)",
    )
    parser.add_argument("--repeat", type=int, default=1, help="Runs to average timings over")
    parser.add_argument("--seed", type=int, help="Seed for the pooler, sequence memory and stream")
    parser.add_argument("--out", type=str, help="Output directory for reports")
    parser.add_argument("--trace", action="store_true", help="Also write per-step JSON-lines traces")


def build_spec(args: argparse.Namespace, windows: list[int] | None = None) -> ExperimentSpec:
    settings = get_settings()
    overrides: dict[str, Any] = dict(parse_override(text) for text in args.overrides)
    if args.seed is not None:
        overrides["sp.seed"] = args.seed
        overrides["sm.seed"] = args.seed
    modes = [Mode(m.replace("-", "_")) for m in args.mode] if args.mode else list(Mode)
    return ExperimentSpec(
        dataset=args.dataset,
        synth=args.synth,
        column=args.column,
        label_column=args.label_column,
        modes=modes,
        config_path=args.config or settings.config_path,
        overrides=overrides,
        output_dir=args.out or settings.output_dir,
        repeat_count=args.repeat,
        trace=args.trace,
        windows=windows,
    )


def main() -> None:
    """Main entry point."""
    parser = argparse.ArgumentParser(
        description="reflex-htm - HTM sequence memory accelerated by a reflex transition memory"
    )
    parser.add_argument(
        "--show-workflow",
        action="store_true",
        help="Show the workflow diagram and exit",
    )
    commands = parser.add_subparsers(dest="command")

    run_parser = commands.add_parser("run", help="Run modes over a stream and write reports")
    add_experiment_arguments(run_parser)

    sweep_parser = commands.add_parser("sweep", help="Sweep the control-unit window")
    add_experiment_arguments(sweep_parser)
    sweep_parser.add_argument(
        "--windows",
        type=int,
        nargs="+",
        default=[2, 4, 8, 16, 32],
        help="Control-unit windows to compare (at least two)",
    )

    selftest_parser = commands.add_parser("selftest", help="Run the oracle-equivalence suites")
    selftest_parser.add_argument("--seed", type=int, default=0)
    selftest_parser.add_argument("--snapshot", type=str, help="Pipeline snapshot to verify")

    args = parser.parse_args()

    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    if args.show_workflow:
        show_workflow()
        return
    if args.command is None:
        parser.print_help()
        sys.exit(EXIT_VALIDATION)
    if args.command == "selftest":
        sys.exit(cmd_selftest(seed=args.seed, snapshot=args.snapshot))

    # Validate configuration before any work
    try:
        spec = build_spec(args, windows=args.windows if args.command == "sweep" else None)
        engine = load_engine_config(spec.config_path, spec.overrides)
        print(f"📋 Loaded configuration from {spec.config_path}")
        print(f"📋 Modes: {', '.join(m.label for m in spec.modes)}")
        print(f"📋 SP {engine.sp.columns} columns, k={engine.sp.k}; RM capacity {engine.rm.capacity}")
    except ValidationError as e:
        print(f"❌ Configuration error:\n{describe_validation_error(e)}")
        sys.exit(EXIT_VALIDATION)
    except (ValueError, ReflexHtmError, yaml.YAMLError) as e:
        print(f"❌ Configuration error: {e}")
        sys.exit(EXIT_VALIDATION)
    except FileNotFoundError as e:
        print(f"❌ Configuration error: {e}")
        sys.exit(EXIT_IO)

    sys.exit(cmd_run(spec))


if __name__ == "__main__":
    main()
