import argparse
import logging
import os
import sys

from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from config.experiment import ExperimentConfig, load_experiment_config
from config.settings import get_settings
from tools.errors import KernelPretrainError
from tools.logger import get_history_path, start_trace

load_dotenv()

console = Console()

METHODS = {"kernel-svm": "kernel_svm", "dgcnn": "dgcnn", "pretrained-dgcnn": "pretrained_dgcnn"}


def banner(title: str):
    console.print("\n" + "=" * 50)
    console.print(f"[bold]{title}[/bold]")
    console.print("=" * 50 + "\n")


def step(index: int, total: int, text: str):
    console.print(f"\n[{index}/{total}] {text}")
    console.print("-" * 30)


def configure_logging():
    logging.basicConfig(
        level=get_settings().LOG_LEVEL,
        format="%(name)s: %(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
    )


def experiment_config(args, method: str = None) -> ExperimentConfig:
    overrides = {
        "dataset": args.dataset,
        "method": method,
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "output_dir": getattr(args, "out", None),
    }
    if getattr(args, "fast", False):
        overrides["repetitions"] = 1
    if getattr(args, "pretrain_on_all", False):
        overrides["pretrain_on_all"] = True
    if getattr(args, "epochs", None) is not None:
        overrides["pretrain_epochs"] = args.epochs
    return load_experiment_config(args.config, overrides)


def cmd_gram(args):
    from graphs.tu_loader import load_tu_dataset
    from kernels.gram import gram_matrix
    from kernels.gram_io import write_gram_binary, write_gram_csv
    from kernels.spec import KernelSpec

    banner("Gram matrix")
    settings = get_settings()
    path = args.dataset if os.path.isdir(args.dataset) else os.path.join(settings.DATA_DIR, args.dataset)
    spec = KernelSpec(
        kind=args.kernel,
        h=args.h if args.kernel == "wl" else None,
        normalize=args.normalize,
        graphlet_connected_only=args.connected_only,
    )

    step(1, 2, f"Loading {path}")
    dataset = load_tu_dataset(path)
    console.print(f"{len(dataset)} graphs, {len(dataset.label_alphabet)} node labels")

    step(2, 2, f"Computing {spec.describe()}")
    gram = gram_matrix(dataset, spec, workers=args.workers or settings.WORKERS)
    write_gram_binary(args.out, gram)
    console.print(f"Gram matrix ({gram.size} x {gram.size}) written to {args.out}")
    if args.csv:
        write_gram_csv(args.csv, gram)
        console.print(f"CSV copy written to {args.csv}")


def cmd_pretrain(args):
    from experiments.pipelines import run_pretrain_diagnostics

    banner("Siamese pre-training")
    cfg = experiment_config(args, method="pretrained_dgcnn")
    out = args.out or os.path.join(cfg.output_dir, f"{os.path.basename(os.path.normpath(cfg.dataset))}-pretrain")

    step(1, 1, f"Pre-training on {cfg.dataset} ({cfg.pretrain_kernel_spec().describe()})")
    result = run_pretrain_diagnostics(cfg, output_dir=out)

    table = Table(title=f"Pre-training diagnostics: {result.dataset}")
    table.add_column("measure")
    table.add_column("value", justify="right")
    table.add_row("pairs", f"{result.pairs} ({result.sampling})")
    table.add_row("first / final epoch MSE", f"{result.loss_curve[0]:.5f} / {result.loss_curve[-1]:.5f}")
    table.add_row("final / first MSE", f"{result.final_to_first_mse:.3f}")
    train = "-" if result.train_correlation is None else f"{result.train_correlation:.3f}"
    table.add_row("correlation, training pairs", train)
    heldout = "-" if result.heldout_correlation is None else f"{result.heldout_correlation:.3f}"
    table.add_row(f"correlation, {result.heldout_pairs} held-out pairs", heldout)
    table.add_row("predicted kernel min/max eigenvalue", f"{result.predicted_min_eig_ratio:.2e}")
    console.print(table)
    console.print(f"Checkpoint: {result.checkpoint}")


def cmd_evaluate(args):
    from experiments.pipelines import run_experiment
    from experiments.report import report_directory, write_report

    method = METHODS[args.method]
    banner(f"Evaluate {args.method}")
    cfg = experiment_config(args, method=method)

    step(1, 2, f"{cfg.repetitions} x {cfg.num_folds}-fold nested cross-validation on {cfg.dataset}")
    report = run_experiment(cfg)

    step(2, 2, "Writing report")
    directory = args.out or report_directory(cfg.output_dir, report)
    write_report(report, directory, cfg.echo())

    table = Table(title=report.summary_line())
    table.add_column("repetition", justify="right")
    table.add_column("mean accuracy", justify="right")
    for repetition in range(report.repetitions):
        values = [f.accuracy for f in report.folds if f.repetition == repetition and not f.failed]
        mean = f"{100 * sum(values) / len(values):.2f}" if values else "failed"
        table.add_row(str(repetition), mean)
    console.print(table)
    if report.failed_folds:
        console.print(f"[yellow]{len(report.failed_folds)} fold(s) failed and were excluded[/yellow]")
    console.print(f"Report: {directory}")


def cmd_report(args):
    from experiments.report import aggregate, load_report
    from tools.file_writer import write_file

    reports = [load_report(path) for path in args.dirs]
    text, table_csv = aggregate(reports)
    console.print(text)
    if args.out:
        write_file(args.out, table_csv)
        console.print(f"CSV written to {args.out}")


def cmd_dashboard(args):
    import uvicorn

    port = args.port or get_settings().DASHBOARD_PORT
    console.print(f"Dashboard on http://{args.host}:{port}")
    uvicorn.run("ui.dashboard_server:app", host=args.host, port=port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Graph kernels, DGCNN and kernel-based siamese pre-training")
    sub = parser.add_subparsers(dest="command", required=True)

    gram = sub.add_parser("gram", help="compute and store a Gram matrix")
    gram.add_argument("dataset", help="TU dataset directory, or a name under DATA_DIR")
    gram.add_argument("--kernel", choices=["wl", "sp", "gl3"], default="wl")
    gram.add_argument("--h", type=int, default=2, help="WL iterations")
    gram.add_argument("--normalize", dest="normalize", action="store_true", default=True)
    gram.add_argument("--raw", dest="normalize", action="store_false", help="skip cosine normalization")
    gram.add_argument("--connected-only", action="store_true", help="GL3: count connected graphlets only")
    gram.add_argument("--out", default="gram.bin")
    gram.add_argument("--csv", help="also write the matrix as CSV text")
    gram.add_argument("--workers", type=int)
    gram.set_defaults(func=cmd_gram)

    pretrain = sub.add_parser("pretrain", help="siamese pre-training with diagnostics")
    pretrain.add_argument("dataset")
    pretrain.add_argument("--config", help="flat key = value experiment config")
    pretrain.add_argument("--seed", type=int)
    pretrain.add_argument("--epochs", type=int)
    pretrain.add_argument("--out", help="directory for the checkpoint and diagnostics")
    pretrain.set_defaults(func=cmd_pretrain)

    evaluate = sub.add_parser("evaluate", help="nested cross-validation of one method")
    evaluate.add_argument("dataset")
    evaluate.add_argument("--method", choices=sorted(METHODS), required=True)
    evaluate.add_argument("--config")
    evaluate.add_argument("--seed", type=int)
    evaluate.add_argument("--out", help="report directory")
    evaluate.add_argument("--workers", type=int, help="parallel fold jobs")
    evaluate.add_argument("--fast", action="store_true", help="one repetition instead of ten")
    evaluate.add_argument("--pretrain-on-all", action="store_true", help="pre-train on every graph, test folds included")
    evaluate.set_defaults(func=cmd_evaluate)

    report = sub.add_parser("report", help="compare report directories")
    report.add_argument("dirs", nargs="+")
    report.add_argument("--out", help="write the comparison as CSV")
    report.set_defaults(func=cmd_report)

    dashboard = sub.add_parser("dashboard", help="serve the report and trace viewer")
    dashboard.add_argument("--host", default="127.0.0.1")
    dashboard.add_argument("--port", type=int)
    dashboard.set_defaults(func=cmd_dashboard)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()

    trace_id = start_trace()
    console.print(f"Trace ID: {trace_id}")
    try:
        args.func(args)
    except KernelPretrainError as exc:
        console.print(f"[red]error:[/red] {exc}")
        return 1
    console.print(f"\nTrace history: {get_history_path()}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
