"""Command-line front end.

Every command validates its whole configuration up front and reports all
problems in one line. Outputs go to a temporary file that is renamed into place
only after it has been fully written.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import tempfile
from pathlib import Path

PROG = "artifact"
EXIT_ERROR = 1
EXIT_CONFIG = 2
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS")


def _version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        pkg = version(PROG)
    except PackageNotFoundError:
        pkg = "unknown"
    import numpy
    import scipy

    return f"{PROG} {pkg} (python {platform.python_version()}, numpy {numpy.__version__}, scipy {scipy.__version__})"


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to a sibling temp file, then rename it over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(rows: list[dict], columns: list[str]) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


class Checker:
    """Collects config problems so they can be reported together."""

    def __init__(self):
        self.problems: list[str] = []

    def require(self, cond: bool, message: str) -> bool:
        if not cond:
            self.problems.append(message)
        return cond

    def present(self, args, name: str) -> bool:
        return self.require(getattr(args, name) is not None, f"{name}: required")

    def positive(self, args, name: str) -> None:
        value = getattr(args, name)
        if value is None:
            return
        values = value if isinstance(value, list) else [value]
        self.require(all(v > 0 for v in values), f"{name}: must be positive, got {value}")

    def existing(self, args, name: str) -> None:
        value = getattr(args, name)
        if value is not None:
            self.require(Path(value).is_file(), f"{name}: file not found: {value}")

    def writable(self, args, name: str) -> None:
        value = getattr(args, name)
        if value is not None:
            parent = Path(value).parent
            self.require(parent.is_dir(), f"{name}: directory does not exist: {parent}")

    def raise_if_any(self) -> None:
        if self.problems:
            from .errors import ConfigError

            raise ConfigError(self.problems)


def _load_model(path):
    from .ctmp import CtmpModel
    from .profiles import default_noise_profile

    if path is None:
        return default_noise_profile()
    return CtmpModel.loads(Path(path).read_text())


def _load_graph(path):
    from .characterization import CouplingGraph
    from .profiles import boeblingen_graph

    if path is None:
        return boeblingen_graph()
    return CouplingGraph.loads(Path(path).read_text())


def cmd_gen_calibration(args) -> str:
    from .calibration import calibration_state_labels, minimal_calibration_labels

    chk = Checker()
    chk.present(args, "qubits")
    chk.positive(args, "qubits")
    chk.present(args, "out")
    chk.writable(args, "out")
    chk.raise_if_any()
    n = args.qubits
    labels = calibration_state_labels(n)
    minimal = minimal_calibration_labels(n)
    in_set = set(labels)
    doc = {
        "num_qubits": n,
        "bit_order": "qubit0_rightmost",
        "total": len(labels),
        "minimal_size": len(minimal),
        "labels": [{"label": lab, "minimal": lab in minimal} for lab in labels],
        "extra_minimal_labels": [lab for lab in minimal if lab not in in_set],
    }
    atomic_write(args.out, json.dumps(doc, indent=2) + "\n")
    return f"labels={len(labels)} minimal={len(minimal)}"


def cmd_simulate_calibration(args) -> str:
    from .calibration import minimal_calibration_labels, simulate_calibration

    chk = Checker()
    for name in ("model", "qubits", "shots", "seed", "out"):
        chk.present(args, name)
    chk.existing(args, "model")
    chk.positive(args, "qubits")
    chk.positive(args, "shots")
    chk.writable(args, "out")
    chk.raise_if_any()
    model = _load_model(args.model)
    if model.num_qubits != args.qubits:
        from .errors import ShapeError

        raise ShapeError(f"model has {model.num_qubits} qubits, --qubits is {args.qubits}")
    labels = minimal_calibration_labels(args.qubits) if args.minimal else None
    cal = simulate_calibration(model, args.shots, args.seed, labels)
    atomic_write(args.out, cal.dumps() + "\n")
    return f"records={len(cal.records)} shots={cal.shots}"


def cmd_fit(args) -> str:
    from .calibration import CalibrationSet, fit_ctmp_with_report

    chk = Checker()
    chk.present(args, "calibration")
    chk.present(args, "out")
    chk.existing(args, "calibration")
    chk.writable(args, "out")
    chk.writable(args, "report")
    chk.raise_if_any()
    cal = CalibrationSet.loads(Path(args.calibration).read_text())
    model, report = fit_ctmp_with_report(cal, cross_talk_correction=not args.no_cross_talk_correction)
    report_path = args.report or str(Path(args.out).with_suffix(".report.json"))
    atomic_write(report_path, json.dumps(report.to_json_dict(), indent=2) + "\n")
    atomic_write(args.out, model.dumps() + "\n")
    nonzero = sum(1 for t in model.terms if t.rate > 0)
    return f"terms={len(model.terms)} nonzero={nonzero} gamma={model.gamma:.6g}"


def _check_models(chk: Checker, args) -> None:
    chk.existing(args, "model")
    chk.existing(args, "mitigation_model")


def cmd_sweep(args) -> str:
    import numpy as np

    from .fermion import build_hubbard
    from .vqe import AnsatzSpec, find_minimum, standard_configs, sweep_objective

    chk = Checker()
    for name in ("seed", "out"):
        chk.present(args, name)
    for name in ("sites", "reps", "restarts", "points"):
        chk.positive(args, name)
    chk.positive(args, "shots")
    _check_models(chk, args)
    chk.writable(args, "out")
    chk.require(args.s_min < args.s_max, f"s_min/s_max: need s_min < s_max, got {args.s_min}, {args.s_max}")
    chk.raise_if_any()
    ham = build_hubbard(args.sites, args.t, args.U, not args.open, args.mapping, args.ordering)
    n = ham.num_qubits
    spec = AnsatzSpec(n, args.reps)
    noise = _load_model(args.model)
    mitigation = _load_model(args.mitigation_model) if args.mitigation_model else noise
    configs = standard_configs(n, noise, mitigation, args.seed, args.shots)
    minimum = find_minimum(ham, spec, args.restarts, args.seed)
    grid = np.linspace(args.s_min, args.s_max, args.points)
    result = sweep_objective(minimum.theta, args.seed, grid, ham, configs, spec)
    modes = list(configs)
    atomic_write(args.out, _csv(result.rows(), ["s", *modes, *[f"{m}_std_error" for m in modes]]))
    doc = {
        "command": "sweep",
        "sites": args.sites,
        "reps": args.reps,
        "t": args.t,
        "U": args.U,
        "periodic": not args.open,
        "mapping": args.mapping,
        "ordering": args.ordering,
        "shots": configs["unmitigated"].shots,
        "seed": args.seed,
        "restarts": args.restarts,
        "noise_model": args.model or "bundled:default_noise_profile",
        "mitigation_model": args.mitigation_model or args.model or "bundled:default_noise_profile",
        "s_grid": [float(s) for s in grid],
        "theta0": [float(v) for v in minimum.theta],
        "f_theta0": minimum.value,
        "direction": [float(v) for v in result.direction],
    }
    atomic_write(args.config_out or str(Path(args.out).with_suffix(".config.json")), json.dumps(doc, indent=2) + "\n")
    mad = {m: float(np.mean(np.abs(result.energies[m] - result.energies["noiseless_exact"]))) for m in modes[1:]}
    return " ".join(f"mad_{m}={v:.6g}" for m, v in mad.items()) + f" f_theta0={minimum.value:.10g}"


def cmd_sample(args) -> str:
    from .vqe import random_sampling_experiment

    chk = Checker()
    for name in ("seed", "out"):
        chk.present(args, name)
    chk.positive(args, "sites")
    chk.positive(args, "reps")
    chk.require(args.samples is not None and args.samples >= 2, f"samples: must be >= 2, got {args.samples}")
    _check_models(chk, args)
    chk.writable(args, "out")
    chk.writable(args, "summary_out")
    chk.raise_if_any()
    noise = _load_model(args.model)
    mitigation = _load_model(args.mitigation_model) if args.mitigation_model else noise
    result = random_sampling_experiment(
        args.sites,
        args.samples,
        noise,
        mitigation,
        seed=args.seed,
        reps=args.reps,
        mapping=args.mapping,
        ordering=args.ordering,
    )
    row_cols = ["num_sites", "num_qubits", "sample_index", "exact"]
    for mode in ("unmitigated", "mitigated"):
        row_cols += [mode, f"{mode}_error", f"{mode}_std_error"]
    atomic_write(args.out, _csv(result.rows, row_cols))
    summary_cols = list(result.summary[0]) if result.summary else []
    summary_path = args.summary_out or str(Path(args.out).with_suffix(".summary.csv"))
    atomic_write(summary_path, _csv(result.summary, summary_cols))
    return " ".join(f"sites={s['num_sites']}:ratio={s['reduction_ratio']:.4g}" for s in result.summary)


def cmd_characterize(args) -> str:
    from .characterization import group_by_key, group_rates, records_csv, summarize_quartiles, summary_csv

    chk = Checker()
    chk.present(args, "model")
    chk.present(args, "out")
    chk.existing(args, "model")
    chk.existing(args, "graph")
    chk.writable(args, "out")
    chk.writable(args, "summary_out")
    chk.raise_if_any()
    model = _load_model(args.model)
    graph = _load_graph(args.graph)
    records = group_rates(model, graph)
    summary = summarize_quartiles(group_by_key(records))
    atomic_write(args.out, records_csv(records))
    atomic_write(args.summary_out or str(Path(args.out).with_suffix(".summary.csv")), summary_csv(summary))
    return f"records={len(records)} groups={len(summary)}"


def cmd_compare(args) -> str:
    from .characterization import compare_models, comparison_csv, comparison_summary_csv

    chk = Checker()
    chk.present(args, "out")
    chk.require(bool(args.model), "model: at least one NAME=PATH required")
    models = {}
    for item in args.model or []:
        name, sep, path = item.partition("=")
        if not chk.require(bool(sep and name and path), f"model: expected NAME=PATH, got {item!r}"):
            continue
        if chk.require(Path(path).is_file(), f"model: file not found: {path}"):
            models[name] = path
    chk.writable(args, "out")
    chk.writable(args, "summary_out")
    chk.raise_if_any()
    table = compare_models({name: _load_model(path) for name, path in models.items()})
    atomic_write(args.out, comparison_csv(table))
    atomic_write(args.summary_out or str(Path(args.out).with_suffix(".summary.csv")), comparison_summary_csv(table))
    return " ".join(f"{r.name}:{r.locality}:median={r.median}" for r in table)


def cmd_exact_energy(args) -> str:
    from .fermion import build_hubbard
    from .pauli import exact_ground_energy

    chk = Checker()
    chk.positive(args, "sites")
    chk.raise_if_any()
    ham = build_hubbard(args.sites, args.t, args.U, not args.open, args.mapping, args.ordering)
    energy = exact_ground_energy(ham)
    if abs(energy) < 1e-12:
        energy = 0.0
    return repr(energy)


def _hubbard_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--t", type=float, default=1.0, help="hopping amplitude")
    p.add_argument("--U", type=float, default=2.0, help="on-site interaction")
    p.add_argument("--open", action="store_true", help="open instead of periodic boundary")
    p.add_argument("--mapping", choices=("bravyi_kitaev", "jordan_wigner"), default="bravyi_kitaev")
    p.add_argument("--ordering", choices=("interleaved", "blocked"), default="interleaved")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="CTMP readout-error mitigation and Hubbard VQE experiments.")
    parser.add_argument("--version", action="version", version=_version())
    parser.add_argument("--threads", type=int, default=None, help="cap worker threads used by numerical libraries")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file whose keys supply defaults for the flags below")
        p.set_defaults(func=func)
        return p

    p = command("gen-calibration", cmd_gen_calibration, "list calibration state labels")
    p.add_argument("--qubits", type=int)
    p.add_argument("--out")

    p = command("simulate-calibration", cmd_simulate_calibration, "simulate noisy calibration counts")
    p.add_argument("--model")
    p.add_argument("--qubits", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--minimal", action="store_true", help="use the n+2 minimal label subset")
    p.add_argument("--out")

    p = command("fit", cmd_fit, "fit a CTMP model from calibration data")
    p.add_argument("--calibration")
    p.add_argument("--out")
    p.add_argument("--report", help="fit report path (default: <out>.report.json)")
    p.add_argument("--no-cross-talk-correction", action="store_true")

    p = command("sweep", cmd_sweep, "objective sweep along a random direction through a minimum")
    p.add_argument("--sites", type=int, default=2)
    p.add_argument("--reps", type=int, default=6)
    p.add_argument("--model", help="noise model (default: bundled profile)")
    p.add_argument("--mitigation-model", help="mitigation model (default: the noise model)")
    p.add_argument("--shots", type=int, help="shots per group (default: 8192 per qubit)")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--s-min", type=float, default=-2.0)
    p.add_argument("--s-max", type=float, default=2.0)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--config-out", help="experiment record (default: <out>.config.json)")
    _hubbard_flags(p)

    p = command("sample", cmd_sample, "energy errors at random parameters")
    p.add_argument("--sites", type=int, nargs="+", default=[1, 2])
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--reps", type=int, default=6)
    p.add_argument("--model")
    p.add_argument("--mitigation-model")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--summary-out")
    p.add_argument("--mapping", choices=("bravyi_kitaev", "jordan_wigner"), default="bravyi_kitaev")
    p.add_argument("--ordering", choices=("interleaved", "blocked"), default="interleaved")

    p = command("characterize", cmd_characterize, "group pair rates by device distance")
    p.add_argument("--model")
    p.add_argument("--graph", help="coupling graph JSON (default: bundled 20-qubit graph)")
    p.add_argument("--out")
    p.add_argument("--summary-out")

    p = command("compare", cmd_compare, "compare 1- and 2-qubit rates across models")
    p.add_argument("--model", action="append", metavar="NAME=PATH")
    p.add_argument("--out")
    p.add_argument("--summary-out")

    p = command("exact-energy", cmd_exact_energy, "exact Hubbard ground energy")
    p.add_argument("--sites", type=int, default=1)
    _hubbard_flags(p)
    return parser


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, argv) -> None:
    """Fill flags from ``--config`` unless they were given explicitly."""
    if not getattr(args, "config", None):
        return
    from .errors import ConfigError

    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError([f"config: cannot read {args.config}: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ConfigError(["config: top level must be a JSON object"])
    explicit = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    unknown = [k for k in data if not hasattr(args, k) or k in ("func", "command", "config")]
    if unknown:
        raise ConfigError([f"{k}: unknown config key" for k in unknown])
    for key, value in data.items():
        if key not in explicit:
            setattr(args, key, value)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: ConfigError: threads: must be positive", file=sys.stderr)
            return EXIT_CONFIG
        for var in THREAD_VARS:
            os.environ[var] = str(args.threads)
    from .errors import ConfigError, CtmpVqeError

    try:
        _apply_config(parser, args, argv)
        message = args.func(args)
    except ConfigError as exc:
        print(f"error: ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CtmpVqeError, OSError, ValueError, KeyError) as exc:
        text = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {text}", file=sys.stderr)
        return EXIT_ERROR
    if message:
        print(message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
