"""Experiment runner: one run per (encoding, scenario) cell, grids, plots."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import ExperimentConfig, GridSpec, Scenario
from .data import (
    PcaModel,
    balanced_split,
    fit_pca,
    load_mnist,
    make_synthetic_dataset,
    prepare_inputs,
    select_digits,
)
from .encoders import EncodingMethod
from .errors import ConfigError, PlotError, QuencodeError
from .model import ClassModel, write_checkpoint
from .train import MetricsRecord, evaluate, train_class

log = logging.getLogger(__name__)

CSV_COLUMNS = ["epoch", "class_phase", "accuracy", "loss", "entropy", "wall_time_s"]
SUMMARY_COLUMNS = ["scenario", "basis", "rotation", "amplitude"]


@dataclass
class RunReport:
    config: Dict
    records: List[MetricsRecord]
    final_accuracy: float
    total_wall_time: float
    artifacts: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "config": self.config,
            "records": [asdict(r) for r in self.records],
            "final_accuracy": self.final_accuracy,
            "total_wall_time": self.total_wall_time,
            "artifacts": self.artifacts,
        }


@dataclass
class PreparedData:
    train_images: np.ndarray
    train_labels: np.ndarray
    test_images: np.ndarray
    test_labels: np.ndarray
    pca: PcaModel


_PCA_CACHE: Dict[Tuple, PcaModel] = {}


def _cached_pca(images: np.ndarray, solver: str) -> PcaModel:
    # grid cells sharing a seed share their training split
    key = (solver, images.shape, hash(images.tobytes()))
    model = _PCA_CACHE.get(key)
    if model is None:
        model = fit_pca(images, solver=solver)
        if len(_PCA_CACHE) > 16:
            _PCA_CACHE.clear()
        _PCA_CACHE[key] = model
    return model


def check_inputs(cfg: ExperimentConfig) -> None:
    """Validate paths before anything is written."""
    if not cfg.data.synthetic:
        if not cfg.data.mnist_dir:
            raise ConfigError("data.mnist_dir is not set")
        if not Path(cfg.data.mnist_dir).is_dir():
            raise ConfigError(f"MNIST directory {cfg.data.mnist_dir} does not exist")


def prepare_data(cfg: ExperimentConfig, rng: np.random.Generator) -> PreparedData:
    d = cfg.data
    if d.synthetic:
        images, labels = make_synthetic_dataset(cfg.seed, d.n_train + d.n_test)
        labels = np.where(labels == 3, d.digits[0], d.digits[1])
    else:
        images, labels = select_digits(*load_mnist(d.mnist_dir), digits=d.digits)
    tr, te = balanced_split(labels, d.n_train, d.n_test, rng, classes=d.digits)
    pca = _cached_pca(images[tr], d.pca_solver)
    return PreparedData(images[tr], labels[tr], images[te], labels[te], pca)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_metrics_csv(records: Sequence[MetricsRecord], path: Path, record_wall_time: bool) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        wall = f"{r.wall_time:.3f}" if record_wall_time else ""
        w.writerow([r.epoch, r.class_phase, _fmt(r.accuracy), _fmt(r.loss), _fmt(r.entropy), wall])
    path.write_text(buf.getvalue())


def run_cells(cfgs: Sequence[ExperimentConfig], output_dirs: Sequence[Path]) -> List[RunReport]:
    """Train once and evaluate every scenario of ``cfgs`` per epoch.

    All configs must agree on everything that affects training (seed,
    encoding, data, model, optimiser). Training is always noiseless; the
    scenario only selects the backend used for the per-epoch evaluation.
    """
    base = cfgs[0]
    for c in cfgs[1:]:
        if (c.seed, c.encoding, c.data, c.layers, c.train) != (base.seed, base.encoding, base.data, base.layers, base.train):
            raise ConfigError("cells grouped for shared training must agree on training settings")
    for c in cfgs:
        check_inputs(c)
    start = time.perf_counter()
    rng = np.random.default_rng(base.seed)
    data = prepare_data(base, rng)
    rr = base.data.rotation_range
    train_inputs = prepare_inputs(base.encoding, data.train_images, data.pca, rr)
    test_inputs = prepare_inputs(base.encoding, data.test_images, data.pca, rr)
    test_labels = [str(v) for v in data.test_labels]
    labels = [str(d) for d in base.data.digits]
    models = {lab: ClassModel.random(lab, rng, base.layers) for lab in labels}
    backends = [c.backend() for c in cfgs]
    records: List[List[MetricsRecord]] = [[] for _ in cfgs]

    for d in output_dirs:
        d.mkdir(parents=True, exist_ok=True)

    def on_epoch(model: ClassModel, epoch: int) -> MetricsRecord:
        models[model.label] = model
        recs = []
        for i, (cfg, backend) in enumerate(zip(cfgs, backends)):
            rec = evaluate(models[labels[0]], models[labels[1]], test_inputs, test_labels,
                           backend, workers=cfg.workers, epoch=epoch)
            rec.class_phase = model.label
            rec.wall_time = time.perf_counter() - start
            records[i].append(rec)
            recs.append(rec)
            write_checkpoint([models[lab] for lab in labels], output_dirs[i] / "checkpoint.txt")
        log.info("epoch %d (class %s): %s", epoch, model.label,
                 ", ".join(f"{c.scenario.value}={r.accuracy:.4f}" for c, r in zip(cfgs, recs)))
        return recs[0]

    epoch = 1
    for lab in labels:
        mask = data.train_labels == int(lab)
        samples = [s for s, m in zip(train_inputs, mask) if m]
        model, recs = train_class(models[lab], samples, base.train, rng, on_epoch, first_epoch=epoch)
        models[lab] = model
        # train_class stamps the training fidelity on the first scenario's record only
        for i in range(1, len(cfgs)):
            for r_main, r in zip(recs, records[i][-len(recs):]):
                r.train_fidelity = r_main.train_fidelity
        epoch += base.train.epochs_per_class

    total = time.perf_counter() - start
    reports = []
    for cfg, recs, out in zip(cfgs, records, output_dirs):
        csv_path = out / "metrics.csv"
        write_metrics_csv(recs, csv_path, cfg.record_wall_time)
        report = RunReport(
            config=cfg.to_dict(),
            records=recs,
            final_accuracy=recs[-1].accuracy,
            total_wall_time=total,
            artifacts={
                "metrics": str(csv_path),
                "checkpoint": str(out / "checkpoint.txt"),
                "report": str(out / "report.json"),
            },
        )
        (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, default=str) + "\n")
        reports.append(report)
    return reports


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    check_inputs(cfg)
    return run_cells([cfg], [Path(cfg.output_dir)])[0]


@dataclass
class CellResult:
    config: ExperimentConfig
    repeat: int
    report: Optional[RunReport] = None
    error: Optional[str] = None


def expand_grid(base: ExperimentConfig, grid: GridSpec) -> List[Tuple[ExperimentConfig, int]]:
    cells = []
    for r in range(grid.repeats):
        for enc in grid.encodings:
            for sc in grid.scenarios:
                cfg = replace(base, encoding=enc, scenario=sc, seed=base.seed + r)
                out = Path(base.output_dir) / f"r{r}" / f"{enc.value}_{sc.value}"
                cells.append((replace(cfg, output_dir=str(out)), r))
    return cells


def run_grid(base: ExperimentConfig, grid: GridSpec, output_dir=None) -> Tuple[List[CellResult], Path]:
    """Run every (repeat, encoding, scenario) cell and write summary.csv.

    Cells of the same repeat and encoding share one training run. A cell
    that fails is recorded as ``ERROR(<category>)`` and does not stop
    the others. Repeat r uses seed + r.
    """
    if output_dir is not None:
        base = replace(base, output_dir=str(output_dir))
    cells = expand_grid(base, grid)
    if not cells:
        raise ConfigError("grid has no cells")
    groups: Dict[Tuple[int, EncodingMethod], List[Tuple[ExperimentConfig, int]]] = {}
    for cfg, r in cells:
        groups.setdefault((r, cfg.encoding), []).append((cfg, r))
    results: List[CellResult] = []
    for (r, enc), members in groups.items():
        cfgs = [c for c, _ in members]
        try:
            reports = run_cells(cfgs, [Path(c.output_dir) for c in cfgs])
            results += [CellResult(c, r, rep) for c, rep in zip(cfgs, reports)]
        except QuencodeError as exc:
            log.error("grid group repeat=%d encoding=%s failed: %s", r, enc.value, exc)
            results += [CellResult(c, r, error=f"ERROR({exc.category})") for c in cfgs]
    out = Path(base.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = out / "summary.csv"
    write_summary(results, grid, summary)
    return results, summary


def write_summary(results: Sequence[CellResult], grid: GridSpec, path: Path) -> None:
    """Accuracy table with scenarios as rows and encodings as columns.

    With several repeats a cell holds ``mean+-spread`` (half the min-max range).
    Per-repeat values go to ``summary_detail.csv`` next to it.
    """
    by_cell: Dict[Tuple[Scenario, EncodingMethod], List[CellResult]] = {}
    for res in results:
        by_cell.setdefault((res.config.scenario, res.config.encoding), []).append(res)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for sc in grid.scenarios:
        row = [sc.value]
        for enc_name in SUMMARY_COLUMNS[1:]:
            cell = by_cell.get((sc, EncodingMethod(enc_name)), [])
            row.append(_summary_cell(cell))
        w.writerow(row)
    path.write_text(buf.getvalue())

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "encoding", "repeat", "seed", "accuracy", "status"])
    for res in results:
        acc = _fmt(res.report.final_accuracy) if res.report else ""
        w.writerow([res.config.scenario.value, res.config.encoding.value, res.repeat,
                    res.config.seed, acc, res.error or "ok"])
    (path.parent / "summary_detail.csv").write_text(buf.getvalue())


def _summary_cell(cell: Sequence[CellResult]) -> str:
    if not cell:
        return ""
    errors = [c.error for c in cell if c.error]
    if errors:
        return errors[0]
    accs = [c.report.final_accuracy for c in cell]
    if len(accs) == 1:
        return _fmt(accs[0])
    mean = float(np.mean(accs))
    spread = (max(accs) - min(accs)) / 2
    return f"{mean:.6f}+-{spread:.6f}"


def read_metrics_csv(path) -> List[Dict[str, float]]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise PlotError(f"cannot read {path}: {exc}") from None
    if not lines or [c.strip() for c in lines[0].split(",")] != CSV_COLUMNS:
        raise PlotError(f"{path}:1: expected header {','.join(CSV_COLUMNS)}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != len(CSV_COLUMNS):
            raise PlotError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, got {len(parts)}")
        try:
            rows.append({
                "epoch": int(parts[0]),
                "class_phase": parts[1],
                "accuracy": float(parts[2]),
                "loss": float(parts[3]),
                "entropy": float(parts[4]),
            })
        except ValueError:
            raise PlotError(f"{path}:{lineno}: malformed line {line!r}") from None
    if not rows:
        raise PlotError(f"{path}: no data rows")
    return rows


def emit_plots(csv_paths: Sequence, out_dir=None) -> List[Path]:
    """One SVG per metrics CSV with accuracy, loss and entropy against epoch."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    for p in csv_paths:
        p = Path(p)
        rows = read_metrics_csv(p)
        epochs = [r["epoch"] for r in rows]
        target = (Path(out_dir) if out_dir else p.parent) / (p.stem + ".svg")
        target.parent.mkdir(parents=True, exist_ok=True)
        with matplotlib.rc_context({"svg.hashsalt": "quencode", "svg.fonttype": "none"}):
            fig, ax = plt.subplots(figsize=(6, 4))
            for key, style in (("accuracy", "o-"), ("loss", "s-"), ("entropy", "^-")):
                (line,) = ax.plot(epochs, [r[key] for r in rows], style, label=key)
                line.set_gid(f"series-{key}")
            ax.set_xlabel("epoch")
            ax.set_title(p.stem)
            ax.legend()
            fig.tight_layout()
            fig.savefig(target, format="svg", metadata={"Date": None})
            plt.close(fig)
        written.append(target)
    return written
