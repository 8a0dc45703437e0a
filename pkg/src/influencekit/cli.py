"""Command-line entry points over run directories.

Every command reads/writes one run directory (manifest + artifacts) and is
reproducible: identical manifest and seed give byte-identical artifacts.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import ceiling as _ceiling
from . import harness as _harness
from . import influence as _influence
from . import pareto as _pareto
from . import presets as _presets
from .datamodel import save_dataset
from .errors import CommitRefusedError, ConfigurationError, GaSearchError
from .session import (TrainingSession, load_session, load_weight_file,
                      save_weight_file)


def _fail_gracefully(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (FileNotFoundError, IndexError) as exc:
            # missing run dir / checkpoint / artifact: a usage problem
            raise click.UsageError(str(exc))
        except (ConfigurationError, CommitRefusedError, GaSearchError,
                ValueError, RuntimeError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
    return wrapper


@click.group()
def main():
    """Influence-vector training workbench."""


run_option = click.option("--run", "run_dir", required=True,
                          type=click.Path(path_type=Path),
                          help="Run directory created by synth-gen.")


@main.command("synth-gen")
@click.option("--preset", type=click.Choice(_presets.PRESETS), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--out", "run_dir", required=True,
              type=click.Path(path_type=Path))
@_fail_gracefully
def synth_gen(preset, seed, run_dir):
    """Generate a synthetic dataset pair and initialize a run directory."""
    if (run_dir / "manifest.json").exists():
        raise ConfigurationError(f"{run_dir} is already an initialized run")
    train, val, config = _presets.make_preset(preset, seed)
    run_dir.mkdir(parents=True, exist_ok=True)
    TrainingSession(train, val, config, run_dir=run_dir)
    click.echo(f"wrote {run_dir}/manifest.json "
               f"(train n={len(train)}, val n={len(val)}, K={train.num_classes})")


@main.command("train")
@run_option
@click.option("--epochs", type=int, default=None,
              help="Epochs to add (default: the config's epoch count).")
@click.option("--weights", "weights_file", type=click.Path(path_type=Path),
              default=None, help="CSV sample_id,weight to apply.")
@_fail_gracefully
def train_cmd(run_dir, epochs, weights_file):
    """Train epochs from the latest checkpoint."""
    session = load_session(run_dir)
    num = session.config.epochs if epochs is None else epochs
    weights = None
    if weights_file is not None:
        ids, w = load_weight_file(weights_file)
        if not np.array_equal(ids, session.train.ids):
            raise ConfigurationError("weight file ids do not match training set")
        weights = w
    metrics = session.train_epochs(num, weights=weights)
    click.echo(f"epoch {session.current_epoch}: per-class accuracy "
               f"{[round(float(a), 4) for a in metrics.per_class_accuracy]}")


@main.command("influence")
@run_option
@click.option("--epoch", type=int, required=True)
@click.option("--damping", type=float, default=None,
              help="Hessian damping (default: 1e-3 * trace(H)/|theta|).")
@click.option("--mode", type=click.Choice([_influence.EXPLICIT,
                                           _influence.MATRIX_FREE]),
              default=_influence.EXPLICIT, show_default=True)
@_fail_gracefully
def influence_cmd(run_dir, epoch, damping, mode):
    """Write the influence matrix artifact for a checkpoint."""
    session = load_session(run_dir)
    m = session.influence_at(epoch, damping=damping, mode=mode)
    out_dir = run_dir / "influence"
    out_dir.mkdir(exist_ok=True)
    path = out_dir / f"epoch-{epoch:04d}.csv"
    _influence.save_influence_matrix(
        m, path, checkpoint_path=run_dir / "checkpoints" / f"epoch-{epoch:04d}.json")
    click.echo(f"wrote {path} ({len(m)} x {m.num_classes})")


@main.command("ceiling")
@run_option
@click.option("--epoch", type=int, required=True)
@click.option("--zero-tol", type=float, default=0.0, show_default=True)
@click.option("--tau-region", type=float, default=_ceiling.DEFAULT_TAU_REGION,
              show_default=True)
@click.option("--tau-residual", type=float,
              default=_ceiling.DEFAULT_TAU_RESIDUAL, show_default=True)
@_fail_gracefully
def ceiling_cmd(run_dir, epoch, zero_tol, tau_region, tau_residual):
    """Region census + hyperplane residual + verdict for a checkpoint."""
    session = load_session(run_dir)
    m = session.influence_at(epoch)
    report = _ceiling.build_ceiling_report(m, zero_tol, tau_region, tau_residual)
    out_dir = run_dir / "ceiling"
    out_dir.mkdir(exist_ok=True)
    report.save(out_dir / f"epoch-{epoch:04d}.json")
    census_path = out_dir / f"epoch-{epoch:04d}-census.csv"
    lines = ["sample_id,region"]
    for region in ("joint_positive", "joint_negative", "mixed"):
        lines += [f"{i},{region}" for i in getattr(report.census, region)]
    census_path.write_text("\n".join(lines) + "\n", encoding="utf-8",
                           newline="\n")
    click.echo(f"verdict: {report.verdict} "
               f"(joint+={len(report.census.joint_positive)} "
               f"joint-={len(report.census.joint_negative)} "
               f"residual={report.residual_ratio:.4f})")


@main.command("loo-oracle")
@run_option
@click.option("--drop-id", type=int, required=True)
@click.option("--val-class", type=int, default=None,
              help="Restrict the validation subset to one class.")
@_fail_gracefully
def loo_cmd(run_dir, drop_id, val_class):
    """Ground-truth influence of one sample by retraining without it."""
    session = load_session(run_dir)
    subset = (session.val if val_class is None
              else session.val.class_subset(val_class))
    delta = _influence.loo_oracle(session.train, drop_id, subset,
                                  session.config)
    out_dir = run_dir / "loo"
    out_dir.mkdir(exist_ok=True)
    tag = "all" if val_class is None else f"class-{val_class}"
    payload = {"drop_id": drop_id, "val_subset": tag, "loss_delta": delta}
    (out_dir / f"drop-{drop_id}-{tag}.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8", newline="\n")
    click.echo(f"loss(without) - loss(with) = {delta:+.6f}")


@main.command("removal-exp")
@run_option
@click.option("--fraction", type=float, default=0.10, show_default=True)
@click.option("--polarity",
              type=click.Choice([_harness.BENEFICIAL, _harness.DETRIMENTAL,
                                 "both"]),
              default="both", show_default=True)
@_fail_gracefully
def removal_cmd(run_dir, fraction, polarity):
    """Ranked-removal retraining experiment per class."""
    session = load_session(run_dir)
    polarities = ([_harness.BENEFICIAL, _harness.DETRIMENTAL]
                  if polarity == "both" else [polarity])
    out_dir = run_dir / "removal"
    out_dir.mkdir(exist_ok=True)
    for pol in polarities:
        report = _harness.removal_experiment(session, fraction, pol)
        path = out_dir / f"{pol}.json"
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n",
                        encoding="utf-8", newline="\n")
        click.echo(f"{pol}: diagonal accuracy change "
                   f"{[round(float(v), 4) for v in np.diag(report.accuracy_change)]}"
                   f" spearman={report.spearman:.4f}")


def _parse_targets(text, num_classes):
    try:
        indices = tuple(int(t) for t in text.split(",") if t.strip() != "")
    except ValueError:
        raise click.UsageError(f"--targets must be comma-separated ints, got {text!r}")
    return _pareto.TargetSet(indices, num_classes)


def _ga_options(fn):
    for opt in (click.option("--ga-seed", type=int, default=None,
                             help="GA seed (default: the run's seed)."),
                click.option("--generations", type=int,
                             default=_pareto.GAConfig.iterations, show_default=True),
                click.option("--population", type=int,
                             default=_pareto.GAConfig.population_size,
                             show_default=True),
                click.option("--w-min", type=float, default=0.0, show_default=True),
                click.option("--w-max", type=float, default=2.0, show_default=True)):
        fn = opt(fn)
    return fn


def _make_ga_config(session, ga_seed, generations, population):
    quarter = population // 4
    if quarter * 4 != population:
        raise ConfigurationError("--population must be divisible by 4")
    return _pareto.GAConfig(iterations=generations, population_size=population,
                            num_elites=quarter, num_mutated_elites=quarter,
                            num_randoms=quarter, num_crossover_children=quarter,
                            seed=session.config.seed if ga_seed is None else ga_seed)


def _write_pareto_artifacts(run_dir, session, result, tag):
    out_dir = run_dir / "pareto"
    out_dir.mkdir(exist_ok=True)
    path = out_dir / f"{tag}.json"
    path.write_text(json.dumps(result.to_dict(), indent=2) + "\n",
                    encoding="utf-8", newline="\n")
    weights_path = out_dir / f"{tag}-weights.csv"
    save_weight_file(result.best_weights, session.train.ids, weights_path)
    return path


@main.command("pareto-di")
@run_option
@click.option("--targets", required=True, help="Comma-separated class indices.")
@_ga_options
@_fail_gracefully
def pareto_di_cmd(run_dir, targets, ga_seed, generations, population, w_min, w_max):
    """Direct improvement: commit a reweighted next epoch for the targets."""
    session = load_session(run_dir)
    target_set = _parse_targets(targets, session.train.num_classes)
    ga = _make_ga_config(session, ga_seed, generations, population)
    before = session.metrics[-1].per_class_accuracy.copy()
    result, metrics = _pareto.run_direct_improvement(
        session, target_set, ga, lp_bounds=(w_min, w_max))
    path = _write_pareto_artifacts(run_dir, session, result,
                                   f"di-epoch-{session.current_epoch:04d}")
    click.echo(f"committed epoch {session.current_epoch}; wrote {path}")
    for k in range(session.train.num_classes):
        mark = "*" if k in target_set.indices else " "
        click.echo(f" {mark} class {k}: {before[k]:.4f} -> "
                   f"{metrics.per_class_accuracy[k]:.4f}")


@main.command("pareto-cc")
@run_option
@click.option("--detrimental-epoch", type=int, required=True)
@click.option("--targets", required=True, help="Comma-separated class indices.")
@click.option("--allow-non-dropped", is_flag=True, default=False,
              help="Permit targets whose accuracy did not drop.")
@_ga_options
@_fail_gracefully
def pareto_cc_cmd(run_dir, detrimental_epoch, targets, allow_non_dropped,
                  ga_seed, generations, population, w_min, w_max):
    """Course correction: replace a detrimental epoch with a reweighted one."""
    session = load_session(run_dir)
    target_set = _parse_targets(targets, session.train.num_classes)
    ga = _make_ga_config(session, ga_seed, generations, population)
    before = session.metrics[-1].per_class_accuracy.copy()
    result, metrics = _pareto.run_course_correction(
        session, detrimental_epoch, target_set, ga, lp_bounds=(w_min, w_max),
        allow_non_dropped=allow_non_dropped)
    path = _write_pareto_artifacts(run_dir, session, result,
                                   f"cc-epoch-{detrimental_epoch:04d}")
    click.echo(f"replaced epoch {detrimental_epoch}; wrote {path}")
    for k in range(session.train.num_classes):
        mark = "*" if k in target_set.indices else " "
        click.echo(f" {mark} class {k}: {before[k]:.4f} -> "
                   f"{metrics.per_class_accuracy[k]:.4f}")


@main.command("trim")
@run_option
@click.option("--max-iters", type=int, default=5, show_default=True)
@click.option("--zero-tol", type=float, default=0.0, show_default=True)
@_fail_gracefully
def trim_cmd(run_dir, max_iters, zero_tol):
    """Iteratively drop joint-negative samples and retrain."""
    session = load_session(run_dir)
    trimmed, params, reports = _ceiling.run_trimming(
        session.train, session.val, session.config, max_iterations=max_iters,
        zero_tol=zero_tol)
    out_dir = run_dir / "trim"
    out_dir.mkdir(exist_ok=True)
    save_dataset(trimmed, out_dir / "trimmed-train.csv")
    payload = {"iterations": [
        {"removed_ids": r.removed_ids,
         "accuracy_before": [float(a) for a in r.accuracy_before],
         "accuracy_after": [float(a) for a in r.accuracy_after],
         "census_counts": r.census_counts} for r in reports]}
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2) + "\n",
                                         encoding="utf-8", newline="\n")
    total = sum(len(r.removed_ids) for r in reports)
    click.echo(f"removed {total} samples in {len(reports)} iterations; "
               f"final accuracy "
               f"{[round(float(a), 4) for a in reports[-1].accuracy_after]}")


@main.command("serve")
@click.option("--root", type=click.Path(path_type=Path), required=True,
              help="Service root; sessions persist under <root>/sessions.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8321, show_default=True)
@_fail_gracefully
def serve_cmd(root, host, port):
    """Run the HTTP session service."""
    import uvicorn

    from .api import create_app
    uvicorn.run(create_app(root), host=host, port=port)


if __name__ == "__main__":
    main()
