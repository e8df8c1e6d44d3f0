"""Command line interface: ``qshape-collapse <command> [flags]``.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from .dynamics import StepSizeError, gamblers_ruin
from .iit3 import IITError, analyze_system, phi_max, qshape, qshape_table, transition_irreducibility
from .lab import ScenarioError, list_scenarios, load_scenario, run_scenario, validate_scenario
from .lab.runner import execute, round_sig
from .lab.scenario import BUILTIN_NETWORKS
from .netcore import NetworkError, label, load_network
from .qcore import QuantumError
from .qiit import Gate, Variant, census, operator_set, quasi_classical_basis
from .transport import TransportError, emd, emd_plan, qshape_distance

VALIDATION_ERRORS = (ScenarioError, NetworkError, IITError, TransportError, QuantumError, ValueError)


class ValidationFailure(click.ClickException):
    exit_code = 1


def _network(spec: str):
    if spec in BUILTIN_NETWORKS:
        return BUILTIN_NETWORKS[spec](), None
    path = Path(spec)
    if not path.is_file():
        raise ValidationFailure(f"network {spec!r}: not a builtin ({', '.join(BUILTIN_NETWORKS)}) or a file")
    return load_network(path)


def _emit(data, fmt: str, rows_key: str | None = None) -> None:
    data = round_sig(data)
    if fmt == "json":
        click.echo(json.dumps(data, indent=2))
        return
    rows = data[rows_key] if rows_key else data
    if isinstance(rows, dict):
        rows = [rows]
    buf = io.StringIO()
    keys = list(rows[0].keys()) if rows else []
    w = csv.DictWriter(buf, fieldnames=keys)
    w.writeheader()
    for r in rows:
        w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()})
    click.echo(buf.getvalue().rstrip("\n"))


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.replace(" ", "").split(",") if x])
    except ValueError:
        raise ValidationFailure(f"expected comma-separated numbers, got {text!r}") from None


fmt_opt = click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
seed_opt = click.option("--seed", type=int, default=None, help="Override the scenario seed.")
trials_opt = click.option("--trials", type=int, default=None, help="Override the trial count.")
out_opt = click.option("--out", type=click.Path(file_okay=False), default=None, help="Write a result bundle here.")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose: bool) -> None:
    """Integrated information, Q-shapes and Q-shape collapse dynamics."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@cli.command()
@click.argument("network")
@click.argument("state")
@click.option("--nodes", default=None, help="Subsystem, e.g. AB (default: whole system).")
@click.option("--variant", type=click.Choice(["literal", "xemd"]), default="literal", show_default=True)
@fmt_opt
def phi(network, state, nodes, variant, fmt):
    """System integrated information of NETWORK in STATE (label like [10])."""
    net, _ = _network(network)
    s = net.state(state)
    a = analyze_system(net, s, nodes=nodes, variant=variant)
    out = {
        "network": network,
        "state": str(s),
        "phi": a.phi,
        "phi_max": phi_max(net, s, variant) if nodes is None else None,
        "cut": str(a.cut) if a.cut is not None else None,
        "transition_irreducibility": transition_irreducibility(net, s, nodes),
        "variant": variant,
    }
    _emit(out, fmt)


@cli.command(name="qshape")
@click.argument("network")
@click.argument("state")
@click.option("--nodes", default=None)
@fmt_opt
def qshape_cmd(network, state, nodes, fmt):
    """Per-mechanism Q-shape table (locations in [00],[01],[10],[11] order)."""
    net, _ = _network(network)
    q = qshape(net, net.state(state), nodes=nodes)
    _emit({"state": state, "mechanisms": qshape_table(net, q)}, fmt, rows_key="mechanisms")


@cli.command(name="emd")
@click.argument("first")
@click.argument("second")
@click.option("--network", default=None, help="Treat FIRST and SECOND as states and compare Q-shapes.")
@click.option("--variant", type=click.Choice(["literal", "xemd"]), default="literal", show_default=True)
@click.option("--plan", is_flag=True, help="Include the optimal transport plan.")
@fmt_opt
def emd_cmd(first, second, network, variant, plan, fmt):
    """Hamming EMD between two distributions, or EMD* between two states' Q-shapes."""
    if network:
        net, _ = _network(network)
        q1, q2 = qshape(net, net.state(first)), qshape(net, net.state(second))
        _emit({"first": first, "second": second, "variant": variant, "emd_star": qshape_distance(q1, q2, variant)}, fmt)
        return
    p1, p2 = _floats(first), _floats(second)
    out = {"emd": emd(p1, p2)}
    if plan:
        n = int(round(np.log2(p1.size)))
        out["plan"] = [{"from": label(s, n), "to": label(t, n), "mass": m} for s, t, m in emd_plan(p1, p2).flows]
    _emit(out, fmt)


@cli.command()
@click.argument("network")
@click.option("--variant", type=click.Choice([v.value for v in Variant]), default="combined", show_default=True)
@click.option("--gate", type=click.Choice([g.value for g in Gate]), default="forward", show_default=True)
@fmt_opt
def operators(network, variant, gate, fmt):
    """Collapse-operator census and eigenvalue table."""
    net, _ = _network(network)
    ops = operator_set(quasi_classical_basis(net, gate=Gate(gate)), Variant(variant))
    c = census(ops)
    if fmt == "csv":
        rows = [{"label": r["label"], **{f"e{k}": v for k, v in enumerate(r["eigenvalues"])}} for r in c["active"]]
        _emit({"active": rows}, fmt, rows_key="active")
    else:
        _emit(c, fmt)


def _run_kind(path, kinds, seed, trials, out, workers, fmt, index=None):
    sc = load_scenario(path).with_overrides(seed=seed, trials=trials)
    if sc.kind not in kinds:
        raise ValidationFailure(f"scenario kind {sc.kind!r} not accepted here (expected {'/'.join(kinds)})")
    if index is not None:
        sc.doc["trajectory_index"] = index
    bundle = execute(sc, workers=workers)
    if out:
        bundle.meta["output_dir"] = str(bundle.write(out))
    _emit({"config_hash": bundle.config_hash, "summary": bundle.summary, "meta": bundle.meta}, fmt if fmt == "json" else "json")


@cli.command()
@click.argument("scenario")
@click.option("--index", type=int, default=0, show_default=True, help="Trajectory index (noise stream).")
@seed_opt
@out_opt
@fmt_opt
def collapse(scenario, index, seed, out, fmt):
    """Single trajectory (continuous or superselection) from a scenario."""
    sc = load_scenario(scenario)
    kinds = ("collapse", "superselection")
    if sc.kind == "ensemble":
        # a single member of an ensemble scenario
        sc.doc["kind"] = "collapse"
        sc.kind = "collapse"
        sc.sweep = None
    elif sc.kind not in kinds:
        raise ValidationFailure(f"scenario kind {sc.kind!r} has no trajectories")
    sc = sc.with_overrides(seed=seed)
    sc.doc["trajectory_index"] = index
    bundle = execute(sc)
    if out:
        bundle.meta["output_dir"] = str(bundle.write(out))
    _emit({"config_hash": bundle.config_hash, "summary": bundle.summary, "meta": bundle.meta}, "json")


@cli.command()
@click.argument("scenario")
@seed_opt
@trials_opt
@out_opt
@click.option("--workers", type=int, default=1, show_default=True)
@fmt_opt
def ensemble(scenario, seed, trials, out, workers, fmt):
    """Ensemble statistics: frequencies, martingale check, collapse times."""
    _run_kind(scenario, ("ensemble",), seed, trials, out, workers, fmt)


@cli.command()
@click.argument("scenario", required=False, default="zeno_sweep")
@seed_opt
@trials_opt
@out_opt
@fmt_opt
def zeno(scenario, seed, trials, out, fmt):
    """Survival under repeated superselection versus the analytic oracle."""
    sc = load_scenario(scenario).with_overrides(seed=seed, trials=trials)
    if sc.kind != "zeno":
        raise ValidationFailure(f"scenario kind {sc.kind!r} is not zeno")
    bundle = execute(sc)
    if out:
        bundle.meta["output_dir"] = str(bundle.write(out))
    if fmt == "csv":
        _emit({"zeno": bundle.summary["zeno"]}, fmt, rows_key="zeno")
    else:
        _emit({"config_hash": bundle.config_hash, "summary": bundle.summary}, fmt)


@cli.command()
@click.option("--stake1", type=int, default=60, show_default=True)
@click.option("--stake2", type=int, default=40, show_default=True)
@click.option("--trials", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@fmt_opt
def ruin(stake1, stake2, trials, seed, fmt):
    """Fair gambler's ruin to absorption."""
    r = gamblers_ruin(stake1, stake2, trials, np.random.default_rng(seed))
    _emit({"stakes": [stake1, stake2], "trials": trials, "p1": r.p1, "p2": r.p2,
           "p1_expected": stake1 / (stake1 + stake2), "mean_duration": r.mean_duration}, fmt)


@cli.command()
@click.argument("scenario")
@seed_opt
@trials_opt
@click.option("--out", type=click.Path(file_okay=False), default="runs", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
def run(scenario, seed, trials, out, workers):
    """Run any scenario and write bundle.json, series/*.csv and summary.txt."""
    bundle = run_scenario(scenario, out=out, seed=seed, trials=trials, workers=workers)
    click.echo(bundle.summary_text().rstrip("\n"))
    click.echo(f"output: {bundle.meta['output_dir']}")


@cli.command()
@click.argument("scenario")
def validate(scenario):
    """Check a scenario file's schema, normalization and dimensions."""
    click.echo(json.dumps(validate_scenario(scenario), indent=2))


@cli.command(name="list")
@fmt_opt
def list_cmd(fmt):
    """Bundled scenarios."""
    _emit({"scenarios": list_scenarios()}, fmt, rows_key="scenarios" if fmt == "csv" else None)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="qshape-collapse", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 2
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except StepSizeError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except VALIDATION_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:  # noqa: BLE001 - top-level runtime failure
        click.echo(f"runtime error: {type(exc).__name__}: {exc}", err=True)
        return 2
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
