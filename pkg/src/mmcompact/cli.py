"""Command-line front end.

Every command writes JSON (default) or CSV to ``--out`` or stdout.  Exit
codes: 0 success, 1 refuted verdict, 2 bad input.  Failures print one line
``mmcompact-error: <code>: <message>`` to stderr.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np

from . import families as fam
from .averaging import average_values, differentiation_profile
from .compactness import (CERTIFIED, default_radius_grid, greedy_net_oracle,
                          is_relatively_compact)
from .errors import MMCompactError, ParseError, PreconditionError
from .lipschitz import (LnSpec, density_approximant, lipschitz_constant, mcshane_extend,
                        phi_scale, psi_spike, whitney_extend)
from .lp import FunctionFamily, LpConfig, LpFunction, lp_norm
from .serialize import (dumps, family_to_dict, function_to_dict, load_family, load_function,
                        load_partial, read_json, write_text)
from .space import build_space, circle_grid, doubling_constant

EXIT_REFUTED = 1
EXIT_INPUT = 2


def _fail(code: str, message: str) -> None:
    click.echo(f"mmcompact-error: {code}: {' '.join(str(message).split())}", err=True)


class _Group(click.Group):
    """Group that maps every error path to a one-line diagnostic and exit code."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True,
             **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.exceptions.Exit as exc:
            sys.exit(exc.exit_code)
        except click.ClickException as exc:
            _fail("usage", exc.format_message())
            sys.exit(EXIT_INPUT)
        except click.Abort:
            _fail("aborted", "interrupted")
            sys.exit(EXIT_INPUT)
        except MMCompactError as exc:
            _fail(exc.code, str(exc))
            sys.exit(EXIT_INPUT)
        sys.exit(rv if isinstance(rv, int) else 0)


# ---------------------------------------------------------------- input helpers


def _load_spec(value: str) -> dict:
    """Inline JSON object or path to a JSON file."""
    if value.lstrip().startswith("{"):
        try:
            data = json.loads(value)
        except json.JSONDecodeError as exc:
            raise ParseError(f"inline JSON: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ParseError("inline JSON must be an object")
        return data
    return read_json(value)


def _space(value: str | dict, base: Path | None = None):
    if isinstance(value, dict):
        if "path" in value:
            return _space(str(_resolve(value["path"], base)))
        return build_space(value)
    return build_space(_load_spec(value))


def _resolve(path: str, base: Path | None) -> Path:
    p = Path(path)
    return p if p.is_absolute() or base is None else base / p


def _family(space, spec, cfg, base: Path | None = None, seed: int | None = None) -> FunctionFamily:
    if isinstance(spec, str):
        if spec.lstrip().startswith("{"):
            spec = _load_spec(spec)
        else:
            return load_family(spec, space)
    if "file" in spec:
        return load_family(_resolve(spec["file"], base), space)
    if seed is not None:
        spec = {**spec, "seed": seed}
    return fam.generate_family(space, spec, cfg)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        write_text(out, text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


@contextmanager
def _executor(workers: int):
    if workers <= 1:
        yield None
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            yield pool


def _function_rows(f: LpFunction):
    return [(i, float(v)) for i, v in enumerate(f.values)]


space_opt = click.option("--space", "space_arg", required=True,
                         help="Space JSON file or inline JSON object.")
p_opt = click.option("--p", "p", type=float, default=2.0, show_default=True,
                     help="Lp exponent in [1, inf).")
out_opt = click.option("--out", type=click.Path(dir_okay=False), default=None,
                       help="Output file (stdout if omitted).")
fmt_opt = click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
                       show_default=True)


@click.group(cls=_Group)
@click.version_option(package_name="artifact")
def cli():
    """Relative compactness of function families on finite metric measure spaces."""


# ---------------------------------------------------------------- commands


@cli.command()
@space_opt
@out_opt
@fmt_opt
def doubling(space_arg, out, fmt):
    """Exact doubling constant of a space."""
    report = doubling_constant(_space(space_arg))
    if fmt == "json":
        _emit(dumps(report.to_dict()), out)
    else:
        _emit(_csv(["gamma", "witness_point", "witness_radius"],
                   [(report.gamma, report.witness_point, report.witness_radius)]), out)
    return 0


@cli.command()
@space_opt
@click.option("--family", "family_arg", required=True, help="Family file or generator JSON.")
@click.option("--radius", "radii", type=float, multiple=True, required=True)
@p_opt
@click.option("--seed", type=int, default=None)
@out_opt
@fmt_opt
def avg(space_arg, family_arg, radii, p, seed, out, fmt):
    """Ball averages A_r f (json: family of averages at the first radius; csv: deviation table)."""
    space = _space(space_arg)
    family = _family(space, family_arg, p, seed=seed)
    if fmt == "json":
        r = radii[0]
        members = [average_values(space, f.values, [r])[0] for f in family]
        _emit(dumps({**family_to_dict(FunctionFamily(space, members)), "radius": r}), out)
    else:
        _emit(differentiation_profile(family, radii, p).to_csv(), out)
    return 0


def _config_run(config: dict, base: Path | None, overrides: dict, workers: int):
    try:
        p = float(config.get("p", 2.0))
        epsilon = float(overrides.get("epsilon") or config["epsilon"])
    except KeyError:
        raise ParseError("config needs 'epsilon'") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"config: {exc}") from None
    cfg = LpConfig(p)
    if "space" not in config or "family" not in config:
        raise ParseError("config needs 'space' and 'family'")
    space = _space(config["space"], base)
    family = _family(space, config["family"], cfg, base, overrides.get("seed"))
    grid = config.get("radius_grid")
    radius_grid = None
    if isinstance(grid, dict):
        if "values" in grid:
            radius_grid = [float(r) for r in grid["values"]]
        elif "floor" in grid:
            radius_grid = default_radius_grid(space, float(grid["floor"]))
    elif isinstance(grid, list):
        radius_grid = [float(r) for r in grid]
    cand = config.get("candidates") or {}
    x0 = int(config.get("x0", 0))
    with _executor(workers) as pool:
        return family, is_relatively_compact(
            family, epsilon, cfg, radius_grid=radius_grid, x0=x0,
            max_candidate_radius=cand.get("max_radius"), executor=pool)


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Experiment config JSON.")
@click.option("--space", "space_arg", default=None)
@click.option("--family", "family_arg", default=None)
@click.option("--epsilon", type=float, default=None)
@p_opt
@click.option("--seed", type=int, default=None, help="Override the family seed.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for report.json, condition1.csv, condition2.csv.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
def check(config_path, space_arg, family_arg, epsilon, p, seed, out, workers):
    """Run the compactness criterion; exit 1 when refuted."""
    if config_path is not None:
        config = read_json(config_path)
        base = Path(config_path).parent
    else:
        if space_arg is None or family_arg is None or epsilon is None:
            raise click.UsageError("give --config or all of --space, --family, --epsilon")
        config = {"space": _load_spec(space_arg), "family": family_arg, "epsilon": epsilon,
                  "p": p}
        base = None
    _, report = _config_run(config, base, {"epsilon": epsilon, "seed": seed}, workers)
    outputs = {"report": "report.json", "condition1": "condition1.csv",
               "condition2": "condition2.csv", **(config.get("outputs") or {})}
    texts = {
        "report": dumps(report.to_dict()),
        "condition1": report.average_condition.profile_csv(),
        "condition2": report.tail_condition.profile_csv(),
    }
    if out is None:
        click.echo(texts["report"], nl=False)
    else:
        Path(out).mkdir(parents=True, exist_ok=True)
        for key, text in texts.items():
            write_text(Path(out) / outputs[key], text)
    return 0 if report.verdict == CERTIFIED else EXIT_REFUTED


@cli.command()
@space_opt
@click.option("--family", "family_arg", required=True)
@click.option("--epsilon", type=float, required=True)
@p_opt
@click.option("--seed", type=int, default=None)
@out_opt
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
def net(space_arg, family_arg, epsilon, p, seed, out, workers):
    """Construct and certify an epsilon-net (full level lists)."""
    space = _space(space_arg)
    family = _family(space, family_arg, p, seed=seed)
    with _executor(workers) as pool:
        report = is_relatively_compact(family, epsilon, p, executor=pool)
    doc = {"report": report.to_dict()}
    if report.net is not None:
        oracle = greedy_net_oracle(family, report.certified_radius, p)
        doc["net"] = report.net.to_dict()
        doc["member_distances"] = report.member_distances
        doc["oracle"] = {"size": oracle.size, "max_distance": oracle.max_distance}
    _emit(dumps(doc), out)
    return 0 if report.verdict == CERTIFIED else EXIT_REFUTED


@cli.command()
@space_opt
@click.option("--partial", "partial_path", required=True, type=click.Path(dir_okay=False),
              help='JSON {"domain": [...], "values": [...], "L": ...}.')
@click.option("--method", type=click.Choice(["mcshane", "whitney"]), default="mcshane",
              show_default=True)
@out_opt
@fmt_opt
def extend(space_arg, partial_path, method, out, fmt):
    """Lipschitz extension of partial data."""
    space = _space(space_arg)
    partial = load_partial(partial_path, space)
    g = mcshane_extend(partial) if method == "mcshane" else whitney_extend(partial)
    if fmt == "json":
        _emit(dumps({**function_to_dict(g), "lipschitz": lipschitz_constant(g)}), out)
    else:
        _emit(_csv(["point", "value"], _function_rows(g)), out)
    return 0


@cli.command()
@click.argument("operator", type=click.Choice(["phi", "psi"]))
@space_opt
@click.option("--function", "function_path", required=True, type=click.Path(dir_okay=False))
@click.option("--n", "n", type=float, required=True)
@click.option("--x0", type=int, default=0, show_default=True)
@click.option("--y0", type=int, default=None, help="Second point (psi only).")
@click.option("--epsilon", type=float, required=True)
@p_opt
@out_opt
@fmt_opt
def deform(operator, space_arg, function_path, n, x0, y0, epsilon, p, out, fmt):
    """Apply Phi (scaling) or Psi (spike) to a member of L(n)."""
    space = _space(space_arg)
    f = load_function(function_path, space)
    spec = LnSpec(n, x0, LpConfig(p))
    if operator == "phi":
        g = phi_scale(f, spec, epsilon)
        doc = {**function_to_dict(g), "distance": lp_norm(g - f, p),
               "lipschitz": lipschitz_constant(g)}
    else:
        if y0 is None:
            raise click.UsageError("psi needs --y0")
        res = psi_spike(f, spec, epsilon, y0)
        g = res.function
        doc = {**res.to_dict(), "space_hash": space.hash}
    if fmt == "json":
        _emit(dumps(doc), out)
    else:
        _emit(_csv(["point", "value"], _function_rows(g)), out)
    return 0


@cli.command()
@space_opt
@click.option("--function", "function_path", required=True, type=click.Path(dir_okay=False))
@click.option("--epsilon", type=float, required=True)
@p_opt
@out_opt
@fmt_opt
def densify(space_arg, function_path, epsilon, p, out, fmt):
    """Bounded-support Lipschitz approximant within epsilon."""
    space = _space(space_arg)
    approx = density_approximant(load_function(function_path, space), epsilon, p)
    if fmt == "json":
        _emit(dumps(approx.to_dict()), out)
    else:
        _emit(_csv(["point", "value"], _function_rows(approx.function)), out)
    return 0


def lipschitz_rate_rows(sizes, seed: int, radius: float = 1 / 16, L: float = 1.0):
    """``max|A_r f - f| / (L r)`` for a random ``L``-Lipschitz function on each circle grid."""
    rows = []
    for n in sizes:
        space = circle_grid(n)
        f = fam.random_lipschitz(space, L, np.random.default_rng([seed, n]))
        dev = float(np.max(np.abs(average_values(space, f.values, [radius])[0] - f.values)))
        rows.append((n, "lipschitz_rate", dev / (L * radius)))
    return rows


def psi_spike_rows(sizes, n_ball: float = 1.0, epsilon: float = 0.5):
    """Achieved Lipschitz constant of ``Psi(0)`` on circle grids."""
    rows = []
    for n in sizes:
        space = circle_grid(n)
        res = psi_spike(LpFunction.zeros(space), LnSpec(n_ball, 0), epsilon, n // 2)
        rows.append((n, "psi_lipschitz", res.lipschitz))
        rows.append((n, "psi_distance", res.distance))
    return rows


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.replace(",", " ").split()]
    except ValueError:
        raise ParseError(f"bad size schedule {text!r}") from None
    if any(s < 2 for s in sizes):
        raise PreconditionError("grid sizes must be >= 2")
    return sizes


@cli.command()
@click.option("--study", type=click.Choice(["lipschitz_rate", "psi_spike"]), required=True)
@click.option("--sizes", default="64,128,256,512,1024", show_default=True,
              help="Comma-separated grid sizes N (may be empty).")
@click.option("--seed", type=int, default=0, show_default=True)
@out_opt
def convergence(study, sizes, seed, out):
    """Mesh-refinement study on circle grids (CSV: N, quantity, value)."""
    schedule = _parse_sizes(sizes)
    rows = lipschitz_rate_rows(schedule, seed) if study == "lipschitz_rate" \
        else psi_spike_rows(schedule)
    _emit(_csv(["N", "quantity", "value"], rows), out)
    return 0


DEMOS = {
    "oscillation": {
        "experiment": "oscillation", "space": {"kind": "circle", "n": 1024},
        "family": {"generator": "oscillation", "k_max": 32}, "p": 2, "epsilon": 0.1,
        "radius_grid": {"floor": 0.02},
    },
    "escaping-bumps": {
        "experiment": "escaping-bumps", "space": {"kind": "line_grid", "n": 1001, "length": 100},
        "family": {"generator": "translate_bumps", "count": 10, "spacing": 10, "width": 1},
        "p": 2, "epsilon": 0.1, "candidates": {"max_radius": 40},
    },
    "lipschitz-ball": {
        "experiment": "lipschitz-ball", "space": {"kind": "circle", "n": 256},
        "family": {"generator": "random_Ln", "count": 10, "n": 5, "seed": 1}, "p": 2,
        "epsilon": 0.25,
    },
}


@cli.command()
@click.argument("name", type=click.Choice(sorted(DEMOS)))
@click.option("--out", type=click.Path(file_okay=False), default=None)
def demo(name, out):
    """Run a named canned experiment and print its report."""
    config = DEMOS[name]
    _, report = _config_run(config, None, {}, 1)
    doc = {"experiment": name, "config": config, "report": report.to_dict()}
    if out is None:
        click.echo(dumps(doc), nl=False)
    else:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_text(Path(out) / "report.json", dumps(doc))
        write_text(Path(out) / "condition1.csv", report.average_condition.profile_csv())
        write_text(Path(out) / "condition2.csv", report.tail_condition.profile_csv())
    return 0


def main() -> None:
    cli(prog_name="mmcompact")
