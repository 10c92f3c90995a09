"""Config-driven experiment pipelines with reproducible outputs.

Four pipelines: sofic-diagnostics (goodness/defect/le statistics),
weak-convergence (trace moments against the enumeration oracle plus IDS
distances), luck-atoms (atom masses and the integer punctured-interval law)
and monotone (rational schedule convergence).  A run emits CSV/JSON files
with fixed 17-significant-digit float rendering plus a gnuplot script, and a
manifest that pins config hash, seeds and outputs; re-running a manifest
reproduces the data files byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .exact import ComplexRational
from .groups import GroupSpec, finite_group, free_group, lattice_group
from .measures import (
    Alphabet,
    Configuration,
    IIDProduct,
    MeasureModel,
    Mixture,
    lattice_periodic,
    le_diagnostic,
    sample_configuration,
)
from .monotone import build_schedule, monotone_ids_report, value_sets_of
from .operators import (
    InducedOperator,
    LocalRule,
    adjacency_rule,
    assemble_graph_schrodinger,
    assemble_induced,
    diagonal_rule,
    expected_moment,
    laplacian_rule,
    schrodinger_rule,
    table_rule,
)
from .sofic import (
    SoficApproximation,
    good_vertices,
    random_permutation_approximation,
    sofic_defect,
    torus_approximation,
)
from .spectral import (
    atom_mass,
    eigen_spectrum,
    ids_curve,
    kolmogorov_distance,
    punctured_mass,
    punctured_mass_bound,
    reference_ids,
)

PIPELINES = ("sofic-diagnostics", "weak-convergence", "luck-atoms", "monotone")

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["pipeline", "group", "sofic", "seed"],
    "additionalProperties": False,
    "properties": {
        "pipeline": {"enum": list(PIPELINES)},
        "group": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["lattice", "free", "finite"]},
                "d": {"type": "integer", "minimum": 1},
                "rank": {"type": "integer", "minimum": 1},
                "table": {"type": "array"},
                "generators": {"type": "array"},
            },
        },
        "sofic": {
            "type": "object",
            "required": ["kind", "sizes"],
            "properties": {
                "kind": {"enum": ["torus", "random_perm", "product"]},
                "sizes": {"type": "array", "items": {"type": "integer"},
                          "minItems": 1},
                "seed": {"type": "integer"},
                "moduli": {"type": "array", "items": {"type": "integer"}},
            },
        },
        "measure": {"type": "object"},
        "operator": {"type": "object"},
        "radii": {
            "type": "object",
            "properties": {
                "cylinder": {"type": "integer", "minimum": 0},
                "goodness": {"type": "integer", "minimum": 0},
                "defect": {"type": "integer", "minimum": 1},
            },
        },
        "beta_grid": {
            "type": "object",
            "required": ["min", "max", "points"],
            "properties": {
                "min": {"type": "number"},
                "max": {"type": "number"},
                "points": {"type": "integer", "minimum": 2},
            },
        },
        "samples": {"type": "integer", "minimum": 1},
        "k_max": {"type": "integer", "minimum": 1},
        "eps": {"type": "number", "exclusiveMinimum": 0},
        "alpha_values": {"type": "array", "items": {"type": "string"}},
        "punctured_eps": {"type": "array", "items": {"type": "number"}},
        "monotone": {
            "type": "object",
            "properties": {"m_max": {"type": "integer", "minimum": 1}},
        },
        "reference": {"enum": ["lattice_laplacian"]},
        "seed": {"type": "integer"},
        "out_dir": {"type": "string"},
    },
}


class ConfigError(ValueError):
    pass


def validate_config(config: dict) -> None:
    import jsonschema
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        raise ConfigError(f"invalid config: {err.message}") from err
    sizes = config["sofic"]["sizes"]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError("size schedule must be strictly increasing")


# ---------------------------------------------------------------------------
# Config -> objects
# ---------------------------------------------------------------------------


def group_from_config(cfg: dict) -> GroupSpec:
    kind = cfg["kind"]
    if kind == "lattice":
        return lattice_group(cfg["d"])
    if kind == "free":
        return free_group(cfg["rank"])
    return finite_group(cfg["table"], cfg["generators"])


def sofic_family(config: dict, group: GroupSpec) -> list[SoficApproximation]:
    scfg = config["sofic"]
    sigmas = []
    for size_index, n in enumerate(scfg["sizes"]):
        if scfg["kind"] == "torus":
            if group.kind != "lattice":
                raise ConfigError("torus models require a lattice group")
            sigmas.append(torus_approximation(group.d, n))
        elif scfg["kind"] == "product":
            if group.kind != "lattice":
                raise ConfigError("product models ship for lattice groups")
            from .sofic import lattice_quotient, product_with_quotient
            base = torus_approximation(group.d, n)
            quot = lattice_quotient(group.d, scfg["moduli"])
            sigmas.append(product_with_quotient(base, quot))
        else:
            if group.kind != "free":
                raise ConfigError("random_perm models require a free group")
            seed = int(np.random.SeedSequence(
                entropy=scfg.get("seed", 0),
                spawn_key=(size_index,)).generate_state(1)[0])
            sigmas.append(random_permutation_approximation(group.rank, n, seed))
    return sigmas


def alphabet_from_config(cfg: dict) -> Alphabet:
    return Alphabet(symbols=tuple(cfg.get("alphabet", ["0", "1"])))


def measure_from_config(cfg: dict, group: GroupSpec) -> MeasureModel:
    kind = cfg["kind"]
    if kind == "iid":
        alpha = alphabet_from_config(cfg)
        return IIDProduct(alphabet=alpha, weights=tuple(cfg["weights"]))
    if kind == "periodic":
        alpha = alphabet_from_config(cfg)
        if group.kind != "lattice":
            raise ConfigError("periodic measures ship for lattice groups only")
        return lattice_periodic(alpha, cfg["period"], cfg["pattern"])
    if kind == "mixture":
        comps = tuple(measure_from_config(c, group) for c in cfg["components"])
        return Mixture(components=comps, weights=tuple(cfg["weights"]))
    raise ConfigError(f"unknown measure kind {kind!r}")


def _parse_rational(text) -> Fraction:
    return Fraction(str(text))


def operator_from_config(cfg: dict, group: GroupSpec,
                         alphabet: Alphabet) -> tuple[LocalRule, str]:
    """Returns (rule, assembly mode); mode is 'induced' or 'graph'."""
    kind = cfg["kind"]
    if kind == "laplacian":
        return laplacian_rule(group, alphabet), cfg.get("mode", "induced")
    if kind == "adjacency":
        return adjacency_rule(group, alphabet), cfg.get("mode", "induced")
    if kind in ("schrodinger", "graph_schrodinger"):
        pot = [_parse_rational(cfg["potential"][s]) for s in alphabet.symbols]
        mode = "graph" if kind == "graph_schrodinger" else cfg.get("mode", "induced")
        return schrodinger_rule(group, alphabet, pot), mode
    if kind == "diagonal":
        vals = [_parse_rational(cfg["values"][s]) for s in alphabet.symbols]
        return diagonal_rule(group, alphabet, vals), cfg.get("mode", "induced")
    if kind == "table":
        entries = []
        for item in cfg["entries"]:
            g = _parse_element(group, item["g"])
            value = ComplexRational(_parse_rational(item.get("re", "0")),
                                    _parse_rational(item.get("im", "0")))
            entries.append((g, tuple(item["window"]), value))
        rule = table_rule(group, alphabet, cfg["M"], entries)
        return rule, cfg.get("mode", "induced")
    raise ConfigError(f"unknown operator kind {kind!r}")


def _parse_element(group: GroupSpec, data):
    if group.kind == "finite":
        return int(data)
    return tuple(int(x) for x in data)


def _schrodinger_potential(rule: LocalRule) -> list:
    """Recover F from a hopping-1 rule table (graph assembly path)."""
    from .groups import ball as cayley_ball
    e = rule.group.identity()
    e_pos = cayley_ball(rule.group, 1).index(e)
    deg = rule.group.n_generators
    A = rule.alphabet.size
    diag = rule.tables[e]
    out = []
    for sym in range(A):
        v = diag[sym * A**e_pos]  # window with w(e)=sym, zeros elsewhere
        re = v.re if hasattr(v, "re") else complex(v).real
        out.append(Fraction(re) + deg if isinstance(re, Fraction)
                   else float(re) + deg)
    return out


def assemble(rule: LocalRule, mode: str, sigma: SoficApproximation,
             rho: Configuration, goodness) -> InducedOperator:
    if mode == "graph":
        if rule.hopping != 1:
            raise ConfigError("graph assembly is defined for hopping-1 rules")
        return assemble_graph_schrodinger(sigma, rho, rule.alphabet,
                                          _schrodinger_potential(rule))
    return assemble_induced(rule, sigma, rho, goodness)


# ---------------------------------------------------------------------------
# Deterministic output helpers
# ---------------------------------------------------------------------------


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1,
                               separators=(",", ": ")) + "\n")


def config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def shared_hash(config: dict) -> str:
    subset = {k: config.get(k) for k in ("group", "measure", "operator")}
    return hashlib.sha256(
        json.dumps(subset, sort_keys=True).encode()).hexdigest()[:16]


def sample_rng(master_seed: int, size_index: int,
               sample_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(
        entropy=master_seed, spawn_key=(size_index, sample_index)))


def _parallel_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _check_fraction(x: float, what: str) -> float:
    if not -1e-12 <= x <= 1 + 1e-12:
        raise RuntimeError(f"{what} = {x} escapes [0, 1]")
    return min(max(x, 0.0), 1.0)


GNUPLOT_TEMPLATE = """\
# gnuplot script generated alongside the run outputs
set datafile separator ','
set key autotitle columnhead
set grid
{plots}
"""


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------


def _pipeline_sofic_diagnostics(config, group, sigmas, out, threads):
    radii = config.get("radii", {})
    r_good = radii.get("goodness", 2)
    r_defect = radii.get("defect", 2)
    rows = []
    for sigma in sigmas:
        rep = good_vertices(sigma, r_good)
        defects = sofic_defect(sigma, r_defect)
        rows.append([sigma.n_vertices, r_good,
                     _check_fraction(rep.fraction, "good fraction"),
                     defects.max_hom_defect, defects.max_fix_defect])
    write_csv(out / "goodness.csv",
              ["n", "radius", "good_fraction", "max_hom_defect",
               "max_fix_defect"], rows)
    outputs = ["goodness.csv"]
    if "measure" in config:
        model = measure_from_config(config["measure"], group)
        r_cyl = radii.get("cylinder", 1)
        le_rows = le_diagnostic(model, sigmas, r_cyl,
                                eps=config.get("eps", 0.05),
                                sample_count=config.get("samples", 200),
                                seed=config["seed"])
        write_csv(out / "le.csv",
                  ["n", "R", "eps", "lw_fraction", "le_fraction",
                   "le_halfwidth"],
                  [[r.n, r.radius, r.eps,
                    _check_fraction(r.lw_fraction, "lw fraction"),
                    _check_fraction(r.le_fraction, "le fraction"),
                    r.le_halfwidth] for r in le_rows])
        outputs.append("le.csv")
    return outputs


def _beta_grid(config) -> np.ndarray:
    g = config.get("beta_grid", {"min": -5.0, "max": 1.0, "points": 241})
    return np.linspace(g["min"], g["max"], g["points"])


def _pipeline_weak_convergence(config, group, sigmas, out, threads):
    alphabet = alphabet_from_config(config.get("measure", {}))
    model = measure_from_config(config["measure"], group)
    rule, mode = operator_from_config(config["operator"], group, alphabet)
    k_max = config.get("k_max", 4)
    n_samples = config.get("samples", 10)
    grid = _beta_grid(config)
    oracle = {k: expected_moment(rule, model, k) for k in range(1, k_max + 1)}
    moment_rows = []
    dist_rows = []
    curves = {}
    for size_index, sigma in enumerate(sigmas):
        goodness = good_vertices(sigma, 2 * rule.hopping)

        def run_sample(j):
            rho = sample_configuration(model, sigma,
                                       sample_rng(config["seed"], size_index, j))
            op = assemble(rule, mode, sigma, rho, goodness)
            spec = eigen_spectrum(op)
            A = op.to_sparse()
            moments = []
            power = A.copy()
            for k in range(1, k_max + 1):
                if k > 1:
                    power = power @ A
                moments.append(power.diagonal().sum().real / sigma.n_vertices)
            return moments, spec

        results = _parallel_map(run_sample, range(n_samples), threads)
        all_moments = np.array([m for m, _ in results])
        for k in range(1, k_max + 1):
            emp = all_moments[:, k - 1]
            se = float(emp.std(ddof=1) / np.sqrt(len(emp))) if len(emp) > 1 else 0.0
            moment_rows.append([sigma.n_vertices, k, float(emp.mean()), se,
                                oracle[k].value, oracle[k].standard_error])
        curve = ids_curve(results[0][1], grid)
        curves[sigma.n_vertices] = curve
        write_csv(out / f"ids_{sigma.n_vertices}.csv", ["beta", "value"],
                  [[b, _check_fraction(v, "IDS value")]
                   for b, v in zip(curve.xs, curve.ys)])
        write_json(out / f"ids_{sigma.n_vertices}.json",
                   {"beta": [fmt(b) for b in curve.xs],
                    "value": [fmt(v) for v in curve.ys]})
    write_csv(out / "moments.csv",
              ["n", "k", "empirical_mean", "empirical_se", "oracle",
               "oracle_se"], moment_rows)
    use_reference = config.get("reference") == "lattice_laplacian"
    biggest = max(curves)
    for n, curve in sorted(curves.items()):
        if use_reference:
            # evaluate the analytic curve on the merged grid so the distance
            # is not floored by interpolation error at the band edges
            target = reference_ids("lattice_laplacian", group.d, curve.xs)
        else:
            target = curves[biggest]
        dist_rows.append([n, kolmogorov_distance(curve, target)])
    write_csv(out / "distances.csv", ["n", "kolmogorov"], dist_rows)
    outputs = ["moments.csv", "distances.csv"]
    for n in sorted(curves):
        outputs += [f"ids_{n}.csv", f"ids_{n}.json"]
    return outputs


def _pipeline_luck_atoms(config, group, sigmas, out, threads):
    alphabet = alphabet_from_config(config.get("measure", {}))
    model = measure_from_config(config["measure"], group)
    rule, mode = operator_from_config(config["operator"], group, alphabet)
    alphas = [Fraction(a) for a in config.get("alpha_values", ["0", "1"])]
    eps_list = config.get("punctured_eps", [1e-2])
    n_samples = config.get("samples", 20)
    atom_rows = []
    punct_rows = []
    for size_index, sigma in enumerate(sigmas):
        goodness = good_vertices(sigma, 2 * rule.hopping)

        def run_sample(j):
            rho = sample_configuration(model, sigma,
                                       sample_rng(config["seed"], size_index, j))
            op = assemble(rule, mode, sigma, rho, goodness)
            return eigen_spectrum(op), op.row_sum_bound()

        results = _parallel_map(run_sample, range(n_samples), threads)
        for alpha in alphas:
            masses = np.array([atom_mass(spec, alpha) for spec, _ in results])
            atom_rows.append([sigma.n_vertices, str(alpha),
                              float(masses.mean()),
                              float(masses.std(ddof=1)) if len(masses) > 1 else 0.0,
                              n_samples])
        for eps in eps_list:
            worst = 0.0
            bound = 0.0
            for spec, rb in results:
                r = max(1.0, rb)
                worst = max(worst, punctured_mass(spec, 0.0, eps))
                bound = max(bound, punctured_mass_bound(r, eps))
            punct_rows.append([sigma.n_vertices, eps, worst, bound,
                               worst <= bound])
    write_csv(out / "atoms.csv",
              ["n", "alpha", "mean_mass", "sd", "samples"], atom_rows)
    write_csv(out / "punctured.csv",
              ["n", "eps", "max_punctured", "bound", "ok"], punct_rows)
    return ["atoms.csv", "punctured.csv"]


def _pipeline_monotone(config, group, sigmas, out, threads):
    alphabet = alphabet_from_config(config.get("measure", {}))
    model = measure_from_config(config["measure"], group)
    rule, mode = operator_from_config(config["operator"], group, alphabet)
    if mode == "graph":
        raise ConfigError("monotone pipeline uses the strict induced assembly")
    m_max = config.get("monotone", {}).get("m_max", 6)
    sched = build_schedule(value_sets_of(rule), m_max)
    grid = _beta_grid(config)
    outputs = []
    summary_rows = []
    for size_index, sigma in enumerate(sigmas):
        rho = sample_configuration(model, sigma,
                                   sample_rng(config["seed"], size_index, 0))
        report = monotone_ids_report(rule, sched, sigma, rho, grid, m_max)
        rows = [[r.m, r.beta, r.count_m / report.n, r.count_target / report.n,
                 r.psd_certified] for r in report.rows]
        name = f"monotone_{sigma.n_vertices}.csv"
        write_csv(out / name, ["m", "beta", "N_m", "N_target",
                               "psd_certified"], rows)
        outputs.append(name)
        for m in sorted(report.max_gap_per_m):
            summary_rows.append([sigma.n_vertices, m, report.max_gap_per_m[m],
                                 report.norm_gap_per_m[m],
                                 report.norm_bound_per_m[m]])
    write_csv(out / "monotone_summary.csv",
              ["n", "m", "max_gap", "norm_gap", "norm_bound"], summary_rows)
    outputs.append("monotone_summary.csv")
    return outputs


def _write_gnuplot(out: Path, pipeline: str, outputs: list[str]) -> None:
    plots = []
    if pipeline == "weak-convergence":
        ids = [o for o in outputs if o.startswith("ids_")]
        if ids:
            series = ", ".join(f"'{name}' using 1:2 with steps" for name in ids)
            plots.append(f"set title 'integrated density of states'\nplot {series}")
        plots.append("set title 'Kolmogorov distance'\n"
                     "plot 'distances.csv' using 1:2 with linespoints")
    elif pipeline == "luck-atoms":
        plots.append("set title 'atom masses'\n"
                     "plot 'atoms.csv' using 1:3 with linespoints")
    elif pipeline == "monotone":
        plots.append("set title 'monotone IDS gap'\n"
                     "plot 'monotone_summary.csv' using 2:3 with linespoints")
    else:
        plots.append("set title 'good fraction'\n"
                     "plot 'goodness.csv' using 1:3 with linespoints")
    (out / "plots.gp").write_text(GNUPLOT_TEMPLATE.format(plots="\n".join(plots)))


def run(config: dict, out_dir=None, threads: int = 1) -> dict:
    """Execute a pipeline config; returns the manifest dict."""
    validate_config(config)
    out = Path(out_dir if out_dir is not None else config.get("out_dir", "results"))
    out.mkdir(parents=True, exist_ok=True)
    group = group_from_config(config["group"])
    sigmas = sofic_family(config, group)
    pipeline = config["pipeline"]
    stages = {
        "sofic-diagnostics": _pipeline_sofic_diagnostics,
        "weak-convergence": _pipeline_weak_convergence,
        "luck-atoms": _pipeline_luck_atoms,
        "monotone": _pipeline_monotone,
    }
    t0 = time.monotonic()
    try:
        outputs = stages[pipeline](config, group, sigmas, out, threads)
    except Exception as err:
        partial = {
            "config_hash": config_hash(config), "pipeline": pipeline,
            "error": f"{type(err).__name__}: {err}", "outputs": [],
        }
        write_json(out / "manifest.json", partial)
        raise
    elapsed = time.monotonic() - t0
    _write_gnuplot(out, pipeline, outputs)
    outputs = outputs + ["plots.gp"]
    manifest = {
        "code_version": __version__,
        "config": config,
        "config_hash": config_hash(config),
        "shared_hash": shared_hash(config),
        "pipeline": pipeline,
        "sizes": config["sofic"]["sizes"],
        "per_size_seeds": [
            [int(np.random.SeedSequence(entropy=config["seed"],
                                        spawn_key=(i, 0)).generate_state(1)[0])]
            for i in range(len(config["sofic"]["sizes"]))],
        "outputs": outputs,
        "wall_clock_seconds": elapsed,
    }
    write_json(out / "manifest.json", manifest)
    return manifest


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def compare(manifest_paths: list) -> dict:
    """Cross-run convergence table for runs sharing group/measure/operator."""
    manifests = []
    for p in manifest_paths:
        manifests.append((Path(p).parent, json.loads(Path(p).read_text())))
    hashes = {m["shared_hash"] for _, m in manifests}
    if len(hashes) > 1:
        raise ConfigError("manifests do not share group/measure/operator")
    table = {"distances": [], "atoms": [], "le": [], "monotone_flags": []}
    for base, manifest in manifests:
        for name in manifest["outputs"]:
            path = base / name
            if not path.exists():
                continue
            if name == "distances.csv":
                table["distances"] += _read_csv_rows(path)
            elif name == "atoms.csv":
                table["atoms"] += _read_csv_rows(path)
            elif name == "le.csv":
                table["le"] += _read_csv_rows(path)
    dist = sorted((float(r["n"]), float(r["kolmogorov"]))
                  for r in table["distances"])
    decreasing = all(b[1] <= a[1] for a, b in zip(dist, dist[1:]))
    table["monotone_flags"] = [{"distances_decreasing": decreasing}] if dist else []
    return table


def _read_csv_rows(path: Path) -> list[dict]:
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sofic-spectra",
        description="finite-volume spectral statistics over sofic groups")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a pipeline config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--out", type=Path, default=None)
    p_run.add_argument("--threads", type=int, default=1)
    p_cmp = sub.add_parser("compare", help="cross-run convergence table")
    p_cmp.add_argument("manifests", nargs="+", type=Path)
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = json.loads(args.config.read_text())
            manifest = run(config, out_dir=args.out, threads=args.threads)
            print(json.dumps({"config_hash": manifest["config_hash"],
                              "outputs": manifest["outputs"]}, indent=1))
        else:
            table = compare(args.manifests)
            print(json.dumps(table, indent=1, sort_keys=True))
    except Exception as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
