"""Command-line orchestration: parameter sweeps, protocol simulation,
verification reports, and plot-ready data emission.

Every subcommand is deterministic given its config and seed: data files
are byte-identical across re-runs, figures are rendered with pinned
metadata, and wall-clock timestamps live only in the run manifest. All
outputs land under --out together with manifest.json listing a checksum
for every emitted file.

Exit codes: 0 success, 1 internal numerical failure, 2 invalid input.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import subprocess
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import __version__, plots
from .blockade import GEOMETRY_MODES, BlockadeParams, tree_fidelity_vs_separation
from .dipole import (
    BeamSpec,
    DipoleLattice,
    DisorderSpec,
    NumericalError,
    disorder_ensemble,
    field_map,
    reflection_scan,
    resonant_polarizability,
    sigma_seed,
    solve_scattering,
)
from .gates import gate_fidelity_path2
from .graphs import ClusterGraph, report_to_json, stabilizer, verify_all
from .protocols import (
    DENSE_QUBIT_CAP,
    ProtocolScript,
    fidelity_2d_scaling,
    run_script_dense,
    tree_fidelity_closed_form,
    tree_fidelity_simulated,
)
from .state import RegisterError, discard_qubit, dump_state
from .tableau import graph_form, tableau_run


# ---------------------------------------------------------------------------
# output collection


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(
    metadata: Mapping[str, object], columns: Sequence[str], rows: Iterable[Sequence[object]]
) -> str:
    lines = [f"# {key} = {_fmt(val)}" for key, val in metadata.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def render_json(obj: object) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class OutputSet:
    """Collects output bytes in memory and flushes them at the end.

    Nothing touches disk until the subcommand has fully succeeded; a
    failure mid-flush removes whatever was already written so no partial
    run remains.
    """

    def __init__(self) -> None:
        self.files: dict[str, bytes] = {}

    def add_text(self, name: str, text: str) -> None:
        self.files[name] = text.encode()

    def add_bytes(self, name: str, data: bytes) -> None:
        self.files[name] = data

    def flush(self, out_dir: Path, manifest: dict) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        written: list[Path] = []
        try:
            for name, data in sorted(self.files.items()):
                path = out_dir / name
                path.write_bytes(data)
                written.append(path)
            manifest["outputs"] = {
                name: hashlib.sha256(data).hexdigest()
                for name, data in sorted(self.files.items())
            }
            manifest["finished"] = _now()
            (out_dir / "manifest.json").write_text(render_json(manifest))
        except BaseException:
            for path in written:
                path.unlink(missing_ok=True)
            (out_dir / "manifest.json").unlink(missing_ok=True)
            raise


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


_BUILD: str | None = None


def build_describe() -> str:
    """git describe of the working tree, cached; 'unknown' outside git."""
    global _BUILD
    if _BUILD is None:
        try:
            out = subprocess.run(
                ["git", "-C", str(Path(__file__).resolve().parent), "describe", "--always", "--dirty"],
                capture_output=True,
                text=True,
                timeout=10,
            )
            _BUILD = out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"
        except (OSError, subprocess.SubprocessError):
            _BUILD = "unknown"
    return _BUILD


def new_manifest(subcommand: str, params: Mapping[str, object]) -> dict:
    return {
        "subcommand": subcommand,
        "config": meta_jsonable(dict(sorted(params.items()))),
        "version": __version__,
        "build": build_describe(),
        "started": _now(),
    }


def _base_metadata(subcommand: str, params: Mapping[str, object]) -> dict:
    meta: dict[str, object] = {
        "tool": f"qmsim {__version__}",
        "build": build_describe(),
        "subcommand": subcommand,
    }
    meta.update(sorted((k, v) for k, v in params.items() if k != "out"))
    return meta


def meta_jsonable(meta: Mapping[str, object]) -> dict:
    out: dict[str, object] = {}
    for k, v in meta.items():
        if isinstance(v, complex):
            out[k] = [v.real, v.imag]
        elif isinstance(v, tuple):
            out[k] = list(v)
        else:
            out[k] = v
    return out


# ---------------------------------------------------------------------------
# shared argument plumbing


def _default_jobs() -> int:
    env = os.environ.get("QMSIM_JOBS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _merge_params(
    defaults: Mapping[str, object], config_path: str | None, cli: Mapping[str, object]
) -> dict:
    params = dict(defaults)
    if config_path is not None:
        loaded = json.loads(Path(config_path).read_text())
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        params.update(loaded)
    params.update(cli)
    if params.get("jobs") is None:
        params["jobs"] = _default_jobs()
    return params


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out", help="output directory (default qmsim-out)")
    sub.add_argument("--seed", type=int, help="master seed (default 0)")
    sub.add_argument("--jobs", type=int, help="worker count (default QMSIM_JOBS or CPU count)")
    sub.add_argument("--no-plots", action="store_true", default=argparse.SUPPRESS, dest="no_plots")
    sub.add_argument("--config", help="JSON config file with the same keys as the flags")


_COMMON_DEFAULTS: dict[str, object] = {"out": "qmsim-out", "seed": 0, "jobs": None, "no_plots": False}


# ---------------------------------------------------------------------------
# reflectivity

_REFLECTIVITY_DEFAULTS: dict[str, object] = {
    **_COMMON_DEFAULTS,
    "sigma": [0.0],
    "runs": 100,
    "nx": 20,
    "ny": 20,
    "spacing": 0.21,
    "waist": 1.2,
    "detuning": 0.0,
    "linewidth": 1.0,
    "three_d": False,
    "plane_z": -5.0,
    "samples": 64,
    "field_map": False,
    "plane_scan": False,
}


def cmd_reflectivity(params: dict, out: OutputSet) -> None:
    sigmas = [float(s) for s in params["sigma"]]
    for s in sigmas:
        if s < 0:
            raise ValueError("sigma must be >= 0")
    if sorted(sigmas) != sigmas:
        raise ValueError("sigma grid must be ascending")
    if params["runs"] < 1:
        raise ValueError("runs must be >= 1")
    if params["spacing"] <= 0:
        raise ValueError("spacing must be > 0")
    if params["waist"] <= 0:
        raise ValueError("waist must be > 0")
    if params["plane_z"] >= 0:
        raise ValueError("plane-z must be < 0 (upstream side)")

    alpha = resonant_polarizability(detuning=params["detuning"], linewidth=params["linewidth"])
    lattice = DipoleLattice.square(params["nx"], params["ny"], params["spacing"], alpha)
    beam = BeamSpec(waist=params["waist"])
    meta = _base_metadata("reflectivity", params)
    meta["polarizability"] = alpha
    meta["wavelength_um"] = beam.wavelength_um

    all_stats = []
    for i, sigma in enumerate(sigmas):
        disorder = DisorderSpec(
            sigma=sigma, in_plane=not params["three_d"], seed=sigma_seed(params["seed"], i)
        )
        stats = disorder_ensemble(
            lattice,
            beam,
            disorder,
            params["runs"],
            plane_z=params["plane_z"],
            samples=params["samples"],
            jobs=params["jobs"],
        )
        all_stats.append(stats)
        rows = [(k, r.real, r.imag, abs(r)) for k, r in enumerate(stats.reflections)]
        out.add_text(
            f"runs_sigma_{sigma:g}.csv",
            render_csv(
                {**meta, "sigma": sigma, "derived_seed": stats.seed},
                ["run_index", "re_r", "im_r", "abs_r"],
                rows,
            ),
        )

    summary = [
        {
            "sigma": st.sigma,
            "mean_abs_r": st.mean_abs,
            "sd": st.sd,
            "se_curve": [float(v) for v in st.running_se],
        }
        for st in all_stats
    ]
    out.add_text("summary.json", render_json({"ensembles": summary, "config": meta_jsonable(meta)}))

    conv_rows = []
    for st in all_stats:
        for idx in range(st.runs):
            conv_rows.append(
                (st.sigma, idx + 1, st.running_mean[idx], st.running_sd[idx], st.running_se[idx])
            )
    out.add_text(
        "convergence.csv",
        render_csv(
            meta, ["sigma", "n_runs", "running_mean_abs_r", "running_sd", "running_se"], conv_rows
        ),
    )

    if params["field_map"] or params["plane_scan"]:
        solution = solve_scattering(lattice, beam)
        if params["field_map"]:
            xs, zs, field = field_map(solution)
            rows = [
                (xs[i], zs[j], *(c for comp in field[i, j] for c in (comp.real, comp.imag)))
                for i in range(xs.size)
                for j in range(zs.size)
            ]
            out.add_text(
                "field_map.csv",
                render_csv(
                    meta,
                    ["x", "z", "re_Ex", "im_Ex", "re_Ey", "im_Ey", "re_Ez", "im_Ez"],
                    rows,
                ),
            )
            if not params["no_plots"]:
                out.add_bytes("field_map.png", plots.render_png(plots.fig_field_map(xs, zs, field)))
        if params["plane_scan"]:
            zs_scan = [-(0.5 + 0.5 * i) for i in range(20)]
            scan = reflection_scan(solution, beam, zs_scan, samples=params["samples"])
            out.add_text(
                "plane_scan.csv",
                render_csv(
                    meta,
                    ["plane_z", "re_r", "im_r", "abs_r"],
                    [(z, r.real, r.imag, abs(r)) for z, r in scan],
                ),
            )
            if not params["no_plots"]:
                out.add_bytes(
                    "plane_scan.png",
                    plots.render_png(
                        plots.fig_plane_scan([z for z, _ in scan], [abs(r) for _, r in scan])
                    ),
                )

    if not params["no_plots"]:
        out.add_bytes(
            "reflectivity_vs_sigma.png",
            plots.render_png(plots.fig_reflectivity_vs_sigma(all_stats)),
        )
        largest = max(all_stats, key=lambda st: st.runs)
        out.add_bytes("convergence.png", plots.render_png(plots.fig_convergence(largest)))


# ---------------------------------------------------------------------------
# tree fidelity

_TREE_DEFAULTS: dict[str, object] = {
    **_COMMON_DEFAULTS,
    "r": [0.88, 0.999],
    "grid": None,  # [start, stop, count]
}


def cmd_tree_fidelity(params: dict, out: OutputSet) -> None:
    if params["grid"] is not None:
        start, stop, count = params["grid"]
        if int(count) < 2:
            raise ValueError("grid count must be >= 2")
        r_values = [float(v) for v in np.linspace(float(start), float(stop), int(count))]
    else:
        r_values = [float(v) for v in params["r"]]
    for r in r_values:
        if not 0.0 <= r <= 1.0:
            raise ValueError("r values must lie in [0, 1]")

    meta = _base_metadata("tree-fidelity", params)
    rows = []
    closed_vals = []
    sim_vals = []
    for r in r_values:
        report = tree_fidelity_closed_form(r)
        simulated = tree_fidelity_simulated(r, r)
        closed_vals.append(report.fidelity)
        sim_vals.append(simulated)
        rows.append(
            (
                r,
                report.fidelity,
                simulated,
                abs(report.fidelity - simulated),
                report.inner_product_fidelity,
                report.poly_inner_delta,
            )
        )
    out.add_text(
        "tree_fidelity.csv",
        render_csv(
            meta,
            [
                "r",
                "closed_form_F",
                "simulated_F",
                "abs_closed_minus_simulated",
                "inner_product_F",
                "poly_inner_delta",
            ],
            rows,
        ),
    )
    if not params["no_plots"]:
        out.add_bytes(
            "tree_fidelity.png",
            plots.render_png(plots.fig_tree_fidelity(r_values, closed_vals, sim_vals)),
        )


# ---------------------------------------------------------------------------
# 2d scaling

_TWOD_DEFAULTS: dict[str, object] = {
    **_COMMON_DEFAULTS,
    "max_photons": 1000,
    "r_high": 0.99,
    "r_low": 0.88,
    "source": "path2",
    "f_high": None,
    "f_low": None,
}


def cmd_2d(params: dict, out: OutputSet) -> None:
    if params["max_photons"] < 0:
        raise ValueError("max-photons must be >= 0")
    if params["source"] not in ("path2", "explicit"):
        raise ValueError("source must be 'path2' or 'explicit'")
    if params["source"] == "path2":
        f_high = gate_fidelity_path2(params["r_high"])
        f_low = gate_fidelity_path2(params["r_low"])
    else:
        if params["f_high"] is None or params["f_low"] is None:
            raise ValueError("explicit source requires --f-high and --f-low")
        f_high = float(params["f_high"])
        f_low = float(params["f_low"])
    for f in (f_high, f_low):
        if not 0.0 <= f <= 1.0:
            raise ValueError("per-photon fidelity must lie in [0, 1]")

    meta = _base_metadata("2d", params)
    meta["per_photon_fidelity_high"] = f_high
    meta["per_photon_fidelity_low"] = f_low
    ns = list(range(0, int(params["max_photons"]) + 1))
    rows = [(n, fidelity_2d_scaling(f_high, n), fidelity_2d_scaling(f_low, n)) for n in ns]
    out.add_text(
        "twod_scaling.csv",
        render_csv(meta, ["n_photons", "fidelity_r_high", "fidelity_r_low"], rows),
    )
    if not params["no_plots"]:
        curves = {
            f"r = {params['r_high']:g}": [row[1] for row in rows],
            f"r = {params['r_low']:g}": [row[2] for row in rows],
        }
        out.add_bytes("twod_scaling.png", plots.render_png(plots.fig_2d_scaling(ns, curves)))


# ---------------------------------------------------------------------------
# blockade

# rates in rad/s, lengths in um; defaults give R_c ~ 3.8 um, the scale of the array
_BLOCKADE_DEFAULTS: dict[str, object] = {
    **_COMMON_DEFAULTS,
    "c6": 5.53e12,
    "linewidth": 3.81e7,
    "rabi": 1.885e8,
    "mode": "both",
    "s_max": 3.0,
    "s_points": 31,
    "use_abs": False,
}


def cmd_blockade(params: dict, out: OutputSet) -> None:
    if params["mode"] not in GEOMETRY_MODES + ("both",):
        raise ValueError(f"mode must be one of {GEOMETRY_MODES + ('both',)}")
    if params["s_max"] <= 0 or params["s_points"] < 2:
        raise ValueError("separation grid needs s-max > 0 and s-points >= 2")
    bp = BlockadeParams(
        c6=params["c6"], total_linewidth=params["linewidth"], pump_rabi=params["rabi"]
    )
    rc = bp.critical_radius
    meta = _base_metadata("blockade", params)
    meta["critical_radius"] = rc

    modes = GEOMETRY_MODES if params["mode"] == "both" else (params["mode"],)
    # grid in units of R_c; physical separations feed the reflectivity model
    s_units = [float(v) for v in np.linspace(0.0, params["s_max"], int(params["s_points"]))]
    curves = {}
    for mode in modes:
        pts = tree_fidelity_vs_separation(
            bp, mode, [s * rc for s in s_units], use_abs=params["use_abs"]
        )
        rows = [
            (s, p.r_path2.real, p.r_path2.imag, p.fidelity, mode) for s, p in zip(s_units, pts)
        ]
        out.add_text(
            f"blockade_{mode}.csv",
            render_csv(meta, ["s_over_Rc", "re_r2", "im_r2", "fidelity", "geometry"], rows),
        )
        curves[mode] = (s_units, [p.fidelity for p in pts])
    if not params["no_plots"]:
        out.add_bytes("blockade.png", plots.render_png(plots.fig_blockade(curves)))


# ---------------------------------------------------------------------------
# simulate

_SIMULATE_DEFAULTS: dict[str, object] = {
    **_COMMON_DEFAULTS,
    "script": None,
    "graph": None,
    "path": "auto",
}


def _load_json_file(path_str: str, what: str) -> dict:
    path = Path(path_str)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValueError(f"cannot read {what} file {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed JSON in {what} file {path}: {exc}") from exc


def cmd_simulate(params: dict, out: OutputSet) -> None:
    if not params["script"]:
        raise ValueError("simulate requires --script")
    script = ProtocolScript.from_json(_load_json_file(params["script"], "script"))
    graph = None
    if params["graph"]:
        graph = ClusterGraph.from_json(_load_json_file(params["graph"], "graph"))

    path = params["path"]
    if path == "auto":
        path = "dense" if script.qubit_count <= DENSE_QUBIT_CAP else "tableau"
    meta = _base_metadata("simulate", params)
    meta["resolved_path"] = path

    report = None
    if path == "dense":
        if script.qubit_count > DENSE_QUBIT_CAP:
            raise RegisterError(
                f"register too large for the dense path ({script.qubit_count} > "
                f"{DENSE_QUBIT_CAP}); rerun with --path tableau (requires r = 1)"
            )
        state, log = run_script_dense(script)
        normalized = state.normalized()
        dump = dump_state(normalized)
        dump["measurements"] = [
            {"qubit": rec.qubit.to_json(), "outcome": rec.outcome, "probability": rec.probability}
            for rec in log
        ]
        dump["squared_norm_before_normalization"] = state.squared_norm()
        out.add_text("state.json", render_json(dump))
        if graph is not None:
            # qubits outside the graph (e.g. a consumed ancilla) must be
            # collapsed and are dropped before verification
            reduced = normalized
            for q in normalized.labels:
                if q not in graph.vertices:
                    reduced = discard_qubit(reduced, q)
            report = verify_all(reduced, graph)
    else:
        tab, log = tableau_run(script)
        gf = graph_form(tab)
        summary = {
            "qubits": tab.n,
            "register": [q.to_json() for q in tab.labels],
            "measurements": [
                {"qubit": q.to_json(), "outcome": o, "deterministic": d} for q, o, d in log
            ],
            "generators_commute": tab.generators_commute(),
            "induced_graph": {
                "edges": [[a.to_json(), b.to_json()] for a, b in gf.edges()],
                "local_corrections": [[op, q.to_json()] for op, q in gf.corrections],
            },
        }
        if tab.n <= 32:
            summary["generators"] = [{"sign": sign, "pauli": str(p)} for sign, p in tab.generators()]
        out.add_text("tableau_summary.json", render_json(summary))
        if graph is not None:
            report = {}
            for v in graph.vertices:
                sign = tab.stabilizer_sign(stabilizer(graph, v))
                report[v] = float(sign) if sign is not None else 0.0

    if report is not None:
        out.add_text(
            "verify_report.json",
            render_json({"expectations": report_to_json(report), "config": meta_jsonable(meta)}),
        )
        if not params["no_plots"]:
            out.add_bytes(
                "verify_report.png",
                plots.render_png(plots.fig_verify_report(report_to_json(report))),
            )


# ---------------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmsim",
        description="Metasurface cluster-state simulation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"qmsim {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    p = subs.add_parser("reflectivity", help="disorder ensembles of the dipole-array reflectivity")
    p.add_argument("--sigma", type=float, nargs="+", default=argparse.SUPPRESS,
                   help="disorder sigmas in units of a")
    p.add_argument("--runs", type=int, default=argparse.SUPPRESS)
    p.add_argument("--nx", type=int, default=argparse.SUPPRESS)
    p.add_argument("--ny", type=int, default=argparse.SUPPRESS)
    p.add_argument("--spacing", type=float, default=argparse.SUPPRESS, help="lattice constant in lambda")
    p.add_argument("--waist", type=float, default=argparse.SUPPRESS, help="beam waist in lambda")
    p.add_argument("--detuning", type=float, default=argparse.SUPPRESS,
                   help="drive detuning in linewidth units")
    p.add_argument("--linewidth", type=float, default=argparse.SUPPRESS)
    p.add_argument("--three-d", action="store_true", default=argparse.SUPPRESS, dest="three_d")
    p.add_argument("--plane-z", type=float, default=argparse.SUPPRESS, dest="plane_z")
    p.add_argument("--samples", type=int, default=argparse.SUPPRESS,
                   help="overlap quadrature samples per axis")
    p.add_argument("--field-map", action="store_true", default=argparse.SUPPRESS, dest="field_map")
    p.add_argument("--plane-scan", action="store_true", default=argparse.SUPPRESS, dest="plane_scan")
    _add_common(p)

    p = subs.add_parser("tree-fidelity", help="closed-form vs simulated tree fidelity")
    p.add_argument("--r", type=float, nargs="+", default=argparse.SUPPRESS)
    p.add_argument("--grid", type=float, nargs=3, metavar=("START", "STOP", "COUNT"),
                   default=argparse.SUPPRESS)
    _add_common(p)

    p = subs.add_parser("2d", help="cluster fidelity vs photon count")
    p.add_argument("--max-photons", type=int, default=argparse.SUPPRESS, dest="max_photons")
    p.add_argument("--r-high", type=float, default=argparse.SUPPRESS, dest="r_high")
    p.add_argument("--r-low", type=float, default=argparse.SUPPRESS, dest="r_low")
    p.add_argument("--source", choices=["path2", "explicit"], default=argparse.SUPPRESS)
    p.add_argument("--f-high", type=float, default=argparse.SUPPRESS, dest="f_high")
    p.add_argument("--f-low", type=float, default=argparse.SUPPRESS, dest="f_low")
    _add_common(p)

    p = subs.add_parser("blockade", help="tree fidelity vs optical-path separation")
    p.add_argument("--c6", type=float, default=argparse.SUPPRESS)
    p.add_argument("--linewidth", type=float, default=argparse.SUPPRESS)
    p.add_argument("--rabi", type=float, default=argparse.SUPPRESS)
    p.add_argument("--mode", choices=list(GEOMETRY_MODES) + ["both"], default=argparse.SUPPRESS)
    p.add_argument("--s-max", type=float, default=argparse.SUPPRESS, dest="s_max",
                   help="max separation in units of R_c")
    p.add_argument("--s-points", type=int, default=argparse.SUPPRESS, dest="s_points")
    p.add_argument("--use-abs", action="store_true", default=argparse.SUPPRESS, dest="use_abs")
    _add_common(p)

    p = subs.add_parser("simulate", help="run a protocol script, dense or tableau")
    p.add_argument("--script", default=argparse.SUPPRESS, help="protocol script JSON file")
    p.add_argument("--graph", default=argparse.SUPPRESS, help="cluster graph JSON file for verification")
    p.add_argument("--path", choices=["auto", "dense", "tableau"], default=argparse.SUPPRESS)
    _add_common(p)

    return parser


_HANDLERS: dict[str, tuple[dict, Callable[[dict, OutputSet], None]]] = {
    "reflectivity": (_REFLECTIVITY_DEFAULTS, cmd_reflectivity),
    "tree-fidelity": (_TREE_DEFAULTS, cmd_tree_fidelity),
    "2d": (_TWOD_DEFAULTS, cmd_2d),
    "blockade": (_BLOCKADE_DEFAULTS, cmd_blockade),
    "simulate": (_SIMULATE_DEFAULTS, cmd_simulate),
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code is not None else 0

    ns = {k: v for k, v in vars(args).items() if v is not argparse.SUPPRESS}
    subcommand = ns.pop("subcommand")
    config_path = ns.pop("config", None)
    defaults, handler = _HANDLERS[subcommand]
    ns = {k: v for k, v in ns.items() if v is not None}
    try:
        params = _merge_params(defaults, config_path, ns)
        out = OutputSet()
        handler(params, out)
        manifest = new_manifest(subcommand, {k: v for k, v in params.items() if k != "out"})
        out.flush(Path(params["out"]), manifest)
    except (ValueError, RegisterError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
