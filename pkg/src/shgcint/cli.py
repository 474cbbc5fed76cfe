"""Command-line front end: ``shgcint <command> [--config FILE] [--out DIR] ...``.

Each command writes plain files (CSV, raw float64 grids with JSON sidecars,
16-bit PGM previews, JSON reports) plus PNG figures into the output
directory, together with the fully resolved configuration. Timestamps go
only to ``run.log``.

Exit codes: 0 success, 2 configuration or usage error, 3 solver did not
converge, 4 file I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as C
from .io import write_grid_csv, write_grid_raw, write_json, write_pgm

log = logging.getLogger("shgcint")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


def _setup_logging(out: Path):
    root = logging.getLogger("shgcint")
    root.setLevel(logging.INFO)
    for h in list(root.handlers):
        root.removeHandler(h)
        h.close()
    fh = logging.FileHandler(out / "run.log", mode="w")
    fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root.addHandler(fh)


def _resolve(args) -> C.ExperimentConfig:
    cfg = C.load_config(args.config)
    if args.data_source:
        cfg.data_source = args.data_source
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise C.ConfigError(f"seed must be an unsigned 64-bit integer, got {args.seed}")
        cfg.medium.seed = args.seed
        cfg.ensemble.first_seed = args.seed
    if args.out:
        cfg.output_dir = args.out
    return cfg.validate()


def _write_image(out: Path, stem: str, image, truth=None):
    from .plotting import image_png

    g = image.search.grid
    write_grid_csv(out / f"{stem}.csv", g, image.values)
    write_grid_raw(out / stem, g, image.raw, image.metadata())
    write_pgm(out / f"{stem}.pgm", image.values, vmin=min(0.0, float(image.values.min())))
    image_png(out / f"{stem}.png", image, truth)


# ---------------------------------------------------------------- commands


def build_realization(cfg: C.ExperimentConfig, seed=None):
    if cfg.data_source == "go":
        return C.build_go_setup(cfg).medium(cfg.medium.seed if seed is None else seed)
    return C.build_medium(cfg, seed)


def cmd_gen_medium(cfg: C.ExperimentConfig, out: Path, threads: int = 1) -> dict:
    from .plotting import field_png

    med = build_realization(cfg)
    fl = med.fluct
    write_grid_csv(out / "medium.csv", med.grid, fl)
    write_grid_raw(out / "medium", med.grid, fl, {"quantity": "4*pi*eta", "params": med.params.to_dict()})
    write_pgm(out / "medium.pgm", fl)
    field_png(out / "medium.png", med.grid, fl, f"4 pi eta, seed {med.params.seed}", cmap="RdBu_r")
    summary = {"std": float(fl.std()), "mean": float(fl.mean()), "min": float(fl.min()), "max": float(fl.max()),
               "grid": med.grid.to_dict(), "params": med.params.to_dict()}
    write_json(out / "medium_summary.json", summary)
    log.info("medium std %.4g", summary["std"])
    return summary


def make_data(cfg: C.ExperimentConfig, seed=None, threads: int = 1):
    """Array data for one realization, from the PDE solver or the phase-screen model."""
    from .acquisition import add_noise, simulate_experiment

    seed = cfg.medium.seed if seed is None else seed
    if cfg.data_source == "go":
        data = C.build_go_setup(cfg).data(seed)
    else:
        data = simulate_experiment(C.build_medium(cfg, seed), C.build_scatterers(cfg), C.build_geometry(cfg),
                                   C.build_solver_config(cfg, threads))
    if cfg.noise_snr_db is not None:
        data = add_noise(data, cfg.noise_snr_db, seed)
    return data


def cmd_forward(cfg: C.ExperimentConfig, out: Path, threads: int = 1) -> dict:
    from .plotting import data_png

    data = make_data(cfg, threads=threads)
    data.save(out / "data")
    data.to_csv(out / "data.csv")
    write_json(out / "diagnostics.json", data.diagnostics)
    data_png(out / "data.png", data)
    return data.diagnostics


def cmd_image(cfg: C.ExperimentConfig, out: Path, threads: int = 1, data_dir=None, method=None,
              harmonic=None) -> dict:
    from .acquisition import ArrayData
    from .imaging import cint, migrate, peak_metrics
    from .stats import artifact_scan

    method = method or cfg.imaging.method
    j = harmonic or cfg.imaging.harmonic
    data = ArrayData.load(data_dir) if data_dir else make_data(cfg, threads=threads)
    search = C.build_search(cfg, j)
    truth = C.truth_positions(cfg)
    if method == "migration":
        image = migrate(data, search)
    else:
        image = cint(data, search, C.build_cint_params(cfg, j))
    stem = f"{method}_j{j}"
    _write_image(out, stem, image, truth)
    report = {"image": image.metadata(), "peaks": peak_metrics(image, truth)}
    if cfg.imaging.full_domain:
        report["artifact"] = artifact_scan(image, data.geometry, truth).to_dict()
    write_json(out / f"{stem}_report.json", report)
    return report


def cmd_ensemble(cfg: C.ExperimentConfig, out: Path, threads: int = 1) -> dict:
    from .plotting import snr_bar_png
    from .stats import EnsembleSpec, run_ensemble, standard_methods

    e = cfg.ensemble
    spec = EnsembleSpec.consecutive(e.n, e.first_seed, cfg.data_source, cfg.to_dict())
    j = cfg.imaging.harmonic
    search = C.build_search(cfg, j)
    methods = standard_methods(search, C.build_cint_params(cfg, j))
    report = run_ensemble(spec, lambda s: make_data(cfg, s), methods, search, C.truth_positions(cfg),
                          e.window, threads)
    write_json(out / "stability_report.json", report.to_dict())
    rows = [[i, seed] + [float(np.real(report.methods[m].truth_values[i])) for m in report.methods]
            + [float(np.imag(report.methods[m].truth_values[i])) for m in report.methods]
            for i, seed in enumerate(spec.seeds)]
    names = list(report.methods)
    header = ",".join(["index", "seed"] + [f"{m}_re" for m in names] + [f"{m}_im" for m in names])
    np.savetxt(out / "truth_values.csv", np.array(rows, dtype=float), delimiter=",", header=header,
               comments="", fmt="%.17g")
    for m, st in report.methods.items():
        write_grid_csv(out / f"{m}_mean.csv", search.grid, st.mean)
        write_grid_csv(out / f"{m}_std.csv", search.grid, st.std)
        write_pgm(out / f"{m}_mean.pgm", st.mean, vmin=min(0.0, float(st.mean.min())))
        write_pgm(out / f"{m}_std.pgm", st.std)
    snr_bar_png(out / "snr.png", report)
    return report.to_dict()


def theory_params(cfg: C.ExperimentConfig):
    """Regime parameters of the configured experiment (phase-screen or PDE setup)."""
    from .gomodel import GoRegimeParams

    if cfg.data_source == "go":
        return C.build_go_setup(cfg).regime
    m, g = cfg.medium, cfg.geometry
    L = float(C.truth_positions(cfg)[0][1])
    return GoRegimeParams(g.wavelength, m.correlation_length, m.sigma, L, g.aperture, g.cone_half_angle)


def cmd_theory(cfg: C.ExperimentConfig, out: Path, threads: int = 1) -> dict:
    from .gomodel import predicted_cint_profile, theory_predict
    from .plotting import curves_png

    p = theory_params(cfg)
    cp = [C.build_cint_params(cfg, j) for j in (1, 2)]
    pred = theory_predict(p, (cp[0].X, cp[1].X), cp[1].Theta)
    d = pred.to_dict()
    write_json(out / "theory.json", d)
    span = 4 * p.distance / (p.k * min(pred.effective_X))
    off = np.linspace(-span, span, 201)
    prof = [predicted_cint_profile(pred, cp[j - 1].X, cp[j - 1].Theta, j, off) for j in (1, 2)]
    np.savetxt(out / "cint_profile.csv", np.column_stack([off, *prof]), delimiter=",",
               header="cross_range,harmonic1,harmonic2", comments="", fmt="%.17g")
    curves_png(out / "cint_profile.png", off, {"j=1": prof[0], "j=2": prof[1]}, "cross-range offset / wavelength",
               "expected CINT (normalised)", "predicted CINT envelope")
    return d


def cmd_psf(cfg: C.ExperimentConfig, out: Path, threads: int = 1) -> dict:
    from .plotting import curves_png
    from .waves import aperture_psf, cone_psf

    p = theory_params(cfg)
    k = p.k
    off = np.linspace(-3 * p.wavelength, 3 * p.wavelength, 601)
    cols = {}
    for j in (1, 2):
        ap = aperture_psf(off, j * k, p.aperture, p.distance)
        cols[f"aperture_j{j}"] = ap / np.max(np.abs(ap))
        c2 = cone_psf(off, j * k, p.cone_half_angle, dim=2)
        cols[f"cone2d_j{j}"] = c2 / np.max(np.abs(c2))
        c3 = cone_psf(off, j * k, p.cone_half_angle, dim=3)
        cols[f"cone3d_j{j}"] = c3 / np.max(np.abs(c3))
    np.savetxt(out / "psf.csv", np.column_stack([off, *cols.values()]), delimiter=",",
               header=",".join(["offset", *cols]), comments="", fmt="%.17g")
    curves_png(out / "psf.png", off, cols, "offset / wavelength", "normalised factor", "homogeneous PSF factors")
    widths = {f"cross_range_resolution_j{j}": p.wavelength * p.distance / (j * p.aperture) for j in (1, 2)}
    write_json(out / "psf.json", {"params": p.to_dict(), **widths})
    return widths


COMMANDS = {
    "gen-medium": cmd_gen_medium,
    "forward": cmd_forward,
    "image": cmd_image,
    "ensemble": cmd_ensemble,
    "theory": cmd_theory,
    "psf": cmd_psf,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration (defaults used when omitted)")
    common.add_argument("--seed", type=int, help="medium seed (first seed for ensembles)")
    common.add_argument("--out", help="output directory (created if missing)")
    common.add_argument("--threads", type=int, default=1, help="maximum worker threads")
    common.add_argument("--data-source", choices=["pde", "go"], help="PDE solver or phase-screen data")

    parser = argparse.ArgumentParser(prog="shgcint", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-medium", parents=[common], help="sample one random medium")
    sub.add_parser("forward", parents=[common], help="simulate array data for one realization")
    im = sub.add_parser("image", parents=[common], help="form a migration or CINT image")
    im.add_argument("--data", help="directory written by 'forward' (simulated afresh when omitted)")
    im.add_argument("--method", choices=["migration", "cint"])
    im.add_argument("--harmonic", type=int, choices=[1, 2])
    sub.add_parser("ensemble", parents=[common], help="stability statistics over realizations")
    sub.add_parser("theory", parents=[common], help="scattering/decoherence scales and regime checks")
    sub.add_parser("psf", parents=[common], help="homogeneous point spread factors")
    return parser


def main(argv=None) -> int:
    from .solver import ConvergenceError, SolverError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _resolve(args)
    except C.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _setup_logging(out)
        write_json(out / "resolved_config.json", dataclasses.asdict(cfg))
        log.info("command %s", args.command)
        kwargs = {}
        if args.command == "image":
            kwargs = {"data_dir": args.data, "method": args.method, "harmonic": args.harmonic}
        COMMANDS[args.command](cfg, out, args.threads, **kwargs)
    except ConvergenceError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (C.ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        for h in list(logging.getLogger("shgcint").handlers):
            h.close()
            logging.getLogger("shgcint").removeHandler(h)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
