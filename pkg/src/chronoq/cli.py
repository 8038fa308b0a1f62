"""Command line: ``chronoq simulate | reconstruct | metrics``.

Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from .config import ConfigError, RunConfig, load_config
from .core import InvalidArgument, NumericalFailure, PulseSpec, make_pulse, pure_correlation
from .forward import q_function, simulate_counts, subtract_background
from .io import (
    DatasetError,
    GridMeta,
    ScanDataset,
    TheoryFile,
    read_dataset,
    read_diagnostics,
    read_reconstruction_correlation,
    read_theory,
    theory_path_for,
    write_dataset,
    write_reconstruction,
    write_theory,
)
from .metrics import fidelity, similarity
from .mle import build_povm, extract_dominant_mode, reconstruct

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_pulse(arg: str) -> PulseSpec:
    """``KIND``, ``KIND:key=value,...`` or a YAML file holding the fields."""
    path = Path(arg)
    if path.is_file():
        try:
            d = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in pulse file ({exc})", str(path), None, "pulse") from None
        if not isinstance(d, dict):
            raise ConfigError("pulse file must hold a mapping", str(path), None, "pulse")
    else:
        kind, _, rest = arg.partition(":")
        d = {"kind": kind.strip()}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"expected key=value, got {item!r}", "--pulse", None, "pulse")
            d[key.strip()] = yaml.safe_load(value)
    try:
        return PulseSpec.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "--pulse", None, "pulse") from None


def _config(args) -> RunConfig:
    return load_config(args.config) if getattr(args, "config", None) else RunConfig()


def cmd_simulate(args) -> int:
    cfg = _config(args).with_overrides(
        **{
            "noise.seed": args.seed,
            "noise.scale": args.scale,
            "noise.background_level": args.background,
            "workers": args.workers,
        }
    )
    spec = parse_pulse(args.pulse)
    grid = cfg.frequency_grid()
    scan = cfg.phase_space_grid()
    qpg = cfg.qpg_model()
    f = make_pulse(spec, grid)
    q = q_function(f, scan, qpg, workers=cfg.workers)
    counts = simulate_counts(q, cfg.noise.scale, cfg.noise.background_level, cfg.noise.seed)

    g = cfg.grid
    meta = GridMeta(g.center_frequency_hz, g.sigma_c_hz, g.n_points, g.span_in_sigma)
    qpg_d = {"ideal": cfg.qpg.ideal, "pm_width_hz": None if cfg.qpg.ideal else cfg.qpg.pm_width_hz}
    out = Path(args.out)
    write_dataset(out, ScanDataset(meta, qpg_d, counts, cfg.noise.background_level, spec.to_dict()))
    theory = theory_path_for(out)
    write_theory(theory, TheoryFile(meta, qpg_d, q, f, spec.to_dict()))
    print(f"wrote {out} ({scan.shape[0]}x{scan.shape[1]} scan, peak count {counts.counts.max()})")
    print(f"wrote {theory}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = _config(args).with_overrides(
        **{
            "mle.max_iters": args.max_iters,
            "mle.tol": args.tol,
            "mle.dilution": args.dilution,
            "workers": args.workers,
        }
    )
    ds = read_dataset(args.input)
    povm = build_povm(ds.grid, ds.counts.ps_grid, ds.qpg_model(), support_tol=cfg.mle.support_tol)
    result = reconstruct(
        ds.counts,
        povm,
        max_iters=cfg.mle.max_iters,
        tol=cfg.mle.tol,
        dilution=cfg.mle.dilution,
        workers=cfg.workers,
    )
    mode, weight = extract_dominant_mode(result)
    write_reconstruction(args.out, result, mode, weight)
    print(
        f"iterations={result.iterations} converged={str(result.converged).lower()} "
        f"lambda1={weight:.6f} -> {args.out}"
    )
    return EXIT_OK


def _aligned(reference: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Remove the global phase of ``values`` relative to ``reference``."""
    ov = np.vdot(values, reference)
    return values if ov == 0 else values * (ov / abs(ov))


def cmd_metrics(args) -> int:
    ds = read_dataset(args.input)
    theory = read_theory(args.truth)
    if theory.q.values.shape != ds.counts.counts.shape:
        raise DatasetError(
            "q",
            f"shape {theory.q.values.shape} does not match dataset counts {ds.counts.counts.shape}",
            str(args.truth),
        )
    measured = subtract_background(ds.counts)
    lines = [
        f"similarity: {similarity(measured.values, theory.q.values)!r}",
        f"clamped_points: {measured.n_clamped}",
    ]
    if args.recon:
        grid = theory.amplitude.grid
        W_e = read_reconstruction_correlation(args.recon, grid)
        W_t = pure_correlation(theory.amplitude)
        lines.append(f"fidelity: {fidelity(W_t, W_e)!r}")
        diag = read_diagnostics(args.recon)
        for key in ("dominant_weight", "iterations", "converged"):
            if key in diag:
                lines.append(f"{key}: {json.dumps(diag[key])}")
        spec_path = Path(args.recon) / "spectrum.tsv"
        rows = [
            [float(x) for x in ln.split("\t")]
            for ln in spec_path.read_text().splitlines()
            if ln and not ln.startswith("#")
        ]
        rec = np.array(rows)
        if rec.shape != (grid.n_points, 4):
            raise DatasetError("spectrum", f"expected {grid.n_points} rows of 4 columns", str(spec_path))
        truth = theory.amplitude.values
        recon = _aligned(truth, rec[:, 2] * np.exp(1j * rec[:, 3]))
        lines.append("profile:")
        lines.append("# xi_in\tamp_truth\tamp_recon\tphase_truth\tphase_recon")
        at, ar = np.abs(truth), np.abs(recon)
        at, ar = at / at.max(), ar / max(ar.max(), 1e-300)
        for x, a, b, pa, pb in zip(grid.xi, at, ar, np.angle(truth), np.angle(recon)):
            lines.append("\t".join(repr(float(v)) for v in (x, a, b, pa, pb)))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chronoq", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a Q-function scan with photon-counting noise")
    s.add_argument("--config", help="YAML run configuration")
    s.add_argument("--pulse", required=True, help="KIND, KIND:key=value,... or a YAML file")
    s.add_argument("--seed", type=int)
    s.add_argument("--scale", type=float, help="expected peak signal counts")
    s.add_argument("--background", type=float, help="expected background counts per point")
    s.add_argument("--workers", type=int)
    s.add_argument("--out", required=True, help="dataset path; theory file is written alongside")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reconstruct", help="MLE reconstruction from a dataset")
    r.add_argument("--config", help="YAML run configuration (mle section)")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--max-iters", type=int)
    r.add_argument("--tol", type=float)
    r.add_argument("--dilution", type=float)
    r.add_argument("--workers", type=int)
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=cmd_reconstruct)

    m = sub.add_parser("metrics", help="compare a dataset (and reconstruction) with theory")
    m.add_argument("--in", dest="input", required=True)
    m.add_argument("--truth", required=True, help="theory file written by simulate")
    m.add_argument("--recon", help="reconstruction directory for fidelity and profiles")
    m.add_argument("--out", help="also write the report here")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("chronoq: a command is required (simulate, reconstruct, metrics)")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DatasetError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidArgument as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
