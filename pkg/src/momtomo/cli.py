"""Command-line driver: ``momtomo {phantom,forward,reconstruct,verify}``.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 accuracy failure.
Output directory precedence: ``--output-dir`` flag, then $MOMTOMO_OUTDIR,
then the config file value.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from dataclasses import fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .config import ENV_OUTDIR, RunConfig
from .errors import AccuracyError, AccuracyWarning, ConfigurationError, MomtomoError
from .geometry import (AttenuationMap, DiscGrid, SymmetricTensorField, attenuation_from_provenance,
                       make_attenuation, make_phantom_tensor, tensor_from_provenance, zero_attenuation)

log = logging.getLogger("momtomo")

PHANTOM, ATTEN, SINOGRAM, RECON = "phantom", "attenuation", "sinogram", "reconstruction"


# ---------------------------------------------------------------------------
# configuration from file, environment and flags


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.name in ("phantom", "attenuation"):
            p.add_argument(flag, dest=f.name, type=json.loads, help=f"{f.name} as JSON")
        elif f.type in ("int", int):
            p.add_argument(flag, dest=f.name, type=int)
        elif f.type in ("float", float, "Optional[float]"):
            p.add_argument(flag, dest=f.name, type=float)
        else:
            p.add_argument(flag, dest=f.name)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    env = os.environ.get(ENV_OUTDIR)
    if env:
        cfg = cfg.with_overrides(output_dir=env)
    over = {f.name: getattr(args, f.name) for f in fields(RunConfig) if getattr(args, f.name, None) is not None}
    cfg = cfg.with_overrides(**over)
    return cfg.validate()


# ---------------------------------------------------------------------------
# artifacts


def build_phantom(cfg: RunConfig):
    grid = DiscGrid(cfg.grid_n)
    f = make_phantom_tensor(cfg.m, cfg.phantom_kind, cfg.phantom, grid)
    if cfg.attenuated:
        spec = dict(cfg.attenuation)
        a = make_attenuation(spec.get("kind", "gaussian"), spec.get("params"), grid, spec.get("amplitude"))
    else:
        a = zero_attenuation(grid)
    return f, a


def _with_generator(f: SymmetricTensorField) -> SymmetricTensorField:
    """Reattach the analytic generator when the stored samples came from it bit for bit."""
    if "specs" not in f.provenance:
        return f
    try:
        g = tensor_from_provenance(f.provenance, f.grid)
    except (TypeError, KeyError, ConfigurationError):
        return f
    return g if np.array_equal(g.components, f.components) else f


def _atten_with_generator(a: AttenuationMap) -> AttenuationMap:
    if a.is_zero:
        return zero_attenuation(a.grid)
    if "specs" not in a.provenance:
        return a
    try:
        b = attenuation_from_provenance(a.provenance, a.grid)
    except (TypeError, KeyError, ConfigurationError):
        return a
    return b if np.array_equal(b.values, a.values) else a


def cmd_phantom(cfg: RunConfig) -> dict:
    out = Path(cfg.output_dir)
    f, a = build_phantom(cfg)
    io.save_tensor(out / PHANTOM, f)
    io.save_attenuation(out / ATTEN, a)
    (out / "config.json").write_text(cfg.to_json() + "\n")
    return {"phantom": str(out / PHANTOM), "attenuation": str(out / ATTEN)}


def cmd_forward(cfg: RunConfig, csv: bool = False) -> dict:
    from .forward import momenta_sinogram

    out = Path(cfg.output_dir)
    f = _with_generator(io.load_tensor(out / PHANTOM))
    a = _atten_with_generator(io.load_attenuation(out / ATTEN))
    if f.m != cfg.m:
        raise ConfigurationError(f"phantom file has m={f.m}, config asks for m={cfg.m}")
    s = momenta_sinogram(f, a, cfg.n_beta, cfg.n_theta, cfg.quad_step)
    io.save_sinogram(out / SINOGRAM, s)
    res = {"sinogram": str(out / SINOGRAM), "slices": s.m + 1}
    if csv:
        res["csv"] = str(io.export_sinogram_csv(out / (SINOGRAM + ".csv"), s))
    return res


def cmd_reconstruct(cfg: RunConfig, csv: bool = False) -> dict:
    from .reconstruction import reconstruct

    out = Path(cfg.output_dir)
    s = io.load_sinogram(out / SINOGRAM)
    if s.m != cfg.m:
        raise ConfigurationError(f"sinogram has m={s.m}, config asks for m={cfg.m}")
    a = None
    if s.attenuated:
        a = _atten_with_generator(io.load_attenuation(out / ATTEN))
    truth = None
    if (out / (PHANTOM + ".json")).exists():
        t = io.load_tensor(out / PHANTOM)
        if t.m == s.m and t.grid.n == cfg.grid_n:
            truth = t
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", AccuracyWarning)
        report = reconstruct(s, a, cfg, truth=truth)
    summary = report.summary()
    summary["warnings"] = [str(w.message) for w in caught if issubclass(w.category, AccuracyWarning)]
    io.save_tensor(out / RECON, report.tensor)
    io.write_report(out / "report.json", summary)
    res = {"tensor": str(out / RECON), "report": str(out / "report.json"), "summary": summary}
    if csv:
        grid = report.tensor.grid
        res["csv"] = str(io.write_level_csv(out / "levels.csv", report.level_norms, report.source_modes, grid))
        io.write_pgm(out / "f0.pgm", report.source_modes[0].real)
    return res


def cmd_verify(cfg: RunConfig) -> tuple[bool, list]:
    from .verify import run_suite

    rows = run_suite(cfg)
    return all(r["passed"] for r in rows), rows


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="momtomo", description="Momenta tensor tomography on the unit disc.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, help_ in (("phantom", "write phantom tensor and attenuation files"),
                        ("forward", "compute the momenta sinogram of the stored phantom"),
                        ("reconstruct", "reconstruct the tensor from the stored sinogram"),
                        ("verify", "run the operator identity suite")):
        sp = sub.add_parser(verb, help=help_)
        _add_config_flags(sp)
        if verb in ("forward", "reconstruct"):
            sp.add_argument("--csv", action="store_true", help="also write CSV/PGM dumps")
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.verb == "phantom":
            res = cmd_phantom(cfg)
        elif args.verb == "forward":
            res = cmd_forward(cfg, args.csv)
        elif args.verb == "reconstruct":
            res = cmd_reconstruct(cfg, args.csv)
        else:
            ok, rows = cmd_verify(cfg)
            for r in rows:
                print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']:<28} {r['value']:.3e}  (limit {r['limit']:.1e})")
            return 0 if ok else AccuracyError.exit_code
    except MomtomoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps(io._jsonable(res), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
