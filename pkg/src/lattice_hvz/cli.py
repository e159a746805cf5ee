"""
Command-line front end.

    lattice-hvz spectrum --model m.json --grid 64 --K-index 32 --out spec.json
    lattice-hvz bands    --model m.json --grid 64 --sweep 8 --out bands.csv
    lattice-hvz clusters --model m.json --grid 16
    lattice-hvz wvw      --model m.json --grid 4 --z=-20,-20+5i
    lattice-hvz verify   --model m.json --box 128

Exit codes: 0 success, 1 a checked contract failed, 2 invalid input.
Every output embeds a sha256 digest of the model and the run configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .clusters import enumerate_partitions
from .model import ModelError, ModelSpec, OffGridError, TorusGrid, load_model, model_to_dict
from .spectra import (BandStructure, GridParams, band_structure, classify_levels,
                      cluster_spectrum, hvz_spectrum)
from .verify import BoxTooSmallError, commutator_bound_check, potential_cutoff_check
from .wvw import FiberContext, SingularResolventError, assemble, string_census

COMMANDS = ("spectrum", "bands", "clusters", "wvw", "verify")
WVW_TOL = 1e-8
EXIT_OK, EXIT_CONTRACT, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    """Bad configuration; reported with exit code 2."""


@dataclass
class RunConfig:
    command: str
    model: str
    grid: int | None = None
    kgrid: int | None = None
    K_index: tuple[int, ...] | None = None
    box: int | None = None
    sweep: int | None = None
    z: tuple[complex, ...] = ()
    r: tuple[float, ...] = ()
    merge_eps: float | None = None
    threads: int = 1
    out: str | None = None

    def provenance(self) -> dict:
        """Fields that determine the result; output path and thread count do not."""
        doc = asdict(self)
        for key in ("model", "out", "threads"):
            doc.pop(key)
        doc["z"] = [[v.real, v.imag] for v in self.z]
        return doc


def config_digest(cfg: RunConfig, m: ModelSpec) -> str:
    payload = json.dumps({"config": cfg.provenance(), "model": model_to_dict(m)},
                         sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


# -- parsing -----------------------------------------------------------------

def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def parse_complex(text: str) -> complex:
    """Accept ``-20``, ``-20+5i``, ``3j`` and the like."""
    t = text.strip().replace(" ", "").replace("i", "j")
    try:
        return complex(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _complexes(text: str) -> tuple[complex, ...]:
    return tuple(parse_complex(t) for t in text.split(","))


def _threads_default() -> int:
    env = os.environ.get("LATTICE_HVZ_THREADS")
    if env is None:
        return 1
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lattice-hvz", description="Spectra of lattice N-particle fiber operators.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid_default):
        sp.add_argument("--model", required=True, help="model JSON file")
        sp.add_argument("--grid", type=int, default=grid_default, help="momentum grid size M")
        sp.add_argument("--K-index", dest="K_index", type=_ints, default=None,
                        help="grid index of K per axis (default: K = 0)")
        sp.add_argument("--out", default=None, help="output file (default: standard output)")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $LATTICE_HVZ_THREADS or 1)")

    for name in ("spectrum", "bands", "clusters"):
        sp = sub.add_parser(name)
        common(sp, 32)
        sp.add_argument("--kgrid", type=int, default=None, help="grid size for the k sums (default M)")
        sp.add_argument("--merge-eps", dest="merge_eps", type=float, default=None)
        if name == "bands":
            sp.add_argument("--sweep", type=int, required=True, help="K values per axis; must divide M")

    sp = sub.add_parser("wvw")
    common(sp, 4)
    sp.add_argument("--z", type=_complexes, default=(-10.0,),
                    help="spectral parameters, e.g. --z=-20,-20+5i")

    sp = sub.add_parser("verify")
    sp.add_argument("--model", required=True)
    sp.add_argument("--K-index", dest="K_index", type=_ints, default=None,
                    help="index of K on a grid of size --grid (default: K = 0)")
    sp.add_argument("--grid", type=int, default=None, help="grid giving the meaning of --K-index")
    sp.add_argument("--box", type=int, default=128, help="truncated box half-width L")
    sp.add_argument("--r", type=_floats, default=(1.0, 2.0, 4.0, 8.0, 16.0), help="cutoff scales")
    sp.add_argument("--out", default=None)
    sp.add_argument("--threads", type=int, default=None)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    threads = ns.threads if ns.threads is not None else _threads_default()
    return RunConfig(
        command=ns.command, model=ns.model, grid=getattr(ns, "grid", None),
        kgrid=getattr(ns, "kgrid", None), K_index=ns.K_index, box=getattr(ns, "box", None),
        sweep=getattr(ns, "sweep", None), z=tuple(getattr(ns, "z", ()) or ()),
        r=tuple(getattr(ns, "r", ()) or ()), merge_eps=getattr(ns, "merge_eps", None),
        threads=max(1, threads), out=ns.out)


# -- helpers -------------------------------------------------------------------

def resolve_K(cfg: RunConfig, m: ModelSpec) -> np.ndarray:
    """Quasi-momentum from its grid index; also checks it sits on the k-grid."""
    if cfg.grid is None:
        if cfg.K_index is not None:
            raise InputError("--K-index needs --grid")
        return np.zeros(m.d)
    if cfg.grid < 1:
        raise InputError(f"grid size must be positive, got {cfg.grid}")
    grid = TorusGrid(cfg.grid, m.d)
    idx = cfg.K_index if cfg.K_index is not None else (cfg.grid // 2,) * m.d
    if len(idx) != m.d:
        raise InputError(f"--K-index needs {m.d} components, got {len(idx)}")
    if any(not 0 <= i < cfg.grid for i in idx):
        raise OffGridError(f"K index {idx} outside 0..{cfg.grid - 1}")
    K = grid.momentum(idx)
    if cfg.kgrid is not None:
        TorusGrid(cfg.kgrid, m.d).index_of(K)
    return K


def grid_params(cfg: RunConfig) -> GridParams:
    if cfg.kgrid is not None and cfg.kgrid < 1:
        raise InputError(f"k-grid size must be positive, got {cfg.kgrid}")
    return GridParams(cfg.grid, cfg.kgrid, cfg.merge_eps, cfg.threads)


def header(cfg: RunConfig, m: ModelSpec, digest: str) -> dict:
    return {"config_digest": digest, "command": cfg.command, "version": __version__,
            "model": {"N": m.N, "d": m.d}, "grid": {"M": cfg.grid, "Mk": cfg.kgrid or cfg.grid, "box": cfg.box}}


def csv_header_lines(head: dict) -> list[str]:
    return [f"config_digest: {head['config_digest']}",
            f"command: {head['command']}",
            f"grid: {json.dumps(head['grid'], sort_keys=True)}"]


def emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _K_list(K) -> list[float]:
    return [float(k) for k in np.atleast_1d(K)]


# -- subcommands -----------------------------------------------------------------

def run_spectrum(cfg: RunConfig, m: ModelSpec, digest: str) -> int:
    K = resolve_K(cfg, m)
    params = grid_params(cfg)
    ess = hvz_spectrum(m, K, params)
    levels = classify_levels(m, K, params, ess)
    head = header(cfg, m, digest)
    doc = {**head, "K": _K_list(K), "K_index": list(cfg.K_index or (cfg.grid // 2,) * m.d),
           "merge_eps": ess.merge_eps,
           "intervals": [list(iv) for iv in ess.intervals],
           "points": sorted(list(ess.points) + [lev.value for lev in levels]),
           "essential": ess.to_dict(),
           "discrete": [asdict(lev) for lev in levels]}
    table = BandStructure([K], [ess], [levels]).to_csv(csv_header_lines(head))
    if cfg.out is None:
        emit(_json(doc), None)
    else:
        emit(_json(doc), cfg.out)
        emit(table, str(Path(cfg.out).with_suffix(".csv")))
    return EXIT_OK


def run_bands_sweep(cfg: RunConfig, m: ModelSpec, digest: str) -> int:
    if cfg.sweep is None or cfg.sweep < 1 or cfg.grid % cfg.sweep:
        raise InputError(f"--sweep {cfg.sweep} must divide --grid {cfg.grid}")
    if cfg.kgrid is not None and cfg.kgrid % cfg.sweep:
        raise InputError(f"--sweep {cfg.sweep} must divide --kgrid {cfg.kgrid}")
    bands = band_structure(m, grid_params(cfg), cfg.sweep)
    emit(bands.to_csv(csv_header_lines(header(cfg, m, digest))), cfg.out)
    return EXIT_OK


def run_clusters(cfg: RunConfig, m: ModelSpec, digest: str) -> int:
    K = resolve_K(cfg, m)
    params = grid_params(cfg)
    entries = []
    for D in enumerate_partitions(m.N):
        entry = {"blocks": D.to_list(), "n_blocks": len(D), "two_cluster": len(D) == 2}
        if len(D) >= 2:
            entry["spectrum"] = cluster_spectrum(m, D, K, params).to_dict()
        entries.append(entry)
    emit(_json({**header(cfg, m, digest), "K": _K_list(K), "decompositions": entries}), cfg.out)
    return EXIT_OK


def run_wvw(cfg: RunConfig, m: ModelSpec, digest: str) -> int:
    K = resolve_K(cfg, m)
    ctx = FiberContext.build(m, K, TorusGrid(cfg.grid, m.d))
    rows, failed = [], []
    for z in cfg.z or (-10.0,):
        try:
            parts = assemble(ctx, z)
        except SingularResolventError as exc:
            raise InputError(str(exc)) from None
        G = ctx.resolvent(None, z)
        res = float(np.linalg.norm(G - parts.D - parts.I @ G, 2))
        ok = res <= WVW_TOL
        rows.append({"z": [z.real, z.imag] if isinstance(z, complex) else [float(z), 0.0],
                     "residual": res, "I_norm": float(np.linalg.norm(parts.I, 2)), "pass": ok})
        if not ok:
            failed.append(f"identity at z={z}: residual {res:.3e} > {WVW_TOL:g}")
    census = {str(k): v for k, v in string_census(m.N).items()}
    doc = {**header(cfg, m, digest), "K": _K_list(K), "dimension": ctx.dim,
           "census": census, "identity": rows, "tolerance": WVW_TOL, "pass": not failed}
    emit(_json(doc), cfg.out)
    for msg in failed:
        print(f"contract failed: {msg}", file=sys.stderr)
    return EXIT_CONTRACT if failed else EXIT_OK


def run_verify(cfg: RunConfig, m: ModelSpec, digest: str) -> int:
    K = resolve_K(cfg, m)
    if cfg.box is None or cfg.box < 1:
        raise InputError("--box must be a positive half-width")
    too_small = [r for r in cfg.r if cfg.box < 8 * r]
    if too_small:
        raise BoxTooSmallError(f"box too small: half-width {cfg.box} < 8*r for r in {list(too_small)}")
    checks = []
    for r in cfg.r:
        checks.append(("commutator", "", commutator_bound_check(m, K, r, cfg.box)))
    for v in m.potentials:
        for r in cfg.r:
            checks.append(("potential", f"{v.i}-{v.j}", potential_cutoff_check(m, v.pair, r, cfg.box)))
    buf = io.StringIO()
    for line in csv_header_lines(header(cfg, m, digest)):
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["check", "pair", "r", "measured", "bound", "pass"])
    failed = []
    for kind, pair, c in checks:
        writer.writerow([kind, pair, repr(float(c.r)), repr(c.measured), repr(c.bound), str(c.passed).lower()])
        if not c.passed:
            failed.append(f"{kind} {pair} r={c.r:g}: measured {c.measured:.6g} > bound {c.bound:.6g}")
    emit(buf.getvalue(), cfg.out)
    for msg in failed:
        print(f"contract failed: {msg}", file=sys.stderr)
    return EXIT_CONTRACT if failed else EXIT_OK


RUNNERS = {"spectrum": run_spectrum, "bands": run_bands_sweep, "clusters": run_clusters,
           "wvw": run_wvw, "verify": run_verify}


def run(cfg: RunConfig) -> int:
    m = load_model(cfg.model)
    if cfg.grid is not None and cfg.grid < 1:
        raise InputError(f"grid size must be positive, got {cfg.grid}")
    return RUNNERS[cfg.command](cfg, m, config_digest(cfg, m))


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    cfg = config_from_args(ns)
    try:
        return run(cfg)
    except (OSError, ModelError, OffGridError, InputError, BoxTooSmallError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
