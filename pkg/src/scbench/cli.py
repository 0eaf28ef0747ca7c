"""Command-line interface.

Subcommands: ``gen`` (circuit text), ``dem`` (detector error model text),
``sample`` (detection-event dump), ``decode`` (standalone decoding of a dump
against a DEM), ``bench`` (full sweep from a JSON config), and ``volume``
(spacetime-volume table).
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import bench as benchmod
from .circuit import emit_text
from .dem import build_dem, emit_dem_text, parse_dem_text
from .decoder import Decoder
from .framesim import CompiledCircuit
from .noise import FamilyConfig, apply_noise, circuit_context, make_builtin_family
from .primitives import spacetime_volume


def _add_primitive_args(p: argparse.ArgumentParser):
    p.add_argument("--primitive", required=True, choices=["memory", "hadamard", "lattice-surgery", "phase-gate"])
    p.add_argument("--dx", type=int, help="logical-X distance (rows)")
    p.add_argument("--dz", type=int, help="logical-Z distance (columns)")
    p.add_argument("--d", type=int, help="square-patch distance shorthand")
    p.add_argument("--rounds", type=int, default=None, help="memory rounds / t_pre=t_merge=t_post / t_merge")
    p.add_argument("--basis", default="Z", choices=["X", "Z"])
    p.add_argument("--parity", default="ZZ", choices=["ZZ", "XX"])
    p.add_argument("--bridge", type=int, default=1)
    p.add_argument("--t-boundary", type=int, default=None)


def _add_noise_args(p: argparse.ArgumentParser):
    from .noise import FAMILIES

    p.add_argument("--family", choices=list(FAMILIES), help="built-in noise family")
    p.add_argument("--p", type=float, help="base physical error rate")
    p.add_argument("--eta", type=float)
    p.add_argument("--axis", choices=["X", "Z"])
    p.add_argument("--sigma", type=float)
    p.add_argument("--noise-seed", type=int)


def _spec_from_args(args):
    d = args.d
    dx = args.dx if args.dx is not None else d
    dz = args.dz if args.dz is not None else d
    if dx is None or dz is None:
        raise SystemExit("specify --d or both --dx and --dz")
    rounds = args.rounds
    if rounds is None:
        raise SystemExit("specify --rounds")
    cfg = benchmod.ExperimentConfig(
        primitive=args.primitive,
        family=FamilyConfig("uniform", 0.0),
        distances=(max(dx, dz),),
        error_rates=(0.0,),
        rounds=rounds,
        basis=args.basis,
        parity=args.parity,
        bridge=args.bridge,
        d_x=dx,
        d_z=dz,
        t_boundary="auto" if args.t_boundary is None else args.t_boundary,
    )
    return benchmod.build_spec(cfg, max(dx, dz))


def _family_from_args(args) -> FamilyConfig | None:
    if args.family is None:
        if args.p is not None:
            raise SystemExit("--p requires --family")
        return None
    if args.p is None:
        raise SystemExit("--family requires --p")
    try:
        return FamilyConfig(
            family=args.family, p=args.p, eta=args.eta, axis=args.axis,
            sigma=args.sigma, seed=args.noise_seed,
        )
    except ValueError as e:
        raise SystemExit(f"bad noise family: {e}")


def _build_circuit(args):
    spec = _spec_from_args(args)
    circuit = benchmod.generate(spec)
    fam = _family_from_args(args)
    if fam is not None:
        assignment = make_builtin_family(fam, circuit_context(circuit))
        circuit = apply_noise(circuit, assignment)
    return circuit


def _write(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as f:
            f.write(text)


def cmd_gen(args):
    _write(emit_text(_build_circuit(args)), args.out)
    return 0


def cmd_dem(args):
    circuit = _build_circuit(args)
    _write(emit_dem_text(build_dem(circuit)), args.out)
    return 0


def cmd_sample(args):
    circuit = _build_circuit(args)
    comp = CompiledCircuit(circuit)
    from .framesim import sample_batch

    table = sample_batch(comp, args.shots, args.seed)
    with open(args.out + ".dets.b8", "wb") as f:
        f.write(table.detectors.tobytes())
    with open(args.out + ".obs.b8", "wb") as f:
        f.write(table.observables.tobytes())
    with open(args.out + ".meta.json", "w") as f:
        json.dump(
            {
                "shots": table.shots,
                "detectors": table.num_detectors,
                "observables": table.num_observables,
                "seed": args.seed,
                "format": "shots-major rows, little-endian bit packing",
            },
            f,
            indent=1,
        )
    print(f"wrote {table.shots} shots: {args.out}.dets.b8 / .obs.b8 / .meta.json")
    return 0


def cmd_decode(args):
    dem = parse_dem_text(open(args.dem).read())
    with open(args.meta) as f:
        meta = json.load(f)
    shots = meta["shots"]
    ndet = meta["detectors"]
    nobs = meta["observables"]
    if ndet != dem.num_detectors:
        raise SystemExit(
            f"dump has {ndet} detectors but the DEM defines {dem.num_detectors}"
        )
    det = np.fromfile(args.dets, dtype=np.uint8).reshape(shots, (ndet + 7) // 8)
    dec = Decoder(dem, mode=args.mode, first_side=args.first_side)
    bits = np.unpackbits(det, axis=1, bitorder="little")[:, :ndet].astype(bool)
    pred = dec.predict_bits(bits)
    out = {"shots": shots, "mode": args.mode}
    if args.obs:
        obs = np.fromfile(args.obs, dtype=np.uint8).reshape(shots, (nobs + 7) // 8)
        actual = np.unpackbits(obs, axis=1, bitorder="little")[:, args.observable].astype(np.int64)
        errors = int(np.sum(((pred >> args.observable) & 1) != actual))
        lo, hi = benchmod.wilson_ci(errors, shots)
        out.update(
            observable=args.observable,
            errors=errors,
            ler_total=errors / shots,
            ci_lo=lo,
            ci_hi=hi,
        )
    print(json.dumps(out, indent=1))
    return 0


def cmd_bench(args):
    try:
        config = benchmod.load_config(args.config)
    except (ValueError, KeyError) as e:
        print(f"bad config: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    results = benchmod.run_experiment(config)
    text = benchmod.results_to_csv(results, deterministic_time=args.deterministic_time)
    _write(text, args.out)
    return 0


def cmd_volume(args):
    spec = _spec_from_args(args)
    print(spacetime_volume(spec))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="scbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="emit circuit text")
    _add_primitive_args(p)
    _add_noise_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("dem", help="emit detector-error-model text")
    _add_primitive_args(p)
    _add_noise_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_dem)

    p = sub.add_parser("sample", help="write a detection-event dump")
    _add_primitive_args(p)
    _add_noise_args(p)
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("decode", help="decode a dump against a DEM")
    p.add_argument("--dem", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--obs", default=None)
    p.add_argument("--meta", required=True)
    p.add_argument("--mode", default="uncorrelated", choices=["uncorrelated", "correlated"])
    p.add_argument("--first-side", default="Z", choices=["Z", "X"])
    p.add_argument("--observable", type=int, default=0)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("bench", help="run a sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None)
    p.add_argument("--deterministic-time", action="store_true", help="zero the wall_time column")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("volume", help="print a primitive's spacetime volume")
    _add_primitive_args(p)
    p.set_defaults(func=cmd_volume)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
