"""locc-rounds: generate families, certify round lower bounds, build and run protocols."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsl
from .opm import finest_projective_opm, is_trivial, opm_space, round_lower_bound
from .qalg import LayoutError, Party
from .states import StateFamily, family, verify_orthonormal_basis, with_bells
from .protocol import build_one_ebit, build_plain, build_two_ebit, execute, rounds, validate

SUCCESS_TOL = 1e-9
EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_PARSE = 0, 1, 2, 3
BUILDERS = {"plain": build_plain, "one-ebit": build_one_ebit, "two-ebit": build_two_ebit}


@dataclass
class CliConfig:
    command: str
    d: int | None = None
    paths: tuple = ()
    out: str | None = None
    party: str = "alice"
    seed: int = 42
    max_depth: int | None = None
    tol: float = 1e-10
    as_json: bool = False
    kind: str | None = None

    def __post_init__(self):
        if self.d is not None and (self.d < 2 or self.d % 2):
            raise ValueError(f"--d must be an even integer >= 2, got {self.d}")
        if not self.tol > 0:
            raise ValueError("--tol must be positive")


class CliError(Exception):
    def __init__(self, message, code=EXIT_INVALID):
        super().__init__(message)
        self.code = code


def _encode(obj, indent, level) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"cannot encode {x} as JSON")
        text = format(x, ".17g")
        if not any(c in text for c in ".en"):
            text += ".0"
        return text
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON with every float written to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _note(msg: str):
    print(msg, file=sys.stderr)


def _load_family(cfg: CliConfig, position: int = 0) -> StateFamily:
    if len(cfg.paths) > position:
        path = cfg.paths[position]
        try:
            return StateFamily.load(path)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CliError(f"cannot read family {path}: {exc}") from None
    if cfg.d is None:
        raise CliError("give a family file or --d")
    return family(cfg.d)


def _load_protocol(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    try:
        return dsl.parse_source(text, path).tree
    except dsl.DslError as exc:
        raise CliError(f"{path}:{exc}", EXIT_PARSE) from None


def cmd_generate(cfg: CliConfig) -> int:
    if cfg.d is None:
        raise CliError("generate needs --d")
    fam = family(cfg.d)
    rep = verify_orthonormal_basis(fam, cfg.tol)
    summary = {"d": cfg.d, "states": len(fam), "gram_rank": rep.gram_rank,
               "max_offdiag": rep.max_offdiag, "is_basis": rep.is_basis}
    if cfg.out:
        Path(cfg.out).write_text(dumps(fam.to_json()))
    if cfg.as_json:
        sys.stdout.write(dumps(summary))
    else:
        print(f"{len(fam)} states, gram rank {rep.gram_rank}, "
              f"max |<i|j>| {rep.max_offdiag:.3g}, is_basis {str(rep.is_basis).lower()}")
    return EXIT_OK if rep.is_basis else EXIT_FAIL


def cmd_check(cfg: CliConfig) -> int:
    """Basis check for a family file, or validation plus lint for a protocol."""
    if cfg.paths and cfg.paths[0].endswith(".locc"):
        tree = _load_protocol(cfg.paths[0])
        problems = validate(tree)
        warnings = []
        if not problems:
            fam = _load_family(cfg, 1) if len(cfg.paths) > 1 or cfg.d else None
            report = None
            if fam is not None:
                report = execute(tree, _attach(tree, fam))
            warnings = dsl.lint(tree, report)
        result = {"valid": not problems, "violations": problems, "warnings": warnings,
                  "rounds": rounds(tree)}
        for p in problems:
            _note(f"violation: {p}")
        for w in warnings:
            _note(f"warning: {w}")
        if cfg.as_json:
            sys.stdout.write(dumps(result))
        else:
            print(f"valid {str(not problems).lower()}, rounds {rounds(tree)}, "
                  f"{len(warnings)} warnings")
        return EXIT_OK if not problems else EXIT_INVALID
    fam = _load_family(cfg)
    rep = verify_orthonormal_basis(fam, cfg.tol)
    result = {"states": rep.n_states, "gram_rank": rep.gram_rank,
              "max_offdiag": rep.max_offdiag, "is_basis": rep.is_basis}
    if cfg.as_json:
        sys.stdout.write(dumps(result))
    else:
        print(f"{rep.n_states} states, gram rank {rep.gram_rank}, is_basis {str(rep.is_basis).lower()}")
    return EXIT_OK if rep.is_basis else EXIT_FAIL


def _matrix_json(m: np.ndarray) -> list:
    m = np.round(m, 12) + 0.0  # also folds -0.0 into 0.0
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def cmd_opm(cfg: CliConfig) -> int:
    fam = _load_family(cfg)
    party = Party.parse(cfg.party)
    space = opm_space(fam, party, tol=cfg.tol)
    trivial = is_trivial(space)
    projectors = [] if trivial else finest_projective_opm(space, seed=cfg.seed)
    result = {"party": party.value, "acting_registers": list(space.acting_registers),
              "dim": space.dim, "trivial": trivial,
              "basis": [_matrix_json(b) for b in space.matrices()],
              "finest_projector_ranks": [int(round(np.trace(p).real)) for p in projectors]}
    if cfg.as_json:
        sys.stdout.write(dumps(result))
    else:
        print(f"{party.value}: OPM space dim {space.dim}, "
              f"{'trivial' if trivial else 'nontrivial'}")
        for k, b in enumerate(space.matrices()):
            print(f"basis[{k}] =")
            print(np.array2string(np.round(b, 12) + 0.0, precision=6, suppress_small=True))
    return EXIT_OK


def cmd_bound(cfg: CliConfig) -> int:
    fam = _load_family(cfg)
    bound, trace = round_lower_bound(fam, max_depth=cfg.max_depth, seed=cfg.seed, tol=cfg.tol)
    if cfg.out:
        Path(cfg.out).write_text(dumps(trace.to_json()))
    if cfg.as_json:
        sys.stdout.write(dumps({"d": fam.d, "lower_bound": bound, "seed": cfg.seed}))
    else:
        print(f"OPM-round lower bound: {bound}")
    return EXIT_OK


def cmd_build(cfg: CliConfig) -> int:
    if cfg.d is None:
        raise CliError("build needs --d")
    try:
        tree = BUILDERS[cfg.kind](cfg.d)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    _emit(dsl.serialize(tree), cfg.out)
    _note(f"{tree.name}: rounds {rounds(tree)}")
    if cfg.out and cfg.as_json:
        sys.stdout.write(dumps({"name": tree.name, "rounds": rounds(tree)}))
    elif cfg.out:
        print(f"rounds {rounds(tree)}")
    return EXIT_OK


def _describe(layout) -> str:
    return ", ".join(f"{r.name}:{r.party.value}:{r.dim}" for r in layout.registers)


def _attach(tree, fam):
    """Attach the protocol's Bell pairs to a plain family if it lacks them."""
    if fam.layout != tree.layout and tree.resources:
        if all(r not in fam.layout for pair in tree.resources for r in pair):
            fam = with_bells(fam, tree.resources)
    if fam.layout != tree.layout:
        raise LayoutError(f"family registers {_describe(fam.layout)} do not match "
                          f"protocol registers {_describe(tree.layout)}")
    return fam


def cmd_run(cfg: CliConfig) -> int:
    if not cfg.paths:
        raise CliError("run needs a protocol file")
    tree = _load_protocol(cfg.paths[0])
    problems = validate(tree)
    if problems:
        for p in problems:
            _note(f"violation: {p}")
        return EXIT_INVALID
    fam = _load_family(cfg, 1)
    try:
        fam = _attach(tree, fam)
        report = execute(tree, fam)
    except LayoutError as exc:
        raise CliError(str(exc)) from None
    _emit(dumps(report.to_json()), cfg.out)
    ok = report.success_probability >= 1 - SUCCESS_TOL
    _note(f"success probability {report.success_probability:.17g}, "
          f"max rounds {report.max_rounds}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_parse(cfg: CliConfig) -> int:
    if not cfg.paths:
        raise CliError("parse needs a protocol file")
    tree = _load_protocol(cfg.paths[0])
    if cfg.as_json:
        sys.stdout.write(dumps({"name": tree.name, "rounds": rounds(tree),
                                "registers": tree.layout.to_json(),
                                "resources": [list(r) for r in tree.resources]}))
    else:
        _emit(dsl.serialize(tree), cfg.out)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "check": cmd_check, "opm": cmd_opm, "bound": cmd_bound,
            "build": cmd_build, "run": cmd_run, "parse": cmd_parse}


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--d", type=int, help="local dimension (even)")
    common.add_argument("--party", default="alice", choices=["alice", "bob"])
    common.add_argument("--seed", type=int, default=42,
                        help="random seed (the LOCC_SEED environment variable overrides it)")
    common.add_argument("--max-depth", type=int, default=None, help="recursion limit, default 4d")
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--json", action="store_true", dest="as_json", help="JSON on stdout")

    ap = argparse.ArgumentParser(prog="locc-rounds", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write the d x d family")
    p = sub.add_parser("check", parents=[common], help="basis check, or validate a .locc file")
    p.add_argument("paths", nargs="*")
    for name, helptext in (("opm", "orthogonality-preserving measurement space"),
                           ("bound", "OPM-round lower bound")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("paths", nargs="*", metavar="family")
    p = sub.add_parser("build", parents=[common], help="write a built-in protocol")
    p.add_argument("kind", choices=sorted(BUILDERS))
    p = sub.add_parser("run", parents=[common], help="execute a protocol on a family")
    p.add_argument("paths", nargs="+", metavar="file")
    p = sub.add_parser("parse", parents=[common], help="parse and reformat a .locc file")
    p.add_argument("paths", nargs=1, metavar="protocol")
    return ap


def config_from_args(argv=None) -> CliConfig:
    ns = make_parser().parse_args(argv)
    seed = ns.seed
    env = os.environ.get("LOCC_SEED")
    if env is not None:
        seed = int(env)
    return CliConfig(command=ns.command, d=ns.d, paths=tuple(getattr(ns, "paths", ())),
                     out=ns.out, party=ns.party, seed=seed, max_depth=ns.max_depth,
                     tol=ns.tol, as_json=ns.as_json, kind=getattr(ns, "kind", None))


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except ValueError as exc:
        _note(f"error: {exc}")
        return EXIT_INVALID
    try:
        return COMMANDS[cfg.command](cfg)
    except CliError as exc:
        _note(f"error: {exc}")
        return exc.code
    except (LayoutError, ValueError) as exc:
        _note(f"error: {exc}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
