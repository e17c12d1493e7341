"""Command-line driver for convergence studies.

    wgmfem --example 1 --degree 1 --levels 4..7 --format markdown

Options may also come from a ``key = value`` file given with ``--config``;
command-line flags win over the file, the file wins over built-in defaults.
"""
import argparse
import re
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import BudgetExceeded, WGMFEMError
from .mesh import build_mesh, write_mesh
from .verification import convergence_study, get_case
from .wg_stokes import DegreeProfile

DEFAULT_NU = {1: 0.5, 2: 1.0}


@dataclass
class RunConfig:
    example: int = 1
    degree: int = 1
    levels: tuple = (1, 4)
    nu: float = None  # None: the example's own viscosity
    bjs: float = 1.0
    kappa: float = 1.0
    format: str = "csv"
    out: str = None
    dump_fields: bool = False
    dof_budget: float = 5e5
    seed: int = 0

    def validate(self):
        if self.example not in (1, 2):
            raise ValueError(f"example must be 1 or 2, got {self.example}")
        if not 1 <= self.degree <= 4:
            raise ValueError(f"degree must be in 1..4, got {self.degree}")
        lo, hi = self.levels
        if not 1 <= lo <= hi:
            raise ValueError(f"level range {lo}..{hi} is empty or starts below 1")
        if self.format not in ("csv", "markdown"):
            raise ValueError(f"format must be csv or markdown, got {self.format!r}")
        if self.dof_budget <= 0:
            raise ValueError("dof budget must be positive")
        return self


def parse_levels(text):
    m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.|-|:)\s*(\d+)\s*", str(text))
    if m:
        return int(m.group(1)), int(m.group(2))
    if str(text).strip().isdigit():
        return int(text), int(text)
    raise ValueError(f"levels must look like A..B, got {text!r}")


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_CONVERT = {
    "example": int,
    "degree": int,
    "levels": parse_levels,
    "nu": float,
    "bjs": float,
    "kappa": float,
    "format": str,
    "out": str,
    "dump_fields": _parse_bool,
    "dof_budget": float,
    "seed": int,
}


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys are allowed."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERT:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _CONVERT[key](value)
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="wgmfem", description="Coupled WG Stokes / BDM Darcy convergence studies.")
    p.add_argument("--example", type=int, choices=(1, 2))
    p.add_argument("--degree", type=int, choices=(1, 2, 3, 4))
    p.add_argument("--levels", type=parse_levels, help="inclusive range A..B (level 1 = four triangles)")
    p.add_argument("--nu", type=float, help="viscosity (default: 0.5 for example 1, 1 for example 2)")
    p.add_argument("--bjs", type=float, help="interface slip coefficient (default 1)")
    p.add_argument("--kappa", type=float, help="permeability (default 1)")
    p.add_argument("--format", choices=("csv", "markdown"))
    p.add_argument("--out", help="write the table here instead of stdout")
    p.add_argument("--dump-fields", action="store_true", default=None, help="write per-level mesh and solution dumps")
    p.add_argument("--dof-budget", type=float, help="refuse levels with more unknowns (default 5e5)")
    p.add_argument("--seed", type=int, help="recorded for reproducibility; the study itself is deterministic")
    p.add_argument("--config", help="key = value file with defaults for any of the above")
    return p


def make_config(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    values = {}
    if args.config:
        try:
            values.update(read_config_file(args.config))
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    cfg = RunConfig(**values)
    try:
        cfg.validate()
    except ValueError as exc:
        parser.error(str(exc))
    return cfg


def run(cfg):
    """Run the study described by ``cfg``; returns the process exit status."""
    nu = cfg.nu if cfg.nu is not None else DEFAULT_NU[cfg.example]
    case = get_case(cfg.example, nu=nu, bjs=cfg.bjs, kappa=cfg.kappa)
    profile = DegreeProfile.default(cfg.degree)
    lo, hi = cfg.levels
    stem = Path(cfg.out).with_suffix("") if cfg.out else Path(f"example{cfg.example}_p{cfg.degree}")
    ok = True

    def on_level(level, sol, errs):
        nonlocal ok
        ok = ok and sol.report.ok
        print(f"level {level}: {sol.report.to_json()}", file=sys.stderr)
        if cfg.dump_fields:
            write_mesh(sol.disc.mesh, f"{stem}_level{level}_mesh.txt")
            sol.write(f"{stem}_level{level}_solution.txt")

    table = convergence_study(case, profile, range(lo, hi + 1), dof_budget=cfg.dof_budget, on_level=on_level)
    text = table.to_csv() if cfg.format == "csv" else table.to_markdown()
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


def main(argv=None):
    cfg = make_config(argv)
    try:
        return run(cfg)
    except BudgetExceeded as exc:
        print(f"wgmfem: {exc}", file=sys.stderr)
        return 2
    except WGMFEMError as exc:
        print(f"wgmfem: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
