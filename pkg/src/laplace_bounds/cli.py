"""Command line front end: constant tables, thresholds, brackets and checks.

Examples::

    laplace-bounds constants --problem dixon2:r2=pi2/108
    laplace-bounds threshold --problem dixon2:r2=pi2/108 --relax-a 1.2
    laplace-bounds verify --problem separable-cubic:d=2,gamma=0.5
    laplace-bounds compare-mcw --n 1,2,5,10,100 --format csv
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .bounds_engine import (
    RelaxationParams,
    bracket_E_g,
    bracket_I,
    mcw_reference,
    n0_residual,
    n1_holds,
    scaled_coefficients,
    theorem1_constants,
    theorem2_constants,
)
from .local_model import LocalExpansion
from .oracle import NoConvergence, dixon_exact, empirical_error
from .problem_library import (
    DIXON2_PUBLISHED,
    Problem,
    dixon2_published_constants,
    dixon_leading,
    resolve,
)

COMMANDS = ("constants", "threshold", "bracket", "verify", "dixon", "compare-mcw")
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_ORACLE = 3


@dataclass
class RunConfig:
    command: str
    problem: Optional[str] = None
    n_list: list = field(default_factory=list)
    relax_a: Optional[float] = None
    output: str = "json"
    out_path: Optional[str] = None
    published_constants: bool = False
    integer: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.output not in ("json", "csv"):
            raise ValueError(f"output must be json or csv, got {self.output!r}")
        if self.relax_a is not None and self.relax_a <= -0.5:
            raise ValueError("relax_a must exceed -1/2")
        if self.command == "bracket" and not self.n_list:
            raise ValueError("bracket needs a nonempty n list")


def parse_n_list(text: str) -> list[float]:
    """'1,2,5' or 'geom:a:b:k' (k geometric points from a to b) or 'range:a:b'."""
    text = text.strip()
    if text.startswith("geom:"):
        _, a, b, k = text.split(":")
        return [float(x) for x in np.geomspace(float(a), float(b), int(k))]
    if text.startswith("range:"):
        _, a, b = text.split(":")
        return [float(x) for x in range(int(a), int(b) + 1)]
    values = [float(x) for x in text.split(",") if x.strip()]
    if not values or any(v <= 0 for v in values):
        raise ValueError(f"n list must hold positive numbers: {text!r}")
    return values


def load_problem(selector: str) -> Problem:
    path = Path(selector)
    if selector.endswith(".json") and path.exists():
        local = LocalExpansion.load(path)
        return Problem(name=path.stem, local=local)
    return resolve(selector)


def _relax(cfg: RunConfig) -> RelaxationParams:
    if cfg.relax_a is None:
        return RelaxationParams.base()
    return RelaxationParams.for_a(cfg.relax_a)


def _constants_for(problem: Problem, cfg: RunConfig):
    if cfg.published_constants:
        if not problem.name.startswith("dixon2"):
            raise ValueError("published constants exist only for the dixon2 problem")
        return dixon2_published_constants(problem)
    return theorem1_constants(problem.local, _relax(cfg))


def cmd_constants(problem: Problem, cfg: RunConfig) -> dict:
    consts = theorem1_constants(problem.local, _relax(cfg))
    s = problem.exponent_scale
    report = {
        "problem": problem.name,
        "exponent_scale": s,
        "local": {
            "d": problem.d,
            "lambda_min": problem.local.lambda_min,
            "det_H": problem.local.det_H,
            "D": problem.local.D,
            "C": problem.local.C,
            "alpha": problem.local.alpha,
            "r": problem.local.r,
            "Delta": problem.local.Delta,
        },
        "theorem1": consts.to_dict(),
        "per_n": scaled_coefficients(consts, s),
    }
    if problem.gdata is not None:
        report["theorem2"] = theorem2_constants(problem.local, problem.gdata, consts).to_dict()
    if "example_closed_forms" in problem.notes:
        report["example_closed_forms"] = problem.notes["example_closed_forms"]
    if problem.name.startswith("dixon2"):
        report["reproduction"] = dixon2_reproduction(problem)
    return report


def dixon2_reproduction(problem: Problem) -> list[dict]:
    """Computed vs published values for the transformed Dixon example; K_1 appears twice on purpose."""
    base = theorem1_constants(problem.local)
    relaxed = theorem1_constants(problem.local, RelaxationParams.for_a(DIXON2_PUBLISHED["relaxed a"]))
    sc, sr = scaled_coefficients(base, 2.0), scaled_coefficients(relaxed, 2.0)
    published = DIXON2_PUBLISHED
    published_K1_half = published["(K_alpha1+K_1)/2"] - published["K_alpha1/2"]
    rows = [
        ("C", problem.local.C, published["C"]),
        ("Delta", problem.local.Delta, published["Delta"]),
        ("K_alpha1/2", sc["K_alpha1"], published["K_alpha1/2"]),
        ("K_1/2 (theorem formula)", sc["K_1"], published_K1_half),
        ("K_1/2 (paper value)", published_K1_half, published_K1_half),
        ("(K_alpha1+K_1)/2", sc["K_alpha1+K_1"], published["(K_alpha1+K_1)/2"]),
        ("K_l/8", sc["K_l"], published["K_l/8"]),
        ("K_alpha2", base.K_alpha2, published["K_alpha2"]),
        ("(K_alpha2+K_u)/4", sc["K_alpha2+K_u"], published["(K_alpha2+K_u)/4"]),
        ("n0", base.n0, published["n0"]),
        ("n0 (N1 alone)", base.n2, published["n0 (N1 alone)"]),
        ("relaxed x_a", relaxed.relaxation.x_a, published["relaxed x_a"]),
        ("relaxed n0", relaxed.n0, published["relaxed n0"]),
        ("relaxed (K_alpha1+K_1)/2", sr["K_alpha1+K_1"], published["relaxed (K_alpha1+K_1)/2"]),
        ("relaxed (K_alpha2+K_u)/4", sr["K_alpha2+K_u"], published["relaxed (K_alpha2+K_u)/4"]),
    ]
    return [{"quantity": q, "computed": c, "published": p} for q, c, p in rows]


def cmd_threshold(problem: Problem, cfg: RunConfig) -> dict:
    consts = theorem1_constants(problem.local, _relax(cfg))
    s = problem.exponent_scale
    n0, n2 = consts.n0, consts.n2
    binding = "N1" if math.isclose(n0, n2, rel_tol=1e-12) else "N2"
    below = 0.99 * n0
    report = {
        "problem": problem.name,
        "n0": n0,
        "n2": n2,
        "n0_per_n": n0 / s,
        "n2_per_n": n2 / s,
        "binding": binding,
        "relaxation": {"a": consts.relaxation.a, "x_a": consts.relaxation.x_a},
        "diagnostics": {
            "N2_value_at_n0": n0_residual(problem.local, n0),
            "N1_holds_at_0.99n0": n1_holds(problem.local, below),
            "N2_value_at_0.99n0": n0_residual(problem.local, below),
        },
    }
    if problem.gdata is not None:
        report["n4"] = theorem2_constants(problem.local, problem.gdata, consts).n4
    if cfg.integer:
        for key in ("n0", "n2", "n0_per_n", "n2_per_n", "n4"):
            if key in report:
                report[key] = math.ceil(report[key] - 1e-9)
    return report


def cmd_bracket(problem: Problem, cfg: RunConfig) -> list[dict]:
    consts = _constants_for(problem, cfg)
    rows = []
    for n in cfg.n_list:
        N = problem.theorem_n(n)
        if problem.gdata is not None:
            g = theorem2_constants(problem.local, problem.gdata, consts)
            br = bracket_E_g(N, consts, g)
        else:
            br = bracket_I(N, consts)
        rows.append({"n": n, "N": N, **{k: v for k, v in br.to_dict().items() if k != "n"}})
    return rows


def default_grid(problem: Problem, consts) -> list[float]:
    s = problem.exponent_scale
    return [float(x) for x in np.geomspace(consts.n0 / s, 100 * consts.n0 / s, 20)]


def cmd_verify(problem: Problem, cfg: RunConfig) -> tuple[list[dict], bool]:
    consts = _constants_for(problem, cfg)
    n_list = cfg.n_list or default_grid(problem, consts)
    rows, ok = [], True
    for n in n_list:
        br = bracket_I(problem.theorem_n(n), consts)
        err = empirical_error(problem, n)
        contained = br.contains_rel(err.E)
        if br.valid and not contained:
            ok = False
        rows.append(
            {
                "n": n,
                "N": br.n,
                "leading": br.leading,
                "rel_lo": br.rel_lo,
                "rel_hi": br.rel_hi,
                "abs_lo": br.abs_lo,
                "abs_hi": br.abs_hi,
                "valid": br.valid,
                "I_oracle": err.I_oracle,
                "E": err.E,
                "method": err.method,
                "contained": contained,
            }
        )
    return rows, ok


def _decimal(x: int) -> str:
    limit = sys.get_int_max_str_digits() if hasattr(sys, "get_int_max_str_digits") else 0
    if limit:
        sys.set_int_max_str_digits(0)
    try:
        return str(x)
    finally:
        if limit:
            sys.set_int_max_str_digits(limit)


def cmd_dixon(problem: Problem, cfg: RunConfig) -> tuple[list[dict], bool]:
    if problem.exact_hook != "dixon_sum":
        raise ValueError(f"problem {problem.name} is not a Dixon problem")
    consts = _constants_for(problem, cfg)
    d = problem.d
    n_list = cfg.n_list or [float(k) for k in range(1, 21)]
    rows, ok = [], True
    for n in n_list:
        if not float(n).is_integer():
            raise ValueError("Dixon sums need integer n")
        n = int(n)
        S, _ = dixon_exact(d, n)
        err = empirical_error(problem, n)
        br = bracket_I(problem.theorem_n(n), consts)
        contained = br.contains_rel(err.E)
        ok &= contained or not br.valid
        rows.append(
            {
                "n": n,
                "S_exact": _decimal(S),
                "log_leading": dixon_leading(d, n),
                "E": err.E,
                "rel_lo": br.rel_lo,
                "rel_hi": br.rel_hi,
                "valid": br.valid,
                "contained": contained,
            }
        )
    return rows, ok


def cmd_compare_mcw(problem: Problem, cfg: RunConfig) -> list[dict]:
    consts = _constants_for(problem, cfg)
    n_list = cfg.n_list or [1.0, 2.0, 5.0, 10.0, 100.0]
    rows = []
    for n in n_list:
        br = bracket_I(problem.theorem_n(n), consts)
        rows.append({"n": n, "mcw_radius": mcw_reference(n), "our_lo": br.rel_lo, "our_hi": br.rel_hi})
    return rows


def _flatten(obj, prefix: str = "") -> list[tuple[str, object]]:
    if isinstance(obj, dict):
        out = []
        for k, v in obj.items():
            out += _flatten(v, f"{prefix}.{k}" if prefix else str(k))
        return out
    if isinstance(obj, list):
        out = []
        for i, v in enumerate(obj):
            out += _flatten(v, f"{prefix}[{i}]")
        return out
    return [(prefix, obj)]


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return v


def render(result, output: str) -> str:
    if output == "json":
        return json.dumps(result, indent=2) + "\n"
    buf = io.StringIO()
    if isinstance(result, list) and result and isinstance(result[0], dict):
        writer = csv.DictWriter(buf, fieldnames=list(result[0]), lineterminator="\n")
        writer.writeheader()
        for row in result:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    else:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        for k, v in _flatten(result):
            writer.writerow([k, _fmt(v)])
    return buf.getvalue()


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute one command; return (exit status, rendered report)."""
    default_problem = "dixon2:r2=pi2/108" if cfg.command in ("dixon", "compare-mcw") else None
    selector = cfg.problem or default_problem
    if selector is None:
        raise ValueError(f"{cfg.command} needs --problem")
    problem = load_problem(selector)
    if cfg.command == "compare-mcw" and not cfg.problem:
        cfg.published_constants = True
    status = 0
    if cfg.command == "constants":
        result = cmd_constants(problem, cfg)
    elif cfg.command == "threshold":
        result = cmd_threshold(problem, cfg)
    elif cfg.command == "bracket":
        result = cmd_bracket(problem, cfg)
    elif cfg.command == "verify":
        result, ok = cmd_verify(problem, cfg)
        status = 0 if ok else EXIT_VIOLATION
    elif cfg.command == "dixon":
        result, ok = cmd_dixon(problem, cfg)
        status = 0 if ok else EXIT_VIOLATION
    else:
        result = cmd_compare_mcw(problem, cfg)
    return status, render(result, cfg.output)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="laplace-bounds", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--problem", help="selector (e.g. dixon:d=3,eta=0.2) or LocalExpansion JSON path")
    parser.add_argument("--n", dest="n_list", help="comma list, geom:a:b:k or range:a:b")
    parser.add_argument("--relax-a", type=float, help="relaxation parameter a > -1/2")
    parser.add_argument("--format", dest="output", choices=("json", "csv"), default="json")
    parser.add_argument("--out", dest="out_path", help="write the report here instead of stdout")
    parser.add_argument("--config", help="JSON file with RunConfig fields")
    parser.add_argument("--published-constants", action="store_true", help="use the published constants of the transformed Dixon example")
    parser.add_argument("--integer", action="store_true", help="round thresholds up to integers")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
        if isinstance(data.get("n_list"), str):
            data["n_list"] = parse_n_list(data["n_list"])
    data["command"] = args.command
    for key in ("problem", "relax_a", "out_path"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    if args.n_list is not None:
        data["n_list"] = parse_n_list(args.n_list)
    if args.output != "json" or "output" not in data:
        data["output"] = args.output
    data["published_constants"] = args.published_constants or data.get("published_constants", False)
    data["integer"] = args.integer or data.get("integer", False)
    return RunConfig(**data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        status, text = run(cfg)
    except NoConvergence as exc:
        print(f"error: oracle did not converge: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.out_path:
        Path(cfg.out_path).write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
