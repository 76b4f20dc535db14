"""Command-line client for the hazardnav service.

Commands build the same pydantic requests the HTTP API accepts and execute
them in-process by default; ``--server URL`` sends them to a running service
instead. Every command is deterministic given its flags: all randomness is
seed-controlled and the effective seed is printed in the output header.

Exit codes: 0 success, 1 user/input error (reported as ``CODE: message`` on
stderr), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from . import __version__
from .danger import load_prediction_records
from .environment import environment_json, school54
from .errors import HazardNavError, InputError
from .likelihood import save_matrix
from .montecarlo import PER_RUN_HEADER, ExperimentResults, results_to_csv
from .sensing import SensingModality
from .service import app as service_app
from .service import schemas as s
from .service.app import (
    estimate_likelihood_endpoint,
    eval_metrics,
    gen_env,
    plan,
    simulate,
)

CONFIG_KEYS = {
    "runs",
    "taus",
    "modalities",
    "gt_mode",
    "termination",
    "step_cap",
    "master_seed",
}
HTTP_TIMEOUT = 600.0


class UsageError(InputError):
    code = "E_USAGE"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are exit 1
        raise UsageError(message)


class ServiceClient:
    """Dispatches requests in-process or to a remote server."""

    def __init__(self, server: str | None = None):
        self.server = server.rstrip("/") if server else None

    def _post(self, path: str, request, response_model):
        if self.server is None:
            raise NotImplementedError
        reply = httpx.post(
            f"{self.server}{path}",
            json=request.model_dump(mode="json"),
            timeout=HTTP_TIMEOUT,
        )
        if reply.status_code != 200:
            try:
                err = reply.json()
            except ValueError:
                raise HazardNavError(
                    f"server returned {reply.status_code}", code="E_SERVER"
                )
            raise InputError(
                err.get("message", reply.text),
                code=err.get("error_code", "E_SERVER"),
            )
        return response_model.model_validate(reply.json())

    def simulate(self, request: s.SimulateRequest) -> s.SimulateResponse:
        if self.server:
            return self._post("/simulate", request, s.SimulateResponse)
        return simulate(request)

    def plan(self, request: s.PlanRequest) -> s.PlanResponse:
        if self.server:
            return self._post("/plan", request, s.PlanResponse)
        return plan(request)

    def estimate(self, request: s.EstimateRequest) -> s.EstimateResponse:
        if self.server:
            return self._post("/estimate-likelihood", request, s.EstimateResponse)
        return estimate_likelihood_endpoint(request)

    def metrics(self, request: s.MetricsRequest) -> s.MetricsResponse:
        if self.server:
            return self._post("/eval-metrics", request, s.MetricsResponse)
        return eval_metrics(request)

    def gen_env(self, request: s.GenEnvRequest) -> s.GenEnvResponse:
        if self.server:
            return self._post("/gen-env", request, s.GenEnvResponse)
        return gen_env(request)


# ---------------------------------------------------------------------------
# Input loading
# ---------------------------------------------------------------------------

def _load_environment_model(source: str) -> s.EnvironmentModel:
    """Load an environment file; the name ``school54`` means the bundled map."""
    if source == "school54":
        return s.EnvironmentModel.from_graph(school54())
    path = Path(source)
    if not path.exists():
        raise InputError(f"environment file not found: {source}", code="E_ENV_MISSING")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}: not valid JSON: {exc}", code="E_ENV_PARSE")
    model = s.EnvironmentModel.model_validate(data)
    model.to_graph()  # surface validation errors before shipping the request
    return model


def _load_matrix_model(path: str | None, role: str, needed: bool) -> s.MatrixModel | None:
    if path is None:
        if needed:
            raise InputError(
                f"a {role} likelihood matrix is required; pass --{role}",
                code="E_MATRIX_MISSING",
            )
        return None
    p = Path(path)
    if not p.exists():
        raise InputError(f"{role} matrix file not found: {path}", code="E_MATRIX_MISSING")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON: {exc}", code="E_MATRIX_INVALID")
    return s.MatrixModel.model_validate(data)


def _load_records_payload(path: str) -> list[tuple[int, int]]:
    if not Path(path).exists():
        raise InputError(f"records file not found: {path}", code="E_RECORDS_MISSING")
    return [(r.true_level, r.predicted) for r in load_prediction_records(path)]


def _parse_regions(text: str) -> list[s.RegionModel]:
    """Parse `FRACTION:P1,P2,P3,P4,P5` region entries separated by `;`."""
    regions = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            fraction, pmf = chunk.split(":")
            probs = [float(x) for x in pmf.split(",")]
            regions.append(s.RegionModel(fraction=float(fraction), truth=probs))
        except ValueError:
            raise UsageError(
                f"bad region entry {chunk!r}; expected FRACTION:P1,P2,P3,P4,P5"
            )
    if not regions:
        raise UsageError("no regions given")
    return regions


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad {what} list {text!r}; expected comma-separated integers")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _experiment_settings(args) -> s.ExperimentSettings:
    """Config-file values overridden by explicit flags."""
    values: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise InputError(f"config file not found: {args.config}", code="E_CONFIG_INVALID")
        try:
            values = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: not valid JSON: {exc}", code="E_CONFIG_INVALID")
        unknown = set(values) - CONFIG_KEYS
        if unknown:
            raise InputError(
                f"{args.config}: unknown config keys {sorted(unknown)}",
                code="E_CONFIG_INVALID",
            )
    if args.runs is not None:
        values["runs"] = args.runs
    if args.taus is not None:
        values["taus"] = _parse_int_list(args.taus, "tau")
    if args.modalities is not None:
        values["modalities"] = [m.strip() for m in args.modalities.split(",") if m.strip()]
    if args.gt_mode is not None:
        values["gt_mode"] = args.gt_mode
    if args.termination is not None:
        values["termination"] = args.termination
    if args.step_cap is not None:
        values["step_cap"] = args.step_cap
    if args.seed is not None:
        values["master_seed"] = args.seed
    return s.ExperimentSettings.model_validate(values)


def _needs(modalities: list[str]) -> tuple[bool, bool]:
    parsed = [SensingModality.parse(m) for m in modalities]
    return (
        any(m.uses_vision for m in parsed),
        any(m.uses_language for m in parsed),
    )


def cmd_simulate(args) -> int:
    environment = _load_environment_model(args.env)
    config = _experiment_settings(args)
    needs_vision, needs_language = _needs(config.modalities)
    request = s.SimulateRequest(
        environment=environment,
        config=config,
        vision=_load_matrix_model(args.vision, "vision", needs_vision),
        language=_load_matrix_model(args.language, "language", needs_language),
        workers=args.workers,
        include_per_run=args.per_run is not None,
    )
    response = ServiceClient(args.server).simulate(request)

    results = ExperimentResults(
        cells=tuple(c.to_core() for c in response.cells),
        warnings=tuple(response.warnings),
    )
    Path(args.out).write_text(results_to_csv(results))
    if args.per_run is not None:
        lines = [PER_RUN_HEADER] + [
            f"{r.modality},{r.tau},{r.run},{int(r.success)},{r.exposures},{r.steps}"
            for r in response.per_run
        ]
        Path(args.per_run).write_text("\n".join(lines) + "\n")

    if not args.quiet:
        print(f"# master seed: {response.master_seed}")
        for warning in response.warnings:
            print(f"# warning: {warning}")
        _print_grid(response.cells)
        print(f"wrote {args.out}")
        if args.per_run is not None:
            print(f"wrote {args.per_run}")
    return 0


def _print_grid(cells: list[s.CellModel]) -> None:
    taus = sorted({c.tau for c in cells})
    modalities = list(dict.fromkeys(c.modality for c in cells))
    by_key = {(c.modality, c.tau): c for c in cells}
    width = max(14, max(len(m) for m in modalities) + 1)
    header = "success rate % (±95% CI) by tolerance"
    print(header)
    print(" " * width + "".join(f"tau={t:<12}" for t in taus))
    for modality in modalities:
        row = [f"{modality:<{width}}"]
        for tau in taus:
            cell = by_key.get((modality, tau))
            row.append(
                f"{cell.success_rate:6.2f}±{cell.success_ci95:<5.2f}   " if cell else " " * 16
            )
        print("".join(row).rstrip())


def cmd_plan(args) -> int:
    environment = _load_environment_model(args.env)
    modality = SensingModality.parse(args.modality)
    request = s.PlanRequest(
        environment=environment,
        tau=args.tau,
        modality=args.modality,
        seed=args.seed if args.seed is not None else s.DEFAULT_MASTER_SEED,
        gt_mode=args.gt_mode or "resample",
        termination=args.termination or "fail-fast",
        step_cap=args.step_cap,
        vision=_load_matrix_model(args.vision, "vision", modality.uses_vision),
        language=_load_matrix_model(args.language, "language", modality.uses_language),
    )
    response = ServiceClient(args.server).plan(request)

    if args.trace:
        with open(args.trace, "w") as fh:
            for step in response.steps:
                fh.write(json.dumps(step.model_dump()) + "\n")

    if not args.quiet:
        print(f"# seed: {response.seed}  modality: {response.modality}  tau: {response.tau}")
        print(f"{'step':>4} {'at':>4} {'->':>4} {'sampled':>7} {'exposed':>7} "
              f"{'survival':>9}  planned route")
        for i, step in enumerate(response.steps, start=1):
            route = ">".join(str(n) for n in step.planned.nodes)
            print(
                f"{i:>4} {step.position:>4} {step.moved_to:>4} {step.sampled_danger:>7} "
                f"{str(step.exposure):>7} {step.planned.survival:>9.4f}  {route}"
            )
        out = response.outcome
        state = "success" if out.success else f"failure ({out.failure})"
        print(f"outcome: {state} steps={out.steps} exposures={out.exposures}")
        print(f"path: {'>'.join(str(n) for n in out.path)}")
        if args.trace:
            print(f"wrote {args.trace}")
    return 0


def cmd_estimate_likelihood(args) -> int:
    request = s.EstimateRequest(
        records=_load_records_payload(args.records),
        folds=args.folds,
        smoothing=args.smoothing,
        seed=args.seed if args.seed is not None else s.DEFAULT_MASTER_SEED,
        modality=args.modality,
    )
    response = ServiceClient(args.server).estimate(request)
    save_matrix(response.matrix.to_core(), args.out)
    if not args.quiet:
        print(f"# seed: {request.seed}  folds: {response.folds}  records: {response.records}")
        print(f"wrote {args.out}")
    return 0


def cmd_eval_metrics(args) -> int:
    request = s.MetricsRequest(records=_load_records_payload(args.records))
    response = ServiceClient(args.server).metrics(request)
    if not args.quiet:
        print(f"# records: {response.records}")
        print("top1 rmse off_by_1")
    print(f"{response.top1:.1f} {response.rmse:.2f} {response.off_by_1:.1f}")
    return 0


def cmd_gen_env(args) -> int:
    request = s.GenEnvRequest(
        nodes=args.nodes,
        connectivity=args.connectivity,
        regions=_parse_regions(args.regions) if args.regions else None,
        exits=args.exits,
        seed=args.seed if args.seed is not None else s.DEFAULT_MASTER_SEED,
    )
    response = ServiceClient(args.server).gen_env(request)
    Path(args.out).write_text(environment_json(response.environment.to_graph()))
    if not args.quiet:
        print(f"# seed: {request.seed}")
        print(f"wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run(service_app, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help=f"random seed (default {s.DEFAULT_MASTER_SEED})")
    common.add_argument("--workers", type=int, default=1,
                        help="worker processes for simulate (default 1)")
    common.add_argument("--quiet", action="store_true", help="suppress stdout report")
    common.add_argument("--server", default=None,
                        help="run against a remote service URL instead of in-process")

    parser = _Parser(prog="hazardnav", description=__doc__)
    parser.add_argument("--version", action="version", version=f"hazardnav {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="run a Monte Carlo (modality x tolerance) experiment grid")
    p.add_argument("env", help="environment JSON file, or 'school54' for the bundled map")
    p.add_argument("--config", default=None,
                   help="experiment config JSON; flags override file values")
    p.add_argument("--runs", type=int, default=None, help="missions per cell (default 1000)")
    p.add_argument("--taus", default=None, help="comma-separated tolerances (default 1,2,3,4)")
    p.add_argument("--modalities", default=None,
                   help="comma-separated modalities (default "
                        + ",".join(s.DEFAULT_MODALITIES) + ")")
    p.add_argument("--gt-mode", dest="gt_mode", choices=["resample", "fixed-latent"],
                   default=None, help="ground-truth realization mode (default resample)")
    p.add_argument("--termination", choices=["fail-fast", "count-exposures"], default=None,
                   help="mission termination rule (default fail-fast)")
    p.add_argument("--step-cap", dest="step_cap", type=int, default=None,
                   help="mission step cap (default 10x node count)")
    p.add_argument("--vision", default=None, help="vision likelihood matrix JSON")
    p.add_argument("--language", default=None, help="language likelihood matrix JSON")
    p.add_argument("--out", default="results.csv", help="results CSV path (default results.csv)")
    p.add_argument("--per-run", dest="per_run", default=None,
                   help="also write per-run outcomes CSV to this path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plan", parents=[common],
                       help="run one traced mission and print the step table")
    p.add_argument("env", help="environment JSON file, or 'school54'")
    p.add_argument("--tau", type=int, required=True, help="tolerable danger level 1..5")
    p.add_argument("--modality", default="vision",
                   help="sensing modality label (default vision)")
    p.add_argument("--gt-mode", dest="gt_mode", choices=["resample", "fixed-latent"],
                   default=None, help="ground-truth realization mode (default resample)")
    p.add_argument("--termination", choices=["fail-fast", "count-exposures"], default=None,
                   help="mission termination rule (default fail-fast)")
    p.add_argument("--step-cap", dest="step_cap", type=int, default=None,
                   help="mission step cap (default 10x node count)")
    p.add_argument("--vision", default=None, help="vision likelihood matrix JSON")
    p.add_argument("--language", default=None, help="language likelihood matrix JSON")
    p.add_argument("--trace", default=None, help="write the step trace as JSON lines here")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("estimate-likelihood", parents=[common],
                       help="K-fold mean likelihood matrix from a records CSV")
    p.add_argument("records", help="CSV with header true,predicted")
    p.add_argument("--folds", type=int, default=9, help="fold count (default 9)")
    p.add_argument("--smoothing", type=float, default=0.0,
                   help="additive smoothing per cell (default 0.0)")
    p.add_argument("--modality", choices=["vision", "language"], default="vision",
                   help="modality tag for the output matrix (default vision)")
    p.add_argument("--out", default="likelihood.json",
                   help="output matrix JSON path (default likelihood.json)")
    p.set_defaults(func=cmd_estimate_likelihood)

    p = sub.add_parser("eval-metrics", parents=[common],
                       help="top-1 / RMSE / off-by-1 for a records CSV")
    p.add_argument("records", help="CSV with header true,predicted")
    p.set_defaults(func=cmd_eval_metrics)

    p = sub.add_parser("gen-env", parents=[common],
                       help="generate a synthetic region-structured environment")
    p.add_argument("--nodes", type=int, required=True, help="node count (>= 2)")
    p.add_argument("--connectivity", type=float, default=2.5,
                   help="target average out-degree (default 2.5)")
    p.add_argument("--regions", default=None,
                   help="regions as FRACTION:P1,..,P5 entries joined by ; "
                        "(default safe/smoke/fire mix)")
    p.add_argument("--exits", type=int, default=2, help="exit count (default 2)")
    p.add_argument("--out", default="environment.json",
                   help="output environment JSON path (default environment.json)")
    p.set_defaults(func=cmd_gen_env)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1", help="bind address (default 127.0.0.1)")
    p.add_argument("--port", type=int, default=8000, help="port (default 8000)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except HazardNavError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except httpx.HTTPError as exc:
        print(f"E_SERVER: {exc}", file=sys.stderr)
        return 1
    except SystemExit:
        raise
    except Exception as exc:  # internal invariant violation
        print(f"E_INTERNAL: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
