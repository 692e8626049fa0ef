"""Command-line front end: ``rtn-dephase <command> [flags]``.

Rates are given in units of eta (``--eta`` defaults to 1, so ``--chi`` and
``--kappa`` are the ratios chi/eta and kappa/eta). Exit codes: 0 success,
2 flag or parameter validation, 3 numerical contract or failed self-check,
4 I/O.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .errors import DephasingError, InvalidStateError
from .noise_model import NoiseParams
from .selfcheck import format_report, run_selfcheck
from .series import decoherence_series, gather, map_series
from .single_qubit import DEFAULT_TOL, non_markovianity_single
from .spectral import build
from .two_qubit import (
    CompositeBellParams,
    ExtendedWernerParams,
    family_series,
    non_markovianity_two,
)

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "RTN_DEPHASE_OUTPUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

WEAK, STRONG = 0.8, 3.0
HALF_SQRT2 = 0.5**0.5

WERNER_BELL = {"r": 1.0, "alpha": HALF_SQRT2, "beta": HALF_SQRT2}
BIASED = {"kappa": 1.0, "a0": 0.5}

REGIMES = {"weak": WEAK, "strong": STRONG}
FIGURE_PANELS = {"a": WEAK, "b": STRONG}

Preset = Tuple[str, Dict[str, Any]]

# Panel a is the weak and b the strong coupling regime of each figure; the
# entanglement files carry both the concurrence and the Bell columns.
FIGURE_KINDS: Dict[int, Preset] = {
    1: ("nm-map", {"qubits": "single"}),
    2: ("decoherence", BIASED),
    3: ("decoherence", BIASED),
    4: ("nm-map", {"qubits": "two"}),
    5: ("entanglement", {**BIASED, "c": 1.0}),
    6: ("entanglement", {**BIASED, "c": 1.0}),
    7: ("entanglement", {**BIASED, **WERNER_BELL}),
    8: ("entanglement", {**BIASED, **WERNER_BELL}),
}


def _build_presets() -> Dict[str, Preset]:
    presets: Dict[str, Preset] = {}
    for regime, chi in REGIMES.items():
        presets[f"nm-single-{regime}"] = ("nm-map", {"chi": chi, "qubits": "single"})
        presets[f"nm-two-{regime}"] = ("nm-map", {"chi": chi, "qubits": "two"})
        for name, command, extra in (
            ("decoherence", "decoherence", {}),
            ("cbs", "entanglement", {"c": 1.0}),
            ("ews", "entanglement", WERNER_BELL),
        ):
            biased = {"chi": chi, **BIASED, **extra}
            presets[f"{name}-{regime}"] = (command, biased)
            presets[f"{name}-{regime}-stationary"] = (command, {**biased, "a0": 0.0})
    for number, (command, extra) in FIGURE_KINDS.items():
        for panel, chi in FIGURE_PANELS.items():
            presets[f"fig{number}{panel}"] = (command, {"chi": chi, **extra})
    return presets


PRESETS = _build_presets()

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "decoherence": {"chi": WEAK, "kappa": 1.0, "a0": 0.0},
    "nm-map": {"chi": WEAK, "qubits": "single"},
    "entanglement": {"chi": WEAK, "kappa": 1.0, "a0": 0.0},
}


class GridSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    tmax: float = Field(gt=0, allow_inf_nan=False)
    points: int = Field(ge=2)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.tmax, self.points)


class DecoherenceRun(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: NoiseParams
    grid: GridSpec
    out: Path
    strict_spectrum: bool = False


class MapRun(BaseModel):
    model_config = ConfigDict(frozen=True)

    eta: float = Field(gt=0, allow_inf_nan=False)
    chi: float = Field(ge=0, allow_inf_nan=False)
    kappas: List[float] = Field(min_length=2)
    a0s: List[float] = Field(min_length=2)
    qubits: Literal["single", "two"] = "single"
    horizon: Optional[float] = Field(default=None, gt=0)
    tol: float = Field(default=DEFAULT_TOL, gt=0)
    out: Path
    workers: Optional[int] = Field(default=None, ge=1)
    strict_spectrum: bool = False

    def noise(self, kappa: float, a0: float) -> NoiseParams:
        return NoiseParams(eta=self.eta, chi=self.chi, kappa=kappa, a0=a0)


class EntanglementRun(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: NoiseParams
    family: Union[CompositeBellParams, ExtendedWernerParams]
    grid: GridSpec
    out: Path
    workers: Optional[int] = Field(default=None, ge=1)
    strict_spectrum: bool = False


def resolve_output(out: str) -> Path:
    """Relative paths land in $RTN_DEPHASE_OUTPUT_DIR (default: cwd)."""
    path = Path(out)
    if not path.is_absolute():
        path = Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _settings(args: argparse.Namespace, names: Sequence[str]) -> Dict[str, Any]:
    """Explicit flags, then the preset, then the command defaults."""
    merged = dict(DEFAULTS.get(args.command, {}))
    if getattr(args, "preset", None):
        merged.update(PRESETS[args.preset][1])
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    return merged


def _noise(args: argparse.Namespace, values: Dict[str, Any]) -> NoiseParams:
    if args.memoryless:
        return NoiseParams.memoryless(args.eta, values["chi"], values["a0"])
    return NoiseParams(
        eta=args.eta, chi=values["chi"], kappa=values["kappa"], a0=values["a0"]
    )


def _axis(bounds: Sequence[float], log: bool = False) -> List[float]:
    lo, hi, n = bounds
    if n != int(n) or n < 2:
        raise InvalidStateError(f"grid needs an integer point count >= 2, got {n}")
    if log:
        if lo <= 0:
            raise InvalidStateError(f"log grid needs a positive lower bound, got {lo}")
        return np.geomspace(lo, hi, int(n)).tolist()
    return np.linspace(lo, hi, int(n)).tolist()


def cmd_decoherence(run: DecoherenceRun) -> List[Path]:
    df = build(run.params, strict=run.strict_spectrum)
    series = decoherence_series(df, run.grid.times())
    return series.write(run.out)


def cmd_nonmarkovianity_map(run: MapRun) -> List[Path]:
    if run.qubits == "single":
        measure = non_markovianity_single
    else:
        measure = non_markovianity_two
    cells = [(k, a) for k in run.kappas for a in run.a0s]

    def cell(item: Tuple[float, float]) -> Tuple[float, float, float]:
        kappa, a0 = item
        df = build(run.noise(kappa, a0), strict=run.strict_spectrum)
        return kappa, a0, measure(df, run.horizon, run.tol)

    rows = gather(cell, cells, run.workers)
    metadata = {
        "eta": run.eta,
        "chi": run.chi,
        "qubits": run.qubits,
        "horizon": run.horizon,
        "tol": run.tol,
        "measure": "N_S" if run.qubits == "single" else "N_T",
    }
    return map_series(rows, metadata).write(run.out)


def cmd_entanglement(run: EntanglementRun) -> List[Path]:
    df = build(run.params, strict=run.strict_spectrum)
    series = family_series(run.family, df, run.grid.times(), run.workers)
    return series.write(run.out)


def cmd_selfcheck(seed: int, draws: int, perturbation: float = 0.0) -> bool:
    results = run_selfcheck(seed, draws, perturbation)
    print(format_report(results))
    return all(r.passed for r in results)


def _decoherence_run(args: argparse.Namespace) -> DecoherenceRun:
    values = _settings(args, ("chi", "kappa", "a0"))
    return DecoherenceRun(
        params=_noise(args, values),
        grid=GridSpec(tmax=args.tmax, points=args.points),
        out=resolve_output(args.out),
        strict_spectrum=args.strict_spectrum,
    )


def _map_run(args: argparse.Namespace) -> MapRun:
    values = _settings(args, ("chi", "qubits"))
    return MapRun(
        eta=args.eta,
        chi=values["chi"],
        kappas=_axis(args.kappa_grid, args.log_kappa),
        a0s=_axis(args.a0_grid),
        qubits=values["qubits"],
        horizon=args.horizon,
        tol=args.tol,
        out=resolve_output(args.out),
        workers=args.workers,
        strict_spectrum=args.strict_spectrum,
    )


def _entanglement_run(args: argparse.Namespace) -> EntanglementRun:
    values = _settings(
        args,
        ("chi", "kappa", "a0", "c", "r", "alpha", "beta", "psi_sign", "phi_sign"),
    )
    has_cbs = "c" in values
    has_ews = any(k in values for k in ("r", "alpha", "beta"))
    if has_cbs == has_ews:
        raise InvalidStateError(
            "choose exactly one family: --c (composite Bell) or --r/--alpha/--beta "
            "(extended Werner)"
        )
    if has_cbs:
        family: Union[CompositeBellParams, ExtendedWernerParams] = CompositeBellParams(
            c=values["c"],
            psi_sign=values.get("psi_sign", 1),
            phi_sign=values.get("phi_sign", 1),
        )
    else:
        family = ExtendedWernerParams(
            r=values.get("r", 1.0),
            alpha=values.get("alpha", HALF_SQRT2),
            beta=values.get("beta", HALF_SQRT2),
            family=args.werner_family,
        )
    return EntanglementRun(
        params=_noise(args, values),
        family=family,
        grid=GridSpec(tmax=args.tmax, points=args.points),
        out=resolve_output(args.out),
        workers=args.workers,
        strict_spectrum=args.strict_spectrum,
    )


def _presets_for(command: str) -> List[str]:
    return sorted(name for name, (cmd, _) in PRESETS.items() if cmd == command)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v info, -vv debug"
    )
    common.add_argument(
        "--strict-spectrum",
        action="store_true",
        help="fail on near-repeated roots instead of using confluent modes",
    )

    noise = argparse.ArgumentParser(add_help=False)
    noise.add_argument("--eta", type=float, default=1.0, help="switching rate (unit)")
    noise.add_argument("--chi", type=float, help="coupling chi/eta")
    noise.add_argument("--a0", type=float, help="nonstationary parameter in [-1, 1]")

    memory = argparse.ArgumentParser(add_help=False)
    memory.add_argument("--kappa", type=float, help="memory decay rate kappa/eta")
    memory.add_argument(
        "--memoryless", action="store_true", help="kappa -> infinity limit"
    )

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--tmax", type=float, default=20.0, help="end time in 1/eta")
    grid.add_argument("--points", type=int, default=400)
    grid.add_argument("--workers", type=int, help="threads for grid evaluation")

    parser = argparse.ArgumentParser(
        prog="rtn-dephase",
        description="Exact dephasing of qubits under nonequilibrium telegraph noise.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    dec = sub.add_parser(
        "decoherence", parents=[common, noise, memory, grid], help="D(t) and rates"
    )
    dec.add_argument("--preset", choices=_presets_for("decoherence"))
    dec.add_argument("--out", default="decoherence.csv")

    nm = sub.add_parser(
        "nm-map", parents=[common, noise], help="non-Markovianity over (kappa, a0)"
    )
    nm.add_argument("--preset", choices=_presets_for("nm-map"))
    nm.add_argument("--qubits", choices=("single", "two"))
    nm.add_argument(
        "--kappa-grid",
        type=float,
        nargs=3,
        default=(0.1, 10.0, 40),
        metavar=("MIN", "MAX", "N"),
    )
    nm.add_argument("--log-kappa", action="store_true", help="geometric kappa grid")
    nm.add_argument(
        "--a0-grid",
        type=float,
        nargs=3,
        default=(-1.0, 1.0, 21),
        metavar=("MIN", "MAX", "N"),
    )
    nm.add_argument("--horizon", type=float, help="fixed scan horizon in 1/eta")
    nm.add_argument("--tol", type=float, default=DEFAULT_TOL)
    nm.add_argument("--workers", type=int, help="threads for grid evaluation")
    nm.add_argument("--out", default="nm_map.csv")

    ent = sub.add_parser(
        "entanglement",
        parents=[common, noise, memory, grid],
        help="concurrence and Bell function",
    )
    ent.add_argument("--preset", choices=_presets_for("entanglement"))
    ent.add_argument("--c", type=float, help="composite Bell state weight")
    ent.add_argument("--psi-sign", type=int, choices=(1, -1))
    ent.add_argument("--phi-sign", type=int, choices=(1, -1))
    ent.add_argument("--r", type=float, help="extended Werner purity")
    ent.add_argument("--alpha", type=complex)
    ent.add_argument("--beta", type=complex)
    ent.add_argument("--werner-family", choices=("psi", "phi"), default="psi")
    ent.add_argument("--out", default="entanglement.csv")

    chk = sub.add_parser("selfcheck", parents=[common], help="oracle acceptance run")
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--draws", type=int, default=1000)
    chk.add_argument(
        "--perturb-residue", type=float, default=0.0, help=argparse.SUPPRESS
    )
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "selfcheck":
        if args.draws < 1:
            raise InvalidStateError(f"--draws must be positive, got {args.draws}")
        ok = cmd_selfcheck(args.seed, args.draws, args.perturb_residue)
        return EXIT_OK if ok else EXIT_NUMERICAL
    if args.command == "decoherence":
        written = cmd_decoherence(_decoherence_run(args))
    elif args.command == "nm-map":
        written = cmd_nonmarkovianity_map(_map_run(args))
    else:
        written = cmd_entanglement(_entanglement_run(args))
    for path in written:
        print(path)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return _dispatch(args)
    except (ValidationError, InvalidStateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DephasingError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
