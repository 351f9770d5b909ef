"""Experiment definitions and the sweep runner behind ``amli solve``."""

from __future__ import annotations

import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import fem, theory
from .hierarchy import build_level_stack
from .krylov import fcg, pcg
from .mesh import MeshHierarchy, coefficient_field
from .preconditioner import AmliConfig, AmliPreconditioner

log = logging.getLogger(__name__)

SOLVE_COLUMNS = (
    "dim",
    "inv_h",
    "alpha",
    "beta",
    "pattern",
    "kappa",
    "variant",
    "form",
    "cycle",
    "n_it",
    "rho",
    "err_x",
    "seconds",
)


@dataclass(frozen=True)
class Method:
    variant: str
    form: str
    nu: int

    @property
    def label(self) -> str:
        tag = {"linear_t": "T", "linear_x": "X", "nonlinear": "N"}[self.variant]
        return "V" if self.nu == 1 and self.variant == "linear_t" else f"{'VW'[self.nu - 1]}({tag})"


@dataclass
class ExperimentConfig:
    """One sweep: every combination of mesh, coefficients and method is a row.

    ``inv_h`` lists finest mesh sizes; each must equal ``n0 * 2**L``.
    """

    dim: int = 2
    n0: int | None = None
    inv_h: list[int] = field(default_factory=lambda: [8])
    alpha: list[float] = field(default_factory=lambda: [1.0])
    beta: list[float] = field(default_factory=lambda: [1.0])
    pattern: str = "constant"
    kappa: list[float] = field(default_factory=lambda: [1.0])
    variant: list[str] = field(default_factory=lambda: ["linear_t"])
    form: list[str] = field(default_factory=lambda: ["multiplicative"])
    cycle: list[str] = field(default_factory=lambda: ["w"])
    methods: list[tuple[str, str, int]] | None = None
    gamma: str = "bound"
    b: float = 0.0
    tol: float = 1e-8
    max_it: int = 500
    window: int = 2
    rhs: str = "manufactured"
    title: str = ""

    def __post_init__(self):
        for name in ("inv_h", "alpha", "beta", "kappa", "variant", "form", "cycle"):
            val = getattr(self, name)
            if not isinstance(val, (list, tuple)):
                setattr(self, name, [val])
            if not getattr(self, name):
                raise ValueError(f"sweep list {name!r} is empty")
        self.n0 = self.n0 or (4 if self.dim == 2 else 2)
        for inv in self.inv_h:
            MeshHierarchy.from_inverse_h(self.dim, inv, self.n0)

    def method_list(self) -> list[Method]:
        if self.methods is not None:
            out = [Method(*m) for m in self.methods]
        else:
            out = [Method(v, f, c) for f, c, v in itertools.product(self.form, self.cycle, self.variant)]
        # normalize through AmliConfig so aliases like "mult" or "w" work
        norm = []
        for m in out:
            cfg = AmliConfig(m.variant, m.form, m.nu, self.gamma, self.b)
            nm = Method(cfg.variant, cfg.form, cfg.nu)
            if nm not in norm:
                norm.append(nm)
        return norm

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


def _groups(config: ExperimentConfig):
    """Mesh/coefficient combinations, each sharing one level stack."""
    for inv, a, b, k in itertools.product(config.inv_h, config.alpha, config.beta, config.kappa):
        yield dict(inv_h=inv, alpha=a, beta=b, kappa=k)


def _run_group(config: ExperimentConfig, group: dict) -> list[dict]:
    hier = MeshHierarchy.from_inverse_h(config.dim, group["inv_h"], config.n0)
    L = hier.levels
    coeff = coefficient_field(hier, config.pattern, group["kappa"], group["alpha"], group["beta"])
    t0 = time.perf_counter()
    stack = build_level_stack(hier, coeff, gamma=config.gamma)
    setup = time.perf_counter() - t0
    A = stack[L].A
    f = fem.assemble_rhs(hier, L, config.rhs, coeff)
    rows = []
    for m in config.method_list():
        amli = AmliPreconditioner(stack, AmliConfig(m.variant, m.form, m.nu, config.gamma, config.b))
        if amli.linear:
            u, rep = pcg(A, f, amli, tol=config.tol, max_it=config.max_it)
        else:
            u, rep = fcg(A, f, amli, tol=config.tol, max_it=config.max_it, window=config.window)
        err = fem.x_error_norm(hier, L, u) if config.rhs != "ones" else float("nan")
        if not rep.converged:
            log.warning("no convergence in %d iterations: %s %s", config.max_it, group, m)
        rows.append(
            dict(
                dim=config.dim,
                inv_h=group["inv_h"],
                alpha=group["alpha"],
                beta=group["beta"],
                pattern=config.pattern,
                kappa=group["kappa"],
                variant=m.variant,
                form=m.form,
                cycle="V" if m.nu == 1 else "W",
                n_it=rep.n_it,
                rho=rep.rho,
                err_x=err,
                seconds=setup + rep.seconds,
                converged=rep.converged,
            )
        )
    return rows


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> list[dict]:
    """Run every combination; rows come back in configuration order."""
    groups = list(_groups(config))
    if jobs > 1 and len(groups) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_group, itertools.repeat(config), groups))
    else:
        chunks = [_run_group(config, g) for g in groups]
    return [row for chunk in chunks for row in chunk]


def emit_theory(e_values=None, lmax: int = theory.LMAX_DEFAULT) -> list[dict]:
    """Sequence/CBS rows for an ``e`` grid (default ``10^2 .. 10^-12``)."""
    if e_values is None:
        e_values = [10.0**m for m in range(2, -13, -1)]
    return theory.emit_sequence_tables(e_values, lmax)


def condition_rows(e_values=None) -> list[dict]:
    """Conditioning of the difference block, raw and ILU(0)-preconditioned."""
    if e_values is None:
        e_values = [10.0**m for m in range(2, -13, -1)]
    rows = []
    for e in e_values:
        for dim in (2, 3):
            rows.append(
                dict(
                    dim=dim,
                    e=e,
                    cond_B11_macro=theory.b11_condition(dim, e),
                    cond_ilu_B11_global=theory.b11_condition(dim, e, preconditioned=True, n=8 if dim == 2 else 4),
                )
            )
    return rows


# ---------------------------------------------------------------------------
# presets

_W2 = [8, 16, 32, 64, 128, 256, 512]
_W3 = [4, 8, 16, 32, 64]
_DECADES = [1e-6, 1e-3, 1.0, 1e3, 1e6]
_VN = [("linear_t", "multiplicative", 1), ("nonlinear", "multiplicative", 2)]

PRESETS: dict[str, ExperimentConfig] = {
    "uniform2d-mult": ExperimentConfig(
        dim=2,
        inv_h=_W2,
        methods=[("linear_t", "multiplicative", 1), ("linear_t", "multiplicative", 2), ("linear_x", "multiplicative", 2)],
        title="2D curl, alpha = beta = 1, manufactured solution, multiplicative V, W(T), W(X)",
    ),
    "uniform2d-add": ExperimentConfig(
        dim=2,
        inv_h=_W2,
        methods=[
            ("linear_t", "additive", 1),
            ("linear_t", "additive", 2),
            ("linear_x", "additive", 2),
            ("nonlinear", "additive", 2),
        ],
        title="2D curl, alpha = beta = 1, additive V, W(T), W(X), W(N)",
    ),
    "alpha-sweep2d": ExperimentConfig(
        dim=2, inv_h=_W2, alpha=_DECADES, methods=_VN, rhs="ones", title="2D curl, beta = 1, alpha sweep, ones RHS"
    ),
    "beta-sweep2d": ExperimentConfig(
        dim=2, inv_h=_W2, beta=_DECADES, methods=_VN, rhs="ones", title="2D curl, alpha = 1, beta sweep, ones RHS"
    ),
    "jump2d": ExperimentConfig(
        dim=2,
        inv_h=_W2,
        pattern="checkerboard2d",
        kappa=[1.0, 1e-2, 1e-4, 1e-6],
        methods=_VN,
        rhs="ones",
        title="2D curl, checkerboard alpha in {1, kappa}, beta = 1, ones RHS",
    ),
    "uniform3d-mult": ExperimentConfig(
        dim=3,
        inv_h=_W3,
        methods=[("linear_t", "multiplicative", 1), ("linear_t", "multiplicative", 2), ("nonlinear", "multiplicative", 2)],
        title="3D div, alpha = beta = 1, manufactured solution, multiplicative V, W, W(N)",
    ),
    "uniform3d-add": ExperimentConfig(
        dim=3,
        inv_h=_W3,
        methods=[("linear_t", "additive", 1), ("linear_t", "additive", 2), ("nonlinear", "additive", 2)],
        title="3D div, alpha = beta = 1, additive V, W, W(N)",
    ),
    "alpha-sweep3d": ExperimentConfig(
        dim=3, inv_h=_W3, alpha=_DECADES, methods=_VN, rhs="ones", title="3D div, beta = 1, alpha sweep, ones RHS"
    ),
    "jump3d": ExperimentConfig(
        dim=3,
        inv_h=_W3,
        pattern="checkerboard3d",
        kappa=[1e-6, 1e-4, 1e-2, 1.0],
        methods=_VN,
        rhs="ones",
        title="3D div, checkerboard alpha in {1, kappa}, beta = 1, ones RHS",
    ),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides)


def rows_by(rows: list[dict], *keys: str) -> dict:
    """Index rows by a tuple of column values (handy in tests and demos)."""
    return {tuple(r[k] for k in keys): r for r in rows}


def finite(x: float) -> bool:
    return bool(np.isfinite(x))
