"""Initialisation schemes, gradient-descent training, and depth sweeps.

The sweep protocol follows the comparison the toolkit exists for: shortcut
networks started from near-zero weights against plain (shortcut-free)
stacks with Xavier or orthogonal initialisation, across depths and a
log-scale learning-rate grid, with the Hessian spectrum measured at the
initial point and optionally along the run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationTriple, IDENTITY_TRIPLE
from .datasets import pca_whiten_csv, whitened_synthetic_dataset
from .hessian import SpectrumReport, finite_difference_hessian, spectrum
from .linalg import frobenius_norm, random_orthogonal
from .network import (
    Dataset,
    ShortcutNetwork,
    flatten,
    loss_and_gradient,
    unflatten,
)
from .rng import Rng

SCHEME_KINDS = ("xavier", "orthogonal", "zero_perturbed")

# schemes named xavier/orthogonal initialise plain (shortcut-free) stacks;
# zero_perturbed initialises a shortcut network near the zero point
_SCHEME_USES_SHORTCUT = {"xavier": False, "orthogonal": False, "zero_perturbed": True}


@dataclass(frozen=True)
class InitScheme:
    """How to draw initial weights; zero_perturbed scales Xavier by 0.01."""

    kind: str
    seed: int
    perturbation_scale: float = 0.01

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown init scheme {self.kind!r}; expected one of {SCHEME_KINDS}")


def init_network(
    d: int,
    n: int,
    R: int,
    scheme: InitScheme,
    activations: ActivationTriple = IDENTITY_TRIPLE,
    shortcut: bool = True,
) -> ShortcutNetwork:
    """Draw a network of the given shape under the scheme.

    Xavier weights are i.i.d. uniform on [-sqrt(3/d), sqrt(3/d)] (variance
    1/d with equal fan-in and fan-out); orthogonal draws one seeded random
    orthogonal matrix per slot; zero_perturbed multiplies Xavier weights
    by the perturbation scale, just enough to step off the exact zero
    point.
    """
    rng = Rng(scheme.seed)
    half_width = math.sqrt(3.0 / d)
    weights = []
    for _ in range(R):
        unit = []
        for _ in range(n):
            if scheme.kind == "orthogonal":
                unit.append(random_orthogonal(rng, d))
            else:
                w = rng.uniform_symmetric(d * d, half_width).reshape(d, d)
                if scheme.kind == "zero_perturbed":
                    w = w * scheme.perturbation_scale
                unit.append(w)
        weights.append(unit)
    return ShortcutNetwork(d, n, R, weights, activations, None, shortcut)


@dataclass
class TrainingTrace:
    """Per-epoch scalars plus optional spectrum snapshots.

    Snapshots pair an epoch with a SpectrumReport of the finite-difference
    Hessian at that epoch's parameters; they are expensive (2P gradient
    evaluations plus an eigensolve) and only taken when requested.
    """

    epochs: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    avg_frobenius: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diverged: bool = False

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else math.inf

    @property
    def final_avg_frobenius(self) -> float:
        return self.avg_frobenius[-1] if self.avg_frobenius else math.nan


def _avg_weight_frobenius(net: ShortcutNetwork) -> float:
    norms = [frobenius_norm(w) for unit in net.weights for w in unit]
    return float(np.mean(norms))


def train(
    net: ShortcutNetwork,
    data: Dataset,
    lr: float,
    epochs: int,
    snapshot_interval: int = 0,
) -> TrainingTrace:
    """Full-batch gradient descent, recording one row per epoch.

    Epoch 0 is the initial point; epoch e holds the state after e updates.
    If the loss leaves [0, 1e6] (or stops being finite) the run is cut
    short and flagged as diverged instead of raising. With
    ``snapshot_interval`` = K > 0, spectrum snapshots are taken at every
    epoch divisible by K and at the last recorded epoch.
    """
    if lr < 0.0:
        raise ValueError("learning rate must be nonnegative")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    trace = TrainingTrace()
    w = flatten(net)
    last_recorded = w
    for epoch in range(epochs + 1):
        current = unflatten(w, net)
        value, grad = loss_and_gradient(current, data)
        gnorm = float(np.linalg.norm(grad))
        afrob = _avg_weight_frobenius(current)
        if not (math.isfinite(value) and math.isfinite(gnorm) and value <= 1e6):
            trace.diverged = True
            break
        trace.epochs.append(epoch)
        trace.losses.append(value)
        trace.grad_norms.append(gnorm)
        trace.avg_frobenius.append(afrob)
        last_recorded = w
        if snapshot_interval > 0 and epoch % snapshot_interval == 0:
            h = finite_difference_hessian(current, data)
            trace.snapshots.append((epoch, spectrum(h, value)))
        if epoch == epochs:
            break
        w = w - lr * grad
    if (
        snapshot_interval > 0
        and trace.epochs
        and (not trace.snapshots or trace.snapshots[-1][0] != trace.epochs[-1])
    ):
        current = unflatten(last_recorded, net)
        h = finite_difference_hessian(current, data)
        trace.snapshots.append((trace.epochs[-1], spectrum(h, trace.losses[-1])))
    return trace


class ConfigError(ValueError):
    """Bad experiment config; the message names the offending field."""


@dataclass
class ExperimentConfig:
    """One sweep: width/depths/schemes crossed with lrs and seeds."""

    width: int
    n: int = 2
    depths: list = field(default_factory=lambda: [4, 8, 16])
    schemes: list = field(default_factory=lambda: ["zero_perturbed", "xavier"])
    activations: list = field(default_factory=lambda: ["identity", "identity", "identity"])
    learning_rates: list = field(
        default_factory=lambda: [float(10.0**e) for e in np.arange(-3.0, 0.51, 0.5)]
    )
    epochs: int = 1000
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    snapshot_interval: int = 0
    dataset: str = "synthetic:0"
    samples: int = 200
    perturbation_scale: float = 0.01

    def __post_init__(self):
        def _fail(fieldname, why):
            raise ConfigError(f"config field {fieldname!r}: {why}")

        if not isinstance(self.width, int) or self.width < 1:
            _fail("width", "must be a positive integer")
        if not isinstance(self.n, int) or self.n < 1:
            _fail("n", "must be a positive integer")
        if not self.depths:
            _fail("depths", "must be a nonempty list")
        for depth in self.depths:
            if not isinstance(depth, int) or depth < 1:
                _fail("depths", f"bad depth {depth!r}")
            if depth % self.n != 0:
                _fail("depths", f"depth {depth} is not a multiple of n={self.n}")
        if not self.schemes:
            _fail("schemes", "must be a nonempty list")
        for s in self.schemes:
            if s not in SCHEME_KINDS:
                _fail("schemes", f"unknown scheme {s!r}")
        try:
            ActivationTriple.from_names(self.activations)
        except ValueError as e:
            _fail("activations", str(e))
        if not self.learning_rates:
            _fail("learning_rates", "must be a nonempty list")
        for lr in self.learning_rates:
            if not lr >= 0.0:
                _fail("learning_rates", f"bad learning rate {lr!r}")
        if not isinstance(self.epochs, int) or self.epochs < 1:
            _fail("epochs", "must be a positive integer")
        if not self.seeds:
            _fail("seeds", "must be a nonempty list")
        if not isinstance(self.snapshot_interval, int) or self.snapshot_interval < 0:
            _fail("snapshot_interval", "must be a nonnegative integer")
        if not (isinstance(self.dataset, str) and self.dataset):
            _fail("dataset", "must be 'synthetic:<seed>' or a CSV path")
        if not isinstance(self.samples, int) or self.samples < 1:
            _fail("samples", "must be a positive integer")

    @property
    def activation_triple(self) -> ActivationTriple:
        return ActivationTriple.from_names(self.activations)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"config field {sorted(unknown)[0]!r}: unknown field")
        if "width" not in doc:
            raise ConfigError("config field 'width': required")
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"config file is not valid JSON: {e}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(doc)


def resolve_dataset(source: str, width: int, samples: int) -> Dataset:
    """Turn a dataset source string into data: 'synthetic:<seed>' or a CSV."""
    if source.startswith("synthetic:"):
        try:
            seed = int(source.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad synthetic dataset source {source!r}") from None
        return whitened_synthetic_dataset(width, samples, seed)
    return pca_whiten_csv(source, k=width)


@dataclass
class SweepRow:
    depth: int
    n: int
    scheme: str
    lr: float
    seed: int
    final_loss: float
    diverged: bool
    init_cond_proxy: float
    init_index: float
    final_avg_frobenius: float  # not serialised; kept for trend checks


@dataclass
class SweepSummary:
    depth: int
    scheme: str
    optimal_lr: float
    mean_final_loss: float
    std_final_loss: float
    mean_init_cond_proxy: float


@dataclass
class SweepResult:
    rows: list
    summaries: list
    traces: dict = field(default_factory=dict)  # (depth, scheme, lr, seed) -> TrainingTrace


def _initial_spectrum(net: ShortcutNetwork, data: Dataset) -> SpectrumReport:
    value, _ = loss_and_gradient(net, data)
    return spectrum(finite_difference_hessian(net, data), value)


def sweep(config: ExperimentConfig, keep_traces: bool = False) -> SweepResult:
    """Run every (depth, scheme, lr, seed) cell and summarise per cell group.

    The initial Hessian spectrum is computed once per (depth, scheme,
    seed) and shared across the learning rates. The optimal learning rate
    of a (depth, scheme) group minimises the mean final loss over seeds,
    ties broken toward the smaller (more stable) rate; groups where some
    seed diverged at a rate are treated as infinite mean loss at that
    rate.
    """
    data = resolve_dataset(config.dataset, config.width, config.samples)
    acts = config.activation_triple
    rows: list[SweepRow] = []
    traces: dict = {}
    for depth in config.depths:
        R = depth // config.n
        for scheme_name in config.schemes:
            shortcut = _SCHEME_USES_SHORTCUT[scheme_name]
            for seed in config.seeds:
                scheme = InitScheme(scheme_name, seed, config.perturbation_scale)
                net0 = init_network(config.width, config.n, R, scheme, acts, shortcut)
                init_rep = _initial_spectrum(net0, data)
                for lr in config.learning_rates:
                    trace = train(net0, data, lr, config.epochs, config.snapshot_interval)
                    rows.append(
                        SweepRow(
                            depth=depth,
                            n=config.n,
                            scheme=scheme_name,
                            lr=float(lr),
                            seed=seed,
                            final_loss=trace.final_loss,
                            diverged=trace.diverged,
                            init_cond_proxy=init_rep.cond_proxy,
                            init_index=init_rep.index,
                            final_avg_frobenius=trace.final_avg_frobenius,
                        )
                    )
                    if keep_traces:
                        traces[(depth, scheme_name, float(lr), seed)] = trace
    summaries = []
    for depth in config.depths:
        for scheme_name in config.schemes:
            group = [r for r in rows if r.depth == depth and r.scheme == scheme_name]
            best_lr, best_mean = None, math.inf
            for lr in config.learning_rates:
                cell = [r for r in group if r.lr == float(lr)]
                mean = (
                    math.inf
                    if any(r.diverged for r in cell)
                    else float(np.mean([r.final_loss for r in cell]))
                )
                if mean < best_mean:
                    best_mean, best_lr = mean, float(lr)
            if best_lr is None:
                best_lr = float(config.learning_rates[0])
            cell = [r for r in group if r.lr == best_lr]
            std = float(np.std([r.final_loss for r in cell]))
            cond = float(np.mean([r.init_cond_proxy for r in group if r.lr == best_lr]))
            summaries.append(
                SweepSummary(
                    depth=depth,
                    scheme=scheme_name,
                    optimal_lr=best_lr,
                    mean_final_loss=best_mean,
                    std_final_loss=std,
                    mean_init_cond_proxy=cond,
                )
            )
    return SweepResult(rows=rows, summaries=summaries, traces=traces)
