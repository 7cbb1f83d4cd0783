"""Random structural-equation systems with hidden confounders.

Each observable equation is a chain of terms ``c * form(parent(t - lag))``
folded left to right through randomly drawn operators, with a noise term
linked last. Hidden confounders are exogenous noise processes whose terms
are injected into at least two observable equations.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .data import Dataset, InterventionRun, int_label
from .errors import ConfigError, DivergenceError, UnknownTarget
from .graph import Mark, LaggedEdge, TsDag, TsPAG
from .ci import UnrolledDag

DIVERGENCE_BOUND = 1e6
MAX_ATTEMPTS = 20
BURN_FACTOR = 10

FORMS = ("identity", "sin", "cos", "abs", "pow", "exp")
OPERATORS = ("+", "-", "*", "/")
NOISE_KINDS = ("uniform", "normal", "weibull")

_WEIBULL_MEAN = math.gamma(1.5)  # shape-2, scale-1 Weibull


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs of the random-model generator.

    ``n_hidden`` may be an int or an inclusive (lo, hi) range resolved per
    seed. ``n_confounded_per_hidden`` of None draws a value in
    [2, n_obs_vars] per hidden confounder.
    """

    n_obs_vars: int
    link_density: int = 3
    n_hidden: int | tuple = 0
    n_confounded_per_hidden: int | None = None
    noise_menu: tuple = NOISE_KINDS
    tau_min: int = 0
    tau_max: int = 3
    coeff_range: tuple = (0.1, 0.5)
    operators: tuple = ("+", "-")
    functional_forms: tuple = ("identity",)
    ts_length: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "noise_menu", tuple(self.noise_menu))
        object.__setattr__(self, "operators", tuple(self.operators))
        object.__setattr__(
            self,
            "functional_forms",
            tuple("identity" if f in ("-", "none") else f for f in self.functional_forms),
        )
        if self.n_obs_vars < 1:
            raise ConfigError("need at least one observable variable")
        if self.link_density < 0:
            raise ConfigError("link density must be non-negative")
        if not (0 <= self.tau_min <= self.tau_max):
            raise ConfigError(f"invalid lag bounds [{self.tau_min}, {self.tau_max}]")
        lo, hi = self.coeff_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ConfigError(f"coefficient range {self.coeff_range} not within (0, 1]")
        bad = set(self.functional_forms) - set(FORMS)
        if bad:
            raise ConfigError(f"unknown functional forms {sorted(bad)}")
        bad = set(self.operators) - set(OPERATORS)
        if bad:
            raise ConfigError(f"unknown operators {sorted(bad)}")
        bad = set(self.noise_menu) - set(NOISE_KINDS)
        if bad:
            raise ConfigError(f"unknown noise kinds {sorted(bad)}")
        if not self.operators or not self.functional_forms or not self.noise_menu:
            raise ConfigError("operators, forms and noise menu must be non-empty")
        n_hidden = self.n_hidden
        if isinstance(n_hidden, tuple) or isinstance(n_hidden, list):
            object.__setattr__(self, "n_hidden", (int(n_hidden[0]), int(n_hidden[1])))
            if not 0 <= self.n_hidden[0] <= self.n_hidden[1]:
                raise ConfigError(f"bad hidden range {self.n_hidden}")
            max_hidden = self.n_hidden[1]
        else:
            if n_hidden < 0:
                raise ConfigError("n_hidden must be non-negative")
            max_hidden = n_hidden
        if max_hidden > 0:
            if self.tau_max < 1:
                raise ConfigError("hidden confounders need tau_max >= 1")
            if self.n_obs_vars < 2:
                raise ConfigError("hidden confounders need at least two observables")
        c = self.n_confounded_per_hidden
        if c is not None and max_hidden > 0 and not 2 <= c <= self.n_obs_vars:
            raise ConfigError(
                f"n_confounded_per_hidden={c} outside [2, {self.n_obs_vars}]"
            )
        if self.ts_length < self.tau_max + 1:
            raise ConfigError("ts_length must exceed tau_max")


@dataclass(frozen=True)
class Term:
    """One equation term: coeff * form(parent(t - lag)), linked by ``op``."""

    parent: str
    lag: int
    coeff: float
    form: str = "identity"
    op: str = "+"


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    scale: float = 1.0


@dataclass(frozen=True)
class Equation:
    terms: tuple
    noise: NoiseSpec
    noise_op: str = "+"


class Scm:
    """A concrete random system: equations, noise, hidden set, ground truth."""

    def __init__(self, observed, hidden, equations, hidden_noise, tau_min, tau_max, order, seed):
        self.observed = tuple(observed)
        self.hidden = tuple(hidden)
        self.equations = dict(equations)
        self.hidden_noise = dict(hidden_noise)
        self.tau_min = tau_min
        self.tau_max = tau_max
        self.order = tuple(order)  # contemporaneous evaluation order of observables
        self.seed = seed

    @property
    def variables(self):
        return self.observed + self.hidden

    @property
    def dag(self) -> TsDag:
        edges = set()
        for var, eq in self.equations.items():
            for t in eq.terms:
                edges.add((t.parent, t.lag, var))
        return TsDag(self.variables, self.tau_max, edges, hidden=self.hidden)

    def __eq__(self, other):
        return (
            isinstance(other, Scm)
            and self.observed == other.observed
            and self.hidden == other.hidden
            and self.equations == other.equations
            and self.hidden_noise == other.hidden_noise
            and (self.tau_min, self.tau_max, self.order) ==
                (other.tau_min, other.tau_max, other.order)
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "observed": list(self.observed),
                "hidden": list(self.hidden),
                "order": list(self.order),
                "tau_min": self.tau_min,
                "tau_max": self.tau_max,
                "seed": self.seed,
                "hidden_noise": {h: asdict(n) for h, n in self.hidden_noise.items()},
                "equations": {
                    v: {
                        "terms": [asdict(t) for t in eq.terms],
                        "noise": asdict(eq.noise),
                        "noise_op": eq.noise_op,
                    }
                    for v, eq in self.equations.items()
                },
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Scm":
        obj = json.loads(text)
        equations = {
            v: Equation(
                tuple(Term(**t) for t in eq["terms"]),
                NoiseSpec(**eq["noise"]),
                eq["noise_op"],
            )
            for v, eq in obj["equations"].items()
        }
        hidden_noise = {h: NoiseSpec(**n) for h, n in obj["hidden_noise"].items()}
        return cls(
            obj["observed"], obj["hidden"], equations, hidden_noise,
            obj["tau_min"], obj["tau_max"], obj["order"], obj.get("seed", 0),
        )


def random_scm(cfg: GeneratorConfig) -> Scm:
    """Draw a random system of equations satisfying the configured limits."""
    rng = np.random.default_rng(cfg.seed)
    names = [f"X{i}" for i in range(cfg.n_obs_vars)]
    rank = {v: int(r) for v, r in zip(names, rng.permutation(cfg.n_obs_vars))}

    equations = {}
    for var in names:
        equations[var] = _draw_equation(rng, cfg, var, names, rank)

    if isinstance(cfg.n_hidden, tuple):
        n_hidden = int(rng.integers(cfg.n_hidden[0], cfg.n_hidden[1] + 1))
    else:
        n_hidden = cfg.n_hidden
    hidden = [f"H{i}" for i in range(n_hidden)]
    hidden_noise = {}
    for h in hidden:
        hidden_noise[h] = _draw_noise(rng, cfg)
        if cfg.n_confounded_per_hidden is None:
            n_conf = int(rng.integers(2, cfg.n_obs_vars + 1))
        else:
            n_conf = cfg.n_confounded_per_hidden
        children = [names[i] for i in rng.choice(len(names), size=n_conf, replace=False)]
        for child in sorted(children):
            eq = equations[child]
            term = Term(
                parent=h,
                lag=int(rng.integers(max(1, cfg.tau_min), cfg.tau_max + 1)),
                coeff=float(rng.uniform(*cfg.coeff_range)),
                form=str(rng.choice(cfg.functional_forms)),
                op="+" if not eq.terms else str(rng.choice(cfg.operators)),
            )
            equations[child] = Equation(eq.terms + (term,), eq.noise, eq.noise_op)

    order = sorted(names, key=lambda v: rank[v])
    return Scm(names, hidden, equations, hidden_noise, cfg.tau_min, cfg.tau_max, order, cfg.seed)


def _draw_noise(rng, cfg: GeneratorConfig) -> NoiseSpec:
    kind = str(rng.choice(cfg.noise_menu))
    # positive scale reading of the magnitude rule; Weibull is fixed (2, 1)
    scale = 1.0 if kind == "weibull" else float(rng.uniform(0.5, 2.0))
    return NoiseSpec(kind, scale)


def _draw_equation(rng, cfg: GeneratorConfig, var, names, rank):
    n_par = int(rng.integers(0, cfg.link_density + 1))
    parents = [names[i] for i in rng.choice(len(names), size=n_par, replace=False)]
    terms = []
    for parent in sorted(parents):
        lag = int(rng.integers(cfg.tau_min, cfg.tau_max + 1))
        if lag == 0 and (parent == var or rank[parent] >= rank[var]):
            if cfg.tau_max >= 1:
                lag = int(rng.integers(max(1, cfg.tau_min), cfg.tau_max + 1))
            else:
                continue  # no acyclic slot for this parent
        terms.append(
            Term(
                parent=parent,
                lag=lag,
                coeff=float(rng.uniform(*cfg.coeff_range)),
                form=str(rng.choice(cfg.functional_forms)),
                op="+" if not terms else str(rng.choice(cfg.operators)),
            )
        )
    noise = _draw_noise(rng, cfg)
    # noise joins additively: without a full-support innovation, damping
    # forms (pow, exp) can collapse an equation to a constant
    additive = [op for op in cfg.operators if op in ("+", "-")] or ["+"]
    noise_op = str(rng.choice(additive))
    return Equation(tuple(terms), noise, noise_op)


def regenerate_equation(scm: Scm, cfg: GeneratorConfig, var: str, seed: int) -> Scm:
    """Redraw one observable equation, keeping its hidden-confounder terms."""
    if var not in scm.observed:
        raise UnknownTarget(f"{var!r} is not an observable of this system")
    rng = np.random.default_rng([cfg.seed, seed])
    rank = {v: i for i, v in enumerate(scm.order)}
    eq = _draw_equation(rng, cfg, var, list(scm.observed), rank)
    hidden_terms = tuple(
        t for t in scm.equations[var].terms if t.parent in scm.hidden
    )
    if hidden_terms and not eq.terms:
        hidden_terms = (replace(hidden_terms[0], op="+"),) + hidden_terms[1:]
    equations = dict(scm.equations)
    equations[var] = Equation(eq.terms + hidden_terms, eq.noise, eq.noise_op)
    return Scm(
        scm.observed, scm.hidden, equations, scm.hidden_noise,
        scm.tau_min, scm.tau_max, scm.order, scm.seed,
    )


def simulable_scm(cfg: GeneratorConfig, T: int | None = None, seed: int = 0,
                  max_regen: int = 20) -> Scm:
    """Draw a system and make it simulable over ``T`` rows.

    Equations whose structure keeps tripping the divergence guard are
    redrawn one at a time (hidden-confounder wiring preserved) until a probe
    simulation succeeds; deterministic given the config seed.
    """
    scm = random_scm(cfg)
    T = T or cfg.ts_length
    for round_ in range(max_regen):
        try:
            _simulate(scm, T, seed)
            return scm
        except DivergenceError as exc:
            if exc.variable is None:
                raise
            scm = regenerate_equation(scm, cfg, exc.variable, round_)
    _simulate(scm, T, seed)  # raise with the final offender if still unstable
    return scm


# ---------------------------------------------------------------------------
# Simulation


def _sample_noise(rng, spec: NoiseSpec, size):
    if spec.kind == "uniform":
        return rng.uniform(-spec.scale, spec.scale, size)
    if spec.kind == "normal":
        return rng.normal(0.0, spec.scale, size)
    if spec.kind == "weibull":
        return rng.weibull(2.0, size) * spec.scale - _WEIBULL_MEAN * spec.scale
    raise ConfigError(f"unknown noise kind {spec.kind!r}")


def _apply_form(form: str, x: float) -> float:
    if form == "identity":
        return x
    if form == "sin":
        return math.sin(x)
    if form == "cos":
        return math.cos(x)
    if form == "abs":
        return abs(x)
    if form == "pow":
        return x * x
    if form == "exp":
        return math.exp(-abs(x))
    raise ConfigError(f"unknown functional form {form!r}")


def _fold(acc: float, value: float, op: str) -> float:
    if op == "+":
        return acc + value
    if op == "-":
        return acc - value
    if op == "*":
        return acc * value
    if op == "/":
        return acc / (value + math.copysign(0.5, value))
    raise ConfigError(f"unknown operator {op!r}")


def _simulate_once(scm: Scm, n_rows: int, rng, intervene=None):
    """One simulation attempt; returns (values, None) or (None, offending var)."""
    intervene = intervene or {}
    cols = {v: i for i, v in enumerate(scm.variables)}
    values = np.zeros((n_rows, len(scm.variables)))
    noise = np.zeros((n_rows, len(scm.variables)))
    for var in scm.observed:
        noise[:, cols[var]] = _sample_noise(rng, scm.equations[var].noise, n_rows)
    for h in scm.hidden:
        noise[:, cols[h]] = _sample_noise(rng, scm.hidden_noise[h], n_rows)

    tau = scm.tau_max
    values[:tau, :] = noise[:tau, :]
    for var, xi in intervene.items():
        values[:tau, cols[var]] = xi
    for t in range(tau, n_rows):
        for h in scm.hidden:
            values[t, cols[h]] = noise[t, cols[h]]
        for var in scm.order:
            j = cols[var]
            if var in intervene:
                values[t, j] = intervene[var]
                continue
            eq = scm.equations[var]
            acc = 0.0
            for term in eq.terms:
                v = term.coeff * _apply_form(term.form, values[t - term.lag, cols[term.parent]])
                acc = _fold(acc, v, term.op)
            acc = _fold(acc, noise[t, j], eq.noise_op if eq.terms else "+")
            if not math.isfinite(acc) or abs(acc) > DIVERGENCE_BOUND:
                return None, var
            values[t, j] = acc
    return values, None


def _simulate(scm: Scm, T: int, seed: int, intervene=None):
    burn = BURN_FACTOR * (scm.tau_max + 1)
    n_rows = T + burn
    intervene = intervene or {}
    offender = None
    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng([seed, attempt])
        values, offender = _simulate_once(scm, n_rows, rng, intervene)
        if values is not None:
            obs_cols = [scm.variables.index(v) for v in scm.observed]
            out = values[burn:, obs_cols]
            constant = [
                v
                for j, v in enumerate(scm.observed)
                if v not in intervene and np.ptp(out[:, j]) == 0.0
            ]
            if not constant:
                return out
            offender = constant[0]
    raise DivergenceError(
        f"simulation exceeded |value| <= {DIVERGENCE_BOUND:g} or collapsed to a "
        f"constant in {MAX_ATTEMPTS} noise resamples (equation {offender!r})",
        variable=offender,
    )


def simulate_obs(scm: Scm, T: int, seed: int = 0) -> Dataset:
    """Simulate T observational rows; hidden columns are dropped.

    A burn-in of 10 * (tau_max + 1) steps is discarded, and the divergence
    guard resamples noise up to 20 times before giving up.
    """
    if T < scm.tau_max + 1:
        raise ValueError(f"T={T} must be at least tau_max+1={scm.tau_max + 1}")
    return Dataset(scm.observed, _simulate(scm, T, seed))


def simulate_intervention(scm: Scm, target: str, value: float, T: int, seed: int = 0) -> InterventionRun:
    """Simulate T rows with ``target`` clamped to ``value`` (hard intervention).

    All other equations evolve using the forced value; hidden confounders
    are unaffected.
    """
    if target not in scm.observed:
        raise UnknownTarget(f"{target!r} is not an observable of this system")
    if T < scm.tau_max + 1:
        raise ValueError(f"T={T} must be at least tau_max+1={scm.tau_max + 1}")
    values = _simulate(scm, T, seed, intervene={target: float(value)})
    data = Dataset(scm.observed, values, [int_label(0)] * T)
    return InterventionRun(target, float(value), data)


# ---------------------------------------------------------------------------
# Ground-truth projection


def project_to_mag(dag: TsDag, tau_max: int) -> TsPAG:
    """Latent-project a DAG onto its observables over a lag window.

    Two observed window nodes are adjacent iff they stay d-connected given
    the observed ancestors of either one; endpoint marks are tails exactly
    on ancestor endpoints. The result carries only tail/head marks.
    """
    horizon = 2 * max(dag.tau_max, tau_max) + 1
    unrolled = UnrolledDag(dag, horizon)
    ref = horizon - 1
    observed = dag.observed
    anc_cache = {}

    def ancestors(node):
        if node not in anc_cache:
            anc_cache[node] = unrolled.ancestors(node)
        return anc_cache[node]

    def project(a, b):
        z = {
            n
            for n in (ancestors(a) | ancestors(b))
            if n[0] not in dag.hidden and n not in (a, b)
        }
        if unrolled.d_separated(a, b, z):
            return None
        mark_a = Mark.TAIL if a in ancestors(b) else Mark.HEAD
        mark_b = Mark.TAIL if b in ancestors(a) else Mark.HEAD
        return mark_a, mark_b

    edges = []
    for lag in range(1, tau_max + 1):
        for src in observed:
            for dst in observed:
                marks = project((src, ref - lag), (dst, ref))
                if marks:
                    edges.append(LaggedEdge(src, lag, dst, *marks))
    for i, src in enumerate(observed):
        for dst in observed[i + 1 :]:
            marks = project((src, ref), (dst, ref))
            if marks:
                edges.append(LaggedEdge(src, 0, dst, *marks))
    return TsPAG(observed, 0, tau_max, edges)


def true_pag(scm: Scm, tau_max: int | None = None) -> TsPAG:
    """The ground-truth MAG of a generated system over the window."""
    if tau_max is None:
        tau_max = scm.tau_max
    return project_to_mag(scm.dag, tau_max)


# ---------------------------------------------------------------------------
# Config serialization


def config_to_json(cfg: GeneratorConfig) -> str:
    obj = asdict(cfg)
    obj["n_hidden"] = list(cfg.n_hidden) if isinstance(cfg.n_hidden, tuple) else cfg.n_hidden
    for key in ("noise_menu", "coeff_range", "operators", "functional_forms"):
        obj[key] = list(obj[key])
    return json.dumps(obj, indent=2, sort_keys=True)


def config_from_json(text: str) -> GeneratorConfig:
    obj = json.loads(text)
    if isinstance(obj.get("n_hidden"), list):
        obj["n_hidden"] = tuple(obj["n_hidden"])
    if "coeff_range" in obj:
        obj["coeff_range"] = tuple(obj["coeff_range"])
    return GeneratorConfig(**{k: v for k, v in obj.items()})
