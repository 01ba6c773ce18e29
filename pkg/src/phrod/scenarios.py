"""Scenario definitions, built-in benchmarks and scenario files.

A scenario fixes geometry, material, mesh, boundary conditions, loads,
actuators and solver settings.  Scenario files are TOML documents with the
sections ``[rod]``, ``[material]``, ``[maxwell.N]``, ``[mesh]``,
``[dirichlet]``, ``[loads.*]``, ``[actuators.N]``, ``[solver]`` and
``[output]``; :func:`write_scenario` and :func:`read_scenario` round-trip.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from phrod.assembly import RodSystem
from phrod.constitutive import (
    FORCE_SLOTS,
    MOMENT_SLOTS,
    RIGID,
    ConfigurationError,
    MaterialModel,
    MaxwellBranch,
)
from phrod.diagnostics import make_record
from phrod.femesh import RodMesh
from phrod.integrator import (
    Clamp,
    DirichletSpec,
    MidpointStepper,
    SolverSettings,
    StepFailure,
    StepInputs,
    initialize,
    straight_configuration,
)

# ----------------------------------------------------------------------
# time functions


def _hat(t, peak, t_peak, t_zero):
    if t < t_peak:
        return peak * t / t_peak
    if t < t_zero:
        return peak * (t_zero - t) / (t_zero - t_peak)
    return 0.0


def _cosine_pulse(t, period, amplitude=1.0):
    if t < period:
        return 0.5 * amplitude * (1.0 - math.cos(2.0 * math.pi * t / period))
    return 0.0


def _circle_sweep(t, f_max, t1, t2, T):
    """Amplitude and phase of the circular sweep input."""
    if t < t1:
        f = 0.5 * f_max * (1.0 - math.cos(math.pi * t / t1))
        ph = 0.0
    elif t < t2:
        f = f_max
        ph = math.pi * (1.0 - math.cos(math.pi * (t - t1) / (t2 - t1)))
    else:
        f = 0.5 * f_max * (1.0 + math.cos(math.pi * (t - t2) / (T - t2)))
        ph = 2.0 * math.pi
    return f, ph


def heart_curve(theta):
    """Planar heart curve ``(sin^3, cos - cos 2)``."""
    return math.sin(theta) ** 3, math.cos(theta) - math.cos(2.0 * theta)


@lru_cache(maxsize=1)
def heart_max_radius():
    """Largest distance of the heart curve from the origin."""
    from scipy.optimize import minimize_scalar

    th = np.linspace(0.0, 2.0 * np.pi, 4001)
    r = np.hypot(np.sin(th) ** 3, np.cos(th) - np.cos(2.0 * th))
    i = int(np.argmax(r))
    lo, hi = th[max(i - 1, 0)], th[min(i + 1, th.size - 1)]
    res = minimize_scalar(lambda a: -math.hypot(*heart_curve(a)), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-14})
    return max(float(r[i]), -float(res.fun))


def _heart_sweep(t, f_max, T):
    theta = 2.0 * math.pi * t / T
    x, y = heart_curve(theta)
    f = f_max * math.hypot(x, y) / heart_max_radius()
    return f, math.atan2(y, x)


_KINDS = {
    "zero": (),
    "constant": ("value",),
    "ramp": ("slope",),
    "hat": ("peak", "t_peak", "t_zero"),
    "cosine_pulse": ("period", "amplitude"),
    "circle_sweep": ("f_max", "t1", "t2", "T", "alpha"),
    "heart_sweep": ("f_max", "T", "alpha"),
}


@dataclass(frozen=True)
class TimeFunction:
    """Closed-form scalar function of time.

    Kinds and parameters: ``zero``; ``constant(value)``; ``ramp(slope)``;
    ``hat(peak, t_peak, t_zero)``; ``cosine_pulse(period, amplitude)``;
    ``circle_sweep(f_max, t1, t2, T, alpha)`` and
    ``heart_sweep(f_max, T, alpha)``.  The two sweeps give chamber
    magnitudes ``0.5 f(t) (1 + cos(phase(t) - alpha))``.
    """

    kind: str = "zero"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown time function kind {self.kind!r}")
        allowed = set(_KINDS[self.kind])
        extra = set(self.params) - allowed
        if extra:
            raise ConfigurationError(f"unexpected parameters {sorted(extra)} for {self.kind}")
        required = allowed - {"amplitude"}
        missing = required - set(self.params)
        if missing:
            raise ConfigurationError(f"missing parameters {sorted(missing)} for {self.kind}")
        for k, v in self.params.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ConfigurationError(f"parameter {k} of {self.kind} must be a finite number")

    def __call__(self, t):
        p = self.params
        k = self.kind
        if k == "zero":
            return 0.0
        if k == "constant":
            return float(p["value"])
        if k == "ramp":
            return p["slope"] * t
        if k == "hat":
            return _hat(t, p["peak"], p["t_peak"], p["t_zero"])
        if k == "cosine_pulse":
            return _cosine_pulse(t, p["period"], p.get("amplitude", 1.0))
        if k == "circle_sweep":
            f, ph = _circle_sweep(t, p["f_max"], p["t1"], p["t2"], p["T"])
        else:
            f, ph = _heart_sweep(t, p["f_max"], p["T"])
        return 0.5 * f * (1.0 + math.cos(ph - p["alpha"]))

    def knots(self):
        """Break points of piecewise definitions."""
        p = self.params
        return {
            "hat": [p.get("t_peak"), p.get("t_zero")],
            "cosine_pulse": [p.get("period")],
            "circle_sweep": [p.get("t1"), p.get("t2")],
        }.get(self.kind, [])


# ----------------------------------------------------------------------
# scenario data


def _vec(v, n=3):
    t = tuple(float(a) for a in v)
    if len(t) != n or not all(math.isfinite(a) for a in t):
        raise ConfigurationError(f"expected {n} finite numbers, got {v!r}")
    return t


@dataclass(frozen=True)
class RodSpec:
    """Straight initial configuration from ``start`` along ``axis``."""

    length: float
    start: tuple = (0.0, 0.0, 0.0)
    axis: tuple = (0.0, 0.0, 1.0)
    initial_velocity: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "start", _vec(self.start))
        object.__setattr__(self, "axis", _vec(self.axis))
        object.__setattr__(self, "initial_velocity", _vec(self.initial_velocity))
        if not self.length > 0:
            raise ConfigurationError("rod length must be positive")
        if np.linalg.norm(self.axis) == 0:
            raise ConfigurationError("rod axis must be nonzero")


@dataclass(frozen=True)
class EndLoad:
    """Spatial force and moment at one rod end, scaled by ``profile(t)``."""

    end: str
    force: tuple = (0.0, 0.0, 0.0)
    moment: tuple = (0.0, 0.0, 0.0)
    profile: TimeFunction = TimeFunction()

    def __post_init__(self):
        if self.end not in ("start", "end"):
            raise ConfigurationError(f"load end must be 'start' or 'end', got {self.end!r}")
        object.__setattr__(self, "force", _vec(self.force))
        object.__setattr__(self, "moment", _vec(self.moment))


@dataclass(frozen=True)
class DistributedLoad:
    """Uniform force and moment densities scaled by ``profile(t)``."""

    force: tuple = (0.0, 0.0, 0.0)
    moment: tuple = (0.0, 0.0, 0.0)
    profile: TimeFunction = TimeFunction()

    def __post_init__(self):
        object.__setattr__(self, "force", _vec(self.force))
        object.__setattr__(self, "moment", _vec(self.moment))


@dataclass(frozen=True)
class Actuator:
    """Pneumatic chamber or tendon at offset ``rho`` in the cross-section."""

    kind: str
    rho: tuple
    drive: TimeFunction

    def __post_init__(self):
        if self.kind not in ("pneumatic", "tendon"):
            raise ConfigurationError(f"unknown actuator kind {self.kind!r}")
        object.__setattr__(self, "rho", _vec(self.rho, 2))

    def magnitude(self, t):
        tau = self.drive(t)
        if self.kind == "pneumatic" and tau > 0:
            raise ConfigurationError(f"pneumatic magnitude must be non-positive, got {tau}")
        if self.kind == "tendon" and tau < 0:
            raise ConfigurationError(f"tendon tension must be non-negative, got {tau}")
        return tau


@dataclass(frozen=True)
class OutputSpec:
    """Arc-length positions of the tip probe and the mid probe.

    ``None`` selects ``L`` for the tip and ``L/2`` for the mid probe.
    """

    tip: float = None
    mid: float = None


@dataclass(frozen=True)
class Scenario:
    name: str
    rod: RodSpec
    material: MaterialModel
    solver: SolverSettings
    n_e: int = 10
    p: int = 2
    maxwell: tuple = ()
    clamped: tuple = ()
    loads: tuple = ()
    distributed: DistributedLoad = None
    actuators: tuple = ()
    output: OutputSpec = OutputSpec()
    description: str = ""

    def __post_init__(self):
        for end in self.clamped:
            if end not in ("start", "end"):
                raise ConfigurationError(f"clamped end must be 'start' or 'end', got {end!r}")
        if len(set(self.clamped)) != len(self.clamped):
            raise ConfigurationError("an end is clamped twice")
        for ld in self.loads:
            if ld.end in self.clamped:
                raise ConfigurationError(f"end {ld.end!r} is both loaded and clamped")
        if int(self.n_e) != self.n_e or self.n_e < 1:
            raise ConfigurationError("n_e must be a positive integer")
        if self.p not in (1, 2):
            raise ConfigurationError("p must be 1 or 2")
        self.solver.n_steps  # validates the time grid
        for pos in (self.output.tip, self.output.mid):
            if pos is not None and not 0 <= pos <= self.rod.length:
                raise ConfigurationError(f"probe position {pos} lies outside the rod")

    @property
    def viscous(self):
        return len(self.maxwell) > 0


def end_node(mesh, end):
    return 0 if end == "start" else mesh.n_nodes - 1


def eval_loads(scenario, t):
    """Loads at time ``t``.

    Returns
    -------
    boundary : list of ``(end, force, moment)``
    distributed : ``(force density, moment density)`` or ``None``
    tau : ndarray of actuator magnitudes
    """
    boundary = []
    for ld in scenario.loads:
        f = ld.profile(t)
        boundary.append((ld.end, f * np.asarray(ld.force), f * np.asarray(ld.moment)))
    dist = None
    if scenario.distributed is not None:
        f = scenario.distributed.profile(t)
        dist = (f * np.asarray(scenario.distributed.force), f * np.asarray(scenario.distributed.moment))
    tau = np.array([a.magnitude(t) for a in scenario.actuators])
    return boundary, dist, tau


# ----------------------------------------------------------------------
# built-in benchmarks


def circular_section(diameter, E, G, rho):
    """Stiffness and inertia of a solid circular cross-section."""
    A = math.pi * diameter**2 / 4.0
    I = math.pi * diameter**4 / 64.0
    return {
        "rhoA": rho * A, "Mrho11": rho * I, "Mrho22": rho * I,
        "kS1": G * A, "kS2": G * A, "kE": E * A,
        "kB1": E * I, "kB2": E * I, "kT": G * 2.0 * I,
    }


def _flying_spaghetti():
    mat = MaterialModel(rhoA=1.0, Mrho11=10.0, Mrho22=10.0, kS1=1e4, kS2=1e4, kE=1e4,
                        kB1=1e3, kB2=1e3, kT=1e3)
    start = np.array([6.0, 0.0, 0.0])
    end = np.array([0.0, 0.0, 8.0])
    hat = TimeFunction("hat", {"peak": 200.0, "t_peak": 2.5, "t_zero": 5.0})
    return Scenario(
        name="flying_spaghetti",
        description="free-free rod driven by an end force and moment, then free flight",
        rod=RodSpec(length=10.0, start=start, axis=(end - start) / 10.0),
        material=mat,
        solver=SolverSettings(h=0.1, t_end=15.0, eps_newton=1e-11),
        n_e=10,
        loads=(EndLoad("end", force=(0.1, 0.0, 0.0), moment=(0.0, 1.0, 0.5), profile=hat),),
        output=OutputSpec(tip=0.0, mid=5.0),
    )


def _cantilever_material():
    E = 7.2e10
    G = E / (2.0 * (1.0 + 0.35))
    sec = circular_section(4e-3, E, G, 2850.0)
    sec.update(kS1=RIGID, kS2=RIGID, kE=RIGID)
    return MaterialModel(**sec)


def _cantilever_oscillation(viscous=False):
    pulse = TimeFunction("cosine_pulse", {"period": 0.05})
    sc = Scenario(
        name="cantilever_oscillation",
        description="inextensible shear-rigid cantilever excited by a short tip pulse",
        rod=RodSpec(length=1.0, axis=(1.0, 0.0, 0.0)),
        material=_cantilever_material(),
        solver=SolverSettings(h=1e-3, t_end=0.3, eps_newton=1e-12),
        n_e=8,
        clamped=("start",),
        loads=(EndLoad("end", force=(0.0, 1.0, 1.0), moment=(0.25, 0.0, 0.0), profile=pulse),),
    )
    if viscous:
        sc = replace(sc, name="cantilever_oscillation_viscous",
                     description="cantilever with one Maxwell branch carrying 3/4 of the stiffness",
                     maxwell=(MaxwellBranch(fraction=0.75, tauE=0.08, tauG=0.08),))
    return sc


def _quasistatic(constrained=False):
    L = 2.0 * math.pi
    P = 10.0 * 2.0 / L**2
    ks = RIGID if constrained else 1.0
    ke = RIGID if constrained else 5.0
    mat = MaterialModel(rhoA=0.0, Mrho11=0.0, Mrho22=0.0, kS1=ks, kS2=ks, kE=ke,
                        kB1=2.0, kB2=2.0, kT=0.5)
    ramp = TimeFunction("ramp", {"slope": 1.0})
    return Scenario(
        name="quasistatic_cantilever_constrained" if constrained else "quasistatic_cantilever",
        description=("inextensible, shear-rigid" if constrained else "massless")
        + " cantilever under a growing tip force and moment",
        rod=RodSpec(length=L, axis=(1.0, 0.0, 0.0)),
        material=mat,
        solver=SolverSettings(h=1e-2, t_end=1.0, eps_newton=1e-12),
        n_e=8,
        clamped=("start",),
        loads=(EndLoad("end", force=(0.0, -P, 0.0), moment=(0.0, 0.0, 2.5 * P), profile=ramp),),
    )


def _soft_arm(path):
    sec = circular_section(0.03, 6e5, 2e5, 1080.0)
    # chamber offset inside the 15 mm section radius
    r = 6.5e-3
    acts = []
    for alpha in (math.pi / 6.0, 5.0 * math.pi / 6.0, 9.0 * math.pi / 6.0):
        if path == "circle":
            drive = TimeFunction("circle_sweep", {"f_max": -50.0, "t1": 0.5, "t2": 3.5, "T": 4.0,
                                                  "alpha": alpha})
        else:
            drive = TimeFunction("heart_sweep", {"f_max": -50.0, "T": 4.0, "alpha": alpha})
        acts.append(Actuator("pneumatic", (r * math.cos(alpha), r * math.sin(alpha)), drive))
    return Scenario(
        name=f"soft_arm_{path}",
        description=f"clamped soft arm driven by three pressure chambers along a {path} path",
        rod=RodSpec(length=0.1755, axis=(0.0, 0.0, 1.0)),
        material=MaterialModel(**sec),
        # h=0.05 stalls full-step Newton on the stiff rotary modes; 0.025 converges
        solver=SolverSettings(h=0.025, t_end=4.0, eps_newton=1e-11),
        n_e=10,
        clamped=("start",),
        actuators=tuple(acts),
    )


_BUILTINS = {
    "flying_spaghetti": _flying_spaghetti,
    "cantilever_oscillation": _cantilever_oscillation,
    "cantilever_oscillation_viscous": lambda: _cantilever_oscillation(viscous=True),
    "quasistatic_cantilever": _quasistatic,
    "quasistatic_cantilever_constrained": lambda: _quasistatic(constrained=True),
    "soft_arm_circle": lambda: _soft_arm("circle"),
    "soft_arm_heart": lambda: _soft_arm("heart"),
}


def builtin_names():
    return list(_BUILTINS)


def builtin(name):
    """Return a built-in scenario by name."""
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ConfigurationError(
            f"unknown scenario {name!r}; available: {', '.join(_BUILTINS)}"
        ) from None


# ----------------------------------------------------------------------
# dictionary and file form


def _stiff_out(k):
    return "rigid" if k is RIGID else k


def _stiff_in(k):
    if isinstance(k, str):
        if k.lower() == "rigid":
            return RIGID
        raise ConfigurationError(f"stiffness must be a number or 'rigid', got {k!r}")
    return float(k)


def _tf_out(tf):
    return {"kind": tf.kind, **tf.params}


def _tf_in(d):
    d = dict(d)
    kind = d.pop("kind", "zero")
    return TimeFunction(kind, {k: float(v) for k, v in d.items()})


def to_dict(sc):
    """Plain nested dictionary mirroring the scenario file layout."""
    mat = sc.material
    out = {
        "name": sc.name,
        "description": sc.description,
        "rod": {
            "length": sc.rod.length,
            "start": list(sc.rod.start),
            "axis": list(sc.rod.axis),
            "initial_velocity": list(sc.rod.initial_velocity),
        },
        "material": {
            "rhoA": mat.rhoA, "Mrho11": mat.Mrho11, "Mrho22": mat.Mrho22,
            **{k: _stiff_out(getattr(mat, k)) for k in FORCE_SLOTS + MOMENT_SLOTS},
        },
        "mesh": {"n_e": sc.n_e, "p": sc.p},
        "dirichlet": {"clamped": list(sc.clamped)},
        "loads": {},
        "solver": asdict(sc.solver),
        "output": {k: v for k, v in asdict(sc.output).items() if v is not None},
    }
    if sc.maxwell:
        out["maxwell"] = {
            str(i + 1): {
                "fraction": (list(b.fraction) if isinstance(b.fraction, (tuple, list)) else b.fraction),
                "tauE": b.tauE, "tauG": b.tauG,
            }
            for i, b in enumerate(sc.maxwell)
        }
    for ld in sc.loads:
        out["loads"][ld.end] = {"force": list(ld.force), "moment": list(ld.moment),
                                "profile": _tf_out(ld.profile)}
    if sc.distributed is not None:
        dl = sc.distributed
        out["loads"]["distributed"] = {"force": list(dl.force), "moment": list(dl.moment),
                                       "profile": _tf_out(dl.profile)}
    if sc.actuators:
        out["actuators"] = {
            str(i + 1): {"kind": a.kind, "rho": list(a.rho), "drive": _tf_out(a.drive)}
            for i, a in enumerate(sc.actuators)
        }
    return out


def _section(d, name, allowed):
    sec = d.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigurationError(f"[{name}] must be a table")
    extra = set(sec) - set(allowed)
    if extra:
        raise ConfigurationError(f"unknown keys {sorted(extra)} in [{name}]")
    return sec


def _numbered(d, name):
    sec = d.get(name, {})
    try:
        return [sec[k] for k in sorted(sec, key=int)]
    except (ValueError, TypeError):
        raise ConfigurationError(f"[{name}.N] tables must be numbered") from None


def from_dict(d):
    """Inverse of :func:`to_dict`; validates types and values."""
    known = {"name", "description", "rod", "material", "maxwell", "mesh", "dirichlet",
             "loads", "actuators", "solver", "output"}
    extra = set(d) - known
    if extra:
        raise ConfigurationError(f"unknown top-level keys {sorted(extra)}")
    try:
        rod = RodSpec(**_section(d, "rod", ("length", "start", "axis", "initial_velocity")))
        m = _section(d, "material", ("rhoA", "Mrho11", "Mrho22") + FORCE_SLOTS + MOMENT_SLOTS)
        mat = MaterialModel(
            rhoA=float(m["rhoA"]), Mrho11=float(m["Mrho11"]), Mrho22=float(m["Mrho22"]),
            **{k: _stiff_in(m[k]) for k in FORCE_SLOTS + MOMENT_SLOTS},
        )
        maxwell = []
        for b in _numbered(d, "maxwell"):
            frac = b["fraction"]
            frac = tuple(float(f) for f in frac) if isinstance(frac, list) else float(frac)
            maxwell.append(MaxwellBranch(fraction=frac, tauE=float(b["tauE"]), tauG=float(b["tauG"])))
        mesh = _section(d, "mesh", ("n_e", "p"))
        n_e, p = mesh.get("n_e", 10), mesh.get("p", 2)
        if not isinstance(n_e, int) or not isinstance(p, int):
            raise ConfigurationError("mesh n_e and p must be integers")
        clamped = tuple(_section(d, "dirichlet", ("clamped",)).get("clamped", ()))
        loads_sec = _section(d, "loads", ("start", "end", "distributed"))
        loads, dist = [], None
        for end in ("start", "end"):
            if end in loads_sec:
                ld = loads_sec[end]
                loads.append(EndLoad(end, ld.get("force", (0, 0, 0)), ld.get("moment", (0, 0, 0)),
                                     _tf_in(ld.get("profile", {}))))
        if "distributed" in loads_sec:
            ld = loads_sec["distributed"]
            dist = DistributedLoad(ld.get("force", (0, 0, 0)), ld.get("moment", (0, 0, 0)),
                                   _tf_in(ld.get("profile", {})))
        acts = [Actuator(a["kind"], tuple(a["rho"]), _tf_in(a["drive"]))
                for a in _numbered(d, "actuators")]
        solver = _section(d, "solver", ("h", "t_end", "eps_newton", "max_newton_iters",
                                        "jacobian_mode", "fd_step"))
        solver = dict(solver)
        for k in ("h", "t_end", "eps_newton", "fd_step"):
            if k in solver:
                solver[k] = float(solver[k])
        if "max_newton_iters" in solver and not isinstance(solver["max_newton_iters"], int):
            raise ConfigurationError("max_newton_iters must be an integer")
        out = _section(d, "output", ("tip", "mid"))
        return Scenario(
            name=str(d.get("name", "custom")),
            description=str(d.get("description", "")),
            rod=rod, material=mat, solver=SolverSettings(**solver), n_e=n_e, p=p,
            maxwell=tuple(maxwell), clamped=clamped, loads=tuple(loads), distributed=dist,
            actuators=tuple(acts),
            output=OutputSpec(**{k: float(v) for k, v in out.items()}),
        )
    except KeyError as exc:
        raise ConfigurationError(f"missing required key {exc}") from None
    except TypeError as exc:
        raise ConfigurationError(f"malformed scenario: {exc}") from None


def dumps(sc):
    return tomli_w.dumps(to_dict(sc))


def loads(text):
    try:
        return from_dict(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid scenario file: {exc}") from None


def write_scenario(sc, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(sc))


def read_scenario(path):
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


_ALIASES = {
    "h": "solver.h",
    "t_end": "solver.t_end",
    "eps": "solver.eps_newton",
    "eps_newton": "solver.eps_newton",
    "max_newton_iters": "solver.max_newton_iters",
    "jacobian_mode": "solver.jacobian_mode",
    "n_e": "mesh.n_e",
    "p": "mesh.p",
}


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(sc, overrides):
    """Return a copy of ``sc`` with ``key=value`` overrides applied.

    Keys are dotted paths into the scenario file layout (``solver.h``,
    ``material.kE``, ``actuators.1.rho``) or one of the short aliases
    ``h, t_end, eps, n_e, p``.
    """
    d = copy.deepcopy(to_dict(sc))
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        key = _ALIASES.get(key.strip(), key.strip())
        value = _parse_value(text.strip())
        parts = key.split(".")
        node = d
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ConfigurationError(f"unknown override key {key!r}")
            node = node[part]
        leaf = parts[-1]
        if leaf not in node and not (parts[0] in ("solver", "output") and len(parts) == 2):
            raise ConfigurationError(f"unknown override key {key!r}")
        old = node.get(leaf)
        if isinstance(old, bool) or (isinstance(old, int) and not isinstance(value, int)):
            raise ConfigurationError(f"override {key} expects an integer, got {text!r}")
        if isinstance(old, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if isinstance(old, (int, float)) and not isinstance(value, (int, float)) and old != "rigid":
            if not (parts[0] == "material" and isinstance(value, str)):
                raise ConfigurationError(f"override {key} expects a number, got {text!r}")
        node[leaf] = value
    return from_dict(d)


# ----------------------------------------------------------------------
# running


class PreparedRun:
    """System, stepper and initial state assembled from a scenario."""

    def __init__(self, scenario, settings=None):
        self.scenario = sc = scenario
        self.settings = settings or sc.solver
        self.mesh = RodMesh(sc.rod.length, sc.n_e, sc.p)
        self.system = RodSystem(self.mesh, sc.material, sc.maxwell)
        q0 = straight_configuration(self.mesh, sc.rod.start, sc.rod.axis)
        v0 = np.zeros(self.mesh.n_q)
        v0[:3 * self.mesh.n_nodes] = np.tile(sc.rod.initial_velocity, self.mesh.n_nodes)
        self.x0 = initialize(self.system, q0, v0)
        clamps = tuple(Clamp(end_node(self.mesh, e)) for e in sc.clamped)
        self.nodes = {e: end_node(self.mesh, e) for e in ("start", "end")}
        tip = sc.rod.length if sc.output.tip is None else sc.output.tip
        mid = 0.5 * sc.rod.length if sc.output.mid is None else sc.output.mid
        self.tip_node = self.mesh.node_at(tip)
        self.mid_node = self.mesh.node_at(mid)
        self.stepper = MidpointStepper(
            self.system, self.settings, DirichletSpec(clamps),
            actuators=[(a.kind, a.rho) for a in sc.actuators],
            inputs=self.inputs, x0=self.x0,
        )

    def inputs(self, t):
        boundary, dist, tau = eval_loads(self.scenario, t)
        bnd = [(self.nodes[e], f, m) for e, f, m in boundary]
        dfun = None
        if dist is not None:
            nbar, mbar = dist
            dfun = lambda s: (np.broadcast_to(nbar, np.shape(s) + (3,)),  # noqa: E731
                              np.broadcast_to(mbar, np.shape(s) + (3,)))
        return StepInputs(boundary=bnd, distributed=dfun, tau=tau)

    def record(self, x, t, **kw):
        return make_record(self.system, x, t, self.tip_node, self.mid_node, **kw)


def run_scenario(scenario, settings=None, callback=None, t_stop=None, keep_states=False):
    """Integrate a scenario and collect one :class:`StepRecord` per step.

    Parameters
    ----------
    settings : SolverSettings, optional
        Replaces ``scenario.solver``.
    callback : callable, optional
        Called with each record as soon as it is produced.
    t_stop : float, optional
        Stop early at this time (must lie on the grid).
    keep_states : bool
        Also return the list of state vectors.

    Raises
    ------
    StepFailure
        With the records produced so far in ``exc.records``.
    """
    run = PreparedRun(scenario, settings)
    st = run.settings
    n = st.n_steps
    if t_stop is not None:
        n = int(round(t_stop / st.h))
    x = run.x0
    rec = run.record(x, 0.0, tau=eval_loads(scenario, 0.0)[2])
    records = [rec]
    states = [x.copy()]
    if callback:
        callback(rec)
    for k in range(n):
        t = k * st.h
        try:
            res = run.stepper.step(x, t, step_index=k + 1)
        except StepFailure as exc:
            exc.records = records
            exc.states = states
            raise
        t_next = (k + 1) * st.h
        rec = run.record(res.x, t_next, H_prev=records[-1].H, work=res.work,
                         dissipation=res.dissipation, iterations=res.iterations,
                         residual_norm=res.residual_norm, tau=eval_loads(scenario, t_next)[2])
        x = res.x
        records.append(rec)
        if keep_states:
            states.append(x.copy())
        if callback:
            callback(rec)
    if keep_states:
        return records, states
    return records
