"""Configurable experiments, their outputs and golden-value regression.

Each experiment takes an :class:`ExperimentConfig`, runs the relevant
solvers and returns a :class:`Bundle` holding a JSON-ready summary, CSV
tables and a list of acceptance checks.  ``write_bundle`` puts these in an
output directory; ``compare_goldens`` diffs the summary against stored
reference values.

Numbers in CSV bodies are written with 12 significant digits so that two
runs with the same configuration produce identical files.
"""
from __future__ import annotations

import copy
import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ._numerics import line_fit
from . import bvp_march, dispersion, ivp_evolution, quasimode, shear_flow, shear_layer
from .errors import ConfigInvalid, MissingGolden

EXPERIMENTS = ("tau-solve", "dispersion-sweep", "quasimode-residual", "ivp-scaling",
               "bvp-uniqueness")

PRESETS = {
    "default": shear_flow.ShearFlowParams,
    "wide_cap": shear_flow.ShearFlowParams.wide_cap,
    "thin_cap": shear_flow.ShearFlowParams.thin_cap,
}

DEFAULT_FLOW = {
    "tau-solve": "wide_cap",
    "dispersion-sweep": "wide_cap",
    "quasimode-residual": "thin_cap",
    "ivp-scaling": "wide_cap",
    "bvp-uniqueness": "wide_cap",
}

DEFAULT_KNOBS = {
    "tau-solve": {"truncation_Z": 8.0, "collocation_n": 120, "tol": 1e-10,
                  "jump_tol": 1e-6, "collocation_tol": 1e-6},
    "dispersion-sweep": {"eps_list": [1e-2, 2.5e-3, 6.25e-4], "tol": 1e-11},
    "quasimode-residual": {"eps_list": [1e-6, 5e-7, 2.5e-7], "orders": [1, 2],
                           "n_points": 65536},
    "ivp-scaling": {"k_list": [64, 256, 1024], "n_points": 4096, "T_factor": 3.0,
                    "cfl": 0.25, "order": 2, "zero_k_list": [0, 1, 64], "zero_T": 0.2},
    "bvp-uniqueness": {"eps": 1e-2, "X": 2.0, "dx": 0.0025, "n_points": 1024,
                       "steady_X": 1.0, "zero_m_list": [0, 1, 4, 16], "zero_X": 1.0,
                       "zero_dx": 0.01, "corpus_sizes": [16, 32], "corpus_points": 4001},
}

# documented ranges: (lower, upper) inclusive, applied elementwise to lists
RANGES = {
    "truncation_Z": (4.0, 14.0), "collocation_n": (20, 400), "tol": (1e-15, 1e-6),
    "jump_tol": (1e-12, 1e-2), "collocation_tol": (1e-14, 1e-2),
    "eps_list": (1e-9, 0.1), "eps": (1e-6, 0.1), "orders": (1, 4),
    "n_points": (256, 1 << 18), "k_list": (1, 1 << 14), "zero_k_list": (0, 1 << 14),
    "T_factor": (0.1, 20.0), "cfl": (1e-3, 2.0), "order": (1, 4), "zero_T": (0.0, 10.0),
    "X": (0.0, 20.0), "dx": (1e-5, 0.5), "steady_X": (0.0, 20.0),
    "zero_m_list": (0, 10000), "zero_X": (0.0, 20.0), "zero_dx": (1e-5, 0.5),
    "corpus_sizes": (1, 4096), "corpus_points": (101, 1 << 16),
}

SIG_DIGITS = 12


@dataclass
class ExperimentConfig:
    experiment: str
    flow: dict = field(default_factory=dict)   # {"preset": name} and/or parameter overrides
    knobs: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "out"

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "flow": copy.deepcopy(self.flow),
                "knobs": copy.deepcopy(self.knobs), "seed": self.seed, "out_dir": self.out_dir}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigInvalid("config must be a mapping")
        unknown = set(data) - {"experiment", "flow", "knobs", "seed", "out_dir"}
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in data:
            raise ConfigInvalid("config needs an 'experiment' entry")
        cfg = cls(experiment=data["experiment"], flow=dict(data.get("flow", {})),
                  knobs=dict(data.get("knobs", {})), seed=data.get("seed", 0),
                  out_dir=data.get("out_dir", "out"))
        cfg.validate()
        return cfg

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigInvalid(f"config is not valid JSON: {err}") from err
        return cls.from_dict(data)

    def resolved_knobs(self) -> dict:
        knobs = copy.deepcopy(DEFAULT_KNOBS[self.experiment])
        knobs.update(self.knobs)
        return knobs

    def flow_params(self) -> shear_flow.ShearFlowParams:
        overrides = dict(self.flow)
        preset = overrides.pop("preset", DEFAULT_FLOW[self.experiment])
        base = PRESETS[preset]()
        values = base.to_dict()
        values.update({k: float(v) for k, v in overrides.items()})
        return shear_flow.ShearFlowParams(**values)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigInvalid(f"unknown experiment {self.experiment!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigInvalid("seed must be a non-negative integer")
        preset = self.flow.get("preset", DEFAULT_FLOW[self.experiment])
        if preset not in PRESETS:
            raise ConfigInvalid(f"unknown flow preset {preset!r}")
        fields = set(shear_flow.ShearFlowParams().to_dict())
        for key, val in self.flow.items():
            if key == "preset":
                continue
            if key not in fields:
                raise ConfigInvalid(f"unknown flow parameter {key!r}")
            if not isinstance(val, (int, float)) or isinstance(val, bool) or not np.isfinite(val):
                raise ConfigInvalid(f"flow parameter {key!r} must be a finite number")
        allowed = DEFAULT_KNOBS[self.experiment]
        for key, val in self.knobs.items():
            if key not in allowed:
                raise ConfigInvalid(f"knob {key!r} does not apply to {self.experiment}")
            lo, hi = RANGES[key]
            items = val if isinstance(val, list) else [val]
            if isinstance(allowed[key], list) and not isinstance(val, list):
                raise ConfigInvalid(f"knob {key!r} must be a list")
            if isinstance(val, list) and not val:
                raise ConfigInvalid(f"knob {key!r} must not be empty")
            for item in items:
                if not isinstance(item, (int, float)) or isinstance(item, bool):
                    raise ConfigInvalid(f"knob {key!r} must be numeric")
                if not (lo <= item <= hi):
                    raise ConfigInvalid(f"knob {key!r}={item!r} outside [{lo:g}, {hi:g}]")
        try:
            shear_flow.build_shear_flow(self.flow_params())
        except Exception as err:  # infeasible parameters are a configuration problem
            raise ConfigInvalid(f"flow parameters are infeasible: {err}") from err


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.loads(Path(path).read_text())


@dataclass
class Check:
    criterion: int
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        self.passed = bool(self.passed)


@dataclass
class Bundle:
    experiment: str
    config: dict
    summary: dict
    tables: dict = field(default_factory=dict)   # name -> (header, rows)
    checks: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def report(self) -> str:
        lines = [f"experiment: {self.experiment}"]
        for c in self.checks:
            lines.append(f"criterion {c.criterion} ({c.name}): "
                         f"{'PASS' if c.passed else 'FAIL'}: {c.detail}")
        return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.{SIG_DIGITS - 1}e}"


def _c(z) -> dict:
    return {"re": float(np.real(z)), "im": float(np.imag(z))}


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_bundle(bundle: Bundle, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in sorted(bundle.tables.items()):
        text = ",".join(header) + "\n"
        text += "".join(",".join(_fmt(v) for v in row) + "\n" for row in rows)
        (out / f"{name}.csv").write_text(text)
    payload = {"experiment": bundle.experiment, "config": bundle.config,
               "summary": bundle.summary, "timings_s": bundle.timings,
               "checks": [c.__dict__ for c in bundle.checks], "passed": bundle.passed}
    (out / "summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default))
    (out / "report.txt").write_text(bundle.report())
    return out


# ------------------------------------------------------------------ shared

_PROFILE_CACHE: dict = {}


def layer_profile(truncation_Z: float = 8.0, tol: float = 1e-10) -> shear_layer.ShearLayerProfile:
    """Solved shear-layer profile on the real line, cached per process."""
    key = (float(truncation_Z), float(tol))
    if key not in _PROFILE_CACHE:
        _PROFILE_CACHE[key] = shear_layer.solve_tau(truncation_Z=truncation_Z, tol=tol)
    return _PROFILE_CACHE[key]


def _physical_tau(profile, curvature):
    return complex(np.sqrt(abs(curvature) / 2.0) * profile.tau_tilde)


def _monotone_decreasing(vals) -> bool:
    return all(b < a for a, b in zip(vals[:-1], vals[1:]))


# --------------------------------------------------------------- experiments

def run_tau_solve(cfg: ExperimentConfig) -> Bundle:
    kn = cfg.resolved_knobs()
    flow = shear_flow.build_shear_flow(cfg.flow_params())
    t0 = time.perf_counter()
    B = shear_layer.assemble_B(-np.exp(0.25j * np.pi), 1e6)
    B_err = float(np.max(np.abs(B - shear_layer.B_INFINITY)))
    eig = np.sort_complex(np.linalg.eigvals(B))
    expect = np.sort_complex(np.array([1j, -1j]) * np.exp(0.25j * np.pi))
    eig_err = float(np.max(np.abs(eig - expect)))
    t1 = time.perf_counter()
    prof = layer_profile(kn["truncation_Z"], kn["tol"])
    t2 = time.perf_counter()
    colloc, _ = shear_layer.collocation_tau(n=int(kn["collocation_n"]), near=prof.tau_tilde)
    gap = abs(colloc - prof.tau_tilde)
    closed_form = -np.exp(0.25j * np.pi)
    t3 = time.perf_counter()
    vprof = shear_layer.build_V_profiles(prof, flow.curvature, jump_tol=1.0)
    tau = vprof.tau
    targets = {0: -tau, 1: 0.0, 2: -flow.curvature}
    jump_err = {k: abs(vprof.jumps[k] - targets[k]) for k in range(3)}
    summary = {
        "tau_tilde": _c(prof.tau_tilde), "tau": _c(tau), "defect": abs(prof.defect),
        "collocation_tau_tilde": _c(colloc), "cross_validation_gap": gap,
        "closed_form_gap": abs(prof.tau_tilde - closed_form),
        "newton_iterations": len(prof.newton_trace) - 1,
        "B_far_error": B_err, "B_eigenvalue_error": eig_err,
        "jump_errors": {str(k): v for k, v in jump_err.items()},
        "decay_rate_alpha": prof.decay_rate_alpha,
        "curvature": flow.curvature,
    }
    rows = [[float(np.real(z)), float(np.imag(z)), float(np.real(w)), float(np.imag(w))]
            for z, w in zip(vprof.z_grid[::8], vprof.W_tilde[::8])]
    checks = [
        Check(1, "B-matrix asymptotics", B_err < 1e-5 and eig_err < 1e-5,
              f"|B - B_inf| = {B_err:.2e}, eigenvalue error {eig_err:.2e} (tol 1e-5)"),
        Check(2, "shear-layer eigenvalue",
              prof.tau_tilde.imag < 0 and abs(prof.defect) < 1e-10
              and gap < kn["collocation_tol"] and max(jump_err.values()) < kn["jump_tol"],
              f"tau~ = {prof.tau_tilde:.10f}, |defect| = {abs(prof.defect):.1e}, "
              f"collocation gap {gap:.1e}, max jump error {max(jump_err.values()):.1e}"),
    ]
    return Bundle(cfg.experiment, cfg.to_dict(), summary,
                  {"layer_profile": (["re_z", "im_z", "re_W", "im_W"], rows)}, checks,
                  {"B": t1 - t0, "solve_tau": t2 - t1, "collocation": t3 - t2})


def run_dispersion_sweep(cfg: ExperimentConfig) -> Bundle:
    kn = cfg.resolved_knobs()
    flow = shear_flow.build_shear_flow(cfg.flow_params())
    t0 = time.perf_counter()
    tau = _physical_tau(layer_profile(), flow.curvature)
    eps_list = sorted(kn["eps_list"], reverse=True)
    rows, ivp, bvp = [], [], []
    for eps in eps_list:
        omega_b = dispersion.solve_omega_bvp(flow, eps, tau)
        resid = dispersion.omega_bvp_residual(flow, eps, tau, omega_b)
        norm_err = abs((omega_b + 1.0 / flow.u_a) / np.sqrt(eps) + tau / flow.u_a ** 1.5)
        r_ivp = dispersion.find_unstable_eigenvalue(flow, eps, dispersion.IVP, tau=tau,
                                                    tol=kn["tol"])
        r_bvp = dispersion.find_unstable_eigenvalue(flow, eps, dispersion.BVP, tau=tau,
                                                    tol=kn["tol"])
        ivp.append({"eps": eps, "omega": _c(r_ivp.omega), "prediction_error": r_ivp.prediction_error,
                    "defect": r_ivp.defect_norm, "iterations": r_ivp.iterations})
        bvp.append({"eps": eps, "omega_implicit": _c(omega_b), "implicit_residual": resid,
                    "normalized_error": norm_err, "omega_shooting": _c(r_bvp.omega),
                    "defect": r_bvp.defect_norm, "x_growth_rate": r_bvp.omega.imag / eps,
                    "sigma_over_sqrt_eps": r_bvp.sigma / np.sqrt(eps)})
        for r in (r_ivp, r_bvp):
            rows.append([r.variant, eps, r.omega.real, r.omega.imag, r.predicted_omega.real,
                         r.predicted_omega.imag, r.defect_norm, r.sigma])
    summary = {"tau": _c(tau), "sigma": dispersion.growth_rate_sigma(flow, tau),
               "ivp": ivp, "bvp": bvp}
    resid_max = max(b["implicit_residual"] for b in bvp)
    nerr = [b["normalized_error"] for b in bvp]
    perr = [r["prediction_error"] for r in ivp]
    dmax = max(r["defect"] for r in ivp)
    checks = [
        Check(3, "implicit eigenvalue equation", resid_max < 1e-12 and _monotone_decreasing(nerr),
              f"max |F| = {resid_max:.1e}, normalized errors "
              + ", ".join(f"{v:.3e}" for v in nerr)),
        Check(4, "dispersion agreement", _monotone_decreasing(perr) and dmax < 1e-9,
              "IVP |omega - prediction|/sqrt(eps) = " + ", ".join(f"{v:.3e}" for v in perr)
              + f", max defect {dmax:.1e}"),
    ]
    header = ["variant", "epsilon", "re_omega", "im_omega", "re_pred", "im_pred", "defect", "sigma"]
    return Bundle(cfg.experiment, cfg.to_dict(), summary, {"dispersion": (header, rows)},
                  checks, {"total": time.perf_counter() - t0})


def run_quasimode_residual(cfg: ExperimentConfig) -> Bundle:
    kn = cfg.resolved_knobs()
    flow = shear_flow.build_shear_flow(cfg.flow_params())
    t0 = time.perf_counter()
    prof = layer_profile()
    eps_list = sorted(kn["eps_list"], reverse=True)
    sc = shear_layer.physical_scale(flow.curvature)
    rows, per_order = [], {}
    ok_slopes, ok_ratios = True, True
    for n in kn["orders"]:
        R, H = [], {2: [], 3: []}
        for eps in eps_list:
            mode = quasimode.assemble_quasimode(flow, prof, eps, int(n),
                                                n_points=int(kn["n_points"]))
            width = abs(mode.eps_tilde) ** 0.25 * sc
            R.append(quasimode.weighted_sobolev_norm(mode.residual_R, 1.0, 0, mode.y_grid,
                                                     layer_width=width))
            for k in (2, 3):
                H[k].append(quasimode.weighted_sobolev_norm(mode.U_profile, 1.0, k, mode.y_grid))
            rows.append([int(n), eps, R[-1], H[2][-1], H[3][-1], mode.wall_correction])
        slope = line_fit(np.log(eps_list), np.log(R)).slope
        ratios = {k: [H[k][i + 1] / H[k][i] for i in range(len(eps_list) - 1)] for k in (2, 3)}
        ok_slopes &= slope >= n - 0.2
        for k in (2, 3):
            target = 2.0 ** ((k - 1) / 4.0)
            ok_ratios &= all(abs(r / target - 1.0) <= 0.2 for r in ratios[k])
        per_order[str(n)] = {"residual_slope": slope, "residual_norms": R,
                             "H2_ratios": ratios[2], "H3_ratios": ratios[3]}
    detail = "; ".join(
        f"n={n}: slope {v['residual_slope']:.3f}, H2 ratios "
        + "/".join(f"{r:.3f}" for r in v["H2_ratios"]) + ", H3 ratios "
        + "/".join(f"{r:.3f}" for r in v["H3_ratios"])
        for n, v in per_order.items())
    checks = [Check(5, "residual scaling", bool(ok_slopes and ok_ratios), detail)]
    header = ["n", "epsilon", "R_weighted_L2", "U_weighted_H2", "U_weighted_H3", "wall_correction"]
    return Bundle(cfg.experiment, cfg.to_dict(), {"orders": per_order, "eps_list": eps_list},
                  {"quasimode_norms": (header, rows)}, checks,
                  {"total": time.perf_counter() - t0})


def run_ivp_scaling(cfg: ExperimentConfig) -> Bundle:
    kn = cfg.resolved_knobs()
    flow = shear_flow.build_shear_flow(cfg.flow_params())
    t0 = time.perf_counter()
    prof = layer_profile()
    tau = _physical_tau(prof, flow.curvature)
    C_s = shear_flow.energy_constant(flow)
    fits, rows, energy, dt_change = {}, [], {}, {}
    for k in sorted(int(k) for k in kn["k_list"]):
        y, U, _ = ivp_evolution.quasimode_initial_data(flow, prof, k, int(kn["order"]),
                                                       int(kn["n_points"]))
        T = kn["T_factor"] / np.sqrt(k)
        dt = ivp_evolution.stable_dt(flow, k, kn["cfl"])
        traj = ivp_evolution.run_ivp(flow, k, U, T, y=y, dt=dt)
        half = ivp_evolution.run_ivp(flow, k, U, T, y=y, dt=traj.dt / 2)
        dt_change[str(k)] = abs(half.l2[-1] / traj.l2[-1] - 1.0)
        fit = ivp_evolution.measure_growth_rate(traj.norms_history)
        rep = ivp_evolution.energy_monitor(flow, traj, C_s)
        fits[k] = fit
        energy[str(k)] = {"pass_fraction": rep.pass_fraction, "worst_margin": rep.worst_margin,
                          "envelope_ok": rep.envelope_ok}
        rows.append([k, fit.rate, fit.rate / (abs(tau.imag) * np.sqrt(k)), fit.residual,
                     rep.pass_fraction, float(traj.tail_fraction.max())])
    ks = sorted(fits)
    ratios = [fits[b].rate / fits[a].rate for a, b in zip(ks[:-1], ks[1:]) if b == 4 * a]
    normalized = [fits[k].rate / (abs(tau.imag) * np.sqrt(k)) for k in ks]
    slope = float(np.polyfit(np.log(ks), np.log([fits[k].rate for k in ks]), 1)[0]) \
        if len(ks) > 1 else float("nan")
    zero = {}
    for k in kn["zero_k_list"]:
        k = int(k)
        y = np.linspace(0.0, 2.0 * flow.M, 1025)
        dt = min(ivp_evolution.stable_dt(flow, k, kn["cfl"]), 1e-3)
        traj = ivp_evolution.run_ivp(flow, k, np.zeros_like(y), kn["zero_T"], y=y, dt=dt)
        zero[str(k)] = float(np.max(traj.l2))
    summary = {"tau": _c(tau), "C_s": C_s, "rates": {str(k): fits[k].rate for k in ks},
               "normalized_rates": normalized, "ratios_4k": ratios, "sqrt_k_slope": slope,
               "energy": energy, "dt_halving_change": dt_change, "zero_data_sup": zero}
    ok6 = all(1.8 <= r <= 2.2 for r in ratios) and all(0.85 <= v <= 1.15 for v in normalized)
    ok7 = all(e["pass_fraction"] >= 0.999 and e["envelope_ok"] for e in energy.values())
    checks = [
        Check(6, "temporal growth law", ok6,
              "lambda(4k)/lambda(k) = " + ", ".join(f"{r:.3f}" for r in ratios)
              + "; lambda/(|Im tau| sqrt k) = " + ", ".join(f"{v:.3f}" for v in normalized)),
        Check(7, "energy inequality", ok7,
              "; ".join(f"k={k}: {e['pass_fraction'] * 100:.2f}% of steps, envelope "
                        f"{'ok' if e['envelope_ok'] else 'violated'}" for k, e in energy.items())),
        Check(8, "uniqueness (IVP part)", all(v < 1e-12 for v in zero.values()),
              "sup |w| for zero data: " + ", ".join(f"k={k}: {v:.1e}" for k, v in zero.items())),
    ]
    header = ["k", "rate", "rate_over_prediction", "fit_residual", "energy_pass_fraction",
              "max_tail_fraction"]
    return Bundle(cfg.experiment, cfg.to_dict(), summary, {"ivp_rates": (header, rows)},
                  checks, {"total": time.perf_counter() - t0})


def run_bvp_uniqueness(cfg: ExperimentConfig) -> Bundle:
    kn = cfg.resolved_knobs()
    flow = shear_flow.build_shear_flow(cfg.flow_params())
    t0 = time.perf_counter()
    prof = layer_profile()
    tau = _physical_tau(prof, flow.curvature)
    eps = float(kn["eps"])
    m_freq = int(round(1.0 / eps))
    target = dispersion.growth_rate_sigma(flow, tau) / np.sqrt(eps)

    mode = quasimode.assemble_quasimode(flow, prof, eps, 2, variant=dispersion.BVP,
                                        n_points=int(kn["n_points"]))
    y = mode.y_grid
    traj = bvp_march.march_bvp(flow, m_freq, mode.U_profile, kn["X"], kn["dx"], y=y)
    rate, r2 = bvp_march.fit_x_growth(traj)
    steady = bvp_march.march_bvp(flow, 0, mode.U_profile, kn["steady_X"], kn["dx"], y=y)
    steady_rate, _ = bvp_march.fit_x_growth(steady)

    zero = {}
    yz = np.linspace(0.0, 2.0 * flow.M, 513)
    for m in kn["zero_m_list"]:
        tz = bvp_march.march_bvp(flow, int(m), np.zeros_like(yz), kn["zero_X"], kn["zero_dx"], y=yz)
        zero[str(int(m))] = float(np.max(tz.u_sup))

    yc = np.linspace(0.0, flow.M, int(kn["corpus_points"]))
    hardy = {}
    for size in kn["corpus_sizes"]:
        corpus = {**bvp_march.analytic_corpus(yc, flow.M),
                  **bvp_march.random_corpus(yc, flow.M, int(size), seed=cfg.seed)}
        rep = bvp_march.hardy_lemma_check(flow, corpus, yc)
        hardy[str(int(size))] = {"C_H1": rep.C_H1, "C_H2_outer": rep.C_H2_outer,
                                 "C_H1_individual": rep.C_H1_individual,
                                 "round_trip": rep.round_trip_max}
    sizes = sorted(int(s) for s in kn["corpus_sizes"])
    stable = all(abs(hardy[str(b)]["C_H1"] / hardy[str(a)]["C_H1"] - 1.0) <= 0.2
                 for a, b in zip(sizes[:-1], sizes[1:]) if b == 2 * a)
    trip = max(h["round_trip"] for h in hardy.values())

    summary = {"epsilon": eps, "m": m_freq, "x_growth_rate": rate, "fit_r2": r2,
               "sigma_over_sqrt_eps": target, "rate_ratio": rate / target,
               "steady_rate": steady_rate, "zero_data_sup": zero, "hardy": hardy}
    rows = [[x, a, b] for x, a, b in zip(traj.xs, traj.u_h1, traj.Lu_h2)]
    checks = [
        Check(8, "uniqueness (BVP part)", all(v < 1e-12 for v in zero.values()),
              "sup |u| for zero data: " + ", ".join(f"m={m}: {v:.1e}" for m, v in zero.items())),
        Check(9, "L round trip and Hardy constant", trip < 1e-10 and stable,
              f"round trip {trip:.1e}; C = "
              + ", ".join(f"{hardy[str(s)]['C_H1']:.4f} ({s} splines)" for s in sizes)),
        Check(10, "spatial growth and steady contrast",
              abs(rate / target - 1.0) <= 0.2 and steady_rate <= 0.05 * target,
              f"x-rate {rate:.4f} vs sigma/sqrt(eps) {target:.4f} (ratio {rate / target:.3f}); "
              f"steady rate {steady_rate:.4f} (cap {0.05 * target:.4f})"),
    ]
    return Bundle(cfg.experiment, cfg.to_dict(), summary,
                  {"bvp_stations": (["x", "u_h1", "Lu_h2"], rows)}, checks,
                  {"total": time.perf_counter() - t0})


RUNNERS = {
    "tau-solve": run_tau_solve,
    "dispersion-sweep": run_dispersion_sweep,
    "quasimode-residual": run_quasimode_residual,
    "ivp-scaling": run_ivp_scaling,
    "bvp-uniqueness": run_bvp_uniqueness,
}


def run_experiment(cfg: ExperimentConfig) -> Bundle:
    cfg.validate()
    np.random.seed(cfg.seed)
    try:
        return RUNNERS[cfg.experiment](cfg)
    except ConfigInvalid:
        raise
    except Exception as err:
        err.args = (f"[{cfg.experiment}] {err.args[0] if err.args else ''}",) + err.args[1:]
        raise


# ------------------------------------------------------------------ goldens

def _flatten(obj, prefix=""):
    out = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.update(_flatten(v, f"{prefix}{k}."))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            out.update(_flatten(v, f"{prefix}{i}."))
    elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
        out[prefix[:-1]] = float(obj)
    return out


@dataclass
class GoldenDiff:
    field: str
    expected: float
    actual: float
    rel_diff: float
    rtol: float
    atol: float

    @property
    def ok(self) -> bool:
        return abs(self.actual - self.expected) <= self.atol + self.rtol * abs(self.expected)


@dataclass
class DiffReport:
    diffs: list

    @property
    def passed(self) -> bool:
        return all(d.ok for d in self.diffs)

    def lines(self):
        return [f"{'ok  ' if d.ok else 'FAIL'} {d.field}: expected {d.expected:.12g}, "
                f"got {d.actual:.12g} (rel {d.rel_diff:.2e}, rtol {d.rtol:g})" for d in self.diffs]


def golden_path(experiment: str) -> Path:
    return Path(str(resources.files("prandtl_lab") / "goldens" / f"{experiment}.json"))


def load_goldens(experiment: str, store=None) -> dict:
    path = Path(store) / f"{experiment}.json" if store is not None else golden_path(experiment)
    if not path.exists():
        raise MissingGolden(f"no golden file for {experiment} at {path}")
    return json.loads(path.read_text())


def compare_goldens(bundle: Bundle, goldens: dict) -> DiffReport:
    """Relative diffs of the bundle summary against ``goldens``.

    ``goldens`` maps dotted summary paths to {"value", "rtol", "atol"}.
    A golden field absent from the bundle raises :class:`MissingGolden`.
    """
    flat = _flatten(bundle.summary)
    diffs = []
    for key, entry in sorted(goldens.items()):
        if key not in flat:
            raise MissingGolden(f"field {key!r} is missing from the {bundle.experiment} summary")
        exp, act = float(entry["value"]), flat[key]
        rel = abs(act - exp) / abs(exp) if exp != 0 else abs(act)
        diffs.append(GoldenDiff(key, exp, act, rel, float(entry.get("rtol", 1e-8)),
                                float(entry.get("atol", 0.0))))
    return DiffReport(diffs)


def bless(bundle: Bundle, fields: dict, path) -> Path:
    """Store the current values of ``fields`` (path -> (rtol, atol)) as goldens."""
    flat = _flatten(bundle.summary)
    data = {}
    for key, (rtol, atol) in sorted(fields.items()):
        if key not in flat:
            raise MissingGolden(f"field {key!r} is missing from the {bundle.experiment} summary")
        data[key] = {"value": flat[key], "rtol": rtol, "atol": atol}
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return Path(path)


# summary fields stored by ``bless`` with their (rtol, atol); iterative
# solves are compared loosely, closed-form quantities tightly
GOLDEN_FIELDS = {
    "tau-solve": {
        "tau_tilde.re": (1e-9, 0.0), "tau_tilde.im": (1e-9, 0.0),
        "tau.re": (1e-9, 0.0), "tau.im": (1e-9, 0.0),
        "collocation_tau_tilde.re": (1e-8, 0.0), "collocation_tau_tilde.im": (1e-8, 0.0),
        "decay_rate_alpha": (1e-9, 0.0),
    },
    "dispersion-sweep": {
        "sigma": (1e-9, 0.0),
        **{f"bvp.{i}.omega_implicit.{p}": (1e-10, 0.0) for i in range(3) for p in ("re", "im")},
        **{f"ivp.{i}.omega.{p}": (1e-8, 0.0) for i in range(3) for p in ("re", "im")},
        **{f"bvp.{i}.omega_shooting.{p}": (1e-8, 0.0) for i in range(3) for p in ("re", "im")},
    },
    "quasimode-residual": {
        **{f"orders.{n}.residual_slope": (1e-6, 0.0) for n in (1, 2)},
        **{f"orders.{n}.H{k}_ratios.{i}": (1e-6, 0.0) for n in (1, 2) for k in (2, 3)
           for i in range(2)},
        **{f"orders.{n}.residual_norms.{i}": (1e-6, 1e-300) for n in (1, 2) for i in range(3)},
    },
    "ivp-scaling": {
        **{f"rates.{k}": (1e-6, 0.0) for k in (64, 256, 1024)},
        "sqrt_k_slope": (1e-6, 0.0), "C_s": (1e-10, 0.0),
    },
    "bvp-uniqueness": {
        "x_growth_rate": (1e-6, 0.0), "steady_rate": (1e-6, 0.0),
        "sigma_over_sqrt_eps": (1e-9, 0.0),
        "hardy.16.C_H1": (1e-6, 0.0), "hardy.32.C_H1": (1e-6, 0.0),
    },
}


def bless_experiment(bundle: Bundle, path=None) -> Path:
    return bless(bundle, GOLDEN_FIELDS[bundle.experiment],
                 golden_path(bundle.experiment) if path is None else path)
