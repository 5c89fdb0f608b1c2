"""The ten acceptance criteria, each at its stated tolerance.

Every experiment runs once per session.  Each test re-derives its verdict
from the numbers in the experiment summary (not from the runner's own
check) and records a one-line PASS/FAIL result that is printed at the end
of the session.
"""
import numpy as np
import pytest

from prandtl_lab import experiments as ex

RESULTS = {}


def record(criterion, ok, detail):
    RESULTS[criterion] = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(RESULTS[criterion])
    assert ok, detail


@pytest.fixture(scope="module")
def bundles():
    return {}


def bundle(bundles, name):
    if name not in bundles:
        bundles[name] = ex.run_experiment(ex.ExperimentConfig(name))
    return bundles[name]


def runner_verdict(b, criterion):
    return all(c.passed for c in b.checks if c.criterion == criterion)


def test_criterion_01_B_matrix_asymptotics(bundles):
    b = bundle(bundles, "tau-solve")
    s = b.summary
    ok = s["B_far_error"] < 1e-5 and s["B_eigenvalue_error"] < 1e-5
    assert ok == runner_verdict(b, 1)
    record(1, ok, f"|B - B_inf| {s['B_far_error']:.1e}, eigenvalues {s['B_eigenvalue_error']:.1e}")


def test_criterion_02_shear_layer_eigenvalue(bundles):
    b = bundle(bundles, "tau-solve")
    s = b.summary
    jumps = max(s["jump_errors"].values())
    ok = (s["tau_tilde"]["im"] < 0 and s["defect"] < 1e-10
          and s["cross_validation_gap"] < 1e-6 and jumps < 1e-6)
    assert ok == runner_verdict(b, 2)
    record(2, ok, f"tau~ = {s['tau_tilde']['re']:.10f}{s['tau_tilde']['im']:+.10f}i, "
                  f"defect {s['defect']:.1e}, collocation gap {s['cross_validation_gap']:.1e}, "
                  f"jumps {jumps:.1e}")


def test_criterion_03_implicit_eigenvalue_equation(bundles):
    b = bundle(bundles, "dispersion-sweep")
    rows = sorted(b.summary["bvp"], key=lambda r: -r["eps"])
    resid = max(r["implicit_residual"] for r in rows)
    errs = [r["normalized_error"] for r in rows]
    ok = resid < 1e-12 and all(y < x for x, y in zip(errs, errs[1:]))
    assert [r["eps"] for r in rows] == [1e-2, 2.5e-3, 6.25e-4]
    assert ok == runner_verdict(b, 3)
    record(3, ok, f"|F| {resid:.1e}, normalized errors " + ", ".join(f"{e:.3e}" for e in errs))


def test_criterion_04_dispersion_agreement(bundles):
    b = bundle(bundles, "dispersion-sweep")
    rows = sorted(b.summary["ivp"], key=lambda r: -r["eps"])
    errs = [r["prediction_error"] for r in rows]
    defect = max(r["defect"] for r in rows)
    ok = all(y < x for x, y in zip(errs, errs[1:])) and defect < 1e-9
    assert ok == runner_verdict(b, 4)
    record(4, ok, "prediction errors " + ", ".join(f"{e:.3e}" for e in errs)
           + f", defect {defect:.1e}")


def test_criterion_05_residual_scaling(bundles):
    b = bundle(bundles, "quasimode-residual")
    eps = b.summary["eps_list"]
    assert all(np.isclose(eps[i + 1], eps[i] / 2) for i in range(len(eps) - 1))
    ok, parts = True, []
    for n in ("1", "2"):
        o = b.summary["orders"][n]
        slope = np.polyfit(np.log(eps), np.log(o["residual_norms"]), 1)[0]
        ok &= slope >= int(n) - 0.2
        for k in (2, 3):
            target = 2 ** ((k - 1) / 4)
            ok &= all(abs(r / target - 1) <= 0.2 for r in o[f"H{k}_ratios"])
        parts.append(f"n={n} slope {slope:.3f} H2 {o['H2_ratios'][0]:.3f} "
                     f"H3 {o['H3_ratios'][0]:.3f}/{o['H3_ratios'][1]:.3f}")
    assert ok == runner_verdict(b, 5)
    record(5, bool(ok), "; ".join(parts))


def test_criterion_06_temporal_growth_law(bundles):
    b = bundle(bundles, "ivp-scaling")
    s = b.summary
    rates = {int(k): v for k, v in s["rates"].items()}
    assert sorted(rates) == [64, 256, 1024]
    growth = abs(s["tau"]["im"])
    ratios = [rates[256] / rates[64], rates[1024] / rates[256]]
    norm = [rates[k] / (growth * np.sqrt(k)) for k in sorted(rates)]
    ok = all(1.8 <= r <= 2.2 for r in ratios) and all(0.85 <= v <= 1.15 for v in norm)
    assert ok == runner_verdict(b, 6)
    record(6, ok, "ratios " + ", ".join(f"{r:.3f}" for r in ratios)
           + "; normalized " + ", ".join(f"{v:.3f}" for v in norm))


def test_criterion_07_energy_inequality(bundles):
    b = bundle(bundles, "ivp-scaling")
    energy = b.summary["energy"]
    ok = all(e["pass_fraction"] >= 0.999 for e in energy.values())
    envelope = all(e["envelope_ok"] for e in energy.values())
    assert runner_verdict(b, 7) == (ok and envelope)
    record(7, ok, ", ".join(f"k={k}: {e['pass_fraction'] * 100:.2f}% of steps"
                            for k, e in energy.items()))


def test_criterion_08_uniqueness(bundles):
    ivp = bundle(bundles, "ivp-scaling").summary["zero_data_sup"]
    bvp = bundle(bundles, "bvp-uniqueness").summary["zero_data_sup"]
    assert sorted(map(int, ivp)) == [0, 1, 64] and sorted(map(int, bvp)) == [0, 1, 4, 16]
    ok = max(ivp.values()) < 1e-12 and max(bvp.values()) < 1e-12
    record(8, ok, f"IVP sup {max(ivp.values()):.1e}, BVP sup {max(bvp.values()):.1e}")


def test_criterion_09_round_trip_and_hardy_constant(bundles):
    b = bundle(bundles, "bvp-uniqueness")
    h = b.summary["hardy"]
    trip = max(v["round_trip"] for v in h.values())
    c16, c32 = h["16"]["C_H1"], h["32"]["C_H1"]
    ok = trip < 1e-10 and abs(c32 / c16 - 1) <= 0.2
    assert ok == runner_verdict(b, 9)
    record(9, ok, f"round trip {trip:.1e}; C = {c16:.4f} -> {c32:.4f} under doubling")


def test_criterion_10_spatial_growth_and_steady_contrast(bundles):
    b = bundle(bundles, "bvp-uniqueness")
    s = b.summary
    ok = (abs(s["x_growth_rate"] / s["sigma_over_sqrt_eps"] - 1) <= 0.2
          and s["steady_rate"] <= 0.05 * s["sigma_over_sqrt_eps"])
    assert ok == runner_verdict(b, 10)
    record(10, ok, f"x-rate {s['x_growth_rate']:.4f} vs {s['sigma_over_sqrt_eps']:.4f}, "
                   f"steady {s['steady_rate']:.4f}")
