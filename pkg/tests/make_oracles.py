"""Regenerate tests/goldens/oracles.json from routes independent of the package solvers.

* shear-layer eigenvalue: the closed form -exp(i pi/4);
* implicit x-growth eigenvalue: mpmath root of z + u_a - sqrt(-eps z) tau at 40 digits;
* energy constant: mpmath quadrature of y u_s'(y)^2 between the profile knots.

Run with ``python3 tests/make_oracles.py``; the file is committed and read by the tests.
"""
import json
from pathlib import Path

import mpmath as mp

from prandtl_lab.shear_flow import ShearFlowParams, build_shear_flow

mp.mp.dps = 40
OUT = Path(__file__).with_name("goldens") / "oracles.json"


def main():
    tau_tilde = -mp.exp(1j * mp.pi / 4)
    data = {"tau_tilde": [float(tau_tilde.real), float(tau_tilde.imag)]}

    flow = build_shear_flow(ShearFlowParams.wide_cap())
    tau = mp.sqrt(abs(flow.curvature) / 2) * tau_tilde
    ua = mp.mpf(flow.u_a)
    omegas = {}
    for eps in ("1e-2", "2.5e-3", "6.25e-4"):
        e = mp.mpf(eps)
        z = mp.findroot(lambda z: z + ua - mp.sqrt(-e * z) * tau, -ua)
        om = 1 / z
        omegas[eps] = [float(om.real), float(om.imag)]
    data["wide_cap_omega_bvp"] = omegas

    constants = {}
    for name, params in (("default", ShearFlowParams()), ("wide_cap", ShearFlowParams.wide_cap()),
                         ("thin_cap", ShearFlowParams.thin_cap())):
        f = build_shear_flow(params)
        edges = sorted({p.start for p in f.pieces} | {f.M})
        integral = sum(mp.quad(lambda y: y * mp.mpf(f(float(y), 1)) ** 2, [lo, hi])
                       for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo)
        sup = max(params.crit_value, params.far_field_U)
        constants[name] = float(sup + integral)
    data["energy_constant"] = constants
    OUT.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
