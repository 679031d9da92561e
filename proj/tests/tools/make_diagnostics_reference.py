"""Regenerates tests/data/diagnostics_reference.json.

Shapiro-Wilk values come from scipy.stats.shapiro and Breusch-Pagan values
from statsmodels het_breuschpagan (studentized and classic forms).
"""
import json
import pathlib

import numpy as np
from scipy import stats
from statsmodels.stats.diagnostic import het_breuschpagan

rng = np.random.default_rng(20240611)
cases = []
sizes = [3, 4, 5, 7, 11, 12, 20, 30, 50, 60, 94, 100, 150, 200, 300, 500, 60, 60, 94, 1000]
for i, n in enumerate(sizes):
    kind = ["normal", "exponential", "uniform", "t3", "lognormal"][i % 5]
    if kind == "normal":
        x = rng.normal(size=n)
    elif kind == "exponential":
        x = rng.exponential(size=n)
    elif kind == "uniform":
        x = rng.uniform(size=n)
    elif kind == "t3":
        x = rng.standard_t(3, size=n)
    else:
        x = rng.lognormal(sigma=0.6, size=n)
    w, p = stats.shapiro(x)
    case = {"name": f"{kind}_{n}", "sample": x.tolist(), "shapiro_w": float(w), "shapiro_p": float(p)}
    if n >= 12:
        k = 1 + i % 3
        X = rng.normal(size=(n, k))
        scale = 1.0 + (0.8 * np.abs(X[:, 0]) if i % 2 else 0.0)
        resid = rng.normal(size=n) * scale
        exog = np.column_stack([np.ones(n), X])
        lm, lm_p, _, _ = het_breuschpagan(resid, exog, robust=True)
        lm_c, lm_c_p, _, _ = het_breuschpagan(resid, exog, robust=False)
        case.update({"bp_residuals": resid.tolist(), "bp_regressors": X.tolist(),
                     "bp_lm": float(lm), "bp_p": float(lm_p),
                     "bp_classic_lm": float(lm_c), "bp_classic_p": float(lm_c_p)})
    cases.append(case)

out = pathlib.Path(__file__).resolve().parents[1] / "data" / "diagnostics_reference.json"
out.write_text(json.dumps({"cases": cases}, indent=1))
print(f"wrote {len(cases)} cases to {out}")
