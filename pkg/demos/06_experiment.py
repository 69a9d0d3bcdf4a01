"""
Batch experiments from a config file
====================================

Run the harness on ``experiment.toml`` and write per-run records, a summary
and the eps-versus-eps_hat plot data.  The same thing from a shell::

    sbg experiment --config demos/experiment.toml --out results
"""

import json
import os

from sbg import harness

here = os.path.dirname(os.path.abspath(__file__))
cfg = harness.load_config(os.path.join(here, "experiment.toml"), runs=5, instances=3)
records, summary = harness.run_experiment(cfg)
print(json.dumps(summary, indent=2))

series, _ = harness.eps_table(cfg.replace(instances=2, runs=2, round_cap=5000), [3, 5])
for p in series:
    print(f"K={p.k_eps}: eps={p.eps:.3f}, eps_hat={p.eps_hat:.4f}")

out = os.path.join(os.getcwd(), "results")
print("wrote", harness.emit(records, summary, out, series))
