"""Synthetic NMI sweeps over the noise level of one layer.

Every replicate ``r`` at every grid value uses seed ``base_seed + r`` for
graph sampling, restarts and the spectral k-means, so grid points share
their random labels (common random numbers). Replicates run in a joblib
pool when ``threads > 1``; aggregation is sequential and ordered, so the
output does not depend on the pool size.
"""

import logging
import math
import traceback

import numpy as np
from joblib import Parallel, delayed

from ..baselines import SpectralOptions, single_layer_vb, spectral_clustering
from ..generator import sample
from ..inference import elbo_violations, run
from ..selection import nmi

__all__ = ["run_sweep", "summarize", "SUMMARY_COLUMNS", "REPLICATE_COLUMNS"]

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("method", "q_prime", "mean_nmi", "stderr", "n_rep")
REPLICATE_COLUMNS = ("method", "q_prime", "replicate", "seed", "layer", "nmi",
                     "elbo_drops", "error")


def _one_replicate(spec, q_prime, r):
    """All methods on one sampled graph; returns replicate rows."""
    seed = spec.sweep.base_seed + r
    cfg = spec.generator_config(q_prime)
    rows = []

    def record(method, layer, value, error="", drops=""):
        rows.append({"method": method, "q_prime": q_prime, "replicate": r, "seed": seed,
                     "layer": layer, "nmi": value, "elbo_drops": drops, "error": error})

    try:
        graph, truth, _ = sample(cfg, np.random.default_rng(seed))
    except Exception as exc:  # recorded, not fatal
        for m in spec.methods:
            record(m, 0, math.nan, f"sample: {exc}")
        return rows
    opts = spec.inference_options(seed)
    for method in spec.methods:
        try:
            if method == "joint_vb":
                fits = [run(graph, cfg.K, cfg.K_total, opts)]
                preds = fits[0].labels.labels
            elif method == "single_vb":
                fits = [single_layer_vb(A, k, opts, fam)
                        for A, k, fam in zip(graph.layers, cfg.K_total, graph.families)]
                preds = [f.labels.labels[0] for f in fits]
            else:
                fits = []
                preds = [spectral_clustering(A, SpectralOptions(k, kmeans_restarts=spec.spectral_restarts,
                                                                seed=seed))
                         for A, k in zip(graph.layers, cfg.K_total)]
        except Exception as exc:  # recorded, not fatal
            logger.debug("%s failed at q'=%s r=%d:\n%s", method, q_prime, r, traceback.format_exc())
            record(method, 0, math.nan, f"{type(exc).__name__}: {exc}")
            continue
        # ELBO decreases over all restarts, a diagnostic of the update rule
        drops = sum(len(elbo_violations(tr)) for f in fits for tr in f.restart_traces) \
            if fits else ""
        for l, (g, t) in enumerate(zip(preds, truth.labels), 1):
            record(method, l, nmi(t, g), drops=drops)
    return rows


def summarize(rows, methods, grid, eval_layer):
    """Mean and standard error of the eval layer's NMI per (method, grid value)."""
    out = []
    for m in methods:
        for q in grid:
            vals = np.array([row["nmi"] for row in rows
                             if row["method"] == m and row["q_prime"] == q
                             and row["layer"] == eval_layer and not row["error"]])
            k = len(vals)
            mean = float(vals.mean()) if k else math.nan
            se = float(vals.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan
            out.append({"method": m, "q_prime": q, "mean_nmi": mean, "stderr": se, "n_rep": k})
    return out


def run_sweep(spec, threads=1):
    """Run every (grid value, replicate) task; returns ``(summary, replicate_rows)``."""
    if spec.mode != "synthetic_sweep":
        raise ValueError("run_sweep needs a synthetic_sweep spec")
    sw = spec.sweep
    tasks = [(q, r) for q in sw.values for r in range(sw.replicates)]
    if threads > 1:
        chunks = Parallel(n_jobs=threads)(delayed(_one_replicate)(spec, q, r) for q, r in tasks)
    else:
        chunks = []
        for q, r in tasks:
            chunks.append(_one_replicate(spec, q, r))
            logger.info("q'=%.3f replicate %d done", q, r)
    rows = [row for chunk in chunks for row in chunk]
    failed = sum(1 for row in rows if row["error"])
    if failed:
        logger.warning("%d method runs failed; see the error column", failed)
    return summarize(rows, spec.methods, sw.values, sw.eval_layer), rows
