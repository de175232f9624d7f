"""End-to-end orchestration of the Monte Carlo study and the data modes.

A simulation run fixes one finite population per scenario (same seed, so the
populations share every draw and differ only in the outcome mean function),
then repeats K times: draw the reference and non-probability samples,
replicate B times, synthesize L populations per replicate, estimate every
requested method on every (scenario, selection-spec, prediction-spec,
outcome) combination, and combine across the (B, L) grid.  Results land in
an append-only per-iteration CSV plus a metrics summary.

Every random draw comes from a generator keyed by logical indices (stage,
iteration, replicate, synthesis), never by execution order, so outputs are
byte-identical for any worker count and runs can resume mid-way.
"""
from __future__ import annotations

import csv
import json
import logging
import multiprocessing
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__ as version
from . import rng as streams
from .config import METHOD_NAMES, SimConfig, resolve_workers
from .errors import ConfigError, DataError, EstimationError
from .estimation import (
    DR_METHODS,
    CellSpec,
    CombinedEstimate,
    cell_propensity,
    combine_values,
    estimate_cell,
    hajek_mean,
    model_based_mean,
    aipw_mean,
    prediction_design,
    unweighted_mean,
    weighted_mean,
)
from .metrics import METRICS_CSV_HEADER, compute_metrics
from .polya import polya_synthesize
from .population import FinitePopulation, generate_population
from .sampling import (
    NonProbSample,
    ProbabilitySample,
    design_ignoring_replicate,
    poisson_indices,
    rao_wu_bootstrap,
    reference_from_indices,
    reference_indices,
    srs_bootstrap,
)
from .smoothing import SmootherSpec, fit_partially_linear_batch, predict

log = logging.getLogger("npinfer")

ESTIMATES_FILE = "estimates.csv"
SUMMARY_FILE = "summary.csv"
MANIFEST_FILE = "manifest.json"
DONE_FILE = "iterations.done"

ESTIMATES_CSV_HEADER = ("k", "scenario", "outcome", "qr_spec", "pm_spec", "method",
                        "point", "variance", "ci_low", "ci_high", "df", "b_used", "truth")

BASELINE_METHODS = ("UW", "UW_R", "FW", "FW_A")
PROPENSITY_METHODS = DR_METHODS + ("IPSW",)
ESTIMABLE_ON_DATA = ("UW", "IPSW") + DR_METHODS

_SMOOTHER_KIND = {"GPPP": "GP", "PSPP": "PSPLINE", "LWP": "LWP", "AIPW": "PLAIN"}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _spec_labels(cfg: SimConfig, which: str) -> tuple[str, ...]:
    return tuple("true" if flag else "false" for flag in cfg.spec_grid(which))


def _outcome_list(cfg_outcome: str) -> tuple[str, ...]:
    if cfg_outcome == "both":
        return ("continuous", "binary")
    return (cfg_outcome,)


def build_populations(cfg: SimConfig) -> dict[str, FinitePopulation]:
    return {s: generate_population(cfg, cfg.seed, scenario=s) for s in cfg.scenarios}


def _outcome_column(pop: FinitePopulation, outcome: str) -> np.ndarray:
    return pop.y_cont if outcome == "continuous" else pop.y_bin


def run_iteration(pops: dict[str, FinitePopulation], cfg: SimConfig, k: int) -> list[tuple]:
    """All combined estimates of one Monte Carlo iteration, as output rows."""
    pop0 = next(iter(pops.values()))
    scenarios = cfg.scenarios
    outcomes = _outcome_list(cfg.outcome)
    qr_labels = _spec_labels(cfg, "qr")
    pm_labels = _spec_labels(cfg, "pm")
    B, L, N, H = cfg.B, cfg.L, cfg.N, cfg.H
    m_psus = cfg.H * cfg.m_h

    sa_idx = poisson_indices(pop0, streams.stream(cfg.seed, streams.NONPROB_DRAW, k))
    if sa_idx.size < 2:
        raise DataError("the non-probability draw selected fewer than two units")
    ref_idx = reference_indices(pop0, cfg.m_h, cfg.n_hj,
                                streams.stream(cfg.seed, streams.REFERENCE_DRAW, k))
    ref = reference_from_indices(pop0, ref_idx, outcome=None)

    x_sa = pop0.x[sa_idx]
    str_sa = pop0.stratum[sa_idx]
    logw_sa = np.log(pop0.w_ref[sa_idx])
    pi_true_sa = pop0.pi_a[sa_idx]
    y_sa = {(s, o): _outcome_column(pops[s], o)[sa_idx] for s in scenarios for o in outcomes}
    y_ref = {(s, o): _outcome_column(pops[s], o)[ref_idx] for s in scenarios for o in outcomes}

    wanted_prop = [m for m in cfg.methods if m in PROPENSITY_METHODS]
    wanted_base = [m for m in cfg.methods if m in BASELINE_METHODS]
    dr_wanted = [m for m in wanted_prop if m != "IPSW"]

    grids = {(s, o, qr, pm, meth): np.full((B, L), np.nan)
             for s in scenarios for o in outcomes
             for qr in qr_labels for pm in pm_labels for meth in wanted_prop}
    base_grids = {(s, o, meth): np.full((B, 1), np.nan)
                  for s in scenarios for o in outcomes for meth in wanted_base}

    base_points: dict[tuple, float] = {}
    for s in scenarios:
        for o in outcomes:
            ys, yr = y_sa[(s, o)], y_ref[(s, o)]
            if "UW" in wanted_base:
                base_points[(s, o, "UW")] = unweighted_mean(ys)
            if "FW_A" in wanted_base:
                base_points[(s, o, "FW_A")] = weighted_mean(ys, 1.0 / pi_true_sa)
            if "UW_R" in wanted_base:
                base_points[(s, o, "UW_R")] = unweighted_mean(yr)
            if "FW" in wanted_base:
                base_points[(s, o, "FW")] = weighted_mean(yr, ref.weight)

    aborted = 0
    diagnostics: list[str] = []
    for b in range(B):
        boot_idx = streams.stream(cfg.seed, streams.SAMPLE_BOOT, k, b).integers(
            0, sa_idx.size, size=sa_idx.size)
        if cfg.ignore_design:
            rep = design_ignoring_replicate(ref, N)
        else:
            rep = rao_wu_bootstrap(ref, N, streams.stream(cfg.seed, streams.REFERENCE_BOOT, k, b))

        for s in scenarios:
            for o in outcomes:
                ys_b = y_sa[(s, o)][boot_idx]
                if "UW" in wanted_base:
                    base_grids[(s, o, "UW")][b, 0] = unweighted_mean(ys_b)
                if "FW_A" in wanted_base:
                    base_grids[(s, o, "FW_A")][b, 0] = weighted_mean(
                        ys_b, 1.0 / pi_true_sa[boot_idx])
                if wanted_base and rep.unit_idx is not None:
                    y_rep = _outcome_column(pops[s], o)[rep.unit_idx]
                    if "UW_R" in wanted_base:
                        base_grids[(s, o, "UW_R")][b, 0] = unweighted_mean(y_rep)
                    if "FW" in wanted_base:
                        base_grids[(s, o, "FW")][b, 0] = weighted_mean(y_rep, rep.weight)

        if not wanted_prop:
            continue
        x_sa_b = x_sa[boot_idx]
        str_sa_b = str_sa[boot_idx]
        logw_sa_b = logw_sa[boot_idx]
        for l in range(L):
            try:
                synth = polya_synthesize(
                    rep, N, streams.stream(cfg.seed, streams.POLYA, k, b, l), b, l)
                # denominator = realized synthetic-population total, so the
                # prediction term is an exact weighted mean over the urn
                _fill_cell(grids, cfg, synth, float(synth.total), b, l,
                           x_sa_b, str_sa_b, logw_sa_b, y_sa, boot_idx,
                           scenarios, outcomes, qr_labels, pm_labels,
                           wanted_prop, dr_wanted, H)
            except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
                aborted += 1
                diagnostics.append(f"iteration {k} cell (b={b}, l={l}): {exc}")

    if aborted > 0.05 * B * L:
        detail = "; ".join(diagnostics[:5])
        raise EstimationError(
            f"iteration {k}: {aborted} of {B * L} cells aborted (limit 5%): {detail}")
    for msg in diagnostics:
        log.warning("%s", msg)

    rows: list[tuple] = []
    for s in scenarios:
        for o in outcomes:
            truth = pops[s].true_mean(o)
            for qr in qr_labels:
                for pm in pm_labels:
                    for meth in cfg.methods:
                        if meth in BASELINE_METHODS:
                            combined = combine_values(
                                base_grids[(s, o, meth)], B, 1, m_psus, H,
                                method=meth,
                                point_override=base_points[(s, o, meth)],
                                ci_reference=cfg.ci_reference)
                        else:
                            combined = combine_values(
                                grids[(s, o, qr, pm, meth)], B, L, m_psus, H,
                                method=meth, ci_reference=cfg.ci_reference)
                        rows.append((k, s, o, qr, pm, meth,
                                     combined.point, combined.variance,
                                     combined.ci_low, combined.ci_high,
                                     combined.df, combined.b_used, truth))
    return rows


def _fill_cell(grids, cfg: SimConfig, synth, N_hat: float, b: int, l: int,
               x_sa_b, str_sa_b, logw_sa_b, y_sa, boot_idx,
               scenarios, outcomes, qr_labels, pm_labels,
               wanted_prop, dr_wanted, H: int) -> None:
    """Estimates for one (b, l) cell across the full spec/scenario/outcome grid.

    The stacked propensity fit depends only on the selection design, the
    prediction designs only on the prediction spec, and the smoother
    factorizations only on both - so responses for all scenarios ride through
    each smoother fit as one batch.
    """
    for qr in qr_labels:
        spec_sel = CellSpec(qr_true=qr == "true", mode="simulate", h_strata=H)
        sa_view = NonProbSample(x=x_sa_b, y=np.zeros(x_sa_b.shape[0]),
                                stratum=str_sa_b, logw=logw_sa_b)
        prop = cell_propensity(sa_view, synth, spec_sel)
        pi_sa, pi_sy = prop.pi_hat_sample, prop.pi_hat
        log_pi_sa, log_pi_sy = np.log(pi_sa), np.log(pi_sy)

        if "IPSW" in wanted_prop:
            for s in scenarios:
                for o in outcomes:
                    value = hajek_mean(y_sa[(s, o)][boot_idx], pi_sa)
                    for pm in pm_labels:
                        grids[(s, o, qr, pm, "IPSW")][b, l] = value

        if not dr_wanted:
            continue
        for pm in pm_labels:
            spec_pm = CellSpec(qr_true=qr == "true", pm_true=pm == "true",
                               mode="simulate", h_strata=H)
            X_sa_pm = prediction_design(x_sa_b, str_sa_b, logw_sa_b, spec_pm)
            X_sy_pm = prediction_design(synth.x, synth.stratum, synth.logw, spec_pm)
            for o in outcomes:
                link = "identity" if o == "continuous" else "logit"
                y_cols = [y_sa[(s, o)][boot_idx] for s in scenarios]
                for meth in dr_wanted:
                    kind = _SMOOTHER_KIND[meth]
                    if kind in ("GP", "PSPLINE"):
                        g_fit, g_new = log_pi_sa, log_pi_sy
                    elif kind == "LWP":
                        g_fit, g_new = pi_sa, pi_sy
                    else:
                        g_fit = g_new = None
                    fits = fit_partially_linear_batch(
                        SmootherSpec(kind=kind, link=link), y_cols, X_sa_pm, g=g_fit)
                    for j, s in enumerate(scenarios):
                        yhat_sa = predict(fits[j], X_sa_pm, g_fit)
                        yhat_sy = predict(fits[j], X_sy_pm, g_new)
                        if meth == "AIPW":
                            value = aipw_mean(y_cols[j], yhat_sa, pi_sa, yhat_sy,
                                              synth.multiplicity, N_hat)
                        else:
                            value = model_based_mean(y_cols[j], yhat_sa, yhat_sy,
                                                     synth.multiplicity, N_hat)
                        grids[(s, o, qr, pm, meth)][b, l] = value


_POOL_CFG: SimConfig | None = None
_POOL_POPS: dict[str, FinitePopulation] | None = None


def _pool_init(cfg: SimConfig) -> None:
    global _POOL_CFG, _POOL_POPS
    _POOL_CFG = cfg
    _POOL_POPS = build_populations(cfg)


def _pool_task(k: int) -> tuple[int, list[tuple]]:
    return k, run_iteration(_POOL_POPS, _POOL_CFG, k)


def _read_done(path: Path) -> set[int]:
    if not path.exists():
        return set()
    done = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            done.add(int(line))
    return done


def _compact_estimates(est_path: Path, done: set[int]) -> None:
    """Drop rows of incomplete iterations left behind by an interrupted run."""
    if not est_path.exists():
        return
    if not done:
        est_path.unlink()
        return
    with open(est_path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.readlines()
    if not lines:
        return
    keep = [lines[0]]
    for line in lines[1:]:
        head = line.split(",", 1)[0]
        if head and int(head) in done:
            keep.append(line)
    with open(est_path, "w", encoding="utf-8", newline="") as fh:
        fh.writelines(keep)


def _append_rows(est_path: Path, rows: list[tuple], write_header: bool) -> None:
    with open(est_path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if write_header:
            writer.writerow(ESTIMATES_CSV_HEADER)
        for row in rows:
            k, s, o, qr, pm, meth, point, var, lo, hi, df, b_used, truth = row
            writer.writerow((k, s, o, qr, pm, meth, _fmt(point), _fmt(var),
                             _fmt(lo), _fmt(hi), df, b_used, _fmt(truth)))
        fh.flush()


def _mark_done(done_path: Path, k: int) -> None:
    with open(done_path, "a", encoding="utf-8") as fh:
        fh.write(f"{k}\n")
        fh.flush()


def write_summary(cfg: SimConfig, out_dir: Path) -> Path:
    """Reduce the per-iteration estimates to the metrics summary CSV."""
    est_path = out_dir / ESTIMATES_FILE
    # spec columns hold the literal strings "true"/"false"; stop pandas from
    # promoting them to booleans.  The round_trip parser makes the summary a
    # function of the file bytes alone, not of the fast parser's last ulp.
    frame = pd.read_csv(est_path, dtype={"qr_spec": str, "pm_spec": str},
                        float_precision="round_trip")
    summary_path = out_dir / SUMMARY_FILE
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_CSV_HEADER)
        for s in cfg.scenarios:
            for o in _outcome_list(cfg.outcome):
                for qr in _spec_labels(cfg, "qr"):
                    for pm in _spec_labels(cfg, "pm"):
                        for meth in cfg.methods:
                            part = frame[(frame["scenario"] == s) & (frame["outcome"] == o)
                                         & (frame["qr_spec"].astype(str) == qr)
                                         & (frame["pm_spec"].astype(str) == pm)
                                         & (frame["method"] == meth)]
                            if part.empty:
                                continue
                            part = part.sort_values("k")
                            truth = float(part["truth"].iloc[0])
                            summary = compute_metrics(
                                part["point"].to_numpy(), part["variance"].to_numpy(),
                                part["ci_low"].to_numpy(), part["ci_high"].to_numpy(),
                                truth)
                            writer.writerow((meth, s, qr, pm, _fmt(cfg.gamma1), o,
                                             _fmt(summary["rbias"]), _fmt(summary["rmse"]),
                                             _fmt(summary["crci"]), _fmt(summary["rlci"]),
                                             _fmt(summary["rse"]), int(summary["k"])))
    return summary_path


def run_simulation(cfg: SimConfig, out_dir: str, workers: int | None = None) -> dict:
    """Execute the full K-iteration study; resumable and order-deterministic."""
    t_start = time.time()
    workers = resolve_workers(workers, cfg.workers)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    est_path = out / ESTIMATES_FILE
    done_path = out / DONE_FILE

    done = _read_done(done_path)
    done = {k for k in done if 0 <= k < cfg.K}
    _compact_estimates(est_path, done)
    pending = [k for k in range(cfg.K) if k not in done]
    log.info("simulation: %d iterations (%d already done), %d workers",
             cfg.K, len(done), workers)

    write_header = not est_path.exists()

    def flush_ready(buffer: dict[int, list[tuple]], next_k: list[int]) -> None:
        nonlocal write_header
        while next_k and next_k[0] in buffer:
            k = next_k.pop(0)
            _append_rows(est_path, buffer.pop(k), write_header)
            write_header = False
            _mark_done(done_path, k)

    order = sorted(pending)
    buffer: dict[int, list[tuple]] = {}
    if pending:
        if workers <= 1 or len(pending) == 1:
            pops = build_populations(cfg)
            for k in order.copy():
                rows = run_iteration(pops, cfg, k)
                buffer[k] = rows
                flush_ready(buffer, order)
        else:
            # fork keeps the parent's single-threaded BLAS state and makes the
            # initializer globals pattern safe
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=workers, initializer=_pool_init,
                                     initargs=(cfg,), mp_context=ctx) as pool:
                futures = {pool.submit(_pool_task, k) for k in pending}
                while futures:
                    ready, futures = wait(futures, return_when=FIRST_COMPLETED)
                    for fut in ready:
                        k, rows = fut.result()
                        buffer[k] = rows
                    flush_ready(buffer, order)
    if order or buffer:
        raise EstimationError("iteration scheduling finished with unwritten results")

    summary_path = write_summary(cfg, out)
    elapsed = time.time() - t_start
    manifest = {
        "mode": "simulate",
        "version": version,
        "config": asdict(cfg),
        "workers": workers,
        "iterations": cfg.K,
        "elapsed_seconds": elapsed,
        "seed_scheme": {
            "root_seed": cfg.seed,
            "stream": "philox(seed_sequence([root, stage, *indices]))",
            "stages": streams.STAGE_TAGS,
        },
        "outputs": {"estimates": est_path.name, "summary": summary_path.name},
    }
    with open(out / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("simulation finished in %.1f s", elapsed)
    return manifest


# --- estimate / synthesize on user-supplied files ---------------------------

_RESERVED_COLUMNS = {"id", "stratum", "psu", "weight", "y"}


def _load_reference_csv(path: str) -> tuple[ProbabilitySample, list[str]]:
    frame = pd.read_csv(path, float_precision="round_trip")
    for col in ("stratum", "psu", "weight"):
        if col not in frame.columns:
            raise DataError(f"reference file {path} lacks required column {col!r}")
    covariates = [c for c in frame.columns if c not in _RESERVED_COLUMNS]
    if not covariates:
        raise DataError(f"reference file {path} has no covariate columns")
    used = ["stratum", "psu", "weight"] + covariates
    if frame[used].isna().any().any():
        raise DataError(f"reference file {path} contains missing values")
    weight = frame["weight"].to_numpy(dtype=float)
    if np.any(~np.isfinite(weight)) or np.any(weight <= 0.0):
        raise DataError(f"reference file {path} has non-positive weights")
    sample = ProbabilitySample(
        stratum=frame["stratum"].to_numpy(),
        psu=frame["psu"].to_numpy(),
        weight=weight,
        x=frame[covariates].to_numpy(dtype=float),
        unit_idx=np.arange(len(frame), dtype=np.int64),
    )
    return sample, covariates


def _load_sample_csv(path: str, covariates: list[str]) -> NonProbSample:
    frame = pd.read_csv(path, float_precision="round_trip")
    if "y" not in frame.columns:
        raise DataError(f"sample file {path} lacks the outcome column 'y'")
    missing = [c for c in covariates if c not in frame.columns]
    if missing:
        raise DataError(f"sample file {path} lacks covariate columns {missing} "
                        "shared with the reference file")
    used = covariates + ["y"]
    if frame[used].isna().any().any():
        raise DataError(f"sample file {path} contains missing values")
    return NonProbSample(
        x=frame[covariates].to_numpy(dtype=float),
        y=frame["y"].to_numpy(dtype=float),
        unit_idx=np.arange(len(frame), dtype=np.int64),
    )


def _estimate_settings(values: dict) -> dict:
    methods = values.get("methods", METHOD_NAMES)
    if tuple(methods) == METHOD_NAMES:
        methods = ESTIMABLE_ON_DATA
    refused = [m for m in methods if m not in ESTIMABLE_ON_DATA]
    if refused:
        raise ConfigError(
            f"methods {refused} need simulation ground truth and are not "
            "available on user data")
    outcome = values.get("outcome", "continuous")
    if outcome == "both":
        raise ConfigError("estimate mode handles a single outcome column; "
                          "set outcome to continuous or binary")
    return {
        "B": int(values["B"]),
        "L": int(values["L"]),
        "seed": int(values["seed"]),
        "N": int(values["N"]) if "N" in values else None,
        "methods": tuple(methods),
        "outcome": outcome,
        "ci_reference": values.get("ci_reference", "t"),
        "workers": values.get("workers"),
    }


def run_estimate(reference_path: str, sample_path: str, cfg_values: dict,
                 out_dir: str) -> list[CombinedEstimate]:
    """One full estimation pass on user-supplied reference and sample files."""
    t_start = time.time()
    settings = _estimate_settings(cfg_values)
    ref, covariates = _load_reference_csv(reference_path)
    sa = _load_sample_csv(sample_path, covariates)
    B, L, seed = settings["B"], settings["L"], settings["seed"]
    link = "identity" if settings["outcome"] == "continuous" else "logit"
    if link == "logit" and not np.all(np.isin(sa.y, (0.0, 1.0))):
        raise DataError("binary outcome requested but y is not 0/1")

    N = settings["N"]
    if N is None:
        N = int(round(float(ref.weight.sum())))
    if N <= ref.n:
        raise DataError(f"population size {N} does not exceed the reference "
                        f"sample size {ref.n}")

    H_file = int(np.unique(ref.stratum).shape[0])
    m_file = ref.total_psus()
    spec = CellSpec(link=link, methods=settings["methods"], mode="external")

    prop_methods = [m for m in settings["methods"] if m in PROPENSITY_METHODS]
    grids = {meth: np.full((B, L), np.nan) for meth in prop_methods}
    uw_grid = np.full((B, 1), np.nan)
    for b in range(B):
        sa_b = srs_bootstrap(sa, streams.stream(seed, streams.SAMPLE_BOOT, 0, b))
        rep = rao_wu_bootstrap(ref, N, streams.stream(seed, streams.REFERENCE_BOOT, 0, b))
        uw_grid[b, 0] = unweighted_mean(sa_b.y)
        for l in range(L):
            synth = polya_synthesize(rep, N,
                                     streams.stream(seed, streams.POLYA, 0, b, l), b, l)
            values = estimate_cell(sa_b, synth, float(synth.total), spec)
            for meth, value in values.items():
                grids[meth][b, l] = value

    results: list[CombinedEstimate] = []
    for meth in settings["methods"]:
        if meth == "UW":
            results.append(combine_values(uw_grid, B, 1, m_file, H_file, method="UW",
                                          point_override=unweighted_mean(sa.y),
                                          ci_reference=settings["ci_reference"]))
        else:
            results.append(combine_values(grids[meth], B, L, m_file, H_file,
                                          method=meth,
                                          ci_reference=settings["ci_reference"]))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    est_path = out / ESTIMATES_FILE
    with open(est_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("method", "point", "variance", "ci_low", "ci_high",
                         "df", "b_used"))
        for r in results:
            writer.writerow((r.method, _fmt(r.point), _fmt(r.variance),
                             _fmt(r.ci_low), _fmt(r.ci_high), r.df, r.b_used))
    manifest = {
        "mode": "estimate",
        "version": version,
        "reference": str(reference_path),
        "sample": str(sample_path),
        "covariates": covariates,
        "N": N,
        "B": B,
        "L": L,
        "seed": seed,
        "outcome": settings["outcome"],
        "methods": list(settings["methods"]),
        "strata": H_file,
        "psus": m_file,
        "elapsed_seconds": time.time() - t_start,
    }
    with open(out / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return results


def run_synthesize(reference_path: str, N: int, B: int, L: int, out_dir: str,
                   seed: int = 0) -> list[Path]:
    """Export B x L synthetic populations built from a reference file."""
    ref, covariates = _load_reference_csv(reference_path)
    if N <= ref.n:
        raise DataError(f"population size {N} does not exceed the reference "
                        f"sample size {ref.n}")
    if B < 1 or L < 1:
        raise ConfigError("replicate counts must be positive")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for b in range(B):
        rep = rao_wu_bootstrap(ref, N, streams.stream(seed, streams.REFERENCE_BOOT, 0, b))
        for l in range(L):
            synth = polya_synthesize(rep, N,
                                     streams.stream(seed, streams.POLYA, 0, b, l), b, l)
            path = out / f"synthetic_b{b:03d}_l{l:03d}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(tuple(covariates) + ("multiplicity",))
                x = np.atleast_2d(synth.x)
                for i in range(synth.n_rows):
                    writer.writerow(tuple(_fmt(v) for v in x[i])
                                    + (int(synth.multiplicity[i]),))
            written.append(path)
    manifest = {
        "mode": "synthesize",
        "version": version,
        "reference": str(reference_path),
        "N": int(N),
        "B": B,
        "L": L,
        "seed": seed,
        "files": [p.name for p in written],
    }
    with open(out / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return written
