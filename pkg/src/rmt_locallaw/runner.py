"""Experiment runner: JSON configs, seeded parallel execution, CSV/JSON
outputs, run manifests and the aggregate report, plus the `rmt` CLI.

Output bytes are a pure function of (config, seed, artifact version): per-job
seeds are derived statelessly, results merge in job order, and files are
written to a temporary name and renamed atomically.

Exit codes: 0 all acceptance clauses pass, 1 acceptance failure,
2 config error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import dbm, locallaw, moments, stats
from .ensembles import EntryDistribution, band_profile, catalog_distribution, sample_matrix, wigner_profile
from .errors import ConfigError, ConvergenceError, NotFoundError, RMTError, SolverError, StepError
from .linalg import eigh
from .parallel import default_workers, pmap
from .seeding import derive_seed, generator

__all__ = ["ExperimentConfig", "RunManifest", "parse_config", "run", "report", "main", "ARTIFACT_VERSION"]

ARTIFACT_VERSION = "0.1.0"

_SHAPES = {
    "box": lambda x: 1.0 if 0 <= x < 1 else 0.0,
    "triangle": lambda x: max(0.0, 1.0 - abs(x)),
    "gaussian": lambda x: math.exp(-x * x),
}

_COMMON_KEYS = {"experiment", "seed", "workers", "thresholds"}

_EXPERIMENT_KEYS = {
    "locallaw-scan": {"ensemble", "sizes", "e", "eta_power", "eta_coeff", "samples", "variant", "log_alpha"},
    "rigidity": {"ensemble", "n", "samples"},
    "counting": {"ensemble", "n", "samples", "a_exponent"},
    "edge": {"ensemble", "n", "samples", "epsilon"},
    "dbm-gaps": {"ensemble", "n", "samples", "times", "kappa_cut"},
    "moments-match": {"grid_count", "gammas", "mc_draws", "report_sweep_m4_max"},
    "green-compare": {"ensemble", "distribution_b", "n", "samples", "e_values", "eta_factor", "functional"},
    "largedev": {"distribution", "n", "trials", "coefficient_case"},
    "zmoments": {"ensemble", "n", "z", "samples", "p_max", "log_alpha"},
    "correlations": {"ensemble", "distribution_b", "n", "samples", "kappa_cut"},
}

_THRESHOLD_KEYS = {
    "locallaw-scan": {"median_meta_m_err_max", "flatness_ratio_max", "median_sqrt_meta_lambda_d_max"},
    "rigidity": {"exponent"},
    "counting": {"coeff", "power", "min_pass_fraction"},
    "edge": set(),
    "dbm-gaps": {"ks_max", "min_gaps"},
    "moments-match": {"m3_tol", "m4_gap_coeff", "mc_sigma"},
    "green-compare": {"zscore_max"},
    "largedev": {"rate_max"},
    "zmoments": {"ratio_max"},
    "correlations": {"ks_max"},
}

_DEFAULT_THRESHOLDS = {
    "locallaw-scan": {"median_meta_m_err_max": 10.0, "flatness_ratio_max": 4.0, "median_sqrt_meta_lambda_d_max": 10.0},
    "rigidity": {"exponent": -1.0 / 7.0},
    "counting": {"coeff": 10.0, "power": 0.1, "min_pass_fraction": 0.95},
    "edge": {},
    "dbm-gaps": {"ks_max": 0.03, "min_gaps": 0},
    "moments-match": {"m3_tol": 1e-12, "m4_gap_coeff": 4.0, "mc_sigma": 5.0},
    "green-compare": {"zscore_max": 3.0},
    "largedev": {"rate_max": 0.01},
    "zmoments": {"ratio_max": 1.0},
    "correlations": {"ks_max": 0.05},
}

_DEFAULTS = {
    "locallaw-scan": {"e": 0.0, "eta_power": -0.8, "eta_coeff": 1.0, "variant": "D", "log_alpha": 1.0},
    "counting": {"a_exponent": 1},
    "edge": {"epsilon": 0.05},
    "dbm-gaps": {"times": [0.0, 0.1, 1.0], "kappa_cut": 0.5},
    "moments-match": {"grid_count": 100, "gammas": [0.001, 0.01, 0.1], "mc_draws": 1000000, "report_sweep_m4_max": 10.0},
    "green-compare": {"e_values": [0.0], "eta_factor": 1.0, "functional": "trace"},
    "largedev": {"coefficient_case": "offdiagonal"},
    "zmoments": {"p_max": 2, "log_alpha": 1.0},
    "correlations": {"kappa_cut": 0.5},
}

_ENSEMBLE_KEYS = {"profile", "distribution", "beta", "band_w", "band_shape"}


@dataclass
class ExperimentConfig:
    """Validated experiment configuration with defaults filled in."""

    experiment: str
    seed: int
    workers: int | None
    params: dict
    thresholds: dict

    def to_json(self) -> str:
        # workers is a parallelism hint, not semantics: excluded so output
        # bytes stay a pure function of (config, seed, artifact version).
        doc = dict(self.params)
        doc["experiment"] = self.experiment
        doc["seed"] = self.seed
        doc["thresholds"] = self.thresholds
        return json.dumps(doc, sort_keys=True)

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.to_json() == other.to_json()


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment config; unknown keys are errors."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    exp = doc.get("experiment")
    if exp not in _EXPERIMENT_KEYS:
        raise ConfigError(f"unknown or missing experiment tag {exp!r}; known: {sorted(_EXPERIMENT_KEYS)}")
    allowed = _COMMON_KEYS | _EXPERIMENT_KEYS[exp]
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} at config root (experiment {exp})")
    if "seed" not in doc or not isinstance(doc["seed"], int):
        raise ConfigError("config requires an integer 'seed'")
    if "ensemble" in doc:
        ens = doc["ensemble"]
        if not isinstance(ens, dict):
            raise ConfigError("'ensemble' must be an object")
        for key in ens:
            if key not in _ENSEMBLE_KEYS:
                raise ConfigError(f"unknown key {key!r} at ensemble")
        if ens.get("beta", 2) not in (1, 2):
            raise ConfigError("ensemble.beta must be 1 or 2")
        _resolve_distribution(ens.get("distribution", "gaussian"))  # fail fast on bad names
    thresholds = dict(_DEFAULT_THRESHOLDS[exp])
    for key, val in (doc.get("thresholds") or {}).items():
        if key not in _THRESHOLD_KEYS[exp]:
            raise ConfigError(f"unknown key {key!r} at thresholds (experiment {exp})")
        thresholds[key] = val
    params = dict(_DEFAULTS.get(exp, {}))
    for key, val in doc.items():
        if key not in _COMMON_KEYS:
            params[key] = val
    workers = doc.get("workers")
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        raise ConfigError("'workers' must be a positive integer")
    return ExperimentConfig(experiment=exp, seed=doc["seed"], workers=workers, params=params, thresholds=thresholds)


def _resolve_distribution(spec) -> EntryDistribution:
    if isinstance(spec, str):
        try:
            return catalog_distribution(spec)
        except NotFoundError:
            raise ConfigError(f"unresolved distribution name {spec!r}") from None
    if isinstance(spec, dict):
        if "matched" in spec:
            m = spec["matched"]
            law = moments.match_four_moments(moments.MomentTarget(m["m3"], m["m4"]), m["gamma"])
            return law.to_distribution()
        return EntryDistribution.from_json(json.dumps({"schema": "entry-distribution", **spec}))
    raise ConfigError(f"cannot interpret distribution spec {spec!r}")


def _build_profile(ens: dict, n: int):
    kind = ens.get("profile", "wigner")
    if kind == "wigner":
        return wigner_profile(n)
    if kind == "band":
        shape_name = ens.get("band_shape", "box")
        if shape_name not in _SHAPES:
            raise ConfigError(f"unknown band shape {shape_name!r}")
        return band_profile(n, int(ens.get("band_w", max(1, n // 8))), _SHAPES[shape_name])
    raise ConfigError(f"unknown profile kind {kind!r}")


def _ensemble(cfg: ExperimentConfig, n: int):
    ens = cfg.params.get("ensemble", {})
    profile = _build_profile(ens, n)
    dist = _resolve_distribution(ens.get("distribution", "gaussian"))
    beta = ens.get("beta", 2)
    return profile, dist, beta


@dataclass
class RunManifest:
    """Run record: config echo, digests of every output, pass/fail clauses."""

    experiment: str
    config: dict
    artifact_version: str
    wall_clock_s: float
    digests: dict
    acceptance: dict
    statistics: dict
    headline: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(self.acceptance.values())

    def to_json(self) -> str:
        return json.dumps(
            {
                "experiment": self.experiment,
                "config": self.config,
                "artifact_version": self.artifact_version,
                "wall_clock_s": self.wall_clock_s,
                "digests": self.digests,
                "acceptance": self.acceptance,
                "statistics": self.statistics,
                "headline": self.headline,
            },
            sort_keys=True,
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        doc = json.loads(text)
        return cls(
            experiment=doc["experiment"],
            config=doc["config"],
            artifact_version=doc["artifact_version"],
            wall_clock_s=doc["wall_clock_s"],
            digests=doc["digests"],
            acceptance=doc["acceptance"],
            statistics=doc["statistics"],
            headline=doc.get("headline", {}),
        )


def _atomic_write(path: str, data: str | bytes) -> None:
    mode = "wb" if isinstance(data, bytes) else "w"
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-rmt-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _digest(data: str | bytes) -> str:
    blob = data.encode() if isinstance(data, str) else data
    return hashlib.sha256(blob).hexdigest()


def _csv_text(header_schema: str, columns, rows) -> str:
    import io

    buf = io.StringIO()
    buf.write(f"# rmt-locallaw v1 schema={header_schema}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# --- experiment bodies ------------------------------------------------------
# Each returns (files: name -> text, statistics: dict, acceptance: dict,
# headline: dict); `run` handles writing, digesting and the manifest.


def _exp_locallaw_scan(cfg: ExperimentConfig):
    pr = cfg.params
    thr = cfg.thresholds
    sizes = sorted(pr["sizes"])
    all_rows = []
    medians_meta = {}
    medians_ld = {}
    for n in sizes:
        profile, dist, beta = _ensemble(cfg, n)
        eta = pr["eta_coeff"] * n ** pr["eta_power"]
        z = complex(pr["e"], eta)
        scan = locallaw.local_law_scan(
            profile, dist, beta, pr["samples"], [z], derive_seed(cfg.seed, "scan", n),
            variant=pr["variant"], log_alpha=pr["log_alpha"], workers=cfg.workers,
        )
        all_rows.extend(scan.rows)
        medians_meta[n] = float(np.median([r["meta_m_err"] for r in scan.rows]))
        medians_ld[n] = float(
            np.median([math.sqrt(profile.m_param * r["eta"]) * r["lambda_d"] for r in scan.rows])
        )
    cols = ["n", "E", "eta", "sample_seed", "m_err_norm", "lambda_d_norm", "lambda_o_norm",
            "upsilon_max", "mainseeq_residual"]
    files = {"locallaw-scan.csv": _csv_text("locallaw-scan", cols, [[r[c] for c in cols] for r in all_rows])}
    flatness = medians_meta[sizes[-1]] / medians_meta[sizes[0]] if len(sizes) > 1 else 1.0
    statistics = {
        "median_meta_m_err": medians_meta,
        "median_sqrt_meta_lambda_d": medians_ld,
        "flatness_ratio": flatness,
    }
    acceptance = {
        "median_meta_m_err": all(v < thr["median_meta_m_err_max"] for v in medians_meta.values()),
        "flatness": flatness < thr["flatness_ratio_max"],
        "median_sqrt_meta_lambda_d": all(v < thr["median_sqrt_meta_lambda_d_max"] for v in medians_ld.values()),
    }
    headline = {
        "statistic": f"max median M*eta*|m-msc| = {max(medians_meta.values()):.3g}, flatness {flatness:.3g}",
        "threshold": f"< {thr['median_meta_m_err_max']}, flatness < {thr['flatness_ratio_max']}",
    }
    return files, statistics, acceptance, headline


def _per_sample_eigenvalues(cfg: ExperimentConfig, n: int, tag: str):
    profile, dist, beta = _ensemble(cfg, n)

    def _job(si):
        sm = sample_matrix(profile, dist, beta, derive_seed(cfg.seed, tag, si))
        return eigh(sm, compute_vectors=False).eigenvalues

    return pmap(_job, list(range(cfg.params["samples"])), cfg.workers)


def _exp_rigidity(cfg: ExperimentConfig):
    n = cfg.params["n"]
    thr_value = float(n ** cfg.thresholds["exponent"])
    values = [locallaw.rigidity_stat(lam).total for lam in _per_sample_eigenvalues(cfg, n, "rigidity")]
    rows = [[si, v] for si, v in enumerate(values)]
    files = {"rigidity.csv": _csv_text("rigidity", ["sample_index", "sum_sq_dev"], rows)}
    statistics = {"values": values, "max": max(values), "threshold": thr_value}
    acceptance = {"all_below_threshold": all(v < thr_value for v in values)}
    headline = {"statistic": f"max sum_j (lambda_j-gamma_j)^2 = {max(values):.4g}", "threshold": f"< {thr_value:.4g}"}
    return files, statistics, acceptance, headline


def _exp_counting(cfg: ExperimentConfig):
    n = cfg.params["n"]
    thr = cfg.thresholds
    thr_value = thr["coeff"] * n ** thr["power"] / n
    a_exp = cfg.params["a_exponent"]
    values = [locallaw.counting_gap(lam, a_exp) for lam in _per_sample_eigenvalues(cfg, n, "counting")]
    passed = sum(v < thr_value for v in values)
    rows = [[si, v, v < thr_value] for si, v in enumerate(values)]
    files = {"counting.csv": _csv_text("counting", ["sample_index", "sup_stat", "passed"], rows)}
    statistics = {"values": values, "pass_fraction": passed / len(values), "threshold": thr_value}
    acceptance = {"pass_fraction": passed / len(values) >= thr["min_pass_fraction"]}
    headline = {
        "statistic": f"{passed}/{len(values)} samples with sup |fn-n_sc|*kappa^{a_exp} < {thr_value:.4g}",
        "threshold": f">= {thr['min_pass_fraction']:.0%}",
    }
    return files, statistics, acceptance, headline


def _exp_edge(cfg: ExperimentConfig):
    n = cfg.params["n"]
    eps = cfg.params["epsilon"]
    reports = [locallaw.edge_check(lam, eps) for lam in _per_sample_eigenvalues(cfg, n, "edge")]
    rows = [[si, r.passed, r.lower_margin, r.upper_margin] for si, r in enumerate(reports)]
    files = {"edge.csv": _csv_text("edge", ["sample_index", "passed", "lower_margin", "upper_margin"], rows)}
    statistics = {
        "threshold": reports[0].threshold,
        "min_margin": min(min(r.lower_margin, r.upper_margin) for r in reports),
    }
    acceptance = {"all_contained": all(r.passed for r in reports)}
    headline = {
        "statistic": f"min edge margin {statistics['min_margin']:.4g}",
        "threshold": f"spectrum within +-{reports[0].threshold:.4g}",
    }
    return files, statistics, acceptance, headline


def _exp_dbm_gaps(cfg: ExperimentConfig):
    pr = cfg.params
    n, times, kcut = pr["n"], pr["times"], pr["kappa_cut"]
    profile, dist, beta = _ensemble(cfg, n)
    gauss = catalog_distribution("gaussian")

    def _job(si):
        h0 = sample_matrix(profile, dist, beta, derive_seed(cfg.seed, "h0", si))
        v = sample_matrix(profile, gauss, beta, derive_seed(cfg.seed, "v", si))
        out = []
        for t in times:
            ht = h0 if t == 0 else dbm.flow_interpolate(h0, v, t).ht
            lam = eigh(ht, compute_vectors=False).eigenvalues
            out.append(stats.unfold(lam, kcut).bulk_gaps())
        return out

    per_sample = pmap(_job, list(range(pr["samples"])), cfg.workers)
    pools = [np.concatenate([s[ti] for s in per_sample]) for ti in range(len(times))]
    cdfs = [stats.EmpiricalCDF(pool) for pool in pools]
    ks_matrix = {}
    worst = 0.0
    for a in range(len(times)):
        for b in range(a + 1, len(times)):
            d = stats.ks_distance(cdfs[a], cdfs[b])
            ks_matrix[f"t{times[a]:g}-t{times[b]:g}"] = d
            worst = max(worst, d)
    files = {}
    for ti, t in enumerate(times):
        files[f"dbm-gaps-t{ti}.csv"] = _csv_text(
            f"dbm-gaps-t{t:g}", ["gap"], [[float(g)] for g in np.sort(pools[ti])]
        )
    coeff_residual = max(
        abs(math.exp(-t / 2.0) ** 2 + (-math.expm1(-t)) - 1.0) for t in np.linspace(0.0, 5.0, 101)
    )
    statistics = {
        "pooled_gaps": {f"t{t:g}": int(pools[ti].size) for ti, t in enumerate(times)},
        "ks_matrix": ks_matrix,
        "worst_ks": worst,
        "ou_coefficient_residual": coeff_residual,
    }
    acceptance = {
        "pairwise_ks": worst < cfg.thresholds["ks_max"],
        "pooled_gap_count": all(p.size >= cfg.thresholds["min_gaps"] for p in pools),
        "ou_coefficient_identity": coeff_residual < 1e-15,
    }
    headline = {"statistic": f"worst pairwise gap KS {worst:.4g}", "threshold": f"< {cfg.thresholds['ks_max']}"}
    return files, statistics, acceptance, headline


def moment_target_grid(count: int, gammas) -> list:
    """Frozen feasible (m3, m4) grid where the 4*gamma matching bound is provable.

    For every gamma in `gammas` the exact mismatch slope (moments.m4_gap_slope)
    must satisfy |R| <= 4; intersected with feasibility m4 >= 1 + m3^2 and the
    m4 <= 10 cap, with a 2% interior margin.
    """
    side = max(2, int(math.isqrt(count)))
    targets = []
    for m3 in np.linspace(-1.4, 1.4, side):
        lo = 1.0 + m3 * m3
        hi = 10.0
        for g in gammas:
            c = (3.0 - 3.0 * g + g * g) / (1.0 - g)
            lo = max(lo, (c * m3 * m3 + 6.0 - 3.0 * g - 4.0) / (2.0 - g))
            hi = min(hi, (c * m3 * m3 + 6.0 - 3.0 * g + 4.0) / (2.0 - g))
        if hi <= lo:
            continue
        span = hi - lo
        for frac in np.linspace(0.02, 0.98, side):
            targets.append(moments.MomentTarget(float(m3), float(lo + frac * span)))
    return targets[:count]


def _exp_moments_match(cfg: ExperimentConfig):
    pr = cfg.params
    thr = cfg.thresholds
    gammas = pr["gammas"]
    targets = moment_target_grid(pr["grid_count"], gammas)
    rows = []
    ok_m3 = ok_m4 = ok_mc = True
    rng_idx = 0
    for t in targets:
        for g in gammas:
            law = moments.match_four_moments(t, g)
            m3_err = abs(law.achieved_m3 - t.m3)
            gap = law.m4_gap
            ok_m3 &= m3_err <= thr["m3_tol"]
            ok_m4 &= gap <= thr["m4_gap_coeff"] * g + 1e-12
            mc_ok = True
            if pr["mc_draws"] > 0:
                draws = law.to_distribution().sample(generator(cfg.seed, "mc", rng_idx), pr["mc_draws"])
                for k, target_val in ((3, law.achieved_m3), (4, law.achieved_m4)):
                    est = float(np.mean(draws**k))
                    se = float(np.std(draws**k, ddof=1) / math.sqrt(draws.size))
                    mc_ok &= abs(est - target_val) <= thr["mc_sigma"] * se
            ok_mc &= mc_ok
            rows.append([t.m3, t.m4, g, law.achieved_m3, law.achieved_m4, m3_err, gap, mc_ok])
            rng_idx += 1
    sweep_worst = 0.0
    for m3 in np.linspace(-2.0, 2.0, 9):
        for m4 in np.linspace(1.0 + m3 * m3, pr["report_sweep_m4_max"], 9):
            law = moments.match_four_moments(moments.MomentTarget(float(m3), float(m4)), max(gammas))
            sweep_worst = max(sweep_worst, law.m4_gap / max(gammas))
    files = {
        "moments-match.csv": _csv_text(
            "moments-match",
            ["m3", "m4", "gamma", "achieved_m3", "achieved_m4", "m3_err", "m4_gap", "mc_ok"],
            rows,
        )
    }
    statistics = {
        "targets": len(targets),
        "worst_m4_gap_over_gamma": max(r[6] / r[2] for r in rows),
        "report_sweep_m4_gap_over_gamma": sweep_worst,
    }
    acceptance = {"m3_exact": ok_m3, "m4_within_4gamma": ok_m4, "mc_moments": ok_mc}
    headline = {
        "statistic": f"worst |dm4|/gamma on grid = {statistics['worst_m4_gap_over_gamma']:.3g}",
        "threshold": f"<= {thr['m4_gap_coeff']}",
    }
    return files, statistics, acceptance, headline


def _exp_green_compare(cfg: ExperimentConfig):
    pr = cfg.params
    n = pr["n"]
    profile, dist_a, beta = _ensemble(cfg, n)
    dist_b = _resolve_distribution(pr["distribution_b"])
    eta = pr["eta_factor"] / n
    z_list = [complex(e, eta) for e in pr["e_values"]]
    rep = stats.green_comparison(
        profile, dist_a, dist_b, beta, z_list,
        functional=pr["functional"], n_samples=pr["samples"], seed=cfg.seed, workers=cfg.workers,
    )
    rows = [[str(r["z"]), r["component"], r["diff"], r["stderr"], r["zscore"]] for r in rep.rows]
    files = {
        "green-compare.csv": _csv_text("green-compare", ["z", "component", "diff", "stderr", "zscore"], rows),
        "green-compare.report.json": rep.to_json(),
    }
    statistics = {"moment_mismatch": rep.moment_mismatch, "max_abs_zscore": rep.max_abs_zscore()}
    acceptance = {"difference_within_errors": rep.max_abs_zscore() < cfg.thresholds["zscore_max"]}
    headline = {
        "statistic": f"max |diff|/se = {rep.max_abs_zscore():.3g}, moment mismatch {rep.moment_mismatch['max']:.3g}",
        "threshold": f"< {cfg.thresholds['zscore_max']} se",
    }
    return files, statistics, acceptance, headline


def _exp_largedev(cfg: ExperimentConfig):
    pr = cfg.params
    dist = _resolve_distribution(pr["distribution"])
    res = locallaw.large_deviation_mc(dist, pr["n"], pr["trials"], pr["coefficient_case"], cfg.seed)
    files = {
        "largedev.csv": _csv_text(
            "largedev",
            ["case", "rate", "wilson_low", "wilson_high", "threshold", "trials"],
            [[pr["coefficient_case"], res.rate, res.wilson_low, res.wilson_high, res.threshold, res.trials]],
        )
    }
    statistics = {"rate": res.rate, "wilson": [res.wilson_low, res.wilson_high], "threshold": res.threshold}
    acceptance = {"rate_below_max": res.rate <= cfg.thresholds["rate_max"]}
    headline = {"statistic": f"exceedance rate {res.rate:.3g}", "threshold": f"<= {cfg.thresholds['rate_max']}"}
    return files, statistics, acceptance, headline


def _exp_zmoments(cfg: ExperimentConfig):
    pr = cfg.params
    n = pr["n"]
    profile, dist, beta = _ensemble(cfg, n)
    z = complex(pr["z"][0], pr["z"][1])
    table = locallaw.z_average_moments(
        profile, dist, beta, z, pr["samples"], pr["p_max"], cfg.seed,
        log_alpha=pr["log_alpha"], workers=cfg.workers,
    )
    rows = [[r["p"], r["moment"], r["stderr"], r["bound"], r["ratio"]] for r in table.rows]
    files = {"zmoments.csv": _csv_text("zmoments", ["p", "moment", "stderr", "bound", "ratio"], rows)}
    statistics = {"x_value": table.x_value, "rows": table.rows}
    acceptance = {"p2_ratio_below_max": table.ratio(2) < cfg.thresholds["ratio_max"]}
    headline = {"statistic": f"E|Z-avg|^2 / bound = {table.ratio(2):.3g}", "threshold": f"< {cfg.thresholds['ratio_max']}"}
    return files, statistics, acceptance, headline


def _exp_correlations(cfg: ExperimentConfig):
    pr = cfg.params
    n, kcut = pr["n"], pr["kappa_cut"]
    profile, dist_a, beta = _ensemble(cfg, n)
    dist_b = _resolve_distribution(pr["distribution_b"])

    def _job(args):
        tag, dist, si = args
        sm = sample_matrix(profile, dist, beta, derive_seed(cfg.seed, tag, si))
        lam = eigh(sm, compute_vectors=False).eigenvalues
        return stats.unfold(lam, kcut).bulk_gaps()

    jobs = [("a", dist_a, si) for si in range(pr["samples"])] + [("b", dist_b, si) for si in range(pr["samples"])]
    gaps = pmap(_job, jobs, cfg.workers)
    pool_a = np.concatenate(gaps[: pr["samples"]])
    pool_b = np.concatenate(gaps[pr["samples"]:])
    ks = stats.ks_distance(stats.EmpiricalCDF(pool_a), stats.EmpiricalCDF(pool_b))
    files = {
        "correlations-gaps-a.csv": _csv_text("gap-pool-a", ["gap"], [[float(g)] for g in np.sort(pool_a)]),
        "correlations-gaps-b.csv": _csv_text("gap-pool-b", ["gap"], [[float(g)] for g in np.sort(pool_b)]),
    }
    statistics = {"ks": ks, "gaps_a": int(pool_a.size), "gaps_b": int(pool_b.size)}
    acceptance = {"gap_cdf_ks": ks < cfg.thresholds["ks_max"]}
    headline = {"statistic": f"unfolded bulk gap KS {ks:.4g}", "threshold": f"< {cfg.thresholds['ks_max']}"}
    return files, statistics, acceptance, headline


_EXPERIMENTS = {
    "locallaw-scan": _exp_locallaw_scan,
    "rigidity": _exp_rigidity,
    "counting": _exp_counting,
    "edge": _exp_edge,
    "dbm-gaps": _exp_dbm_gaps,
    "moments-match": _exp_moments_match,
    "green-compare": _exp_green_compare,
    "largedev": _exp_largedev,
    "zmoments": _exp_zmoments,
    "correlations": _exp_correlations,
}


def run(cfg: ExperimentConfig, outdir: str) -> RunManifest:
    """Execute one experiment; write outputs + manifest atomically into outdir."""
    os.makedirs(outdir, exist_ok=True)
    start = time.monotonic()
    files, statistics, acceptance, headline = _EXPERIMENTS[cfg.experiment](cfg)
    summary = json.dumps({"config": json.loads(cfg.to_json()), "statistics": statistics}, sort_keys=True, indent=1)
    files[f"{cfg.experiment}.summary.json"] = summary
    digests = {}
    for name, text in sorted(files.items()):
        _atomic_write(os.path.join(outdir, name), text)
        digests[name] = _digest(text)
    manifest = RunManifest(
        experiment=cfg.experiment,
        config=json.loads(cfg.to_json()),
        artifact_version=ARTIFACT_VERSION,
        wall_clock_s=time.monotonic() - start,
        digests=digests,
        acceptance=acceptance,
        statistics=statistics,
        headline=headline,
    )
    _atomic_write(os.path.join(outdir, f"{cfg.experiment}.manifest.json"), manifest.to_json())
    return manifest


def report(manifests) -> str:
    """Aggregate summary table, one row per experiment manifest."""
    manifests = list(manifests)
    if not manifests:
        raise ConfigError("report needs at least one manifest")
    rows = []
    for m in manifests:
        stat = m.headline.get("statistic") or next(iter(m.statistics.items()), ("", ""))[1]
        thr = m.headline.get("threshold", "")
        rows.append((m.experiment, str(stat), str(thr), "PASS" if m.all_passed else "FAIL", f"{m.wall_clock_s:.1f}s"))
    widths = [max(len(r[i]) for r in rows + [("experiment", "statistic", "threshold", "status", "runtime")]) for i in range(5)]
    lines = []
    header = ("experiment", "statistic", "threshold", "status", "runtime")
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    overall = "PASS" if all(m.all_passed for m in manifests) else "FAIL"
    lines.append(f"overall: {overall}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rmt", description="Random-matrix desk-scale experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for tag in _EXPERIMENTS:
        sp = sub.add_parser(tag, help=f"run the {tag} experiment")
        sp.add_argument("-c", "--config", required=True, help="path to the JSON config")
        sp.add_argument("-o", "--outdir", required=True, help="output directory")
        sp.add_argument("--workers", type=int, default=None, help="override worker count")
    rp = sub.add_parser("report", help="aggregate manifests into a summary table")
    rp.add_argument("manifests", nargs="+", help="manifest JSON files")
    args = parser.parse_args(argv)

    if args.command == "report":
        try:
            ms = [RunManifest.from_json(open(path).read()) for path in args.manifests]
            text = report(ms)
        except (OSError, json.JSONDecodeError, ConfigError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(text)
        return 0 if all(m.all_passed for m in ms) else 1

    try:
        cfg = parse_config(open(args.config).read())
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cfg.experiment != args.command:
        print(f"config error: config is for {cfg.experiment!r}, not {args.command!r}", file=sys.stderr)
        return 2
    if args.workers is not None:
        cfg.workers = args.workers
    elif cfg.workers is None and os.environ.get("RMT_WORKERS"):
        cfg.workers = default_workers()
    try:
        manifest = run(cfg, args.outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ConvergenceError, StepError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except RMTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(report([manifest]))
    return 0 if manifest.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
