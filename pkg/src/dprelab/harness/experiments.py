"""Per-command task plans and reductions.

A plan is a list of ``(task_name, args)`` tuples with picklable args; a
reduction turns the ordered task outputs into ``(rows, results)`` where
rows are ``(record_kind, payload)`` pairs and results is the aggregate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import _lattice, coarse_grain, continuum_scaling as cs, free_energy as fe, kernels
from .._rng import stream_seed
from ..env_field import EnvironmentSpec, FieldHandle
from ..errors import ConfigError, DomainError
from ..transfer import second_moment_exact
from .config import ExperimentConfig

CHUNKS = 32


def _chunks(R):
    """Replica ranges; independent of the worker count."""
    size = max(1, -(-R // CHUNKS))
    return [(s, min(size, R - s)) for s in range(0, R, size)]


def _spec(d):
    return EnvironmentSpec.from_dict(d)


def _f(x):
    return None if x is None else float(x)


# ------------------------------------------------------------- tasks

def task_logw(spec_d, beta, N, seed, start, count):
    return fe.replica_log_partitions(_spec(spec_d), beta, N, seed, start, count)


def task_intermediate(spec_d, T, n, r, kind, seed, start, count):
    cfg = cs.IntermediateConfig(T, n, r, start + count, seed, _spec(spec_d), kind)
    return cs.intermediate_samples(cfg, start, count)


def task_fractional(spec_d, beta, theta, T, n, seed, start, count):
    return fe.fractional_block_samples(_spec(spec_d), beta, theta, T, n, seed, start, count)[0]


def task_tail(spec_d, beta, theta, T, n, c, seed, start, count):
    I = coarse_grain.tail_index_set(theta, T, c)
    zs = coarse_grain.reachable_blocks(T, n)
    out = zs[np.abs(zs) > I[-1]]
    if out.size == 0:
        return np.zeros(count)
    if beta == 0:
        return np.full(count, float(np.sum(coarse_grain.deterministic_block_powers(theta, T, n, out))))
    seeds = _lattice.replica_seeds(np.uint64(seed), int(start), int(count))
    spec = _spec(spec_d)
    return np.array([coarse_grain.max_block_powers(spec, beta, theta, T, n, int(s), out).sum()
                     for s in seeds])


def task_ck(spec_d, beta, N, seed, replica):
    s = int(_lattice.replica_seeds(np.uint64(seed), int(replica), 1)[0])
    h = FieldHandle(s, _spec(spec_d))
    return [cs.chapman_kolmogorov_check(h, beta, N, m) for m in range(1, N)]


def task_identities(name, draws, seed, tol):
    return list(kernels.identity_suite(draws, seed, tol, names=(name,)))


def task_series(beta, T, k_max):
    return cs.second_moment_series(beta, T, k_max)


def task_tail_mass(T, n, zmax):
    rows = []
    for z in range(2, zmax + 1):
        for zz in (-z, z):
            mass = max(coarse_grain.block_tail_mass(zz, T, n, int(x))[0]
                       for x in coarse_grain.start_sites(n))
            rows.append((zz, mass, math.exp(-zz * zz / T)))
    return rows


TASKS = {
    "logw": task_logw,
    "intermediate": task_intermediate,
    "fractional": task_fractional,
    "tail": task_tail,
    "ck": task_ck,
    "identities": task_identities,
    "series": task_series,
    "tail_mass": task_tail_mass,
}


def _concat(outputs):
    return np.concatenate([np.asarray(o, dtype=float) for o in outputs]) if outputs else np.zeros(0)


def _replica_rows(values, group=None, name="log_W", extra=None):
    rows = []
    for i, v in enumerate(values):
        p = {"replica": i}
        if group:
            p.update(group)
        p[name] = float(v)
        if extra:
            p.update(extra(v))
        rows.append(("replica", p))
    return rows


@dataclass(frozen=True)
class Experiment:
    plan: Callable
    reduce: Callable


# ------------------------------------------------------- free energy

def _fe_plan(cfg):
    return [("logw", (cfg.spec.to_dict(), float(cfg.beta), int(cfg.N), int(cfg.seed), s, c))
            for s, c in _chunks(cfg.replicas)]


def _fe_reduce(cfg, outputs):
    lw = _concat(outputs)
    N = int(cfg.N)
    est = fe.summarize_free_energy(lw / N, cfg.beta, N, cfg.seed)
    rows = _replica_rows(lw, extra=lambda v: {"free_energy": float(v) / N})
    return rows, fe.sweep_row(est).to_dict()


def _sweep_Ns(cfg):
    if cfg.N_grid is not None:
        if len(cfg.N_grid) != len(cfg.betas):
            raise ConfigError("N_grid must give one N per beta", field="N_grid")
        schedule = dict(zip(cfg.betas, (int(N) for N in cfg.N_grid)))
    else:
        schedule = float(cfg.N_multiplier)
    return fe.resolve_schedule(list(cfg.betas), schedule, cfg.min_multiplier)


def _sweep_plan(cfg):
    tasks = []
    for i, (b, N) in enumerate(zip(cfg.betas, _sweep_Ns(cfg))):
        seed = fe.sweep_seed(cfg.seed, i)
        tasks += [("logw", (cfg.spec.to_dict(), float(b), int(N), seed, s, c))
                  for s, c in _chunks(cfg.replicas)]
    return tasks


def _sweep_reduce(cfg, outputs):
    per = len(_chunks(cfg.replicas))
    rows, table = [], []
    for i, (b, N) in enumerate(zip(cfg.betas, _sweep_Ns(cfg))):
        lw = _concat(outputs[i * per:(i + 1) * per])
        est = fe.summarize_free_energy(lw / N, b, N, fe.sweep_seed(cfg.seed, i))
        rows += _replica_rows(lw, {"beta": float(b), "N": int(N)})
        table.append(fe.sweep_row(est).to_dict())
    return rows, {"rows": table}


def _var_plan(cfg):
    tasks = []
    for i, N in enumerate(cfg.N_grid):
        tasks += [("logw", (cfg.spec.to_dict(), float(cfg.beta), int(N), stream_seed(cfg.seed, i), s, c))
                  for s, c in _chunks(cfg.replicas)]
    return tasks


def _var_reduce(cfg, outputs):
    per = len(_chunks(cfg.replicas))
    rows, table = [], []
    for i, N in enumerate(cfg.N_grid):
        lw = _concat(outputs[i * per:(i + 1) * per])
        rows += _replica_rows(lw, {"N": int(N)})
        d = fe.summarize_variance(lw, N).to_dict()
        d["beta"] = float(cfg.beta)
        table.append(d)
    return rows, {"rows": table}


def _frac_plan(cfg):
    if not 0.0 < cfg.theta <= 1.0:
        raise ConfigError("theta must lie in (0, 1]", field="theta")
    return [("fractional", (cfg.spec.to_dict(), float(cfg.beta), float(cfg.theta), int(cfg.T), int(cfg.n),
                            int(cfg.seed), s, c)) for s, c in _chunks(cfg.replicas)]


def _frac_reduce(cfg, outputs):
    S = _concat(outputs)
    zs = fe.truncated_blocks(int(cfg.T), int(cfg.n))
    res = fe.summarize_fractional(S, cfg.beta, cfg.theta, int(cfg.T), int(cfg.n), cfg.seed, zs.size)
    d = res.to_dict()
    d["ci_lo"], d["ci_hi"] = d["value"] - 1.96 * d["std_error"], d["value"] + 1.96 * d["std_error"]
    return _replica_rows(S, name="block_sum"), d


# ------------------------------------------------- intermediate disorder

def _inter_args(cfg, T, r, seed, n=None):
    return (cfg.spec.to_dict(), float(T), int(n or cfg.n), float(r), cfg.kind, int(seed))


def _check_inter(cfg, T, r=None):
    try:
        cs.IntermediateConfig(float(T), int(cfg.n), float(cfg.r if r is None else r), 2, 0, cfg.spec, cfg.kind)
    except DomainError as exc:
        raise ConfigError(str(exc), field="T/n/r") from exc


def _id_plan(cfg):
    _check_inter(cfg, cfg.T)
    return [("intermediate", _inter_args(cfg, cfg.T, cfg.r, cfg.seed) + (s, c)) for s, c in _chunks(cfg.replicas)]


def _id_reduce(cfg, outputs):
    lw = _concat(outputs)
    w = np.exp(lw)
    R = w.size
    ic = cs.IntermediateConfig(float(cfg.T), int(cfg.n), float(cfg.r), R, cfg.seed, cfg.spec, cfg.kind)
    exact = second_moment_exact(cfg.spec, ic.beta, ic.N) if cfg.kind == cs.POINT_TO_LINE else None
    res = {"T": float(cfg.T), "n": int(cfg.n), "r": float(cfg.r), "N": ic.N, "beta": ic.beta,
           "kind": cfg.kind, "replicas": R,
           "mean": float(np.sum(w) / R), "mean_stderr": float(np.std(w, ddof=1) / math.sqrt(R)),
           "second": float(np.sum(w * w) / R), "second_stderr": float(np.std(w * w, ddof=1) / math.sqrt(R)),
           "exact_second": _f(exact), "mean_log": float(np.sum(lw) / R),
           "mean_log_stderr": float(np.std(lw, ddof=1) / math.sqrt(R))}
    return _replica_rows(lw), res


def _Ts(cfg):
    return [float(t) for t in (cfg.Ts if cfg.Ts is not None else [cfg.T])]


def _cont_plan(cfg):
    tasks = []
    for T in _Ts(cfg):
        _check_inter(cfg, T)
        tasks += [("intermediate", _inter_args(cfg, T, cfg.r, cfg.seed) + (s, c)) for s, c in _chunks(cfg.replicas)]
        if cfg.doubling and cfg.r != 0:
            seed2 = stream_seed(cfg.seed, 2)
            tasks += [("intermediate", _inter_args(cfg, T, cfg.r, seed2, 2 * cfg.n) + (s, c))
                      for s, c in _chunks(cfg.replicas)]
    return tasks


def _cont_reduce(cfg, outputs):
    per = len(_chunks(cfg.replicas))
    dbl = cfg.doubling and cfg.r != 0
    rows, table, k = [], [], 0
    for T in _Ts(cfg):
        lw = _concat(outputs[k:k + per])
        k += per
        ic = cs.IntermediateConfig(T, int(cfg.n), float(cfg.r), lw.size, cfg.seed, cfg.spec, cfg.kind)
        est = cs.summarize_continuum(lw, ic)
        rows += _replica_rows(lw, {"T": T})
        if dbl:
            lw2 = _concat(outputs[k:k + per])
            k += per
            ic2 = cs.IntermediateConfig(T, 2 * int(cfg.n), float(cfg.r), lw2.size, stream_seed(cfg.seed, 2),
                                        cfg.spec, cfg.kind)
            est2 = cs.summarize_continuum(lw2, ic2)
            est.doubling_delta = est2.mean_log - est.mean_log
            est.doubling_stderr = math.hypot(est.std_error, est2.std_error)
        elif cfg.r == 0:
            est.doubling_delta, est.doubling_stderr = 0.0, 0.0
        d = est.to_dict()
        d["ci_lo"], d["ci_hi"] = d["mean_log"] - 1.96 * d["std_error"], d["mean_log"] + 1.96 * d["std_error"]
        table.append(d)
    return rows, {"rows": table}


def _scaling_plan(cfg):
    r = float(cfg.r)
    if not 0.5 <= r <= 2.0:
        raise ConfigError("scaling check is restricted to r in [1/2, 2]", field="r")
    _check_inter(cfg, r * r * cfg.T, 1.0)
    a = [("intermediate", (cfg.spec.to_dict(), r * r * float(cfg.T), int(cfg.n), 1.0, cs.POINT_TO_LINE,
                           int(cfg.seed), s, c)) for s, c in _chunks(cfg.replicas)]
    b = [("intermediate", (cfg.spec.to_dict(), float(cfg.T), int(cfg.n), math.sqrt(r), cs.POINT_TO_LINE,
                           stream_seed(cfg.seed, 1), s, c)) for s, c in _chunks(cfg.replicas)]
    return a + b


def _scaling_reduce(cfg, outputs):
    from scipy import stats
    per = len(_chunks(cfg.replicas))
    a, b = _concat(outputs[:per]), _concat(outputs[per:])
    ks = stats.ks_2samp(a, b)
    wa, wb = np.exp(a), np.exp(b)
    sd = lambda w: float(np.std(w, ddof=1) / math.sqrt(w.size))
    rep = cs.ScalingReport(float(cfg.T), int(cfg.n), float(cfg.r), float(ks.statistic), float(ks.pvalue),
                           float(np.sum(wa) / wa.size), float(np.sum(wb) / wb.size), sd(wa), sd(wb), a.size)
    rows = _replica_rows(a, {"side": "a"}) + _replica_rows(b, {"side": "b"})
    return rows, rep.to_dict()


# ------------------------------------------------------ deterministic

def _ck_plan(cfg):
    return [("ck", (cfg.spec.to_dict(), float(cfg.beta), int(cfg.N), int(cfg.seed), i))
            for i in range(int(cfg.replicas or 1))]


def _ck_reduce(cfg, outputs):
    rows, worst = [], 0.0
    for i, res in enumerate(outputs):
        for m, r in enumerate(res, start=1):
            d = abs(r.log_lhs - r.log_rhs)
            worst = max(worst, d)
            rows.append(("row", {"replica": i, "beta": float(cfg.beta), "N": int(cfg.N), "m": m,
                                 "log_lhs": r.log_lhs, "log_rhs": r.log_rhs, "abs_log_diff": d}))
    return rows, {"beta": float(cfg.beta), "N": int(cfg.N), "replicas": len(outputs),
                  "splits": max(int(cfg.N) - 1, 0), "max_abs_log_diff": worst}


def _series_plan(cfg):
    return [("series", (float(cfg.beta), float(cfg.T), int(cfg.k_max)))]


def _series_reduce(cfg, outputs):
    s = outputs[0]
    closed = None
    if abs(cfg.beta - math.sqrt(2.0)) < 1e-15:
        closed = cs.continuum_second_moment(cfg.beta, cfg.T)
    return [], {"beta": float(cfg.beta), "T": float(cfg.T), "k_max": int(cfg.k_max), "value": s.value,
                "terms": s.terms, "stopped_early": s.stopped_early, "closed_form": closed}


def _ident_plan(cfg):
    return [("identities", (name, int(cfg.draws), int(cfg.seed), float(cfg.tol))) for name in kernels.IDENTITIES]


def _ident_reduce(cfg, outputs):
    rows, table = [], []
    for name, res in zip(kernels.IDENTITIES, outputs):
        rows += [("row", r) for r in res]
        err = [abs(r["lhs"] - r["rhs"]) if r["kind"] == kernels.EQUALITY else max(r["lhs"] - r["rhs"], 0.0)
               for r in res]
        table.append({"identity": name, "kind": kernels.IDENTITY_KIND[name], "draws": len(res),
                      "passed": sum(r["passed"] for r in res), "worst_error": max(err) if err else 0.0})
    return rows, {"rows": table, "all_passed": all(t["passed"] == t["draws"] for t in table)}


def _tail_beta(cfg):
    return float(cfg.beta) if cfg.beta is not None else int(cfg.n) ** -0.25


def _tail_plan(cfg):
    if not 0.0 < cfg.theta <= 1.0:
        raise ConfigError("theta must lie in (0, 1]", field="theta")
    R = int(cfg.replicas or 64)
    tasks = []
    for T in _Ts(cfg):
        if T != int(T) or T < 1:
            raise ConfigError("coarse-grain-tail needs integer T >= 1", field="T")
        T = int(T)
        zmax = int(coarse_grain.reachable_blocks(T, int(cfg.n))[-1])
        tasks.append(("tail_mass", (T, int(cfg.n), zmax)))
        tasks += [("tail", (cfg.spec.to_dict(), _tail_beta(cfg), float(cfg.theta), T, int(cfg.n), float(cfg.c),
                            int(cfg.seed), s, c)) for s, c in _chunks(R)]
    return tasks


def _tail_reduce(cfg, outputs):
    R = int(cfg.replicas or 64)
    per = len(_chunks(R))
    rows, table, k = [], [], 0
    for T in _Ts(cfg):
        T = int(T)
        masses = outputs[k]
        S = _concat(outputs[k + 1:k + 1 + per])
        k += 1 + per
        viol = 0
        for z, mass, bound in masses:
            viol += mass > bound
            rows.append(("row", {"T": T, "z": int(z), "mass": mass, "bound": bound, "holds": bool(mass <= bound)}))
        rows += _replica_rows(S, {"T": T}, name="tail_sum")
        I = coarse_grain.tail_index_set(cfg.theta, T, cfg.c)
        table.append({"T": T, "theta": float(cfg.theta), "n": int(cfg.n), "c": float(cfg.c), "beta": _tail_beta(cfg),
                      "replicas": S.size, "value": float(np.sum(S) / S.size),
                      "stderr": float(np.std(S, ddof=1) / math.sqrt(S.size)) if S.size > 1 else 0.0,
                      "index_set_size": int(I.size), "tail_bound_violations": int(viol)})
    return rows, {"rows": table}


EXPERIMENTS = {
    "estimate-free-energy": Experiment(_fe_plan, _fe_reduce),
    "sweep-beta": Experiment(_sweep_plan, _sweep_reduce),
    "fractional-upper": Experiment(_frac_plan, _frac_reduce),
    "variance-profile": Experiment(_var_plan, _var_reduce),
    "intermediate-disorder": Experiment(_id_plan, _id_reduce),
    "continuum-free-energy": Experiment(_cont_plan, _cont_reduce),
    "ck-check": Experiment(_ck_plan, _ck_reduce),
    "scaling-check": Experiment(_scaling_plan, _scaling_reduce),
    "second-moment-series": Experiment(_series_plan, _series_reduce),
    "verify-identities": Experiment(_ident_plan, _ident_reduce),
    "coarse-grain-tail": Experiment(_tail_plan, _tail_reduce),
}
