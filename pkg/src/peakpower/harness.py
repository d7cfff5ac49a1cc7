"""Monte-Carlo experiment runner, figure presets and result tables.

Every trial draws from its own counter-based stream ``(seed, trial, ...)``
and work is cut into fixed-size blocks of trials, so a result does not depend
on how many threads ran it.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from . import rng as rngmod
from .codes import bch_dual_balancer, is_complementary_pair, rudin_shapiro
from .cschain import LinkConfig, simulate_link
from .derand import MonteCarloOracle, derandomize, derandomize_batch, sequence_balance
from .hpa import HpaModel, clip_amplitude
from .metrics import (Ccdf, LdpModel, clip_duration_samples, clipped_energy, ldp_reference,
                      resolve_metric, to_db)
from .ofdm import Constellation, random_frames, synthesize
from .selection import (CandidateGenerator, MimoSelectionPolicy, QPSK_PHASES, evaluate,
                        mimo_select, scrambling_stream, slm_metrics, threshold_select)

SCHEMA_VERSION = 1
THREADS_ENV = "PEAKPOWER_THREADS"
BLOCK_TRIALS = 250
CS_BLOCK_FRAMES = 1000

SCENARIOS = ("ccdf", "derand-ccdf", "slm-ccdf", "mimo-slm", "threshold-count",
             "clip-duration", "cs-ber", "codes-report", "scaling-sweep")

SELECTION_SCENARIOS = ("derand-ccdf", "slm-ccdf", "mimo-slm", "threshold-count")


class SpecError(ValueError):
    """An experiment specification that cannot be run."""


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to re-run an experiment bit-exactly.

    ``knobs`` holds scenario-specific settings; unknown knobs are rejected by
    :meth:`validate`.
    """

    scenario: str
    n: int = 128
    oversample: int = 4
    antennas: int = 1
    candidates: int = 1
    constellation: str = "QPSK"
    metric: str = "papr"
    hpa: str = "identity"
    clip_db: float | None = None
    trials: int = 1000
    seed: int = 0
    knobs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        names = {f.name for f in fields(cls)}
        extra = set(data) - names
        if extra:
            raise SpecError(f"unknown spec fields: {sorted(extra)}")
        return cls(**data)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def knob(self, name, default=None):
        return self.knobs.get(name, default)

    def knob_list(self, name, default=None) -> list | None:
        """List-valued knob; a lone scalar (e.g. ``--set snr_db=10``) becomes a one-item list."""
        v = self.knobs.get(name, default)
        if v is None or isinstance(v, (list, tuple)):
            return None if v is None else list(v)
        return [v]

    def validate(self) -> "ExperimentSpec":
        if self.scenario not in SCENARIOS:
            raise SpecError(f"unknown scenario {self.scenario!r}; choose one of {', '.join(SCENARIOS)}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise SpecError("trials must be an integer >= 1")
        if int(self.seed) != self.seed or self.seed < 0:
            raise SpecError("seed must be a non-negative integer")
        if self.n < 1:
            raise SpecError("--n must be >= 1")
        if int(self.oversample) != self.oversample or self.oversample < 1:
            raise SpecError("--oversample must be an integer >= 1")
        if self.antennas < 1:
            raise SpecError("--antennas must be >= 1")
        if self.candidates < 1:
            raise SpecError("--candidates must be >= 1")
        try:
            Constellation.from_name(self.constellation)
        except ValueError as exc:
            raise SpecError(str(exc)) from None
        try:
            hpa = HpaModel.parse(self.hpa)
            level = clip_amplitude(self.clip_db) if self.clip_db is not None else None
            resolve_metric(self.metric, hpa, level)
        except ValueError as exc:
            raise SpecError(f"{exc} (check --metric/--hpa/--clip-db)") from None
        allowed = _KNOBS[self.scenario]
        unknown = set(self.knobs) - set(allowed)
        if unknown:
            raise SpecError(f"scenario {self.scenario} does not take knobs {sorted(unknown)}; "
                            f"allowed: {sorted(allowed)}")
        if self.scenario == "mimo-slm" and self.antennas < 1:
            raise SpecError("mimo-slm needs --antennas >= 1")
        if self.scenario == "cs-ber":
            if self.knob_list("schemes") is not None:
                bad = set(self.knob_list("schemes")) - {"unclipped", "none", "reserved", "reliable"}
                if bad:
                    raise SpecError(f"unknown cs-ber schemes {sorted(bad)}")
            if self.n < 59:
                raise SpecError("cs-ber reserves a (59, 29, 14) tone set and needs --n >= 59")
        return self


_KNOBS = {
    "ccdf": ("step_db",),
    "derand-ccdf": ("step_db", "balancing_m", "balancing_d", "balancing_draws", "phases", "lam"),
    "slm-ccdf": ("step_db", "u_values"),
    "mimo-slm": ("step_db", "policies"),
    "threshold-count": ("thresholds_db", "max_candidates"),
    "clip-duration": ("levels_db",),
    "cs-ber": ("snr_db", "schemes", "expected_clips", "sparsity", "reliable_m"),
    "codes-report": ("m_max", "rs_oversample", "balancing_m", "balancing_d"),
    "scaling-sweep": ("sizes", "samples"),
}


@dataclass
class ResultTable:
    columns: tuple
    rows: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError("row length does not match the column schema")

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def where(self, **match) -> list[dict]:
        out = []
        for r in self.rows:
            rec = dict(zip(self.columns, r))
            if all(rec[k] == v for k, v in match.items()):
                out.append(rec)
        return out


def _finite(x):
    # JSON has no infinity; spell it out
    return x if math.isfinite(x) else "inf"


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


def emit(table: ResultTable, fmt: str = "csv") -> bytes:
    """Serialise a table: CSV with a header row, or JSON with a versioned envelope."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for r in table.rows:
            w.writerow([repr(_cell(v)) if isinstance(_cell(v), float) else _cell(v) for v in r])
        return buf.getvalue().encode()
    if fmt == "json":
        doc = {
            "schema": "peakpower.result",
            "schema_version": SCHEMA_VERSION,
            "columns": list(table.columns),
            "rows": [[_cell(v) for v in r] for r in table.rows],
            "meta": table.meta,
        }
        return (json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n").encode()
    raise SpecError(f"unknown output format {fmt!r}; use csv or json")


def load_json(data: bytes | str) -> ResultTable:
    doc = json.loads(data)
    if doc.get("schema") != "peakpower.result":
        raise ValueError("not a peakpower result document")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {doc.get('schema_version')}")
    return ResultTable(tuple(doc["columns"]), [list(r) for r in doc["rows"]], doc["meta"])


def output_hash(table: ResultTable) -> str:
    return hashlib.sha256(emit(table, "json")).hexdigest()


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise SpecError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return 1


def _blocks(total: int, size: int):
    return [(lo, min(lo + size, total)) for lo in range(0, total, size)]


def _map_blocks(fn, total: int, threads: int, size: int = BLOCK_TRIALS) -> list:
    blocks = _blocks(total, size)
    if threads <= 1 or len(blocks) <= 1:
        return [fn(lo, hi) for lo, hi in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def _frames(spec: ExperimentSpec, lo: int, hi: int, n: int | None = None,
            sub: int = rngmod.DATA, *extra) -> np.ndarray:
    const = Constellation.from_name(spec.constellation)
    n = spec.n if n is None else n
    return np.stack([random_frames(rngmod.stream(spec.seed, t, sub, *extra), const, n)
                     for t in range(lo, hi)])


def _metric(spec: ExperimentSpec):
    hpa = HpaModel.parse(spec.hpa)
    level = clip_amplitude(spec.clip_db) if spec.clip_db is not None else None
    return resolve_metric(spec.metric, hpa, level)


def _db(values) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return to_db(np.asarray(values, dtype=float))


def _grid(curves: dict, step: float) -> np.ndarray:
    finite = np.concatenate([v[np.isfinite(v)] for v in curves.values()])
    lo = math.floor(finite.min() / step) * step
    hi = math.ceil(finite.max() / step) * step
    return np.round(np.arange(lo, hi + step / 2, step), 10)


def _ccdf_rows(curves: dict, step: float, ldp: dict | None = None):
    """Rows (curve, metric_db, ccdf) on a common dB grid, plus per-curve summaries."""
    grid = _grid(curves, step)
    rows, summary = [], {}
    for name, vals in curves.items():
        cc = Ccdf(vals)
        for x, p in zip(grid, cc.query(grid)):
            rows.append((name, float(x), float(p)))
        summary[name] = {"q_1e-2_db": cc.quantile(1e-2), "q_1e-3_db": cc.quantile(1e-3),
                         "median_db": cc.quantile(0.5), "samples": cc.count}
    for name, model in (ldp or {}).items():
        ref = np.exp(ldp_reference(model, 10.0 ** (grid / 10.0)))
        rows.extend((name, float(x), float(p)) for x, p in zip(grid, ref))
    return rows, summary


def _run_ccdf(spec, threads):
    metric = _metric(spec)

    def block(lo, hi):
        return _db(evaluate(_frames(spec, lo, hi), metric, spec.oversample))

    vals = np.concatenate(_map_blocks(block, spec.trials, threads))
    ldp = {"ldp": LdpModel(spec.n)} if spec.metric == "papr" else {}
    rows, summary = _ccdf_rows({"uncoded": vals}, spec.knob("step_db", 0.1), ldp)
    return ("curve", "metric_db", "ccdf"), rows, {"summary": summary, "knee_db": float(to_db(np.log(spec.n)))}


def _run_derand_ccdf(spec, threads):
    metric = _metric(spec)
    from .derand import ChernoffSurrogate
    surrogate = ChernoffSurrogate(lam=spec.knob("lam"), phases=spec.knob("phases", 4))
    bal_m = spec.knob("balancing_m")
    balancer = None
    if bal_m is not None:
        balancer = bch_dual_balancer(int(bal_m), int(spec.knob("balancing_d", 11)))
        pad = spec.n - balancer.code.n
        if pad < 0:
            raise SpecError(f"balancing code length {balancer.code.n} exceeds N={spec.n}")
        code = balancer.code.prepend_fixed(pad) if pad else balancer.code
    draws = int(spec.knob("balancing_draws", 64))

    def block(lo, hi):
        c = _frames(spec, lo, hi)
        out = {"uncoded": _db(evaluate(c, metric, spec.oversample))}
        if spec.candidates > 1:
            vecs = np.stack([CandidateGenerator.slm_phases(
                spec.n, spec.candidates, rngmod.stream(spec.seed, t, rngmod.CANDIDATES)).vectors
                for t in range(lo, hi)])
            out["slm"] = _db(slm_metrics(c, vecs, metric, spec.oversample).min(axis=1))
        if balancer is not None:
            out["balancing"] = _db([sequence_balance(
                c[i], code, "random", draws, metric, spec.oversample,
                rngmod.stream(spec.seed, t, rngmod.CODE)).metric for i, t in enumerate(range(lo, hi))])
        signs, trace = derandomize_batch(c, None, surrogate, spec.oversample)
        out["derand"] = _db(evaluate(signs * c, metric, spec.oversample))
        out["_mono"] = np.array([np.count_nonzero(np.diff(trace, axis=1) > 0), trace.shape[0] * (trace.shape[1] - 1)])
        return out

    parts = _map_blocks(block, spec.trials, threads)
    order = ["uncoded"] + (["slm"] if spec.candidates > 1 else []) + \
        (["balancing"] if balancer is not None else []) + ["derand"]
    curves = {k: np.concatenate([p[k] for p in parts]) for k in order}
    mono = np.sum([p["_mono"] for p in parts], axis=0)
    ldp = {"ldp": LdpModel(spec.n)}
    if spec.candidates > 1:
        ldp["ldp-slm"] = LdpModel(spec.n, spec.candidates)
    rows, summary = _ccdf_rows(curves, spec.knob("step_db", 0.1), ldp if spec.metric == "papr" else {})
    rows = [r + ("out-of-band" if r[0] in ("slm", "balancing") else "none",) for r in rows]
    meta = {"summary": summary, "knee_db": float(to_db(np.log(spec.n))),
            "bound_steps": int(mono[1]), "bound_increases": int(mono[0])}
    if balancer is not None:
        meta["balancer"] = {"n": code.n, "k": code.k, "strength_lower_bound": balancer.strength_lower_bound,
                            "bch_m": balancer.bch.m, "bch_designed_distance": balancer.bch.designed_distance}
    return ("curve", "metric_db", "ccdf", "side_info"), rows, meta


def _run_slm_ccdf(spec, threads):
    metric = _metric(spec)
    u_values = [int(u) for u in spec.knob_list("u_values", [1, 2, spec.candidates] if spec.candidates > 2 else [1, 2, 4])]
    if min(u_values) < 1:
        raise SpecError("u_values must be >= 1")
    u_max = max(u_values)

    def block(lo, hi):
        c = _frames(spec, lo, hi)
        vecs = np.stack([CandidateGenerator.slm_phases(
            spec.n, u_max, rngmod.stream(spec.seed, t, rngmod.CANDIDATES)).vectors
            for t in range(lo, hi)])
        vals = slm_metrics(c, vecs, metric, spec.oversample)
        return {u: _db(vals[:, :u].min(axis=1)) for u in u_values}

    parts = _map_blocks(block, spec.trials, threads)
    curves = {f"slm-U{u}": np.concatenate([p[u] for p in parts]) for u in u_values}
    ldp = {f"ldp-U{u}": LdpModel(spec.n, u) for u in u_values} if spec.metric == "papr" else {}
    rows, summary = _ccdf_rows(curves, spec.knob("step_db", 0.1), ldp)
    rows = [r + ("out-of-band",) for r in rows]
    return ("curve", "metric_db", "ccdf", "side_info"), rows, {"summary": summary}


def _run_mimo(spec, threads):
    metric = _metric(spec)
    policies = list(spec.knob_list("policies", ["ordinary", "simplified", "directed"]))
    n_t, u = spec.antennas, spec.candidates
    budget = n_t * u
    rows_needed = max(u, budget - n_t + 1)

    def block(lo, hi):
        out = {p: [] for p in policies}
        for t in range(lo, hi):
            cw = np.stack([_frames(spec, t, t + 1, None, rngmod.DATA, a)[0] for a in range(n_t)])
            gen = CandidateGenerator.slm_phases(spec.n, rows_needed, rngmod.stream(spec.seed, t, rngmod.CANDIDATES))
            small = CandidateGenerator("phase", gen.vectors[:u])
            for p in policies:
                if p == "directed":
                    res = mimo_select(cw, gen, metric, MimoSelectionPolicy("directed", budget=budget), spec.oversample)
                elif p in ("ordinary", "simplified"):
                    res = mimo_select(cw, small, metric, MimoSelectionPolicy(p), spec.oversample)
                else:
                    raise SpecError(f"unknown MIMO policy {p!r}")
                out[p].append(res.objective)
        return {p: _db(v) for p, v in out.items()}

    parts = _map_blocks(block, spec.trials, threads)
    curves = {p: np.concatenate([b[p] for b in parts]) for p in policies}
    rows, summary = _ccdf_rows(curves, spec.knob("step_db", 0.1))
    rows = [r + (budget, "out-of-band") for r in rows]
    return ("curve", "metric_db", "ccdf", "budget", "side_info"), rows, {"summary": summary}


def _run_threshold(spec, threads):
    metric = _metric(spec)
    knee = float(to_db(np.log(spec.n)))
    thresholds = [float(x) for x in spec.knob_list("thresholds_db", [knee - 0.5, knee, knee + 0.5])]
    cap = int(spec.knob("max_candidates", 10_000))

    def block(lo, hi):
        c = _frames(spec, lo, hi)
        ref = _db(evaluate(_frames(spec, lo, hi, None, rngmod.REFERENCE), metric, spec.oversample))
        counts = np.empty((len(thresholds), hi - lo), dtype=np.int64)
        for j, thr in enumerate(thresholds):
            lin = 10.0 ** (thr / 10.0)
            for i, t in enumerate(range(lo, hi)):
                cands = scrambling_stream(spec.n, rngmod.stream(spec.seed, t, rngmod.CANDIDATES, j), QPSK_PHASES)
                _, counts[j, i] = threshold_select(c[i], cands, metric, lin, spec.oversample, cap)
        return counts, ref

    parts = _map_blocks(block, spec.trials, threads)
    counts = np.concatenate([p[0] for p in parts], axis=1)
    ref = np.concatenate([p[1] for p in parts])
    rows = []
    for j, thr in enumerate(thresholds):
        cdf = float(np.mean(ref <= thr))
        inv = _finite(1.0 / cdf if cdf > 0 else math.inf)
        geo_var = _finite((1.0 - cdf) / cdf ** 2 if cdf > 0 else math.inf)
        rows.append((thr, float(counts[j].mean()), float(counts[j].var(ddof=1)) if counts.shape[1] > 1 else 0.0,
                     cdf, inv, geo_var, spec.trials, "out-of-band"))
    cols = ("threshold_db", "mean_count", "var_count", "cdf", "inverse_cdf", "geometric_var",
            "trials", "side_info")
    return cols, rows, {"knee_db": knee}


def _run_clip_duration(spec, threads):
    levels = [float(x) for x in spec.knob_list("levels_db", [2.0, 4.0, 6.0, 8.0])]

    def block(lo, hi):
        s = synthesize(_frames(spec, lo, hi), spec.oversample)
        return [np.bincount(clip_duration_samples(s, clip_amplitude(lv))) for lv in levels]

    parts = _map_blocks(block, spec.trials, threads)
    rows, meta = [], {}
    for j, lv in enumerate(levels):
        width = max(len(p[j]) for p in parts)
        hist = np.zeros(width, dtype=np.int64)
        for p in parts:
            hist[: len(p[j])] += p[j]
        total = int(hist.sum())
        meta[f"{lv:g}"] = {"clips": total}
        above = total - np.cumsum(hist)
        for dur in np.flatnonzero(hist):
            rows.append((lv, int(dur), int(hist[dur]), float(hist[dur] / total), float(above[dur] / total)))
    return ("clip_db", "duration", "count", "probability", "ccdf"), rows, {"clips": meta}


def _run_cs_ber(spec, threads):
    snrs = [float(x) for x in spec.knob_list("snr_db", [8.0, 10.0, 12.0, 14.0])]
    schemes = list(spec.knob_list("schemes", ["unclipped", "none", "reserved", "reliable"]))
    cfg = LinkConfig(n=spec.n, constellation=spec.constellation, clip_db=spec.clip_db,
                     expected_clips=float(spec.knob("expected_clips", 4.0)),
                     sparsity=int(spec.knob("sparsity", 8)), reliable_m=spec.knob("reliable_m"))
    rows = []
    counterexamples = []
    for si, snr in enumerate(snrs):
        for scheme in schemes:
            def block(lo, hi, si=si, snr=snr, scheme=scheme):
                # all schemes share bits and noise at one SNR
                return simulate_link(cfg, scheme, snr, hi - lo, rngmod.stream(spec.seed, lo, rngmod.NOISE, si))

            parts = _map_blocks(block, spec.trials, threads, CS_BLOCK_FRAMES)
            stats = parts[0]
            for p in parts[1:]:
                stats = stats + p
            errors, bits = stats.bit_errors, stats.bits
            if not stats.cancellation_consistent:
                counterexamples.append({"snr_db": snr, "scheme": scheme, "ber": stats.ber,
                                        "uncancelled_ber": stats.uncancelled_ber,
                                        "recovery_error": stats.recovery_error / stats.frames,
                                        "clip_power": stats.clip_power / stats.frames})
            m = {"reserved": len(cfg.reserved),
                 "reliable": cfg.reliable_m if cfg.reliable_m else "adaptive"}.get(scheme, 0)
            rows.append((snr, scheme, errors / bits, errors, bits, spec.trials,
                         cfg.clip_level_db(), m, cfg.sparsity))
    cols = ("snr_db", "scheme", "ber", "bit_errors", "bits", "trials", "clip_level_db", "M", "S")
    meta = {"reserved_tones": list(cfg.reserved), "rate_loss_reserved": len(cfg.reserved) / spec.n,
            "ber_accounting": "data tones only", "monotonicity_counterexamples": counterexamples}
    return cols, rows, meta


def _run_codes(spec, threads):
    m_max = int(spec.knob("m_max", 12))
    over = int(spec.knob("rs_oversample", 8))
    rows = []
    for m in range(1, m_max + 1):
        pair = rudin_shapiro(m)
        worst = max(float(evaluate(np.asarray(seq, dtype=complex), lambda s: np.max(np.abs(s) ** 2, axis=-1)
                                   / np.mean(np.abs(s) ** 2, axis=-1), over)) for seq in (pair.p, pair.q))
        rows.append(("rudin-shapiro", m, "length", float(2 ** m)))
        rows.append(("rudin-shapiro", m, f"papr_max_I{over}", worst))
        rows.append(("rudin-shapiro", m, "complementary", float(is_complementary_pair(pair))))
    bm, bd = int(spec.knob("balancing_m", 7)), int(spec.knob("balancing_d", 11))
    bal = bch_dual_balancer(bm, bd)
    tag = f"dual-bch-m{bm}-d{bd}"
    rows.append((tag, bm, "n", float(bal.code.n)))
    rows.append((tag, bm, "k", float(bal.code.k)))
    rows.append((tag, bm, "strength_lower_bound", float(bal.strength_lower_bound)))
    if bal.strength_exact is not None:
        rows.append((tag, bm, "strength_exact", float(bal.strength_exact)))
    return ("object", "parameter", "quantity", "value"), rows, {}


def _run_scaling(spec, threads):
    sizes = [int(x) for x in spec.knob_list("sizes", [64, 128, 256])]
    samples = int(spec.knob("samples", 32))
    rows = []
    for n in sizes:
        lnln = float(np.log(np.log(n)))
        for conv, level in (("amplitude", lnln), ("power", math.sqrt(lnln))):
            metric = (lambda lv: (lambda s: clipped_energy(s, lv)))(level)
            oracle = MonteCarloOracle(metric, samples, spec.seed)

            def block(lo, hi, n=n, oracle=oracle, metric=metric):
                c = _frames(spec, lo, hi, n)
                signs = np.stack([1.0 - 2.0 * rngmod.stream(spec.seed, t, rngmod.CANDIDATES).integers(0, 2, n)
                                  for t in range(lo, hi)])
                base = metric(synthesize(signs * c, spec.oversample))
                der = np.array([metric(synthesize(derandomize(c[i], None, oracle, spec.oversample, t).frame,
                                                  spec.oversample)) for i, t in enumerate(range(lo, hi))])
                return base, der

            parts = _map_blocks(block, spec.trials, threads, 16)
            base = float(np.mean(np.concatenate([p[0] for p in parts])))
            der = float(np.mean(np.concatenate([p[1] for p in parts])))
            ratio = _finite(base / der if der > 0 else math.inf)
            rows.append((n, conv, level, float(to_db(level ** 2)), base, der, ratio, spec.trials))
    cols = ("n", "convention", "level", "level_db", "baseline_energy", "derand_energy", "ratio", "trials")
    return cols, rows, {"oracle": "monte-carlo", "samples": samples}


_RUNNERS = {
    "ccdf": _run_ccdf,
    "derand-ccdf": _run_derand_ccdf,
    "slm-ccdf": _run_slm_ccdf,
    "mimo-slm": _run_mimo,
    "threshold-count": _run_threshold,
    "clip-duration": _run_clip_duration,
    "cs-ber": _run_cs_ber,
    "codes-report": _run_codes,
    "scaling-sweep": _run_scaling,
}


def run(spec: ExperimentSpec, threads: int | None = None) -> ResultTable:
    """Run one experiment. The result does not depend on ``threads``."""
    spec.validate()
    threads = default_threads() if threads is None else max(1, int(threads))
    cols, rows, extra = _RUNNERS[spec.scenario](spec, threads)
    run_id = spec.config_hash()
    cols = tuple(cols) + ("run_id",)
    rows = [tuple(_cell(v) for v in r) + (run_id,) for r in rows]
    meta = {"spec": spec.to_dict(), "seed": spec.seed, "config_hash": run_id,
            "package_version": __version__, "rng": "philox(seed, trial, substream)"}
    meta.update(_jsonable(extra))
    return ResultTable(cols, rows, meta)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return _cell(obj)


PRESETS = {
    "fig2": dict(scenario="clip-duration", n=2048, oversample=4, trials=2000, seed=2,
                 knobs={"levels_db": [2.0, 4.0, 6.0, 8.0]}),
    "fig3": dict(scenario="derand-ccdf", n=128, oversample=4, candidates=4, trials=10_000, seed=3),
    "fig4": dict(scenario="derand-ccdf", n=128, oversample=4, candidates=1, trials=10_000, seed=4,
                 knobs={"balancing_m": 7, "balancing_d": 11, "balancing_draws": 64}),
    "fig7": dict(scenario="cs-ber", n=64, oversample=1, trials=100_000, seed=7,
                 knobs={"snr_db": [6.0, 8.0, 10.0, 11.0, 12.0, 13.0, 14.0, 16.0]}),
}


def preset(name: str, **overrides) -> ExperimentSpec:
    if name not in PRESETS:
        raise SpecError(f"unknown preset {name!r}; choose one of {', '.join(PRESETS)}")
    base = dict(PRESETS[name])
    base["knobs"] = dict(base.get("knobs", {}))
    knobs = overrides.pop("knobs", None)
    base.update(overrides)
    if knobs:
        base["knobs"].update(knobs)
    return ExperimentSpec(**base)


def with_overrides(spec: ExperimentSpec, **changes) -> ExperimentSpec:
    return replace(spec, **changes)
