"""End-to-end batch analysis.

:func:`run_pipeline` runs pretests, lag selection, estimation, impulse
responses, causality, reverse causality, moderation and robustness in that
order, writes every artifact under the configured output directory and
returns a :class:`RunReport` that lists each operation with its settings.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..bayes import (PosteriorDraws, build_minnesota_prior, build_niw_prior, sample_posterior)
from ..causality import bidirectional_report, granger_test
from ..errors import BpvarxError, InsufficientSeries, NonConvergent
from ..estimation import VarEstimate, equation_summary, fit_varx_ols, stability_check
from ..irf import IrfResult, accumulate_irf, compute_irf, irf_bands
from ..model import ModelSpec
from ..panel import (Balanced, DesignMatrices, ExcludeValues, PanelDataset, TrimPercentile,
                     build_design, derive_variables, load_panel, rule_from_config, subsample)
from ..prelim import (adf_fisher_test, contiguous_series, johansen_test, ljung_box, llc_test,
                      select_lag_length)
from ..prelim.report import _plain
from ..simgen import make_replication_dataset
from ..switching import fit_ms_varx, regime_irf
from .config import STAGES, RunConfig
from .plots import irf_grid_svg

__all__ = ["RunReport", "Analysis", "load_dataset", "analyse", "run_pipeline",
           "moderation_suite", "robustness_suite", "PipelineError"]

ANALYSIS_ERRORS = (BpvarxError, ValueError, np.linalg.LinAlgError)


class PipelineError(BpvarxError):
    """A stage failed; the report records which and why."""


@dataclass
class RunReport:
    """Audit trail of one invocation."""

    config: dict
    operations: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return "error" if self.errors else "ok"

    def record(self, stage: str, operation: str, settings: dict | None = None,
               status: str = "ok", detail=None) -> None:
        entry = {"stage": stage, "operation": operation, "settings": settings or {},
                 "status": status}
        if detail is not None:
            entry["detail"] = detail
        self.operations.append(entry)

    def fail(self, stage: str, exc: BaseException) -> None:
        self.errors.append({"stage": stage, "error": type(exc).__name__, "message": str(exc)})

    def to_dict(self) -> dict:
        return _plain({"status": self.status, "config": self.config,
                       "operations": self.operations, "outputs": sorted(self.outputs),
                       "results": self.results, "errors": self.errors})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


class _Writer:
    def __init__(self, root: Path, report: RunReport):
        self.root = root
        self.report = report
        root.mkdir(parents=True, exist_ok=True)

    def __call__(self, name: str, text: str) -> None:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="")
        if name not in self.report.outputs:
            self.report.outputs.append(name)


def _json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# shared analysis pass
# ---------------------------------------------------------------------------

def load_dataset(cfg: RunConfig, report: RunReport | None = None) -> PanelDataset:
    """Raw panel (file or synthetic) with the configured derived variables added."""
    d = cfg.dataset
    if d.path is None:
        raw = make_replication_dataset(seed=d.synthetic_seed, n_firms=d.synthetic_firms)
        op, settings = "make_replication_dataset", {"seed": d.synthetic_seed,
                                                    "n_firms": d.synthetic_firms}
    else:
        raw = load_panel(d.path)
        op, settings = "load_panel", {"path": d.path}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ds = derive_variables(raw, cfg.variable_specs())
    if report is not None:
        report.record("ingest", op, settings, detail={"n_obs": raw.n_obs,
                                                     "n_firms": raw.n_firms})
        report.record("ingest", "derive_variables", {"variables": cfg.variables},
                      detail={"warnings": sorted({str(w.message) for w in caught})})
    return ds


@dataclass
class Analysis:
    """Estimation and impulse responses of one dataset/model/estimator combination."""

    model: ModelSpec
    estimator: str
    design: DesignMatrices
    ols: VarEstimate
    estimate: VarEstimate
    draws: PosteriorDraws | None
    irf: IrfResult | None = None
    point_irf: IrfResult | None = None


def _fit(design: DesignMatrices, model: ModelSpec, estimator: str, cfg: RunConfig):
    ols = fit_varx_ols(design, model)
    if estimator == "ols":
        return ols, ols, None
    b = cfg.bayes
    if estimator == "bayes-wishart":
        prior = build_niw_prior(model, design, looseness=b.looseness)
    else:
        prior = build_minnesota_prior(model, design, b.lambda1, b.lambda2, b.lambda3, b.lambda4)
    draws = sample_posterior(design, prior, draws=b.draws, burn_in=b.burn_in, seed=cfg.seed,
                             chains=b.chains)
    return ols, draws.template, draws


def analyse(ds: PanelDataset, model: ModelSpec, cfg: RunConfig, estimator: str | None = None,
            kind: str | None = None, bands: bool = False) -> Analysis:
    """Build the design, estimate, and compute point (and optionally band) IRFs."""
    estimator = estimator or cfg.estimator
    kind = kind or cfg.irf.kind
    design = build_design(ds, model)
    ols, est, draws = _fit(design, model, estimator, cfg)
    H = int(cfg.irf.horizon)
    ordering = cfg.irf.ordering if kind == "oirf" else None
    point = compute_irf(est, H, kind, ordering)
    res = Analysis(model, estimator, design, ols, est, draws, point_irf=point)
    if bands and draws is not None:
        res.irf = irf_bands(draws, H, kind, tuple(cfg.irf.quantiles), ordering,
                            accumulate=cfg.irf.accumulate)
    else:
        res.irf = accumulate_irf(point) if cfg.irf.accumulate else point
    return res


def focal_summary(irf: IrfResult, impulse: str, response: str) -> dict:
    """Sign and size of one response path.

    ``peak`` is the largest-magnitude (signed) period response over horizons
    ``1..H``; ``accumulated`` is the cumulative response at ``H`` and its sign
    is the reported sign.
    """
    path = irf.response(impulse, response)
    raw = np.diff(path, prepend=0.0) if irf.accumulated else path
    acc = path if irf.accumulated else np.cumsum(path)
    k = 1 + int(np.argmax(np.abs(raw[1:]))) if len(raw) > 1 else 0
    return {"impulse": impulse, "response": response, "peak": float(raw[k]),
            "peak_horizon": k, "accumulated": float(acc[-1]),
            "sign": int(np.sign(acc[-1])), "path_accumulated": acc.tolist()}


def _focal_pairs(cfg: RunConfig, model: ModelSpec, swap: dict | None = None):
    swap = swap or {}
    pairs = [(swap.get(i, i), cfg.focal.response) for i in cfg.focal.impulses]
    return [(i, r) for i, r in pairs if i in model.endogenous and r in model.endogenous]


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def _pretests(cfg, ds, report, write):
    p = cfg.pretests
    out = []
    for var in p.unit_root:
        series = contiguous_series(ds, var)
        for name, fn in (("llc_test", llc_test), ("adf_fisher_test", adf_fisher_test)):
            settings = {"variable": var, "deterministic": p.deterministic}
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    rep = fn(series, p.deterministic)
            except InsufficientSeries as exc:
                # advisory: the configured transforms decide differencing
                report.record("pretests", name, settings, "infeasible", str(exc))
                out.append({"test": name, "variable": var, "status": "infeasible",
                            "message": str(exc)})
                continue
            report.record("pretests", name, settings)
            out.append({"test": name, "variable": var, "status": "ok", **rep.to_dict()})
    if len(p.johansen) >= 2:
        settings = {"variables": p.johansen, "lags": p.johansen_lags,
                    "deterministic": p.deterministic}
        try:
            jr = johansen_test(contiguous_series(ds, p.johansen), p.johansen_lags,
                               p.deterministic)
            report.record("pretests", "johansen_test", settings,
                          detail={"selected_rank": jr.selected_rank})
            out.append({"test": "johansen_test", "status": "ok",
                        "selected_rank": jr.selected_rank,
                        "reports": [r.to_dict() for r in jr.reports]})
        except (InsufficientSeries, BpvarxError) as exc:
            report.record("pretests", "johansen_test", settings, "infeasible", str(exc))
            out.append({"test": "johansen_test", "status": "infeasible", "message": str(exc)})
    write("pretests.json", _json(out))


def _lag_selection(cfg, ds, model, report, write):
    ls = cfg.lag_selection
    rep = select_lag_length(ds, model, ls.max_lag, ls.alpha)
    report.record("lag_selection", "select_lag_length", {"max_lag": ls.max_lag,
                                                         "alpha": ls.alpha},
                  detail={"selected": rep.selected})
    write("lag_selection.json", rep.to_text() + "\n")
    report.results["lag_selection"] = rep.selected


def _estimation(cfg, ds, model, report, write, bands):
    an = analyse(ds, model, cfg, bands=bands)
    settings = {"estimator": an.estimator, "lags": model.lags, "exogenous": model.exogenous,
                "categorical": model.categorical, "firm_effects": model.firm_effects,
                "year_effects": model.year_effects}
    if an.draws is not None:
        settings.update({k: getattr(cfg.bayes, k) for k in ("draws", "burn_in", "chains")})
        settings["seed"] = cfg.seed
    report.record("estimation", "build_design", {"lags": model.lags},
                  detail={"nobs": an.design.nobs})
    report.record("estimation", "fit_varx_ols", {"robust_se": "HC1"})
    if an.draws is not None:
        report.record("estimation", "sample_posterior", settings,
                      detail={"converged": an.draws.converged})
    tables, csvs = [], []
    for eq in model.endogenous:
        s = equation_summary(an.ols, eq, robust=True)
        tables.append(s.to_text())
        csvs.append(s.to_csv() if not csvs else s.to_csv().split("\n", 1)[1])
    write("estimates.txt", "\n".join(tables))
    write("estimates.csv", "".join(csvs))
    if an.draws is not None:
        write("posterior_summary.csv", _posterior_csv(an.draws))
    stab = stability_check(an.estimate)
    lb = ljung_box(an.ols.residuals, cfg.pretests.ljung_box_h, fitted_lags=model.lags,
                   groups=an.design.firm, times=an.design.year)
    report.record("estimation", "ljung_box", {"h": cfg.pretests.ljung_box_h,
                                              "fitted_lags": model.lags})
    write("diagnostics.json", _json({"stable": stab.stable,
                                     "spectral_radius": stab.spectral_radius,
                                     "ljung_box": lb.to_dict()}))
    report.results["estimation"] = {"estimator": an.estimator, "nobs": an.design.nobs,
                                    "stable": stab.stable}
    return an


def _posterior_csv(draws: PosteriorDraws) -> str:
    t = draws.template
    q = draws.quantile([0.05, 0.5, 0.95])
    sd = draws.coef.std(axis=0, ddof=1) if draws.coef.shape[0] > 1 else np.zeros_like(q[0])
    mc = draws.mcse()
    rows = []
    for i, eq in enumerate(t.endog_names):
        for p, term in enumerate(t.regressor_names):
            rows.append([eq, term, float(t.coef[p, i]), float(sd[p, i]), float(q[0, p, i]),
                         float(q[1, p, i]), float(q[2, p, i]), float(mc[p, i])])
    return _rows_csv(["equation", "term", "mean", "sd", "q05", "q50", "q95", "mcse"], rows)


def _irf_stage(cfg, an: Analysis, report, write):
    irf = an.irf
    settings = {"kind": cfg.irf.kind, "horizon": cfg.irf.horizon,
                "accumulate": cfg.irf.accumulate, "ordering": cfg.irf.ordering}
    if an.draws is not None and irf.lower is not None:
        settings["quantiles"] = cfg.irf.quantiles
        report.record("irf", "irf_bands", settings,
                      detail={"excluded_fraction": irf.excluded_fraction})
    else:
        report.record("irf", "compute_irf", settings)
    write("irf.csv", irf.to_csv())
    if cfg.irf.plots:
        for imp in irf.names:
            write(f"plots/irf_{imp}.svg", irf_grid_svg(irf, imp))
        report.record("irf", "irf_grid_svg", {"impulses": list(irf.names)})
    focal = []
    for imp, resp in _focal_pairs(cfg, an.model):
        s = focal_summary(accumulate_irf(an.point_irf), imp, resp)
        if irf.lower is not None and irf.accumulated:
            lo, hi = irf.band(imp, resp)
            s["band_at_horizon"] = [float(lo[-1]), float(hi[-1])]
        focal.append(s)
    report.results["focal"] = focal


def _causality(cfg, an: Analysis, report, write):
    names = an.model.endogenous
    rows, text = [], []
    for effect in names:
        for cause in names:
            if cause == effect:
                continue
            r = granger_test(an.ols, an.design, cause, effect, cfg.causality.robust)
            rows.append([cause, effect, r.statistic, r.p_value, r.lags, r.nobs, r.df_denom,
                         "reject" if r.decision_at(cfg.causality.alpha) else "fail"])
            text.append(f"{cause} -> {effect} {r.to_text()}")
    report.record("causality", "granger_test", {"pairs": "all ordered pairs",
                                                "robust": cfg.causality.robust,
                                                "alpha": cfg.causality.alpha})
    write("granger.csv", _rows_csv(["cause", "effect", "F", "p_value", "df_num", "nobs",
                                    "df_denom", f"decision_{cfg.causality.alpha}"], rows))
    write("granger.txt", "\n".join(text) + "\n")
    report.results["granger"] = [
        {"cause": r[0], "effect": r[1], "F": r[2], "p_value": r[3]} for r in rows]


def _reverse(cfg, an: Analysis, report, write):
    pairs = _focal_pairs(cfg, an.model)
    rep = bidirectional_report(an.ols, an.design, pairs, int(cfg.irf.horizon),
                               cfg.causality.robust, irf_estimate=an.estimate)
    report.record("reverse", "bidirectional_report", {"pairs": pairs,
                                                      "horizon": cfg.irf.horizon})
    write("reverse.json", rep.to_text() + "\n")
    report.results["reverse"] = [c.to_dict() for c in rep.comparisons]


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

MODERATION_HEADER = ["split", "group", "status", "nobs", "impulse", "response", "peak",
                     "accumulated", "sign", "note"]


def moderation_suite(cfg: RunConfig, ds: PanelDataset | None = None,
                     report: RunReport | None = None) -> list[dict]:
    """Split-sample re-estimation for each configured split.

    The split variable leaves the control set (it is constant, or nearly so,
    within a group) while the remaining controls stay in. A group that cannot
    be estimated is reported as infeasible and the others proceed.
    """
    ds = ds if ds is not None else load_dataset(cfg)
    model = cfg.model_spec()
    rows = []
    for split in cfg.moderation.splits:
        rule = rule_from_config(split)
        groups = subsample(ds, rule)
        m = model.without_exogenous([rule.variable]) if cfg.moderation.drop_split_variable \
            else model
        note = "single group: comparison degenerate" if len(groups) == 1 else ""
        for label, sub in groups.items():
            try:
                an = analyse(sub, m, cfg)
            except ANALYSIS_ERRORS as exc:
                rows.append({"split": split["name"], "group": label, "status": "infeasible",
                             "nobs": 0, "note": f"{type(exc).__name__}: {exc}"})
                continue
            for imp, resp in _focal_pairs(cfg, m):
                s = focal_summary(accumulate_irf(an.point_irf), imp, resp)
                rows.append({"split": split["name"], "group": label, "status": "ok",
                             "nobs": an.design.nobs, "impulse": imp, "response": resp,
                             "peak": s["peak"], "accumulated": s["accumulated"],
                             "sign": s["sign"], "note": note})
        if report is not None:
            report.record("moderation", "subsample", dict(split),
                          detail={"groups": list(groups)})
    if report is not None:
        report.record("moderation", "analyse", {"estimator": cfg.estimator,
                                                "kind": cfg.irf.kind,
                                                "drop_split_variable":
                                                    cfg.moderation.drop_split_variable})
    return rows


ROBUSTNESS_HEADER = ["variant", "status", "nobs", "impulse", "response", "peak", "accumulated",
                     "sign", "sign_matches_base", "note"]


def _variant_setup(name: str, cfg: RunConfig, ds: PanelDataset, model: ModelSpec):
    """(dataset, model, estimator, kind, impulse swap, description) for one variant."""
    r = cfg.robustness
    est, kind, swap = cfg.estimator, cfg.irf.kind, {}
    if name == "proxy-swap":
        if r.proxy_from not in model.endogenous:
            raise ValueError(f"proxy {r.proxy_from!r} is not an endogenous variable")
        endo = tuple(r.proxy_to if v == r.proxy_from else v for v in model.endogenous)
        model = model.replace(endogenous=endo)
        swap = {r.proxy_from: r.proxy_to}
        desc = f"{r.proxy_from} replaced by {r.proxy_to}"
    elif name == "alt-lags":
        model = model.replace(lags=int(r.alt_lags))
        desc = f"lags = {r.alt_lags}"
    elif name == "prior-swap":
        est = {"bayes-wishart": "bayes-minnesota"}.get(cfg.estimator, "bayes-wishart")
        desc = f"estimator {est}"
    elif name == "oirf":
        kind = "oirf" if cfg.irf.kind == "girf" else "girf"
        desc = f"{kind} responses"
    elif name == "no-controls":
        model = model.replace(exogenous=())
        desc = "controls removed"
    elif name == "balanced":
        ds = subsample(ds, Balanced())
        desc = "balanced subpanel"
    elif name.startswith("exclude-"):
        vals = tuple(float(v) for v in name.split("-")[1:])
        ds = subsample(ds, ExcludeValues(r.outcome_variable, vals))
        desc = f"{r.outcome_variable} not in {list(vals)}"
    elif name.startswith("trim-"):
        p = float(name.split("-")[1])
        ds = subsample(ds, TrimPercentile(r.outcome_variable, p))
        desc = f"{r.outcome_variable} trimmed {p:g}% per tail"
    elif name == "unrestricted":
        est = "ols"
        desc = "least squares"
    else:  # pragma: no cover - validated in config
        raise ValueError(name)
    return ds, model, est, kind, swap, desc


def _switching_rows(cfg, ds, model, base_sign):
    r = cfg.robustness
    design = build_design(ds, model)
    note = ""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            res = fit_ms_varx(design, model, restarts=r.switching_restarts, seed=cfg.seed,
                              max_iter=r.switching_max_iter)
        except NonConvergent as exc:
            if exc.best is None:
                raise
            res, note = exc.best, "EM did not converge; best partial fit"
    rows = []
    kind = cfg.irf.kind
    for s in range(res.n_regimes):
        irf = accumulate_irf(regime_irf(res, s, int(cfg.irf.horizon), kind,
                                        cfg.irf.ordering if kind == "oirf" else None))
        share = float(res.smoothed[:, s].mean())
        for imp, resp in _focal_pairs(cfg, model):
            f = focal_summary(irf, imp, resp)
            rows.append([f"switching:regime{s}", "ok", design.nobs, imp, resp, f["peak"],
                         f["accumulated"], f["sign"], f["sign"] == base_sign.get((imp, resp)),
                         (note + "; " if note else "") + f"regime share {share:.3f}"])
    return rows, res


def robustness_suite(cfg: RunConfig, ds: PanelDataset | None = None,
                     base: Analysis | None = None, report: RunReport | None = None):
    """Re-run the focal analysis under each enabled variant.

    Returns the comparative rows (base first) and a flag saying whether every
    successful variant reproduces the base sign of every focal response.
    Variants fail independently.
    """
    ds = ds if ds is not None else load_dataset(cfg)
    model = cfg.model_spec()
    if not cfg.robustness.variants:
        return [], True
    base = base if base is not None else analyse(ds, model, cfg)
    base_sign = {}
    rows = []
    for imp, resp in _focal_pairs(cfg, model):
        f = focal_summary(accumulate_irf(base.point_irf), imp, resp)
        base_sign[(imp, resp)] = f["sign"]
        rows.append(["base", "ok", base.design.nobs, imp, resp, f["peak"], f["accumulated"],
                     f["sign"], True, f"{cfg.estimator}, {cfg.irf.kind}"])
    for name in cfg.robustness.variants:
        try:
            if name == "switching":
                srows, res = _switching_rows(cfg, ds, model, base_sign)
                rows.extend(srows)
                if report is not None:
                    report.record("robustness", "fit_ms_varx",
                                  {"restarts": cfg.robustness.switching_restarts,
                                   "max_iter": cfg.robustness.switching_max_iter,
                                   "seed": cfg.seed}, detail=res.to_dict())
                continue
            vds, vmodel, est, kind, swap, desc = _variant_setup(name, cfg, ds, model)
            an = analyse(vds, vmodel, cfg, estimator=est, kind=kind)
            inverse = {v: k for k, v in swap.items()}
            for imp, resp in _focal_pairs(cfg, vmodel, swap):
                f = focal_summary(accumulate_irf(an.point_irf), imp, resp)
                ref = base_sign.get((inverse.get(imp, imp), resp))
                rows.append([name, "ok", an.design.nobs, imp, resp, f["peak"], f["accumulated"],
                             f["sign"], f["sign"] == ref, desc])
            if report is not None:
                report.record("robustness", name, {"estimator": est, "kind": kind,
                                                   "lags": vmodel.lags, "description": desc})
        except ANALYSIS_ERRORS as exc:
            rows.append([name, "failed", 0, "", "", "", "", "", "",
                         f"{type(exc).__name__}: {exc}"])
            if report is not None:
                report.record("robustness", name, {}, "failed", str(exc))
    consistent = all(r[8] for r in rows if r[1] == "ok")
    return rows, consistent


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def _audit_config(cfg: RunConfig) -> dict:
    # the output location is not part of the analysis; leaving it out keeps
    # the tree relocatable and byte-identical across output directories
    d = cfg.to_dict()
    d.pop("output")
    return d


def run_pipeline(cfg: RunConfig, stages=None) -> RunReport:
    """Run the selected stages (all by default) and write outputs under ``cfg.output``.

    Stages needing estimates trigger the estimation stage. A failing stage is
    recorded in the report, later stages are skipped, and outputs written so
    far are kept. The report is always written as ``report.json``.
    """
    stages = tuple(STAGES if stages is None else stages)
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise ValueError(f"unknown stage {unknown[0]!r}")
    report = RunReport(_audit_config(cfg))
    write = _Writer(Path(cfg.output), report)
    needs_fit = {"estimation", "irf", "causality", "reverse"} & set(stages)
    current = "ingest"
    try:
        ds = load_dataset(cfg, report)
        model = cfg.model_spec()
        an = None
        for stage in STAGES:
            current = stage
            if stage == "pretests" and stage in stages and cfg.pretests.enabled:
                _pretests(cfg, ds, report, write)
            elif stage == "lag_selection" and stage in stages and cfg.lag_selection.enabled:
                _lag_selection(cfg, ds, model, report, write)
            elif stage == "estimation" and needs_fit:
                an = _estimation(cfg, ds, model, report, write,
                                 bands=cfg.irf.bands and "irf" in stages)
            elif stage == "irf" and stage in stages and cfg.irf.enabled:
                _irf_stage(cfg, an, report, write)
            elif stage == "causality" and stage in stages and cfg.causality.enabled:
                _causality(cfg, an, report, write)
            elif stage == "reverse" and stage in stages and cfg.causality.reverse:
                _reverse(cfg, an, report, write)
            elif stage == "moderation" and stage in stages and cfg.moderation.enabled:
                rows = moderation_suite(cfg, ds, report)
                write("moderation.csv", _rows_csv(
                    MODERATION_HEADER, [[r.get(k, "") for k in MODERATION_HEADER] for r in rows]))
                report.results["moderation"] = rows
            elif stage == "robustness" and stage in stages and cfg.robustness.enabled:
                rows, consistent = robustness_suite(cfg, ds, an, report)
                write("robustness.csv", _rows_csv(ROBUSTNESS_HEADER, rows))
                report.results["robustness"] = {
                    "rows": [dict(zip(ROBUSTNESS_HEADER, r)) for r in rows],
                    "signs_consistent": consistent}
    except ANALYSIS_ERRORS as exc:
        report.fail(current, exc)
    write("report.json", report.to_json())
    return report
