"""Grid orchestration and CSV emission for compression experiments."""
import csv
import io as _io
import math
from concurrent.futures import ProcessPoolExecutor

from .pipeline import CompressionConfig, build_stages, select_and_finish

CSV_COLUMNS = (
    "l",
    "delta",
    "eta",
    "seed",
    "M",
    "rate_bits",
    "h_rho_bits",
    "entropy_defect_bits",
    "c3_deviation",
    "c3_budget",
    "thm3_lower_bits",
    "success",
    "success_attempts",
)


def fmt(x):
    """Fixed 12 significant digits, '.' decimal; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return "%.12g" % x


def csv_row(summary):
    s = summary
    cond = s.get("conditions") or {}
    attempts = s.get("attempts") or []
    return {
        "l": s["l"],
        "delta": s["delta"],
        "eta": s.get("eta"),
        "seed": s["seed"],
        "M": s.get("M"),
        "rate_bits": s.get("rate_bits"),
        "h_rho_bits": s.get("H_rho_bits"),
        "entropy_defect_bits": s.get("entropy_defect_bits"),
        "c3_deviation": cond.get("C3"),
        "c3_budget": s.get("c3_budget"),
        "thm3_lower_bits": s.get("thm3_lower_bits"),
        "success": bool(s.get("success", False)),
        "success_attempts": len(attempts),
    }


def rows_to_csv(rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def _run_group(args):
    """All seeds of one (l, delta) cell; stages are shared across seeds."""
    rho, a, l, delta, seeds, opts, ensemble, F = args
    out = []
    try:
        bundle = build_stages(rho, a, l, delta, opts["cap_dim"], opts["cap_words"],
                              opts.get("check_props", True), opts["loewner_tol"])
    except Exception as exc:  # recorded per cell, the grid continues
        return [{"l": l, "delta": delta, "seed": s, "success": False, "error": f"{type(exc).__name__}: {exc}"}
                for s in seeds]
    for seed in seeds:
        try:
            cfg = CompressionConfig(l=l, delta=delta, eta=opts.get("eta"), M_override=opts.get("M_override"),
                                    seed=seed, nu=opts.get("nu", 1), loewner_tol=opts["loewner_tol"],
                                    povm_tol=opts["povm_tol"], cap_dim=opts["cap_dim"],
                                    cap_words=opts["cap_words"])
            res = select_and_finish(bundle, cfg, ensemble, F)
            s = res.summary()
            s["props_pass"] = res.props_pass
            out.append(s)
        except Exception as exc:
            out.append({"l": l, "delta": delta, "seed": seed, "success": False,
                        "error": f"{type(exc).__name__}: {exc}"})
    return out


def run_grid(rho, a, ls, deltas, seeds, workers=1, ensemble=None, F=None, **opts):
    """Summaries for every (l, delta, seed) in grid order."""
    defaults = {"cap_dim": 4096, "cap_words": 65536, "loewner_tol": 1e-9, "povm_tol": 1e-9}
    defaults.update({k: v for k, v in opts.items() if v is not None or k in ("eta", "M_override")})
    jobs = [(rho, a, int(l), float(d), list(seeds), defaults, ensemble, F) for l in ls for d in deltas]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            groups = list(ex.map(_run_group, jobs))
    else:
        groups = [_run_group(j) for j in jobs]
    out = []
    for g in groups:
        out.extend(g)
    return out


def summaries_to_rows(summaries):
    rows = []
    for s in summaries:
        if "error" in s:
            rows.append({c: None for c in CSV_COLUMNS} | {"l": s["l"], "delta": s["delta"], "seed": s["seed"],
                                                           "success": False, "success_attempts": 0})
        else:
            rows.append(csv_row(s))
    return rows
