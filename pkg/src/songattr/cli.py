"""``songattr`` command line.

Subcommands share one set of flags and write into an output directory::

    out/
      manifest.json        run configuration, corpus digest, artifact hashes
      diagnostics.json     validate
      features.csv         features (plus features_dropped.json)
      screening.csv        screen, fit
      fit.json             fit
      loo.csv, loo.json    loo
      predictions.json     predict
      importance.csv       importance
      report/*.csv         report

Exit codes: 0 success, 1 invalid input (flags, corpus, grids), 2 runtime failure.

Every artifact is a function of the corpus bytes and the configuration. The
manifest timestamp honours ``SOURCE_DATE_EPOCH`` so that whole directories can
be compared byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .corpus import CorpusError, parse_corpus, validate_corpus
from .features import FeatureMatrix, build_matrix
from .metrics import accuracy_at, auc, histogram_by_class, kde_silverman, negative_log_likelihood, roc
from .pipeline import (
    LooRecord,
    PipelineConfig,
    calibrate_and_predict,
    final_details,
    fit_final,
    loo_calibration,
    predict_with_ci,
    prepare_matrix,
    variable_importance,
)
from .screening import screen
from .seeding import derive_seed

log = logging.getLogger("songattr")

COMMANDS = ("validate", "features", "screen", "fit", "loo", "predict", "importance", "report")
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    """Bad flags or flag values; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _reals(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _ids(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    d = PipelineConfig()
    p = _Parser(prog="songattr", description="Songwriter attribution from symbolic song encodings.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--corpus", required=True, type=Path, help="corpus JSON document")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=d.seed, help="master seed, unsigned 64-bit (default: 0)")
    p.add_argument("--threshold-grid", type=_reals, default=d.threshold_grid, metavar="CSV")
    p.add_argument("--alpha-grid", type=_reals, default=d.alpha_grid, metavar="CSV")
    p.add_argument("--n-lambda", type=int, default=d.n_lambda)
    p.add_argument("--min-ratio", type=float, default=d.min_ratio)
    p.add_argument("--folds", type=int, default=d.k_folds)
    p.add_argument("--mc-iters", type=int, default=d.mc_iterations)
    p.add_argument("--min-count", type=int, default=d.min_count)
    p.add_argument("--max-count", type=int, default=d.max_count)
    p.add_argument("--one-se", action="store_true", help="pick the largest penalty within one SE of the CV minimum")
    p.add_argument("--cut", type=float, default=0.5, help="probability cut for accuracy (default: 0.5)")
    p.add_argument("--targets", type=_ids, default=None, metavar="IDS",
                   help="song ids to predict (default: every song without a known author)")
    p.add_argument("--features", type=_ids, default=None, metavar="CODES",
                   help="feature codes for importance (default: nonzero coefficients of the final model)")
    p.add_argument("--threads", type=int, default=1, help="worker processes (default: 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> PipelineConfig:
    if not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    if not 0 <= args.cut <= 1:
        raise UsageError("--cut must be in [0, 1]")
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    try:
        return PipelineConfig(
            threshold_grid=args.threshold_grid,
            alpha_grid=args.alpha_grid,
            n_lambda=args.n_lambda,
            min_ratio=args.min_ratio,
            k_folds=args.folds,
            mc_iterations=args.mc_iters,
            min_count=args.min_count,
            max_count=args.max_count,
            seed=args.seed,
            one_se=args.one_se,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------- artifacts


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=1, sort_keys=False) + "\n").encode()


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode()


def _num(x) -> str:
    return repr(float(x))


class Run:
    """Output directory bound to one (corpus, configuration) pair."""

    def __init__(self, out: Path, corpus_bytes: bytes, cfg: PipelineConfig, cut: float):
        self.out = out
        self.cfg = cfg
        self.cut = cut
        self.corpus_digest = hashlib.sha256(corpus_bytes).hexdigest()
        ident = {"config": cfg.to_dict(), "cut": cut, "corpus_sha256": self.corpus_digest, "version": __version__}
        self.run_id = hashlib.sha256(json.dumps(ident, sort_keys=True).encode()).hexdigest()[:16]
        self.artifacts: dict[str, str] = {}
        previous = self._load_manifest()
        if previous is not None and previous.get("run_id") == self.run_id:
            # artifacts of an earlier subcommand of the same run stay listed
            self.artifacts = {k: v for k, v in previous.get("artifacts", {}).items() if (out / k).exists()}

    def _load_manifest(self):
        path = self.out / "manifest.json"
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text())
        except (OSError, ValueError):
            return None

    def cached(self, name: str) -> bytes | None:
        """Bytes of an artifact written earlier in this run, if unchanged on disk."""
        digest = self.artifacts.get(name)
        path = self.out / name
        if digest is None or not path.exists():
            return None
        data = path.read_bytes()
        return data if hashlib.sha256(data).hexdigest() == digest else None

    def write(self, name: str, data: bytes):
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.artifacts[name] = hashlib.sha256(data).hexdigest()
        log.info("wrote %s", path)

    def header(self) -> dict:
        return {"run_id": self.run_id}

    def finish(self):
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        stamp = int(epoch) if epoch is not None else int(time.time())
        manifest = {
            "tool": "songattr",
            "version": __version__,
            "run_id": self.run_id,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(stamp)),
            "seed": self.cfg.seed,
            "corpus_sha256": self.corpus_digest,
            "config": self.cfg.to_dict(),
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        self.write_manifest(manifest)

    def write_manifest(self, manifest: dict):
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "manifest.json").write_bytes(_json_bytes(manifest))


# ---------------------------------------------------------------- subcommands


def _loo_rows(records: list[LooRecord]):
    return [
        (r.song_id, r.true_label, _num(r.p_hat), _num(r.threshold_used), r.retained_feature_count,
         r.nonzero_count, r.fallback)
        for r in records
    ]


LOO_HEADER = ("song_id", "true_label", "p_hat", "threshold_used", "retained_feature_count", "nonzero_count",
              "fallback")


def _loo_summary(records: list[LooRecord], cut: float) -> dict:
    pairs = [(r.true_label, r.p_hat) for r in records]
    overall, per_class = accuracy_at(pairs, cut)
    return {
        "cut": cut,
        "accuracy": overall,
        "accuracy_by_class": {str(k): v for k, v in per_class.items()},
        "auc": auc([r.true_label for r in records], [r.p_hat for r in records]),
        "negative_log_likelihood": negative_log_likelihood(pairs),
        "thresholds_used": {_num(t): sum(r.threshold_used == t for r in records)
                            for t in sorted({r.threshold_used for r in records}, reverse=True)},
        "ll_by_threshold": {r.song_id: {_num(t): v for t, v in r.ll_by_threshold.items()} for r in records},
    }


def _records_from_cache(run: Run) -> list[LooRecord] | None:
    data, summary = run.cached("loo.csv"), run.cached("loo.json")
    if data is None or summary is None:
        return None
    ll = json.loads(summary)["ll_by_threshold"]
    out = []
    for row in csv.DictReader(io.StringIO(data.decode())):
        out.append(LooRecord(
            row["song_id"], int(row["true_label"]), float(row["p_hat"]), float(row["threshold_used"]),
            int(row["retained_feature_count"]), int(row["nonzero_count"]),
            {float(t): v for t, v in ll[row["song_id"]].items()}, row["fallback"],
        ))
    return out


def _loo(run: Run, m: FeatureMatrix, threads: int) -> list[LooRecord]:
    cached = _records_from_cache(run)
    if cached is not None:
        log.info("reusing leave-one-out records from %s", run.out)
        return cached
    records = loo_calibration(m, run.cfg, threads)
    _write_loo(run, records)
    return records


def _write_loo(run: Run, records: list[LooRecord]):
    run.write("loo.csv", _csv_bytes(LOO_HEADER, _loo_rows(records)))
    run.write("loo.json", _json_bytes({**run.header(), **_loo_summary(records, run.cut)}))


def _targets(args, corpus, m: FeatureMatrix) -> list[str]:
    if args.targets is None:
        return [s.id for s in corpus.songs if s.label is None]
    unknown = [t for t in args.targets if t not in m.song_ids]
    if unknown:
        raise UsageError(f"unknown target song ids: {', '.join(unknown)}")
    return list(args.targets)


def _cached_predictions(run: Run, targets: list[str]) -> list[dict] | None:
    cached = run.cached("predictions.json")
    if cached is not None:
        doc = json.loads(cached)
        if [p["song_id"] for p in doc["predictions"]] == targets:
            return doc["predictions"]
    return None


def _write_predictions(run: Run, reports) -> list[dict]:
    preds = [
        {"song_id": r.song_id, "p_hat": r.p_hat, "ci_low": r.ci_low, "ci_high": r.ci_high,
         "loo_prediction_set": list(r.loo_prediction_set)}
        for r in reports
    ]
    run.write("predictions.json", _json_bytes({**run.header(), "predictions": preds}))
    return preds


def _predict(run: Run, m: FeatureMatrix, targets: list[str], threads: int) -> list[dict]:
    cached = _cached_predictions(run, targets)
    if cached is not None:
        return cached
    return _write_predictions(run, predict_with_ci(m, targets, run.cfg, threads) if targets else [])


def cmd_validate(args, run, corpus):
    diags = validate_corpus(corpus)
    run.write("diagnostics.json", _json_bytes([d.to_dict() for d in diags]))
    for d in diags:
        print(f"{d.level}: {d.location + ': ' if d.location else ''}{d.message}", file=sys.stderr)
    return EXIT_INVALID if any(d.level == "error" for d in diags) else EXIT_OK


def cmd_features(args, run, corpus):
    raw = build_matrix(corpus)
    m = prepare_matrix(corpus, run.cfg)
    run.write("features.csv", m.to_csv().encode())
    observed = raw.observed_counts()
    run.write("features_dropped.json", _json_bytes({
        **run.header(),
        "min_count": run.cfg.min_count,
        "max_count": run.cfg.max_count,
        "dropped": [{"code": c, "count": n} for c, n in m.dropped],
        "observed_categories": {fam.value: n for fam, n in observed.items()},
        "matrix_sha256": hashlib.sha256(m.to_csv().encode()).hexdigest(),
    }))
    return EXIT_OK


def _screening_rows(results):
    return [(r.feature.code, _num(r.statistic), _num(r.p_value), int(r.retained)) for r in results]


def cmd_screen(args, run, corpus):
    m = prepare_matrix(corpus, run.cfg)
    t = max(run.cfg.threshold_grid)
    results = screen(m, t, run.cfg.mc_iterations, derive_seed(run.cfg.seed, "screen"))
    run.write("screening.csv", _csv_bytes(("feature", "statistic", "p_value", "retained"), _screening_rows(results)))
    return EXIT_OK


def cmd_fit(args, run, corpus):
    m = prepare_matrix(corpus, run.cfg)
    final = fit_final(m, run.cfg)
    details = final_details(m, run.cfg, final)
    model = final.model
    doc = {
        **run.header(),
        "threshold": final.threshold,
        "ll_by_threshold": {_num(t): v for t, v in final.selection.ll.items()},
        "threshold_fallbacks": list(final.selection.fallbacks),
        "retained_count": final.retained_count,
        "nonzero_count": model.nonzero,
        "fallback": model.fallback,
        "intercept": model.beta0,
        "coefficients": model.coefficients(),
    }
    if details is not None:
        curve, fitted = details
        doc["alpha"] = fitted.tuning.alpha
        doc["lambda"] = fitted.tuning.lam
        doc["convergence"] = {"iterations": fitted.iterations, "converged": fitted.converged,
                              "max_change": fitted.max_change}
        doc["cv_curve"] = [{"alpha": a, "lambda": lam, "mean_nll": mu, "se_nll": se}
                           for a, lam, mu, se in curve.rows()]
    run.write("screening.csv", _csv_bytes(("feature", "statistic", "p_value", "retained"),
                                          _screening_rows(final.screening)))
    run.write("fit.json", _json_bytes(doc))
    return EXIT_OK


def cmd_loo(args, run, corpus):
    m = prepare_matrix(corpus, run.cfg)
    records = _loo(run, m, args.threads)
    s = _loo_summary(records, run.cut)
    print(f"accuracy {s['accuracy']:.3f}  auc {s['auc']:.3f}  nll {s['negative_log_likelihood']:.3f}")
    return EXIT_OK


def cmd_predict(args, run, corpus):
    m = prepare_matrix(corpus, run.cfg)
    for p in _predict(run, m, _targets(args, corpus, m), args.threads):
        print(f"{p['song_id']}: {p['p_hat']:.3f} [{p['ci_low']:.3f}, {p['ci_high']:.3f}]")
    return EXIT_OK


def cmd_importance(args, run, corpus):
    m = prepare_matrix(corpus, run.cfg)
    baseline = _loo(run, m, args.threads)
    base = auc([r.true_label for r in baseline], [r.p_hat for r in baseline])
    codes = args.features
    if codes is None:
        model = fit_final(m, run.cfg).model
        codes = [c for c, b in model.coefficients().items() if b != 0.0]
    table = variable_importance(m, codes, run.cfg, args.threads, baseline=baseline)
    table.sort(key=lambda row: (row[1], row[0]))
    run.write("importance.csv", _csv_bytes(("feature", "auc_without", "auc_drop"),
                                           [(c, _num(v), _num(base - v)) for c, v in table]))
    return EXIT_OK


def cmd_report(args, run, corpus):
    m = prepare_matrix(corpus, run.cfg)
    targets = _targets(args, corpus, m)
    records = _records_from_cache(run)
    preds = _cached_predictions(run, targets)
    if records is None and preds is None:
        records, reports = calibrate_and_predict(m, targets, run.cfg, args.threads)
        _write_loo(run, records)
        preds = _write_predictions(run, reports)
    elif records is None:
        records = _loo(run, m, args.threads)
    elif preds is None:
        preds = _predict(run, m, targets, args.threads)
    pairs = [(r.true_label, r.p_hat) for r in records]
    run.write("report/histogram.csv", _csv_bytes(
        ("bin_low", "bin_high", "count_class0", "count_class1"),
        [(_num(lo), _num(hi), c0, c1) for lo, hi, c0, c1 in histogram_by_class(pairs)]))
    curve = roc(pairs)
    run.write("report/roc.csv", _csv_bytes(
        ("threshold", "fpr", "tpr"),
        [(_num(t), _num(f), _num(p)) for t, f, p in zip(curve.thresholds, curve.fpr, curve.tpr)]))
    run.write("report/threshold_ll.csv", _csv_bytes(
        ("song_id", "threshold", "negative_log_likelihood"),
        [(r.song_id, _num(t), _num(v)) for r in records for t, v in sorted(r.ll_by_threshold.items(), reverse=True)]))
    rows = []
    for p in preds:
        grid, dens = kde_silverman(p["loo_prediction_set"])
        rows.extend((p["song_id"], _num(g), _num(v)) for g, v in zip(grid, dens))
    run.write("report/kde.csv", _csv_bytes(("song_id", "p", "density"), rows))
    print(f"auc {curve.auc:.3f}; report written to {run.out / 'report'}")
    return EXIT_OK


HANDLERS = {
    "validate": cmd_validate,
    "features": cmd_features,
    "screen": cmd_screen,
    "fit": cmd_fit,
    "loo": cmd_loo,
    "predict": cmd_predict,
    "importance": cmd_importance,
    "report": cmd_report,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = config_from_args(args)
        try:
            corpus_bytes = args.corpus.read_bytes()
        except OSError as exc:
            raise UsageError(f"cannot read corpus: {exc}") from None
        corpus = parse_corpus(corpus_bytes)
        out = Run(args.out, corpus_bytes, cfg, args.cut)
        code = HANDLERS[args.command](args, out, corpus)
        out.finish()
        return code
    except (UsageError, CorpusError) as exc:
        print(f"songattr: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"songattr: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
