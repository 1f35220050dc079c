"""Command-line driver for registration runs and experiment reports."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .config import dump_config, load_config
from .enrollment import TemplateStore
from .errors import ChillPassError
from .plotting import plot_report, sidecar_path
from .synth import Population, generate_population

log = logging.getLogger("chillpass")


def _population(args, config) -> Population:
    if getattr(args, "population", None):
        pop = Population.loads(Path(args.population).read_text(encoding="utf-8"))
        pop.check()
        return pop
    return generate_population(args.seed, config.simulation)


def _templates(args, config, population):
    """Templates from ``--store`` if given, otherwise a fresh in-memory run."""
    if getattr(args, "store", None):
        templates = TemplateStore(args.store).load_all()
        if not templates:
            raise ChillPassError(f"no templates in {args.store}; run 'enroll' first")
        return templates
    reg = harness.run_registration(config, population, args.seed)
    for sid, why in sorted(reg.failures.items()):
        log.warning("registration failed for %s: %s", sid, why)
    return reg.template_list()


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def cmd_population(args, config):
    _emit(generate_population(args.seed, config.simulation).dumps(), args.out)
    return 0


def cmd_enroll(args, config):
    population = _population(args, config)
    reg = harness.run_registration(config, population, args.seed, registered_at=args.registered_at)
    store = TemplateStore(args.store)
    for t in reg.template_list():
        path = store.save(t, replace_existing=args.replace)
        print(f"registered {t.subject_id} on {t.music_id} "
              f"[{t.segment.start_s:g}, {t.segment.end_s:g}] s after {reg.listens[t.subject_id]} listens -> {path}")
    for sid, why in sorted(reg.failures.items()):
        print(f"failed {sid}: {why}", file=sys.stderr)
    return 0 if reg.templates else 3


def cmd_matrix(args, config):
    population = _population(args, config)
    templates = _templates(args, config, population)
    probes = harness.default_probes(config, population, {t.subject_id: t for t in templates}, args.seed)
    report = harness.run_matrix(config, templates, probes)
    _emit(report.csv_text(), args.out)
    if args.out:
        side = sidecar_path(args.out)
        side.write_text(harness.dumps_json(harness.traces_document(templates, probes)), encoding="utf-8")
        sys.stdout.write(report.summary_text())
    else:
        sys.stderr.write(report.summary_text())
    return 0


def cmd_decay(args, config):
    population = _population(args, config)
    templates = _templates(args, config, population)
    drifts = [float(x) for x in args.drifts.split(",") if x.strip()]
    rows = harness.run_time_decay(config, population, templates, drifts, args.seed)
    _emit(harness.decay_csv_text(rows), args.out)
    return 0


def cmd_roc(args, config):
    thresholds = harness.parse_thresholds(args.thresholds)
    if args.report:
        rows = harness.read_report(Path(args.report).read_text(encoding="utf-8"))
    else:
        population = _population(args, config)
        templates = _templates(args, config, population)
        probes = harness.default_probes(config, population, {t.subject_id: t for t in templates}, args.seed)
        rows = harness.run_matrix(config, templates, probes).rows
    _emit(harness.roc_csv_text(harness.roc_sweep(config, rows, thresholds)), args.out)
    return 0


def cmd_calibrate(args, config):
    population = _population(args, config)
    scoring = harness.calibrate_scales(config, population, args.seed)
    log.info("penalty_scale_physio=%g penalty_scale_neuro=%g",
             scoring.penalty_scale_physio, scoring.penalty_scale_neuro)
    _emit(dump_config(config.__class__(config.validation, config.detector, scoring, config.simulation)),
          args.out)
    return 0


def cmd_plot(args, config):
    for path in plot_report(args.report, args.out, config.scoring.threshold):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base seed (default 0)")
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file; defaults are used when omitted")

    parser = argparse.ArgumentParser(prog="chillpass", parents=[common],
                                     description="Chill-response authentication experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("population", cmd_population, "write a synthetic population file")
    p.add_argument("--out")

    p = add("enroll", cmd_enroll, "register every subject and store the templates")
    p.add_argument("--population")
    p.add_argument("--store", required=True)
    p.add_argument("--replace", action="store_true", help="overwrite existing templates")
    p.add_argument("--registered-at", help="timestamp recorded in templates (default: now)")

    p = add("matrix", cmd_matrix, "score every probe against every template")
    p.add_argument("--population")
    p.add_argument("--store")
    p.add_argument("--out", help="report CSV; a .traces.json sidecar is written next to it")

    p = add("decay", cmd_decay, "later-day probes with drifted responses")
    p.add_argument("--population")
    p.add_argument("--store")
    p.add_argument("--drifts", default="3.41,6.73")
    p.add_argument("--out")

    p = add("roc", cmd_roc, "false acceptance / rejection rates over thresholds")
    p.add_argument("--thresholds", default="0:5:0.1", help="start:stop:step (inclusive) or a list")
    p.add_argument("--in", dest="report", help="existing report CSV; otherwise a matrix is run")
    p.add_argument("--population")
    p.add_argument("--store")
    p.add_argument("--out")

    p = add("calibrate", cmd_calibrate, "search penalty scales and emit a config")
    p.add_argument("--population")
    p.add_argument("--out")

    p = add("plot", cmd_plot, "SVG charts from a report CSV")
    p.add_argument("--in", dest="report", required=True)
    p.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.seed = getattr(args, "seed", 0)
    args.verbose = getattr(args, "verbose", False)
    args.config = getattr(args, "config", None)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except (ChillPassError, OSError, ValueError, KeyError) as exc:
        print(f"chillpass: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
