"""Command-line surface.

Every subcommand writes its table to <out-dir>/<name>.<format> atomically
and prints the same bytes to stdout. Ordering is fully determined by the
input (villages, then layer registry order, then node id), so seeded runs
are byte-identical regardless of thread count.

Exit status: 0 success, 1 data/runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import io as tio
from .contagion import build_frame, contagion_screen, counterfactual_reduction, fit_frame
from .errors import DataError, TorquenetError
from .layers import LayerRegistry
from .metrics import edge_betweenness, layer_stats
from .pathways import (Direction, Mode, PathwayAnalyzer, PathwayConfig,
                       exposure_table, k_alter_counts, total_exposure)
from .simulate import ExperimentConfig, build_villages, end_to_end_experiment
from .torque import torque_all_layers

THREADS_ENV = "TORQUENET_THREADS"


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--edges", help="nomination CSV (village,ego,alter,layer)")
    common.add_argument("--attrs", help="attribute CSV with per-topic columns")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--seed", type=int, default=0, help="root random seed")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default ${THREADS_ENV} or 1)")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="output format")
    common.add_argument("--layers", default=None,
                        help="comma-separated layer registry override")

    parser = argparse.ArgumentParser(
        prog="torquenet",
        description="Multiplex nomination-network analytics: layer torque, "
                    "critical-pathway exposure, and counterfactual contagion "
                    "estimation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", parents=[common],
                       help="per-village, per-layer structural statistics")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("torque", parents=[common],
                       help="per-village, per-layer network torque")
    p.set_defaults(func=cmd_torque)

    p = sub.add_parser("correlates", parents=[common],
                       help="torque against prevalence, monoplexity, betweenness")
    p.set_defaults(func=cmd_correlates)

    p = sub.add_parser("exposure", parents=[common],
                       help="per-node critical-pathway exposure counts")
    p.add_argument("--topic", required=True)
    p.add_argument("--k", default="2", help="comma-separated hop counts from 2,3,4")
    p.add_argument("--mode", choices=("primary", "secondary"), default="secondary")
    p.add_argument("--direction", choices=("directed", "reversed"), default="directed")
    p.add_argument("--n-follows-mode", action="store_true",
                   help="apply the validity filter to the k-degree alter count too")
    p.set_defaults(func=cmd_exposure)

    p = sub.add_parser("screen", parents=[common],
                       help="per-topic significance of pooled exposure at each k")
    p.add_argument("--topics", default=None, help="comma list; default: all in attrs")
    p.add_argument("--k", default="2,3,4")
    p.add_argument("--direction", choices=("directed", "reversed"), default="directed")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("fit", parents=[common],
                       help="fit the adoption model for one layer and k")
    p.add_argument("--topic", required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--mode", choices=("primary", "secondary"), default="secondary")
    p.add_argument("--direction", choices=("directed", "reversed"), default="directed")
    p.add_argument("--dump-design", default=None,
                   help="also write the regression design matrix to this CSV path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("reduce", parents=[common],
                       help="counterfactual reduction per layer with bootstrap CI")
    p.add_argument("--topic", required=True)
    p.add_argument("--layer", default=None, help="one layer; default: all")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--mode", choices=("primary", "secondary"), default="secondary")
    p.add_argument("--direction", choices=("directed", "reversed"), default="directed")
    p.add_argument("--boot", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("simulate", parents=[common],
                       help="generate a synthetic dataset from a scenario file")
    p.add_argument("--config", default=None, help="INI scenario file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", parents=[common],
                       help="full synthetic pipeline: generate, diffuse, estimate")
    p.add_argument("--config", default=None, help="INI scenario file")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is None:
        args.threads = _default_threads()
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except TorquenetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


# -- shared helpers --------------------------------------------------


def _registry(args) -> LayerRegistry | None:
    if args.layers is None:
        return None
    names = tuple(x.strip() for x in args.layers.split(",") if x.strip())
    return LayerRegistry(names)


def _need(args, *fields) -> None:
    for f in fields:
        if getattr(args, f) is None:
            raise DataError(f"--{f} is required for this command")


def _emit(args, name: str, header, rows, payload) -> int:
    if args.format == "csv":
        text = tio.render_csv(header, rows)
    else:
        text = tio.render_json(payload)
    path = os.path.join(args.out_dir, f"{name}.{args.format}")
    tio.atomic_write_text(path, text)
    sys.stdout.write(text)
    return 0


def _map_villages(fn, keys, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, keys))
    return [fn(key) for key in keys]


def _parse_ks(raw: str) -> list[int]:
    try:
        ks = [int(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise DataError(f"bad --k value {raw!r}") from None
    if not ks or any(k not in (2, 3, 4) for k in ks):
        raise DataError("--k values must come from 2,3,4")
    return ks


# -- structural commands ---------------------------------------------


def cmd_metrics(args) -> int:
    _need(args, "edges")
    data = tio.load_edges(args.edges, registry=_registry(args))

    def one(village):
        net = data.networks[village]
        scores = edge_betweenness(net.composite())
        return [layer_stats(net, l, scores) for l in range(len(net.registry))]

    keys = sorted(data.networks)
    header = ["village", "layer", "prevalence", "clustering", "reachability",
              "monoplexity", "mean_edge_betweenness", "dyads", "nominations"]
    rows = []
    payload_rows = []
    for village, stats in zip(keys, _map_villages(one, keys, args.threads)):
        for st in stats:
            rows.append([village, st.layer, tio.fmt_fraction(st.prevalence),
                         tio.fmt_fraction(st.clustering),
                         tio.fmt_fraction(st.reachability),
                         tio.fmt_fraction(st.monoplexity),
                         tio.fmt_fraction(st.mean_edge_betweenness),
                         str(st.dyads), str(st.nominations)])
            payload_rows.append({
                "village": village, "layer": st.layer,
                "prevalence": st.prevalence, "clustering": st.clustering,
                "reachability": st.reachability, "monoplexity": st.monoplexity,
                "mean_edge_betweenness": st.mean_edge_betweenness,
                "dyads": st.dyads, "nominations": st.nominations,
            })
    return _emit(args, "metrics", header, rows,
                 {"command": "metrics", "rows": payload_rows})


def cmd_torque(args) -> int:
    _need(args, "edges")
    data = tio.load_edges(args.edges, registry=_registry(args))
    keys = sorted(data.networks)
    reports = _map_villages(lambda v: torque_all_layers(data.networks[v]),
                            keys, args.threads)
    header = ["village", "layer", "torque", "critical_pairs", "connected_pairs"]
    rows = []
    payload_rows = []
    for village, rep in zip(keys, reports):
        for layer, t, c in zip(rep.layers, rep.torque, rep.critical_pairs):
            rows.append([village, layer, tio.fmt_fraction(t), str(c),
                         str(rep.connected_pairs)])
            payload_rows.append({
                "village": village, "layer": layer, "torque": t,
                "critical_pairs": c, "connected_pairs": rep.connected_pairs,
            })
    return _emit(args, "torque", header, rows,
                 {"command": "torque", "rows": payload_rows})


def cmd_correlates(args) -> int:
    _need(args, "edges")
    data = tio.load_edges(args.edges, registry=_registry(args))
    keys = sorted(data.networks)

    def one(village):
        net = data.networks[village]
        scores = edge_betweenness(net.composite())
        rep = torque_all_layers(net)
        return [layer_stats(net, l, scores) for l in range(len(net.registry))], rep

    header = ["village", "layer", "prevalence", "monoplexity",
              "mean_edge_betweenness", "torque"]
    rows = []
    payload_rows = []
    for village, (stats, rep) in zip(keys, _map_villages(one, keys, args.threads)):
        for st, t in zip(stats, rep.torque):
            rows.append([village, st.layer, tio.fmt_fraction(st.prevalence),
                         tio.fmt_fraction(st.monoplexity),
                         tio.fmt_fraction(st.mean_edge_betweenness),
                         tio.fmt_fraction(t)])
            payload_rows.append({
                "village": village, "layer": st.layer,
                "prevalence": st.prevalence, "monoplexity": st.monoplexity,
                "mean_edge_betweenness": st.mean_edge_betweenness, "torque": t,
            })
    return _emit(args, "correlates", header, rows,
                 {"command": "correlates", "rows": payload_rows})


# -- exposure and estimation commands --------------------------------


def cmd_exposure(args) -> int:
    _need(args, "edges", "attrs")
    data, panels = tio.load_dataset(args.edges, args.attrs, registry=_registry(args))
    ks = _parse_ks(args.k)
    mode = Mode(args.mode)
    direction = Direction(args.direction)
    keys = sorted(data.networks)
    registry = data.registry

    def one(village):
        net = data.networks[village]
        panel = panels[village]
        analyzer = PathwayAnalyzer(net, validated=panel.validated(args.topic))
        cfgs = [PathwayConfig(layer=l, k=k, mode=mode, direction=direction)
                for l in range(len(registry)) for k in ks]
        return exposure_table(net, panel, cfgs, args.topic,
                              n_follows_mode=args.n_follows_mode,
                              analyzer=analyzer)

    rows = []
    payload_rows = []
    for village, tables in zip(keys, _map_villages(one, keys, args.threads)):
        names = data.node_ids[village]
        for cfg, records in tables:
            lname = registry.name_of(cfg.layer)
            rows.extend(tio.exposure_rows(village, names, lname, cfg.k,
                                          cfg.mode, cfg.direction, records))
            payload_rows.extend({
                "village": village, "node": names[r.node], "layer": lname,
                "k": cfg.k, "mode": cfg.mode.value,
                "direction": cfg.direction.value,
                "xi_L": r.xi_layer, "xi_notL": r.xi_rest, "N_k": r.k_alters,
            } for r in records)
    return _emit(args, "exposure", tio.EXPOSURE_HEADER, rows,
                 {"command": "exposure", "topic": args.topic, "rows": payload_rows})


def cmd_screen(args) -> int:
    _need(args, "edges", "attrs")
    data, panels = tio.load_dataset(args.edges, args.attrs, registry=_registry(args))
    ks = _parse_ks(args.k)
    direction = Direction(args.direction)
    if args.topics:
        topics = [t.strip() for t in args.topics.split(",") if t.strip()]
    else:
        topics = sorted({t for p in panels.values() for t in p.topics})
    if not topics:
        raise DataError("no topics found in the attribute file")
    keys = sorted(data.networks)

    def one(village):
        net = data.networks[village]
        panel = panels[village]
        expo = {}
        nk = {}
        for topic in topics:
            analyzer = PathwayAnalyzer(net, validated=panel.validated(topic))
            for k in ks:
                expo[(topic, k)] = total_exposure(net, panel, k, topic,
                                                  direction, analyzer=analyzer)
                nk[k] = k_alter_counts(net, k, direction, analyzer=analyzer)
        return expo, nk

    expo_by_tk = {(t, k): {} for t in topics for k in ks}
    n_by_k = {k: {} for k in ks}
    for village, (expo, nk) in zip(keys, _map_villages(one, keys, args.threads)):
        for tk, arr in expo.items():
            expo_by_tk[tk][village] = arr.astype(float)
        for k, arr in nk.items():
            n_by_k[k][village] = arr.astype(float)
    result = contagion_screen(panels, expo_by_tk, n_by_k, topics, ks, args.alpha)
    header = ["topic", "k", "coefficient", "std_error", "z", "p_value",
              "n_obs", "topic_passes"]
    rows = []
    payload_rows = []
    for r in result.rows:
        passes = result.passes(r.topic)
        rows.append([r.topic, str(r.k), tio.fmt_fraction(r.coefficient),
                     tio.fmt_fraction(r.std_error), tio.fmt_fraction(r.z),
                     tio.fmt_fraction(r.p_value), str(r.n_obs),
                     str(int(passes))])
        payload_rows.append({
            "topic": r.topic, "k": r.k, "coefficient": r.coefficient,
            "std_error": r.std_error, "z": r.z, "p_value": r.p_value,
            "n_obs": r.n_obs, "topic_passes": passes,
        })
    return _emit(args, "screen", header, rows,
                 {"command": "screen", "alpha": args.alpha, "rows": payload_rows})


def _layer_exposure_columns(data, panels, topic, layer_id, k, mode, direction,
                            threads):
    keys = sorted(data.networks)

    def one(village):
        net = data.networks[village]
        panel = panels[village]
        cfg = PathwayConfig(layer=layer_id, k=k, mode=mode, direction=direction)
        (_, records), = exposure_table(net, panel, cfg, topic)
        return (np.array([r.xi_layer for r in records], float),
                np.array([r.xi_rest for r in records], float),
                np.array([r.k_alters for r in records], float))

    cols = {"xi_layer": {}, "xi_rest": {}, "k_alters": {}}
    for village, (xl, xr, nk) in zip(keys, _map_villages(one, keys, threads)):
        cols["xi_layer"][village] = xl
        cols["xi_rest"][village] = xr
        cols["k_alters"][village] = nk
    return cols


def cmd_fit(args) -> int:
    _need(args, "edges", "attrs")
    data, panels = tio.load_dataset(args.edges, args.attrs, registry=_registry(args))
    layer_id = data.registry.id_of(args.layer)
    cols = _layer_exposure_columns(data, panels, args.topic, layer_id, args.k,
                                   Mode(args.mode), Direction(args.direction),
                                   args.threads)
    frame = build_frame(panels, args.topic, cols)
    model = fit_frame(frame, args.topic)
    if args.dump_design:
        design_rows = []
        for (village, node), y, xrow in zip(frame.rows, frame.y, frame.X):
            design_rows.append([village, panels[village].nodes[node],
                                tio.fmt_value(y)]
                               + [tio.fmt_value(v) for v in xrow])
        tio.atomic_write_text(args.dump_design, tio.render_csv(
            ["village", "node", "y"] + list(frame.columns), design_rows))
    header = ["term", "coefficient", "std_error", "z", "p_value"]
    rows = []
    payload_terms = []
    for name in frame.columns:
        z, p = model.wald(name)
        j = frame.columns.index(name)
        rows.append([name, tio.fmt_fraction(model.beta[j]),
                     tio.fmt_fraction(model.se[j]), tio.fmt_fraction(z),
                     tio.fmt_fraction(p)])
        payload_terms.append({"term": name, "coefficient": float(model.beta[j]),
                              "std_error": float(model.se[j]), "z": z, "p_value": p})
    payload = {
        "command": "fit", "topic": args.topic, "layer": args.layer,
        "k": args.k, "mode": args.mode, "direction": args.direction,
        "loglik": model.loglik, "null_loglik": model.null_loglik,
        "iterations": model.iterations, "grad_max": model.grad_max,
        "n_obs": frame.n, "n_dropped": frame.n_dropped, "terms": payload_terms,
    }
    return _emit(args, "fit", header, rows, payload)


def cmd_reduce(args) -> int:
    _need(args, "edges", "attrs")
    data, panels = tio.load_dataset(args.edges, args.attrs, registry=_registry(args))
    if args.layer is not None:
        layer_ids = [data.registry.id_of(args.layer)]
    else:
        layer_ids = list(range(len(data.registry)))
    header = ["topic", "layer", "k", "reduction", "ci_low", "ci_high", "level",
              "n_boot", "n_failed"]
    rows = []
    payload_rows = []
    for layer_id in layer_ids:
        lname = data.registry.name_of(layer_id)
        cols = _layer_exposure_columns(data, panels, args.topic, layer_id, args.k,
                                       Mode(args.mode), Direction(args.direction),
                                       args.threads)
        frame = build_frame(panels, args.topic, cols)
        model = fit_frame(frame, args.topic)
        est = counterfactual_reduction(model, lname, args.k, n_boot=args.boot,
                                       level=args.level, seed=args.seed,
                                       threads=args.threads)
        rows.append([args.topic, lname, str(args.k),
                     tio.fmt_fraction(est.reduction), tio.fmt_fraction(est.ci_low),
                     tio.fmt_fraction(est.ci_high), tio.fmt_fraction(est.level),
                     str(est.n_boot), str(est.n_failed)])
        payload_rows.append({
            "topic": args.topic, "layer": lname, "k": args.k,
            "reduction": est.reduction, "ci_low": est.ci_low,
            "ci_high": est.ci_high, "level": est.level,
            "n_boot": est.n_boot, "n_failed": est.n_failed,
        })
    return _emit(args, "reduce", header, rows,
                 {"command": "reduce", "rows": payload_rows})


# -- simulator commands ----------------------------------------------


def _scenario(args) -> ExperimentConfig:
    if args.config:
        return tio.parse_scenario(args.config)
    return ExperimentConfig()


def cmd_simulate(args) -> int:
    config = _scenario(args)
    nets, panels = build_villages(config, args.seed, args.threads)
    node_ids = {v: panels[v].nodes for v in panels}
    tio.write_edges_csv(os.path.join(args.out_dir, "edges.csv"), nets, node_ids)
    tio.write_attributes_csv(os.path.join(args.out_dir, "attributes.csv"), panels)
    header = ["village", "n", "households", "topic", "treated", "knowledgeable_w3"]
    rows = []
    payload_rows = []
    for village in sorted(panels):
        panel = panels[village]
        hh = len(np.unique(panel.household))
        for topic in panel.topics:
            treated = int(panel.intervened(topic).sum())
            k3 = np.asarray(panel.k_w3[topic])
            know = int(np.nansum(k3))
            rows.append([village, str(panel.n), str(hh), topic,
                         str(treated), str(know)])
            payload_rows.append({
                "village": village, "n": panel.n, "households": hh,
                "topic": topic, "treated": treated, "knowledgeable_w3": know,
            })
    return _emit(args, "simulate", header, rows,
                 {"command": "simulate", "seed": args.seed, "rows": payload_rows})


def cmd_experiment(args) -> int:
    config = _scenario(args)
    result = end_to_end_experiment(config, seed=args.seed, threads=args.threads)
    header = ["topic", "layer", "mean_torque", "transmitting", "reduction",
              "ci_low", "ci_high"]
    rows = []
    payload_rows = []
    for o in result.outcomes:
        rows.append([o.topic, o.layer, tio.fmt_fraction(o.mean_torque),
                     str(int(o.transmitting)), tio.fmt_fraction(o.reduction),
                     tio.fmt_fraction(o.ci_low), tio.fmt_fraction(o.ci_high)])
        payload_rows.append({
            "topic": o.topic, "layer": o.layer, "mean_torque": o.mean_torque,
            "transmitting": o.transmitting, "reduction": o.reduction,
            "ci_low": o.ci_low, "ci_high": o.ci_high,
        })
    slope_header = ["topic", "slope", "p_value"]
    slope_rows = [[t, tio.fmt_fraction(s), tio.fmt_fraction(p)]
                  for t, (s, p) in sorted(result.slopes.items())]
    slope_payload = [{"topic": t, "slope": s, "p_value": p}
                     for t, (s, p) in sorted(result.slopes.items())]
    code = _emit(args, "experiment", header, rows, {
        "command": "experiment", "seed": args.seed,
        "n_villages": result.n_villages, "rows": payload_rows,
        "slopes": slope_payload,
    })
    if args.format == "csv":
        text = tio.render_csv(slope_header, slope_rows)
        tio.atomic_write_text(
            os.path.join(args.out_dir, "experiment_slopes.csv"), text)
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
