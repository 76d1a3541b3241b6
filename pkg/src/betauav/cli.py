"""Command-line front end.

Exit codes: 0 success, 1 validation or usage error, 2 when an attack attempt
was accepted.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import metrics, simnet
from .ledger import GasSchedule
from .report import Report

log = logging.getLogger("betauav")

CONFIG_ENV = "BETAUAV_CONFIG_DIR"
CONFIG_FILE = "config.json"

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_VIOLATION = 2

SCENARIO_SCHEMA = """\
scenario file (JSON object):
  seed                  int, default 0
  n_uavs, n_gcs         actor counts; actors are named uav0.., gcs0..
  t_s                   session interval in ms (default 600000)
  delta_fresh           freshness window in ms (default 1000)
  latency               {"base_ms": int, "jitter_ms": int}
  skew                  {"<actor>": clock offset ms}
  cert_lifetime         certificate expiry, ms of simulated epoch
  schedule              [{"time": ms, "actor": name, "action": "handshake"|"data"|"revoke",
                          "peer": name, "payload": text | "payload_hex": hex}]
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError("%s\n%s" % (message, self.format_usage()))


def load_config():
    d = os.environ.get(CONFIG_ENV)
    if not d:
        return {}
    path = Path(d) / CONFIG_FILE
    if not path.exists():
        return {}
    with open(path) as fh:
        return json.load(fh)


def gas_schedule_from(config):
    return GasSchedule(**config["gas"]) if "gas" in config else GasSchedule()


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("table", "machine"), default="table")
    common.add_argument("--out", help="write the report here instead of stdout")

    p = _Parser(prog="betauav", description="Blockchain-backed UAV authentication simulator")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sc = sub.add_parser("scenario", help="run a scenario file")
    scs = sc.add_subparsers(dest="scenario_cmd", parser_class=_Parser)
    scs.required = True
    run = scs.add_parser("run", parents=[common], epilog=SCENARIO_SCHEMA,
                         formatter_class=argparse.RawDescriptionHelpFormatter)
    run.add_argument("file")
    run.add_argument("--seed", type=int)

    at = sub.add_parser("attack", parents=[common], help="run an attack suite")
    at.add_argument("kind", choices=sorted(simnet.ATTACKS) + ["all"])
    at.add_argument("--attempts", type=int, default=1000)
    at.add_argument("--seed", type=int)
    at.add_argument("--scenario", help="base scenario file (default: built-in two-UAV run)")

    b = sub.add_parser("bench", parents=[common], help="time the cryptographic primitives")
    b.add_argument("--iters", type=int, default=1000)
    b.add_argument("--platform", default=None)

    sub.add_parser("gas-report", parents=[common], help="gas and ETH cost per contract call")

    cc = sub.add_parser("comm-cost", parents=[common], help="wire sizes of protocol messages")
    cc.add_argument("--data-len", type=int, default=0)

    dc = sub.add_parser("delay-curve", parents=[common], help="delay vs number of drones")
    dc.add_argument("--n", type=_int_list, default=[2, 4, 8, 16])
    dc.add_argument("--timings", choices=("pf1", "pf2", "measured"), default="pf1")
    dc.add_argument("--iters", type=int, default=200)
    return p


def _scenario_report(scenario, transcript, metrics_):
    rep = Report("scenario", ["send", "deliver", "from", "to", "kind", "outcome", "wire"],
                 title="Scenario seed=%d" % scenario.seed)
    for e in transcript:
        rep.add(send=e.send_time, deliver=e.deliver_time, **{"from": e.src}, to=e.dst,
                kind=e.kind, outcome=e.outcome.label, wire=e.wire.hex())
    for name in sorted(metrics_.per_actor):
        c = metrics_.per_actor[name]
        rep.note("ops-" + name, " ".join("%s=%d" % (k, c.get(k, 0)) for k in simnet.OP_NAMES))
    return rep


def _attack_report(reports):
    rep = Report("attack", ["attack", "attempts", "rejected", "accepted", "rejection_rate"],
                 title="Attack resistance")
    for r in reports:
        rep.add(attack=r.kind, attempts=r.attempts, rejected=r.rejected, accepted=r.accepted,
                rejection_rate="%.6f" % r.rejection_rate)
        for reason, n in sorted(r.reasons.items()):
            rep.note("%s reason %s" % (r.kind, reason), str(n))
    return rep


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write("error: %s\n" % exc)
        return EXIT_INVALID
    except SystemExit as exc:          # --help
        return EXIT_OK if not exc.code else EXIT_INVALID

    try:
        config = load_config()
        status = EXIT_OK
        if args.command == "scenario":
            scenario = simnet.Scenario.load(args.file)
            if args.seed is not None:
                scenario.seed = args.seed
            transcript, m = simnet.run_scenario(scenario)
            rep = _scenario_report(scenario, transcript, m)
        elif args.command == "attack":
            if args.attempts < 0:
                raise ValueError("--attempts must be non-negative")
            if args.scenario:
                base = simnet.Scenario.load(args.scenario)
            else:
                base = simnet.default_scenario(config.get("default_seed", 0))
            if args.seed is not None:
                base.seed = args.seed
            kinds = sorted(simnet.ATTACKS) if args.kind == "all" else [args.kind]
            reports = [simnet.ATTACKS[k](base, args.attempts) for k in kinds]
            if any(r.accepted for r in reports):
                status = EXIT_VIOLATION
            rep = _attack_report(reports)
        elif args.command == "bench":
            rep = metrics.bench_report(metrics.bench_primitives(args.iters, args.platform))
        elif args.command == "gas-report":
            rep = metrics.gas_report(schedule=gas_schedule_from(config))
        elif args.command == "comm-cost":
            rep = metrics.comm_report(metrics.comm_cost(args.data_len))
        else:
            if args.timings == "pf1":
                timings = metrics.PrimitiveTimings.reference_pf1()
            elif args.timings == "pf2":
                timings = metrics.PrimitiveTimings.reference_pf2()
            else:
                timings = metrics.bench_primitives(args.iters)
            rep = metrics.delay_report(metrics.delay_curve(args.n, timings))
    except (simnet.InvalidScenario, ValueError, OSError, TypeError) as exc:
        sys.stderr.write("error: %s\n" % exc)
        if isinstance(exc, simnet.InvalidScenario):
            sys.stderr.write(SCENARIO_SCHEMA)
        return EXIT_INVALID

    _emit(rep.render(args.format), args.out)
    if status == EXIT_VIOLATION:
        log.error("an attack attempt was accepted")
    return status


if __name__ == "__main__":
    sys.exit(main())
