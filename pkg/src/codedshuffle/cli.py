"""codedshuffle command-line driver.

Exit codes: 0 success, 1 usage, 2 parameter violation, 3 protocol failure.
Flags override CSH_* environment variables, which override built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from itertools import combinations, product
from pathlib import Path

from .analysis import predictions_from_meta, reconcile
from .camr import MultiJobSpec, predict_loads_multi, run_multi_job
from .design import DesignParams, enumerate_groups, make_design, missing_point
from .errors import CodedShuffleError, ParameterError, ProtocolError, ReportError
from .exchange import (Chunk, ExchangeRound, canonical_matching, decode_round, encode_round,
                       random_matching)
from .simnet import COST_MODES, CostModel, ShuffleTranscript
from .simnet.audit import group_count_audit
from .simnet.pipeline import run_pipeline
from .singlejob import SingleJobSpec, predict_loads
from .workloads.matvec import (generate_matvec_jobs, load_jobs, matvec_camr, matvec_uncoded,
                               save_jobs)
from .workloads.sort import SortWorkload, generate_records, sampled_splitters, split_records
from .workloads.wordcount import (MultiWordCount, WordCountWorkload, choose_vocabulary,
                                  generate_text)

log = logging.getLogger("codedshuffle")

EXIT_USAGE, EXIT_PARAM, EXIT_PROTOCOL = 1, 2, 3


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def env_int(name: str, default: int | None) -> int | None:
    raw = os.environ.get(f"CSH_{name}")
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"CSH_{name} must be an integer, got {raw!r}") from None


def env_str(name: str, default: str | None) -> str | None:
    return os.environ.get(f"CSH_{name}", default)


def add_design_args(p: argparse.ArgumentParser):
    p.add_argument("--q", type=int, default=env_int("Q", 2), help="blocks per parallel class")
    p.add_argument("--k", type=int, default=env_int("K", 3), help="number of parallel classes")


def add_run_args(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=env_int("SEED", 0))
    p.add_argument("--cost-model", choices=COST_MODES, default=env_str("COST_MODEL", "multicast-once"))
    p.add_argument("--per-receiver-accounting", action="store_true",
                   help="shorthand for --cost-model per-receiver")
    p.add_argument("--header-bytes", type=int, default=env_int("HEADER_BYTES", 0))
    p.add_argument("--matching", choices=("canonical", "random"),
                   default=env_str("MATCHING", "canonical"))
    p.add_argument("--report", type=Path, help="write the report here instead of stdout")
    p.add_argument("--transcript", type=Path, help="also write the full transcript JSON")


def build_parser() -> Parser:
    parser = Parser(prog="codedshuffle", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=Parser)

    p = sub.add_parser("gen-design", help="write the design, its classes and groups as JSON")
    add_design_args(p)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("gen-data", help="generate sort records, text, or matvec jobs")
    kind = p.add_mutually_exclusive_group(required=True)
    kind.add_argument("--records", type=int, help="number of 100-byte records")
    kind.add_argument("--lines", type=int, help="number of text lines")
    kind.add_argument("--matvec", action="store_true", help="matrix-vector jobs")
    p.add_argument("--J", type=int, default=4)
    p.add_argument("--m", type=int, default=120)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--dtype", choices=("int64", "float64"), default="int64")
    p.add_argument("--seed", type=int, default=env_int("SEED", 0))
    p.add_argument("--out", type=Path, required=True, help="file (records, text) or directory")

    p = sub.add_parser("run-single", help="run the single-job coded shuffle")
    add_design_args(p)
    p.add_argument("--Q", type=int, default=env_int("FUNCTIONS", None), help="functions (default K)")
    p.add_argument("--workload", choices=("wordcount", "sort"), default=env_str("WORKLOAD", "wordcount"))
    p.add_argument("--input", type=Path, help="input file; generated when omitted")
    p.add_argument("--size", type=int, default=env_int("SIZE", 600),
                   help="records (sort) or lines (wordcount) to generate")
    p.add_argument("--splitters", choices=("equal", "sampled"), default="equal")
    p.add_argument("--concat-rounds", action="store_true")
    p.add_argument("--no-baseline", action="store_true", help="skip the uncoded comparison run")
    add_run_args(p)

    p = sub.add_parser("run-multi", help="run the multi-job aggregated shuffle")
    add_design_args(p)
    p.add_argument("--gamma", type=int, default=env_int("GAMMA", 1), help="files per batch")
    p.add_argument("--Q", type=int, default=env_int("FUNCTIONS", None), help="functions per job")
    p.add_argument("--workload", choices=("wordcount", "matvec"), default=env_str("WORKLOAD", "wordcount"))
    p.add_argument("--input", type=Path, help="matvec job directory from gen-data")
    p.add_argument("--size", type=int, default=env_int("SIZE", 60), help="text lines per job")
    p.add_argument("--m", type=int, help="matvec rows (default 20K)")
    p.add_argument("--n", type=int, help="matvec columns (default 2k)")
    add_run_args(p)

    p = sub.add_parser("verify", help="run design and exchange property checks")
    add_design_args(p)
    p.add_argument("--rounds", type=int, default=50, help="random exchange rounds per group size")
    p.add_argument("--seed", type=int, default=env_int("SEED", 0))

    p = sub.add_parser("report", help="render a transcript as a comparison table")
    p.add_argument("--transcript", type=Path, required=True)
    p.add_argument("--format", choices=("json", "csv", "markdown"), default="json")
    p.add_argument("--report", type=Path)

    p = sub.add_parser("audit", help="count communicators needed by each scheme")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    add_design_args(p)
    p.add_argument("--report", type=Path)
    return parser


def emit(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)
        log.info("wrote %s", path)


def cost_model_of(args) -> CostModel:
    mode = "per-receiver" if args.per_receiver_accounting else args.cost_model
    return CostModel(mode, args.header_bytes)


def matching_of(args):
    return random_matching(args.seed) if args.matching == "random" else canonical_matching


def dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=str) + "\n"


def cmd_gen_design(args) -> int:
    design = make_design(args.q, args.k)
    emit(design.to_json(enumerate_groups(design)), args.out)
    return 0


def cmd_gen_data(args) -> int:
    if args.records is not None:
        if args.records < 0:
            raise ParameterError("record count must be non-negative")
        args.out.write_bytes(generate_records(args.records, args.seed))
    elif args.lines is not None:
        args.out.write_bytes(generate_text(args.lines, args.seed))
    else:
        jobs = generate_matvec_jobs(args.J, args.m, args.n, args.seed, dtype=args.dtype)
        save_jobs(jobs, args.out, args.dtype)
    log.info("wrote %s", args.out)
    return 0


def single_inputs(args, params: DesignParams, Q: int):
    if args.workload == "sort":
        data = args.input.read_bytes() if args.input else generate_records(args.size, args.seed)
        records = split_records(data)
        splitters = sampled_splitters(records, Q, seed=args.seed) if args.splitters == "sampled" else None
        wl = SortWorkload(Q, splitters)
    else:
        data = args.input.read_bytes() if args.input else generate_text(args.size, args.seed)
        wl = WordCountWorkload(choose_vocabulary(data, Q))
    return wl, wl.split(data, params.N)


def write_transcript(transcript: ShuffleTranscript, path: Path | None):
    if path is not None:
        path.write_text(transcript.to_json())
        log.info("wrote transcript %s", path)


def cmd_run_single(args) -> int:
    params = DesignParams(args.q, args.k)
    Q = args.Q if args.Q is not None else params.K
    if Q <= 0 or Q % params.K:
        raise ParameterError(f"Q must be a multiple of K = kq = {params.K} (got Q={Q})")
    wl, files = single_inputs(args, params, Q)
    spec = SingleJobSpec(params, Q, files, wl, args.concat_rounds)
    cm = cost_model_of(args)
    transcript, reports, _ = run_pipeline("single", spec, cm, args.seed, matching_of(args))
    out = {"protocol": "single", "params": {"q": params.q, "k": params.k, "K": params.K,
                                            "N": params.N, "Q": Q},
           "reports": [r.to_dict() for r in reports],
           "phase_bytes": transcript.phase_totals,
           "entries": len(transcript.entries),
           "predictions": {k: str(v) for k, v in predict_loads(params).items()},
           "comparison": reconcile(transcript).rows}
    if not args.no_baseline:
        base, base_reports, _ = run_pipeline("uncoded", spec, cm, args.seed)
        out["baseline"] = {"reports": [r.to_dict() for r in base_reports],
                           "comparison": reconcile(base).rows}
    write_transcript(transcript, args.transcript)
    emit(dump(out), args.report)
    return 0


def cmd_run_multi(args) -> int:
    params = DesignParams(args.q, args.k)
    Q = args.Q if args.Q is not None else params.K
    if Q <= 0 or Q % params.K:
        raise ParameterError(f"Q must be a multiple of K = kq = {params.K} (got Q={Q})")
    cm = cost_model_of(args)
    preds = {k: str(v) for k, v in predict_loads_multi(params).items()}
    out = {"protocol": "multi", "predictions": preds,
           "params": {"q": params.q, "k": params.k, "K": params.K, "J": params.N, "Q": Q,
                      "gamma": args.gamma}}
    if args.workload == "matvec":
        if Q != params.K:
            raise ParameterError("matvec computes exactly Q = K row segments per job")
        if args.gamma != 1:
            raise ParameterError("matvec uses one block-column per batch (gamma = 1)")
        if args.input:
            jobs, dtype = load_jobs(args.input)
        else:
            m = args.m or 20 * params.K
            n = args.n or 2 * params.k
            dtype = "int64"
            jobs = generate_matvec_jobs(params.N, m, n, args.seed)
        coded = matvec_camr(jobs, params.q, params.k, dtype, cm, args.seed)
        plain = matvec_uncoded(jobs, params.q, params.k, dtype, cm, args.seed)
        transcript = coded.transcript
        out["reports"] = [r.to_dict() for r in coded.reports]
        out["baseline"] = {"reports": [r.to_dict() for r in plain.reports]}
        out["map_cost"] = {"camr": max(coded.map_cost.values()),
                           "uncoded": max(plain.map_cost.values())}
        out["shuffle_bytes"] = {"camr": coded.transcript.total_bytes,
                                "uncoded": plain.transcript.total_bytes}
    else:
        N = params.k * args.gamma
        texts = [generate_text(args.size, args.seed + j) for j in range(params.N)]
        vocabs = [choose_vocabulary(t, Q) for t in texts]
        files = [WordCountWorkload(v).split(t, N) for v, t in zip(vocabs, texts)]
        spec = MultiJobSpec(params, Q, args.gamma, files, MultiWordCount(vocabs))
        res = run_multi_job(spec, cm, args.seed, matching_of(args))
        transcript = res.transcript
        out["reports"] = [r.to_dict() for r in res.reports]
    out["phase_bytes"] = transcript.phase_totals
    out["comparison"] = reconcile(transcript).rows
    write_transcript(transcript, args.transcript)
    emit(dump(out), args.report)
    return 0


def verify_design(q: int, k: int) -> list[tuple[str, bool]]:
    d = make_design(q, k)
    N = d.N
    blocks = {s: set(d.block(s)) for s in range(1, d.K + 1)}
    checks = []
    checks.append(("classes partition the points", all(
        sorted(p for s in cls for p in blocks[s]) == list(range(1, N + 1)) for cls in d.classes)))
    checks.append(("block size q^(k-2)", all(len(b) == q ** (k - 2) for b in blocks.values())))
    ok = True
    for chosen in combinations(range(k), k - 1):
        for picks in product(*(d.classes[c] for c in chosen)):
            ok &= len(set.intersection(*(blocks[s] for s in picks))) == 1
    checks.append(("k-1 blocks from distinct classes meet in one point", ok))
    groups = enumerate_groups(d)
    checks.append(("group count q^(k-1)(q-1)", len(groups) == q ** (k - 1) * (q - 1)))
    member = {s: sum(s in g.members for g in groups) for s in blocks}
    checks.append(("each block in q^(k-2)(q-1) groups",
                   set(member.values()) == {q ** (k - 2) * (q - 1)}))
    ok = True
    for g in groups:
        ok &= not set.intersection(*(blocks[s] for s in g.members))
        for m in range(1, k + 1):
            pt = missing_point(d, g, m)
            others = set.intersection(*(blocks[s] for i, s in enumerate(g.members, 1) if i != m))
            ok &= others == {pt} and pt not in blocks[g.members[m - 1]]
    checks.append(("groups have empty intersection and unique missing points", ok))
    return checks


def verify_exchange(k_values, rounds: int, seed: int) -> list[tuple[str, bool]]:
    rng = random.Random(seed)
    checks = []
    for k in k_values:
        ok = True
        for _ in range(rounds):
            B = rng.randint(1, 4096)
            chunks = [Chunk(rng.randbytes(B), j) for j in range(1, k + 1)]
            packets = encode_round(chunks)
            rnd = ExchangeRound(k, (B,) * k)
            ok &= sum(len(p.payload) for p in packets) == k * -(-B // (k - 1))
            for m in range(1, k + 1):
                local = {j: c.payload for j, c in enumerate(chunks, 1) if j != m}
                got = decode_round(rnd, [p for p in packets if p.sender != m], local, m)
                ok &= got.payload == chunks[m - 1].payload
        checks.append((f"exchange round-trip k={k}", ok))
    return checks


def cmd_verify(args) -> int:
    checks = verify_design(args.q, args.k)
    checks += verify_exchange(sorted({2, args.k}), args.rounds, args.seed)
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    if not all(ok for _, ok in checks):
        raise ProtocolError("property check failed")
    return 0


def cmd_report(args) -> int:
    transcript = ShuffleTranscript.from_json(args.transcript.read_text())
    comp = reconcile(transcript, predictions_from_meta(transcript.meta))
    text = {"json": lambda: comp.to_json() + "\n", "csv": comp.to_csv,
            "markdown": comp.to_markdown}[args.format]()
    emit(text, args.report)
    return 0


def cmd_audit(args) -> int:
    emit(dump(group_count_audit(args.K, args.r, args.q, args.k)), args.report)
    return 0


COMMANDS = {"gen-design": cmd_gen_design, "gen-data": cmd_gen_data, "run-single": cmd_run_single,
            "run-multi": cmd_run_multi, "verify": cmd_verify, "report": cmd_report,
            "audit": cmd_audit}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        build_parser().print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (ParameterError, ReportError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARAM
    except ProtocolError as e:
        print(f"protocol failure: {e}", file=sys.stderr)
        return EXIT_PROTOCOL
    except CodedShuffleError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PROTOCOL
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
