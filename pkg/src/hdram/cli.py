"""Command-line entry point (``hdram``).

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 endpoint error.
Reports go to ``--out`` when given, otherwise to stdout.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from hdram import __version__
from hdram.bench import (
    API_KEY_ENV,
    BenchConfig,
    BenchReport,
    Endpoint,
    _provenance,
    atomic_write,
    emit_report,
    load_report,
    render,
    run_llm_bench,
    run_sim_bench,
)
from hdram.codebook import (
    Codebook,
    build_general_codebook,
    build_product_codebook,
    check_bifix_free,
    kraft_mcmillan_sum,
    pua_alphabets,
)
from hdram.diagnostics import (
    condition_numbers,
    coverage_estimate,
    estimate_rip_delta,
    jl_distortion,
    spectral_gap,
)
from hdram.errors import EndpointError, HdramError
from hdram.latent_channel import holobasis, init_embeddings, project_codebook
from hdram.promptc import (
    MODES,
    TokenizerProfile,
    compile_kv_prompt,
    load_prompt,
    load_vocab,
    verify_tokenization,
)
from hdram.store import BASELINE, HYPERTOKEN, arm_channel, arm_setup, child_seed

log = logging.getLogger("hdram")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_ENDPOINT = 3


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(x) for x in text.replace(",", " ").split()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None
    return parse


def _write(text: str, out):
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _emit(report: BenchReport, args):
    if args.out:
        emit_report(report, args.format, args.out)
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(render(report, args.format))


def _config(args, **extra) -> BenchConfig:
    return BenchConfig(
        seed=args.seed,
        dims=tuple(args.dims),
        pair_counts=tuple(args.pairs),
        sigmas=tuple(getattr(args, "sigmas", (0.0,))),
        trials=getattr(args, "trials", 1),
        tau=getattr(args, "tau", 1.0),
        output_path=args.out,
        **extra,
    )


# -- codebook ---------------------------------------------------------------

def cmd_codebook_gen(args):
    if args.words:
        words = [line.split() for line in Path(args.words).read_text(encoding="utf-8").splitlines() if line.strip()]
        cb = build_general_codebook(words)
    else:
        if args.alphabet:
            alphas = [a.split(",") for a in args.alphabet]
        else:
            alphas = pua_alphabets(args.pua_sizes or [2, 2])
        size = math.prod(len(a) for a in alphas)
        cb = build_product_codebook(alphas, args.capacity or size)
    _write(cb.to_json(), args.out)
    return EXIT_OK


def cmd_codebook_check(args):
    cb = Codebook.load(args.path)
    ok, violations = check_bifix_free(cb.codewords)
    q = max(len(a) for a in cb.alphabets)
    result = {
        "codewords": len(cb),
        "bifix_free": ok,
        "violations": [list(v) for v in violations],
        "min_distance": cb.min_distance,
        "kraft_mcmillan": kraft_mcmillan_sum(cb.codewords, q),
        "q": q,
    }
    _write(json.dumps(result, indent=2, ensure_ascii=False) + "\n", args.out)
    return EXIT_OK if ok else EXIT_VALIDATION


# -- simulate / diagnose ----------------------------------------------------

def cmd_simulate_recall(args):
    _emit(run_sim_bench(_config(args)), args)
    return EXIT_OK


def _diag_report(args, kind, rows, seeds):
    cfg = _config(args)
    cfg.validate()
    cols = tuple(rows[0]) if rows else ()
    return BenchReport(f"diagnose-{kind}", cols, rows, _provenance(cfg, seeds))


def _ht_channel(dim, n, seed):
    setup = arm_setup(n, HYPERTOKEN)
    table, phase = arm_channel(setup, dim, child_seed(seed, 0))
    return setup, table, phase


def cmd_diagnose(args):
    kind = args.what
    rows, seeds = [], []
    for ci, dim in enumerate(args.dims):
        cs = child_seed(args.seed, ci)
        seeds.append(cs)
        if kind == "rip":
            rng = np.random.default_rng(cs)
            P = rng.normal(0.0, 1.0 / math.sqrt(dim), size=(dim, args.input_dim))
            est = estimate_rip_delta(P, args.input_dim, args.k, args.samples, child_seed(cs, 1))
            rows.append({"dim": dim, "input_dim": args.input_dim, "k": args.k,
                         "samples": est.samples, "rip_delta": est.delta, "seed": cs})
        elif kind == "jl":
            rng = np.random.default_rng(cs)
            X = rng.normal(size=(args.points, args.input_dim))
            P = rng.normal(0.0, 1.0 / math.sqrt(dim), size=(dim, args.input_dim))
            rep = jl_distortion(X, P)
            rows.append({"dim": dim, "input_dim": args.input_dim, "points": args.points,
                         "distortion": rep.distortion, "pairs": rep.pairs, "seed": cs})
        else:
            for n in args.pairs:
                setup, table, phase = _ht_channel(dim, n, cs)
                row = {"dim": dim, "n": n, "seed": cs}
                if kind == "kappa":
                    basis, _ = holobasis(setup.key_codebook, table, phase)
                    base = arm_setup(n, BASELINE)
                    btable, _ = arm_channel(base, dim, child_seed(cs, 0))
                    rep = condition_numbers(basis, btable.rows([k.tokens[0] for k in base.keys]).T)
                    row.update(kappa_ht=rep.kappa_ht, kappa_raw=rep.kappa_raw, ratio=rep.ratio)
                elif kind == "spectrum":
                    rep = spectral_gap(project_codebook(setup.keys, table, phase), args.k)
                    row.update(k=args.k, lambda1=rep.lambda1, lambda2=rep.lambda2,
                               gap=rep.gap, ramanujan_bound=rep.ramanujan_bound)
                elif kind == "coverage":
                    # |HT| = n hypertoken symbols, each seen through its own embedding
                    symbols = pua_alphabets([n])[0].symbols
                    ht = init_embeddings(symbols, dim, child_seed(cs, 0)).matrix
                    rep = coverage_estimate(ht, args.c, args.delta, args.theta, args.queries, child_seed(cs, 2))
                    row.update(dataclasses.asdict(rep))
                rows.append(row)
    _emit(_diag_report(args, kind, rows, seeds), args)
    return EXIT_OK


# -- prompts ----------------------------------------------------------------

def _load_pairs(path, cb: Codebook):
    pairs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        rec = json.loads(line)
        try:
            pairs.append((cb[int(rec["key_index"])], str(rec["payload"])))
        except (KeyError, IndexError) as exc:
            raise HdramError(f"{path}:{lineno}: bad pair record ({exc})") from exc
    return pairs


def _profile(args):
    return TokenizerProfile.reference(load_vocab(args.vocab)) if args.vocab else None


def cmd_prompt_build(args):
    cb = Codebook.load(args.codebook)
    pairs = _load_pairs(args.pairs_file, cb)
    query = args.query_payload if args.query_payload is not None else cb[args.query_index]
    art = compile_kv_prompt(cb, pairs, query, args.mode, _profile(args), args.sep)
    if args.out:
        art.save(args.out)
    else:
        sys.stdout.write(art.text + "\n")
    if art.violations:
        for v in art.violations:
            log.warning("violation %s at %d..%d (%s)", v.kind, v.start, v.end, ascii(v.symbol))
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_prompt_verify(args):
    cb = Codebook.load(args.codebook)
    art = load_prompt(args.prompt, cb)
    violations = verify_tokenization(art, TokenizerProfile.reference(load_vocab(args.vocab)))
    out = [dataclasses.asdict(v) for v in violations]
    _write(json.dumps({"violations": out, "clean": not out}, indent=2, ensure_ascii=False) + "\n", args.out)
    return EXIT_OK if not out else EXIT_VALIDATION


def cmd_bench_llm(args):
    endpoint = Endpoint(args.endpoint_url, args.model, temperature=args.temperature,
                        max_retries=args.max_retries, concurrency=args.concurrency)
    cfg = _config(args, endpoint=endpoint)
    cb = Codebook.load(args.codebook)
    prompts = [load_prompt(p, cb) for p in args.prompts]
    controls = []
    if args.controls:
        ccb = Codebook.load(args.control_codebook) if args.control_codebook else cb
        controls = [load_prompt(p, ccb) for p in args.controls]
    report = run_llm_bench(cfg, prompts, controls)
    _emit(report, args)
    if report.rows and report.summary["failed"] == len(report.rows):
        log.error("every request failed; check --endpoint-url and connectivity")
        return EXIT_ENDPOINT
    return EXIT_OK


def cmd_report_convert(args):
    _emit(load_report(args.input), args)
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _common(p, grid=True, sim=False):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    if grid:
        p.add_argument("--dims", type=_csv_list(int), default=[64], help="latent dimensions, e.g. 64,128")
        p.add_argument("--pairs", type=_csv_list(int), default=[16], help="stored pair counts")
    if sim:
        p.add_argument("--sigmas", type=_csv_list(float), default=[0.0], help="channel noise stds")
        p.add_argument("--trials", type=int, default=100)
        p.add_argument("--tau", type=float, default=1.0, help="softmax temperature")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdram", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="group", required=True)

    cb = sub.add_parser("codebook", help="generate or check codebooks").add_subparsers(dest="action", required=True)
    p = cb.add_parser("gen", help="build a product (or general) codebook as JSON")
    p.add_argument("--alphabet", action="append", help="comma-separated symbols; repeat per position")
    p.add_argument("--pua-sizes", type=_csv_list(int), help="alphabet sizes drawn from the Private Use Area")
    p.add_argument("--capacity", type=int, help="number of codewords (default: full product)")
    p.add_argument("--words", help="file of whitespace-separated token sequences, one per line")
    p.add_argument("--out")
    p.set_defaults(func=cmd_codebook_gen)
    p = cb.add_parser("check", help="report bifix-freeness, distance and Kraft sum")
    p.add_argument("path")
    p.add_argument("--out")
    p.set_defaults(func=cmd_codebook_check)

    sim = sub.add_parser("simulate", help="Monte Carlo simulations").add_subparsers(dest="action", required=True)
    p = sim.add_parser("recall", help="hypertoken vs baseline recall over a grid")
    _common(p, sim=True)
    p.set_defaults(func=cmd_simulate_recall)

    p = sub.add_parser("diagnose", help="projection and codebook diagnostics")
    p.add_argument("what", choices=("rip", "jl", "kappa", "spectrum", "coverage"))
    _common(p)
    p.add_argument("--input-dim", type=int, default=256, help="ambient dimension for rip/jl")
    p.add_argument("--k", type=int, default=4, help="sparsity (rip) or neighbour count (spectrum)")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--c", type=float, help="coverage constant (required for coverage)")
    p.add_argument("--delta", type=float, help="coverage failure probability")
    p.add_argument("--theta", type=float, help="coverage visibility threshold")
    p.add_argument("--queries", type=int, default=10_000)
    p.set_defaults(func=cmd_diagnose)

    pr = sub.add_parser("prompt", help="compile and verify prompts").add_subparsers(dest="action", required=True)
    p = pr.add_parser("build", help="compile pairs into a prompt (+ .json sidecar)")
    p.add_argument("--codebook", required=True)
    p.add_argument("--pairs-file", required=True, help='JSON lines {"key_index": i, "payload": "..."}')
    p.add_argument("--query-index", type=int, default=0)
    p.add_argument("--query-payload", help="vk mode: query by payload text instead of index")
    p.add_argument("--mode", choices=MODES, default="kv")
    p.add_argument("--vocab", help="reference tokenizer vocabulary (one token per line)")
    p.add_argument("--sep", default="", help="separator between codeword tokens")
    p.add_argument("--out")
    p.set_defaults(func=cmd_prompt_build)
    p = pr.add_parser("verify", help="check hypertoken spans survive tokenization")
    p.add_argument("prompt")
    p.add_argument("--codebook", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_prompt_verify)

    bn = sub.add_parser("bench", help="external benchmarks").add_subparsers(dest="action", required=True)
    p = bn.add_parser("llm", help=f"score prompts against a chat endpoint (key from ${API_KEY_ENV})")
    _common(p, grid=False)
    p.add_argument("--endpoint-url", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--prompts", nargs="+", required=True)
    p.add_argument("--controls", nargs="*", default=[])
    p.add_argument("--control-codebook")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--concurrency", type=int, default=2)
    p.set_defaults(func=cmd_bench_llm, dims=[64], pairs=[16])

    rp = sub.add_parser("report", help="report utilities").add_subparsers(dest="action", required=True)
    p = rp.add_parser("convert", help="re-render a JSON report as csv or json")
    p.add_argument("input")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_report_convert)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "what", None) == "coverage" and None in (args.c, args.delta, args.theta):
        log.error("coverage needs explicit --c, --delta and --theta")
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except EndpointError as exc:
        log.error("endpoint error: %s", exc)
        return EXIT_ENDPOINT
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except (HdramError, ValueError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
