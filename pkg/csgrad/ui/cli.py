from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import (
    configure_logging,
    get_default_deltas,
    get_error_floor,
    get_max_attempts,
    get_min_points,
    get_min_singular_value,
    get_output_format,
    get_rank_tol,
    init_env,
    load_app_config,
)
from ..domain.errors import ConfigError, CsgradError
from ..domain.estimate import CalculusDecomposition
from ..domain.functions import TestFunction
from ..domain.sample_set import SampleSet
from ..services.calculus import (
    gcscg_chain,
    gcscg_power,
    gcscg_product,
    gcscg_product_k,
    gcscg_quotient,
    gcsg_chain,
    gcsg_power,
    gcsg_product,
    gcsg_product_k,
    gcsg_quotient,
    make_chain_context,
    tables_for,
)
from ..services.evaluation import evaluate
from ..services.export_service import FORMATS, ExportService
from ..services.golden import GoldenSuite
from ..services.harness import (
    POWER_SWEEP_EXPONENT,
    MethodOptions,
    bound_for,
    estimate,
    input_dim,
    reference_point,
    sweep,
    sweep_methods,
)
from ..services.oracle import lookup, lookup_vector
from ..services.sampleset import generate, load_sample_set, scale
from ..services.simplexgrad import gcsg

logger = logging.getLogger(__name__)

COMMANDS = ("estimate", "rules", "sweep", "verify")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_ERROR = 2


@dataclass
class RunConfig:
    """
    1 回の実行設定。

    generate:
      - (n, m, seed)。sample_set と同時には指定できない
    methods:
      - gsg / gcsg / gcsg-average / gcscg:<rule>（product, product_k, power, quotient, exp, log, chain）
    with_functions:
      - gcscg:product / quotient は先頭の 1 個、product_k はすべてを因子に使う
    """

    command: str
    function: Optional[str] = None
    sample_set: Optional[str] = None
    generate: Optional[Tuple[int, int, int]] = None
    allow_degenerate: bool = False
    radius: Optional[float] = None
    methods: List[str] = field(default_factory=lambda: ["gcsg"])
    deltas: Optional[List[float]] = None
    fmt: Optional[str] = None
    out: Optional[str] = None
    with_functions: List[str] = field(default_factory=list)
    inner: Optional[str] = None
    exponent: float = POWER_SWEEP_EXPONENT
    config_path: Optional[str] = None


# --------------------------------------------------------
# 引数の解釈
# --------------------------------------------------------
def _parse_generate(text: str) -> Tuple[int, int, int]:
    try:
        n, m, seed = (int(v) for v in text.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f'--generate は "n,m,seed" の形式です（{text!r}）') from e
    return n, m, seed


def _parse_deltas(text: str) -> List[float]:
    parts = [p for p in text.split(",") if p.strip()]
    try:
        return [float(p) for p in parts]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"--deltas は実数のカンマ区切りです（{text!r}）") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csgrad",
        description="一般化（中心）シンプレックス勾配の推定・計算規則・収束実験",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--function", help="レジストリの関数名（例: quartic1d）")
    parser.add_argument("--sample-set", dest="sample_set", help='JSON ファイル {"x0": [...], "directions": [[...], ...]}')
    parser.add_argument("--generate", type=_parse_generate, help='"n,m,seed" で半径 1 の集合を生成')
    parser.add_argument("--degenerate", action="store_true", help="--generate でランク落ちに近い集合も許す")
    parser.add_argument("--radius", type=float, help="estimate / rules で集合を半径 Δ に拡大縮小する")
    parser.add_argument(
        "--method",
        dest="methods",
        action="append",
        help=f"手法（複数指定可）: {', '.join(sweep_methods())}",
    )
    parser.add_argument("--deltas", type=_parse_deltas, help="d1,d2,...（狭義単調減少）")
    parser.add_argument("--format", dest="fmt", choices=FORMATS)
    parser.add_argument("--out", help="出力先（省略時は標準出力。xlsx は必須）")
    parser.add_argument(
        "--with",
        dest="with_functions",
        action="append",
        help="積・商のもう一方の関数（複数指定で k 個の積）",
    )
    parser.add_argument("--inner", help="連鎖律の内側のベクトル値写像（gcscg:chain と rules）")
    parser.add_argument(
        "--exponent",
        "--k",
        dest="exponent",
        type=float,
        default=POWER_SWEEP_EXPONENT,
        help="べき乗則の指数（rules は整数のみ）",
    )
    parser.add_argument("--config", dest="config_path", help="config.json のパス")
    parser.add_argument("--log-level", dest="log_level")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=args.command,
        function=args.function,
        sample_set=args.sample_set,
        generate=args.generate,
        allow_degenerate=args.degenerate,
        radius=args.radius,
        methods=args.methods or ["gcsg"],
        deltas=args.deltas,
        fmt=args.fmt,
        out=args.out,
        with_functions=args.with_functions or [],
        inner=args.inner,
        exponent=args.exponent,
        config_path=args.config_path,
    )


# --------------------------------------------------------
# 共通処理
# --------------------------------------------------------
def _require_function(config: RunConfig) -> TestFunction:
    if not config.function:
        raise ConfigError("--function を指定してください")
    return lookup(config.function)


def _sample_set(config: RunConfig, cfg: Dict[str, Any], dim: int, x0: np.ndarray, label: str) -> SampleSet:
    if config.sample_set and config.generate:
        raise ConfigError("--sample-set と --generate は同時に指定できません")
    if config.sample_set:
        xs = load_sample_set(config.sample_set)
    elif config.generate:
        n, m, seed = config.generate
        xs = generate(
            n,
            m,
            seed,
            x0=x0 if n == dim else None,
            min_singular_value=get_min_singular_value(cfg),
            allow_degenerate=config.allow_degenerate,
            max_attempts=get_max_attempts(cfg),
        )
    else:
        raise ConfigError("サンプル集合を --sample-set か --generate で指定してください")
    if xs.n != dim:
        raise ConfigError(f"サンプル集合の次元 {xs.n} が {label} の次元 {dim} と一致しません")
    if config.radius is not None:
        xs = scale(xs, config.radius / float(np.max(np.linalg.norm(xs.directions, axis=1))))
    return xs


def _options(config: RunConfig) -> MethodOptions:
    return MethodOptions(
        partners=tuple(lookup(name) for name in config.with_functions),
        inner=lookup_vector(config.inner) if config.inner else None,
        k=config.exponent,
    )


def _method_set(config: RunConfig, cfg: Dict[str, Any], fn: TestFunction, opts: MethodOptions) -> SampleSet:
    """全ての手法が同じ空間にサンプル集合を置くことを確かめてから集合を作る。"""
    dims = {input_dim(method, fn, opts) for method in config.methods}
    if len(dims) > 1:
        raise ConfigError(f"手法ごとに入力次元が異なります（{sorted(dims)}）。chain は他の手法と別に実行してください")
    (dim,) = dims
    label = opts.inner.name if opts.inner is not None and dim != fn.dim else fn.name
    return _sample_set(config, cfg, dim, reference_point(config.methods[0], fn, opts), label)


def _vec(v: Sequence[float]) -> str:
    # repr は最短で往復可能な表現
    return "[" + ", ".join(repr(float(x)) for x in v) + "]"


# --------------------------------------------------------
# コマンド
# --------------------------------------------------------
def _run_estimate(config: RunConfig, cfg: Dict[str, Any]) -> int:
    fn = _require_function(config)
    opts = _options(config)
    xs = _method_set(config, cfg, fn, opts)
    rank_tol = get_rank_tol(cfg)
    for method in config.methods:
        est = estimate(method, fn, xs, rank_tol, opts)
        print(f"method={est.method} function={fn.name}")
        print(f"  gradient       = {_vec(est.value)}")
        print(f"  classification = {est.classification.value if est.classification else '-'}")
        print(f"  eval_count     = {est.eval_count}")
        print(f"  delta          = {est.delta!r}")
        report = bound_for(method, fn, xs, rank_tol=rank_tol, options=opts)
        if report is not None:
            shown = "n/a" if report.bound is None else f"{report.bound!r} ({report.comparison_space.value})"
            print(f"  bound          = {shown}")
    return EXIT_OK


def _print_decomposition(label: str, dec: CalculusDecomposition, gcscg_value: np.ndarray, direct: np.ndarray) -> None:
    print(f"{label}:")
    print(f"  rule_value = {_vec(dec.rule_value)}")
    print(f"  error_term = {_vec(dec.error_term)} (sign {dec.sign:+d})")
    print(f"  total      = {_vec(dec.total)}")
    print(f"  gcscg      = {_vec(gcscg_value)}")
    print(f"  direct     = {_vec(direct)}")


def _run_chain(config: RunConfig, cfg: Dict[str, Any], f: TestFunction) -> None:
    # --function が外側 f、--inner が内側 g。サンプル集合は g の定義域に置く
    inner = lookup_vector(config.inner)
    if inner.dim_out != f.dim:
        raise ConfigError(f"{inner.name} の値域の次元 {inner.dim_out} が {f.name} の次元 {f.dim} と一致しません")
    xs = _sample_set(config, cfg, inner.dim_in, inner.x0(), inner.name)
    tol = get_rank_tol(cfg)
    ctx = make_chain_context(xs, f, inner)
    composite = evaluate(lambda y: f(inner(y)), xs)
    direct = gcsg(xs, composite, tol).value
    print(f"chain: f={f.name}, g={inner.name}, Δ*={ctx.delta_star!r}")
    if ctx.constant_inner:
        print(f"  gcscg      = {_vec(gcscg_chain(ctx, tol).value)} (g は定数)")
        print(f"  direct     = {_vec(direct)}")
        return
    _print_decomposition("chain", gcsg_chain(ctx, composite, tol), gcscg_chain(ctx, tol).value, direct)


def _run_rules(config: RunConfig, cfg: Dict[str, Any]) -> int:
    f = _require_function(config)
    if config.inner:
        _run_chain(config, cfg, f)
        return EXIT_OK

    xs = _sample_set(config, cfg, f.dim, f.x0(), f.name)
    tol = get_rank_tol(cfg)
    (tf,) = tables_for([f], xs)

    k = config.exponent
    direct = gcsg(xs, evaluate(lambda y: f(y) ** k, xs), tol).value
    _print_decomposition(f"power k={k:g}", gcsg_power(xs, tf, k, tol), gcscg_power(xs, tf, k, tol).value, direct)

    partners = [lookup(name) for name in config.with_functions]
    for g in partners:
        if g.dim != f.dim:
            raise ConfigError(f"{f.name} と {g.name} の次元が一致しません")
    if partners:
        g = partners[0]
        (tg,) = tables_for([g], xs)
        direct = gcsg(xs, evaluate(lambda y: f(y) * g(y), xs), tol).value
        _print_decomposition("product", gcsg_product(xs, tf, tg, tol), gcscg_product(xs, tf, tg, tol).value, direct)
        direct = gcsg(xs, evaluate(lambda y: f(y) / g(y), xs), tol).value
        _print_decomposition(
            "quotient", gcsg_quotient(xs, tf, tg, tol), gcscg_quotient(xs, tf, tg, tol).value, direct
        )
    if len(partners) >= 2:
        factors = [f, *partners]
        tabs = tables_for(factors, xs)
        direct = gcsg(xs, evaluate(lambda y: float(np.prod([h(y) for h in factors])), xs), tol).value
        _print_decomposition(
            f"product k={len(factors)}",
            gcsg_product_k(xs, tabs, tol),
            gcscg_product_k(xs, tabs, tol).value,
            direct,
        )
    return EXIT_OK


def _run_sweep(config: RunConfig, cfg: Dict[str, Any]) -> int:
    fn = _require_function(config)
    opts = _options(config)
    geometry = _method_set(replace(config, radius=None), cfg, fn, opts)
    deltas = config.deltas if config.deltas is not None else get_default_deltas(cfg)
    records = [
        sweep(
            fn,
            geometry,
            deltas,
            method,
            rank_tol=get_rank_tol(cfg),
            error_floor=get_error_floor(cfg),
            min_points=get_min_points(cfg),
            options=opts,
        )
        for method in config.methods
    ]

    exporter = ExportService(cfg)
    fmt = config.fmt or get_output_format(cfg)
    if config.out:
        exporter.write(records, Path(config.out), fmt)
    elif fmt == "xlsx":
        raise ConfigError("xlsx 形式には --out が必要です")
    else:
        sys.stdout.write(exporter.to_csv(records) if fmt == "csv" else exporter.to_json(records))
    return EXIT_OK


def _run_verify(config: RunConfig, cfg: Dict[str, Any]) -> int:
    results = GoldenSuite(cfg).run()
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY_FAILED


_HANDLERS = {
    "estimate": _run_estimate,
    "rules": _run_rules,
    "sweep": _run_sweep,
    "verify": _run_verify,
}


def run(config: RunConfig) -> int:
    """設定に従って 1 コマンドを実行し、終了コードを返す。"""
    try:
        if config.command not in _HANDLERS:
            raise ConfigError(f"未知のコマンドです: {config.command}")
        cfg = load_app_config(config.config_path)
        return _HANDLERS[config.command](config, cfg)
    except CsgradError as e:
        logger.error(f"{config.command} に失敗しました: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


def main(argv: Optional[Sequence[str]] = None) -> int:
    init_env()
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    return run(config_from_args(args))
