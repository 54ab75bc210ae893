"""Command-line front end: one subcommand per pipeline stage.

Stages hand off through files in ``--out-dir``::

    filter  samples        -> filtered.jsonl [+ test/train/rest.jsonl with --split]
    ground  filtered.jsonl -> grounded.jsonl, ground_rejects.jsonl
    chain   grounded.jsonl -> chained.jsonl, chain_rejects.jsonl
    emit    chained.jsonl  -> stage1.jsonl, stage2.jsonl, gold.jsonl, manifest.json
    infer   chained.jsonl  -> predictions.jsonl, infer_rejects.jsonl
    eval    predictions    -> scored.jsonl, eval.json
    report  scored.jsonl   -> report.json, report.txt

Exit codes: 0 success, 1 runtime failure (or rejects under --strict),
2 invalid configuration or arguments.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from . import __version__
from .chains import ChainBuilderConfig, build_chain, render_chain
from .clients import AUTH_TOKEN_ENV, ClientConfig, FixtureOcrClient, HttpModelClient, ModelClient, ScriptedModelClient
from .core import ChainedSample, Dataset, GroundedSample, PredictionRecord, Sample, Strategy
from .emitter import decompose, emit_stage2, gold_record, write_manifest
from .errors import ChainFailed, ClientError, GroundingFailed, PipelineError, TemplateError, UsageError
from .evaluation import MatchConfig, accuracy_report, rescore, run_strategy
from .filtering import STOPWORDS_VERSION, multi_region_ratio, passes_filter, split_dataset
from .grounding import GroundingConfig, ground_sample
from .prompts import TEMPLATES_VERSION, TemplateId, get_template, registry
from .records import iter_lines, read_records, write_json, write_lines, write_records

log = logging.getLogger("regionchain")

EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION = 0, 1, 2


class ConfigError(Exception):
    """Invalid run configuration; message starts with the offending key path."""


@dataclass
class RunConfig:
    seed: int = 0
    input: str | None = None
    ocr: str | None = None
    fixtures: str | None = None
    endpoint: str | None = None
    out_dir: str = "out"
    jobs: int = 4
    strict: bool = False
    split: bool = False
    dataset: str | None = None
    baseline: str = Strategy.DIRECT.value
    strategies: list[str] = field(default_factory=lambda: [s.value for s in Strategy])
    grounding: GroundingConfig = field(default_factory=GroundingConfig)
    chain: ChainBuilderConfig = field(default_factory=ChainBuilderConfig)
    match: MatchConfig = field(default_factory=MatchConfig)
    client: dict[str, Any] = field(default_factory=dict)

    def manifest_view(self) -> dict[str, Any]:
        """Settings that influence outputs; excludes out_dir, jobs and secrets."""
        return {
            "seed": self.seed,
            "input": self.input,
            "ocr": self.ocr,
            "fixtures": self.fixtures,
            "endpoint": self.endpoint,
            "dataset": self.dataset,
            "strategies": list(self.strategies),
            "baseline": self.baseline,
            "grounding": dataclasses.asdict(self.grounding),
            "chain": dataclasses.asdict(self.chain),
            "match": dataclasses.asdict(self.match),
            "stopwords_version": STOPWORDS_VERSION,
            "templates_version": TEMPLATES_VERSION,
        }


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

_SECTIONS: dict[str, type] = {"grounding": GroundingConfig, "chain": ChainBuilderConfig, "match": MatchConfig}
_CLIENT_KEYS = {"timeout_ms": int, "max_retries": int, "max_concurrent": int, "backoff_ms": int}
_PATH_KEYS = ("input", "ocr", "fixtures", "out_dir")


def _check_type(value: Any, default: Any, key: str) -> Any:
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{key}: expected {type(default).__name__}, got {value!r}")
    return value


def _section(cls: type, data: Any, name: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    defaults = cls()
    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError(f"{name}.{key}: unknown key")
        default = getattr(defaults, key)
        if default is None:
            if value is not None and (not isinstance(value, int) or isinstance(value, bool)):
                raise ConfigError(f"{name}.{key}: expected integer or null, got {value!r}")
        else:
            value = _check_type(value, default, f"{name}.{key}")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except UsageError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def config_from_dict(data: dict[str, Any], base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    if not isinstance(data, dict):
        raise ConfigError("<root>: expected an object")
    for key, value in data.items():
        if key in _SECTIONS:
            setattr(cfg, key, _section(_SECTIONS[key], value, key))
        elif key == "client":
            if not isinstance(value, dict):
                raise ConfigError("client: expected an object")
            for ck, cv in value.items():
                if ck == "endpoint":
                    cfg.endpoint = cv
                    continue
                if ck not in _CLIENT_KEYS:
                    raise ConfigError(f"client.{ck}: unknown key")
                if not isinstance(cv, int) or isinstance(cv, bool):
                    raise ConfigError(f"client.{ck}: expected int, got {cv!r}")
                cfg.client[ck] = cv
        elif key == "paths":
            if not isinstance(value, dict):
                raise ConfigError("paths: expected an object")
            for pk, pv in value.items():
                if pk not in _PATH_KEYS:
                    raise ConfigError(f"paths.{pk}: unknown key")
                if not isinstance(pv, str):
                    raise ConfigError(f"paths.{pk}: expected a string")
                setattr(cfg, pk, pv)
        elif key == "strategies":
            if not isinstance(value, list):
                raise ConfigError("strategies: expected a list")
            cfg.strategies = list(value)
        elif key in ("seed", "jobs"):
            setattr(cfg, key, _check_type(value, 0, key))
        elif key in ("strict", "split"):
            setattr(cfg, key, _check_type(value, False, key))
        elif key in ("endpoint", "dataset", "baseline"):
            setattr(cfg, key, value)
        else:
            raise ConfigError(f"{key}: unknown key")
    return cfg


def validate_config(cfg: RunConfig) -> RunConfig:
    if cfg.jobs < 1:
        raise ConfigError("jobs: must be >= 1")
    for i, s in enumerate(cfg.strategies):
        if s not in {m.value for m in Strategy}:
            raise ConfigError(f"strategies[{i}]: unknown strategy {s!r}")
    if cfg.baseline not in {m.value for m in Strategy}:
        raise ConfigError(f"baseline: unknown strategy {cfg.baseline!r}")
    if cfg.dataset is not None and cfg.dataset not in {d.value for d in Dataset}:
        raise ConfigError(f"dataset: unknown dataset {cfg.dataset!r}")
    for key in ("input", "ocr", "fixtures"):
        p = getattr(cfg, key)
        if p is not None and not Path(p).is_file():
            raise ConfigError(f"paths.{key}: no such file {p!r}")
    if cfg.endpoint is not None:
        try:
            _client_config(cfg)
        except UsageError as exc:
            raise ConfigError(f"client: {exc}") from None
    return cfg


def _client_config(cfg: RunConfig) -> ClientConfig:
    return ClientConfig(endpoint=cfg.endpoint or "", **cfg.client)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"--config: no such file {args.config!r}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--config: invalid JSON: {exc}") from None
        cfg = config_from_dict(data, cfg)
    # Flags win over the file.
    for name in ("seed", "jobs", "input", "ocr", "fixtures", "endpoint", "out_dir", "dataset", "baseline"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "strategies", None):
        cfg.strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if args.strict:
        cfg.strict = True
    if getattr(args, "split", False):
        cfg.split = True
    return validate_config(cfg)


# --------------------------------------------------------------------------
# Stage helpers
# --------------------------------------------------------------------------


def _out(cfg: RunConfig, name: str) -> Path:
    return Path(cfg.out_dir) / name


def _model(cfg: RunConfig) -> ModelClient:
    if cfg.fixtures:
        return ScriptedModelClient.from_file(cfg.fixtures)
    if cfg.endpoint:
        return HttpModelClient(_client_config(cfg))
    raise ConfigError("fixtures: either --fixtures or --endpoint is required for this stage")


def _stage_input(cfg: RunConfig, override: str | None, default: str) -> Path:
    path = Path(override) if override else _out(cfg, default)
    if not path.is_file():
        raise ConfigError(f"input: no such file {str(path)!r}")
    return path


def _existing(path: Path) -> list[dict[str, Any]]:
    return [rec for _, rec in iter_lines(path)] if path.is_file() else []


def _parallel(fn: Callable[[Any], Any], items: Sequence[Any], jobs: int) -> list[Any]:
    if jobs == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_manifest(cfg: RunConfig, stage: str, counts: dict[str, int], name: str | None = None) -> None:
    write_json(_out(cfg, name or f"{stage}.manifest.json"), write_manifest(cfg.manifest_view(), counts, stage=stage))


def _finish(cfg: RunConfig, rejects: int) -> int:
    if rejects and cfg.strict:
        log.error("%d rejected samples under --strict", rejects)
        return EXIT_RUNTIME
    return EXIT_OK


def _resumable_stage(
    cfg: RunConfig,
    stage: str,
    items: Sequence[Any],
    key: Callable[[Any], str],
    work: Callable[[Any], tuple[str, Any]],
    out_name: str,
    reject_name: str,
    record_key: Callable[[dict[str, Any]], str] = lambda r: r["sample_id"],
) -> tuple[int, int]:
    """Run ``work`` over items not already in the output or reject files.

    ``work`` returns ("ok", record_dict) or ("reject", reject_dict). Outputs
    are merged with previous results and written sorted by key.
    """
    out_path, rej_path = _out(cfg, out_name), _out(cfg, reject_name)
    done = _existing(out_path)
    rejected = _existing(rej_path)
    seen = {record_key(r) for r in done} | {record_key(r) for r in rejected}
    todo = [x for x in items if key(x) not in seen]
    if len(todo) < len(items):
        log.info("%s: resuming, %d of %d already done", stage, len(items) - len(todo), len(items))
    for status, rec in _parallel(work, todo, cfg.jobs):
        (done if status == "ok" else rejected).append(rec)
    done.sort(key=record_key)
    rejected.sort(key=record_key)
    write_lines(out_path, done)
    write_lines(rej_path, rejected)
    return len(done), len(rejected)


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_filter(cfg: RunConfig, args: argparse.Namespace) -> int:
    if not cfg.input:
        raise ConfigError("paths.input: required for filter")
    samples = read_records(cfg.input, Sample)
    ids = [s.sample_id for s in samples]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise ConfigError(f"input: duplicate sample_id {dup[0]!r}")
    if cfg.dataset:
        samples = [s for s in samples if s.dataset.value == cfg.dataset]
    kept = [s for s in samples if passes_filter(s)]
    stats: dict[str, Any] = {"datasets": {}}
    for ds in Dataset:
        total = sum(1 for s in samples if s.dataset is ds)
        if total:
            passed = sum(1 for s in kept if s.dataset is ds)
            stats["datasets"][ds.value] = {"total": total, "passed": passed, "failed": total - passed}
    stats["total"] = len(samples)
    stats["passed"] = len(kept)
    stats["failed"] = len(samples) - len(kept)
    write_records(_out(cfg, "filtered.jsonl"), sorted(kept, key=lambda s: s.sample_id))
    counts = {"input": len(samples), "passed": len(kept)}
    if cfg.split:
        test, train, rest = split_dataset(kept, cfg.seed)
        for name, part in (("test", test), ("train", train), ("rest", rest)):
            write_records(_out(cfg, f"{name}.jsonl"), sorted(part, key=lambda s: s.sample_id))
            counts[name] = len(part)
        stats["split"] = {"test": len(test), "train": len(train), "rest": len(rest)}
    write_json(_out(cfg, "filter_stats.json"), stats)
    _write_manifest(cfg, "filter", counts)
    print(f"filter: {len(kept)} passed, {len(samples) - len(kept)} failed")
    return EXIT_OK


def cmd_ground(cfg: RunConfig, args: argparse.Namespace) -> int:
    samples = read_records(_stage_input(cfg, args.input_override, "filtered.jsonl"), Sample)
    if not cfg.ocr:
        raise ConfigError("paths.ocr: OCR fixture file required for ground")
    model = _model(cfg)
    ocr = FixtureOcrClient.from_file(cfg.ocr)

    def work(sample: Sample) -> tuple[str, Any]:
        try:
            return "ok", ground_sample(model, ocr, sample, cfg.grounding).to_record()
        except (GroundingFailed, ClientError) as exc:
            log.warning("ground: rejecting %s: %s", sample.sample_id, exc)
            return "reject", {"sample_id": sample.sample_id, "reason": type(exc).__name__, "detail": str(exc)}

    n_ok, n_rej = _resumable_stage(
        cfg, "ground", samples, lambda s: s.sample_id, work, "grounded.jsonl", "ground_rejects.jsonl"
    )
    grounded = read_records(_out(cfg, "grounded.jsonl"), GroundedSample)
    stats: dict[str, Any] = {"grounded": n_ok, "rejected": n_rej, "multi_region_ratio": {}}
    for ds in Dataset:
        part = [g for g in grounded if g.sample.dataset is ds]
        if part:
            stats["multi_region_ratio"][ds.value] = round(multi_region_ratio(part), 6)
    if grounded:
        stats["multi_region_ratio"]["all"] = round(multi_region_ratio(grounded), 6)
    write_json(_out(cfg, "ground_stats.json"), stats)
    _write_manifest(cfg, "ground", {"grounded": n_ok, "rejected": n_rej})
    print(f"ground: {n_ok} grounded, {n_rej} rejected")
    return _finish(cfg, n_rej)


def cmd_chain(cfg: RunConfig, args: argparse.Namespace) -> int:
    grounded = read_records(_stage_input(cfg, args.input_override, "grounded.jsonl"), GroundedSample)
    model = _model(cfg)

    def work(gs: GroundedSample) -> tuple[str, Any]:
        try:
            chain = build_chain(model, gs, cfg.chain)
        except (ChainFailed, ClientError) as exc:
            log.warning("chain: rejecting %s: %s", gs.sample_id, exc)
            return "reject", {"sample_id": gs.sample_id, "reason": type(exc).__name__, "detail": str(exc)}
        return "ok", ChainedSample(gs, chain, render_chain(chain, gs)).to_record()

    n_ok, n_rej = _resumable_stage(
        cfg, "chain", grounded, lambda g: g.sample_id, work, "chained.jsonl", "chain_rejects.jsonl"
    )
    _write_manifest(cfg, "chain", {"chained": n_ok, "rejected": n_rej})
    print(f"chain: {n_ok} chained, {n_rej} rejected")
    return _finish(cfg, n_rej)


def cmd_emit(cfg: RunConfig, args: argparse.Namespace) -> int:
    chained = read_records(_stage_input(cfg, args.input_override, "chained.jsonl"), ChainedSample)
    chained.sort(key=lambda c: c.sample_id)
    stage1 = [r for c in chained for r in decompose(c.grounded, c.chain, c.chain_text)]
    stage2 = [emit_stage2(c.grounded, c.chain_text) for c in chained]
    golds = [gold_record(c.grounded) for c in chained]
    write_records(_out(cfg, "stage1.jsonl"), stage1)
    write_records(_out(cfg, "stage2.jsonl"), stage2)
    write_records(_out(cfg, "gold.jsonl"), golds)
    counts = {"samples": len(chained), "stage1": len(stage1), "stage2": len(stage2)}
    _write_manifest(cfg, "emit", counts, name="manifest.json")
    print(f"emit: {len(stage1)} stage-1 records, {len(stage2)} stage-2 records")
    return EXIT_OK


def _pred_key(rec: dict[str, Any]) -> str:
    return f"{rec['sample_id']}\x00{rec['strategy']}"


def cmd_infer(cfg: RunConfig, args: argparse.Namespace) -> int:
    chained = read_records(_stage_input(cfg, args.input_override, "chained.jsonl"), ChainedSample)
    model = _model(cfg)
    jobs = [(c, Strategy(s)) for c in chained for s in cfg.strategies]

    def work(job: tuple[ChainedSample, Strategy]) -> tuple[str, Any]:
        c, strategy = job
        try:
            pred = run_strategy(strategy, model, c.grounded, chain_text=c.chain_text, cfg=cfg.match)
        except ClientError as exc:
            log.warning("infer: %s/%s failed: %s", c.sample_id, strategy.value, exc)
            return "reject", {
                "sample_id": c.sample_id,
                "strategy": strategy.value,
                "reason": type(exc).__name__,
                "detail": str(exc),
            }
        return "ok", pred.to_record()

    n_ok, n_rej = _resumable_stage(
        cfg,
        "infer",
        jobs,
        lambda j: f"{j[0].sample_id}\x00{j[1].value}",
        work,
        "predictions.jsonl",
        "infer_rejects.jsonl",
        record_key=_pred_key,
    )
    _write_manifest(cfg, "infer", {"predictions": n_ok, "rejected": n_rej})
    print(f"infer: {n_ok} predictions, {n_rej} rejected")
    return _finish(cfg, n_rej)


def _grounded_index(cfg: RunConfig, path: str | None) -> dict[str, GroundedSample]:
    grounded = read_records(_stage_input(cfg, path, "grounded.jsonl"), GroundedSample)
    return {g.sample_id: g for g in grounded}


def cmd_eval(cfg: RunConfig, args: argparse.Namespace) -> int:
    preds = read_records(_stage_input(cfg, args.input_override, "predictions.jsonl"), PredictionRecord)
    index = _grounded_index(cfg, args.grounded)
    missing = sorted({p.sample_id for p in preds if p.sample_id not in index})
    if missing:
        raise PipelineError("unjoinable predictions: " + ", ".join(missing))
    scored = [rescore(p, index[p.sample_id].sample.answers, cfg.match) for p in preds]
    scored.sort(key=lambda p: (p.sample_id, list(Strategy).index(p.strategy)))
    write_records(_out(cfg, "scored.jsonl"), scored)
    report = accuracy_report(scored, index)
    write_json(_out(cfg, "eval.json"), report.to_dict())
    _write_manifest(cfg, "eval", {"predictions": len(scored), "correct": sum(p.correct for p in scored)})
    print(f"eval: {sum(p.correct for p in scored)}/{len(scored)} correct")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args: argparse.Namespace) -> int:
    preds = read_records(_stage_input(cfg, args.input_override, "scored.jsonl"), PredictionRecord)
    index = _grounded_index(cfg, args.grounded)
    report = accuracy_report(preds, index, baseline=cfg.baseline)
    write_json(_out(cfg, "report.json"), report.to_dict())
    text = report.render_text()
    Path(_out(cfg, "report.txt")).write_text(text, encoding="utf-8")
    _write_manifest(cfg, "report", {"predictions": len(preds)})
    sys.stdout.write(text)
    return EXIT_OK


def cmd_prompt_dump(args: argparse.Namespace) -> int:
    if args.list or not args.template:
        for tid, tpl in registry().items():
            print(f"{tid.value}\t{','.join(sorted(tpl.required_placeholders))}")
        return EXIT_OK
    bindings: dict[str, str] = {}
    for item in args.bind or ():
        if "=" not in item:
            raise ConfigError(f"--bind: expected name=value, got {item!r}")
        k, v = item.split("=", 1)
        bindings[k] = v
    try:
        tpl = get_template(args.template)
    except PipelineError as exc:
        raise ConfigError(f"--template: {exc}") from None
    if args.raw:
        sys.stdout.write(tpl.body + "\n")
        return EXIT_OK
    try:
        text = tpl.render(bindings)
    except TemplateError as exc:
        raise ConfigError(f"--bind: {exc}") from None
    sys.stdout.write(text + "\n")
    return EXIT_OK


STAGES: dict[str, Callable[[RunConfig, argparse.Namespace], int]] = {
    "filter": cmd_filter,
    "ground": cmd_ground,
    "chain": cmd_chain,
    "emit": cmd_emit,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "report": cmd_report,
}


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="worker threads per stage (default 4)")
    p.add_argument("--strict", action="store_true", help="exit 1 if any sample is rejected")
    p.add_argument("--fixtures", help="scripted model fixture file (offline mode)")
    p.add_argument("--endpoint", help=f"inference server base URL (token from ${AUTH_TOKEN_ENV})")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--ocr", help="OCR page fixture file")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regionchain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="apply per-dataset complexity rules")
    _common(p)
    p.add_argument("--input", help="sample records to filter")
    p.add_argument("--dataset", choices=[d.value for d in Dataset])
    p.add_argument("--split", action="store_true", help="also write test/train/rest splits")

    for name, helptext in (
        ("ground", "ground questions to OCR-corrected regions"),
        ("chain", "build relation-aware reasoning chains"),
        ("emit", "write two-stage training records"),
        ("infer", "run inference strategies"),
        ("eval", "score predictions"),
        ("report", "render accuracy and delta tables"),
    ):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--input", dest="input_override", help="stage input file (default: previous stage output)")
        if name == "infer":
            p.add_argument("--strategies", help="comma-separated strategy names")
        if name in ("eval", "report"):
            p.add_argument("--grounded", help="grounded records to join against")
        if name == "report":
            p.add_argument("--baseline", choices=[s.value for s in Strategy])

    p = sub.add_parser("prompt-dump", help="render a prompt template")
    p.add_argument("--template", choices=[t.value for t in TemplateId])
    p.add_argument("--bind", action="append", metavar="NAME=VALUE")
    p.add_argument("--raw", action="store_true", help="print the unrendered body")
    p.add_argument("--list", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Iterable[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "prompt-dump":
            return cmd_prompt_dump(args)
        cfg = resolve_config(args)
        return STAGES[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (PipelineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
