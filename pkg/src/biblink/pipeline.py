"""End-to-end run: ingest, sample, query, match, evaluate, report."""

from __future__ import annotations

import json
import logging
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import (
    BibRecord,
    FieldSample,
    IngestError,
    filter_min_field_size,
    ingest_records,
    sample_per_field,
    write_rejects,
)
from .indexclient import ClientConfig, IndexClient, TransactionLedger, ledger_report
from .matcher import (
    MatchDecision,
    MatchRules,
    doi_filter,
    doi_matches,
    metadata_filter,
)
from .metrics import (
    FieldReport,
    StrategyStats,
    country_match_rates,
    field_precision_recall,
    geometric_mean,
    returned_precision,
    spearman,
)
from .mockindex import CorruptionProfile, TruthEntry, build_index, ledger_predicts_retrieval, write_ledger
from .mockindex.service import InProcessTransport
from .queryexpr import QueryBuildError, Strategy, build_query, serialize_query
from .reports import FORMATS, Table, correlation_table, country_table, emit_report, strategy_table

__all__ = [
    "FILTER_MODES",
    "ConfigError",
    "PipelineConfig",
    "PipelineError",
    "RunResult",
    "load_records",
    "run_pipeline",
]

logger = logging.getLogger(__name__)

FILTER_MODES = ("doi", "metadata", "metadata_then_doi_check")
MOCK_BASE_URL = "mock://index"


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    pass


@dataclass
class PipelineConfig:
    inputs: list[str] = field(default_factory=list)
    input_format: str | None = None
    strategies: list[Strategy] = field(default_factory=lambda: list(Strategy))
    rules: MatchRules = field(default_factory=MatchRules)
    filter_mode: str = "doi"
    client: ClientConfig | None = None
    mock_profile: CorruptionProfile | None = None
    sample_n: int = 400
    seed: int = 0
    min_field_size: int = 50
    out_dir: str = "out"
    report_format: str = "csv"
    fields: list[str] | None = None
    field_names: dict[str, str] = field(default_factory=dict)
    workers: int = 4
    retrieval_threshold: float = 0.8
    correlation_strategy: Strategy | None = None

    def validate(self) -> None:
        if not self.inputs:
            raise ConfigError("no input files")
        if not self.strategies:
            raise ConfigError("strategy set is empty")
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError("duplicate strategies")
        if self.filter_mode not in FILTER_MODES:
            raise ConfigError(f"filter mode must be one of {FILTER_MODES}")
        if (self.client is None) == (self.mock_profile is None):
            raise ConfigError("configure exactly one of a live client or a mock profile")
        if self.sample_n < 1 or self.min_field_size < 1:
            raise ConfigError("sample size and minimum field size must be positive")
        if self.report_format not in FORMATS:
            raise ConfigError(f"report format must be one of {sorted(FORMATS)}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.input_format not in (None, "csv", "jsonl"):
            raise ConfigError("input format must be csv or jsonl")
        if self.correlation_strategy is not None and self.correlation_strategy not in self.strategies:
            raise ConfigError("correlation strategy is not among the requested strategies")

    @property
    def key_strategy(self) -> Strategy:
        """Strategy used for the country and correlation tables."""
        if self.correlation_strategy is not None:
            return self.correlation_strategy
        return Strategy.TITLE_ONLY if Strategy.TITLE_ONLY in self.strategies else self.strategies[0]

    @classmethod
    def from_dict(cls, data: Mapping) -> PipelineConfig:
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "strategies" in data:
                data["strategies"] = [Strategy(s) for s in data["strategies"]]
            if data.get("correlation_strategy") is not None:
                data["correlation_strategy"] = Strategy(data["correlation_strategy"])
            if "rules" in data:
                data["rules"] = MatchRules(**data["rules"])
            if data.get("client") is not None:
                client = dict(data["client"])
                if "attributes" in client:
                    client["attributes"] = tuple(client["attributes"])
                data["client"] = ClientConfig(**client)
            if data.get("mock_profile") is not None:
                data["mock_profile"] = CorruptionProfile.from_dict(data["mock_profile"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(**data)

    def to_dict(self) -> dict:
        data = asdict(self)
        # output location and worker count do not change results
        data.pop("out_dir")
        data.pop("workers")
        data["strategies"] = [s.value for s in self.strategies]
        if self.correlation_strategy is not None:
            data["correlation_strategy"] = self.correlation_strategy.value
        if data["client"] is not None:
            data["client"].pop("api_key", None)
            data["client"]["attributes"] = list(data["client"]["attributes"])
        return data


@dataclass
class RunResult:
    out_dir: Path
    files: list[Path]
    reports: list[FieldReport]
    transactions: dict
    recall_check: list[dict] = field(default_factory=list)
    metadata_check: list[FieldReport] = field(default_factory=list)


def _format_for(path: str, configured: str | None) -> str:
    if configured:
        return configured
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".ndjson"):
        return "jsonl"
    if suffix == ".csv":
        return "csv"
    raise ConfigError(f"cannot infer input format of {path}; pass --format")


def load_records(paths: Sequence[str], input_format: str | None = None):
    records: list[BibRecord] = []
    rejects = []
    for path in paths:
        fmt = _format_for(path, input_format)
        with open(path, "rb") as fh:
            result = ingest_records(fh, fmt)
        records.extend(result.records)
        rejects.extend(result.rejects)
    ids = [r.record_id for r in records]
    if len(ids) != len(set(ids)):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise IngestError(f"duplicate record_id(s) across inputs: {', '.join(dup)}")
    return records, rejects


@dataclass
class _Outcome:
    record: BibRecord
    strategy: Strategy
    query: str | None
    n_candidates: int
    decision: MatchDecision
    n_returned_ok: int
    verdict: bool | None
    error: str | None = None


def _evaluate_record(record, strategy, client, config, truth) -> _Outcome:
    try:
        expr = serialize_query(build_query(record, strategy))
    except QueryBuildError as exc:
        decision = MatchDecision.reject([("", (f"query error: {exc}",))])
        return _Outcome(record, strategy, None, 0, decision, 0, None, str(exc))
    candidates = client.evaluate(expr)
    if config.filter_mode == "doi":
        decision = doi_filter(record, candidates)
        n_ok = sum(doi_matches(record.doi, c.doi) for c in candidates)
        verdict = decision.accepted or None
    else:
        decision = metadata_filter(record, candidates, config.rules)
        n_ok = len(candidates) - sum(1 for eid, _ in decision.rejections if eid)
        verdict = None
        if decision.accepted:
            if record.doi:
                verdict = doi_matches(record.doi, decision.candidate.doi)
            elif truth is not None:
                verdict = decision.candidate.entity_id == truth[record.record_id].entity_id
    return _Outcome(record, strategy, expr, len(candidates), decision, n_ok, verdict)


def _process_field(sample: FieldSample, client, config, truth) -> list[_Outcome]:
    outcomes = []
    for record in sample.records:
        for strategy in config.strategies:
            outcomes.append(_evaluate_record(record, strategy, client, config, truth))
    logger.info("field %s: %d records queried", sample.field_code, len(sample.records))
    return outcomes


def _field_report(sample: FieldSample, outcomes: list[_Outcome], config) -> tuple[FieldReport, FieldReport | None]:
    report = FieldReport(sample.field_code, sample.field_name, len(sample.records))
    checked = FieldReport(sample.field_code, sample.field_name, len(sample.records))
    for strategy in config.strategies:
        mine = [o for o in outcomes if o.strategy is strategy]
        decisions = {o.record.record_id: o.decision for o in mine}
        accepted = sum(o.decision.accepted for o in mine)
        recall = accepted / len(mine)
        precision = returned_precision(sum(o.n_returned_ok for o in mine),
                                       sum(o.n_candidates for o in mine))
        report.strategies[strategy.value] = StrategyStats(recall, precision, accepted, accepted)
        if config.filter_mode == "metadata_then_doi_check":
            truth = {o.record.record_id: bool(o.verdict) for o in mine}
            prec, rec = field_precision_recall(decisions, truth)
            n_correct = sum(1 for o in mine if o.decision.accepted and o.verdict)
            checked.strategies[strategy.value] = StrategyStats(rec, prec, accepted, n_correct)

    key = [o for o in outcomes if o.strategy is config.key_strategy]
    pairs = [(o.record.citation_count, o.decision.candidate.citation_count)
             for o in key
             if o.decision.accepted and o.verdict and o.record.citation_count is not None]
    report.n_correlated = len(pairs)
    if pairs:
        scopus, index = zip(*pairs)
        report.scopus_geomean = geometric_mean(scopus)
        report.index_geomean = geometric_mean(index)
        report.spearman = spearman(scopus, index) if len(pairs) >= 2 else None
    return report, (checked if config.filter_mode == "metadata_then_doi_check" else None)


def _log_entry(sample: FieldSample, o: _Outcome) -> dict:
    cand = o.decision.candidate
    return {
        "record_id": o.record.record_id,
        "field_code": sample.field_code,
        "strategy": o.strategy.value,
        "query": o.query,
        "n_candidates": o.n_candidates,
        "outcome": "accepted" if o.decision.accepted else ("query_error" if o.error else "rejected"),
        "reasons": o.decision.reasons,
        "accepted_entity_id": cand.entity_id if cand else None,
        "overlap": None if o.decision.overlap is None else round(o.decision.overlap, 6),
        "doi_verdict": o.verdict,
        "n_returned_ok": o.n_returned_ok,
        "scopus_citations": o.record.citation_count,
        "index_citations": cand.citation_count if cand else None,
    }


def _recall_check(samples, outcomes_by_field, truth, strategies) -> tuple[Table, list[dict]]:
    table = Table("recall_check",
                  ["Field", "Strategy", "Articles", "Measured hits", "Predicted hits",
                   "Measured recall", "Predicted recall", "Equal"],
                  ["text", "text", "int", "int", "int", "pct", "pct", "text"])
    rows = []
    for sample, outcomes in zip(samples, outcomes_by_field):
        for strategy in strategies:
            mine = [o for o in outcomes if o.strategy is strategy]
            measured = sum(o.decision.accepted for o in mine)
            predicted = sum(ledger_predicts_retrieval(o.record, truth[o.record.record_id], strategy)
                            for o in mine)
            n = len(mine)
            rows.append({"field_code": sample.field_code, "strategy": strategy.value,
                         "articles": n, "measured": measured, "predicted": predicted})
            table.add(sample.field_code, strategy.value, n, measured, predicted,
                      measured / n, predicted / n, "yes" if measured == predicted else "no")
    return table, rows


def _draw_samples(records, config) -> list[FieldSample]:
    codes = config.fields or sorted({c for r in records for c in r.field_codes})
    samples = []
    for code in codes:
        try:
            samples.append(sample_per_field(records, code, config.sample_n, config.seed,
                                            config.field_names.get(code)))
        except ValueError as exc:
            raise PipelineError(str(exc)) from exc
    return filter_min_field_size(samples, config.min_field_size)


def run_pipeline(config: PipelineConfig, transport=None, clock=None, sleep=None) -> RunResult:
    """Run every stage and write the report bundle to ``config.out_dir``.

    Files are assembled in a staging directory and moved into place only
    when every stage succeeds; on failure the partial bundle is moved to
    ``<out_dir>/quarantine`` and :class:`PipelineError` is raised.
    """
    config.validate()
    out = Path(config.out_dir)
    staging = out / ".staging"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    try:
        result = _run(config, staging, transport, clock, sleep)
    except Exception as exc:
        quarantine = out / "quarantine"
        if quarantine.exists():
            shutil.rmtree(quarantine)
        staging.rename(quarantine)
        if isinstance(exc, (PipelineError, ConfigError)):
            raise
        raise PipelineError(f"{type(exc).__name__}: {exc}") from exc
    files = []
    for path in sorted(staging.iterdir()):
        target = out / path.name
        path.replace(target)
        files.append(target)
    staging.rmdir()
    result.out_dir = out
    result.files = files
    return result


def _run(config: PipelineConfig, staging: Path, transport, clock, sleep) -> RunResult:
    try:
        records, rejects = load_records(config.inputs, config.input_format)
    except (OSError, IngestError) as exc:
        raise PipelineError(f"ingest failed: {exc}") from exc
    with open(staging / "rejects.jsonl", "w", encoding="utf-8") as fh:
        write_rejects(rejects, fh)
    logger.info("ingested %d records (%d rejected)", len(records), len(rejects))

    truth: dict[str, TruthEntry] | None = None
    if config.mock_profile is not None:
        index, truth = build_index(records, config.mock_profile, config.retrieval_threshold)
        with open(staging / "ground_truth.jsonl", "w", encoding="utf-8") as fh:
            write_ledger(truth, fh)
        (staging / "profile.json").write_text(config.mock_profile.to_json(), encoding="utf-8")
        client_config = ClientConfig(MOCK_BASE_URL, queries_per_second=1e9, max_retries=0)
        transport = transport or InProcessTransport(index)
    else:
        client_config = config.client
    client_kwargs = {"transport": transport}
    if clock is not None:
        client_kwargs["clock"] = clock
    if sleep is not None:
        client_kwargs["sleep"] = sleep
    client = IndexClient(client_config, ledger=TransactionLedger(client_config.monthly_budget),
                         **client_kwargs)

    eligible = records
    if config.filter_mode in ("doi", "metadata_then_doi_check"):
        eligible = [r for r in records if r.doi]
        if len(eligible) < len(records):
            logger.info("dropping %d records without a DOI", len(records) - len(eligible))
    samples = _draw_samples(eligible, config)
    if not samples:
        raise PipelineError("no field survives the minimum field size")

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        outcomes_by_field = list(pool.map(
            lambda s: _process_field(s, client, config, truth), samples))

    reports, checked = [], []
    with open(staging / "decisions.jsonl", "w", encoding="utf-8") as fh:
        for sample, outcomes in zip(samples, outcomes_by_field):
            report, check = _field_report(sample, outcomes, config)
            reports.append(report)
            if check is not None:
                checked.append(check)
            for o in outcomes:
                fh.write(json.dumps(_log_entry(sample, o), ensure_ascii=False, sort_keys=True) + "\n")

    tables = [strategy_table("strategy_summary", reports, config.strategies)]
    if checked:
        tables.append(strategy_table("doi_check_of_metadata", checked, config.strategies))

    key_decisions: dict[str, MatchDecision] = {}
    key_records = []
    for outcomes in outcomes_by_field:
        for o in outcomes:
            if o.strategy is config.key_strategy and o.record.record_id not in key_decisions:
                ok = o.decision.accepted and o.verdict is not False
                key_decisions[o.record.record_id] = o.decision if ok else MatchDecision.reject([])
                key_records.append(o.record)
    tables.append(country_table(country_match_rates(key_records, key_decisions)))
    tables.append(correlation_table(reports))

    recall_rows = []
    if truth is not None and config.filter_mode == "doi":
        table, recall_rows = _recall_check(samples, outcomes_by_field, truth, config.strategies)
        tables.append(table)
    emit_report(tables, staging, config.report_format)

    transactions = ledger_report(client.ledger)
    transactions["estimated_cost"] = round(transactions["estimated_cost"], 6)
    (staging / "transactions.json").write_text(json.dumps(transactions, sort_keys=True, indent=2) + "\n",
                                               encoding="utf-8")
    (staging / "run_config.json").write_text(json.dumps(config.to_dict(), sort_keys=True, indent=2) + "\n",
                                             encoding="utf-8")
    return RunResult(staging, [], reports, transactions, recall_rows, checked)
