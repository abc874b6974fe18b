"""Command-line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from collections import defaultdict
from pathlib import Path

import click

from .corpus import IngestError, filter_min_field_size, sample_per_field, write_records, write_rejects
from .indexclient import parse_entities
from .matcher import MatchRules, doi_filter, metadata_filter
from .metrics import FieldReport, StrategyStats, geometric_mean, returned_precision, spearman
from .mockindex import CorruptionProfile, build_index, write_ledger
from .pipeline import FILTER_MODES, ConfigError, PipelineConfig, PipelineError, load_records, run_pipeline
from .queryexpr import QueryBuildError, Strategy, build_query, serialize_query
from .reports import FORMATS, correlation_table, emit_report, strategy_table

logger = logging.getLogger("biblink")

STRATEGY_CHOICE = click.Choice([s.value for s in Strategy])


class RuntimeFailure(click.ClickException):
    exit_code = 2


def _load_json(path: str | None, what: str) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read {what} {path}: {exc}") from exc


def _profile(path: str | None) -> CorruptionProfile:
    try:
        return CorruptionProfile.from_dict(_load_json(path, "mock profile"))
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"invalid mock profile: {exc}") from exc


def _records(inputs, fmt):
    try:
        return load_records(inputs, fmt)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc
    except (OSError, IngestError) as exc:
        raise RuntimeFailure(str(exc)) from exc


def _jsonl(items, path: str | None) -> None:
    out = open(path, "w", encoding="utf-8") if path else sys.stdout
    try:
        for item in items:
            out.write(json.dumps(item, ensure_ascii=False, sort_keys=True) + "\n")
    finally:
        if path:
            out.close()


input_option = click.option("--input", "inputs", multiple=True, required=True,
                            type=click.Path(dir_okay=False), help="Record file (CSV or JSONL).")
format_option = click.option("--format", "input_format", type=click.Choice(["csv", "jsonl"]),
                             default=None, help="Input format; inferred from the suffix if omitted.")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose: bool) -> None:
    """Bibliographic record linkage against an academic index."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@input_option
@format_option
@click.option("--out", required=True, type=click.Path(file_okay=False))
def ingest(inputs, input_format, out):
    """Validate record files; write records.jsonl and rejects.jsonl."""
    records, rejects = _records(inputs, input_format)
    Path(out).mkdir(parents=True, exist_ok=True)
    with open(Path(out) / "records.jsonl", "w", encoding="utf-8") as fh:
        write_records(records, fh)
    with open(Path(out) / "rejects.jsonl", "w", encoding="utf-8") as fh:
        write_rejects(rejects, fh)
    click.echo(f"{len(records)} records, {len(rejects)} rejects, "
               f"{sum(r.doi is not None for r in records)} with DOI")


@cli.command()
@input_option
@format_option
@click.option("--field", "fields", multiple=True, help="Field code (repeatable; default all).")
@click.option("--sample-n", default=400, show_default=True, type=click.IntRange(min=1))
@click.option("--min-field-size", default=50, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--require-doi/--no-require-doi", default=True, show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Output JSONL (default stdout).")
def sample(inputs, input_format, fields, sample_n, min_field_size, seed, require_doi, out):
    """Draw a seeded random sample per field."""
    records, _ = _records(inputs, input_format)
    if require_doi:
        records = [r for r in records if r.doi]
    codes = fields or sorted({c for r in records for c in r.field_codes})
    try:
        samples = [sample_per_field(records, c, sample_n, seed) for c in codes]
    except ValueError as exc:
        raise RuntimeFailure(str(exc)) from exc
    samples = filter_min_field_size(samples, min_field_size)
    from .corpus import record_to_row

    _jsonl(({"sample_field": s.field_code, **record_to_row(r)} for s in samples for r in s.records), out)
    click.echo(f"{len(samples)} fields kept", err=True)


@cli.command()
@input_option
@format_option
@click.option("--strategy", "strategies", multiple=True, type=STRATEGY_CHOICE,
              help="Strategy (repeatable; default all five).")
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def query(inputs, input_format, strategies, out):
    """Print the wire query each strategy issues for each record."""
    records, _ = _records(inputs, input_format)
    chosen = [Strategy(s) for s in strategies] or list(Strategy)

    def rows():
        for r in records:
            for s in chosen:
                try:
                    yield {"record_id": r.record_id, "strategy": s.value,
                           "query": serialize_query(build_query(r, s))}
                except QueryBuildError as exc:
                    yield {"record_id": r.record_id, "strategy": s.value, "error": str(exc)}

    _jsonl(rows(), out)


@cli.command()
@input_option
@format_option
@click.option("--candidates", required=True, type=click.Path(exists=True, dir_okay=False),
              help='JSONL of {"record_id", "strategy", "entities": [...]} lines.')
@click.option("--filter-mode", type=click.Choice(["doi", "metadata"]), default="doi", show_default=True)
@click.option("--max-differences", default=1, show_default=True, type=click.IntRange(min=0))
@click.option("--title-overlap", default=0.85, show_default=True, type=click.FloatRange(0, 1))
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def match(inputs, input_format, candidates, filter_mode, max_differences, title_overlap, out):
    """Filter saved index responses against the source records."""
    records, _ = _records(inputs, input_format)
    by_id = {r.record_id: r for r in records}
    rules = MatchRules(max_differences, title_overlap)

    def rows():
        with open(candidates, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                item = json.loads(line)
                record = by_id.get(item["record_id"])
                if record is None:
                    raise RuntimeFailure(f"line {lineno}: unknown record {item['record_id']!r}")
                cands = parse_entities(json.dumps({"entities": item.get("entities", [])}))
                if filter_mode == "doi":
                    if not record.doi:
                        yield {"record_id": record.record_id, "strategy": item.get("strategy"),
                               "outcome": "rejected", "reasons": ["record has no doi"]}
                        continue
                    decision = doi_filter(record, cands)
                else:
                    decision = metadata_filter(record, cands, rules)
                yield {"record_id": record.record_id, "strategy": item.get("strategy"),
                       "n_candidates": len(cands),
                       "outcome": "accepted" if decision.accepted else "rejected",
                       "accepted_entity_id": decision.candidate.entity_id if decision.accepted else None,
                       "overlap": decision.overlap, "reasons": decision.reasons}

    _jsonl(rows(), out)


def reports_from_log(entries) -> tuple[list[FieldReport], list[Strategy]]:
    """Rebuild per-field reports from a pipeline decision log."""
    grouped = defaultdict(lambda: defaultdict(list))
    for e in entries:
        grouped[e["field_code"]][e["strategy"]].append(e)
    strategies = [s for s in Strategy if any(s.value in g for g in grouped.values())]
    key = Strategy.TITLE_ONLY if Strategy.TITLE_ONLY in strategies else strategies[0]
    reports = []
    for code in sorted(grouped):
        per = grouped[code]
        n = max(len(v) for v in per.values())
        report = FieldReport(code, code, n)
        for s in strategies:
            rows = per.get(s.value, [])
            if not rows:
                continue
            accepted = sum(e["outcome"] == "accepted" for e in rows)
            report.strategies[s.value] = StrategyStats(
                accepted / len(rows),
                returned_precision(sum(e["n_returned_ok"] for e in rows),
                                   sum(e["n_candidates"] for e in rows)),
                accepted, accepted)
        pairs = [(e["scopus_citations"], e["index_citations"]) for e in per.get(key.value, [])
                 if e["outcome"] == "accepted" and e["doi_verdict"] and e["scopus_citations"] is not None]
        report.n_correlated = len(pairs)
        if pairs:
            sc, ix = zip(*pairs)
            report.scopus_geomean, report.index_geomean = geometric_mean(sc), geometric_mean(ix)
            report.spearman = spearman(sc, ix)
        reports.append(report)
    return reports, strategies


@cli.command()
@click.option("--decisions", required=True, type=click.Path(exists=True, dir_okay=False),
              help="decisions.jsonl written by `run`.")
@click.option("--report-format", type=click.Choice(sorted(FORMATS)), default="csv", show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def stats(decisions, report_format, out):
    """Recompute summary and correlation tables from a decision log."""
    with open(decisions, encoding="utf-8") as fh:
        entries = [json.loads(line) for line in fh if line.strip()]
    if not entries:
        raise RuntimeFailure("decision log is empty")
    reports, strategies = reports_from_log(entries)
    paths = emit_report([strategy_table("strategy_summary", reports, strategies),
                         correlation_table(reports)], out, report_format)
    for p in paths:
        click.echo(str(p))


@cli.command()
@input_option
@format_option
@click.option("--mock-profile", type=click.Path(exists=True, dir_okay=False),
              help="CorruptionProfile JSON (default: no corruption).")
@click.option("--out", required=True, type=click.Path(file_okay=False))
def simulate(inputs, input_format, mock_profile, out):
    """Build the simulated index; write its documents and ground-truth ledger."""
    records, _ = _records(inputs, input_format)
    profile = _profile(mock_profile)
    index, ledger = build_index(records, profile)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "index.jsonl").write_text(index.documents_jsonl(), encoding="utf-8")
    with open(out_dir / "ground_truth.jsonl", "w", encoding="utf-8") as fh:
        write_ledger(ledger, fh)
    (out_dir / "profile.json").write_text(profile.to_json(), encoding="utf-8")
    statuses = defaultdict(int)
    for entry in ledger.values():
        statuses[entry.status] += 1
    click.echo(", ".join(f"{k}={v}" for k, v in sorted(statuses.items())))


@cli.command("serve-mock")
@input_option
@format_option
@click.option("--mock-profile", type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--api-key-env", default=None, help="Environment variable holding the required key.")
def serve_mock(inputs, input_format, mock_profile, host, port, api_key_env):
    """Serve the simulated index over HTTP."""
    from .mockindex.service import serve

    records, _ = _records(inputs, input_format)
    index, _ = build_index(records, _profile(mock_profile))
    api_key = os.environ.get(api_key_env) if api_key_env else None
    if api_key_env and api_key is None:
        raise click.UsageError(f"environment variable {api_key_env} is not set")
    try:
        serve(index, host, port, api_key)
    except OSError as exc:
        raise RuntimeFailure(f"cannot bind {host}:{port}: {exc}") from exc


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON config; flags override its values.")
@click.option("--input", "inputs", multiple=True, type=click.Path(dir_okay=False))
@format_option
@click.option("--strategy", "strategies", multiple=True, type=STRATEGY_CHOICE)
@click.option("--filter-mode", type=click.Choice(FILTER_MODES), default=None)
@click.option("--sample-n", type=click.IntRange(min=1), default=None, help="Default 400.")
@click.option("--min-field-size", type=click.IntRange(min=1), default=None, help="Default 50.")
@click.option("--seed", type=int, default=None)
@click.option("--mock-profile", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--base-url", default=None, help="Live index base URL.")
@click.option("--api-key-env", default=None, help="Environment variable holding the API key.")
@click.option("--qps", type=float, default=None, help="Queries per second against a live index.")
@click.option("--budget", type=click.IntRange(min=0), default=None, help="Transaction budget.")
@click.option("--cache-dir", type=click.Path(file_okay=False), default=None)
@click.option("--report-format", type=click.Choice(sorted(FORMATS)), default=None)
@click.option("--workers", type=click.IntRange(min=1), default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None)
def run(config_path, inputs, input_format, strategies, filter_mode, sample_n, min_field_size,
        seed, mock_profile, base_url, api_key_env, qps, budget, cache_dir, report_format,
        workers, out):
    """Run the whole pipeline and write the report bundle."""
    data = _load_json(config_path, "config")
    overrides = {
        "inputs": list(inputs) or None,
        "input_format": input_format,
        "strategies": list(strategies) or None,
        "filter_mode": filter_mode,
        "sample_n": sample_n,
        "min_field_size": min_field_size,
        "seed": seed,
        "report_format": report_format,
        "workers": workers,
        "out_dir": out,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if mock_profile:
        data["mock_profile"] = _load_json(mock_profile, "mock profile")
        data.pop("client", None)
    if base_url or api_key_env or qps or budget is not None or cache_dir:
        client = dict(data.get("client") or {})
        if base_url:
            client["base_url"] = base_url
        if api_key_env:
            key = os.environ.get(api_key_env)
            if key is None:
                raise click.UsageError(f"environment variable {api_key_env} is not set")
            client["api_key"] = key
        if qps:
            client["queries_per_second"] = qps
        if budget is not None:
            client["monthly_budget"] = budget
        if cache_dir:
            client["cache_dir"] = cache_dir
        data["client"] = client
        if base_url:
            data.pop("mock_profile", None)
    try:
        config = PipelineConfig.from_dict(data)
        config.validate()
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc
    try:
        result = run_pipeline(config)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc
    except PipelineError as exc:
        raise RuntimeFailure(str(exc).splitlines()[0]) from exc
    click.echo(f"wrote {len(result.files)} files to {result.out_dir} "
               f"({result.transactions['used']} transactions)")


@cli.command()
@click.option("--n-records", default=5000, show_default=True, type=click.IntRange(min=1))
@click.option("--n-fields", default=10, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--doi-fraction", default=1.0, show_default=True, type=click.FloatRange(0, 1))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def generate(n_records, n_fields, seed, doi_fraction, out):
    """Write a seeded synthetic corpus (CSV or JSONL by suffix)."""
    from .synth import generate_corpus

    records = generate_corpus(n_records, n_fields, seed, doi_fraction)
    fmt = "csv" if out.lower().endswith(".csv") else "jsonl"
    with open(out, "w", encoding="utf-8", newline="") as fh:
        write_records(records, fh, fmt)
    click.echo(f"{len(records)} records written to {out}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="biblink", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 2
    except RuntimeFailure as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 2
    except click.ClickException as exc:
        # usage and configuration problems
        exc.show()
        return 1
    return 0


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
