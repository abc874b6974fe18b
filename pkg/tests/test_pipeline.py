import csv
import json
from collections import Counter

import pytest

from biblink.corpus import write_records
from biblink.indexclient import ClientConfig, VirtualClock
from biblink.mockindex import CorruptionProfile, build_index
from biblink.mockindex.service import InProcessTransport
from biblink.pipeline import ConfigError, PipelineConfig, PipelineError, run_pipeline
from biblink.queryexpr import Strategy
from biblink.synth import generate_corpus

from conftest import SEEDED_PROFILE


@pytest.fixture(scope="module")
def corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "corpus.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        write_records(generate_corpus(1200, 3, seed=2), fh)
    return path


def config(corpus_path, out, **kw):
    values = dict(inputs=[str(corpus_path)], mock_profile=CorruptionProfile(),
                  sample_n=200, min_field_size=50, out_dir=str(out), workers=2)
    values.update(kw)
    return PipelineConfig(**values)


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_zero_corruption_gives_perfect_rows(corpus_path, tmp_path):
    result = run_pipeline(config(corpus_path, tmp_path))
    rows = read_csv(tmp_path / "strategy_summary.csv")
    assert len(rows[0]) == 2 + 2 * 5
    for row in rows[1:]:
        assert row[2:] == ["100.0%"] * 10
    assert all(r["measured"] == r["predicted"] == r["articles"] for r in result.recall_check)
    assert not (tmp_path / ".staging").exists()


def test_bundle_contents_and_decision_log(corpus_path, tmp_path):
    run_pipeline(config(corpus_path, tmp_path, mock_profile=CorruptionProfile.from_dict(SEEDED_PROFILE)))
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["correlations.csv", "country_rates.csv", "decisions.jsonl",
                     "ground_truth.jsonl", "profile.json", "recall_check.csv", "rejects.jsonl",
                     "run_config.json", "strategy_summary.csv", "transactions.json"]
    entries = [json.loads(l) for l in (tmp_path / "decisions.jsonl").read_text().splitlines()]
    per = Counter((e["field_code"], e["record_id"]) for e in entries)
    assert set(per.values()) == {5}
    assert {e["outcome"] for e in entries} == {"accepted", "rejected"}
    for e in entries:
        assert set(e) >= {"record_id", "strategy", "query", "n_candidates", "outcome", "reasons",
                          "accepted_entity_id", "scopus_citations", "index_citations"}
    assert all(row[-1] == "yes" for row in read_csv(tmp_path / "recall_check.csv")[1:])
    run_config = json.loads((tmp_path / "run_config.json").read_text())
    assert "out_dir" not in run_config


def test_determinism_across_output_dirs(corpus_path, tmp_path):
    profile = CorruptionProfile.from_dict(SEEDED_PROFILE)
    run_pipeline(config(corpus_path, tmp_path / "a", mock_profile=profile, workers=1))
    run_pipeline(config(corpus_path, tmp_path / "b", mock_profile=profile, workers=4))
    a = {p.name: p.read_bytes() for p in (tmp_path / "a").iterdir()}
    b = {p.name: p.read_bytes() for p in (tmp_path / "b").iterdir()}
    assert a == b


def test_metadata_then_doi_check_verdicts(corpus_path, tmp_path):
    profile = CorruptionProfile.from_dict({**SEEDED_PROFILE, "p_erratum_conflation": 0.05})
    result = run_pipeline(config(corpus_path, tmp_path, mock_profile=profile,
                                 filter_mode="metadata_then_doi_check"))
    entries = [json.loads(l) for l in (tmp_path / "decisions.jsonl").read_text().splitlines()]
    accepted = [e for e in entries if e["outcome"] == "accepted"]
    assert accepted and all(e["doi_verdict"] in (True, False) for e in accepted)
    assert any(e["doi_verdict"] is False for e in accepted)
    assert (tmp_path / "doi_check_of_metadata.csv").exists()
    assert not (tmp_path / "recall_check.csv").exists()
    for checked in result.metadata_check:
        for stats in checked.strategies.values():
            assert stats.precision is None or 0 <= stats.precision <= 1


def test_metadata_mode_keeps_records_without_doi(tmp_path):
    path = tmp_path / "c.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        write_records(generate_corpus(300, 1, seed=8, doi_fraction=0.5), fh)
    result = run_pipeline(config(path, tmp_path / "out", filter_mode="metadata", sample_n=300))
    assert result.reports[0].n_articles == 300
    doi_run = run_pipeline(config(path, tmp_path / "out2", sample_n=300))
    assert doi_run.reports[0].n_articles < 300


def test_live_client_path_with_injected_transport(corpus_path, tmp_path):
    from biblink.pipeline import load_records

    records, _ = load_records([str(corpus_path)])
    index, _ = build_index(records, CorruptionProfile())
    clock = VirtualClock()
    cfg = config(corpus_path, tmp_path, mock_profile=None, sample_n=20, min_field_size=1,
                 strategies=[Strategy.TITLE_ONLY],
                 client=ClientConfig("http://index.test", api_key="k", queries_per_second=4))
    result = run_pipeline(cfg, transport=InProcessTransport(index, api_key="k"),
                          clock=clock.now, sleep=clock.sleep)
    assert result.transactions["used"] == 60
    assert clock.now() >= 59 / 4
    assert "api_key" not in (tmp_path / "run_config.json").read_text()


def test_failure_is_quarantined(corpus_path, tmp_path):
    def broken(url, params, headers):
        return 500, "index down"

    cfg = config(corpus_path, tmp_path, mock_profile=None, sample_n=5, min_field_size=1,
                 client=ClientConfig("http://index.test", max_retries=1, backoff_seconds=0))
    clock = VirtualClock()
    with pytest.raises(PipelineError, match="HTTP 500"):
        run_pipeline(cfg, transport=broken, clock=clock.now, sleep=clock.sleep)
    assert (tmp_path / "quarantine" / "rejects.jsonl").exists()
    assert not (tmp_path / "strategy_summary.csv").exists()
    assert not (tmp_path / ".staging").exists()


def test_too_small_fields_fail(corpus_path, tmp_path):
    with pytest.raises(PipelineError, match="minimum field size"):
        run_pipeline(config(corpus_path, tmp_path, min_field_size=10_000))


@pytest.mark.parametrize("overrides, message", [
    ({"inputs": []}, "no input"),
    ({"strategies": []}, "empty"),
    ({"filter_mode": "fuzzy"}, "filter mode"),
    ({"mock_profile": None}, "exactly one"),
    ({"client": ClientConfig("http://x")}, "exactly one"),
    ({"report_format": "xlsx"}, "report format"),
    ({"strategies": [Strategy.FULL], "correlation_strategy": Strategy.TITLE_ONLY}, "correlation"),
])
def test_config_validation(corpus_path, tmp_path, overrides, message):
    with pytest.raises(ConfigError, match=message):
        config(corpus_path, tmp_path, **overrides).validate()


def test_config_from_dict_round_trip(corpus_path, tmp_path):
    cfg = config(corpus_path, tmp_path, strategies=[Strategy.TITLE_ONLY, Strategy.FULL])
    again = PipelineConfig.from_dict({**cfg.to_dict(), "out_dir": str(tmp_path), "workers": 2})
    assert again == cfg
    with pytest.raises(ConfigError, match="unknown config keys"):
        PipelineConfig.from_dict({"colour": 1})
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"strategies": ["bogus"]})
