from __future__ import annotations

import json
import shutil

import pytest

from blocksleuth.corpus import (
    CATEGORIES,
    _data_dir,
    MIN_CASES_PER_CATEGORY,
    check_case,
    format_schedule,
    load_corpus,
    parse_schedule,
    run_corpus,
)
from blocksleuth.oracle import enumerate_schedules
from blocksleuth.simulator import RoundRobin, Script, SeededRandom


@pytest.fixture(scope="module")
def corpus():
    return load_corpus()


def test_every_category_has_two_cases(corpus):
    counts = {c: 0 for c in CATEGORIES}
    for case in corpus:
        counts[case.category] += 1
    assert all(n >= MIN_CASES_PER_CATEGORY for n in counts.values()), counts
    assert len(corpus) >= 14


def test_shipped_corpus_passes(corpus):
    result = run_corpus(corpus)
    assert result.passed, [(c.name, c.diffs) for c in result.cases if not c.passed]


def test_empty_corpus_fails_meta_check():
    result = run_corpus([])
    assert not result.passed and "corpus is empty" in result.problems


def test_thin_category_fails_meta_check(corpus):
    result = run_corpus([c for c in corpus if c.category != "Cond"])
    assert not result.passed
    assert any("Cond" in p for p in result.problems)


@pytest.mark.parametrize("name,expected", [
    ("etcd_6873", {"ChannelMutexDeadlock"}),
    ("kubernetes_double_rlock", {"DoubleRLock"}),
    ("moby_blocked_send", {"BlockedChannelSend", "GoroutineLeak"}),
])
def test_case_studies(corpus, name, expected):
    case = next(c for c in corpus if c.name == name)
    assert any(expected <= exp.expected for exp in case.schedules)


def test_fixed_variants_are_oracle_certified(corpus):
    for case in corpus:
        v = enumerate_schedules(case.fixed_variant, strict=False)
        assert v.complete and not v.deadlock_reachable, case.name


def test_wrong_expectation_is_reported(corpus, tmp_path):
    src = corpus[0]
    d = tmp_path / "c"
    d.mkdir()
    for p in _data_dir().glob(f"{src.name}.*"):
        shutil.copy(p, d / p.name)
    meta = json.loads((d / f"{src.name}.json").read_text())
    meta["schedules"][0]["expected"] = ["Fault"]
    (d / f"{src.name}.json").write_text(json.dumps(meta))
    res = check_case(load_corpus(d)[0])
    assert not res.passed and res.diffs


@pytest.mark.parametrize("s", [RoundRobin(), SeededRandom(3), Script.parse("1 2:1 3")])
def test_schedule_text_round_trip(s):
    assert parse_schedule(format_schedule(s)) == s


def test_unknown_schedule_text():
    with pytest.raises(ValueError):
        parse_schedule("fifo")
