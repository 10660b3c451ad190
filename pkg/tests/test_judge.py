import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from ethibench.errors import JudgeBackendError
from ethibench.ingest import Finding
from ethibench.judge import (
    ANSWER_FORMAT,
    JudgeCache,
    JudgeConfig,
    LabeledFinding,
    LexicalJudge,
    RemoteJudge,
    calibrate,
    candidate_matches,
    judge_pair,
    parse_verdict,
    render_prompt,
)

from conftest import make_entry, make_gts, naming_finding, noise_finding


# ---------------------------------------------------------------------------
# Prompt rendering and verdict parsing
# ---------------------------------------------------------------------------

def test_prompt_contains_fixed_header(gts5):
    prompt = render_prompt(naming_finding(0, "gt-00"), gts5.entries[0])
    assert "You are a security analyst comparing two vulnerability descriptions" in prompt


def test_prompt_substitutes_all_fields(gts5):
    f = Finding(index=0, title="T1", description="D1", steps_to_reproduce="S1")
    e = gts5.entries[1]
    prompt = render_prompt(f, e)
    for fragment in ("Name: T1", "Description: D1", "Steps to Reproduce: S1",
                     f"Name: {e.name}", f"Category: {e.category}",
                     f"Description: {e.description}", f"Additional Info: {e.additional_info}"):
        assert fragment in prompt


def test_prompt_empty_steps_section_present(gts5):
    f = Finding(index=0, title="T", description="D", steps_to_reproduce="")
    prompt = render_prompt(f, gts5.entries[0])
    assert "Steps to Reproduce: \n" in prompt + "\n"


def test_prompt_ends_with_answer_format(gts5):
    prompt = render_prompt(noise_finding(0), gts5.entries[0])
    assert prompt.endswith(ANSWER_FORMAT)


@pytest.mark.parametrize("text,verdict,rationale", [
    ("same root cause\nVERDICT: MATCH", True, "same root cause"),
    ("different endpoints\nVERDICT: NO_MATCH", False, "different endpoints"),
    ("VERDICT: MATCH", True, ""),
    ("a\n\nb\n  VERDICT: NO_MATCH  ", False, "b"),
])
def test_parse_verdict_accepts(text, verdict, rationale):
    assert parse_verdict(text) == (verdict, rationale)


@pytest.mark.parametrize("text", [
    "", "MATCH", "VERDICT: MAYBE", "VERDICT: MATCH\ntrailing rationale",
    "the verdict is a match",
])
def test_parse_verdict_rejects(text):
    with pytest.raises(ValueError):
        parse_verdict(text)


# ---------------------------------------------------------------------------
# Lexical backend
# ---------------------------------------------------------------------------

def test_lexical_id_token_matches(gts5):
    judge = LexicalJudge()
    verdict, rationale = judge.verdict(naming_finding(0, "gt-03"), gts5.entries[3])
    assert verdict
    assert "gt-03" in rationale


def test_lexical_zero_overlap_no_match(gts5):
    judge = LexicalJudge()
    verdict, _ = judge.verdict(noise_finding(0), gts5.entries[0])
    assert not verdict


def test_lexical_token_overlap_matches():
    entry = make_entry(2)
    echo = Finding(
        index=0,
        title="behavior anomaly q2a q2b q2c observed",
        description="happens in the c2 module",
        steps_to_reproduce="",
    )
    judge = LexicalJudge(min_overlap=5)
    verdict, rationale = judge.verdict(echo, entry)
    assert verdict
    assert "shared content tokens" in rationale
    strict = LexicalJudge(min_overlap=8)
    assert not strict.verdict(echo, entry)[0]


# ---------------------------------------------------------------------------
# judge_pair with a scripted remote-style backend
# ---------------------------------------------------------------------------

class ScriptedBackend:
    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = 0

    def complete(self, prompt):
        self.calls += 1
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def remote_config(**kw):
    return JudgeConfig(backend="remote", endpoint="http://judge.local/v1", model_name="m", **kw)


def test_judge_pair_parses_no_match(gts5):
    backend = ScriptedBackend(["different issue\nVERDICT: NO_MATCH"])
    edge = judge_pair(remote_config(), noise_finding(0), gts5.entries[0], backend=backend)
    assert edge.verdict is False
    assert edge.rationale == "different issue"


def test_judge_pair_reasks_once_on_unparseable(gts5):
    backend = ScriptedBackend(["garbled", "ok\nVERDICT: MATCH"])
    edge = judge_pair(remote_config(), noise_finding(0), gts5.entries[0], backend=backend)
    assert edge.verdict is True
    assert backend.calls == 2


def test_judge_pair_errors_after_reask(gts5):
    from ethibench.errors import JudgePairError
    backend = ScriptedBackend(["garbled", "still garbled"])
    with pytest.raises(JudgePairError):
        judge_pair(remote_config(), noise_finding(0), gts5.entries[0], backend=backend)


# ---------------------------------------------------------------------------
# candidate_matches
# ---------------------------------------------------------------------------

def test_no_findings_empty_edges(gts5):
    result = candidate_matches(JudgeConfig(), [], gts5)
    assert result.edges == ()
    assert result.errors == ()


def test_one_to_many_edges_permitted(gts5):
    finding = naming_finding(0, ["gt-00", "gt-01"])
    result = candidate_matches(JudgeConfig(), [finding], gts5)
    assert [(e.finding_index, e.gt_id) for e in result.edges] == [
        (0, "gt-00"), (0, "gt-01"),
    ]


def test_all_pairs_judged_exactly_once(gts5):
    backend = LexicalJudge()
    findings = [naming_finding(0, "gt-00"), noise_finding(1), naming_finding(2, "gt-04")]
    gts4 = make_gts(4)
    candidate_matches(JudgeConfig(cache_enabled=False), findings, gts4, backend=backend)
    assert backend.calls == 3 * 4


def test_edges_deterministic_under_concurrency(gts5):
    findings = [naming_finding(i, f"gt-{i:02d}") for i in range(5)] + [
        naming_finding(5, ["gt-00", "gt-01", "gt-02"])
    ]
    serial = candidate_matches(
        JudgeConfig(max_in_flight=1, cache_enabled=False), findings, gts5
    )
    parallel = candidate_matches(
        JudgeConfig(max_in_flight=8, cache_enabled=False), findings, gts5
    )
    assert serial.edges == parallel.edges
    assert all(e.verdict for e in serial.edges)


def test_judge_errors_propagate_alongside_partial_edges(gts5):
    responses = []
    # 1 finding x 5 entries; entry 2 fails persistently, others match/no-match.
    for i in range(5):
        if i == 2:
            responses.append(JudgeBackendError("boom"))
        else:
            responses.append(f"r{i}\nVERDICT: {'MATCH' if i == 0 else 'NO_MATCH'}")
    backend = ScriptedBackend(responses)
    result = candidate_matches(
        remote_config(max_in_flight=1, cache_enabled=False),
        [naming_finding(0, "gt-00")],
        gts5,
        backend=backend,
    )
    assert [(e.finding_index, e.gt_id) for e in result.edges] == [(0, "gt-00")]
    assert len(result.errors) == 1
    assert result.errors[0].gt_id == "gt-02"


# ---------------------------------------------------------------------------
# Cache
# ---------------------------------------------------------------------------

def test_cache_hit_rate_100_percent_on_reevaluation(tmp_path, gts5):
    config = JudgeConfig(cache_enabled=True)
    cache = JudgeCache(tmp_path / "judge-cache")
    findings = [naming_finding(0, "gt-01"), noise_finding(1)]
    backend = LexicalJudge()
    first = candidate_matches(config, findings, gts5, backend=backend, cache=cache)
    calls_after_first = backend.calls
    assert calls_after_first == 10
    second = candidate_matches(config, findings, gts5, backend=backend, cache=cache)
    assert backend.calls == calls_after_first  # no new backend calls
    assert second.edges == first.edges
    assert cache.hits >= 10


def test_cache_survives_process_restart_via_files(tmp_path, gts5):
    config = JudgeConfig(cache_enabled=True)
    findings = [naming_finding(0, "gt-01")]
    cache1 = JudgeCache(tmp_path / "c")
    backend1 = LexicalJudge()
    candidate_matches(config, findings, gts5, backend=backend1, cache=cache1)
    cache2 = JudgeCache(tmp_path / "c")
    backend2 = LexicalJudge()
    candidate_matches(config, findings, gts5, backend=backend2, cache=cache2)
    assert backend2.calls == 0


def test_cached_pairs_skip_changed_entries_only(tmp_path, gts5):
    """After refining one entry, only that entry's pairs re-judge."""
    config = JudgeConfig(cache_enabled=True)
    cache = JudgeCache(tmp_path / "c")
    findings = [naming_finding(0, "gt-00"), noise_finding(1)]
    backend = LexicalJudge()
    candidate_matches(config, findings, gts5, backend=backend, cache=cache)
    assert backend.calls == 10
    from dataclasses import replace
    refined = replace(
        gts5,
        entries=tuple(
            replace(e, description=e.description + " refined")
            if e.id == "gt-02" else e
            for e in gts5.entries
        ),
    )
    candidate_matches(config, findings, refined, backend=backend, cache=cache)
    assert backend.calls == 12  # only 2 findings x 1 changed entry re-judged


# ---------------------------------------------------------------------------
# Remote judge over real HTTP
# ---------------------------------------------------------------------------

class _ChatHandler(BaseHTTPRequestHandler):
    seen_auth = None

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        _ChatHandler.seen_auth = self.headers.get("Authorization")
        prompt = body["messages"][0]["content"]
        finding_part, _, gt_part = prompt.partition("GROUND TRUTH:")
        import re
        m = re.search(r"q(\d+)a", gt_part)
        named = m and f"gt-{int(m.group(1)):02d}" in finding_part
        verdict = "MATCH" if named else "NO_MATCH"
        response = {
            "choices": [{"message": {"content": f"stubbed rationale\nVERDICT: {verdict}"}}]
        }
        payload = json.dumps(response).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def chat_server():
    server = HTTPServer(("127.0.0.1", 0), _ChatHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat"
    server.shutdown()


def test_remote_judge_end_to_end(chat_server, gts5, monkeypatch):
    monkeypatch.setenv("ETHIBENCH_JUDGE_API_KEY", "sk-test-123")
    config = JudgeConfig(
        backend="remote", endpoint=chat_server, model_name="judge-small",
        max_in_flight=2, cache_enabled=False,
    )
    result = candidate_matches(
        config, [naming_finding(0, "gt-00"), noise_finding(1)], make_gts(2),
        backend=RemoteJudge(config),
    )
    assert [(e.finding_index, e.gt_id) for e in result.edges] == [(0, "gt-00")]
    assert _ChatHandler.seen_auth == "Bearer sk-test-123"


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

def test_calibrate_constructed_50_item_set():
    gts = make_gts(25)
    labeled = []
    for i in range(25):
        labeled.append(
            LabeledFinding(
                finding=naming_finding(0, f"gt-{i:02d}"), label="tp", gt_id=f"gt-{i:02d}"
            )
        )
    for i in range(25):
        labeled.append(LabeledFinding(finding=noise_finding(0), label="fp"))
    report = calibrate(JudgeConfig(), labeled, gts)
    assert report.tp_agree == 25
    assert report.fp_agree == 25
    assert report.dup_label_count == 0
    assert report.disagreements == ()


def test_calibrate_single_fp():
    report = calibrate(
        JudgeConfig(), [LabeledFinding(finding=noise_finding(0), label="fp")], make_gts(3)
    )
    assert report.fp_agree == 1
    assert report.total == 1


def test_calibrate_two_tp_same_entry_reports_dup():
    gts = make_gts(1)
    labeled = [
        LabeledFinding(finding=naming_finding(0, "gt-00"), label="tp", gt_id="gt-00"),
        LabeledFinding(finding=naming_finding(0, "gt-00"), label="tp", gt_id="gt-00"),
    ]
    report = calibrate(JudgeConfig(), labeled, gts)
    assert report.tp_agree == 1
    assert report.dup_label_count == 1
    assert report.tp_agree + report.fp_agree + report.dup_label_count <= report.total


def test_calibrate_unknown_gt_id_rejected():
    with pytest.raises(JudgeBackendError, match="unknown gt_id"):
        calibrate(
            JudgeConfig(),
            [LabeledFinding(finding=naming_finding(0, "gt-09"), label="tp", gt_id="gt-09")],
            make_gts(2),
        )


def test_calibrate_replicates_reported():
    gts = make_gts(3)
    labeled = [
        LabeledFinding(finding=naming_finding(0, "gt-00"), label="tp", gt_id="gt-00"),
        LabeledFinding(finding=noise_finding(0), label="fp"),
    ]
    report = calibrate(JudgeConfig(), labeled, gts, replicates=3)
    assert report.replicates == 3
    assert report.replicate_agreements == ((1, 1, 0),) * 3  # lexical: deterministic
    assert report.to_obj()["mean_agreement"] == pytest.approx(2.0)
