import json
import time

import pytest
from fastapi.testclient import TestClient

from ethibench.cli import main
from ethibench.config import HarnessConfig
from ethibench.judge import JudgeConfig
from ethibench.review_api import create_app

from conftest import (
    make_gts,
    naming_finding,
    noise_finding,
    write_findings_file,
    write_gt_file,
)


def run_cli(*argv):
    return main([str(a) for a in argv])


POISON_FINDING = {
    "title": "cache poisoning via web-cache-01 header reflection",
    "description": "responses cached with attacker header",
    "steps_to_reproduce": "send crafted header twice",
    "timestamp": None,
}


@pytest.fixture
def world(tmp_path):
    """Target with 5 entries; run r1: tp=1, dup=1, fp=3; run r2: tp=1, fp=0."""
    data = tmp_path / "data"
    gt_file = write_gt_file(tmp_path / "synth.jsonl", make_gts(5))
    run_cli("--data-dir", data, "init-target", "--file", gt_file)

    findings_r1 = [
        naming_finding(0, "gt-00", minute=1).to_obj(),
        naming_finding(1, "gt-00", minute=2).to_obj(),  # duplicate of the same entry
        POISON_FINDING,
        noise_finding(3, minute=4).to_obj(),
        noise_finding(4, minute=5).to_obj(),
    ]
    path1 = tmp_path / "r1.jsonl"
    path1.write_text("".join(json.dumps(o) + "\n" for o in findings_r1))
    run_cli("--data-dir", data, "register-run", "--setup", "strix-sonnet",
            "--target", "synth", "--replicate", "1", "--findings", path1,
            "--duration", "600", "--cost", "2.0")

    path2 = write_findings_file(tmp_path / "r2.jsonl", [naming_finding(0, "gt-01", minute=1)])
    run_cli("--data-dir", data, "register-run", "--setup", "strix-sonnet",
            "--target", "synth", "--replicate", "2", "--findings", path2,
            "--duration", "500", "--cost", "1.0")

    assert run_cli("--data-dir", data, "evaluate", "--target", "synth", "--all") == 0
    return data


@pytest.fixture
def client(world):
    config = HarnessConfig(data_dir=world, judge=JudgeConfig(max_in_flight=1))
    app = create_app(config)
    with TestClient(app) as c:
        yield c


def wait_for_job(client, job_id, timeout=15.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        job = client.get(f"/api/jobs/{job_id}").json()
        if job["status"] in ("done", "failed"):
            return job
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} did not finish")


# ---------------------------------------------------------------------------
# Queue
# ---------------------------------------------------------------------------

def test_queue_lists_fp_and_dup_items(client):
    items = client.get("/api/queue", params={"target": "synth"}).json()
    # r1 contributes 3 fp + 1 dup; r2 contributes none
    assert len(items) == 4
    classifications = sorted(i["classification"] for i in items)
    assert classifications == ["dup", "fp", "fp", "fp"]
    dup_item = next(i for i in items if i["classification"] == "dup")
    assert dup_item["candidate_gt_ids"] == ["gt-00"]
    assert dup_item["candidate_entries"][0]["id"] == "gt-00"
    fp_item = next(i for i in items if i["classification"] == "fp")
    assert fp_item["candidate_gt_ids"] == []


def test_queue_item_ids_stable(client):
    first = [i["item_id"] for i in client.get("/api/queue", params={"target": "synth"}).json()]
    second = [i["item_id"] for i in client.get("/api/queue", params={"target": "synth"}).json()]
    assert first == second


def test_queue_unknown_target_404(client):
    response = client.get("/api/queue", params={"target": "ghost"})
    assert response.status_code == 404
    assert "ghost" in response.json()["detail"]


def test_queue_empty_after_deciding_all(client):
    items = client.get("/api/queue", params={"target": "synth"}).json()
    for item in items:
        r = client.post(
            f"/api/queue/{item['item_id']}/decision",
            json={"kind": "confirm_fp", "reviewer": "rev1"},
        )
        assert r.status_code == 200
    pending = client.get("/api/queue", params={"target": "synth"}).json()
    assert pending == []
    decided = client.get("/api/queue", params={"target": "synth", "status": "decided"}).json()
    assert len(decided) == 4


# ---------------------------------------------------------------------------
# Decisions
# ---------------------------------------------------------------------------

def item_by_title(client, fragment):
    items = client.get("/api/queue", params={"target": "synth"}).json()
    return next(i for i in items if fragment in i["finding"]["title"])


def test_confirm_fp_leaves_ground_truth_unchanged(client):
    before = client.get("/api/ground-truth", params={"target": "synth"}).json()
    item = item_by_title(client, "vapor trail")
    r = client.post(f"/api/queue/{item['item_id']}/decision", json={"kind": "confirm_fp"})
    assert r.status_code == 200
    assert r.json()["status"] == "decided"
    after = client.get("/api/ground-truth", params={"target": "synth"}).json()
    assert after == before


def test_decide_twice_409(client):
    item = client.get("/api/queue", params={"target": "synth"}).json()[0]
    assert client.post(
        f"/api/queue/{item['item_id']}/decision", json={"kind": "confirm_fp"}
    ).status_code == 200
    assert client.post(
        f"/api/queue/{item['item_id']}/decision", json={"kind": "confirm_fp"}
    ).status_code == 409


def test_invalid_payloads_422(client):
    item = client.get("/api/queue", params={"target": "synth"}).json()[0]
    url = f"/api/queue/{item['item_id']}/decision"
    assert client.post(url, json={"kind": "bogus"}).status_code == 422
    assert client.post(url, json={"kind": "promote_new_gt"}).status_code == 422
    bad_draft = {"id": "x-1", "name": "", "category": "c", "description": "d",
                 "additional_info": "", "cvss": 5.0, "cwe": None}
    assert client.post(
        url, json={"kind": "promote_new_gt", "entry": bad_draft}
    ).status_code == 422
    assert client.post(
        url, json={"kind": "map_to_existing", "gt_id": "gt-99"}
    ).status_code == 422
    # item must still be pending after the failed attempts
    assert client.post(url, json={"kind": "confirm_fp"}).status_code == 200


def test_unknown_item_404(client):
    assert client.post(
        "/api/queue/ghost:0/decision", json={"kind": "confirm_fp"}
    ).status_code == 404


def test_promote_new_gt_bumps_version(client):
    item = item_by_title(client, "web-cache-01")
    draft = {
        "id": "web-cache-01",
        "name": "Web cache poisoning",
        "category": "cache",
        "description": "cache poisoning via header reflection",
        "additional_info": "",
        "cvss": 6.5,
        "cwe": "CWE-444",
    }
    r = client.post(
        f"/api/queue/{item['item_id']}/decision",
        json={"kind": "promote_new_gt", "entry": draft, "reviewer": "rev1"},
    )
    assert r.status_code == 200
    gt = client.get("/api/ground-truth", params={"target": "synth"}).json()
    assert gt["version"] == 2
    assert any(e["id"] == "web-cache-01" for e in gt["entries"])


def test_map_to_existing_records_label(client, world):
    item = item_by_title(client, "vapor trail")
    r = client.post(
        f"/api/queue/{item['item_id']}/decision",
        json={"kind": "map_to_existing", "gt_id": "gt-03", "reviewer": "rev1"},
    )
    assert r.status_code == 200
    labels_path = world / "calibration" / "synth.labels.jsonl"
    labels = [json.loads(l) for l in labels_path.read_text().splitlines()]
    assert labels[-1]["label"] == "tp" and labels[-1]["gt_id"] == "gt-03"


def test_refine_gt_applies_revision(client):
    item = item_by_title(client, "referencing gt-00")  # the dup item
    r = client.post(
        f"/api/queue/{item['item_id']}/decision",
        json={
            "kind": "refine_gt",
            "gt_id": "gt-00",
            "refined_fields": {"description": "sharper scoped description q0a"},
        },
    )
    assert r.status_code == 200
    gt = client.get("/api/ground-truth", params={"target": "synth"}).json()
    assert gt["version"] == 2
    entry = next(e for e in gt["entries"] if e["id"] == "gt-00")
    assert entry["description"].startswith("sharper")


# ---------------------------------------------------------------------------
# Re-evaluation loop
# ---------------------------------------------------------------------------

def test_reevaluate_noop_without_revisions(client):
    r = client.post("/api/reevaluate", params={"target": "synth"})
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "noop"
    assert "nothing to do" in body["notice"]


def test_promote_then_reevaluate_tp_up_fp_down(client):
    results = client.get("/api/results", params={"target": "synth"}).json()
    r1_before = next(r for r in results["runs"] if r["replicate"] == 1)
    r2_before = next(r for r in results["runs"] if r["replicate"] == 2)
    assert r1_before["counts"] == {"tp": 1, "fp": 3, "fn": 4, "dup": 1}

    item = item_by_title(client, "web-cache-01")
    draft = {
        "id": "web-cache-01", "name": "Web cache poisoning", "category": "cache",
        "description": "cache poisoning via header reflection",
        "additional_info": "", "cvss": 6.5, "cwe": "CWE-444",
    }
    assert client.post(
        f"/api/queue/{item['item_id']}/decision",
        json={"kind": "promote_new_gt", "entry": draft},
    ).status_code == 200

    start = client.post("/api/reevaluate", params={"target": "synth"}).json()
    assert start["status"] in ("pending", "running")
    job = wait_for_job(client, start["job_id"])
    assert job["status"] == "done"
    assert job["result"]["ground_truth_version"] == 2

    results = client.get("/api/results", params={"target": "synth"}).json()
    r1_after = next(r for r in results["runs"] if r["replicate"] == 1)
    r2_after = next(r for r in results["runs"] if r["replicate"] == 2)
    assert r1_after["counts"]["tp"] == r1_before["counts"]["tp"] + 1
    assert r1_after["counts"]["fp"] == r1_before["counts"]["fp"] - 1
    assert r1_after["ground_truth_version"] == 2
    # the other run gains one fn (denominator grew), tp/fp unchanged
    assert r2_after["counts"]["fn"] == r2_before["counts"]["fn"] + 1
    assert r2_after["counts"]["tp"] == r2_before["counts"]["tp"]
    assert r2_after["counts"]["fp"] == r2_before["counts"]["fp"]
    # resolved item no longer queued
    pending = client.get("/api/queue", params={"target": "synth"}).json()
    assert all("web-cache-01" not in i["finding"]["title"] for i in pending)


def test_confirm_fp_only_changes_nothing(client):
    results_before = client.get("/api/results", params={"target": "synth"}).json()
    for item in client.get("/api/queue", params={"target": "synth"}).json():
        client.post(f"/api/queue/{item['item_id']}/decision", json={"kind": "confirm_fp"})
    r = client.post("/api/reevaluate", params={"target": "synth"})
    assert r.json()["status"] == "noop"
    results_after = client.get("/api/results", params={"target": "synth"}).json()
    assert results_after == results_before


def test_job_unknown_404(client):
    assert client.get("/api/jobs/job-999").status_code == 404


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

def test_results_mirror_reports(client, world):
    results = client.get("/api/results", params={"target": "synth"}).json()
    assert results["ground_truth_version"] == 1
    assert len(results["runs"]) == 2
    r1 = next(r for r in results["runs"] if r["replicate"] == 1)
    doc = json.loads(
        (world / "reports" / "synth" / "strix-sonnet.synth.r1.v1.json").read_text()
    )
    assert r1["metrics"] == doc["payload"]["metrics"]
    assert r1["timeline"]  # parsed from the CSV artifact
    assert r1["timeline"][-1][1] == r1["counts"]["tp"]


def test_results_setup_filter(client):
    full = client.get("/api/results", params={"target": "synth"}).json()
    filtered = client.get(
        "/api/results", params={"target": "synth", "setup": "strix-sonnet"}
    ).json()
    assert len(filtered["runs"]) == len(full["runs"]) == 2
    none = client.get(
        "/api/results", params={"target": "synth", "setup": "other"}
    ).json()
    assert none["runs"] == []


def test_results_no_evaluations_empty_200(tmp_path):
    data = tmp_path / "data"
    gt_file = write_gt_file(tmp_path / "bare.jsonl", make_gts(2))
    run_cli("--data-dir", data, "init-target", "--file", gt_file)
    config = HarnessConfig(data_dir=data, judge=JudgeConfig(max_in_flight=1))
    with TestClient(create_app(config)) as client:
        r = client.get("/api/results", params={"target": "bare"})
        assert r.status_code == 200
        assert r.json()["runs"] == []
        assert client.get("/api/queue", params={"target": "bare"}).json() == []


def test_targets_listing(client):
    targets = client.get("/api/targets").json()
    assert targets[0]["target_id"] == "synth"
    assert targets[0]["entries"] == 5
    assert targets[0]["runs"] == 2
