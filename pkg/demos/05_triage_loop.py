"""The ground-truth maintenance loop, end to end and fully in-process.

An unmatched finding turns out to be a real vulnerability missing from the
ground truth: an expert promotes it through the review API, re-evaluation
runs, and the affected run's score shifts fp -> tp under the new version.
"""

import json
import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from ethibench import HarnessConfig, JudgeConfig
from ethibench.cli import main
from ethibench.review_api import create_app

from demo_world import make_target

workdir = Path(tempfile.mkdtemp(prefix="ethibench-demo-"))
data_dir = workdir / "data"

# Seed: a 4-entry target and one run whose second finding is real but
# unlisted (the agent found something the annotators missed).
gts = make_target(n_entries=4, target_id="demo-app")
gt_file = workdir / "demo-app.jsonl"
gt_file.write_text("".join(json.dumps(e.to_obj()) + "\n" for e in gts.entries))

findings = [
    {"title": "matches gt-01 directly", "description": "d", "steps_to_reproduce": "s",
     "timestamp": None},
    {"title": "debug endpoint /__console left enabled", "description":
     "remote code eval through the console", "steps_to_reproduce": "open /__console",
     "timestamp": None},
]
findings_file = workdir / "findings.jsonl"
findings_file.write_text("".join(json.dumps(f) + "\n" for f in findings))

main(["--data-dir", str(data_dir), "init-target", "--file", str(gt_file)])
main(["--data-dir", str(data_dir), "register-run", "--setup", "agent",
      "--target", "demo-app", "--replicate", "1", "--findings", str(findings_file),
      "--duration", "300"])
main(["--data-dir", str(data_dir), "evaluate", "--target", "demo-app", "--all"])

app = create_app(HarnessConfig(data_dir=data_dir, judge=JudgeConfig(backend="lexical")))
with TestClient(app) as client:
    before = client.get("/api/results", params={"target": "demo-app"}).json()
    print("before:", before["runs"][0]["counts"], "gt version", before["ground_truth_version"])

    queue = client.get("/api/queue", params={"target": "demo-app"}).json()
    print(f"\ntriage queue: {len(queue)} pending item(s)")
    item = next(i for i in queue if "__console" in i["finding"]["title"])

    # Expert verdict: real vulnerability, missing from ground truth.
    draft = {
        "id": "console", "name": "Exposed debug console",
        "category": "misconfiguration",
        "description": "interactive console reachable without authentication",
        "additional_info": "", "cvss": 9.8, "cwe": "CWE-489",
    }
    client.post(f"/api/queue/{item['item_id']}/decision",
                json={"kind": "promote_new_gt", "entry": draft, "reviewer": "expert-1"})
    print("promoted finding to new ground-truth entry 'console'")

    job = client.post("/api/reevaluate", params={"target": "demo-app"}).json()
    while client.get(f"/api/jobs/{job['job_id']}").json()["status"] not in ("done", "failed"):
        time.sleep(0.05)

    after = client.get("/api/results", params={"target": "demo-app"}).json()
    print("\nafter: ", after["runs"][0]["counts"], "gt version", after["ground_truth_version"])
    print("the promoted finding now counts as a true positive; the revision")
    print("log preserves provenance and every prior version stays retrievable.")
