import json
import random

import pytest

from ethibench.cli import main
from ethibench.evaluation import payload_bytes

from conftest import (
    make_gts,
    naming_finding,
    noise_finding,
    write_findings_file,
    write_gt_file,
)


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def world(tmp_path):
    """Data dir with one 5-entry target and one canonical 5-finding run."""
    data = tmp_path / "data"
    gt_file = write_gt_file(tmp_path / "synth.jsonl", make_gts(5))
    findings = [
        naming_finding(0, "gt-00", minute=1),
        naming_finding(1, "gt-02", minute=3),
        naming_finding(2, "gt-04", minute=5),
        noise_finding(3, minute=7),
        noise_finding(4, minute=9),
    ]
    findings_file = write_findings_file(tmp_path / "findings.jsonl", findings)
    assert run_cli("--data-dir", data, "init-target", "--file", gt_file) == 0
    assert run_cli(
        "--data-dir", data, "register-run",
        "--setup", "strix-sonnet", "--target", "synth", "--replicate", "1",
        "--findings", findings_file, "--duration", "600", "--cost", "2.5",
    ) == 0
    return data


def latest_report(data, target, run_id):
    paths = sorted((data / "reports" / target).glob(f"{run_id}.v*.json"))
    return json.loads(paths[-1].read_text())


def test_evaluate_single_run(world, capsys):
    code = run_cli("--data-dir", world, "evaluate", "--target", "synth",
                   "--run", "strix-sonnet.synth.r1")
    assert code == 0
    out = capsys.readouterr().out
    assert "tp=3 fp=2 fn=2 dup=0" in out
    doc = latest_report(world, "synth", "strix-sonnet.synth.r1")
    assert doc["payload"]["counts"] == {"tp": 3, "fp": 2, "fn": 2, "dup": 0}
    assert doc["payload"]["ground_truth_version"] == 1
    assert (world / "reports" / "synth" / "strix-sonnet.synth.r1.v1.timeline.csv").exists()


def test_evaluate_rerun_byte_identical_payload(world):
    args = ("--data-dir", world, "evaluate", "--target", "synth",
            "--run", "strix-sonnet.synth.r1")
    assert run_cli(*args) == 0
    first = payload_bytes(latest_report(world, "synth", "strix-sonnet.synth.r1")["payload"])
    assert run_cli(*args) == 0
    second = payload_bytes(latest_report(world, "synth", "strix-sonnet.synth.r1")["payload"])
    assert first == second


def test_evaluate_all_writes_index(world, tmp_path):
    for rep in (2, 3):
        findings_file = write_findings_file(
            tmp_path / f"f{rep}.jsonl",
            [naming_finding(0, f"gt-0{rep}"), noise_finding(1)],
        )
        run_cli("--data-dir", world, "register-run", "--setup", "strix-sonnet",
                "--target", "synth", "--replicate", str(rep),
                "--findings", findings_file, "--duration", "500", "--cost", "2.0")
    assert run_cli("--data-dir", world, "evaluate", "--target", "synth", "--all") == 0
    reports = list((world / "reports" / "synth").glob("*.v1.json"))
    index = world / "reports" / "synth" / "index.v1.json"
    assert index.exists()
    assert len([p for p in reports if not p.name.startswith("index.")]) == 3
    doc = json.loads(index.read_text())
    assert doc["payload"]["aggregate"]["tp"]["n_used"] == 3


def test_evaluate_missing_ground_truth_exit2(tmp_path, capsys):
    data = tmp_path / "data"
    code = run_cli("--data-dir", data, "evaluate", "--target", "ghost", "--all")
    assert code == 2
    assert "ghost" in capsys.readouterr().err


def test_evaluate_unregistered_run_exit2(world):
    assert run_cli("--data-dir", world, "evaluate", "--target", "synth",
                   "--run", "nope") == 2


def test_usage_error_exit1(capsys):
    assert main(["evaluate"]) == 1  # missing --target
    assert "usage error" in capsys.readouterr().err


def test_cumulate_k1_zero_deltas(world, capsys):
    assert run_cli("--data-dir", world, "evaluate", "--target", "synth", "--all") == 0
    code = run_cli("--data-dir", world, "cumulate", "--target", "synth",
                   "--setup", "strix-sonnet")
    assert code == 0
    out = capsys.readouterr().out
    assert "k=1" in out
    path = world / "reports" / "synth" / "campaign.strix-sonnet.v1.json"
    payload = json.loads(path.read_text())["payload"]
    assert all(v == 0.0 for v in payload["delta_pct"].values())
    assert payload["overlap"] is None


def test_cumulate_overlap_matrix_kxk(world, tmp_path):
    findings_file = write_findings_file(
        tmp_path / "f2.jsonl", [naming_finding(0, "gt-01"), naming_finding(1, "gt-03")]
    )
    run_cli("--data-dir", world, "register-run", "--setup", "strix-sonnet",
            "--target", "synth", "--replicate", "2", "--findings", findings_file,
            "--duration", "400", "--cost", "1.0")
    assert run_cli("--data-dir", world, "cumulate", "--target", "synth",
                   "--setup", "strix-sonnet") == 0
    payload = json.loads(
        (world / "reports" / "synth" / "campaign.strix-sonnet.v1.json").read_text()
    )["payload"]
    matrix = payload["overlap"]["matrix"]
    assert len(matrix) == 2 and all(len(row) == 2 for row in matrix)
    assert payload["cumulative"]["tp"] == 5  # disjoint assigned sets 3 + 2


# ---------------------------------------------------------------------------
# compare / select-suite / calibrate / report
# ---------------------------------------------------------------------------

def build_two_setup_world(tmp_path, *, shift=0):
    """Two targets x two setups x three replicates, deterministic mixes."""
    data = tmp_path / "data"
    rng = random.Random(8)
    for target in ("tgt-a", "tgt-b"):
        gt_file = write_gt_file(tmp_path / f"{target}.jsonl", make_gts(6, target=target))
        run_cli("--data-dir", data, "init-target", "--file", gt_file)
    for setup_i, setup in enumerate(("alpha-engine", "beta-engine")):
        for target_i, target in enumerate(("tgt-a", "tgt-b")):
            for rep in (1, 2, 3):
                n_tp = 1 + ((rep + setup_i * shift + 2 * target_i) % 4)
                n_fp = 1 + (rep + target_i) % 2
                findings = [
                    naming_finding(i, f"gt-{i:02d}") for i in range(n_tp)
                ] + [noise_finding(9 + j, minute=j) for j in range(n_fp)]
                path = write_findings_file(
                    tmp_path / f"f-{setup}-{target}-{rep}.jsonl", findings
                )
                run_cli("--data-dir", data, "register-run", "--setup", setup,
                        "--target", target, "--replicate", str(rep),
                        "--findings", path, "--duration", str(300 + 100 * rep),
                        "--cost", str(1.0 + rng.random()))
    for target in ("tgt-a", "tgt-b"):
        assert run_cli("--data-dir", data, "evaluate", "--target", target, "--all") == 0
    return data


def test_compare_self_zero(tmp_path, capsys):
    data = build_two_setup_world(tmp_path)
    code = run_cli("--data-dir", data, "compare", "--a", "alpha-engine",
                   "--b", "beta-engine")
    assert code == 0
    out = capsys.readouterr().out
    assert "Difference" in out and "p-value" in out and "Cohen's d" in out
    doc = json.loads(
        (data / "reports" / "comparisons" / "alpha-engine__vs__beta-engine.json").read_text()
    )
    rows = doc["payload"]["rows"]
    assert len(rows) == 4
    for row in rows:  # identical construction (shift=0) -> identical samples
        assert row["difference_points"] == pytest.approx(0.0)
        assert row["p_value"] == pytest.approx(1.0)
        assert row["cohens_d"] == pytest.approx(0.0)


def test_compare_shifted_positive(tmp_path):
    data = build_two_setup_world(tmp_path, shift=1)
    assert run_cli("--data-dir", data, "compare", "--a", "alpha-engine",
                   "--b", "beta-engine", "--metrics", "f1,recall") == 0


def test_compare_single_replicate_refused(world, capsys):
    assert run_cli("--data-dir", world, "evaluate", "--target", "synth", "--all") == 0
    code = run_cli("--data-dir", world, "compare", "--a", "strix-sonnet",
                   "--b", "strix-sonnet")
    assert code == 2
    assert "underpowered" in capsys.readouterr().err


def test_select_suite_full_budget(tmp_path, capsys):
    data = build_two_setup_world(tmp_path, shift=1)
    code = run_cli("--data-dir", data, "select-suite", "--budget", "1.0x")
    assert code == 0
    out = capsys.readouterr().out
    assert "exhaustive" in out
    doc = json.loads((data / "reports" / "suite_selection.json").read_text())
    assert doc["payload"]["subset"] == ["tgt-a", "tgt-b"]


def test_select_suite_history_csv_planted(tmp_path, capsys):
    from ethibench.suite import dump_history_csv
    import test_suite as ts
    history = ts.planted_history()
    csv_path = tmp_path / "history.csv"
    dump_history_csv(history, csv_path)
    code = run_cli("--data-dir", tmp_path / "data", "select-suite",
                   "--budget-abs", "10", "--history", csv_path)
    assert code == 0
    assert "t1" in capsys.readouterr().out


def test_select_suite_infeasible_budget(tmp_path, capsys):
    from ethibench.suite import dump_history_csv
    import test_suite as ts
    csv_path = tmp_path / "history.csv"
    dump_history_csv(ts.planted_history(), csv_path)
    code = run_cli("--data-dir", tmp_path / "data", "select-suite",
                   "--budget-abs", "3", "--history", csv_path)
    assert code == 2
    assert "cheapest" in capsys.readouterr().err


def test_select_suite_bad_budget_usage_error(tmp_path):
    assert run_cli("--data-dir", tmp_path, "select-suite", "--budget", "0.4") == 1


def test_calibrate_judge_cli(world, tmp_path, capsys):
    labels = tmp_path / "labels.jsonl"
    with labels.open("w") as fh:
        for i in range(3):
            f = naming_finding(0, f"gt-{i:02d}")
            fh.write(json.dumps(f.to_obj() | {"label": "tp", "gt_id": f"gt-{i:02d}"}) + "\n")
        for i in range(3):
            fh.write(json.dumps(noise_finding(0).to_obj() | {"label": "fp"}) + "\n")
    code = run_cli("--data-dir", world, "calibrate-judge", "--labels", labels,
                   "--target", "synth")
    assert code == 0
    out = capsys.readouterr().out
    assert "agreement: 6/6" in out


def test_report_empty_registry_valid_csv(tmp_path, capsys):
    data = tmp_path / "data"
    assert run_cli("--data-dir", data, "report", "--format", "csv") == 0
    out = capsys.readouterr().out
    assert out.startswith("setup,target_id,replicate,run_id")
    assert len(out.strip().splitlines()) == 1


def test_report_csv_and_json(world, tmp_path, capsys):
    assert run_cli("--data-dir", world, "evaluate", "--target", "synth", "--all") == 0
    capsys.readouterr()
    assert run_cli("--data-dir", world, "report", "--format", "csv") == 0
    csv_out = capsys.readouterr().out
    assert "strix-sonnet" in csv_out
    out_file = tmp_path / "export.json"
    assert run_cli("--data-dir", world, "report", "--format", "json",
                   "--out", out_file) == 0
    rows = json.loads(out_file.read_text())
    assert rows[0]["tp"] == 3 and rows[0]["f0.5"] is not None


def test_config_file_severity_and_data_dir(tmp_path, capsys):
    config = tmp_path / "harness.ini"
    data = tmp_path / "from-config"
    config.write_text(
        f"[harness]\ndata_dir = {data}\n\n"
        "[judge]\nbackend = lexical\nmax_in_flight = 1\n\n"
        "[severity]\nbands = 0.0:4.9:0, 5.0:10.0:100\n"
    )
    gt_file = write_gt_file(tmp_path / "synth.jsonl", make_gts(2))
    findings_file = write_findings_file(
        tmp_path / "f.jsonl", [naming_finding(0, "gt-00")]
    )
    assert run_cli("--config", config, "init-target", "--file", gt_file) == 0
    assert run_cli("--config", config, "register-run", "--setup", "s",
                   "--target", "synth", "--replicate", "1",
                   "--findings", findings_file) == 0
    assert run_cli("--config", config, "evaluate", "--target", "synth", "--all") == 0
    doc = latest_report(data, "synth", "s.synth.r1")
    assert doc["payload"]["metrics"]["severity_score"] == 100  # 5.0 -> custom band


def test_evaluate_judge_errors_exit3(world, tmp_path, capsys):
    config = tmp_path / "remote.ini"
    config.write_text(
        f"[harness]\ndata_dir = {world}\n\n"
        "[judge]\nbackend = remote\nmodel_name = m\n"
        "endpoint = http://127.0.0.1:9/unreachable\n"
        "retries = 0\nmax_in_flight = 2\ntimeout_seconds = 0.2\n"
    )
    code = run_cli("--config", config, "evaluate", "--target", "synth",
                   "--run", "strix-sonnet.synth.r1")
    assert code == 3
    err = capsys.readouterr().err
    assert "judge error" in err
    # the report is still written, with the failures flagged
    doc = latest_report(world, "synth", "strix-sonnet.synth.r1")
    assert len(doc["payload"]["judge_errors"]) == 25
    assert doc["payload"]["counts"]["fp"] == 5
