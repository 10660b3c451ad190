"""Shared toy target for the demo scripts."""

from ethibench import GroundTruthEntry, GroundTruthSet


def make_target(n_entries=8, target_id="demo-app"):
    cvss_cycle = [9.8, 7.5, 6.1, 5.3, 4.0, 3.1, 8.8, 9.1]
    cwe_cycle = ["CWE-89", "CWE-639", "CWE-79", None, "CWE-22", "CWE-352", "CWE-287", None]
    entries = tuple(
        GroundTruthEntry(
            id=f"gt-{i:02d}",
            name=f"Known weakness {i}",
            category=f"class-{i % 3}",
            description=f"distinct root cause r{i}a r{i}b in component c{i}",
            additional_info="",
            cvss=cvss_cycle[i % len(cvss_cycle)],
            cwe=cwe_cycle[i % len(cwe_cycle)],
        )
        for i in range(n_entries)
    )
    return GroundTruthSet(target_id=target_id, version=1, entries=entries)
