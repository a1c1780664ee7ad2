# SPDX-License-Identifier: Apache-2.0
import os
import subprocess

import pytest

import kumo


def test_config_round_trip():
    cfg = kumo.synthetic_config(seed=3, domain="Py")
    assert kumo.validate_config(cfg) == []
    again = kumo.SeedConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.hash() == cfg.hash()
    assert cfg.domain == "Py"


def test_generate_and_solve():
    cfg = kumo.synthetic_config(seed=4)
    tasks = kumo.generate_tasks(cfg, n_truth=3, n_action=3, count=5, seed=1)
    assert len(tasks) == 5
    for t in tasks:
        assert t.invariant_violations() == []
        fast = kumo.optimal_action_count(t, True, True)
        slow = kumo.brute_force_expected_steps(t)
        assert abs(fast - slow) < 1e-9
        assert kumo.TaskInstance.from_json(t.to_json()).id == t.id


def test_analysis_helpers():
    edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]
    assert kumo.modularity(6, edges, [0, 0, 0, 1, 1, 1]) == pytest.approx(0.5, abs=1e-12)
    community, q = kumo.louvain(6, edges)
    assert q == pytest.approx(0.5, abs=1e-9)
    assert len(set(community)) == 2
    assert kumo.chi_square_sf(3.841, 1) == pytest.approx(0.05, abs=1e-3)
    assert kumo.cramers_v([[10, 0], [0, 10]]) == pytest.approx(1.0)
    a, b = kumo.split_environment(kumo.synthetic_config(seed=5, n_components=2))
    assert set(a.truths).isdisjoint(b.truths)
    assert kumo.earnings(1.0, 30) == pytest.approx(37.0)


def test_errors_are_kumo_errors():
    with pytest.raises(kumo.KumoError):
        kumo.SeedConfig.from_json("not json")
    with pytest.raises(kumo.KumoError):
        kumo.generate_tasks(kumo.synthetic_config(), n_truth=99)


def test_in_process_cli(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(kumo.synthetic_config(seed=6).to_json())
    code, out, _ = kumo.cli(["--registry", str(tmp_path / "reg"), "gen-tasks", "--config", str(cfg), "--count", "3"])
    assert code == 0
    assert len(out.splitlines()) == 4
    code, _, err = kumo.cli(["gen-tasks", "--bogus"])
    assert code == 1 and err


@pytest.mark.skipif(not os.environ.get("KUMO_CLI"), reason="KUMO_CLI not set")
def test_cli_binary(tmp_path):
    cli = os.environ["KUMO_CLI"]
    res = subprocess.run([cli, "--registry", str(tmp_path / "reg"), "--endpoint", "mock", "propose", "--domain", "Greenhouse"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0, res.stderr
    assert "Goal" in res.stdout
    assert subprocess.run([cli, "--nope"], capture_output=True, check=False).returncode == 1
