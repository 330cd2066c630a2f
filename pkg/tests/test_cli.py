import json

import pytest

from gridnav.cli import (
    build_parser,
    load_episode_file,
    main,
    write_episode_file,
)
from gridnav.worldgen import generate_episodes


@pytest.fixture(scope="module")
def episode_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("eps") / "corridor.json"
    write_episode_file(str(path), generate_episodes(4, "corridor", 2))
    return str(path)


class TestGenerate:
    def test_seed_reproduces_bytes(self, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        for out in (a, b):
            assert main(["generate", "--seed", "7", "--template", "maze",
                         "--count", "2", "--output", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_count_zero(self, tmp_path):
        out = tmp_path / "empty.json"
        assert main(["generate", "--seed", "1", "--template", "corridor",
                     "--count", "0", "--output", str(out)]) == 0
        assert load_episode_file(str(out)) == []

    def test_round_trip_through_loader(self, episode_file):
        episodes = load_episode_file(episode_file)
        assert len(episodes) == 2
        assert episodes[0].id == "corridor-s4-e000"


class TestRun:
    def test_oracle_run_writes_results(self, episode_file, tmp_path, capsys):
        out = tmp_path / "results.jsonl"
        assert main(["run", "--episodes", episode_file,
                     "--output", str(out), "--seed", "1"]) == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert "config" in lines[0]
        assert "aggregate" in lines[-1]
        assert len(lines) == 2 + 2  # config + one line per episode + aggregate
        for summary in lines[1:-1]:
            assert set(summary["metrics"]) == {"ne", "sr", "osr", "spl",
                                               "ndtw", "sdtw",
                                               "trajectory_length"}
        table = capsys.readouterr().out
        assert "SR" in table

    def test_dry_run_prints_config_only(self, episode_file, tmp_path, capsys):
        out = tmp_path / "never.jsonl"
        assert main(["run", "--episodes", episode_file, "--output", str(out),
                     "--strategy", "fbe", "--dry-run"]) == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed["strategy"] == "fbe"
        assert not out.exists()

    def test_invalid_strategy_exit_2(self, episode_file, tmp_path):
        assert main(["run", "--episodes", episode_file,
                     "--output", str(tmp_path / "r.jsonl"),
                     "--strategy", "teleport"]) == 2

    def test_replay_without_fixtures_exit_3(self, episode_file, tmp_path):
        assert main(["run", "--episodes", episode_file,
                     "--output", str(tmp_path / "r.jsonl"),
                     "--backend", "replay"]) == 3

    def test_unreachable_remote_exit_4(self, episode_file, tmp_path,
                                       monkeypatch):
        monkeypatch.setenv("GRIDNAV_REMOTE_ENDPOINT", "http://127.0.0.1:9")
        assert main(["run", "--episodes", episode_file,
                     "--output", str(tmp_path / "r.jsonl"),
                     "--backend", "remote"]) == 4


class TestAblate:
    def test_unknown_axis_exit_2(self, episode_file):
        assert main(["ablate", "--axis", "flavor",
                     "--episodes", episode_file]) == 2

    def test_constraints_axis_table(self, episode_file, tmp_path, capsys):
        out = tmp_path / "ablation.json"
        assert main(["ablate", "--axis", "constraints",
                     "--episodes", episode_file, "--seed", "1",
                     "--output", str(out)]) == 0
        printed = capsys.readouterr().out
        assert "all constraints" in printed
        assert "final only" in printed
        report = json.loads(out.read_text())
        assert report["axis"] == "constraints"
        assert len(report["rows"]) == 2


class TestParser:
    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_strategy_flag_parsed(self):
        args = build_parser().parse_args(
            ["run", "--episodes", "e.json", "--lambda", "0.9"])
        assert args.lam == 0.9
