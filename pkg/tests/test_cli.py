import csv
import io
import json
import subprocess
import sys

import pytest

from helpers import fixture
from ltlgames.cli import main
from ltlgames.game import read_game

GRID_2X2 = """ap: b d
grid:
. .
. .
labels:
cell(0,0): b
cell(1,1): d
"""


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


@pytest.fixture
def grid_product(tmp_path, capsys):
    """2x2 robust grid composed with the recurrence/persistence automaton."""
    spec = tmp_path / "g.grid"
    spec.write_text(GRID_2X2)
    base, prod = tmp_path / "base.json", tmp_path / "prod.json"
    assert run(capsys, "env", "robust", spec, "-o", base)[0] == 0
    assert run(capsys, "product", base, "fixture:fig1.hoa", "-o", prod, "--ltl", "G F b | F G d")[0] == 0
    return prod


def test_product_of_two_state_game(tmp_path, capsys):
    out = tmp_path / "p.json"
    assert run(capsys, "product", "fixture:two_state.game.json", "fixture:fig1.hoa", "-o", out)[0] == 0
    assert read_game(out).n_states <= 6
    assert run(capsys, "product", "fixture:two_state.game.json", "fixture:fig1.hoa", "-o", out, "--no-prune")[0] == 0
    assert read_game(out).n_states == 6


def test_alphabet_mismatch_exits_with_input_error(tmp_path, capsys):
    code, _, err = run(capsys, "product", "fixture:two_state.game.json", "fixture:phi1.hoa", "-o", tmp_path / "p.json")
    assert code == 2
    assert "not in the game's AP" in err


def test_missing_file_is_an_input_error(tmp_path, capsys):
    code, _, err = run(capsys, "kcopy", tmp_path / "nope.json", "-o", tmp_path / "k.json")
    assert code == 2 and "nope.json" in err


def test_wrong_formula_is_caught_before_product(tmp_path, capsys):
    code, _, err = run(
        capsys, "product", "fixture:two_state.game.json", "fixture:fig1.hoa", "-o", tmp_path / "p.json", "--ltl", "G F b"
    )
    assert code == 2


def test_kcopy_command(tmp_path, capsys):
    out = tmp_path / "k.json"
    assert run(capsys, "kcopy", "fixture:fig3.game.json", "-o", out)[0] == 0
    kg = read_game(out)
    assert kg.n_states == 10 and kg.k == 1


def test_learn_is_deterministic_and_rerunnable(tmp_path, capsys):
    args = ["learn", "fixture:gamble4.game.json", "--episodes", 1000, "--seed", 7, "--max-steps", 50]
    first = run_json(capsys, *args, "-o", tmp_path / "a")
    second = run_json(capsys, *args, "-o", tmp_path / "b")
    assert first["q_checksum"] == second["q_checksum"]
    for name in ("strategy.json", "q.csv", "values.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["params"]["c"] == 0.01
    assert manifest["params"]["seed"] == 7
    assert manifest["scheme"]["gamma_B"] == pytest.approx(0.9999)
    third = run_json(capsys, "learn", "--manifest", tmp_path / "a" / "manifest.json", "-o", tmp_path / "c")
    assert third["q_checksum"] == first["q_checksum"]
    assert (tmp_path / "a" / "q.csv").read_bytes() == (tmp_path / "c" / "q.csv").read_bytes()


def test_manifest_detects_changed_input(tmp_path, capsys):
    game = tmp_path / "g.json"
    game.write_text(fixture("gamble4.game.json").read_text())
    run_json(capsys, "learn", game, "--episodes", 10, "--max-steps", 5, "-o", tmp_path / "a")
    game.write_text(game.read_text().replace("0.7", "0.6").replace("0.3", "0.4"))
    code, _, err = run(capsys, "learn", "--manifest", tmp_path / "a" / "manifest.json", "-o", tmp_path / "b")
    assert code == 2 and "changed" in err


def test_parallel_runs_go_to_seed_directories(tmp_path, capsys):
    out = tmp_path / "runs"
    code, stdout, _ = run(
        capsys, "learn", "fixture:chain7.game.json", "--episodes", 200, "--max-steps", 20,
        "--runs", 2, "--jobs", 2, "--seed", 5, "-o", out,
    )
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["seed-5", "seed-6"]


def test_learn_without_pairs_needs_automaton(tmp_path, capsys):
    code, _, err = run(capsys, "learn", "fixture:two_state.game.json", "-o", tmp_path / "x", "--episodes", 1)
    assert code == 2


def test_oracle_writes_values_and_strategy(tmp_path, capsys):
    values, strategy = tmp_path / "v.csv", tmp_path / "s.json"
    doc = run_json(capsys, "oracle", "fixture:gamble4.game.json", "-o", values, "--strategy-out", strategy)
    assert doc["value_at_initial"] == pytest.approx(0.7)
    rows = list(csv.DictReader(io.StringIO(values.read_text())))
    assert [float(r["value"]) for r in rows] == pytest.approx([0.7, 0.4, 1.0, 0.0])
    assert list(rows[0]) == ["state_index", "meta", "value"]
    report = run_json(capsys, "eval", "fixture:gamble4.game.json", strategy)
    assert report["gap"] == pytest.approx(0.0, abs=1e-12)
    assert report["worst_case"] == pytest.approx(0.7)


def test_oracle_methods_agree(capsys):
    exact = run_json(capsys, "oracle", "fixture:chain7.game.json", "--method", "exact")
    vi = run_json(capsys, "oracle", "fixture:chain7.game.json", "--method", "vi", "--c", "0.001")
    assert exact["value_at_initial"] == pytest.approx(0.5)
    assert vi["value_at_initial"] == pytest.approx(0.5, abs=0.01)


def test_oracle_cap_exceeded_is_an_input_error(capsys):
    code, _, err = run(capsys, "oracle", "fixture:mixed7.game.json", "--cap", 2)
    assert code == 2 and "value-iteration" in err


def test_eval_of_fig3_strategy_reports_strict_gap(tmp_path, capsys):
    strategy = tmp_path / "s.json"
    run_json(capsys, "oracle", "fixture:fig3.game.json", "--strategy-out", strategy)
    report = run_json(capsys, "eval", "fixture:fig3.game.json", strategy)
    assert report["worst_case"] == 1.0
    assert report["kcopy_lower_bound"] == 0.0
    assert report["winning_set_sizes"] == [0, 0]


def test_eval_of_poor_strategy_has_nonnegative_gap(tmp_path, capsys):
    strategy = tmp_path / "s.json"
    doc = {
        "k": 1,
        "initial_mode": 1,
        "modes": [
            {"state": 0, "mode": 1, "choice": {"action": "direct"}},
            {"state": 2, "mode": 1, "choice": {"action": "stay"}},
        ],
    }
    strategy.write_text(json.dumps(doc))
    report = run_json(capsys, "eval", "fixture:gamble4.game.json", strategy)
    assert report["worst_case"] == pytest.approx(0.4)
    assert report["gap"] == pytest.approx(0.3)


def test_pipeline_on_grid(grid_product, tmp_path, capsys):
    run_json(capsys, "learn", grid_product, "--episodes", 2000, "--max-steps", 100, "-o", tmp_path / "run")
    report = run_json(capsys, "eval", grid_product, tmp_path / "run" / "strategy.json")
    # the grid product is past the enumeration cap, so maximin is a discounted approximation
    assert report["maximin_method"].startswith("value-iteration")
    assert 0.0 <= report["worst_case"] <= report["maximin"] + 0.01
    code, out, _ = run(capsys, "render", grid_product, "--strategy", tmp_path / "run" / "strategy.json")
    assert code == 0
    grids = [block for block in out.split("\n\n") if block.strip()]
    assert len(grids) >= 2  # one per memory mode at least
    for block in grids:
        rows = [line for line in block.splitlines() if not line.startswith(("mode", "#", "[")) and line.strip()]
        assert all(len(r.split()) == 2 for r in rows[-2:])


def test_render_values_table(grid_product, tmp_path, capsys):
    run_json(capsys, "learn", grid_product, "--episodes", 50, "--max-steps", 20, "-o", tmp_path / "run")
    code, out, _ = run(capsys, "render", grid_product, "--values", tmp_path / "run" / "values.csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows and {"state_index", "x", "y", "value"} <= set(rows[0])


@pytest.mark.parametrize(
    "name",
    ["gamble4.game.json", "mixed7.game.json", "chain7.game.json", "fig3.game.json"],
)
def test_product_learn_eval_on_fixtures(name, tmp_path, capsys):
    run_json(capsys, "learn", f"fixture:{name}", "--episodes", 300, "--max-steps", 30, "-o", tmp_path / "r")
    report = run_json(capsys, "eval", f"fixture:{name}", tmp_path / "r" / "strategy.json")
    assert report["gap"] >= -1e-9


def test_env_commands(tmp_path, capsys):
    out = tmp_path / "adv.json"
    assert run(capsys, "env", "adversary", "fixture:adversary5.grid", "-o", out)[0] == 0
    assert read_game(out).n_states == 1250
    assert run(capsys, "env", "robust", "fixture:robust5.grid", "-o", out)[0] == 0
    code, _, _ = run(capsys, "env", "adversary", "fixture:robust3.grid", "-o", out)
    assert code == 2  # no adversary start cell


def test_fixtures_listing(capsys):
    code, out, _ = run(capsys, "fixtures")
    assert code == 0 and "fig3.game.json" in out and "phi1.hoa" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ltlgames", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
