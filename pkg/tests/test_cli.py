import csv
import io
import json
import math

import pytest

from funnelopt import cli


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestList:
    def test_lists_every_problem(self, capsys):
        code, out, _ = run(["list"], capsys)
        assert code == cli.EXIT_OK
        rows = {r["problem"]: r for r in read_csv(out)}
        assert len(rows) == 16 and rows["G11"]["best_known"] == "0.75000455"
        assert rows["SR7"]["bb_constraints"] == "9" and rows["SR7"]["objective"] == "WB"


class TestSolve:
    def test_text_output(self, capsys):
        code, out, _ = run(["solve", "--problem", "G8", "--maxeval", "200", "--seed", "0"], capsys)
        assert code == cli.EXIT_OK
        for key in ("best_sol", "best_fval", "cv", "total_eval", "nb_local_searches", "fL"):
            assert key in out

    def test_json_output(self, capsys):
        code, out, _ = run(["solve", "--problem", "G11", "--maxeval", "150", "--format", "json"],
                           capsys)
        d = json.loads(out)
        assert code == cli.EXIT_OK and d["feasible"]
        assert d["total_eval"] <= 150 and d["best_fval"] == pytest.approx(0.75, abs=1e-2)

    def test_output_file(self, capsys, tmp_path):
        path = tmp_path / "sol.json"
        code, _, _ = run(["solve", "--problem", "G8", "--maxeval", "100", "--format", "json",
                          "--output", str(path)], capsys)
        assert code == cli.EXIT_OK and json.loads(path.read_text())["problem"] == "G8"

    def test_known_optimum_stops_early(self, capsys):
        code, out, _ = run(["solve", "--problem", "G11", "--maxeval", "500", "--format", "json",
                            "--f-global-optimum", "0.7499"], capsys)
        d = json.loads(out)
        assert code == cli.EXIT_OK and d["status"] == "f_global_optimum" and d["total_eval"] < 500

    def test_single_local_search(self, capsys):
        code, out, _ = run(["solve", "--problem", "HS23", "--no-multistart", "--maxeval", "200",
                            "--format", "json"], capsys)
        assert code == cli.EXIT_OK and json.loads(out)["nb_local_searches"] == 1

    def test_grey_box_mode(self, capsys):
        # seed 0 lands in the local minimum near (2.618, -1.618)
        code, out, _ = run(["solve", "--problem", "HS23", "--mode", "grey-box", "--maxeval", "100",
                            "--seed", "1", "--format", "json"], capsys)
        assert code == cli.EXIT_OK and json.loads(out)["best_fval"] == pytest.approx(2.0, abs=1e-2)

    def test_infeasible_exit_code(self, capsys):
        code, _, err = run(["solve", "--problem", "G6", "--maxeval", "20"], capsys)
        assert code == cli.EXIT_INFEASIBLE and "no feasible" in err

    def test_verbose_traces_on_stderr(self, capsys):
        code, _, err = run(["solve", "--problem", "G8", "--maxeval", "100", "--verbose"], capsys)
        lines = [json.loads(line) for line in err.splitlines() if line.startswith("{")]
        assert code == cli.EXIT_OK and lines and all("search" in r for r in lines)

    @pytest.mark.parametrize("argv", [
        ["solve", "--problem", "G99"],
        ["solve", "--problem", "G6", "--mode", "grey-box"],
        ["solve", "--problem", "G6", "--maxeval", "10", "--maxeval-ls", "20"],
    ])
    def test_config_errors(self, argv, capsys):
        assert run(argv, capsys)[0] == cli.EXIT_CONFIG

    @pytest.mark.parametrize("argv", [
        ["solve", "--problem", "G6", "--whichmodel", "7"],
        ["solve", "--problem", "G6", "--maxeval", "0"],
        ["bench", "--suite", "nope"],
    ])
    def test_argument_errors(self, argv, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(argv)
        assert info.value.code == cli.EXIT_CONFIG


class TestBench:
    def test_csv_columns_and_seeds(self, capsys):
        code, out, err = run(["bench", "--problem", "G8", "--trials", "3", "--seed", "4",
                              "--budget", "60"], capsys)
        rows = read_csv(out)
        assert code == cli.EXIT_OK
        assert list(rows[0]) == list(cli.CSV_COLUMNS)
        assert [int(r["seed"]) for r in rows] == [4, 5, 6]
        assert all(int(r["evals"]) <= 60 for r in rows)
        assert "best" in err

    def test_greybox_suite_defaults_to_grey_box(self, capsys):
        code, out, _ = run(["bench", "--suite", "greybox", "--budget", "30"], capsys)
        rows = read_csv(out)
        assert code == cli.EXIT_OK and len(rows) == 5
        assert {r["mode"] for r in rows} == {"grey-box"}

    def test_json_format(self, capsys):
        code, out, _ = run(["bench", "--problem", "HS21", "--budget", "40", "--format", "json"],
                           capsys)
        d = json.loads(out)
        assert code == cli.EXIT_OK and len(d["rows"]) == 1 and d["summary"][0]["trials"] == 1

    def test_parallel_matches_serial(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        base = ["bench", "--problem", "G11", "--trials", "3", "--budget", "50", "--seed", "2"]
        run(base + ["--output", str(a)], capsys)
        run(base + ["--jobs", "2", "--output", str(b)], capsys)
        assert a.read_bytes() == b.read_bytes()

    def test_verbose_jsonl(self, capsys):
        code, _, err = run(["bench", "--problem", "G8", "--budget", "30", "--verbose"], capsys)
        recs = [json.loads(line) for line in err.splitlines() if line.startswith("{")]
        assert code == cli.EXIT_OK and recs and all(r["problem"] == "G8" for r in recs)


class TestAggregate:
    def row(self, f, cv=0.0, status="ok", seed=0):
        return {"problem": "P", "mode": "black-box", "budget": 100, "seed": seed,
                "best_f": f, "cv": cv, "status": status}

    def test_single_trial(self):
        s = cli.aggregate([self.row(3.0)])[0]
        assert s["best"] == s["avg"] == s["worst"] == 3.0

    def test_only_feasible_rows_count(self):
        rows = [self.row(1.0), self.row(-5.0, cv=1e-2), self.row(3.0),
                self.row(math.nan, cv=math.nan, status="failed:BudgetExhausted")]
        s = cli.aggregate(rows)[0]
        assert (s["best"], s["avg"], s["worst"]) == (1.0, 2.0, 3.0)
        assert s["trials"] == 4 and s["feasible"] == 2

    def test_no_feasible_rows(self):
        s = cli.aggregate([self.row(1.0, status="infeasible")])[0]
        assert math.isnan(s["best"]) and s["feasible"] == 0

    def test_csv_floats_round_trip(self):
        r = self.row(0.1 + 0.2)
        r.update(evals=10, n_searches=1)
        back = read_csv(cli.rows_to_csv([r]))[0]
        assert float(back["best_f"]) == 0.1 + 0.2
