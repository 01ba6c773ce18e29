import io
import math

import numpy as np
import pytest

from phrod.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    EXIT_SOLVER,
    FAILURE_MARKER,
    convergence_study,
    fitted_order,
    main,
    record_columns,
    write_study,
)
from phrod.scenarios import builtin, builtin_names


def _rows(text):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return lines[0].split(","), [list(map(float, ln.split(","))) for ln in lines[1:]]


class TestColumns:
    def test_base_columns(self):
        cols = record_columns(builtin("flying_spaghetti"))
        assert cols[:5] == ["time", "total_energy", "external_work", "energy_increment",
                            "power_balance"]
        assert "dissipated_energy" not in cols
        assert "tip_position_3" in cols and "constraint_max" in cols
        assert not any(c.startswith("tau_") for c in cols)
        assert len(cols) == len(set(cols))

    def test_feature_columns(self):
        assert "dissipated_energy" in record_columns(builtin("cantilever_oscillation_viscous"))
        cols = record_columns(builtin("soft_arm_circle"))
        assert cols[-3:] == ["tau_1", "tau_2", "tau_3"]


class TestSimulate:
    def test_flying_spaghetti_rows(self, capsys):
        assert main(["simulate", "flying_spaghetti"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("# phrod")
        header, rows = _rows(out)
        assert len(rows) == 151
        assert header == record_columns(builtin("flying_spaghetti"))
        t = np.array([r[0] for r in rows])
        np.testing.assert_allclose(t, 0.1 * np.arange(151), atol=1e-12)

    def test_quasistatic_rows(self, capsys):
        assert main(["simulate", "quasistatic_cantilever"]) == EXIT_OK
        _, rows = _rows(capsys.readouterr().out)
        assert len(rows) == 101

    def test_column_subset_to_file(self, tmp_path):
        out = tmp_path / "run.csv"
        code = main(["simulate", "flying_spaghetti", "-o", "t_end=0.5", "--out", str(out),
                     "--columns", "time", "power_balance"])
        assert code == EXIT_OK
        header, rows = _rows(out.read_text())
        assert header == ["time", "power_balance"]
        assert len(rows) == 6

    def test_deterministic(self, capsys):
        main(["simulate", "flying_spaghetti", "-o", "t_end=0.5"])
        first = capsys.readouterr().out
        main(["simulate", "flying_spaghetti", "-o", "t_end=0.5"])
        assert capsys.readouterr().out == first

    def test_scenario_file(self, tmp_path, capsys):
        assert main(["show", "flying_spaghetti", "-o", "t_end=0.3"]) == EXIT_OK
        path = tmp_path / "sc.toml"
        path.write_text(capsys.readouterr().out)
        assert main(["simulate", str(path)]) == EXIT_OK
        _, rows = _rows(capsys.readouterr().out)
        assert len(rows) == 4

    def test_solver_failure(self, capsys):
        code = main(["simulate", "flying_spaghetti", "-o", "eps=1e-30", "-o",
                     "max_newton_iters=2", "-o", "t_end=1.0"])
        assert code == EXIT_SOLVER
        cap = capsys.readouterr()
        lines = cap.out.strip().splitlines()
        assert lines[-1].startswith(FAILURE_MARKER)
        # rows before the failing step are kept
        assert len(_rows(cap.out)[1]) >= 1
        assert "solver failure" in cap.err

    @pytest.mark.parametrize("argv", [
        ["simulate", "no_such_scenario"],
        ["simulate", "flying_spaghetti", "-o", "h=0.07"],
        ["simulate", "flying_spaghetti", "-o", "bogus"],
        ["simulate", "flying_spaghetti", "--columns", "nope"],
    ])
    def test_configuration_errors(self, argv, capsys):
        assert main(argv) == EXIT_CONFIG
        assert "configuration error" in capsys.readouterr().err

    def test_io_error(self, tmp_path, capsys):
        bad = tmp_path / "missing" / "out.csv"
        assert main(["simulate", "flying_spaghetti", "--out", str(bad)]) == EXIT_IO
        assert "I/O error" in capsys.readouterr().err


class TestListAndShow:
    def test_list(self, capsys):
        assert main(["list-scenarios"]) == EXIT_OK
        out = capsys.readouterr().out
        names = [ln.split()[0] for ln in out.splitlines()]
        assert names == builtin_names()

    def test_show_applies_overrides(self, capsys):
        assert main(["show", "flying_spaghetti", "-o", "h=0.05"]) == EXIT_OK
        assert "h = 0.05" in capsys.readouterr().out


class TestStudy:
    def test_fitted_order(self):
        h = np.array([0.4, 0.2, 0.1, 0.05])
        assert fitted_order(h, 3.0 * h**2) == pytest.approx(2.0)
        assert fitted_order(h, 0.5 * h) == pytest.approx(1.0)
        assert math.isnan(fitted_order(h[:1], h[:1]))

    def test_reference_step_has_zero_error(self):
        sc = builtin("flying_spaghetti")
        res = convergence_study(sc, [0.1, 0.05], ref_h=0.05, t_eval=0.4, eps=1e-10)
        assert res.position_error[1] == 0.0 and res.velocity_error[1] == 0.0
        assert res.position_error[0] > 0.0
        buf = io.StringIO()
        write_study(buf, res, sc)
        assert "h,position_error,velocity_error" in buf.getvalue()

    def test_parallel_matches_serial(self):
        sc = builtin("flying_spaghetti")
        serial = convergence_study(sc, [0.1], ref_h=0.05, t_eval=0.4, eps=1e-10, workers=1)
        par = convergence_study(sc, [0.1], ref_h=0.05, t_eval=0.4, eps=1e-10, workers=2)
        np.testing.assert_array_equal(serial.position_error, par.position_error)

    def test_t_eval_off_grid(self, capsys):
        code = main(["study", "flying_spaghetti", "--h-list", "0.3", "--t-eval", "1.0"])
        assert code == EXIT_CONFIG

    def test_cli_study(self, tmp_path, capsys):
        out = tmp_path / "study.csv"
        code = main(["study", "flying_spaghetti", "--h-list", "0.2", "0.1", "--ref-h", "0.05",
                     "--t-eval", "0.4", "--eps", "1e-10", "--out", str(out)])
        assert code == EXIT_OK
        text = out.read_text()
        assert "# position_order:" in text
        assert len(_rows(text)[1]) == 2
