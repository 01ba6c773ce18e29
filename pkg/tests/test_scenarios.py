import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phrod.constitutive import RIGID, ConfigurationError
from phrod.integrator import SolverSettings, StepFailure
from phrod.scenarios import (
    Actuator,
    PreparedRun,
    TimeFunction,
    apply_overrides,
    builtin,
    builtin_names,
    dumps,
    eval_loads,
    heart_max_radius,
    loads,
    read_scenario,
    run_scenario,
    write_scenario,
)

times = st.floats(min_value=0.0, max_value=6.0)


class TestTimeFunctions:
    def test_hat(self):
        f = TimeFunction("hat", {"peak": 200.0, "t_peak": 2.5, "t_zero": 5.0})
        assert f(0.0) == 0.0
        assert f(1.25) == pytest.approx(100.0)
        assert f(2.5) == pytest.approx(200.0)
        assert f(3.75) == pytest.approx(100.0)
        assert f(5.0) == 0.0 and f(12.0) == 0.0

    def test_cosine_pulse(self):
        f = TimeFunction("cosine_pulse", {"period": 0.05})
        assert f(0.0) == 0.0
        assert f(0.025) == pytest.approx(1.0)
        assert f(0.0125) == pytest.approx(0.5)
        assert f(0.05) == 0.0 and f(0.2) == 0.0

    @given(st.floats(min_value=0.0, max_value=2 * math.pi))
    def test_circle_sweep_at_plateau_start(self, alpha):
        f = TimeFunction("circle_sweep", {"f_max": -50.0, "t1": 0.5, "t2": 3.5, "T": 4.0,
                                          "alpha": alpha})
        assert f(0.5) == pytest.approx(0.5 * -50.0 * (1 + math.cos(-alpha)), abs=1e-12)

    def test_circle_sweep_ramps(self):
        f = TimeFunction("circle_sweep", {"f_max": -50.0, "t1": 0.5, "t2": 3.5, "T": 4.0,
                                          "alpha": 0.0})
        assert f(0.0) == 0.0
        assert f(0.25) == pytest.approx(-25.0)
        # phase has swept half a turn at the middle of the plateau
        assert f(2.0) == pytest.approx(0.0, abs=1e-12)
        assert f(4.0) == pytest.approx(0.0, abs=1e-12)

    @given(times)
    def test_sweeps_stay_in_range(self, t):
        for alpha in (math.pi / 6, 5 * math.pi / 6, 9 * math.pi / 6):
            for f in (
                TimeFunction("circle_sweep", {"f_max": -50.0, "t1": 0.5, "t2": 3.5, "T": 4.0,
                                              "alpha": alpha}),
                TimeFunction("heart_sweep", {"f_max": -50.0, "T": 4.0, "alpha": alpha}),
            ):
                assert -50.0 - 1e-12 <= f(t) <= 1e-12

    def test_heart_normalization(self):
        # the curve reaches radius 2 at theta = pi
        assert heart_max_radius() == pytest.approx(2.0, abs=1e-12)
        f = TimeFunction("heart_sweep", {"f_max": -50.0, "T": 4.0, "alpha": -math.pi / 2})
        # at t = T/2 the input points along -y with full magnitude
        assert f(2.0) == pytest.approx(-50.0)

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            TimeFunction("square", {})
        with pytest.raises(ConfigurationError):
            TimeFunction("hat", {"peak": 1.0})
        with pytest.raises(ConfigurationError):
            TimeFunction("ramp", {"slope": 1.0, "offset": 2.0})
        with pytest.raises(ConfigurationError):
            TimeFunction("constant", {"value": float("nan")})

    def test_knots(self):
        f = TimeFunction("hat", {"peak": 1.0, "t_peak": 2.5, "t_zero": 5.0})
        assert f.knots() == [2.5, 5.0]
        assert TimeFunction("ramp", {"slope": 1.0}).knots() == []


class TestActuatorSign:
    def test_pneumatic_must_push(self):
        a = Actuator("pneumatic", (0.0, 0.01), TimeFunction("constant", {"value": 1.0}))
        with pytest.raises(ConfigurationError):
            a.magnitude(0.0)

    def test_tendon_must_pull(self):
        a = Actuator("tendon", (0.0, 0.01), TimeFunction("constant", {"value": -1.0}))
        with pytest.raises(ConfigurationError):
            a.magnitude(0.0)

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            Actuator("hydraulic", (0.0, 0.0), TimeFunction())


class TestBuiltins:
    def test_names(self):
        names = builtin_names()
        for n in ("flying_spaghetti", "cantilever_oscillation", "cantilever_oscillation_viscous",
                  "quasistatic_cantilever", "quasistatic_cantilever_constrained",
                  "soft_arm_circle", "soft_arm_heart"):
            assert n in names
        with pytest.raises(ConfigurationError):
            builtin("nope")

    def test_flying_spaghetti(self):
        sc = builtin("flying_spaghetti")
        m = sc.material
        assert (m.rhoA, m.Mrho11, m.kE, m.kB1, m.kT) == (1.0, 10.0, 1e4, 1e3, 1e3)
        assert sc.solver.h == 0.1 and sc.solver.t_end == 15.0
        assert sc.n_e == 10 and sc.clamped == ()
        np.testing.assert_allclose(np.array(sc.rod.start) + 10.0 * np.array(sc.rod.axis), [0, 0, 8])
        bnd, _, _ = eval_loads(sc, 2.5)
        end, f, mo = bnd[0]
        assert end == "end"
        np.testing.assert_allclose(f, [20.0, 0, 0])
        np.testing.assert_allclose(mo, [0, 200.0, 100.0])

    def test_cantilever(self):
        sc = builtin("cantilever_oscillation")
        m = sc.material
        assert m.kS1 is RIGID and m.kS2 is RIGID and m.kE is RIGID
        I = math.pi * 4e-3**4 / 64
        assert m.kB1 == pytest.approx(7.2e10 * I)
        assert m.kT == pytest.approx(7.2e10 / 2.7 * 2 * I)
        assert m.rhoA == pytest.approx(2850.0 * math.pi * 4e-6)
        assert sc.solver.h == 1e-3 and sc.n_e == 8 and sc.clamped == ("start",)

    def test_viscous_split(self):
        sc = builtin("cantilever_oscillation_viscous")
        assert sc.viscous
        b, = sc.maxwell
        assert b.fraction == 0.75 and b.tauE == 0.08 and b.tauG == 0.08

    def test_quasistatic(self):
        sc = builtin("quasistatic_cantilever")
        L = 2 * math.pi
        P = 20.0 / L**2
        assert sc.material.rhoA == 0.0
        bnd, _, _ = eval_loads(sc, 1.0)
        np.testing.assert_allclose(bnd[0][1], [0, -P, 0])
        np.testing.assert_allclose(bnd[0][2], [0, 0, 2.5 * P])
        assert builtin("quasistatic_cantilever_constrained").material.kE is RIGID

    def test_soft_arm(self):
        sc = builtin("soft_arm_circle")
        assert sc.rod.length == 0.1755
        assert len(sc.actuators) == 3
        for a, alpha in zip(sc.actuators, (math.pi / 6, 5 * math.pi / 6, 3 * math.pi / 2)):
            assert a.kind == "pneumatic"
            assert math.atan2(a.rho[1], a.rho[0]) % (2 * math.pi) == pytest.approx(alpha)
            # chambers sit inside the 15 mm section radius
            assert np.hypot(*a.rho) == pytest.approx(6.5e-3)
        _, _, tau = eval_loads(sc, 0.5)
        np.testing.assert_allclose(tau, [-25 * (1 + math.cos(a)) for a in
                                         (math.pi / 6, 5 * math.pi / 6, 3 * math.pi / 2)])


class TestSerialization:
    @pytest.mark.parametrize("name", builtin_names())
    def test_round_trip(self, name):
        sc = builtin(name)
        back = loads(dumps(sc))
        assert back == sc

    def test_file_round_trip(self, tmp_path):
        sc = builtin("cantilever_oscillation_viscous")
        path = tmp_path / "sc.toml"
        write_scenario(sc, path)
        assert read_scenario(path) == sc

    def test_rigid_written_as_string(self):
        assert 'kE = "rigid"' in dumps(builtin("cantilever_oscillation"))

    def test_rejects_bad_files(self):
        with pytest.raises(ConfigurationError):
            loads("this is not toml = = 1")
        text = dumps(builtin("flying_spaghetti"))
        with pytest.raises(ConfigurationError):
            loads(text + "\n[extra]\nx = 1\n")
        with pytest.raises(ConfigurationError):
            loads(text.replace("kE = 10000.0", 'kE = "soft"'))
        with pytest.raises(ConfigurationError):
            loads(text.replace("n_e = 10", "n_e = 2.5"))

    def test_load_and_clamp_clash(self):
        with pytest.raises(ConfigurationError):
            apply_overrides(builtin("cantilever_oscillation"), ['dirichlet.clamped=["end"]'])


class TestOverrides:
    def test_aliases(self):
        sc = apply_overrides(builtin("flying_spaghetti"), ["h=0.05", "n_e=4", "eps=1e-9"])
        assert sc.solver.h == 0.05 and sc.n_e == 4 and sc.solver.eps_newton == 1e-9

    def test_dotted_paths(self):
        sc = apply_overrides(builtin("flying_spaghetti"),
                             ["loads.end.moment=[0.0, 0.5, 0.25]", "material.kE=rigid"])
        assert sc.loads[0].moment == (0.0, 0.5, 0.25)
        assert sc.material.kE is RIGID

    def test_does_not_mutate(self):
        sc = builtin("flying_spaghetti")
        apply_overrides(sc, ["h=0.05"])
        assert sc.solver.h == 0.1

    @pytest.mark.parametrize("bad", ["h", "solver.nope.x=1", "rod.colour=1", "n_e=2.5", "h=fast"])
    def test_rejects(self, bad):
        with pytest.raises(ConfigurationError):
            apply_overrides(builtin("flying_spaghetti"), [bad])

    def test_grid_must_divide(self):
        with pytest.raises(ConfigurationError):
            apply_overrides(builtin("flying_spaghetti"), ["h=0.07"])


class TestRunning:
    def test_prepared_nodes(self):
        run = PreparedRun(builtin("flying_spaghetti"))
        assert run.tip_node == 0
        assert run.mid_node == 10
        np.testing.assert_allclose(run.system.nodal_phi(run.x0[:run.system.n_q])[0], [6, 0, 0])

    def test_short_run(self):
        sc = builtin("flying_spaghetti")
        seen = []
        recs, states = run_scenario(sc, callback=seen.append, t_stop=0.5, keep_states=True)
        assert len(recs) == 6 == len(seen) == len(states)
        assert recs[0].t == 0.0 and recs[-1].t == pytest.approx(0.5)
        assert all(abs(r.dE) < 1e-8 for r in recs)
        assert recs[-1].H > 0

    def test_failure_carries_history(self):
        sc = builtin("flying_spaghetti")
        settings = SolverSettings(h=0.1, t_end=15.0, eps_newton=1e-30, max_newton_iters=2)
        with pytest.raises(StepFailure) as exc:
            run_scenario(sc, settings=settings, t_stop=1.0)
        # a tolerance below roundoff cannot be met
        assert len(exc.value.records) >= 1
        assert exc.value.records[0].t == 0.0
