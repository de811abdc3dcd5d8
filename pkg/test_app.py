import numpy as np
import pytest

from app import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, angle_grid, main
from scenario import ConfigError
from utils.csv_schema import read_rows

SMALL_CONFIG = """# test instance
k_users=2
n_antennas=4
aperture_lambda=4
sinr_target_db=0
seed=5
max_outer=4
max_inner=3
pgd_max_iters=20
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "small.env"
    path.write_text(SMALL_CONFIG, encoding="utf-8")
    return str(path)


def main_lobe_width(theta_deg, gains_db, target_deg):
    """Width of the contiguous region around the target within 3 dB of the gain there."""
    center = int(np.argmin(np.abs(theta_deg - target_deg)))
    floor = gains_db[center] - 3.0
    lo = hi = center
    while lo > 0 and gains_db[lo - 1] >= floor:
        lo -= 1
    while hi < len(gains_db) - 1 and gains_db[hi + 1] >= floor:
        hi += 1
    return theta_deg[hi] - theta_deg[lo]


class TestSolve:
    def test_fixed_array_is_byte_identical_across_runs(self, tmp_path, config_file):
        for name in ("first", "second"):
            assert main(["solve", "--config", config_file, "--scheme", "fa", "--out", str(tmp_path / name)]) \
                in (EXIT_OK, EXIT_INFEASIBLE)
        first = (tmp_path / "first" / "solution.csv").read_bytes()
        assert first == (tmp_path / "second" / "solution.csv").read_bytes()
        assert first.startswith(b"# schema=1\nfield,index,real,imag\n")

    def test_bound_writes_only_the_gain(self, tmp_path, config_file):
        assert main(["solve", "--config", config_file, "--scheme", "bound", "--out", str(tmp_path)]) == EXIT_OK
        rows = read_rows(str(tmp_path / "solution.csv"))
        assert len(rows) == 1
        assert rows[0]["field"] == "gain_db"
        assert float(rows[0]["real"]) == pytest.approx(10 * np.log10(4))

    def test_solution_layout(self, tmp_path, config_file):
        main(["solve", "--config", config_file, "--scheme", "sula", "--out", str(tmp_path)])
        fields = [r["field"] for r in read_rows(str(tmp_path / "solution.csv"))]
        assert fields == ["position"] * 4 + ["w"] * 8 + ["sinr_db"] * 2 + ["gain_db"]

    def test_reports_radiated_power(self, tmp_path, capsys):
        path = tmp_path / "easy.env"
        path.write_text(SMALL_CONFIG.replace("sinr_target_db=0", "sinr_target_db=-10"), encoding="utf-8")
        assert main(["solve", "--config", str(path), "--scheme", "fa", "--out", str(tmp_path)]) == EXIT_OK
        # the gain grows with power, so the whole 30 dBm budget is spent
        assert "power=30.00 dBm" in capsys.readouterr().out

    def test_pdd_trace(self, tmp_path, config_file):
        code = main(["solve", "--config", config_file, "--out", str(tmp_path), "--trace"])
        assert code in (EXIT_OK, EXIT_INFEASIBLE)
        trace = read_rows(str(tmp_path / "trace.csv"))
        assert trace and list(trace[0]) == ["outer", "inner", "F", "violation", "rho"]

    def test_infeasible_exit_code(self, tmp_path, config_file):
        code = main(["solve", "--config", config_file, "--scheme", "fa", "--out", str(tmp_path)])
        assert code in (EXIT_OK, EXIT_INFEASIBLE)
        path = tmp_path / "hard.env"
        path.write_text(SMALL_CONFIG.replace("sinr_target_db=0", "sinr_target_db=40"), encoding="utf-8")
        assert main(["solve", "--config", str(path), "--scheme", "fa", "--out", str(tmp_path)]) == EXIT_INFEASIBLE


class TestConfigErrors:
    def test_missing_config_file(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "nope.env"), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_invalid_value(self, tmp_path):
        path = tmp_path / "bad.env"
        path.write_text("k_users=6\nn_antennas=4\n", encoding="utf-8")
        assert main(["solve", "--config", str(path), "--scheme", "fa", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_unknown_scheme(self, tmp_path, config_file):
        assert main(["solve", "--config", config_file, "--scheme", "sca", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_bound_cannot_be_swept(self, tmp_path, config_file):
        assert main(["sweep", "--config", config_file, "--scheme", "bound", "--out", str(tmp_path)]) == EXIT_CONFIG


class TestSweep:
    def test_grid_contains_endpoints(self):
        grid = angle_grid(-90.0, 90.0, 0.25)
        assert grid[0] == -90.0 and grid[-1] == 90.0
        assert len(grid) == 721
        assert np.all(np.diff(grid) > 0)

    def test_bad_grid(self):
        with pytest.raises(ConfigError):
            angle_grid(10.0, -10.0, 1.0)
        with pytest.raises(ConfigError):
            angle_grid(-10.0, 10.0, 0.0)

    def test_writes_csv_and_svg(self, tmp_path, config_file):
        code = main(["sweep", "--config", config_file, "--scheme", "fa", "--out", str(tmp_path),
                     "--theta-min", "-10", "--theta-max", "10", "--theta-step", "5"])
        assert code in (EXIT_OK, EXIT_INFEASIBLE)
        rows = read_rows(str(tmp_path / "sweep_fa.csv"))
        theta = [float(r["theta_deg"]) for r in rows]
        assert theta == [-10.0, -5.0, 0.0, 5.0, 10.0]
        assert (tmp_path / "sweep_fa.svg").read_text(encoding="utf-8").lstrip().startswith("<?xml")
        if code == EXIT_OK:
            assert max(float(r["gain_db"]) for r in rows) <= 10 * np.log10(4) + 1e-9

    def test_peak_on_target_and_pdd_lobe_not_wider(self, tmp_path):
        path = tmp_path / "easy.env"
        path.write_text(SMALL_CONFIG.replace("sinr_target_db=0", "sinr_target_db=-10"), encoding="utf-8")
        assert main(["sweep", "--config", str(path), "--scheme", "pdd,fa", "--out", str(tmp_path)]) == EXIT_OK
        widths = {}
        for scheme in ("pdd", "fa"):
            rows = read_rows(str(tmp_path / f"sweep_{scheme}.csv"))
            theta = np.array([float(r["theta_deg"]) for r in rows])
            gains = np.array([float(r["gain_db"]) for r in rows])
            assert len(theta) == 721
            # grating lobes of a sparse array may tie with the main lobe
            near = np.abs(theta) <= 1.0
            assert np.max(gains[near]) >= np.max(gains) - 1e-3
            widths[scheme] = main_lobe_width(theta, gains, 0.0)
        assert widths["pdd"] <= widths["fa"] + 0.25


class TestMonteCarloAndStatus:
    def test_status_without_campaign(self, tmp_path):
        assert main(["status", "--out", str(tmp_path)]) == 1

    def test_campaign_then_status(self, tmp_path, config_file, capsys):
        code = main(["montecarlo", "--config", config_file, "--schemes", "fa,bound", "--realizations", "2",
                     "--workers", "1", "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert "CAMPAIGN SUMMARY" in capsys.readouterr().out
        assert len(read_rows(str(tmp_path / "runs.csv"))) == 4
        assert main(["status", "--out", str(tmp_path)]) == EXIT_OK
        assert "completed" in capsys.readouterr().out

    def test_unknown_campaign_scheme(self, tmp_path, config_file):
        assert main(["montecarlo", "--config", config_file, "--schemes", "fa,sca", "--out", str(tmp_path)]) \
            == EXIT_CONFIG
