"""
Tests for the command line interface, run in-process through the cyclopts app.
"""

import pytest

from car_portfolio.app.main_cli import app
from car_portfolio.utils.file_utils import load_csv, load_json


def run_cli(*tokens) -> int:
    """Invoke the app and return its exit code, whether it is returned or raised."""
    try:
        result = app(list(tokens))
    except SystemExit as e:
        return int(e.code or 0)
    return int(result or 0)


def write_config(path, body: str):
    path.write_text(body)
    return path


@pytest.fixture
def small_sweep_config(tmp_path):
    return write_config(
        tmp_path / "small.toml",
        "[sweep]\nsigma11_points = 3\ndelta_grid_points = 6\n\n[output]\nlog_level = \"WARNING\"\n",
    )


class TestSolve:
    def test_constrained(self, tmp_path):
        code = run_cli("solve", "--dataset", "2", "--mode", "constrained", "--delta", "0.3", "--out", str(tmp_path))
        assert code == 0
        payload = load_json(tmp_path / "solution.json")
        assert payload["method"] == "constrained"
        assert payload["binding"] is True
        assert payload["delta"] == 0.3
        assert len(payload["pi"]) == 3
        assert payload["pi0"] == pytest.approx(1.0 - sum(payload["pi"]), abs=1e-12)

    def test_pricing_kernel_riskless(self, tmp_path):
        code = run_cli("solve", "--dataset", "1", "--mode", "pricing-kernel", "--delta", "0.9", "--out", str(tmp_path))
        assert code == 0
        payload = load_json(tmp_path / "solution.json")
        assert payload["pi"] == [0.0, 0.0, 0.0]
        assert payload["pi0"] == 1.0

    def test_unconstrained_horizon_flag(self, tmp_path):
        code = run_cli("solve", "--mode", "unconstrained", "--horizon", "50", "--out", str(tmp_path))
        assert code == 0
        payload = load_json(tmp_path / "solution.json")
        assert payload["horizon"] == 50.0
        assert payload["lam"] is None

    def test_invalid_delta(self):
        assert run_cli("solve", "--delta", "1.0") == 1

    def test_degenerate_market(self, tmp_path):
        """Second-type excess return spanned by the first type: exit code 3."""
        config = write_config(
            tmp_path / "degenerate.toml",
            "[market]\ngammas = [0.2, 0.3]\nrho = [[1.0, 0.5], [0.5, 1.0]]\nb = [0.04, 0.03]\n",
        )
        assert run_cli("solve", "--config", str(config), "--mode", "pricing-kernel") == 3
        assert run_cli("solve", "--config", str(config), "--mode", "constrained") == 3


class TestSweeps:
    def test_sweep_variance(self, tmp_path, small_sweep_config):
        out = tmp_path / "variance"
        assert run_cli("sweep-variance", "--config", str(small_sweep_config), "--out", str(out)) == 0
        frame = load_csv(out / "variance_dataset1.csv")
        assert len(frame) == 3 * 3
        assert (out / "variance_dataset1.svg").exists()
        assert (out / "config.json").exists()

    def test_sweep_riskless_single_dataset(self, tmp_path, small_sweep_config):
        out = tmp_path / "riskless"
        code = run_cli(
            "sweep-riskless", "--config", str(small_sweep_config), "--dataset", "2", "--delta", "0.3,0.6", "--out", str(out)
        )
        assert code == 0
        assert not (out / "riskless_dataset1.csv").exists()
        assert set(load_csv(out / "riskless_dataset2.csv")["delta"]) == {0.3, 0.6}

    def test_sweep_reduction_and_render(self, tmp_path, small_sweep_config):
        out = tmp_path / "reduction"
        assert run_cli("sweep-reduction", "--config", str(small_sweep_config), "--out", str(out)) == 0
        svg = out / "reduction_dataset2.svg"
        original = svg.read_bytes()
        svg.unlink()

        assert run_cli("render", str(out)) == 0
        assert svg.read_bytes() == original
        assert (out / "reduction_dataset2_crossings.csv").exists()

    def test_render_missing_path(self, tmp_path):
        assert run_cli("render", str(tmp_path / "nothing")) == 1


class TestVerify:
    def test_corrupted_correlation(self, tmp_path):
        """A non-positive-definite rho is reported against its dataset and fails the run."""
        config = write_config(
            tmp_path / "corrupted.toml",
            "[market]\nname = \"corrupted\"\ngammas = [0.2, 0.25, 0.3]\n"
            "rho = [[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]]\nb = [0.07, 0.05, 0.03]\n",
        )
        assert run_cli("verify", "--config", str(config), "--out", str(tmp_path)) == 2

        report = load_json(tmp_path / "verification_report.json")
        assert report["passed"] is False
        market_check = next(c for c in report["checks"] if c["name"] == "market")
        assert market_check["dataset"] == "corrupted"
        assert market_check["error"].startswith("NotPositiveDefinite")

    @pytest.mark.slow
    def test_full_suite_passes(self, tmp_path):
        code = run_cli("verify", "--dataset", "2", "--paths", "200000", "--seed", "11", "--out", str(tmp_path))
        assert code == 0
        assert load_json(tmp_path / "verification_report.json")["passed"] is True

    def test_degenerate_market_exits_with_three(self, tmp_path):
        """Second-type excess return spanned by the first type: the constrained checks are degenerate."""
        config = write_config(
            tmp_path / "degenerate.toml",
            "[market]\nname = \"spanned\"\ngammas = [0.2, 0.3]\nrho = [[1.0, 0.5], [0.5, 1.0]]\nb = [0.04, 0.03]\n"
            "\n[sweep]\ndeltas = [0.3]\n",
        )
        assert run_cli("verify", "--config", str(config), "--paths", "20000", "--out", str(tmp_path)) == 3

        report = load_json(tmp_path / "verification_report.json")
        degenerate = [c for c in report["checks"] if c["degenerate"]]
        assert degenerate
        assert all(not c["passed"] for c in degenerate)
        assert any(c["error"].startswith("DegenerateDirection") for c in degenerate)

    @pytest.mark.slow
    def test_verdicts_do_not_depend_on_seed(self, tmp_path):
        verdicts = []
        for seed in ("11", "12"):
            out = tmp_path / f"seed{seed}"
            assert run_cli("verify", "--dataset", "2", "--paths", "200000", "--seed", seed, "--out", str(out)) == 0
            verdicts.append(load_json(out / "verification_report.json")["verdicts"])
        assert verdicts[0] == verdicts[1]
