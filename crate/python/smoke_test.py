"""Builds the extension module with cargo and exercises it.

    python3 python/smoke_test.py
"""

import csv
import io
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build(target: pathlib.Path) -> None:
    subprocess.run(["cargo", "build", "--release", "-p", "gridtrade-python"], cwd=ROOT, check=True)
    shutil.copy(ROOT / "target" / "release" / "libgridtrade.so", target / "gridtrade.so")


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        build(pathlib.Path(tmp))
        sys.path.insert(0, tmp)
        import gridtrade as gt

        params = gt.consumers([188.8, 146.0, 187.0, 74.6, 218.7])
        cfg = gt.GridConfig(len(params))
        assert cfg.price_budget == 185.0 and len(cfg) == 5

        prices = gt.uniform_prices(cfg)
        assert abs(sum(prices) - 185.0) < 1e-9
        solved, iterations = gt.sshpm_solve(prices, params, cfg.deficiency)
        oracle = gt.ve_oracle(prices, params, cfg.deficiency)
        assert iterations > 0
        assert max(abs(a - b) for a, b in zip(solved, oracle)) <= 1e-5 * cfg.deficiency

        closed = gt.closed_form_prices(solved, cfg)
        numeric = gt.numeric_prices(solved, cfg)
        assert max(abs(a - b) for a, b in zip(closed, numeric)) <= 1e-5 * cfg.price_budget

        result = gt.run_emes(params, cfg)
        assert result.is_fixed_point(), result.fixed_point_residual
        assert result.message_count > 0 and len(result.rounds()) == result.outer_iterations
        passed, gain, drop = gt.verify_emes(result.energies, result.prices, params, cfg)
        assert passed, (gain, drop)
        direct = gt.run_emes(params, cfg, mediated=False)
        assert direct.prices == result.prices

        try:
            gt.EcParams(0, -1.0)
        except ValueError:
            pass
        else:
            raise AssertionError("negative capacity accepted")

        table = gt.sweep(gt.reference_scenario(seed=3, replicates=4, n_values=[5, 10]))
        rows = list(csv.DictReader(io.StringIO(table)))
        assert [r["n"] for r in rows] == ["5", "10"]
        assert all(r["replicates"] == "4" for r in rows)
        try:
            gt.sweep("bogus = 1\n")
        except ValueError:
            pass
        else:
            raise AssertionError("unknown key accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
