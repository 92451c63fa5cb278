"""Smoke test for the panelcast Python extension.

Uses an installed ``panelcast`` module when there is one (``maturin develop``
in crates/py); otherwise loads the library that
``cargo build -p panelcast-py --features extension-module`` left in target/.
"""

import importlib.util
import os
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import panelcast

        return panelcast
    except ImportError:
        pass
    explicit = os.environ.get("PANELCAST_LIB")
    candidates = [pathlib.Path(explicit)] if explicit else []
    for profile in ("release", "debug"):
        for name in ("libpanelcast_py.so", "libpanelcast_py.dylib", "panelcast_py.dll"):
            candidates.append(ROOT / "target" / profile / name)
    lib = next((c for c in candidates if c.is_file()), None)
    if lib is None:
        sys.exit("panelcast extension not found; build it with "
                 "`cargo build -p panelcast-py --features extension-module`")
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    staged = pathlib.Path(tempfile.mkdtemp()) / ("panelcast" + suffix)
    shutil.copy(lib, staged)
    spec = importlib.util.spec_from_file_location("panelcast", staged)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    pc = load()
    print("panelcast", pc.__version__)

    m = pc.point_metrics([[100.0, 200.0]], [[110.0, 180.0]])
    assert abs(m["MAE"] - 15.0) < 1e-12 and abs(m["MAPE"] - 10.0) < 1e-12, m
    assert abs(pc.quantile_loss(3.0, 1.0, 0.5) - 1.0) < 1e-15
    assert pc.interval_score([[100.0]], [[90.0]], [[110.0]]) == 20.0

    week = [5.0, 7.0, 9.0, 8.0, 6.0, 3.0, 2.0]
    history = week * 10
    assert pc.naive_forecast(history, 14) == week * 2
    point, lower, upper = pc.ets_forecast(history, 7)
    assert len(point) == 7 and all(lo <= p <= hi for lo, p, hi in zip(lower, point, upper))

    try:
        pc.naive_forecast([1.0], 3, k=7)
    except ValueError as e:
        print("short history rejected:", e)
    else:
        raise AssertionError("expected ValueError")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        rows = pc.write_synthetic_panel(str(tmp / "panel.csv"), str(tmp / "panel.schema.toml"),
                                        'group_ids = ["a", "b"]\nbase_levels = [300.0, 900.0]\n')
        assert rows == 2 * 1096, rows
        cfg = pc.RunConfig.from_toml(f"""
seed = 1
output_dir = "{tmp / 'report'}"

[data]
csv = "{tmp / 'panel.csv'}"
schema = "{tmp / 'panel.schema.toml'}"

[split]
val_start = "2021-07-24"
test_start = "2022-01-24"

[[models]]
kind = "naive"

[[models]]
kind = "ets"
max_history = 365
""")
        cfg.validate()
        report = pc.run_backtest(cfg)
        assert len(report.origins) == 24, report.origins
        metrics = report.metrics()
        assert set(metrics) == {"naive7", "ets"}, metrics
        print(report.summary(), end="")
        report.emit(str(cfg.output_dir))
        again = pc.recompute_metrics(str(cfg.output_dir / "forecasts.csv"), str(cfg.output_dir / "actuals.csv"))
        assert again == (cfg.output_dir / "metrics.csv").read_text()
        assert pc.read_report(str(cfg.output_dir)).origins == report.origins

    print("smoke test passed")


if __name__ == "__main__":
    main()
