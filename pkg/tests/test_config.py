import math
from pathlib import Path

import numpy as np
import pytest

from dunkl_isp.config import (
    ConfigError,
    Profile,
    TimeProfile,
    load_config,
    parse_config_text,
    parse_profile,
    parse_time_profile,
)
from dunkl_isp.dunkl import PhysicalFunction, PhysicalGrid, SpectralFunction, SpectralGrid
from dunkl_isp.serialize import (
    fmt,
    read_field_csv,
    read_function_csv,
    write_field_csv,
    write_function_csv,
    write_grid_csv,
    write_json,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


class TestDefaults:
    def test_defaults(self):
        cfg = parse_config_text("")
        p = cfg.params
        assert (p.alpha, p.a, p.m, p.gamma, p.T) == (-0.5, 1.0, 1.0, 1.0, 1.0)
        assert cfg.physical_extent == 12 and cfg.physical_nodes == 96
        assert cfg.spectral_extent == 12 and cfg.spectral_nodes == 96
        assert cfg.time_steps == 256
        assert cfg.transform_tol is None and cfg.residual_tol == 1e-2
        assert cfg.epsilons == (1.0, 0.5, 0.1)
        assert cfg.profiles["g"].kind == "zero"
        assert cfg.profiles["stability"] == Profile("gaussian", (1.0, 0.0, 1.0))

    def test_grids(self):
        grids = parse_config_text("grid.physical.nodes = 32\ngrid.spectral.extent = 6\ngrid.time.steps = 16").grids()
        assert grids.physical.size == 64
        assert grids.spectral.extent == pytest.approx(6.0, rel=1e-2)
        assert grids.time.size == 17

    def test_describe(self):
        desc = parse_config_text("params.gamma = 0.5").describe()
        assert desc["params"]["gamma"] == 0.5
        assert desc["grid"]["time"]["steps"] == 256

    @pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.cfg")))
    def test_shipped_configs_parse(self, name):
        load_config(CONFIG_DIR / name)


class TestParsing:
    def test_comments_and_quotes(self):
        cfg = parse_config_text(
            "# a comment\n\nparams.gamma = 0.5   # trailing\noutput.dir = \"with # hash\"\n")
        assert cfg.params.gamma == 0.5
        assert cfg.output_dir == Path("with # hash")

    def test_overrides(self):
        cfg = parse_config_text("output.dir = a", overrides={"output.dir": "b"})
        assert cfg.output_dir == Path("b")

    @pytest.mark.parametrize("text", [
        "params.gama = 0.5",
        "params.gamma = 0.5\nparams.gamma = 0.6",
        "params.gamma 0.5",
        "params.gamma = half",
        "params.gamma = 1.5",
        "params.alpha = -0.7",
        "params.a = 0",
        "params.m = -1",
        "params.T = 0",
        "params.T = inf",
        "grid.physical.nodes = 4",
        "grid.physical.nodes = 10.5",
        "grid.spectral.extent = 0",
        "grid.time.steps = 7",
        "grid.physical.nodes = 30\ngrid.physical.panels = 4",
        "data.g = gaussian(1, 0)",
        "data.g = gaussian(0, 0, 1)",
        "data.f = lorentzian(1, 0, 1)",
        "data.f = missing.csv",
        "data.f_time = grow(1)",
        "stability.epsilons = ",
        "tolerance.residual = 0",
        "output.dir = \"unterminated",
    ])
    def test_rejected(self, text):
        with pytest.raises(ConfigError):
            parse_config_text(text)

    def test_one_bad_line_rejects_everything(self):
        with pytest.raises(ConfigError):
            parse_config_text("params.gamma = 0.5\ndata.g = gaussian(1, 0, 1)\ndata.f = nonsense")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.cfg")

    def test_tolerance(self):
        assert parse_config_text("tolerance.transform = 1e-8").transform_tol == 1e-8
        assert parse_config_text("tolerance.transform = none").transform_tol is None


class TestProfiles:
    def test_gaussian(self):
        prof = parse_profile("gaussian(2, 1, 3)")
        x = np.array([-1.0, 1.0, 3.0])
        assert np.allclose(prof.sample(x), 3 * np.exp(-((x - 1) / 2) ** 2))

    def test_gausspoly(self):
        prof = parse_profile("gausspoly(1, 0, 2, 3, 0, -4)")
        x = np.linspace(-2, 2, 9)
        assert np.allclose(prof.sample(x), 2 * np.exp(-x**2) * (3 - 4 * x**2))

    def test_zero(self):
        assert not np.any(parse_profile("zero").sample(np.linspace(0, 1, 5)))

    def test_csv_relative_to_base(self, tmp_path):
        grid = PhysicalGrid.uniform(3.0, 61)
        f = PhysicalFunction.from_callable(grid, lambda x: np.exp(-x**2))
        write_function_csv(tmp_path / "f.csv", f, 0.0)
        prof = parse_profile("f.csv", tmp_path)
        assert prof.csv_kind() == "physical"
        x = np.array([-5.0, -0.33, 0.0, 1.21, 5.0])
        got = prof.sample(x)
        assert got[0] == 0 and got[-1] == 0
        assert np.allclose(got[1:-1], np.exp(-x[1:-1] ** 2), atol=1e-6)
        assert parse_profile(f"csv:{tmp_path / 'f.csv'}").path == tmp_path / "f.csv"

    def test_bad_csv(self, tmp_path):
        (tmp_path / "bad.csv").write_text("1,2,3\n")
        with pytest.raises(ConfigError):
            parse_profile("bad.csv", tmp_path)

    def test_time_profiles(self):
        assert parse_time_profile("const") == TimeProfile(0.0)
        prof = parse_time_profile("decay(2)")
        t = np.array([0.0, 0.5])
        assert np.allclose(prof.factor(t), np.exp(-2 * t))
        assert np.allclose(prof.derivative(t), -2 * np.exp(-2 * t))
        with pytest.raises(ConfigError):
            parse_time_profile("decay(1, 2)")


class TestSerialization:
    def test_fmt_round_trips(self):
        for v in (math.pi, 1e-300, -0.0, 1.7320508075688772, 2.0):
            assert float(fmt(v)) == v

    def test_function_round_trip(self, tmp_path):
        sg = SpectralGrid.gauss_legendre(0.5, 6.0, 16)
        fh = SpectralFunction(sg, np.exp(-sg.nodes**2) * (1 + 0.5j))
        write_function_csv(tmp_path / "s.csv", fh, 0.5)
        kind, alpha, coords, values = read_function_csv(tmp_path / "s.csv")
        assert (kind, alpha) == ("spectral", 0.5)
        assert np.array_equal(coords, sg.nodes)
        assert np.array_equal(values, fh.values)

    def test_header_layout(self, tmp_path):
        grid = PhysicalGrid.uniform(1.0, 3)
        write_function_csv(tmp_path / "f.csv", PhysicalFunction(grid, [1, 2, 3]), -0.5)
        assert (tmp_path / "f.csv").read_text().splitlines() == [
            "# physical,-0.5,3", "-1.0,1.0,0.0", "0.0,2.0,0.0", "1.0,3.0,0.0"]
        write_grid_csv(tmp_path / "g.csv", grid, -0.5)
        assert (tmp_path / "g.csv").read_text().splitlines()[:2] == ["# physical-grid,-0.5,3", "-1.0,0.5"]

    def test_field_round_trip(self, tmp_path):
        t = np.linspace(0, 1, 4)
        x = np.linspace(-1, 1, 5)
        values = np.outer(t, x) + 1j * np.outer(t**2, x)
        write_field_csv(tmp_path / "u.csv", t, x, values, 2.0)
        alpha, t2, x2, v2 = read_field_csv(tmp_path / "u.csv")
        assert alpha == 2.0
        assert np.array_equal(t2, t) and np.array_equal(x2, x) and np.array_equal(v2, values)
        assert (tmp_path / "u.csv").read_text().splitlines()[0] == "# field,2.0,4,5"

    def test_rejects_malformed(self, tmp_path):
        (tmp_path / "a.csv").write_text("# physical,0,3\n1,2,3\n")
        with pytest.raises(ValueError):
            read_function_csv(tmp_path / "a.csv")
        (tmp_path / "b.csv").write_text("# volume,0,1\n1,2,3\n")
        with pytest.raises(ValueError):
            read_function_csv(tmp_path / "b.csv")

    def test_json_sorted(self, tmp_path):
        write_json(tmp_path / "r.json", {"b": 1, "a": [1.5, 2]})
        text = (tmp_path / "r.json").read_text()
        assert text.index('"a"') < text.index('"b"')
