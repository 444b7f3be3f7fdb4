import math

import numpy as np
import pytest

from mfctrl import cli
from mfctrl.config import ConfigError, parse_config


class TestDefaults:
    def test_merton_grid_paper_defaults(self):
        cfg = parse_config("experiment = merton_grid")
        assert cfg["d"] == 10
        assert cfg["lam"] == 1.0
        assert cfg["m"] == 0.18
        assert cfg["s"] == 0.44
        assert cfg["beta"] == 100.0
        assert cfg["sigma"] == 100.0
        assert cfg["epochs"] == 100_000
        assert cfg["lr_max"] == 0.1
        assert cfg["lr_min"] == 1e-5
        assert cfg["ns"] == [8, 64, 512]
        assert cfg["rs"] == [50]
        assert cfg["trials"] == 30

    def test_zermelo_paper_defaults(self):
        cfg = parse_config("experiment = zermelo_train")
        assert cfg["steps"] == 50
        assert cfg["v_s"] == 0.8
        assert cfg["M"] == 10.0
        assert cfg["A"] == 2.0
        assert cfg["tau"] == 0.04
        assert cfg["beta"] == 100.0
        assert cfg["sigma"] == pytest.approx(math.sqrt(0.1) * 100.0)
        assert cfg["epochs"] == 20_000
        assert cfg["lr_max"] == 3e-3    # unit rate diverges; see config.py
        assert cfg["width"] == 100
        assert cfg["n"] == 100

    def test_empty_document_selects_merton(self):
        assert parse_config("").experiment == "merton_grid"

    def test_desk_profile_shrinks_scale(self):
        cfg = parse_config("experiment = merton_grid", profile="desk")
        assert cfg["epochs"] == 5000
        assert cfg["trials"] == 8
        # untouched keys keep paper values
        assert cfg["ns"] == [8, 64, 512]


class TestParsing:
    def test_overrides_comments_and_lists(self):
        text = """
        experiment = merton_grid
        # shrink the grid
        ns = 8, 64
        trials = 2   # two repeats
        sigma = 1.5
        regularised = false
        """
        cfg = parse_config(text)
        assert cfg["ns"] == [8, 64]
        assert cfg["trials"] == 2
        assert cfg["sigma"] == 1.5
        assert cfg["regularised"] is False

    def test_unknown_key_rejected_by_name(self):
        with pytest.raises(ConfigError, match="wdith"):
            parse_config("experiment = zermelo_train\nwdith = 10")

    def test_range_error_names_key(self):
        with pytest.raises(ConfigError, match="'width'"):
            parse_config("experiment = zermelo_train\nwidth = -3")

    def test_unparseable_value(self):
        with pytest.raises(ConfigError, match="'epochs'"):
            parse_config("epochs = soon")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("trials = 2\ntrials = 3")

    def test_unknown_experiment_and_profile(self):
        with pytest.raises(ConfigError, match="experiment"):
            parse_config("experiment = heat_equation")
        with pytest.raises(ConfigError, match="profile"):
            parse_config("", profile="gpu")

    def test_round_trip(self):
        cfg = parse_config("experiment = zermelo_train\nwidth = 7\ntau = 0.02")
        again = parse_config(cfg.to_text())
        assert again == cfg


class TestCLI:
    def test_gibbs_sanity_run(self, tmp_path):
        conf = tmp_path / "cfg.txt"
        conf.write_text("experiment = gibbs_sanity\nepochs = 2000\nwidth = 64\n")
        out = tmp_path / "out"
        rc = cli.main(["--config", str(conf), "--out", str(out)])
        assert rc == 0
        rows = np.loadtxt(out / "gibbs_sanity.csv", delimiter=",", skiprows=2)
        assert rows.shape == (3, 4)                 # a, w, b coordinates
        assert np.all(rows[:, 3] == 0.5)            # analytic sigma^2/2
        assert np.allclose(rows[:, 2], 0.5, rtol=0.5)
        assert (out / "effective_config.txt").exists()

    def test_merton_grid_single_cell_and_rerun_identical(self, tmp_path):
        conf = tmp_path / "cfg.txt"
        conf.write_text(
            "experiment = merton_grid\nns = 8\ntrials = 1\nepochs = 10\n"
            "n_test = 16\n")
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert cli.main(["--config", str(conf), "--out", str(out1)]) == 0
        assert cli.main(["--config", str(conf), "--out", str(out2)]) == 0
        gen = (out1 / "gen_results.csv").read_text().splitlines()
        assert gen[1] == "trial,n,r,regularised,in_sample,out_sample,gen,seed,wall_time_s"
        assert len(gen) == 3                        # header comment + schema + 1 row
        # effective_config.txt differs only in the out path itself
        for name in ("gen_results.csv", "slope_summary.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_seed_flag_changes_results(self, tmp_path):
        conf = tmp_path / "cfg.txt"
        conf.write_text(
            "experiment = merton_grid\nns = 8\ntrials = 1\nepochs = 10\n"
            "n_test = 16\n")
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cli.main(["--config", str(conf), "--out", str(out1)])
        cli.main(["--config", str(conf), "--out", str(out2), "--seed", "99"])
        assert ((out1 / "gen_results.csv").read_bytes()
                != (out2 / "gen_results.csv").read_bytes())

    def test_zermelo_run_outputs(self, tmp_path):
        conf = tmp_path / "cfg.txt"
        conf.write_text(
            "experiment = zermelo_train\nsteps = 3\nepochs = 2\nwidth = 3\n"
            "n = 2\nn_test = 2\n")
        out = tmp_path / "out"
        assert cli.main(["--config", str(conf), "--out", str(out)]) == 0
        for name in ("telemetry.csv", "trajectories.csv", "trajectories_test.csv",
                     "losses.csv", "effective_config.txt"):
            assert (out / name).exists(), name
        assert sorted(p.name for p in (out / "checkpoints").iterdir()) == [
            "stage_000.json", "stage_000.txt", "stage_001.json", "stage_001.txt",
            "stage_002.json", "stage_002.txt"]
        losses = (out / "losses.csv").read_text().splitlines()
        assert losses[1] == "path_id,split,total_loss,terminal_sq_dist"
        assert len(losses) == 2 + 2 + 2

    def test_bad_config_exits_2(self, tmp_path, capsys):
        conf = tmp_path / "cfg.txt"
        conf.write_text("experiment = merton_grid\nwormhole = 1\n")
        assert cli.main(["--config", str(conf)]) == 2
        assert "wormhole" in capsys.readouterr().err
