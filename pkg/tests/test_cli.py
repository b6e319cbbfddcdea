import numpy as np
import pytest

from igcl.cli import RunManifest, dispatch, parse_config, replay
from igcl.graph import load_graph
from igcl.train import read_embeddings


def write_cfg(path, text):
    path.write_text(text)
    return str(path)


class TestParseConfig:
    def test_single_override_keeps_defaults(self, tmp_path):
        cfg = parse_config(write_cfg(tmp_path / "c", "D=1024\n"))
        assert cfg.D == 1024
        assert cfg.L == 1 and cfg.D_q == 2048 and cfg.K == 1
        assert cfg.tau == 0.99 and cfg.lr == 0.005 and cfg.weight_decay == 0.0001

    def test_wide_two_layer_setting_parses_exactly(self, tmp_path):
        text = "L=2\nD=1024\nD_q=2048\nK=6\nlambda=0.005\nepochs=1000\n"
        cfg = parse_config(write_cfg(tmp_path / "c", text))
        assert (cfg.L, cfg.D, cfg.D_q, cfg.K) == (2, 1024, 2048, 6)
        assert cfg.lam == 0.005 and cfg.epochs == 1000

    def test_invariant_violation_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="K >= 1"):
            parse_config(write_cfg(tmp_path / "c", "K=0\n"))

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown config key"):
            parse_config(write_cfg(tmp_path / "c", "momentum=0.9\n"))

    def test_unparsable_value_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="cannot parse"):
            parse_config(write_cfg(tmp_path / "c", "L=two\n"))

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        cfg = parse_config(write_cfg(tmp_path / "c", "# setup\n\nK=3\n"))
        assert cfg.K == 3


class TestDispatch:
    def test_unknown_subcommand_fails_with_usage(self, capsys):
        code = dispatch(["frobnicate"])
        assert code != 0
        assert "usage" in capsys.readouterr().err

    def test_sbm_round_trips_through_loader(self, tmp_path, capsys):
        out = tmp_path / "data"
        code = dispatch(["sbm", "--blocks", "4", "--per-block", "100",
                        "--p-in", "0.05", "--p-out", "0.005", "--seed", "7",
                        "--out", str(out)])
        assert code == 0
        g = load_graph(out)
        assert g.num_nodes == 400
        assert g.num_features == 32
        assert int(g.labels.max()) == 3
        assert (out / "manifest").exists()

    def test_train_then_probe_end_to_end(self, tmp_path, capsys):
        data = tmp_path / "data"
        run = tmp_path / "run"
        assert dispatch(["sbm", "--blocks", "2", "--per-block", "20", "--p-in", "0.4",
                         "--p-out", "0.02", "--seed", "3", "--out", str(data)]) == 0
        cfg = write_cfg(tmp_path / "cfg", "L=1\nD=8\nD_q=16\nK=2\nlambda=0.001\nepochs=30\n")
        assert dispatch(["train", "--config", cfg, "--data", str(data),
                         "--out", str(run)]) == 0
        for name in ("manifest", "history.csv", "checkpoint", "emb"):
            assert (run / name).exists()
        capsys.readouterr()
        assert dispatch(["probe", "--embeddings", str(run / "emb"), "--data", str(data),
                         "--ratios", "0.1,0.1,0.8", "--seed", "1"]) == 0
        out = capsys.readouterr().out
        assert "accuracy=" in out and "split_seed=1" in out

    def test_embed_command_matches_train_output(self, tmp_path):
        data = tmp_path / "data"
        run = tmp_path / "run"
        emb_dir = tmp_path / "emb2"
        dispatch(["sbm", "--blocks", "2", "--per-block", "15", "--p-in", "0.4",
                  "--p-out", "0.02", "--seed", "5", "--out", str(data)])
        cfg = write_cfg(tmp_path / "cfg", "L=1\nD=6\nD_q=12\nK=1\nepochs=10\n")
        dispatch(["train", "--config", cfg, "--data", str(data), "--out", str(run)])
        assert dispatch(["embed", "--checkpoint", str(run / "checkpoint"),
                         "--data", str(data), "--out", str(emb_dir)]) == 0
        assert np.array_equal(read_embeddings(run / "emb"), read_embeddings(emb_dir / "emb"))

    def test_sweep_writes_csv(self, tmp_path, capsys):
        data = tmp_path / "data"
        run = tmp_path / "run"
        sweep_out = tmp_path / "sweep"
        dispatch(["sbm", "--blocks", "2", "--per-block", "25", "--p-in", "0.4",
                  "--p-out", "0.02", "--seed", "2", "--out", str(data)])
        cfg = write_cfg(tmp_path / "cfg", "L=1\nD=6\nD_q=12\nK=1\nepochs=10\n")
        dispatch(["train", "--config", cfg, "--data", str(data), "--out", str(run)])
        assert dispatch(["sweep", "--embeddings", str(run / "emb"), "--data", str(data),
                         "--ratios", "0.1,0.3", "--repeats", "3", "--seed", "0",
                         "--out", str(sweep_out)]) == 0
        lines = (sweep_out / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "ratio,mean,std"
        assert len(lines) == 3

    def test_diag_dumps_partitions(self, tmp_path, capsys):
        data = tmp_path / "data"
        dispatch(["sbm", "--blocks", "2", "--per-block", "5", "--p-in", "0.9",
                  "--p-out", "0.1", "--seed", "1", "--out", str(data)])
        capsys.readouterr()
        assert dispatch(["diag", "--data", str(data), "--k", "2"]) == 0
        out = capsys.readouterr().out
        assert "nodes=10" in out
        assert "node k positive distance" in out

    def test_module_error_gives_nonzero_exit(self, tmp_path, capsys):
        code = dispatch(["diag", "--data", str(tmp_path / "missing")])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestManifestReplay:
    def test_manifest_written_before_outputs_and_replayable(self, tmp_path):
        data = tmp_path / "data"
        dispatch(["sbm", "--blocks", "2", "--per-block", "15", "--p-in", "0.4",
                  "--p-out", "0.02", "--seed", "6", "--out", str(data)])
        run1, run2 = tmp_path / "r1", tmp_path / "r2"
        cfg = write_cfg(tmp_path / "cfg", "L=1\nD=8\nD_q=16\nK=2\nlambda=0.01\nepochs=25\nseed=3\n")
        assert dispatch(["train", "--config", cfg, "--data", str(data), "--out", str(run1)]) == 0
        assert replay(run1 / "manifest", out_override=str(run2)) == 0
        assert (run1 / "history.csv").read_bytes() == (run2 / "history.csv").read_bytes()
        assert (run1 / "emb").read_bytes() == (run2 / "emb").read_bytes()
        assert (run1 / "checkpoint").read_bytes() == (run2 / "checkpoint").read_bytes()

    def test_sbm_replay_reproduces_container(self, tmp_path):
        out1, out2 = tmp_path / "d1", tmp_path / "d2"
        dispatch(["sbm", "--blocks", "3", "--per-block", "10", "--p-in", "0.3",
                  "--p-out", "0.05", "--seed", "9", "--out", str(out1)])
        replay(out1 / "manifest", out_override=str(out2))
        for name in ("meta", "edges.bin", "features.bin", "labels.bin"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_manifest_round_trip(self, tmp_path):
        m = RunManifest.create("sbm", {"blocks": 2, "out": "x"})
        m.write(tmp_path)
        back = RunManifest.read(tmp_path / "manifest")
        assert back.command == "sbm"
        assert back.args["blocks"] == "2"
        assert back.version == m.version
