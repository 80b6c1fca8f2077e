from pathlib import Path

from libs_kd.cli import main


def write_cfg(tmp_path: Path) -> Path:
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# tiny smoke configuration\n"
        "vocab_size = 6\nviseme_classes = 3\nvideo_rate = 2\naudio_rate = 3\n"
        "d_v = 6\nd_a = 6\nlen_min = 2\nlen_max = 3\n"
        "n_train = 10\nn_val = 4\nn_test = 4\n"
        "d_h = 4\nd_emb = 4\n"
        "curriculum_lengths = 3\ncurriculum_epochs = 1\n"
        "max_decode_len = 8\nseed = 9\n"
        f"corpus_dir = {tmp_path / 'data'}\n"
        f"checkpoint_dir = {tmp_path / 'ckpt'}\n"
        f"report_dir = {tmp_path / 'reports'}\n")
    return cfg


class TestCli:
    def test_full_command_flow(self, tmp_path, capsys):
        cfg = str(write_cfg(tmp_path))
        assert main(["gen-data", "--config", cfg]) == 0
        assert (tmp_path / "data" / "train.corpus").exists()

        assert main(["train-teacher", "--config", cfg]) == 0
        teacher = str(tmp_path / "ckpt" / "teacher.ckpt")
        assert Path(teacher).exists()

        assert main(["train-student", "--config", cfg, "--mode", "full",
                     "--teacher", teacher]) == 0
        student = str(tmp_path / "ckpt" / "student_full.ckpt")

        assert main(["eval", "--config", cfg, "--ckpt", student,
                     "--split", "test"]) == 0
        assert (tmp_path / "reports" / "eval_test.csv").exists()

        assert main(["eval", "--config", cfg, "--ckpt", student,
                     "--split", "test", "--beam-width", "4", "--tag", "b4"]) == 0

        sid = 2_000_000  # first test-split sample id
        assert main(["export-attention", "--config", cfg, "--ckpt", student,
                     "--sample-id", str(sid), "--teacher", teacher]) == 0
        out = capsys.readouterr().out
        assert "diagonal mass" in out
        assert (tmp_path / "reports" / f"attention_{sid}.csv").exists()
        assert (tmp_path / "reports" / f"alignment_{sid}.csv").exists()

    def test_seed_and_set_overrides(self, tmp_path):
        cfg = str(write_cfg(tmp_path))
        assert main(["gen-data", "--config", cfg, "--set", "n_train=5",
                     "--seed", "77"]) == 0
        from libs_kd.synthdata import load_corpus
        corpus = load_corpus(tmp_path / "data")
        assert len(corpus.train) == 5
        assert corpus.cfg.seed == 77

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = str(write_cfg(tmp_path))
        assert main(["gen-data", "--config", cfg, "--set", "nope=1"]) == 2

    def test_bad_value_exits_2(self, tmp_path):
        cfg = str(write_cfg(tmp_path))
        assert main(["gen-data", "--config", cfg, "--set", "d_h=abc"]) == 2

    def test_missing_corpus_exits_3(self, tmp_path):
        cfg = str(write_cfg(tmp_path))
        assert main(["train-teacher", "--config", cfg]) == 3

    def test_student_without_teacher_exits_2(self, tmp_path):
        cfg = str(write_cfg(tmp_path))
        main(["gen-data", "--config", cfg])
        assert main(["train-student", "--config", cfg, "--mode", "full"]) == 2

    def test_corrupt_checkpoint_exits_3(self, tmp_path):
        cfg = str(write_cfg(tmp_path))
        main(["gen-data", "--config", cfg])
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"LIBSCKPTgarbage")
        assert main(["eval", "--config", cfg, "--ckpt", str(bad)]) == 3

    def test_unknown_sample_id_exits_2(self, tmp_path):
        cfg = str(write_cfg(tmp_path))
        main(["gen-data", "--config", cfg])
        main(["train-teacher", "--config", cfg])
        teacher = str(tmp_path / "ckpt" / "teacher.ckpt")
        assert main(["export-attention", "--config", cfg, "--ckpt", teacher,
                     "--sample-id", "424242"]) == 2

    def test_ablate_writes_table(self, tmp_path, capsys):
        cfg = str(write_cfg(tmp_path))
        main(["gen-data", "--config", cfg])
        main(["train-teacher", "--config", cfg])
        teacher = str(tmp_path / "ckpt" / "teacher.ckpt")
        assert main(["ablate", "--config", cfg, "--teacher", teacher]) == 0
        table = (tmp_path / "reports" / "ablation.csv").read_text()
        assert table.splitlines()[0] == "mode,cer,wer,bleu"
        assert len(table.splitlines()) == 7
