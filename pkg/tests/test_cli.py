"""Command-line interface: subcommands, file round trips, and exit codes."""

import pytest

from latseq.checkpoint import load_checkpoint, model_from_checkpoint
from latseq.cli import main
from latseq.lattice import read_lattices
from latseq.vocab import RESERVED, Vocab


def write_lines(path, lines):
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")
    return str(path)


@pytest.fixture
def seg_files(tmp_path):
    """Two parallel tokenizations of the same two sentences."""
    seg1 = write_lines(tmp_path / "a.seg1", ["ab cd", "a b"])
    seg2 = write_lines(tmp_path / "a.seg2", ["a b cd", "ab"])
    return seg1, seg2


class TestBuildLattice:
    def test_merges_and_round_trips(self, tmp_path, seg_files, capsys):
        out = str(tmp_path / "out.lat")
        assert main(["build-lattice", "--segs", ",".join(seg_files), "--out", out]) == 0
        assert "wrote 2 lattices" in capsys.readouterr().out
        with open(out, encoding="utf-8") as f:
            lats = read_lattices(f)
        assert len(lats) == 2
        spans = {(e.start, e.end) for e in lats[0].edges}
        assert spans == {(0, 2), (2, 4), (0, 1), (1, 2)}

    def test_line_count_mismatch_is_data_error(self, tmp_path, capsys):
        seg1 = write_lines(tmp_path / "x.seg1", ["ab", "cd"])
        seg2 = write_lines(tmp_path / "x.seg2", ["ab"])
        out = str(tmp_path / "out.lat")
        assert main(["build-lattice", "--segs", seg1 + "," + seg2, "--out", out]) == 2
        assert "differ in line count" in capsys.readouterr().err

    def test_character_mismatch_reports_line(self, tmp_path, capsys):
        seg1 = write_lines(tmp_path / "y.seg1", ["ab", "cd"])
        seg2 = write_lines(tmp_path / "y.seg2", ["ab", "ce"])
        out = str(tmp_path / "out.lat")
        assert main(["build-lattice", "--segs", seg1 + "," + seg2, "--out", out]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_missing_input_file_is_data_error(self, tmp_path):
        out = str(tmp_path / "out.lat")
        code = main(["build-lattice", "--segs", str(tmp_path / "absent"), "--out", out])
        assert code == 2

    def test_unwritable_output_is_data_error(self, tmp_path, seg_files):
        out = str(tmp_path / "no" / "such" / "dir" / "out.lat")
        assert main(["build-lattice", "--segs", ",".join(seg_files), "--out", out]) == 2


class TestBuildVocab:
    def test_token_file(self, tmp_path):
        inp = write_lines(tmp_path / "toks", ["b a a", "c a b"])
        out = str(tmp_path / "vocab")
        assert main(["build-vocab", "--input", inp, "--out", out]) == 0
        with open(out, encoding="utf-8") as f:
            assert f.read().split() == ["a", "b", "c"]

    def test_size_truncates(self, tmp_path):
        inp = write_lines(tmp_path / "toks", ["b a a c d e"])
        out = str(tmp_path / "vocab")
        assert main(["build-vocab", "--input", inp, "--size", "5", "--out", out]) == 0
        vocab = Vocab.load(out)
        assert len(vocab) == 5  # three reserved entries plus two kept tokens

    def test_from_lattices_includes_reversals(self, tmp_path, seg_files):
        lat_path = str(tmp_path / "out.lat")
        main(["build-lattice", "--segs", ",".join(seg_files), "--out", lat_path])
        out = str(tmp_path / "vocab")
        code = main(["build-vocab", "--input", lat_path, "--from-lattices",
                     "--out", out])
        assert code == 0
        vocab = Vocab.load(out)
        assert {"ab", "ba", "cd", "dc"} <= set(vocab.tokens)

    def test_empty_input_is_data_error(self, tmp_path):
        inp = write_lines(tmp_path / "toks", [])
        assert main(["build-vocab", "--input", inp, "--out", str(tmp_path / "v")]) == 2


class TestGenToy:
    def test_writes_all_split_files(self, tmp_path, capsys):
        out_dir = str(tmp_path / "toy")
        code = main(["gen-toy", "--out", out_dir, "--sentences", "40",
                     "--noise", "0.3", "--seed", "1"])
        assert code == 0
        assert "wrote 15 files" in capsys.readouterr().out
        for split, count in (("train", 32), ("valid", 4), ("test", 4)):
            for kind in ("src", "seg1", "seg2", "seg3", "tgt"):
                with open("%s/%s.%s.txt" % (out_dir, split, kind)) as f:
                    assert len(f.readlines()) == count

    def test_bad_noise_is_data_error(self, tmp_path):
        code = main(["gen-toy", "--out", str(tmp_path / "toy"), "--noise", "1.5"])
        assert code == 2


class TestUsageErrors:
    def test_unknown_command(self):
        assert main(["frobnicate"]) == 1

    def test_missing_required_option(self, tmp_path):
        assert main(["build-lattice", "--out", str(tmp_path / "x")]) == 1

    def test_nonexistent_path_option(self, tmp_path):
        code = main(["decode", "--model", str(tmp_path / "absent.ckpt"),
                     "--lattices", str(tmp_path / "absent.lat"),
                     "--out", str(tmp_path / "hyp")])
        assert code == 1

    def test_bad_choice_value(self, tmp_path):
        code = main(["grad-check", "--cell", "lstm"])
        assert code == 1


class TestGradCheck:
    def test_passes_at_small_dim(self, capsys):
        assert main(["grad-check", "--cell", "dwl", "--compose", "gate",
                     "--dim", "3", "--k", "2"]) == 0
        assert "max relative error" in capsys.readouterr().out

    def test_gru_ok(self):
        assert main(["grad-check", "--cell", "gru", "--dim", "3"]) == 0


class TestEval:
    def test_accuracy_printed(self, tmp_path, capsys):
        hyp = write_lines(tmp_path / "hyp", ["A B", "C D"])
        ref = write_lines(tmp_path / "ref", ["A B", "C X"])
        assert main(["eval", "--hyp", hyp, "--ref", ref]) == 0
        assert "token accuracy 0.750000" in capsys.readouterr().out

    def test_length_mismatch_is_data_error(self, tmp_path, capsys):
        hyp = write_lines(tmp_path / "hyp", ["A"])
        ref = write_lines(tmp_path / "ref", ["A", "B"])
        assert main(["eval", "--hyp", hyp, "--ref", ref]) == 2


class TestTrainDecodePipeline:
    @pytest.fixture
    def corpus(self, tmp_path):
        sentences = [["ab", "cd"], ["cd", "ab"], ["ab"], ["cd"],
                     ["ab", "ab"], ["cd", "cd"], ["ab", "cd", "ab"], ["cd", "ab", "cd"]]
        seg1 = write_lines(tmp_path / "c.seg1", [" ".join(s) for s in sentences])
        seg2 = write_lines(
            tmp_path / "c.seg2",
            [" ".join(sum(([w[0], w[1]] for w in s), [])) for s in sentences],
        )
        tgt = write_lines(tmp_path / "c.tgt",
                          [" ".join(w.upper() for w in s) for s in sentences])
        lat_path = str(tmp_path / "c.lat")
        assert main(["build-lattice", "--segs", seg1 + "," + seg2,
                     "--out", lat_path]) == 0
        src_vocab = str(tmp_path / "src.vocab")
        tgt_vocab = str(tmp_path / "tgt.vocab")
        assert main(["build-vocab", "--input", lat_path, "--from-lattices",
                     "--out", src_vocab]) == 0
        assert main(["build-vocab", "--input", tgt, "--out", tgt_vocab]) == 0
        return lat_path, tgt, src_vocab, tgt_vocab

    def test_train_decode_eval(self, tmp_path, corpus, capsys):
        lat_path, tgt, src_vocab, tgt_vocab = corpus
        ckpt_path = str(tmp_path / "model.ckpt")
        code = main(["train", "--lattices", lat_path, "--targets", tgt,
                     "--src-vocab", src_vocab, "--tgt-vocab", tgt_vocab,
                     "--cell", "dwl", "--compose", "gate",
                     "--embed-dim", "4", "--hidden", "4", "--batch", "4",
                     "--max-epochs", "2", "--seed", "0",
                     "--out", ckpt_path])
        assert code == 0
        out = capsys.readouterr().out
        assert "best val_acc" in out

        ckpt = load_checkpoint(ckpt_path)
        model, src, _ = model_from_checkpoint(ckpt)
        assert model.config.cell == "dwl"
        assert src.fingerprint() == Vocab.load(src_vocab).fingerprint()
        with open(ckpt_path + ".log", encoding="utf-8") as f:
            log_lines = f.read().splitlines()
        assert log_lines and all(l.startswith("epoch ") for l in log_lines)

        hyp_path = str(tmp_path / "hyp.txt")
        code = main(["decode", "--model", ckpt_path, "--lattices", lat_path,
                     "--beam", "2", "--max-len", "6", "--out", hyp_path])
        assert code == 0
        with open(hyp_path, encoding="utf-8") as f:
            hyps = f.read().splitlines()
        assert len(hyps) == 8
        tgt_tokens = set(Vocab.load(tgt_vocab).tokens)
        for line in hyps:
            assert all(tok in tgt_tokens for tok in line.split())

        assert main(["eval", "--hyp", hyp_path, "--ref", tgt]) == 0
        assert "token accuracy" in capsys.readouterr().out

    def test_train_explicit_validation_split(self, tmp_path, corpus):
        lat_path, tgt, src_vocab, tgt_vocab = corpus
        ckpt_path = str(tmp_path / "model2.ckpt")
        code = main(["train", "--lattices", lat_path, "--targets", tgt,
                     "--src-vocab", src_vocab, "--tgt-vocab", tgt_vocab,
                     "--val-lattices", lat_path, "--val-targets", tgt,
                     "--embed-dim", "4", "--hidden", "4", "--batch", "4",
                     "--max-epochs", "1", "--out", ckpt_path])
        assert code == 0

    def test_val_options_must_pair(self, tmp_path, corpus):
        lat_path, tgt, src_vocab, tgt_vocab = corpus
        code = main(["train", "--lattices", lat_path, "--targets", tgt,
                     "--src-vocab", src_vocab, "--tgt-vocab", tgt_vocab,
                     "--val-lattices", lat_path,
                     "--embed-dim", "4", "--hidden", "4",
                     "--out", str(tmp_path / "m.ckpt")])
        assert code == 1

    def test_target_line_count_mismatch(self, tmp_path, corpus):
        lat_path, tgt, src_vocab, tgt_vocab = corpus
        short_tgt = write_lines(tmp_path / "short.tgt", ["AB CD"])
        code = main(["train", "--lattices", lat_path, "--targets", short_tgt,
                     "--src-vocab", src_vocab, "--tgt-vocab", tgt_vocab,
                     "--embed-dim", "4", "--hidden", "4",
                     "--out", str(tmp_path / "m.ckpt")])
        assert code == 2
