import json

import numpy as np
import pytest

import subxfer

M = subxfer.WORD_MARKER


def test_tokenizer_roundtrip():
    lines = ["kediler evde uyur", "köpekler bahçede koşar", "kedi ve köpek"] * 5
    for tok in (subxfer.Tokenizer.train_unigram(lines, vocab_size=60), subxfer.Tokenizer.train_bpe(lines, vocab_size=60)):
        for s in lines + ["görülmemiş kelime"]:
            assert subxfer.decode(tok.encode(s)) == subxfer.normalize(s)


def test_worked_example_projection():
    child = subxfer.Tokenizer.from_vocab([M + "üre", "tme", M, "ü", "r", "e", "t", "m"])
    parent = subxfer.Tokenizer.from_vocab([M + "produck", "tion", M + "Harn", "stoff"])
    got = subxfer.project([(0, 0)], child.encode_words("üretme"), parent.encode_words("producktion"))
    got += subxfer.project([(0, 0)], child.encode_words("üre"), parent.encode_words("Harnstoff"))
    assert sorted(got) == sorted(
        [(M + "üre", M + "produck"), (M + "üre", "tion"), ("tme", M + "produck"), ("tme", "tion"),
         (M + "üre", M + "Harn"), (M + "üre", "stoff")]
    )


def test_identity_alignment_is_diagonal():
    lines = ["a b c d", "b c d e", "c d e a", "d e a b", "e a b c"] * 4
    for links in subxfer.align(lines, lines):
        assert all(i == j for i, j in links)


def test_transfer_strategies():
    parent_vocab = ["x", "p1", "p2"]
    parent = np.array([[1, 1], [1, 3], [3, 5]], dtype=np.float32)
    links = {("y", "p1"): 2, ("y", "p2"): 1}
    m, prov, contrib = subxfer.transfer("mean", ["x", "y", "z"], parent_vocab, parent, links)
    assert prov == ["identical", "aligned-mean", "random"]
    np.testing.assert_array_equal(m[0], [1, 1])
    np.testing.assert_array_equal(m[1], [2, 4])
    assert contrib[1] == ["p1", "p2"]
    top1, _, _ = subxfer.transfer("top1", ["x", "y", "z"], parent_vocab, parent, links)
    mean1, _, _ = subxfer.transfer("mean", ["x", "y", "z"], parent_vocab, parent, links, k="1")
    assert top1.tobytes() == mean1.tobytes()
    with pytest.raises(subxfer.ValidationError):
        subxfer.transfer("median", ["y"], parent_vocab, parent, links)


def test_recovery_mean_beats_single_rank_two():
    r = subxfer.recovery_experiment(tokens=64, dim=32)
    assert r["mean_all"] >= r["single"][1]


def test_cli_in_process(tmp_path):
    code, out, err = subxfer.run_cli(["--help"])
    assert code == 0 and "transfer" in out
    code, out, err = subxfer.run_cli(["align", "--source", str(tmp_path / "missing"), "--target", "x"])
    assert code == 2
    assert "input not found" in json.loads(err)["message"]
