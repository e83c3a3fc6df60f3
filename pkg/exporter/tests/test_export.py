"""Exporter round trips against the consumer package's loader."""

import pytest

from embexport.cli import main
from embexport.export import (
    ExportError,
    export,
    read_context_rows,
    tokenize_with_offsets,
)

from propdetect.corpus import load_embeddings
from propdetect.segmentation import read_alignments


@pytest.fixture
def corpus(tmp_path):
    articles = tmp_path / "articles"
    articles.mkdir()
    text = "The corrupt warmongers spread fear.\nThey will never stop."
    (articles / "article42.txt").write_text(text, encoding="utf-8")
    contexts = tmp_path / "contexts.tsv"
    rows = [
        ("42:mini:0-35", "42", 0, 35, "mini", 4, 30),
        ("42:mini:36-58", "42", 36, 58, "mini", "", ""),
    ]
    with open(contexts, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(str(v) for v in row) + "\n")
    return articles, contexts, text


class TestFakeExport:
    def test_round_trip_with_consumer_loader(self, corpus, tmp_path):
        articles, contexts, text = corpus
        out = tmp_path / "emb.pdemb"
        align = tmp_path / "align.tsv"
        written = export(contexts, articles, out, align, fake=True, dim=16)
        assert written == 2

        sequences = load_embeddings(out)
        alignments = read_alignments(align)
        assert set(sequences) == {"42:mini:0-35", "42:mini:36-58"}
        for ctx_id, start, end in (("42:mini:0-35", 0, 35),
                                   ("42:mini:36-58", 36, 58)):
            seq = sequences[ctx_id]
            assert seq.dim == 16
            expected_tokens = tokenize_with_offsets(text[start:end])
            assert seq.n_tokens == len(expected_tokens)
            # sidecar rows = embedding rows minus the whole-context row
            assert alignments[ctx_id].n_tokens == seq.vectors.shape[0] - 1
            assert list(alignments[ctx_id].token_spans) == expected_tokens

    def test_rerun_is_byte_identical(self, corpus, tmp_path):
        articles, contexts, _ = corpus
        paths = []
        for tag in ("a", "b"):
            out = tmp_path / f"{tag}.pdemb"
            align = tmp_path / f"{tag}.align.tsv"
            export(contexts, articles, out, align, fake=True, dim=8, salt=3)
            paths.append((out, align))
        assert paths[0][0].read_bytes() == paths[1][0].read_bytes()
        assert paths[0][1].read_bytes() == paths[1][1].read_bytes()

    def test_empty_contexts_file_gives_header_only(self, corpus, tmp_path):
        articles, _, _ = corpus
        empty = tmp_path / "empty.tsv"
        empty.write_text("", encoding="utf-8")
        out = tmp_path / "emb.pdemb"
        written = export(empty, articles, out, tmp_path / "align.tsv",
                         fake=True, dim=4)
        assert written == 0
        assert out.read_text(encoding="utf-8") == "PDEMB1 4\n"

    def test_long_context_truncated_with_warning(self, corpus, tmp_path, capsys):
        articles, _, _ = corpus
        long_text = " ".join(f"w{i}" for i in range(40))
        (articles / "article77.txt").write_text(long_text, encoding="utf-8")
        contexts = tmp_path / "long.tsv"
        contexts.write_text(
            f"77:mini:0-{len(long_text)}\t77\t0\t{len(long_text)}\tmini\t\t\n",
            encoding="utf-8")
        out = tmp_path / "emb.pdemb"
        align = tmp_path / "align.tsv"
        export(contexts, articles, out, align, fake=True, dim=4, max_tokens=10)
        assert "truncated" in capsys.readouterr().err
        seq = load_embeddings(out)["77:mini:0-" + str(len(long_text))]
        assert seq.n_tokens == 10
        assert read_alignments(align)[seq.context_id].n_tokens == 10

    def test_missing_article_rejected(self, corpus, tmp_path):
        articles, _, _ = corpus
        contexts = tmp_path / "bad.tsv"
        contexts.write_text("99:mini:0-5\t99\t0\t5\tmini\t\t\n", encoding="utf-8")
        with pytest.raises(ExportError, match="no article"):
            export(contexts, articles, tmp_path / "e.pdemb",
                   tmp_path / "a.tsv", fake=True, dim=4)


class TestCli:
    def test_fake_mode_end_to_end(self, corpus, tmp_path, capsys):
        articles, contexts, _ = corpus
        out = tmp_path / "emb.pdemb"
        code = main(["--contexts", str(contexts), "--articles", str(articles),
                     "--out", str(out), "--fake", "--dim", "8"])
        assert code == 0
        assert "wrote 2 contexts" in capsys.readouterr().out
        assert load_embeddings(out)["42:mini:0-35"].dim == 8
        assert (tmp_path / "emb.pdemb.align.tsv").exists()

    def test_errors_exit_nonzero(self, tmp_path, capsys):
        code = main(["--contexts", str(tmp_path / "none.tsv"),
                     "--articles", str(tmp_path), "--out",
                     str(tmp_path / "o.pdemb"), "--fake"])
        assert code == 1
        assert "error:" in capsys.readouterr().err


def test_context_rows_parse(tmp_path):
    path = tmp_path / "ctx.tsv"
    path.write_text("c1\t9\t0\t5\tmini\t\t\n\nc2\t9\t6\t9\tmini\t0\t3\n",
                    encoding="utf-8")
    rows = read_context_rows(path)
    assert [r.context_id for r in rows] == ["c1", "c2"]
    assert rows[1].start == 6
