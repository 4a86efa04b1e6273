"""Drives exporter output through the consumer pipeline's imported-provider
lane: export vectors for a synthetic corpus, train with them, then route."""

from pathlib import Path

from embed_exporter import export


def test_exported_vectors_feed_the_imported_pipeline(tiny_encoder_dir, tmp_path):
    from coderouter.cli import cli
    from coderouter.corpus import read_artifact
    from coderouter.router import Router

    d = str(tmp_path / "data")
    assert cli(["synth", "-d", d, "--seed", "4"]) == 0
    manifest = export(
        Path(d) / "problems.jsonl",
        Path(d) / "embeddings.jsonl",
        encoder=tiny_encoder_dir,
        pooling="mean",
    )
    assert manifest.count == 60

    for argv in (
        ["rank", "-d", d],
        ["cot-aggregate", "-d", d],
        ["cluster", "-d", d, "--k", "3"],
        ["train-embedding", "-d", d, "--embedder", "imported", "--proj-dim", "16", "--seed", "1"],
        ["train-classifier", "-d", d, "--rounds", "30", "--seed", "1"],
        ["evaluate", "-d", d, "--policy", "learned"],
    ):
        assert cli(argv) == 0, argv

    projection = read_artifact(Path(d) / "projection.json")
    assert projection["meta"]["provider"] == "imported"
    assert projection["d"] == manifest.dim

    from coderouter.cli import _config_from_data_dir, _data_paths

    router = Router.load(_config_from_data_dir(_data_paths(d)))
    known = router.route("ignored text", problem_id="easy-000")
    assert known.embedder == "imported" and not known.embedder_fallback
    adhoc = router.route("some brand new prompt")
    assert adhoc.embedder == "hashed" and adhoc.embedder_fallback
