"""File format round-trips, strict loader errors, and CLI workflows."""

import json

import numpy as np
import pytest

from prospect import cli
from prospect import io as pio
from prospect import viz
from prospect.graphs import LabeledDatum, MapGraph, ProspectMap, build_chain_graph
from prospect.kernel import Kernel, Scaler, Vocabulary
from prospect.quantizer import Quantizer, make_sprite
from prospect.select import Config, ConfigResult


def chain_datum(datum_id="d0", t=6, d=3, label=1, seed=0, mask=None, coords=False):
    rng = np.random.default_rng(seed)
    embeddings = rng.normal(size=(t, d))
    xy = rng.uniform(size=(t, 2)) if coords else None
    graph = MapGraph(embeddings, build_chain_graph(t).tolist(),
                     coords=xy, datum_id=datum_id)
    return LabeledDatum(graph, label, mask)


# ---------------------------------------------------------------------------
# datum files


class TestDatumRoundTrip:
    def test_tokens_exact(self, tmp_path):
        datum = chain_datum(mask=np.array([1, 0, 0, 1, 0, 0], dtype=bool), coords=True)
        path = tmp_path / "d0.json"
        pio.save_datum(datum, path)
        loaded = pio.load_datum(path)
        np.testing.assert_array_equal(loaded.graph.embeddings, datum.graph.embeddings)
        np.testing.assert_array_equal(loaded.graph.edges, datum.graph.edges)
        np.testing.assert_array_equal(loaded.graph.coords, datum.graph.coords)
        np.testing.assert_array_equal(loaded.mask, datum.mask)
        assert loaded.label == 1 and loaded.datum_id == "d0"

    def test_sidecar_float32(self, tmp_path):
        datum = chain_datum(t=5, d=4)
        pio.save_datum(datum, tmp_path / "d0.json", sidecar=True)
        assert (tmp_path / "d0.bin").stat().st_size == 4 * 5 * 4
        loaded = pio.load_datum(tmp_path / "d0.json")
        # float32 narrowing is the only loss allowed
        expected = datum.graph.embeddings.astype("<f4").astype(np.float64)
        np.testing.assert_array_equal(loaded.graph.embeddings, expected)

    def test_dataset_sorted_by_filename(self, tmp_path):
        for name, did in (("b.json", "two"), ("a.json", "one")):
            pio.save_datum(chain_datum(did), tmp_path / name)
        loaded = pio.load_dataset(tmp_path)
        assert [d.datum_id for d in loaded] == ["one", "two"]

    def test_dataset_rejects_duplicate_ids(self, tmp_path):
        pio.save_datum(chain_datum("same"), tmp_path / "a.json")
        pio.save_datum(chain_datum("same"), tmp_path / "b.json")
        with pytest.raises(pio.DatumFormatError, match="duplicate id"):
            pio.load_dataset(tmp_path)


def write_doc(tmp_path, doc, name="bad.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


GOOD = {
    "id": "g",
    "label": 0,
    "tokens": [[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]],
    "edges": [[0, 1], [1, 2]],
}


class TestStrictLoader:
    @pytest.mark.parametrize(
        "mutate, pointer",
        [
            (lambda d: d.pop("id"), "/id"),
            (lambda d: d.update(label=2), "/label"),
            (lambda d: d.update(tokens=[[0.0, 1.0], [1.0]]), "/tokens/1"),
            (lambda d: d.update(tokens=[]), "/tokens"),
            (lambda d: d.update(edges=[[0, 1, 2]]), "/edges/0"),
            (lambda d: d.update(edges=[[0, 9]]), "/edges/0"),
            (lambda d: d.update(edges=[[1, 1]]), "/edges/0"),
            (lambda d: d.update(mask=[1, 0]), "/mask"),
            (lambda d: d.update(mask=[1, 0, 7]), "/mask/2"),
            (lambda d: d.update(coords=[[0.0, 0.0]]), "/coords"),
            (lambda d: [d.pop("tokens")], "/tokens"),
        ],
    )
    def test_pointer_reported(self, tmp_path, mutate, pointer):
        doc = json.loads(json.dumps(GOOD))
        mutate(doc)
        path = write_doc(tmp_path, doc)
        with pytest.raises(pio.DatumFormatError) as err:
            pio.load_datum(path)
        assert err.value.pointer == pointer
        assert str(path) in str(err.value)

    def test_invalid_json_reports_path(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(pio.DatumFormatError, match="invalid JSON"):
            pio.load_datum(path)

    def test_sidecar_size_mismatch(self, tmp_path):
        doc = {"id": "s", "label": 0, "edges": [],
               "embeddings_bin": "s.bin", "T": 3, "d": 2}
        (tmp_path / "s.bin").write_bytes(b"\x00" * 10)
        path = write_doc(tmp_path, doc, "s.json")
        with pytest.raises(pio.DatumFormatError, match="expected 24"):
            pio.load_datum(path)

    def test_missing_sidecar(self, tmp_path):
        doc = {"id": "s", "label": 0, "edges": [],
               "embeddings_bin": "gone.bin", "T": 3, "d": 2}
        path = write_doc(tmp_path, doc, "s.json")
        with pytest.raises(pio.DatumFormatError, match="not found"):
            pio.load_datum(path)


# ---------------------------------------------------------------------------
# artifact round-trips


def small_kernel(k=3, r=1, alpha=None):
    vocab = Vocabulary(k, r)
    rng = np.random.default_rng(5)
    scaler = Scaler(rng.uniform(1.0, 2.0, size=vocab.size), 7,
                    rng.integers(0, 7, size=vocab.size))
    return Kernel(
        vocabulary=vocab, weights=rng.normal(size=vocab.size), scaler=scaler,
        variant="fold_change", tau=0.25, alpha=alpha, fitted_on="abc123",
    )


class TestArtifacts:
    def test_quantizer_bit_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        q = Quantizer(rng.normal(size=(4, 3)), seed=9)
        pio.save_json(pio.quantizer_to_dict(q), tmp_path / "q.json")
        loaded = pio.quantizer_from_dict(pio.load_json(tmp_path / "q.json"))
        np.testing.assert_array_equal(loaded.centroids, q.centroids)
        assert loaded.seed == 9

    @pytest.mark.parametrize("alpha", [None, 0.05])
    def test_kernel_round_trip(self, tmp_path, alpha):
        kernel = small_kernel(alpha=alpha)
        pio.save_json(pio.kernel_to_dict(kernel), tmp_path / "k.json")
        loaded = pio.kernel_from_dict(pio.load_json(tmp_path / "k.json"))
        np.testing.assert_array_equal(loaded.weights, kernel.weights)
        np.testing.assert_array_equal(loaded.scaler.idf, kernel.scaler.idf)
        assert loaded.vocabulary == kernel.vocabulary
        assert loaded.alpha == alpha and loaded.tau == 0.25
        assert loaded.fitted_on == "abc123"

    def test_map_round_trip_and_csv(self, tmp_path):
        pmap = ProspectMap(np.array([0.0, 0.5, 1.0]), True, "m1")
        json_path, csv_path = pio.save_map(pmap, tmp_path, "m1")
        loaded = pio.map_from_dict(pio.load_json(json_path))
        np.testing.assert_array_equal(loaded.scores, pmap.scores)
        assert loaded.datum_id == "m1" and loaded.scaled
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "vertex_id,score"
        assert lines[1] == "0,0.0" and lines[3] == "2,1.0"

    def test_dump_json_deterministic(self):
        doc = {"b": [1.0, 0.1 + 0.2], "a": None}
        assert pio.dump_json(doc) == pio.dump_json(json.loads(pio.dump_json(doc)))

    def test_atomic_write_keeps_old_content_on_failure(self, tmp_path):
        path = tmp_path / "x.json"
        pio.save_json({"ok": 1}, path)
        with pytest.raises(ValueError):
            pio.save_json({"bad": float("nan")}, path)
        assert json.loads(path.read_text()) == {"ok": 1}
        assert list(tmp_path.glob("*.tmp*")) == []


class TestLedger:
    def test_round_trip_with_nones_and_commas(self, tmp_path):
        results = [
            ConfigResult(Config(0, "fold_change", 4, 1, tau=0.0, alpha=None),
                         0.5, 0.25, 0.4, 0.9),
            ConfigResult(Config(1, "linear", 4, 0, lam=0.5),
                         -1.0, -1.0, -1.0, -1.0, error='ValueError: bad, "stuff"'),
        ]
        rows = [pio.LEDGER_HEADER] + [pio.ledger_row(r) for r in results]
        pio.write_csv(tmp_path / "sweep.csv", rows)
        back = pio.read_ledger(tmp_path / "sweep.csv")
        assert set(back) == {0, 1}
        assert back[0][4] == "0.0" and back[0][5] == "" and back[0][6] == ""
        assert back[1][11] == 'ValueError: bad, "stuff"'

    def test_rejects_foreign_csv(self, tmp_path):
        (tmp_path / "other.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="not a sweep ledger"):
            pio.read_ledger(tmp_path / "other.csv")

    def test_missing_file_is_empty(self, tmp_path):
        assert pio.read_ledger(tmp_path / "nope.csv") == {}


# ---------------------------------------------------------------------------
# DOT and heatmap exports


class TestViz:
    def test_mono_only_kernel_has_no_edges(self):
        kernel = small_kernel(k=4, r=0)
        dot = viz.kernel_dot(kernel)
        assert dot.count(" -- ") == 0
        assert dot.count("[shape=circle]") == 1
        for c in range(4):
            assert f"c{c} " in dot

    def test_full_bigram_kernel_has_all_self_complete_edges(self):
        k = 5
        vocab = Vocabulary(k, 1)
        weights = np.arange(1, vocab.size + 1, dtype=np.float64)
        scaler = Scaler(np.ones(vocab.size), 1, np.ones(vocab.size, dtype=np.int64))
        kernel = Kernel(vocabulary=vocab, weights=weights, scaler=scaler,
                        variant="fold_change", tau=0.0)
        dot = viz.kernel_dot(kernel)
        # K self loops plus K(K-1)/2 pairs
        assert dot.count(" -- ") == k * (k + 1) // 2 == 15

    def test_zero_weight_edges_omitted(self):
        kernel = small_kernel(k=3, r=1)
        weights = kernel.weights.copy()
        pos = kernel.vocabulary.size - 1  # last bigram
        weights[pos] = 0.0
        zeroed = Kernel(vocabulary=kernel.vocabulary, weights=weights,
                        scaler=kernel.scaler, variant="fold_change", tau=0.0)
        assert viz.kernel_dot(zeroed).count(" -- ") == 5

    def test_heatmap_rows_shape_and_symmetry(self):
        kernel = small_kernel(k=3, r=1)
        rows = viz.kernel_heatmap_rows(kernel)
        assert rows[0] == ["concept", "mono", "0", "1", "2"]
        assert len(rows) == 4
        body = [[float(v) for v in row[2:]] for row in rows[1:]]
        mat = np.array(body)
        np.testing.assert_array_equal(mat, mat.T)

    def test_sprite_semantic_dot_counts(self):
        rng = np.random.default_rng(3)
        q = Quantizer(np.eye(3), seed=0)
        emb = np.eye(3)[[0, 1, 0, 2]]
        graph = MapGraph(emb, build_chain_graph(4).tolist(), datum_id="s")
        sprite = make_sprite(q, graph)
        dot = viz.sprite_semantic_dot(sprite, radius=1)
        assert 'graph "s"' in dot
        assert dot.count(" -- ") > 0


# ---------------------------------------------------------------------------
# CLI workflows


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synth data and a fitted model shared across CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    rc = cli.main([
        "synth", "--preset", "mono", "--topology", "chain",
        "--t-min", "30", "--t-max", "40", "--dim", "8", "--concepts", "5",
        "--motif", "3", "--rho", "0.2", "--components", "1",
        "--n-train", "6", "--n-test", "3", "--seed", "7",
        "--output", str(root / "data"),
    ])
    assert rc == 0
    rc = cli.main([
        "fit", "--train", str(root / "data/train"), "--k", "5", "--r", "1",
        "--output", str(root / "model"),
    ])
    assert rc == 0
    return root


class TestCli:
    def test_fit_artifacts_byte_identical_on_rerun(self, workspace, tmp_path):
        rc = cli.main([
            "fit", "--train", str(workspace / "data/train"), "--k", "5", "--r", "1",
            "--output", str(tmp_path / "model2"),
        ])
        assert rc == 0
        for name in ("quantizer.json", "kernel.json"):
            assert (tmp_path / "model2" / name).read_bytes() == \
                (workspace / "model" / name).read_bytes()

    def test_fit_single_class_names_missing(self, tmp_path, capsys):
        for i in range(3):
            pio.save_datum(chain_datum(f"d{i}", label=1, seed=i), tmp_path / f"d{i}.json")
        rc = cli.main(["fit", "--train", str(tmp_path), "--k", "2", "--r", "0",
                       "--output", str(tmp_path / "m")])
        assert rc == 2
        assert "class-0" in capsys.readouterr().err

    def test_attribute_and_evaluate(self, workspace, capsys):
        rc = cli.main([
            "attribute", "--model", str(workspace / "model"),
            "--data", str(workspace / "data/test"),
            "--output", str(workspace / "maps"),
        ])
        assert rc == 0
        maps = sorted((workspace / "maps").glob("*.map.json"))
        assert len(maps) == 6
        rc = cli.main([
            "evaluate", "--maps", str(workspace / "maps"),
            "--data", str(workspace / "data/test"),
            "--output", str(workspace / "report"),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "auprc" in out
        header = (workspace / "report/report.csv").read_text().splitlines()[0]
        assert header.startswith("datum_id,label,prevalence,dispersion,auprc")
        assert (workspace / "report/report.json").exists()
        assert (workspace / "report/auprc_vs_prevalence.png").stat().st_size > 0
        assert (workspace / "report/auprc_vs_dispersion.png").stat().st_size > 0

    def test_attribute_empty_dir_warns_and_succeeds(self, workspace, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        rc = cli.main(["attribute", "--model", str(workspace / "model"),
                       "--data", str(empty), "--output", str(tmp_path / "maps")])
        assert rc == 0
        assert "warning" in capsys.readouterr().err

    def test_attribute_dim_mismatch_isolated(self, workspace, tmp_path, capsys):
        data = tmp_path / "mixed"
        data.mkdir()
        for src in sorted((workspace / "data/test").glob("*.json"))[:2]:
            (data / src.name).write_bytes(src.read_bytes())
        pio.save_datum(chain_datum("wrong-d", d=9), data / "zz-wrong.json")
        rc = cli.main(["attribute", "--model", str(workspace / "model"),
                       "--data", str(data), "--output", str(tmp_path / "maps")])
        assert rc == 0
        captured = capsys.readouterr()
        assert "attributed 2/3" in captured.out
        assert "zz-wrong.json" in captured.err
        assert len(list((tmp_path / "maps").glob("*.map.json"))) == 2

    def test_evaluate_without_masks_is_data_error(self, workspace, tmp_path, capsys):
        data = tmp_path / "nomask"
        data.mkdir()
        pio.save_datum(chain_datum("nm", t=8), data / "nm.json")
        rc = cli.main(["attribute", "--model", str(workspace / "model"),
                       "--data", str(data), "--output", str(tmp_path / "maps")])
        assert rc == 2  # dim mismatch: chain_datum d=3 vs model d=8
        pio.save_datum(
            LabeledDatum(chain_datum("nm8", t=8, d=8).graph, 1, None),
            data / "nm.json",
        )
        rc = cli.main(["attribute", "--model", str(workspace / "model"),
                       "--data", str(data), "--output", str(tmp_path / "maps")])
        assert rc == 0
        rc = cli.main(["evaluate", "--maps", str(tmp_path / "maps"),
                       "--data", str(data), "--output", str(tmp_path / "rep")])
        assert rc == 2
        assert "mask" in capsys.readouterr().err

    def test_sweep_rank_and_resume(self, workspace, tmp_path, capsys):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"K": [4, 5], "r": [0, 1], "alpha": [None]}))
        out = tmp_path / "sweep"
        rc = cli.main(["sweep", "--train", str(workspace / "data/train"),
                       "--grid", str(grid), "--output", str(out)])
        assert rc == 0
        ledger = pio.read_ledger(out / "sweep.csv")
        assert len(ledger) == 4
        rc = cli.main(["sweep", "--train", str(workspace / "data/train"),
                       "--grid", str(grid), "--output", str(out), "--resume"])
        assert rc == 0
        assert "nothing to do" in capsys.readouterr().out
        rc = cli.main(["rank", "--ledger", str(out / "sweep.csv"), "--top", "2",
                       "--output", str(out)])
        assert rc == 0
        ranked = (out / "ranked.csv").read_text().splitlines()
        assert len(ranked) == 5  # header + all four configs
        assert ranked[0].startswith("rank,index")

    def test_resume_completes_partial_ledger(self, workspace, tmp_path):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"K": [4, 5], "r": [0]}))
        out = tmp_path / "sweep"
        rc = cli.main(["sweep", "--train", str(workspace / "data/train"),
                       "--grid", str(grid), "--output", str(out)])
        assert rc == 0
        full = pio.read_ledger(out / "sweep.csv")
        # drop one row, resume must restore an identical ledger
        partial = [pio.LEDGER_HEADER] + [full[i] for i in sorted(full) if i != 1]
        pio.write_csv(out / "sweep.csv", partial)
        rc = cli.main(["sweep", "--train", str(workspace / "data/train"),
                       "--grid", str(grid), "--output", str(out), "--resume"])
        assert rc == 0
        assert pio.read_ledger(out / "sweep.csv") == full

    def test_export_viz_outputs(self, workspace, tmp_path):
        datum = sorted((workspace / "data/test").glob("*.json"))[0]
        rc = cli.main(["export-viz", "--model", str(workspace / "model"),
                       "--datum", str(datum), "--output", str(tmp_path / "viz")])
        assert rc == 0
        assert (tmp_path / "viz/kernel.dot").exists()
        assert (tmp_path / "viz/kernel_heatmap.csv").exists()
        assert (tmp_path / "viz/kernel_heatmap.png").stat().st_size > 0
        sprites = list((tmp_path / "viz").glob("*.sprite.dot"))
        assert len(sprites) == 1

    def test_bench_scaling_outputs(self, tmp_path):
        rc = cli.main(["bench-scaling", "--sizes", "200,400", "--k", "4",
                       "--r", "1", "--dim", "6", "--output", str(tmp_path / "bench")])
        assert rc == 0
        rows = (tmp_path / "bench/bench.csv").read_text().splitlines()
        assert rows[0] == "T,quantize_seconds,convolve_seconds"
        assert len(rows) == 3
        assert (tmp_path / "bench/scaling.png").stat().st_size > 0

    def test_synth_trigram_preset(self, tmp_path):
        rc = cli.main(["synth", "--preset", "trigram", "--t-max", "24",
                       "--dim", "8", "--concepts", "5", "--sigma", "0.1",
                       "--trigram-r", "2", "--n-train", "2", "--n-test", "1",
                       "--output", str(tmp_path / "tri")])
        assert rc == 0
        meta = pio.load_json(tmp_path / "tri/metadata.json")
        assert meta["motif"] == [0, 1, 2]
        assert len(list((tmp_path / "tri/train").glob("*.json"))) == 4

    def test_sidecar_synth_round_trips_through_fit(self, tmp_path):
        rc = cli.main(["synth", "--preset", "mono", "--t-min", "20", "--t-max", "25",
                       "--dim", "6", "--concepts", "4", "--motif", "2",
                       "--n-train", "4", "--n-test", "2", "--sidecar",
                       "--output", str(tmp_path / "sc")])
        assert rc == 0
        assert list((tmp_path / "sc/train").glob("*.bin"))
        rc = cli.main(["fit", "--train", str(tmp_path / "sc/train"),
                       "--k", "4", "--r", "1", "--output", str(tmp_path / "m")])
        assert rc == 0

    @pytest.mark.parametrize(
        "argv",
        [["frobnicate"], ["fit", "--k", "NaNsense"], []],
    )
    def test_usage_errors_exit_1(self, argv, capsys):
        assert cli.main(argv) == 1
        capsys.readouterr()

    def test_missing_train_dir_exits_2(self, capsys):
        assert cli.main(["fit", "--train", "/definitely/not/here"]) == 2
        assert "not found" in capsys.readouterr().err

    def test_malformed_datum_reports_pointer(self, workspace, tmp_path, capsys):
        bad = tmp_path / "bad"
        bad.mkdir()
        write_doc(bad, {"id": "x", "label": 5, "tokens": [[1.0]], "edges": []},
                  "x.json")
        rc = cli.main(["fit", "--train", str(bad), "--k", "2", "--r", "0",
                       "--output", str(tmp_path / "m")])
        assert rc == 2
        assert "/label" in capsys.readouterr().err

    def test_config_file_supplies_defaults(self, workspace, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({
            "train": str(workspace / "data/train"),
            "k": 5, "r": 1, "output": str(tmp_path / "model-cfg"),
        }))
        rc = cli.main(["fit", "--config", str(cfg)])
        assert rc == 0
        assert (tmp_path / "model-cfg/kernel.json").read_bytes() == \
            (workspace / "model/kernel.json").read_bytes()


class TestAlphaParsing:
    @pytest.mark.parametrize(
        "raw, expected",
        [("none", None), ("inf", None), ("INFINITY", None), ("off", None),
         ("0.05", 0.05), ("1", None), ("1.5", None), (0.01, 0.01),
         (None, None), (float("inf"), None)],
    )
    def test_sentinels(self, raw, expected):
        assert cli._parse_alpha(raw) == expected
