"""Round-trip gate: emitted files must satisfy the downstream strict loader."""

from pathlib import Path

import numpy as np
import pytest

from conftest import record_acceptance

import prospect
import prospect.io as pio
from prospect_exporter.export import ExportJob, export


def check(number: int, description: str, ok: bool, detail: str) -> None:
    record_acceptance(number, description, ok, detail)
    print(f"criterion {number} {'PASS' if ok else 'FAIL'}: {description}: {detail}")
    assert ok, f"criterion {number} failed: {detail}"


@pytest.mark.acceptance
def test_criterion_11_exporter_round_trip(tmp_path):
    raw = tmp_path / "raw"
    raw.mkdir()
    (raw / "toy.txt").write_text("First sentence. Second sentence. Third sentence.")
    (raw / "peer.txt").write_text(
        "Alpha starts. Beta follows. Gamma continues. Delta closes."
    )
    labels = tmp_path / "labels.csv"
    labels.write_text("id,label\ntoy,1\npeer,0\n")
    marks = tmp_path / "marks.csv"
    marks.write_text("id,vertex_id\ntoy,1\n")
    out = tmp_path / "out"

    job = ExportJob(
        inputs=tuple(sorted(raw.glob("*.txt"))),
        kind="text",
        labels_path=labels,
        output_dir=out,
        encoder_name="hash:16",
        annotations_path=marks,
        hop=2,
    )
    export(job)

    # every emitted file must pass the strict loader, not a relaxed re-parse
    data = pio.load_dataset(out)
    by_id = {d.datum_id: d for d in data}
    loader_ok = set(by_id) == {"toy", "peer"}

    toy = by_id["toy"]
    topo_ok = (
        toy.graph.vertex_count == 3
        and {tuple(e) for e in toy.graph.edges} == {(0, 1), (0, 2), (1, 2)}
    )
    label_ok = toy.label == 1 and by_id["peer"].label == 0
    mask_ok = toy.mask is not None and list(toy.mask) == [False, True, False]
    finite_ok = all(np.isfinite(d.graph.embeddings).all() for d in data)

    # the attribution package must not know the exporter exists
    primary_root = Path(prospect.__file__).parent
    leaks = [
        p.name
        for p in primary_root.rglob("*.py")
        if "prospect_exporter" in p.read_text()
    ]
    independent_ok = leaks == []

    ok = loader_ok and topo_ok and label_ok and mask_ok and finite_ok and independent_ok
    check(
        11,
        "exporter round-trip through the strict loader",
        ok,
        f"loaded={sorted(by_id)}, toy edges hop-2 {{01,02,12}}={topo_ok}, "
        f"mask={mask_ok}, finite={finite_ok}, no reverse dependency={independent_ok}",
    )


@pytest.mark.acceptance
def test_criterion_11_sidecar_round_trip(tmp_path):
    raw = tmp_path / "raw"
    raw.mkdir()
    (raw / "big.txt").write_text("One long part. Another part. Final part.")
    labels = tmp_path / "labels.csv"
    labels.write_text("id,label\nbig,0\n")
    out = tmp_path / "out"
    export(
        ExportJob(
            inputs=(raw / "big.txt",),
            kind="text",
            labels_path=labels,
            output_dir=out,
            encoder_name="hash:16",
            sidecar=True,
        )
    )
    datum = pio.load_datum(out / "big.json")
    assert datum.graph.vertex_count == 3
    assert datum.graph.dim == 16
