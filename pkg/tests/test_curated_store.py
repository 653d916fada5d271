import csv
import json

import h5py
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seiscurate.curated_store import (FORMAT_VERSION, QC_HEADER, CuratedSection, QcArtifacts, StoreError, TieCurve,
                                      WellTie, content_hash, read_hdf5, write_hdf5, write_qc_report)


def make_section(sid="L0", seed=0, n_wells=1, n_curves=2):
    rng = np.random.default_rng(seed)
    ties = []
    for w in range(n_wells):
        curves = {f"C{c}": TieCurve(rng.normal(size=512).astype(np.float32), rng.random(512) < 0.1, "u")
                  for c in range(n_curves)}
        ties.append(WellTie(f"W{w}", int(rng.integers(0, 256)), curves))
    return CuratedSection(sid, rng.normal(size=(256, 512)).astype(np.float32), ties, crs_tag="EPSG:32631",
                          provenance={"survey_id": "s", "config_hash": "abc"})


def assert_sections_equal(a, b):
    assert a.section_id == b.section_id
    assert np.array_equal(a.seismic, b.seismic)
    assert (a.dz, a.dx, a.crs_tag, a.provenance) == (b.dz, b.dx, b.crs_tag, b.provenance)
    assert [t.well_id for t in a.well_ties] == [t.well_id for t in b.well_ties]
    for ta, tb in zip(a.well_ties, b.well_ties):
        assert ta.lateral_index == tb.lateral_index
        assert list(ta.curves) == list(tb.curves)
        for m in ta.curves:
            assert np.array_equal(ta.curves[m].values, tb.curves[m].values)
            assert np.array_equal(ta.curves[m].mask, tb.curves[m].mask)
            assert ta.curves[m].unit == tb.curves[m].unit


def test_one_section_layout(tmp_path):
    s = make_section()
    write_hdf5([s], tmp_path / "a.h5", config_hash="abc")
    with h5py.File(tmp_path / "a.h5") as f:
        names = []
        f.visit(names.append)
        assert sorted(names) == ["sections", "sections/L0", "sections/L0/seismic", "sections/L0/wells",
                                 "sections/L0/wells/W0", "sections/L0/wells/W0/C0", "sections/L0/wells/W0/C1"]
        assert f["sections/L0/seismic"].dtype == np.float32
        assert f["sections/L0/seismic"].attrs["dz"] == 12.5
        assert f.attrs["format"] == FORMAT_VERSION
    (back,), manifest = read_hdf5(tmp_path / "a.h5")
    assert_sections_equal(s, back)
    assert manifest["counts"] == {"sections": 1, "well_ties": 1}


def test_empty_file(tmp_path):
    write_hdf5([], tmp_path / "e.h5")
    sections, manifest = read_hdf5(tmp_path / "e.h5")
    assert sections == [] and manifest["section_ids"] == [] and manifest["counts"]["sections"] == 0


def test_duplicate_id_before_write(tmp_path):
    with pytest.raises(StoreError, match="duplicate"):
        write_hdf5([make_section("X"), make_section("X", 1)], tmp_path / "d.h5")
    assert not (tmp_path / "d.h5").exists()


def test_invalid_shape_and_tie(tmp_path):
    s = make_section()
    s.seismic = s.seismic[:255]
    with pytest.raises(StoreError):
        write_hdf5([s], tmp_path / "x.h5")
    s = make_section()
    s.well_ties[0].lateral_index = 256
    with pytest.raises(StoreError):
        write_hdf5([s], tmp_path / "x.h5")


def test_unwritable(tmp_path):
    with pytest.raises(StoreError):
        write_hdf5([], tmp_path / "missing" / "x.h5")


def test_tampered_shape(tmp_path):
    p = tmp_path / "t.h5"
    write_hdf5([make_section()], p)
    with h5py.File(p, "a") as f:
        del f["sections/L0/seismic"]
        f["sections/L0"].create_dataset("seismic", data=np.zeros((255, 512), np.float32))
        for k in ("dz", "dx", "crs_tag", "provenance"):
            f["sections/L0/seismic"].attrs[k] = 0 if k in ("dz", "dx") else "{}"
    with pytest.raises(StoreError, match="shape"):
        read_hdf5(p)


def test_missing_manifest_and_version(tmp_path):
    p = tmp_path / "m.h5"
    write_hdf5([make_section()], p)
    with h5py.File(p, "a") as f:
        del f.attrs["manifest"]
    with pytest.raises(StoreError, match="manifest"):
        read_hdf5(p)
    with h5py.File(p, "a") as f:
        f.attrs["format"] = "openseisml-curated/0"
    with pytest.raises(StoreError, match="format"):
        read_hdf5(p)


def test_manifest_mismatch(tmp_path):
    p = tmp_path / "mm.h5"
    write_hdf5([make_section()], p)
    with h5py.File(p, "a") as f:
        m = json.loads(f.attrs["manifest"])
        m["counts"]["sections"] = 2
        f.attrs["manifest"] = json.dumps(m)
    with pytest.raises(StoreError, match="manifest"):
        read_hdf5(p)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.integers(0, 2**31 - 1))
def test_roundtrip_property(tmp_path_factory, n_sections, n_wells, n_curves, seed):
    secs = [make_section(f"S{k}", seed + k, n_wells, n_curves) for k in range(n_sections)]
    p = tmp_path_factory.mktemp("h5") / "r.h5"
    write_hdf5(secs, p, created="2020-01-01T00:00:00Z")
    back, manifest = read_hdf5(p)
    assert len(back) == len(secs) == manifest["counts"]["sections"]
    for a, b in zip(secs, back):
        assert_sections_equal(a, b)


def test_hash_ignores_timestamp(tmp_path):
    s = [make_section()]
    write_hdf5(s, tmp_path / "a.h5", created="2020-01-01T00:00:00Z")
    write_hdf5(s, tmp_path / "b.h5", created="2024-06-01T12:00:00Z")
    assert content_hash(tmp_path / "a.h5") == content_hash(tmp_path / "b.h5")
    s[0].seismic[0, 0] += 1
    write_hdf5(s, tmp_path / "c.h5", created="2020-01-01T00:00:00Z")
    assert content_hash(tmp_path / "c.h5") != content_hash(tmp_path / "a.h5")


# ------------------------------------------------------------------------ QC

def read_csv(p):
    with open(p, newline="") as fh:
        return list(csv.reader(fh))


def test_qc_one_well_schema(tmp_path):
    art = QcArtifacts(qc_rows=[("W1", 500.0, 0.5, 2000.0, 2000.0, 0.0), ("W1", 1000.0, 0.9, 2222.0, 2221.0, 4.5e-4)])
    write_qc_report(art, tmp_path)
    rows = read_csv(tmp_path / "qc_velocity_W1.csv")
    assert rows[0] == QC_HEADER == ["depth_m", "twt_s", "v_checkshot", "v_interp", "rel_err"]
    assert len(rows) == 3 and float(rows[2][4]) == 4.5e-4


def test_qc_empty(tmp_path):
    write_qc_report(QcArtifacts(), tmp_path)
    summary = json.loads((tmp_path / "qc_summary.json").read_text())
    assert summary["n_wells"] == 0 and summary["n_samples"] == 0 and summary["max_rel_err"] == 0.0
    assert read_csv(tmp_path / "qc_velocity.csv") == [["well_id"] + QC_HEADER]


def test_qc_two_wells_grouped(tmp_path):
    art = QcArtifacts(qc_rows=[("A", 1.0, 0.1, 2e3, 2e3, 0.0), ("B", 1.0, 0.1, 2e3, 2.1e3, 0.05),
                               ("A", 2.0, 0.2, 2e3, 2e3, 0.0)],
                      clamp_counts={"velocity": 3}, duplicate_traces=2,
                      hull={"type": "Polygon", "coordinates": [[[0, 0], [1, 0], [0, 1], [0, 0]]]})
    write_qc_report(art, tmp_path)
    rows = read_csv(tmp_path / "qc_velocity.csv")[1:]
    assert [r[0] for r in rows] == ["A", "A", "B"]
    summary = json.loads((tmp_path / "qc_summary.json").read_text())
    assert summary["max_rel_err"] == 0.05 and summary["clamp_counts"] == {"velocity": 3}
    assert summary["duplicate_traces"] == 2 and summary["hull"]["type"] == "Polygon"


def test_qc_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(StoreError):
        write_qc_report(QcArtifacts(), blocker / "qc")
