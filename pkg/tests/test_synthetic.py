import json

import numpy as np
import pytest

from seiscurate.segy_io import read_segy
from seiscurate.synthetic import (Layer, SyntheticSpecError, SyntheticSurveySpec, checkshots_for,
                                  make_synthetic_survey, ricker, three_layer_spec)
from seiscurate.well_io import parse_checkshot, parse_las, read_manifest


def flat_spec(layers, **kw):
    spec = SyntheticSurveySpec(layers=layers, wells=[], n_inline=6, n_crossline=6, **kw)
    g = spec.geometry()
    spec.wells = [("A", *g.index_to_xy([1.0, 1.0])), ("B", *g.index_to_xy([4.0, 4.0]))]
    return spec


def test_one_layer_checkshot_row():
    spec = flat_spec([Layer(1000.0, 2000.0)])
    cs = checkshots_for(spec, *spec.wells[0][1:])
    k = list(cs.depth_m).index(1000.0)
    assert cs.twt_s[k] == pytest.approx(1.0, rel=1e-15)


def test_two_layer_twt():
    spec = flat_spec([Layer(750.0, 1500.0)], halfspace_velocity=3000.0)
    assert spec.twt([2250.0], *spec.wells[0][1:])[0] == pytest.approx(2.0, rel=1e-15)


def test_spec_validation():
    spec = flat_spec([Layer(1000.0, 2000.0)])
    spec.wells = []
    with pytest.raises(SyntheticSpecError, match="two wells"):
        spec.validate()
    spec = flat_spec([Layer(1000.0, 2000.0)])
    spec.wells.append(("far", 0.0, 0.0))
    with pytest.raises(SyntheticSpecError, match="outside"):
        spec.validate()
    with pytest.raises(SyntheticSpecError):
        flat_spec([]).validate()
    with pytest.raises(SyntheticSpecError):
        flat_spec([Layer(1000.0, -5.0)]).validate()


def test_ricker_peak():
    assert ricker(0.0, 25.0) == 1.0
    assert ricker(np.array([0.1]), 25.0)[0] < 1e-6


def test_dipping_interfaces():
    spec = three_layer_spec()
    c = spec.center()
    assert np.allclose(spec.interface_depths(*c), [600.0, 1400.0, 2600.0])
    d = spec.interface_depths(c[0] + 1000.0, c[1])
    assert np.allclose(d - [600.0, 1400.0, 2600.0], 15.0)


def test_fixture_files(synthetic_survey):
    s = synthetic_survey
    header, traces = read_segy(s.segy)
    spec = three_layer_spec()
    assert header.trace_count == 48 * 48 - len(spec.dropped_traces)
    present = {(h.inline_no, h.crossline_no) for h, _ in traces}
    assert not present & set(spec.dropped_traces)
    manifest = read_manifest(s.manifest)
    assert sorted(manifest) == ["W1", "W2", "W3", "W4"]
    truth = json.loads(s.truth.read_text())
    for wid, entry in manifest.items():
        cs = parse_checkshot(entry.checkshot, entry.checkshot_units)
        ifaces = truth["wells"][wid]["interface_depths_m"]
        twt = np.interp(ifaces, cs.depth_m, cs.twt_s)
        assert np.allclose(twt, truth["wells"][wid]["interface_twt_s"], rtol=1e-12)
    gr = parse_las(manifest["W2"].las).curve("GR")
    gap = (gr.depth_m >= 900) & (gr.depth_m <= 1000)
    assert gr.mask[gap].all() and not gr.mask[~gap].any()


def test_spec_dict_roundtrip(synthetic_survey):
    d = json.loads(synthetic_survey.truth.read_text())["spec"]
    spec = SyntheticSurveySpec.from_dict(d)
    assert spec == three_layer_spec()


def test_config_overrides(tmp_path):
    spec = flat_spec([Layer(300.0, 2000.0)], t_max=0.6)
    made = make_synthetic_survey(spec, tmp_path, {"velocity": {"smoothing": 1e-9}, "survey_id": "x"})
    cfg = json.loads(made.config.read_text())
    assert cfg["velocity"] == {"smoothing": 1e-9} and cfg["survey_id"] == "x"
