from __future__ import annotations

import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from depthmon import csvio
from depthmon.charting import SignalRecord
from depthmon.config import RunConfig, expand_methods, load_config_file
from depthmon.errors import ConfigError, ParseError
from depthmon.reference import EmbeddingRecord, Phase
from depthmon.svg import render_chart_svg

SVG = "{http://www.w3.org/2000/svg}"

HAND_WRITTEN = """index,phase,true_label,predicted_label,softmax_0,softmax_1,e_0,e_1
0,phase1,0,0,0.9,0.1,1.5,-2.0
1,phase2_ic,1,0,0.6,0.4,0.25,3.0
2,phase2_ooc,,1,,,-1e-3,7
"""


def write(tmp_path, text, name="emb.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# ---------------------------------------------------------------- embeddings CSV


class TestEmbeddingsCsv:
    def test_header_only(self, tmp_path):
        assert csvio.parse_embeddings_csv(write(tmp_path, "index,phase,true_label,predicted_label,e_0\n")) == []

    def test_hand_written_file(self, tmp_path):
        records = csvio.parse_embeddings_csv(write(tmp_path, HAND_WRITTEN))
        assert records == [
            EmbeddingRecord(0, [1.5, -2.0], 0, Phase.PHASE_I, 0, [0.9, 0.1]),
            EmbeddingRecord(1, [0.25, 3.0], 0, Phase.PHASE_II_IN_CONTROL, 1, [0.6, 0.4]),
            EmbeddingRecord(2, [-1e-3, 7.0], 1, Phase.PHASE_II_OUT_OF_CONTROL, None, None),
        ]

    @pytest.mark.parametrize(
        "row,line,fragment",
        [
            ("0,phase1,,0,0.5,0.5,1,2", 2, "true label"),
            ("0,phase9,0,0,0.5,0.5,1,2", 2, "phase"),
            ("0,phase1,0,0,0.5,0.5,1", 2, "cells"),
            ("0,phase1,0,0,0.5,0.5,1,abc", 2, "numeric"),
            ("0,phase1,0,0,0.5,,1,2", 2, "softmax"),
            ("0,phase1,0,0,0.5,0.5,1,nan", 2, "finite"),
        ],
    )
    def test_errors_carry_line_numbers(self, tmp_path, row, line, fragment):
        header = "index,phase,true_label,predicted_label,softmax_0,softmax_1,e_0,e_1\n"
        with pytest.raises(ParseError) as info:
            csvio.parse_embeddings_csv(write(tmp_path, header + row + "\n"))
        assert info.value.line == line
        assert f"line {line}" in str(info.value)
        assert fragment in str(info.value)

    def test_error_on_later_line(self, tmp_path):
        bad = HAND_WRITTEN + "3,phase2_ic,0,0,0.5,0.5,1\n"
        with pytest.raises(ParseError) as info:
            csvio.parse_embeddings_csv(write(tmp_path, bad))
        assert info.value.line == 5

    @pytest.mark.parametrize(
        "header",
        ["idx,phase,true_label,predicted_label,e_0", "index,phase,true_label,predicted_label", "index,phase,true_label,predicted_label,e_1"],
    )
    def test_bad_headers(self, tmp_path, header):
        with pytest.raises(ParseError) as info:
            csvio.parse_embeddings_csv(write(tmp_path, header + "\n"))
        assert info.value.line == 1

    @given(
        st.lists(
            st.tuples(
                st.sampled_from(list(Phase)),
                st.integers(0, 2),
                st.lists(st.floats(-1e9, 1e9, allow_nan=False), min_size=3, max_size=3),
                st.booleans(),
            ),
            min_size=1,
            max_size=15,
        )
    )
    def test_round_trip(self, tmp_path_factory, rows):
        records = []
        for i, (phase, label, emb, with_soft) in enumerate(rows):
            soft = np.eye(3)[label] * 0.5 + np.full(3, 0.5 / 3) if with_soft else None
            true = label if phase is not Phase.PHASE_II_OUT_OF_CONTROL else None
            records.append(EmbeddingRecord(i, emb, label, phase, true, soft))
        path = tmp_path_factory.mktemp("rt") / "e.csv"
        csvio.write_embeddings_csv(path, records)
        assert csvio.parse_embeddings_csv(path) == records


class TestSignalsCsv:
    def test_round_trip(self, tmp_path):
        signals = [
            SignalRecord(0, 0, 0.125, False, Phase.PHASE_I),
            SignalRecord(5, -1, 0.01, True, Phase.PHASE_II_OUT_OF_CONTROL),
        ]
        path = tmp_path / "s.csv"
        csvio.write_signals_csv(path, signals)
        assert path.read_text().splitlines()[0] == "index,class_used,statistic,signal,phase"
        assert csvio.read_signals_csv(path) == signals

    def test_rejects_bad_signal_cell(self, tmp_path):
        path = write(tmp_path, "index,class_used,statistic,signal,phase\n0,0,0.5,yes,phase1\n", "s.csv")
        with pytest.raises(ParseError) as info:
            csvio.read_signals_csv(path)
        assert info.value.line == 2


def test_safe_label():
    assert csvio.safe_label("PDa2") == "PDa2"
    assert csvio.safe_label("a b/c") == "a_b_c"


# ---------------------------------------------------------------- config


config_values = st.fixed_dictionaries(
    {"command": st.sampled_from(["toy", "monitor", "timing", "montecarlo"])},
    optional={
        "alpha": st.floats(0.001, 0.5),
        "chart": st.sampled_from(["r", "q", "Q"]),
        "seed": st.integers(0, 2**31),
        "methods": st.lists(st.sampled_from(["MD", "pd2", "HDr", "LOF", "depths", "nof", "kdeos"]), max_size=3),
        "reference": st.sampled_from(["confidence", "random", "merged"]),
        "size": st.integers(5, 100),
        "ridge": st.booleans(),
        "runs": st.integers(2, 5),
        "smoothing": st.floats(0, 3),
        "lof_k": st.integers(1, 30),
    },
)


class TestRunConfig:
    @given(config_values)
    def test_render_parse_round_trip(self, values):
        cfg = RunConfig.from_dict(values)
        assert RunConfig.parse(cfg.render()) == cfg
        assert RunConfig.parse(cfg.render()).render() == cfg.render()

    def test_defaults(self):
        cfg = RunConfig("toy")
        assert cfg.methods[0] == "MD" and cfg.n == 1 and cfg.alpha == 0.05
        assert RunConfig("toy", chart="q").n == 5

    @pytest.mark.parametrize(
        "values",
        [
            {"command": "toy", "alpha": 0.0},
            {"command": "toy", "alpha": 1.0},
            {"command": "toy", "chart": "x"},
            {"command": "toy", "chart": "q", "n": 1},
            {"command": "toy", "methods": ["PD9"]},
            {"command": "toy", "reference": "best"},
            {"command": "fly"},
            {"command": "toy", "colour": "red"},
            {"command": "montecarlo", "runs": 1},
        ],
    )
    def test_rejects(self, values):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(values)

    def test_expand_methods(self):
        assert expand_methods(["md,pda2", "LOF", "MD"]) == ("MD", "PDa2", "LOF")
        assert len(expand_methods(["all"])) == 14

    def test_load_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"alpha": 0.1}))
        assert load_config_file(p) == {"alpha": 0.1}
        p.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            load_config_file(p)
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config_file(p)
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / "missing.json")


# ---------------------------------------------------------------- SVG


class TestSvg:
    @pytest.fixture
    def signals(self):
        return [
            SignalRecord(0, 0, 0.5, False, Phase.PHASE_I),
            SignalRecord(1, 0, 0.02, True, Phase.PHASE_I),
            SignalRecord(2, 1, 0.7, False, Phase.PHASE_II_IN_CONTROL),
            SignalRecord(3, 1, 0.01, True, Phase.PHASE_II_OUT_OF_CONTROL),
        ]

    def test_structure(self, signals):
        root = ET.fromstring(render_chart_svg(signals, 0.05, "MD <r>", misclassified=[2]))
        by_id = {el.get("id"): el for el in root.iter() if el.get("id")}
        assert {"title", "axes", "ticks", "lcl", "points", "legend"} <= set(by_id)
        assert by_id["title"].text == "MD <r>"
        assert float(by_id["lcl"].get("data-value")) == 0.05
        dots = [c for c in by_id["points"].findall(f"{SVG}circle") if c.get("data-index") is not None]
        assert [int(c.get("data-index")) for c in dots] == [0, 1, 2, 3]
        assert [c.get("data-signal") for c in dots] == ["0", "1", "0", "1"]
        assert {c.get("data-phase") for c in dots} == {"phase1", "phase2_ic", "phase2_ooc"}
        rings = by_id["points"].findall(f"{SVG}circle[@class='misclassified']")
        assert len(rings) == 1
        legend = "".join(t.text for t in by_id["legend"].iter(f"{SVG}text"))
        assert "misclassified" in legend and "LCL" in legend

    def test_lower_points_sit_lower(self, signals):
        root = ET.fromstring(render_chart_svg(signals, 0.05))
        dots = {c.get("data-index"): float(c.get("cy")) for c in root.iter(f"{SVG}circle") if c.get("data-index")}
        lcl_y = float(next(el for el in root.iter() if el.get("id") == "lcl").get("y1"))
        # svg y grows downwards
        assert dots["3"] > lcl_y > dots["2"]

    def test_empty_chart_is_valid(self):
        root = ET.fromstring(render_chart_svg([], 0.2))
        assert root.tag == f"{SVG}svg"
