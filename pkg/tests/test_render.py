import xml.etree.ElementTree as ET

import pytest

from tritraj.render import render_svg, searched_values

TRACE = [
    {"event": "solved", "sequence": [0], "V": 1.0, "lower_bound": 4.0},
    {"event": "solved", "sequence": [0, 1], "V": 2.0, "lower_bound": 4.5},
    {"event": "solved", "sequence": [0, 2], "V": 1.5, "lower_bound": 3.0},
    {"event": "infeasible", "sequence": [0, 3]},
    {"event": "solved", "sequence": [0, 2, 1], "V": 2.5, "lower_bound": 3.5},
    {"event": "solved", "sequence": [0, 1, 4], "Q": 5.0},
    {"event": "terminated", "sequence": [0, 1, 4], "Q": 5.0},
]


def test_searched_triangles_take_smallest_lower_bound():
    assert searched_values(TRACE) == {0: 4.0, 1: 3.5, 2: 3.0, 4: 5.0}


def test_plan_triangles_show_value_along_the_plan():
    values = searched_values(TRACE, final=(0, 1, 4))
    assert values[0] == pytest.approx(1.0)
    assert values[1] == pytest.approx(2.0)
    assert values[4] == pytest.approx(5.0)
    assert values[2] == pytest.approx(3.0)


def test_plan_without_solved_prefix_keeps_lower_bound():
    values = searched_values(TRACE, final=(0, 2, 1, 5))
    assert values[1] == pytest.approx(2.5)
    assert 5 not in values


def test_empty_trace_renders_plain_plan(square, tmp_path):
    doc, t, _ = square
    path = render_svg(doc, t, tmp_path / "plain.svg")
    assert ET.parse(path).getroot().tag.endswith("svg")


def test_trace_colours_the_plan(square, tmp_path):
    doc, t, _ = square
    trace = [{"event": "solved", "sequence": [i], "V": float(i), "lower_bound": float(i) + 1.0}
             for i in range(len(t.triangles))]
    path = render_svg(doc, t, tmp_path / "plan.svg", trace=trace, final=(0,))
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")
    assert len(list(root.iter())) > 10
