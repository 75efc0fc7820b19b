"""Text-export determinism and schema tests."""

import numpy as np

from levipick import exports
from levipick.acoustics import ArrayState, SourceState
from levipick.dynamics import BasinMap
from levipick.gorkov import GridSpec, Particle, TrapNode, sample_grid


def _small_grid(constants):
    srcs = [SourceState(position=(0, 0, 0), unit_normal=(0, 0, 1)),
            SourceState(position=(0, 0, 0.06), unit_normal=(0, 0, -1))]
    arr = ArrayState(srcs, constants)
    spec = GridSpec(mins=(-0.002, 0.0, 0.02), maxs=(0.002, 0.0, 0.04),
                    shape=(3, 1, 5))
    return sample_grid(arr, spec, Particle())


def test_field_grid_round_trip_and_determinism(tmp_path, constants):
    fg = _small_grid(constants)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    exports.write_field_grid(fg, a)
    exports.write_field_grid(fg, b)
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().strip().splitlines()
    assert lines[0] == "# x,y,z,U,Fx,Fy,Fz,abs_p"
    assert len(lines) == 1 + 15
    cells = lines[1].split(",")
    assert len(cells) == 8
    float(cells[3])  # parses as a number


def test_write_nodes_schema(tmp_path):
    node = TrapNode(position=(0.0, 0.0, 0.01), potential=-1e-10,
                    stability="stable", hessian_eigenvalues=(1e-6, 1e-6, 2e-6))
    path = tmp_path / "n.csv"
    exports.write_nodes([node], path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("# x,y,z,U,stability")
    assert ",stable," in lines[1]


def test_write_basin_and_trajectory(tmp_path):
    classes = np.full((2, 2), "unreachable", dtype=object)
    classes[0, 0] = "pickable"
    basin = BasinMap(xs=np.array([0.0, 0.005]), ys=np.array([0.0, 0.005]),
                     classes=classes, spacing=0.005)
    bpath = tmp_path / "b.csv"
    exports.write_basin(basin, bpath)
    text = bpath.read_text()
    assert "pickable" in text and "unreachable" in text

    tpath = tmp_path / "t.csv"
    exports.write_trajectory(np.zeros((3, 3)), tpath)
    lines = tpath.read_text().strip().splitlines()
    assert lines[0] == "# step,x,y,z"
    assert lines[1].startswith("0,")


def test_write_axial_profile(tmp_path):
    path = tmp_path / "p.csv"
    exports.write_axial_profile([0.01, 0.02], [1e-9, 2e-9], [1e-6, -1e-6], path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "# z,U,Fz"
    assert len(lines) == 3
