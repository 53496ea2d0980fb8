"""Plain-text and VTK export of meshes and fields."""
import numpy as np

_VTK_TRIANGLE = 5
_VTK_QUAD = 9


def write_vtk(path, nodes, cells, point_data=None, title="crypthom"):
    """Legacy ASCII unstructured-grid file with optional scalar point data."""
    nodes = np.asarray(nodes, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    ctype = {3: _VTK_TRIANGLE, 4: _VTK_QUAD}[cells.shape[1]]
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(nodes)} double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in nodes]
    lines.append(f"CELLS {len(cells)} {cells.size + len(cells)}")
    lines += [" ".join(map(str, [len(c)] + list(c))) for c in cells]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += [str(ctype)] * len(cells)
    if point_data:
        lines.append(f"POINT_DATA {len(nodes)}")
        for name, values in point_data.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{v:.17g}" for v in np.asarray(values, dtype=float)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_mesh_text(path, nodes, cells):
    """``nodes N`` then ``id x y`` lines, ``elements E`` then ``id n0 n1 ...`` lines."""
    with open(path, "w") as fh:
        fh.write(f"nodes {len(nodes)}\n")
        for i, (x, y) in enumerate(nodes):
            fh.write(f"{i} {x:.17g} {y:.17g}\n")
        fh.write(f"elements {len(cells)}\n")
        for i, c in enumerate(cells):
            fh.write(f"{i} {' '.join(map(str, c))}\n")


def read_mesh_text(path):
    with open(path) as fh:
        tokens = [ln.split() for ln in fh if ln.strip()]
    nn = int(tokens[0][1])
    nodes = np.array([[float(t[1]), float(t[2])] for t in tokens[1:1 + nn]])
    ne = int(tokens[1 + nn][1])
    cells = np.array([[int(v) for v in t[1:]] for t in tokens[2 + nn:2 + nn + ne]], dtype=np.int64)
    return nodes, cells


def write_trajectory_vtk(outdir, prefix, traj):
    files = []
    for t, C, p in zip(traj.times, traj.C, traj.p):
        f = outdir / f"{prefix}_t{t:.6g}.vtk"
        write_vtk(f, traj.mesh.nodes, traj.mesh.elements, {"C": C, "p": p}, title=f"{prefix} t={t:g}")
        files.append(f)
    return files
