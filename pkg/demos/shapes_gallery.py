"""Print the binary shape catalog used by the image-style generator."""

from tracereg import SHAPE_CATALOG, shape_matrix
from tracereg.prox import svd

for name in SHAPE_CATALOG:
    m = shape_matrix(name, 32)
    print(f"{name}  (rank {svd(m).rank})")
    step = 2  # halve the resolution so a row fits a terminal line
    for row in m[::step, ::step]:
        print("  " + "".join("#" if v else "." for v in row))
    print()
