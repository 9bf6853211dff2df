"""Writes tiny.idx3 / tiny.idx1: five 4x4 images whose pixel k of image i is
(17 * i + 3 * k) % 256, labels [0, 1, 2, 1, 0]. Also a label file whose count
disagrees with the images (short.idx1)."""
import struct
from pathlib import Path

here = Path(__file__).parent
n, side = 5, 4
pixels = bytes((17 * i + 3 * k) % 256 for i in range(n) for k in range(side * side))
(here / "tiny.idx3").write_bytes(struct.pack(">IIII", 0x803, n, side, side) + pixels)
(here / "tiny.idx1").write_bytes(struct.pack(">II", 0x801, n) + bytes([0, 1, 2, 1, 0]))
(here / "short.idx1").write_bytes(struct.pack(">II", 0x801, 3) + bytes([0, 1, 2]))
