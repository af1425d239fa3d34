import numpy as np
import pytest

from spreadlab.ensemble import EnsembleParams, sample_biregular
from spreadlab.errors import FileFormatError
from spreadlab.fileio import read_graph, read_matrix, write_graph, write_matrix


def test_matrix_round_trip_bit_exact(tmp_path):
    A = sample_biregular(EnsembleParams(16, 8, 6, 3, seed=1))
    path = tmp_path / "a.bireg"
    write_matrix(path, A)
    text = path.read_text()
    assert text.splitlines()[0] == "BIREG 16 8 6 3"
    B = read_matrix(path)
    assert A == B and (B.s, B.t) == (6, 3)
    write_matrix(tmp_path / "b.bireg", B)
    assert (tmp_path / "b.bireg").read_text() == text


def test_graph_round_trip(tmp_path, k42):
    write_graph(tmp_path / "g.txt", k42)
    assert read_graph(tmp_path / "g.txt") == k42


@pytest.mark.parametrize("body", [
    "BIREG 2 1 2 1\n1 0 +1\n0 0 -1\n",   # unsorted
    "BIREG 2 1 2 1\n0 0 +1\n0 0 -1\n",   # repeated
    "BIRAG 2 1 2 1\n0 0 +1\n1 0 -1\n",   # bad magic
    "BIREG 2 1 2 1\n0 0 +1 7\n1 0 -1 7\n",  # extra field
])
def test_malformed_files(tmp_path, body):
    p = tmp_path / "bad.bireg"
    p.write_text(body)
    with pytest.raises(FileFormatError):
        read_matrix(p)
