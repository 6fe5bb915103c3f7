import json

import numpy as np
import pytest
import scipy.sparse as sp

from multistable import lindblad, models
from multistable.algebra import DimensionError, devectorize, vectorize
from multistable.lindblad import LindbladModel, ModelError, build_liouvillian

from conftest import ginibre


def random_model(rng, d=3, k=2):
    h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    ops = [rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for _ in range(k)]
    return LindbladModel(d, h + h.conj().T, tuple((o, 0.3 + j) for j, o in enumerate(ops)))


def test_single_qubit_by_hand():
    # basis (|e>, |g>), sigma_- = |g><e|, H = w |e><e|; vec = (r00, r10, r01, r11)
    g, w = 0.7, 1.3
    sm = np.array([[0, 0], [1, 0]])
    sop = build_liouvillian(LindbladModel(2, np.diag([w, 0]), ((sm, g),)))
    expect = np.array([
        [-g, 0, 0, 0],
        [0, -g / 2 + 1j * w, 0, 0],
        [0, 0, -g / 2 - 1j * w, 0],
        [g, 0, 0, 0],
    ])
    assert np.allclose(sop.dense(), expect, atol=1e-15)


def test_matches_direct_rhs(rng):
    m = random_model(rng)
    sop = build_liouvillian(m)
    rho = ginibre(rng, 3)
    assert np.allclose(lindblad.apply(sop, rho), m.rhs(rho), atol=1e-12)
    assert lindblad.trace_preservation_residual(sop) < 1e-12


def test_sparse_and_dense_agree(rng):
    m = random_model(rng, d=4)
    dense = build_liouvillian(m)
    sparse = build_liouvillian(m, dense_threshold=1)
    assert not dense.sparse and sparse.sparse
    assert np.allclose(dense.matrix, sparse.matrix.toarray())
    v = vectorize(ginibre(rng, 4))
    assert np.allclose(dense @ v, sparse @ v)


def test_zero_rate_skipped_and_hermitian_flag():
    ops = models.two_qubit_ops()
    m = LindbladModel(4, None, ((ops["Sm"], 1.0), (ops["Sp"], 0.0)))
    assert np.allclose(build_liouvillian(m).matrix, build_liouvillian(models.two_qubit_decay()).matrix)
    assert build_liouvillian(models.two_qubit_balanced()).hermitian_flag
    assert not build_liouvillian(models.two_qubit_decay()).hermitian_flag


def test_spectrum_is_stable(rng):
    sop = build_liouvillian(random_model(rng))
    assert lindblad.spectrum_warning(sop) < 1e-9


def test_model_validation():
    with pytest.raises(ModelError):
        LindbladModel(0)
    with pytest.raises(ModelError):
        LindbladModel(2, np.array([[0, 1], [0, 0]]))
    with pytest.raises(DimensionError):
        LindbladModel(2, np.eye(3))
    with pytest.raises(ModelError):
        LindbladModel(2, None, ((np.eye(2), -1.0),))
    with pytest.raises(DimensionError):
        lindblad.apply(build_liouvillian(models.single_qubit_decay()), np.eye(3))


def test_json_roundtrip(tmp_path, rng):
    m = random_model(rng)
    path = tmp_path / "m.json"
    lindblad.save_model(m, path)
    back = lindblad.load_model(path)
    assert back.dim == m.dim
    assert np.array_equal(build_liouvillian(back).matrix, build_liouvillian(m).matrix)


def test_json_duplicates_summed_and_h_optional():
    doc = {"schema_version": 1, "dim": 2,
           "jumps": [{"rate": 1.0, "triplets": [[1, 0, 0.5, 0.0], [1, 0, 0.5, 0.0]]}]}
    m = lindblad.model_from_dict(doc)
    assert m.hamiltonian.nnz == 0
    assert m.jumps[0][0].toarray()[1, 0] == 1.0


@pytest.mark.parametrize("doc", [
    {"dim": 2},
    {"schema_version": 2, "dim": 2},
    {"schema_version": 1},
    {"schema_version": 1, "dim": 2, "jumps": [{"rate": 1.0, "triplets": [[0, 5, 1.0, 0.0]]}]},
    {"schema_version": 1, "dim": 2, "jumps": [{"rate": 1.0, "triplets": [[0.5, 0, 1.0, 0.0]]}]},
    {"schema_version": 1, "dim": 2, "hamiltonian": {"triplets": "x"}},
    [],
])
def test_bad_documents(doc):
    with pytest.raises(ModelError):
        lindblad.model_from_dict(doc)


def test_invalid_json_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ModelError):
        lindblad.load_model(p)
    p.write_text(json.dumps({"schema_version": 1, "dim": 2}))
    assert lindblad.load_model(p).dim == 2


def test_apply_devectorizes(rng):
    sop = build_liouvillian(models.two_qubit_driven())
    rho = ginibre(rng, 4)
    assert np.allclose(lindblad.apply(sop, rho), devectorize(sop.matrix @ vectorize(rho)))
    assert sp.issparse(sop.csr())
