"""Discretized torus Landau operator: flux, spectra, magnetic translations."""

import numpy as np
import pytest

from magbern.errors import ValidationError
from magbern.landau import GridField
from magbern.lattice import (
    TorusSetup,
    assemble,
    cluster_eigenvalues,
    commutation_check,
    eigensolve,
    flux_condition,
    magnetic_translate,
    translate_array,
    translations_commute,
    validate_flux,
    write_operator_triplets,
)
from util_fields import rng_stream


def small_setup(n_phi=2, L=4.0, N=16):
    return TorusSetup.from_flux(n_phi, (L, L), (N, N))


# -- setup validation -----------------------------------------------------------


def test_flux_quantization_enforced():
    with pytest.raises(ValidationError):
        TorusSetup(L=(4.0, 4.0), B=0.5, N=(16, 16))
    ok = small_setup()
    assert ok.n_phi == 2


def test_flux_conventions():
    assert validate_flux(2 * np.pi * 3 / 16.0, (4.0, 4.0), "area")
    assert validate_flux(1.23, (4.0, 4.0), "difference")  # L2 - L1 = 0
    assert validate_flux(2 * np.pi / 4.0, (4.0, 4.0), "square")
    assert not validate_flux(0.7, (4.0, 4.0), "square")
    with pytest.raises(ValidationError):
        validate_flux(1.0, (4.0, 4.0), "bogus")


def test_minimum_resolution():
    with pytest.raises(ValidationError):
        TorusSetup(L=(4.0, 4.0), B=0.0, N=(3, 8))


# -- assembly ---------------------------------------------------------------------


def test_zero_field_gives_ordinary_periodic_laplacian():
    setup = TorusSetup(L=(4.0, 4.0), B=0.0, N=(8, 8))
    op = assemble(setup)
    m = op.matrix
    assert np.abs(m.sum(axis=1)).max() < 1e-13  # row sums vanish
    sub = eigensolve(op, count=1)
    assert sub.eigenvalues[0] == pytest.approx(0.0, abs=1e-12)
    v = sub.field(0)
    assert np.std(np.abs(v)) < 1e-10  # constant eigenvector


def test_plaquette_phases_carry_constant_flux():
    setup = small_setup(n_phi=3, L=6.0, N=24)
    op = assemble(setup)
    phi = setup.B * setup.spacing[0] * setup.spacing[1]
    expected = np.exp(-1j * phi)
    assert np.max(np.abs(op.plaquette_phases() - expected)) < 1e-13


def test_operator_is_exactly_hermitian():
    setup = small_setup(n_phi=2, L=4.0, N=12)
    rng = rng_stream(41)
    op = assemble(setup, potential=rng.uniform(0, 1, size=(12, 12)))
    diff = (op.matrix - op.matrix.conj().T).tocoo()
    assert diff.nnz == 0 or np.max(np.abs(diff.data)) == 0.0


def test_constant_potential_shifts_spectrum():
    setup = small_setup()
    base = eigensolve(assemble(setup), count=4).eigenvalues
    shifted = eigensolve(
        assemble(setup, potential=np.full(setup.N, 0.7)), count=4
    ).eigenvalues
    assert np.allclose(shifted, base + 0.7, atol=1e-10)


# -- spectra ----------------------------------------------------------------------


@pytest.mark.parametrize("n_phi", [2, 4, 6])
def test_lowest_cluster_degeneracy_equals_flux_quanta(n_phi):
    setup = TorusSetup.from_flux(n_phi, (6.0, 6.0), (48, 48))
    assert max(setup.spacing) * np.sqrt(setup.B) <= 1 / 7.5
    op = assemble(setup)
    sub = eigensolve(op, count=n_phi + 3, dense_threshold=512, seed=3)
    ev = sub.eigenvalues
    b = setup.B
    clusters = cluster_eigenvalues(ev, gap=0.5 * b)
    assert len(clusters[0]) == n_phi
    assert ev[n_phi] - ev[n_phi - 1] > b  # gap to the next cluster
    assert abs(np.mean(clusters[0]) - b) < 0.15 * b
    # next cluster sits near 3B
    assert abs(ev[n_phi] - 3 * b) < 0.5 * b


def test_lowest_cluster_converges_at_second_order():
    errs = []
    for n in (24, 48):
        setup = TorusSetup.from_flux(2, (6.0, 6.0), (n, n))
        sub = eigensolve(assemble(setup), count=2, dense_threshold=256, seed=1)
        errs.append(abs(np.mean(sub.eigenvalues) - setup.B))
    assert 2.5 < errs[0] / errs[1] < 6.0


def test_iterative_matches_dense_solver():
    # count = 4 cuts between degenerate clusters so the subspaces agree
    setup = small_setup(n_phi=2, L=4.0, N=16)
    op = assemble(setup)
    dense = eigensolve(op, count=4)  # dim 256 <= 4096: dense path
    iterative = eigensolve(op, count=4, dense_threshold=64, seed=11)
    assert np.allclose(dense.eigenvalues, iterative.eigenvalues, atol=1e-9)
    # same spectral subspace: projector difference small
    pd = dense.vectors @ dense.vectors.conj().T
    pi = iterative.vectors @ iterative.vectors.conj().T
    cell = setup.spacing[0] * setup.spacing[1]
    assert np.max(np.abs(pd - pi)) * cell < 1e-8


def test_energy_cutoff_selects_cluster():
    setup = TorusSetup.from_flux(2, (6.0, 6.0), (24, 24))
    sub = eigensolve(assemble(setup), energy=2 * setup.B)
    assert sub.dim == 2
    assert np.all(sub.eigenvalues <= 2 * setup.B)


def test_eigenvectors_orthonormal_in_l2():
    setup = small_setup()
    sub = eigensolve(assemble(setup), count=6)
    cell = setup.spacing[0] * setup.spacing[1]
    g = sub.vectors.conj().T @ sub.vectors * cell
    assert np.max(np.abs(g - np.eye(6))) < 1e-10


# -- magnetic translations ---------------------------------------------------------


def test_translate_identity_and_unitarity():
    setup = small_setup(n_phi=2, L=4.0, N=16)
    rng = rng_stream(42)
    v = rng.standard_normal(setup.N) + 1j * rng.standard_normal(setup.N)
    assert np.array_equal(translate_array(setup, v, (0.0, 0.0)), v)
    moved = translate_array(setup, v, (setup.L[0] / 2, 0.0))
    assert np.linalg.norm(moved) == pytest.approx(np.linalg.norm(v))


def test_full_period_translation_is_identity():
    setup = small_setup(n_phi=2, L=4.0, N=16)
    rng = rng_stream(43)
    v = rng.standard_normal(setup.N) + 1j * rng.standard_normal(setup.N)
    for y in [(setup.L[0], 0.0), (0.0, setup.L[1])]:
        assert np.allclose(translate_array(setup, v, y), v, atol=1e-12)
        assert commutation_check(assemble(setup), y) <= 1e-10


def test_flux_condition_translations_commute_with_h():
    setup = small_setup(n_phi=2, L=8.0, N=32)
    op = assemble(setup)
    # B * (L/2) * L = 2*pi*n_phi/2 = 2*pi: satisfies the vector condition
    for y in [(setup.L[0] / 2, 0.0), (0.0, setup.L[1] / 2), (setup.L[0] / 2, setup.L[1] / 2)]:
        assert flux_condition(setup, y)
        assert commutation_check(op, y) <= 1e-10


def test_translations_commute_pairwise_when_condition_holds():
    setup = small_setup(n_phi=2, L=8.0, N=32)
    y = (setup.L[0] / 2, 0.0)
    yp = (0.0, setup.L[1])
    assert translations_commute(setup, y, yp)
    rng = rng_stream(44)
    v = rng.standard_normal(setup.N) + 1j * rng.standard_normal(setup.N)
    ab = translate_array(setup, translate_array(setup, v, yp), y)
    ba = translate_array(setup, translate_array(setup, v, y), yp)
    assert np.allclose(ab, ba, atol=1e-12)
    # half-period pair at n_phi = 2 encloses half a quantum: must anticommute
    yq = (0.0, setup.L[1] / 2)
    assert not translations_commute(setup, y, yq)


def test_commutation_check_rejects_off_condition_vectors():
    setup = small_setup(n_phi=2, L=4.0, N=16)
    h1 = setup.spacing[0]
    with pytest.raises(ValidationError):
        commutation_check(assemble(setup), (h1, 0.0))


def test_translate_grid_field_wrapper():
    setup = small_setup(n_phi=2, L=4.0, N=16)
    rng = rng_stream(45)
    v = rng.standard_normal(setup.N) + 1j * rng.standard_normal(setup.N)
    f = GridField(v, (0.0, 0.0), setup.spacing)
    g = magnetic_translate(f, (setup.L[0] / 2, 0.0), setup)
    assert g.samples.shape == v.shape


def test_triplet_export(tmp_path):
    setup = small_setup(n_phi=2, L=4.0, N=8)
    op = assemble(setup)
    path = tmp_path / "op.txt"
    write_operator_triplets(op, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("%")
    assert len(lines) - 1 == op.matrix.nnz
    r, c, re, im = lines[1].split()
    int(r), int(c), float(re), float(im)
