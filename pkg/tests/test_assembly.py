import numpy as np
import pytest

import smoothfem as sf
from smoothfem.exceptions import NotSPDError
from smoothfem.mesh import _build_mesh

import oracles


def reference_triangle():
    return _build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], h=1.0)


def symmetry_defect(A):
    d = A.tocsr() - A.tocsr().T
    return np.abs(d.toarray()).max() if d.nnz else 0.0


def kernel_defect(A, ndof):
    worst = 0.0
    for c in range(ndof):
        v = np.zeros(A.shape[0])
        v[c::ndof] = 1.0
        worst = max(worst, np.abs(A @ v).max())
    return worst


class TestElementGradient:
    def test_reference_triangle(self):
        m = reference_triangle()
        g = sf.element_gradient(m, 0)
        assert g.area == pytest.approx(0.5)
        assert np.allclose(g.B, [[-1, 1, 0], [-1, 0, 1]])

    def test_nodal_hat_gradient(self):
        m = reference_triangle()
        g = sf.element_gradient(m, 0)
        assert np.allclose(g.B @ np.array([0.0, 1.0, 0.0]), [1.0, 0.0])

    def test_linear_exactness_random_triangle(self, rng):
        tri = rng.uniform(-1, 1, (3, 2))
        if oracles.polygon_area(tri) < 0:
            tri = tri[[0, 2, 1]]
        m = _build_mesh(tri, [[0, 1, 2]], h=1.0, min_area=1e-14)
        g = sf.element_gradient(m, 0)
        u = 3.0 * tri[:, 0] - 2.0 * tri[:, 1] + 7.0
        assert np.allclose(g.B @ u, [3.0, -2.0], atol=1e-12)

    def test_rows_annihilate_constants(self, perturbed2):
        from smoothfem.assembly import element_gradients
        B, _ = element_gradients(perturbed2)
        sums = np.abs(B.sum(axis=2))
        assert sums.max() < 1e-13

    def test_bad_index(self, mesh2):
        with pytest.raises(ValueError):
            sf.element_gradient(mesh2, 99)


class TestStandard:
    def test_reference_triangle_matrix(self, poisson):
        m = reference_triangle()
        K = sf.assemble_standard(m, poisson).toarray()
        expected = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
        assert np.allclose(K, expected, atol=1e-14)

    @pytest.mark.parametrize("method", ["fem", "esfem", "sse", "nsfem"])
    def test_symmetry_and_kernel_poisson(self, perturbed2, poisson, method):
        A = sf.assemble(perturbed2, poisson, method)
        scale = A.max_abs()
        assert symmetry_defect(A) < 1e-12 * scale
        assert kernel_defect(A, 1) < 1e-10 * scale

    @pytest.mark.parametrize("method", ["fem", "esfem", "sse", "nsfem"])
    def test_symmetry_and_kernel_elasticity(self, perturbed2, elasticity,
                                            method):
        A = sf.assemble(perturbed2, elasticity, method)
        scale = A.max_abs()
        assert symmetry_defect(A) < 1e-12 * scale
        assert kernel_defect(A, 2) < 1e-10 * scale


class TestSmoothedProperties:
    def linear_field(self, mesh, spec):
        x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
        if spec.ndof == 1:
            return 1.7 * x - 0.9 * y + 0.3
        u = np.empty(2 * mesh.num_nodes)
        u[0::2] = 0.8 * x + 0.1 * y
        u[1::2] = -0.4 * x + 1.1 * y
        return u

    @pytest.mark.parametrize("method", ["esfem", "sse", "nsfem"])
    @pytest.mark.parametrize("kind", ["poisson", "elasticity"])
    def test_linear_reproduction(self, perturbed2, poisson, elasticity,
                                 method, kind):
        spec = poisson if kind == "poisson" else elasticity
        u = self.linear_field(perturbed2, spec)
        K = sf.assemble_standard(perturbed2, spec)
        Kbar = sf.assemble(perturbed2, spec, method)
        assert u @ (Kbar @ u) == pytest.approx(u @ (K @ u), rel=1e-10)

    def test_es_equal_gradient_average(self, poisson):
        # two equal-area elements sharing an edge, a field with one global
        # gradient: the smoothed energy equals the plain energy exactly
        m = sf.build_structured(1)
        u = 2.0 * m.nodes[:, 0] + 1.0 * m.nodes[:, 1]
        K = sf.assemble_standard(m, poisson)
        Kes = sf.assemble_es(m, poisson)
        assert u @ (Kes @ u) == pytest.approx(u @ (K @ u), rel=1e-12)

    def test_sse_isolated_element_is_standard(self, poisson, elasticity):
        m = reference_triangle()
        for spec in (poisson, elasticity):
            A = sf.assemble_sse(m, spec).toarray()
            B = sf.assemble_standard(m, spec).toarray()
            assert np.allclose(A, B, atol=1e-13)

    def test_ns_patch_area_partition(self, perturbed2):
        total = sum(perturbed2.areas[p].sum() / 3.0
                    for p in perturbed2.node_patches)
        assert total == pytest.approx(4.0, rel=1e-12)

    @pytest.mark.parametrize("method", ["esfem", "sse"])
    @pytest.mark.parametrize("kind", ["poisson", "elasticity"])
    def test_energy_ordering_random_vectors(self, mesh8, poisson, elasticity,
                                            method, kind, rng):
        # post-BC: v' Kbar v <= v' K v, the upper spectral bound at 1
        spec = poisson if kind == "poisson" else elasticity
        free, _ = sf.free_dofs(mesh8, spec)
        K = sf.assemble_standard(mesh8, spec).submatrix(free)
        Kbar = sf.assemble(mesh8, spec, method).submatrix(free)
        V = rng.standard_normal((1000, len(free)))
        for v in V:
            assert v @ (Kbar @ v) <= (v @ (K @ v)) * (1.0 + 1e-10)


@pytest.fixture(scope="module", params=["n1", "n2", "perturbed"])
def small_mesh(request):
    if request.param == "n1":
        return sf.build_structured(1)
    if request.param == "n2":
        return sf.build_structured(2)
    return sf.build_unstructured(2, seed=3)


class TestDenseOracles:
    """Brute-force equivalence on small meshes (<= 8 elements)."""

    @pytest.mark.parametrize("kind", ["poisson", "elasticity"])
    @pytest.mark.parametrize("method,oracle", [
        ("fem", oracles.dense_standard),
        ("esfem", oracles.dense_es),
        ("sse", oracles.dense_sse),
        ("nsfem", oracles.dense_ns),
    ])
    def test_matches_oracle(self, small_mesh, poisson, elasticity, kind,
                            method, oracle):
        spec = poisson if kind == "poisson" else elasticity
        A = sf.assemble(small_mesh, spec, method).toarray()
        ref = oracle(small_mesh, spec)
        scale = max(np.abs(ref).max(), 1.0)
        assert np.abs(A - ref).max() < 1e-10 * scale


class TestLoad:
    def test_partition_of_unity(self, perturbed2, poisson):
        spec = sf.ProblemSpec(kind="poisson",
                              body_force=lambda x, y: np.ones_like(x),
                              dirichlet=poisson.dirichlet)
        F = sf.assemble_load(perturbed2, spec)
        assert F.sum() == pytest.approx(4.0, rel=1e-12)

    def test_linear_exact_on_reference_triangle(self):
        # f = 2 + 3x - 5y against hand integration of f * phi_i:
        # [1/4, 3/8, 1/24]
        m = reference_triangle()
        spec = sf.ProblemSpec(
            kind="poisson",
            body_force=lambda x, y: 2.0 + 3.0 * x - 5.0 * y,
            dirichlet=lambda x, y: np.zeros_like(x, dtype=bool))
        F = sf.assemble_load(m, spec)
        assert np.allclose(F, [0.25, 0.375, 1.0 / 24.0], atol=1e-14)

    def test_elasticity_components(self, mesh2, elasticity):
        # b = (-y^2, 1 - x^2): each component integrates like a scalar load
        F = sf.assemble_load(mesh2, elasticity)
        fx = sf.assemble_load(mesh2, sf.ProblemSpec(
            kind="poisson", body_force=lambda x, y: -y**2,
            dirichlet=lambda x, y: np.ones_like(x, bool)))
        fy = sf.assemble_load(mesh2, sf.ProblemSpec(
            kind="poisson", body_force=lambda x, y: 1.0 - x**2,
            dirichlet=lambda x, y: np.ones_like(x, bool)))
        assert np.allclose(F[0::2], fx, atol=1e-14)
        assert np.allclose(F[1::2], fy, atol=1e-14)


class TestDirichlet:
    def test_free_count_poisson(self, mesh8, poisson):
        K = sf.assemble_standard(mesh8, poisson)
        f = sf.assemble_load(mesh8, poisson)
        A, fr, free = sf.apply_dirichlet(K, f, mesh8, poisson)
        assert len(free) == 49           # (8 - 1)^2 interior nodes
        assert A.shape == (49, 49)

    def test_spd_after_elimination(self, mesh8, poisson):
        K = sf.assemble_standard(mesh8, poisson)
        f = sf.assemble_load(mesh8, poisson)
        A, _, _ = sf.apply_dirichlet(K, f, mesh8, poisson)
        sf.cholesky(A)                   # smallest eigenvalue > 0

    def test_free_count_elasticity_left_edge(self, mesh8, elasticity):
        K = sf.assemble_standard(mesh8, elasticity)
        f = sf.assemble_load(mesh8, elasticity)
        A, fr, free = sf.apply_dirichlet(K, f, mesh8, elasticity)
        n = 8
        assert len(free) == 2 * ((n + 1) ** 2 - (n + 1))

    def test_empty_free_set_rejected(self, poisson):
        m = reference_triangle()
        spec = sf.ProblemSpec(kind="poisson",
                              body_force=poisson.body_force,
                              dirichlet=lambda x, y: np.ones_like(x, bool))
        K = sf.assemble_standard(m, spec)
        f = sf.assemble_load(m, spec)
        with pytest.raises(ValueError):
            sf.apply_dirichlet(K, f, m, spec)


class TestProblemSpec:
    def test_material_matrix(self, elasticity):
        D = elasticity.material_matrix()
        E, nu = 1.0e3, 0.2
        c = E / (1 - nu**2)
        assert np.allclose(D, c * np.array([[1, nu, 0], [nu, 1, 0],
                                            [0, 0, (1 - nu) / 2]]))

    def test_validation(self):
        with pytest.raises(ValueError):
            sf.ProblemSpec(kind="heat", body_force=None, dirichlet=None)
        with pytest.raises(ValueError):
            sf.ProblemSpec(kind="elasticity", body_force=None, dirichlet=None,
                           youngs_modulus=1.0, poisson_ratio=0.6)
        with pytest.raises(ValueError):
            sf.ProblemSpec(kind="poisson", body_force=None, dirichlet=None,
                           youngs_modulus=-1.0)


def test_matrixmarket_roundtrip(tmp_path, mesh2, poisson):
    import scipy.io
    K = sf.assemble_standard(mesh2, poisson)
    path = tmp_path / "K.mtx"
    sf.export_matrixmarket(K, path)
    header = path.read_text().splitlines()[0]
    assert "symmetric" in header
    back = scipy.io.mmread(path).tocsr()
    assert np.abs((back - K.tocsr())).max() < 1e-15
