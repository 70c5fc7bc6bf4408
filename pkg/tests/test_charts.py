import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import weylgeo as wg
from weylgeo.charts import GNOMONIC, NORTH, SOUTH, chart_grid, transition
from weylgeo.errors import DomainError
from weylgeo.jets import fd_oracle


def test_north_south_transition_fixed_circle():
    q, _ = transition(NORTH, SOUTH, [1.0, 0.0])
    assert np.allclose(q, [1.0, 0.0], atol=1e-15)


def test_north_south_transition_halves_radius_two():
    q, _ = transition(NORTH, SOUTH, [2.0, 0.0])
    assert np.allclose(q, [0.5, 0.0], atol=1e-15)


def test_transition_matches_pinned_formula():
    # (x, y) -> (x, -y) / (x^2 + y^2)
    for p in ([0.7, 0.9], [-1.2, 0.4], [0.3, -1.1]):
        q, _ = transition(NORTH, SOUTH, p)
        r2 = p[0] ** 2 + p[1] ** 2
        assert np.allclose(q, [p[0] / r2, -p[1] / r2], atol=1e-14)


@given(st.floats(-1.4, 1.4), st.floats(-1.4, 1.4))
def test_roundtrip_all_sphere_chart_pairs(x, y):
    p = np.array([x, y])
    if np.linalg.norm(p) < 0.2:
        return
    for a, b in ((NORTH, SOUTH), (SOUTH, NORTH)):
        q, _ = transition(a, b, p)
        back, _ = transition(b, a, q)
        assert np.max(np.abs(back - p)) < 1e-12


def test_roundtrip_specific_point():
    q, _ = transition(NORTH, SOUTH, [0.3, 0.7])
    back, _ = transition(SOUTH, NORTH, q)
    assert np.max(np.abs(back - np.array([0.3, 0.7]))) < 1e-12


def test_gnomonic_roundtrips_through_stereographic():
    for p in ([0.0, 0.0], [0.8, -0.3], [-1.1, 1.2]):
        q, _ = transition(GNOMONIC, NORTH, p)
        back, _ = transition(NORTH, GNOMONIC, q)
        assert np.max(np.abs(back - np.asarray(p))) < 1e-12


def test_embeddings_are_unit_vectors():
    pts = chart_grid(NORTH, n=7)
    for chart in (NORTH, SOUTH, GNOMONIC):
        u = chart.embed(pts)
        assert np.allclose(np.linalg.norm(u, axis=-1), 1.0, atol=1e-14)


def test_transition_jacobian_matches_fd():
    for a, b, p in ((NORTH, SOUTH, [0.8, 0.5]), (GNOMONIC, NORTH, [0.4, -0.2])):
        _, J = transition(a, b, np.asarray(p, float))
        for i in range(2):
            for k, idx in ((0, (1, 0)), (1, (0, 1))):
                ref = fd_oracle(
                    lambda x, y: transition(a, b, np.array([x, y]))[0][i],
                    wg.planar(3.0), p, idx, h=1e-4,
                )
                assert J[i, k] == pytest.approx(ref, abs=1e-9)


def test_charts_share_outward_orientation():
    # det [du/dx, du/dy, u] > 0 in every chart of the atlas
    pts = chart_grid(NORTH, n=5)
    for chart in (NORTH, SOUTH, GNOMONIC):
        u = chart.embed(pts)
        J = chart.embed_jacobian(pts)
        triple = np.einsum(
            "mi,mi->m", np.cross(J[..., 0], J[..., 1], axis=-1), u
        )
        assert np.all(triple > 0.0)


def test_unembed_rejects_excluded_locus():
    with pytest.raises(DomainError):
        NORTH.unembed(np.array([0.0, 0.0, -1.0]))
    with pytest.raises(DomainError):
        GNOMONIC.unembed(np.array([0.0, 1.0, 0.0]))


def test_grid_respects_margin():
    g = chart_grid(NORTH, n=33, margin=0.05)
    assert len(g) == 33 * 33
    assert np.max(np.abs(g)) == pytest.approx(NORTH.extent - 0.05)
