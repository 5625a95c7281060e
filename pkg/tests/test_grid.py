import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sbplab.grid import (Field, Grid, center_of_mass, grad_norm_sq, h1_norm, inner_l2,
                         laplacian, lp_norm, lp_power, read_field, recenter, rfftn, shift,
                         write_field)


@pytest.mark.parametrize("n, L", [(7, 1.0), (6, 1.0), (9, 2.0), (16, 0.0), (16, -1.0),
                                  (16, float("inf"))])
def test_grid_rejects_bad_sizes(n, L):
    with pytest.raises(ValueError):
        Grid(n, L)


def test_origin_is_a_node():
    g = Grid(16, 3.0)
    assert g.x[g.n // 2] == 0.0
    assert g.x[0] == -3.0
    assert g.dx == pytest.approx(6.0 / 16)
    assert g.r[8, 8, 8] == 0.0


def test_wavenumbers_fft_order():
    g = Grid(8, np.pi)
    assert np.array_equal(g.wavenumbers, [0, 1, 2, 3, -4, -3, -2, -1])


small = arrays(np.float64, (8, 8, 8), elements=st.floats(-10, 10))


@settings(max_examples=25, deadline=None)
@given(small)
def test_parseval(v):
    g = Grid(8, 1.7)
    direct = g.cell_volume * np.sum(v * v)
    assert g.spectral_sum(rfftn(v)) == pytest.approx(direct, rel=1e-12, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(small, small)
def test_spectral_inner_product(v, w):
    g = Grid(8, 1.0)
    assert g.spectral_sum(rfftn(v), rfftn(w)) == pytest.approx(inner_l2(v, w, g), rel=1e-10, abs=1e-9)


@pytest.mark.parametrize("sigma", [0.6, 1.0, 1.5])
def test_gaussian_norms(sigma):
    g = Grid(64, 10.0)
    u = (np.pi * sigma ** 2) ** -0.75 * np.exp(-0.5 * (g.r / sigma) ** 2)
    assert lp_norm(u, 2, g) == pytest.approx(1.0, rel=1e-12)
    assert grad_norm_sq(u, g) == pytest.approx(1.5 / sigma ** 2, rel=1e-10)
    assert h1_norm(Field(g, u)) == pytest.approx(np.sqrt(1 + 1.5 / sigma ** 2), rel=1e-10)
    lp = (np.pi * sigma ** 2) ** -1.875 * (2 * np.pi * sigma ** 2 / 2.5) ** 1.5
    assert lp_power(u, 2.5, g) == pytest.approx(lp, rel=1e-10)


def test_laplacian_of_gaussian():
    g = Grid(64, 10.0)
    u = np.exp(-0.5 * g.r ** 2)
    exact = (g.r ** 2 - 3.0) * u
    assert np.max(np.abs(laplacian(u, g) - exact)) < 1e-9


def test_lp_norm_rejects_small_p():
    g = Grid(8, 1.0)
    with pytest.raises(ValueError):
        lp_norm(np.ones(g.shape), 0.5, g)


def test_field_validation():
    g = Grid(8, 1.0)
    with pytest.raises(ValueError):
        Field(g, np.zeros((8, 8, 4)))
    bad = np.zeros(g.shape)
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        Field(g, bad)
    f = Field(g, np.zeros(g.shape))
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0


def test_inner_product_rejects_mixed_grids():
    a, b = Field(Grid(8, 1.0), np.ones((8,) * 3)), Field(Grid(8, 2.0), np.ones((8,) * 3))
    with pytest.raises(ValueError):
        inner_l2(a, b)


def test_whole_cell_shift_is_roll():
    g = Grid(16, 4.0)
    v = np.random.default_rng(0).normal(size=g.shape)
    out = shift(v, [g.dx, -2 * g.dx, 0.0], g)
    assert np.array_equal(out, np.roll(v, (1, -2, 0), axis=(0, 1, 2)))


@pytest.mark.parametrize("offset", [(0.3, -0.2, 0.11), (1.7, 0.0, -0.9)])
def test_fractional_shift(offset):
    g = Grid(64, 14.0)
    base = np.exp(-0.5 * g.r ** 2)
    x = g.x
    c = np.asarray(offset)
    moved = np.exp(-0.5 * ((x[:, None, None] - c[0]) ** 2 + (x[None, :, None] - c[1]) ** 2
                           + (x[None, None, :] - c[2]) ** 2))
    assert np.max(np.abs(shift(base, c, g) - moved)) < 1e-11
    assert center_of_mass(moved, g) == pytest.approx(c, abs=1e-12)
    assert np.max(np.abs(recenter(moved, g) - base)) < 1e-11


def test_field_file_roundtrip(tmp_path):
    g = Grid(8, 1.25)
    v = np.random.default_rng(1).normal(size=g.shape)
    path = write_field(tmp_path / "u.field", Field(g, v), {"a": 1.0, "rho": 0.5, "p": 2.5})
    f, meta = read_field(path)
    assert f.grid == g
    assert np.array_equal(f.values, v)
    assert meta == {"a": 1.0, "rho": 0.5, "p": 2.5, "kind": "u"}
    raw = path.read_bytes()
    assert raw.split(b"\n\n", 1)[0].decode().splitlines()[0] == "n=8"


def test_field_file_errors(tmp_path):
    g = Grid(8, 1.0)
    path = write_field(tmp_path / "u.field", Field(g, np.zeros(g.shape)))
    raw = path.read_bytes()
    (tmp_path / "short.field").write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="data bytes"):
        read_field(tmp_path / "short.field")
    (tmp_path / "nohdr.field").write_bytes(raw.replace(b"kind=u\n", b""))
    with pytest.raises(ValueError, match="header"):
        read_field(tmp_path / "nohdr.field")


@pytest.mark.parametrize("n, L, dx", [(8, 4.0, 1.0), (64, 8.0, 0.25)])
def test_make_grid_examples(n, L, dx):
    g = Grid(n, L)
    assert g.dx == dx and g.cell_volume == dx ** 3 and g.dx * g.n == 2 * L
    k = g.wavenumbers * np.pi / L
    body = np.sort(k[k != k.min()])
    assert np.array_equal(body, -body[::-1])


def test_norm_examples(gauss_grid, unit_gaussian):
    g, u = gauss_grid, unit_gaussian
    assert lp_norm(u, 2.5, g) ** 2.5 == pytest.approx(0.4658, abs=1e-4)
    assert lp_norm(np.zeros(g.shape), 3, g) == 0.0
    assert grad_norm_sq(np.full(g.shape, 2.0), g) == 0.0
    f = np.broadcast_to(np.sin(np.pi * g.x / g.L)[:, None, None], g.shape)
    assert grad_norm_sq(f, g) == pytest.approx((np.pi / g.L) ** 2 * lp_power(f, 2, g), rel=1e-13)
    assert inner_l2(u, np.zeros(g.shape), g) == 0.0
    w = u ** 3 * np.sign(np.sin(3 * g.x))[:, None, None]
    assert inner_l2(u, w, g) == pytest.approx(g.dx ** 3 * sum(float(a * b) for a, b in
                                                              zip(u.ravel(), w.ravel())), rel=1e-12)


def test_spectral_gradient_vs_one_sided_differences():
    errs = []
    for n in (32, 64):
        g = Grid(n, 8.0)
        f = np.exp(-0.5 * g.r ** 2) * (1 + 0.3 * g.x[:, None, None])
        fd = sum(np.sum(((np.roll(f, -1, axis=ax) - f) / g.dx) ** 2) for ax in range(3)) * g.cell_volume
        errs.append(abs(grad_norm_sq(f, g) - fd))
    assert errs[1] < errs[0] / 3.5  # second order: ratio close to 4


def test_whole_cell_shift_keeps_norms(gauss_grid, unit_gaussian):
    moved = np.roll(unit_gaussian, (5, -3, 2), axis=(0, 1, 2))
    for p in (2, 2.5):
        assert lp_norm(moved, p, gauss_grid) == pytest.approx(lp_norm(unit_gaussian, p, gauss_grid),
                                                              rel=1e-12)
    assert grad_norm_sq(moved, gauss_grid) == pytest.approx(grad_norm_sq(unit_gaussian, gauss_grid),
                                                            rel=1e-12)
