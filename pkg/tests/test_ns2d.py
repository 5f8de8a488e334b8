import numpy as np
import pytest

from ctrlmix.errors import (ConfigurationError, FluxViolationError, GridMismatchError,
                            ResolutionError)
from ctrlmix.ns2d import (BoundaryTrace, NoiseBasis, NSParams, NSSystem, SeparableLift, SquareDomain,
                          VelocityField, boundary_trace, cutoff_gradient_check, cutoff_profile,
                          cutoff_radii, decay_probe, energy_audit, extend_boundary_field, h1_seminorm,
                          hopf_cutoff, hopf_extension, leray_project, lift_Q, random_initial_state,
                          resolve, solve_clamped_biharmonic, solve_dirichlet_laplace,
                          solve_dirichlet_poisson, stream_modes, tangential_antiderivative,
                          trace_error)
from ctrlmix.ns2d.elliptic import outward_derivative
from ctrlmix.ns2d.grid import inner
from ctrlmix.ns2d.solver import _advect_component_reference, advection, wall_tangential
from ctrlmix.rng import RngState
from ctrlmix.cli.suites import smooth_boundary_datum


@pytest.fixture(scope="module")
def dom():
    return SquareDomain(32)


# -- grid ------------------------------------------------------------------------

def test_domain_layout(dom):
    assert dom.u_shape == (32, 33) and dom.v_shape == (33, 32) and dom.node_shape == (33, 33)
    assert dom.n_boundary == 128
    P = dom.boundary_points()
    assert np.allclose(P[0], [0, 0]) and np.allclose(P[32], [1, 0]) and np.allclose(P[64], [1, 1])
    assert np.allclose(np.sum(dom.normals() * dom.tangents(), axis=1), 0)
    with pytest.raises(ConfigurationError):
        SquareDomain(8)


def test_stream_fields_are_divergence_free(dom):
    psi = RngState(0).generator().normal(size=dom.node_shape)
    f = VelocityField.from_stream(dom, psi)
    assert f.max_divergence() < 1e-10


def test_flat_roundtrip_and_io(dom, tmp_path):
    f = VelocityField.from_stream(dom, stream_modes(dom, 1, 2))
    g = VelocityField.from_flat(dom, f.flat())
    assert np.array_equal(g.U, f.U) and np.array_equal(g.V, f.V)
    f.save(tmp_path / "f", time=1.0)
    h = VelocityField.load(tmp_path / "f")
    assert np.array_equal(h.U, f.U)
    assert np.allclose((f * 2 - f).U, f.U)


# -- elliptic solvers --------------------------------------------------------------

def test_laplace_reproduces_discrete_harmonic_quadratic(dom):
    P = dom.boundary_points()
    g = P[:, 0] ** 2 - P[:, 1] ** 2
    p = solve_dirichlet_laplace(dom, g)
    x, y = dom.node_coords()
    assert np.max(np.abs(p - (x**2 - y**2))) < 1e-12


def test_poisson_converges_at_second_order():
    errs = []
    for n in (16, 32, 64):
        d = SquareDomain(n)
        x, y = d.node_coords()
        exact = np.sin(np.pi * x) * np.sin(2 * np.pi * y)
        sol = solve_dirichlet_poisson(d, np.zeros(d.n_boundary), -5 * np.pi**2 * exact[1:-1, 1:-1])
        errs.append(np.max(np.abs(sol - exact)))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_clamped_biharmonic_matches_neumann_data():
    errs = []
    for n in (32, 64):
        d = SquareDomain(n)
        P = d.boundary_points()
        e = d.edge_of()
        g = np.where(e == 2, np.sin(np.pi * P[:, 0]) ** 2, 0.0)
        q = solve_clamped_biharmonic(d, g)
        j, i = d.boundary_index()
        assert np.max(np.abs(q[j, i])) < 1e-12
        dq = outward_derivative(q, d)
        keep = ~d.corner_mask()
        errs.append(np.max(np.abs(dq[keep] - g[keep])))
    assert errs[1] < errs[0]


def test_zero_biharmonic_data_gives_zero(dom):
    assert np.all(solve_clamped_biharmonic(dom, np.zeros(dom.n_boundary)) == 0)


# -- boundary data --------------------------------------------------------------

def test_flux_violation_rejected(dom):
    with pytest.raises(FluxViolationError):
        tangential_antiderivative(dom, np.ones(dom.n_boundary))
    with pytest.raises(GridMismatchError):
        tangential_antiderivative(dom, np.zeros(5))


def test_antiderivative_inverts_normal_data(dom):
    vn, _ = smooth_boundary_datum(dom)
    w = tangential_antiderivative(dom, vn)
    slope = np.diff(w) / dom.h
    assert np.allclose(slope, -0.5 * (vn[:-1] + vn[1:]))
    assert abs(w.mean()) < 1e-14


def test_noise_basis_is_orthonormal_and_windowed(dom):
    b = NoiseBasis(dom)
    assert np.allclose(b.modes @ b.modes.T * dom.h, np.eye(4), atol=1e-12)
    P = dom.boundary_points()
    on_gamma = (dom.edge_of() == 2) & (P[:, 0] >= 0.2) & (P[:, 0] <= 0.8)
    assert np.all(b.modes[:, ~on_gamma] == 0)
    assert b.profile(0.0) == 0 and b.profile(1.0) == 0 and b.profile(0.4) == pytest.approx(1.0)


def test_trace_csv(dom, tmp_path):
    tr = NoiseBasis(dom).trace([1, 0, 0, 0], [0.0, 0.4])
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,s,v_n,v_tau" and len(lines) == 1 + 2 * dom.n_boundary
    assert BoundaryTrace.zero(dom, [0.0]).is_zero(0)


# -- extensions ----------------------------------------------------------------

def test_extension_is_divergence_free_with_matching_trace(dom):
    vn, vt = smooth_boundary_datum(dom)
    f = extend_boundary_field(dom, vn, vt)
    assert f.max_divergence() < 1e-10
    assert trace_error(f, vn, vt) < 0.1
    tn, tt = boundary_trace(f)
    assert np.all(np.isnan(tt[dom.corner_mask()]))


def test_cutoff_profile_and_resolution_guard(dom):
    d_in, d_out = cutoff_radii(0.3)
    assert cutoff_profile(d_in / 2, 0.3) == 1 and cutoff_profile(2 * d_out, 0.3) == 0
    assert cutoff_gradient_check(SquareDomain(64), 0.3)["pass"]
    with pytest.raises(ResolutionError) as err:
        hopf_cutoff(dom, 0.1)
    assert err.value.suggested_n > 1000


def test_hopf_extension_is_confined_to_the_layer():
    d = SquareDomain(64)
    vt = NoiseBasis(d).tangential([1.0, 0.0, 0.0, 0.0])
    f = hopf_extension(d, np.zeros(d.n_boundary), vt, 0.45)
    _, d_out = cutoff_radii(0.45)
    assert f.max_divergence() < 1e-10
    x, y = d.u_coords()
    far = d.wall_distance(x, y) > d_out + 2 * d.h
    assert np.max(np.abs(f.U[far])) < 1e-12


def test_lift_over_time_skips_zero_slices(dom):
    tr = NoiseBasis(dom).trace([1.0, 0, 0, 0], [0.0, 0.4])
    Q = lift_Q(tr)
    assert Q.U.shape == (2,) + dom.u_shape and np.all(Q.U[0] == 0) and np.any(Q.U[1] != 0)


# -- projection -------------------------------------------------------------------

def test_leray_projection_properties(dom):
    gen = RngState(2).generator()
    raw = VelocityField(dom, gen.normal(size=dom.u_shape), gen.normal(size=dom.v_shape))
    p = leray_project(raw)
    assert p.max_divergence() < 1e-10
    assert np.allclose(leray_project(p).flat(), p.flat(), atol=1e-12)
    r = raw - p
    assert abs(inner(p.U, p.V, r.U, r.V, dom.h)) < 1e-10 * float(raw.l2_norm()) ** 2
    assert np.all(p.U[:, [0, -1]] == 0) and np.all(p.V[[0, -1], :] == 0)


# -- solver ---------------------------------------------------------------------------

def test_params_validation():
    with pytest.raises(ConfigurationError):
        NSParams(nu=0.0)
    with pytest.raises(ConfigurationError):
        NSParams(dt=0.3)
    with pytest.raises(ConfigurationError):
        NSParams(dt=0.03)


def test_advection_kernel_matches_reference(dom):
    gen = RngState(3).generator()
    U, V = gen.normal(size=(2,) + dom.u_shape), gen.normal(size=(2,) + dom.v_shape)
    U[..., [0, -1]] = 0
    V[..., [0, -1], :] = 0
    vt = np.zeros((2, dom.n_boundary))
    vt[:, 70:90] = gen.normal(size=(2, 20))
    walls = wall_tangential(dom, vt)
    Ub, Ut, Vl, Vr = (np.broadcast_to(w, (2, dom.n + 1)) for w in walls)
    aU, aV = advection(U, V, walls, dom.h)
    refU = _advect_component_reference(U, V, Ub, Ut, dom.h)
    Vt, Ut_ = np.swapaxes(V, -1, -2), np.swapaxes(U, -1, -2)
    refV = np.swapaxes(_advect_component_reference(Vt, Ut_, Vl, Vr, dom.h), -1, -2)
    assert aU.shape == (2, dom.n, dom.n - 1) and aV.shape == (2, dom.n - 1, dom.n)
    assert np.allclose(aU, refU, atol=1e-10) and np.allclose(aV, refV, atol=1e-10)


def test_unforced_energy_decays_and_zero_is_fixed(dom):
    v0 = VelocityField.from_stream(dom, 2 * stream_modes(dom, 1, 1))
    tr = resolve(v0, NSParams(dt=0.01), record=(0.5,))
    e0, e_half, e1 = (float(x.l2_norm()) for x in (v0, tr.records[0.5], tr.u))
    assert e0 > e_half > e1 > 0
    z = resolve(VelocityField.zeros(dom), NSParams(dt=0.01))
    assert np.all(z.u.U == 0) and np.all(z.u.V == 0)


def test_batch_members_are_independent(dom):
    basis = NoiseBasis(dom)
    lift = SeparableLift(basis)
    u0 = VelocityField.from_stream(dom, np.stack([stream_modes(dom, 1, 1), 3 * stream_modes(dom, 2, 1)]))
    c = np.array([[1.0, 0.5, 0, 0], [-2.0, 0.0, 1.0, 0.3]])
    both = resolve(u0, NSParams(dt=0.01), lift, c)
    one = resolve(VelocityField(dom, u0.U[1:], u0.V[1:]), NSParams(dt=0.01), lift, c[1:])
    assert np.array_equal(both.u.U[1], one.u.U[0])


def test_energy_audit_residual_is_first_order():
    d = SquareDomain(16)
    v0 = VelocityField.from_stream(d, 10 * stream_modes(d, 1, 1))
    r = [energy_audit(resolve(v0, NSParams(dt=dt), audit=True))["max_residual"] for dt in (4e-3, 2e-3)]
    assert r[1] < r[0] and 1.6 < r[0] / r[1] < 2.4


def test_audit_requires_flag(dom):
    with pytest.raises(ConfigurationError):
        energy_audit(resolve(VelocityField.zeros(dom), NSParams(dt=0.01)))


# -- time-one map and probes --------------------------------------------------------------

@pytest.fixture(scope="module")
def ns():
    return NSSystem(n=16)


def test_time_one_map_shapes_and_wall_values(ns):
    u = random_initial_state(ns, 1)
    xi = np.array([[1.0, -1.0, 0.5, 0.0]])
    out = ns.step(u[None], xi)
    assert out.shape == (1, ns.system.dim)
    f = ns.field(out[0])
    assert f.max_divergence() < 1e-10
    assert np.all(f.U[:, [0, -1]] == 0) and np.all(f.V[[0, -1], :] == 0)
    assert ns.step(u, xi[0]).shape == (ns.system.dim,)


def test_zero_noise_zero_state_stays_zero(ns):
    out = ns.step(np.zeros((1, ns.system.dim)), np.zeros((1, 4)))
    assert np.all(out == 0)


def test_observables_and_determinism(ns):
    u0 = np.stack([random_initial_state(ns, 2), np.zeros(ns.system.dim)])
    a = ns.trajectory(u0, 2, RngState(4))
    b = ns.trajectory(u0, 2, RngState(4))
    assert a.shape == (3, 2, 8) and np.array_equal(a, b)
    assert np.allclose(a[0, 1], 0)


def test_h1_seminorm_of_smooth_field():
    d = SquareDomain(64)
    x, y = d.node_coords()
    f = VelocityField.from_stream(d, (np.sin(np.pi * x) * np.sin(np.pi * y)) ** 2)
    # exact |grad u|^2 = 2 pi^4 and |u|^2 = 3 pi^2 / 8 for this wall-vanishing field
    ratio = float(h1_seminorm(f)) / float(f.l2_norm())
    assert ratio == pytest.approx(4 * np.pi / np.sqrt(3), rel=0.01)


def test_random_initial_state_norm(ns):
    u = random_initial_state(ns, 3, scale=2.5)
    assert float(ns.l2_norm(u)) == pytest.approx(2.5)


def test_decay_probe_is_exponential(ns):
    fit = decay_probe(ns, random_initial_state(ns, 5)[None], k_max=6)
    assert fit.alpha > 0 and fit.r2 > 0.95
    assert fit.steps_to(1e-3) > 0
