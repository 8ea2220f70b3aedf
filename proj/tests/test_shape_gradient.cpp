#include <doctest.h>

#include <lensopt/problem.hpp>

#include <cmath>

using namespace lensopt;

namespace
{
	struct Fixture
	{
		ShapeProblem problem;
		StateTrajectory state;
		AdjointTrajectory adjoint;

		explicit Fixture(bool identical = false, double h_mesh = 1.0 / 16)
		{
			DomainSpec d;
			d.h_mesh = h_mesh;
			d.lens = LensShape::circle(Vec2(0.5, 0.5), 0.2);
			problem.mesh = build_mesh(d);
			problem.params.fluid = MaterialCoeffs{1.0, 1.0, 1.0, 0.02, 0.3};
			problem.params.lens = MaterialCoeffs{2.0, 0.5, 1.0, 0.02, 0.3};
			if (identical)
				problem.params.lens = problem.params.fluid;
			problem.grid = TimeGrid{0.5, 32};
			problem.u0 = ScalarProfile::bump(Vec2(0.18, 0.18), 0.12, 0.03).sample(problem.mesh);
			problem.u1 = Vector::Zero(problem.mesh.num_vertices());
			problem.u_d.assign(problem.grid.N + 1, Vector::Zero(problem.mesh.num_vertices()));
			cost_on_mesh(problem, problem.mesh, &state);
			adjoint = solve_adjoint(problem.mesh, problem.params, state, problem.u_d, problem.grid, problem.solver);
		}

		double volume(const VelocityField &h, VolumeTerms *terms = nullptr) const
		{
			return eval_volume_form(problem.mesh, problem.params, state, adjoint, problem.u_d, h, problem.solver, terms);
		}

		double boundary(const VelocityField &h, BoundaryTerms *terms = nullptr) const
		{
			return eval_boundary_form(problem.mesh, problem.params, state, adjoint, h, problem.solver, terms);
		}
	};

	const Fixture &shared()
	{
		static const Fixture f;
		return f;
	}
} // namespace

TEST_SUITE("shape_gradient")
{
	TEST_CASE("zero field gives zero in both forms")
	{
		const Fixture &f = shared();
		const VelocityField zero = VelocityField::zero(f.problem.mesh);
		CHECK(f.volume(zero) == 0.0);
		CHECK(f.boundary(zero) == 0.0);
	}

	TEST_CASE("perfect tracking annihilates the volume form")
	{
		Fixture f;
		f.problem.u_d = f.state.u;
		f.adjoint = solve_adjoint(f.problem.mesh, f.problem.params, f.state, f.problem.u_d, f.problem.grid, f.problem.solver);
		const VelocityField h = smooth_random_field(f.problem.mesh, 2, 4, 0.05);
		CHECK(f.adjoint.max_abs() <= 1e-12);
		CHECK(std::abs(f.volume(h)) <= 1e-14);
		CHECK(std::abs(f.boundary(h)) <= 1e-14);

		const FdReport fd = fd_oracle(f.problem, h, {1e-2, 5e-3, 2.5e-3});
		for (std::size_t i = 1; i < fd.samples.size(); ++i)
			CHECK(std::abs(fd.samples[i].central) < std::abs(fd.samples[i - 1].central));
	}

	TEST_CASE("volume form is linear in h and equals the tensor contraction")
	{
		const Fixture &f = shared();
		const VelocityField h1 = smooth_random_field(f.problem.mesh, 4, 4, 0.05);
		const VelocityField h2 = radial_bump_field(f.problem.mesh, Vec2(0.5, 0.5), 0.1, 0.3, 0.05);
		const double a = 1.7, b = -0.4;
		const double lhs = f.volume(h1.scaled(a) + h2.scaled(b));
		const double rhs = a * f.volume(h1) + b * f.volume(h2);
		CHECK(std::abs(lhs - rhs) <= 1e-12 * (std::abs(a * f.volume(h1)) + std::abs(b * f.volume(h2))));

		const ShapeTensor S = volume_shape_tensor(f.problem.mesh, f.problem.params, f.state, f.adjoint, f.problem.u_d);
		const auto dh = velocity_gradient(f.problem.mesh, h1);
		double by_element = 0.0, by_node = 0.0;
		for (std::size_t e = 0; e < dh.size(); ++e)
			by_element += (S.total[e].array() * dh[e].array()).sum();
		for (std::size_t k = 0; k < S.load.size(); ++k)
			by_node += S.load[k].dot(h1.values[k]);
		VolumeTerms terms;
		const double v = f.volume(h1, &terms);
		CHECK(by_element == doctest::Approx(v).epsilon(1e-12));
		CHECK(by_node == doctest::Approx(v).epsilon(1e-12));
		CHECK(terms.total() == doctest::Approx(v).epsilon(1e-12));
	}

	TEST_CASE("boundary form only sees h on the interface")
	{
		const Fixture &f = shared();
		const Mesh2D &mesh = f.problem.mesh;
		const VelocityField h = smooth_random_field(mesh, 9, 4, 0.05);
		VelocityField near = VelocityField::zero(mesh), far = h;
		for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
			if ((mesh.vertices[i] - Vec2(0.5, 0.5)).norm() > 0.35)
				far.values[i] *= -3.0;
		for (const auto &e : mesh.interface)
		{
			near.values[e.a] = h.values[e.a];
			near.values[e.b] = h.values[e.b];
		}
		CHECK(f.boundary(far) == doctest::Approx(f.boundary(h)).epsilon(1e-14));
		CHECK(f.boundary(near) == doctest::Approx(f.boundary(h)).epsilon(1e-14));

		// element-wise additivity of the volume form
		const ShapeTensor S = volume_shape_tensor(mesh, f.problem.params, f.state, f.adjoint, f.problem.u_d);
		const auto dh = velocity_gradient(mesh, h), dfar = velocity_gradient(mesh, far);
		double changed = 0.0;
		for (std::size_t e = 0; e < dh.size(); ++e)
			if (dh[e] != dfar[e])
				changed += (S.total[e].array() * (dfar[e] - dh[e]).array()).sum();
		CHECK(f.volume(far) - f.volume(h) == doctest::Approx(changed).epsilon(1e-10));
	}

	TEST_CASE("tangential slide is small next to a normal push")
	{
		const Fixture &f = shared();
		const Mesh2D &mesh = f.problem.mesh;
		const VelocityField radial = radial_bump_field(mesh, Vec2(0.5, 0.5), 0.1, 0.3, 0.05);
		VelocityField slide = radial;
		for (auto &v : slide.values)
			v = Vec2(-v.y(), v.x());
		CHECK(std::abs(f.boundary(slide)) <= 0.05 * std::abs(f.boundary(radial)));
	}

	TEST_CASE("boundary terms add up and vanish for identical materials")
	{
		const Fixture &f = shared();
		const VelocityField h = radial_bump_field(f.problem.mesh, Vec2(0.5, 0.5), 0.1, 0.3, 0.05);
		BoundaryTerms terms;
		const double b = f.boundary(h, &terms);
		CHECK(terms.total() == doctest::Approx(b).epsilon(1e-13));
		CHECK(std::abs(b - f.volume(h)) <= 0.1 * std::abs(f.volume(h)));

		const Fixture same(true);
		const VelocityField hs = radial_bump_field(same.problem.mesh, Vec2(0.5, 0.5), 0.1, 0.3, 0.05);
		CHECK(std::abs(same.boundary(hs)) <= 0.05 * std::abs(f.volume(h)));
	}

	TEST_CASE("finite differences: zero field and convergence rates")
	{
		const Fixture &f = shared();
		const FdReport zero = fd_oracle(f.problem, VelocityField::zero(f.problem.mesh), {1e-2, 5e-3});
		for (const auto &s : zero.samples)
		{
			CHECK(s.central == 0.0);
			CHECK(s.one_sided == 0.0);
		}
		const VelocityField h = smooth_random_field(f.problem.mesh, 21, 4, 0.05);
		const FdReport fd = fd_oracle(f.problem, h, {1e-2, 5e-3, 2.5e-3});
		CHECK(fd.central_rate == doctest::Approx(2.0).epsilon(0.25));
		CHECK(fd.one_sided_rate == doctest::Approx(1.0).epsilon(0.25));
		CHECK(relative_error(f.volume(h), fd.plateau) <= 0.05);
	}

	TEST_CASE("continuity diagnostics")
	{
		const Fixture &f = shared();
		const ContinuityReport zero = continuity_diagnostics(f.problem, VelocityField::zero(f.problem.mesh), {1e-2, 5e-3});
		for (const auto &row : zero.rows)
			CHECK(row.combined == 0.0);

		ShapeProblem linear = f.problem;
		linear.params.fluid.k = linear.params.lens.k = 0.0;
		linear.params.q = 1.0;
		const VelocityField h = smooth_random_field(linear.mesh, 8, 4, 0.05);
		const ContinuityReport rep = continuity_diagnostics(linear, h, {1e-2, 5e-3, 2.5e-3});
		for (std::size_t i = 1; i < rep.rows.size(); ++i)
			CHECK(rep.rows[i].lipschitz_ratio == doctest::Approx(rep.rows[0].lipschitz_ratio).epsilon(0.1));

		const ContinuityReport nl = continuity_diagnostics(f.problem, h, {1e-2, 5e-3, 2.5e-3});
		CHECK(nl.holder_decreasing);
	}
}
