#include <doctest.h>

#include <lensopt/error.hpp>
#include <lensopt/problem.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace lensopt;

namespace
{
	using std::numbers::pi;

	MaterialParams reference_params()
	{
		MaterialParams p;
		p.fluid = MaterialCoeffs{1.0, 1.0, 1.0, 0.02, 0.3};
		p.lens = MaterialCoeffs{2.0, 0.5, 1.0, 0.02, 0.3};
		p.q = 3.0;
		return p;
	}

	Mesh2D lens_mesh(double h)
	{
		DomainSpec d;
		d.h_mesh = h;
		d.lens = LensShape::circle(Vec2(0.5, 0.5), 0.2);
		return build_mesh(d);
	}

	Vector bump(const Mesh2D &mesh, double amp)
	{
		return ScalarProfile::bump(Vec2(0.35, 0.4), 0.15, amp).sample(mesh);
	}
} // namespace

TEST_SUITE("state")
{
	TEST_CASE("zero data give the zero trajectory")
	{
		const Mesh2D mesh = lens_mesh(1.0 / 16);
		const Vector z = Vector::Zero(mesh.num_vertices());
		const StateTrajectory st = solve_state(mesh, reference_params(), TimeGrid{0.5, 16}, z, z);
		for (int n = 0; n <= 16; ++n)
		{
			CHECK(st.u[n].cwiseAbs().maxCoeff() == 0.0);
			CHECK(st.v[n].cwiseAbs().maxCoeff() == 0.0);
		}
		const DiagnosticsBounds d = energy_report(mesh, st, reference_params());
		CHECK(d.a0 == 0.0);
		CHECK(d.min_one_minus_2ku == 1.0);
		CHECK(d.energy_lhs == 0.0);
		CHECK(d.grad_ut_linf_l2_sq == 0.0);
	}

	TEST_CASE("nonlinear run: residuals, Dirichlet rows and margins")
	{
		const Mesh2D mesh = lens_mesh(1.0 / 16);
		const MaterialParams params = reference_params();
		const TimeGrid grid{0.5, 32};
		const StateTrajectory st = solve_state(mesh, params, grid, bump(mesh, 0.05), Vector::Zero(mesh.num_vertices()));
		WesterveltOperator op(mesh, params, SolverOptions{}.eps_reg);
		for (int n = 0; n < grid.N; ++n)
			CHECK(step_residual(op, st, n).cwiseAbs().maxCoeff() <= 1e-9);
		for (int n = 0; n <= grid.N; ++n)
			for (int k : mesh.boundary_nodes)
				CHECK(st.u[n][k] == 0.0);

		const DiagnosticsBounds d = degeneracy_margin(mesh, st, params);
		CHECK(d.a0 < 1.0);
		CHECK(d.min_one_minus_2ku > 1.0 - d.a0 - 1e-15);
		CHECK(d.max_one_minus_2ku < 1.0 + d.a0 + 1e-15);
		const DiagnosticsBounds e = energy_report(mesh, st, params);
		CHECK(std::isfinite(e.energy_ratio));
		CHECK(e.energy_ratio > 0.0);
	}

	TEST_CASE("k = 0 gives a0 = 0 whatever u is")
	{
		const Mesh2D mesh = lens_mesh(1.0 / 16);
		MaterialParams params = reference_params();
		params.fluid.k = params.lens.k = 0.0;
		const StateTrajectory st = solve_state(mesh, params, TimeGrid{0.5, 16}, bump(mesh, 0.4), Vector::Zero(mesh.num_vertices()));
		CHECK(degeneracy_margin(mesh, st, params).a0 == 0.0);
	}

	TEST_CASE("large initial pressure trips the degeneracy floor")
	{
		const Mesh2D mesh = lens_mesh(1.0 / 16);
		try
		{
			solve_state(mesh, reference_params(), TimeGrid{0.5, 16}, ScalarProfile::bump(Vec2(0.25, 0.25), 0.1, 0.46).sample(mesh),
						Vector::Zero(mesh.num_vertices()));
			FAIL("expected DegeneracyBreach");
		}
		catch (const Error &e)
		{
			CHECK(e.kind() == ErrorKind::DegeneracyBreach);
			CHECK(e.step() == 0);
		}
	}

	TEST_CASE("cost examples")
	{
		const Mesh2D mesh = lens_mesh(1.0 / 64);
		const Vector z = Vector::Zero(mesh.num_vertices());
		{
			StateTrajectory st;
			st.grid = TimeGrid{1.0, 4};
			st.u.assign(5, z);
			CHECK(evaluate_cost(mesh, st, st.u) == 0.0);
			CHECK(evaluate_cost(mesh, st, std::vector<Vector>(5, Vector::Ones(mesh.num_vertices()))) ==
				  doctest::Approx(1.0).epsilon(1e-12));
		}
		{
			StateTrajectory st;
			st.grid = TimeGrid{2.0, 4};
			st.u.assign(5, z);
			const Vector s = ScalarProfile::eigenmode(1, 1, 1.0).sample(mesh);
			CHECK(std::abs(evaluate_cost(mesh, st, std::vector<Vector>(5, s)) - 0.5) <= 1e-3);
		}
		StateTrajectory st;
		st.grid = TimeGrid{1.0, 4};
		st.u.assign(5, z);
		try
		{
			evaluate_cost(mesh, st, std::vector<Vector>(3, z));
			FAIL("expected GridMismatch");
		}
		catch (const Error &e)
		{
			CHECK(e.kind() == ErrorKind::GridMismatch);
		}
	}

	TEST_CASE("identical materials make the interface invisible")
	{
		const Mesh2D with_lens = lens_mesh(1.0 / 16);
		MaterialParams same = reference_params();
		same.lens = same.fluid;
		Mesh2D relabeled = with_lens;
		std::fill(relabeled.labels.begin(), relabeled.labels.end(), Material::Fluid);
		const Vector u0 = bump(with_lens, 0.05), z = Vector::Zero(with_lens.num_vertices());
		const StateTrajectory a = solve_state(with_lens, same, TimeGrid{0.5, 32}, u0, z);
		const StateTrajectory b = solve_state(relabeled, same, TimeGrid{0.5, 32}, u0, z);
		double d = 0.0;
		for (int n = 0; n <= 32; ++n)
			d = std::max(d, (a.u[n] - b.u[n]).cwiseAbs().maxCoeff());
		CHECK(d <= 1e-12);
	}

	TEST_CASE("linear damping decreases the linear energy")
	{
		const Mesh2D mesh = lens_mesh(1.0 / 16);
		MaterialParams params = reference_params();
		params.fluid.k = params.lens.k = 0.0;
		const StateTrajectory st = solve_state(mesh, params, TimeGrid{0.5, 64}, bump(mesh, 0.05), Vector::Zero(mesh.num_vertices()));
		WesterveltOperator op(mesh, params, 1e-8);
		const auto E = linear_energy(op, st);
		for (std::size_t n = 0; n + 1 < E.size(); ++n)
			CHECK(E[n + 1] <= E[n] * (1 + 1e-12));
		CHECK(E.back() < E.front());
	}

	TEST_CASE("eigenmode decays like the modal ODE")
	{
		DomainSpec d;
		d.h_mesh = 1.0 / 32;
		d.lens = LensShape::none();
		const Mesh2D mesh = build_mesh(d);
		const MaterialParams params = MaterialParams::uniform(MaterialCoeffs{1.0, 0.0, 1.0, 0.01, 0.5}, 1.0);
		const TimeGrid grid{0.5, 256};
		const Vector u0 = ScalarProfile::eigenmode(1, 1, 1.0).sample(mesh);
		const StateTrajectory st = solve_state(mesh, params, grid, u0, Vector::Zero(u0.size()));
		// c'' + 2 pi^2 b c' + 2 pi^2 c = 0, c(0) = 1, c'(0) = 0
		const double g = pi * pi * 0.01, w = std::sqrt(2 * pi * pi - g * g);
		const int center = static_cast<int>(std::find_if(mesh.vertices.begin(), mesh.vertices.end(),
														 [](const Vec2 &x) { return (x - Vec2(0.5, 0.5)).norm() < 1e-12; }) -
											mesh.vertices.begin());
		REQUIRE(center < static_cast<int>(mesh.num_vertices()));
		for (int n = 0; n <= grid.N; n += 32)
		{
			const double t = grid.time(n);
			const double c = std::exp(-g * t) * (std::cos(w * t) + g / w * std::sin(w * t));
			CHECK(st.u[n][center] == doctest::Approx(c).epsilon(0.01));
		}
		const DiagnosticsBounds e = energy_report(mesh, st, params);
		CHECK(std::isfinite(e.grad_ut_linf_l2_sq));
	}

	TEST_CASE("two-material strip: energy bounded by data")
	{
		DomainSpec d;
		d.h_mesh = 1.0 / 24;
		d.lens = LensShape::from_polygon({Vec2(0.5, 0.2), Vec2(0.8, 0.2), Vec2(0.8, 0.8), Vec2(0.5, 0.8)});
		const Mesh2D mesh = build_mesh(d);
		const MaterialParams params = reference_params();
		for (double amp : {0.01, 0.02})
		{
			const StateTrajectory st = solve_state(mesh, params, TimeGrid{0.5, 32},
												   ScalarProfile::bump(Vec2(0.3, 0.5), 0.12, amp).sample(mesh),
												   Vector::Zero(mesh.num_vertices()));
			const DiagnosticsBounds e = energy_report(mesh, st, params);
			CHECK(std::isfinite(e.energy_ratio));
			CHECK(e.energy_ratio > 0.0);
			CHECK(e.energy_lhs <= e.energy_ratio * e.data_norm * (1 + 1e-12));
			MESSAGE("amplitude " << amp << ": energy / data = " << e.energy_ratio);
		}
	}
}
