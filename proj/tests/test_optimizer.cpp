#include <doctest.h>

#include <lensopt/error.hpp>
#include <lensopt/optimizer.hpp>
#include <lensopt/run.hpp>

#include <random>
#include <sstream>

using namespace lensopt;

namespace
{
	RunConfig small_recovery()
	{
		RunConfig c;
		c.domain.h_mesh = 1.0 / 16;
		c.domain.lens = LensShape::ellipse(Vec2(0.5, 0.5), Vec2(0.25, 0.16));
		c.grid = TimeGrid{0.5, 32};
		c.u0 = ProfileSpec{ProfileSpec::Kind::Bump, Vec2(0.5, 0.5), 0.3, 0.03, {1, 1}, ""};
		c.u1 = ProfileSpec{ProfileSpec::Kind::Bump, Vec2(0.82, 0.82), 0.12, 0.3, {1, 1}, ""};
		c.target.mode = TargetSpec::Mode::Shape;
		c.target.shape = LensShape::circle(Vec2(0.5, 0.5), 0.2);
		return c;
	}
} // namespace

TEST_SUITE("optimizer")
{
	TEST_CASE("Riesz map: zero load and descent for random loads")
	{
		DomainSpec d;
		d.h_mesh = 1.0 / 16;
		const Mesh2D mesh = build_mesh(d);
		const VelocityField zero = riesz_descent_field(mesh, std::vector<Vec2>(mesh.num_vertices(), Vec2::Zero()));
		CHECK(zero.max_norm() == 0.0);

		std::mt19937_64 rng(99);
		std::normal_distribution<double> N;
		for (int trial = 0; trial < 10; ++trial)
		{
			std::vector<Vec2> load(mesh.num_vertices());
			for (std::size_t k = 0; k < load.size(); ++k)
				load[k] = mesh.on_boundary[k] ? Vec2::Zero() : Vec2(N(rng), N(rng));
			const VelocityField h = riesz_descent_field(mesh, load);
			CHECK(vanishes_on_boundary(mesh, h));
			double slope = 0.0;
			for (std::size_t k = 0; k < load.size(); ++k)
				slope += load[k].dot(h.values[k]);
			const double n = h1_norm(mesh, h);
			CHECK(slope < 0.0);
			CHECK(slope == doctest::Approx(-n * n).epsilon(1e-10));
		}
	}

	TEST_CASE("starting at the target converges immediately")
	{
		RunConfig c = small_recovery();
		c.target.shape = c.domain.lens;
		const ShapeSetup setup = make_setup(c);
		const OptimizationResult res = optimize(setup);
		CHECK(res.status == OptimizerStatus::Converged);
		REQUIRE(res.history.size() == 1);
		CHECK(res.history[0].J <= 1e-20);
		CHECK(res.history[0].tau == 0.0);
	}

	TEST_CASE("line search respects the fold bound and decreases J")
	{
		const ShapeSetup setup = make_setup(small_recovery());
		const ShapeDerivative d = shape_derivative(setup, setup.mesh);
		const VelocityField h = riesz_descent_field(setup.mesh, d.load);
		const double slope = d.apply(h);
		REQUIRE(slope < 0.0);
		const double tau0 = max_admissible_step(setup.mesh, h);
		const LineSearchResult ls = line_search(setup, setup.mesh, h, d.J, slope, 1e6 * tau0);
		CHECK(ls.tau > 0.0);
		CHECK(ls.tau <= tau0);
		CHECK(ls.J <= d.J + 1e-4 * ls.tau * slope);
		CHECK(check_admissible(ls.mesh).pass());
	}

	TEST_CASE("line search gives up on an ascent direction")
	{
		const ShapeSetup setup = make_setup(small_recovery());
		const ShapeDerivative d = shape_derivative(setup, setup.mesh);
		const VelocityField h = riesz_descent_field(setup.mesh, d.load).scaled(-1.0);
		OptimizerOptions opts;
		opts.max_halvings = 4;
		try
		{
			line_search(setup, setup.mesh, h, d.J, -d.apply(h), 1.0, opts);
			FAIL("expected LineSearchExhausted");
		}
		catch (const Error &e)
		{
			CHECK(e.kind() == ErrorKind::LineSearchExhausted);
		}
	}

	TEST_CASE("short recovery run: monotone J, admissible iterates, CSV history")
	{
		OptimizerOptions opts;
		opts.max_iters = 4;
		const ShapeSetup setup = make_setup(small_recovery());
		int seen = 0;
		const OptimizationResult res = optimize(setup, opts, [&](const IterationRecord &) { ++seen; });
		CHECK(seen == static_cast<int>(res.history.size()));
		REQUIRE(res.history.size() >= 2);
		for (std::size_t i = 0; i + 1 < res.history.size(); ++i)
		{
			CHECK(res.history[i + 1].J <= res.history[i].J + 1e-4 * res.history[i].tau * res.history[i].slope);
			CHECK(res.history[i].tau > 0.0);
		}
		CHECK(res.history.back().tau == 0.0);
		CHECK(res.J_final == res.history.back().J);
		CHECK(check_admissible(res.mesh).pass());

		std::ostringstream a, b;
		write_history_csv(a, res.history);
		write_history_csv(b, optimize(setup, opts).history);
		CHECK(a.str() == b.str());
		CHECK(a.str().rfind("iteration,J,h1,slope,tau,halvings,max_turning_deg,min_quality,lens_area\n", 0) == 0);
	}
}
