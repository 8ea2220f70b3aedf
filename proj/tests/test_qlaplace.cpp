#include <doctest.h>

#include <lensopt/error.hpp>
#include <lensopt/qlaplace.hpp>

#include <cmath>
#include <random>

using namespace lensopt;

namespace
{
	struct Sampler
	{
		std::mt19937_64 rng{2024};
		std::uniform_real_distribution<double> U{-1.0, 1.0};

		Vec2 in_disk(double r)
		{
			Vec2 x;
			do
				x = Vec2(U(rng), U(rng));
			while (x.norm() > 1.0);
			return r * x;
		}
	};

	// direct evaluation of |x|^{q-3}(x.y)x without the library's norm helper
	Vec2 calL_brute(const Vec2 &x, const Vec2 &y, double q)
	{
		const double n = std::sqrt(x[0] * x[0] + x[1] * x[1]);
		const double c = std::pow(n, q - 3.0) * (x[0] * y[0] + x[1] * y[1]);
		return Vec2(c * x[0], c * x[1]);
	}
} // namespace

TEST_SUITE("qlaplace")
{
	TEST_CASE("regularized norm")
	{
		const RegularizedNorm r0{0.0}, r1{1e-3};
		const Vec2 g(3.0, 4.0);
		CHECK(r0(g) == 5.0);
		CHECK(r1(g) >= r0(g));
		CHECK(r1(Vec2::Zero()) == doctest::Approx(1e-3));
		CHECK(r0.pow(Vec2::Zero(), 0.0) == 1.0);
	}

	TEST_CASE("flux examples")
	{
		Sampler s;
		for (int i = 0; i < 20; ++i)
		{
			const Vec2 g = s.in_disk(5.0);
			CHECK((flux(g, 1.0) - g).norm() == 0.0);
		}
		for (double q : {1.5, 2.0, 3.0, 4.0})
			CHECK(flux(Vec2::Zero(), q).norm() == 0.0);
		CHECK((flux(Vec2(2.0, 0.0), 3.0) - Vec2(8.0, 0.0)).norm() < 1e-14);
	}

	TEST_CASE("linearization examples and directional derivative")
	{
		const Vec2 g(0.6, -0.8), Yperp(0.8, 0.6);
		for (double q : {1.5, 3.0, 4.0})
			CHECK((flux_linearized(Yperp, g, q) - std::pow(g.norm(), q - 1.0) * Yperp).norm() < 1e-14);
		const Vec2 g2(1.5, 2.0);
		CHECK((flux_linearized(g2, g2, 3.0) - 3.0 * g2.squaredNorm() * g2).norm() < 1e-12);

		Sampler s;
		for (double q : {1.5, 2.5, 3.0, 4.0})
			for (int trial = 0; trial < 10; ++trial)
			{
				const Vec2 x = s.in_disk(2.0) + Vec2(0.5, 0.0), Y = s.in_disk(1.0);
				const Vec2 exact = flux_linearized(Y, x, q);
				CHECK((flux_jacobian(x, q) * Y - exact).norm() < 1e-12 * (1 + exact.norm()));
				double prev = 0.0;
				for (double step : {1e-2, 1e-3, 1e-4})
				{
					const Vec2 fd = (flux(x + step * Y, q) - flux(x - step * Y, q)) / (2 * step);
					const double err = (fd - exact).norm();
					if (prev > 1e-11)
						CHECK(std::log10(prev / err) == doctest::Approx(2.0).epsilon(0.15));
					prev = err;
				}
			}
	}

	TEST_CASE("singular linearization at zero gradient")
	{
		try
		{
			flux_linearized(Vec2(1, 0), Vec2::Zero(), 2.5);
			FAIL("expected an error");
		}
		catch (const Error &e)
		{
			CHECK(e.kind() == ErrorKind::SingularLinearization);
		}
		CHECK_NOTHROW(flux_linearized(Vec2(1, 0), Vec2::Zero(), 2.5, RegularizedNorm{1e-8}));
	}

	TEST_CASE("regularization converges to the plain flux")
	{
		const Vec2 g(0.3, -0.2);
		double prev = 1.0;
		for (double eps : {1e-4, 1e-6, 1e-8})
		{
			const double d = (flux(g, 2.5, RegularizedNorm{eps}) - flux(g, 2.5)).norm();
			CHECK(d < prev);
			prev = d;
		}
		CHECK(prev < 1e-14);
	}

	TEST_CASE("calL examples")
	{
		CHECK(calL(Vec2(1, 2), Vec2(-2, 1), 3.5).norm() == 0.0);
		CHECK((calL(Vec2(1, 0), Vec2(1, 0), 3.0) - Vec2(1, 0)).norm() == 0.0);
		Sampler s;
		for (int i = 0; i < 100; ++i)
		{
			const Vec2 x = s.in_disk(3.0), y = s.in_disk(3.0);
			CHECK((calL(x, y, 4.0) - calL_brute(x, y, 4.0)).norm() <= 1e-12 * (1 + calL_brute(x, y, 4.0).norm()));
		}
	}

	TEST_CASE("Gauss-Legendre rule integrates polynomials exactly")
	{
		const GaussRule g = gauss_legendre01(8);
		for (int p = 0; p < 16; ++p)
		{
			double s = 0.0;
			for (std::size_t i = 0; i < g.nodes.size(); ++i)
				s += g.weights[i] * std::pow(g.nodes[i], p);
			CHECK(s == doctest::Approx(1.0 / (p + 1)).epsilon(1e-14));
		}
	}

	TEST_CASE("representation formula")
	{
		Sampler s;
		const Vec2 x = s.in_disk(2.0);
		CHECK(repr_formula_residual(x, x, 2.5) == 0.0);
		for (int i = 0; i < 200; ++i)
		{
			const Vec2 a = s.in_disk(3.0), b = s.in_disk(3.0);
			CHECK(repr_formula_residual(a, b, 3.0, 8) <= 1e-12 * (1 + std::pow(std::max(a.norm(), b.norm()), 3)));
			CHECK(repr_formula_residual(a, b, 2.5, 64) <= 1e-8);
		}
		for (double q = 2.1; q <= 5.0; q += 0.3)
			for (int i = 0; i < 50; ++i)
				CHECK(repr_formula_residual(s.in_disk(10.0), s.in_disk(10.0), q, 64) <= 1e-8 * std::pow(10.0, q));
	}

	TEST_CASE("monotonicity over random pairs")
	{
		Sampler s;
		for (double q : {1.0, 2.0, 2.5, 3.0, 4.0})
		{
			double worst = 0.0;
			for (int i = 0; i < 100000; ++i)
			{
				const Vec2 x = s.in_disk(1.0), y = s.in_disk(1.0);
				const double lhs = (flux(x, q) - flux(y, q)).dot(x - y);
				worst = std::max(worst, std::pow(2.0, 1.0 - q) * std::pow((x - y).norm(), q + 1.0) - lhs);
			}
			CHECK(worst <= 1e-12);
		}
	}

	TEST_CASE("inequality oracles: equality and trivial cases")
	{
		Sampler s;
		for (double q : {1.0, 2.0, 3.0, 4.0})
		{
			const Vec2 x = s.in_disk(2.0);
			const InequalityReport anti = inequality_oracles(x, -x, q, 0.5);
			CHECK(anti.monotone_lhs == doctest::Approx(4.0 * std::pow(x.norm(), q + 1.0)).epsilon(1e-12));
			CHECK(anti.monotone_rhs == doctest::Approx(4.0 * std::pow(x.norm(), q + 1.0)).epsilon(1e-12));
			const InequalityReport same = inequality_oracles(x, x, q, 0.5);
			CHECK(same.monotone_ok);
			CHECK(same.monotone_lhs == 0.0);
			CHECK(same.segment_bound_ok);
		}
	}

	TEST_CASE("inequality oracles: Hoelder ratios stay bounded")
	{
		Sampler s;
		for (double q : {2.5, 3.0, 4.0})
			for (double eta : {0.0, 0.5, 1.0})
			{
				double fmax = 0.0, pmax = 0.0, lmax = 0.0;
				for (int i = 0; i < 20000; ++i)
				{
					const InequalityReport r =
						inequality_oracles(s.in_disk(1.0), s.in_disk(1.0), q, eta, s.in_disk(1.0), s.in_disk(1.0));
					CHECK(r.segment_bound_ok);
					CHECK(r.monotone_ok);
					fmax = std::max(fmax, r.flux_holder_ratio);
					pmax = std::max(pmax, r.power_holder_ratio);
					lmax = std::max(lmax, r.calL_holder_ratio);
				}
				CHECK(std::isfinite(fmax));
				CHECK(std::isfinite(pmax));
				CHECK(std::isfinite(lmax));
				CHECK(fmax < 1e3);
				CHECK(pmax < 1e3);
				CHECK(lmax < 1e3);
			}
	}

	TEST_CASE("Young constant")
	{
		CHECK(young_constant(0.5, 2.0) == doctest::Approx(0.5).epsilon(1e-15));
		CHECK(young_constant(1.0, 2.0) == doctest::Approx(0.25).epsilon(1e-15));
		// |xy| <= eps|x|^r + C|y|^{r'} on a grid, with equality reached near the maximizer
		for (double r : {1.5, 2.0, 3.0})
			for (double eps : {0.1, 1.0, 3.0})
			{
				const double C = young_constant(eps, r);
				const double upper = 2.0 * std::pow(1.0 / (eps * r), 1.0 / (r - 1.0));
				double best = -1.0;
				for (int i = 0; i <= 20000; ++i)
				{
					const double x = upper * i / 20000;
					best = std::max(best, x - eps * std::pow(x, r));
				}
				CHECK(best <= C * (1 + 1e-12));
				CHECK(best == doctest::Approx(C).epsilon(1e-4));
			}
	}
}
