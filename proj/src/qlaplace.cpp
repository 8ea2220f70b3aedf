#include <lensopt/qlaplace.hpp>

#include <lensopt/error.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <algorithm>

namespace lensopt
{
	double RegularizedNorm::operator()(const Vec2 &g) const
	{
		return eps_reg == 0.0 ? g.norm() : std::sqrt(g.squaredNorm() + eps_reg * eps_reg);
	}

	double RegularizedNorm::pow(const Vec2 &g, double p) const
	{
		if (p == 0.0)
			return 1.0;
		return std::pow((*this)(g), p);
	}

	Vec2 flux(const Vec2 &g, double q, RegularizedNorm reg)
	{
		if (q == 1.0)
			return g;
		return reg.pow(g, q - 1.0) * g;
	}

	Mat2 flux_jacobian(const Vec2 &g, double q, RegularizedNorm reg)
	{
		if (q == 1.0)
			return Mat2::Identity();
		const double n = reg(g);
		if (n == 0.0)
		{
			if (q < 3.0)
				throw Error(ErrorKind::SingularLinearization, "|g|^{q-3} undefined at g = 0 for q < 3 without regularization");
			return Mat2::Zero();
		}
		return std::pow(n, q - 1.0) * Mat2::Identity() + (q - 1.0) * std::pow(n, q - 3.0) * g * g.transpose();
	}

	Vec2 flux_linearized(const Vec2 &Y, const Vec2 &g, double q, RegularizedNorm reg)
	{
		return flux_jacobian(g, q, reg) * Y;
	}

	Vec2 calL(const Vec2 &x, const Vec2 &y, double q, RegularizedNorm reg)
	{
		const double n = reg(x);
		if (n == 0.0)
		{
			if (q < 3.0)
				throw Error(ErrorKind::SingularLinearization, "|x|^{q-3} undefined at x = 0 for q < 3 without regularization");
			return Vec2::Zero();
		}
		return reg.pow(x, q - 3.0) * x.dot(y) * x;
	}

	GaussRule gauss_legendre01(int n)
	{
		GaussRule rule;
		rule.nodes.resize(n);
		rule.weights.resize(n);
		for (int i = 0; i < (n + 1) / 2; ++i)
		{
			// Newton on P_n from the Chebyshev-like initial guess
			double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
			double dp = 0.0;
			for (int it = 0; it < 100; ++it)
			{
				double p0 = 1.0, p1 = x;
				for (int k = 2; k <= n; ++k)
				{
					const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
					p0 = p1;
					p1 = p2;
				}
				const double pn = n == 0 ? 1.0 : (n == 1 ? x : p1);
				dp = n * (x * pn - (n == 1 ? 1.0 : p0)) / (x * x - 1.0);
				const double dx = pn / dp;
				x -= dx;
				if (std::abs(dx) < 1e-16)
					break;
			}
			const double w = 2.0 / ((1.0 - x * x) * dp * dp);
			rule.nodes[i] = 0.5 * (1.0 - x);
			rule.nodes[n - 1 - i] = 0.5 * (1.0 + x);
			rule.weights[i] = rule.weights[n - 1 - i] = 0.5 * w;
		}
		return rule;
	}

	double repr_formula_residual(const Vec2 &x, const Vec2 &y, double q, int n_quad)
	{
		const Vec2 d = x - y;
		if (d.squaredNorm() == 0.0)
			return 0.0;
		const RegularizedNorm exact{};
		const GaussRule rule = gauss_legendre01(n_quad);

		// |y + s d| is only Lipschitz where the segment passes the origin, so
		// the s-interval is split at the closest point and graded towards it
		const double s_star = std::clamp(-y.dot(d) / d.squaredNorm(), 0.0, 1.0);
		std::vector<std::pair<double, double>> panels;
		auto graded = [&](double from, double to) {
			if (to <= from)
				return;
			double far = to;
			for (int level = 0; level < 12; ++level)
			{
				const double near = from + 0.125 * (far - from);
				panels.emplace_back(near, far);
				far = near;
			}
			panels.emplace_back(from, far);
		};
		graded(s_star, 1.0);
		// mirrored grading on [0, s_star]
		{
			std::vector<std::pair<double, double>> left;
			std::swap(left, panels);
			graded(0.0, s_star);
			for (auto &p : panels)
				p = {s_star - p.second, s_star - p.first};
			panels.insert(panels.end(), left.begin(), left.end());
		}

		double scalar = 0.0;
		Vec2 vec = Vec2::Zero();
		for (const auto &[a, b] : panels)
		{
			for (int i = 0; i < n_quad; ++i)
			{
				const double s = a + (b - a) * rule.nodes[i];
				const double wgt = (b - a) * rule.weights[i];
				const Vec2 z = y + s * d;
				const double nz = z.norm();
				scalar += wgt * exact.pow(z, q - 1.0);
				if (nz > 0.0)
					vec += wgt * std::pow(nz, q - 3.0) * z.dot(d) * z;
			}
		}
		const Vec2 lhs = flux(x, q) - flux(y, q);
		const Vec2 rhs = d * scalar + (q - 1.0) * vec;
		return (lhs - rhs).norm();
	}

	InequalityReport inequality_oracles(const Vec2 &x, const Vec2 &y, double q, double eta, const Vec2 &z, const Vec2 &w)
	{
		InequalityReport rep;
		const double nx = x.norm(), ny = y.norm(), nd = (x - y).norm();

		rep.segment_bound_slack = std::numeric_limits<double>::infinity();
		for (int i = 0; i <= 64; ++i)
		{
			const double s = i / 64.0;
			const double lhs = std::pow((y + s * (x - y)).norm(), q - 1.0);
			rep.segment_bound_slack = std::min(rep.segment_bound_slack, std::pow(ny, q - 1.0) + std::pow(nx, q - 1.0) - lhs);
		}
		rep.segment_bound_ok = rep.segment_bound_slack >= 0.0;

		rep.monotone_lhs = (flux(x, q) - flux(y, q)).dot(x - y);
		rep.monotone_rhs = std::pow(2.0, 1.0 - q) * std::pow(nd, q + 1.0);
		rep.monotone_slack = rep.monotone_lhs - rep.monotone_rhs;
		rep.monotone_ok = rep.monotone_slack >= 0.0;

		auto ratio = [](double lhs, double core) { return core > 0.0 ? lhs / core : 0.0; };
		const double core = std::pow(nd, 1.0 - eta) * (std::pow(ny, q - 1.0 + eta) + std::pow(nx, q - 1.0 + eta));
		rep.flux_holder_ratio = ratio((flux(x, q) - flux(y, q)).norm(), core);
		rep.power_holder_ratio = ratio(std::abs(std::pow(nx, q - 1.0) - std::pow(ny, q - 1.0)), core);

		if (q > 2.0 && nx > 0.0 && z.norm() > 0.0)
		{
			const double nz = z.norm();
			const double lhs = (calL(x, y, q) - calL(z, w, q)).norm();
			const double extra = std::pow(nz, q - 2.0) * ((y - w).norm() * nx + w.norm() * (x - z).norm());
			const double core6 = std::pow((x - z).norm(), 1.0 - eta) * (std::pow(nx, q - 3.0 + eta) + std::pow(nz, q - 3.0 + eta)) * nx * y.norm();
			rep.calL_holder_ratio = ratio(std::max(0.0, lhs - extra), core6);
		}
		return rep;
	}

	double young_constant(double eps, double r)
	{
		return (r - 1.0) * std::pow(r, -r / (r - 1.0)) * std::pow(eps, -1.0 / (r - 1.0));
	}
} // namespace lensopt
