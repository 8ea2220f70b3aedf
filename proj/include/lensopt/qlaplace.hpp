#pragma once

#include <lensopt/geometry.hpp>

namespace lensopt
{
	/// |g|_eps = sqrt(|g|^2 + eps^2).
	struct RegularizedNorm
	{
		double eps_reg = 0.0;

		double operator()(const Vec2 &g) const;
		/// |g|_eps^p with the convention 0^0 = 1.
		double pow(const Vec2 &g, double p) const;
	};

	/// |g|_eps^{q-1} g
	Vec2 flux(const Vec2 &g, double q, RegularizedNorm reg = {});

	/// G(Y) = |g|_eps^{q-1} Y + (q-1)|g|_eps^{q-3} (g.Y) g
	Vec2 flux_linearized(const Vec2 &Y, const Vec2 &g, double q, RegularizedNorm reg = {});

	/// Matrix of the linearization above (symmetric).
	Mat2 flux_jacobian(const Vec2 &g, double q, RegularizedNorm reg = {});

	/// |x|_eps^{q-3} (x.y) x
	Vec2 calL(const Vec2 &x, const Vec2 &y, double q, RegularizedNorm reg = {});

	/// Gauss-Legendre nodes and weights on [0, 1].
	struct GaussRule
	{
		std::vector<double> nodes;
		std::vector<double> weights;
	};
	GaussRule gauss_legendre01(int n);

	/// Euclidean norm of the difference of the two sides of
	///   |x|^{q-1}x - |y|^{q-1}y = (x-y) int_0^1 |y+s(x-y)|^{q-1} ds
	///                             + (q-1) int_0^1 L(y+s(x-y), x-y) ds
	/// with an n_quad point Gauss rule in s.
	double repr_formula_residual(const Vec2 &x, const Vec2 &y, double q, int n_quad = 64);

	struct InequalityReport
	{
		// |y+s(x-y)|^{q-1} <= |y|^{q-1} + |x|^{q-1}, s sampled on [0,1]
		bool segment_bound_ok = true;
		double segment_bound_slack = 0.0;
		// (flux(x)-flux(y)).(x-y) >= 2^{1-q}|x-y|^{q+1}
		bool monotone_ok = true;
		double monotone_slack = 0.0;
		double monotone_lhs = 0.0;
		double monotone_rhs = 0.0;
		// empirical C_q of the Hoelder bounds (LHS over the bound without C_q)
		double flux_holder_ratio = 0.0;
		double power_holder_ratio = 0.0;
		double calL_holder_ratio = 0.0;
	};

	/// Oracles for the q-Laplace inequality chain. z, w are the second pair
	/// of the calL difference bound (only evaluated for q > 2).
	InequalityReport inequality_oracles(const Vec2 &x, const Vec2 &y, double q, double eta, const Vec2 &z = Vec2::Zero(),
										const Vec2 &w = Vec2::Zero());

	/// Smallest C with |xy| <= eps|x|^r + C|y|^{r/(r-1)} for all scalars:
	/// C = (r-1) r^{-r/(r-1)} eps^{-1/(r-1)}.
	double young_constant(double eps, double r);
} // namespace lensopt
