#pragma once

#include <lensopt/state.hpp>

namespace lensopt
{
	/// Forward-time nodal histories of p and dp/dt. The solve runs on the
	/// reversed variable p~(s) = p(T - s) from zero initial data.
	struct AdjointTrajectory
	{
		TimeGrid grid;
		std::vector<Vector> p;
		std::vector<Vector> pt;

		Vector p_mid(int n) const { return 0.5 * (p[n] + p[n + 1]); }
		double max_abs() const;
	};

	/// C + D with D = int b delta grad phi_i^T G(grad v) grad phi_j, the
	/// damping block acting on dp~/ds.
	SparseMatrix adjoint_damping(const WesterveltOperator &op, const Vector &v);

	/// Time derivative of D over the interval [v0, v1] of length dt, from
	/// differences of |grad v|^{q-1}, |grad v|^{q-3} and grad v across the
	/// interval, with the remaining factors at the interval midpoint.
	SparseMatrix adjoint_damping_rate(const WesterveltOperator &op, const Vector &v0, const Vector &v1, double dt);

	/// Source 2 M (u - u_d) at every time level.
	std::vector<Vector> adjoint_source(const WesterveltOperator &op, const StateTrajectory &state, const std::vector<Vector> &u_d);

	AdjointTrajectory solve_adjoint(const Mesh2D &mesh, const MaterialParams &params, const StateTrajectory &state,
									const std::vector<Vector> &u_d, const TimeGrid &grid, const SolverOptions &opts = {});

	struct SmallnessReport
	{
		double eps = 0.25;
		double c_q = 0.0;
		// left and right sides of the three conditions
		double lhs[3] = {0.0, 0.0, 0.0};
		double rhs[3] = {0.0, 0.0, 0.0};
		bool holds[3] = {true, true, true};

		double margin(int i) const { return rhs[i] - lhs[i]; }
		bool all() const { return holds[0] && holds[1] && holds[2]; }
	};

	/// Advisory evaluation of the adjoint smallness conditions with the
	/// measured surrogates stored in `bounds` (from energy_report). C_q is
	/// taken as (q-1)(3+|q-3|), the factor bounding the coefficient of
	/// |grad p~||grad dp~/ds| by |grad u_t|^{q-2}|grad u_tt|.
	SmallnessReport smallness_report(const StateTrajectory &state, const MaterialParams &params, const DiagnosticsBounds &bounds,
									 double eps = 0.25);
} // namespace lensopt
