#pragma once

#include <lensopt/fem.hpp>
#include <lensopt/qlaplace.hpp>

namespace lensopt
{
	struct TimeGrid
	{
		double T = 0.5;
		int N = 128;

		double dt() const { return T / N; }
		double time(int n) const { return T * n / N; }
		/// Trapezoid weight of time level n.
		double weight(int n) const { return (n == 0 || n == N) ? 0.5 * dt() : dt(); }
		void validate() const;
		bool operator==(const TimeGrid &) const = default;
	};

	struct SolverOptions
	{
		double eps_reg = 1e-8;
		double abs_tol = 1e-10;
		double rel_tol = 1e-12;
		int max_iter = 30;
		double degeneracy_floor = 0.1;
		double fixed_point_damping = 0.5;
		int fixed_point_max_iter = 400;

		bool operator==(const SolverOptions &) const = default;
	};

	/// Nodal histories. `a` is the per-interval increment (v^{n+1}-v^n)/dt
	/// (size N), `a_nodal` its average at the time levels (one-sided at the ends).
	struct StateTrajectory
	{
		TimeGrid grid;
		std::vector<Vector> u;
		std::vector<Vector> v;
		std::vector<Vector> a;
		std::vector<Vector> a_nodal;
		int newton_iterations = 0;
		int fallback_steps = 0;
		double max_residual = 0.0;

		Vector u_mid(int n) const { return 0.5 * (u[n] + u[n + 1]); }
		Vector v_mid(int n) const { return 0.5 * (v[n] + v[n + 1]); }
	};

	/// Element-wise coefficients and the constant operators of the state
	/// equation on one mesh.
	class WesterveltOperator
	{
	public:
		WesterveltOperator(const Mesh2D &mesh, const MaterialParams &params, double eps_reg);
		WesterveltOperator(const WesterveltOperator &) = delete;
		WesterveltOperator &operator=(const WesterveltOperator &) = delete;

		const P1Space &space() const { return space_; }
		const MaterialParams &params() const { return params_; }
		const MaterialCoeffs &coeffs(std::size_t e) const { return params_.of(space_.mesh().labels[e]); }
		RegularizedNorm reg() const { return reg_; }

		/// int (1/lambda) phi_i phi_j
		const SparseMatrix &mass_lambda() const { return m_lambda_; }
		/// plain mass matrix
		const SparseMatrix &mass() const { return mass_; }
		/// int (1/rho) grad phi_i . grad phi_j
		const SparseMatrix &stiffness() const { return k_; }
		/// int b(1-delta) grad phi_i . grad phi_j
		const SparseMatrix &damping() const { return c_; }

		/// int (k/lambda) w z phi_i
		Vector nonlinear_triple(const Vector &w, const Vector &z) const;
		/// Matrix of z -> int (k/lambda) w z phi_i
		SparseMatrix nonlinear_mass(const Vector &w) const;
		/// int b delta |grad v|_eps^{q-1} grad v . grad phi_i
		Vector flux_force(const Vector &v) const;
		/// Derivative of flux_force: int b delta grad phi_i^T G(grad v) grad phi_j
		SparseMatrix flux_tangent(const Vector &v) const;

	private:
		Mesh2D mesh_copy_;
		P1Space space_;
		MaterialParams params_;
		RegularizedNorm reg_;
		SparseMatrix mass_, m_lambda_, k_, c_;
	};

	/// Implicit midpoint on (u, v = du/dt) with Newton on v^{n+1}.
	StateTrajectory solve_state(const Mesh2D &mesh, const MaterialParams &params, const TimeGrid &grid, const Vector &u0,
								const Vector &u1, const SolverOptions &opts = {});

	/// Residual of the midpoint step n -> n+1 (interior rows; Dirichlet rows zeroed).
	Vector step_residual(const WesterveltOperator &op, const StateTrajectory &traj, int n);

	/// Mass-matrix quadrature in space, trapezoid in time.
	double evaluate_cost(const Mesh2D &mesh, const StateTrajectory &traj, const std::vector<Vector> &u_d);

	struct DiagnosticsBounds
	{
		// degeneracy
		double a0 = 0.0;
		double min_one_minus_2ku = 1.0;
		double max_one_minus_2ku = 1.0;
		bool degeneracy_ok = true;

		// left side of the state energy estimate
		double u_linf_linf_sq = 0.0;
		double utt_l2l2_sq = 0.0;
		double grad_ut_l2l2_sq = 0.0;
		double grad_ut_lq1lq1 = 0.0; // ||grad u_t||^{q+1}_{L^{q+1}L^{q+1}}
		double ut_linf_l2_sq = 0.0;
		double grad_u_linf_l2_sq = 0.0;
		double grad_ut_linf_l2_sq = 0.0;
		double grad_ut_linf_lq1 = 0.0; // ||grad u_t||^{q+1}_{L^inf L^{q+1}}
		double energy_lhs = 0.0;

		// data side
		double data_norm = 0.0;
		double energy_ratio = 0.0;

		// set W thresholds realized by the trajectory
		double m_bar = 0.0;
		double M_bar = 0.0;
		double kappa_T = 0.0;

		// measured surrogates for embedding constants
		double c_linf_w1q = 0.0; // ||u||_inf / ||grad u||_{L^{q+1}}
		double c_h1_l4 = 0.0;    // ||u_t||_{L^4} / ||grad u_t||_{L^2}
		double c_poincare = 0.0; // ||u_t||_{L^2} / ||grad u_t||_{L^2}

		// coefficient of the adjoint smallness conditions
		double grad_ut_linf_linf = 0.0;
		double grad_utt_l2_linf = 0.0;
	};

	/// a0 = 2 max|k| max_t ||u||_inf and the direct min/max of 1 - 2ku.
	DiagnosticsBounds degeneracy_margin(const Mesh2D &mesh, const StateTrajectory &traj, const MaterialParams &params,
										DiagnosticsBounds bounds = {});

	DiagnosticsBounds energy_report(const Mesh2D &mesh, const StateTrajectory &traj, const MaterialParams &params,
									DiagnosticsBounds bounds = {});

	/// Discrete linear energy (1/2) v^T M_lambda v + (1/2) u^T K u per level.
	std::vector<double> linear_energy(const WesterveltOperator &op, const StateTrajectory &traj);

	/// Integral of w^4 over the mesh, exact for P1 w.
	double integral_fourth_power(const P1Space &space, const Vector &w);
} // namespace lensopt
