#include <lensopt/state.hpp>

#include <lensopt/error.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace lensopt
{
	void TimeGrid::validate() const
	{
		if (!(T > 0.0) || N < 2)
			throw Error(ErrorKind::ValidationError, "time grid needs T > 0 and N >= 2");
	}

	WesterveltOperator::WesterveltOperator(const Mesh2D &mesh, const MaterialParams &params, double eps_reg)
		: mesh_copy_(mesh), space_(mesh_copy_), params_(params), reg_{eps_reg}
	{
		mass_ = space_.mass([](std::size_t) { return 1.0; });
		m_lambda_ = space_.mass([this](std::size_t e) { return 1.0 / coeffs(e).lambda; });
		k_ = space_.stiffness([this](std::size_t e) { return 1.0 / coeffs(e).rho; });
		c_ = space_.stiffness([this](std::size_t e) { return coeffs(e).b * (1.0 - coeffs(e).delta); });
	}

	Vector WesterveltOperator::nonlinear_triple(const Vector &w, const Vector &z) const
	{
		return space_.triple(w, z, [this](std::size_t e) { return coeffs(e).k / coeffs(e).lambda; });
	}

	SparseMatrix WesterveltOperator::nonlinear_mass(const Vector &w) const
	{
		return space_.weighted_mass(w, [this](std::size_t e) { return coeffs(e).k / coeffs(e).lambda; });
	}

	Vector WesterveltOperator::flux_force(const Vector &v) const
	{
		const double q = params_.q;
		return space_.assemble_vector([&](std::size_t e) {
			const auto &c = coeffs(e);
			const Vec2 f = c.b * c.delta * space_.area(e) * flux(space_.gradient(e, v), q, reg_);
			const auto &g = space_.grads(e);
			return Vec3(f.dot(g[0]), f.dot(g[1]), f.dot(g[2]));
		});
	}

	SparseMatrix WesterveltOperator::flux_tangent(const Vector &v) const
	{
		const double q = params_.q;
		return space_.assemble([&](std::size_t e) {
			const auto &c = coeffs(e);
			const Mat2 G = flux_jacobian(space_.gradient(e, v), q, reg_);
			const auto &g = space_.grads(e);
			Mat3 m;
			for (int a = 0; a < 3; ++a)
				for (int b = 0; b < 3; ++b)
					m(a, b) = g[a].dot(G * g[b]);
			return Mat3(c.b * c.delta * space_.area(e) * m);
		});
	}

	namespace
	{
		struct StepState
		{
			Vector u_mid, v_mid, a;
		};

		StepState midpoint(const Vector &un, const Vector &vn, const Vector &v, double dt)
		{
			return {un + 0.25 * dt * (vn + v), 0.5 * (vn + v), (v - vn) / dt};
		}

		Vector residual(const WesterveltOperator &op, const StepState &s)
		{
			Vector r = op.mass_lambda() * s.a - 2.0 * op.nonlinear_triple(s.u_mid, s.a) + op.stiffness() * s.u_mid +
					   op.damping() * s.v_mid + op.flux_force(s.v_mid) - 2.0 * op.nonlinear_triple(s.v_mid, s.v_mid);
			op.space().zero_boundary(r);
			return r;
		}

		SparseMatrix jacobian(const WesterveltOperator &op, const StepState &s, double dt)
		{
			SparseMatrix J = (1.0 / dt) * (op.mass_lambda() - 2.0 * op.nonlinear_mass(s.u_mid));
			J -= (0.5 * dt) * op.nonlinear_mass(s.a);
			J += (0.25 * dt) * op.stiffness();
			J += 0.5 * op.damping();
			J += 0.5 * op.flux_tangent(s.v_mid);
			J -= 2.0 * op.nonlinear_mass(s.v_mid);
			op.space().apply_dirichlet(J);
			return J;
		}

		void check_degeneracy(const WesterveltOperator &op, const Vector &u, double floor, int step)
		{
			const auto &space = op.space();
			for (std::size_t e = 0; e < space.num_elements(); ++e)
			{
				const double k = op.coeffs(e).k;
				if (k == 0.0)
					continue;
				for (int v : space.dofs(e))
				{
					const double m = 1.0 - 2.0 * k * u[v];
					if (!(m > floor))
						throw Error(ErrorKind::DegeneracyBreach,
									"1 - 2ku = " + std::to_string(m) + " at node " + std::to_string(v) + " (floor " +
										std::to_string(floor) + ") at time step " + std::to_string(step),
									step);
				}
			}
		}
	} // namespace

	Vector step_residual(const WesterveltOperator &op, const StateTrajectory &traj, int n)
	{
		return residual(op, midpoint(traj.u[n], traj.v[n], traj.v[n + 1], traj.grid.dt()));
	}

	StateTrajectory solve_state(const Mesh2D &mesh, const MaterialParams &params, const TimeGrid &grid, const Vector &u0,
								const Vector &u1, const SolverOptions &opts)
	{
		grid.validate();
		const auto n_nodes = static_cast<Eigen::Index>(mesh.num_vertices());
		if (u0.size() != n_nodes || u1.size() != n_nodes)
			throw Error(ErrorKind::GridMismatch, "initial data size does not match the mesh");

		WesterveltOperator op(mesh, params, opts.eps_reg);
		const double dt = grid.dt();

		StateTrajectory traj;
		traj.grid = grid;
		traj.u.reserve(grid.N + 1);
		traj.v.reserve(grid.N + 1);
		Vector u = u0, v = u1;
		op.space().zero_boundary(u);
		op.space().zero_boundary(v);
		check_degeneracy(op, u, opts.degeneracy_floor, 0);
		traj.u.push_back(u);
		traj.v.push_back(v);

		LinearSolver solver;
		for (int n = 0; n < grid.N; ++n)
		{
			const Vector &un = traj.u[n];
			const Vector &vn = traj.v[n];
			Vector guess = n > 0 ? Vector(vn + dt * traj.a.back()) : vn;

			Vector x = guess;
			Vector r = residual(op, midpoint(un, vn, x, dt));
			double r0 = op.space().interior_norm(r);
			double rn = r0;
			bool converged = rn <= opts.abs_tol;
			for (int it = 0; it < opts.max_iter && !converged; ++it)
			{
				const StepState s = midpoint(un, vn, x, dt);
				solver.factorize(jacobian(op, s, dt));
				x -= solver.solve(r);
				op.space().zero_boundary(x);
				r = residual(op, midpoint(un, vn, x, dt));
				const double prev = rn;
				rn = op.space().interior_norm(r);
				++traj.newton_iterations;
				converged = rn <= opts.abs_tol || rn <= opts.rel_tol * r0;
				if (!std::isfinite(rn) || (it >= 3 && rn > 0.9 * prev))
					break;
			}

			if (!converged)
			{
				// damped fixed point with the Jacobian frozen at the initial guess
				++traj.fallback_steps;
				x = guess;
				r = residual(op, midpoint(un, vn, x, dt));
				r0 = rn = op.space().interior_norm(r);
				solver.factorize(jacobian(op, midpoint(un, vn, x, dt), dt));
				for (int it = 0; it < opts.fixed_point_max_iter && !converged; ++it)
				{
					x -= opts.fixed_point_damping * solver.solve(r);
					op.space().zero_boundary(x);
					r = residual(op, midpoint(un, vn, x, dt));
					rn = op.space().interior_norm(r);
					converged = rn <= opts.abs_tol || rn <= opts.rel_tol * r0;
					if (!std::isfinite(rn))
						break;
				}
				if (!converged)
					throw Error(ErrorKind::NonlinearSolveFailure,
								"residual " + std::to_string(rn) + " at time step " + std::to_string(n + 1), n + 1);
			}
			traj.max_residual = std::max(traj.max_residual, rn);

			Vector a = (x - vn) / dt;
			Vector u_next = un + 0.5 * dt * (vn + x);
			op.space().zero_boundary(u_next);
			check_degeneracy(op, u_next, opts.degeneracy_floor, n + 1);
			traj.a.push_back(std::move(a));
			traj.u.push_back(std::move(u_next));
			traj.v.push_back(std::move(x));
		}

		traj.a_nodal.resize(grid.N + 1);
		traj.a_nodal[0] = traj.a.front();
		traj.a_nodal[grid.N] = traj.a.back();
		for (int n = 1; n < grid.N; ++n)
			traj.a_nodal[n] = 0.5 * (traj.a[n - 1] + traj.a[n]);
		return traj;
	}

	double evaluate_cost(const Mesh2D &mesh, const StateTrajectory &traj, const std::vector<Vector> &u_d)
	{
		const int N = traj.grid.N;
		if (static_cast<int>(u_d.size()) != N + 1)
			throw Error(ErrorKind::GridMismatch, "target has " + std::to_string(u_d.size()) + " levels, state has " + std::to_string(N + 1));
		P1Space space(mesh);
		const SparseMatrix M = space.mass([](std::size_t) { return 1.0; });
		double J = 0.0;
		for (int n = 0; n <= N; ++n)
		{
			if (u_d[n].size() != traj.u[n].size())
				throw Error(ErrorKind::GridMismatch, "target field size does not match the mesh");
			const Vector e = traj.u[n] - u_d[n];
			J += traj.grid.weight(n) * e.dot(M * e);
		}
		return J;
	}

	double integral_fourth_power(const P1Space &space, const Vector &w)
	{
		double s = 0.0;
		for (std::size_t e = 0; e < space.num_elements(); ++e)
		{
			const Vec3 x = space.local(e, w);
			// complete homogeneous symmetric polynomial of degree 4
			double h4 = 0.0;
			for (int i = 0; i < 3; ++i)
				for (int j = i; j < 3; ++j)
					for (int k = j; k < 3; ++k)
						for (int l = k; l < 3; ++l)
							h4 += x[i] * x[j] * x[k] * x[l];
			s += space.area(e) / 15.0 * h4;
		}
		return s;
	}

	DiagnosticsBounds degeneracy_margin(const Mesh2D &mesh, const StateTrajectory &traj, const MaterialParams &params,
										DiagnosticsBounds bounds)
	{
		const double kmax = std::max(std::abs(params.lens.k), std::abs(params.fluid.k));
		double umax = 0.0;
		for (const auto &u : traj.u)
			umax = std::max(umax, u.cwiseAbs().maxCoeff());
		bounds.a0 = 2.0 * kmax * umax;
		bounds.min_one_minus_2ku = 1.0;
		bounds.max_one_minus_2ku = 1.0;
		for (std::size_t e = 0; e < mesh.num_triangles(); ++e)
		{
			const double k = params.of(mesh.labels[e]).k;
			for (const auto &u : traj.u)
			{
				for (int v : mesh.triangles[e])
				{
					const double m = 1.0 - 2.0 * k * u[v];
					bounds.min_one_minus_2ku = std::min(bounds.min_one_minus_2ku, m);
					bounds.max_one_minus_2ku = std::max(bounds.max_one_minus_2ku, m);
				}
			}
		}
		bounds.degeneracy_ok = bounds.a0 < 1.0;
		return bounds;
	}

	DiagnosticsBounds energy_report(const Mesh2D &mesh, const StateTrajectory &traj, const MaterialParams &params,
									DiagnosticsBounds b)
	{
		b = degeneracy_margin(mesh, traj, params, b);
		P1Space space(mesh);
		const double q = params.q;
		const SparseMatrix M = space.mass([](std::size_t) { return 1.0; });
		const SparseMatrix S = space.stiffness([](std::size_t) { return 1.0; });
		const int N = traj.grid.N;
		const double dt = traj.grid.dt();

		auto grad_lp = [&](const Vector &w, double p) {
			double s = 0.0;
			for (std::size_t e = 0; e < space.num_elements(); ++e)
				s += space.area(e) * std::pow(space.gradient(e, w).norm(), p);
			return s;
		};
		auto grad_linf = [&](const Vector &w) {
			double m = 0.0;
			for (std::size_t e = 0; e < space.num_elements(); ++e)
				m = std::max(m, space.gradient(e, w).norm());
			return m;
		};

		b.u_linf_linf_sq = 0.0;
		b.utt_l2l2_sq = 0.0;
		b.grad_ut_l2l2_sq = 0.0;
		b.grad_ut_lq1lq1 = 0.0;
		b.ut_linf_l2_sq = 0.0;
		b.grad_u_linf_l2_sq = 0.0;
		b.grad_ut_linf_l2_sq = 0.0;
		b.grad_ut_linf_lq1 = 0.0;
		b.c_linf_w1q = b.c_h1_l4 = b.c_poincare = 0.0;
		b.grad_ut_linf_linf = 0.0;
		b.grad_utt_l2_linf = 0.0;

		for (int n = 0; n <= N; ++n)
		{
			const Vector &u = traj.u[n];
			const Vector &v = traj.v[n];
			const double w = traj.grid.weight(n);
			const double umax = u.cwiseAbs().maxCoeff();
			const double grad_v_sq = v.dot(S * v);
			const double grad_u_sq = u.dot(S * u);
			const double v_sq = v.dot(M * v);
			const double grad_v_q1 = grad_lp(v, q + 1.0);

			b.u_linf_linf_sq = std::max(b.u_linf_linf_sq, umax * umax);
			b.grad_ut_l2l2_sq += w * grad_v_sq;
			b.grad_ut_lq1lq1 += w * grad_v_q1;
			b.ut_linf_l2_sq = std::max(b.ut_linf_l2_sq, v_sq);
			b.grad_u_linf_l2_sq = std::max(b.grad_u_linf_l2_sq, grad_u_sq);
			b.grad_ut_linf_l2_sq = std::max(b.grad_ut_linf_l2_sq, grad_v_sq);
			b.grad_ut_linf_lq1 = std::max(b.grad_ut_linf_lq1, grad_v_q1);
			b.grad_ut_linf_linf = std::max(b.grad_ut_linf_linf, grad_linf(v));

			const double grad_u_q1 = std::pow(grad_lp(u, q + 1.0), 1.0 / (q + 1.0));
			if (grad_u_q1 > 0.0)
				b.c_linf_w1q = std::max(b.c_linf_w1q, umax / grad_u_q1);
			if (grad_v_sq > 0.0)
			{
				b.c_h1_l4 = std::max(b.c_h1_l4, std::pow(integral_fourth_power(space, v), 0.25) / std::sqrt(grad_v_sq));
				b.c_poincare = std::max(b.c_poincare, std::sqrt(v_sq / grad_v_sq));
			}
		}
		for (int n = 0; n < N; ++n)
		{
			b.utt_l2l2_sq += dt * traj.a[n].dot(M * traj.a[n]);
			const double ga = grad_linf(traj.a[n]);
			b.grad_utt_l2_linf += dt * ga * ga;
		}
		b.grad_utt_l2_linf = std::sqrt(b.grad_utt_l2_linf);

		b.energy_lhs = b.u_linf_linf_sq + b.utt_l2l2_sq + b.grad_ut_l2l2_sq + b.grad_ut_lq1lq1 + b.ut_linf_l2_sq +
					   b.grad_u_linf_l2_sq + b.grad_ut_linf_l2_sq + b.grad_ut_linf_lq1;

		const Vector &u0 = traj.u.front();
		const Vector &u1 = traj.v.front();
		b.data_norm = u1.dot(M * u1) + u0.dot(S * u0) + u1.dot(S * u1) + grad_lp(u1, q + 1.0);
		b.energy_ratio = b.data_norm > 0.0 ? b.energy_lhs / b.data_norm : 0.0;

		b.m_bar = std::max(std::sqrt(b.utt_l2l2_sq), std::sqrt(b.grad_ut_linf_l2_sq));
		b.M_bar = std::pow(b.grad_ut_lq1lq1, 1.0 / (q + 1.0));
		b.kappa_T = std::sqrt(u1.dot(M * u1) + u0.dot(S * u0) + u1.dot(S * u1) + std::pow(grad_lp(u0, q + 1.0), 2.0 / (q + 1.0)) +
							  grad_lp(u1, q + 1.0));
		return b;
	}

	std::vector<double> linear_energy(const WesterveltOperator &op, const StateTrajectory &traj)
	{
		std::vector<double> E;
		for (std::size_t n = 0; n < traj.u.size(); ++n)
			E.push_back(0.5 * traj.v[n].dot(op.mass_lambda() * traj.v[n]) + 0.5 * traj.u[n].dot(op.stiffness() * traj.u[n]));
		return E;
	}
} // namespace lensopt
