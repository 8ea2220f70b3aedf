#include <lensopt/adjoint.hpp>

#include <lensopt/error.hpp>

#include <algorithm>
#include <cmath>

namespace lensopt
{
	double AdjointTrajectory::max_abs() const
	{
		double m = 0.0;
		for (const auto &x : p)
			m = std::max(m, x.cwiseAbs().maxCoeff());
		return m;
	}

	namespace
	{
		Mat3 contract(const P1Space &space, std::size_t e, const Mat2 &A, double scale)
		{
			const auto &g = space.grads(e);
			Mat3 m;
			for (int a = 0; a < 3; ++a)
				for (int b = 0; b < 3; ++b)
					m(a, b) = g[a].dot(A * g[b]);
			return Mat3(scale * space.area(e) * m);
		}

		double regular_pow(RegularizedNorm reg, const Vec2 &g, double p, double q)
		{
			if (reg(g) == 0.0 && p < 0.0)
			{
				if (q < 3.0)
					throw Error(ErrorKind::SingularLinearization, "|grad u_t| = 0 with q < 3 and no regularization");
				return 0.0;
			}
			return reg.pow(g, p);
		}
	} // namespace

	SparseMatrix adjoint_damping(const WesterveltOperator &op, const Vector &v)
	{
		const auto &space = op.space();
		const double q = op.params().q;
		const RegularizedNorm reg = op.reg();
		SparseMatrix D = space.assemble([&](std::size_t e) {
			const auto &c = op.coeffs(e);
			const Vec2 g = space.gradient(e, v);
			Mat2 G = Mat2::Identity();
			if (q != 1.0)
				G = regular_pow(reg, g, q - 1.0, q) * Mat2::Identity() + (q - 1.0) * regular_pow(reg, g, q - 3.0, q) * g * g.transpose();
			return contract(space, e, G, c.b * c.delta);
		});
		return op.damping() + D;
	}

	SparseMatrix adjoint_damping_rate(const WesterveltOperator &op, const Vector &v0, const Vector &v1, double dt)
	{
		const auto &space = op.space();
		const double q = op.params().q;
		const RegularizedNorm reg = op.reg();
		return space.assemble([&](std::size_t e) {
			if (q == 1.0)
				return Mat3(Mat3::Zero());
			const auto &c = op.coeffs(e);
			const Vec2 g0 = space.gradient(e, v0);
			const Vec2 g1 = space.gradient(e, v1);
			const Vec2 g = 0.5 * (g0 + g1);
			const Vec2 gdot = (g1 - g0) / dt;
			const double s1 = (regular_pow(reg, g1, q - 1.0, q) - regular_pow(reg, g0, q - 1.0, q)) / dt;
			const double s3 = (regular_pow(reg, g1, q - 3.0, q) - regular_pow(reg, g0, q - 3.0, q)) / dt;
			const Mat2 Gdot = s1 * Mat2::Identity() +
							  (q - 1.0) * (s3 * g * g.transpose() +
										   regular_pow(reg, g, q - 3.0, q) * (g * gdot.transpose() + gdot * g.transpose()));
			return contract(space, e, Gdot, c.b * c.delta);
		});
	}

	std::vector<Vector> adjoint_source(const WesterveltOperator &op, const StateTrajectory &state, const std::vector<Vector> &u_d)
	{
		const int N = state.grid.N;
		if (static_cast<int>(u_d.size()) != N + 1)
			throw Error(ErrorKind::GridMismatch, "target trajectory length does not match the state");
		std::vector<Vector> f(N + 1);
		for (int n = 0; n <= N; ++n)
		{
			if (u_d[n].size() != state.u[n].size())
				throw Error(ErrorKind::GridMismatch, "target field size does not match the mesh");
			f[n] = 2.0 * (op.mass() * (state.u[n] - u_d[n]));
		}
		return f;
	}

	AdjointTrajectory solve_adjoint(const Mesh2D &mesh, const MaterialParams &params, const StateTrajectory &state,
									const std::vector<Vector> &u_d, const TimeGrid &grid, const SolverOptions &opts)
	{
		if (state.u.empty() || state.a.empty())
			throw Error(ErrorKind::StateMissing, "adjoint needs a completed state trajectory");
		if (!(state.grid == grid) || static_cast<int>(state.u.size()) != grid.N + 1)
			throw Error(ErrorKind::GridMismatch, "state and adjoint time grids differ");
		if (state.u.front().size() != static_cast<Eigen::Index>(mesh.num_vertices()))
			throw Error(ErrorKind::GridMismatch, "state does not live on this mesh");

		WesterveltOperator op(mesh, params, opts.eps_reg);
		const auto &space = op.space();
		const int N = grid.N;
		const double dt = grid.dt();
		const std::vector<Vector> f = adjoint_source(op, state, u_d);
		const auto n_nodes = static_cast<Eigen::Index>(mesh.num_vertices());

		AdjointTrajectory adj;
		adj.grid = grid;
		adj.p.assign(N + 1, Vector::Zero(n_nodes));
		adj.pt.assign(N + 1, Vector::Zero(n_nodes));

		// reversed time: y = p~, z = dp~/ds; reversed step m covers forward interval N-1-m
		Vector y = Vector::Zero(n_nodes), z = Vector::Zero(n_nodes);
		LinearSolver solver;
		for (int m = 0; m < N; ++m)
		{
			const int n = N - 1 - m;
			const Vector u_mid = state.u_mid(n);
			const SparseMatrix M = op.mass_lambda() - 2.0 * op.nonlinear_mass(u_mid);
			const SparseMatrix CD = adjoint_damping(op, state.v_mid(n));
			const SparseMatrix Ddot = adjoint_damping_rate(op, state.v[n], state.v[n + 1], dt);
			const SparseMatrix KD = op.stiffness() - Ddot;
			const Vector source = 0.5 * (f[n] + f[n + 1]);

			SparseMatrix A = (1.0 / dt) * M;
			A += 0.5 * CD;
			A += (0.25 * dt) * KD;
			space.apply_dirichlet(A);
			Vector rhs = source + M * z / dt - 0.5 * (CD * z) - KD * (y + 0.25 * dt * z);
			space.zero_boundary(rhs);

			solver.factorize(A);
			Vector z_next = solver.solve(rhs);
			space.zero_boundary(z_next);
			y += 0.5 * dt * (z + z_next);
			z = std::move(z_next);
			adj.p[n] = y;
			adj.pt[n] = -z;
		}
		return adj;
	}

	SmallnessReport smallness_report(const StateTrajectory &state, const MaterialParams &params, const DiagnosticsBounds &b,
									 double eps)
	{
		SmallnessReport r;
		r.eps = eps;
		const double q = params.q;
		r.c_q = (q - 1.0) * (3.0 + std::abs(q - 3.0));
		const double k_max = std::max(std::abs(params.lens.k), std::abs(params.fluid.k));
		const double lambda_min = std::min(params.lens.lambda, params.fluid.lambda);
		const double rho_max = std::max(params.lens.rho, params.fluid.rho);
		const double b_max = std::max(params.lens.b, params.fluid.b);
		const double b_min = std::min(params.lens.b, params.fluid.b);
		const double delta_max = std::max(params.lens.delta, params.fluid.delta);
		const double T = state.grid.T;
		const double embed = k_max / lambda_min * b.c_h1_l4 * b.c_h1_l4 * b.c_poincare * b.m_bar;
		const double coupling = b.grad_ut_linf_linf > 0.0 ? std::pow(b.grad_ut_linf_linf, q - 2.0) * b.grad_utt_l2_linf : 0.0;

		r.lhs[0] = T * embed;
		r.rhs[0] = 0.25 * (1.0 - b.a0);
		r.lhs[1] = b_max * delta_max * r.c_q * coupling / eps;
		r.rhs[1] = 1.0 / rho_max;
		r.lhs[2] = embed;
		r.rhs[2] = 0.5 * b_min * (1.0 - delta_max);
		for (int i = 0; i < 3; ++i)
			r.holds[i] = r.lhs[i] < r.rhs[i];
		return r;
	}
} // namespace lensopt
