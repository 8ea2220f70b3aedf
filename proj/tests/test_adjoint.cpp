#include <doctest.h>

#include <lensopt/error.hpp>
#include <lensopt/problem.hpp>

#include <Eigen/Dense>

#include <random>

using namespace lensopt;

namespace
{
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

	struct Run
	{
		Mesh2D mesh;
		MaterialParams params;
		TimeGrid grid{0.5, 32};
		StateTrajectory state;
		std::vector<Vector> u_d;
	};

	Run nonlinear_run()
	{
		Run r;
		r.mesh = lens_mesh(1.0 / 16);
		r.params = reference_params();
		r.state = solve_state(r.mesh, r.params, r.grid, ScalarProfile::bump(Vec2(0.35, 0.4), 0.15, 0.05).sample(r.mesh),
							  Vector::Zero(r.mesh.num_vertices()));
		r.u_d.assign(r.grid.N + 1, ScalarProfile::bump(Vec2(0.6, 0.6), 0.2, 0.01).sample(r.mesh));
		return r;
	}

	Vector random_interior(const Mesh2D &mesh, std::mt19937_64 &rng)
	{
		std::normal_distribution<double> N;
		Vector w(mesh.num_vertices());
		for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
			w[i] = mesh.on_boundary[i] ? 0.0 : N(rng);
		return w;
	}
} // namespace

TEST_SUITE("adjoint")
{
	TEST_CASE("terminal conditions and boundary values are exact")
	{
		const Run r = nonlinear_run();
		const AdjointTrajectory adj = solve_adjoint(r.mesh, r.params, r.state, r.u_d, r.grid);
		CHECK(adj.p[r.grid.N].cwiseAbs().maxCoeff() == 0.0);
		CHECK(adj.pt[r.grid.N].cwiseAbs().maxCoeff() == 0.0);
		CHECK(adj.max_abs() > 0.0);
		for (const auto &p : adj.p)
			for (int k : r.mesh.boundary_nodes)
				CHECK(p[k] == 0.0);
	}

	TEST_CASE("perfect tracking gives a zero adjoint")
	{
		const Run r = nonlinear_run();
		const AdjointTrajectory adj = solve_adjoint(r.mesh, r.params, r.state, r.state.u, r.grid);
		CHECK(adj.max_abs() <= 1e-10);
	}

	TEST_CASE("adjoint is linear in the tracking residual")
	{
		const Run r = nonlinear_run();
		const AdjointTrajectory a = solve_adjoint(r.mesh, r.params, r.state, r.u_d, r.grid);
		const double alpha = -2.5;
		std::vector<Vector> scaled(r.u_d.size());
		for (std::size_t n = 0; n < scaled.size(); ++n)
			scaled[n] = r.state.u[n] - alpha * (r.state.u[n] - r.u_d[n]);
		const AdjointTrajectory b = solve_adjoint(r.mesh, r.params, r.state, scaled, r.grid);
		double d = 0.0;
		for (std::size_t n = 0; n < a.p.size(); ++n)
			d = std::max(d, (b.p[n] - alpha * a.p[n]).cwiseAbs().maxCoeff());
		CHECK(d <= 1e-10 * std::abs(alpha) * a.max_abs());
	}

	TEST_CASE("missing or mismatched state is rejected")
	{
		const Run r = nonlinear_run();
		StateTrajectory empty;
		empty.grid = r.grid;
		try
		{
			solve_adjoint(r.mesh, r.params, empty, r.u_d, r.grid);
			FAIL("expected StateMissing");
		}
		catch (const Error &e)
		{
			CHECK(e.kind() == ErrorKind::StateMissing);
		}
		try
		{
			solve_adjoint(r.mesh, r.params, r.state, r.u_d, TimeGrid{0.5, 16});
			FAIL("expected GridMismatch");
		}
		catch (const Error &e)
		{
			CHECK(e.kind() == ErrorKind::GridMismatch);
		}
	}

	TEST_CASE("linear limit matches an independent block midpoint solver")
	{
		DomainSpec d;
		d.h_mesh = 1.0 / 8;
		d.lens = LensShape::none();
		const Mesh2D mesh = build_mesh(d);
		const double lambda = 2.0, rho = 1.5, b = 0.03;
		const MaterialParams params = MaterialParams::uniform(MaterialCoeffs{lambda, 0.0, rho, b, 0.4}, 1.0);
		const TimeGrid grid{0.5, 40};
		const Vector u0 = ScalarProfile::eigenmode(1, 1, 1.0).sample(mesh);
		const StateTrajectory st = solve_state(mesh, params, grid, u0, Vector::Zero(u0.size()));
		const std::vector<Vector> u_d(grid.N + 1, ScalarProfile::eigenmode(2, 1, 0.3).sample(mesh));
		const AdjointTrajectory adj = solve_adjoint(mesh, params, st, u_d, grid);

		// reversed variable: M_l y'' + b S y' + (1/rho) S y = 2 M (u - u_d)(T - s)
		P1Space space(mesh);
		const auto one = [](std::size_t) { return 1.0; };
		const Eigen::MatrixXd M = Eigen::MatrixXd(space.mass(one));
		const Eigen::MatrixXd S = Eigen::MatrixXd(space.stiffness(one));
		const Eigen::MatrixXd Ml = M / lambda, K = S / rho, C = b * S;
		const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
		const double dt = grid.dt();
		Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 2 * n), B = Eigen::MatrixXd::Zero(2 * n, 2 * n);
		const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
		A.topLeftCorner(n, n) = I / dt;
		A.topRightCorner(n, n) = -0.5 * I;
		A.bottomLeftCorner(n, n) = 0.5 * K;
		A.bottomRightCorner(n, n) = Ml / dt + 0.5 * C;
		B.topLeftCorner(n, n) = I / dt;
		B.topRightCorner(n, n) = 0.5 * I;
		B.bottomLeftCorner(n, n) = -0.5 * K;
		B.bottomRightCorner(n, n) = Ml / dt - 0.5 * C;
		for (int k : mesh.boundary_nodes)
			for (Eigen::Index row : {Eigen::Index(k), n + k})
			{
				A.row(row).setZero();
				B.row(row).setZero();
				A(row, row) = 1.0;
			}
		const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
		Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * n);
		double err = 0.0, scale = 0.0;
		for (int m = 0; m < grid.N; ++m)
		{
			const int j = grid.N - 1 - m;
			Eigen::VectorXd rhs = B * x;
			const Eigen::VectorXd f = M * (st.u[j] + st.u[j + 1] - u_d[j] - u_d[j + 1]);
			for (Eigen::Index i = 0; i < n; ++i)
				if (!mesh.on_boundary[i])
					rhs[n + i] += f[i];
			x = lu.solve(rhs);
			err = std::max(err, (x.head(n) - adj.p[j]).cwiseAbs().maxCoeff());
			err = std::max(err, (-x.tail(n) - adj.pt[j]).cwiseAbs().maxCoeff());
			scale = std::max(scale, x.cwiseAbs().maxCoeff());
		}
		CHECK(scale > 0.0);
		CHECK(err <= 1e-8 * scale);
	}

	TEST_CASE("frozen-coefficient transposition identities")
	{
		const Run r = nonlinear_run();
		WesterveltOperator op(r.mesh, r.params, 1e-8);
		std::mt19937_64 rng(17);
		for (int n : {3, 11, 20})
		{
			const Vector v = r.state.v_mid(n), u = r.state.u_mid(n);
			const SparseMatrix T = op.flux_tangent(v);
			const SparseMatrix D = adjoint_damping(op, v) - op.damping();
			const SparseMatrix Nm = op.nonlinear_mass(u);
			for (int trial = 0; trial < 5; ++trial)
			{
				const Vector w = random_interior(r.mesh, rng), p = random_interior(r.mesh, rng);
				const double s = w.norm() * p.norm();
				CHECK(std::abs((T * w).dot(p) - w.dot(D * p)) <= 1e-10 * s * (1 + Eigen::MatrixXd(D).norm()));
				CHECK(std::abs((Nm * w).dot(p) - w.dot(Nm * p)) <= 1e-12 * s);
				CHECK((op.nonlinear_triple(u, w) - Nm * w).cwiseAbs().maxCoeff() <= 1e-14 * (1 + w.cwiseAbs().maxCoeff()));
				// the flux tangent is the derivative of the flux force
				const double step = 1e-6;
				const Vector fd = (op.flux_force(v + step * w) - op.flux_force(v - step * w)) / (2 * step);
				CHECK((fd - T * w).norm() <= 1e-6 * (1 + (T * w).norm()));
			}
		}
	}

	TEST_CASE("smallness report trivial cases")
	{
		const Mesh2D mesh = lens_mesh(1.0 / 16);
		const Vector z = Vector::Zero(mesh.num_vertices());
		const MaterialParams params = reference_params();
		const StateTrajectory zero = solve_state(mesh, params, TimeGrid{0.5, 16}, z, z);
		const SmallnessReport s0 = smallness_report(zero, params, energy_report(mesh, zero, params));
		CHECK(s0.all());
		for (int i = 0; i < 3; ++i)
			CHECK(s0.lhs[i] == 0.0);

		MaterialParams linear = params;
		linear.fluid.k = linear.lens.k = 0.0;
		const StateTrajectory st =
			solve_state(mesh, linear, TimeGrid{0.5, 16}, ScalarProfile::bump(Vec2(0.35, 0.4), 0.15, 0.05).sample(mesh), z);
		const SmallnessReport s1 = smallness_report(st, linear, energy_report(mesh, st, linear));
		CHECK(s1.lhs[0] == 0.0);
		CHECK(s1.lhs[2] == 0.0);
		CHECK(s1.holds[0]);
		CHECK(s1.holds[2]);
	}
}
