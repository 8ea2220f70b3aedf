#include <lensopt/problem.hpp>

#include <lensopt/error.hpp>

#include <cmath>
#include <numbers>

namespace lensopt
{
	using std::numbers::pi;

	ScalarProfile ScalarProfile::bump(const Vec2 &center, double radius, double amplitude)
	{
		ScalarProfile p;
		p.kind = Kind::Bump;
		p.center = center;
		p.radius = radius;
		p.amplitude = amplitude;
		return p;
	}

	ScalarProfile ScalarProfile::eigenmode(int m, int n, double amplitude, double width, double height)
	{
		ScalarProfile p;
		p.kind = Kind::Eigenmode;
		p.mode_x = m;
		p.mode_y = n;
		p.amplitude = amplitude;
		p.width = width;
		p.height = height;
		return p;
	}

	double ScalarProfile::value(const Vec2 &x) const
	{
		switch (kind)
		{
		case Kind::Zero:
			return 0.0;
		case Kind::Bump:
		{
			const double s2 = (x - center).squaredNorm() / (radius * radius);
			return s2 < 1.0 ? amplitude * std::pow(1.0 - s2, 3) : 0.0;
		}
		case Kind::Eigenmode:
			return amplitude * std::sin(mode_x * pi * x.x() / width) * std::sin(mode_y * pi * x.y() / height);
		}
		return 0.0;
	}

	Vec2 ScalarProfile::gradient(const Vec2 &x) const
	{
		switch (kind)
		{
		case Kind::Zero:
			return Vec2::Zero();
		case Kind::Bump:
		{
			const double s2 = (x - center).squaredNorm() / (radius * radius);
			if (s2 >= 1.0)
				return Vec2::Zero();
			return -6.0 * amplitude * (1.0 - s2) * (1.0 - s2) / (radius * radius) * (x - center);
		}
		case Kind::Eigenmode:
		{
			const double ax = mode_x * pi / width, ay = mode_y * pi / height;
			return amplitude * Vec2(ax * std::cos(ax * x.x()) * std::sin(ay * x.y()),
									ay * std::sin(ax * x.x()) * std::cos(ay * x.y()));
		}
		}
		return Vec2::Zero();
	}

	Vector ScalarProfile::sample(const Mesh2D &mesh) const
	{
		Vector out(mesh.num_vertices());
		for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
			out[i] = value(mesh.vertices[i]);
		return out;
	}

	ShapeTarget::ShapeTarget(Mesh2D mesh, std::vector<Vector> u)
		: mesh_(std::make_unique<Mesh2D>(std::move(mesh))), u_(std::move(u)),
		  locator_(std::make_unique<PointLocator>(*mesh_))
	{
	}

	std::vector<Vector> ShapeTarget::sample(const Mesh2D &mesh, std::vector<std::vector<Vec2>> *gradients) const
	{
		const std::size_t nv = mesh.num_vertices();
		std::vector<PointLocator::Hit> hits(nv);
		for (std::size_t i = 0; i < nv; ++i)
			hits[i] = locator_->locate(mesh.vertices[i]);

		std::vector<Vector> out(u_.size(), Vector(nv));
		for (std::size_t n = 0; n < u_.size(); ++n)
			for (std::size_t i = 0; i < nv; ++i)
			{
				const auto &tri = mesh_->triangles[hits[i].triangle];
				const auto &b = hits[i].barycentric;
				out[n][i] = b[0] * u_[n][tri[0]] + b[1] * u_[n][tri[1]] + b[2] * u_[n][tri[2]];
			}
		if (gradients)
		{
			// area-weighted nodal average of the element gradients, interpolated
			const Mesh2D &tm = *mesh_;
			std::vector<double> weight(tm.num_vertices(), 0.0);
			std::vector<std::array<Vec2, 3>> basis(tm.num_triangles());
			for (std::size_t t = 0; t < tm.num_triangles(); ++t)
			{
				basis[t] = tm.basis_gradients(t);
				for (int v : tm.triangles[t])
					weight[v] += std::abs(tm.signed_area(t));
			}
			gradients->assign(u_.size(), std::vector<Vec2>(nv));
			std::vector<Vec2> nodal(tm.num_vertices());
			for (std::size_t n = 0; n < u_.size(); ++n)
			{
				std::fill(nodal.begin(), nodal.end(), Vec2::Zero());
				for (std::size_t t = 0; t < tm.num_triangles(); ++t)
				{
					const auto &tri = tm.triangles[t];
					const Vec2 g = u_[n][tri[0]] * basis[t][0] + u_[n][tri[1]] * basis[t][1] + u_[n][tri[2]] * basis[t][2];
					const double area = std::abs(tm.signed_area(t));
					for (int v : tri)
						nodal[v] += area * g;
				}
				for (std::size_t v = 0; v < nodal.size(); ++v)
					nodal[v] /= weight[v];
				for (std::size_t i = 0; i < nv; ++i)
				{
					const auto &tri = tm.triangles[hits[i].triangle];
					const auto &b = hits[i].barycentric;
					(*gradients)[n][i] = b[0] * nodal[tri[0]] + b[1] * nodal[tri[1]] + b[2] * nodal[tri[2]];
				}
			}
		}
		return out;
	}

	Vector InitialData::on(const Mesh2D &mesh) const
	{
		if (nodal)
		{
			if (nodal->size() != static_cast<Eigen::Index>(mesh.num_vertices()))
				throw Error(ErrorKind::GridMismatch, "nodal initial data does not match the mesh");
			return *nodal;
		}
		return profile.sample(mesh);
	}

	std::vector<Vector> ShapeSetup::target_on(const Mesh2D &m, std::vector<std::vector<Vec2>> *gradients) const
	{
		switch (u_d.mode)
		{
		case TargetData::Mode::Profile:
		{
			const Vector values = u_d.profile.sample(m);
			if (gradients)
			{
				std::vector<Vec2> g(m.num_vertices());
				for (std::size_t i = 0; i < g.size(); ++i)
					g[i] = u_d.profile.gradient(m.vertices[i]);
				gradients->assign(grid.N + 1, g);
			}
			return std::vector<Vector>(grid.N + 1, values);
		}
		case TargetData::Mode::Nodal:
			if (static_cast<int>(u_d.nodal.size()) != grid.N + 1 ||
				u_d.nodal.front().size() != static_cast<Eigen::Index>(m.num_vertices()))
				throw Error(ErrorKind::GridMismatch, "imported target does not match mesh and time grid");
			if (gradients)
				gradients->clear();
			return u_d.nodal;
		case TargetData::Mode::Shape:
			if (!u_d.shape)
				throw Error(ErrorKind::StateMissing, "target shape trajectory not generated");
			if (static_cast<int>(u_d.shape->trajectory().size()) != grid.N + 1)
				throw Error(ErrorKind::GridMismatch, "target trajectory length does not match the time grid");
			return u_d.shape->sample(m, gradients);
		}
		return {};
	}

	ShapeProblem ShapeSetup::on(const Mesh2D &m) const
	{
		ShapeProblem p;
		p.mesh = m;
		p.params = params;
		p.grid = grid;
		p.solver = solver;
		p.u0 = u0.on(m);
		p.u1 = u1.on(m);
		p.u_d = target_on(m);
		return p;
	}

	std::shared_ptr<const ShapeTarget> generate_target(const DomainSpec &target_domain, const MaterialParams &params,
													   const TimeGrid &grid, const SolverOptions &solver,
													   const ScalarProfile &u0, const ScalarProfile &u1)
	{
		Mesh2D mesh = build_mesh(target_domain);
		StateTrajectory st = solve_state(mesh, params, grid, u0.sample(mesh), u1.sample(mesh), solver);
		return std::make_shared<const ShapeTarget>(std::move(mesh), std::move(st.u));
	}

	InitialSensitivity initial_sensitivity(const Mesh2D &mesh, const MaterialParams &params, const ShapeProblem &problem,
										   const AdjointTrajectory &adjoint, const SolverOptions &opts)
	{
		WesterveltOperator op(mesh, params, opts.eps_reg);
		const SparseMatrix M = op.mass_lambda() - 2.0 * op.nonlinear_mass(problem.u0);
		const SparseMatrix A = op.damping() + op.flux_tangent(problem.u1);
		InitialSensitivity s;
		s.r0 = -(M * adjoint.pt[0]) - 2.0 * op.nonlinear_triple(problem.u1, adjoint.p[0]) + A * adjoint.p[0];
		s.r1 = M * adjoint.p[0];
		op.space().zero_boundary(s.r0);
		op.space().zero_boundary(s.r1);
		return s;
	}

	double ShapeDerivative::apply(const VelocityField &h) const
	{
		double s = 0.0;
		for (std::size_t k = 0; k < load.size(); ++k)
			s += load[k].dot(h.values[k]);
		return s;
	}

	ShapeDerivative shape_derivative(const ShapeSetup &setup, const Mesh2D &mesh)
	{
		ShapeProblem problem = setup.on(mesh);
		std::vector<std::vector<Vec2>> target_grad;
		problem.u_d = setup.target_on(mesh, &target_grad);

		ShapeDerivative d;
		d.J = cost_on_mesh(problem, mesh, &d.state);
		d.adjoint = solve_adjoint(mesh, setup.params, d.state, problem.u_d, setup.grid, setup.solver);
		d.tensor = volume_shape_tensor(mesh, setup.params, d.state, d.adjoint, problem.u_d, setup.solver);
		d.load = d.tensor.load;

		const std::size_t nv = mesh.num_vertices();
		if (!target_grad.empty())
		{
			P1Space space(mesh);
			const SparseMatrix M = space.mass([](std::size_t) { return 1.0; });
			for (int n = 0; n <= setup.grid.N; ++n)
			{
				const Vector r = M * (d.state.u[n] - problem.u_d[n]);
				const double w = -2.0 * setup.grid.weight(n);
				for (std::size_t k = 0; k < nv; ++k)
					d.load[k] += w * r[k] * target_grad[n][k];
			}
		}
		if (setup.u0.eulerian() || setup.u1.eulerian())
		{
			const InitialSensitivity s = initial_sensitivity(mesh, setup.params, problem, d.adjoint, setup.solver);
			for (std::size_t k = 0; k < nv; ++k)
			{
				if (setup.u0.eulerian())
					d.load[k] += s.r0[k] * setup.u0.profile.gradient(mesh.vertices[k]);
				if (setup.u1.eulerian())
					d.load[k] += s.r1[k] * setup.u1.profile.gradient(mesh.vertices[k]);
			}
		}
		for (int v : mesh.boundary_nodes)
			d.load[v].setZero();
		return d;
	}
} // namespace lensopt
