#include <lensopt/optimizer.hpp>

#include <lensopt/error.hpp>

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace lensopt
{
	namespace
	{
		SparseMatrix h1_matrix(const P1Space &space)
		{
			const auto one = [](std::size_t) { return 1.0; };
			return SparseMatrix(space.stiffness(one) + space.mass(one));
		}
	} // namespace

	VelocityField riesz_descent_field(const Mesh2D &mesh, const std::vector<Vec2> &load)
	{
		if (load.size() != mesh.num_vertices())
			throw Error(ErrorKind::GridMismatch, "load vector does not match the mesh");
		P1Space space(mesh);
		SparseMatrix A = h1_matrix(space);
		space.apply_dirichlet(A);
		LinearSolver solver;
		solver.factorize(A);

		VelocityField h = VelocityField::zero(mesh);
		const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
		for (int c = 0; c < 2; ++c)
		{
			Vector rhs(n);
			for (Eigen::Index k = 0; k < n; ++k)
				rhs[k] = -load[k][c];
			space.zero_boundary(rhs);
			const Vector x = solver.solve(rhs);
			for (Eigen::Index k = 0; k < n; ++k)
				h.values[k][c] = x[k];
		}
		for (int v : mesh.boundary_nodes)
			h.values[v].setZero();
		return h;
	}

	double h1_norm(const Mesh2D &mesh, const VelocityField &h)
	{
		P1Space space(mesh);
		const SparseMatrix A = h1_matrix(space);
		const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
		double s = 0.0;
		for (int c = 0; c < 2; ++c)
		{
			Vector x(n);
			for (Eigen::Index k = 0; k < n; ++k)
				x[k] = h.values[k][c];
			s += x.dot(A * x);
		}
		return std::sqrt(std::max(s, 0.0));
	}

	LineSearchResult line_search(const ShapeSetup &setup, const Mesh2D &mesh, const VelocityField &h, double J0,
								 double slope, double tau_init, const OptimizerOptions &opts)
	{
		if (!(slope < 0.0))
			throw Error(ErrorKind::LineSearchExhausted, "not a descent direction");
		double tau = std::min(tau_init, max_admissible_step(mesh, h));
		LineSearchResult res;
		for (int k = 0; k <= opts.max_halvings; ++k, tau *= 0.5)
		{
			res.halvings = k;
			Mesh2D trial;
			try
			{
				trial = perturb_mesh(mesh, h, tau);
			}
			catch (const Error &err)
			{
				if (err.kind() == ErrorKind::FoldedElement)
					continue;
				throw;
			}
			if (!check_admissible(trial, opts.max_turning_deg, opts.min_quality).pass())
				continue;
			double J = 0.0;
			try
			{
				J = cost_on_mesh(setup.on(trial), trial);
			}
			catch (const Error &err)
			{
				if (err.kind() == ErrorKind::DegeneracyBreach || err.kind() == ErrorKind::NonlinearSolveFailure)
					continue;
				throw;
			}
			if (J <= J0 + opts.c1 * tau * slope)
			{
				res.tau = tau;
				res.J = J;
				res.mesh = std::move(trial);
				return res;
			}
		}
		throw Error(ErrorKind::LineSearchExhausted, "no acceptable step after " + std::to_string(opts.max_halvings) + " halvings");
	}

	std::string_view to_string(OptimizerStatus status)
	{
		switch (status)
		{
		case OptimizerStatus::Converged:
			return "converged";
		case OptimizerStatus::MaxIterations:
			return "max_iterations";
		case OptimizerStatus::LineSearchExhausted:
			return "line_search_exhausted";
		}
		return "unknown";
	}

	OptimizationResult optimize(const ShapeSetup &setup, const OptimizerOptions &opts,
								const std::function<void(const IterationRecord &)> &progress)
	{
		using clock = std::chrono::steady_clock;
		const auto start = clock::now();
		OptimizationResult out;
		Mesh2D mesh = setup.mesh;
		double h1_initial = 0.0;

		for (int it = 0;; ++it)
		{
			ShapeDerivative d;
			try
			{
				d = shape_derivative(setup, mesh);
			}
			catch (const Error &err)
			{
				throw Error(err.kind(), "iteration " + std::to_string(it) + ": " + err.what(), it);
			}
			const VelocityField h = riesz_descent_field(mesh, d.load);
			const AdmissibilityReport adm = check_admissible(mesh, opts.max_turning_deg, opts.min_quality);

			IterationRecord rec;
			rec.iteration = it;
			rec.J = d.J;
			rec.h1 = h1_norm(mesh, h);
			rec.slope = d.apply(h);
			rec.max_turning_deg = adm.max_turning_angle_deg;
			rec.min_quality = adm.min_quality;
			rec.lens_area = lens_area(mesh);
			out.J_final = d.J;

			auto finish = [&](OptimizerStatus status) {
				rec.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
				out.history.push_back(rec);
				if (progress)
					progress(rec);
				out.status = status;
				out.mesh = std::move(mesh);
				return out;
			};

			if (it == 0)
				h1_initial = rec.h1;
			if (rec.h1 < opts.g_abs || rec.h1 < opts.g_tol * h1_initial || !(rec.slope < 0.0))
				return finish(OptimizerStatus::Converged);
			if (it >= opts.max_iters)
				return finish(OptimizerStatus::MaxIterations);

			const double tau_init = opts.max_displacement / std::max(h.max_norm(), std::numeric_limits<double>::min());
			LineSearchResult step;
			try
			{
				step = line_search(setup, mesh, h, d.J, rec.slope, tau_init, opts);
			}
			catch (const Error &err)
			{
				if (err.kind() == ErrorKind::LineSearchExhausted)
					return finish(OptimizerStatus::LineSearchExhausted);
				throw Error(err.kind(), "iteration " + std::to_string(it) + ": " + err.what(), it);
			}
			rec.tau = step.tau;
			rec.halvings = step.halvings;
			rec.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
			out.history.push_back(rec);
			if (progress)
				progress(rec);
			mesh = std::move(step.mesh);
		}
	}

	void write_history_csv(std::ostream &out, const std::vector<IterationRecord> &history)
	{
		out << "iteration,J,h1,slope,tau,halvings,max_turning_deg,min_quality,lens_area\n";
		out << std::setprecision(17);
		for (const auto &r : history)
			out << r.iteration << ',' << r.J << ',' << r.h1 << ',' << r.slope << ',' << r.tau << ',' << r.halvings << ','
				<< r.max_turning_deg << ',' << r.min_quality << ',' << r.lens_area << '\n';
	}
} // namespace lensopt
