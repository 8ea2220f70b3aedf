#include <lensopt/shape_gradient.hpp>

#include <lensopt/error.hpp>
#include <lensopt/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <iomanip>
#include <ostream>

namespace lensopt
{
	double relative_error(double value, double reference)
	{
		return std::abs(value - reference) / std::max(std::abs(value), eps_abs);
	}

	double cost_on_mesh(const ShapeProblem &problem, const Mesh2D &mesh, StateTrajectory *state_out)
	{
		StateTrajectory state = solve_state(mesh, problem.params, problem.grid, problem.u0, problem.u1, problem.solver);
		const double J = evaluate_cost(mesh, state, problem.u_d);
		if (state_out)
			*state_out = std::move(state);
		return J;
	}

	namespace
	{
		void check_inputs(const Mesh2D &mesh, const StateTrajectory &state, const AdjointTrajectory &adjoint)
		{
			const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
			if (state.u.empty() || state.u.front().size() != n)
				throw Error(ErrorKind::GridMismatch, "state does not live on this mesh");
			if (adjoint.p.empty())
				throw Error(ErrorKind::MissingAdjoint, "shape derivative needs the adjoint trajectory");
			if (adjoint.p.size() != state.u.size() || adjoint.p.front().size() != n)
				throw Error(ErrorKind::GridMismatch, "adjoint and state grids differ");
		}

		/// sum_{j,l} triple(i,j,l) x_j y_l z_i over the element, divided by |T|
		double triple_form(const Vec3 &x, const Vec3 &y, const Vec3 &z)
		{
			double s = 0.0;
			for (int i = 0; i < 3; ++i)
				for (int j = 0; j < 3; ++j)
					for (int l = 0; l < 3; ++l)
						s += triple_weight(i, j, l) * x[i] * y[j] * z[l];
			return s;
		}

		double mass_form(const Vec3 &x, const Vec3 &y)
		{
			return (x.dot(y) + x.sum() * y.sum()) / 12.0;
		}
	} // namespace

	double ShapeTensor::apply(const Mesh2D &mesh, const VelocityField &h, VolumeTerms *terms) const
	{
		const auto dh = velocity_gradient(mesh, h);
		VolumeTerms t;
		double value = 0.0;
		for (std::size_t e = 0; e < dh.size(); ++e)
		{
			t.dh_contraction += parts[e][0].cwiseProduct(dh[e]).sum();
			t.q_term += parts[e][1].cwiseProduct(dh[e]).sum();
			t.divh_pde += parts[e][2].cwiseProduct(dh[e]).sum();
			t.j_divh += parts[e][3].cwiseProduct(dh[e]).sum();
			value += total[e].cwiseProduct(dh[e]).sum();
		}
		if (terms)
			*terms = t;
		return value;
	}

	ShapeTensor volume_shape_tensor(const Mesh2D &mesh, const MaterialParams &params, const StateTrajectory &state,
									const AdjointTrajectory &adjoint, const std::vector<Vector> &u_d, const SolverOptions &opts)
	{
		check_inputs(mesh, state, adjoint);
		const int N = state.grid.N;
		if (static_cast<int>(u_d.size()) != N + 1)
			throw Error(ErrorKind::GridMismatch, "target trajectory length does not match the state");

		P1Space space(mesh);
		const double dt = state.grid.dt();
		const double q = params.q;
		const RegularizedNorm reg{opts.eps_reg};

		std::vector<Vector> u_mid(N), v_mid(N), p_mid(N), misfit(N + 1);
		for (int n = 0; n < N; ++n)
		{
			u_mid[n] = state.u_mid(n);
			v_mid[n] = state.v_mid(n);
			p_mid[n] = adjoint.p_mid(n);
		}
		for (int n = 0; n <= N; ++n)
			misfit[n] = state.u[n] - u_d[n];

		ShapeTensor S;
		const std::size_t ne = mesh.num_triangles();
		S.parts.assign(ne, {Mat2::Zero(), Mat2::Zero(), Mat2::Zero(), Mat2::Zero()});
		S.total.assign(ne, Mat2::Zero());

		parallel_for(ne, [&](std::size_t begin, std::size_t end) {
			for (std::size_t e = begin; e < end; ++e)
			{
				const auto &c = params.of(mesh.labels[e]);
				const double area = space.area(e);
				auto &P = S.parts[e];
				double pde = 0.0;
				for (int n = 0; n < N; ++n)
				{
					const Vec3 ul = space.local(e, u_mid[n]);
					const Vec3 vl = space.local(e, v_mid[n]);
					const Vec3 al = space.local(e, state.a[n]);
					const Vec3 pl = space.local(e, p_mid[n]);
					const Vec2 gu = space.gradient(e, u_mid[n]);
					const Vec2 g = space.gradient(e, v_mid[n]);
					const Vec2 gp = space.gradient(e, p_mid[n]);

					const double mass = (mass_form(al, pl) - 2.0 * c.k * triple_form(pl, al, ul)) / c.lambda;
					const double source = 2.0 * c.k / c.lambda * triple_form(pl, vl, vl);
					const Vec2 w = gu / c.rho + c.b * (1.0 - c.delta) * g + c.b * c.delta * flux(g, q, reg);
					pde += dt * area * (mass - source + w.dot(gp));

					P[0] += dt * area * (gp * w.transpose() + w * gp.transpose());
					if (q != 1.0)
					{
						const double coef = c.b * c.delta * (q - 1.0) * reg.pow(g, q - 3.0) * g.dot(gp);
						P[1] += dt * area * coef * g * g.transpose();
					}
				}
				P[2] = -pde * Mat2::Identity();

				double j = 0.0;
				for (int n = 0; n <= N; ++n)
				{
					const Vec3 r = space.local(e, misfit[n]);
					j += state.grid.weight(n) * area * mass_form(r, r);
				}
				P[3] = j * Mat2::Identity();
				S.total[e] = P[0] + P[1] + P[2] + P[3];
			}
		});

		S.load.assign(mesh.num_vertices(), Vec2::Zero());
		for (std::size_t e = 0; e < ne; ++e)
		{
			const auto &g = space.grads(e);
			for (int k = 0; k < 3; ++k)
				S.load[mesh.triangles[e][k]] += S.total[e] * g[k];
		}
		for (int v : mesh.boundary_nodes)
			S.load[v].setZero();
		return S;
	}

	double eval_volume_form(const Mesh2D &mesh, const MaterialParams &params, const StateTrajectory &state,
							const AdjointTrajectory &adjoint, const std::vector<Vector> &u_d, const VelocityField &h,
							const SolverOptions &opts, VolumeTerms *terms)
	{
		return volume_shape_tensor(mesh, params, state, adjoint, u_d, opts).apply(mesh, h, terms);
	}

	double eval_boundary_form(const Mesh2D &mesh, const MaterialParams &params, const StateTrajectory &state,
							  const AdjointTrajectory &adjoint, const VelocityField &h, const SolverOptions &opts,
							  BoundaryTerms *terms, TraceMode traces)
	{
		check_inputs(mesh, state, adjoint);
		if (mesh.interface.empty())
			throw Error(ErrorKind::TraceUnavailable, "no interface edges");

		P1Space space(mesh);
		const int N = state.grid.N;
		const double dt = state.grid.dt();
		const double q = params.q;
		const RegularizedNorm reg{opts.eps_reg};
		// 3-point Gauss on [0, 1]
		const double gs[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
		const double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

		// One-sided gradient recovery at the interface vertices: least-squares
		// quadratic fit through the same-side nodes of the two-ring patch.
		// weights[slot][side] maps those nodal values to the gradient.
		std::unordered_map<int, int> slot;
		for (const auto &edge : mesh.interface)
		{
			slot.emplace(edge.a, static_cast<int>(slot.size()));
			slot.emplace(edge.b, static_cast<int>(slot.size()));
		}
		struct Fit
		{
			std::vector<int> nodes;
			Eigen::Matrix<double, 2, Eigen::Dynamic> weights;
		};
		std::vector<std::array<Fit, 2>> fits(slot.size());
		if (traces == TraceMode::Recovered)
		{
			std::vector<std::vector<int>> incident(mesh.num_vertices());
			for (std::size_t e = 0; e < mesh.num_triangles(); ++e)
				for (int v : mesh.triangles[e])
					incident[v].push_back(static_cast<int>(e));
			for (const auto &[vertex, k] : slot)
				for (int side = 0; side < 2; ++side)
				{
					const Material label = side == 0 ? Material::Lens : Material::Fluid;
					std::vector<int> ring{vertex};
					for (int ring_pass = 0; ring_pass < 2; ++ring_pass)
					{
						const std::vector<int> seeds = ring;
						for (int s : seeds)
							for (int e : incident[s])
								if (mesh.labels[e] == label)
									for (int w : mesh.triangles[e])
										if (std::find(ring.begin(), ring.end(), w) == ring.end())
											ring.push_back(w);
					}
					const Vec2 x0 = mesh.vertices[vertex];
					double scale = 0.0;
					for (int w : ring)
						scale = std::max(scale, (mesh.vertices[w] - x0).norm());
					const int m = static_cast<int>(ring.size());
					Eigen::MatrixXd V(m, 6);
					for (int r = 0; r < m; ++r)
					{
						const Vec2 d = (mesh.vertices[ring[r]] - x0) / scale;
						V.row(r) << 1.0, d.x(), d.y(), d.x() * d.x(), d.x() * d.y(), d.y() * d.y();
					}
					Fit &fit = fits[k][side];
					fit.nodes = ring;
					if (m < 6 || V.colPivHouseholderQr().rank() < 6)
					{
						// too few nodes for a quadratic: fall back to a linear fit
						const Eigen::MatrixXd P = V.leftCols(3).completeOrthogonalDecomposition().pseudoInverse();
						fit.weights = P.middleRows(1, 2) / scale;
					}
					else
					{
						const Eigen::MatrixXd P = V.completeOrthogonalDecomposition().pseudoInverse();
						fit.weights = P.middleRows(1, 2) / scale;
					}
				}
		}
		auto recovered = [&](int vertex, int side, const Vector &f) {
			const Fit &fit = fits[slot.at(vertex)][side];
			Vec2 g = Vec2::Zero();
			for (std::size_t r = 0; r < fit.nodes.size(); ++r)
				g += fit.weights.col(static_cast<Eigen::Index>(r)) * f[fit.nodes[r]];
			return g;
		};

		BoundaryTerms t;
		for (int n = 0; n < N; ++n)
		{
			const Vector u = state.u_mid(n);
			const Vector v = state.v_mid(n);
			const Vector &a = state.a[n];
			const Vector p = adjoint.p_mid(n);
			for (const auto &edge : mesh.interface)
			{
				const Vec2 &nrm = edge.normal;
				std::array<double, 5> jump{};
				for (int side = 0; side < 2; ++side)
				{
					const std::size_t e = side == 0 ? edge.lens_triangle : edge.fluid_triangle;
					const double sign = side == 0 ? 1.0 : -1.0;
					const auto &c = params.of(mesh.labels[e]);
					std::array<Vec2, 2> gu, gv, gp;
					if (traces == TraceMode::Recovered)
					{
						gu = {recovered(edge.a, side, u), recovered(edge.b, side, u)};
						gv = {recovered(edge.a, side, v), recovered(edge.b, side, v)};
						gp = {recovered(edge.a, side, p), recovered(edge.b, side, p)};
					}
					else
					{
						gu[0] = gu[1] = space.gradient(e, u);
						gv[0] = gv[1] = space.gradient(e, v);
						gp[0] = gp[1] = space.gradient(e, p);
					}

					for (int i = 0; i < 3; ++i)
					{
						const double s = gs[i];
						const double wq = gw[i] * edge.length * dt;
						const double un = (1.0 - s) * u[edge.a] + s * u[edge.b];
						const double vn = (1.0 - s) * v[edge.a] + s * v[edge.b];
						const double an = (1.0 - s) * a[edge.a] + s * a[edge.b];
						const double pn = (1.0 - s) * p[edge.a] + s * p[edge.b];
						const Vec2 hn = (1.0 - s) * h.values[edge.a] + s * h.values[edge.b];
						const Vec2 Gu = (1.0 - s) * gu[0] + s * gu[1];
						const Vec2 Gv = (1.0 - s) * gv[0] + s * gv[1];
						const Vec2 Gp = (1.0 - s) * gp[0] + s * gp[1];
						const double du = Gu.dot(nrm), dv = Gv.dot(nrm), dp = Gp.dot(nrm);
						const double damp = c.b * ((1.0 - c.delta) + c.delta * reg.pow(Gv, q - 1.0));
						const double qcoef = q != 1.0 ? c.b * c.delta * (q - 1.0) * reg.pow(Gv, q - 3.0) : 0.0;
						const double hdotn = hn.dot(nrm);

						jump[0] += sign * wq * hdotn * (-(1.0 - 2.0 * c.k * un) * an * pn / c.lambda + 2.0 * c.k / c.lambda * vn * vn * pn);
						jump[1] += sign * wq * hdotn * (-Gu.dot(Gp) / c.rho);
						jump[2] += sign * wq * hdotn * (-damp * Gv.dot(Gp));
						jump[3] += sign * wq * hdotn * (2.0 / c.rho * du * dp + 2.0 * damp * dv * dp);
						jump[4] += sign * wq * hdotn * (qcoef * Gv.dot(Gp) * dv * dv);
					}
				}
				for (int g = 0; g < 5; ++g)
					t.groups[g] += jump[g];
			}
		}
		if (terms)
			*terms = t;
		return t.total();
	}

	FdReport fd_oracle(const ShapeProblem &problem, const VelocityField &h, const std::vector<double> &taus)
	{
		FdReport rep;
		rep.samples.resize(taus.size());
		const std::size_t jobs = 2 * taus.size() + 1;
		std::vector<double> values(jobs, 0.0);
		parallel_for(jobs, [&](std::size_t begin, std::size_t end) {
			for (std::size_t j = begin; j < end; ++j)
			{
				if (j == 0)
				{
					values[0] = cost_on_mesh(problem, problem.mesh);
					continue;
				}
				const double tau = taus[(j - 1) / 2] * ((j - 1) % 2 == 0 ? 1.0 : -1.0);
				const Mesh2D moved = perturb_mesh(problem.mesh, h, tau);
				try
				{
					values[j] = cost_on_mesh(problem, moved);
				}
				catch (const Error &err)
				{
					throw Error(ErrorKind::SolverFailure, "tau = " + std::to_string(tau) + ": " + err.what());
				}
			}
		});
		rep.J0 = values[0];
		for (std::size_t i = 0; i < taus.size(); ++i)
		{
			FdSample &s = rep.samples[i];
			s.tau = taus[i];
			s.J_plus = values[1 + 2 * i];
			s.J_minus = values[2 + 2 * i];
			s.one_sided = (s.J_plus - rep.J0) / s.tau;
			s.central = (s.J_plus - s.J_minus) / (2.0 * s.tau);
		}
		if (!rep.samples.empty())
			rep.plateau = rep.samples.back().central;
		const std::size_t m = rep.samples.size();
		if (m >= 2)
		{
			const auto &a = rep.samples[m - 2];
			const auto &b = rep.samples[m - 1];
			const double ratio = a.tau / b.tau;
			rep.richardson = (ratio * ratio * b.central - a.central) / (ratio * ratio - 1.0);
		}
		if (m >= 3)
		{
			auto rate = [&](auto member) {
				const double d1 = std::abs(rep.samples[m - 3].*member - rep.samples[m - 2].*member);
				const double d2 = std::abs(rep.samples[m - 2].*member - rep.samples[m - 1].*member);
				const double r = rep.samples[m - 3].tau / rep.samples[m - 2].tau;
				return (d1 > 0.0 && d2 > 0.0) ? std::log(d1 / d2) / std::log(r) : 0.0;
			};
			rep.central_rate = rate(&FdSample::central);
			rep.one_sided_rate = rate(&FdSample::one_sided);
		}
		return rep;
	}

	ContinuityReport continuity_diagnostics(const ShapeProblem &problem, const VelocityField &h, const std::vector<double> &taus)
	{
		StateTrajectory base;
		cost_on_mesh(problem, problem.mesh, &base);
		P1Space space(problem.mesh);
		const SparseMatrix M = space.mass([](std::size_t) { return 1.0; });
		const SparseMatrix S = space.stiffness([](std::size_t) { return 1.0; });
		const double q = problem.params.q;

		ContinuityReport rep;
		rep.rows.resize(taus.size());
		parallel_for(taus.size(), [&](std::size_t begin, std::size_t end) {
			for (std::size_t i = begin; i < end; ++i)
			{
				const double tau = taus[i];
				StateTrajectory moved;
				try
				{
					cost_on_mesh(problem, perturb_mesh(problem.mesh, h, tau), &moved);
				}
				catch (const Error &err)
				{
					if (err.kind() == ErrorKind::FoldedElement)
						throw;
					throw Error(ErrorKind::SolverFailure, "tau = " + std::to_string(tau) + ": " + err.what());
				}
				ContinuityRow row;
				row.tau = tau;
				for (int n = 0; n <= problem.grid.N; ++n)
				{
					const Vector du = moved.u[n] - base.u[n];
					const Vector dv = moved.v[n] - base.v[n];
					const double w = problem.grid.weight(n);
					row.vt_linf_l2_sq = std::max(row.vt_linf_l2_sq, dv.dot(M * dv));
					row.grad_u_linf_l2_sq = std::max(row.grad_u_linf_l2_sq, du.dot(S * du));
					row.grad_vt_l2l2_sq += w * dv.dot(S * dv);
					double lq = 0.0;
					for (std::size_t e = 0; e < space.num_elements(); ++e)
						lq += space.area(e) * std::pow(space.gradient(e, dv).norm(), q + 1.0);
					row.grad_vt_lq1 += w * lq;
				}
				row.combined = row.vt_linf_l2_sq + row.grad_u_linf_l2_sq + row.grad_vt_l2l2_sq + row.grad_vt_lq1;
				row.holder_ratio = row.combined / std::abs(tau);
				row.lipschitz_ratio =
					(std::sqrt(row.vt_linf_l2_sq) + std::sqrt(row.grad_u_linf_l2_sq) + std::sqrt(row.grad_vt_l2l2_sq)) / std::abs(tau);
				rep.rows[i] = row;
			}
		});
		rep.holder_decreasing = true;
		double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
		for (std::size_t i = 0; i < rep.rows.size(); ++i)
		{
			if (i > 0 && !(rep.rows[i].holder_ratio < rep.rows[i - 1].holder_ratio))
				rep.holder_decreasing = false;
			lo = std::min(lo, rep.rows[i].lipschitz_ratio);
			hi = std::max(hi, rep.rows[i].lipschitz_ratio);
		}
		rep.lipschitz_spread = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
		return rep;
	}

	void write_report(std::ostream &out, const ShapeGradientReport &r)
	{
		out << std::setprecision(12);
		out << "dJ_volume " << r.dJ_volume << '\n';
		out << "  dh_contraction " << r.volume_terms.dh_contraction << '\n';
		out << "  q_term " << r.volume_terms.q_term << '\n';
		out << "  divh_pde " << r.volume_terms.divh_pde << '\n';
		out << "  j_divh " << r.volume_terms.j_divh << '\n';
		if (r.dJ_boundary)
		{
			out << "dJ_boundary " << *r.dJ_boundary << '\n';
			const char *names[5] = {"mass_source", "grad_u_grad_p", "damping_flux", "normal_products", "q_term"};
			for (int g = 0; g < 5; ++g)
				out << "  " << names[g] << ' ' << r.boundary_terms.groups[g] << '\n';
			out << "boundary_relative_gap " << r.boundary_relative_gap << '\n';
		}
		if (r.fd)
		{
			out << "fd_J0 " << r.fd->J0 << '\n';
			for (const auto &s : r.fd->samples)
				out << "fd tau " << s.tau << " one_sided " << s.one_sided << " central " << s.central << '\n';
			out << "fd_plateau " << r.fd->plateau << '\n';
			out << "fd_richardson " << r.fd->richardson << '\n';
			out << "fd_central_rate " << r.fd->central_rate << '\n';
			out << "fd_one_sided_rate " << r.fd->one_sided_rate << '\n';
			out << "fd_relative_error " << r.fd_relative_error << '\n';
		}
	}

	void write_fd_csv(std::ostream &out, const FdReport &fd)
	{
		out << std::setprecision(17);
		out << "tau,J_plus,J_minus,one_sided,central\n";
		for (const auto &s : fd.samples)
			out << s.tau << ',' << s.J_plus << ',' << s.J_minus << ',' << s.one_sided << ',' << s.central << '\n';
	}
} // namespace lensopt
