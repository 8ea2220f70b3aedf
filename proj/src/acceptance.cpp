#include <lensopt/acceptance.hpp>

#include <lensopt/io.hpp>
#include <lensopt/parallel.hpp>
#include <lensopt/run.hpp>

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace lensopt
{
	namespace
	{
		using std::numbers::pi;

		struct Recorder
		{
			CriterionResult &r;

			void metric(const std::string &name, double value) { r.metrics.emplace_back(name, value); }
		};

		std::string join_row(std::initializer_list<double> values)
		{
			std::string s;
			for (double v : values)
				s += (s.empty() ? "" : ",") + format_double(v);
			return s + "\n";
		}

		double order(double coarse, double fine) { return std::log2(coarse / fine); }

		// --- 1 ----------------------------------------------------------------

		void fd_agreement(const RunConfig &base, CriterionResult &r)
		{
			Recorder rec{r};
			const ShapeSetup setup = make_setup(base);
			const ShapeProblem problem = setup.on(setup.mesh);
			StateTrajectory st;
			cost_on_mesh(problem, setup.mesh, &st);
			const AdjointTrajectory adj = solve_adjoint(setup.mesh, setup.params, st, problem.u_d, setup.grid, setup.solver);
			const ShapeTensor S = volume_shape_tensor(setup.mesh, setup.params, st, adj, problem.u_d, setup.solver);

			std::string table = "seed,tau,J_plus,J_minus,one_sided,central,dJ_volume\n";
			bool ok = true;
			double worst = 0.0;
			for (unsigned i = 1; i <= 3; ++i)
			{
				const unsigned seed = static_cast<unsigned>(base.seed) + i;
				const VelocityField h = smooth_random_field(setup.mesh, seed, 4, 0.05);
				const double dv = S.apply(setup.mesh, h);
				const FdReport fd = fd_oracle(problem, h, {1e-2, 5e-3, 2.5e-3});
				const double rel = relative_error(dv, fd.plateau);
				for (const auto &s : fd.samples)
					table += join_row({double(seed), s.tau, s.J_plus, s.J_minus, s.one_sided, s.central, dv});
				rec.metric("dJ_volume_seed" + std::to_string(seed), dv);
				rec.metric("fd_plateau_seed" + std::to_string(seed), fd.plateau);
				rec.metric("relative_error_seed" + std::to_string(seed), rel);
				rec.metric("central_rate_seed" + std::to_string(seed), fd.central_rate);
				rec.metric("one_sided_rate_seed" + std::to_string(seed), fd.one_sided_rate);
				worst = std::max(worst, rel);
				ok = ok && rel <= 0.05 && std::abs(fd.central_rate - 2.0) <= 0.5;
			}
			r.tables.emplace_back("fd.csv", table);
			r.passed = ok;
			r.summary = "worst |dJ_volume - FD|/|dJ_volume| = " + format_double(worst) + " (limit 0.05), central slopes second order";
		}

		// --- 2 ----------------------------------------------------------------

		void trivial_annihilation(const RunConfig &base, CriterionResult &r)
		{
			Recorder rec{r};
			RunConfig cfg = base;
			cfg.target.mode = TargetSpec::Mode::Shape;
			cfg.target.shape = cfg.domain.lens;
			const ShapeSetup setup = make_setup(cfg);
			const ShapeDerivative d = shape_derivative(setup, setup.mesh);

			double scale = 0.0;
			for (const auto &u : d.state.u)
				scale = std::max(scale, u.cwiseAbs().maxCoeff());
			const double p_max = d.adjoint.max_abs();
			rec.metric("J", d.J);
			rec.metric("data_scale", scale);
			rec.metric("max_abs_p", p_max);
			bool ok = p_max <= 1e-10 * scale;

			std::vector<VelocityField> fields;
			for (unsigned i = 1; i <= 3; ++i)
				fields.push_back(smooth_random_field(setup.mesh, static_cast<unsigned>(cfg.seed) + i, 4, 0.05));
			fields.push_back(radial_bump_field(setup.mesh, Vec2(0.5, 0.5), 0.1, 0.3, 0.05));
			double worst = 0.0;
			for (std::size_t i = 0; i < fields.size(); ++i)
			{
				const double v = d.apply(fields[i]);
				rec.metric("dJ_h" + std::to_string(i + 1), v);
				worst = std::max(worst, std::abs(v));
			}
			ok = ok && worst <= 1e-8;
			r.passed = ok;
			r.summary = "max|p| = " + format_double(p_max) + " (data scale " + format_double(scale) + "), max|dJ.h| = " + format_double(worst);
		}

		// --- 3 ----------------------------------------------------------------

		RunConfig eigen_config(const RunConfig &base, double h_mesh, int N)
		{
			RunConfig cfg = base;
			cfg.domain.lens = LensShape::none();
			cfg.domain.h_mesh = h_mesh;
			MaterialCoeffs c;
			c.lambda = 1.0;
			c.rho = 1.0;
			c.b = 0.01;
			c.delta = 0.5;
			c.k = 0.0;
			cfg.params = MaterialParams::uniform(c, 1.0);
			cfg.grid = TimeGrid{0.5, N};
			cfg.u0 = ProfileSpec{ProfileSpec::Kind::Eigenmode, Vec2(0.5, 0.5), 0.1, 1.0, {1, 1}, ""};
			cfg.u1 = ProfileSpec{};
			return cfg;
		}

		// relative L2(0,T;L2) error against an exact nodal trajectory
		double trajectory_error(const Mesh2D &mesh, const TimeGrid &grid, const StateTrajectory &st,
								const std::function<Vector(int)> &exact)
		{
			P1Space space(mesh);
			const SparseMatrix M = space.mass([](std::size_t) { return 1.0; });
			double num = 0.0, den = 0.0;
			for (int n = 0; n <= grid.N; ++n)
			{
				const Vector ex = exact(n);
				const Vector e = st.u[n] - ex;
				num += grid.weight(n) * e.dot(M * e);
				den += grid.weight(n) * ex.dot(M * ex);
			}
			return std::sqrt(num / den);
		}

		std::complex<double> damped_mode(double two_gamma, double omega0_sq, double t)
		{
			// solution of c'' + 2 gamma c' + omega0^2 c = 0 with c(0) = 1, c'(0) = 0
			const double g = 0.5 * two_gamma;
			const std::complex<double> w = std::sqrt(std::complex<double>(omega0_sq - g * g));
			if (std::abs(w) < 1e-12)
				return std::exp(-g * t) * (1.0 + g * t);
			return std::exp(-g * t) * (std::cos(w * t) + g / w * std::sin(w * t));
		}

		void linear_regime(const RunConfig &base, CriterionResult &r)
		{
			Recorder rec{r};
			std::string table = "kind,h_inv,N,relative_error\n";

			// spatial: analytic eigenmode, dt = T/512
			const double lambda = 1.0, rho = 1.0, b = 0.01;
			const double gamma2 = pi * pi * lambda * b * 2.0;
			const double omega0_sq = 2.0 * pi * pi * lambda / rho;
			std::vector<double> spatial;
			for (int inv : {16, 32, 64})
			{
				const RunConfig cfg = eigen_config(base, 1.0 / inv, 512);
				const Mesh2D mesh = build_mesh(cfg.domain);
				const Vector u0 = to_profile(cfg.u0, cfg.domain).sample(mesh);
				const StateTrajectory st = solve_state(mesh, cfg.params, cfg.grid, u0, Vector::Zero(u0.size()), cfg.solver);
				const double err = trajectory_error(mesh, cfg.grid, st, [&](int n) {
					return Vector(damped_mode(gamma2, omega0_sq, cfg.grid.time(n)).real() * u0);
				});
				spatial.push_back(err);
				table += "spatial," + std::to_string(inv) + ",512," + format_double(err) + "\n";
			}

			// temporal: exact solution of the semi-discrete modal ODEs on a coarse mesh
			std::vector<double> temporal;
			{
				const RunConfig cfg0 = eigen_config(base, 1.0 / 16, 16);
				const Mesh2D mesh = build_mesh(cfg0.domain);
				P1Space space(mesh);
				const auto one = [](std::size_t) { return 1.0; };
				const Eigen::MatrixXd Mf = Eigen::MatrixXd(space.mass(one));
				const Eigen::MatrixXd Sf = Eigen::MatrixXd(space.stiffness(one));
				std::vector<int> interior;
				for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
					if (!mesh.on_boundary[i])
						interior.push_back(static_cast<int>(i));
				const auto m = static_cast<Eigen::Index>(interior.size());
				Eigen::MatrixXd M(m, m), S(m, m);
				for (Eigen::Index i = 0; i < m; ++i)
					for (Eigen::Index j = 0; j < m; ++j)
					{
						M(i, j) = Mf(interior[i], interior[j]);
						S(i, j) = Sf(interior[i], interior[j]);
					}
				Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(S, M);
				const Eigen::MatrixXd X = eig.eigenvectors(); // M-orthonormal
				const Vector mu = eig.eigenvalues();
				const Vector u0 = to_profile(cfg0.u0, cfg0.domain).sample(mesh);
				Vector u0i(m);
				for (Eigen::Index i = 0; i < m; ++i)
					u0i[i] = u0[interior[i]];
				const Vector c0 = X.transpose() * (M * u0i);

				for (int N : {16, 32, 64})
				{
					const RunConfig cfg = eigen_config(base, 1.0 / 16, N);
					const StateTrajectory st = solve_state(mesh, cfg.params, cfg.grid, u0, Vector::Zero(u0.size()), cfg.solver);
					const double err = trajectory_error(mesh, cfg.grid, st, [&](int n) {
						const double t = cfg.grid.time(n);
						Vector c(m);
						for (Eigen::Index i = 0; i < m; ++i)
							c[i] = c0[i] * damped_mode(lambda * b * mu[i], lambda / rho * mu[i], t).real();
						const Vector ui = X * c;
						Vector full = Vector::Zero(mesh.num_vertices());
						for (Eigen::Index i = 0; i < m; ++i)
							full[interior[i]] = ui[i];
						return full;
					});
					temporal.push_back(err);
					table += "temporal,16," + std::to_string(N) + "," + format_double(err) + "\n";
				}
			}

			const double s1 = order(spatial[0], spatial[1]), s2 = order(spatial[1], spatial[2]);
			const double t1 = order(temporal[0], temporal[1]), t2 = order(temporal[1], temporal[2]);
			rec.metric("error_h64_N512", spatial[2]);
			rec.metric("spatial_order_1", s1);
			rec.metric("spatial_order_2", s2);
			rec.metric("temporal_order_1", t1);
			rec.metric("temporal_order_2", t2);
			r.tables.emplace_back("convergence.csv", table);
			auto near2 = [](double o) { return std::abs(o - 2.0) <= 0.3; };
			r.passed = spatial[2] <= 0.01 && near2(s1) && near2(s2) && near2(t1) && near2(t2);
			r.summary = "error at h=1/64, dt=T/512: " + format_double(spatial[2]) + "; spatial orders " + format_double(s1) + ", " +
						format_double(s2) + "; temporal orders " + format_double(t1) + ", " + format_double(t2);
		}

		// --- 4 ----------------------------------------------------------------

		double golden_max(const std::function<double(double)> &f, double a, double b)
		{
			const double g = 0.5 * (std::sqrt(5.0) - 1.0);
			double c = b - g * (b - a), d = a + g * (b - a);
			double fc = f(c), fd = f(d);
			for (int i = 0; i < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++i)
			{
				if (fc > fd)
				{
					b = d;
					d = c;
					fd = fc;
					c = b - g * (b - a);
					fc = f(c);
				}
				else
				{
					a = c;
					c = d;
					fc = fd;
					d = a + g * (b - a);
					fd = f(d);
				}
			}
			return std::max(fc, fd);
		}

		void inequality_suite(const RunConfig &base, CriterionResult &r)
		{
			Recorder rec{r};
			std::mt19937_64 rng(base.seed + 4);
			std::uniform_real_distribution<double> U(-1.0, 1.0);
			auto disk = [&](double radius) {
				Vec2 x;
				do
					x = Vec2(U(rng), U(rng));
				while (x.norm() > 1.0);
				return Vec2(radius * x);
			};
			bool ok = true;

			double worst_repr = 0.0;
			for (double q : {2.5, 3.0, 4.0})
			{
				double w = 0.0;
				for (int i = 0; i < 10000; ++i)
				{
					const Vec2 x = disk(10.0), y = disk(10.0);
					w = std::max(w, repr_formula_residual(x, y, q, 64));
				}
				rec.metric("repr_residual_q" + format_double(q), w);
				worst_repr = std::max(worst_repr, w);
			}
			ok = ok && worst_repr <= 1e-8;

			double worst_violation = 0.0;
			for (double q : {1.0, 2.0, 3.0, 4.0})
			{
				double v = 0.0;
				for (int i = 0; i < 100000; ++i)
				{
					const Vec2 x = disk(1.0), y = disk(1.0);
					const double lhs = (flux(x, q) - flux(y, q)).dot(x - y);
					const double rhs = std::pow(2.0, 1.0 - q) * std::pow((x - y).norm(), q + 1.0);
					v = std::max(v, rhs - lhs);
				}
				rec.metric("monotone_max_violation_q" + format_double(q), v);
				worst_violation = std::max(worst_violation, v);
			}
			ok = ok && worst_violation <= 1e-12;

			double worst_antipodal = 0.0;
			for (double q : {1.0, 2.0, 2.5, 3.0, 4.0})
				for (int i = 0; i < 100; ++i)
				{
					const Vec2 x = disk(1.0);
					const double lhs = (flux(x, q) - flux(Vec2(-x), q)).dot(2.0 * x);
					const double rhs = std::pow(2.0, 1.0 - q) * std::pow((2.0 * x).norm(), q + 1.0);
					worst_antipodal = std::max(worst_antipodal, std::abs(lhs - rhs));
				}
			rec.metric("antipodal_max_abs_difference", worst_antipodal);
			ok = ok && worst_antipodal <= 1e-12;

			std::uniform_real_distribution<double> E(0.05, 2.0), R(1.2, 4.0);
			double worst_young = 0.0;
			for (int i = 0; i < 100; ++i)
			{
				const double eps = E(rng), rr = R(rng);
				// sup over x >= 0 of x - eps x^r (y = 1 by homogeneity)
				const double xstar_bound = std::pow(1.0 / eps, 1.0 / (rr - 1.0)) * 2.0;
				const double numeric = golden_max([&](double x) { return x - eps * std::pow(x, rr); }, 0.0, xstar_bound);
				const double analytic = young_constant(eps, rr);
				worst_young = std::max(worst_young, std::abs(numeric - analytic) / std::abs(analytic));
			}
			rec.metric("young_max_relative_difference", worst_young);
			ok = ok && worst_young <= 1e-8;

			r.passed = ok;
			r.summary = "representation residual " + format_double(worst_repr) + ", monotonicity violation " +
						format_double(worst_violation) + ", antipodal " + format_double(worst_antipodal) + ", Young " +
						format_double(worst_young);
		}

		// --- 5 ----------------------------------------------------------------

		// integral of a quadratic over a triangle (edge-midpoint rule, exact for degree 2)
		double triangle_integral(const std::function<double(const Vec2 &)> &f, const Vec2 &a, const Vec2 &b, const Vec2 &c)
		{
			const double area = 0.5 * std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
			return area / 3.0 * (f(0.5 * (a + b)) + f(0.5 * (b + c)) + f(0.5 * (c + a)));
		}

		void transform_identities(const RunConfig &base, CriterionResult &r)
		{
			Recorder rec{r};
			const Mesh2D mesh = build_mesh(base.domain);
			const VelocityField h = smooth_random_field(mesh, static_cast<unsigned>(base.seed) + 5, 4, 0.05);
			const auto dh = velocity_gradient(mesh, h);
			const auto div = velocity_divergence(mesh, h);

			std::string table = "tau,det_residual,inverse_transpose_residual\n";
			std::vector<double> res_A;
			double worst_det = 0.0;
			for (double tau : {1e-2, 5e-3, 2.5e-3})
			{
				const TransformRecord p = transform_factors(mesh, h, tau), m = transform_factors(mesh, h, -tau);
				double rd = 0.0, ra = 0.0;
				for (std::size_t e = 0; e < mesh.num_triangles(); ++e)
				{
					rd = std::max(rd, std::abs((p.determinant[e] - m.determinant[e]) / (2.0 * tau) - div[e]));
					ra = std::max(ra, ((p.inverse_transpose[e] - m.inverse_transpose[e]) / (2.0 * tau) + dh[e].transpose()).norm());
				}
				table += join_row({tau, rd, ra});
				worst_det = std::max(worst_det, rd);
				res_A.push_back(ra);
			}
			const double rate1 = order(res_A[0], res_A[1]), rate2 = order(res_A[1], res_A[2]);
			rec.metric("det_max_residual", worst_det);
			rec.metric("inverse_transpose_rate_1", rate1);
			rec.metric("inverse_transpose_rate_2", rate2);
			// the determinant is exactly quadratic in tau in 2D, so its central difference is exact
			bool ok = worst_det <= 1e-9 && std::abs(rate1 - 2.0) <= 0.2 && std::abs(rate2 - 2.0) <= 0.2;

			// transport identity on the lens subdomain for random quadratics
			std::mt19937_64 rng(base.seed + 55);
			std::uniform_real_distribution<double> U(-1.0, 1.0);
			double worst_transport = 0.0;
			for (int trial = 0; trial < 5; ++trial)
			{
				double a[6];
				for (double &x : a)
					x = U(rng);
				const auto f = [&](const Vec2 &x) {
					return a[0] + a[1] * x.x() + a[2] * x.y() + a[3] * x.x() * x.x() + a[4] * x.x() * x.y() + a[5] * x.y() * x.y();
				};
				const auto grad = [&](const Vec2 &x) {
					return Vec2(a[1] + 2.0 * a[3] * x.x() + a[4] * x.y(), a[2] + a[4] * x.x() + 2.0 * a[5] * x.y());
				};
				const VelocityField g = smooth_random_field(mesh, static_cast<unsigned>(base.seed) + 100 + trial, 3, 0.05);
				const auto gdiv = velocity_divergence(mesh, g);
				auto lens_integral = [&](double tau) {
					double s = 0.0;
					for (std::size_t e = 0; e < mesh.num_triangles(); ++e)
					{
						if (mesh.labels[e] != Material::Lens)
							continue;
						const auto &t = mesh.triangles[e];
						s += triangle_integral(f, mesh.vertices[t[0]] + tau * g.values[t[0]], mesh.vertices[t[1]] + tau * g.values[t[1]],
											   mesh.vertices[t[2]] + tau * g.values[t[2]]);
					}
					return s;
				};
				const double tau = 1e-2;
				// five-point stencil, exact for the degree-4 polynomial tau -> integral
				const double lhs = (lens_integral(-2 * tau) - 8 * lens_integral(-tau) + 8 * lens_integral(tau) - lens_integral(2 * tau)) / (12 * tau);
				double rhs = 0.0;
				for (std::size_t e = 0; e < mesh.num_triangles(); ++e)
				{
					if (mesh.labels[e] != Material::Lens)
						continue;
					const auto &t = mesh.triangles[e];
					const Vec2 &x0 = mesh.vertices[t[0]], &x1 = mesh.vertices[t[1]], &x2 = mesh.vertices[t[2]];
					const Vec2 &h0 = g.values[t[0]], &h1 = g.values[t[1]], &h2 = g.values[t[2]];
					const auto integrand = [&](const Vec2 &x) {
						// barycentric interpolation of g at x
						const double area2 = (x1 - x0).x() * (x2 - x0).y() - (x1 - x0).y() * (x2 - x0).x();
						const double l1 = ((x - x0).x() * (x2 - x0).y() - (x - x0).y() * (x2 - x0).x()) / area2;
						const double l2 = ((x1 - x0).x() * (x - x0).y() - (x1 - x0).y() * (x - x0).x()) / area2;
						const Vec2 hx = (1.0 - l1 - l2) * h0 + l1 * h1 + l2 * h2;
						return grad(x).dot(hx) + f(x) * gdiv[e];
					};
					rhs += triangle_integral(integrand, x0, x1, x2);
				}
				worst_transport = std::max(worst_transport, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
			}
			rec.metric("transport_max_residual", worst_transport);
			ok = ok && worst_transport <= 1e-10;
			r.tables.emplace_back("transform.csv", table);
			r.passed = ok;
			r.summary = "det residual " + format_double(worst_det) + ", inverse-transpose rates " + format_double(rate1) + ", " +
						format_double(rate2) + ", transport residual " + format_double(worst_transport);
		}

		// --- 6 ----------------------------------------------------------------

		void monitors(const RunConfig &base, CriterionResult &r)
		{
			Recorder rec{r};
			const ShapeSetup setup = make_setup(base);
			const ShapeProblem problem = setup.on(setup.mesh);
			const StateTrajectory st = solve_state(setup.mesh, setup.params, setup.grid, problem.u0, problem.u1, setup.solver);
			const DiagnosticsBounds b = energy_report(setup.mesh, st, setup.params);
			const double norms[] = {b.u_linf_linf_sq,  b.utt_l2l2_sq,        b.grad_ut_l2l2_sq,    b.grad_ut_lq1lq1,
									b.ut_linf_l2_sq,   b.grad_u_linf_l2_sq,  b.grad_ut_linf_l2_sq, b.grad_ut_linf_lq1};
			bool finite = std::isfinite(b.energy_ratio);
			for (double v : norms)
				finite = finite && std::isfinite(v);
			rec.metric("min_one_minus_2ku", b.min_one_minus_2ku);
			rec.metric("energy_lhs", b.energy_lhs);
			rec.metric("data_norm", b.data_norm);
			rec.metric("energy_ratio", b.energy_ratio);

			RunConfig lin = base;
			lin.params.lens.k = 0.0;
			lin.params.fluid.k = 0.0;
			const ShapeSetup ls = make_setup(lin);
			const ShapeProblem lp = ls.on(ls.mesh);
			const StateTrajectory lt = solve_state(ls.mesh, ls.params, ls.grid, lp.u0, lp.u1, ls.solver);
			WesterveltOperator op(ls.mesh, ls.params, ls.solver.eps_reg);
			const std::vector<double> E = linear_energy(op, lt);
			double worst_increase = -std::numeric_limits<double>::infinity();
			for (std::size_t n = 0; n + 1 < E.size(); ++n)
				worst_increase = std::max(worst_increase, E[n + 1] - E[n]);
			rec.metric("energy_initial", E.front());
			rec.metric("energy_final", E.back());
			rec.metric("max_step_increase", worst_increase);
			const bool monotone = worst_increase <= 1e-12 * E.front();
			r.tables.emplace_back("energy.csv", [&] {
				std::string s = "step,energy\n";
				for (std::size_t n = 0; n < E.size(); ++n)
					s += std::to_string(n) + "," + format_double(E[n]) + "\n";
				return s;
			}());
			r.passed = b.min_one_minus_2ku > 0.9 && finite && monotone;
			r.summary = "min(1-2ku) = " + format_double(b.min_one_minus_2ku) + ", energy ratio " + format_double(b.energy_ratio) +
						", largest linear-energy step change " + format_double(worst_increase);
		}

		// --- 7 ----------------------------------------------------------------

		struct FormPair
		{
			double volume = 0.0;
			double boundary = 0.0;
		};

		FormPair both_forms(const RunConfig &cfg)
		{
			const ShapeSetup setup = make_setup(cfg);
			const ShapeProblem problem = setup.on(setup.mesh);
			StateTrajectory st;
			cost_on_mesh(problem, setup.mesh, &st);
			const AdjointTrajectory adj = solve_adjoint(setup.mesh, setup.params, st, problem.u_d, setup.grid, setup.solver);
			const VelocityField h = radial_bump_field(setup.mesh, cfg.domain.lens.center, 0.1, 0.3, 0.05);
			FormPair f;
			f.volume = eval_volume_form(setup.mesh, setup.params, st, adj, problem.u_d, h, setup.solver);
			f.boundary = eval_boundary_form(setup.mesh, setup.params, st, adj, h, setup.solver, nullptr, cfg.gradient.traces);
			return f;
		}

		void volume_boundary(const RunConfig &base, CriterionResult &r)
		{
			Recorder rec{r};
			std::string table = "materials,h_inv,dJ_volume,dJ_boundary,relative_gap\n";
			std::vector<double> gaps;
			double vol64 = 0.0;
			for (int inv : {32, 64, 128})
			{
				RunConfig cfg = base;
				cfg.domain.h_mesh = 1.0 / inv;
				const FormPair f = both_forms(cfg);
				const double gap = std::abs(f.volume - f.boundary) / std::abs(f.volume);
				gaps.push_back(gap);
				if (inv == 64)
					vol64 = f.volume;
				table += "contrasted," + std::to_string(inv) + "," + format_double(f.volume) + "," + format_double(f.boundary) + "," +
						 format_double(gap) + "\n";
				rec.metric("gap_h" + std::to_string(inv), gap);
			}
			RunConfig same = base;
			same.domain.h_mesh = 1.0 / 64;
			same.params.lens = same.params.fluid;
			const FormPair fs = both_forms(same);
			const double tolerance = 0.02 * std::abs(vol64);
			table += "identical,64," + format_double(fs.volume) + "," + format_double(fs.boundary) + ",\n";
			rec.metric("identical_dJ_boundary", fs.boundary);
			rec.metric("identical_tolerance", tolerance);
			r.tables.emplace_back("forms.csv", table);
			const bool monotone = gaps[1] < gaps[0] && gaps[2] < gaps[1];
			r.passed = gaps[1] <= 0.10 && monotone && std::abs(fs.boundary) <= tolerance;
			r.summary = "gaps " + format_double(gaps[0]) + ", " + format_double(gaps[1]) + ", " + format_double(gaps[2]) +
						" at h = 1/32, 1/64, 1/128; identical materials |dJ_boundary| = " + format_double(std::abs(fs.boundary)) +
						" (tolerance " + format_double(tolerance) + ")";
		}

		// --- 8 ----------------------------------------------------------------

		void continuity(const RunConfig &base, CriterionResult &r)
		{
			Recorder rec{r};
			const ShapeSetup setup = make_setup(base);
			const ShapeProblem problem = setup.on(setup.mesh);
			const VelocityField h = smooth_random_field(setup.mesh, static_cast<unsigned>(base.seed) + 8, 4, 0.05);
			const ContinuityReport rep = continuity_diagnostics(problem, h, {1e-2, 5e-3, 2.5e-3});
			std::string table = "tau,combined,holder_ratio,lipschitz_ratio\n";
			for (const auto &row : rep.rows)
				table += join_row({row.tau, row.combined, row.holder_ratio, row.lipschitz_ratio});
			r.tables.emplace_back("continuity.csv", table);
			rec.metric("lipschitz_spread", rep.lipschitz_spread);
			rec.metric("holder_decreasing", rep.holder_decreasing ? 1.0 : 0.0);
			r.passed = rep.holder_decreasing && rep.lipschitz_spread <= 2.0;
			r.summary = std::string("combined/tau ") + (rep.holder_decreasing ? "decreasing" : "not decreasing") +
						", Lipschitz ratio spread " + format_double(rep.lipschitz_spread);
		}

		// --- 9 ----------------------------------------------------------------

		void lens_recovery(const RunConfig &base, CriterionResult &r)
		{
			Recorder rec{r};
			const RunConfig cfg = lens_recovery_config(base);
			const ShapeSetup setup = make_setup(cfg);
			const OptimizationResult res = optimize(setup, cfg.optimizer);
			std::ostringstream hist;
			write_history_csv(hist, res.history);
			r.tables.emplace_back("history.csv", hist.str());

			bool monotone = true;
			for (std::size_t i = 0; i + 1 < res.history.size(); ++i)
				monotone = monotone && res.history[i + 1].J <= res.history[i].J;
			const double J0 = res.history.front().J;
			const double ratio = res.J_final / J0;
			double rmin = 1e300, rmax = 0.0;
			const Vec2 c = cfg.target.shape.center;
			for (const auto &e : res.mesh.interface)
			{
				const double d = (res.mesh.vertices[e.a] - c).norm();
				rmin = std::min(rmin, d);
				rmax = std::max(rmax, d);
			}
			rec.metric("J_initial", J0);
			rec.metric("J_final", res.J_final);
			rec.metric("reduction_ratio", ratio);
			rec.metric("iterations", static_cast<double>(res.history.size() - 1));
			rec.metric("final_interface_radius_min", rmin);
			rec.metric("final_interface_radius_max", rmax);
			r.passed = ratio <= 0.5 && monotone && res.history.size() <= 51;
			r.summary = "J reduced to " + format_double(ratio) + " of its initial value in " + std::to_string(res.history.size() - 1) +
						" iterations (" + std::string(to_string(res.status)) + "), interface radius in [" + format_double(rmin) + ", " +
						format_double(rmax) + "]";
		}

		// --- 10 ---------------------------------------------------------------

		std::map<std::string, std::string> csv_files(const std::filesystem::path &dir)
		{
			std::map<std::string, std::string> out;
			for (const auto &entry : std::filesystem::directory_iterator(dir))
				if (entry.path().extension() == ".csv")
				{
					std::ifstream in(entry.path(), std::ios::binary);
					std::ostringstream ss;
					ss << in.rdbuf();
					out[entry.path().filename().string()] = ss.str();
				}
			return out;
		}

		void determinism(const RunConfig &base, CriterionResult &r)
		{
			Recorder rec{r};
			RunConfig cfg = base;
			cfg.verify.criteria = {1, 2};
			const int saved = thread_count();
			const auto root = std::filesystem::temp_directory_path() /
							  ("lensopt_determinism_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
			std::vector<std::map<std::string, std::string>> runs;
			const int counts[] = {1, 2, 4, 1};
			try
			{
				for (int i = 0; i < 4; ++i)
				{
					set_thread_count(counts[i]);
					const auto dir = root / ("run" + std::to_string(i));
					run_command("verify", cfg, dir);
					runs.push_back(csv_files(dir));
				}
			}
			catch (...)
			{
				set_thread_count(saved);
				std::filesystem::remove_all(root);
				throw;
			}
			set_thread_count(saved);
			std::filesystem::remove_all(root);

			bool same = !runs.front().empty();
			for (std::size_t i = 1; i < runs.size(); ++i)
				same = same && runs[i] == runs.front();
			rec.metric("csv_files", static_cast<double>(runs.front().size()));
			rec.metric("identical", same ? 1.0 : 0.0);
			r.passed = same;
			r.summary = std::to_string(runs.front().size()) + " CSV artifacts " + (same ? "byte-identical" : "DIFFER") +
						" across verify runs with 1, 2, 4 and again 1 threads";
		}
	} // namespace

	const char *criterion_name(int id)
	{
		switch (id)
		{
		case 1:
			return "FD-gradient agreement";
		case 2:
			return "trivial annihilation";
		case 3:
			return "linear-regime analytic check";
		case 4:
			return "inequality oracle suite";
		case 5:
			return "transform identities";
		case 6:
			return "degeneracy and energy monitors";
		case 7:
			return "volume/boundary consistency";
		case 8:
			return "continuity diagnostics";
		case 9:
			return "lens recovery";
		case 10:
			return "determinism";
		}
		return "unknown";
	}

	RunConfig lens_recovery_config(const RunConfig &base)
	{
		RunConfig cfg = base;
		cfg.domain.h_mesh = 1.0 / 24;
		cfg.domain.lens = LensShape::ellipse(Vec2(0.5, 0.5), Vec2(0.25, 0.16));
		cfg.grid = TimeGrid{0.5, 96};
		cfg.u0 = ProfileSpec{ProfileSpec::Kind::Bump, Vec2(0.5, 0.5), 0.3, 0.03, {1, 1}, ""};
		cfg.u1 = ProfileSpec{ProfileSpec::Kind::Bump, Vec2(0.82, 0.82), 0.12, 0.3, {1, 1}, ""};
		cfg.target.mode = TargetSpec::Mode::Shape;
		cfg.target.shape = LensShape::circle(Vec2(0.5, 0.5), 0.2);
		cfg.optimizer.max_iters = 50;
		return cfg;
	}

	CriterionResult run_criterion(int id, const RunConfig &base)
	{
		CriterionResult r;
		r.id = id;
		r.name = criterion_name(id);
		const auto t0 = std::chrono::steady_clock::now();
		try
		{
			switch (id)
			{
			case 1:
				fd_agreement(base, r);
				break;
			case 2:
				trivial_annihilation(base, r);
				break;
			case 3:
				linear_regime(base, r);
				break;
			case 4:
				inequality_suite(base, r);
				break;
			case 5:
				transform_identities(base, r);
				break;
			case 6:
				monitors(base, r);
				break;
			case 7:
				volume_boundary(base, r);
				break;
			case 8:
				continuity(base, r);
				break;
			case 9:
				lens_recovery(base, r);
				break;
			case 10:
				determinism(base, r);
				break;
			default:
				throw Error(ErrorKind::ValidationError, "no criterion " + std::to_string(id));
			}
		}
		catch (const Error &e)
		{
			r.passed = false;
			r.summary = std::string("error: ") + e.what();
		}
		r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
		return r;
	}

	std::string format_result(const CriterionResult &r)
	{
		return std::string(r.passed ? "[PASS] " : "[FAIL] ") + std::to_string(r.id) + " " + r.name + ": " + r.summary;
	}

	std::string metrics_csv(const CriterionResult &r)
	{
		std::string s = "metric,value\n";
		for (const auto &[name, value] : r.metrics)
			s += name + "," + format_double(value) + "\n";
		s += std::string("passed,") + (r.passed ? "1" : "0") + "\n";
		return s;
	}
} // namespace lensopt
