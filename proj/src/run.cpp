#include <lensopt/run.hpp>

#include <lensopt/acceptance.hpp>
#include <lensopt/io.hpp>
#include <lensopt/parallel.hpp>

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace lensopt
{
	using nlohmann::ordered_json;

	ScalarProfile to_profile(const ProfileSpec &spec, const DomainSpec &domain)
	{
		switch (spec.kind)
		{
		case ProfileSpec::Kind::Bump:
			return ScalarProfile::bump(spec.center, spec.radius, spec.amplitude);
		case ProfileSpec::Kind::Eigenmode:
			return ScalarProfile::eigenmode(spec.modes[0], spec.modes[1], spec.amplitude, domain.width, domain.height);
		case ProfileSpec::Kind::Zero:
		case ProfileSpec::Kind::File:
			break;
		}
		return ScalarProfile::zero();
	}

	namespace
	{
		InitialData initial_data(const RunConfig &config, const ProfileSpec &spec, const Mesh2D &mesh)
		{
			InitialData d;
			if (spec.kind != ProfileSpec::Kind::File)
			{
				d.profile = to_profile(spec, config.domain);
				return d;
			}
			auto in = open_input(config.resolve(spec.file));
			const FieldSeries f = read_field_csv(in);
			check_field_mesh(f, mesh);
			if (f.steps.size() != 1)
				throw Error(ErrorKind::IOError, "initial data file '" + spec.file + "' must hold exactly one step");
			d.nodal = f.x.front();
			return d;
		}
	} // namespace

	ShapeSetup make_setup(const RunConfig &config)
	{
		ShapeSetup s;
		s.mesh = build_mesh(config.domain);
		s.params = config.params;
		s.grid = config.grid;
		s.solver = config.solver;
		s.u0 = initial_data(config, config.u0, s.mesh);
		s.u1 = initial_data(config, config.u1, s.mesh);

		switch (config.target.mode)
		{
		case TargetSpec::Mode::Profile:
			s.u_d.mode = TargetData::Mode::Profile;
			s.u_d.profile = to_profile(config.target.profile, config.domain);
			break;
		case TargetSpec::Mode::File:
		{
			s.u_d.mode = TargetData::Mode::Nodal;
			auto in = open_input(config.resolve(config.target.file));
			const FieldSeries f = read_field_csv(in);
			check_field_mesh(f, s.mesh);
			if (static_cast<int>(f.steps.size()) != config.grid.N + 1 || f.steps.front() != 0 || f.steps.back() != config.grid.N)
				throw Error(ErrorKind::GridMismatch, "target file must hold steps 0..N");
			s.u_d.nodal = f.x;
			break;
		}
		case TargetSpec::Mode::Shape:
		{
			s.u_d.mode = TargetData::Mode::Shape;
			DomainSpec td = config.domain;
			td.lens = config.target.shape;
			s.u_d.shape = generate_target(td, s.params, s.grid, s.solver, s.u0.profile, s.u1.profile);
			break;
		}
		}
		return s;
	}

	VelocityField make_field(const RunConfig &config, const Mesh2D &mesh)
	{
		const FieldSpec &f = config.gradient.field;
		switch (f.kind)
		{
		case FieldSpec::Kind::Zero:
			return VelocityField::zero(mesh);
		case FieldSpec::Kind::Random:
			return smooth_random_field(mesh, static_cast<unsigned>(config.seed), f.modes, f.amplitude);
		case FieldSpec::Kind::Bump:
			return radial_bump_field(mesh, f.center, f.r_inner, f.r_outer, f.amplitude);
		case FieldSpec::Kind::File:
			return read_velocity_field(config.resolve(f.file), mesh);
		}
		return VelocityField::zero(mesh);
	}

	std::string error_record(const Error &error)
	{
		ordered_json j;
		j["error"] = std::string(to_string(error.kind()));
		j["message"] = error.what();
		j["step"] = error.step();
		return j.dump();
	}

	namespace
	{
		using clock = std::chrono::steady_clock;

		struct Context
		{
			const RunConfig &config;
			std::filesystem::path dir;
			std::ostream *log;
			ordered_json timings = ordered_json::object();
			std::vector<std::string> artifacts;
			clock::time_point start = clock::now();

			template <class F>
			auto timed(const std::string &phase, F &&f)
			{
				const auto t0 = clock::now();
				if (log)
					*log << phase << "...\n" << std::flush;
				auto result = f();
				timings[phase] = std::chrono::duration<double>(clock::now() - t0).count();
				return result;
			}

			std::ofstream file(const std::string &name)
			{
				artifacts.push_back(name);
				return open_output(dir / name);
			}
		};

		std::vector<int> csv_steps(const RunConfig &c)
		{
			std::vector<int> steps;
			for (int n = 0; n <= c.grid.N; n += c.output.csv_stride)
				steps.push_back(n);
			if (steps.back() != c.grid.N)
				steps.push_back(c.grid.N);
			return steps;
		}

		void write_series(Context &ctx, const std::string &stem, const Mesh2D &mesh, const std::vector<Vector> &series)
		{
			const auto steps = csv_steps(ctx.config);
			std::vector<Vector> values;
			for (int n : steps)
				values.push_back(series[n]);
			auto out = ctx.file(stem + ".csv");
			write_scalar_csv(out, mesh, steps, values);
			for (int n : ctx.config.output.vtk_steps)
			{
				char name[64];
				std::snprintf(name, sizeof name, "%s_%05d.vtk", stem.c_str(), n);
				auto vtk = ctx.file(name);
				write_vtk(vtk, mesh, stem, series[n], stem + " step " + std::to_string(n));
			}
		}

		void write_mesh_file(Context &ctx, const std::string &name, const Mesh2D &mesh)
		{
			auto out = ctx.file(name);
			write_mesh(out, mesh);
		}

		ordered_json diagnostics_json(const StateTrajectory &st, const DiagnosticsBounds &b, double J)
		{
			ordered_json j;
			j["J"] = J;
			j["newton_iterations"] = st.newton_iterations;
			j["fallback_steps"] = st.fallback_steps;
			j["max_residual"] = st.max_residual;
			j["a0"] = b.a0;
			j["min_one_minus_2ku"] = b.min_one_minus_2ku;
			j["max_one_minus_2ku"] = b.max_one_minus_2ku;
			j["degeneracy_ok"] = b.degeneracy_ok;
			j["energy_lhs"] = b.energy_lhs;
			j["data_norm"] = b.data_norm;
			j["energy_ratio"] = b.energy_ratio;
			j["norms"] = {{"u_linf_linf_sq", b.u_linf_linf_sq},
						  {"utt_l2l2_sq", b.utt_l2l2_sq},
						  {"grad_ut_l2l2_sq", b.grad_ut_l2l2_sq},
						  {"grad_ut_lq1lq1", b.grad_ut_lq1lq1},
						  {"ut_linf_l2_sq", b.ut_linf_l2_sq},
						  {"grad_u_linf_l2_sq", b.grad_u_linf_l2_sq},
						  {"grad_ut_linf_l2_sq", b.grad_ut_linf_l2_sq},
						  {"grad_ut_linf_lq1", b.grad_ut_linf_lq1}};
			j["thresholds"] = {{"m_bar", b.m_bar}, {"M_bar", b.M_bar}, {"kappa_T", b.kappa_T}};
			j["surrogates"] = {{"c_linf_w1q", b.c_linf_w1q},
							   {"c_h1_l4", b.c_h1_l4},
							   {"c_poincare", b.c_poincare},
							   {"grad_ut_linf_linf", b.grad_ut_linf_linf},
							   {"grad_utt_l2_linf", b.grad_utt_l2_linf}};
			return j;
		}

		struct Solved
		{
			ShapeSetup setup;
			ShapeProblem problem;
			StateTrajectory state;
			double J = 0.0;
		};

		Solved solve_forward(Context &ctx)
		{
			Solved s;
			s.setup = ctx.timed("setup", [&] { return make_setup(ctx.config); });
			s.problem = s.setup.on(s.setup.mesh);
			s.state = ctx.timed("state", [&] {
				return solve_state(s.setup.mesh, s.setup.params, s.setup.grid, s.problem.u0, s.problem.u1, s.setup.solver);
			});
			s.J = evaluate_cost(s.setup.mesh, s.state, s.problem.u_d);
			write_mesh_file(ctx, "mesh.txt", s.setup.mesh);
			write_series(ctx, "state", s.setup.mesh, s.state.u);
			const DiagnosticsBounds b = energy_report(s.setup.mesh, s.state, s.setup.params);
			auto out = ctx.file("diagnostics.json");
			out << diagnostics_json(s.state, b, s.J).dump(2) << '\n';
			return s;
		}

		AdjointTrajectory solve_backward(Context &ctx, Solved &s)
		{
			AdjointTrajectory adj = ctx.timed("adjoint", [&] {
				return solve_adjoint(s.setup.mesh, s.setup.params, s.state, s.problem.u_d, s.setup.grid, s.setup.solver);
			});
			write_series(ctx, "adjoint", s.setup.mesh, adj.p);
			const DiagnosticsBounds b = energy_report(s.setup.mesh, s.state, s.setup.params);
			const SmallnessReport sr = smallness_report(s.state, s.setup.params, b);
			ordered_json j;
			j["max_abs_p"] = adj.max_abs();
			j["eps"] = sr.eps;
			j["c_q"] = sr.c_q;
			j["conditions"] = ordered_json::array();
			for (int i = 0; i < 3; ++i)
				j["conditions"].push_back({{"lhs", sr.lhs[i]}, {"rhs", sr.rhs[i]}, {"holds", sr.holds[i]}});
			auto out = ctx.file("adjoint_report.json");
			out << j.dump(2) << '\n';
			return adj;
		}

		int run_gradient(Context &ctx)
		{
			Solved s = solve_forward(ctx);
			const AdjointTrajectory adj = solve_backward(ctx, s);
			const Mesh2D &mesh = s.setup.mesh;
			const VelocityField h = make_field(ctx.config, mesh);
			write_velocity_field(ctx.dir / "field.csv", mesh, h);
			ctx.artifacts.push_back("field.csv");

			ShapeGradientReport rep;
			const ShapeTensor S = ctx.timed("volume_form", [&] {
				return volume_shape_tensor(mesh, s.setup.params, s.state, adj, s.problem.u_d, s.setup.solver);
			});
			rep.dJ_volume = S.apply(mesh, h, &rep.volume_terms);
			{
				auto out = ctx.file("load.csv");
				write_vector_csv(out, mesh, {0}, {S.load});
			}
			if (ctx.config.gradient.boundary && !mesh.interface.empty())
			{
				rep.dJ_boundary = ctx.timed("boundary_form", [&] {
					return eval_boundary_form(mesh, s.setup.params, s.state, adj, h, s.setup.solver, &rep.boundary_terms,
											  ctx.config.gradient.traces);
				});
				rep.boundary_relative_gap = relative_error(rep.dJ_volume, *rep.dJ_boundary);
			}
			if (!ctx.config.gradient.fd_taus.empty())
			{
				rep.fd = ctx.timed("fd_oracle", [&] { return fd_oracle(s.problem, h, ctx.config.gradient.fd_taus); });
				rep.fd_relative_error = relative_error(rep.dJ_volume, rep.fd->plateau);
				auto out = ctx.file("fd_slopes.csv");
				write_fd_csv(out, *rep.fd);
			}
			auto out = ctx.file("report.txt");
			write_report(out, rep);
			if (ctx.log)
				write_report(*ctx.log, rep);
			return exit_ok;
		}

		int run_optimize(Context &ctx)
		{
			const ShapeSetup setup = ctx.timed("setup", [&] { return make_setup(ctx.config); });
			write_mesh_file(ctx, "initial_mesh.txt", setup.mesh);
			ordered_json walls = ordered_json::array();
			const OptimizationResult res = ctx.timed("optimize", [&] {
				return optimize(setup, ctx.config.optimizer, [&](const IterationRecord &r) {
					walls.push_back(r.wall_seconds);
					if (ctx.log)
						*ctx.log << "iteration " << r.iteration << " J " << format_double(r.J) << " |h|_H1 " << format_double(r.h1)
								 << " tau " << format_double(r.tau) << '\n'
								 << std::flush;
				});
			});
			ctx.timings["iteration_wall_seconds"] = walls;
			{
				auto out = ctx.file("history.csv");
				write_history_csv(out, res.history);
			}
			write_mesh_file(ctx, "final_mesh.txt", res.mesh);
			ordered_json j;
			j["status"] = std::string(to_string(res.status));
			j["iterations"] = res.history.size();
			j["J_initial"] = res.history.front().J;
			j["J_final"] = res.J_final;
			auto out = ctx.file("optimize_summary.json");
			out << j.dump(2) << '\n';
			if (ctx.log)
				*ctx.log << "status " << to_string(res.status) << '\n';
			return exit_ok;
		}

		int run_verify(Context &ctx)
		{
			bool all = true;
			std::ostringstream summary;
			for (int id : ctx.config.verify.criteria)
			{
				const CriterionResult r = ctx.timed("criterion_" + std::to_string(id), [&] { return run_criterion(id, ctx.config); });
				all = all && r.passed;
				const std::string line = format_result(r);
				summary << line << '\n';
				if (ctx.log)
					*ctx.log << line << '\n' << std::flush;
				char stem[32];
				std::snprintf(stem, sizeof stem, "criterion_%02d", id);
				{
					auto out = ctx.file(std::string(stem) + ".csv");
					out << metrics_csv(r);
				}
				for (const auto &[name, table] : r.tables)
				{
					auto out = ctx.file(std::string(stem) + "_" + name);
					out << table;
				}
			}
			auto out = ctx.file("verify_summary.txt");
			out << summary.str();
			return all ? exit_ok : exit_verify_failed;
		}
	} // namespace

	int run_command(const std::string &command, const RunConfig &config, const std::filesystem::path &out_dir, std::ostream *log)
	{
		std::error_code ec;
		std::filesystem::create_directories(out_dir, ec);
		if (ec)
			throw Error(ErrorKind::IOError, "cannot create output directory '" + out_dir.string() + "'");

		Context ctx{config, out_dir, log, ordered_json::object(), {}};
		int code = exit_ok;
		if (command == "solve")
			solve_forward(ctx);
		else if (command == "adjoint")
		{
			Solved s = solve_forward(ctx);
			solve_backward(ctx, s);
		}
		else if (command == "gradient")
			code = run_gradient(ctx);
		else if (command == "optimize")
			code = run_optimize(ctx);
		else if (command == "verify")
			code = run_verify(ctx);
		else
			throw Error(ErrorKind::ValidationError, "unknown command '" + command + "'");

		const std::string text = serialize_config(config);
		char hash[32];
		std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
		ordered_json m;
		m["command"] = command;
		m["version"] = version_string;
		m["config_hash"] = hash;
		m["seed"] = config.seed;
		m["threads"] = thread_count();
		m["exit_code"] = code;
		ctx.timings["total"] = std::chrono::duration<double>(clock::now() - ctx.start).count();
		m["timings"] = ctx.timings;
		m["artifacts"] = ctx.artifacts;
		m["config"] = text;
		auto out = open_output(out_dir / "manifest.json");
		out << m.dump(2) << '\n';
		return code;
	}
} // namespace lensopt
