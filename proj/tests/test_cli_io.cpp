#include <doctest.h>

#include <lensopt/config.hpp>
#include <lensopt/error.hpp>
#include <lensopt/io.hpp>
#include <lensopt/run.hpp>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

using namespace lensopt;
namespace fs = std::filesystem;

namespace
{
	Error error_of(const std::function<void()> &f)
	{
		try
		{
			f();
		}
		catch (const Error &e)
		{
			return e;
		}
		FAIL("no error thrown");
		return Error(ErrorKind::IOError, "");
	}

	fs::path scratch(const std::string &name)
	{
		const fs::path p = fs::temp_directory_path() / ("lensopt_test_" + name);
		fs::remove_all(p);
		fs::create_directories(p);
		return p;
	}

	std::string slurp(const fs::path &p)
	{
		std::ifstream in(p, std::ios::binary);
		std::ostringstream ss;
		ss << in.rdbuf();
		return ss.str();
	}

	RunConfig tiny()
	{
		RunConfig c;
		c.domain.h_mesh = 1.0 / 12;
		c.grid = TimeGrid{0.25, 8};
		c.gradient.fd_taus = {1e-2};
		return c;
	}
} // namespace

TEST_SUITE("cli_io")
{
	TEST_CASE("minimal config fills the documented defaults")
	{
		const RunConfig c = parse_config_text("[run]\nseed = 0\n");
		CHECK(c == RunConfig());
		CHECK(c.seed == 0);
		CHECK(c.params.q == 3.0);
		CHECK(c.domain.h_mesh == 1.0 / 32);
		CHECK(c.grid.N == 128);
		CHECK(c.optimizer.max_iters == 100);
		CHECK(c.optimizer.g_tol == 1e-6);
		CHECK(parse_config_text("") == RunConfig());
	}

	TEST_CASE("serialize then parse is the identity")
	{
		RunConfig c;
		c.seed = 12345;
		c.domain.lens = LensShape::from_polygon({Vec2(0.3, 0.3), Vec2(0.7, 0.31), Vec2(0.6, 0.7)});
		c.params.lens.lambda = 1.0 / 3.0;
		c.params.fluid.b = 0.1 + 0.2;
		c.grid = TimeGrid{0.7, 33};
		c.u0.kind = ProfileSpec::Kind::Eigenmode;
		c.u0.modes = {2, 3};
		c.target.mode = TargetSpec::Mode::Shape;
		c.target.shape = LensShape::ellipse(Vec2(0.45, 0.55), Vec2(0.2, 0.1));
		c.gradient.traces = TraceMode::Element;
		c.gradient.fd_taus = {3e-3, 1.5e-3};
		c.gradient.field.kind = FieldSpec::Kind::Bump;
		c.output.vtk_steps = {0, 5, 33};
		c.verify.criteria = {4, 5};
		const std::string text = serialize_config(c);
		const RunConfig back = parse_config_text(text);
		CHECK(back == c);
		CHECK(serialize_config(back) == text);
		CHECK(parse_config_text(serialize_config(RunConfig())) == RunConfig());
	}

	TEST_CASE("syntax errors carry line numbers and are all collected")
	{
		const std::string text = "[run]\nseed = 1\n\n[domain]\nwidth 1\n[bogus]\nx = 1\n[time]\nN = many\nT = 0.5\nT = 0.6\n";
		const Error e = error_of([&] { parse_config_text(text); });
		CHECK(e.kind() == ErrorKind::ParseError);
		CHECK(e.step() == 5);
		const std::string msg = e.what();
		CHECK(msg.find("line 5") != std::string::npos);
		CHECK(msg.find("line 6") != std::string::npos);
		CHECK(msg.find("line 9") != std::string::npos);
		CHECK(msg.find("line 11") != std::string::npos);
	}

	TEST_CASE("every violated invariant is listed")
	{
		const Error e = error_of([] { parse_config_text("[lens]\ndelta = 1.2\n[fluid]\nrho = -1\n[time]\nN = 1\n"); });
		CHECK(e.kind() == ErrorKind::ValidationError);
		const std::string msg = e.what();
		CHECK(msg.find("lens.delta must lie in (0,1)") != std::string::npos);
		CHECK(msg.find("fluid.rho") != std::string::npos);
		CHECK(msg.find("N must be >= 2") != std::string::npos);

		const Error q = error_of([] { parse_config_text("[model]\nq = 2\n[solver]\neps_reg = 0\n"); });
		CHECK(q.kind() == ErrorKind::ValidationError);
		CHECK(std::string(q.what()).find("q > 2 is required") != std::string::npos);
		CHECK_NOTHROW(parse_config_text("[model]\nq = 2\n[solver]\neps_reg = 0\n[gradient]\nenabled = false\n"));

		const Error f = error_of([] { parse_config_text("[initial]\nu0 = file\nu0_file = no_such_file.csv\n"); });
		CHECK(f.kind() == ErrorKind::ValidationError);
	}

	TEST_CASE("CSV export is lossless")
	{
		DomainSpec d;
		d.h_mesh = 1.0 / 8;
		d.lens = LensShape::none();
		const Mesh2D mesh = build_mesh(d);
		std::mt19937_64 rng(5);
		std::normal_distribution<double> N(0.0, 1e-3);
		std::vector<Vector> values(3, Vector(mesh.num_vertices()));
		for (auto &v : values)
			for (Eigen::Index i = 0; i < v.size(); ++i)
				v[i] = N(rng) * std::exp(N(rng) * 1e4);
		std::stringstream ss;
		write_scalar_csv(ss, mesh, {0, 4, 8}, values);
		const FieldSeries back = read_field_csv(ss);
		CHECK(back.steps == std::vector<int>{0, 4, 8});
		for (int s = 0; s < 3; ++s)
			for (Eigen::Index i = 0; i < values[s].size(); ++i)
				CHECK(back.x[s][i] == values[s][i]);
		CHECK_NOTHROW(check_field_mesh(back, mesh));

		std::stringstream zero;
		write_scalar_csv(zero, mesh, {0}, {Vector::Zero(mesh.num_vertices())});
		std::string line;
		std::getline(zero, line);
		CHECK(line == "node,x,y,step,value");
		while (std::getline(zero, line))
			CHECK(line.substr(line.rfind(',') + 1) == "0");
	}

	TEST_CASE("CSV import reports the offending line")
	{
		std::istringstream in("node,x,y,step,value\n0,0,0,0,1\n1,0.5,0,0,oops\n");
		const Error e = error_of([&] { read_field_csv(in); });
		CHECK(e.kind() == ErrorKind::IOError);
		CHECK(e.step() == 3);
	}

	TEST_CASE("VTK eigenmode snapshot")
	{
		DomainSpec d;
		d.h_mesh = 1.0 / 16;
		d.lens = LensShape::circle(Vec2(0.5, 0.5), 0.2);
		const Mesh2D mesh = build_mesh(d);
		const Vector u = ScalarProfile::eigenmode(1, 1, 1.0).sample(mesh);
		std::stringstream ss;
		write_vtk(ss, mesh, "u", u, "eigenmode t = 0");
		std::string line;
		std::vector<Vec2> points;
		std::vector<double> scalars;
		while (std::getline(ss, line))
		{
			if (line.rfind("POINTS ", 0) == 0)
				for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
				{
					double x, y, z;
					ss >> x >> y >> z;
					points.emplace_back(x, y);
				}
			if (line == "LOOKUP_TABLE default" && scalars.empty())
				for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
				{
					double v;
					ss >> v;
					scalars.push_back(v);
				}
		}
		REQUIRE(points.size() == mesh.num_vertices());
		REQUIRE(scalars.size() == mesh.num_vertices());
		using std::numbers::pi;
		for (std::size_t i = 0; i < points.size(); ++i)
			CHECK(std::abs(scalars[i] - std::sin(pi * points[i].x()) * std::sin(pi * points[i].y())) <= 1e-15);

		std::stringstream again;
		write_vtk(again, mesh, "u", u, "eigenmode t = 0");
		std::stringstream first;
		write_vtk(first, mesh, "u", u, "eigenmode t = 0");
		CHECK(first.str() == again.str());
	}

	TEST_CASE("solve writes artifacts and a manifest")
	{
		const fs::path dir = scratch("solve");
		RunConfig c = tiny();
		c.output.vtk_steps = {0, 8};
		CHECK(run_command("solve", c, dir) == exit_ok);
		for (const char *f : {"mesh.txt", "state.csv", "state_00000.vtk", "state_00008.vtk", "diagnostics.json", "manifest.json"})
			CHECK(fs::exists(dir / f));
		const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
		CHECK(m["command"] == "solve");
		CHECK(m["seed"] == 0);
		CHECK(m["exit_code"] == 0);
		CHECK(parse_config_text(m["config"].get<std::string>()) == c);
		const std::string first = slurp(dir / "state.csv");
		CHECK(run_command("solve", c, dir) == exit_ok);
		CHECK(slurp(dir / "state.csv") == first);
		fs::remove_all(dir);
	}

	TEST_CASE("gradient with a zero field file reports zeros")
	{
		const fs::path dir = scratch("gradient_zero");
		RunConfig c = tiny();
		c.base_dir = dir;
		const Mesh2D mesh = build_mesh(c.domain);
		write_velocity_field(dir / "zero.csv", mesh, VelocityField::zero(mesh));
		c.gradient.field.kind = FieldSpec::Kind::File;
		c.gradient.field.file = "zero.csv";
		CHECK(run_command("gradient", c, dir / "out") == exit_ok);
		const std::string report = slurp(dir / "out" / "report.txt");
		CHECK(report.find("dJ_volume 0\n") != std::string::npos);
		CHECK(report.find("dJ_boundary 0\n") != std::string::npos);
		std::istringstream fd(slurp(dir / "out" / "fd_slopes.csv"));
		std::string line;
		std::getline(fd, line);
		CHECK(line == "tau,J_plus,J_minus,one_sided,central");
		while (std::getline(fd, line))
		{
			std::istringstream row(line);
			std::vector<double> cells;
			for (std::string cell; std::getline(row, cell, ',');)
				cells.push_back(std::stod(cell));
			REQUIRE(cells.size() == 5);
			CHECK(cells[1] == cells[2]);
			CHECK(cells[3] == 0.0);
			CHECK(cells[4] == 0.0);
		}
		fs::remove_all(dir);
	}

	TEST_CASE("degeneracy breach produces an error record naming the step")
	{
		RunConfig c = tiny();
		c.u0.center = Vec2(0.25, 0.25);
		c.u0.radius = 0.1;
		c.u0.amplitude = 0.46;
		const fs::path dir = scratch("breach");
		const Error e = error_of([&] { run_command("solve", c, dir); });
		CHECK(e.kind() == ErrorKind::DegeneracyBreach);
		const auto rec = nlohmann::json::parse(error_record(e));
		CHECK(rec["error"] == "DegeneracyBreach");
		CHECK(rec["step"] == 0);
		CHECK(rec["message"].get<std::string>().find("time step 0") != std::string::npos);
		fs::remove_all(dir);
	}

	TEST_CASE("unknown command")
	{
		const fs::path dir = scratch("unknown");
		CHECK(error_of([&] { run_command("fly", tiny(), dir); }).kind() == ErrorKind::ValidationError);
		fs::remove_all(dir);
	}
}
