#include <lensopt/config.hpp>

#include <lensopt/error.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace lensopt
{
	RunConfig::RunConfig()
	{
		params.fluid = {1.0, 1.0, 1.0, 0.02, 0.3};
		params.lens = {2.0, 0.5, 1.0, 0.02, 0.3};
		params.q = 3.0;
		u0.kind = ProfileSpec::Kind::Bump;
		u0.center = Vec2(0.18, 0.18);
		u0.radius = 0.12;
		u0.amplitude = 0.03;
		target.shape = LensShape::circle(Vec2(0.5, 0.5), 0.2);
	}

	std::filesystem::path RunConfig::resolve(const std::string &file) const
	{
		const std::filesystem::path p(file);
		return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
	}

	bool RunConfig::operator==(const RunConfig &o) const
	{
		return seed == o.seed && domain == o.domain && params == o.params && grid == o.grid && solver == o.solver && u0 == o.u0 &&
			   u1 == o.u1 && target == o.target && gradient == o.gradient && optimizer == o.optimizer && output == o.output &&
			   verify == o.verify;
	}

	std::uint64_t fnv1a(const std::string &data)
	{
		std::uint64_t h = 1469598103934665603ull;
		for (unsigned char c : data)
		{
			h ^= c;
			h *= 1099511628211ull;
		}
		return h;
	}

	namespace
	{
		std::string fmt(double v)
		{
			char buf[64];
			auto r = std::to_chars(buf, buf + sizeof buf, v);
			return std::string(buf, r.ptr);
		}

		std::vector<std::string> split(const std::string &s)
		{
			std::vector<std::string> out;
			std::string cur;
			for (char c : s)
			{
				if (c == ' ' || c == '\t' || c == ',')
				{
					if (!cur.empty())
						out.push_back(cur);
					cur.clear();
				}
				else
					cur += c;
			}
			if (!cur.empty())
				out.push_back(cur);
			return out;
		}

		double to_double(const std::string &s)
		{
			double v = 0.0;
			auto r = std::from_chars(s.data(), s.data() + s.size(), v);
			if (r.ec != std::errc() || r.ptr != s.data() + s.size())
				throw std::invalid_argument("expected a number, got '" + s + "'");
			return v;
		}

		template <class Int>
		Int to_int(const std::string &s)
		{
			Int v = 0;
			auto r = std::from_chars(s.data(), s.data() + s.size(), v);
			if (r.ec != std::errc() || r.ptr != s.data() + s.size())
				throw std::invalid_argument("expected an integer, got '" + s + "'");
			return v;
		}

		std::vector<double> to_doubles(const std::string &s, std::size_t count)
		{
			std::vector<double> out;
			for (const auto &t : split(s))
				out.push_back(to_double(t));
			if (count && out.size() != count)
				throw std::invalid_argument("expected " + std::to_string(count) + " numbers");
			return out;
		}

		template <class Enum>
		struct EnumNames
		{
			std::vector<std::pair<Enum, std::string>> names;

			std::string get(Enum e) const
			{
				for (const auto &[k, n] : names)
					if (k == e)
						return n;
				return "?";
			}
			Enum parse(const std::string &s) const
			{
				std::string options;
				for (const auto &[k, n] : names)
				{
					if (n == s)
						return k;
					options += (options.empty() ? "" : "|") + n;
				}
				throw std::invalid_argument("expected one of " + options + ", got '" + s + "'");
			}
		};

		const EnumNames<LensShape::Kind> lens_kinds{{{LensShape::Kind::None, "none"},
													  {LensShape::Kind::Circle, "circle"},
													  {LensShape::Kind::Ellipse, "ellipse"},
													  {LensShape::Kind::Polygon, "polygon"}}};
		const EnumNames<ProfileSpec::Kind> profile_kinds{{{ProfileSpec::Kind::Zero, "zero"},
														  {ProfileSpec::Kind::Bump, "bump"},
														  {ProfileSpec::Kind::Eigenmode, "eigenmode"},
														  {ProfileSpec::Kind::File, "file"}}};
		const EnumNames<TargetSpec::Mode> target_modes{
			{{TargetSpec::Mode::Profile, "profile"}, {TargetSpec::Mode::File, "file"}, {TargetSpec::Mode::Shape, "shape"}}};
		const EnumNames<FieldSpec::Kind> field_kinds{{{FieldSpec::Kind::Zero, "zero"},
													  {FieldSpec::Kind::Random, "random"},
													  {FieldSpec::Kind::Bump, "bump"},
													  {FieldSpec::Kind::File, "file"}}};
		const EnumNames<TraceMode> trace_modes{{{TraceMode::Recovered, "recovered"}, {TraceMode::Element, "element"}}};
		const EnumNames<bool> bools{{{true, "true"}, {false, "false"}}};

		struct Binding
		{
			std::string section;
			std::string key;
			std::function<std::string(const RunConfig &)> get;
			std::function<void(RunConfig &, const std::string &)> set;
		};

		using Bindings = std::vector<Binding>;

		template <class T>
		using Field = std::function<T &(RunConfig &)>;

		// accessors are written once against a mutable config; getters reuse them
		template <class T>
		const T &cref(const Field<T> &f, const RunConfig &c)
		{
			return f(const_cast<RunConfig &>(c));
		}

		void add_double(Bindings &b, const std::string &sec, const std::string &key, Field<double> f)
		{
			b.push_back({sec, key, [f](const RunConfig &c) { return fmt(cref(f, c)); },
						 [f](RunConfig &c, const std::string &v) { f(c) = to_double(v); }});
		}

		template <class Int>
		void add_int(Bindings &b, const std::string &sec, const std::string &key, Field<Int> f)
		{
			b.push_back({sec, key, [f](const RunConfig &c) { return std::to_string(cref(f, c)); },
						 [f](RunConfig &c, const std::string &v) { f(c) = to_int<Int>(v); }});
		}

		void add_vec2(Bindings &b, const std::string &sec, const std::string &key, Field<Vec2> f)
		{
			b.push_back({sec, key,
						 [f](const RunConfig &c) {
							 const Vec2 &v = cref(f, c);
							 return fmt(v.x()) + " " + fmt(v.y());
						 },
						 [f](RunConfig &c, const std::string &v) {
							 const auto d = to_doubles(v, 2);
							 f(c) = Vec2(d[0], d[1]);
						 }});
		}

		void add_string(Bindings &b, const std::string &sec, const std::string &key, Field<std::string> f)
		{
			b.push_back({sec, key, [f](const RunConfig &c) { return cref(f, c); },
						 [f](RunConfig &c, const std::string &v) { f(c) = v; }});
		}

		template <class Enum>
		void add_enum(Bindings &b, const std::string &sec, const std::string &key, const EnumNames<Enum> &names, Field<Enum> f)
		{
			b.push_back({sec, key, [f, &names](const RunConfig &c) { return names.get(cref(f, c)); },
						 [f, &names](RunConfig &c, const std::string &v) { f(c) = names.parse(v); }});
		}

		void add_doubles(Bindings &b, const std::string &sec, const std::string &key, Field<std::vector<double>> f)
		{
			b.push_back({sec, key,
						 [f](const RunConfig &c) {
							 std::string s;
							 for (double x : cref(f, c))
								 s += (s.empty() ? "" : " ") + fmt(x);
							 return s;
						 },
						 [f](RunConfig &c, const std::string &v) { f(c) = to_doubles(v, 0); }});
		}

		void add_ints(Bindings &b, const std::string &sec, const std::string &key, Field<std::vector<int>> f)
		{
			b.push_back({sec, key,
						 [f](const RunConfig &c) {
							 std::string s;
							 for (int x : cref(f, c))
								 s += (s.empty() ? "" : " ") + std::to_string(x);
							 return s;
						 },
						 [f](RunConfig &c, const std::string &v) {
							 std::vector<int> out;
							 for (const auto &t : split(v))
								 out.push_back(to_int<int>(t));
							 f(c) = out;
						 }});
		}

		void add_lens(Bindings &b, const std::string &sec, const std::string &prefix, Field<LensShape> f)
		{
			add_enum<LensShape::Kind>(b, sec, prefix, lens_kinds, [f](RunConfig &c) -> LensShape::Kind & { return f(c).kind; });
			add_vec2(b, sec, prefix + "_center", [f](RunConfig &c) -> Vec2 & { return f(c).center; });
			add_double(b, sec, prefix + "_radius", [f](RunConfig &c) -> double & { return f(c).radius; });
			add_vec2(b, sec, prefix + "_semi_axes", [f](RunConfig &c) -> Vec2 & { return f(c).semi_axes; });
			b.push_back({sec, prefix + "_polygon",
						 [f](const RunConfig &c) {
							 std::string s;
							 for (const auto &p : cref(f, c).polygon)
								 s += (s.empty() ? "" : " ") + fmt(p.x()) + " " + fmt(p.y());
							 return s;
						 },
						 [f](RunConfig &c, const std::string &v) {
							 const auto d = to_doubles(v, 0);
							 if (d.size() % 2)
								 throw std::invalid_argument("polygon needs an even number of coordinates");
							 auto &poly = f(c).polygon;
							 poly.clear();
							 for (std::size_t i = 0; i < d.size(); i += 2)
								 poly.emplace_back(d[i], d[i + 1]);
						 }});
			add_int<int>(b, sec, prefix + "_samples", [f](RunConfig &c) -> int & { return f(c).samples; });
		}

		void add_profile(Bindings &b, const std::string &sec, const std::string &prefix, Field<ProfileSpec> f)
		{
			add_enum<ProfileSpec::Kind>(b, sec, prefix, profile_kinds, [f](RunConfig &c) -> ProfileSpec::Kind & { return f(c).kind; });
			add_vec2(b, sec, prefix + "_center", [f](RunConfig &c) -> Vec2 & { return f(c).center; });
			add_double(b, sec, prefix + "_radius", [f](RunConfig &c) -> double & { return f(c).radius; });
			add_double(b, sec, prefix + "_amplitude", [f](RunConfig &c) -> double & { return f(c).amplitude; });
			b.push_back({sec, prefix + "_modes",
						 [f](const RunConfig &c) {
							 const auto &m = cref(f, c).modes;
							 return std::to_string(m[0]) + " " + std::to_string(m[1]);
						 },
						 [f](RunConfig &c, const std::string &v) {
							 const auto t = split(v);
							 if (t.size() != 2)
								 throw std::invalid_argument("expected two integers");
							 f(c).modes = {to_int<int>(t[0]), to_int<int>(t[1])};
						 }});
			add_string(b, sec, prefix + "_file", [f](RunConfig &c) -> std::string & { return f(c).file; });
		}

		void add_material(Bindings &b, const std::string &sec, Field<MaterialCoeffs> f)
		{
			add_double(b, sec, "lambda", [f](RunConfig &c) -> double & { return f(c).lambda; });
			add_double(b, sec, "k", [f](RunConfig &c) -> double & { return f(c).k; });
			add_double(b, sec, "rho", [f](RunConfig &c) -> double & { return f(c).rho; });
			add_double(b, sec, "b", [f](RunConfig &c) -> double & { return f(c).b; });
			add_double(b, sec, "delta", [f](RunConfig &c) -> double & { return f(c).delta; });
		}

		const Bindings &bindings()
		{
			static const Bindings table = [] {
				Bindings b;
				add_int<std::uint64_t>(b, "run", "seed", [](RunConfig &c) -> std::uint64_t & { return c.seed; });

				add_double(b, "domain", "width", [](RunConfig &c) -> double & { return c.domain.width; });
				add_double(b, "domain", "height", [](RunConfig &c) -> double & { return c.domain.height; });
				add_double(b, "domain", "h_mesh", [](RunConfig &c) -> double & { return c.domain.h_mesh; });
				add_lens(b, "domain", "lens", [](RunConfig &c) -> LensShape & { return c.domain.lens; });

				add_material(b, "fluid", [](RunConfig &c) -> MaterialCoeffs & { return c.params.fluid; });
				add_material(b, "lens", [](RunConfig &c) -> MaterialCoeffs & { return c.params.lens; });
				add_double(b, "model", "q", [](RunConfig &c) -> double & { return c.params.q; });

				add_double(b, "time", "T", [](RunConfig &c) -> double & { return c.grid.T; });
				add_int<int>(b, "time", "N", [](RunConfig &c) -> int & { return c.grid.N; });

				add_double(b, "solver", "eps_reg", [](RunConfig &c) -> double & { return c.solver.eps_reg; });
				add_double(b, "solver", "abs_tol", [](RunConfig &c) -> double & { return c.solver.abs_tol; });
				add_double(b, "solver", "rel_tol", [](RunConfig &c) -> double & { return c.solver.rel_tol; });
				add_int<int>(b, "solver", "max_iter", [](RunConfig &c) -> int & { return c.solver.max_iter; });
				add_double(b, "solver", "degeneracy_floor", [](RunConfig &c) -> double & { return c.solver.degeneracy_floor; });
				add_double(b, "solver", "fixed_point_damping", [](RunConfig &c) -> double & { return c.solver.fixed_point_damping; });
				add_int<int>(b, "solver", "fixed_point_max_iter", [](RunConfig &c) -> int & { return c.solver.fixed_point_max_iter; });

				add_profile(b, "initial", "u0", [](RunConfig &c) -> ProfileSpec & { return c.u0; });
				add_profile(b, "initial", "u1", [](RunConfig &c) -> ProfileSpec & { return c.u1; });

				add_enum<TargetSpec::Mode>(b, "target", "mode", target_modes, [](RunConfig &c) -> TargetSpec::Mode & { return c.target.mode; });
				add_profile(b, "target", "profile", [](RunConfig &c) -> ProfileSpec & { return c.target.profile; });
				add_string(b, "target", "file", [](RunConfig &c) -> std::string & { return c.target.file; });
				add_lens(b, "target", "shape", [](RunConfig &c) -> LensShape & { return c.target.shape; });

				add_enum<bool>(b, "gradient", "enabled", bools, [](RunConfig &c) -> bool & { return c.gradient.enabled; });
				add_enum<bool>(b, "gradient", "boundary", bools, [](RunConfig &c) -> bool & { return c.gradient.boundary; });
				add_enum<TraceMode>(b, "gradient", "traces", trace_modes, [](RunConfig &c) -> TraceMode & { return c.gradient.traces; });
				add_doubles(b, "gradient", "fd_taus", [](RunConfig &c) -> std::vector<double> & { return c.gradient.fd_taus; });
				add_enum<FieldSpec::Kind>(b, "gradient", "field", field_kinds, [](RunConfig &c) -> FieldSpec::Kind & { return c.gradient.field.kind; });
				add_int<int>(b, "gradient", "field_modes", [](RunConfig &c) -> int & { return c.gradient.field.modes; });
				add_double(b, "gradient", "field_amplitude", [](RunConfig &c) -> double & { return c.gradient.field.amplitude; });
				add_vec2(b, "gradient", "field_center", [](RunConfig &c) -> Vec2 & { return c.gradient.field.center; });
				add_double(b, "gradient", "field_r_inner", [](RunConfig &c) -> double & { return c.gradient.field.r_inner; });
				add_double(b, "gradient", "field_r_outer", [](RunConfig &c) -> double & { return c.gradient.field.r_outer; });
				add_string(b, "gradient", "field_file", [](RunConfig &c) -> std::string & { return c.gradient.field.file; });

				add_int<int>(b, "optimizer", "max_iters", [](RunConfig &c) -> int & { return c.optimizer.max_iters; });
				add_double(b, "optimizer", "g_tol", [](RunConfig &c) -> double & { return c.optimizer.g_tol; });
				add_double(b, "optimizer", "g_abs", [](RunConfig &c) -> double & { return c.optimizer.g_abs; });
				add_double(b, "optimizer", "c1", [](RunConfig &c) -> double & { return c.optimizer.c1; });
				add_int<int>(b, "optimizer", "max_halvings", [](RunConfig &c) -> int & { return c.optimizer.max_halvings; });
				add_double(b, "optimizer", "max_displacement", [](RunConfig &c) -> double & { return c.optimizer.max_displacement; });
				add_double(b, "optimizer", "max_turning_deg", [](RunConfig &c) -> double & { return c.optimizer.max_turning_deg; });
				add_double(b, "optimizer", "min_quality", [](RunConfig &c) -> double & { return c.optimizer.min_quality; });

				add_string(b, "output", "directory", [](RunConfig &c) -> std::string & { return c.output.directory; });
				add_ints(b, "output", "vtk_steps", [](RunConfig &c) -> std::vector<int> & { return c.output.vtk_steps; });
				add_int<int>(b, "output", "csv_stride", [](RunConfig &c) -> int & { return c.output.csv_stride; });

				add_ints(b, "verify", "criteria", [](RunConfig &c) -> std::vector<int> & { return c.verify.criteria; });
				return b;
			}();
			return table;
		}

		std::string trim(const std::string &s)
		{
			const auto a = s.find_first_not_of(" \t\r");
			if (a == std::string::npos)
				return "";
			const auto b = s.find_last_not_of(" \t\r");
			return s.substr(a, b - a + 1);
		}

		void check_lens(std::vector<std::string> &errs, const std::string &name, const LensShape &lens, double width, double height)
		{
			switch (lens.kind)
			{
			case LensShape::Kind::None:
				return;
			case LensShape::Kind::Circle:
				if (!(lens.radius > 0.0))
					errs.push_back(name + " radius must be > 0");
				break;
			case LensShape::Kind::Ellipse:
				if (!(lens.semi_axes.minCoeff() > 0.0))
					errs.push_back(name + " semi-axes must be > 0");
				break;
			case LensShape::Kind::Polygon:
				if (lens.polygon.size() < 3)
					errs.push_back(name + " polygon needs at least 3 points");
				break;
			}
			if (lens.samples < 16)
				errs.push_back(name + " samples must be >= 16");
			if (!errs.empty() && errs.back().rfind(name, 0) == 0)
				return;
			for (const auto &p : lens.boundary_polygon())
				if (!(p.x() > 0.0 && p.x() < width && p.y() > 0.0 && p.y() < height))
				{
					errs.push_back(name + " must lie strictly inside the domain");
					break;
				}
		}

		void check_profile(std::vector<std::string> &errs, const RunConfig &c, const std::string &name, const ProfileSpec &p)
		{
			switch (p.kind)
			{
			case ProfileSpec::Kind::Zero:
				break;
			case ProfileSpec::Kind::Bump:
				if (!(p.radius > 0.0))
					errs.push_back(name + " bump radius must be > 0");
				break;
			case ProfileSpec::Kind::Eigenmode:
				if (p.modes[0] < 1 || p.modes[1] < 1)
					errs.push_back(name + " eigenmode indices must be >= 1");
				break;
			case ProfileSpec::Kind::File:
				if (p.file.empty() || !std::filesystem::exists(c.resolve(p.file)))
					errs.push_back(name + " file '" + p.file + "' does not exist");
				break;
			}
		}
	} // namespace

	std::vector<std::string> config_violations(const RunConfig &c)
	{
		std::vector<std::string> errs;
		if (!(c.domain.width > 0.0 && c.domain.height > 0.0))
			errs.push_back("domain width and height must be > 0");
		else if (!(c.domain.h_mesh > 0.0 && c.domain.h_mesh <= 0.5 * std::min(c.domain.width, c.domain.height)))
			errs.push_back("domain h_mesh must lie in (0, min(width, height)/2]");
		else
			check_lens(errs, "domain lens", c.domain.lens, c.domain.width, c.domain.height);

		for (const auto &e : c.params.violations())
			errs.push_back(e);
		if (!(c.grid.T > 0.0))
			errs.push_back("time T must be > 0");
		if (c.grid.N < 2)
			errs.push_back("time N must be >= 2");

		const auto &s = c.solver;
		if (!(s.eps_reg >= 0.0))
			errs.push_back("solver eps_reg must be >= 0");
		if (!(s.abs_tol >= 0.0 && s.rel_tol >= 0.0) || (s.abs_tol == 0.0 && s.rel_tol == 0.0))
			errs.push_back("solver tolerances must be >= 0 and not both 0");
		if (s.max_iter < 1 || s.fixed_point_max_iter < 0)
			errs.push_back("solver iteration limits must be positive");
		if (!(s.degeneracy_floor > 0.0 && s.degeneracy_floor < 1.0))
			errs.push_back("solver degeneracy_floor must lie in (0,1)");
		if (!(s.fixed_point_damping > 0.0 && s.fixed_point_damping <= 1.0))
			errs.push_back("solver fixed_point_damping must lie in (0,1]");

		check_profile(errs, c, "initial u0", c.u0);
		check_profile(errs, c, "initial u1", c.u1);
		switch (c.target.mode)
		{
		case TargetSpec::Mode::Profile:
			if (c.target.profile.kind == ProfileSpec::Kind::File)
				errs.push_back("target profile cannot be a file; use mode = file");
			else
				check_profile(errs, c, "target profile", c.target.profile);
			break;
		case TargetSpec::Mode::File:
			if (c.target.file.empty() || !std::filesystem::exists(c.resolve(c.target.file)))
				errs.push_back("target file '" + c.target.file + "' does not exist");
			break;
		case TargetSpec::Mode::Shape:
			if (c.target.shape.kind == LensShape::Kind::None)
				errs.push_back("target shape must be a lens");
			else
				check_lens(errs, "target shape", c.target.shape, c.domain.width, c.domain.height);
			if (c.u0.kind == ProfileSpec::Kind::File || c.u1.kind == ProfileSpec::Kind::File)
				errs.push_back("target mode shape needs analytic initial data");
			break;
		}

		const auto &g = c.gradient;
		for (double t : g.fd_taus)
			if (!(t > 0.0))
			{
				errs.push_back("gradient fd_taus must be > 0");
				break;
			}
		if (g.enabled && c.params.q <= 2.0 && c.solver.eps_reg == 0.0)
			errs.push_back("q > 2 is required for the shape derivative when eps_reg = 0");
		if (g.field.kind == FieldSpec::Kind::Random && (g.field.modes < 1 || !(g.field.amplitude >= 0.0)))
			errs.push_back("gradient random field needs field_modes >= 1 and field_amplitude >= 0");
		if (g.field.kind == FieldSpec::Kind::Bump && !(g.field.r_inner >= 0.0 && g.field.r_inner < g.field.r_outer))
			errs.push_back("gradient bump field needs 0 <= field_r_inner < field_r_outer");
		if (g.field.kind == FieldSpec::Kind::File && (g.field.file.empty() || !std::filesystem::exists(c.resolve(g.field.file))))
			errs.push_back("gradient field file '" + g.field.file + "' does not exist");

		const auto &o = c.optimizer;
		if (o.max_iters < 0 || o.max_halvings < 0)
			errs.push_back("optimizer iteration limits must be >= 0");
		if (!(o.g_tol >= 0.0 && o.g_abs >= 0.0))
			errs.push_back("optimizer tolerances must be >= 0");
		if (!(o.c1 > 0.0 && o.c1 < 1.0))
			errs.push_back("optimizer c1 must lie in (0,1)");
		if (!(o.max_displacement > 0.0))
			errs.push_back("optimizer max_displacement must be > 0");
		if (!(o.min_quality >= 0.0 && o.min_quality <= 1.0) || !(o.max_turning_deg > 0.0))
			errs.push_back("optimizer admissibility thresholds out of range");

		if (c.output.directory.empty())
			errs.push_back("output directory must not be empty");
		if (c.output.csv_stride < 1)
			errs.push_back("output csv_stride must be >= 1");
		for (int s : c.output.vtk_steps)
			if (s < 0 || s > c.grid.N)
			{
				errs.push_back("output vtk_steps must lie in [0, N]");
				break;
			}
		for (int id : c.verify.criteria)
			if (id < 1 || id > 10)
			{
				errs.push_back("verify criteria must lie in 1..10");
				break;
			}
		return errs;
	}

	RunConfig parse_config_text(const std::string &text, const std::filesystem::path &base_dir)
	{
		std::map<std::pair<std::string, std::string>, const Binding *> index;
		std::set<std::string> sections;
		for (const auto &b : bindings())
		{
			index[{b.section, b.key}] = &b;
			sections.insert(b.section);
		}

		RunConfig cfg;
		cfg.base_dir = base_dir;
		std::istringstream in(text);
		std::string line, section;
		std::set<std::pair<std::string, std::string>> seen;
		std::vector<std::string> errs;
		long first_line = -1;
		auto fail = [&](long no, const std::string &msg) {
			errs.push_back("line " + std::to_string(no) + ": " + msg);
			if (first_line < 0)
				first_line = no;
		};
		for (long no = 1; std::getline(in, line); ++no)
		{
			if (const auto hash = line.find('#'); hash != std::string::npos)
				line.erase(hash);
			line = trim(line);
			if (line.empty())
				continue;
			if (line.front() == '[')
			{
				if (line.back() != ']')
				{
					fail(no, "unterminated section header");
					continue;
				}
				section = trim(line.substr(1, line.size() - 2));
				if (!sections.count(section))
					fail(no, "unknown section [" + section + "]");
				continue;
			}
			const auto eq = line.find('=');
			if (eq == std::string::npos)
			{
				fail(no, "expected 'key = value'");
				continue;
			}
			const std::string key = trim(line.substr(0, eq));
			const std::string value = trim(line.substr(eq + 1));
			if (section.empty())
			{
				fail(no, "key '" + key + "' outside any section");
				continue;
			}
			const auto it = index.find({section, key});
			if (it == index.end())
			{
				if (sections.count(section))
					fail(no, "unknown key '" + key + "' in [" + section + "]");
				continue;
			}
			if (!seen.insert({section, key}).second)
			{
				fail(no, "duplicate key '" + key + "' in [" + section + "]");
				continue;
			}
			try
			{
				it->second->set(cfg, value);
			}
			catch (const std::exception &e)
			{
				fail(no, key + ": " + e.what());
			}
		}
		auto join = [](const std::vector<std::string> &v) {
			std::string s;
			for (const auto &e : v)
				s += (s.empty() ? "" : "; ") + e;
			return s;
		};
		if (!errs.empty())
			throw Error(ErrorKind::ParseError, join(errs), first_line);
		const auto violations = config_violations(cfg);
		if (!violations.empty())
			throw Error(ErrorKind::ValidationError, join(violations));
		return cfg;
	}

	RunConfig parse_config(const std::filesystem::path &path)
	{
		std::ifstream in(path);
		if (!in)
			throw Error(ErrorKind::IOError, "cannot read config '" + path.string() + "'");
		std::ostringstream ss;
		ss << in.rdbuf();
		return parse_config_text(ss.str(), path.parent_path());
	}

	std::string serialize_config(const RunConfig &config)
	{
		std::ostringstream out;
		std::string section;
		for (const auto &b : bindings())
		{
			if (b.section != section)
			{
				if (!section.empty())
					out << '\n';
				section = b.section;
				out << '[' << section << "]\n";
			}
			out << b.key << " = " << b.get(config) << '\n';
		}
		return out.str();
	}
} // namespace lensopt
