#include <lensopt/io.hpp>

#include <lensopt/error.hpp>

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace lensopt
{
	std::string format_double(double v)
	{
		char buf[64];
		auto r = std::to_chars(buf, buf + sizeof buf, v);
		return std::string(buf, r.ptr);
	}

	std::ofstream open_output(const std::filesystem::path &path)
	{
		std::ofstream out(path, std::ios::binary);
		if (!out)
			throw Error(ErrorKind::IOError, "cannot write '" + path.string() + "'");
		return out;
	}

	std::ifstream open_input(const std::filesystem::path &path)
	{
		std::ifstream in(path, std::ios::binary);
		if (!in)
			throw Error(ErrorKind::IOError, "cannot read '" + path.string() + "'");
		return in;
	}

	void write_scalar_csv(std::ostream &out, const Mesh2D &mesh, const std::vector<int> &steps,
						  const std::vector<Eigen::VectorXd> &values)
	{
		if (steps.size() != values.size())
			throw Error(ErrorKind::IOError, "steps and values differ in length");
		out << "node,x,y,step,value\n";
		for (std::size_t s = 0; s < steps.size(); ++s)
		{
			if (values[s].size() != static_cast<Eigen::Index>(mesh.num_vertices()))
				throw Error(ErrorKind::GridMismatch, "field does not match the mesh");
			for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
				out << i << ',' << format_double(mesh.vertices[i].x()) << ',' << format_double(mesh.vertices[i].y()) << ','
					<< steps[s] << ',' << format_double(values[s][i]) << '\n';
		}
	}

	void write_vector_csv(std::ostream &out, const Mesh2D &mesh, const std::vector<int> &steps,
						  const std::vector<std::vector<Vec2>> &values)
	{
		if (steps.size() != values.size())
			throw Error(ErrorKind::IOError, "steps and values differ in length");
		out << "node,x,y,step,value,value_y\n";
		for (std::size_t s = 0; s < steps.size(); ++s)
		{
			if (values[s].size() != mesh.num_vertices())
				throw Error(ErrorKind::GridMismatch, "field does not match the mesh");
			for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
				out << i << ',' << format_double(mesh.vertices[i].x()) << ',' << format_double(mesh.vertices[i].y()) << ','
					<< steps[s] << ',' << format_double(values[s][i].x()) << ',' << format_double(values[s][i].y()) << '\n';
		}
	}

	namespace
	{
		std::vector<std::string> split_commas(const std::string &line)
		{
			std::vector<std::string> out;
			std::string cur;
			for (char c : line)
			{
				if (c == ',')
				{
					out.push_back(cur);
					cur.clear();
				}
				else if (c != '\r')
					cur += c;
			}
			out.push_back(cur);
			return out;
		}

		template <class T>
		T parse_number(const std::string &s, long line)
		{
			T v{};
			auto r = std::from_chars(s.data(), s.data() + s.size(), v);
			if (r.ec != std::errc() || r.ptr != s.data() + s.size())
				throw Error(ErrorKind::IOError, "line " + std::to_string(line) + ": bad number '" + s + "'", line);
			return v;
		}
	} // namespace

	FieldSeries read_field_csv(std::istream &in)
	{
		std::string line;
		if (!std::getline(in, line))
			throw Error(ErrorKind::IOError, "empty field file", 1);
		if (!line.empty() && line.back() == '\r')
			line.pop_back();
		bool vector_valued = false;
		if (line == "node,x,y,step,value,value_y")
			vector_valued = true;
		else if (line != "node,x,y,step,value")
			throw Error(ErrorKind::IOError, "line 1: unexpected header '" + line + "'", 1);

		struct Row
		{
			std::size_t node;
			Vec2 x;
			double v, vy;
		};
		std::map<int, std::vector<Row>> by_step;
		for (long no = 2; std::getline(in, line); ++no)
		{
			if (line.empty() || line == "\r")
				continue;
			const auto f = split_commas(line);
			if (f.size() != (vector_valued ? 6u : 5u))
				throw Error(ErrorKind::IOError, "line " + std::to_string(no) + ": wrong number of columns", no);
			Row r;
			r.node = parse_number<std::size_t>(f[0], no);
			r.x = Vec2(parse_number<double>(f[1], no), parse_number<double>(f[2], no));
			const int step = parse_number<int>(f[3], no);
			r.v = parse_number<double>(f[4], no);
			r.vy = vector_valued ? parse_number<double>(f[5], no) : 0.0;
			by_step[step].push_back(r);
		}
		if (by_step.empty())
			throw Error(ErrorKind::IOError, "field file has no rows");

		FieldSeries out;
		const std::size_t n = by_step.begin()->second.size();
		out.positions.assign(n, Vec2::Zero());
		for (auto &[step, rows] : by_step)
		{
			if (rows.size() != n)
				throw Error(ErrorKind::IOError, "step " + std::to_string(step) + " has a different node count");
			Eigen::VectorXd x(n), y(n);
			std::vector<char> hit(n, 0);
			for (const auto &r : rows)
			{
				if (r.node >= n || hit[r.node])
					throw Error(ErrorKind::IOError, "step " + std::to_string(step) + ": bad or repeated node index");
				hit[r.node] = 1;
				x[r.node] = r.v;
				y[r.node] = r.vy;
				out.positions[r.node] = r.x;
			}
			out.steps.push_back(step);
			out.x.push_back(std::move(x));
			if (vector_valued)
				out.y.push_back(std::move(y));
		}
		return out;
	}

	void check_field_mesh(const FieldSeries &field, const Mesh2D &mesh)
	{
		if (field.positions.size() != mesh.num_vertices())
			throw Error(ErrorKind::GridMismatch, "field has " + std::to_string(field.positions.size()) + " nodes, mesh has " +
													 std::to_string(mesh.num_vertices()));
		for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
			if ((field.positions[i] - mesh.vertices[i]).norm() > 1e-12)
				throw Error(ErrorKind::GridMismatch, "field node " + std::to_string(i) + " is not at the mesh vertex");
	}

	void write_vtk(std::ostream &out, const Mesh2D &mesh, const std::string &name, const Eigen::VectorXd &values,
				   const std::string &title)
	{
		if (values.size() != static_cast<Eigen::Index>(mesh.num_vertices()))
			throw Error(ErrorKind::GridMismatch, "field does not match the mesh");
		const std::size_t nv = mesh.num_vertices(), ne = mesh.num_triangles();
		out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
		out << "POINTS " << nv << " double\n";
		for (const auto &x : mesh.vertices)
			out << format_double(x.x()) << ' ' << format_double(x.y()) << " 0\n";
		out << "CELLS " << ne << ' ' << 4 * ne << '\n';
		for (const auto &t : mesh.triangles)
			out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
		out << "CELL_TYPES " << ne << '\n';
		for (std::size_t e = 0; e < ne; ++e)
			out << "5\n";
		out << "POINT_DATA " << nv << "\nSCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
		for (Eigen::Index i = 0; i < values.size(); ++i)
			out << format_double(values[i]) << '\n';
		out << "CELL_DATA " << ne << "\nSCALARS material int 1\nLOOKUP_TABLE default\n";
		for (auto l : mesh.labels)
			out << static_cast<int>(l) << '\n';
	}

	VelocityField read_velocity_field(const std::filesystem::path &path, const Mesh2D &mesh)
	{
		auto in = open_input(path);
		const FieldSeries f = read_field_csv(in);
		if (f.y.empty() || f.steps.size() != 1)
			throw Error(ErrorKind::IOError, "velocity field file needs one step with value,value_y columns");
		check_field_mesh(f, mesh);
		VelocityField h = VelocityField::zero(mesh);
		for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
			h.values[i] = Vec2(f.x[0][i], f.y[0][i]);
		if (!vanishes_on_boundary(mesh, h))
			throw Error(ErrorKind::ValidationError, "velocity field must vanish on the outer boundary");
		return h;
	}

	void write_velocity_field(const std::filesystem::path &path, const Mesh2D &mesh, const VelocityField &h)
	{
		auto out = open_output(path);
		write_vector_csv(out, mesh, {0}, {h.values});
	}
} // namespace lensopt
