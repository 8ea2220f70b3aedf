#pragma once

#include <lensopt/geometry.hpp>

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace lensopt
{
	/// Nodal time series read back from CSV. `y` is empty for scalar fields.
	struct FieldSeries
	{
		std::vector<int> steps;
		std::vector<Eigen::VectorXd> x;
		std::vector<Eigen::VectorXd> y;
		std::vector<Vec2> positions;
	};

	/// "node,x,y,step,value" rows, shortest round-trip number formatting.
	void write_scalar_csv(std::ostream &out, const Mesh2D &mesh, const std::vector<int> &steps,
						  const std::vector<Eigen::VectorXd> &values);
	/// "node,x,y,step,value,value_y"
	void write_vector_csv(std::ostream &out, const Mesh2D &mesh, const std::vector<int> &steps,
						  const std::vector<std::vector<Vec2>> &values);

	/// Throws IOError on malformed input (with the line number as step).
	FieldSeries read_field_csv(std::istream &in);

	/// Checks node count and coordinates (1e-12) against the mesh; GridMismatch otherwise.
	void check_field_mesh(const FieldSeries &field, const Mesh2D &mesh);

	/// Legacy ASCII unstructured grid with one point scalar and the material label.
	void write_vtk(std::ostream &out, const Mesh2D &mesh, const std::string &name, const Eigen::VectorXd &values,
				   const std::string &title = "lensopt field");

	VelocityField read_velocity_field(const std::filesystem::path &path, const Mesh2D &mesh);
	void write_velocity_field(const std::filesystem::path &path, const Mesh2D &mesh, const VelocityField &h);

	/// Opens for writing or throws IOError.
	std::ofstream open_output(const std::filesystem::path &path);
	std::ifstream open_input(const std::filesystem::path &path);

	/// Shortest string that parses back to exactly v.
	std::string format_double(double v);
} // namespace lensopt
