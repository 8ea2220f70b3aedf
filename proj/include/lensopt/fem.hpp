#pragma once

#include <lensopt/geometry.hpp>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lensopt
{
	using Vector = Eigen::VectorXd;
	using SparseMatrix = Eigen::SparseMatrix<double>;
	using Mat3 = Eigen::Matrix3d;
	using Vec3 = Eigen::Vector3d;

	/// Coefficients of one subdomain. k = beta_a / lambda with
	/// beta_a = 1 + B/(2A).
	struct MaterialCoeffs
	{
		double lambda = 1.0;
		double k = 0.0;
		double rho = 1.0;
		double b = 0.01;
		double delta = 0.5;

		double sound_speed() const;
		bool operator==(const MaterialCoeffs &) const = default;
	};

	struct MaterialParams
	{
		MaterialCoeffs lens;
		MaterialCoeffs fluid;
		double q = 3.0;

		const MaterialCoeffs &of(Material m) const { return m == Material::Lens ? lens : fluid; }
		static MaterialParams uniform(const MaterialCoeffs &c, double q);
		/// Every violated coefficient bound, empty when valid.
		std::vector<std::string> violations() const;
		/// Throws ValidationError listing all of them.
		void validate() const;
		bool operator==(const MaterialParams &) const = default;
	};

	/// P1 Lagrange space on a mesh with a fixed sparsity pattern. Element
	/// contributions are computed in parallel and scattered in element order,
	/// so results do not depend on the thread count.
	class P1Space
	{
	public:
		explicit P1Space(const Mesh2D &mesh);

		const Mesh2D &mesh() const { return *mesh_; }
		std::size_t size() const { return mesh_->num_vertices(); }
		std::size_t num_elements() const { return mesh_->num_triangles(); }
		const std::array<int, 3> &dofs(std::size_t e) const { return mesh_->triangles[e]; }
		const std::array<Vec2, 3> &grads(std::size_t e) const { return grads_[e]; }
		double area(std::size_t e) const { return areas_[e]; }

		Vec2 gradient(std::size_t e, const Vector &w) const;
		Vec3 local(std::size_t e, const Vector &w) const;

		SparseMatrix assemble(const std::function<Mat3(std::size_t)> &element) const;
		Vector assemble_vector(const std::function<Vec3(std::size_t)> &element) const;

		/// int c_e phi_i phi_j
		SparseMatrix mass(const std::function<double(std::size_t)> &coeff) const;
		/// int c_e grad phi_i . grad phi_j
		SparseMatrix stiffness(const std::function<double(std::size_t)> &coeff) const;
		/// Matrix of z -> int c_e w z phi_i (exact for P1 w, z).
		SparseMatrix weighted_mass(const Vector &w, const std::function<double(std::size_t)> &coeff) const;
		/// int c_e w z phi_i
		Vector triple(const Vector &w, const Vector &z, const std::function<double(std::size_t)> &coeff) const;

		/// Zero Dirichlet rows and columns, unit diagonal.
		void apply_dirichlet(SparseMatrix &A) const;
		void zero_boundary(Vector &r) const;
		/// Euclidean norm over interior nodes.
		double interior_norm(const Vector &r) const;

	private:
		const Mesh2D *mesh_;
		std::vector<std::array<Vec2, 3>> grads_;
		std::vector<double> areas_;
		SparseMatrix pattern_;
		std::vector<std::array<int, 9>> slots_;
		std::vector<int> diagonal_slot_;
	};

	/// int phi_i phi_j phi_l / |T|
	double triple_weight(int i, int j, int l);

	/// Sparse symmetric solve: LDL^T, LU if that fails. The symbolic analysis
	/// is reused while the pattern stays the same.
	class LinearSolver
	{
	public:
		void factorize(const SparseMatrix &A);
		Vector solve(const Vector &b) const;

	private:
		Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
		Eigen::SparseLU<SparseMatrix> lu_;
		bool analyzed_ = false;
		bool use_lu_ = false;
		bool lu_analyzed_ = false;
	};
} // namespace lensopt
