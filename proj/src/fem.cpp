#include <lensopt/fem.hpp>

#include <lensopt/error.hpp>
#include <lensopt/parallel.hpp>

#include <cmath>
#include <sstream>

namespace lensopt
{
	double MaterialCoeffs::sound_speed() const { return std::sqrt(lambda / rho); }

	MaterialParams MaterialParams::uniform(const MaterialCoeffs &c, double q)
	{
		MaterialParams p;
		p.lens = c;
		p.fluid = c;
		p.q = q;
		return p;
	}

	std::vector<std::string> MaterialParams::violations() const
	{
		std::vector<std::string> errs;
		for (const auto &[name, c] : {std::pair<std::string, const MaterialCoeffs &>{"lens", lens}, {"fluid", fluid}})
		{
			if (!(c.lambda > 0.0))
				errs.push_back(name + ".lambda must be > 0");
			if (!(c.rho > 0.0))
				errs.push_back(name + ".rho must be > 0");
			if (!(c.b > 0.0))
				errs.push_back(name + ".b must be > 0");
			if (!(c.delta > 0.0 && c.delta < 1.0))
				errs.push_back(name + ".delta must lie in (0,1)");
			if (!std::isfinite(c.k))
				errs.push_back(name + ".k must be finite");
		}
		if (!(q >= 1.0))
			errs.push_back("q must be >= 1");
		return errs;
	}

	void MaterialParams::validate() const
	{
		const auto errs = violations();
		if (errs.empty())
			return;
		std::string msg;
		for (const auto &e : errs)
			msg += (msg.empty() ? "" : "; ") + e;
		throw Error(ErrorKind::ValidationError, msg);
	}

	double triple_weight(int i, int j, int l)
	{
		if (i == j && j == l)
			return 1.0 / 10.0;
		if (i == j || j == l || i == l)
			return 1.0 / 30.0;
		return 1.0 / 60.0;
	}

	P1Space::P1Space(const Mesh2D &mesh) : mesh_(&mesh)
	{
		const std::size_t ne = mesh.num_triangles();
		grads_.resize(ne);
		areas_.resize(ne);
		for (std::size_t e = 0; e < ne; ++e)
		{
			grads_[e] = mesh.basis_gradients(e);
			areas_[e] = mesh.signed_area(e);
		}

		std::vector<Eigen::Triplet<double>> trip;
		trip.reserve(9 * ne);
		for (const auto &tri : mesh.triangles)
			for (int a = 0; a < 3; ++a)
				for (int b = 0; b < 3; ++b)
					trip.emplace_back(tri[a], tri[b], 0.0);
		const int n = static_cast<int>(mesh.num_vertices());
		pattern_.resize(n, n);
		pattern_.setFromTriplets(trip.begin(), trip.end());
		pattern_.makeCompressed();

		auto slot = [this](int row, int col) {
			const int *outer = pattern_.outerIndexPtr();
			const int *inner = pattern_.innerIndexPtr();
			const int *begin = inner + outer[col];
			const int *end = inner + outer[col + 1];
			const int *it = std::lower_bound(begin, end, row);
			return static_cast<int>(it - inner);
		};
		slots_.resize(ne);
		for (std::size_t e = 0; e < ne; ++e)
		{
			const auto &tri = mesh.triangles[e];
			for (int a = 0; a < 3; ++a)
				for (int b = 0; b < 3; ++b)
					slots_[e][3 * a + b] = slot(tri[a], tri[b]);
		}
		diagonal_slot_.resize(n);
		for (int i = 0; i < n; ++i)
			diagonal_slot_[i] = slot(i, i);
	}

	Vec2 P1Space::gradient(std::size_t e, const Vector &w) const
	{
		const auto &tri = mesh_->triangles[e];
		const auto &g = grads_[e];
		return w[tri[0]] * g[0] + w[tri[1]] * g[1] + w[tri[2]] * g[2];
	}

	Vec3 P1Space::local(std::size_t e, const Vector &w) const
	{
		const auto &tri = mesh_->triangles[e];
		return Vec3(w[tri[0]], w[tri[1]], w[tri[2]]);
	}

	SparseMatrix P1Space::assemble(const std::function<Mat3(std::size_t)> &element) const
	{
		const std::size_t ne = num_elements();
		std::vector<Mat3> local(ne);
		parallel_for(ne, [&](std::size_t begin, std::size_t end) {
			for (std::size_t e = begin; e < end; ++e)
				local[e] = element(e);
		});
		SparseMatrix A = pattern_;
		double *values = A.valuePtr();
		std::fill(values, values + A.nonZeros(), 0.0);
		for (std::size_t e = 0; e < ne; ++e)
			for (int a = 0; a < 3; ++a)
				for (int b = 0; b < 3; ++b)
					values[slots_[e][3 * a + b]] += local[e](a, b);
		return A;
	}

	Vector P1Space::assemble_vector(const std::function<Vec3(std::size_t)> &element) const
	{
		const std::size_t ne = num_elements();
		std::vector<Vec3> local(ne);
		parallel_for(ne, [&](std::size_t begin, std::size_t end) {
			for (std::size_t e = begin; e < end; ++e)
				local[e] = element(e);
		});
		Vector r = Vector::Zero(static_cast<Eigen::Index>(size()));
		for (std::size_t e = 0; e < ne; ++e)
		{
			const auto &tri = mesh_->triangles[e];
			for (int a = 0; a < 3; ++a)
				r[tri[a]] += local[e][a];
		}
		return r;
	}

	SparseMatrix P1Space::mass(const std::function<double(std::size_t)> &coeff) const
	{
		return assemble([&](std::size_t e) {
			Mat3 m;
			m.setConstant(areas_[e] / 12.0);
			m.diagonal().setConstant(areas_[e] / 6.0);
			return Mat3(coeff(e) * m);
		});
	}

	SparseMatrix P1Space::stiffness(const std::function<double(std::size_t)> &coeff) const
	{
		return assemble([&](std::size_t e) {
			Mat3 m;
			const auto &g = grads_[e];
			for (int a = 0; a < 3; ++a)
				for (int b = 0; b < 3; ++b)
					m(a, b) = g[a].dot(g[b]);
			return Mat3(coeff(e) * areas_[e] * m);
		});
	}

	SparseMatrix P1Space::weighted_mass(const Vector &w, const std::function<double(std::size_t)> &coeff) const
	{
		return assemble([&](std::size_t e) {
			const Vec3 wl = local(e, w);
			Mat3 m;
			for (int a = 0; a < 3; ++a)
				for (int b = 0; b < 3; ++b)
					m(a, b) = triple_weight(a, b, 0) * wl[0] + triple_weight(a, b, 1) * wl[1] + triple_weight(a, b, 2) * wl[2];
			return Mat3(coeff(e) * areas_[e] * m);
		});
	}

	Vector P1Space::triple(const Vector &w, const Vector &z, const std::function<double(std::size_t)> &coeff) const
	{
		return assemble_vector([&](std::size_t e) {
			const Vec3 wl = local(e, w);
			const Vec3 zl = local(e, z);
			Vec3 r = Vec3::Zero();
			for (int a = 0; a < 3; ++a)
				for (int b = 0; b < 3; ++b)
					for (int c = 0; c < 3; ++c)
						r[a] += triple_weight(a, b, c) * wl[b] * zl[c];
			return Vec3(coeff(e) * areas_[e] * r);
		});
	}

	void P1Space::apply_dirichlet(SparseMatrix &A) const
	{
		const auto &on = mesh_->on_boundary;
		for (int col = 0; col < A.outerSize(); ++col)
			for (SparseMatrix::InnerIterator it(A, col); it; ++it)
				if (on[it.row()] || on[col])
					it.valueRef() = 0.0;
		double *values = A.valuePtr();
		for (int v : mesh_->boundary_nodes)
			values[diagonal_slot_[v]] = 1.0;
	}

	void P1Space::zero_boundary(Vector &r) const
	{
		for (int v : mesh_->boundary_nodes)
			r[v] = 0.0;
	}

	double P1Space::interior_norm(const Vector &r) const
	{
		double s = 0.0;
		for (Eigen::Index i = 0; i < r.size(); ++i)
			if (!mesh_->on_boundary[i])
				s += r[i] * r[i];
		return std::sqrt(s);
	}

	void LinearSolver::factorize(const SparseMatrix &A)
	{
		if (!use_lu_)
		{
			if (!analyzed_)
			{
				ldlt_.analyzePattern(A);
				analyzed_ = true;
			}
			ldlt_.factorize(A);
			if (ldlt_.info() == Eigen::Success)
				return;
			use_lu_ = true;
		}
		if (!lu_analyzed_)
		{
			lu_.analyzePattern(A);
			lu_analyzed_ = true;
		}
		lu_.factorize(A);
		if (lu_.info() != Eigen::Success)
			throw Error(ErrorKind::LinearSolveFailure, "sparse factorization failed");
	}

	Vector LinearSolver::solve(const Vector &b) const
	{
		Vector x = use_lu_ ? Vector(lu_.solve(b)) : Vector(ldlt_.solve(b));
		if (!x.allFinite())
			throw Error(ErrorKind::LinearSolveFailure, "non-finite linear solve result");
		return x;
	}
} // namespace lensopt
