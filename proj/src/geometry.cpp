#include <lensopt/geometry.hpp>

#include <lensopt/error.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace lensopt
{
	namespace
	{
		double cross(const Vec2 &a, const Vec2 &b) { return a.x() * b.y() - a.y() * b.x(); }

		Vec2 closest_on_segment(const Vec2 &p, const Vec2 &a, const Vec2 &b)
		{
			const Vec2 d = b - a;
			const double len2 = d.squaredNorm();
			if (len2 == 0.0)
				return a;
			const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
			return a + t * d;
		}

		Vec2 closest_on_polygon(const std::vector<Vec2> &poly, const Vec2 &p)
		{
			Vec2 best = poly.front();
			double best_d2 = std::numeric_limits<double>::infinity();
			for (std::size_t i = 0; i < poly.size(); ++i)
			{
				const Vec2 c = closest_on_segment(p, poly[i], poly[(i + 1) % poly.size()]);
				const double d2 = (c - p).squaredNorm();
				if (d2 < best_d2)
				{
					best_d2 = d2;
					best = c;
				}
			}
			return best;
		}

		bool inside_polygon(const std::vector<Vec2> &poly, const Vec2 &p)
		{
			bool inside = false;
			for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
			{
				const Vec2 &a = poly[i];
				const Vec2 &b = poly[j];
				if ((a.y() > p.y()) != (b.y() > p.y()))
				{
					const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
					if (p.x() < x)
						inside = !inside;
				}
			}
			return inside;
		}

		double triangle_quality(const Vec2 &a, const Vec2 &b, const Vec2 &c)
		{
			const double area = 0.5 * cross(b - a, c - a);
			const double s = (b - a).squaredNorm() + (c - b).squaredNorm() + (a - c).squaredNorm();
			return s > 0.0 ? 4.0 * std::sqrt(3.0) * area / s : 0.0;
		}

		double spectral_norm(const Mat2 &m)
		{
			// largest singular value of a 2x2 matrix in closed form
			const double a = m.squaredNorm();
			const double d = m.determinant();
			const double disc = std::sqrt(std::max(0.0, a * a - 4.0 * d * d));
			return std::sqrt(0.5 * (a + disc));
		}

		using EdgeKey = std::pair<int, int>;

		EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

		std::map<EdgeKey, std::vector<int>> edge_triangles(const Mesh2D &mesh)
		{
			std::map<EdgeKey, std::vector<int>> edges;
			for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
			{
				const auto &tri = mesh.triangles[t];
				for (int e = 0; e < 3; ++e)
					edges[edge_key(tri[e], tri[(e + 1) % 3])].push_back(static_cast<int>(t));
			}
			return edges;
		}

		/// Interface edges oriented with the lens on the left.
		std::vector<InterfaceEdge> collect_interface(const Mesh2D &mesh)
		{
			std::vector<InterfaceEdge> result;
			for (const auto &[key, tris] : edge_triangles(mesh))
			{
				if (tris.size() != 2 || mesh.labels[tris[0]] == mesh.labels[tris[1]])
					continue;
				InterfaceEdge edge;
				edge.lens_triangle = mesh.labels[tris[0]] == Material::Lens ? tris[0] : tris[1];
				edge.fluid_triangle = edge.lens_triangle == tris[0] ? tris[1] : tris[0];
				const auto &lt = mesh.triangles[edge.lens_triangle];
				for (int e = 0; e < 3; ++e)
				{
					if (edge_key(lt[e], lt[(e + 1) % 3]) == key)
					{
						edge.a = lt[e];
						edge.b = lt[(e + 1) % 3];
					}
				}
				result.push_back(edge);
			}
			return result;
		}

		void compute_boundary_from_edges(Mesh2D &mesh)
		{
			mesh.on_boundary.assign(mesh.vertices.size(), 0);
			for (const auto &[key, tris] : edge_triangles(mesh))
			{
				if (tris.size() == 1)
				{
					mesh.on_boundary[key.first] = 1;
					mesh.on_boundary[key.second] = 1;
				}
			}
			mesh.boundary_nodes.clear();
			for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
				if (mesh.on_boundary[v])
					mesh.boundary_nodes.push_back(static_cast<int>(v));
		}
	} // namespace

	// --- LensShape ---------------------------------------------------------

	LensShape LensShape::none()
	{
		LensShape s;
		s.kind = Kind::None;
		return s;
	}

	LensShape LensShape::circle(const Vec2 &center, double radius)
	{
		LensShape s;
		s.kind = Kind::Circle;
		s.center = center;
		s.radius = radius;
		return s;
	}

	LensShape LensShape::ellipse(const Vec2 &center, const Vec2 &semi_axes)
	{
		LensShape s;
		s.kind = Kind::Ellipse;
		s.center = center;
		s.semi_axes = semi_axes;
		return s;
	}

	LensShape LensShape::from_polygon(std::vector<Vec2> points)
	{
		LensShape s;
		s.kind = Kind::Polygon;
		s.polygon = std::move(points);
		return s;
	}

	std::vector<Vec2> LensShape::boundary_polygon() const
	{
		std::vector<Vec2> pts;
		switch (kind)
		{
		case Kind::None:
			break;
		case Kind::Circle:
		case Kind::Ellipse:
		{
			const Vec2 axes = kind == Kind::Circle ? Vec2(radius, radius) : semi_axes;
			pts.reserve(samples);
			for (int i = 0; i < samples; ++i)
			{
				const double t = 2.0 * std::numbers::pi * i / samples;
				pts.emplace_back(center.x() + axes.x() * std::cos(t), center.y() + axes.y() * std::sin(t));
			}
			break;
		}
		case Kind::Polygon:
		{
			pts = polygon;
			double area2 = 0.0;
			for (std::size_t i = 0; i < pts.size(); ++i)
				area2 += cross(pts[i], pts[(i + 1) % pts.size()]);
			if (area2 < 0.0)
				std::reverse(pts.begin(), pts.end());
			break;
		}
		}
		return pts;
	}

	double signed_distance(const std::vector<Vec2> &polygon, const Vec2 &x)
	{
		const double d = (closest_on_polygon(polygon, x) - x).norm();
		return inside_polygon(polygon, x) ? -d : d;
	}

	// --- Mesh2D ------------------------------------------------------------

	double Mesh2D::signed_area(std::size_t t) const
	{
		const auto &tri = triangles[t];
		return 0.5 * cross(vertices[tri[1]] - vertices[tri[0]], vertices[tri[2]] - vertices[tri[0]]);
	}

	Vec2 Mesh2D::centroid(std::size_t t) const
	{
		const auto &tri = triangles[t];
		return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
	}

	std::array<Vec2, 3> Mesh2D::basis_gradients(std::size_t t) const
	{
		const auto &tri = triangles[t];
		const Vec2 &x0 = vertices[tri[0]];
		const Vec2 &x1 = vertices[tri[1]];
		const Vec2 &x2 = vertices[tri[2]];
		const double twice_area = cross(x1 - x0, x2 - x0);
		// grad lambda_i = rot(opposite edge) / (2 area)
		return {Vec2(x1.y() - x2.y(), x2.x() - x1.x()) / twice_area,
				Vec2(x2.y() - x0.y(), x0.x() - x2.x()) / twice_area,
				Vec2(x0.y() - x1.y(), x1.x() - x0.x()) / twice_area};
	}

	void Mesh2D::refresh_interface_geometry()
	{
		for (auto &e : interface)
		{
			const Vec2 d = vertices[e.b] - vertices[e.a];
			e.length = d.norm();
			e.normal = Vec2(d.y(), -d.x()) / e.length;
		}
	}

	void validate_mesh(const Mesh2D &mesh)
	{
		for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
			if (!(mesh.signed_area(t) > 0.0))
				throw Error(ErrorKind::DegenerateElement, "triangle " + std::to_string(t) + " has non-positive area");

		for (const auto &[key, tris] : edge_triangles(mesh))
		{
			if (tris.size() > 2)
				throw Error(ErrorKind::DegenerateElement, "non-manifold edge");
			if (tris.size() == 1 && !(mesh.on_boundary[key.first] && mesh.on_boundary[key.second]))
				throw Error(ErrorKind::DegenerateElement, "hanging edge away from the outer boundary");
		}

		const auto expected = collect_interface(mesh);
		if (expected.size() != mesh.interface.size())
			throw Error(ErrorKind::DegenerateElement, "interface edge set inconsistent with labels");

		for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
		{
			if (mesh.labels[t] != Material::Lens)
				continue;
			for (int v : mesh.triangles[t])
				if (mesh.on_boundary[v])
					throw Error(ErrorKind::LensTouchesBoundary, "lens triangle " + std::to_string(t) + " touches the outer boundary");
		}
	}

	Mesh2D build_mesh(const DomainSpec &spec)
	{
		const int nx = std::max(2, static_cast<int>(std::lround(spec.width / spec.h_mesh)));
		const int ny = std::max(2, static_cast<int>(std::lround(spec.height / spec.h_mesh)));
		const double hx = spec.width / nx;
		const double hy = spec.height / ny;
		const double hmin = std::min(hx, hy);
		const double diameter = std::hypot(hx, hy);

		const std::vector<Vec2> poly = spec.lens.boundary_polygon();
		if (spec.lens.kind != LensShape::Kind::None && poly.size() < 3)
			throw Error(ErrorKind::ValidationError, "lens polygon needs at least 3 points");
		for (const Vec2 &p : poly)
		{
			const double margin = std::min({p.x(), spec.width - p.x(), p.y(), spec.height - p.y()});
			if (margin < 2.0 * diameter)
				throw Error(ErrorKind::LensTouchesBoundary,
							"lens curve within " + std::to_string(margin) + " of the outer boundary (need >= 2 element diameters)");
		}

		Mesh2D mesh;
		mesh.h_mesh = hmin;
		auto grid = [nx](int i, int j) { return j * (nx + 1) + i; };
		for (int j = 0; j <= ny; ++j)
			for (int i = 0; i <= nx; ++i)
				mesh.vertices.emplace_back(i * hx, j * hy);

		std::vector<double> phi(mesh.vertices.size(), 1.0);
		if (!poly.empty())
		{
			for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
			{
				phi[v] = signed_distance(poly, mesh.vertices[v]);
				if (std::abs(phi[v]) < 0.25 * hmin)
				{
					mesh.vertices[v] = closest_on_polygon(poly, mesh.vertices[v]);
					phi[v] = 0.0;
				}
			}
		}

		std::vector<std::array<int, 3>> background;
		for (int j = 0; j < ny; ++j)
		{
			for (int i = 0; i < nx; ++i)
			{
				const int v00 = grid(i, j), v10 = grid(i + 1, j), v01 = grid(i, j + 1), v11 = grid(i + 1, j + 1);
				if ((i + j) % 2 == 0)
				{
					background.push_back({v00, v10, v11});
					background.push_back({v00, v11, v01});
				}
				else
				{
					background.push_back({v00, v10, v01});
					background.push_back({v10, v11, v01});
				}
			}
		}

		// split crossed edges at the exact crossing with the lens polygon
		std::map<EdgeKey, int> cut_vertex;
		auto crossing = [&](int a, int b) {
			const auto key = edge_key(a, b);
			if (auto it = cut_vertex.find(key); it != cut_vertex.end())
				return it->second;
			const Vec2 xa = mesh.vertices[key.first];
			const Vec2 xb = mesh.vertices[key.second];
			double lo = 0.0, hi = 1.0;
			const bool lo_inside = phi[key.first] < 0.0;
			for (int it = 0; it < 64; ++it)
			{
				const double mid = 0.5 * (lo + hi);
				const bool inside = inside_polygon(poly, xa + mid * (xb - xa));
				(inside == lo_inside ? lo : hi) = mid;
			}
			const int id = static_cast<int>(mesh.vertices.size());
			mesh.vertices.push_back(closest_on_polygon(poly, xa + 0.5 * (lo + hi) * (xb - xa)));
			phi.push_back(0.0);
			cut_vertex.emplace(key, id);
			return id;
		};

		auto better_split = [&](int p, int b, int c, int r) {
			// quad (p, b, c, r) CCW; pick the diagonal with the larger min quality
			const double q1 = std::min(triangle_quality(mesh.vertices[p], mesh.vertices[b], mesh.vertices[c]),
									   triangle_quality(mesh.vertices[p], mesh.vertices[c], mesh.vertices[r]));
			const double q2 = std::min(triangle_quality(mesh.vertices[p], mesh.vertices[b], mesh.vertices[r]),
									   triangle_quality(mesh.vertices[b], mesh.vertices[c], mesh.vertices[r]));
			return q1 >= q2;
		};

		for (const auto &tri : background)
		{
			int cuts = 0;
			for (int e = 0; e < 3; ++e)
				if (phi[tri[e]] * phi[tri[(e + 1) % 3]] < 0.0)
					++cuts;

			if (cuts == 0)
			{
				mesh.triangles.push_back(tri);
				continue;
			}
			if (cuts == 1)
			{
				// one vertex sits on the curve, the opposite edge is crossed
				for (int e = 0; e < 3; ++e)
				{
					const int a = tri[e], b = tri[(e + 1) % 3], c = tri[(e + 2) % 3];
					if (phi[b] * phi[c] < 0.0)
					{
						const int p = crossing(b, c);
						mesh.triangles.push_back({a, b, p});
						mesh.triangles.push_back({a, p, c});
					}
				}
				continue;
			}
			// two crossed edges meet at the isolated vertex a
			for (int e = 0; e < 3; ++e)
			{
				const int a = tri[e], b = tri[(e + 1) % 3], c = tri[(e + 2) % 3];
				if (phi[a] * phi[b] < 0.0 && phi[a] * phi[c] < 0.0)
				{
					const int p = crossing(a, b);
					const int r = crossing(a, c);
					mesh.triangles.push_back({a, p, r});
					if (better_split(p, b, c, r))
					{
						mesh.triangles.push_back({p, b, c});
						mesh.triangles.push_back({p, c, r});
					}
					else
					{
						mesh.triangles.push_back({p, b, r});
						mesh.triangles.push_back({b, c, r});
					}
				}
			}
		}

		mesh.labels.resize(mesh.triangles.size(), Material::Fluid);
		for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
		{
			bool neg = false, pos = false;
			for (int v : mesh.triangles[t])
			{
				neg |= phi[v] < 0.0;
				pos |= phi[v] > 0.0;
			}
			if (!neg && !pos)
				neg = !poly.empty() && inside_polygon(poly, mesh.centroid(t));
			mesh.labels[t] = neg ? Material::Lens : Material::Fluid;
		}

		mesh.on_boundary.assign(mesh.vertices.size(), 0);
		for (int j = 0; j <= ny; ++j)
		{
			for (int i = 0; i <= nx; ++i)
			{
				if (i == 0 || j == 0 || i == nx || j == ny)
				{
					mesh.on_boundary[grid(i, j)] = 1;
					mesh.boundary_nodes.push_back(grid(i, j));
				}
			}
		}

		mesh.interface = collect_interface(mesh);
		mesh.refresh_interface_geometry();

		double min_area = std::numeric_limits<double>::infinity();
		for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
			min_area = std::min(min_area, mesh.signed_area(t));
		if (min_area < 1e-4 * hx * hy)
			throw Error(ErrorKind::DegenerateElement, "min element area " + std::to_string(min_area) + " below threshold");

		validate_mesh(mesh);
		return mesh;
	}

	double lens_area(const Mesh2D &mesh)
	{
		double area = 0.0;
		for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
			if (mesh.labels[t] == Material::Lens)
				area += mesh.signed_area(t);
		return area;
	}

	// --- velocity fields ---------------------------------------------------

	VelocityField VelocityField::zero(const Mesh2D &mesh)
	{
		return VelocityField{std::vector<Vec2>(mesh.num_vertices(), Vec2::Zero())};
	}

	VelocityField VelocityField::scaled(double alpha) const
	{
		VelocityField out = *this;
		for (auto &v : out.values)
			v *= alpha;
		return out;
	}

	VelocityField VelocityField::operator+(const VelocityField &other) const
	{
		VelocityField out = *this;
		for (std::size_t i = 0; i < out.values.size(); ++i)
			out.values[i] += other.values[i];
		return out;
	}

	double VelocityField::max_norm() const
	{
		double m = 0.0;
		for (const auto &v : values)
			m = std::max(m, v.norm());
		return m;
	}

	std::vector<Mat2> velocity_gradient(const Mesh2D &mesh, const VelocityField &h)
	{
		std::vector<Mat2> dh(mesh.num_triangles());
		for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
		{
			const auto grads = mesh.basis_gradients(t);
			Mat2 d = Mat2::Zero();
			for (int k = 0; k < 3; ++k)
				d += h.values[mesh.triangles[t][k]] * grads[k].transpose();
			dh[t] = d;
		}
		return dh;
	}

	std::vector<double> velocity_divergence(const Mesh2D &mesh, const VelocityField &h)
	{
		const auto dh = velocity_gradient(mesh, h);
		std::vector<double> div(dh.size());
		for (std::size_t t = 0; t < dh.size(); ++t)
			div[t] = dh[t].trace();
		return div;
	}

	double max_admissible_step(const Mesh2D &mesh, const VelocityField &h)
	{
		double max_norm = 0.0;
		for (const auto &d : velocity_gradient(mesh, h))
			max_norm = std::max(max_norm, spectral_norm(d));
		return max_norm > 0.0 ? 0.5 / max_norm : std::numeric_limits<double>::infinity();
	}

	bool vanishes_on_boundary(const Mesh2D &mesh, const VelocityField &h)
	{
		for (int v : mesh.boundary_nodes)
			if (h.values[v].squaredNorm() != 0.0)
				return false;
		return true;
	}

	VelocityField smooth_random_field(const Mesh2D &mesh, unsigned seed, int modes, double amplitude)
	{
		double width = 0.0, height = 0.0;
		for (const auto &x : mesh.vertices)
		{
			width = std::max(width, x.x());
			height = std::max(height, x.y());
		}
		std::mt19937_64 rng(seed);
		std::normal_distribution<double> normal(0.0, 1.0);
		std::vector<double> cx(modes * modes), cy(modes * modes);
		for (int i = 0; i < modes * modes; ++i)
		{
			cx[i] = normal(rng);
			cy[i] = normal(rng);
		}

		VelocityField h = VelocityField::zero(mesh);
		for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
		{
			if (mesh.on_boundary[v])
				continue;
			const Vec2 &x = mesh.vertices[v];
			Vec2 val = Vec2::Zero();
			for (int m = 1; m <= modes; ++m)
			{
				for (int n = 1; n <= modes; ++n)
				{
					const double s = std::sin(m * std::numbers::pi * x.x() / width) * std::sin(n * std::numbers::pi * x.y() / height);
					const int idx = (m - 1) * modes + (n - 1);
					val += s * Vec2(cx[idx], cy[idx]);
				}
			}
			h.values[v] = val;
		}
		const double peak = h.max_norm();
		return peak > 0.0 ? h.scaled(amplitude / peak) : h;
	}

	VelocityField radial_bump_field(const Mesh2D &mesh, const Vec2 &center, double r_inner, double r_outer,
									double amplitude)
	{
		VelocityField h = VelocityField::zero(mesh);
		const double mid = 0.5 * (r_inner + r_outer);
		const double half = 0.5 * (r_outer - r_inner);
		for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
		{
			if (mesh.on_boundary[v])
				continue;
			const Vec2 d = mesh.vertices[v] - center;
			const double r = d.norm();
			const double s = (r - mid) / half;
			if (std::abs(s) >= 1.0 || r == 0.0)
				continue;
			const double psi = std::pow(1.0 - s * s, 3);
			h.values[v] = amplitude * psi * d / r;
		}
		return h;
	}

	// --- method of mappings ------------------------------------------------

	TransformRecord transform_factors(const Mesh2D &mesh, const VelocityField &h, double tau)
	{
		const auto dh = velocity_gradient(mesh, h);
		TransformRecord rec;
		rec.tau = tau;
		rec.jacobian.resize(dh.size());
		rec.determinant.resize(dh.size());
		rec.inverse_transpose.resize(dh.size());
		rec.alpha0 = std::numeric_limits<double>::infinity();
		rec.alpha1 = -std::numeric_limits<double>::infinity();
		rec.beta1 = 0.0;
		rec.beta2 = 0.0;
		for (std::size_t t = 0; t < dh.size(); ++t)
		{
			const Mat2 df = Mat2::Identity() + tau * dh[t];
			const double det = df.determinant();
			if (!(det > 0.0))
				throw Error(ErrorKind::FoldedElement, "I_tau <= 0 on triangle " + std::to_string(t) + " at tau = " + std::to_string(tau));
			rec.jacobian[t] = df;
			rec.determinant[t] = det;
			rec.inverse_transpose[t] = df.inverse().transpose();
			rec.alpha0 = std::min(rec.alpha0, det);
			rec.alpha1 = std::max(rec.alpha1, det);
			rec.beta1 = std::max(rec.beta1, spectral_norm(rec.inverse_transpose[t]));
			rec.beta2 = std::max(rec.beta2, spectral_norm(df.transpose()));
		}
		return rec;
	}

	Mesh2D perturb_mesh(const Mesh2D &mesh, const VelocityField &h, double tau)
	{
		Mesh2D out = mesh;
		for (std::size_t v = 0; v < out.vertices.size(); ++v)
			out.vertices[v] += tau * h.values[v];
		for (std::size_t t = 0; t < out.triangles.size(); ++t)
			if (!(out.signed_area(t) > 0.0))
				throw Error(ErrorKind::FoldedElement, "triangle " + std::to_string(t) + " folds at tau = " + std::to_string(tau));
		out.refresh_interface_geometry();
		return out;
	}

	// --- admissibility -----------------------------------------------------

	std::optional<std::vector<std::vector<int>>> interface_loops(const Mesh2D &mesh)
	{
		std::map<int, std::vector<int>> outgoing;
		for (std::size_t e = 0; e < mesh.interface.size(); ++e)
			outgoing[mesh.interface[e].a].push_back(static_cast<int>(e));
		for (const auto &[v, edges] : outgoing)
			if (edges.size() != 1)
				return std::nullopt;

		std::vector<char> used(mesh.interface.size(), 0);
		std::vector<std::vector<int>> loops;
		for (std::size_t start = 0; start < mesh.interface.size(); ++start)
		{
			if (used[start])
				continue;
			std::vector<int> loop;
			int e = static_cast<int>(start);
			while (!used[e])
			{
				used[e] = 1;
				loop.push_back(mesh.interface[e].a);
				auto it = outgoing.find(mesh.interface[e].b);
				if (it == outgoing.end())
					return std::nullopt;
				e = it->second.front();
			}
			if (e != static_cast<int>(start))
				return std::nullopt;
			loops.push_back(std::move(loop));
		}
		return loops;
	}

	AdmissibilityReport check_admissible(const Mesh2D &mesh, double max_turning_deg, double min_quality)
	{
		AdmissibilityReport rep;
		rep.interface_edges = mesh.interface.size();

		for (std::size_t t = 0; t < mesh.num_triangles() && rep.lens_interior; ++t)
		{
			if (mesh.labels[t] != Material::Lens)
				continue;
			for (int v : mesh.triangles[t])
				if (mesh.on_boundary[v])
					rep.lens_interior = false;
		}

		// geometric gap: lens vertices must stay a quarter of the mean edge away from the box
		Vec2 lo = mesh.vertices.front(), hi = lo;
		for (const Vec2 &x : mesh.vertices)
		{
			lo = lo.cwiseMin(x);
			hi = hi.cwiseMax(x);
		}
		double edge_sum = 0.0;
		for (const auto &tri : mesh.triangles)
			for (int i = 0; i < 3; ++i)
				edge_sum += (mesh.vertices[tri[(i + 1) % 3]] - mesh.vertices[tri[i]]).norm();
		const double mean_edge = edge_sum / (3.0 * static_cast<double>(mesh.num_triangles()));
		rep.lens_gap = std::numeric_limits<double>::infinity();
		for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
			if (mesh.labels[t] == Material::Lens)
				for (int v : mesh.triangles[t])
				{
					const Vec2 &x = mesh.vertices[v];
					rep.lens_gap = std::min({rep.lens_gap, x.x() - lo.x(), x.y() - lo.y(), hi.x() - x.x(), hi.y() - x.y()});
				}
		if (rep.lens_gap < 0.25 * mean_edge)
			rep.lens_interior = false;

		const auto loops = interface_loops(mesh);
		rep.interface_closed = loops.has_value();
		if (loops)
		{
			double sum = 0.0;
			std::size_t count = 0;
			for (const auto &loop : *loops)
			{
				const std::size_t m = loop.size();
				for (std::size_t i = 0; i < m; ++i)
				{
					const Vec2 d1 = mesh.vertices[loop[(i + 1) % m]] - mesh.vertices[loop[i]];
					const Vec2 d2 = mesh.vertices[loop[(i + 2) % m]] - mesh.vertices[loop[(i + 1) % m]];
					const double angle = std::abs(std::atan2(cross(d1, d2), d1.dot(d2))) * 180.0 / std::numbers::pi;
					rep.max_turning_angle_deg = std::max(rep.max_turning_angle_deg, angle);
					sum += angle;
					++count;
				}
			}
			rep.mean_turning_angle_deg = count ? sum / count : 0.0;
		}
		rep.turning_ok = rep.max_turning_angle_deg <= max_turning_deg;

		rep.min_area = std::numeric_limits<double>::infinity();
		for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
		{
			const auto &tri = mesh.triangles[t];
			rep.min_area = std::min(rep.min_area, mesh.signed_area(t));
			rep.min_quality = std::min(rep.min_quality, triangle_quality(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]));
		}
		rep.quality_ok = rep.min_area > 0.0 && rep.min_quality >= min_quality;
		return rep;
	}

	// --- point location ----------------------------------------------------

	PointLocator::PointLocator(const Mesh2D &mesh) : mesh_(&mesh)
	{
		lo_ = Vec2::Constant(std::numeric_limits<double>::infinity());
		hi_ = -lo_;
		for (const auto &x : mesh.vertices)
		{
			lo_ = lo_.cwiseMin(x);
			hi_ = hi_.cwiseMax(x);
		}
		const double cells = std::max(1.0, std::sqrt(static_cast<double>(mesh.num_triangles()) / 2.0));
		nx_ = ny_ = static_cast<int>(cells);
		bins_.resize(static_cast<std::size_t>(nx_) * ny_);
		const Vec2 ext = hi_ - lo_;
		for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
		{
			Vec2 tlo = Vec2::Constant(std::numeric_limits<double>::infinity()), thi = -tlo;
			for (int v : mesh.triangles[t])
			{
				tlo = tlo.cwiseMin(mesh.vertices[v]);
				thi = thi.cwiseMax(mesh.vertices[v]);
			}
			const int i0 = std::clamp(static_cast<int>((tlo.x() - lo_.x()) / ext.x() * nx_), 0, nx_ - 1);
			const int i1 = std::clamp(static_cast<int>((thi.x() - lo_.x()) / ext.x() * nx_), 0, nx_ - 1);
			const int j0 = std::clamp(static_cast<int>((tlo.y() - lo_.y()) / ext.y() * ny_), 0, ny_ - 1);
			const int j1 = std::clamp(static_cast<int>((thi.y() - lo_.y()) / ext.y() * ny_), 0, ny_ - 1);
			for (int j = j0; j <= j1; ++j)
				for (int i = i0; i <= i1; ++i)
					bins_[j * nx_ + i].push_back(static_cast<int>(t));
		}
	}

	PointLocator::Hit PointLocator::locate(const Vec2 &p) const
	{
		const Vec2 ext = hi_ - lo_;
		const int i = std::clamp(static_cast<int>((p.x() - lo_.x()) / ext.x() * nx_), 0, nx_ - 1);
		const int j = std::clamp(static_cast<int>((p.y() - lo_.y()) / ext.y() * ny_), 0, ny_ - 1);

		Hit best;
		double best_min = -std::numeric_limits<double>::infinity();
		for (int t : bins_[j * nx_ + i])
		{
			const auto &tri = mesh_->triangles[t];
			const Vec2 &x0 = mesh_->vertices[tri[0]];
			const Vec2 &x1 = mesh_->vertices[tri[1]];
			const Vec2 &x2 = mesh_->vertices[tri[2]];
			const double area2 = cross(x1 - x0, x2 - x0);
			const double l1 = cross(p - x0, x2 - x0) / area2;
			const double l2 = cross(x1 - x0, p - x0) / area2;
			const double l0 = 1.0 - l1 - l2;
			const double mn = std::min({l0, l1, l2});
			if (mn > best_min)
			{
				best_min = mn;
				best.triangle = t;
				best.barycentric = {l0, l1, l2};
			}
		}
		if (best.triangle < 0 || best_min < -1e-9)
			throw Error(ErrorKind::GridMismatch, "point outside the mesh");
		return best;
	}

	// --- text format -------------------------------------------------------

	void write_mesh(std::ostream &out, const Mesh2D &mesh)
	{
		out << "NODES " << mesh.num_vertices() << " / ELEMS " << mesh.num_triangles() << " / GAMMA " << mesh.interface.size() << '\n';
		out << std::setprecision(17);
		for (const auto &x : mesh.vertices)
			out << x.x() << ' ' << x.y() << '\n';
		for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
		{
			const auto &tri = mesh.triangles[t];
			out << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' ' << (mesh.labels[t] == Material::Lens ? 1 : 0) << '\n';
		}
		for (const auto &e : mesh.interface)
			out << e.a << ' ' << e.b << '\n';
	}

	Mesh2D read_mesh(std::istream &in)
	{
		std::string header;
		if (!std::getline(in, header))
			throw Error(ErrorKind::IOError, "empty mesh file");
		std::istringstream hs(header);
		std::string w1, s1, w2, s2, w3;
		std::size_t n = 0, m = 0, k = 0;
		if (!(hs >> w1 >> n >> s1 >> w2 >> m >> s2 >> w3 >> k) || w1 != "NODES" || w2 != "ELEMS" || w3 != "GAMMA")
			throw Error(ErrorKind::ParseError, "bad mesh header: " + header, 1);

		Mesh2D mesh;
		mesh.vertices.resize(n);
		for (auto &x : mesh.vertices)
			if (!(in >> x.x() >> x.y()))
				throw Error(ErrorKind::ParseError, "truncated node block");
		mesh.triangles.resize(m);
		mesh.labels.resize(m);
		for (std::size_t t = 0; t < m; ++t)
		{
			int label = 0;
			auto &tri = mesh.triangles[t];
			if (!(in >> tri[0] >> tri[1] >> tri[2] >> label))
				throw Error(ErrorKind::ParseError, "truncated element block");
			mesh.labels[t] = label == 1 ? Material::Lens : Material::Fluid;
		}
		std::vector<EdgeKey> gamma(k);
		for (auto &g : gamma)
			if (!(in >> g.first >> g.second))
				throw Error(ErrorKind::ParseError, "truncated interface block");

		compute_boundary_from_edges(mesh);
		mesh.interface = collect_interface(mesh);
		if (mesh.interface.size() != k)
			throw Error(ErrorKind::ValidationError, "interface block does not match element labels");
		for (const auto &g : gamma)
		{
			const bool found = std::any_of(mesh.interface.begin(), mesh.interface.end(), [&](const InterfaceEdge &e) {
				return edge_key(e.a, e.b) == edge_key(g.first, g.second);
			});
			if (!found)
				throw Error(ErrorKind::ValidationError, "listed interface edge is not a lens/fluid edge");
		}
		mesh.refresh_interface_geometry();

		double longest = 0.0;
		for (const auto &tri : mesh.triangles)
			for (int e = 0; e < 3; ++e)
				longest = std::max(longest, (mesh.vertices[tri[e]] - mesh.vertices[tri[(e + 1) % 3]]).norm());
		mesh.h_mesh = longest / std::sqrt(2.0);
		validate_mesh(mesh);
		return mesh;
	}
} // namespace lensopt
