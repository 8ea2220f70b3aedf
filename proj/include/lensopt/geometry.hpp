#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace lensopt
{
	using Vec2 = Eigen::Vector2d;
	using Mat2 = Eigen::Matrix2d;

	enum class Material : std::uint8_t
	{
		Fluid = 0,
		Lens = 1,
	};

	/// Closed lens curve. Circles and ellipses are sampled into a dense CCW
	/// polygon; every geometric query goes through that polygon.
	struct LensShape
	{
		enum class Kind
		{
			None,
			Circle,
			Ellipse,
			Polygon,
		};

		Kind kind = Kind::Circle;
		Vec2 center = Vec2(0.5, 0.5);
		double radius = 0.2;
		Vec2 semi_axes = Vec2(0.25, 0.16);
		std::vector<Vec2> polygon;
		int samples = 720;

		static LensShape none();
		static LensShape circle(const Vec2 &center, double radius);
		static LensShape ellipse(const Vec2 &center, const Vec2 &semi_axes);
		static LensShape from_polygon(std::vector<Vec2> points);

		/// CCW closed polygon (last point not repeated). Empty for Kind::None.
		std::vector<Vec2> boundary_polygon() const;

		bool operator==(const LensShape &) const = default;
	};

	/// Rectangle [0, width] x [0, height] with a lens and a target element size.
	struct DomainSpec
	{
		double width = 1.0;
		double height = 1.0;
		double h_mesh = 1.0 / 32.0;
		LensShape lens;

		bool operator==(const DomainSpec &) const = default;
	};

	/// An edge of the interface. (a, b) is ordered so the lens lies to the left,
	/// which makes `normal` the outward lens normal n+.
	struct InterfaceEdge
	{
		int a = -1;
		int b = -1;
		int lens_triangle = -1;
		int fluid_triangle = -1;
		Vec2 normal = Vec2::Zero();
		double length = 0.0;
	};

	struct Mesh2D
	{
		std::vector<Vec2> vertices;
		std::vector<std::array<int, 3>> triangles;
		std::vector<Material> labels;
		std::vector<InterfaceEdge> interface;
		std::vector<int> boundary_nodes;
		std::vector<std::uint8_t> on_boundary;
		double h_mesh = 0.0;

		std::size_t num_vertices() const { return vertices.size(); }
		std::size_t num_triangles() const { return triangles.size(); }

		double signed_area(std::size_t t) const;
		Vec2 centroid(std::size_t t) const;
		/// Gradients of the three barycentric (P1 hat) functions on triangle t.
		std::array<Vec2, 3> basis_gradients(std::size_t t) const;

		/// Recomputes normals and lengths of the interface edges from the
		/// current vertex positions.
		void refresh_interface_geometry();
	};

	/// Throws DegenerateElement / LensTouchesBoundary when an invariant of
	/// Mesh2D is violated (positive areas, conformity, interface consistency,
	/// lens strictly interior).
	void validate_mesh(const Mesh2D &mesh);

	/// Structured triangulation of the rectangle with the lens fitted to element
	/// edges (nodes close to the curve are snapped onto it, remaining crossed
	/// elements are split at the exact crossing points).
	Mesh2D build_mesh(const DomainSpec &spec);

	/// Signed distance to a closed polygon, negative inside.
	double signed_distance(const std::vector<Vec2> &polygon, const Vec2 &x);

	double lens_area(const Mesh2D &mesh);

	// --- velocity fields -------------------------------------------------

	/// Continuous piecewise-linear vector field; zero on the outer boundary.
	struct VelocityField
	{
		std::vector<Vec2> values;

		static VelocityField zero(const Mesh2D &mesh);

		VelocityField scaled(double alpha) const;
		VelocityField operator+(const VelocityField &other) const;
		double max_norm() const;
	};

	/// Dh per triangle (row a, column b holds d h_a / d x_b).
	std::vector<Mat2> velocity_gradient(const Mesh2D &mesh, const VelocityField &h);
	std::vector<double> velocity_divergence(const Mesh2D &mesh, const VelocityField &h);

	/// 0.5 / max spectral norm of Dh. Infinite for Dh == 0.
	double max_admissible_step(const Mesh2D &mesh, const VelocityField &h);

	bool vanishes_on_boundary(const Mesh2D &mesh, const VelocityField &h);

	/// Smooth field sum_{m,n<=modes} c_mn sin(m pi x/W) sin(n pi y/H) per
	/// component, coefficients drawn from a seeded normal distribution and
	/// scaled so max |h| = amplitude.
	VelocityField smooth_random_field(const Mesh2D &mesh, unsigned seed, int modes, double amplitude);

	/// Radial field amplitude * psi(r) * (x - c)/r with psi a C^2 bump supported
	/// in r_inner < r < r_outer and peaking at the midpoint.
	VelocityField radial_bump_field(const Mesh2D &mesh, const Vec2 &center, double r_inner, double r_outer,
									double amplitude);

	// --- method of mappings ---------------------------------------------

	struct TransformRecord
	{
		double tau = 0.0;
		std::vector<Mat2> jacobian;     // DF_tau = I + tau Dh
		std::vector<double> determinant; // I_tau
		std::vector<Mat2> inverse_transpose; // A_tau
		double alpha0 = 1.0; // min I_tau
		double alpha1 = 1.0; // max I_tau
		double beta1 = 1.0;  // max |A_tau|
		double beta2 = 1.0;  // max |A_tau^{-1}|
	};

	TransformRecord transform_factors(const Mesh2D &mesh, const VelocityField &h, double tau);

	/// x -> x + tau h(x) at the vertices. Throws FoldedElement if any element
	/// loses positive orientation.
	Mesh2D perturb_mesh(const Mesh2D &mesh, const VelocityField &h, double tau);

	// --- admissibility --------------------------------------------------

	struct AdmissibilityReport
	{
		bool lens_interior = true;
		bool interface_closed = true;
		bool turning_ok = true;
		bool quality_ok = true;
		double max_turning_angle_deg = 0.0;
		double mean_turning_angle_deg = 0.0;
		std::size_t interface_edges = 0;
		double min_quality = 1.0;
		double min_area = 0.0;
		double lens_gap = 0.0;

		bool pass() const { return lens_interior && interface_closed && turning_ok && quality_ok; }
	};

	/// Discrete stand-in for the uniform-Lipschitz admissible set: interiority,
	/// max turning angle along the interface, min element shape quality.
	AdmissibilityReport check_admissible(const Mesh2D &mesh, double max_turning_deg = 150.0,
										 double min_quality = 0.02);

	/// Interface edges chained into closed loops (vertex sequences, lens on the
	/// left). Returns std::nullopt if the edges do not form closed loops.
	std::optional<std::vector<std::vector<int>>> interface_loops(const Mesh2D &mesh);

	// --- point location -------------------------------------------------

	class PointLocator
	{
	public:
		explicit PointLocator(const Mesh2D &mesh);

		struct Hit
		{
			int triangle = -1;
			std::array<double, 3> barycentric{};
		};

		/// Triangle containing p (closest one for points within roundoff of the
		/// mesh). Throws GridMismatch for points outside the mesh.
		Hit locate(const Vec2 &p) const;

	private:
		const Mesh2D *mesh_;
		Vec2 lo_, hi_;
		int nx_, ny_;
		std::vector<std::vector<int>> bins_;
	};

	// --- text format ----------------------------------------------------

	/// Header "NODES n / ELEMS m / GAMMA k", then n lines "x y", m lines
	/// "v0 v1 v2 label" (label 1 = lens, 0 = fluid), k lines "a b".
	void write_mesh(std::ostream &out, const Mesh2D &mesh);
	Mesh2D read_mesh(std::istream &in);
} // namespace lensopt
