#pragma once

#include <lensopt/shape_gradient.hpp>

#include <memory>

namespace lensopt
{
	/// Named analytic space profile.
	struct ScalarProfile
	{
		enum class Kind
		{
			Zero,
			Bump,      // amplitude (1 - s^2)^3, s = |x - center| / radius < 1
			Eigenmode, // amplitude sin(m pi x / width) sin(n pi y / height)
		};

		Kind kind = Kind::Zero;
		double amplitude = 0.0;
		Vec2 center = Vec2(0.18, 0.18);
		double radius = 0.12;
		int mode_x = 1;
		int mode_y = 1;
		double width = 1.0;
		double height = 1.0;

		static ScalarProfile zero() { return {}; }
		static ScalarProfile bump(const Vec2 &center, double radius, double amplitude);
		static ScalarProfile eigenmode(int m, int n, double amplitude, double width = 1.0, double height = 1.0);

		double value(const Vec2 &x) const;
		Vec2 gradient(const Vec2 &x) const;
		Vector sample(const Mesh2D &mesh) const;

		bool operator==(const ScalarProfile &) const = default;
	};

	/// A state trajectory computed on a target-shape mesh, resampled by linear
	/// interpolation onto other meshes.
	class ShapeTarget
	{
	public:
		ShapeTarget(Mesh2D mesh, std::vector<Vector> u);

		const Mesh2D &mesh() const { return *mesh_; }
		const std::vector<Vector> &trajectory() const { return u_; }

		/// Values at the vertices of `mesh`, one vector per time level. With
		/// `gradients`, also the interpolated recovered (area-averaged nodal)
		/// gradient of the target at each vertex (level-major).
		std::vector<Vector> sample(const Mesh2D &mesh, std::vector<std::vector<Vec2>> *gradients = nullptr) const;

	private:
		std::unique_ptr<Mesh2D> mesh_;
		std::vector<Vector> u_;
		std::unique_ptr<PointLocator> locator_;
	};

	/// Initial datum either given analytically in space (sampled afresh on
	/// every mesh) or as nodal values that move with the vertices.
	struct InitialData
	{
		ScalarProfile profile;
		std::optional<Vector> nodal;

		bool eulerian() const { return !nodal.has_value(); }
		Vector on(const Mesh2D &mesh) const;
	};

	struct TargetData
	{
		enum class Mode
		{
			Profile, // constant in time, analytic in space
			Nodal,   // imported trajectory carried with the vertices
			Shape,   // generated from a target lens shape
		};

		Mode mode = Mode::Profile;
		ScalarProfile profile;
		std::vector<Vector> nodal;
		std::shared_ptr<const ShapeTarget> shape;
	};

	/// Full problem description with the data conventions of the optimizer:
	/// analytic and shape-generated data are evaluated at the physical vertex
	/// positions of whatever mesh is in use.
	struct ShapeSetup
	{
		Mesh2D mesh;
		MaterialParams params;
		TimeGrid grid;
		SolverOptions solver;
		InitialData u0;
		InitialData u1;
		TargetData u_d;

		/// Data sampled on `mesh` (same connectivity as this->mesh).
		ShapeProblem on(const Mesh2D &mesh) const;
		std::vector<Vector> target_on(const Mesh2D &mesh, std::vector<std::vector<Vec2>> *gradients = nullptr) const;
	};

	/// Solves the state on the target mesh and wraps it for resampling.
	std::shared_ptr<const ShapeTarget> generate_target(const DomainSpec &target_domain, const MaterialParams &params,
													   const TimeGrid &grid, const SolverOptions &solver,
													   const ScalarProfile &u0, const ScalarProfile &u1);

	/// Nodal sensitivities of J with respect to the initial data, from the
	/// adjoint at t = 0: dJ = r0 . du0 + r1 . du1.
	struct InitialSensitivity
	{
		Vector r0;
		Vector r1;
	};

	InitialSensitivity initial_sensitivity(const Mesh2D &mesh, const MaterialParams &params, const ShapeProblem &problem,
										   const AdjointTrajectory &adjoint, const SolverOptions &opts = {});

	struct ShapeDerivative
	{
		StateTrajectory state;
		AdjointTrajectory adjoint;
		ShapeTensor tensor;
		double J = 0.0;
		/// dJ(h) = sum_k load[k] . h_k, including the data-transport terms
		std::vector<Vec2> load;

		double apply(const VelocityField &h) const;
	};

	/// State, adjoint, volume form and the extra load from analytic or
	/// shape-generated data, at the vertex positions of `mesh`.
	ShapeDerivative shape_derivative(const ShapeSetup &setup, const Mesh2D &mesh);
} // namespace lensopt
