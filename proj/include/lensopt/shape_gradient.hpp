#pragma once

#include <lensopt/adjoint.hpp>

#include <array>
#include <iosfwd>
#include <optional>

namespace lensopt
{
	/// Everything needed to evaluate J on a (possibly deformed) mesh. Nodal
	/// data u0, u1 and u_d are carried along with the vertices.
	struct ShapeProblem
	{
		Mesh2D mesh;
		MaterialParams params;
		TimeGrid grid;
		SolverOptions solver;
		Vector u0;
		Vector u1;
		std::vector<Vector> u_d;
	};

	/// Solves the state on `mesh` (same connectivity as problem.mesh) and returns J.
	double cost_on_mesh(const ShapeProblem &problem, const Mesh2D &mesh, StateTrajectory *state_out = nullptr);

	struct VolumeTerms
	{
		double dh_contraction = 0.0; // flux vectors against (Dh^T + Dh) grad p
		double q_term = 0.0;         // (q-1)|grad u_t|^{q-3} term
		double divh_pde = 0.0;       // -(weak form density) div h
		double j_divh = 0.0;         // +j(u) div h

		double total() const { return dh_contraction + q_term + divh_pde + j_divh; }
	};

	/// Volume form as a per-element 2x2 tensor: dJ(h) = sum_e S_e : Dh_e.
	struct ShapeTensor
	{
		std::vector<std::array<Mat2, 4>> parts; // same order as VolumeTerms
		std::vector<Mat2> total;
		/// Nodal representation: dJ(h) = sum_k load[k] . h_k
		std::vector<Vec2> load;

		double apply(const Mesh2D &mesh, const VelocityField &h, VolumeTerms *terms = nullptr) const;
	};

	ShapeTensor volume_shape_tensor(const Mesh2D &mesh, const MaterialParams &params, const StateTrajectory &state,
									const AdjointTrajectory &adjoint, const std::vector<Vector> &u_d, const SolverOptions &opts = {});

	double eval_volume_form(const Mesh2D &mesh, const MaterialParams &params, const StateTrajectory &state,
							const AdjointTrajectory &adjoint, const std::vector<Vector> &u_d, const VelocityField &h,
							const SolverOptions &opts = {}, VolumeTerms *terms = nullptr);

	struct BoundaryTerms
	{
		// jumps (lens - fluid) of: mass and quadratic source terms; grad u . grad p;
		// damping flux . grad p; doubled normal-flux products; (q-1) term
		std::array<double, 5> groups{};

		double total() const { return groups[0] + groups[1] + groups[2] + groups[3] + groups[4]; }
	};

	/// How one-sided gradient traces on the interface are taken. Element uses
	/// the gradient of the adjacent triangle; Recovered fits a quadratic to the
	/// same-side nodes around each edge endpoint and interpolates the fitted
	/// gradients along the edge.
	enum class TraceMode
	{
		Element,
		Recovered,
	};

	double eval_boundary_form(const Mesh2D &mesh, const MaterialParams &params, const StateTrajectory &state,
							  const AdjointTrajectory &adjoint, const VelocityField &h, const SolverOptions &opts = {},
							  BoundaryTerms *terms = nullptr, TraceMode traces = TraceMode::Recovered);

	struct FdSample
	{
		double tau = 0.0;
		double J_plus = 0.0;
		double J_minus = 0.0;
		double one_sided = 0.0;
		double central = 0.0;
	};

	struct FdReport
	{
		double J0 = 0.0;
		std::vector<FdSample> samples; // in the order of the tau list
		double richardson = 0.0;        // from the last two central slopes
		double plateau = 0.0;           // central slope at the last tau
		double central_rate = 0.0;      // log2 of successive difference ratios
		double one_sided_rate = 0.0;
	};

	/// Finite-difference oracle for dJ.h. Different tau run concurrently; the
	/// report is assembled in tau order.
	FdReport fd_oracle(const ShapeProblem &problem, const VelocityField &h, const std::vector<double> &taus);

	struct ContinuityRow
	{
		double tau = 0.0;
		double vt_linf_l2_sq = 0.0;
		double grad_u_linf_l2_sq = 0.0;
		double grad_vt_l2l2_sq = 0.0;
		double grad_vt_lq1 = 0.0;
		double combined = 0.0;        // sum of the four entries above
		double holder_ratio = 0.0;    // combined / tau
		double lipschitz_ratio = 0.0; // unsquared L2-type norms / tau
	};

	struct ContinuityReport
	{
		std::vector<ContinuityRow> rows;
		bool holder_decreasing = false;
		double lipschitz_spread = 0.0; // max/min of lipschitz_ratio
	};

	/// Differences of the state on the deformed mesh (pulled back by node
	/// identification) against the reference state.
	ContinuityReport continuity_diagnostics(const ShapeProblem &problem, const VelocityField &h, const std::vector<double> &taus);

	struct ShapeGradientReport
	{
		double dJ_volume = 0.0;
		VolumeTerms volume_terms;
		std::optional<double> dJ_boundary;
		BoundaryTerms boundary_terms;
		std::optional<FdReport> fd;
		double fd_relative_error = 0.0;
		double boundary_relative_gap = 0.0;
	};

	constexpr double eps_abs = 1e-12;

	double relative_error(double value, double reference);

	void write_report(std::ostream &out, const ShapeGradientReport &report);
	void write_fd_csv(std::ostream &out, const FdReport &fd);
} // namespace lensopt
