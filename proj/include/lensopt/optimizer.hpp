#pragma once

#include <lensopt/problem.hpp>

#include <functional>
#include <iosfwd>
#include <string>

namespace lensopt
{
	/// Solves int (Dh:Dphi + h.phi) = -sum_k load_k . phi_k for all phi
	/// vanishing on the outer boundary.
	VelocityField riesz_descent_field(const Mesh2D &mesh, const std::vector<Vec2> &load);

	/// sqrt(int |Dh|^2 + |h|^2)
	double h1_norm(const Mesh2D &mesh, const VelocityField &h);

	struct OptimizerOptions
	{
		int max_iters = 100;
		/// stop when |h|_H1 < g_tol |h_0|_H1 or |h|_H1 < g_abs
		double g_tol = 1e-6;
		double g_abs = 1e-14;
		double c1 = 1e-4;
		int max_halvings = 25;
		/// first trial step moves no vertex farther than this
		double max_displacement = 0.02;
		double max_turning_deg = 150.0;
		double min_quality = 0.02;

		bool operator==(const OptimizerOptions &) const = default;
	};

	struct LineSearchResult
	{
		double tau = 0.0;
		double J = 0.0;
		int halvings = 0;
		Mesh2D mesh;
	};

	/// Backtracking by halves from min(tau_init, tau0(h)) until the deformed
	/// mesh is admissible and J(tau) <= J0 + c1 tau slope. Throws
	/// LineSearchExhausted after max_halvings.
	LineSearchResult line_search(const ShapeSetup &setup, const Mesh2D &mesh, const VelocityField &h, double J0,
								 double slope, double tau_init, const OptimizerOptions &opts = {});

	struct IterationRecord
	{
		int iteration = 0;
		double J = 0.0;
		double h1 = 0.0;
		double slope = 0.0;
		double tau = 0.0;
		int halvings = 0;
		double max_turning_deg = 0.0;
		double min_quality = 0.0;
		double lens_area = 0.0;
		double wall_seconds = 0.0;
	};

	enum class OptimizerStatus
	{
		Converged,
		MaxIterations,
		LineSearchExhausted,
	};

	std::string_view to_string(OptimizerStatus status);

	struct OptimizationResult
	{
		std::vector<IterationRecord> history;
		OptimizerStatus status = OptimizerStatus::MaxIterations;
		Mesh2D mesh;
		double J_final = 0.0;
	};

	/// Steepest descent in the H1 metric. Record i holds J and the descent
	/// field at iterate i and the step taken from it (tau = 0 for the last).
	OptimizationResult optimize(const ShapeSetup &setup, const OptimizerOptions &opts = {},
								const std::function<void(const IterationRecord &)> &progress = {});

	/// "iteration,J,h1,slope,tau,halvings,max_turning_deg,min_quality,lens_area".
	/// Wall times are left out so the file is reproducible; they go to the
	/// run manifest.
	void write_history_csv(std::ostream &out, const std::vector<IterationRecord> &history);
} // namespace lensopt
