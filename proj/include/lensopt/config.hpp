#pragma once

#include <lensopt/optimizer.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lensopt
{
	/// Initial datum or static target: an analytic profile or a CSV file.
	struct ProfileSpec
	{
		enum class Kind
		{
			Zero,
			Bump,
			Eigenmode,
			File,
		};

		Kind kind = Kind::Zero;
		Vec2 center = Vec2(0.5, 0.5);
		double radius = 0.1;
		double amplitude = 0.0;
		std::array<int, 2> modes{1, 1};
		std::string file;

		bool operator==(const ProfileSpec &) const = default;
	};

	struct TargetSpec
	{
		enum class Mode
		{
			Profile,
			File,
			Shape,
		};

		Mode mode = Mode::Profile;
		ProfileSpec profile;
		std::string file;
		LensShape shape;

		bool operator==(const TargetSpec &) const = default;
	};

	/// Perturbation direction used by `gradient`.
	struct FieldSpec
	{
		enum class Kind
		{
			Zero,
			Random,
			Bump,
			File,
		};

		Kind kind = Kind::Random;
		int modes = 4;
		double amplitude = 0.05;
		Vec2 center = Vec2(0.5, 0.5);
		double r_inner = 0.1;
		double r_outer = 0.3;
		std::string file;

		bool operator==(const FieldSpec &) const = default;
	};

	struct GradientOptions
	{
		bool enabled = true;
		bool boundary = true;
		TraceMode traces = TraceMode::Recovered;
		std::vector<double> fd_taus{1e-2, 5e-3, 2.5e-3};
		FieldSpec field;

		bool operator==(const GradientOptions &) const = default;
	};

	struct OutputOptions
	{
		std::string directory = "out";
		/// time levels written as VTK snapshots
		std::vector<int> vtk_steps{0};
		/// every csv_stride-th time level goes to the trajectory CSV (the last always does)
		int csv_stride = 1;

		bool operator==(const OutputOptions &) const = default;
	};

	struct VerifyOptions
	{
		std::vector<int> criteria{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

		bool operator==(const VerifyOptions &) const = default;
	};

	/// One run. The defaults are the reference configuration.
	struct RunConfig
	{
		std::uint64_t seed = 0;
		DomainSpec domain;
		MaterialParams params;
		TimeGrid grid;
		SolverOptions solver;
		ProfileSpec u0;
		ProfileSpec u1;
		TargetSpec target;
		GradientOptions gradient;
		OptimizerOptions optimizer;
		OutputOptions output;
		VerifyOptions verify;
		/// directory that relative file names are resolved against (not serialized)
		std::filesystem::path base_dir;

		RunConfig();

		std::filesystem::path resolve(const std::string &file) const;
		bool operator==(const RunConfig &other) const;
	};

	/// Parses "key = value" lines grouped in [sections]; '#' starts a comment.
	/// Throws ParseError (step = first offending line) for syntax problems and
	/// ValidationError listing every violated invariant.
	RunConfig parse_config_text(const std::string &text, const std::filesystem::path &base_dir = {});
	RunConfig parse_config(const std::filesystem::path &path);

	/// Complete config text, every key written; parse(serialize(c)) == c.
	std::string serialize_config(const RunConfig &config);

	/// Every violated invariant of a config, empty when valid.
	std::vector<std::string> config_violations(const RunConfig &config);

	/// 64-bit FNV-1a.
	std::uint64_t fnv1a(const std::string &data);
} // namespace lensopt
