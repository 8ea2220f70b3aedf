#pragma once

#include <lensopt/config.hpp>
#include <lensopt/error.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace lensopt
{
	constexpr const char *version_string = "1.0.0";

	ScalarProfile to_profile(const ProfileSpec &spec, const DomainSpec &domain);

	/// Mesh, material data, initial data and target as described by the
	/// config. Shape targets are solved here.
	ShapeSetup make_setup(const RunConfig &config);

	/// The [gradient] perturbation field on `mesh`.
	VelocityField make_field(const RunConfig &config, const Mesh2D &mesh);

	/// Exit codes of run_command.
	enum ExitCode
	{
		exit_ok = 0,
		exit_usage = 1,
		exit_error = 2,
		exit_verify_failed = 3,
	};

	/// Runs one of solve | adjoint | gradient | verify | optimize, writing its
	/// artifacts and manifest.json into out_dir. Throws Error on failure.
	int run_command(const std::string &command, const RunConfig &config, const std::filesystem::path &out_dir,
					std::ostream *log = nullptr);

	/// {"error": kind, "message": ..., "step": ...}
	std::string error_record(const Error &error);
} // namespace lensopt
