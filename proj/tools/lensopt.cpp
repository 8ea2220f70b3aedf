#include <lensopt/config.hpp>
#include <lensopt/io.hpp>
#include <lensopt/parallel.hpp>
#include <lensopt/run.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

int main(int argc, char **argv)
{
	CLI::App app{"Shape optimization of an acoustic lens in a nonlinear damped wave model"};
	app.set_version_flag("--version", lensopt::version_string);
	app.require_subcommand(1);

	std::string config_path;
	std::string output;
	int threads = 1;
	app.add_option("-c,--config", config_path, "INI configuration file")->required()->check(CLI::ExistingFile);
	app.add_option("-o,--output", output, "output directory (overrides [output] directory)");
	app.add_option("-t,--threads", threads, "worker threads")->check(CLI::Range(1, 1024));

	const char *commands[][2] = {
		{"solve", "forward solve; writes state.csv, VTK snapshots and diagnostics.json"},
		{"adjoint", "forward and adjoint solve; adds adjoint.csv and adjoint_report.json"},
		{"gradient", "volume and boundary shape derivatives for the [gradient] field, with FD check"},
		{"verify", "runs the [verify] criteria; exit code 3 if any fails"},
		{"optimize", "H1 gradient descent on the lens shape; writes history.csv and final_mesh.txt"},
	};
	for (const auto &c : commands)
		app.add_subcommand(c[0], c[1])->fallthrough();

	try
	{
		app.parse(argc, argv);
	}
	catch (const CLI::ParseError &e)
	{
		const int code = app.exit(e);
		return code == 0 ? lensopt::exit_ok : lensopt::exit_usage;
	}

	const std::string command = app.get_subcommands().front()->get_name();
	std::filesystem::path out_dir = output;
	try
	{
		lensopt::set_thread_count(threads);
		const lensopt::RunConfig config = lensopt::parse_config(config_path);
		if (out_dir.empty())
			out_dir = config.resolve(config.output.directory);
		return lensopt::run_command(command, config, out_dir, &std::cout);
	}
	catch (const lensopt::Error &e)
	{
		const std::string record = lensopt::error_record(e);
		std::cerr << record << '\n';
		if (!out_dir.empty())
		{
			std::error_code ec;
			std::filesystem::create_directories(out_dir, ec);
			std::ofstream(out_dir / "error.json") << record << '\n';
		}
		return lensopt::exit_error;
	}
}
