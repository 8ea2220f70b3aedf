// Runs the acceptance criteria and prints one PASS/FAIL line for each.
// The lens-recovery history is compared against tests/baselines/lens_recovery.csv,
// which is written on the first passing run when it does not exist yet.

#include <lensopt/acceptance.hpp>
#include <lensopt/io.hpp>

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace
{
	std::vector<std::vector<double>> parse_history(const std::string &text)
	{
		std::istringstream in(text);
		std::string line;
		std::getline(in, line);
		std::vector<std::vector<double>> rows;
		while (std::getline(in, line))
		{
			std::vector<double> row;
			std::istringstream cells(line);
			std::string cell;
			while (std::getline(cells, cell, ','))
				row.push_back(std::stod(cell));
			rows.push_back(row);
		}
		return rows;
	}

	// J and tau columns to 1e-6 relative, iteration count exact
	bool matches_baseline(const std::string &current, const std::string &baseline, std::string &why)
	{
		const auto a = parse_history(current), b = parse_history(baseline);
		if (a.size() != b.size())
		{
			why = std::to_string(a.size()) + " history rows, baseline has " + std::to_string(b.size());
			return false;
		}
		for (std::size_t i = 0; i < a.size(); ++i)
			for (std::size_t col : {1u, 4u})
			{
				const double x = a[i][col], y = b[i][col];
				if (std::abs(x - y) > 1e-6 * std::max(std::abs(y), 1e-300))
				{
					why = "row " + std::to_string(i) + (col == 1 ? " J " : " tau ") + lensopt::format_double(x) +
						  " vs baseline " + lensopt::format_double(y);
					return false;
				}
			}
		return true;
	}
} // namespace

int main(int argc, char **argv)
{
	CLI::App app{"acceptance criteria"};
	std::vector<int> criteria{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
	std::string baseline = LENSOPT_BASELINE_DIR "/lens_recovery.csv";
	std::string artifacts;
	app.add_option("--criteria", criteria, "criterion ids")->check(CLI::Range(1, 10));
	app.add_option("--baseline", baseline, "lens-recovery baseline history");
	app.add_option("--artifacts", artifacts, "directory for per-criterion CSV tables");
	CLI11_PARSE(app, argc, argv);

	const lensopt::RunConfig base;
	int failed = 0;
	for (int id : criteria)
	{
		const lensopt::CriterionResult r = lensopt::run_criterion(id, base);
		std::cout << lensopt::format_result(r) << " (" << lensopt::format_double(std::round(r.seconds * 10) / 10) << " s)"
				  << std::endl;
		if (!r.passed)
			++failed;
		if (!artifacts.empty())
		{
			fs::create_directories(artifacts);
			char stem[32];
			std::snprintf(stem, sizeof stem, "criterion_%02d", id);
			std::ofstream(fs::path(artifacts) / (std::string(stem) + ".csv")) << lensopt::metrics_csv(r);
			for (const auto &[name, table] : r.tables)
				std::ofstream(fs::path(artifacts) / (std::string(stem) + "_" + name)) << table;
		}
		if (id != 9)
			continue;

		std::string history;
		for (const auto &[name, table] : r.tables)
			if (name == "history.csv")
				history = table;
		if (!fs::exists(baseline))
		{
			if (r.passed)
			{
				fs::create_directories(fs::path(baseline).parent_path());
				std::ofstream(baseline, std::ios::binary) << history;
				std::cout << "[PASS] 9b lens-recovery baseline: frozen to " << baseline << std::endl;
			}
			else
			{
				std::cout << "[FAIL] 9b lens-recovery baseline: no baseline and criterion 9 failed" << std::endl;
				++failed;
			}
			continue;
		}
		std::ifstream in(baseline, std::ios::binary);
		std::ostringstream ss;
		ss << in.rdbuf();
		std::string why;
		if (matches_baseline(history, ss.str(), why))
			std::cout << "[PASS] 9b lens-recovery baseline: history matches " << baseline << std::endl;
		else
		{
			std::cout << "[FAIL] 9b lens-recovery baseline: " << why << std::endl;
			++failed;
		}
	}
	std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " failed") << std::endl;
	return failed == 0 ? 0 : 1;
}
