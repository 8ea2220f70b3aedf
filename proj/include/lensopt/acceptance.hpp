#pragma once

#include <lensopt/config.hpp>

#include <string>
#include <utility>
#include <vector>

namespace lensopt
{
	struct CriterionResult
	{
		int id = 0;
		std::string name;
		bool passed = false;
		std::string summary;
		/// (name, value) pairs, written as "metric,value" CSV
		std::vector<std::pair<std::string, double>> metrics;
		/// extra CSV tables: (file name, contents)
		std::vector<std::pair<std::string, std::string>> tables;
		double seconds = 0.0;
	};

	const char *criterion_name(int id);

	/// Runs acceptance criterion `id` (1..10). Problem variants are derived
	/// from `base`, which should be the reference configuration.
	CriterionResult run_criterion(int id, const RunConfig &base);

	/// One line: "[PASS] 7 volume/boundary consistency: ..." or "[FAIL] ...".
	std::string format_result(const CriterionResult &r);

	std::string metrics_csv(const CriterionResult &r);

	/// Configuration of the ellipse-to-circle recovery run.
	RunConfig lens_recovery_config(const RunConfig &base);
} // namespace lensopt
