#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lensopt
{
	enum class ErrorKind
	{
		LensTouchesBoundary,
		DegenerateElement,
		FoldedElement,
		SingularLinearization,
		DegeneracyBreach,
		NonlinearSolveFailure,
		LinearSolveFailure,
		StateMissing,
		MissingAdjoint,
		GridMismatch,
		TraceUnavailable,
		SolverFailure,
		LineSearchExhausted,
		ParseError,
		ValidationError,
		IOError,
	};

	std::string_view to_string(ErrorKind kind);

	/// Every module failure is reported through this type. `step` is the time
	/// step (or iteration / line number, depending on the kind) where the
	/// failure was detected, -1 when not applicable.
	class Error : public std::runtime_error
	{
	public:
		Error(ErrorKind kind, const std::string &message, long step = -1);

		ErrorKind kind() const { return kind_; }
		long step() const { return step_; }

	private:
		ErrorKind kind_;
		long step_;
	};
} // namespace lensopt
