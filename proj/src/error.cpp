#include <lensopt/error.hpp>

namespace lensopt
{
	std::string_view to_string(ErrorKind kind)
	{
		switch (kind)
		{
		case ErrorKind::LensTouchesBoundary: return "LensTouchesBoundary";
		case ErrorKind::DegenerateElement: return "DegenerateElement";
		case ErrorKind::FoldedElement: return "FoldedElement";
		case ErrorKind::SingularLinearization: return "SingularLinearization";
		case ErrorKind::DegeneracyBreach: return "DegeneracyBreach";
		case ErrorKind::NonlinearSolveFailure: return "NonlinearSolveFailure";
		case ErrorKind::LinearSolveFailure: return "LinearSolveFailure";
		case ErrorKind::StateMissing: return "StateMissing";
		case ErrorKind::MissingAdjoint: return "MissingAdjoint";
		case ErrorKind::GridMismatch: return "GridMismatch";
		case ErrorKind::TraceUnavailable: return "TraceUnavailable";
		case ErrorKind::SolverFailure: return "SolverFailure";
		case ErrorKind::LineSearchExhausted: return "LineSearchExhausted";
		case ErrorKind::ParseError: return "ParseError";
		case ErrorKind::ValidationError: return "ValidationError";
		case ErrorKind::IOError: return "IOError";
		}
		return "Unknown";
	}

	Error::Error(ErrorKind kind, const std::string &message, long step)
		: std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), step_(step)
	{
	}
} // namespace lensopt
