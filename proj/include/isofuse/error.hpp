#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isofuse {

enum class Errc {
    invalid_argument,
    duplicate_design_point,
    dimension_mismatch,
    not_a_chain,
    infeasible,
    no_active_nodes,
    below_observed_range,
    missing_nuisance,
    degenerate_likelihood,
    insufficient_data,
    null_beats_alternative,
    domain_error,
    point_not_testable,
    incomplete_values,
    descent_violation,
    unknown_study,
    no_eval_points,
    degenerate_baseline,
    parse_error,
    range_error,
    empty_group,
};

constexpr std::string_view errc_name(Errc c) noexcept
{
    switch (c) {
        case Errc::invalid_argument: return "InvalidArgument";
        case Errc::duplicate_design_point: return "DuplicateDesignPoint";
        case Errc::dimension_mismatch: return "DimensionMismatch";
        case Errc::not_a_chain: return "NotAChain";
        case Errc::infeasible: return "Infeasible";
        case Errc::no_active_nodes: return "NoActiveNodes";
        case Errc::below_observed_range: return "BelowObservedRange";
        case Errc::missing_nuisance: return "MissingNuisance";
        case Errc::degenerate_likelihood: return "DegenerateLikelihood";
        case Errc::insufficient_data: return "InsufficientData";
        case Errc::null_beats_alternative: return "NullBeatsAlternative";
        case Errc::domain_error: return "DomainError";
        case Errc::point_not_testable: return "PointNotTestable";
        case Errc::incomplete_values: return "IncompleteValues";
        case Errc::descent_violation: return "DescentViolation";
        case Errc::unknown_study: return "UnknownStudy";
        case Errc::no_eval_points: return "NoEvalPoints";
        case Errc::degenerate_baseline: return "DegenerateBaseline";
        case Errc::parse_error: return "ParseError";
        case Errc::range_error: return "RangeError";
        case Errc::empty_group: return "EmptyGroup";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code)
    {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

} // namespace isofuse
