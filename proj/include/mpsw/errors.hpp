#pragma once

#include <stdexcept>
#include <string>

namespace mpsw {

// Exit-code taxonomy used by the CLI: 2 usage, 3 data/parse, 4 numeric or
// degenerate state, 5 infeasible request.

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// All amplitudes numerically zero; the state cannot be normalized.
struct DegenerateStateError : NumericError {
  using NumericError::NumericError;
};

// Some training sample has zero amplitude; the NLL gradient diverges.
struct DivergentGradientError : NumericError {
  DivergentGradientError(const std::string& msg, long sample_index)
      : NumericError(msg), sample_index(sample_index) {}
  long sample_index;
};

struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Clamped-pixel slice carries essentially no probability mass.
struct ImpossibleConditionError : InfeasibleError {
  using InfeasibleError::InfeasibleError;
};

// Energy-window rejection sampling accepted too few draws.
struct InfeasibleWindowError : InfeasibleError {
  using InfeasibleError::InfeasibleError;
};

struct ThresholdNotFoundError : InfeasibleError {
  using InfeasibleError::InfeasibleError;
};

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InfeasibleError*>(&e)) return 5;
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  if (dynamic_cast<const ParseError*>(&e)) return 3;
  if (dynamic_cast<const InputError*>(&e)) return 2;
  return 1;
}

}  // namespace mpsw
