#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lpvds {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidMatrix : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct ParseError : Error {
  int line;
  ParseError(const std::string& msg, int line_no)
      : Error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

struct IoError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct TooFewSamples : Error {
  using Error::Error;
};

struct SpecMismatch : Error {
  using Error::Error;
};

struct NotAPartition : Error {
  using Error::Error;
};

struct IndexOutOfRange : Error {
  using Error::Error;
};

struct DegenerateComponent : Error {
  using Error::Error;
};

struct NotHurwitz : Error {
  using Error::Error;
};

// Stage P of the alternation found no feasible (P, D) for the current (A, B),
// even after the trust-region pullback attempts.
struct InfeasibleAtStageP : Error {
  int failing_block;  // index k of the worst small-gain block, -1 if unknown
  InfeasibleAtStageP(const std::string& msg, int k)
      : Error(msg), failing_block(k) {}
};

struct CompositionInfeasible : Error {
  std::vector<double> witness;  // most-violating eigenvector direction
  CompositionInfeasible(const std::string& msg, std::vector<double> w)
      : Error(msg), witness(std::move(w)) {}
};

struct CertificateViolation : Error {
  using Error::Error;
};

}  // namespace lpvds
