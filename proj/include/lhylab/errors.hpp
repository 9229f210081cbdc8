#pragma once

#include <stdexcept>
#include <string>

namespace lhylab {

// Invalid or inconsistent user input (config keys, parameter ranges).
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A truncated sum whose analytic tail bound exceeds the requested tolerance.
// Carries the bound and, when known, the window that would be needed.
class certificate_error : public std::runtime_error {
 public:
  certificate_error(const std::string& what_failed, double bound, double tolerance,
                    double required_window = 0.0)
      : std::runtime_error(make_message(what_failed, bound, tolerance, required_window)),
        bound_(bound),
        tolerance_(tolerance),
        required_window_(required_window) {}

  double bound() const { return bound_; }
  double tolerance() const { return tolerance_; }
  double required_window() const { return required_window_; }

 private:
  static std::string make_message(const std::string& what, double bound, double tol,
                                  double window) {
    std::string m = "tail certificate failed for " + what + ": bound " +
                    std::to_string(bound) + " exceeds tolerance " + std::to_string(tol);
    if (window > 0.0) m += " (required window ~ " + std::to_string(window) + ")";
    return m;
  }
  double bound_;
  double tolerance_;
  double required_window_;
};

// Violated operation precondition (caller bug or unusable parameters).
class precondition_error : public std::runtime_error {
 public:
  explicit precondition_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical routine failed to converge or produced an inconsistent result.
class diagnostic_error : public std::runtime_error {
 public:
  explicit diagnostic_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw precondition_error(msg);
}

}  // namespace lhylab
