#pragma once

#include <stdexcept>
#include <string>

namespace commsynth {

enum class ErrorKind { input, lp_failure, infeasible_threshold, guard };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct InputError : Error {
    explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};
struct LpFailure : Error {
    explicit LpFailure(const std::string& what) : Error(ErrorKind::lp_failure, what) {}
};
struct InfeasibleThreshold : Error {
    explicit InfeasibleThreshold(const std::string& what) : Error(ErrorKind::infeasible_threshold, what) {}
};
struct GuardExceeded : Error {
    explicit GuardExceeded(const std::string& what) : Error(ErrorKind::guard, what) {}
};

}  // namespace commsynth
